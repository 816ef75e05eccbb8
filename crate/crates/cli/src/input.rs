//! Config loading and output writing shared by the subcommands.

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// A parsed JSON config together with its text, for locating errors.
pub struct Source {
    path: PathBuf,
    text: String,
}

impl Source {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        Ok(Self {
            path: path.to_path_buf(),
            text,
        })
    }

    pub fn parse<T: DeserializeOwned>(&self) -> Result<T> {
        serde_json::from_str(&self.text)
            .map_err(|e| anyhow!("{}:{}:{}: {e}", self.path.display(), e.line(), e.column()))
    }

    /// Error about `field`, pointing at the first line that mentions it.
    pub fn field_error(&self, field: &str, err: impl Display) -> anyhow::Error {
        let key = format!("\"{field}\"");
        match self.text.lines().position(|l| l.contains(&key)) {
            Some(i) => anyhow!("{}:{}: field `{field}`: {err}", self.path.display(), i + 1),
            None => anyhow!("{}: field `{field}`: {err}", self.path.display()),
        }
    }
}

/// Attach `field` context from `src` to a library error.
pub trait FieldContext<T> {
    fn field(self, src: &Source, field: &str) -> Result<T>;
}

impl<T, E: Display> FieldContext<T> for std::result::Result<T, E> {
    fn field(self, src: &Source, field: &str) -> Result<T> {
        self.map_err(|e| src.field_error(field, e))
    }
}

#[derive(Serialize)]
struct Envelope<'a, C, B> {
    msent_version: &'static str,
    command: &'a str,
    config: &'a C,
    #[serde(flatten)]
    body: &'a B,
}

/// Pretty JSON with the library version and resolved config embedded.
pub fn json_report<C: Serialize, B: Serialize>(command: &str, config: &C, body: &B) -> Result<String> {
    let env = Envelope {
        msent_version: msent::VERSION,
        command,
        config,
        body,
    };
    let mut text = serde_json::to_string_pretty(&env)?;
    text.push('\n');
    Ok(text)
}

pub fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("cannot write {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
