use std::path::{Path, PathBuf};

use anyhow::Result;

use msent::experiment::{run_experiment, ExperimentConfig};

use crate::input::{write_output, FieldContext, Source};

/// `results.csv` -> `results.summary.csv`.
pub fn summary_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("experiment");
    out.with_file_name(format!("{stem}.summary.csv"))
}

/// Writes the grid CSV to `out` and the summary beside it; without `out` the summary goes to stdout.
pub fn run(src: &Source, out: Option<&Path>, seed: Option<u64>, workers: Option<usize>) -> Result<()> {
    let mut cfg: ExperimentConfig = src.parse()?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    cfg.validate().field(src, "model")?;
    let result = run_experiment(&cfg, workers)?;
    match out {
        Some(path) => {
            write_output(Some(path), &result.grid_csv(&cfg))?;
            let summary = summary_path(path);
            write_output(Some(&summary), &result.summary_csv(&cfg))?;
            eprintln!(
                "wrote {} grid rows to {} and {} summary rows to {}",
                result.points.len(),
                path.display(),
                result.summary.len(),
                summary.display()
            );
        }
        None => write_output(None, &result.summary_csv(&cfg))?,
    }
    Ok(())
}
