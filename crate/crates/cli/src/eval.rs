use std::fs::OpenOptions;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use manifold_mtf::data::{load_dataset, mtx, read_labels};
use manifold_mtf::graphs::type_feature_rows;
use manifold_mtf::metrics::MetricReport;

use crate::usage;

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Predicted labels, one integer per line.
    #[arg(long)]
    pub pred: PathBuf,
    /// Ground-truth labels, one integer per line.
    #[arg(long)]
    pub truth: PathBuf,
    /// Feature rows for cohesiveness, as a MatrixMarket file.
    #[arg(long, conflicts_with = "manifest")]
    pub features: Option<PathBuf>,
    /// Take cohesiveness features from this dataset; needs --type.
    #[arg(long, requires = "type_index")]
    pub manifest: Option<PathBuf>,
    #[arg(long = "type", id = "type_index")]
    pub type_index: Option<usize>,
    /// Append a CSV row here, writing the header first if the file is new.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

pub fn run(args: &EvalArgs) -> Result<()> {
    let pred = read_labels(&args.pred)?;
    let truth = read_labels(&args.truth)?;
    let features = match (&args.features, &args.manifest, args.type_index) {
        (Some(path), _, _) => Some(mtx::read_dense(path)?),
        (None, Some(manifest), Some(h)) => {
            let ds = load_dataset(manifest)?;
            if h >= ds.m() {
                return Err(usage(format!("--type {h} but the dataset has {} types", ds.m())));
            }
            Some(type_feature_rows(&ds, h))
        }
        _ => None,
    };
    let report = MetricReport::evaluate(&pred, &truth, features.as_ref())?;
    println!("{report}");

    if let Some(path) = &args.csv {
        let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .with_context(|| format!("opening {}", path.display()))?;
        if fresh {
            writeln!(file, "{}", MetricReport::CSV_HEADER)?;
        }
        writeln!(file, "{}", report.csv_row())?;
    }
    Ok(())
}
