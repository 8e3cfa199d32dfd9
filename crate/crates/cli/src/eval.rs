use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use toposeg::io::{read_label_png, write_atomic};
use toposeg::metrics::{evaluate, EvalReport};

use crate::files::{ensure_parent, matched_pairs};
use crate::manifest::RunManifest;

#[derive(Args, Debug, Serialize)]
pub struct EvalArgs {
    /// Predicted label PNG or directory.
    #[arg(long)]
    pub pred: PathBuf,
    /// Ground-truth label PNG or directory.
    #[arg(long)]
    pub gt: PathBuf,
    /// Output report JSON.
    #[arg(long)]
    pub report: PathBuf,
    /// Also write one CSV row per image plus a `mean` row.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageReport {
    pub name: String,
    pub pred: PathBuf,
    pub gt: PathBuf,
    #[serde(flatten)]
    pub report: EvalReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub count: usize,
    /// Unweighted mean of the per-image reports.
    pub mean: EvalReport,
    pub images: Vec<ImageReport>,
}

impl BatchReport {
    pub fn new(images: Vec<ImageReport>) -> Option<Self> {
        let reports: Vec<EvalReport> = images.iter().map(|r| r.report).collect();
        Some(Self { count: images.len(), mean: EvalReport::mean(&reports)?, images })
    }
}

/// Evaluates every (name, pred, gt) triple.
pub fn evaluate_pairs(pairs: &[(String, PathBuf, PathBuf)]) -> Result<Vec<ImageReport>> {
    pairs
        .par_iter()
        .map(|(name, pred, gt)| {
            let report = evaluate(&read_label_png(pred)?, &read_label_png(gt)?)
                .with_context(|| format!("cannot compare {} with {}", pred.display(), gt.display()))?;
            Ok(ImageReport { name: name.clone(), pred: pred.clone(), gt: gt.clone(), report })
        })
        .collect()
}

pub fn write_report(report: &BatchReport, json: &Path, csv_path: Option<&Path>) -> Result<()> {
    ensure_parent(json)?;
    write_atomic(json, serde_json::to_string_pretty(report)?.as_bytes())?;
    if let Some(path) = csv_path {
        ensure_parent(path)?;
        let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
        w.write_record(["name", "accuracy", "jaccard_sc", "jaccard_le", "mean_contour_distance"])?;
        let rows = report.images.iter().map(|r| (r.name.as_str(), r.report)).chain([("mean", report.mean)]);
        for (name, r) in rows {
            w.write_record([
                name.to_string(),
                r.accuracy.to_string(),
                r.jaccard_sc.to_string(),
                r.jaccard_le.to_string(),
                r.mean_contour_distance.to_string(),
            ])?;
        }
        w.flush()?;
    }
    Ok(())
}

pub fn run(args: EvalArgs) -> Result<()> {
    let mut manifest = RunManifest::start("eval", &args);
    let pairs = matched_pairs(&args.pred, "pred_", &args.gt, "gt_")?;
    let images = manifest.time("evaluate", || evaluate_pairs(&pairs))?;
    let report = BatchReport::new(images).expect("at least one pair");
    write_report(&report, &args.report, args.csv.as_deref())?;
    manifest.inputs = pairs.into_iter().flat_map(|(_, p, g)| [p, g]).collect();
    manifest.outputs = std::iter::once(args.report.clone()).chain(args.csv.clone()).collect();
    manifest.details = serde_json::to_value(report.mean)?;
    let path = args.manifest.clone().unwrap_or_else(|| RunManifest::default_path(&args.report));
    manifest.finish(&path)
}
