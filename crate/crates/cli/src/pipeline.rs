use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use rayon::prelude::*;
use serde::Serialize;
use toposeg::io::{read_png, write_label_png};
use toposeg::postprocess::enforce_topology;
use toposeg::preprocess::{geodesic_preprocess, PreprocessConfig};
use toposeg::tiling::DEFAULT_PAD_MULTIPLE;

use crate::eval::{evaluate_pairs, write_report, BatchReport};
use crate::files::{ensure_parent, io_pairs, pair_key};
use crate::manifest::RunManifest;
use crate::process::{classify, load_model};

#[derive(Args, Debug, Serialize)]
pub struct PipelineArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Input PNG or directory of PNGs.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output label PNG or directory.
    #[arg(long)]
    pub labels: PathBuf,
    /// Pre-process before segmenting (default: as the model was trained).
    #[arg(long, overrides_with = "no_preprocess")]
    pub preprocess: bool,
    #[arg(long, overrides_with = "preprocess")]
    pub no_preprocess: bool,
    #[arg(long)]
    pub no_blend: bool,
    #[arg(long)]
    pub no_postprocess: bool,
    #[arg(long, default_value_t = DEFAULT_PAD_MULTIPLE, value_parser = crate::positive)]
    pub pad_multiple: usize,
    /// Ground truth (file or directory) to evaluate against.
    #[arg(long, requires = "report")]
    pub gt: Option<PathBuf>,
    #[arg(long, requires = "gt")]
    pub report: Option<PathBuf>,
    #[arg(long, requires = "report")]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

pub fn run(args: PipelineArgs) -> Result<()> {
    let mut manifest = RunManifest::start("pipeline", &args);
    let model = load_model(&args.model)?;
    let preprocess = if args.preprocess {
        true
    } else if args.no_preprocess {
        false
    } else {
        model.trained_on_preprocessed
    };
    let cfg = PreprocessConfig { blend: !args.no_blend };
    let pairs = io_pairs(&args.input, &args.labels)?;

    let started = std::time::Instant::now();
    pairs.par_iter().try_for_each(|(input, output)| -> Result<()> {
        let mut img = read_png(input)?;
        if preprocess {
            img = geodesic_preprocess(&img, cfg).with_context(|| format!("cannot pre-process {}", input.display()))?;
        }
        let (mut labels, _) = classify(&model, &img, args.pad_multiple).with_context(|| format!("cannot segment {}", input.display()))?;
        if !args.no_postprocess {
            labels = enforce_topology(&labels).with_context(|| format!("cannot post-process {}", input.display()))?;
        }
        ensure_parent(output)?;
        write_label_png(&labels, output)?;
        Ok(())
    })?;
    manifest.timings_ms.insert("segment".into(), started.elapsed().as_secs_f64() * 1e3);
    manifest.inputs = std::iter::once(args.model.clone()).chain(pairs.iter().map(|p| p.0.clone())).collect();
    manifest.outputs = pairs.iter().map(|p| p.1.clone()).collect();
    manifest.seeds = vec![model.seed];

    if let (Some(gt), Some(report_path)) = (&args.gt, &args.report) {
        let triples = if gt.is_dir() {
            if !args.labels.is_dir() {
                bail!("--gt is a directory but --labels is not");
            }
            let truths = crate::files::keyed_pngs(gt, "gt_")?;
            pairs
                .iter()
                .map(|(input, output)| {
                    let key = pair_key(input);
                    match truths.get(&key) {
                        Some(g) => Ok((key, output.clone(), g.clone())),
                        None => bail!("no ground truth in {} for {}", gt.display(), input.display()),
                    }
                })
                .collect::<Result<Vec<_>>>()?
        } else {
            vec![(pair_key(gt), args.labels.clone(), gt.clone())]
        };
        let images = manifest.time("evaluate", || evaluate_pairs(&triples))?;
        let report = BatchReport::new(images).expect("at least one image");
        write_report(&report, report_path, args.csv.as_deref())?;
        manifest.outputs.push(report_path.clone());
        manifest.outputs.extend(args.csv.clone());
        manifest.inputs.extend(triples.into_iter().map(|t| t.2));
        manifest.details = serde_json::to_value(report.mean)?;
    }
    let path = args.manifest.clone().unwrap_or_else(|| RunManifest::default_path(&args.labels));
    manifest.finish(&path)
}
