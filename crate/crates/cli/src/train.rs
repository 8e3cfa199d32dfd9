use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use rayon::prelude::*;
use serde::Serialize;
use toposeg::classifier::{train, LocalWindowClassifier, TrainConfig, DEFAULT_RADIUS};
use toposeg::io::{read_label_png, read_png, write_atomic};
use toposeg::preprocess::{geodesic_preprocess, PreprocessConfig};
use toposeg::tiling::{grid_crops, CropSpec};

use crate::files::keyed_pngs;
use crate::manifest::RunManifest;

#[derive(Args, Debug, Serialize)]
pub struct TrainArgs {
    /// Directory holding `img_*.png` images and matching `gt_*.png` labels.
    #[arg(long)]
    pub data: PathBuf,
    /// Output model JSON.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = DEFAULT_RADIUS)]
    pub radius: usize,
    #[arg(long, default_value_t = TrainConfig::default().epochs)]
    pub epochs: usize,
    #[arg(long, default_value_t = TrainConfig::default().learning_rate)]
    pub lr: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fraction of crop pixels used as samples.
    #[arg(long, default_value_t = TrainConfig::default().subsample)]
    pub subsample: f64,
    #[arg(long, default_value_t = 256)]
    pub crop_size: usize,
    /// Crop stride (default: the crop size).
    #[arg(long)]
    pub stride: Option<usize>,
    /// Train on geodesic pre-processed images (default).
    #[arg(long, overrides_with = "no_preprocess")]
    pub preprocess: bool,
    /// Train on raw images.
    #[arg(long, overrides_with = "preprocess")]
    pub no_preprocess: bool,
    /// Per-epoch loss history as CSV.
    #[arg(long)]
    pub history: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

pub fn run(args: TrainArgs) -> Result<()> {
    let mut manifest = RunManifest::start("train", &args);
    let preprocess = !args.no_preprocess;
    let crop = CropSpec::new(args.crop_size, args.stride.unwrap_or(args.crop_size))
        .context("--crop-size and --stride must satisfy 1 <= stride <= size")?;
    let clf = LocalWindowClassifier::new(args.radius, 3).context("invalid --radius")?;
    let cfg = TrainConfig { epochs: args.epochs, learning_rate: args.lr, subsample: args.subsample, seed: args.seed, ..TrainConfig::default() };
    if !(cfg.learning_rate > 0.0) {
        bail!("--lr must be positive");
    }
    if !(cfg.subsample > 0.0 && cfg.subsample <= 1.0) {
        bail!("--subsample must be in (0, 1]");
    }

    let images = keyed_pngs(&args.data, "img_")?;
    let labels = keyed_pngs(&args.data, "gt_")?;
    let is_image = |p: &PathBuf| p.file_name().unwrap().to_string_lossy().starts_with("img_");
    if !images.values().any(is_image) {
        bail!("no img_*.png files in --data {}", args.data.display());
    }
    let pairs = images
        .iter()
        .map(|(key, img)| match labels.get(key) {
            Some(gt) => Ok((img.clone(), gt.clone())),
            None => bail!("{} has no matching gt_{key}.png", img.display()),
        })
        .collect::<Result<Vec<_>>>()?;

    let crops = manifest.time("load", || {
        pairs
            .par_iter()
            .map(|(img, gt)| -> Result<_> {
                let mut image = read_png(img)?;
                if image.channels() != 3 {
                    bail!("{} is not an RGB image", img.display());
                }
                if preprocess {
                    image = geodesic_preprocess(&image, PreprocessConfig::default())?;
                }
                let gt_map = read_label_png(gt)?;
                grid_crops(&image, &gt_map, crop).with_context(|| format!("cannot crop {}", img.display()))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let crops: Vec<_> = crops.into_iter().flatten().collect();
    if crops.is_empty() {
        bail!("no crop of --data {} contains tissue labels", args.data.display());
    }

    let mut clf = clf;
    clf.trained_on_preprocessed = preprocess;
    let (model, history) = manifest.time("train", || train(&clf, &crops, &cfg))?;
    write_atomic(&args.model, model.to_json().as_bytes())?;
    manifest.outputs.push(args.model.clone());
    if let Some(path) = &args.history {
        let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
        w.write_record(["epoch", "loss"])?;
        for (i, loss) in history.iter().enumerate() {
            w.write_record([i.to_string(), format!("{loss:e}")])?;
        }
        w.flush()?;
        manifest.outputs.push(path.clone());
    }

    manifest.inputs = pairs.into_iter().flat_map(|(i, g)| [i, g]).collect();
    manifest.seeds = vec![args.seed];
    manifest.details = serde_json::json!({
        "crops": crops.len(),
        "preprocess": preprocess,
        "initial_loss": history.first(),
        "final_loss": history.last(),
    });
    let path = args.manifest.clone().unwrap_or_else(|| RunManifest::default_path(&args.model));
    manifest.finish(&path)
}
