use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use rayon::prelude::*;
use serde::Serialize;
use toposeg::classifier::{predict, LocalWindowClassifier};
use toposeg::io::{read_label_png, read_png, write_label_png, write_p3f, write_png};
use toposeg::postprocess::enforce_topology;
use toposeg::preprocess::{geodesic_preprocess, PreprocessConfig};
use toposeg::tiling::{pad_to_multiple, unpad_labels, DEFAULT_PAD_MULTIPLE};
use toposeg::{argmax_labels, IntensityRaster, LabelMap, ProbabilityMap};

use crate::files::{ensure_parent, io_pairs, matched_pairs};
use crate::manifest::RunManifest;

pub fn load_model(path: &Path) -> Result<LocalWindowClassifier> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read --model {}", path.display()))?;
    let model = LocalWindowClassifier::from_json(&text).with_context(|| format!("invalid model {}", path.display()))?;
    model.validate().with_context(|| format!("invalid model {}", path.display()))?;
    Ok(model)
}

fn manifest_path(explicit: &Option<PathBuf>, output: &Path) -> PathBuf {
    explicit.clone().unwrap_or_else(|| RunManifest::default_path(output))
}

fn with_path<T>(result: toposeg::Result<T>, path: &Path) -> Result<T> {
    result.with_context(|| format!("while processing {}", path.display()))
}

#[derive(Args, Debug, Serialize)]
pub struct PreprocessArgs {
    /// Input PNG or directory of PNGs.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output PNG or directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Output the reconstruction itself instead of its blend with the input.
    #[arg(long)]
    pub no_blend: bool,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

pub fn preprocess(args: PreprocessArgs) -> Result<()> {
    let mut manifest = RunManifest::start("preprocess", &args);
    let pairs = io_pairs(&args.input, &args.out)?;
    let cfg = PreprocessConfig { blend: !args.no_blend };
    manifest.time("preprocess", || {
        pairs.par_iter().try_for_each(|(input, output)| -> Result<()> {
            let img = read_png(input)?;
            let out = with_path(geodesic_preprocess(&img, cfg), input)?;
            ensure_parent(output)?;
            write_png(&out, output)?;
            Ok(())
        })
    })?;
    let path = manifest_path(&args.manifest, &args.out);
    (manifest.inputs, manifest.outputs) = pairs.into_iter().unzip();
    manifest.finish(&path)
}

/// Padded prediction, cropped back to the input size.
pub fn classify(
    model: &LocalWindowClassifier,
    img: &IntensityRaster,
    pad_multiple: usize,
) -> toposeg::Result<(LabelMap, ProbabilityMap)> {
    let (padded, original) = pad_to_multiple(img, pad_multiple)?;
    let probs = predict(model, &padded)?;
    let labels = unpad_labels(&argmax_labels(&probs), original)?;
    let ((w, h), stride) = (original, padded.width());
    let mut cropped = Vec::with_capacity(w * h * 3);
    for k in 0..3 {
        let channel = probs.channel(k);
        for y in 0..h {
            cropped.extend_from_slice(&channel[y * stride..y * stride + w]);
        }
    }
    Ok((labels, ProbabilityMap::new(w, h, cropped)?))
}

#[derive(Args, Debug, Serialize)]
pub struct SegmentArgs {
    /// Model JSON written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    /// Input PNG or directory of PNGs.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output label PNG or directory.
    #[arg(long)]
    pub labels: PathBuf,
    /// Also write class probabilities as P3F (file or directory).
    #[arg(long)]
    pub probs: Option<PathBuf>,
    /// Pad the input to a multiple of this size before classifying.
    #[arg(long, default_value_t = DEFAULT_PAD_MULTIPLE, value_parser = crate::positive)]
    pub pad_multiple: usize,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

pub fn segment(args: SegmentArgs) -> Result<()> {
    let mut manifest = RunManifest::start("segment", &args);
    let model = load_model(&args.model)?;
    let pairs = io_pairs(&args.input, &args.labels)?;
    let probs_paths: Vec<Option<PathBuf>> = match &args.probs {
        None => vec![None; pairs.len()],
        Some(p) if args.input.is_dir() => {
            fs::create_dir_all(p).with_context(|| format!("cannot create {}", p.display()))?;
            pairs.iter().map(|(i, _)| Some(p.join(i.file_name().unwrap()).with_extension("p3f"))).collect()
        }
        Some(p) => vec![Some(p.clone())],
    };
    manifest.time("segment", || {
        pairs.par_iter().zip(&probs_paths).try_for_each(|((input, output), probs_path)| -> Result<()> {
            let img = read_png(input)?;
            let (labels, probs) = with_path(classify(&model, &img, args.pad_multiple), input)?;
            ensure_parent(output)?;
            write_label_png(&labels, output)?;
            if let Some(p) = probs_path {
                ensure_parent(p)?;
                write_p3f(&probs, p)?;
            }
            Ok(())
        })
    })?;
    let path = manifest_path(&args.manifest, &args.labels);
    manifest.inputs = std::iter::once(args.model.clone()).chain(pairs.iter().map(|p| p.0.clone())).collect();
    manifest.outputs = pairs.into_iter().map(|p| p.1).chain(probs_paths.into_iter().flatten()).collect();
    manifest.seeds = vec![model.seed];
    manifest.finish(&path)
}

#[derive(Args, Debug, Serialize)]
pub struct PostprocessArgs {
    /// Label PNG or directory of label PNGs.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

pub fn postprocess(args: PostprocessArgs) -> Result<()> {
    let mut manifest = RunManifest::start("postprocess", &args);
    let pairs = io_pairs(&args.input, &args.out)?;
    manifest.time("postprocess", || {
        pairs.par_iter().try_for_each(|(input, output)| -> Result<()> {
            let labels = read_label_png(input)?;
            let clean = with_path(enforce_topology(&labels), input)?;
            ensure_parent(output)?;
            write_label_png(&clean, output)?;
            Ok(())
        })
    })?;
    let path = manifest_path(&args.manifest, &args.out);
    (manifest.inputs, manifest.outputs) = pairs.into_iter().unzip();
    manifest.finish(&path)
}

pub const COLOR_BACKGROUND: [u8; 3] = [0, 255, 255];
pub const COLOR_SC: [u8; 3] = [255, 0, 255];
pub const COLOR_EPIDERMIS: [u8; 3] = [255, 165, 0];

/// Each label color mixed half and half with the image (rounding halves up).
/// Gray images are expanded to RGB; unlabeled pixels keep the image color.
pub fn render_overlay(img: &IntensityRaster, labels: &LabelMap) -> Result<IntensityRaster> {
    if img.dims() != labels.dims() {
        bail!("image is {}x{} but labels are {}x{}", img.width(), img.height(), labels.width(), labels.height());
    }
    if img.channels() != 1 && img.channels() != 3 {
        bail!("overlay needs a gray or RGB image, got {} channels", img.channels());
    }
    let (w, h) = img.dims();
    let mut out = IntensityRaster::filled(w, h, 3, 0)?;
    for y in 0..h {
        for x in 0..w {
            let color = match labels.get(x, y) {
                1 => Some(COLOR_BACKGROUND),
                2 => Some(COLOR_SC),
                3 => Some(COLOR_EPIDERMIS),
                _ => None,
            };
            for c in 0..3 {
                let v = img.get(x, y, c.min(img.channels() - 1));
                let mixed = match color {
                    Some(col) => ((v as u16 + col[c] as u16 + 1) / 2) as u8,
                    None => v,
                };
                out.set(x, y, c, mixed);
            }
        }
    }
    Ok(out)
}

#[derive(Args, Debug, Serialize)]
pub struct OverlayArgs {
    /// Image PNG or directory.
    #[arg(long)]
    pub image: PathBuf,
    /// Label PNG or directory (paired with images by file name key).
    #[arg(long)]
    pub labels: PathBuf,
    /// Output PNG or directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

pub fn overlay(args: OverlayArgs) -> Result<()> {
    let mut manifest = RunManifest::start("overlay", &args);
    let pairs = matched_pairs(&args.image, "img_", &args.labels, "gt_")?;
    let batch = args.labels.is_dir();
    if batch {
        fs::create_dir_all(&args.out).with_context(|| format!("cannot create {}", args.out.display()))?;
    }
    let outputs = manifest.time("overlay", || {
        pairs
            .par_iter()
            .map(|(_, image, labels)| -> Result<PathBuf> {
                let out = if batch { args.out.join(labels.file_name().unwrap()) } else { args.out.clone() };
                let rendered = render_overlay(&read_png(image)?, &read_label_png(labels)?)
                    .with_context(|| format!("cannot overlay {} on {}", labels.display(), image.display()))?;
                ensure_parent(&out)?;
                write_png(&rendered, &out)?;
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let path = manifest_path(&args.manifest, &args.out);
    manifest.inputs = pairs.into_iter().flat_map(|(_, i, l)| [i, l]).collect();
    manifest.outputs = outputs;
    manifest.finish(&path)
}
