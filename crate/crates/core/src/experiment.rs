//! End-to-end pipeline and the raw-versus-preprocessed comparison on
//! phantoms.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{segment, train, LocalWindowClassifier, TrainConfig, DEFAULT_RADIUS};
use crate::error::Result;
use crate::metrics::{evaluate, EvalReport};
use crate::phantom::{generate_phantom, DetachedLayer, PhantomPair, PhantomSpec};
use crate::postprocess::enforce_topology;
use crate::preprocess::{geodesic_preprocess, PreprocessConfig};
use crate::raster::{IntensityRaster, LabelMap};
use crate::tiling::{grid_crops, CropSpec, DEFAULT_PAD_MULTIPLE};

/// Options for [`run_pipeline`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineOptions {
    pub preprocess: Option<PreprocessConfig>,
    pub pad_multiple: usize,
    pub postprocess: bool,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self { preprocess: Some(PreprocessConfig::default()), pad_multiple: DEFAULT_PAD_MULTIPLE, postprocess: true }
    }
}

/// Optional pre-processing, segmentation and optional post-processing.
pub fn run_pipeline(clf: &LocalWindowClassifier, img: &IntensityRaster, opts: &PipelineOptions) -> Result<LabelMap> {
    let input = match opts.preprocess {
        Some(cfg) => geodesic_preprocess(img, cfg)?,
        None => img.clone(),
    };
    let labels = segment(clf, &input, opts.pad_multiple)?;
    if opts.postprocess {
        enforce_topology(&labels)
    } else {
        Ok(labels)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Template for every phantom; `seed` and `detached_layer` are overridden.
    pub phantom: PhantomSpec,
    pub train_count: usize,
    pub test_count: usize,
    pub train_seed_base: u64,
    pub test_seed_base: u64,
    pub radius: usize,
    pub crop: CropSpec,
    pub train: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let phantom = PhantomSpec::default();
        let crop = CropSpec::square(phantom.width.min(phantom.height)).expect("valid crop");
        Self {
            phantom,
            train_count: 100,
            test_count: 50,
            train_seed_base: 1_000,
            test_seed_base: 9_000,
            radius: DEFAULT_RADIUS,
            crop,
            train: TrainConfig::default(),
        }
    }
}

/// Phantom `index` of a set: even indices unbroken, odd indices broken.
pub fn phantom_set_member(template: &PhantomSpec, seed_base: u64, index: usize) -> PhantomSpec {
    PhantomSpec {
        seed: seed_base + index as u64,
        detached_layer: if index % 2 == 0 { DetachedLayer::Unbroken } else { DetachedLayer::Broken },
        ..template.clone()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhantomOutcome {
    pub seed: u64,
    pub detached_layer: DetachedLayer,
    pub raw: EvalReport,
    pub preprocessed: EvalReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub outcomes: Vec<PhantomOutcome>,
    pub raw_loss: Vec<f64>,
    pub preprocessed_loss: Vec<f64>,
    pub raw_model: LocalWindowClassifier,
    pub preprocessed_model: LocalWindowClassifier,
}

impl ExperimentReport {
    /// Phantoms where preprocessing gives a strictly higher SC Jaccard.
    pub fn sc_wins(&self) -> usize {
        self.outcomes.iter().filter(|o| o.preprocessed.jaccard_sc > o.raw.jaccard_sc).count()
    }

    pub fn mean_sc_improvement(&self) -> f64 {
        self.outcomes.iter().map(|o| o.preprocessed.jaccard_sc - o.raw.jaccard_sc).sum::<f64>()
            / self.outcomes.len() as f64
    }

    pub fn mean_raw(&self) -> EvalReport {
        EvalReport::mean(&self.outcomes.iter().map(|o| o.raw).collect::<Vec<_>>()).expect("non-empty")
    }

    pub fn mean_preprocessed(&self) -> EvalReport {
        EvalReport::mean(&self.outcomes.iter().map(|o| o.preprocessed).collect::<Vec<_>>()).expect("non-empty")
    }
}

fn generate_set(template: &PhantomSpec, seed_base: u64, count: usize) -> Result<Vec<(PhantomSpec, PhantomPair)>> {
    (0..count)
        .into_par_iter()
        .map(|i| {
            let spec = phantom_set_member(template, seed_base, i);
            generate_phantom(&spec).map(|pair| (spec, pair))
        })
        .collect()
}

fn train_variant(
    cfg: &ExperimentConfig,
    set: &[(PhantomSpec, PhantomPair)],
    preprocess: bool,
) -> Result<(LocalWindowClassifier, Vec<f64>)> {
    let crops = set
        .par_iter()
        .map(|(_, pair)| {
            let image = if preprocess {
                geodesic_preprocess(&pair.image, PreprocessConfig::default())?
            } else {
                pair.image.clone()
            };
            grid_crops(&image, &pair.gt, cfg.crop)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect::<Vec<_>>();
    let mut clf = LocalWindowClassifier::new(cfg.radius, 3)?;
    clf.trained_on_preprocessed = preprocess;
    train(&clf, &crops, &cfg.train)
}

/// Trains one classifier on raw phantoms and one on pre-processed phantoms
/// (same seeds and hyper-parameters) and evaluates both, with
/// post-processing, on a disjoint test set.
pub fn run_topology_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let train_set = generate_set(&cfg.phantom, cfg.train_seed_base, cfg.train_count)?;
    let (raw_model, raw_loss) = train_variant(cfg, &train_set, false)?;
    let (pre_model, pre_loss) = train_variant(cfg, &train_set, true)?;
    drop(train_set);

    let test_set = generate_set(&cfg.phantom, cfg.test_seed_base, cfg.test_count)?;
    let raw_opts = PipelineOptions { preprocess: None, ..PipelineOptions::default() };
    let pre_opts = PipelineOptions::default();
    let outcomes = test_set
        .par_iter()
        .map(|(spec, pair)| {
            let raw = evaluate(&run_pipeline(&raw_model, &pair.image, &raw_opts)?, &pair.gt)?;
            let preprocessed = evaluate(&run_pipeline(&pre_model, &pair.image, &pre_opts)?, &pair.gt)?;
            Ok(PhantomOutcome { seed: spec.seed, detached_layer: spec.detached_layer, raw, preprocessed })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentReport {
        outcomes,
        raw_loss,
        preprocessed_loss: pre_loss,
        raw_model,
        preprocessed_model: pre_model,
    })
}
