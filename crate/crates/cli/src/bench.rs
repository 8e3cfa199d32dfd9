use std::io;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};
use toposeg::morphology::{reconstruct, ReconstructionAlgorithm};
use toposeg::phantom::{generate_phantom, DetachedLayer, PhantomSpec};
use toposeg::preprocess::build_border_marker;
use toposeg::IntensityRaster;

use crate::manifest::RunManifest;

#[derive(Args, Debug, Serialize)]
pub struct BenchArgs {
    /// Algorithms to time, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "naive,sequential,queue", value_parser = parse_algo)]
    pub algo: Vec<ReconstructionAlgorithm>,
    #[arg(long, default_value_t = 512)]
    pub width: usize,
    #[arg(long, default_value_t = 512)]
    pub height: usize,
    /// Phantom seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Timed runs per algorithm.
    #[arg(long, default_value_t = 5, value_parser = crate::positive)]
    pub repeat: usize,
    /// Output CSV (default: standard output).
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

fn parse_algo(s: &str) -> std::result::Result<ReconstructionAlgorithm, String> {
    s.parse().map_err(|e: toposeg::Error| e.to_string())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchRow {
    pub algo: String,
    pub width: usize,
    pub height: usize,
    pub repeat: usize,
    pub median_ns: u128,
    /// Output identical to the naive reconstruction.
    pub validated: bool,
}

/// Median, with the two middle values averaged for an even count.
pub fn median(mut values: Vec<u128>) -> u128 {
    values.sort_unstable();
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2
    }
}

/// Red channel of a broken phantom and its border marker.
pub fn bench_input(width: usize, height: usize, seed: u64) -> Result<(IntensityRaster, IntensityRaster)> {
    let spec = PhantomSpec { width, height, seed, detached_layer: DetachedLayer::Broken, ..PhantomSpec::default() };
    let pair = generate_phantom(&spec).context("--width/--height too small for a phantom")?;
    let mask = pair.image.split_channels().remove(0);
    let marker = build_border_marker(&mask)?;
    Ok((marker, mask))
}

pub fn run(args: BenchArgs) -> Result<()> {
    let mut manifest = RunManifest::start("bench", &args);
    let (marker, mask) = manifest.time("generate", || bench_input(args.width, args.height, args.seed))?;
    let reference = manifest.time("reference", || reconstruct(&marker, &mask, ReconstructionAlgorithm::Naive))?;

    let mut rows = Vec::new();
    for &algo in &args.algo {
        // The naive reference run doubles as the naive validation run.
        let validated = algo == ReconstructionAlgorithm::Naive || reconstruct(&marker, &mask, algo)? == reference;
        let mut times = Vec::with_capacity(args.repeat);
        if validated {
            for _ in 0..args.repeat {
                let t = Instant::now();
                let out = reconstruct(&marker, &mask, algo)?;
                times.push(t.elapsed().as_nanos());
                drop(out);
            }
        }
        let median_ns = if validated { median(times) } else { 0 };
        rows.push(BenchRow { algo: algo.name().into(), width: args.width, height: args.height, repeat: args.repeat, median_ns, validated });
    }

    let sink: Box<dyn io::Write> = match &args.csv {
        Some(path) => Box::new(std::fs::File::create(path).with_context(|| format!("cannot write --csv {}", path.display()))?),
        None => Box::new(io::stdout()),
    };
    let mut w = csv::Writer::from_writer(sink);
    for row in &rows {
        w.serialize(row)?;
    }
    w.flush()?;

    if let Some(path) = &args.csv {
        manifest.outputs.push(path.clone());
        manifest.seeds = vec![args.seed];
        manifest.details = serde_json::to_value(&rows)?;
        let manifest_path = args.manifest.clone().unwrap_or_else(|| RunManifest::default_path(path));
        manifest.finish(&manifest_path)?;
    }
    if let Some(bad) = rows.iter().find(|r| !r.validated) {
        bail!("{} reconstruction differs from the naive reference", bad.algo);
    }
    Ok(())
}
