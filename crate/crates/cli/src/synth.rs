use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use toposeg::experiment::phantom_set_member;
use toposeg::io::{write_atomic, write_label_png, write_png};
use toposeg::phantom::{generate_phantom, DetachedLayer, PhantomSpec};

use crate::manifest::RunManifest;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DetachedChoice {
    /// Even indices unbroken, odd indices broken.
    Alternate,
    None,
    Unbroken,
    Broken,
}

#[derive(Args, Debug, Serialize)]
pub struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub count: usize,
    /// Seed of phantom 0; phantom `i` uses `seed + i`.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// JSON phantom description used as the template for every phantom.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub height: Option<usize>,
    #[arg(long, value_enum, default_value_t = DetachedChoice::Alternate)]
    pub detached: DetachedChoice,
    #[arg(long)]
    pub break_width: Option<usize>,
    #[arg(long)]
    pub strip_thickness: Option<usize>,
    #[arg(long)]
    pub gap_thickness: Option<usize>,
    #[arg(long)]
    pub wave_amplitude: Option<usize>,
    /// Manifest location (default: OUT/manifest.json).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

fn template(args: &SynthArgs) -> Result<PhantomSpec> {
    let mut spec = match &args.spec {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("cannot read --spec {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("invalid phantom spec in {}", path.display()))?
        }
        None => PhantomSpec::default(),
    };
    let overrides = [
        (&mut spec.width, args.width),
        (&mut spec.height, args.height),
        (&mut spec.break_width, args.break_width),
        (&mut spec.strip_thickness, args.strip_thickness),
        (&mut spec.gap_thickness, args.gap_thickness),
        (&mut spec.wave_amplitude, args.wave_amplitude),
    ];
    for (slot, value) in overrides {
        if let Some(v) = value {
            *slot = v;
        }
    }
    spec.validate().context("phantom flags describe an impossible phantom")?;
    Ok(spec)
}

pub fn member(template: &PhantomSpec, seed: u64, choice: DetachedChoice, index: usize) -> PhantomSpec {
    let mut spec = phantom_set_member(template, seed, index);
    spec.detached_layer = match choice {
        DetachedChoice::Alternate => spec.detached_layer,
        DetachedChoice::None => DetachedLayer::None,
        DetachedChoice::Unbroken => DetachedLayer::Unbroken,
        DetachedChoice::Broken => DetachedLayer::Broken,
    };
    spec
}

pub fn run(args: SynthArgs) -> Result<()> {
    if args.count == 0 {
        bail!("--count must be at least 1");
    }
    let mut manifest = RunManifest::start("synth", &args);
    let template = template(&args)?;
    fs::create_dir_all(&args.out).with_context(|| format!("cannot create {}", args.out.display()))?;
    let specs: Vec<PhantomSpec> = (0..args.count).map(|i| member(&template, args.seed, args.detached, i)).collect();
    let outputs = manifest.time("generate", || {
        specs
            .par_iter()
            .enumerate()
            .map(|(i, spec)| {
                let pair = generate_phantom(spec)?;
                let img = args.out.join(format!("img_{i:04}.png"));
                let gt = args.out.join(format!("gt_{i:04}.png"));
                write_png(&pair.image, &img)?;
                write_label_png(&pair.gt, &gt)?;
                Ok([img, gt])
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let listing = args.out.join("phantoms.json");
    write_atomic(&listing, serde_json::to_string_pretty(&specs)?.as_bytes())?;

    manifest.outputs = outputs.into_iter().flatten().collect();
    manifest.outputs.push(listing);
    manifest.seeds = specs.iter().map(|s| s.seed).collect();
    let path = args.manifest.clone().unwrap_or_else(|| RunManifest::default_path(&args.out));
    manifest.finish(&path)
}
