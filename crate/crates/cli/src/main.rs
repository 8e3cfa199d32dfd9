//! `toposeg` command line tool.
//!
//! Exit codes: 0 on success, 1 when an input cannot be read or a
//! precondition fails, 2 on a usage error.

mod bench;
mod eval;
mod files;
mod manifest;
mod pipeline;
mod process;
mod synth;
mod train;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "toposeg", version, about = "Topology-aware segmentation of layered tissue images")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate seeded phantom image / ground-truth pairs.
    Synth(synth::SynthArgs),
    /// Geodesic reconstruction pre-processing (file or directory).
    Preprocess(process::PreprocessArgs),
    /// Train a window classifier on a directory of image / ground-truth pairs.
    Train(train::TrainArgs),
    /// Classify every pixel of an image.
    Segment(process::SegmentArgs),
    /// Enforce layer topology on a label map (file or directory).
    Postprocess(process::PostprocessArgs),
    /// Compare predicted label maps with ground truth.
    Eval(eval::EvalArgs),
    /// Render a label map over its image.
    Overlay(process::OverlayArgs),
    /// Pre-process, segment, post-process and optionally evaluate.
    Pipeline(pipeline::PipelineArgs),
    /// Time the reconstruction algorithms on a phantom.
    Bench(bench::BenchArgs),
}

/// Value parser for counts that must be at least 1.
pub(crate) fn positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let result = match cli.command {
        Command::Synth(args) => synth::run(args),
        Command::Preprocess(args) => process::preprocess(args),
        Command::Train(args) => train::run(args),
        Command::Segment(args) => process::segment(args),
        Command::Postprocess(args) => process::postprocess(args),
        Command::Eval(args) => eval::run(args),
        Command::Overlay(args) => process::overlay(args),
        Command::Pipeline(args) => pipeline::run(args),
        Command::Bench(args) => bench::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
