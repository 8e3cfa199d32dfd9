//! Raw versus pre-processed training on phantoms, with per-phantom scores.
//!
//! `cargo run --release --example topology [TRAIN_COUNT TEST_COUNT]`

use std::time::Instant;

use toposeg::experiment::{run_topology_experiment, ExperimentConfig};
use toposeg::metrics::EvalReport;

fn row(r: &EvalReport) -> String {
    format!("sc {:.3} le {:.3} acc {:.4} dist {:5.2}", r.jaccard_sc, r.jaccard_le, r.accuracy, r.mean_contour_distance)
}

fn main() {
    let mut cfg = ExperimentConfig::default();
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>().expect("counts are integers"));
    if let Some(n) = args.next() {
        cfg.train_count = n;
    }
    if let Some(n) = args.next() {
        cfg.test_count = n;
    }
    let start = Instant::now();
    let report = run_topology_experiment(&cfg).expect("experiment runs");
    for o in &report.outcomes {
        println!("{:>6} {:<9} raw {}   pre {}", o.seed, format!("{:?}", o.detached_layer), row(&o.raw), row(&o.preprocessed));
    }
    println!("final loss: raw {:.4}, pre {:.4}", report.raw_loss.last().unwrap(), report.preprocessed_loss.last().unwrap());
    println!("mean raw {}", row(&report.mean_raw()));
    println!("mean pre {}", row(&report.mean_preprocessed()));
    println!(
        "SC wins {}/{}, mean SC gain {:.4}, {:.1} s",
        report.sc_wins(),
        report.outcomes.len(),
        report.mean_sc_improvement(),
        start.elapsed().as_secs_f64()
    );
}
