//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//! Tolerances are pinned in `bdssep::experiments`.

use std::process::ExitCode;

use bdssep::experiments::{run_acceptance, AcceptanceOptions};

fn main() -> ExitCode {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let opts = AcceptanceOptions {
        workers,
        ..AcceptanceOptions::default()
    };
    let summary = run_acceptance(&opts, |r, secs| println!("{} [{secs:.1}s]", r.line()));
    let total = summary.results.len();
    println!("{} of {total} criteria passed", total - summary.failed.len());
    if summary.passed {
        ExitCode::SUCCESS
    } else {
        println!("failed: {:?}", summary.failed);
        ExitCode::FAILURE
    }
}
