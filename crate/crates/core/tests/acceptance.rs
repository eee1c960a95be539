//! Runs every acceptance pipeline and prints one PASS/FAIL line per
//! criterion. Exits nonzero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use szdet::pipeline::{run_pipeline, PIPELINES};

const SEED: u64 = 42;

fn main() -> ExitCode {
    let mut failed = 0;
    let mut total = 0;
    for name in PIPELINES {
        let start = Instant::now();
        match run_pipeline(name, SEED) {
            Ok(report) => {
                for c in &report.criteria {
                    println!("{c}");
                    total += 1;
                    if !c.passed {
                        failed += 1;
                    }
                }
            }
            Err(e) => {
                println!("FAIL [{name}] pipeline error: {e}");
                total += 1;
                failed += 1;
            }
        }
        println!("# {name} finished in {:.1} s", start.elapsed().as_secs_f64());
    }
    println!("# {} of {total} criteria passed", total - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
