//! Acceptance battery. Prints one PASS/FAIL line per criterion and exits non-zero
//! when any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use biot_validation::criteria;

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let criteria = criteria();
    if args.iter().any(|a| a == "--list") {
        for c in &criteria {
            println!("criterion_{}: test", c.number);
        }
        return ExitCode::SUCCESS;
    }

    println!("\nrunning {} acceptance criteria", criteria.len());
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(&c.check))
            .unwrap_or_else(|_| Err("panicked".to_string()));
        let secs = start.elapsed().as_secs_f64();
        let (k, name) = (c.number, c.name);
        match outcome {
            Ok(detail) => println!("PASS criterion {k} ({name}, {secs:.1}s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {k} ({name}, {secs:.1}s): {detail}");
            }
        }
    }
    println!(
        "\nacceptance result: {} passed; {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
