//! Runs the acceptance suite and prints one verdict line per criterion.
//!
//! `VRLAB_QUICK=1` selects the reduced-resolution variant.

use std::process::ExitCode;

use vrlab::acceptance::{AcceptanceOptions, Suite};

fn main() -> ExitCode {
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let quick = std::env::var("VRLAB_QUICK").is_ok_and(|v| v == "1");
    let suite = Suite::new(AcceptanceOptions { quick });
    let mut failed = 0;
    for id in 1..=12 {
        let out = suite.run(id);
        println!("{}", out.line());
        failed += usize::from(!out.passed);
    }
    println!("{} of 12 criteria passed", 12 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
