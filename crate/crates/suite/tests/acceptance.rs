//! Acceptance suite: prints one line per criterion and exits nonzero if any fails.
//! Pass criterion numbers as arguments to run a subset.

use std::process::ExitCode;

use hypam_suite::{criteria, Suite};

fn main() -> ExitCode {
    let only: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut suite = Suite::default();
    let mut failed = 0;
    let mut total = 0;
    for c in criteria() {
        if !only.is_empty() && !only.contains(&c.number) {
            continue;
        }
        let v = suite.evaluate(&c);
        total += 1;
        failed += usize::from(!v.passed);
        println!(
            "criterion {:>2} {} {} [{:.1} s]: {}",
            v.number,
            if v.passed { "PASS" } else { "FAIL" },
            v.title,
            v.seconds,
            v.detail
        );
    }
    println!("acceptance: {} of {total} criteria pass", total - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
