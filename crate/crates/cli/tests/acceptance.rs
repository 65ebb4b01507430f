//! Acceptance criteria A1–A8 at their stated tolerances. Prints one line per
//! criterion, then fails if any criterion failed.

use spraylab_cli::config::DEFAULT_SEED;
use spraylab_cli::suites::{run_criterion, CRITERIA};

#[test]
fn acceptance_criteria() {
    let mut failed = Vec::new();
    for (id, _, _) in CRITERIA {
        let start = std::time::Instant::now();
        let r = run_criterion(id, DEFAULT_SEED);
        println!(
            "{} {} ({}): {} [{:.1}s]",
            if r.passed { "PASS" } else { "FAIL" },
            r.id,
            r.suite,
            r.title,
            start.elapsed().as_secs_f64()
        );
        for (k, v) in &r.metrics {
            println!("    {k} = {v:e}");
        }
        for f in &r.failures {
            println!("    failure: {f}");
        }
        if !r.passed {
            failed.push(r.id);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
