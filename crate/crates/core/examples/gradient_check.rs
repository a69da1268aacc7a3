//! Runs the finite-difference gradient suite over every layer, loss and
//! end-to-end objective.

use fuselab::training::{gradient_suite, GRADCHECK_STEP};

fn main() {
    let tol = std::env::args().nth(1).map_or(1e-4, |s| s.parse().expect("tolerance"));
    let results = gradient_suite(tol).expect("gradient suite");
    println!("central differences, h = {GRADCHECK_STEP:e}, tol = {tol:e}");
    for r in &results {
        println!("{:<32} {:>10.3e}  {}", r.name, r.max_rel_err, if r.passed { "ok" } else { "FAIL" });
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    println!("{} checks, {failed} failed", results.len());
}
