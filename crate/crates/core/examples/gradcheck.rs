//! Finite-difference gradient checks: primitives, single blocks, whole models.
use std::time::Instant;

use gswin::gradcheck::{run_scope, Scope};

fn main() -> gswin::Result<()> {
    for scope in [Scope::Ops, Scope::Block, Scope::Model] {
        let start = Instant::now();
        for c in run_scope(scope, 0)? {
            println!(
                "{:<28} checked={:<6} max_rel_err={:.2e} tol={:.0e} {}",
                c.name,
                c.report.checked,
                c.report.max_rel_err,
                c.tolerance,
                if c.passed() { "ok" } else { "FAIL" }
            );
        }
        println!("{scope}: {:.1?}\n", start.elapsed());
    }
    Ok(())
}
