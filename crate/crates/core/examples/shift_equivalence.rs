//! Shifted-window gating without padding, checked against the padded reference.
use gswin::sgu::{check_equivalence, WindowGrid, EQUIVALENCE_CASES, EQUIV_TOL};

fn main() -> gswin::Result<()> {
    let grid = WindowGrid::shifted((14, 14), (7, 7))?;
    println!("14x14 shifted by 3 with 7x7 windows:");
    for g in grid.groups() {
        println!("  group {}x{}: {} windows", g.shape.0, g.shape.1, g.len());
    }
    let mut worst: f64 = 0.0;
    for (i, case) in EQUIVALENCE_CASES.iter().enumerate() {
        let diff = check_equivalence(case, i as u64)?;
        worst = worst.max(diff);
        println!(
            "{}x{}x{}x{} window={} heads={} shifted={} max|diff|={diff:.2e}",
            case.batch, case.image.0, case.image.1, case.channels, case.window, case.heads, case.shifted
        );
    }
    println!("worst={worst:.2e} within {EQUIV_TOL:e}: {}", worst < EQUIV_TOL);
    Ok(())
}
