//! Gårding certificates for ã = ⟨v⟩^γ(1+|η|²+|η∧v|²+|v|²)^s in L² and in H(c).
//!
//! cargo run --example garding

use pdcalc::dissipation::{garding_l2, garding_weighted, sqrt_equivalence, DEFAULT_TOL};
use pdcalc::sobolev::SobolevParams;
use pdcalc::{Builtin, PhaseGrid};

fn main() -> pdcalc::Result<()> {
    let grid = PhaseGrid::new(2, 12, 6.0)?;
    let (gamma, s) = (-2.0, 0.5);
    let a = Builtin::ATilde { gamma, s }.symbol();
    let b_half = a.sqrt();
    let l = Builtin::L { gamma, s }.symbol();

    let r = garding_l2(&a, &b_half, &l, &grid, DEFAULT_TOL)?;
    println!("L²: C = {:?}  λ_min = {:.3e}  passed = {}", r.c, r.lambda_min, r.passed);
    for (c, _, lam) in r.trace.iter().take(4) {
        println!("    C={c:<6} λ_min={lam:.3e}");
    }

    for (k, n) in [(1.0, 1.0), (-1.0, 2.0)] {
        let p = SobolevParams::new(k, n)?;
        let r = garding_weighted(&a, &b_half, &l.sqrt(), &p, &grid, DEFAULT_TOL)?;
        println!("H^{k}_{n}: C = {:?}  C_k = {:?}  passed = {}", r.c, r.c_k, r.passed);
    }

    let (lo, hi) = sqrt_equivalence(&a, &l, 1.0, &grid, 20, 5)?;
    println!("‖Op^w(ã+l)^½ f‖ / ‖Op^w((ã+l)^½) f‖ ∈ [{lo:.5}, {hi:.5}]");
    Ok(())
}
