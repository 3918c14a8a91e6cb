//! Smallest C₁ on the ladder with Re⟨(C₁ + b^w) f, f⟩_H(c) ≥ 0.
//!
//! cargo run --release --example dissipativity

use pdcalc::boltzmann::assemble::assemble_bw;
use pdcalc::boltzmann::{CollisionModel, KernelSpec, KineticParams, QuadratureConfig};
use pdcalc::dissipation::{c1_ladder, dissipativity_scan, DEFAULT_TOL};
use pdcalc::sobolev::SobolevParams;
use pdcalc::PhaseGrid;

fn main() -> pdcalc::Result<()> {
    let grid = PhaseGrid::new(2, 12, 6.0)?;
    let model = CollisionModel::new(KineticParams::default(), KernelSpec::default(), QuadratureConfig::default())?;
    let bw = assemble_bw(&grid, &model)?;
    for (k, n) in [(0.0, 0.0), (1.0, 1.0)] {
        let r = dissipativity_scan(&bw, &SobolevParams::new(k, n)?, &c1_ladder(), DEFAULT_TOL, 3)?;
        println!(
            "H^{k}_{n}: C₁ = {:?}  λ_min = {:.4}  resolvent residual {:.1e}  passed {}",
            r.c1,
            r.lambda_min,
            r.resolvent_residual.unwrap_or(f64::NAN),
            r.passed()
        );
    }
    Ok(())
}
