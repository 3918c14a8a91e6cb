//! Implicit evolution under −(C₁ + b^w) and under the full linearized operator.
//!
//! cargo run --release --example semigroup

use num_complex::Complex64;
use pdcalc::boltzmann::assemble::{assemble_bw_from, assemble_k_from, tables};
use pdcalc::boltzmann::{CollisionModel, KernelSpec, KineticParams, QuadratureConfig};
use pdcalc::semigroup::{evolve, hc_operator_norm, resolvent_check, Scheme};
use pdcalc::sobolev::{random_ensemble, SobolevParams};
use pdcalc::PhaseGrid;

fn main() -> pdcalc::Result<()> {
    let grid = PhaseGrid::new(2, 12, 6.0)?;
    let model = CollisionModel::new(KineticParams::default(), KernelSpec::default(), QuadratureConfig::default())?;
    let p = SobolevParams::new(1.0, 1.0)?;
    let t = tables(&grid, &model)?;
    let bw = assemble_bw_from(&t)?;
    let k = assemble_k_from(&t)?;

    // C₁ = 0 passes the dissipativity scan on this grid
    let contraction = bw.scale(Complex64::new(-1.0, 0.0));
    let full = k.sub(&bw)?;
    let omega = hc_operator_norm(&k, &p)?;

    let f0 = random_ensemble(&grid, 1, 8).remove(0);
    for (name, a) in [("−b^w", &contraction), ("K − b^w", &full)] {
        for scheme in [Scheme::ImplicitEuler, Scheme::CrankNicolson] {
            let log = evolve(a, &f0, 1.0, 0.01, scheme, &p)?;
            println!(
                "{name:<8} {:<15} ‖f(1)‖/‖f(0)‖ = {:.5}  max step growth {:.6}  max residual {:.1e}",
                scheme.name(),
                log.hc_norms.last().unwrap() / log.hc_norms[0],
                log.max_step_growth(),
                log.max_residual()
            );
        }
    }
    println!("ω̂ = ‖K‖_H(c) = {omega:.4}");
    let r = resolvent_check(&full, 1.0 + omega, 5, 1)?;
    println!("resolvent at λ = {:.4}: residual {:.1e}, cond {:.2}", r.lambda, r.max_residual, r.condition);
    Ok(())
}
