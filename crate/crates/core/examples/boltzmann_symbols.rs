//! Pointwise symbols of the linearized non-cutoff collision operator in d = 2.
//!
//! cargo run --release --example boltzmann_symbols

use pdcalc::boltzmann::symbols::{a2ca_constant, L2Part};
use pdcalc::boltzmann::{CollisionModel, KernelSpec, KineticParams, QuadratureConfig};

fn main() -> pdcalc::Result<()> {
    let model = CollisionModel::new(KineticParams::new(-2.0, 0.5, 1.0)?, KernelSpec::default(), QuadratureConfig::default())?;
    println!("γ={} s={} δ={}  (γ+2)A(1) = {:.6}", model.params.gamma, model.params.s, model.params.delta, a2ca_constant(&model));

    let v = [0.5, -0.25];
    println!("{:>6} {:>12} {:>12} {:>12} {:>10}", "|η|", "a", "Re a_s", "Re a1", "Δ refine");
    for k in [0.0, 1.0, 2.0, 4.0, 8.0] {
        let eta = [k, 0.0];
        let a = model.symbol_a(v, eta)?;
        let a_s = model.symbol_a_s(v, eta)?;
        let a1 = model.symbol_a1_delta(v, eta)?;
        println!("{k:>6} {:>12.6} {:>12.3e} {:>12.3e} {:>10.1e}", a.value, a_s.value.re, a1.value.re, a.relative_change);
    }

    let eta = [1.0, 1.0];
    for part in L2Part::ALL {
        let e = model.symbol_l2(part, v, eta)?;
        println!("{:<5} at η={eta:?}: {:.6e}", part.name(), e.value);
    }

    for r in [0.0, 1.0, 2.0, 4.0] {
        let x = [r, 0.0];
        println!("|v|={r}: D = {:.4e}  L13 = {:.4e}  L14 = {:.4e}", model.multiplier_d(x)?.value, model.multiplier_l13(x), model.multiplier_l14(x)?);
    }
    Ok(())
}
