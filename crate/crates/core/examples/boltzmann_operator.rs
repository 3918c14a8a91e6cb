//! Assemble K and b^w on a grid, fit symbol decay and write operator dumps.
//!
//! cargo run --release --example boltzmann_operator [out-dir]

use std::fs::File;

use num_complex::Complex64;
use pdcalc::boltzmann::assemble::{assemble_bw_from, assemble_k_from, tables};
use pdcalc::boltzmann::symbols::{decay_fit, maxwell_half, SymbolTables};
use pdcalc::boltzmann::{CollisionModel, KernelSpec, KineticParams, QuadratureConfig};
use pdcalc::semigroup::hc_operator_norm;
use pdcalc::sobolev::SobolevParams;
use pdcalc::{inner_product, GridFunction, PhaseGrid};

fn main() -> pdcalc::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "boltzmann-out".into());
    std::fs::create_dir_all(&out)?;
    let grid = PhaseGrid::new(2, 12, 6.0)?;
    let model = CollisionModel::new(KineticParams::default(), KernelSpec::default(), QuadratureConfig::default())?;

    let t = tables(&grid, &model)?;
    for (family, change) in &t.refinement {
        println!("refinement {family:<12} {change:.1e}");
    }
    let order = model.params.order();
    for name in SymbolTables::NAMES {
        let f = decay_fit(t.table(name).unwrap(), &grid, order);
        println!("{name:<5} |sym| ≲ {:.3e} ⟨v⟩^{order}⟨η⟩^{:+.3}", f.amplitude, f.exponent);
    }

    let k = assemble_k_from(&t)?;
    let bw = assemble_bw_from(&t)?;
    let p = SobolevParams::new(1.0, 1.0)?;
    println!("‖K‖_H(c) = {:.4}   ‖b^w‖ = {:.4}", hc_operator_norm(&k, &p)?, bw.operator_norm());

    // L = K − b^w annihilates M up to quadrature error
    let m = GridFunction::from_fn(grid, |v| Complex64::new(maxwell_half([v[0], v[1]]), 0.0));
    let lm = k.sub(&bw)?.apply(&m)?;
    println!("‖L M‖/‖M‖ = {:.3e}  ⟨L M, M⟩ = {:.3e}", lm.l2_norm() / m.l2_norm(), inner_product(&lm, &m)?.norm());

    k.write_to(File::create(format!("{out}/K.pdco"))?)?;
    bw.write_to(File::create(format!("{out}/bw.pdco"))?)?;
    println!("wrote {out}/K.pdco and {out}/bw.pdco");
    Ok(())
}
