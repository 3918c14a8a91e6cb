//! Build a phase grid, transform a Gaussian and check Parseval and the round trip.
//!
//! cargo run --example grid_transform

use num_complex::Complex64;
use pdcalc::{forward_transform, inner_product, inverse_transform, GridFunction, PhaseGrid};

fn main() -> pdcalc::Result<()> {
    let grid = PhaseGrid::new(1, 64, 8.0)?;
    println!("{}  dv={:.4}  dη={:.4}", grid.id(), grid.dv(), grid.deta());

    let f = GridFunction::from_real_fn(grid, |v| (-std::f64::consts::PI * v[0] * v[0]).exp());
    let fh = forward_transform(&f);
    // e^{−π|v|²} is its own transform
    let self_dual = (0..grid.len())
        .map(|q| (fh.values()[q] - Complex64::new((-std::f64::consts::PI * grid.frequency(q)[0].powi(2)).exp(), 0.0)).norm())
        .fold(0.0, f64::max);
    println!("self-duality error   {self_dual:.2e}");
    println!("Parseval  ‖f‖={:.12}  ‖f̂‖={:.12}", f.l2_norm(), fh.l2_norm_dual());

    let back = inverse_transform(&fh);
    println!("round trip           {:.2e}", back.sub(&f)?.l2_norm());

    let g = GridFunction::from_real_fn(grid, |v| v[0] * (-v[0] * v[0]).exp());
    println!("⟨f, v e^(−v²)⟩ = {:.3e}", inner_product(&f, &g)?.norm());
    Ok(())
}
