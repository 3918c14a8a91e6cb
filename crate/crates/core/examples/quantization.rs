//! Weyl and standard quantization, operator dumps and the J-transform identity.
//!
//! cargo run --example quantization

use num_complex::Complex64;
use pdcalc::quantize::calibrate_j_constant;
use pdcalc::symbol::j_transform;
use pdcalc::{standard_quantize, weyl_quantize, GridFunction, LinearOperator, PhaseGrid, Symbol};

fn main() -> pdcalc::Result<()> {
    let grid = PhaseGrid::new(1, 64, 8.0)?;

    let a = Symbol::real("v²+η²", |v, e| v[0] * v[0] + e[0] * e[0]);
    let w = weyl_quantize(&a, &grid)?;
    println!("Op^w(v²+η²): Hermitian defect {:.2e}, ‖·‖ = {:.3}", w.hermitian_defect(), w.operator_norm());
    let eig = w.eigenvalues()?;
    println!("lowest eigenvalues {:.5?}", &eig[..4]);

    let ve = Symbol::new("v·η", |v, e| Complex64::new(v[0] * e[0], 0.0));
    let s = standard_quantize(&ve, &grid)?;
    let weyl_of_j = weyl_quantize(&j_transform(&ve, -0.5, &grid)?, &grid)?;
    let probe = GridFunction::from_real_fn(grid, |v| (-0.5 * v[0] * v[0]).exp());
    let lhs = s.apply(&probe)?;
    let rhs = weyl_of_j.apply(&probe)?;
    println!("Op(a) − Op^w(J^(−1/2) a) on a Gaussian: {:.2e}", lhs.sub(&rhs)?.l2_norm() / lhs.l2_norm());
    println!("calibrated J constant {:.6}", calibrate_j_constant(&grid)?);

    let mut buf = Vec::new();
    w.write_to(&mut buf)?;
    let back = LinearOperator::read_from(buf.as_slice())?;
    println!("dump: {} bytes, provenance {}, max entry change {:.1e}", buf.len(), back.provenance(), back.sub(&w)?.max_entry());
    Ok(())
}
