//! Residual of the approximate inverse Op^w((ã+Kl)^{-1}) as K grows.
//!
//! cargo run --example parametrix

use pdcalc::dissipation::parametrix_residual;
use pdcalc::{Builtin, PhaseGrid};

fn main() -> pdcalc::Result<()> {
    let grid = PhaseGrid::new(2, 12, 6.0)?;
    let a = Builtin::ATilde { gamma: -2.0, s: 0.5 }.symbol();
    let l = Builtin::L { gamma: -2.0, s: 0.5 }.symbol();
    let t = parametrix_residual(&a, &l, &[1.0, 4.0, 16.0, 64.0, 256.0, 1024.0], &grid)?;
    print!("{}", t.csv());
    println!("strictly decreasing: {}  fitted κ: {:?}", t.strictly_decreasing(), t.kappa);
    Ok(())
}
