//! Equivalence of the H(c), H^k_n and reversed-order norms on a seeded ensemble.
//!
//! cargo run --example sobolev_norms

use pdcalc::sobolev::{equivalence_constants, hc_norm, hkn_norm, random_ensemble, SobolevParams};
use pdcalc::PhaseGrid;

fn main() -> pdcalc::Result<()> {
    let coarse = PhaseGrid::new(1, 64, 8.0)?;
    let fine = PhaseGrid::new(1, 128, 8.0)?;
    for (k, n) in [(1.0, 1.0), (2.0, -1.0), (-1.0, 2.0)] {
        let p = SobolevParams::new(k, n)?;
        let a = equivalence_constants(&p, &coarse, 50, 1)?;
        let b = equivalence_constants(&p, &fine, 50, 1)?;
        println!("k={k:>4} n={n:>4}  spread N=64 {:.4}  N=128 {:.4}", a.max_spread(), b.max_spread());
        for (pair, [lo, hi]) in &a.pairs {
            println!("    {pair:<14} [{lo:.4}, {hi:.4}]");
        }
    }

    let p = SobolevParams::new(1.0, 1.0)?;
    let f = random_ensemble(&coarse, 1, 3).remove(0);
    println!("one sample: ‖f‖_H(c) = {:.5}, ‖f‖_H^1_1 = {:.5}", hc_norm(&f, &p)?, hkn_norm(&f, &p));
    Ok(())
}
