//! The ε-frontier of the weighted commutator estimate for ã.
//!
//! cargo run --example commutator

use pdcalc::dissipation::commutator_bound;
use pdcalc::sobolev::SobolevParams;
use pdcalc::{Builtin, PhaseGrid};

fn main() -> pdcalc::Result<()> {
    let grid = PhaseGrid::new(2, 12, 6.0)?;
    let a = Builtin::ATilde { gamma: -2.0, s: 0.5 }.symbol();
    let l_half = Builtin::L { gamma: -2.0, s: 0.5 }.symbol().sqrt();
    let c = SobolevParams::new(1.0, 1.0)?.weight().symbol();
    let r = commutator_bound(&c, &a, &a.sqrt(), &l_half, &grid, 30, 11)?;
    println!("cond(c^w) = {:.2}", r.c_condition);
    for (eps, cst) in &r.frontier {
        println!("    ε = {eps:<12.3e} C(ε) = {cst:.4}");
    }
    println!("smallest certified ε: {:?}", r.min_epsilon());
    Ok(())
}
