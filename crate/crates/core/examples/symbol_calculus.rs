//! Built-in order functions and symbols: admissibility, seminorms, pointwise values.
//!
//! cargo run --example symbol_calculus

use pdcalc::symbol::{check_admissible, seminorm_estimate, symbol_ratio};
use pdcalc::{Builtin, PhaseGrid};

fn main() -> pdcalc::Result<()> {
    let grid = PhaseGrid::new(2, 8, 3.0)?;
    let (gamma, s) = (-2.0, 0.5);

    let weights = [
        Builtin::C { k: 1.0, n: 1.0 },
        Builtin::L { gamma, s },
        Builtin::ATilde { gamma, s },
    ];
    for b in weights {
        let w = b.weight();
        let adm = check_admissible(&w, &grid, 400, 7)?;
        println!(
            "{:<28} slow variation {:.3}  temperance C={:.2} N={} stable={}",
            adm.label, adm.slow_variation, adm.temperance_c, adm.temperance_n, adm.temperance_stable
        );
    }

    let a = Builtin::ATilde { gamma, s }.symbol();
    let m = Builtin::ATilde { gamma, s }.weight();
    for order in 0..=2 {
        let e = seminorm_estimate(&a, &m, order, &grid, 1e-3)?;
        println!("|ã|_(S(ã),{order}) ≈ {:.4}  (h/2: {:.4})", e.value, e.value_half_step);
    }

    // ã is comparable to ⟨v⟩^γ ⟨η⟩^{2s} only away from large |η∧v|
    let c = Builtin::C { k: 2.0 * s, n: gamma }.symbol();
    let (lo, hi) = symbol_ratio(&a, &c, &grid)?;
    println!("ã / ⟨v⟩^γ⟨η⟩^(2s) on the grid ∈ [{lo:.3}, {hi:.3}]");

    for (v, eta) in [([0.0, 0.0], [0.0, 0.0]), ([1.0, 0.0], [0.0, 2.0]), ([2.0, 1.0], [-1.0, 3.0])] {
        println!("ã({v:?}, {eta:?}) = {:.6}", a.eval(&v, &eta)?.re);
    }
    Ok(())
}
