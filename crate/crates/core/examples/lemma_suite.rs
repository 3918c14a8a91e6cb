//! Randomized checks of the geometric and interpolation inequalities behind the symbol bounds.
//!
//! cargo run --release --example lemma_suite

use pdcalc::boltzmann::lemmas::{check_orthogonal_shift, interpolation_constant, lemma_suite, DECAY_CONFIGS};

fn main() -> pdcalc::Result<()> {
    let report = lemma_suite(1000, 42)?;
    for c in &report.checks {
        println!(
            "{:<32} {} over {:>5}  C = {}",
            c.name,
            if c.passed { "PASS" } else { "FAIL" },
            c.instances,
            c.fitted_constant.map_or("-".into(), |x| format!("{x:.4}"))
        );
        if let Some(w) = &c.witness {
            println!("    witness: {w}");
        }
    }

    let (defect, ok) = check_orthogonal_shift([1.0, 2.0], [0.3, -0.1], [0.1, 0.3]);
    println!("orthogonal shift at one point: defect {defect:.3e}, bounded {ok}");
    println!("interpolation constant at v=3, ε=0.1: {:.4}", interpolation_constant(3.0, 0.1, [1.0, 2.0, 0.5]));
    for cfg in DECAY_CONFIGS {
        println!("decay integral {cfg:?} at u=(1,0): {:.5e}", cfg.eval([1.0, 0.0]));
    }
    Ok(())
}
