//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion to stderr
//! (uncaptured) and fails if any criterion fails.

use std::io::Write;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use pdcalc::boltzmann::assemble::{assemble_bw_from, assemble_k_from, tables};
use pdcalc::boltzmann::cancellation::cancellation_constant;
use pdcalc::boltzmann::carleman::sigma_integrate;
use pdcalc::boltzmann::lemmas::lemma_suite;
use pdcalc::boltzmann::symbols::decay_fit;
use pdcalc::boltzmann::{AngularKernel, Band, CarlemanRule, CollisionModel, KernelSpec, KineticParams, QuadratureConfig};
use pdcalc::dissipation::{c1_ladder, dissipativity_scan, garding_l2, garding_weighted, parametrix_residual, DEFAULT_TOL};
use pdcalc::quadrature::{graded_panels, periodic_trapezoid};
use pdcalc::quantize::calibrate_j_constant;
use pdcalc::semigroup::{evolve, hc_operator_norm, resolvent_check, Scheme};
use pdcalc::sobolev::{equivalence_constants, random_ensemble, SobolevParams};
use pdcalc::symbol::j_transform;
use pdcalc::{
    forward_transform, inverse_transform, standard_quantize, weyl_quantize, Builtin, GridFunction, LinearOperator,
    PhaseGrid, Symbol,
};

const GAMMA: f64 = -2.0;
const S: f64 = 0.5;
const K_FAMILY: [&str; 5] = ["a1", "a2ca", "a2c", "a2r", "a2d"];

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn d1() -> PhaseGrid {
    PhaseGrid::new(1, 64, 8.0).unwrap()
}

fn model() -> CollisionModel {
    CollisionModel::new(KineticParams::new(GAMMA, S, 1.0).unwrap(), KernelSpec::default(), QuadratureConfig::default()).unwrap()
}

fn max_entry_diff(a: &LinearOperator, b: &LinearOperator) -> f64 {
    a.sub(b).unwrap().max_entry()
}

/// Matrix of `F^{-1} m F` assembled column by column from the transforms.
fn fourier_multiplier(grid: &PhaseGrid, m: impl Fn(f64) -> f64) -> LinearOperator {
    let n = grid.len();
    let mut cols = Vec::with_capacity(n * n);
    for j in 0..n {
        let mut e = GridFunction::zeros(*grid);
        e.values_mut()[j] = Complex64::new(1.0, 0.0);
        let mut fh = forward_transform(&e);
        for (q, x) in fh.values_mut().iter_mut().enumerate() {
            *x *= m(grid.frequency(q)[0]);
        }
        cols.extend(inverse_transform(&fh).into_values());
    }
    let mat = nalgebra::DMatrix::from_column_slice(n, n, &cols);
    LinearOperator::new(*grid, mat, pdcalc::Provenance::Composite("oracle".into())).unwrap()
}

fn quantization_exactness() -> Outcome {
    let g = d1();
    let mut worst = 0.0f64;
    let vs: [(&str, fn(f64) -> f64); 3] = [("v", |v| v), ("v²", |v| v * v), ("e^{-v²}", |v| (-v * v).exp())];
    for (label, f) in vs {
        let w = weyl_quantize(&Symbol::of_v(label, move |v| f(v[0])), &g).unwrap();
        let mult = LinearOperator::multiplication(&g, label, |v| Complex64::new(f(v[0]), 0.0)).unwrap();
        worst = worst.max(max_entry_diff(&w, &mult));
    }
    let es: [(&str, fn(f64) -> f64); 3] = [("η", |e| e), ("η²", |e| e * e), ("⟨η⟩", |e| (1.0 + e * e).sqrt())];
    for (label, f) in es {
        let w = weyl_quantize(&Symbol::of_eta(label, move |e| f(e[0])), &g).unwrap();
        worst = worst.max(max_entry_diff(&w, &fourier_multiplier(&g, f)));
    }
    outcome(worst <= 1e-12, format!("max entrywise error {worst:.2e}"))
}

fn hermitian_symmetry() -> Outcome {
    let grids = [d1(), PhaseGrid::new(2, 8, 3.0).unwrap(), PhaseGrid::new(2, 12, 6.0).unwrap()];
    let builtins = [
        Builtin::C { k: 1.0, n: 1.0 },
        Builtin::C { k: -1.0, n: 2.0 },
        Builtin::L { gamma: GAMMA, s: S },
        Builtin::ATilde { gamma: GAMMA, s: S },
        Builtin::ATilde { gamma: -1.5, s: 0.3 },
        Builtin::BracketVPow { p: 2.0 },
        Builtin::BracketEtaPow { p: 1.0 },
    ];
    let mut worst = 0.0f64;
    for g in &grids {
        for b in &builtins {
            let q = weyl_quantize(&b.symbol(), g).unwrap();
            let m = q.matrix();
            for i in 0..g.len() {
                for j in 0..g.len() {
                    worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
                }
            }
        }
    }
    outcome(worst <= 1e-12, format!("max |A − A*| entry {worst:.2e} over {} symbols × {} grids", builtins.len(), grids.len()))
}

fn j_calibration() -> Outcome {
    let g = d1();
    let kappa = calibrate_j_constant(&g).unwrap();
    let ve = Symbol::new("v·η", |v, e| Complex64::new(v[0] * e[0], 0.0));
    let op0 = standard_quantize(&ve, &g).unwrap();
    let weyl = weyl_quantize(&j_transform(&ve, -0.5, &g).unwrap(), &g).unwrap();
    let mut identity = 0.0f64;
    // coherent states of width 0.8 centered in |v| ≤ 2, |η| ≤ 1/2, negligible at both periodic seams
    for (v0, e0) in [(0.0, 0.0), (2.0, 0.5), (-2.0, -0.5), (1.5, -0.3), (-1.0, 0.3)] {
        let probe = GridFunction::from_fn(g, |v| {
            Complex64::from_polar((-(v[0] - v0) * (v[0] - v0) / (2.0 * 0.64)).exp(), 2.0 * std::f64::consts::PI * e0 * v[0])
        });
        let lhs = op0.apply(&probe).unwrap();
        let rhs = weyl.apply(&probe).unwrap();
        identity = identity.max(lhs.sub(&rhs).unwrap().l2_norm() / lhs.l2_norm());
    }
    let mixed = Symbol::real("mixed", |v, e| (-(v[0] * v[0]) / 8.0).exp() * (1.0 + e[0] * e[0]).sqrt());
    let mut round = 0.0f64;
    for t in [0.5, -0.5, 0.25] {
        let back = j_transform(&j_transform(&mixed, t, &g).unwrap(), -t, &g).unwrap();
        for i in 0..g.len() {
            for q in 0..g.len() {
                let (v, e) = (g.velocity(i), g.frequency(q));
                round = round.max((back.eval(&v[..1], &e[..1]).unwrap() - mixed.eval(&v[..1], &e[..1]).unwrap()).norm());
            }
        }
    }
    outcome(
        identity <= 1e-10 && round <= 1e-10,
        format!("κ = {:.6}, identity residual {identity:.2e}, round trip {round:.2e}", kappa),
    )
}

fn norm_equivalence() -> Outcome {
    let coarse = d1();
    let fine = PhaseGrid::new(1, 128, 8.0).unwrap();
    let constant = |r: &pdcalc::sobolev::EquivalenceReport| r.pairs.values().map(|[lo, hi]| hi.max(1.0 / lo)).fold(1.0, f64::max);
    let mut ok = true;
    let mut detail = Vec::new();
    for (k, n) in [(1.0, 1.0), (2.0, -1.0), (-1.0, 2.0)] {
        let p = SobolevParams::new(k, n).unwrap();
        let cs: Vec<f64> = (1..=3).map(|seed| constant(&equivalence_constants(&p, &coarse, 50, seed).unwrap())).collect();
        let c = cs.iter().cloned().fold(1.0, f64::max);
        let seed_spread = cs.iter().cloned().fold(f64::INFINITY, f64::min);
        let c_fine = constant(&equivalence_constants(&p, &fine, 50, 1).unwrap());
        let here = c.is_finite() && c / seed_spread <= 1.1 && (c_fine - cs[0]).abs() <= 0.1 * cs[0];
        ok &= here;
        detail.push(format!("({k},{n}): C={c:.4} N128 {c_fine:.4}"));
    }
    outcome(ok, detail.join("; "))
}

fn garding_family() -> (Symbol, Symbol, Symbol) {
    let a = Builtin::ATilde { gamma: GAMMA, s: S }.symbol();
    (a.clone(), a.sqrt(), Builtin::L { gamma: GAMMA, s: S }.symbol())
}

fn l2_garding() -> Outcome {
    let (a, b, l) = garding_family();
    let mut cs = Vec::new();
    let mut ok = true;
    for n in [12, 16] {
        let g = PhaseGrid::new(2, n, 6.0).unwrap();
        let r = garding_l2(&a, &b, &l, &g, DEFAULT_TOL).unwrap();
        ok &= r.passed && r.lambda_min >= -DEFAULT_TOL * r.scale;
        cs.push(r.c);
    }
    ok &= cs.iter().all(|c| c.is_some() && *c == cs[0]);
    outcome(ok, format!("C over N=12,16: {cs:?}"))
}

fn weighted_transfer() -> Outcome {
    let (a, b, l) = garding_family();
    let l_half = l.sqrt();
    let g = PhaseGrid::new(2, 12, 6.0).unwrap();
    let mut ok = true;
    let mut detail = Vec::new();
    for (k, n) in [(1.0, 1.0), (-1.0, 2.0)] {
        let r = garding_weighted(&a, &b, &l_half, &SobolevParams::new(k, n).unwrap(), &g, DEFAULT_TOL).unwrap();
        ok &= r.passed;
        detail.push(format!("({k},{n}): C′={:?} C_k={:?}", r.c, r.c_k));
    }
    let zero = garding_weighted(&a, &b, &l_half, &SobolevParams::new(0.0, 0.0).unwrap(), &g, DEFAULT_TOL).unwrap();
    let plain = garding_l2(&a, &b, &l_half.squared(), &g, DEFAULT_TOL).unwrap();
    let same = zero == plain;
    ok &= same;
    detail.push(format!("k=n=0 equals L² report: {same}"));
    outcome(ok, detail.join("; "))
}

fn parametrix_decay() -> Outcome {
    let (a, _, l) = garding_family();
    let g = PhaseGrid::new(2, 12, 6.0).unwrap();
    let t = parametrix_residual(&a, &l, &[4.0, 16.0, 64.0, 256.0], &g).unwrap();
    let kappa = t.kappa.unwrap_or(f64::NAN);
    let residuals: Vec<String> = t.rows.iter().map(|r| format!("{:.2e}", r.residual)).collect();
    outcome(t.strictly_decreasing() && kappa >= 0.3, format!("‖R_K‖ = [{}], κ̂ = {kappa:.3}", residuals.join(", ")))
}

fn carleman_cross_check() -> Outcome {
    let params = KineticParams::new(-1.5, 0.5, 1.0).unwrap();
    let v = [0.3, -0.2];
    let test = |vs: [f64; 2], vp: [f64; 2], vps: [f64; 2]| {
        (-(vs[0] * vs[0] + vs[1] * vs[1]) / 2.0 - (vps[0] * vps[0] + vps[1] * vps[1]) / 4.0).exp()
            * (1.0 + 0.5 * vp[0] - 0.25 * vp[1] * vp[1]).tanh()
    };
    let mut worst = 0.0f64;
    for angular in [AngularKernel::Unit, AngularKernel::PowerLaw] {
        let kernel = KernelSpec::with_cutoff(angular, 0.3);
        let direct = sigma_integrate(v, &params, &kernel, 12, 14.0, test);
        let quad = QuadratureConfig { n_phi: 96, n_t: 8, ..QuadratureConfig::default() };
        let carl = CarlemanRule::new(params, kernel, quad).unwrap();
        let val = carl
            .integrate(Band::All, [-v[0], -v[1]], |a, h| {
                let vs = [v[0] + a[0] - h[0], v[1] + a[1] - h[1]];
                let vp = [v[0] - h[0], v[1] - h[1]];
                let vps = [v[0] + a[0], v[1] + a[1]];
                Complex64::new(test(vs, vp, vps), 0.0)
            })
            .re;
        worst = worst.max(((val - direct) / direct).abs());
    }

    // S at |z| = 1 against the σ-representation of ∫ b (f'_* − f_*) for a bump centered at distance 1
    let k = KernelSpec::default();
    let c = cancellation_constant(&params, &k).unwrap();
    let bump = |x: [f64; 2]| (-((x[0] - 1.0).powi(2) + x[1] * x[1]) / (2.0 * 0.09)).exp();
    let mut conv = 0.0;
    for (rho, wr) in graded_panels(1e-8, 0.5, 3.0, 0.1, 12) {
        for (psi, wp) in periodic_trapezoid(128) {
            let z = [rho * psi.cos(), rho * psi.sin()];
            conv += wr * wp * rho * c * rho.powf(params.gamma) * bump([-z[0], -z[1]]);
        }
    }
    let oracle = sigma_integrate([0.0, 0.0], &params, &k, 24, 3.5, |vs, _, vps| bump(vps) - bump(vs));
    let cancel = ((conv - oracle) / oracle).abs();
    outcome(
        worst <= 2e-2 && cancel <= 1e-2,
        format!("Carleman vs σ {worst:.2e}; S∗f vs σ {cancel:.2e} (S(1) = {c:.5})"),
    )
}

fn k_family_decay() -> Outcome {
    let m = model();
    let p = SobolevParams::new(1.0, 1.0).unwrap();
    let order = m.params.order();
    let mut amps = Vec::new();
    let mut norms = Vec::new();
    let mut worst_exp = f64::NEG_INFINITY;
    for n in [12, 16] {
        let g = PhaseGrid::new(2, n, 6.0).unwrap();
        let t = tables(&g, &m).unwrap();
        let fits: Vec<_> = K_FAMILY.iter().map(|name| decay_fit(t.table(name).unwrap(), &g, order)).collect();
        worst_exp = fits.iter().map(|f| f.exponent).fold(worst_exp, f64::max);
        amps.push(fits.iter().map(|f| f.amplitude).collect::<Vec<_>>());
        norms.push(hc_operator_norm(&assemble_k_from(&t).unwrap(), &p).unwrap());
    }
    let amp_change = amps[0]
        .iter()
        .zip(&amps[1])
        .map(|(a, b)| if a.max(*b) == 0.0 { 0.0 } else { (a - b).abs() / a.abs().max(b.abs()) })
        .fold(0.0, f64::max);
    let norm_change = (norms[0] - norms[1]).abs() / norms[0];
    outcome(
        worst_exp <= 0.2 && amp_change <= 0.1 && norm_change <= 0.15,
        format!(
            "max exponent {worst_exp:.3}, amplitude change {:.1}%, ‖K‖_H(c) {:.4} → {:.4} ({:.1}%)",
            100.0 * amp_change,
            norms[0],
            norms[1],
            100.0 * norm_change
        ),
    )
}

fn contraction_semigroup() -> Outcome {
    let g = PhaseGrid::new(2, 12, 6.0).unwrap();
    let p = SobolevParams::new(1.0, 1.0).unwrap();
    let t = tables(&g, &model()).unwrap();
    let bw = assemble_bw_from(&t).unwrap();
    let scan = dissipativity_scan(&bw, &p, &c1_ladder(), DEFAULT_TOL, 5).unwrap();
    let Some(c1) = scan.c1 else {
        return outcome(false, "no C₁ on the ladder".into());
    };
    let a = bw.shift(c1).scale(Complex64::new(-1.0, 0.0));
    let mut growth = 0.0f64;
    let mut steps = 0;
    for f0 in random_ensemble(&g, 5, 17) {
        let log = evolve(&a, &f0, 1.0, 0.01, Scheme::ImplicitEuler, &p).unwrap();
        steps = log.times.len() - 1;
        growth = growth.max(log.max_step_growth());
    }
    let res = resolvent_check(&a, 1.0, 5, 19).unwrap();
    outcome(
        steps == 100 && growth <= 1.0 + 1e-8 && res.max_residual <= 1e-9,
        format!("C₁ = {c1}, max step growth {growth:.10}, resolvent residual {:.1e}", res.max_residual),
    )
}

fn lemma_checks() -> Outcome {
    let mut ok = true;
    let mut violations = Vec::new();
    for seed in [1, 2] {
        let r = lemma_suite(1000, seed).unwrap();
        ok &= r.passed() && r.checks.iter().all(|c| c.instances >= 17);
        violations.extend(r.checks.iter().filter(|c| !c.passed).map(|c| format!("{} (seed {seed})", c.name)));
        ok &= r.checks.iter().any(|c| c.name == "orthogonal_shift" && c.instances >= 1000);
    }
    outcome(ok, if violations.is_empty() { "zero violations over 2 seeds".into() } else { violations.join(", ") })
}

#[test]
fn acceptance_criteria() {
    let criteria: [(&str, Duration, fn() -> Outcome); 11] = [
        ("quantization exactness", Duration::from_secs(1), quantization_exactness),
        ("Hermitian symmetry", Duration::from_secs(5), hermitian_symmetry),
        ("J calibration", Duration::from_secs(60), j_calibration),
        ("norm equivalence", Duration::from_secs(30), norm_equivalence),
        ("L² Gårding", Duration::from_secs(300), l2_garding),
        ("H^k_n dissipation transfer", Duration::from_secs(600), weighted_transfer),
        ("parametrix decay", Duration::from_secs(300), parametrix_decay),
        ("Carleman cross-check", Duration::from_secs(120), carleman_cross_check),
        ("K-family decay", Duration::from_secs(900), k_family_decay),
        ("contraction semigroup", Duration::from_secs(300), contraction_semigroup),
        ("lemma suite", Duration::from_secs(60), lemma_checks),
    ];
    let mut failed = Vec::new();
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = run();
        let elapsed = start.elapsed();
        let passed = out.passed && elapsed <= *budget;
        let line = format!(
            "criterion {:>2} {:<28} {}  [{:.1}s / {}s]  {}\n",
            i + 1,
            name,
            if passed { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs(),
            out.detail
        );
        std::io::stderr().write_all(line.as_bytes()).unwrap();
        if !passed {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
