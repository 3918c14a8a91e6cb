//! Weighted Sobolev norms `H^k_n` and their equivalence constants.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid::{bracket, forward_transform, inverse_transform, GridFunction, PhaseGrid};
use crate::quantize::{weyl_quantize, LinearOperator};
use crate::symbol::Builtin;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SobolevParams {
    /// Fourier weight exponent.
    pub k: f64,
    /// Velocity weight exponent.
    pub n: f64,
}

impl SobolevParams {
    pub fn new(k: f64, n: f64) -> Result<Self> {
        if !k.is_finite() {
            return Err(invalid("k", "must be finite"));
        }
        if !n.is_finite() {
            return Err(invalid("n", "must be finite"));
        }
        Ok(Self { k, n })
    }

    /// `c(v,η) = ⟨v⟩^n⟨η⟩^k`.
    pub fn weight(&self) -> Builtin {
        Builtin::C { k: self.k, n: self.n }
    }
}

/// `⟨D⟩^k f`, applied through the grid transform.
pub fn bracket_d_pow(f: &GridFunction, k: f64) -> GridFunction {
    if k == 0.0 {
        return f.clone();
    }
    let hat = forward_transform(f).weighted_dual(|e| bracket(e).powf(k));
    inverse_transform(&hat)
}

/// `⟨v⟩^n f`.
pub fn bracket_v_pow(f: &GridFunction, n: f64) -> GridFunction {
    if n == 0.0 {
        return f.clone();
    }
    f.weighted(|v| bracket(v).powf(n))
}

/// `‖⟨η⟩^k F(⟨·⟩^n f)‖_{L²}` with the dual-grid measure.
pub fn hkn_norm(f: &GridFunction, p: &SobolevParams) -> f64 {
    if p.k == 0.0 {
        return bracket_v_pow(f, p.n).l2_norm();
    }
    forward_transform(&bracket_v_pow(f, p.n))
        .weighted_dual(|e| bracket(e).powf(p.k))
        .l2_norm_dual()
}

/// `‖⟨v⟩^n ⟨D⟩^k f‖_{L²}`.
pub fn reversed_norm(f: &GridFunction, p: &SobolevParams) -> f64 {
    bracket_v_pow(&bracket_d_pow(f, p.k), p.n).l2_norm()
}

/// `c^w` for `c = ⟨v⟩^n⟨η⟩^k`.
pub fn c_operator(p: &SobolevParams, grid: &PhaseGrid) -> Result<LinearOperator> {
    weyl_quantize(&p.weight().symbol(), grid)
}

/// `‖c^w f‖_{L²}`.
pub fn hc_norm(f: &GridFunction, p: &SobolevParams) -> Result<f64> {
    if p.k == 0.0 && p.n == 0.0 {
        return Ok(f.l2_norm());
    }
    Ok(c_operator(p, f.grid())?.apply(f)?.l2_norm())
}

/// Seed of the default random ensemble.
pub const DEFAULT_SEED: u64 = 0x5eb0_1e7;

/// Frequency band of the random ensemble, fixed in `η` units so that refining
/// `N` at fixed `R` re-samples the same functions.
const ENSEMBLE_BAND: f64 = 1.0;

/// Seeded Gaussian-enveloped random trigonometric polynomials.
pub fn random_ensemble(grid: &PhaseGrid, trials: usize, seed: u64) -> Vec<GridFunction> {
    let d = grid.dim();
    let r = grid.half_width();
    let max_mode = ((ENSEMBLE_BAND / grid.deta()) as i64).min(grid.n() as i64 / 2 - 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..trials)
        .map(|_| {
            let width = rng.gen_range(1.0..(r / 3.0).max(1.5));
            let center: Vec<f64> = (0..d).map(|_| rng.gen_range(-r / 3.0..r / 3.0)).collect();
            let modes: Vec<([f64; 2], Complex64)> = (0..6)
                .map(|_| {
                    let mut e = [0.0; 2];
                    for slot in e.iter_mut().take(d) {
                        *slot = rng.gen_range(-max_mode..=max_mode) as f64 * grid.deta();
                    }
                    (e, Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                })
                .collect();
            GridFunction::from_fn(*grid, |v| {
                let dist2: f64 = (0..d).map(|a| (v[a] - center[a]).powi(2)).sum();
                let env = (-0.5 * dist2 / (width * width)).exp();
                let wave: Complex64 = modes
                    .iter()
                    .map(|(e, c)| {
                        let phase: f64 = (0..d).map(|a| v[a] * e[a]).sum();
                        c * Complex64::from_polar(1.0, 2.0 * PI * phase)
                    })
                    .sum();
                wave * env
            })
        })
        .collect()
}

/// Ratio extrema for the three pairs of norms.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub k: f64,
    pub n: f64,
    pub grid: PhaseGrid,
    pub trials: usize,
    pub seed: u64,
    /// Pair name → `[min, max]` of the ratio over the ensemble.
    pub pairs: BTreeMap<String, [f64; 2]>,
}

impl EquivalenceReport {
    /// `(C_low, C_high)` lower and upper constants for `hc` vs `H^k_n`.
    pub fn hc_vs_hkn(&self) -> [f64; 2] {
        self.pairs["hc/hkn"]
    }

    /// Largest `max/min` spread across the three pairs.
    pub fn max_spread(&self) -> f64 {
        self.pairs.values().map(|[lo, hi]| hi / lo).fold(1.0, f64::max)
    }
}

/// Extremal ratios among `‖c^w f‖`, `‖⟨D⟩^k⟨v⟩^n f‖` and `‖⟨v⟩^n⟨D⟩^k f‖`.
pub fn equivalence_constants(p: &SobolevParams, grid: &PhaseGrid, trials: usize, seed: u64) -> Result<EquivalenceReport> {
    if trials < 50 {
        return Err(invalid("trials", "need at least 50 trials"));
    }
    let c = c_operator(p, grid)?;
    let fs = random_ensemble(grid, trials, seed);
    let norms: Vec<[f64; 3]> = fs
        .par_iter()
        .map(|f| -> Result<[f64; 3]> { Ok([c.apply(f)?.l2_norm(), hkn_norm(f, p), reversed_norm(f, p)]) })
        .collect::<Result<_>>()?;
    let mut pairs = BTreeMap::new();
    for (name, a, b) in [("hc/hkn", 0, 1), ("hc/reversed", 0, 2), ("hkn/reversed", 1, 2)] {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for x in &norms {
            let r = x[a] / x[b];
            lo = lo.min(r);
            hi = hi.max(r);
        }
        pairs.insert(name.to_string(), [lo, hi]);
    }
    Ok(EquivalenceReport {
        k: p.k,
        n: p.n,
        grid: *grid,
        trials,
        seed,
        pairs,
    })
}
