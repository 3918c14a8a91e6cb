//! Randomized checks of the elementary estimates behind the symbol bounds.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::symbols::{maxwell, maxwell_half};
use crate::error::{invalid, Result};
use crate::quadrature::{geometric_panels, integrate, periodic_trapezoid, uniform_panels, Rule};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaCheck {
    pub name: String,
    pub passed: bool,
    pub instances: usize,
    /// Smallest constant that covers every sampled instance, where one applies.
    pub fitted_constant: Option<f64>,
    /// First violating instance.
    pub witness: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub trials: usize,
    pub seed: u64,
    pub checks: Vec<LemmaCheck>,
}

impl LemmaReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn norm2(x: [f64; 2]) -> f64 {
    x[0] * x[0] + x[1] * x[1]
}

fn bracket(x: [f64; 2]) -> f64 {
    (1.0 + norm2(x)).sqrt()
}

fn add(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] + b[0], a[1] + b[1]]
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

/// `μ^p` with the normalization of `μ` raised to the same power.
fn mu_pow(x: [f64; 2], p: f64) -> f64 {
    maxwell(x).powf(p)
}

fn point(rng: &mut ChaCha8Rng, r: f64) -> [f64; 2] {
    [rng.gen_range(-r..r), rng.gen_range(-r..r)]
}

/// Identity `μ(v−h)μ(v+α) = μ(v)μ(v+α−h)` for `α ⊥ h`, and the bound by
/// `μ^{1/9}(v)μ^{1/9}(v+α)` when also `|α| ≥ |h|`.
pub fn check_orthogonal_shift(v: [f64; 2], h: [f64; 2], alpha: [f64; 2]) -> (f64, bool) {
    let lhs = maxwell(sub(v, h)) * maxwell(add(v, alpha));
    let rhs = maxwell(v) * maxwell(sub(add(v, alpha), h));
    let defect = (lhs - rhs).abs() / lhs.max(rhs).max(f64::MIN_POSITIVE);
    let bound = mu_pow(v, 1.0 / 9.0) * mu_pow(add(v, alpha), 1.0 / 9.0);
    (defect, lhs <= bound * (1.0 + 1e-12))
}

fn orthogonal_shift(rng: &mut ChaCha8Rng, trials: usize) -> LemmaCheck {
    let mut witness = None;
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let v = point(rng, 6.0);
        let r = rng.gen_range(0.0..3.0);
        let phi = rng.gen_range(0.0..2.0 * PI);
        let e = [phi.cos(), phi.sin()];
        let h = [r * e[0], r * e[1]];
        let t = rng.gen_range(r..r + 4.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let alpha = [-t * e[1], t * e[0]];
        let (defect, bounded) = check_orthogonal_shift(v, h, alpha);
        worst = worst.max(defect);
        if (defect > 1e-12 || !bounded) && witness.is_none() {
            witness = Some(format!("v={v:?}, h={h:?}, α={alpha:?}, relative defect {defect:.2e}, bound holds: {bounded}"));
        }
    }
    LemmaCheck {
        name: "orthogonal_shift".into(),
        passed: witness.is_none(),
        instances: trials,
        fitted_constant: Some(worst),
        witness,
    }
}

/// Sup of `|M(v−h) − M(v)| / (|h| μ^{1/16}(v))` and of the second difference
/// over `|h|²`, sampled with `|v| ≤ r`, `|h| ≤ 1`.
fn difference_constants(rng: &mut ChaCha8Rng, trials: usize, r: f64) -> (f64, f64) {
    let (mut c1, mut c2) = (0.0f64, 0.0f64);
    for _ in 0..trials {
        let v = point(rng, r);
        let rad = rng.gen_range(1e-3..1.0f64);
        let phi = rng.gen_range(0.0..2.0 * PI);
        let h = [rad * phi.cos(), rad * phi.sin()];
        let w = mu_pow(v, 1.0 / 16.0);
        let m = maxwell_half(v);
        let first = (maxwell_half(sub(v, h)) - m).abs();
        let second = (maxwell_half(add(v, h)) + maxwell_half(sub(v, h)) - 2.0 * m).abs();
        c1 = c1.max(first / (rad * w));
        c2 = c2.max(second / (rad * rad * w));
    }
    (c1, c2)
}

fn differences(rng: &mut ChaCha8Rng, trials: usize) -> Vec<LemmaCheck> {
    let near = difference_constants(rng, trials, 6.0);
    let far = difference_constants(rng, trials, 12.0);
    [("first_difference", near.0, far.0), ("second_difference", near.1, far.1)]
        .into_iter()
        .map(|(name, c, c_far)| {
            let passed = c.is_finite() && c_far <= 1.1 * c;
            LemmaCheck {
                name: name.into(),
                passed,
                instances: 2 * trials,
                fitted_constant: Some(c.max(c_far)),
                witness: (!passed).then(|| format!("constant grows from {c:.4e} (|v| ≤ 6) to {c_far:.4e} (|v| ≤ 12)")),
            }
        })
        .collect()
}

/// Smallest `C` with `⟨v⟩^{n₂} ≤ ε⟨v⟩^{n₃} + C ε^{−(n₂−n₁)/(n₃−n₂)}⟨v⟩^{n₁}` at one point.
pub fn interpolation_constant(v: f64, eps: f64, n: [f64; 3]) -> f64 {
    let b = (1.0 + v * v).sqrt();
    let excess = b.powf(n[1]) - eps * b.powf(n[2]);
    excess / (eps.powf(-(n[1] - n[0]) / (n[2] - n[1])) * b.powf(n[0]))
}

fn interpolation(rng: &mut ChaCha8Rng, trials: usize) -> LemmaCheck {
    let mut c = f64::NEG_INFINITY;
    let mut witness = None;
    for _ in 0..trials {
        let n1 = rng.gen_range(-4.0..2.0);
        let n2 = n1 + rng.gen_range(0.1..3.0);
        let n3 = n2 + rng.gen_range(0.1..3.0);
        let eps = 10f64.powf(rng.gen_range(-3.0..0.0));
        let v = 10f64.powf(rng.gen_range(-2.0..3.0));
        let k = interpolation_constant(v, eps, [n1, n2, n3]);
        if k > c {
            c = k;
        }
        if k > 1.0 + 1e-12 && witness.is_none() {
            witness = Some(format!("|v|={v:.4e}, ε={eps:.3e}, n=({n1:.3},{n2:.3},{n3:.3}) needs C={k:.6}"));
        }
    }
    LemmaCheck {
        name: "weight_interpolation".into(),
        passed: witness.is_none(),
        instances: trials,
        fitted_constant: Some(c.max(0.0)),
        witness,
    }
}

/// Exponents of `∫ |v|^α ⟨v⟩^β ⟨v+u⟩^δ e^{−ρ|v+u|²} dv` in two dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayIntegral {
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
    pub rho: f64,
}

impl DecayIntegral {
    /// Polar quadrature centered at `v = 0`, so the `|v|^α` singularity sits at the origin.
    pub fn eval(&self, u: [f64; 2]) -> f64 {
        let reach = norm2(u).sqrt() + 12.0 / self.rho.sqrt();
        let mut radial: Rule = geometric_panels(1e-10, 0.5, 30);
        radial.extend(uniform_panels(0.5, reach, 0.5, 12));
        let theta = periodic_trapezoid(256 + (64.0 * norm2(u).sqrt() * self.rho.sqrt()) as usize);
        integrate(&radial, |r| {
            let weight = r.powf(self.alpha + 1.0) * (1.0 + r * r).powf(0.5 * self.beta);
            weight
                * integrate(&theta, |th| {
                    let w = add([r * th.cos(), r * th.sin()], u);
                    bracket(w).powf(self.delta) * (-self.rho * norm2(w)).exp()
                })
        })
    }
}

fn decay_integrals(configs: &[DecayIntegral]) -> Vec<LemmaCheck> {
    let us: Vec<f64> = (0..=16).map(|k| 0.5 * k as f64).collect();
    configs
        .iter()
        .map(|cfg| {
            let ratios: Vec<f64> = us
                .iter()
                .map(|&x| cfg.eval([x, 0.0]) / bracket([x, 0.0]).powf(cfg.alpha + cfg.beta))
                .collect();
            let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = ratios.iter().cloned().fold(0.0, f64::max);
            let (r6, r8) = (ratios[12], ratios[16]);
            let settled = (r8 - r6).abs() <= 0.25 * r8;
            let passed = lo > 0.0 && hi.is_finite() && settled;
            LemmaCheck {
                name: format!("decay_integral(α={}, β={}, δ={}, ρ={})", cfg.alpha, cfg.beta, cfg.delta, cfg.rho),
                passed,
                instances: us.len(),
                fitted_constant: Some(hi / lo),
                witness: (!passed).then(|| format!("ratio range [{lo:.4e}, {hi:.4e}], |u|=6 → {r6:.4e}, |u|=8 → {r8:.4e}")),
            }
        })
        .collect()
}

pub const DECAY_CONFIGS: [DecayIntegral; 3] = [
    DecayIntegral { alpha: 0.0, beta: 0.0, delta: 0.0, rho: 0.5 },
    DecayIntegral { alpha: -1.0, beta: 0.0, delta: 2.0, rho: 0.25 },
    DecayIntegral { alpha: -1.5, beta: 1.0, delta: -1.0, rho: 1.0 / 32.0 },
];

/// All four families of checks; `trials ≥ 1000` random instances each for the sampled ones.
pub fn lemma_suite(trials: usize, seed: u64) -> Result<LemmaReport> {
    if trials < 1000 {
        return Err(invalid("trials", "at least 1000 trials"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = vec![orthogonal_shift(&mut rng, trials)];
    checks.extend(differences(&mut rng, trials));
    checks.push(interpolation(&mut rng, trials));
    checks.extend(decay_integrals(&DECAY_CONFIGS));
    Ok(LemmaReport { trials, seed, checks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthogonal_identity_at_a_fixed_point() {
        let (defect, bounded) = check_orthogonal_shift([1.0, 0.0], [0.0, 0.5], [1.0, 0.0]);
        assert!(defect <= 1e-15 && bounded);
    }

    #[test]
    fn young_inequality_instance() {
        for v in [0.0, 0.5, 1.0, 3.0, 10.0, 100.0] {
            assert!(interpolation_constant(v, 0.25, [0.0, 1.0, 2.0]) <= 1.0);
        }
    }

    #[test]
    fn gaussian_decay_integral_is_constant() {
        let cfg = DECAY_CONFIGS[0];
        for x in [0.0, 3.0, 8.0] {
            let val = cfg.eval([x, 0.0]);
            assert!((val - 2.0 * PI).abs() <= 1e-3 * 2.0 * PI, "{x}: {val}");
        }
    }

    #[test]
    fn suite_passes_and_rejects_small_trials() {
        assert!(lemma_suite(999, 1).is_err());
        let r = lemma_suite(1000, 1).unwrap();
        for c in &r.checks {
            assert!(c.passed, "{c:?}");
        }
        assert_eq!(r.checks.len(), 7);
    }
}
