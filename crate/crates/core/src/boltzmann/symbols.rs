//! Symbols and multipliers of the linearized collision operator around `μ`.
//!
//! Shifts follow `f(v+x) ↔ e^{2πi x·η}`. With `M = μ^{1/2}` and the Carleman
//! weight `W`, the pieces are
//!
//! - `a     = ∫∫ W φ_δ μ(v+α)(1 − cos 2πη·h) + ∫∫ W (1−φ_δ) μ(v+α−h)`
//! - `a_s   = −∫∫ W φ_δ M(v+α)(e^{−2πih·η} − 1)(M(v+α−h) − M(v+α))`
//! - `ã_1   = ∫∫ W (1−φ_δ) M(v+α−h) M(v+α) e^{−2πih·η}`
//! - `a_2c  = ½∫∫ W M(v)(M(v+α−h) + M(v+α+h) − 2M(v+α)) e^{2πiα·η}`
//! - `a_2r  = ½∫∫ W M(v+α)(M(v−h) + M(v+h) − 2M(v)) e^{2πiα·η}`
//! - `a_2d  = ∫∫ W (M(v−h) − M(v))(M(v+α−h) − M(v+α)) e^{2πiα·η}`
//! - `a_2ca = C M(v) ∫ |y|^γ M(v+y) e^{2πiy·η} dy`, `C = (γ+2) A(1)`
//! - `D     = ½∫∫ W φ_δ (M(v+α−h) − M(v+α))²`, `L₁₄ = −½ L₁₃ − D`.
//!
//! Since `α ⊥ h`, `M(v+α∓h) = M(v+α) e^{−(r² ∓ 2r v·e)/4}` for `h = r e`, which is
//! what the tabulated path exploits.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cancellation::{multiplier_l13, radial_weight, RadialWeights};
use super::carleman::{Band, CarlemanRule, ComplexEstimate, Estimate};
use super::params::{cutoff, CollisionModel, QuadratureConfig};
use crate::error::{invalid, Error, Result};
use crate::grid::PhaseGrid;
use crate::quadrature::{graded_panels, panel, uniform_panels, Rule};

const C0: Complex64 = Complex64 { re: 0.0, im: 0.0 };

fn norm2(x: [f64; 2]) -> f64 {
    x[0] * x[0] + x[1] * x[1]
}

/// `μ^{1/2}(x) = (2π)^{−1/2} e^{−|x|²/4}`.
pub fn maxwell_half(x: [f64; 2]) -> f64 {
    (-norm2(x) / 4.0).exp() / (2.0 * PI).sqrt()
}

/// `μ(x) = (2π)^{−1} e^{−|x|²/2}`.
pub fn maxwell(x: [f64; 2]) -> f64 {
    (-norm2(x) / 2.0).exp() / (2.0 * PI)
}

fn add(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] + b[0], a[1] + b[1]]
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// `e^{−ix} − 1` without cancellation.
fn phase_minus_one(x: f64) -> Complex64 {
    let s = (0.5 * x).sin();
    Complex64::new(-2.0 * s * s, -x.sin())
}

/// The `L_2` pieces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum L2Part {
    Ca,
    C,
    R,
    D,
}

impl L2Part {
    pub const ALL: [L2Part; 4] = [L2Part::Ca, L2Part::C, L2Part::R, L2Part::D];

    pub fn name(&self) -> &'static str {
        match self {
            L2Part::Ca => "a2ca",
            L2Part::C => "a2c",
            L2Part::R => "a2r",
            L2Part::D => "a2d",
        }
    }
}

/// `A(1)`, the unit-radius weight of the rotation reduction.
pub fn unit_radial_weight(model: &CollisionModel) -> f64 {
    radial_weight(1.0, &model.params, &model.kernel, false, 48)
}

/// `C = (γ+2) A(1)` in `a_2ca`.
pub fn a2ca_constant(model: &CollisionModel) -> f64 {
    (model.params.gamma + 2.0) * unit_radial_weight(model)
}

impl CollisionModel {
    /// Rule for an integrand whose phase runs over `|x| ≤ extent` on panels of width ≤ `width`.
    fn rule(&self, v: [f64; 2], eta: [f64; 2], extent: f64, width: f64) -> Result<CarlemanRule> {
        let quad = self.quad.reaching(norm2(v).sqrt());
        CarlemanRule::new(self.params, self.kernel, quad.resolved_for(norm2(eta).sqrt(), extent, width))
    }

    /// Rule for a phase in `h` on the inner band.
    fn inner_rule(&self, v: [f64; 2], eta: [f64; 2]) -> Result<CarlemanRule> {
        self.rule(v, eta, self.params.delta, 0.25 * self.params.delta)
    }

    /// Rule for a phase in `α` (envelope centered at `α = −v`).
    fn line_rule(&self, v: [f64; 2], eta: [f64; 2]) -> Result<CarlemanRule> {
        self.rule(v, eta, norm2(v).sqrt() + self.quad.t_half, 1.0)
    }

    fn checked(&self, est: ComplexEstimate, what: &str, v: [f64; 2], eta: [f64; 2]) -> Result<ComplexEstimate> {
        est.check(self.quad.tol, &format!("{what} at v={v:?}, η={eta:?}"))?;
        Ok(est)
    }

    /// `a(v,η)`; positive at every converged node.
    pub fn symbol_a(&self, v: [f64; 2], eta: [f64; 2]) -> Result<Estimate> {
        let rule = self.inner_rule(v, eta)?;
        let plain = self.rule(v, [0.0, 0.0], 0.0, 0.0)?;
        let delta = self.params.delta;
        let center = [-v[0], -v[1]];
        let inner = if eta == [0.0, 0.0] {
            ComplexEstimate::new(C0, C0)
        } else {
            rule.integrate_checked(Band::Inner, center, |a, h| {
                let s = (PI * dot(eta, h)).sin();
                Complex64::new(cutoff(norm2(h).sqrt(), delta) * maxwell(add(v, a)) * 2.0 * s * s, 0.0)
            })
        };
        let outer = plain.integrate_checked(Band::Outer, center, |a, h| {
            Complex64::new((1.0 - cutoff(norm2(h).sqrt(), delta)) * maxwell(sub(add(v, a), h)), 0.0)
        });
        let est = Estimate::new(inner.value.re + outer.value.re, inner.refined.re + outer.refined.re);
        est.check(self.quad.tol, &format!("a at v={v:?}, η={eta:?}"))?;
        if est.refined <= 0.0 {
            return Err(Error::Negative {
                value: est.refined,
                context: format!("a at v={v:?}, η={eta:?}"),
            });
        }
        Ok(est)
    }

    /// `a_s(v,η)`.
    pub fn symbol_a_s(&self, v: [f64; 2], eta: [f64; 2]) -> Result<ComplexEstimate> {
        if eta == [0.0, 0.0] {
            return Ok(ComplexEstimate::new(C0, C0));
        }
        let rule = self.inner_rule(v, eta)?;
        let delta = self.params.delta;
        let est = rule.integrate_checked(Band::Inner, [-v[0], -v[1]], |a, h| {
            let x = add(v, a);
            let diff = maxwell_half(sub(x, h)) - maxwell_half(x);
            -phase_minus_one(2.0 * PI * dot(h, eta)) * (cutoff(norm2(h).sqrt(), delta) * maxwell_half(x) * diff)
        });
        self.checked(est, "a_s", v, eta)
    }

    /// `ã_{1,δ}(v,η)`.
    pub fn symbol_a1_delta(&self, v: [f64; 2], eta: [f64; 2]) -> Result<ComplexEstimate> {
        let r_max = self.quad.reaching(norm2(v).sqrt()).r_max;
        let rule = self.rule(v, eta, r_max, 1.0)?;
        let delta = self.params.delta;
        let est = rule.integrate_checked(Band::Outer, [-v[0], -v[1]], |a, h| {
            let x = add(v, a);
            let amp = (1.0 - cutoff(norm2(h).sqrt(), delta)) * maxwell_half(sub(x, h)) * maxwell_half(x);
            Complex64::from_polar(amp, -2.0 * PI * dot(h, eta))
        });
        self.checked(est, "ã_1", v, eta)
    }

    /// One of the `L_2` symbols.
    pub fn symbol_l2(&self, which: L2Part, v: [f64; 2], eta: [f64; 2]) -> Result<ComplexEstimate> {
        if which == L2Part::Ca {
            let value = a2ca_row(self, v, &[eta], unit_radial_weight(self), 1)[0];
            let refined = a2ca_row(self, v, &[eta], unit_radial_weight(self), 2)[0];
            return self.checked(ComplexEstimate::new(value, refined), which.name(), v, eta);
        }
        let rule = self.line_rule(v, eta)?;
        let mv = maxwell_half(v);
        let est = rule.integrate_checked(Band::All, [-v[0], -v[1]], |a, h| {
            let x = add(v, a);
            let amp = match which {
                L2Part::C => 0.5 * mv * (maxwell_half(sub(x, h)) + maxwell_half(add(x, h)) - 2.0 * maxwell_half(x)),
                L2Part::R => 0.5 * maxwell_half(x) * (maxwell_half(sub(v, h)) + maxwell_half(add(v, h)) - 2.0 * mv),
                L2Part::D => (maxwell_half(sub(v, h)) - mv) * (maxwell_half(sub(x, h)) - maxwell_half(x)),
                L2Part::Ca => unreachable!(),
            };
            Complex64::from_polar(amp, 2.0 * PI * dot(a, eta))
        });
        self.checked(est, which.name(), v, eta)
    }

    /// `D(v) = ½∫∫ W φ_δ (M(v+α−h) − M(v+α))²`.
    pub fn multiplier_d(&self, v: [f64; 2]) -> Result<Estimate> {
        let rule = self.rule(v, [0.0, 0.0], 0.0, 0.0)?;
        let delta = self.params.delta;
        let est = rule.integrate_checked(Band::Inner, [-v[0], -v[1]], |a, h| {
            let x = add(v, a);
            let diff = maxwell_half(sub(x, h)) - maxwell_half(x);
            Complex64::new(0.5 * cutoff(norm2(h).sqrt(), delta) * diff * diff, 0.0)
        });
        let est = Estimate::new(est.value.re, est.refined.re);
        est.check(self.quad.tol, &format!("D at v={v:?}"))?;
        if est.refined < -1e-12 {
            return Err(Error::Negative {
                value: est.refined,
                context: format!("D at v={v:?}"),
            });
        }
        Ok(est)
    }

    /// `L₁₃` multiplier through the rotation reduction.
    pub fn multiplier_l13(&self, v: [f64; 2]) -> f64 {
        let w = RadialWeights::new(self.params, self.kernel, norm2(v).sqrt() + 12.0, 12);
        multiplier_l13(v, &w)
    }

    /// `L₁₄ = −½ L₁₃ − D`.
    pub fn multiplier_l14(&self, v: [f64; 2]) -> Result<f64> {
        Ok(-0.5 * self.multiplier_l13(v) - self.multiplier_d(v)?.refined)
    }
}

/// `a_2ca(v, η)` for a list of `η`, by polar quadrature in `y` with the origin
/// singularity regularized against `M(v) e^{−|y|²}`:
///
/// `a_2ca = A(1) M(v) [(γ+2) ∫ |y|^γ (g(y) − g(0)e^{−|y|²}) dy + 2π Γ((γ+4)/2) M(v)]`.
fn a2ca_row(model: &CollisionModel, v: [f64; 2], etas: &[[f64; 2]], a_one: f64, level: usize) -> Vec<Complex64> {
    let gamma = model.params.gamma;
    let mv = maxwell_half(v);
    let base = a_one * mv * 2.0 * PI * libm::tgamma(0.5 * (gamma + 4.0)) * mv;
    let mut out = vec![Complex64::new(base, 0.0); etas.len()];
    if gamma == -2.0 {
        return out;
    }
    let eta_max = etas.iter().map(|&e| norm2(e).sqrt()).fold(0.0, f64::max);
    let (nodes, weights) = polar_nodes(v, eta_max, level, |rho| rho.powf(gamma + 1.0));
    let reg: f64 = nodes
        .iter()
        .zip(&weights)
        .map(|(y, w)| w * (-norm2(*y)).exp())
        .sum::<f64>()
        * mv;
    let scale = a_one * mv * (gamma + 2.0);
    for (slot, &eta) in out.iter_mut().zip(etas) {
        let ft: Complex64 = nodes
            .iter()
            .zip(&weights)
            .map(|(&y, &w)| Complex64::from_polar(w * maxwell_half(add(v, y)), 2.0 * PI * dot(y, eta)))
            .sum();
        *slot += (ft - reg) * scale;
    }
    out
}

/// Polar nodes around the origin covering the envelope `M(v+y)`; the weight of a
/// node is `radial(ρ) dρ dθ`, so `radial` carries the Jacobian.
fn polar_nodes(v: [f64; 2], eta_max: f64, level: usize, radial: impl Fn(f64) -> f64) -> (Vec<[f64; 2]>, Vec<f64>) {
    let v_abs = norm2(v).sqrt();
    let n = 8 * level;
    let rho_rule = graded_panels(1e-9, 1.0, v_abs + 10.0, 0.5, n);
    let k = 2.0 * PI * eta_max + 0.5 * v_abs + 0.5;
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    for (rho, wr) in rho_rule {
        let n_theta = level * (32 + (1.25 * k * rho).ceil() as usize);
        let wt = 2.0 * PI / n_theta as f64;
        let w = wr * radial(rho) * wt;
        for j in 0..n_theta {
            let th = j as f64 * wt;
            nodes.push([rho * th.cos(), rho * th.sin()]);
            weights.push(w);
        }
    }
    (nodes, weights)
}

/// Symbol tables of every piece on a two-dimensional grid, rows indexed by the
/// velocity node and columns by the frequency node (`i · N² + m`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SymbolTables {
    pub grid: PhaseGrid,
    pub model: CollisionModel,
    pub a: Vec<Complex64>,
    pub a_s: Vec<Complex64>,
    pub a1: Vec<Complex64>,
    /// `a_2c`; equal to `a_2r` node by node in the Carleman form.
    pub a2c: Vec<Complex64>,
    pub a2r: Vec<Complex64>,
    pub a2d: Vec<Complex64>,
    pub a2ca: Vec<Complex64>,
    pub l13: Vec<f64>,
    pub d: Vec<f64>,
    /// Largest relative change of each family under node doubling, over probe velocities.
    pub refinement: Vec<(String, f64)>,
}

impl SymbolTables {
    pub fn l14(&self) -> Vec<f64> {
        self.l13.iter().zip(&self.d).map(|(l, d)| -0.5 * l - d).collect()
    }

    /// Sum of the `L_2` symbol tables.
    pub fn l2_total(&self) -> Vec<Complex64> {
        (0..self.a2c.len())
            .map(|k| self.a2ca[k] + self.a2c[k] + self.a2r[k] + self.a2d[k])
            .collect()
    }

    /// `a + a_s`, the symbol of `b^w` in standard form.
    pub fn b_total(&self) -> Vec<Complex64> {
        self.a.iter().zip(&self.a_s).map(|(x, y)| x + y).collect()
    }

    pub fn table(&self, name: &str) -> Option<&[Complex64]> {
        Some(match name {
            "a" => &self.a,
            "a_s" => &self.a_s,
            "a1" => &self.a1,
            "a2c" => &self.a2c,
            "a2r" => &self.a2r,
            "a2d" => &self.a2d,
            "a2ca" => &self.a2ca,
            _ => return None,
        })
    }

    pub const NAMES: [&'static str; 7] = ["a", "a_s", "a1", "a2c", "a2r", "a2d", "a2ca"];
}

/// Samples on a uniform mesh, read back by four-point Lagrange interpolation.
#[derive(Debug, Clone)]
struct UniformTable {
    lo: f64,
    step: f64,
    vals: Vec<f64>,
}

/// Mesh spacing of the interpolation tables.
const MESH: f64 = 0.01;

impl UniformTable {
    fn sample(reach: f64, f: impl Fn(f64) -> f64) -> Self {
        let lo = -reach - 2.0 * MESH;
        let count = ((2.0 * reach) / MESH).ceil() as usize + 5;
        Self {
            lo,
            step: MESH,
            vals: (0..count).map(|k| f(lo + k as f64 * MESH)).collect(),
        }
    }

    fn eval(&self, x: f64) -> f64 {
        let pos = (x - self.lo) / self.step;
        let k = (pos.floor() as usize).clamp(1, self.vals.len() - 3);
        let p = pos - k as f64;
        let (y0, y1, y2, y3) = (self.vals[k - 1], self.vals[k], self.vals[k + 1], self.vals[k + 2]);
        let w0 = -p * (p - 1.0) * (p - 2.0) / 6.0;
        let w1 = (p + 1.0) * (p - 1.0) * (p - 2.0) / 2.0;
        let w2 = -(p + 1.0) * p * (p - 2.0) / 2.0;
        let w3 = (p + 1.0) * p * (p - 1.0) / 6.0;
        w0 * y0 + w1 * y1 + w2 * y2 + w3 * y3
    }
}

/// Fixed node sets shared by every velocity row.
struct TableRules {
    /// `(cosφ, sinφ, w_φ)` for the `h`-family.
    phis_h: Vec<(f64, f64, f64)>,
    /// `(r, w_r, φ_δ(r), t_c ↦ Σ_t w_t W e^{−(t−t_c)²/2})`.
    radial: Vec<(f64, f64, f64, UniformTable)>,
    phis_a: Vec<(f64, f64, f64)>,
    /// `(t, w_t, u ↦ Σ_r w_r W ½(b₋ + b₊ − 2), u ↦ Σ_r w_r W (b₋ − 1)²)` with
    /// `b∓ = e^{−(r² ∓ 2ru)/4}`.
    lines: Vec<(f64, f64, UniformTable, UniformTable)>,
    t_half: f64,
    /// Radius below which `e^{−2πih·η} − 1` is expanded in moments.
    r_sep: f64,
}

const TAYLOR_TERMS: usize = 24;

impl TableRules {
    fn new(model: &CollisionModel, grid: &PhaseGrid, level: usize) -> Result<Self> {
        let v_max = grid.half_width() * 2f64.sqrt();
        let eta_max = grid.frequency_1d(0).abs() * 2f64.sqrt();
        let mut quad = model.quad.reaching(v_max);
        for _ in 1..level {
            quad = quad.refined();
        }
        let t_window = quad.t_half + v_max;
        // Phases run along h for the first family and along α for the second.
        let quad_h = QuadratureConfig {
            n_t: quad.n_t,
            ..quad.resolved_for(eta_max, quad.r_max, 1.0)
        };
        let quad_a = QuadratureConfig {
            n_r: quad.n_r,
            ..quad.resolved_for(eta_max, t_window, 1.0)
        };
        let rule_h = CarlemanRule::new(model.params, model.kernel, QuadratureConfig { t_half: t_window, ..quad_h })?;
        let rule_a = CarlemanRule::new(model.params, model.kernel, quad_a)?;
        let delta = model.params.delta;
        let radial = rule_h
            .radial(Band::All)
            .into_par_iter()
            .map(|(r, wr)| {
                let trans: Vec<(f64, f64)> = rule_h
                    .transverse(r, 0.0)
                    .into_iter()
                    .map(|(t, wt)| (t, wt * rule_h.weight(r, t)))
                    .filter(|&(_, w)| w != 0.0)
                    .collect();
                let tab = UniformTable::sample(v_max, |tc| {
                    trans.iter().map(|&(t, w)| w * (-(t - tc) * (t - tc) / 2.0).exp()).sum()
                });
                (r, wr, cutoff(r, delta), tab)
            })
            .collect();
        let tan_min = (0.5 * model.kernel.theta_min).tan();
        let n_t = quad_a.n_t;
        let half_line: Rule = graded_panels(1e-3, 1.0, t_window, 1.0, n_t);
        let signed: Vec<(f64, f64)> = half_line.iter().flat_map(|&(t, wt)| [(t, wt), (-t, wt)]).collect();
        let lines = signed
            .into_par_iter()
            .map(|(t, wt)| {
                let ta = t.abs();
                let inner: Rule = if model.kernel.theta_min > 0.0 {
                    let lo = ta * tan_min;
                    if ta < 1.0 {
                        panel(lo, ta, quad_a.n_r)
                    } else {
                        uniform_panels(lo, ta, 1.0, quad_a.n_r)
                    }
                } else {
                    rule_a.radial_below(ta)
                };
                let inner: Vec<(f64, f64)> = inner
                    .into_iter()
                    .map(|(r, wr)| (r, wr * rule_a.weight(r, t)))
                    .filter(|&(_, w)| w != 0.0)
                    .collect();
                let second = UniformTable::sample(v_max, |u| {
                    inner
                        .iter()
                        .map(|&(r, w)| {
                            let minus = ((2.0 * r * u - r * r) / 4.0).exp_m1();
                            let plus = ((-2.0 * r * u - r * r) / 4.0).exp_m1();
                            w * 0.5 * (minus + plus)
                        })
                        .sum()
                });
                let square = UniformTable::sample(v_max, |u| {
                    inner
                        .iter()
                        .map(|&(r, w)| {
                            let minus = ((2.0 * r * u - r * r) / 4.0).exp_m1();
                            w * minus * minus
                        })
                        .sum()
                });
                (t, wt, second, square)
            })
            .collect();
        let r_sep = (0.5 / (2.0 * PI * eta_max.max(1e-12))).min(0.25 * delta);
        Ok(Self {
            phis_h: rule_h.directions().to_vec(),
            radial,
            phis_a: rule_a.directions().to_vec(),
            lines,
            t_half: quad.t_half,
            r_sep,
        })
    }
}

/// Per-axis phase tables `E[m][node] = e^{sign·2πi x_node η_m}`.
fn axis_phases(grid: &PhaseGrid, coords: &[f64], sign: f64) -> DMatrix<Complex64> {
    let n = grid.n();
    DMatrix::from_fn(n, coords.len(), |m, j| Complex64::from_polar(1.0, sign * 2.0 * PI * coords[j] * grid.frequency_1d(m)))
}

/// `F[m1, m2] = Σ_j E1[m1, j] G_j E2[m2, j]`, flattened over the dual grid.
fn separable_sum(e1: &DMatrix<Complex64>, e2: &DMatrix<Complex64>, g: &[Complex64]) -> Vec<Complex64> {
    let n = e1.nrows();
    let mut out = vec![C0; n * n];
    let mut left = vec![C0; n];
    for (j, gj) in g.iter().enumerate() {
        if *gj == C0 {
            continue;
        }
        let c1 = e1.column(j);
        let c2 = e2.column(j);
        for m1 in 0..n {
            left[m1] = c1[m1] * gj;
        }
        for m1 in 0..n {
            let l = left[m1];
            let row = &mut out[m1 * n..(m1 + 1) * n];
            for (slot, e) in row.iter_mut().zip(c2.iter()) {
                *slot += l * e;
            }
        }
    }
    out
}

/// Velocity row of the `h`-family: `(a, a_s, ã_1, L₁₃, D)`.
struct HRow {
    a: Vec<Complex64>,
    a_s: Vec<Complex64>,
    a1: Vec<Complex64>,
    l13: f64,
    d: f64,
}

struct HPhases {
    e1: DMatrix<Complex64>,
    e2: DMatrix<Complex64>,
    /// Node → (φ index, r index) for `r ≥ r_sep`.
    map: Vec<(usize, usize)>,
    small: Vec<usize>,
}

fn h_phases(rules: &TableRules, grid: &PhaseGrid) -> HPhases {
    let mut x1 = Vec::new();
    let mut x2 = Vec::new();
    let mut map = Vec::new();
    for (k, &(c, s, _)) in rules.phis_h.iter().enumerate() {
        for (j, (r, ..)) in rules.radial.iter().enumerate() {
            if *r >= rules.r_sep {
                x1.push(r * c);
                x2.push(r * s);
                map.push((k, j));
            }
        }
    }
    let small = (0..rules.radial.len()).filter(|&j| rules.radial[j].0 < rules.r_sep).collect();
    HPhases {
        e1: axis_phases(grid, &x1, -1.0),
        e2: axis_phases(grid, &x2, -1.0),
        map,
        small,
    }
}

fn h_row(rules: &TableRules, ph: &HPhases, grid: &PhaseGrid, v: [f64; 2]) -> HRow {
    let n_phi = rules.phis_h.len();
    let n_r = rules.radial.len();
    let ne = grid.len();
    let vv = norm2(v);
    // S2[k][j] = Σ_t w_t W μ(v+α)
    let mut g1 = vec![0.0; n_phi * n_r];
    let mut gs = vec![0.0; n_phi * n_r];
    let mut g1t = vec![0.0; n_phi * n_r];
    let mut outer_const = 0.0;
    let mut l13 = 0.0;
    let mut d = 0.0;
    for (k, &(c, s, wphi)) in rules.phis_h.iter().enumerate() {
        let u = v[0] * c + v[1] * s;
        let vp = -v[0] * s + v[1] * c;
        let tc = -vp;
        for (j, (r, wr, phi, tab)) in rules.radial.iter().enumerate() {
            let s2 = tab.eval(tc) * (-(vv - vp * vp) / 2.0).exp();
            if s2 == 0.0 {
                continue;
            }
            let s2 = s2 * wphi * wr / (2.0 * PI);
            let bm1 = (-(r * r - 2.0 * r * u) / 4.0).exp_m1();
            let b = 1.0 + bm1;
            let idx = k * n_r + j;
            g1[idx] = phi * s2;
            gs[idx] = -phi * bm1 * s2;
            g1t[idx] = (1.0 - phi) * b * s2;
            outer_const += (1.0 - phi) * b * b * s2;
            d += 0.5 * phi * bm1 * bm1 * s2;
            let ch = (r * u).cosh();
            let sh = (0.5 * r * u).sinh();
            l13 -= phi * s2 * ((-r * r / 2.0).exp_m1() * ch + 2.0 * sh * sh);
        }
    }
    // Large |h| through separable phases.
    let pick = |g: &[f64]| -> Vec<Complex64> { ph.map.iter().map(|&(k, j)| Complex64::new(g[k * n_r + j], 0.0)).collect() };
    let f1 = separable_sum(&ph.e1, &ph.e2, &pick(&g1));
    let fs = separable_sum(&ph.e1, &ph.e2, &pick(&gs));
    let f1t = separable_sum(&ph.e1, &ph.e2, &pick(&g1t));
    let sum_big = |g: &[f64]| -> f64 { ph.map.iter().map(|&(k, j)| g[k * n_r + j]).sum() };
    let (c1, cs) = (sum_big(&g1), sum_big(&gs));
    // Small |h| by moments of r along each direction.
    let mut mom1 = vec![[0.0; TAYLOR_TERMS + 1]; n_phi];
    let mut moms = vec![[0.0; TAYLOR_TERMS + 1]; n_phi];
    for k in 0..n_phi {
        for &j in &ph.small {
            let r = rules.radial[j].0;
            let mut rk = 1.0;
            for p in 1..=TAYLOR_TERMS {
                rk *= r;
                mom1[k][p] += g1[k * n_r + j] * rk;
                moms[k][p] += gs[k * n_r + j] * rk;
            }
        }
    }
    let mut a = vec![C0; ne];
    let mut a_s = vec![C0; ne];
    for m in 0..ne {
        let eta = grid.frequency(m);
        let mut p1 = C0;
        let mut ps = C0;
        for (k, &(c, s, _)) in rules.phis_h.iter().enumerate() {
            let q = 2.0 * PI * (c * eta[0] + s * eta[1]);
            // Σ_p m_p (−iq)^p / p!
            let z = Complex64::new(0.0, -q);
            let mut term = Complex64::new(1.0, 0.0);
            for p in 1..=TAYLOR_TERMS {
                term = term * z / p as f64;
                p1 += term * mom1[k][p];
                ps += term * moms[k][p];
            }
        }
        let e1 = p1 + f1[m] - c1;
        let es = ps + fs[m] - cs;
        a[m] = Complex64::new(-e1.re + outer_const, 0.0);
        a_s[m] = es;
    }
    HRow { a, a_s, a1: f1t, l13, d }
}

struct APhases {
    e1: DMatrix<Complex64>,
    e2: DMatrix<Complex64>,
}

fn a_phases(rules: &TableRules, grid: &PhaseGrid) -> APhases {
    let mut x1 = Vec::new();
    let mut x2 = Vec::new();
    for &(c, s, _) in &rules.phis_a {
        for (t, ..) in &rules.lines {
            x1.push(-t * s);
            x2.push(t * c);
        }
    }
    APhases {
        e1: axis_phases(grid, &x1, 1.0),
        e2: axis_phases(grid, &x2, 1.0),
    }
}

/// Velocity row of the `α`-family: `(a_2c, a_2d)`.
fn a_row(rules: &TableRules, ph: &APhases, v: [f64; 2]) -> (Vec<Complex64>, Vec<Complex64>) {
    let n_t = rules.lines.len();
    let mv = maxwell_half(v);
    let vv = norm2(v);
    let mut gc = vec![C0; rules.phis_a.len() * n_t];
    let mut gd = vec![C0; rules.phis_a.len() * n_t];
    for (k, &(c, s, wphi)) in rules.phis_a.iter().enumerate() {
        let u = v[0] * c + v[1] * s;
        let vp = -v[0] * s + v[1] * c;
        for (j, (t, wt, second, square)) in rules.lines.iter().enumerate() {
            if (t + vp).abs() > rules.t_half {
                continue;
            }
            let mt = (-(vv + 2.0 * t * vp + t * t) / 4.0).exp() / (2.0 * PI).sqrt();
            let (sc, sd) = (second.eval(u), square.eval(u));
            let f = wphi * wt * mv * mt;
            gc[k * n_t + j] = Complex64::new(f * sc, 0.0);
            gd[k * n_t + j] = Complex64::new(f * sd, 0.0);
        }
    }
    (separable_sum(&ph.e1, &ph.e2, &gc), separable_sum(&ph.e1, &ph.e2, &gd))
}

/// Velocity nodes used for the refinement estimate.
fn probe_rows(grid: &PhaseGrid) -> Vec<usize> {
    let nearest = |x: [f64; 2]| -> usize {
        (0..grid.len())
            .min_by(|&i, &j| {
                let (a, b) = (grid.velocity(i), grid.velocity(j));
                norm2(sub(a, x)).partial_cmp(&norm2(sub(b, x))).unwrap()
            })
            .unwrap()
    };
    let r = grid.half_width();
    let mut rows = vec![nearest([0.0, 0.0]), nearest([0.3 * r, -0.2 * r]), nearest([-0.5 * r, 0.4 * r])];
    rows.dedup();
    rows
}

fn row_change(coarse: &[Complex64], fine: &[Complex64]) -> f64 {
    let scale = fine.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return 0.0;
    }
    coarse.iter().zip(fine).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max) / scale
}

impl SymbolTables {
    /// Tabulates every piece on a `d = 2` grid. Node doubling is applied on a few
    /// probe velocities and every family must move by less than `quad.tol`.
    pub fn build(grid: &PhaseGrid, model: &CollisionModel) -> Result<Self> {
        if grid.dim() != 2 {
            return Err(invalid("grid", "collision symbols need a two-dimensional grid"));
        }
        model.params.validate()?;
        model.quad.validate()?;
        let ne = grid.len();
        let a_one = unit_radial_weight(model);

        let rules = TableRules::new(model, grid, 1)?;
        let hp = h_phases(&rules, grid);
        let ap = a_phases(&rules, grid);
        let etas: Vec<[f64; 2]> = (0..ne).map(|m| grid.frequency(m)).collect();
        let rows: Vec<(HRow, (Vec<Complex64>, Vec<Complex64>), Vec<Complex64>)> = (0..ne)
            .into_par_iter()
            .map(|i| {
                let v = grid.velocity(i);
                (h_row(&rules, &hp, grid, v), a_row(&rules, &ap, v), a2ca_row(model, v, &etas, a_one, 1))
            })
            .collect();

        let fine = TableRules::new(model, grid, 2)?;
        let hp2 = h_phases(&fine, grid);
        let ap2 = a_phases(&fine, grid);
        let mut worst = [0.0f64; 6];
        for i in probe_rows(grid) {
            let v = grid.velocity(i);
            let h = h_row(&fine, &hp2, grid, v);
            let (c2, d2) = a_row(&fine, &ap2, v);
            let ca = a2ca_row(model, v, &etas, a_one, 2);
            let (hr, (cr, dr), car) = &rows[i];
            let lmul = |x: f64, y: f64| if y == 0.0 { 0.0 } else { (x - y).abs() / y.abs().max(1e-300) };
            worst[0] = worst[0].max(row_change(&hr.a, &h.a)).max(row_change(&hr.a_s, &h.a_s));
            worst[1] = worst[1].max(row_change(&hr.a1, &h.a1));
            worst[2] = worst[2].max(row_change(cr, &c2));
            worst[3] = worst[3].max(row_change(dr, &d2));
            worst[4] = worst[4].max(row_change(car, &ca));
            worst[5] = worst[5].max(lmul(hr.l13, h.l13)).max(lmul(hr.d, h.d));
        }
        let names = ["a+a_s", "a1", "a2c", "a2d", "a2ca", "multipliers"];
        for (name, &w) in names.iter().zip(&worst) {
            if !w.is_finite() || w > model.quad.tol {
                return Err(Error::NonConverged {
                    change: w,
                    tol: model.quad.tol,
                    context: format!("symbol table {name} on grid {}", grid.id()),
                });
            }
        }

        let mut out = Self {
            grid: *grid,
            model: *model,
            a: Vec::with_capacity(ne * ne),
            a_s: Vec::with_capacity(ne * ne),
            a1: Vec::with_capacity(ne * ne),
            a2c: Vec::with_capacity(ne * ne),
            a2r: Vec::new(),
            a2d: Vec::with_capacity(ne * ne),
            a2ca: Vec::with_capacity(ne * ne),
            l13: Vec::with_capacity(ne),
            d: Vec::with_capacity(ne),
            refinement: names.iter().zip(worst).map(|(n, w)| (n.to_string(), w)).collect(),
        };
        for (h, (c, d), ca) in rows {
            out.a.extend(h.a);
            out.a_s.extend(h.a_s);
            out.a1.extend(h.a1);
            out.a2c.extend(c);
            out.a2d.extend(d);
            out.a2ca.extend(ca);
            out.l13.push(h.l13);
            out.d.push(h.d);
        }
        out.a2r = out.a2c.clone();
        for (i, &d) in out.d.iter().enumerate() {
            if d < -1e-12 {
                return Err(Error::Negative {
                    value: d,
                    context: format!("D at v={:?}", grid.velocity(i)),
                });
            }
        }
        Ok(out)
    }
}

/// Growth fit `|sym(v,η)| ≤ C ⟨v⟩^{order} (1+|η|)^p` over a table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub amplitude: f64,
    pub exponent: f64,
}

/// Least-squares slope of `log max_v |sym|/⟨v⟩^{order}` against `log(1+|η|)` over
/// shells in `|η|`, then the smallest amplitude covering every node.
pub fn decay_fit(table: &[Complex64], grid: &PhaseGrid, order: f64) -> DecayFit {
    let ne = grid.len();
    let mut shells: Vec<(f64, f64)> = Vec::new();
    let mut env = vec![0.0f64; ne];
    for i in 0..ne {
        let w = (1.0 + norm2(grid.velocity(i))).sqrt().powf(order);
        for m in 0..ne {
            env[m] = env[m].max(table[i * ne + m].norm() / w);
        }
    }
    let deta = grid.deta();
    for m in 0..ne {
        let e = norm2(grid.frequency(m)).sqrt();
        let key = (e / deta).round() * deta;
        match shells.iter_mut().find(|(k, _)| (*k - key).abs() < 1e-9) {
            Some(s) => s.1 = s.1.max(env[m]),
            None => shells.push((key, env[m])),
        }
    }
    let pts: Vec<(f64, f64)> = shells
        .iter()
        .filter(|(_, y)| *y > 0.0)
        .map(|&(e, y)| ((1.0 + e).ln(), y.ln()))
        .collect();
    let exponent = if pts.len() < 2 {
        0.0
    } else {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        if sxx == 0.0 {
            0.0
        } else {
            sxy / sxx
        }
    };
    let amplitude = (0..ne)
        .map(|m| env[m] / (1.0 + norm2(grid.frequency(m)).sqrt()).powf(exponent))
        .fold(0.0, f64::max);
    DecayFit { amplitude, exponent }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boltzmann::cancellation::cancellation_constant;
    use crate::boltzmann::params::{KernelSpec, KineticParams};
    use crate::quadrature::{integrate, panel, periodic_trapezoid};
    use crate::symbol::a_tilde;

    fn model(gamma: f64) -> CollisionModel {
        model_delta(gamma, 1.0)
    }

    fn model_delta(gamma: f64, delta: f64) -> CollisionModel {
        CollisionModel::new(KineticParams::new(gamma, 0.5, delta).unwrap(), KernelSpec::default(), QuadratureConfig::default()).unwrap()
    }

    fn bracket(v: [f64; 2]) -> f64 {
        (1.0 + norm2(v)).sqrt()
    }

    #[test]
    fn tables_agree_with_pointwise_quadrature() {
        let m = model(-2.0);
        let g = PhaseGrid::new(2, 8, 3.0).unwrap();
        let tab = SymbolTables::build(&g, &m).unwrap();
        for (_, change) in &tab.refinement {
            assert!(*change < m.quad.tol);
        }
        let ne = g.len();
        for (i, mm) in [(g.flatten([4, 4]), g.flatten([5, 3])), (g.flatten([2, 5]), g.flatten([1, 6])), (g.flatten([6, 3]), g.flatten([4, 4]))] {
            let (v, eta) = (g.velocity(i), g.frequency(mm));
            let k = i * ne + mm;
            let scale = tab.a[k].norm();
            let pairs = [
                ("a", tab.a[k], Complex64::new(m.symbol_a(v, eta).unwrap().refined, 0.0)),
                ("a_s", tab.a_s[k], m.symbol_a_s(v, eta).unwrap().refined),
                ("a1", tab.a1[k], m.symbol_a1_delta(v, eta).unwrap().refined),
                ("a2c", tab.a2c[k], m.symbol_l2(L2Part::C, v, eta).unwrap().refined),
                ("a2r", tab.a2r[k], m.symbol_l2(L2Part::R, v, eta).unwrap().refined),
                ("a2d", tab.a2d[k], m.symbol_l2(L2Part::D, v, eta).unwrap().refined),
                ("a2ca", tab.a2ca[k], m.symbol_l2(L2Part::Ca, v, eta).unwrap().refined),
                ("D", Complex64::new(tab.d[i], 0.0), Complex64::new(m.multiplier_d(v).unwrap().refined, 0.0)),
                ("L13", Complex64::new(tab.l13[i], 0.0), Complex64::new(m.multiplier_l13(v), 0.0)),
            ];
            for (name, t, p) in pairs {
                assert!((t - p).norm() <= 1e-3 * scale, "{name} at v={v:?} η={eta:?}: table {t} pointwise {p}");
            }
        }
    }

    #[test]
    fn a_s_vanishes_at_zero_frequency() {
        let m = model(-2.0);
        let est = m.symbol_a_s([0.7, -1.2], [0.0, 0.0]).unwrap();
        assert_eq!(est.refined, C0);
        assert_eq!(est.value, C0);
    }

    #[test]
    fn a_at_zero_frequency_is_the_outer_integral() {
        let m = model(-2.0);
        let v = [1.0, 0.5];
        let a = m.symbol_a(v, [0.0, 0.0]).unwrap().refined;
        let rule = CarlemanRule::new(m.params, m.kernel, m.quad).unwrap().refined();
        let outer = rule
            .integrate(Band::All, [-v[0], -v[1]], |al, h| {
                Complex64::new((1.0 - cutoff(norm2(h).sqrt(), 1.0)) * maxwell(sub(add(v, al), h)), 0.0)
            })
            .re;
        assert!((a - outer).abs() <= 1e-6 * outer, "{a} vs {outer}");
    }

    #[test]
    fn a_is_even_in_frequency_and_rotation_invariant() {
        let m = model(-2.0);
        let v = [1.5, -0.5];
        let eta = [0.6, 0.8];
        let a = m.symbol_a(v, eta).unwrap().refined;
        let b = m.symbol_a(v, [-eta[0], -eta[1]]).unwrap().refined;
        let c = m.symbol_a([0.5, 1.5], [-0.8, 0.6]).unwrap().refined;
        assert!((a - b).abs() <= 1e-10 * a);
        assert!((a - c).abs() <= 1e-3 * a, "{a} vs rotated {c}");
    }

    #[test]
    fn a_tracks_the_model_weight() {
        // v = (x, 0), η = (0, y): a is even in x and in y on this slice.
        let m = model(-2.0);
        let pts: Vec<f64> = (0..16).map(|j| -4.0 + 8.0 * j as f64 / 15.0).collect();
        let half: Vec<f64> = pts.iter().copied().filter(|x| *x > 0.0).collect();
        let (mut lo, mut hi) = ((f64::INFINITY, f64::INFINITY), (0.0f64, 0.0f64));
        for &x in &half {
            for &y in &half {
                let (v, eta) = ([x, 0.0], [0.0, y]);
                let a = m.symbol_a(v, eta).unwrap();
                let w = a_tilde(&v, &eta, -2.0, 0.5);
                let (r0, r1) = (a.value / w, a.refined / w);
                lo = (lo.0.min(r0), lo.1.min(r1));
                hi = (hi.0.max(r0), hi.1.max(r1));
            }
        }
        assert!(lo.1 > 0.0 && hi.1.is_finite());
        assert!((lo.0 - lo.1).abs() <= 0.05 * lo.1);
        assert!((hi.0 - hi.1).abs() <= 0.05 * hi.1);
    }

    #[test]
    fn a_at_origin_grows_like_the_order() {
        let m = model(-2.0);
        let ks = [4.0f64, 8.0, 16.0];
        let pts: Vec<(f64, f64)> = ks.iter().map(|&k| (k.ln(), m.symbol_a([0.0, 0.0], [k, 0.0]).unwrap().refined.ln())).collect();
        let n = pts.len() as f64;
        let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
        let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
        assert!((slope - 1.0).abs() <= 0.15, "slope {slope}");
    }

    #[test]
    fn a2ca_constant_matches_cancellation_constant() {
        let m = model(-1.5);
        let c = cancellation_constant(&m.params, &m.kernel).unwrap();
        let a = a2ca_constant(&m);
        assert!((a - c).abs() <= 1e-3 * c.abs(), "{a} vs {c}");
    }

    #[test]
    fn a2ca_at_zero_frequency_is_a_convolution() {
        let m = model(-1.5);
        let c = cancellation_constant(&m.params, &m.kernel).unwrap();
        let v = [0.8, -0.4];
        // ρ = x², so ρ^{γ+1} dρ = 2 x^{2γ+3} dx = 2 dx at γ = −1.5.
        let theta = periodic_trapezoid(256);
        let conv = integrate(&panel(0.0, 4.0, 64), |x| {
            let rho = x * x;
            2.0 * integrate(&theta, |th| maxwell_half(add(v, [rho * th.cos(), rho * th.sin()])))
        });
        let expect = c * maxwell_half(v) * conv;
        let got = m.symbol_l2(L2Part::Ca, v, [0.0, 0.0]).unwrap().refined;
        assert!(got.im.abs() <= 1e-12);
        assert!((got.re - expect).abs() <= 1e-3 * expect.abs(), "{got} vs {expect}");
    }

    #[test]
    fn a2ca_at_the_endpoint_is_a_multiple_of_mu() {
        let m = model(-2.0);
        let a1 = unit_radial_weight(&m);
        for v in [[0.0, 0.0], [1.0, 2.0]] {
            let got = m.symbol_l2(L2Part::Ca, v, [0.3, 0.1]).unwrap().refined;
            assert!((got.re - 2.0 * PI * a1 * maxwell(v)).abs() <= 1e-14 && got.im == 0.0);
        }
    }

    #[test]
    fn l2c_decays_like_the_order() {
        let m = model(-2.0);
        let v = [3.0, 0.0];
        let lv = bracket(v).powf(-1.0);
        let (mut c0, mut c1) = (0.0f64, 0.0f64);
        for eta in [[0.0, 0.0], [0.5, 0.0], [0.0, 1.0], [1.0, 1.0]] {
            let e = m.symbol_l2(L2Part::C, v, eta).unwrap();
            c0 = c0.max(e.value.norm() / lv);
            c1 = c1.max(e.refined.norm() / lv);
        }
        assert!(c1.is_finite() && c1 > 0.0);
        assert!((c0 - c1).abs() <= 0.1 * c1);
    }

    #[test]
    fn d_is_nonnegative() {
        use rand::{Rng, SeedableRng};
        let m = model(-2.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let v = [rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0)];
            assert!(m.multiplier_d(v).unwrap().refined >= 0.0);
        }
    }

    #[test]
    fn d_shrinks_with_the_cutoff_radius() {
        let v = [0.5, 0.25];
        let ds: Vec<f64> = [1.0, 0.5, 0.25].iter().map(|&dl| model_delta(-2.0, dl).multiplier_d(v).unwrap().refined).collect();
        assert!(ds[0] > ds[1] && ds[1] > ds[2] && ds[2] > 0.0, "{ds:?}");
    }

    #[test]
    fn d_is_bounded_by_the_order_weight() {
        let m = model(-2.0);
        let (mut c0, mut c1) = (0.0f64, 0.0f64);
        for v in [[0.0, 0.0], [1.0, 0.0], [2.0, 1.0], [3.0, -2.0], [0.0, 5.0]] {
            let d = m.multiplier_d(v).unwrap();
            let w = bracket(v).powf(-1.0);
            c0 = c0.max(d.value / w);
            c1 = c1.max(d.refined / w);
        }
        assert!(c1 > 0.0 && (c0 - c1).abs() <= 0.1 * c1);
    }

    #[test]
    fn l13_obeys_the_two_term_bound() {
        // |L13| ≤ C(⟨v⟩^γ + δ^{2−2s}⟨v⟩^{γ+2s−2}) at γ = −2, s = ½, δ = 1.
        let m = model(-2.0);
        let ratios: Vec<f64> = [0.0, 1.0, 2.0, 4.0, 6.0]
            .iter()
            .map(|&x| {
                let b = bracket([x, 0.0]);
                m.multiplier_l13([x, 0.0]).abs() / (b.powf(-2.0) + b.powf(-3.0))
            })
            .collect();
        let c = ratios.iter().cloned().fold(0.0, f64::max);
        assert!(c.is_finite() && ratios[4] <= 1.5 * ratios[3] + 1e-12, "{ratios:?}");
    }
}
