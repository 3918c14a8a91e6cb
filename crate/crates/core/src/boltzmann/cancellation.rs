//! Cancellation structure: the kernel `S(z)` and the radial reduction used for the
//! multiplier `L_{1,3,δ}` and the symbol `a_{2,ca}`.
//!
//! For an integrand `g(α) − ½g(α−h) − ½g(α+h)` the direction angle can be integrated
//! first, since the Carleman weight depends on `(|h|, |α|)` only. With `ḡ(σ)` the
//! circular mean of `g` on `|y| = σ`,
//!
//! `∫∫ W [g(α) − ½g(α−h) − ½g(α+h)] = −2π ∫₀^∞ ḡ'(σ) A(σ) dσ`,
//!
//! `A(σ) = ∫∫_{r ≤ |t| < σ < √(t²+r²)} W r dr dt`. Without a radial cutoff
//! `A(σ) = A(1) σ^{γ+2}`.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;

use super::params::{cutoff, KernelSpec, KineticParams};
use crate::error::{Error, Result};
use crate::quadrature::{geometric_panels, graded_panels, panel, periodic_trapezoid};

/// Below this angle the bracket is replaced by its `θ²` asymptote.
const THETA_TAIL: f64 = 1e-3;

/// Returns `(value, absolute scale)`.
fn kernel_s_raw(g: &impl Fn(f64, f64) -> f64, z: f64, p: &KineticParams, k: &KernelSpec, n: usize) -> (f64, f64) {
    let nu = p.nu();
    let bracket = |theta: f64| {
        let (c, sn) = ((0.5 * theta).cos(), (0.5 * theta).sin());
        let moved = g(z / c, z * sn / c) / (c * c);
        let stay = g(z, z * sn);
        (2.0 * k.b(theta, nu) * (moved - stay), 2.0 * k.b(theta, nu) * (moved.abs() + stay.abs()))
    };
    let lo = k.theta_min.max(THETA_TAIL);
    let mut value = 0.0;
    let mut scale = 0.0;
    for (theta, w) in graded_panels(lo, 0.1, FRAC_PI_2, 0.1, n) {
        let (f, a) = bracket(theta);
        value += w * f;
        scale += w * a;
    }
    if k.theta_min < THETA_TAIL {
        // b ~ θ^{−ν} and the bracket is O(θ²) near zero.
        let a = k.theta_min.max(0.0) / THETA_TAIL;
        let (f, _) = bracket(THETA_TAIL);
        value += f * THETA_TAIL * (1.0 - a.powf(3.0 - nu)) / (3.0 - nu);
    }
    (value, scale)
}

/// `S(z) = 2 ∫₀^{π/2} b(cosθ) [cos^{−2}(θ/2) G(|z|/cos(θ/2), |z| tan(θ/2)) − G(|z|, |z| sin(θ/2))] dθ`,
/// the two-dimensional cancellation kernel for `B = G(|v−v_*|, |v−v'|) b(cosθ)`.
pub fn cancellation_kernel(g: impl Fn(f64, f64) -> f64, z: f64, p: &KineticParams, k: &KernelSpec) -> Result<f64> {
    let (mut coarse, _) = kernel_s_raw(&g, z, p, k, 10);
    let mut change = f64::INFINITY;
    for n in [20, 40, 80] {
        let (fine, scale) = kernel_s_raw(&g, z, p, k, n);
        change = (coarse - fine).abs() / fine.abs().max(1e-300);
        if fine.is_finite() && (coarse - fine).abs() <= 1e-5 * fine.abs().max(1e-3 * scale) {
            return Ok(fine);
        }
        coarse = fine;
    }
    Err(Error::NonConverged {
        change,
        tol: 1e-5,
        context: format!("cancellation kernel near θ=0 at |z|={z}"),
    })
}

/// The constant `C` with `S(z) = C |z|^γ` for `G(r, r') = r^γ`.
pub fn cancellation_constant(p: &KineticParams, k: &KernelSpec) -> Result<f64> {
    let gamma = p.gamma;
    cancellation_kernel(|r, _| r.powf(gamma), 1.0, p, k)
}

/// `A(σ)`, optionally with the radial cutoff `φ_δ(|h|)` inside.
pub fn radial_weight(sigma: f64, p: &KineticParams, k: &KernelSpec, with_cutoff: bool, n: usize) -> f64 {
    let s = p.s;
    let nu = p.nu();
    let expo = 0.5 * (p.gamma + 1.0 + 2.0 * s);
    let tan_min = (0.5 * k.theta_min).tan();
    // Outer variable x = σ − t ∈ (0, σ(1 − 1/√2)], x = y^{1/(1−s)} removes the x^{−s} edge.
    let x_max = sigma * (1.0 - std::f64::consts::FRAC_1_SQRT_2);
    let y_max = x_max.powf(1.0 - s);
    let inv = 1.0 / (1.0 - s);
    let mut total = 0.0;
    for (y, wy) in geometric_panels(1e-12 * y_max.max(1e-300), y_max, n) {
        let x = y.powf(inv);
        let dx = inv * y.powf(inv - 1.0) * wy;
        let t = sigma - x;
        let mut r_lo = (x * (2.0 * sigma - x)).sqrt();
        let mut r_hi = t;
        if k.theta_min > 0.0 {
            r_lo = r_lo.max(t * tan_min);
        }
        if with_cutoff {
            r_hi = r_hi.min(p.delta);
        }
        if r_lo >= r_hi {
            continue;
        }
        // inner in u = ln r
        let inner: f64 = panel(r_lo.ln(), r_hi.ln(), n)
            .iter()
            .map(|&(u, wu)| {
                let r = u.exp();
                let bt = k.b_tilde_rt(r, t, nu);
                let cut = if with_cutoff { cutoff(r, p.delta) } else { 1.0 };
                wu * bt * cut * (t * t + r * r).powf(expo) * r.powf(-2.0 * s)
            })
            .sum();
        total += dx * inner;
    }
    // t and −t contribute equally.
    2.0 * total
}

/// `A(σ)` tabulated on a σ-rule for the cutoff case, plus `A(1)` for the pure power.
#[derive(Debug, Clone)]
pub struct RadialWeights {
    pub params: KineticParams,
    pub kernel: KernelSpec,
    pub a_one: f64,
    sigma_max: f64,
    nodes: Vec<(f64, f64, f64)>,
}

impl RadialWeights {
    /// `sigma_max` bounds the σ-range (envelopes are Gaussian in σ − |v|).
    pub fn new(p: KineticParams, k: KernelSpec, sigma_max: f64, n: usize) -> Self {
        let a_one = radial_weight(1.0, &p, &k, false, 4 * n);
        let rule = graded_panels(1e-6, 0.5, sigma_max, 0.5, n);
        let nodes = rule
            .into_iter()
            .map(|(sg, w)| (sg, w, radial_weight(sg, &p, &k, true, 4 * n)))
            .collect();
        Self {
            params: p,
            kernel: k,
            a_one,
            sigma_max,
            nodes,
        }
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigma_max
    }

    /// `−2π ∫ ḡ'(σ) A_δ(σ) dσ` for a radial-derivative profile `dg(σ) = ḡ'(σ)`.
    pub fn apply_cutoff(&self, dg: impl Fn(f64) -> f64) -> f64 {
        -2.0 * PI * self.nodes.iter().map(|&(sg, w, a)| w * a * dg(sg)).sum::<f64>()
    }

    /// `−2π A(1) ∫ ḡ'(σ) σ^{γ+2} dσ`.
    pub fn apply_power(&self, dg: impl Fn(f64) -> Complex64) -> Complex64 {
        let e = self.params.gamma + 2.0;
        let sum: Complex64 = self.nodes.iter().map(|&(sg, w, _)| dg(sg) * (w * sg.powf(e))).sum();
        sum * (-2.0 * PI * self.a_one)
    }
}

/// Trapezoid count for a circular mean of `exp(ρ w·e)` with `|w| ≤ wn`.
pub(crate) fn circle_nodes(rho: f64, wn: f64) -> usize {
    32 + (1.5 * rho * wn).ceil() as usize
}

/// `d/dσ` of the circular mean of `μ(v + σe)` with `μ = (2π)^{-1} e^{−|x|²/2}`.
pub fn mu_mean_derivative(v: [f64; 2], sigma: f64) -> f64 {
    let vn = (v[0] * v[0] + v[1] * v[1]).sqrt();
    let rule = periodic_trapezoid(circle_nodes(sigma, vn));
    let n = rule.len() as f64;
    rule.iter()
        .map(|&(th, _)| {
            let e = [th.cos(), th.sin()];
            let x = [v[0] + sigma * e[0], v[1] + sigma * e[1]];
            let mu = (-(x[0] * x[0] + x[1] * x[1]) / 2.0).exp() / (2.0 * PI);
            -mu * (x[0] * e[0] + x[1] * e[1])
        })
        .sum::<f64>()
        / n
}

/// `L_{1,3,δ}` multiplier `∫∫ W φ_δ(h)(μ(v+α) − ½μ(v+α−h) − ½μ(v+α+h))`.
pub fn multiplier_l13(v: [f64; 2], w: &RadialWeights) -> f64 {
    w.apply_cutoff(|sg| mu_mean_derivative(v, sg))
}

#[cfg(test)]
mod tests {
    use super::super::carleman::{sigma_integrate, Band, CarlemanRule};
    use super::super::params::{AngularKernel, QuadratureConfig};
    use super::*;

    fn soft(gamma: f64) -> KineticParams {
        KineticParams::new(gamma, 0.5, 1.0).unwrap()
    }

    #[test]
    fn constant_g_gives_zero_kernel() {
        let p = soft(-1.5);
        for k in [KernelSpec::default(), KernelSpec::with_cutoff(AngularKernel::PowerLaw, 0.0)] {
            let s = cancellation_kernel(|r, _| r.powi(-2), 1.3, &p, &k).unwrap();
            assert!(s.abs() < 1e-12, "{s}");
        }
        let zero = cancellation_kernel(|_, _| 0.0, 1.0, &p, &KernelSpec::default()).unwrap();
        assert_eq!(zero, 0.0);
    }

    /// Convolution `(S ∗ f)(v)` against the σ-representation for a bump at distance 1.
    #[test]
    fn kernel_matches_sigma_oracle_at_unit_distance() {
        let p = soft(-1.5);
        let k = KernelSpec::default();
        let c = cancellation_constant(&p, &k).unwrap();
        let v = [0.0, 0.0];
        let bump = |x: [f64; 2]| (-((x[0] - 1.0).powi(2) + x[1] * x[1]) / (2.0 * 0.09)).exp();
        // (S ∗ f)(v) = ∫ C|z|^γ f(v − z) dz
        let mut conv = 0.0;
        for (rho, wr) in graded_panels(1e-8, 0.5, 3.0, 0.1, 12) {
            for (psi, wp) in periodic_trapezoid(128) {
                let z = [rho * psi.cos(), rho * psi.sin()];
                conv += wr * wp * rho * c * rho.powf(p.gamma) * bump([v[0] - z[0], v[1] - z[1]]);
            }
        }
        let oracle = sigma_integrate(v, &p, &k, 24, 3.5, |vs, _, vps| bump(vps) - bump(vs));
        assert!(((conv - oracle) / oracle).abs() < 1e-2, "S∗f {conv} σ-oracle {oracle}");
    }

    #[test]
    fn kernel_vanishes_for_pure_power_at_minus_d() {
        let p = soft(-2.0);
        assert!(cancellation_constant(&p, &KernelSpec::default()).unwrap().abs() < 1e-12);
    }

    #[test]
    fn radial_weight_is_homogeneous() {
        let p = soft(-1.5);
        let k = KernelSpec::default();
        let a1 = radial_weight(1.0, &p, &k, false, 40);
        let a3 = radial_weight(3.0, &p, &k, false, 40);
        assert!((a3 / a1 - 3f64.powf(p.gamma + 2.0)).abs() < 1e-8, "{a1} {a3}");
    }

    /// Radial reduction of the symmetrized Carleman integral against direct 3D quadrature.
    #[test]
    fn l13_radial_reduction_matches_carleman_quadrature() {
        for (gamma, v) in [(-2.0, [0.7, -0.4]), (-1.5, [1.1, 0.3])] {
            let p = KineticParams::new(gamma, 0.5, 1.0).unwrap();
            let k = KernelSpec::default();
            let w = RadialWeights::new(p, k, 14.0, 12);
            let mu = |x: [f64; 2]| (-(x[0] * x[0] + x[1] * x[1]) / 2.0).exp() / (2.0 * PI);
            let rule = CarlemanRule::new(p, k, QuadratureConfig::default()).unwrap();
            let direct = rule
                .integrate_checked(Band::Inner, [-v[0], -v[1]], |a, h| {
                    let c = cutoff((h[0] * h[0] + h[1] * h[1]).sqrt(), p.delta);
                    let x = [v[0] + a[0], v[1] + a[1]];
                    Complex64::new(
                        c * (mu(x) - 0.5 * mu([x[0] - h[0], x[1] - h[1]]) - 0.5 * mu([x[0] + h[0], x[1] + h[1]])),
                        0.0,
                    )
                })
                .refined
                .re;
            let reduced = multiplier_l13(v, &w);
            assert!(((direct - reduced) / reduced).abs() < 1e-3, "direct {direct} reduced {reduced}");
        }
    }

    /// At γ > −d the multiplier is also `(S_δ ∗ μ)(v)` with the cutoff kernel.
    #[test]
    fn l13_matches_cancellation_convolution() {
        let p = soft(-1.5);
        let k = KernelSpec::default();
        let w = RadialWeights::new(p, k, 14.0, 12);
        let v = [1.1, 0.3];
        let (gamma, delta) = (p.gamma, p.delta);
        let s_of = |z: f64| cancellation_kernel(|r, rp| r.powf(gamma) * cutoff(rp, delta), z, &p, &k).unwrap();
        let radial: Vec<(f64, f64, f64)> = graded_panels(1e-14, 0.5, 12.0, 0.25, 10)
            .into_iter()
            .map(|(z, wz)| (z, wz, s_of(z)))
            .collect();
        let mut conv = 0.0;
        for &(z, wz, sz) in &radial {
            for (psi, wp) in periodic_trapezoid(64) {
                let x = [v[0] - z * psi.cos(), v[1] - z * psi.sin()];
                conv += wz * wp * z * sz * (-(x[0] * x[0] + x[1] * x[1]) / 2.0).exp() / (2.0 * PI);
            }
        }
        let reduced = multiplier_l13(v, &w);
        assert!(((conv - reduced) / reduced).abs() < 1e-3, "S∗μ {conv} reduced {reduced}");
    }
}
