//! Carleman representation in two velocity dimensions.
//!
//! `h = r(cosφ, sinφ)`, `α = t(−sinφ, cosφ)` with `|t| ≥ r`, so `dh dα = r dr dφ dt`
//! and `|α+h|² = t² + r²`. Post-collisional variables: `v_* = v+α−h`, `v' = v−h`,
//! `v'_* = v+α`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::params::{KernelSpec, KineticParams, QuadratureConfig};
use crate::error::{Error, Result};
use crate::quadrature::{geometric_panels, graded_panels, panel, periodic_trapezoid, uniform_panels, Rule};

/// A quadrature value paired with its refinement.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub refined: f64,
    pub relative_change: f64,
}

impl Estimate {
    pub fn new(value: f64, refined: f64) -> Self {
        let scale = refined.abs().max(value.abs());
        let relative_change = if scale == 0.0 { 0.0 } else { (value - refined).abs() / scale };
        Self {
            value,
            refined,
            relative_change,
        }
    }

    pub fn check(&self, tol: f64, context: &str) -> Result<f64> {
        if !self.refined.is_finite() || self.relative_change > tol {
            return Err(Error::NonConverged {
                change: self.relative_change,
                tol,
                context: context.to_string(),
            });
        }
        Ok(self.refined)
    }
}

/// Complex counterpart of [`Estimate`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ComplexEstimate {
    pub value: Complex64,
    pub refined: Complex64,
    pub relative_change: f64,
}

impl ComplexEstimate {
    pub fn new(value: Complex64, refined: Complex64) -> Self {
        let scale = refined.norm().max(value.norm());
        let relative_change = if scale == 0.0 { 0.0 } else { (value - refined).norm() / scale };
        Self {
            value,
            refined,
            relative_change,
        }
    }

    pub fn check(&self, tol: f64, context: &str) -> Result<Complex64> {
        if !(self.refined.re.is_finite() && self.refined.im.is_finite()) || self.relative_change > tol {
            return Err(Error::NonConverged {
                change: self.relative_change,
                tol,
                context: context.to_string(),
            });
        }
        Ok(self.refined)
    }
}

/// Radial band of `|h|` an integrand lives on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Band {
    /// `|h| ≤ δ` (integrand carries `φ_δ`).
    Inner,
    /// `|h| ≥ δ/2` (integrand carries `1 − φ_δ`).
    Outer,
    All,
}

/// Quadrature nodes for the Carleman integral.
#[derive(Debug, Clone)]
pub struct CarlemanRule {
    pub params: KineticParams,
    pub kernel: KernelSpec,
    pub quad: QuadratureConfig,
    phis: Vec<(f64, f64, f64)>,
}

impl CarlemanRule {
    pub fn new(params: KineticParams, kernel: KernelSpec, quad: QuadratureConfig) -> Result<Self> {
        params.validate()?;
        quad.validate()?;
        let phis = periodic_trapezoid(quad.n_phi)
            .into_iter()
            .map(|(phi, w)| (phi.cos(), phi.sin(), w))
            .collect();
        Ok(Self {
            params,
            kernel,
            quad,
            phis,
        })
    }

    pub fn refined(&self) -> Self {
        Self::new(self.params, self.kernel, self.quad.refined()).expect("refined config stays valid")
    }

    /// `(cosφ, sinφ, weight)` for every direction node.
    pub fn directions(&self) -> &[(f64, f64, f64)] {
        &self.phis
    }

    pub fn r_min(&self) -> f64 {
        self.quad.r_min_factor * self.params.delta
    }

    /// Radial nodes for `|h|` on the requested band.
    pub fn radial(&self, band: Band) -> Rule {
        let d = self.params.delta;
        let n = self.quad.n_r;
        let mut rule = Vec::new();
        if band != Band::Outer {
            rule.extend(geometric_panels(self.r_min(), 0.5 * d, n));
        }
        rule.extend(uniform_panels(0.5 * d, d, 0.25 * d, n));
        if band != Band::Inner {
            rule.extend(uniform_panels(d, self.quad.r_max, 1.0, n));
        }
        rule
    }

    /// Radial nodes `r ∈ (0, |t|]` for fixed `t`; geometric toward zero.
    pub fn radial_below(&self, t_abs: f64) -> Rule {
        let lo = self.r_min().min(0.5 * t_abs);
        graded_panels(lo, t_abs.min(1.0), t_abs, 1.0, self.quad.n_r)
    }

    /// Transverse nodes `t` with `|t| ≥ r`, restricted to a window of half-width
    /// `t_half` around `center` (the envelope location along `E_{0,h}`).
    pub fn transverse(&self, r: f64, center: f64) -> Rule {
        let half = self.quad.t_half;
        // A grazing cutoff θ ≥ θ_min is |t| ≤ r cot(θ_min/2); keep the jump on a panel edge.
        let cap = if self.kernel.theta_min > 0.0 {
            r / (0.5 * self.kernel.theta_min).tan()
        } else {
            f64::INFINITY
        };
        let (lo, hi) = ((center - half).max(-cap), (center + half).min(cap));
        let n = self.quad.n_t;
        let mut rule = Vec::new();
        // t ≥ r
        let a = lo.max(r);
        if a < hi {
            rule.extend(self.segment(a, hi, a == r, n));
        }
        // t ≤ −r, mirrored
        let b = hi.min(-r);
        if lo < b {
            let mirrored = self.segment(-b, -lo, b == -r, n);
            rule.extend(mirrored.into_iter().map(|(x, w)| (-x, w)));
        }
        rule
    }

    fn segment(&self, a: f64, b: f64, touches_edge: bool, n: usize) -> Rule {
        if touches_edge && a < 1.0 {
            let mut out = Vec::new();
            let mut x = a;
            let knee = b.min(1.0);
            while x < knee {
                let y = (4.0 * x).min(knee);
                out.extend(panel(x, y, n));
                x = y;
            }
            out.extend(uniform_panels(knee, b, 1.0, n));
            out
        } else {
            uniform_panels(a, b, 1.0, n)
        }
    }

    /// Kernel times the radial Jacobian: `b̃ |α+h|^{γ+1+2s} |h|^{−2−2s} · r`.
    pub fn weight(&self, r: f64, t: f64) -> f64 {
        let p = &self.params;
        let bt = self.kernel.b_tilde_rt(r, t, p.nu());
        if bt == 0.0 {
            return 0.0;
        }
        bt * (t * t + r * r).powf(0.5 * (p.gamma + 1.0 + 2.0 * p.s)) * r.powf(-1.0 - 2.0 * p.s)
    }

    /// Visits every node as `(direction index, e_φ, r, t, full weight)` for integrands
    /// whose envelope along `E_{0,h}` sits near `t = center·e_φ^⊥`.
    pub fn for_each_node(&self, band: Band, center: [f64; 2], mut f: impl FnMut(usize, [f64; 2], f64, f64, f64)) {
        let radial = self.radial(band);
        for (k, &(c, s, wphi)) in self.phis.iter().enumerate() {
            let tc = -center[0] * s + center[1] * c;
            for &(r, wr) in &radial {
                for (t, wt) in self.transverse(r, tc) {
                    let w = self.weight(r, t);
                    if w != 0.0 {
                        f(k, [c, s], r, t, wphi * wr * wt * w);
                    }
                }
            }
        }
    }

    /// `∫∫ W F(α, h) dα dh` with the integrand's envelope centered at `α ≈ center`.
    pub fn integrate(&self, band: Band, center: [f64; 2], f: impl Fn([f64; 2], [f64; 2]) -> Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        self.for_each_node(band, center, |_, e, r, t, w| {
            let h = [r * e[0], r * e[1]];
            let alpha = [-t * e[1], t * e[0]];
            acc += f(alpha, h) * w;
        });
        acc
    }

    /// [`CarlemanRule::integrate`] paired with the doubled-node value.
    pub fn integrate_checked(
        &self,
        band: Band,
        center: [f64; 2],
        f: impl Fn([f64; 2], [f64; 2]) -> Complex64,
    ) -> ComplexEstimate {
        let coarse = self.integrate(band, center, &f);
        let fine = self.refined().integrate(band, center, &f);
        ComplexEstimate::new(coarse, fine)
    }
}

/// `∫_{R²}∫_{S¹} |v−v_*|^γ b(cosθ) F(v_*, v', v'_*) dσ dv_*` by direct quadrature.
/// `u = v − v_* = ρ(cosψ, sinψ)`, `σ` at signed angle `θ` from `û`; the `±θ`
/// pair is summed together so first-order grazing terms cancel.
pub fn sigma_integrate(
    v: [f64; 2],
    params: &KineticParams,
    kernel: &KernelSpec,
    n: usize,
    rho_max: f64,
    f: impl Fn([f64; 2], [f64; 2], [f64; 2]) -> f64,
) -> f64 {
    let nu = params.nu();
    let rho_rule = graded_panels(1e-6, 1.0, rho_max, 0.5, n);
    let psi_rule = periodic_trapezoid(4 * n);
    let lo = kernel.theta_min.max(1e-7);
    let theta_rule = if kernel.theta_min > 0.0 {
        uniform_panels(lo, std::f64::consts::FRAC_PI_2, 0.1, n)
    } else {
        graded_panels(lo, 0.05, std::f64::consts::FRAC_PI_2, 0.1, n)
    };
    let mut acc = 0.0;
    for &(rho, wr) in &rho_rule {
        let radial = rho.powf(params.gamma) * rho * wr;
        for &(psi, wp) in &psi_rule {
            let (c, s) = (psi.cos(), psi.sin());
            let vs = [v[0] - rho * c, v[1] - rho * s];
            let mid = [0.5 * (v[0] + vs[0]), 0.5 * (v[1] + vs[1])];
            for &(theta, wt) in &theta_rule {
                let b = kernel.b(theta, nu);
                if b == 0.0 {
                    continue;
                }
                let mut pair = 0.0;
                for sign in [1.0, -1.0] {
                    let (ct, st) = (theta.cos(), sign * theta.sin());
                    let sigma = [c * ct - s * st, s * ct + c * st];
                    let vp = [mid[0] + 0.5 * rho * sigma[0], mid[1] + 0.5 * rho * sigma[1]];
                    let vps = [mid[0] - 0.5 * rho * sigma[0], mid[1] - 0.5 * rho * sigma[1]];
                    pair += f(vs, vp, vps);
                }
                acc += radial * wp * wt * b * pair;
            }
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use super::super::params::AngularKernel;

    fn rule(gamma: f64, kernel: KernelSpec) -> CarlemanRule {
        CarlemanRule::new(KineticParams::new(gamma, 0.5, 1.0).unwrap(), kernel, QuadratureConfig::default()).unwrap()
    }

    #[test]
    fn zero_integrand_gives_zero() {
        let r = rule(-2.0, KernelSpec::default());
        assert_eq!(r.integrate(Band::All, [0.0, 0.0], |_, _| Complex64::new(0.0, 0.0)), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn outer_integrand_is_refinement_stable() {
        let r = rule(-2.0, KernelSpec::default());
        let est = r.integrate_checked(Band::Outer, [0.0, 0.0], |a, h| {
            let hn = (h[0] * h[0] + h[1] * h[1]).sqrt();
            let on = if hn >= 1.0 { 1.0 } else { 0.0 };
            Complex64::new(on * (-(a[0] * a[0] + a[1] * a[1]) / 2.0).exp(), 0.0)
        });
        assert!(est.refined.re.is_finite() && est.refined.re > 0.0);
        assert!(est.relative_change < 1e-2, "{est:?}");
    }

    #[test]
    fn carleman_matches_sigma_representation_with_angular_cutoff() {
        let params = KineticParams::new(-1.5, 0.5, 1.0).unwrap();
        for angular in [AngularKernel::Unit, AngularKernel::PowerLaw] {
            let kernel = KernelSpec::with_cutoff(angular, 0.3);
            let v = [0.3, -0.2];
            let test = |vs: [f64; 2], vp: [f64; 2], vps: [f64; 2]| {
                (-(vs[0] * vs[0] + vs[1] * vs[1]) / 2.0 - (vps[0] * vps[0] + vps[1] * vps[1]) / 4.0).exp()
                    * (1.0 + 0.5 * vp[0] - 0.25 * vp[1] * vp[1]).tanh()
            };
            let sigma = sigma_integrate(v, &params, &kernel, 12, 14.0, test);
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
            assert!(((val - sigma) / sigma).abs() < 2e-2, "{angular:?}: carleman {val} sigma {sigma}");
        }
    }
}
