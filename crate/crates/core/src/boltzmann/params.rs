use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Physical parameters of the linearized operator (velocity dimension 2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KineticParams {
    pub gamma: f64,
    pub s: f64,
    /// Cutoff scale of the singular/regular split.
    pub delta: f64,
}

impl KineticParams {
    pub const DIM: usize = 2;

    /// Validates `s∈(0,1)`, `γ ≥ −d`, `δ∈(0,1]`.
    pub fn new(gamma: f64, s: f64, delta: f64) -> Result<Self> {
        let p = Self { gamma, s, delta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s > 0.0 && self.s < 1.0) {
            return Err(invalid("s", format!("s∈(0,1) required, got {}", self.s)));
        }
        if !(self.gamma.is_finite() && self.gamma >= -(Self::DIM as f64)) {
            return Err(invalid("gamma", format!("γ ≥ −d = −2 required, got {}", self.gamma)));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(invalid("delta", format!("δ∈(0,1] required, got {}", self.delta)));
        }
        Ok(())
    }

    pub fn soft(&self) -> bool {
        self.gamma + 2.0 * self.s <= 0.0
    }

    /// Angular exponent `ν = d − 1 + 2s`.
    pub fn nu(&self) -> f64 {
        Self::DIM as f64 - 1.0 + 2.0 * self.s
    }

    /// `γ + 2s`, the order of the `l` weight.
    pub fn order(&self) -> f64 {
        self.gamma + 2.0 * self.s
    }
}

impl Default for KineticParams {
    fn default() -> Self {
        Self {
            gamma: -2.0,
            s: 0.5,
            delta: 1.0,
        }
    }
}

/// Angular factor of the collision kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AngularKernel {
    /// `b̃ ≡ 1` in the Carleman form; on the sphere this is `b(cosθ) = ½ sin^{−ν}(θ/2)`.
    Unit,
    /// `b(cosθ) = θ^{−ν}` on the sphere; `b̃ = 2 θ^{−ν} sin^{ν}(θ/2)`.
    PowerLaw,
}

/// Collision kernel: angular factor plus an optional grazing cutoff `θ ≥ theta_min`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KernelSpec {
    pub angular: AngularKernel,
    #[serde(default)]
    pub theta_min: f64,
}

impl Default for KernelSpec {
    fn default() -> Self {
        Self {
            angular: AngularKernel::Unit,
            theta_min: 0.0,
        }
    }
}

impl KernelSpec {
    pub fn with_cutoff(angular: AngularKernel, theta_min: f64) -> Self {
        Self { angular, theta_min }
    }

    /// Two-sided bound `B₀` with `b̃ ∈ [1/B₀, B₀]` away from the cutoff.
    pub fn bound(&self) -> f64 {
        match self.angular {
            AngularKernel::Unit => 1.0,
            // 2 θ^{−ν} sin^ν(θ/2) ranges over [2 (sin(π/4)/(π/2))^ν, 2^{1−ν}].
            AngularKernel::PowerLaw => 2.0,
        }
    }

    /// `b(cosθ)` on `(0, π/2]`, zero elsewhere and below the cutoff.
    pub fn b(&self, theta: f64, nu: f64) -> f64 {
        if theta <= self.theta_min || theta <= 0.0 || theta > std::f64::consts::FRAC_PI_2 {
            return 0.0;
        }
        match self.angular {
            AngularKernel::Unit => 0.5 * (0.5 * theta).sin().powf(-nu),
            AngularKernel::PowerLaw => theta.powf(-nu),
        }
    }

    /// `b̃` as a function of `θ`, where `sin(θ/2) = |h|/|α+h|`.
    pub fn b_tilde(&self, theta: f64, nu: f64) -> f64 {
        if theta <= self.theta_min {
            return 0.0;
        }
        match self.angular {
            AngularKernel::Unit => 1.0,
            AngularKernel::PowerLaw => 2.0 * theta.powf(-nu) * (0.5 * theta).sin().powf(nu),
        }
    }

    /// `b̃` from Carleman coordinates `r = |h|`, `t = ±|α|`.
    pub fn b_tilde_rt(&self, r: f64, t: f64, nu: f64) -> f64 {
        if self.angular == AngularKernel::Unit && self.theta_min == 0.0 {
            return 1.0;
        }
        let theta = 2.0 * (r / (r * r + t * t).sqrt()).asin();
        self.b_tilde(theta, nu)
    }
}

/// Node counts and truncations of the Carleman quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureConfig {
    /// Gauss–Legendre nodes per radial panel in `|h|`.
    pub n_r: usize,
    /// Trapezoid nodes in the direction angle of `h`.
    pub n_phi: usize,
    /// Gauss–Legendre nodes per unit panel along `E_{0,h}`.
    pub n_t: usize,
    /// `r_min = r_min_factor · δ`.
    pub r_min_factor: f64,
    pub r_max: f64,
    /// Half-width of the transverse window around the Gaussian envelope.
    pub t_half: f64,
    /// Relative refinement change accepted as converged.
    pub tol: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            n_r: 8,
            n_phi: 48,
            n_t: 6,
            r_min_factor: 1e-4,
            r_max: 12.0,
            t_half: 8.0,
            tol: 1e-2,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("n_r", self.n_r), ("n_phi", self.n_phi), ("n_t", self.n_t)] {
            if v < 4 {
                return Err(invalid(name, "node counts must be ≥ 4"));
            }
        }
        if !(self.r_min_factor > 0.0 && self.r_min_factor < 1.0) {
            return Err(invalid("r_min_factor", "must lie in (0,1)"));
        }
        if !(self.r_max > 1.0 && self.t_half > 1.0) {
            return Err(invalid("r_max", "truncations must exceed 1"));
        }
        if !(self.tol > 0.0) {
            return Err(invalid("tol", "must be positive"));
        }
        Ok(())
    }

    /// The same rule with every node count doubled.
    pub fn refined(&self) -> Self {
        Self {
            n_r: 2 * self.n_r,
            n_phi: 2 * self.n_phi,
            n_t: 2 * self.n_t,
            ..*self
        }
    }

    /// Node counts raised so that phases `e^{2πi x·η}` with `|η| ≤ eta_max` stay
    /// resolved over `|x| ≤ extent` on panels of width at most `width`.
    pub fn resolved_for(&self, eta_max: f64, extent: f64, width: f64) -> Self {
        let k = 2.0 * std::f64::consts::PI * eta_max;
        let n_phi = ((1.25 * k * extent).ceil() as usize + 16).next_multiple_of(4);
        let n_line = (0.75 * k * width).ceil() as usize + 4;
        Self {
            n_phi: self.n_phi.max(n_phi),
            n_t: self.n_t.max(n_line),
            n_r: self.n_r.max(n_line),
            ..*self
        }
    }

    /// Radial truncation enlarged so Gaussian envelopes centered at distance `v_abs` are covered.
    pub fn reaching(&self, v_abs: f64) -> Self {
        Self {
            r_max: self.r_max.max(v_abs + 8.0),
            ..*self
        }
    }
}

/// Everything needed to evaluate the collision symbols.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CollisionModel {
    #[serde(default)]
    pub params: KineticParams,
    #[serde(default)]
    pub kernel: KernelSpec,
    #[serde(default)]
    pub quad: QuadratureConfig,
}

impl CollisionModel {
    pub fn new(params: KineticParams, kernel: KernelSpec, quad: QuadratureConfig) -> Result<Self> {
        params.validate()?;
        quad.validate()?;
        if !(kernel.theta_min >= 0.0 && kernel.theta_min < std::f64::consts::FRAC_PI_2) {
            return Err(invalid("theta_min", "must lie in [0, π/2)"));
        }
        Ok(Self { params, kernel, quad })
    }
}

/// Smooth radial cutoff profile: `1` on `t ≤ 1/4`, `0` on `t ≥ 1`.
///
/// With `u = (4t−1)/3` and `ψ(x) = exp(1 − 1/x)` for `x>0`, the profile is
/// `ψ(1−u²) / (ψ(1−u²) + ψ(u²))`, a `C^∞` blend of the mollifier ramp in `u²`.
pub fn bump(t: f64) -> f64 {
    if t <= 0.25 {
        return 1.0;
    }
    if t >= 1.0 {
        return 0.0;
    }
    let u2 = ((4.0 * t - 1.0) / 3.0).powi(2);
    let psi = |x: f64| if x <= 0.0 { 0.0 } else { (1.0 - 1.0 / x).exp() };
    let (a, b) = (psi(1.0 - u2), psi(u2));
    a / (a + b)
}

/// `φ_δ(h) = φ(|h|²/δ²)`.
pub fn cutoff(r: f64, delta: f64) -> f64 {
    bump(r * r / (delta * delta))
}
