//! Time stepping and resolvent checks for the linearized operator.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::boltzmann::assemble::{assemble_bw_from, assemble_k_from, provenance_tag, tables};
use crate::boltzmann::CollisionModel;
use crate::error::{invalid, Error, Result};
use crate::grid::{GridFunction, PhaseGrid};
use crate::quantize::{LinearOperator, Provenance};
use crate::sobolev::{c_operator, hkn_norm, random_ensemble, SobolevParams};

/// Condition numbers above this make a step solve unreliable.
const STEP_CONDITION_LIMIT: f64 = 1e12;

/// `L = −b^w + K`.
pub fn assemble_l(grid: &PhaseGrid, model: &CollisionModel) -> Result<LinearOperator> {
    let t = tables(grid, model)?;
    let l = assemble_k_from(&t)?.sub(&assemble_bw_from(&t)?)?;
    Ok(l.with_provenance(Provenance::Composite(format!("L; {}", provenance_tag(&t)))))
}

/// `c^w A (c^w)^{−1}`, whose spectral norm is the norm of `A` on `H(c)`.
pub fn conjugated(a: &LinearOperator, p: &SobolevParams) -> Result<LinearOperator> {
    let c = c_operator(p, a.grid())?;
    c.compose(a)?.compose(&c.inverse()?)
}

/// `‖A‖_{H(c)→H(c)}`.
pub fn hc_operator_norm(a: &LinearOperator, p: &SobolevParams) -> Result<f64> {
    Ok(conjugated(a, p)?.operator_norm())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    ImplicitEuler,
    CrankNicolson,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::ImplicitEuler => "implicit_euler",
            Scheme::CrankNicolson => "crank_nicolson",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionLog {
    pub scheme: Scheme,
    pub dt: f64,
    pub condition: f64,
    pub times: Vec<f64>,
    pub hc_norms: Vec<f64>,
    pub hkn_norms: Vec<f64>,
    /// Step residual relative to `max(1, ‖f_old‖)`; zero for the initial state.
    pub residuals: Vec<f64>,
    #[serde(skip)]
    pub final_state: Option<GridFunction>,
}

impl EvolutionLog {
    /// Largest `‖f_{j+1}‖ / ‖f_j‖` in `H(c)`.
    pub fn max_step_growth(&self) -> f64 {
        self.hc_norms
            .windows(2)
            .map(|w| if w[0] == 0.0 { if w[1] == 0.0 { 1.0 } else { f64::INFINITY } } else { w[1] / w[0] })
            .fold(0.0, f64::max)
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().cloned().fold(0.0, f64::max)
    }

    pub fn csv(&self) -> String {
        let mut out = String::from("t,hc_norm,hkn_norm,residual\n");
        for j in 0..self.times.len() {
            out += &format!(
                "{:.12e},{:.12e},{:.12e},{:.3e}\n",
                self.times[j], self.hc_norms[j], self.hkn_norms[j], self.residuals[j]
            );
        }
        out
    }
}

/// Implicit evolution `f' = A f` from `f0` to `t_final` with step `dt`, logging
/// `H(c)` and `H^k_n` norms.
pub fn evolve(
    a: &LinearOperator,
    f0: &GridFunction,
    t_final: f64,
    dt: f64,
    scheme: Scheme,
    p: &SobolevParams,
) -> Result<EvolutionLog> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid("dt", "must be positive"));
    }
    if !(t_final >= 0.0 && t_final.is_finite()) {
        return Err(invalid("t_final", "must be nonnegative"));
    }
    a.grid().check_same(f0.grid())?;
    let steps = (t_final / dt).round() as usize;
    let theta = match scheme {
        Scheme::ImplicitEuler => 1.0,
        Scheme::CrankNicolson => 0.5,
    };
    let ident = LinearOperator::identity(a.grid());
    let lhs = ident.sub(&a.scale(Complex64::new(theta * dt, 0.0)))?;
    let rhs = ident.add(&a.scale(Complex64::new((1.0 - theta) * dt, 0.0)))?;
    let condition = lhs.condition_number();
    if !(condition < STEP_CONDITION_LIMIT) {
        return Err(Error::Singular { condition });
    }
    let lu = lhs.matrix().clone().lu();
    let cw = c_operator(p, a.grid())?;
    let hc = |f: &GridFunction| -> Result<f64> { Ok(cw.apply(f)?.l2_norm()) };
    let mut f = f0.clone();
    let mut log = EvolutionLog {
        scheme,
        dt,
        condition,
        times: vec![0.0],
        hc_norms: vec![hc(&f)?],
        hkn_norms: vec![hkn_norm(&f, p)],
        residuals: vec![0.0],
        final_state: None,
    };
    for j in 1..=steps {
        let g = rhs.apply(&f)?;
        let x = lu
            .solve(&DVector::from_column_slice(g.values()))
            .ok_or(Error::Singular { condition })?;
        let next = GridFunction::new(*a.grid(), x.as_slice().to_vec())?;
        let r = lhs.apply(&next)?.sub(&g)?.l2_norm() / f.l2_norm().max(1.0);
        log.times.push(j as f64 * dt);
        log.hc_norms.push(hc(&next)?);
        log.hkn_norms.push(hkn_norm(&next, p));
        log.residuals.push(r);
        f = next;
    }
    log.final_state = Some(f);
    Ok(log)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolventReport {
    pub lambda: f64,
    pub trials: usize,
    pub seed: u64,
    pub condition: f64,
    pub max_residual: f64,
    pub passed: bool,
}

/// Solves `(λI − A) f = g` for seeded random `g`; passes when every relative residual is ≤ 1e−9.
pub fn resolvent_check(a: &LinearOperator, lambda: f64, trials: usize, seed: u64) -> Result<ResolventReport> {
    if !(lambda > 0.0) {
        return Err(invalid("lambda", "must be positive"));
    }
    let op = a.scale(Complex64::new(-1.0, 0.0)).shift(lambda);
    let mut max_residual = 0.0f64;
    let mut condition = op.condition_number();
    for g in random_ensemble(a.grid(), trials.max(1), seed) {
        let sol = op.solve(&g)?;
        condition = sol.condition;
        max_residual = max_residual.max(sol.residual);
    }
    Ok(ResolventReport {
        lambda,
        trials: trials.max(1),
        seed,
        condition,
        max_residual,
        passed: max_residual <= 1e-9,
    })
}

/// Observed order of a scheme from runs at `dt`, `dt/2` against a `dt/8` reference.
pub fn observed_order(a: &LinearOperator, f0: &GridFunction, t_final: f64, dt: f64, scheme: Scheme) -> Result<f64> {
    let p = SobolevParams::new(0.0, 0.0)?;
    let run = |h: f64| -> Result<GridFunction> { Ok(evolve(a, f0, t_final, h, scheme, &p)?.final_state.expect("set by evolve")) };
    let reference = run(dt / 8.0)?;
    let e1 = run(dt)?.sub(&reference)?.l2_norm();
    let e2 = run(dt / 2.0)?.sub(&reference)?.l2_norm();
    Ok((e1 / e2).log2())
}
