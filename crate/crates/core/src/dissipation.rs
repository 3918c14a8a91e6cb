//! Eigenvalue and sampling certificates for Gårding-type inequalities,
//! commutator bounds, parametrix residuals and dissipativity.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{GridFunction, PhaseGrid};
use crate::quantize::{weyl_quantize, LinearOperator};
use crate::sobolev::{c_operator, random_ensemble, SobolevParams};
use crate::symbol::Symbol;

/// Default relative tolerance of eigenvalue certificates.
pub const DEFAULT_TOL: f64 = 1e-8;

/// `{2^j : j = 0…12}`.
pub fn power_ladder() -> Vec<f64> {
    (0..=12).map(|j| 2f64.powi(j)).collect()
}

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn vel(grid: &PhaseGrid, i: usize) -> Vec<f64> {
    grid.velocity(i)[..grid.dim()].to_vec()
}

fn freq(grid: &PhaseGrid, m: usize) -> Vec<f64> {
    grid.frequency(m)[..grid.dim()].to_vec()
}

/// `B* B`.
fn gram(b: &LinearOperator) -> Result<LinearOperator> {
    b.adjoint().compose(b)
}

/// Multiplication by `l(v, 0)`; `l` must not depend on `η`.
fn v_multiplier(l: &Symbol, grid: &PhaseGrid) -> Result<LinearOperator> {
    let zero = vec![0.0; grid.dim()];
    let probe = vec![0.37; grid.dim()];
    for i in [0, grid.len() / 3, grid.len() - 1] {
        let v = vel(grid, i);
        let (x, y) = (l.eval(&v, &zero)?, l.eval(&v, &probe)?);
        if (x - y).norm() > 1e-12 * x.norm().max(1.0) {
            return Err(invalid("l", format!("{} depends on η", l.label())));
        }
    }
    let mut values = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        values.push(l.eval(&vel(grid, i), &zero)?);
    }
    LinearOperator::diagonal(grid, l.label(), &values)
}

/// Largest spectral norm among the terms of a form.
fn spectral_scale(ops: &[&LinearOperator]) -> f64 {
    ops.iter().map(|o| o.operator_norm()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GardingReport {
    pub grid: String,
    pub labels: Vec<String>,
    /// Chosen `C` (`L²` case) or `C′` (weighted case).
    pub c: Option<f64>,
    /// Chosen `C_k` (weighted case); equals `c` in the `L²` case.
    pub c_k: Option<f64>,
    pub lambda_min: f64,
    pub scale: f64,
    pub tol: f64,
    pub passed: bool,
    /// `(C, C_k, λ_min)` for every ladder point visited.
    pub trace: Vec<(f64, f64, f64)>,
}

impl GardingReport {
    pub fn csv(&self) -> String {
        let mut out = String::from("grid,c,c_k,lambda_min,threshold\n");
        for (ci, ck, l) in &self.trace {
            out += &format!("{},{ci},{ck},{l:.12e},{:.12e}\n", self.grid, -self.tol * self.scale);
        }
        out
    }
}

struct Form {
    a: LinearOperator,
    b: LinearOperator,
    l: LinearOperator,
    threshold: f64,
    scale: f64,
}

impl Form {
    fn new(a: LinearOperator, b: LinearOperator, l: LinearOperator, tol: f64) -> Self {
        let scale = 1.0 + spectral_scale(&[&a, &b, &l]);
        Self { threshold: -tol * scale, scale, a, b, l }
    }

    fn lambda(&self, c_prime: f64, c_k: f64) -> Result<f64> {
        let f = self.a.sub(&self.b.scale(c(1.0 / c_prime)))?.add(&self.l.scale(c(c_k)))?;
        f.hermitian_part().min_eigenvalue()
    }
}

/// Smallest ladder `C` with `Herm(a^w) − C^{−1}(b½^w)*(b½^w) + C·l ≥ −tol·scale`.
pub fn garding_l2(a: &Symbol, b_half: &Symbol, l: &Symbol, grid: &PhaseGrid, tol: f64) -> Result<GardingReport> {
    let form = Form::new(
        weyl_quantize(a, grid)?.hermitian_part(),
        gram(&weyl_quantize(b_half, grid)?)?,
        v_multiplier(l, grid)?,
        tol,
    );
    let mut trace = Vec::new();
    let mut chosen = None;
    let mut last = f64::NEG_INFINITY;
    for cc in power_ladder() {
        last = form.lambda(cc, cc)?;
        trace.push((cc, cc, last));
        if last >= form.threshold {
            chosen = Some(cc);
            break;
        }
    }
    Ok(GardingReport {
        grid: grid.id(),
        labels: vec![a.label().into(), b_half.label().into(), l.label().into()],
        c: chosen,
        c_k: chosen,
        lambda_min: last,
        scale: form.scale,
        tol,
        passed: chosen.is_some(),
        trace,
    })
}

/// `Herm((c^w)*c^w a^w) − C′^{−1}(b½^w c^w)*(b½^w c^w) + C_k (l½^w c^w)*(l½^w c^w) ≥ −tol·scale`
/// over the `(C′, C_k)` ladder, smallest `C′` first. At `k = n = 0` this is
/// [`garding_l2`] with `l = l½²`.
pub fn garding_weighted(
    a: &Symbol,
    b_half: &Symbol,
    l_half: &Symbol,
    p: &SobolevParams,
    grid: &PhaseGrid,
    tol: f64,
) -> Result<GardingReport> {
    if p.k == 0.0 && p.n == 0.0 {
        return garding_l2(a, b_half, &l_half.squared(), grid, tol);
    }
    let cw = c_operator(p, grid)?;
    let form = Form::new(
        gram(&cw)?.compose(&weyl_quantize(a, grid)?)?.hermitian_part(),
        gram(&weyl_quantize(b_half, grid)?.compose(&cw)?)?,
        gram(&v_multiplier(l_half, grid)?.compose(&cw)?)?,
        tol,
    );
    let ladder = power_ladder();
    let mut trace = Vec::new();
    let mut last = f64::NEG_INFINITY;
    for &cp in &ladder {
        // λ_min increases with C_k, so the largest C_k decides whether this C′ can work.
        let top = form.lambda(cp, ladder[ladder.len() - 1])?;
        trace.push((cp, ladder[ladder.len() - 1], top));
        last = top;
        if top < form.threshold {
            continue;
        }
        for &ck in &ladder {
            let lam = form.lambda(cp, ck)?;
            trace.push((cp, ck, lam));
            if lam >= form.threshold {
                return Ok(GardingReport {
                    grid: grid.id(),
                    labels: vec![a.label().into(), b_half.label().into(), l_half.label().into()],
                    c: Some(cp),
                    c_k: Some(ck),
                    lambda_min: lam,
                    scale: form.scale,
                    tol,
                    passed: true,
                    trace,
                });
            }
        }
    }
    Ok(GardingReport {
        grid: grid.id(),
        labels: vec![a.label().into(), b_half.label().into(), l_half.label().into()],
        c: None,
        c_k: None,
        lambda_min: last,
        scale: form.scale,
        tol,
        passed: false,
        trace,
    })
}

/// `a_{K,l} = a + K l`.
pub fn shifted(a: &Symbol, l: &Symbol, k: f64) -> Symbol {
    a.plus_scaled(k, l)
}

/// Extrema of `Re(a_{K,l}^w f, f) / ‖(a_{K,l}^{1/2})^w f‖²` over the given functions.
pub fn sqrt_equivalence_on(a: &Symbol, l: &Symbol, k: f64, fs: &[GridFunction]) -> Result<(f64, f64)> {
    let grid = *fs.first().ok_or_else(|| invalid("trials", "need at least one function"))?.grid();
    let ak = shifted(a, l, k);
    for i in 0..grid.len() {
        for m in 0..grid.len() {
            let x = ak.eval(&vel(&grid, i), &freq(&grid, m))?;
            if !(x.re > 0.0) {
                return Err(Error::Negative {
                    value: x.re,
                    context: format!("{} at node ({i}, {m})", ak.label()),
                });
            }
        }
    }
    let op = weyl_quantize(&ak, &grid)?;
    let root = weyl_quantize(&ak.sqrt(), &grid)?;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for f in fs {
        let den = root.apply(f)?.l2_norm().powi(2);
        if !(den > 0.0) {
            return Err(Error::Negative {
                value: den,
                context: "‖(a^{1/2})^w f‖²".into(),
            });
        }
        let r = op.form(f)?.re / den;
        lo = lo.min(r);
        hi = hi.max(r);
    }
    Ok((lo, hi))
}

/// [`sqrt_equivalence_on`] over the seeded random ensemble.
pub fn sqrt_equivalence(a: &Symbol, l: &Symbol, k: f64, grid: &PhaseGrid, trials: usize, seed: u64) -> Result<(f64, f64)> {
    sqrt_equivalence_on(a, l, k, &random_ensemble(grid, trials, seed))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualRow {
    pub k: f64,
    pub residual: f64,
    pub condition: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualTable {
    pub grid: String,
    pub rows: Vec<ResidualRow>,
    /// `−d log‖R_K‖ / d log K`; absent when some residual vanishes.
    pub kappa: Option<f64>,
}

impl ResidualTable {
    pub fn strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].residual < w[0].residual)
    }

    pub fn csv(&self) -> String {
        let mut out = String::from("grid,K,residual,condition\n");
        for r in &self.rows {
            out += &format!("{},{},{:.12e},{:.12e}\n", self.grid, r.k, r.residual, r.condition);
        }
        out
    }
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// `‖a_{K,l}^w (1/a_{K,l})^w − I‖` for each `K`.
pub fn parametrix_residual(a: &Symbol, l: &Symbol, ks: &[f64], grid: &PhaseGrid) -> Result<ResidualTable> {
    if ks.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("K_list", "must be strictly increasing"));
    }
    let id = LinearOperator::identity(grid);
    let mut rows = Vec::new();
    for &k in ks {
        let ak = shifted(a, l, k);
        let op = weyl_quantize(&ak, grid)?;
        let inv = weyl_quantize(&ak.recip(), grid)?;
        let residual = op.compose(&inv)?.sub(&id)?.operator_norm();
        rows.push(ResidualRow {
            k,
            residual,
            condition: op.condition_number(),
        });
    }
    let kappa = if rows.len() >= 2 && rows.iter().all(|r| r.residual > 0.0) {
        let x: Vec<f64> = rows.iter().map(|r| r.k.ln()).collect();
        let y: Vec<f64> = rows.iter().map(|r| r.residual.ln()).collect();
        Some(-fit_slope(&x, &y))
    } else {
        None
    };
    Ok(ResidualTable {
        grid: grid.id(),
        rows,
        kappa,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommutatorReport {
    pub grid: String,
    pub trials: usize,
    pub seed: u64,
    pub c_condition: f64,
    /// `(ε, C)`: smallest ladder `C` that works for each ladder `ε`.
    pub frontier: Vec<(f64, f64)>,
}

impl CommutatorReport {
    pub fn min_epsilon(&self) -> Option<f64> {
        self.frontier.iter().map(|p| p.0).fold(None, |m, e| Some(m.map_or(e, |x: f64| x.min(e))))
    }

    pub fn csv(&self) -> String {
        let mut out = String::from("grid,epsilon,c\n");
        for (e, cc) in &self.frontier {
            out += &format!("{},{e},{cc}\n", self.grid);
        }
        out
    }
}

/// `|([c^w,a^w]f, c^w f)| ≤ ε‖b½^w c^w f‖² + C‖l½^w c^w f‖²` on seeded random `f`,
/// with `ε ∈ {2^{−j}}` and `C ∈ {0} ∪ {2^j}`.
pub fn commutator_bound_on(
    cs: &Symbol,
    a: &Symbol,
    b_half: &Symbol,
    l_half: &Symbol,
    fs: &[GridFunction],
) -> Result<CommutatorReport> {
    let grid = *fs.first().ok_or_else(|| invalid("trials", "need at least one function"))?.grid();
    let cw = weyl_quantize(cs, &grid)?;
    let aw = weyl_quantize(a, &grid)?;
    let bw = weyl_quantize(b_half, &grid)?;
    let lw = v_multiplier(l_half, &grid)?;
    let ca = cw.compose(&aw)?;
    let ac = aw.compose(&cw)?;
    let comm = ca.sub(&ac)?;
    let mut samples = Vec::with_capacity(fs.len());
    for f in fs {
        let cf = cw.apply(f)?;
        let lhs = crate::grid::inner_product(&comm.apply(f)?, &cf)?.norm();
        // Roundoff of the difference c a f − a c f.
        let floor = 1e-12 * (ca.apply(f)?.l2_norm() + ac.apply(f)?.l2_norm()) * cf.l2_norm();
        samples.push(((lhs - floor).max(0.0), bw.apply(&cf)?.l2_norm().powi(2), lw.apply(&cf)?.l2_norm().powi(2)));
    }
    let c_ladder: Vec<f64> = std::iter::once(0.0).chain(power_ladder()).collect();
    let mut frontier = Vec::new();
    for j in 0..=12 {
        let eps = 2f64.powi(-j);
        let fits = |cc: f64| samples.iter().all(|&(lhs, b, l)| lhs <= eps * b + cc * l + 1e-12 * (lhs + eps * b + cc * l));
        if let Some(&cc) = c_ladder.iter().find(|&&cc| fits(cc)) {
            frontier.push((eps, cc));
        }
    }
    Ok(CommutatorReport {
        grid: grid.id(),
        trials: fs.len(),
        seed: 0,
        c_condition: cw.condition_number(),
        frontier,
    })
}

pub fn commutator_bound(
    cs: &Symbol,
    a: &Symbol,
    b_half: &Symbol,
    l_half: &Symbol,
    grid: &PhaseGrid,
    trials: usize,
    seed: u64,
) -> Result<CommutatorReport> {
    let mut r = commutator_bound_on(cs, a, b_half, l_half, &random_ensemble(grid, trials, seed))?;
    r.seed = seed;
    Ok(r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DissipativityReport {
    pub grid: String,
    pub c1: Option<f64>,
    pub lambda_min: f64,
    pub scale: f64,
    pub tol: f64,
    pub trace: Vec<(f64, f64)>,
    /// Condition number and relative residual of `((1 + C₁)I + b^w) f = g`.
    pub resolvent_condition: Option<f64>,
    pub resolvent_residual: Option<f64>,
}

impl DissipativityReport {
    pub fn passed(&self) -> bool {
        self.c1.is_some() && self.resolvent_residual.is_some_and(|r| r <= 1e-10)
    }

    pub fn csv(&self) -> String {
        let mut out = String::from("grid,c1,lambda_min\n");
        for (c1, l) in &self.trace {
            out += &format!("{},{c1},{l:.12e}\n", self.grid);
        }
        out
    }
}

/// `C₁` ladder: `{0} ∪ {2^j : j = 0…12}`.
pub fn c1_ladder() -> Vec<f64> {
    std::iter::once(0.0).chain(power_ladder()).collect()
}

/// Smallest `C₁` with `Herm((c^w)*c^w (C₁ + b^w)) ≥ −tol·scale`, then the resolvent
/// solve at `λ = 1` against a seeded random right side.
pub fn dissipativity_scan(b: &LinearOperator, p: &SobolevParams, ladder: &[f64], tol: f64, seed: u64) -> Result<DissipativityReport> {
    let grid = *b.grid();
    let cc = gram(&c_operator(p, &grid)?)?;
    let base = cc.compose(b)?.hermitian_part();
    let scale = 1.0 + spectral_scale(&[&base, &cc]);
    let mut trace = Vec::new();
    let mut chosen = None;
    let mut last = f64::NEG_INFINITY;
    for &c1 in ladder {
        last = base.add(&cc.scale(c(c1)))?.min_eigenvalue()?;
        trace.push((c1, last));
        if last >= -tol * scale {
            chosen = Some(c1);
            break;
        }
    }
    let (mut cond, mut res) = (None, None);
    if let Some(c1) = chosen {
        let g = random_ensemble(&grid, 1, seed).remove(0);
        let sol = b.shift(1.0 + c1).solve(&g)?;
        cond = Some(sol.condition);
        res = Some(sol.residual);
    }
    Ok(DissipativityReport {
        grid: grid.id(),
        c1: chosen,
        lambda_min: last,
        scale,
        tol,
        trace,
        resolvent_condition: cond,
        resolvent_residual: res,
    })
}
