//! Phase-space symbols, admissible weights, and the `J^t` symbol map.

use std::fmt;
use std::io::{Read, Write};
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{bracket, read_envelope, write_envelope, PhaseGrid};

pub type Evaluator = Arc<dyn Fn(&[f64], &[f64]) -> Complex64 + Send + Sync>;
pub type WeightEvaluator = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

/// `|η ∧ v|²` in Gram form, `|η|²|v|² − (η·v)²`, clamped at zero.
pub fn wedge_sq(v: &[f64], eta: &[f64]) -> f64 {
    let vv: f64 = v.iter().map(|x| x * x).sum();
    let ee: f64 = eta.iter().map(|x| x * x).sum();
    let ve: f64 = v.iter().zip(eta).map(|(a, b)| a * b).sum();
    (ee * vv - ve * ve).max(0.0)
}

/// `ã(v,η) = ⟨v⟩^γ (1 + |η|² + |η∧v|² + |v|²)^s`.
pub fn a_tilde(v: &[f64], eta: &[f64], gamma: f64, s: f64) -> f64 {
    let vv: f64 = v.iter().map(|x| x * x).sum();
    let ee: f64 = eta.iter().map(|x| x * x).sum();
    (1.0 + vv).powf(0.5 * gamma) * (1.0 + ee + wedge_sq(v, eta) + vv).powf(s)
}

/// Positive weight on phase space.
#[derive(Clone)]
pub struct WeightFunction {
    label: String,
    eval: WeightEvaluator,
}

impl fmt::Debug for WeightFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WeightFunction").field("label", &self.label).finish()
    }
}

impl WeightFunction {
    pub fn new(label: impl Into<String>, f: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            label: label.into(),
            eval: Arc::new(f),
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(format!("{c}"), move |_, _| c)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn eval(&self, v: &[f64], eta: &[f64]) -> f64 {
        (self.eval)(v, eta)
    }

    /// `self + k·other`, the `m_{K,l}` construction.
    pub fn plus_scaled(&self, k: f64, other: &WeightFunction) -> Self {
        let (a, b) = (self.eval.clone(), other.eval.clone());
        Self {
            label: format!("{}+{k}*{}", self.label, other.label),
            eval: Arc::new(move |v, e| a(v, e) + k * b(v, e)),
        }
    }

    pub fn product(&self, other: &WeightFunction) -> Self {
        let (a, b) = (self.eval.clone(), other.eval.clone());
        Self {
            label: format!("({})*({})", self.label, other.label),
            eval: Arc::new(move |v, e| a(v, e) * b(v, e)),
        }
    }

    pub fn powf(&self, p: f64) -> Self {
        let a = self.eval.clone();
        Self {
            label: format!("({})^{p}", self.label),
            eval: Arc::new(move |v, e| a(v, e).powf(p)),
        }
    }

    /// The weight viewed as a real symbol.
    pub fn to_symbol(&self) -> Symbol {
        let a = self.eval.clone();
        Symbol::new(self.label.clone(), move |v, e| Complex64::new(a(v, e), 0.0))
            .with_weight(self.clone())
    }
}

/// Values of a symbol on the quantization lattice: half-step velocity nodes
/// `x_p = -R + p Δv/2` (`2N` per axis) times the frequency nodes (`N` per axis).
#[derive(Debug, Clone)]
pub struct PhaseSamples {
    grid: PhaseGrid,
    values: Vec<Complex64>,
}

impl PhaseSamples {
    fn v_count(grid: &PhaseGrid) -> usize {
        (2 * grid.n()).pow(grid.dim() as u32)
    }

    /// Samples a symbol on the lattice.
    pub fn sample(a: &Symbol, grid: &PhaseGrid) -> Result<Self> {
        let d = grid.dim();
        let nv = Self::v_count(grid);
        let ne = grid.len();
        let mut values = Vec::with_capacity(nv * ne);
        for p in 0..nv {
            let x = lattice_velocity(grid, p);
            for q in 0..ne {
                let eta = grid.frequency(q);
                values.push(a.eval(&x[..d], &eta[..d])?);
            }
        }
        Ok(Self { grid: *grid, values })
    }

    pub fn grid(&self) -> &PhaseGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    fn lookup(&self, v: &[f64], eta: &[f64]) -> Option<Complex64> {
        let g = &self.grid;
        let d = g.dim();
        let two_n = 2 * g.n();
        let hv = 0.5 * g.dv();
        let mut p = 0usize;
        let mut q = 0usize;
        for a in 0..d {
            let fp = (v[a] + g.half_width()) / hv;
            let ip = fp.round();
            if (fp - ip).abs() > 1e-8 || ip < 0.0 || ip >= two_n as f64 {
                return None;
            }
            p = p * two_n + ip as usize;
            let fq = eta[a] / g.deta() + (g.n() / 2) as f64;
            let iq = fq.round();
            if (fq - iq).abs() > 1e-8 || iq < 0.0 || iq >= g.n() as f64 {
                return None;
            }
            q = q * g.n() + iq as usize;
        }
        Some(self.values[p * g.len() + q])
    }

    pub(crate) fn at(&self, p: usize, q: usize) -> Complex64 {
        self.values[p * self.grid.len() + q]
    }
}

/// Velocity coordinates of half-step lattice node `p`.
pub(crate) fn lattice_velocity(grid: &PhaseGrid, p: usize) -> [f64; 2] {
    let two_n = 2 * grid.n();
    let hv = 0.5 * grid.dv();
    let mut out = [0.0; 2];
    if grid.dim() == 1 {
        out[0] = -grid.half_width() + p as f64 * hv;
    } else {
        out[0] = -grid.half_width() + (p / two_n) as f64 * hv;
        out[1] = -grid.half_width() + (p % two_n) as f64 * hv;
    }
    out
}

#[derive(Clone)]
enum Kind {
    Closure(Evaluator),
    Sampled(Arc<PhaseSamples>),
}

/// A function on phase space `(v, η)` with a label and an optional claimed weight class.
#[derive(Clone)]
pub struct Symbol {
    label: String,
    kind: Kind,
    claimed_weight: Option<WeightFunction>,
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            Kind::Closure(_) => "closure",
            Kind::Sampled(_) => "sampled",
        };
        f.debug_struct("Symbol")
            .field("label", &self.label)
            .field("kind", &kind)
            .finish()
    }
}

impl Symbol {
    pub fn new(label: impl Into<String>, f: impl Fn(&[f64], &[f64]) -> Complex64 + Send + Sync + 'static) -> Self {
        Self {
            label: label.into(),
            kind: Kind::Closure(Arc::new(f)),
            claimed_weight: None,
        }
    }

    pub fn real(label: impl Into<String>, f: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(label, move |v, e| Complex64::new(f(v, e), 0.0))
    }

    pub fn constant(c: f64) -> Self {
        Self::real(format!("{c}"), move |_, _| c)
    }

    /// A velocity-only symbol.
    pub fn of_v(label: impl Into<String>, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self::real(label, move |v, _| f(v))
    }

    /// A frequency-only symbol.
    pub fn of_eta(label: impl Into<String>, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self::real(label, move |_, e| f(e))
    }

    pub fn from_samples(label: impl Into<String>, samples: PhaseSamples) -> Self {
        Self {
            label: label.into(),
            kind: Kind::Sampled(Arc::new(samples)),
            claimed_weight: None,
        }
    }

    pub fn with_weight(mut self, w: WeightFunction) -> Self {
        self.claimed_weight = Some(w);
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn claimed_weight(&self) -> Option<&WeightFunction> {
        self.claimed_weight.as_ref()
    }

    pub fn samples(&self) -> Option<&PhaseSamples> {
        match &self.kind {
            Kind::Sampled(s) => Some(s),
            Kind::Closure(_) => None,
        }
    }

    pub fn eval(&self, v: &[f64], eta: &[f64]) -> Result<Complex64> {
        let z = match &self.kind {
            Kind::Closure(f) => f(v, eta),
            Kind::Sampled(s) => s.lookup(v, eta).ok_or_else(|| Error::OffLattice {
                label: self.label.clone(),
                at: format!("v={v:?}, eta={eta:?}"),
            })?,
        };
        if !(z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::NonFinite {
                label: self.label.clone(),
                at: format!("v={v:?}, eta={eta:?}"),
            });
        }
        Ok(z)
    }

    fn closure(&self) -> Evaluator {
        match &self.kind {
            Kind::Closure(f) => f.clone(),
            Kind::Sampled(s) => {
                let s = s.clone();
                Arc::new(move |v, e| s.lookup(v, e).unwrap_or(Complex64::new(f64::NAN, f64::NAN)))
            }
        }
    }

    /// Pointwise map.
    pub fn map(&self, label: impl Into<String>, f: impl Fn(Complex64) -> Complex64 + Send + Sync + 'static) -> Self {
        let a = self.closure();
        Self::new(label, move |v, e| f(a(v, e)))
    }

    pub fn zip(
        &self,
        other: &Symbol,
        label: impl Into<String>,
        f: impl Fn(Complex64, Complex64) -> Complex64 + Send + Sync + 'static,
    ) -> Self {
        let (a, b) = (self.closure(), other.closure());
        Self::new(label, move |v, e| f(a(v, e), b(v, e)))
    }

    pub fn add(&self, other: &Symbol) -> Self {
        self.zip(other, format!("{}+{}", self.label, other.label), |a, b| a + b)
    }

    pub fn scale(&self, c: Complex64) -> Self {
        self.map(format!("{c}*{}", self.label), move |a| a * c)
    }

    pub fn mul(&self, other: &Symbol) -> Self {
        self.zip(other, format!("({})*({})", self.label, other.label), |a, b| a * b)
    }

    /// `self + k·other`, the `a_{K,l}` construction.
    pub fn plus_scaled(&self, k: f64, other: &Symbol) -> Self {
        self.zip(other, format!("{}+{k}*{}", self.label, other.label), move |a, b| a + b * k)
    }

    pub fn sqrt(&self) -> Self {
        self.map(format!("sqrt({})", self.label), |a| a.sqrt())
    }

    pub fn squared(&self) -> Self {
        self.map(format!("({})^2", self.label), |a| a * a)
    }

    pub fn recip(&self) -> Self {
        self.map(format!("1/({})", self.label), |a| a.inv())
    }

    /// Writes the symbol sampled on `(v_i, η_m)` grid nodes in the `PDCF` envelope
    /// with the dimension field doubled.
    pub fn write_samples(&self, grid: &PhaseGrid, mut w: impl Write) -> Result<()> {
        let d = grid.dim();
        let mut values = Vec::with_capacity(grid.len() * grid.len());
        for i in 0..grid.len() {
            let v = grid.velocity(i);
            for m in 0..grid.len() {
                values.push(self.eval(&v[..d], &grid.frequency(m)[..d])?);
            }
        }
        write_envelope(&mut w, 2 * d as u32, grid, &values)
    }

    /// Reads a symbol dump written by [`Symbol::write_samples`]. The result is
    /// evaluable on the grid nodes only.
    pub fn read_samples(label: impl Into<String>, mut r: impl Read) -> Result<(PhaseGrid, Symbol)> {
        let (dim_field, grid, values) = read_envelope(&mut r, true)?;
        if dim_field as usize != 2 * grid.dim() {
            return Err(Error::Format(format!(
                "sampled-symbol dump needs an even dimension field, got {dim_field}"
            )));
        }
        let g = grid;
        let table = Arc::new(values);
        let sym = Symbol::new(label, move |v, e| {
            let mut i = 0usize;
            let mut m = 0usize;
            for a in 0..g.dim() {
                let fi = ((v[a] + g.half_width()) / g.dv()).round();
                let fm = (e[a] / g.deta() + (g.n() / 2) as f64).round();
                if fi < 0.0 || fi >= g.n() as f64 || fm < 0.0 || fm >= g.n() as f64 {
                    return Complex64::new(f64::NAN, f64::NAN);
                }
                i = i * g.n() + fi as usize;
                m = m * g.n() + fm as usize;
            }
            table[i * g.len() + m]
        });
        Ok((grid, sym))
    }
}

/// Built-in symbols.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Builtin {
    /// `c(v,η) = ⟨v⟩^n ⟨η⟩^k`.
    C { k: f64, n: f64 },
    /// `l(v) = ⟨v⟩^{γ+2s}`.
    L { gamma: f64, s: f64 },
    /// `ã(v,η) = ⟨v⟩^γ (1 + |η|² + |η∧v|² + |v|²)^s`.
    ATilde { gamma: f64, s: f64 },
    /// `⟨v⟩^p`.
    BracketVPow { p: f64 },
    /// `⟨η⟩^p`.
    BracketEtaPow { p: f64 },
}

impl Builtin {
    pub const NAMES: [&'static str; 5] = ["c", "l", "a_tilde", "bracket_v_pow", "bracket_eta_pow"];

    /// Resolves a name with the parameter set it needs.
    pub fn from_name(name: &str, gamma: f64, s: f64, k: f64, n: f64, power: f64) -> Result<Self> {
        Ok(match name {
            "c" => Builtin::C { k, n },
            "l" => Builtin::L { gamma, s },
            "a_tilde" => Builtin::ATilde { gamma, s },
            "bracket_v_pow" => Builtin::BracketVPow { p: power },
            "bracket_eta_pow" => Builtin::BracketEtaPow { p: power },
            other => return Err(Error::UnknownSymbol(other.to_string())),
        })
    }

    pub fn weight(&self) -> WeightFunction {
        match *self {
            Builtin::C { k, n } => WeightFunction::new(format!("c[k={k},n={n}]"), move |v, e| {
                bracket(v).powf(n) * bracket(e).powf(k)
            }),
            Builtin::L { gamma, s } => {
                WeightFunction::new(format!("l[{}]", gamma + 2.0 * s), move |v, _| bracket(v).powf(gamma + 2.0 * s))
            }
            Builtin::ATilde { gamma, s } => {
                WeightFunction::new(format!("a_tilde[g={gamma},s={s}]"), move |v, e| a_tilde(v, e, gamma, s))
            }
            Builtin::BracketVPow { p } => WeightFunction::new(format!("<v>^{p}"), move |v, _| bracket(v).powf(p)),
            Builtin::BracketEtaPow { p } => WeightFunction::new(format!("<eta>^{p}"), move |_, e| bracket(e).powf(p)),
        }
    }

    pub fn symbol(&self) -> Symbol {
        self.weight().to_symbol()
    }
}

/// Result of a finite-difference seminorm estimate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeminormEstimate {
    pub value: f64,
    /// Same estimate with step `h/2`.
    pub value_half_step: f64,
    pub relative_change: f64,
    /// Phase-space point and multi-index where the maximum was attained.
    pub argmax: (Vec<f64>, Vec<f64>, Vec<usize>),
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// All multi-indices over `vars` variables with total order ≤ `k`.
fn multi_indices(vars: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..vars {
        let mut next = Vec::new();
        for idx in &out {
            let used: usize = idx.iter().sum();
            for j in 0..=(k - used) {
                let mut e = idx.clone();
                e.push(j);
                next.push(e);
            }
        }
        out = next;
    }
    out
}

/// Central finite-difference derivative `∂^α_v ∂^β_η a` at `(v, η)`; `orders`
/// lists the per-variable orders for `(v_1..v_d, η_1..η_d)`.
pub fn finite_difference(a: &Symbol, v: &[f64], eta: &[f64], orders: &[usize], h: f64) -> Result<Complex64> {
    let d = v.len();
    let mut stencil: Vec<(Vec<f64>, f64)> = vec![(Vec::new(), 1.0)];
    for &j in orders {
        let mut next = Vec::new();
        for (offs, w) in &stencil {
            for i in 0..=j {
                let shift = (j as f64 / 2.0 - i as f64) * h;
                let coeff = if i % 2 == 0 { 1.0 } else { -1.0 } * binomial(j, i) / h.powi(j as i32);
                let mut o = offs.clone();
                o.push(shift);
                next.push((o, w * coeff));
            }
        }
        stencil = next;
    }
    let mut acc = Complex64::new(0.0, 0.0);
    let mut pv = [0.0; 2];
    let mut pe = [0.0; 2];
    for (offs, w) in stencil {
        for a_ in 0..d {
            pv[a_] = v[a_] + offs[a_];
            pe[a_] = eta[a_] + offs[d + a_];
        }
        acc += a.eval(&pv[..d], &pe[..d])? * w;
    }
    Ok(acc)
}

fn seminorm_at_step(a: &Symbol, m: &WeightFunction, order: usize, grid: &PhaseGrid, h: f64) -> Result<(f64, (Vec<f64>, Vec<f64>, Vec<usize>))> {
    let d = grid.dim();
    let indices = multi_indices(2 * d, order);
    let mut best = (f64::NEG_INFINITY, (vec![], vec![], vec![]));
    for i in 0..grid.len() {
        let v = grid.velocity(i);
        for q in 0..grid.len() {
            let e = grid.frequency(q);
            let w = m.eval(&v[..d], &e[..d]);
            for idx in &indices {
                let val = finite_difference(a, &v[..d], &e[..d], idx, h)?.norm() / w;
                if !val.is_finite() {
                    return Err(Error::NonFinite {
                        label: format!("∂{idx:?} {}", a.label()),
                        at: format!("v={:?}, eta={:?}", &v[..d], &e[..d]),
                    });
                }
                if val > best.0 {
                    best = (val, (v[..d].to_vec(), e[..d].to_vec(), idx.clone()));
                }
            }
        }
    }
    Ok(best)
}

/// `max_{|α|+|β| ≤ order} sup |∂^α_v ∂^β_η a| / M` over the grid nodes, by
/// central differences with step `h`, paired with the `h/2` estimate.
pub fn seminorm_estimate(a: &Symbol, m: &WeightFunction, order: usize, grid: &PhaseGrid, h: f64) -> Result<SeminormEstimate> {
    if order > 4 {
        return Err(crate::error::invalid("order", "seminorm order must be ≤ 4"));
    }
    if !(h > 0.0 && h < grid.dv()) {
        return Err(crate::error::invalid("h", "step must be positive and below Δv"));
    }
    let (value, argmax) = seminorm_at_step(a, m, order, grid, h)?;
    let (value_half_step, _) = seminorm_at_step(a, m, order, grid, 0.5 * h)?;
    let relative_change = (value - value_half_step).abs() / value.abs().max(f64::MIN_POSITIVE);
    Ok(SeminormEstimate {
        value,
        value_half_step,
        relative_change,
        argmax,
    })
}

/// Sampled admissibility constants of a weight.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub label: String,
    /// `max M(X)/M(Y)` over sampled pairs with `|X − Y| ≤ δ₀`.
    pub slow_variation: f64,
    pub slow_radius: f64,
    /// Temperance constant and exponent: `M(X)/M(Y) ≤ C⟨X−Y⟩^N` on samples.
    pub temperance_c: f64,
    pub temperance_n: u32,
    /// `true` when some exponent in `0..=16` gave a constant that did not grow
    /// when the sampling box was doubled.
    pub temperance_stable: bool,
    pub samples: usize,
}

const SLOW_RADIUS: f64 = 0.5;

fn random_point(rng: &mut ChaCha8Rng, d: usize, rv: f64, re: f64) -> Vec<f64> {
    let mut x = Vec::with_capacity(2 * d);
    for _ in 0..d {
        x.push(rng.gen_range(-rv..rv));
    }
    for _ in 0..d {
        x.push(rng.gen_range(-re..re));
    }
    x
}

fn temperance_constants(m: &WeightFunction, d: usize, rv: f64, re: f64, samples: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = vec![0.0f64; 17];
    let mut pairs: Vec<(Vec<f64>, Vec<f64>)> = Vec::with_capacity(samples + 2 * samples);
    for _ in 0..samples {
        pairs.push((random_point(&mut rng, d, rv, re), random_point(&mut rng, d, rv, re)));
    }
    // Pairs anchored at the origin probe the polynomial growth directly.
    for _ in 0..samples {
        let x = random_point(&mut rng, d, rv, re);
        pairs.push((x.clone(), vec![0.0; 2 * d]));
        pairs.push((vec![0.0; 2 * d], x));
    }
    for (x, y) in pairs {
        let ratio = m.eval(&x[..d], &x[d..]) / m.eval(&y[..d], &y[d..]);
        let dist = bracket(&x.iter().zip(&y).map(|(a, b)| a - b).collect::<Vec<_>>());
        for (n, slot) in c.iter_mut().enumerate() {
            *slot = slot.max(ratio / dist.powi(n as i32));
        }
    }
    c
}

/// Samples the slow-variation and temperance constants of `m` over the phase box
/// `[-R,R)^d × [-N Δη/2, N Δη/2)^d`. The temperance exponent is the smallest
/// `N ∈ {0..16}` whose constant grows by at most 25% when the box is doubled.
pub fn check_admissible(m: &WeightFunction, grid: &PhaseGrid, samples: usize, seed: u64) -> Result<AdmissibilityReport> {
    if samples < 100 {
        return Err(crate::error::invalid("samples", "need at least 100 samples"));
    }
    let d = grid.dim();
    let rv = grid.half_width();
    let re = 0.5 * grid.n() as f64 * grid.deta();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut slow = 1.0f64;
    for _ in 0..samples {
        let x = random_point(&mut rng, d, rv, re);
        let mut dir: Vec<f64> = (0..2 * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = dir.iter().map(|c| c * c).sum::<f64>().sqrt().max(1e-12);
        let rad = SLOW_RADIUS * rng.gen_range(0.0..1.0f64);
        dir.iter_mut().for_each(|c| *c *= rad / norm);
        let y: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + b).collect();
        let (mx, my) = (m.eval(&x[..d], &x[d..]), m.eval(&y[..d], &y[d..]));
        slow = slow.max(mx / my).max(my / mx);
    }
    let small = temperance_constants(m, d, 0.5 * rv, 0.5 * re, samples, seed ^ 0x5eed);
    let large = temperance_constants(m, d, rv, re, samples, seed ^ 0x5eed);
    let mut chosen = None;
    for n in 0..=16 {
        if large[n] <= 1.25 * small[n] + 1e-12 {
            chosen = Some(n);
            break;
        }
    }
    let (n, stable) = match chosen {
        Some(n) => (n, true),
        None => (16, false),
    };
    Ok(AdmissibilityReport {
        label: m.label().to_string(),
        slow_variation: slow,
        slow_radius: SLOW_RADIUS,
        temperance_c: large[n].max(1.0),
        temperance_n: n as u32,
        temperance_stable: stable,
        samples,
    })
}

/// Extrema of `Re(a)/b` over the grid nodes `(v_i, η_m)`.
pub fn symbol_ratio(a: &Symbol, b: &Symbol, grid: &PhaseGrid) -> Result<(f64, f64)> {
    let d = grid.dim();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..grid.len() {
        let v = grid.velocity(i);
        for q in 0..grid.len() {
            let e = grid.frequency(q);
            let den = b.eval(&v[..d], &e[..d])?.re;
            if den == 0.0 {
                return Err(Error::DivisionByZero(format!("v={:?}, eta={:?}", &v[..d], &e[..d])));
            }
            let r = a.eval(&v[..d], &e[..d])?.re / den;
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }
    Ok((lo, hi))
}

/// Constant `κ` in `J^t = exp(t κ ∂_v·∂_η)`, fixed once by the operational identity
/// `op₀(v·η) = (J^{-1/2}(v·η))^w` on the reference grid (d=1, N=64, R=8).
pub fn j_multiplier_constant() -> Complex64 {
    static KAPPA: OnceLock<Complex64> = OnceLock::new();
    *KAPPA.get_or_init(|| {
        let grid = PhaseGrid::new(1, 64, 8.0).expect("reference grid");
        crate::quantize::calibrate_j_constant(&grid).expect("J calibration")
    })
}

/// Lattice derivative along one axis with spacing `h`: central in the interior,
/// second-order one-sided at the two ends (exact on quadratics).
fn lattice_derivative(src: &[Complex64], dst: &mut [Complex64], len: usize, stride: usize, h: f64, base: usize) {
    let at = |i: usize| src[base + i * stride];
    for i in 0..len {
        let val = if i == 0 {
            (at(0) * -3.0 + at(1) * 4.0 - at(2)) / (2.0 * h)
        } else if i == len - 1 {
            (at(len - 1) * 3.0 - at(len - 2) * 4.0 + at(len - 3)) / (2.0 * h)
        } else {
            (at(i + 1) - at(i - 1)) / (2.0 * h)
        };
        dst[base + i * stride] = val;
    }
}

/// Applies `Σ_a ∂_{v_a}∂_{η_a}` on the quantization lattice.
fn mixed_laplacian(grid: &PhaseGrid, f: &[Complex64]) -> Vec<Complex64> {
    let d = grid.dim();
    let n = grid.n();
    let two_n = 2 * n;
    let hv = 0.5 * grid.dv();
    let he = grid.deta();
    // Layout: v multi-index (2N per axis) slow, η multi-index (N per axis) fast.
    // Axis strides for v-axis a and η-axis a.
    let ne = grid.len();
    let nv = (two_n).pow(d as u32);
    let v_stride = |a: usize| if d == 1 || a == 1 { ne } else { two_n * ne };
    let e_stride = |a: usize| if d == 1 || a == 1 { 1 } else { n };
    let mut out = vec![Complex64::new(0.0, 0.0); f.len()];
    let mut tmp = vec![Complex64::new(0.0, 0.0); f.len()];
    let mut tmp2 = vec![Complex64::new(0.0, 0.0); f.len()];
    for a in 0..d {
        // ∂_{η_a}
        let es = e_stride(a);
        for base in 0..f.len() {
            let q = base % ne;
            let ia = if d == 1 || a == 1 { q % n } else { q / n };
            if ia == 0 {
                lattice_derivative(f, &mut tmp, n, es, he, base);
            }
        }
        // ∂_{v_a}
        let vs = v_stride(a);
        for base in 0..f.len() {
            let p = base / ne;
            let ia = if d == 1 || a == 1 { p % two_n } else { p / two_n };
            if ia == 0 {
                lattice_derivative(&tmp, &mut tmp2, two_n, vs, hv, base);
            }
        }
        for (o, t) in out.iter_mut().zip(&tmp2) {
            *o += t;
        }
    }
    debug_assert_eq!(nv * ne, f.len());
    out
}

/// `J^t a = exp(t κ ∂_v·∂_η) a` on the quantization lattice, with `κ` from
/// [`j_multiplier_constant`]. Derivatives are lattice differences exact on
/// polynomials of degree ≤ 2 per variable; the exponential is summed as a power
/// series until terms drop below `1e-17` of the symbol scale.
pub fn j_transform(a: &Symbol, t: f64, grid: &PhaseGrid) -> Result<Symbol> {
    let samples = match a.samples() {
        Some(s) if s.grid() == grid => s.clone(),
        _ => PhaseSamples::sample(a, grid)?,
    };
    if t == 0.0 {
        return Ok(Symbol::from_samples(format!("J^0({})", a.label()), samples));
    }
    let kappa = j_multiplier_constant() * t;
    let scale = samples.values.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
    let mut acc = samples.values.clone();
    let mut term = samples.values.clone();
    for k in 1..400 {
        let next = mixed_laplacian(grid, &term);
        let factor = kappa / k as f64;
        term = next.into_iter().map(|z| z * factor).collect();
        let size = term.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for (x, y) in acc.iter_mut().zip(&term) {
            *x += y;
        }
        if size <= 1e-17 * scale {
            break;
        }
        if !size.is_finite() {
            return Err(Error::NonFinite {
                label: format!("J^{t}({})", a.label()),
                at: format!("series term {k}"),
            });
        }
    }
    Ok(Symbol::from_samples(
        format!("J^{t}({})", a.label()),
        PhaseSamples { grid: *grid, values: acc },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid1() -> PhaseGrid {
        PhaseGrid::new(1, 64, 8.0).unwrap()
    }

    #[test]
    fn builtin_examples() {
        let at = Builtin::ATilde { gamma: -2.0, s: 0.5 }.symbol();
        assert_eq!(at.eval(&[0.0, 0.0], &[0.0, 0.0]).unwrap().re, 1.0);
        assert!((at.eval(&[0.0, 0.0], &[1.0, 0.0]).unwrap().re - 2f64.sqrt()).abs() < 1e-15);
        for (k, n) in [(1.0, 1.0), (-3.0, 2.5)] {
            assert_eq!(Builtin::C { k, n }.symbol().eval(&[0.0], &[0.0]).unwrap().re, 1.0);
        }
        assert!(matches!(
            Builtin::from_name("nope", 0.0, 0.5, 0.0, 0.0, 0.0),
            Err(Error::UnknownSymbol(_))
        ));
    }

    #[test]
    fn wedge_matches_cross_product_in_2d() {
        let (v, e) = ([1.5, -0.3], [0.2, 2.0]);
        let cross = v[0] * e[1] - v[1] * e[0];
        assert!((wedge_sq(&v, &e) - cross * cross).abs() < 1e-12);
    }

    #[test]
    fn seminorm_examples() {
        let g = PhaseGrid::new(1, 8, 2.0).unwrap();
        let c = Builtin::C { k: 1.0, n: 1.0 };
        let est = seminorm_estimate(&c.symbol(), &c.weight(), 0, &g, 1e-3).unwrap();
        assert!((est.value - 1.0).abs() < 1e-14);

        let sin = Symbol::of_v("sin", |v| v[0].sin());
        let est = seminorm_estimate(&sin, &WeightFunction::constant(1.0), 2, &grid1(), 1e-3).unwrap();
        assert!((est.value - 1.0).abs() < 1e-4, "{}", est.value);
    }

    #[test]
    fn seminorm_monotone_in_order() {
        let g = PhaseGrid::new(1, 8, 3.0).unwrap();
        let at = Builtin::ATilde { gamma: -2.0, s: 0.5 };
        let mut prev = 0.0;
        for k in 0..=3 {
            let est = seminorm_estimate(&at.symbol(), &at.weight(), k, &g, 1e-2).unwrap();
            assert!(est.value >= prev);
            prev = est.value;
        }
        assert!(seminorm_estimate(&at.symbol(), &at.weight(), 5, &g, 1e-2).is_err());
    }

    #[test]
    fn admissibility_examples() {
        let g = PhaseGrid::new(1, 16, 8.0).unwrap();
        let one = check_admissible(&WeightFunction::constant(1.0), &g, 200, 1).unwrap();
        assert_eq!(one.slow_variation, 1.0);
        assert_eq!((one.temperance_c, one.temperance_n), (1.0, 0));
        let v2 = check_admissible(&Builtin::BracketVPow { p: 2.0 }.weight(), &g, 500, 2).unwrap();
        assert!(v2.temperance_stable);
        assert!(v2.temperance_n <= 2, "{v2:?}");
        assert!(check_admissible(&WeightFunction::constant(1.0), &g, 10, 1).is_err());
    }

    #[test]
    fn ratio_examples() {
        let g = PhaseGrid::new(1, 8, 2.0).unwrap();
        let b = Builtin::ATilde { gamma: -1.0, s: 0.5 }.symbol();
        assert_eq!(symbol_ratio(&b, &b, &g).unwrap(), (1.0, 1.0));
        let a = b.scale(Complex64::new(2.0, 0.0));
        assert_eq!(symbol_ratio(&a, &b, &g).unwrap(), (2.0, 2.0));
        let zero = Symbol::constant(0.0);
        assert!(matches!(symbol_ratio(&a, &zero, &g), Err(Error::DivisionByZero(_))));
    }

    #[test]
    fn j_identity_cases() {
        let g = PhaseGrid::new(1, 16, 4.0).unwrap();
        let a = Builtin::ATilde { gamma: -1.0, s: 0.5 }.symbol();
        let j0 = j_transform(&a, 0.0, &g).unwrap();
        let vonly = Symbol::of_v("v", |v| v[0]);
        let jv = j_transform(&vonly, 0.7, &g).unwrap();
        for p in [0usize, 5, 31] {
            let x = lattice_velocity(&g, p);
            for q in [0usize, 3, 15] {
                let e = g.frequency(q);
                assert_eq!(j0.eval(&x[..1], &e[..1]).unwrap(), a.eval(&x[..1], &e[..1]).unwrap());
                assert_eq!(jv.eval(&x[..1], &e[..1]).unwrap().re, x[0]);
                assert_eq!(jv.eval(&x[..1], &e[..1]).unwrap().im, 0.0);
            }
        }
    }

    #[test]
    fn j_round_trip_on_sampled_symbols() {
        for (g, t) in [(PhaseGrid::new(1, 32, 6.0).unwrap(), 0.5), (PhaseGrid::new(2, 8, 3.0).unwrap(), 0.5)] {
            let a = Builtin::ATilde { gamma: -2.0, s: 0.5 }.symbol();
            let base = PhaseSamples::sample(&a, &g).unwrap();
            let back = j_transform(&j_transform(&a, t, &g).unwrap(), -t, &g).unwrap();
            let scale = base.values().iter().map(|z| z.norm()).fold(0.0, f64::max);
            let err = base
                .values()
                .iter()
                .zip(back.samples().unwrap().values())
                .map(|(x, y)| (x - y).norm())
                .fold(0.0, f64::max);
            assert!(err < 1e-10 * scale, "d={} err={err}", g.dim());
        }
    }

    #[test]
    fn j_of_v_eta_shifts_by_constant() {
        let g = grid1();
        let a = Symbol::real("v.eta", |v, e| v[0] * e[0]);
        let j = j_transform(&a, -0.5, &g).unwrap();
        let shift = Complex64::new(0.0, 1.0 / (4.0 * std::f64::consts::PI));
        for p in [0usize, 17, 127] {
            let x = lattice_velocity(&g, p);
            for q in [0usize, 31, 63] {
                let e = g.frequency(q);
                let z = j.eval(&x[..1], &e[..1]).unwrap();
                assert!((z - (x[0] * e[0] + shift)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn a_tilde_seminorm_is_step_stable() {
        let g = PhaseGrid::new(2, 8, 3.0).unwrap();
        let at = Builtin::ATilde { gamma: -2.0, s: 0.5 };
        let est = seminorm_estimate(&at.symbol(), &at.weight(), 2, &g, 1e-2).unwrap();
        assert!(est.value.is_finite());
        assert!(est.relative_change < 0.05, "{est:?}");
    }

    #[test]
    fn a_tilde_is_sampled_admissible() {
        let g = PhaseGrid::new(2, 16, 8.0).unwrap();
        let rep = check_admissible(&Builtin::ATilde { gamma: -2.0, s: 0.5 }.weight(), &g, 2000, 7).unwrap();
        assert!(rep.slow_variation.is_finite() && rep.temperance_c.is_finite());
        assert!(rep.temperance_stable, "{rep:?}");
    }

    #[test]
    fn sampled_symbol_rejects_off_lattice_points() {
        let g = PhaseGrid::new(1, 8, 2.0).unwrap();
        let s = j_transform(&Symbol::constant(1.0), 0.0, &g).unwrap();
        assert!(s.eval(&[0.1234], &[0.0]).is_err());
    }

    #[test]
    fn symbol_dump_round_trip() {
        let g = PhaseGrid::new(1, 8, 2.0).unwrap();
        let a = Builtin::C { k: 1.0, n: 2.0 }.symbol();
        let mut buf = Vec::new();
        a.write_samples(&g, &mut buf).unwrap();
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 2);
        let (g2, b) = Symbol::read_samples("c", buf.as_slice()).unwrap();
        assert_eq!(g2, g);
        for i in 0..g.len() {
            for m in 0..g.len() {
                let (v, e) = (g.velocity(i), g.frequency(m));
                assert_eq!(a.eval(&v[..1], &e[..1]).unwrap(), b.eval(&v[..1], &e[..1]).unwrap());
            }
        }
    }
}
