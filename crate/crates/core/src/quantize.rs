//! Weyl and standard quantization on the periodic grid, plus the dense linear
//! algebra the certification modules build on.

use std::fmt;
use std::io::{Read, Write};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{dft_nd, inner_product, GridFunction, PhaseGrid};
use crate::symbol::{PhaseSamples, Symbol};

/// Where an operator came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "label", rename_all = "snake_case")]
pub enum Provenance {
    Weyl(String),
    Standard(String),
    Multiplication(String),
    Composite(String),
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Weyl(s) => write!(f, "weyl({s})"),
            Provenance::Standard(s) => write!(f, "standard({s})"),
            Provenance::Multiplication(s) => write!(f, "multiplication({s})"),
            Provenance::Composite(s) => write!(f, "composite({s})"),
        }
    }
}

impl Provenance {
    fn parse(s: &str) -> Self {
        let inner = |prefix: &str| {
            s.strip_prefix(prefix)
                .and_then(|r| r.strip_suffix(')'))
                .map(str::to_string)
        };
        if let Some(x) = inner("weyl(") {
            Provenance::Weyl(x)
        } else if let Some(x) = inner("standard(") {
            Provenance::Standard(x)
        } else if let Some(x) = inner("multiplication(") {
            Provenance::Multiplication(x)
        } else if let Some(x) = inner("composite(") {
            Provenance::Composite(x)
        } else {
            Provenance::Composite(s.to_string())
        }
    }
}

/// Dense operator on grid functions.
#[derive(Debug, Clone)]
pub struct LinearOperator {
    grid: PhaseGrid,
    matrix: DMatrix<Complex64>,
    provenance: Provenance,
}

/// Outcome of a linear solve.
#[derive(Debug, Clone)]
pub struct Solution {
    pub solution: GridFunction,
    pub condition: f64,
    /// `‖A f − g‖ / ‖g‖` in the grid `L²` norm.
    pub residual: f64,
}

const SOLVE_CONDITION_LIMIT: f64 = 1e13;
const HERMITIAN_TOL: f64 = 1e-9;

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

impl LinearOperator {
    pub fn new(grid: PhaseGrid, matrix: DMatrix<Complex64>, provenance: Provenance) -> Result<Self> {
        if matrix.nrows() != grid.len() || matrix.ncols() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "matrix is {}x{}, grid {} has {} nodes",
                matrix.nrows(),
                matrix.ncols(),
                grid.id(),
                grid.len()
            )));
        }
        if let Some((idx, _)) = matrix.iter().enumerate().find(|(_, z)| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFinite {
                label: provenance.to_string(),
                at: format!("entry ({}, {})", idx % grid.len(), idx / grid.len()),
            });
        }
        Ok(Self {
            grid,
            matrix,
            provenance,
        })
    }

    pub fn identity(grid: &PhaseGrid) -> Self {
        Self {
            grid: *grid,
            matrix: DMatrix::identity(grid.len(), grid.len()),
            provenance: Provenance::Multiplication("1".into()),
        }
    }

    /// Pointwise multiplication by `f(v_i)`.
    pub fn multiplication(grid: &PhaseGrid, label: impl Into<String>, f: impl Fn(&[f64]) -> Complex64) -> Result<Self> {
        let d = grid.dim();
        let mut m = DMatrix::from_element(grid.len(), grid.len(), zero());
        for i in 0..grid.len() {
            m[(i, i)] = f(&grid.velocity(i)[..d]);
        }
        Self::new(*grid, m, Provenance::Multiplication(label.into()))
    }

    /// Diagonal operator from values on the velocity nodes.
    pub fn diagonal(grid: &PhaseGrid, label: impl Into<String>, values: &[Complex64]) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!("{} diagonal values for {} nodes", values.len(), grid.len())));
        }
        Self::multiplication(grid, label, |v| {
            let i = grid_index(grid, v);
            values[i]
        })
    }

    pub fn grid(&self) -> &PhaseGrid {
        &self.grid
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.matrix
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn with_provenance(mut self, p: Provenance) -> Self {
        self.provenance = p;
        self
    }

    pub fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        self.grid.check_same(f.grid())?;
        let x = nalgebra::DVector::from_column_slice(f.values());
        let y = &self.matrix * x;
        GridFunction::new(self.grid, y.as_slice().to_vec())
    }

    /// Matrix product `self ∘ other`.
    pub fn compose(&self, other: &LinearOperator) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        Ok(Self {
            grid: self.grid,
            matrix: &self.matrix * &other.matrix,
            provenance: Provenance::Composite(format!("{} . {}", self.provenance, other.provenance)),
        })
    }

    pub fn add(&self, other: &LinearOperator) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        Ok(Self {
            grid: self.grid,
            matrix: &self.matrix + &other.matrix,
            provenance: Provenance::Composite(format!("{} + {}", self.provenance, other.provenance)),
        })
    }

    pub fn sub(&self, other: &LinearOperator) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        Ok(Self {
            grid: self.grid,
            matrix: &self.matrix - &other.matrix,
            provenance: Provenance::Composite(format!("{} - {}", self.provenance, other.provenance)),
        })
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            grid: self.grid,
            matrix: &self.matrix * c,
            provenance: Provenance::Composite(format!("{c} * {}", self.provenance)),
        }
    }

    /// `self + c·I`.
    pub fn shift(&self, c: f64) -> Self {
        let mut m = self.matrix.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += c;
        }
        Self {
            grid: self.grid,
            matrix: m,
            provenance: Provenance::Composite(format!("{} + {c} I", self.provenance)),
        }
    }

    pub fn adjoint(&self) -> Self {
        Self {
            grid: self.grid,
            matrix: self.matrix.adjoint(),
            provenance: Provenance::Composite(format!("({})*", self.provenance)),
        }
    }

    /// `(A + A*)/2`.
    pub fn hermitian_part(&self) -> Self {
        let m = (&self.matrix + self.matrix.adjoint()) * Complex64::new(0.5, 0.0);
        Self {
            grid: self.grid,
            matrix: m,
            provenance: Provenance::Composite(format!("herm({})", self.provenance)),
        }
    }

    /// `max |A[i,j] − conj(A[j,i])|`.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.matrix.nrows();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn max_entry(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn require_hermitian(&self) -> Result<()> {
        let defect = self.hermitian_defect();
        if defect > HERMITIAN_TOL * self.max_entry().max(1.0) {
            return Err(Error::NotHermitian(defect));
        }
        Ok(())
    }

    /// Ascending eigenvalues of a Hermitian operator.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        self.require_hermitian()?;
        let h = self.hermitian_part().matrix;
        let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        Ok(ev)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.eigenvalues()?[0])
    }

    /// Eigenpair for the smallest eigenvalue.
    pub fn min_eigenpair(&self) -> Result<(f64, GridFunction)> {
        self.require_hermitian()?;
        let eig = self.hermitian_part().matrix.symmetric_eigen();
        let (k, lambda) = eig
            .eigenvalues
            .iter()
            .copied()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("nonempty grid");
        let col = eig.eigenvectors.column(k).iter().copied().collect();
        Ok((lambda, GridFunction::new(self.grid, col)?))
    }

    pub fn singular_values(&self) -> Vec<f64> {
        let mut s: Vec<f64> = self.matrix.singular_values().iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        s
    }

    /// Spectral norm.
    pub fn operator_norm(&self) -> f64 {
        self.singular_values()[0]
    }

    pub fn condition_number(&self) -> f64 {
        let s = self.singular_values();
        let smin = *s.last().expect("nonempty grid");
        if smin == 0.0 {
            f64::INFINITY
        } else {
            s[0] / smin
        }
    }

    /// Solves `A f = g` by LU, reporting the condition number and relative residual.
    pub fn solve(&self, g: &GridFunction) -> Result<Solution> {
        self.grid.check_same(g.grid())?;
        let condition = self.condition_number();
        if !(condition < SOLVE_CONDITION_LIMIT) {
            return Err(Error::Singular { condition });
        }
        let rhs = nalgebra::DVector::from_column_slice(g.values());
        let x = self
            .matrix
            .clone()
            .lu()
            .solve(&rhs)
            .ok_or(Error::Singular { condition })?;
        let solution = GridFunction::new(self.grid, x.as_slice().to_vec())?;
        let r = self.apply(&solution)?.sub(g)?;
        let gn = g.l2_norm();
        let residual = if gn == 0.0 { r.l2_norm() } else { r.l2_norm() / gn };
        Ok(Solution {
            solution,
            condition,
            residual,
        })
    }

    /// Inverse matrix via LU, refusing ill-conditioned input.
    pub fn inverse(&self) -> Result<Self> {
        let condition = self.condition_number();
        if !(condition < SOLVE_CONDITION_LIMIT) {
            return Err(Error::Singular { condition });
        }
        let inv = self.matrix.clone().try_inverse().ok_or(Error::Singular { condition })?;
        Ok(Self {
            grid: self.grid,
            matrix: inv,
            provenance: Provenance::Composite(format!("({})^-1", self.provenance)),
        })
    }

    /// Quadratic form `⟨A f, f⟩` in the grid inner product.
    pub fn form(&self, f: &GridFunction) -> Result<Complex64> {
        inner_product(&self.apply(f)?, f)
    }

    /// Writes the `PDCO` dump.
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let tag = self.provenance.to_string();
        w.write_all(b"PDCO")?;
        w.write_all(&(self.grid.dim() as u32).to_le_bytes())?;
        w.write_all(&(self.grid.n() as u32).to_le_bytes())?;
        w.write_all(&self.grid.half_width().to_le_bytes())?;
        w.write_all(&(tag.len() as u32).to_le_bytes())?;
        w.write_all(tag.as_bytes())?;
        let n = self.grid.len();
        let mut buf = Vec::with_capacity(16 * n * n);
        for i in 0..n {
            for j in 0..n {
                let z = self.matrix[(i, j)];
                buf.extend_from_slice(&z.re.to_le_bytes());
                buf.extend_from_slice(&z.im.to_le_bytes());
            }
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"PDCO" {
            return Err(Error::Format(format!("bad operator magic {magic:?}")));
        }
        let mut u = [0u8; 4];
        let mut f = [0u8; 8];
        r.read_exact(&mut u)?;
        let d = u32::from_le_bytes(u) as usize;
        r.read_exact(&mut u)?;
        let n = u32::from_le_bytes(u) as usize;
        r.read_exact(&mut f)?;
        let radius = f64::from_le_bytes(f);
        let grid = PhaseGrid::new(d, n, radius).map_err(|e| Error::Format(e.to_string()))?;
        r.read_exact(&mut u)?;
        let tag_len = u32::from_le_bytes(u) as usize;
        let mut tag = vec![0u8; tag_len];
        r.read_exact(&mut tag)?;
        let tag = String::from_utf8(tag).map_err(|e| Error::Format(e.to_string()))?;
        let len = grid.len();
        let mut raw = vec![0u8; 16 * len * len];
        r.read_exact(&mut raw)?;
        let mut m = DMatrix::from_element(len, len, zero());
        for (k, c) in raw.chunks_exact(16).enumerate() {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
            m[(k / len, k % len)] = Complex64::new(re, im);
        }
        Self::new(grid, m, Provenance::parse(&tag))
    }
}

fn grid_index(grid: &PhaseGrid, v: &[f64]) -> usize {
    let mut ix = [0usize; 2];
    for a in 0..grid.dim() {
        ix[a] = ((v[a] + grid.half_width()) / grid.dv()).round() as usize;
    }
    grid.flatten(ix)
}

/// `(1/N^d) Σ_m a_m e^{2πi k·m/N}` for every `k`, with `m` centered.
fn centered_inverse_dft(grid: &PhaseGrid, row: &mut [Complex64]) {
    let n = grid.n();
    let d = grid.dim();
    dft_nd(row, n, d, true);
    let norm = 1.0 / grid.len() as f64;
    for (k, z) in row.iter_mut().enumerate() {
        let ix = grid.unflatten(k);
        let sign = if (ix[0] + ix[1]) % 2 == 0 { norm } else { -norm };
        *z *= sign;
    }
}

/// `(i−j) mod N` and `i+j` per axis for flat indices.
fn diff_and_sum(grid: &PhaseGrid, i: usize, j: usize) -> (usize, usize) {
    let n = grid.n();
    let (a, b) = (grid.unflatten(i), grid.unflatten(j));
    if grid.dim() == 1 {
        ((a[0] + n - b[0]) % n, a[0] + b[0])
    } else {
        let k = ((a[0] + n - b[0]) % n) * n + (a[1] + n - b[1]) % n;
        let p = (a[0] + b[0]) * (2 * n) + (a[1] + b[1]);
        (k, p)
    }
}

fn all_real(values: &[Complex64]) -> bool {
    values.iter().all(|z| z.im == 0.0)
}

/// Per-midpoint transforms: row `p` holds `â_p(k)` for lattice velocity `x_p`.
fn midpoint_tables(samples: &PhaseSamples) -> Vec<Vec<Complex64>> {
    let grid = *samples.grid();
    let ne = grid.len();
    let nv = (2 * grid.n()).pow(grid.dim() as u32);
    (0..nv)
        .into_par_iter()
        .map(|p| {
            let mut row: Vec<Complex64> = (0..ne).map(|q| samples.at(p, q)).collect();
            centered_inverse_dft(&grid, &mut row);
            row
        })
        .collect()
}

fn assemble(grid: &PhaseGrid, hermitian: bool, entry: impl Fn(usize, usize) -> Complex64 + Sync) -> DMatrix<Complex64> {
    let n = grid.len();
    let rows: Vec<Vec<Complex64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let start = if hermitian { i } else { 0 };
            (start..n).map(|j| entry(i, j)).collect()
        })
        .collect();
    let mut m = DMatrix::from_element(n, n, zero());
    for (i, row) in rows.into_iter().enumerate() {
        let start = if hermitian { i } else { 0 };
        for (off, z) in row.into_iter().enumerate() {
            let j = start + off;
            m[(i, j)] = z;
            if hermitian && j != i {
                m[(j, i)] = z.conj();
            }
        }
        if hermitian {
            m[(i, i)].im = 0.0;
        }
    }
    m
}

/// `A[i,j] = Δv^d Δη^d Σ_m a((v_i+v_j)/2, η_m) e^{2πi(v_i−v_j)·η_m}`, one FFT per midpoint.
/// Real-valued samples give an exactly Hermitian matrix.
pub fn weyl_quantize(a: &Symbol, grid: &PhaseGrid) -> Result<LinearOperator> {
    let samples = match a.samples() {
        Some(s) if s.grid() == grid => s.clone(),
        _ => PhaseSamples::sample(a, grid)?,
    };
    let tables = midpoint_tables(&samples);
    let hermitian = all_real(samples.values());
    let m = assemble(grid, hermitian, |i, j| {
        let (k, p) = diff_and_sum(grid, i, j);
        tables[p][k]
    });
    LinearOperator::new(*grid, m, Provenance::Weyl(a.label().to_string()))
}

/// `S[i,j] = Δv^d Δη^d Σ_m a(v_i, η_m) e^{2πi(v_i−v_j)·η_m}` from symbol values
/// `table[i·N^d + m]` on the grid nodes.
pub fn standard_quantize_table(grid: &PhaseGrid, label: impl Into<String>, table: &[Complex64]) -> Result<LinearOperator> {
    let ne = grid.len();
    if table.len() != ne * ne {
        return Err(Error::GridMismatch(format!("symbol table has {} values, expected {}", table.len(), ne * ne)));
    }
    let rows: Vec<Vec<Complex64>> = (0..ne)
        .into_par_iter()
        .map(|i| {
            let mut row = table[i * ne..(i + 1) * ne].to_vec();
            centered_inverse_dft(grid, &mut row);
            row
        })
        .collect();
    let m = assemble(grid, false, |i, j| {
        let (k, _) = diff_and_sum(grid, i, j);
        rows[i][k]
    });
    LinearOperator::new(*grid, m, Provenance::Standard(label.into()))
}

/// Symbol values on the grid nodes `(v_i, η_m)`, row-major in `i` then `m`.
pub fn grid_table(a: &Symbol, grid: &PhaseGrid) -> Result<Vec<Complex64>> {
    let d = grid.dim();
    let ne = grid.len();
    let rows: Result<Vec<Vec<Complex64>>> = (0..ne)
        .into_par_iter()
        .map(|i| {
            let v = grid.velocity(i);
            (0..ne).map(|m| a.eval(&v[..d], &grid.frequency(m)[..d])).collect()
        })
        .collect();
    Ok(rows?.concat())
}

/// `u ↦ Σ_m Δη^d a(v_i, η_m) û(η_m) e^{2πi v_i·η_m}` as a dense matrix.
pub fn standard_quantize(a: &Symbol, grid: &PhaseGrid) -> Result<LinearOperator> {
    let table = grid_table(a, grid)?;
    standard_quantize_table(grid, a.label(), &table)
}

/// Fixes `κ` in `J^t = exp(tκ ∂_v·∂_η)` from `op₀(v·η) = (J^{-1/2}(v·η))^w` on a
/// well-resolved probe. For `a = v·η`, `J^{-1/2}a = a − κd/2`, so the identity
/// reduces to `(S − A)f = −(κd/2) f`, solved in the least-squares sense.
pub fn calibrate_j_constant(grid: &PhaseGrid) -> Result<Complex64> {
    let d = grid.dim();
    let a = Symbol::new("v.eta", |v, e| {
        Complex64::new(v.iter().zip(e).map(|(x, y)| x * y).sum(), 0.0)
    });
    let s = standard_quantize(&a, grid)?;
    let w = weyl_quantize(&a, grid)?;
    let probe = GridFunction::from_real_fn(*grid, |v| (-0.5 * v.iter().map(|x| x * x).sum::<f64>()).exp());
    let diff = s.sub(&w)?.apply(&probe)?;
    let num = inner_product(&diff, &probe)?;
    let den = inner_product(&probe, &probe)?;
    Ok(num / den * (-2.0 / d as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::bracket;
    use std::f64::consts::PI;

    fn g1() -> PhaseGrid {
        PhaseGrid::new(1, 64, 8.0).unwrap()
    }

    fn max_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
        (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Direct quadrature formula, used as an oracle for the FFT assembly.
    fn weyl_direct(a: &Symbol, grid: &PhaseGrid) -> DMatrix<Complex64> {
        let d = grid.dim();
        let n = grid.len();
        DMatrix::from_fn(n, n, |i, j| {
            let (vi, vj) = (grid.velocity(i), grid.velocity(j));
            let mid: Vec<f64> = (0..d).map(|k| 0.5 * (vi[k] + vj[k])).collect();
            let mut acc = zero();
            for m in 0..n {
                let e = grid.frequency(m);
                let phase: f64 = (0..d).map(|k| (vi[k] - vj[k]) * e[k]).sum();
                acc += a.eval(&mid, &e[..d]).unwrap() * Complex64::from_polar(1.0, 2.0 * PI * phase);
            }
            acc * (grid.cell_v() * grid.cell_eta())
        })
    }

    #[test]
    fn weyl_examples() {
        let g = g1();
        let id = weyl_quantize(&Symbol::constant(1.0), &g).unwrap();
        assert!(max_diff(id.matrix(), &DMatrix::identity(64, 64)) < 1e-15);
        let v = weyl_quantize(&Symbol::of_v("v", |v| v[0]), &g).unwrap();
        let diag = DMatrix::from_fn(64, 64, |i, j| if i == j { Complex64::new(g.velocity(i)[0], 0.0) } else { zero() });
        assert!(max_diff(v.matrix(), &diag) < 1e-13);
        let eta = weyl_quantize(&Symbol::of_eta("eta", |e| e[0]), &g).unwrap();
        for m0 in [0usize, 5, 40, 63] {
            let e0 = g.frequency(m0)[0];
            let wave = GridFunction::from_fn(g, |v| Complex64::from_polar(1.0, 2.0 * PI * v[0] * e0));
            let out = eta.apply(&wave).unwrap();
            let err = out.sub(&wave.scale(Complex64::new(e0, 0.0))).unwrap().l2_norm();
            assert!(err < 1e-12, "m0={m0}: {err}");
        }
    }

    #[test]
    fn fft_assembly_matches_direct_formula() {
        for g in [PhaseGrid::new(1, 16, 3.0).unwrap(), PhaseGrid::new(2, 8, 2.0).unwrap()] {
            let a = Symbol::new("mixed", |v, e| {
                Complex64::new(bracket(v) * (1.0 + e[0] * e[0]).sqrt(), v[0] * e[e.len() - 1])
            });
            let fast = weyl_quantize(&a, &g).unwrap();
            assert!(max_diff(fast.matrix(), &weyl_direct(&a, &g)) < 1e-12);
        }
    }

    #[test]
    fn real_symbols_give_exactly_hermitian_matrices() {
        let g = PhaseGrid::new(2, 8, 3.0).unwrap();
        let a = crate::symbol::Builtin::ATilde { gamma: -2.0, s: 0.5 }.symbol();
        let w = weyl_quantize(&a, &g).unwrap();
        assert_eq!(w.hermitian_defect(), 0.0);
        assert!(max_diff(w.hermitian_part().matrix(), w.matrix()) < 1e-12);
    }

    #[test]
    fn standard_examples() {
        let g = g1();
        let id = standard_quantize(&Symbol::constant(1.0), &g).unwrap();
        assert!(max_diff(id.matrix(), &DMatrix::identity(64, 64)) < 1e-15);
        let vs = standard_quantize(&Symbol::of_v("v", |v| v[0]), &g).unwrap();
        let vw = weyl_quantize(&Symbol::of_v("v", |v| v[0]), &g).unwrap();
        assert!(max_diff(vs.matrix(), vw.matrix()) < 1e-13);
        let es = standard_quantize(&Symbol::of_eta("<eta>", bracket), &g).unwrap();
        let ew = weyl_quantize(&Symbol::of_eta("<eta>", bracket), &g).unwrap();
        assert!(max_diff(es.matrix(), ew.matrix()) < 1e-13);
    }

    #[test]
    fn standard_minus_weyl_of_v_eta_is_i_over_4pi_on_resolved_probe() {
        let g = g1();
        let a = Symbol::real("v.eta", |v, e| v[0] * e[0]);
        let d = standard_quantize(&a, &g).unwrap().sub(&weyl_quantize(&a, &g).unwrap()).unwrap();
        let f = GridFunction::from_real_fn(g, |v| (-0.5 * v[0] * v[0]).exp());
        let expect = f.scale(Complex64::new(0.0, 1.0 / (4.0 * PI)));
        let err = d.apply(&f).unwrap().sub(&expect).unwrap().l2_norm() / f.l2_norm();
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn calibrated_constant_matches_continuum_value() {
        let kappa = calibrate_j_constant(&g1()).unwrap();
        assert!((kappa - Complex64::new(0.0, -1.0 / (2.0 * PI))).norm() < 1e-10, "{kappa}");
    }

    #[test]
    fn canonical_commutator_on_resolved_probe() {
        let g = g1();
        let v = weyl_quantize(&Symbol::of_v("v", |v| v[0]), &g).unwrap();
        let e = weyl_quantize(&Symbol::of_eta("eta", |e| e[0]), &g).unwrap();
        let c = v.compose(&e).unwrap().sub(&e.compose(&v).unwrap()).unwrap();
        let f = GridFunction::from_real_fn(g, |v| (-0.5 * v[0] * v[0]).exp());
        let cf = c.apply(&f).unwrap();
        let ratio = inner_product(&cf, &f).unwrap() / inner_product(&f, &f).unwrap();
        assert!((ratio.norm() - 1.0 / (2.0 * PI)).abs() < 1e-10, "{ratio}");
        let err = cf.sub(&f.scale(ratio)).unwrap().l2_norm() / f.l2_norm();
        assert!(err < 1e-10);
    }

    #[test]
    fn composition_properties() {
        let g = PhaseGrid::new(1, 16, 4.0).unwrap();
        let br = weyl_quantize(&Symbol::of_eta("<eta>", bracket), &g).unwrap();
        let sq = weyl_quantize(&Symbol::of_eta("<eta>^2", |e| bracket(e).powi(2)), &g).unwrap();
        assert!(max_diff(br.compose(&br).unwrap().matrix(), sq.matrix()) < 1e-12);
        let id = LinearOperator::identity(&g);
        assert_eq!(id.compose(&br).unwrap().matrix(), br.matrix());
        let a = weyl_quantize(&Symbol::real("x", |v, e| v[0].cos() + e[0]), &g).unwrap();
        let lhs = a.compose(&br).unwrap().compose(&sq).unwrap();
        let rhs = a.compose(&br.compose(&sq).unwrap()).unwrap();
        assert!(max_diff(lhs.matrix(), rhs.matrix()) < 1e-12 * lhs.max_entry().max(1.0));
        let other = PhaseGrid::new(1, 8, 4.0).unwrap();
        assert!(id.compose(&LinearOperator::identity(&other)).is_err());
    }

    #[test]
    fn hermitian_part_examples() {
        let g = PhaseGrid::new(1, 8, 2.0).unwrap();
        let e = weyl_quantize(&Symbol::of_eta("eta", |e| e[0]), &g).unwrap();
        let skew = e.scale(Complex64::new(0.0, 1.0));
        assert!(skew.hermitian_part().max_entry() < 1e-15);
        assert!(matches!(skew.min_eigenvalue(), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn spectral_examples() {
        let g = PhaseGrid::new(1, 16, 4.0).unwrap();
        let id = LinearOperator::identity(&g);
        assert!((id.min_eigenvalue().unwrap() - 1.0).abs() < 1e-14);
        assert!((id.operator_norm() - 1.0).abs() < 1e-14);
        let v2 = LinearOperator::multiplication(&g, "v^2", |v| Complex64::new(v[0] * v[0], 0.0)).unwrap();
        assert!(v2.min_eigenvalue().unwrap().abs() < 1e-14);
        let m = weyl_quantize(&Symbol::of_eta("1+|eta|^2", |e| 1.0 + e[0] * e[0]), &g).unwrap();
        assert!((m.hermitian_part().min_eigenvalue().unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn solve_residual_and_singular_report() {
        let g = PhaseGrid::new(1, 16, 4.0).unwrap();
        let a = weyl_quantize(&Symbol::real("1+v^2+eta^2", |v, e| 1.0 + v[0] * v[0] + e[0] * e[0]), &g).unwrap();
        let rhs = GridFunction::from_real_fn(g, |v| (-v[0] * v[0]).exp() + 0.1 * v[0]);
        let sol = a.solve(&rhs).unwrap();
        assert!(sol.residual < 1e-10);
        assert!(sol.condition.is_finite());
        let zero_op = LinearOperator::multiplication(&g, "0", |_| zero()).unwrap();
        assert!(matches!(zero_op.solve(&rhs), Err(Error::Singular { .. })));
    }

    #[test]
    fn operator_dump_round_trip() {
        let g = PhaseGrid::new(1, 8, 2.0).unwrap();
        let a = weyl_quantize(&Symbol::real("v+eta", |v, e| v[0] + e[0]), &g).unwrap();
        let mut buf = Vec::new();
        a.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"PDCO");
        let b = LinearOperator::read_from(buf.as_slice()).unwrap();
        assert_eq!(b.matrix(), a.matrix());
        assert_eq!(b.provenance(), a.provenance());
    }
}
