//! Uniform velocity grid, its DFT-compatible frequency dual, and grid functions.
//!
//! Velocity nodes are `v_i = -R + i Δv` per axis with `Δv = 2R/N`; frequency
//! nodes are `η_m = m Δη` for `m ∈ {-N/2, …, N/2-1}` with `Δη = 1/(2R)`, so that
//! `Δv Δη N = 1`. Multi-dimensional nodes are stored row-major (axis 0 slowest).
//! The forward transform uses the kernel `e^{-2πi v·η}`.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const FUNCTION_MAGIC: &[u8; 4] = b"PDCF";

/// Truncated uniform phase grid on `[-R, R)^d` and its dual.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid {
    d: usize,
    n: usize,
    r: f64,
}

impl PhaseGrid {
    /// Validates and builds a grid. `d ∈ {1, 2}`, `n ≥ 8` of the form `2^j` or `3·2^j`, `r > 0`.
    pub fn new(d: usize, n: usize, r: f64) -> Result<Self> {
        if d != 1 && d != 2 {
            return Err(Error::InvalidGrid(format!("dimension must be 1 or 2, got {d}")));
        }
        if n < 8 || !(n.is_power_of_two() || (n % 3 == 0 && (n / 3).is_power_of_two())) {
            return Err(Error::InvalidGrid(format!(
                "points per axis must be 2^j or 3·2^j and ≥ 8, got {n}"
            )));
        }
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::InvalidGrid(format!("half-width must be positive, got {r}")));
        }
        Ok(Self { d, n, r })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Points per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Half-width of the velocity box.
    pub fn half_width(&self) -> f64 {
        self.r
    }

    pub fn dv(&self) -> f64 {
        2.0 * self.r / self.n as f64
    }

    pub fn deta(&self) -> f64 {
        0.5 / self.r
    }

    /// Total node count `N^d` (same for velocity and frequency nodes).
    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Velocity cell volume `Δv^d`.
    pub fn cell_v(&self) -> f64 {
        self.dv().powi(self.d as i32)
    }

    /// Frequency cell volume `Δη^d`.
    pub fn cell_eta(&self) -> f64 {
        self.deta().powi(self.d as i32)
    }

    pub fn velocity_1d(&self, i: usize) -> f64 {
        -self.r + i as f64 * self.dv()
    }

    pub fn frequency_1d(&self, q: usize) -> f64 {
        (q as f64 - (self.n / 2) as f64) * self.deta()
    }

    /// Splits a flat index into per-axis indices (axis 0 slowest).
    pub fn unflatten(&self, idx: usize) -> [usize; 2] {
        if self.d == 1 {
            [idx, 0]
        } else {
            [idx / self.n, idx % self.n]
        }
    }

    pub fn flatten(&self, ix: [usize; 2]) -> usize {
        if self.d == 1 {
            ix[0]
        } else {
            ix[0] * self.n + ix[1]
        }
    }

    /// Velocity coordinates of flat node `idx` (unused trailing component is 0).
    pub fn velocity(&self, idx: usize) -> [f64; 2] {
        let ix = self.unflatten(idx);
        let mut out = [0.0; 2];
        for (a, slot) in out.iter_mut().enumerate().take(self.d) {
            *slot = self.velocity_1d(ix[a]);
        }
        out
    }

    /// Frequency coordinates of flat dual node `idx`.
    pub fn frequency(&self, idx: usize) -> [f64; 2] {
        let ix = self.unflatten(idx);
        let mut out = [0.0; 2];
        for (a, slot) in out.iter_mut().enumerate().take(self.d) {
            *slot = self.frequency_1d(ix[a]);
        }
        out
    }

    /// Signed frequency index `m` of flat dual node `idx` per axis.
    pub fn frequency_index(&self, idx: usize) -> [i64; 2] {
        let ix = self.unflatten(idx);
        let mut out = [0i64; 2];
        for a in 0..self.d {
            out[a] = ix[a] as i64 - (self.n / 2) as i64;
        }
        out
    }

    /// Short identifier used in reports.
    pub fn id(&self) -> String {
        format!("d{}-N{}-R{}", self.d, self.n, self.r)
    }

    pub(crate) fn check_same(&self, other: &PhaseGrid) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch(format!("{} vs {}", self.id(), other.id())));
        }
        Ok(())
    }
}

/// Japanese bracket `⟨x⟩ = (1 + |x|²)^{1/2}` for the first `d` components.
pub fn bracket(x: &[f64]) -> f64 {
    (1.0 + x.iter().map(|c| c * c).sum::<f64>()).sqrt()
}

/// Complex samples on the velocity nodes (or, after a forward transform, on the
/// frequency nodes) of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: PhaseGrid,
    values: Vec<Complex64>,
}

impl GridFunction {
    pub fn new(grid: PhaseGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFinite {
                label: "grid function".into(),
                at: format!("node {i}"),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: PhaseGrid) -> Self {
        Self {
            grid,
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    /// Samples `f` at every velocity node.
    pub fn from_fn(grid: PhaseGrid, f: impl Fn(&[f64]) -> Complex64) -> Self {
        let values = (0..grid.len())
            .map(|i| {
                let v = grid.velocity(i);
                f(&v[..grid.dim()])
            })
            .collect();
        Self { grid, values }
    }

    /// Samples a real function at every velocity node.
    pub fn from_real_fn(grid: PhaseGrid, f: impl Fn(&[f64]) -> f64) -> Self {
        Self::from_fn(grid, |v| Complex64::new(f(v), 0.0))
    }

    pub fn grid(&self) -> &PhaseGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|z| z * c).collect(),
        }
    }

    pub fn add(&self, other: &GridFunction) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        Ok(Self {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &GridFunction) -> Result<Self> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    /// Pointwise product with a real weight evaluated at the velocity nodes.
    pub fn weighted(&self, w: impl Fn(&[f64]) -> f64) -> Self {
        let d = self.grid.dim();
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, z)| z * w(&self.grid.velocity(i)[..d]))
            .collect();
        Self { grid: self.grid, values }
    }

    /// Pointwise product with a real weight evaluated at the frequency nodes.
    pub fn weighted_dual(&self, w: impl Fn(&[f64]) -> f64) -> Self {
        let d = self.grid.dim();
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, z)| z * w(&self.grid.frequency(i)[..d]))
            .collect();
        Self { grid: self.grid, values }
    }

    /// Discrete L² norm with `Δv^d` weights.
    pub fn l2_norm(&self) -> f64 {
        (self.grid.cell_v() * self.values.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
    }

    /// Discrete L² norm with `Δη^d` weights, for functions on the dual nodes.
    pub fn l2_norm_dual(&self) -> f64 {
        (self.grid.cell_eta() * self.values.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
    }

    /// Writes the `PDCF` little-endian binary envelope.
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        write_envelope(&mut w, self.grid.dim() as u32, &self.grid, &self.values)
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let (d, grid, values) = read_envelope(&mut r, false)?;
        if d as usize != grid.dim() {
            return Err(Error::Format(format!("PDCF dimension field {d} unsupported")));
        }
        Self::new(grid, values)
    }
}

pub(crate) fn write_envelope(
    w: &mut impl Write,
    dim_field: u32,
    grid: &PhaseGrid,
    values: &[Complex64],
) -> Result<()> {
    let mut buf = Vec::with_capacity(20 + 16 * values.len());
    buf.extend_from_slice(FUNCTION_MAGIC);
    buf.extend_from_slice(&dim_field.to_le_bytes());
    buf.extend_from_slice(&(grid.n() as u32).to_le_bytes());
    buf.extend_from_slice(&grid.half_width().to_le_bytes());
    for z in values {
        buf.extend_from_slice(&z.re.to_le_bytes());
        buf.extend_from_slice(&z.im.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

/// Reads a `PDCF` envelope. The grid is rebuilt from the header with spatial
/// dimension `dim_field`, or `dim_field / 2` when `symbol` is set.
pub(crate) fn read_envelope(r: &mut impl Read, symbol: bool) -> Result<(u32, PhaseGrid, Vec<Complex64>)> {
    let mut head = [0u8; 20];
    r.read_exact(&mut head)?;
    if &head[0..4] != FUNCTION_MAGIC {
        return Err(Error::Format("bad magic, expected PDCF".into()));
    }
    let dim_field = u32::from_le_bytes(head[4..8].try_into().unwrap());
    let n = u32::from_le_bytes(head[8..12].try_into().unwrap()) as usize;
    let half = f64::from_le_bytes(head[12..20].try_into().unwrap());
    let spatial = match (symbol, dim_field) {
        (false, 1 | 2) => dim_field as usize,
        (true, 2 | 4) => dim_field as usize / 2,
        _ => return Err(Error::Format(format!("unsupported dimension field {dim_field}"))),
    };
    let grid = PhaseGrid::new(spatial, n, half)?;
    let count = n
        .checked_pow(dim_field)
        .ok_or_else(|| Error::Format("node count overflow".into()))?;
    let mut body = vec![0u8; 16 * count];
    r.read_exact(&mut body)?;
    let values = body
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[0..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..16].try_into().unwrap()),
            )
        })
        .collect();
    Ok((dim_field, grid, values))
}

type FftPair = (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>);

fn plans(n: usize) -> FftPair {
    static CACHE: OnceLock<Mutex<HashMap<usize, FftPair>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap();
    guard
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            (planner.plan_fft_forward(n), planner.plan_fft_inverse(n))
        })
        .clone()
}

/// Unnormalized in-place DFT along every axis of a row-major `n^d` array.
/// `inverse = false` uses `e^{-2πi jk/n}`, `inverse = true` uses `e^{+2πi jk/n}`.
pub(crate) fn dft_nd(data: &mut [Complex64], n: usize, d: usize, inverse: bool) {
    let (fwd, inv) = plans(n);
    let plan = if inverse { inv } else { fwd };
    match d {
        1 => plan.process(data),
        2 => {
            for row in data.chunks_exact_mut(n) {
                plan.process(row);
            }
            let mut col = vec![Complex64::new(0.0, 0.0); n];
            for c in 0..n {
                for r in 0..n {
                    col[r] = data[r * n + c];
                }
                plan.process(&mut col);
                for r in 0..n {
                    data[r * n + c] = col[r];
                }
            }
        }
        _ => unreachable!("grids are 1- or 2-dimensional"),
    }
}

/// `(-1)^{Σ m_a}` for the signed frequency index of flat node `idx`.
fn parity(grid: &PhaseGrid, idx: usize) -> f64 {
    let m = grid.frequency_index(idx);
    if (m[0] + m[1]).rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Maps flat dual index (centered `m`) to the FFT bin `m mod N`.
fn fft_bin(grid: &PhaseGrid, idx: usize) -> usize {
    let n = grid.n() as i64;
    let m = grid.frequency_index(idx);
    let mut ix = [0usize; 2];
    for a in 0..grid.dim() {
        ix[a] = m[a].rem_euclid(n) as usize;
    }
    grid.flatten(ix)
}

/// `ĝ(η_m) = Δv^d Σ_j f(v_j) e^{-2πi v_j·η_m}`; result lives on the dual nodes.
pub fn forward_transform(f: &GridFunction) -> GridFunction {
    let grid = f.grid;
    let mut work = f.values.clone();
    dft_nd(&mut work, grid.n(), grid.dim(), false);
    let scale = grid.cell_v();
    let values = (0..grid.len())
        .map(|q| work[fft_bin(&grid, q)] * (scale * parity(&grid, q)))
        .collect();
    GridFunction { grid, values }
}

/// Inverse of [`forward_transform`]: `f(v_j) = Δη^d Σ_m ĝ(η_m) e^{2πi v_j·η_m}`.
pub fn inverse_transform(g: &GridFunction) -> GridFunction {
    let grid = g.grid;
    let mut work = vec![Complex64::new(0.0, 0.0); grid.len()];
    for q in 0..grid.len() {
        work[fft_bin(&grid, q)] = g.values[q] * parity(&grid, q);
    }
    dft_nd(&mut work, grid.n(), grid.dim(), true);
    let scale = grid.cell_eta();
    GridFunction {
        grid,
        values: work.into_iter().map(|z| z * scale).collect(),
    }
}

/// Discrete L² pairing `Δv^d Σ_j f_j conj(g_j)`.
pub fn inner_product(f: &GridFunction, g: &GridFunction) -> Result<Complex64> {
    f.grid.check_same(&g.grid)?;
    let s: Complex64 = f.values.iter().zip(&g.values).map(|(a, b)| a * b.conj()).sum();
    Ok(s * f.grid.cell_v())
}

/// Pairing of two functions on the dual nodes, `Δη^d Σ_m f_m conj(g_m)`.
pub fn inner_product_dual(f: &GridFunction, g: &GridFunction) -> Result<Complex64> {
    f.grid.check_same(&g.grid)?;
    let s: Complex64 = f.values.iter().zip(&g.values).map(|(a, b)| a * b.conj()).sum();
    Ok(s * f.grid.cell_eta())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn make_grid_examples() {
        let g = PhaseGrid::new(1, 8, 4.0).unwrap();
        assert_eq!(g.dv(), 1.0);
        assert_eq!(g.deta(), 0.125);
        assert_eq!(PhaseGrid::new(2, 16, 6.0).unwrap().len(), 256);
        assert!(PhaseGrid::new(1, 7, 4.0).is_err());
        assert!(PhaseGrid::new(3, 8, 4.0).is_err());
        assert!(PhaseGrid::new(1, 8, 0.0).is_err());
        assert!(PhaseGrid::new(1, 4, 1.0).is_err());
    }

    #[test]
    fn dft_compatibility() {
        for (d, n, r) in [(1, 8, 4.0), (1, 64, 8.0), (2, 16, 6.0), (2, 32, 3.3)] {
            let g = PhaseGrid::new(d, n, r).unwrap();
            assert!((g.dv() * g.deta() * n as f64 - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn delta_transforms_to_constant() {
        let g = PhaseGrid::new(1, 8, 4.0).unwrap();
        let mut f = GridFunction::zeros(g);
        f.values_mut()[4] = c(1.0); // v = 0
        let ghat = forward_transform(&f);
        for z in ghat.values() {
            assert!((z - c(g.dv())).norm() < 1e-15);
        }
    }

    #[test]
    fn plane_wave_transforms_to_indicator() {
        let g = PhaseGrid::new(1, 8, 4.0).unwrap();
        let m0 = 6;
        let eta0 = g.frequency_1d(m0);
        let f = GridFunction::from_fn(g, |v| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * v[0] * eta0));
        let ghat = forward_transform(&f);
        for (q, z) in ghat.values().iter().enumerate() {
            let expect = if q == m0 { 2.0 * g.half_width() } else { 0.0 };
            assert!((z - c(expect)).norm() < 1e-12, "q={q} z={z}");
        }
    }

    #[test]
    fn gaussian_transform_and_norm() {
        let g = PhaseGrid::new(1, 64, 8.0).unwrap();
        let f = GridFunction::from_real_fn(g, |v| (-std::f64::consts::PI * v[0] * v[0]).exp());
        let ghat = forward_transform(&f);
        // Aliasing from the neighbouring period is e^{-π(4-|η|)²}; below 1e-8 for |η| ≤ 1.5.
        for q in 0..g.len() {
            let eta = g.frequency_1d(q);
            if eta.abs() <= 1.5 {
                let exact = (-std::f64::consts::PI * eta * eta).exp();
                assert!((ghat.values()[q] - c(exact)).norm() < 1e-8, "eta={eta}");
            }
        }
        let ip = inner_product(&f, &f).unwrap();
        assert!((ip.re - 0.5f64.sqrt()).abs() < 1e-8);
    }

    #[test]
    fn inner_product_examples() {
        let g = PhaseGrid::new(1, 8, 4.0).unwrap();
        let one = GridFunction::from_real_fn(g, |_| 1.0);
        assert_eq!(inner_product(&one, &one).unwrap(), c(8.0));
        let left = GridFunction::from_real_fn(g, |v| if v[0] < 0.0 { 1.0 } else { 0.0 });
        let right = GridFunction::from_real_fn(g, |v| if v[0] >= 0.0 { 2.0 } else { 0.0 });
        assert_eq!(inner_product(&left, &right).unwrap(), c(0.0));
        let other = PhaseGrid::new(1, 16, 4.0).unwrap();
        assert!(inner_product(&one, &GridFunction::zeros(other)).is_err());
    }

    #[test]
    fn envelope_round_trip() {
        let g = PhaseGrid::new(2, 8, 3.0).unwrap();
        let f = GridFunction::from_fn(g, |v| Complex64::new(v[0], v[1] * v[0]));
        let mut buf = Vec::new();
        f.write_to(&mut buf).unwrap();
        assert_eq!(&buf[0..4], b"PDCF");
        assert_eq!(buf.len(), 20 + 16 * 64);
        let back = GridFunction::read_from(buf.as_slice()).unwrap();
        assert_eq!(back, f);
        assert!(GridFunction::read_from(&b"XXXX0000"[..]).is_err());
    }

    #[test]
    fn rejects_non_finite_values() {
        let g = PhaseGrid::new(1, 8, 1.0).unwrap();
        let mut v = vec![c(0.0); 8];
        v[3] = c(f64::NAN);
        assert!(GridFunction::new(g, v).is_err());
        assert!(GridFunction::new(g, vec![c(0.0); 7]).is_err());
    }
}
