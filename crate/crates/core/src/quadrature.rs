//! Gauss–Legendre panels and periodic trapezoid rules.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Mutex, OnceLock};

/// Nodes and weights on `[-1, 1]`, by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    static CACHE: OnceLock<Mutex<HashMap<usize, (Vec<f64>, Vec<f64>)>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(hit) = cache.lock().unwrap().get(&n) {
        return hit.clone();
    }
    assert!(n >= 1, "need at least one node");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    cache.lock().unwrap().insert(n, (x.clone(), w.clone()));
    (x, w)
}

/// A 1D rule as `(node, weight)` pairs.
pub type Rule = Vec<(f64, f64)>;

/// `n`-point Gauss–Legendre on `[a, b]`.
pub fn panel(a: f64, b: f64, n: usize) -> Rule {
    let (x, w) = gauss_legendre(n);
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    x.iter().zip(&w).map(|(xi, wi)| (mid + half * xi, half * wi)).collect()
}

/// Panels of width at most `width` covering `[a, b]`.
pub fn uniform_panels(a: f64, b: f64, width: f64, n: usize) -> Rule {
    if b <= a {
        return Vec::new();
    }
    let count = ((b - a) / width).ceil().max(1.0) as usize;
    let h = (b - a) / count as f64;
    (0..count)
        .flat_map(|k| panel(a + k as f64 * h, a + (k + 1) as f64 * h, n))
        .collect()
}

/// Panels on `[lo, hi]` whose edges double from `lo`, for integrands with a
/// power-type endpoint singularity at zero.
pub fn geometric_panels(lo: f64, hi: f64, n: usize) -> Rule {
    let mut out = Vec::new();
    let mut a = lo;
    while a < hi {
        let b = (2.0 * a).min(hi);
        out.extend(panel(a, b, n));
        a = b;
    }
    out
}

/// Geometric panels from `lo` up to `knee`, then panels of width ≤ `width` up to `hi`.
pub fn graded_panels(lo: f64, knee: f64, hi: f64, width: f64, n: usize) -> Rule {
    if hi <= lo {
        return Vec::new();
    }
    let knee = knee.clamp(lo, hi);
    let mut out = geometric_panels(lo, knee, n);
    out.extend(uniform_panels(knee, hi, width, n));
    out
}

/// Equally weighted nodes `2πk/n` on the circle.
pub fn periodic_trapezoid(n: usize) -> Rule {
    let w = 2.0 * PI / n as f64;
    (0..n).map(|k| (k as f64 * w, w)).collect()
}

pub fn integrate(rule: &Rule, f: impl Fn(f64) -> f64) -> f64 {
    rule.iter().map(|&(x, w)| w * f(x)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_is_exact_on_polynomials() {
        for n in [1usize, 2, 5, 8, 13] {
            let rule = panel(-1.0, 2.0, n);
            for deg in 0..(2 * n) {
                let exact = (2f64.powi(deg as i32 + 1) - (-1f64).powi(deg as i32 + 1)) / (deg as f64 + 1.0);
                let got = integrate(&rule, |x| x.powi(deg as i32));
                assert!((got - exact).abs() < 1e-12 * exact.abs().max(1.0), "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn graded_panels_handle_endpoint_power() {
        let rule = graded_panels(1e-12, 1.0, 3.0, 1.0, 10);
        let got = integrate(&rule, |x| x.powf(-0.5));
        assert!((got - 2.0 * 3f64.sqrt()).abs() < 1e-5);
    }

    #[test]
    fn trapezoid_is_spectral_on_periodic_functions() {
        let got = integrate(&periodic_trapezoid(40), |t| (3.0 * t.cos()).exp()) / (2.0 * PI);
        // I0(3)
        assert!((got - 4.880_792_585_865_024).abs() < 1e-13);
    }
}
