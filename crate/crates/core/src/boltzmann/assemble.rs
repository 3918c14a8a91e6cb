//! Grid operators of the decomposition `L = −b^w + K`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;

use super::params::CollisionModel;
use super::symbols::SymbolTables;
use crate::error::Result;
use crate::grid::PhaseGrid;
use crate::quantize::{standard_quantize_table, LinearOperator, Provenance};

fn cache() -> &'static Mutex<HashMap<String, Arc<SymbolTables>>> {
    static CACHE: OnceLock<Mutex<HashMap<String, Arc<SymbolTables>>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

fn key(grid: &PhaseGrid, model: &CollisionModel) -> String {
    serde_json::to_string(&(grid, model)).expect("grid and model serialize")
}

/// Symbol tables for `(grid, model)`, built once per process.
pub fn tables(grid: &PhaseGrid, model: &CollisionModel) -> Result<Arc<SymbolTables>> {
    let k = key(grid, model);
    if let Some(t) = cache().lock().unwrap().get(&k) {
        return Ok(t.clone());
    }
    let t = Arc::new(SymbolTables::build(grid, model)?);
    cache().lock().unwrap().insert(k, t.clone());
    Ok(t)
}

/// Quadrature provenance tag: parameters, kernel, node counts and the
/// measured refinement change of every table.
pub fn provenance_tag(t: &SymbolTables) -> String {
    let refinement: Vec<String> = t.refinement.iter().map(|(n, c)| format!("{n}:{c:.1e}")).collect();
    format!(
        "{}; refinement {}",
        serde_json::to_string(&t.model).expect("model serializes"),
        refinement.join(",")
    )
}

fn real_diagonal(grid: &PhaseGrid, label: &str, values: &[f64]) -> Result<LinearOperator> {
    let c: Vec<Complex64> = values.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    LinearOperator::diagonal(grid, label, &c)
}

/// `K = op(ã_1) + op(a_2ca + a_2c + a_2r + a_2d) + L₁₃ + L₁₄` from tables.
pub fn assemble_k_from(t: &SymbolTables) -> Result<LinearOperator> {
    let g = &t.grid;
    let k = standard_quantize_table(g, "a1_delta", &t.a1)?
        .add(&standard_quantize_table(g, "l2", &t.l2_total())?)?
        .add(&real_diagonal(g, "l13", &t.l13)?)?
        .add(&real_diagonal(g, "l14", &t.l14())?)?;
    Ok(k.with_provenance(Provenance::Composite(format!("K; {}", provenance_tag(t)))))
}

/// `b^w = op(a + a_s)` from tables.
pub fn assemble_bw_from(t: &SymbolTables) -> Result<LinearOperator> {
    let b = standard_quantize_table(&t.grid, "a+a_s", &t.b_total())?;
    Ok(b.with_provenance(Provenance::Composite(format!("b^w; {}", provenance_tag(t)))))
}

pub fn assemble_k(grid: &PhaseGrid, model: &CollisionModel) -> Result<LinearOperator> {
    assemble_k_from(&*tables(grid, model)?)
}

pub fn assemble_bw(grid: &PhaseGrid, model: &CollisionModel) -> Result<LinearOperator> {
    assemble_bw_from(&*tables(grid, model)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridFunction;

    #[test]
    fn k_annihilates_zero_and_carries_provenance() {
        let g = PhaseGrid::new(2, 8, 2.5).unwrap();
        let m = CollisionModel::default();
        let k = assemble_k(&g, &m).unwrap();
        let zero = GridFunction::zeros(g);
        assert!(k.apply(&zero).unwrap().values().iter().all(|z| z.norm() == 0.0));
        let tag = k.provenance().to_string();
        assert!(tag.starts_with("composite(K;") && tag.contains("n_phi"), "{tag}");
        let again = tables(&g, &m).unwrap();
        assert!(Arc::ptr_eq(&again, &tables(&g, &m).unwrap()));
    }

    #[test]
    fn multiplier_pieces_are_diagonal() {
        let g = PhaseGrid::new(2, 8, 2.5).unwrap();
        let t = tables(&g, &CollisionModel::default()).unwrap();
        let d = real_diagonal(&g, "l13", &t.l13).unwrap();
        let m = d.matrix();
        for i in 0..g.len() {
            for j in 0..g.len() {
                if i != j {
                    assert_eq!(m[(i, j)], Complex64::new(0.0, 0.0));
                }
            }
            assert_eq!(m[(i, i)].im, 0.0);
        }
    }
}
