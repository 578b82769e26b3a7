//! Brute-force basis pursuit for tiny real instances.
//!
//! `min ‖x‖₁ s.t. A x = y` is a linear program; an optimum sits at a basic
//! solution whose support is a set of `rank(A)` linearly independent columns.
//! Enumerating every such set and solving the square system gives the exact
//! optimum without any iterative method, which makes it an independent check
//! on the Bregman solver.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{solve, RecoveryResult, SolverConfig, SolverError};
use crate::frames::Dictionary;
use crate::sensing::SensingEnsemble;
use crate::CVector;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("instance is not real-valued (max imaginary part {0:e})")]
    NotReal(f64),
    #[error("oracle budget exceeded: {needed} supports > {budget}")]
    Budget { needed: u128, budget: u128 },
    #[error("y is not in the range of the measurement operator")]
    Infeasible,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Exact basis-pursuit optimum.
#[derive(Debug, Clone, PartialEq)]
pub struct BpSolution {
    pub x: DVector<f64>,
    pub objective: f64,
    pub support: Vec<usize>,
    /// Number of column subsets examined.
    pub supports_checked: usize,
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// `min ‖x‖₁ s.t. A x = y` over real `A` (m × d) by enumerating every
/// `rank(A)`-column subset. Fails if more than `budget` subsets would be
/// needed.
pub fn basis_pursuit_brute_force(a: &DMatrix<f64>, y: &DVector<f64>, budget: u128) -> Result<BpSolution, OracleError> {
    let (m, d) = a.shape();
    if y.len() != m {
        return Err(OracleError::Shape(format!("y has length {}, A has {m} rows", y.len())));
    }
    let scale = a.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1e-300);
    let rank = a.clone().svd(false, false).rank(1e-10 * scale * (m.max(d) as f64));
    if rank == 0 {
        return if y.norm() == 0.0 {
            Ok(BpSolution { x: DVector::zeros(d), objective: 0.0, support: vec![], supports_checked: 0 })
        } else {
            Err(OracleError::Infeasible)
        };
    }
    let needed = binomial(d, rank);
    if needed > budget {
        return Err(OracleError::Budget { needed, budget });
    }
    let feas_tol = 1e-9 * (1.0 + y.norm());
    let mut best: Option<(f64, DVector<f64>, Vec<usize>)> = None;
    let mut combo: Vec<usize> = (0..rank).collect();
    let mut checked = 0usize;
    loop {
        checked += 1;
        let cols = a.select_columns(&combo);
        let svd = cols.clone().svd(true, true);
        let sv = &svd.singular_values;
        let top = sv.iter().cloned().fold(0.0, f64::max);
        let bottom = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        if top > 0.0 && bottom > 1e-10 * top {
            if let Ok(z) = svd.solve(y, 0.0) {
                if (&cols * &z - y).norm() <= feas_tol {
                    let obj = z.iter().map(|v| v.abs()).sum::<f64>();
                    if best.as_ref().is_none_or(|(b, _, _)| obj < *b) {
                        best = Some((obj, z, combo.clone()));
                    }
                }
            }
        }
        let mut i = rank;
        while i > 0 && combo[i - 1] == d - rank + i - 1 {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        combo[i - 1] += 1;
        for j in i..rank {
            combo[j] = combo[j - 1] + 1;
        }
    }
    let (objective, z, support) = best.ok_or(OracleError::Infeasible)?;
    let mut x = DVector::zeros(d);
    for (&i, &v) in support.iter().zip(z.iter()) {
        x[i] = v;
    }
    Ok(BpSolution { x, objective, support, supports_checked: checked })
}

/// Solver vs. oracle comparison on one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub solver_objective: f64,
    pub oracle_objective: f64,
    /// `|solver − oracle|` objective gap.
    pub objective_gap: f64,
    /// `‖Φ D x̂ − y‖₂` of the solver's coefficients.
    pub solver_residual: f64,
    /// Largest entry gap between solver and oracle coefficients.
    pub max_coefficient_gap: f64,
    pub feasible: bool,
    pub converged: bool,
    pub outer_iters: usize,
}

fn real_part(m: &crate::CMatrix) -> Result<DMatrix<f64>, OracleError> {
    let scale = m.iter().fold(0.0f64, |acc, z| acc.max(z.norm())).max(1.0);
    let imag = m.iter().fold(0.0f64, |acc, z| acc.max(z.im.abs()));
    if imag > 1e-12 * scale {
        return Err(OracleError::NotReal(imag));
    }
    Ok(m.map(|z| z.re))
}

/// Runs [`solve`] and the brute-force oracle on the same noise-free
/// instance and compares them.
pub fn verify_equivalence(
    phi: &SensingEnsemble,
    dict: &Dictionary,
    y: &CVector,
    config: &SolverConfig,
    oracle_budget: u128,
) -> Result<EquivalenceReport, OracleError> {
    if phi.n != dict.n() || y.len() != phi.m {
        return Err(OracleError::Shape("Φ, D and y do not conform".into()));
    }
    let a = real_part(&(phi.as_complex() * dict.atoms()))?;
    let y_real = real_part(&crate::CMatrix::from_column_slice(y.len(), 1, y.as_slice()))?.column(0).into_owned();
    let oracle = basis_pursuit_brute_force(&a, &y_real, oracle_budget)?;
    let result: RecoveryResult = solve(phi, dict, y, 0.0, config)?;
    let solver_residual = (phi.apply(&result.f_hat) - y).norm();
    let max_coefficient_gap = result
        .x_hat
        .iter()
        .zip(oracle.x.iter())
        .map(|(z, v)| (z - crate::C64::new(*v, 0.0)).norm())
        .fold(0.0, f64::max);
    Ok(EquivalenceReport {
        solver_objective: result.objective,
        oracle_objective: oracle.objective,
        objective_gap: (result.objective - oracle.objective).abs(),
        solver_residual,
        max_coefficient_gap,
        feasible: true,
        converged: result.converged,
        outer_iters: result.outer_iters,
    })
}
