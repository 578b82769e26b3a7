//! Split Bregman solver for optimal-dual ℓ1-analysis.
//!
//! Minimizing `‖D̄* f + P g‖₁` jointly over signals with `Φ f = y` and over
//! null-space components `P g` is the same problem as ℓ1-synthesis
//! `min ‖x‖₁ s.t. Φ D x = y`: any synthesis coefficient vector splits as
//! `x = D̄* (D x) + P x`. [`solve`] runs the split Bregman loop on the analysis
//! form and returns the synthesis coefficients. [`solve_fixed_dual`] is the
//! same loop with `P g` pinned to zero, i.e. ℓ1-analysis with a fixed dual.
//!
//! Each outer step runs `n_inner` Gauss–Seidel sweeps of
//!
//! ```text
//! f  ← (μ Φ*Φ + λ D̄ D̄*)⁻¹ [μ Φ*(y − c) + λ D̄ (x − Pg − b)]
//! x  ← shrink(D̄* f + Pg + b, 1/λ)
//! Pg ← P (x − D̄* f − b)
//! b  ← b + (D̄* f + Pg − x)
//! ```
//!
//! followed by `c ← c + (Φ f − y)`, and stops once `‖Φ f − y‖₂` drops to the
//! stopping threshold or after `n_outer` steps.

pub mod oracle;

use nalgebra::{Cholesky, Dyn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frames::{Dictionary, DualFrame, FrameError};
use crate::sensing::SensingEnsemble;
use crate::{l1_norm, CMatrix, CVector, C64};

pub use oracle::{basis_pursuit_brute_force, verify_equivalence, BpSolution, EquivalenceReport, OracleError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error("f-update matrix is not positive definite")]
    SingularSystem,
    #[error("non-finite iterate at outer iteration {0}")]
    NonFinite(usize),
    #[error("soft-shrink threshold must be positive, got {0}")]
    Threshold(f64),
}

/// Which analysis operator the loop uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Canonical dual plus the null-space variable `P g`; equals ℓ1-synthesis.
    #[default]
    OptimalDual,
    /// A fixed dual frame, `P g ≡ 0`.
    FixedDual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub lambda: f64,
    pub mu: f64,
    pub tol: f64,
    pub n_inner: usize,
    pub n_outer: usize,
    pub variant: Variant,
}

impl Default for SolverConfig {
    /// `λ = μ = 1`, `tol = 1e-12`, 5 inner and 100 outer iterations.
    fn default() -> Self {
        Self { lambda: 1.0, mu: 1.0, tol: 1e-12, n_inner: 5, n_outer: 100, variant: Variant::OptimalDual }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(SolverError::Config(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(SolverError::Config(format!("mu must be positive, got {}", self.mu)));
        }
        if !(self.tol >= 0.0) {
            return Err(SolverError::Config(format!("tol must be non-negative, got {}", self.tol)));
        }
        if self.n_inner == 0 || self.n_outer == 0 {
            return Err(SolverError::Config("n_inner and n_outer must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryResult {
    /// Recovered signal: `D x̂` for the optimal-dual variant, the `f` iterate
    /// for the fixed-dual variant.
    #[serde(with = "complex_vec")]
    pub f_hat: CVector,
    /// Raw `f` iterate at exit.
    #[serde(with = "complex_vec")]
    pub f_iterate: CVector,
    /// Final `x` iterate: the synthesis coefficients (optimal dual) or the
    /// shrunk analysis coefficients (fixed dual).
    #[serde(with = "complex_vec")]
    pub x_hat: CVector,
    /// Null-space variable `P g` at exit (zero for the fixed dual).
    #[serde(with = "complex_vec")]
    pub p_g: CVector,
    /// `‖Φ f − y‖₂` after each outer iteration.
    pub residual_trace: Vec<f64>,
    pub outer_iters: usize,
    /// `‖x̂‖₁`.
    pub objective: f64,
    pub converged: bool,
    pub variant: Variant,
    /// Largest `‖(I − P) Pg‖₂` seen at the end of an outer iteration.
    pub max_null_leak: f64,
}

/// Vectors as `[[re, im], ...]`.
pub mod complex_vec {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::{CVector, C64};

    pub fn serialize<S: Serializer>(v: &CVector, ser: S) -> Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = v.iter().map(|z| [z.re, z.im]).collect();
        pairs.serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<CVector, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(de)?;
        Ok(CVector::from_iterator(pairs.len(), pairs.into_iter().map(|[re, im]| C64::new(re, im))))
    }
}

/// Element-wise soft shrinkage `u ↦ u · max(|u| − θ, 0) / |u|`.
pub fn soft_shrink(v: &CVector, theta: f64) -> Result<CVector, SolverError> {
    if !(theta > 0.0) {
        return Err(SolverError::Threshold(theta));
    }
    Ok(v.map(|u| shrink_scalar(u, theta)))
}

#[inline]
fn shrink_scalar(u: C64, theta: f64) -> C64 {
    let mag = u.norm();
    if mag <= theta {
        C64::new(0.0, 0.0)
    } else {
        u * ((mag - theta) / mag)
    }
}

/// Analysis side of one Bregman problem: the operator `A` (n × d) whose
/// adjoint gives the analysis coefficients, and optionally the dictionary
/// whose null space carries the `P g` variable.
struct Analysis<'a> {
    operator: &'a CMatrix,
    null_space: Option<&'a Dictionary>,
}

fn check_shapes(phi: &SensingEnsemble, n: usize, y: &CVector) -> Result<(), SolverError> {
    if phi.n != n {
        return Err(SolverError::Shape(format!("Φ has {} columns, signals have length {n}", phi.n)));
    }
    if y.len() != phi.m {
        return Err(SolverError::Shape(format!("y has length {}, Φ has {} rows", y.len(), phi.m)));
    }
    Ok(())
}

fn all_finite(v: &CVector) -> bool {
    v.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

fn bregman(phi: &SensingEnsemble, analysis: Analysis<'_>, y: &CVector, eps: f64, config: &SolverConfig) -> Result<RecoveryResult, SolverError> {
    config.validate()?;
    if !(eps >= 0.0) {
        return Err(SolverError::Config(format!("eps must be non-negative, got {eps}")));
    }
    let a = analysis.operator;
    let (n, d) = a.shape();
    check_shapes(phi, n, y)?;

    let phi_c = phi.as_complex();
    let lambda = C64::new(config.lambda, 0.0);
    let mu = C64::new(config.mu, 0.0);
    let system = phi_c.ad_mul(&phi_c) * mu + a * a.adjoint() * lambda;
    let chol: Cholesky<C64, Dyn> = system.cholesky().ok_or(SolverError::SingularSystem)?;
    let phi_adj_y = phi_c.ad_mul(y) * mu;
    let stop = config.tol.max(eps);
    let theta = 1.0 / config.lambda;

    let mut f = CVector::zeros(n);
    let mut x = CVector::zeros(d);
    let mut b = CVector::zeros(d);
    let mut pg = CVector::zeros(d);
    let mut c = CVector::zeros(phi.m);
    let mut trace = Vec::with_capacity(config.n_outer);
    let mut max_leak = 0.0f64;
    let mut residual = y.norm();
    let mut k = 0;

    while k < config.n_outer && residual > stop {
        for _ in 0..config.n_inner {
            let mut rhs = &phi_adj_y - phi_c.ad_mul(&c) * mu;
            rhs += a * (&x - &pg - &b) * lambda;
            f = chol.solve(&rhs);
            let coeffs = a.ad_mul(&f);
            x = (&coeffs + &pg + &b).map(|u| shrink_scalar(u, theta));
            if let Some(dict) = analysis.null_space {
                pg = dict.project_null(&(&x - &coeffs - &b))?;
            }
            b += &coeffs + &pg - &x;
        }
        let r = &phi_c * &f - y;
        residual = r.norm();
        c += r;
        k += 1;
        trace.push(residual);
        if !(residual.is_finite() && all_finite(&x) && all_finite(&pg)) {
            return Err(SolverError::NonFinite(k));
        }
        if let Some(dict) = analysis.null_space {
            let leak = dict.canonical_matrix()?.ad_mul(&(dict.atoms() * &pg)).norm();
            max_leak = max_leak.max(leak);
        }
    }

    let converged = residual <= stop;
    let (f_hat, variant) = match analysis.null_space {
        Some(dict) => (dict.synthesize(&x), Variant::OptimalDual),
        None => (f.clone(), Variant::FixedDual),
    };
    log::debug!("{variant:?} solve: {k} outer iterations, residual {residual:.3e}, converged {converged}");
    Ok(RecoveryResult {
        objective: l1_norm(x.as_slice()),
        f_hat,
        f_iterate: f,
        x_hat: x,
        p_g: pg,
        residual_trace: trace,
        outer_iters: k,
        converged,
        variant,
        max_null_leak: max_leak,
    })
}

/// ℓ1-synthesis through optimal-dual ℓ1-analysis. The stopping threshold is
/// `max(tol, eps)`; reaching `n_outer` first is reported through
/// `converged = false`, not as an error.
pub fn solve(phi: &SensingEnsemble, dict: &Dictionary, y: &CVector, eps: f64, config: &SolverConfig) -> Result<RecoveryResult, SolverError> {
    let operator = dict.canonical_matrix()?;
    bregman(phi, Analysis { operator, null_space: Some(dict) }, y, eps, config)
}

/// ℓ1-analysis `min ‖D̃* f‖₁ s.t. ‖Φ f − y‖ ≤ eps` with a fixed dual `D̃`.
pub fn solve_fixed_dual(phi: &SensingEnsemble, dual: &DualFrame, y: &CVector, eps: f64, config: &SolverConfig) -> Result<RecoveryResult, SolverError> {
    let operator = dual.matrix();
    bregman(phi, Analysis { operator: &operator, null_space: None }, y, eps, config)
}

/// Dispatches on `config.variant`; the fixed-dual variant uses the canonical dual.
pub fn recover(phi: &SensingEnsemble, dict: &Dictionary, y: &CVector, eps: f64, config: &SolverConfig) -> Result<RecoveryResult, SolverError> {
    match config.variant {
        Variant::OptimalDual => solve(phi, dict, y, eps, config),
        Variant::FixedDual => {
            let dual = crate::frames::canonical_dual(dict)?;
            solve_fixed_dual(phi, &dual, y, eps, config)
        }
    }
}
