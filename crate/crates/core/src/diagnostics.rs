//! Error metrics, s-term tails, decay profiles and error-bound checks.
//!
//! The bound constants `C₀`, `C₁` are not known in closed form; they are
//! user inputs defaulting to 1, so [`bound_rhs`] is a relative diagnostic for
//! comparing dual frames rather than a certificate.
//!
//! Likewise, D-RIP constants fed to [`check_sufficient_condition`] usually
//! come from [`crate::sensing::drip_estimate`], which only lower-bounds the
//! true constants. A `satisfied = false` verdict from such inputs is
//! inconclusive and `satisfied = true` is advisory.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::C64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("reference vector has zero norm")]
    ZeroTruth,
    #[error("length mismatch: {0} vs {1}")]
    Length(usize, usize),
    #[error("{what} = {value} out of range 0..={max}")]
    OutOfRange { what: &'static str, value: usize, max: usize },
    #[error("sparsity must be at least 1")]
    ZeroSparsity,
    #[error("invalid argument: {0}")]
    Invalid(String),
}

/// `‖estimate − truth‖₂ / ‖truth‖₂`.
pub fn relative_error(estimate: &[C64], truth: &[C64]) -> Result<f64, DiagnosticsError> {
    if estimate.len() != truth.len() {
        return Err(DiagnosticsError::Length(estimate.len(), truth.len()));
    }
    let denom = truth.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if denom == 0.0 {
        return Err(DiagnosticsError::ZeroTruth);
    }
    let num = estimate.iter().zip(truth).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
    Ok(num / denom)
}

/// Indices of the `s` largest magnitudes; ties go to the lower index.
fn top_indices(v: &[C64], s: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[b].norm().total_cmp(&v[a].norm()).then(a.cmp(&b)));
    idx.truncate(s);
    idx
}

/// `‖v − v_s‖₁`, the ℓ1 mass outside the best s-term approximation.
pub fn s_term_tail(v: &[C64], s: usize) -> Result<f64, DiagnosticsError> {
    if s > v.len() {
        return Err(DiagnosticsError::OutOfRange { what: "s", value: s, max: v.len() });
    }
    let mut keep = vec![false; v.len()];
    for i in top_indices(v, s) {
        keep[i] = true;
    }
    Ok(v.iter().zip(keep).filter(|(_, k)| !k).map(|(z, _)| z.norm()).sum())
}

/// Which analysis operator produced a coefficient vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientSource {
    CanonicalDual,
    OptimalDual,
    Other,
}

/// Largest `k` magnitudes of a coefficient vector in descending order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayProfile {
    pub magnitudes: Vec<f64>,
    pub k: usize,
    pub source: CoefficientSource,
}

pub fn decay_profile(v: &[C64], k: usize, source: CoefficientSource) -> Result<DecayProfile, DiagnosticsError> {
    if k == 0 || k > v.len() {
        return Err(DiagnosticsError::OutOfRange { what: "k", value: k, max: v.len() });
    }
    let mut mags: Vec<f64> = v.iter().map(|z| z.norm()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    mags.truncate(k);
    Ok(DecayProfile { magnitudes: mags, k, source })
}

/// Right-hand side `C₀ ε + C₁ ‖v − v_s‖₁ / √s` of the recovery error bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub epsilon: f64,
    pub s: usize,
    pub tail: f64,
    pub rhs: f64,
    pub c0: f64,
    pub c1: f64,
    /// Measured `‖f̂ − f‖₂`, when attached.
    pub lhs: Option<f64>,
}

impl BoundReport {
    pub fn with_measured(mut self, lhs: f64) -> Self {
        self.lhs = Some(lhs);
        self
    }
}

pub fn bound_rhs(eps: f64, v: &[C64], s: usize, c0: f64, c1: f64) -> Result<BoundReport, DiagnosticsError> {
    if s == 0 {
        return Err(DiagnosticsError::ZeroSparsity);
    }
    if !(eps >= 0.0 && c0 >= 0.0 && c1 >= 0.0) {
        return Err(DiagnosticsError::Invalid(format!("eps, c0, c1 must be non-negative ({eps}, {c0}, {c1})")));
    }
    let tail = s_term_tail(v, s)?;
    Ok(BoundReport { epsilon: eps, s, tail, rhs: c0 * eps + c1 * tail / (s as f64).sqrt(), c0, c1, lhs: None })
}

/// Evaluation of
/// `(1 − √(ρBB̃))² δ_{s+a} + ρBB̃ δ_b < 1 − 2√(ρBB̃)` with `ρ = s/b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub s: usize,
    pub a: usize,
    pub b: usize,
    pub rho: f64,
    pub frame_upper: f64,
    pub dual_upper: f64,
    pub delta_s_plus_a: f64,
    pub delta_b: f64,
    pub satisfied: bool,
    /// `RHS − LHS`; positive exactly when satisfied.
    pub margin: f64,
}

/// Evaluates the sufficient condition literally for one `(a, b)` pair with
/// `0 < b − a ≤ 3a`. `B`, `B̃` are the upper frame bounds of the dictionary
/// and of the dual used for analysis.
pub fn check_sufficient_condition(
    s: usize,
    a: usize,
    b: usize,
    frame_upper: f64,
    dual_upper: f64,
    delta_s_plus_a: f64,
    delta_b: f64,
) -> Result<ConditionReport, DiagnosticsError> {
    if s == 0 || a == 0 || b <= a || b - a > 3 * a {
        return Err(DiagnosticsError::Invalid(format!("need s >= 1 and 0 < b - a <= 3a, got s={s}, a={a}, b={b}")));
    }
    if !(frame_upper > 0.0 && dual_upper > 0.0) {
        return Err(DiagnosticsError::Invalid("frame bounds must be positive".into()));
    }
    if !(delta_s_plus_a >= 0.0 && delta_b >= 0.0) || !delta_s_plus_a.is_finite() || !delta_b.is_finite() {
        return Err(DiagnosticsError::Invalid("D-RIP constants must be finite and non-negative".into()));
    }
    let rho = s as f64 / b as f64;
    let t = rho * frame_upper * dual_upper;
    let root = t.sqrt();
    let lhs = (1.0 - root).powi(2) * delta_s_plus_a + t * delta_b;
    let rhs = 1.0 - 2.0 * root;
    Ok(ConditionReport {
        s,
        a,
        b,
        rho,
        frame_upper,
        dual_upper,
        delta_s_plus_a,
        delta_b,
        satisfied: lhs < rhs,
        margin: rhs - lhs,
    })
}

/// Evaluates every admissible pair with `1 ≤ a ≤ a_max`, `a < b ≤ 4a`, taking
/// the D-RIP constant of each order from `delta_of_order`.
pub fn scan_sufficient_condition(
    s: usize,
    frame_upper: f64,
    dual_upper: f64,
    a_max: usize,
    delta_of_order: impl Fn(usize) -> f64,
) -> Result<Vec<ConditionReport>, DiagnosticsError> {
    let mut out = Vec::new();
    for a in 1..=a_max {
        for b in a + 1..=4 * a {
            out.push(check_sufficient_condition(s, a, b, frame_upper, dual_upper, delta_of_order(s + a), delta_of_order(b))?);
        }
    }
    Ok(out)
}

/// Upper bound on `δ_k` from `δ_{2s}` through `δ_{cs} ≤ c · δ_{2s}` for
/// integer `c = ⌈k/s⌉` (and `δ_k ≤ δ_{2s}` for `k ≤ 2s`).
pub fn delta_from_2s(delta_2s: f64, s: usize) -> impl Fn(usize) -> f64 {
    move |k| {
        if k <= 2 * s {
            delta_2s
        } else {
            k.div_ceil(s) as f64 * delta_2s
        }
    }
}
