//! Dictionaries, frame bounds and dual frames.
//!
//! A [`Dictionary`] holds the synthesis matrix `D` (n × d, atoms as columns).
//! On construction it computes the Gram matrix `D D*`, its extreme
//! eigenvalues (the frame bounds) and, when the Gram is well conditioned, its
//! inverse and the canonical dual `(D D*)⁻¹ D`. Everything downstream (dual
//! frames, the null-space projector, the solver) reads those cached factors.
//!
//! Dual frames are stored through their analysis operator `D̃*` (d × n). Every
//! constructor checks `D D̃* = I` to [`DUAL_TOLERANCE`] before returning.

use std::f64::consts::PI;
use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::SymmetricEigen;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::{max_abs, CMatrix, CVector, C64};

/// Max entry deviation accepted for `D D̃* = I` and for projector identities.
pub const DUAL_TOLERANCE: f64 = 1e-10;
/// Largest Gram condition number for which the inverse is formed.
pub const MAX_GRAM_CONDITION: f64 = 1e12;
/// Default Gaussian window standard deviation (samples) for Gabor atoms.
pub const DEFAULT_WINDOW_STD: f64 = 16.0;
/// Default circular time step of the Gabor lattice.
pub const DEFAULT_TIME_STEP: usize = 2;

static NEXT_DICTIONARY_ID: AtomicU64 = AtomicU64::new(1);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FrameError {
    #[error("invalid Gabor parameters: {0}")]
    InvalidLattice(String),
    #[error("window standard deviation must be positive, got {0}")]
    InvalidWindow(f64),
    #[error("invalid dimensions: {0}")]
    Shape(String),
    #[error("not a frame: {0}")]
    NotAFrame(String),
    #[error("coherence needs at least two atoms")]
    TooFewAtoms,
    #[error("atom {0} has zero norm")]
    ZeroAtom(usize),
    #[error("dual frame check failed: max |D D~* - I| = {0:e}")]
    DualCheck(f64),
    #[error("optimal dual undefined at zero signal (|f| = {0:e})")]
    ZeroSignal(f64),
    #[error("auxiliary vector is not in the null space of D (relative leak {0:e})")]
    NotInNullSpace(f64),
}

/// Time–frequency lattice of a Gabor dictionary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaborLattice {
    /// Circular time step between window positions (samples).
    pub time_step: usize,
    /// Number of window positions `K = n / time_step`.
    pub time_shifts: usize,
    /// Number of modulation frequencies `L`, evenly spaced on `[0, 2π)`.
    pub frequencies: usize,
}

impl GaborLattice {
    /// `K = n / time_step` shifts and `L = oversampling · time_step`
    /// frequencies, so `K · L = oversampling · n`.
    pub fn new(n: usize, oversampling: usize, time_step: usize) -> Result<Self, FrameError> {
        if n < 2 || !n.is_power_of_two() {
            return Err(FrameError::InvalidLattice(format!(
                "signal length {n} is not a power of two >= 2"
            )));
        }
        if oversampling == 0 {
            return Err(FrameError::InvalidLattice("oversampling must be positive".into()));
        }
        if time_step == 0 || !n.is_multiple_of(time_step) {
            return Err(FrameError::InvalidLattice(format!(
                "time step {time_step} does not divide n = {n}"
            )));
        }
        Ok(Self {
            time_step,
            time_shifts: n / time_step,
            frequencies: oversampling * time_step,
        })
    }
}

/// How a dictionary was built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DictionaryKind {
    Gabor {
        oversampling: usize,
        window_std: f64,
        lattice: GaborLattice,
    },
    SpikeFourier,
    Custom,
}

impl DictionaryKind {
    /// Tag byte used by the binary container.
    pub fn tag(&self) -> u8 {
        match self {
            DictionaryKind::Custom => 0,
            DictionaryKind::Gabor { .. } => 1,
            DictionaryKind::SpikeFourier => 2,
        }
    }
}

#[derive(Debug, Clone)]
struct FrameFactors {
    gram_inv: CMatrix,
    canonical: CMatrix,
}

/// Synthesis matrix `D` with cached Gram factors.
#[derive(Debug, Clone)]
pub struct Dictionary {
    id: u64,
    atoms: CMatrix,
    kind: DictionaryKind,
    gram: CMatrix,
    bounds: (f64, f64),
    factors: Result<FrameFactors, String>,
}

impl Dictionary {
    /// Wraps an explicit `n × d` matrix. Rank-deficient or badly conditioned
    /// matrices are accepted, but frame operations on them return
    /// [`FrameError::NotAFrame`].
    pub fn from_matrix(atoms: CMatrix, kind: DictionaryKind) -> Result<Self, FrameError> {
        let (n, d) = atoms.shape();
        if n == 0 || d == 0 {
            return Err(FrameError::Shape(format!("empty dictionary {n}x{d}")));
        }
        if atoms.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(FrameError::Shape("non-finite dictionary entry".into()));
        }
        let gram = &atoms * atoms.adjoint();
        let eig = SymmetricEigen::new(gram.clone()).eigenvalues;
        let lo = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let factors = if d < n {
            Err(format!("{d} atoms cannot span dimension {n}"))
        } else if lo <= 0.0 || hi / lo > MAX_GRAM_CONDITION {
            Err(format!(
                "Gram matrix singular or ill-conditioned (eigenvalues {lo:e}..{hi:e})"
            ))
        } else {
            log::debug!("dictionary {n}x{d}: Gram condition number {:.3e}", hi / lo);
            match gram.clone().cholesky() {
                Some(chol) => {
                    let gram_inv = chol.inverse();
                    let canonical = &gram_inv * &atoms;
                    Ok(FrameFactors { gram_inv, canonical })
                }
                None => Err("Cholesky factorization of the Gram matrix failed".into()),
            }
        };
        Ok(Self {
            id: NEXT_DICTIONARY_ID.fetch_add(1, Ordering::Relaxed),
            atoms,
            kind,
            gram,
            bounds: (lo.max(0.0), hi),
            factors,
        })
    }

    /// Like [`Dictionary::from_matrix`] after scaling every column to unit norm.
    pub fn from_matrix_normalized(mut atoms: CMatrix, kind: DictionaryKind) -> Result<Self, FrameError> {
        for (j, mut col) in atoms.column_iter_mut().enumerate() {
            let norm = col.norm();
            if norm == 0.0 {
                return Err(FrameError::ZeroAtom(j));
            }
            col.unscale_mut(norm);
        }
        Self::from_matrix(atoms, kind)
    }

    /// Process-unique identifier, used to tie dual frames to their parent.
    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn atoms(&self) -> &CMatrix {
        &self.atoms
    }

    pub fn kind(&self) -> &DictionaryKind {
        &self.kind
    }

    /// Signal dimension.
    pub fn n(&self) -> usize {
        self.atoms.nrows()
    }

    /// Number of atoms.
    pub fn d(&self) -> usize {
        self.atoms.ncols()
    }

    /// `D D*`.
    pub fn gram(&self) -> &CMatrix {
        &self.gram
    }

    fn factors(&self) -> Result<&FrameFactors, FrameError> {
        self.factors
            .as_ref()
            .map_err(|reason| FrameError::NotAFrame(reason.clone()))
    }

    /// `(D D*)⁻¹`.
    pub fn gram_inverse(&self) -> Result<&CMatrix, FrameError> {
        Ok(&self.factors()?.gram_inv)
    }

    /// The canonical dual `D̄ = (D D*)⁻¹ D` (n × d).
    pub fn canonical_matrix(&self) -> Result<&CMatrix, FrameError> {
        Ok(&self.factors()?.canonical)
    }

    /// Frame bounds `(A, B)`: extreme eigenvalues of `D D*`.
    pub fn frame_bounds(&self) -> Result<(f64, f64), FrameError> {
        self.factors()?;
        Ok(self.bounds)
    }

    /// `B / A`.
    pub fn condition_number(&self) -> Result<f64, FrameError> {
        let (a, b) = self.frame_bounds()?;
        Ok(b / a)
    }

    /// `D x`.
    pub fn synthesize(&self, x: &CVector) -> CVector {
        &self.atoms * x
    }

    /// `D̄* f`.
    pub fn canonical_coefficients(&self, f: &CVector) -> Result<CVector, FrameError> {
        Ok(self.canonical_matrix()?.ad_mul(f))
    }

    /// `P v = v − D̄*(D v)`, the orthogonal projection onto `null(D)`,
    /// applied without forming the d × d matrix.
    pub fn project_null(&self, v: &CVector) -> Result<CVector, FrameError> {
        let canonical = self.canonical_matrix()?;
        let dv = &self.atoms * v;
        Ok(v - canonical.ad_mul(&dv))
    }

    /// `P W` column by column (see [`Dictionary::project_null`]).
    pub fn project_null_columns(&self, w: &CMatrix) -> Result<CMatrix, FrameError> {
        let canonical = self.canonical_matrix()?;
        let dw = &self.atoms * w;
        Ok(w - canonical.ad_mul(&dw))
    }
}

/// Dual frame of a dictionary, stored as its analysis operator `D̃*` (d × n).
#[derive(Debug, Clone)]
pub struct DualFrame {
    analysis: CMatrix,
    parent: u64,
}

impl DualFrame {
    /// Accepts `analysis` as a dual of `dict` if `max |D D̃* − I| < DUAL_TOLERANCE`.
    pub fn certify(dict: &Dictionary, analysis: CMatrix) -> Result<Self, FrameError> {
        if analysis.shape() != (dict.d(), dict.n()) {
            return Err(FrameError::Shape(format!(
                "dual analysis operator must be {}x{}, got {}x{}",
                dict.d(),
                dict.n(),
                analysis.nrows(),
                analysis.ncols()
            )));
        }
        let dual = Self { analysis, parent: dict.id() };
        let dev = dual.reconstruction_error(dict);
        if !(dev < DUAL_TOLERANCE) {
            return Err(FrameError::DualCheck(dev));
        }
        Ok(dual)
    }

    /// `D̃*` (d × n).
    pub fn analysis(&self) -> &CMatrix {
        &self.analysis
    }

    /// `D̃` (n × d).
    pub fn matrix(&self) -> CMatrix {
        self.analysis.adjoint()
    }

    /// Identifier of the dictionary this frame is dual to.
    pub fn parent_id(&self) -> u64 {
        self.parent
    }

    /// `D̃* f`.
    pub fn coefficients(&self, f: &CVector) -> CVector {
        &self.analysis * f
    }

    /// `max |D D̃* − I|`.
    pub fn reconstruction_error(&self, dict: &Dictionary) -> f64 {
        let mut prod = dict.atoms() * &self.analysis;
        for i in 0..prod.nrows() {
            prod[(i, i)] -= C64::new(1.0, 0.0);
        }
        max_abs(&prod)
    }

    /// Frame bounds of the dual, the extreme eigenvalues of `D̃ D̃*`.
    pub fn frame_bounds(&self) -> (f64, f64) {
        let gram = self.analysis.ad_mul(&self.analysis);
        let eig = SymmetricEigen::new(gram).eigenvalues;
        let lo = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (lo.max(0.0), hi)
    }
}

/// Explicit null-space projector `P = I − D*(D D*)⁻¹ D` (d × d).
#[derive(Debug, Clone)]
pub struct Projector {
    matrix: CMatrix,
}

impl Projector {
    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// `max |P P − P|`.
    pub fn idempotence_error(&self) -> f64 {
        max_abs(&(&self.matrix * &self.matrix - &self.matrix))
    }

    /// `max |P − P*|`.
    pub fn adjoint_error(&self) -> f64 {
        max_abs(&(&self.matrix - self.matrix.adjoint()))
    }

    /// `max |D P|`.
    pub fn annihilation_error(&self, dict: &Dictionary) -> f64 {
        max_abs(&(dict.atoms() * &self.matrix))
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }
}

fn gaussian_window(n: usize, std: f64) -> Vec<f64> {
    if std.is_infinite() {
        return vec![1.0; n];
    }
    // periodized around t = 0; images beyond ±6σ contribute nothing at f64
    let wraps = (6.0 * std / n as f64).ceil() as i64 + 1;
    (0..n)
        .map(|t| {
            (-wraps..=wraps)
                .map(|j| {
                    let u = t as f64 + (j * n as i64) as f64;
                    (-(u * u) / (2.0 * std * std)).exp()
                })
                .sum()
        })
        .collect()
}

/// Gabor dictionary with circularly wrapped Gaussian windows on the default
/// lattice (time step 2, `2 · oversampling` frequencies). A flat window
/// (`window_std = ∞`) has no time localization, so its lattice collapses to a
/// single position and `oversampling · n` frequencies.
pub fn build_gabor_dictionary(n: usize, oversampling: usize, window_std: f64) -> Result<Dictionary, FrameError> {
    let time_step = if window_std.is_infinite() { n } else { DEFAULT_TIME_STEP };
    build_gabor_dictionary_with_step(n, oversampling, window_std, time_step)
}

/// Gabor dictionary on an explicit lattice. Atom `k · L + l` is the window
/// centred at `k · time_step` (circularly) modulated by `exp(2πi l t / L)`,
/// normalized to unit ℓ2 norm.
pub fn build_gabor_dictionary_with_step(
    n: usize,
    oversampling: usize,
    window_std: f64,
    time_step: usize,
) -> Result<Dictionary, FrameError> {
    if window_std.is_nan() || window_std <= 0.0 {
        return Err(FrameError::InvalidWindow(window_std));
    }
    let lattice = GaborLattice::new(n, oversampling, time_step)?;
    let window = gaussian_window(n, window_std);
    let (shifts, freqs) = (lattice.time_shifts, lattice.frequencies);
    let d = shifts * freqs;
    let mut atoms = CMatrix::zeros(n, d);
    for k in 0..shifts {
        let shift = k * time_step;
        for l in 0..freqs {
            let omega = 2.0 * PI * l as f64 / freqs as f64;
            let mut col = atoms.column_mut(k * freqs + l);
            for t in 0..n {
                let g = window[(t + n - shift) % n];
                col[t] = C64::from_polar(g, omega * t as f64);
            }
        }
    }
    Dictionary::from_matrix_normalized(
        atoms,
        DictionaryKind::Gabor { oversampling, window_std, lattice },
    )
}

/// Unitary DFT basis, `F[t, k] = exp(2πi t k / n) / √n`.
pub fn unitary_dft(n: usize) -> CMatrix {
    let scale = 1.0 / (n as f64).sqrt();
    CMatrix::from_fn(n, n, |t, k| {
        // reduce t·k mod n first so the phase stays exact for large n
        let phase = 2.0 * PI * ((t * k) % n) as f64 / n as f64;
        C64::from_polar(scale, phase)
    })
}

/// `D = [I, F] / √2`: a Parseval frame with `d = 2n` atoms of norm `1/√2`.
pub fn build_spike_fourier_dictionary(n: usize) -> Result<Dictionary, FrameError> {
    if n < 2 {
        return Err(FrameError::Shape(format!("spike-Fourier needs n >= 2, got {n}")));
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let f = unitary_dft(n);
    let mut atoms = CMatrix::zeros(n, 2 * n);
    for i in 0..n {
        atoms[(i, i)] = C64::new(s, 0.0);
    }
    atoms.columns_mut(n, n).copy_from(&(f * C64::new(s, 0.0)));
    Dictionary::from_matrix(atoms, DictionaryKind::SpikeFourier)
}

/// Largest normalized inner product between distinct columns of `atoms`.
pub fn matrix_coherence(atoms: &CMatrix) -> Result<f64, FrameError> {
    let (n, d) = atoms.shape();
    if d < 2 {
        return Err(FrameError::TooFewAtoms);
    }
    let data = atoms.as_slice();
    let norms: Vec<f64> = (0..d)
        .map(|j| data[j * n..(j + 1) * n].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
        .collect();
    if let Some(j) = norms.iter().position(|&v| v == 0.0) {
        return Err(FrameError::ZeroAtom(j));
    }
    let mu = (0..d - 1)
        .into_par_iter()
        .map(|j| {
            let a = &data[j * n..(j + 1) * n];
            let mut best = 0.0f64;
            for k in j + 1..d {
                let b = &data[k * n..(k + 1) * n];
                let (mut re, mut im) = (0.0, 0.0);
                for (x, y) in a.iter().zip(b) {
                    // conj(x) * y
                    re += x.re * y.re + x.im * y.im;
                    im += x.re * y.im - x.im * y.re;
                }
                best = best.max(re.hypot(im) / (norms[j] * norms[k]));
            }
            best
        })
        .reduce(|| 0.0, f64::max);
    Ok(mu.min(1.0))
}

/// Coherence `μ(D)`.
pub fn coherence(dict: &Dictionary) -> Result<f64, FrameError> {
    matrix_coherence(dict.atoms())
}

/// Frame bounds `(A, B)` of `D`.
pub fn frame_bounds(dict: &Dictionary) -> Result<(f64, f64), FrameError> {
    dict.frame_bounds()
}

/// `D̄ = (D D*)⁻¹ D`.
pub fn canonical_dual(dict: &Dictionary) -> Result<DualFrame, FrameError> {
    let analysis = dict.canonical_matrix()?.adjoint();
    DualFrame::certify(dict, analysis)
}

/// `P = I_d − D*(D D*)⁻¹ D`, materialized.
pub fn null_space_projector(dict: &Dictionary) -> Result<Projector, FrameError> {
    let canonical = dict.canonical_matrix()?;
    let mut matrix = -canonical.ad_mul(dict.atoms());
    for i in 0..dict.d() {
        matrix[(i, i)] += C64::new(1.0, 0.0);
    }
    Ok(Projector { matrix })
}

/// Member of the dual-frame family `D̃* = D̄* + P W` for a d × n matrix `W`.
pub fn general_dual(dict: &Dictionary, w: &CMatrix) -> Result<DualFrame, FrameError> {
    if w.shape() != (dict.d(), dict.n()) {
        return Err(FrameError::Shape(format!(
            "W must be {}x{}, got {}x{}",
            dict.d(),
            dict.n(),
            w.nrows(),
            w.ncols()
        )));
    }
    let analysis = dict.canonical_matrix()?.adjoint() + dict.project_null_columns(w)?;
    DualFrame::certify(dict, analysis)
}

/// Relative size of the row-space component of `v`, `‖(I − P) v‖ / ‖v‖`.
pub fn null_space_leak(dict: &Dictionary, v: &CVector) -> Result<f64, FrameError> {
    let norm = v.norm();
    if norm == 0.0 {
        return Ok(0.0);
    }
    let row = dict.canonical_matrix()?.ad_mul(&(dict.atoms() * v));
    Ok(row.norm() / norm)
}

/// Relative tolerance on `‖(I − P) Pg‖ / ‖Pg‖` for
/// [`optimal_dual_from_solution`].
pub const NULL_SPACE_TOLERANCE: f64 = 1e-8;

/// Optimal dual built from a solver solution:
/// `D̃_o* = D̄* + (Pg) f̂* / ‖f̂‖²`, the least-squares member of the family
/// that maps `f̂` to `D̄* f̂ + Pg`.
///
/// `pg` is projected onto `null(D)` once more before use, which removes the
/// round-off component left by the solver.
pub fn optimal_dual_from_solution(dict: &Dictionary, f_hat: &CVector, pg: &CVector) -> Result<DualFrame, FrameError> {
    let (n, d) = (dict.n(), dict.d());
    if f_hat.len() != n || pg.len() != d {
        return Err(FrameError::Shape(format!(
            "expected f of length {n} and Pg of length {d}, got {} and {}",
            f_hat.len(),
            pg.len()
        )));
    }
    let f_norm = f_hat.norm();
    if f_norm < 1e-12 * (n as f64).sqrt() {
        return Err(FrameError::ZeroSignal(f_norm));
    }
    let leak = null_space_leak(dict, pg)?;
    if leak > NULL_SPACE_TOLERANCE {
        return Err(FrameError::NotInNullSpace(leak));
    }
    let pg = dict.project_null(pg)?;
    let scale = C64::new(1.0 / (f_norm * f_norm), 0.0);
    let analysis = dict.canonical_matrix()?.adjoint() + (pg * f_hat.adjoint()) * scale;
    DualFrame::certify(dict, analysis)
}
