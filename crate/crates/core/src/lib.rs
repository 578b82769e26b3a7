//! Sparse recovery in coherent, redundant dictionaries.
//!
//! The crate solves ℓ1-synthesis (basis pursuit over a dictionary `D`) by
//! running split Bregman iterations on the equivalent optimal-dual ℓ1-analysis
//! problem. The same loop, with the null-space update switched off, gives
//! standard ℓ1-analysis with any fixed dual frame.
//!
//! Modules:
//!
//! * [`frames`]: dictionaries (Gabor, spike–Fourier, custom), frame bounds,
//!   coherence, canonical/general/optimal dual frames, null-space projector.
//! * [`sensing`]: Gaussian sensing matrices, measurements, sparse ground
//!   truths and Monte Carlo D-RIP lower bounds.
//! * [`solver`]: the split Bregman solver and a brute-force basis-pursuit
//!   oracle used to check the synthesis/analysis equivalence.
//! * [`diagnostics`]: error metrics, s-term tails, decay profiles, error-bound
//!   and sufficient-condition evaluation.
//! * [`experiment`]: the seeded batch harness behind the `optdual` binary.
//! * [`container`]: binary/CSV persistence of matrices.

pub mod container;
pub mod diagnostics;
pub mod experiment;
pub mod frames;
pub mod rng;
pub mod sensing;
pub mod solver;

pub use nalgebra::Complex;

/// Complex scalar used throughout.
pub type C64 = Complex<f64>;
/// Dense complex matrix (column-major).
pub type CMatrix = nalgebra::DMatrix<C64>;
/// Dense complex vector.
pub type CVector = nalgebra::DVector<C64>;

/// Largest absolute entry of a complex matrix.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// ℓ1 norm of a complex vector (sum of moduli).
pub fn l1_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm()).sum()
}

/// Embeds a real slice as a complex vector with zero imaginary parts.
pub fn complexify(v: &[f64]) -> CVector {
    CVector::from_iterator(v.len(), v.iter().map(|&r| C64::new(r, 0.0)))
}
