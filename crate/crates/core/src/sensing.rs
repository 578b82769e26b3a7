//! Sensing matrices, measurements, sparse ground truths and D-RIP estimates.

use nalgebra::DMatrix;
use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frames::Dictionary;
use crate::{rng, CMatrix, CVector, C64};

/// Upper limit on `C(d, s)` for [`drip_exhaustive`].
pub const EXHAUSTIVE_LIMIT: u128 = 100_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SensingError {
    #[error("invalid dimensions: {0}")]
    Shape(String),
    #[error("noise bound must be finite and non-negative, got {0}")]
    NegativeNoise(f64),
    #[error("invalid sparsity: {0}")]
    Sparsity(String),
    #[error("trial count must be positive")]
    NoTrials,
    #[error("selected atoms span the zero subspace")]
    DegenerateSupport,
    #[error("exhaustive enumeration needs C({d}, {s}) <= {EXHAUSTIVE_LIMIT}")]
    TooManySupports { d: usize, s: usize },
}

/// Gaussian sensing matrix `Φ` (m × n) and how it was drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensingEnsemble {
    pub phi: DMatrix<f64>,
    pub m: usize,
    pub n: usize,
    pub seed: u64,
    /// Standard deviation of the entries.
    pub scale: f64,
}

impl SensingEnsemble {
    /// Wraps an explicit real matrix (used for hand-built test operators).
    pub fn from_matrix(phi: DMatrix<f64>) -> Result<Self, SensingError> {
        let (m, n) = phi.shape();
        if m == 0 || m > n {
            return Err(SensingError::Shape(format!("sensing matrix must have 1 <= m <= n, got {m}x{n}")));
        }
        if phi.iter().any(|v| !v.is_finite()) {
            return Err(SensingError::Shape("non-finite sensing entry".into()));
        }
        Ok(Self { phi, m, n, seed: 0, scale: f64::NAN })
    }

    /// `Φ` embedded in the complex field.
    pub fn as_complex(&self) -> CMatrix {
        self.phi.map(|v| C64::new(v, 0.0))
    }

    pub fn apply(&self, f: &CVector) -> CVector {
        self.as_complex() * f
    }
}

/// `m × n` matrix of i.i.d. `N(0, 1/m)` entries, filled row-major from `seed`.
/// This scaling makes `E‖Φ v‖² = ‖v‖²`.
pub fn gaussian_sensing_matrix(m: usize, n: usize, seed: u64) -> Result<SensingEnsemble, SensingError> {
    gaussian_sensing_matrix_with_std(m, n, 1.0 / (m as f64).sqrt(), seed)
}

/// Like [`gaussian_sensing_matrix`] with entry standard deviation `scale`.
pub fn gaussian_sensing_matrix_with_std(m: usize, n: usize, scale: f64, seed: u64) -> Result<SensingEnsemble, SensingError> {
    if m == 0 || m > n {
        return Err(SensingError::Shape(format!("need 1 <= m <= n, got m = {m}, n = {n}")));
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(SensingError::Shape(format!("entry scale must be positive, got {scale}")));
    }
    let mut rng = rng::seeded(seed);
    let mut phi = DMatrix::zeros(m, n);
    for i in 0..m {
        for j in 0..n {
            let z: f64 = StandardNormal.sample(&mut rng);
            phi[(i, j)] = scale * z;
        }
    }
    Ok(SensingEnsemble { phi, m, n, seed, scale })
}

/// Measurements `y = Φ f + z` with the noise bound they were drawn under.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub y: CVector,
    pub eps: f64,
}

/// `y = Φ f + z` with `z` uniform on the complex ε-ball (`z = 0` when ε = 0).
pub fn measure(phi: &SensingEnsemble, f: &CVector, eps: f64, seed: u64) -> Result<Measurement, SensingError> {
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(SensingError::NegativeNoise(eps));
    }
    if f.len() != phi.n {
        return Err(SensingError::Shape(format!("signal length {} != n = {}", f.len(), phi.n)));
    }
    let mut y = phi.apply(f);
    if eps > 0.0 {
        // uniform in the ball of R^{2m}: Gaussian direction, radius ε U^{1/(2m)}
        let mut rng = rng::seeded(seed);
        let mut z = CVector::from_fn(phi.m, |_, _| {
            C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))
        });
        let u: f64 = rng.gen();
        let radius = eps * u.powf(1.0 / (2 * phi.m) as f64);
        let norm = z.norm();
        if norm > 0.0 {
            z *= C64::new(radius / norm, 0.0);
            y += z;
        }
    }
    Ok(Measurement { y, eps })
}

/// Sparse coefficients `x`, their synthesis `f = D x` and the support.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub f: CVector,
    pub x: CVector,
    /// Sorted support of `x`.
    pub support: Vec<usize>,
    pub s: usize,
    pub seed: u64,
}

/// How many nonzeros to draw, and where.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Sparsity {
    /// `s` nonzeros anywhere among the `d` atoms.
    Total(usize),
    /// The atoms are split into `len` equal consecutive blocks (e.g. the
    /// spike and Fourier halves of `[I, F]/√2`); block `i` gets `counts[i]`
    /// nonzeros.
    PerBlock(Vec<usize>),
}

impl Sparsity {
    pub fn total(&self) -> usize {
        match self {
            Sparsity::Total(s) => *s,
            Sparsity::PerBlock(v) => v.iter().sum(),
        }
    }
}

impl std::fmt::Display for Sparsity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Sparsity::Total(s) => write!(f, "{s}"),
            Sparsity::PerBlock(v) => {
                let parts: Vec<String> = v.iter().map(|c| c.to_string()).collect();
                write!(f, "{}", parts.join("+"))
            }
        }
    }
}

impl std::str::FromStr for Sparsity {
    type Err = String;

    /// `"7"` or `"4+4"`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Result<Vec<usize>, _> = s.split('+').map(|p| p.trim().parse::<usize>()).collect();
        let parts = parts.map_err(|e| format!("bad sparsity {s:?}: {e}"))?;
        Ok(if parts.len() == 1 { Sparsity::Total(parts[0]) } else { Sparsity::PerBlock(parts) })
    }
}

/// Draws a sparse coefficient vector with a uniformly random support and
/// standard normal (real) nonzeros, and synthesizes `f = D x`.
pub fn synthesize_sparse_signal(dict: &Dictionary, sparsity: &Sparsity, seed: u64) -> Result<GroundTruth, SensingError> {
    let d = dict.d();
    let mut rng = rng::seeded(seed);
    let mut support = match sparsity {
        Sparsity::Total(s) => {
            if *s == 0 || *s > d {
                return Err(SensingError::Sparsity(format!("need 1 <= s <= d = {d}, got {s}")));
            }
            index::sample(&mut rng, d, *s).into_vec()
        }
        Sparsity::PerBlock(counts) => {
            let blocks = counts.len();
            if blocks == 0 || !d.is_multiple_of(blocks) {
                return Err(SensingError::Sparsity(format!("{blocks} blocks do not split d = {d}")));
            }
            let width = d / blocks;
            let total: usize = counts.iter().sum();
            if total == 0 || counts.iter().any(|&c| c > width) {
                return Err(SensingError::Sparsity(format!("per-block counts {counts:?} invalid for block width {width}")));
            }
            let mut support = Vec::with_capacity(total);
            for (b, &c) in counts.iter().enumerate() {
                support.extend(index::sample(&mut rng, width, c).into_iter().map(|i| b * width + i));
            }
            support
        }
    };
    let mut x = CVector::zeros(d);
    for &i in &support {
        let v: f64 = StandardNormal.sample(&mut rng);
        x[i] = C64::new(v, 0.0);
    }
    support.sort_unstable();
    let f = dict.synthesize(&x);
    Ok(GroundTruth { f, x, s: support.len(), support, seed })
}

/// Monte Carlo lower bound on the D-RIP constant `δ_s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DripEstimate {
    pub s: usize,
    pub delta_hat: f64,
    pub trials: usize,
    pub seed: u64,
}

/// `max(σ_max² − 1, 1 − σ_min²)` of `Φ Q`, where `Q` is an orthonormal basis
/// of the span of the atoms in `support`.
fn subspace_deviation(phi: &CMatrix, dict: &Dictionary, support: &[usize]) -> Result<f64, SensingError> {
    let cols = dict.atoms().select_columns(support);
    let svd = cols.svd(true, false);
    let u = svd.u.as_ref().expect("left singular vectors requested");
    let top = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    if top == 0.0 {
        return Err(SensingError::DegenerateSupport);
    }
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > 1e-10 * top)
        .collect();
    let q = u.select_columns(&keep);
    let rank = q.ncols();
    let sv = (phi * q).singular_values();
    let hi = sv.iter().cloned().fold(0.0, f64::max);
    // a rank-r span maps through m < r rows with r - m zero singular values
    let lo = if rank > phi.nrows() {
        0.0
    } else {
        sv.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    Ok((hi * hi - 1.0).max(1.0 - lo * lo))
}

fn check_drip_args(phi: &SensingEnsemble, dict: &Dictionary, s: usize) -> Result<(), SensingError> {
    if phi.n != dict.n() {
        return Err(SensingError::Shape(format!("Φ has {} columns but D has {} rows", phi.n, dict.n())));
    }
    if s == 0 || s > dict.d() {
        return Err(SensingError::Sparsity(format!("need 1 <= s <= d = {}, got {s}", dict.d())));
    }
    Ok(())
}

/// Per-trial deviations; trial `t` draws its support from stream `t` of
/// `seed`, so any prefix of trials is reproduced by a shorter run.
pub fn drip_trials(phi: &SensingEnsemble, dict: &Dictionary, s: usize, trials: usize, seed: u64) -> Result<Vec<f64>, SensingError> {
    check_drip_args(phi, dict, s)?;
    if trials == 0 {
        return Err(SensingError::NoTrials);
    }
    let phi_c = phi.as_complex();
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut r = rng::stream(seed, t as u64);
            let support = index::sample(&mut r, dict.d(), s).into_vec();
            subspace_deviation(&phi_c, dict, &support)
        })
        .collect()
}

/// Samples `trials` random supports of size `s`; the result never exceeds
/// the true `δ_s`.
pub fn drip_estimate(phi: &SensingEnsemble, dict: &Dictionary, s: usize, trials: usize, seed: u64) -> Result<DripEstimate, SensingError> {
    let devs = drip_trials(phi, dict, s, trials, seed)?;
    let delta_hat = devs.into_iter().fold(0.0, f64::max).max(0.0);
    Ok(DripEstimate { s, delta_hat, trials, seed })
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u128::MAX / 1024 {
            return u128::MAX;
        }
    }
    acc
}

/// `δ_s` over every support of size `s`; exact for the sampled union of
/// subspaces. Limited to `C(d, s) <= EXHAUSTIVE_LIMIT`.
pub fn drip_exhaustive(phi: &SensingEnsemble, dict: &Dictionary, s: usize) -> Result<DripEstimate, SensingError> {
    check_drip_args(phi, dict, s)?;
    let d = dict.d();
    let count = binomial(d, s);
    if count > EXHAUSTIVE_LIMIT {
        return Err(SensingError::TooManySupports { d, s });
    }
    let phi_c = phi.as_complex();
    let mut combo: Vec<usize> = (0..s).collect();
    let mut delta = 0.0f64;
    loop {
        delta = delta.max(subspace_deviation(&phi_c, dict, &combo)?);
        // next combination in lexicographic order
        let mut i = s;
        while i > 0 && combo[i - 1] == d - s + i - 1 {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        combo[i - 1] += 1;
        for j in i..s {
            combo[j] = combo[j - 1] + 1;
        }
    }
    Ok(DripEstimate { s, delta_hat: delta, trials: count as usize, seed: 0 })
}
