use optdual::frames::{
    build_gabor_dictionary, build_spike_fourier_dictionary, canonical_dual, coherence, frame_bounds, general_dual, matrix_coherence,
    null_space_projector, optimal_dual_from_solution, unitary_dft, Dictionary, DictionaryKind, FrameError, DUAL_TOLERANCE,
};
use optdual::sensing::{gaussian_sensing_matrix, synthesize_sparse_signal, Sparsity};
use optdual::solver::{solve, SolverConfig};
use optdual::{l1_norm, max_abs, rng, CMatrix, CVector, C64};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn random_matrix(rows: usize, cols: usize, seed: u64) -> CMatrix {
    let mut r = rng::seeded(seed);
    CMatrix::from_fn(rows, cols, |_, _| C64::new(r.sample(StandardNormal), r.sample(StandardNormal)))
}

fn random_vector(n: usize, seed: u64) -> CVector {
    random_matrix(n, 1, seed).column(0).into_owned()
}

/// Pairwise normalized inner products, written independently of the library.
fn coherence_by_enumeration(m: &CMatrix) -> f64 {
    let mut best = 0.0f64;
    for j in 0..m.ncols() {
        for k in 0..m.ncols() {
            if j == k {
                continue;
            }
            let mut dot = C64::new(0.0, 0.0);
            for i in 0..m.nrows() {
                dot += m[(i, j)].conj() * m[(i, k)];
            }
            best = best.max(dot.norm() / (m.column(j).norm() * m.column(k).norm()));
        }
    }
    best
}

fn random_dictionary(n: usize, d: usize, seed: u64) -> Dictionary {
    Dictionary::from_matrix_normalized(random_matrix(n, d, seed), DictionaryKind::Custom).unwrap()
}

#[test]
fn gabor_128_by_30_has_3840_high_coherence_atoms() {
    let d = build_gabor_dictionary(128, 30, 16.0).unwrap();
    assert_eq!((d.n(), d.d()), (128, 3840));
    let mu = coherence(&d).unwrap();
    assert!(mu >= 0.9, "coherence {mu}");
    let (a, b) = frame_bounds(&d).unwrap();
    assert!(a > 0.0 && b.is_finite() && b / a >= 1.0);
    let dual = canonical_dual(&d).unwrap();
    assert!(dual.reconstruction_error(&d) < DUAL_TOLERANCE);
}

#[test]
fn gabor_coherence_matches_enumeration_on_small_lattice() {
    let d = build_gabor_dictionary(16, 3, 2.5).unwrap();
    let expect = coherence_by_enumeration(d.atoms());
    assert!((coherence(&d).unwrap() - expect).abs() < 1e-12);
    for j in 0..d.d() {
        assert!((d.atoms().column(j).norm() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn flat_window_spans_signal_space() {
    let d = build_gabor_dictionary(4, 1, f64::INFINITY).unwrap();
    assert_eq!(d.d(), 4);
    assert_eq!(d.atoms().rank(1e-10), 4);
}

#[test]
fn gabor_rejects_bad_parameters() {
    assert!(matches!(build_gabor_dictionary(128, 30, 0.0), Err(FrameError::InvalidWindow(_))));
    assert!(matches!(build_gabor_dictionary(128, 30, -1.0), Err(FrameError::InvalidWindow(_))));
    assert!(build_gabor_dictionary(100, 30, 8.0).is_err());
    assert!(build_gabor_dictionary(128, 0, 8.0).is_err());
}

#[test]
fn spike_fourier_cross_products_on_four_points() {
    // explicit DFT entries e^{-2πijk/4}/2
    let mut best = 0.0f64;
    for j in 0..4 {
        for k in 0..4 {
            let angle = -2.0 * std::f64::consts::PI * (j * k) as f64 / 4.0;
            let fk_j = C64::from_polar(0.5, angle);
            best = best.max(fk_j.norm());
        }
    }
    assert!((best - 0.5).abs() < 1e-15);
    let d = build_spike_fourier_dictionary(4).unwrap();
    assert!((coherence(&d).unwrap() - best).abs() < 1e-12);
    assert!((coherence_by_enumeration(d.atoms()) - best).abs() < 1e-12);
}

#[test]
fn spike_fourier_128() {
    let d = build_spike_fourier_dictionary(128).unwrap();
    assert_eq!(d.d(), 256);
    assert!((coherence(&d).unwrap() - 1.0 / 128f64.sqrt()).abs() < 1e-4);
    let (a, b) = frame_bounds(&build_spike_fourier_dictionary(2).unwrap()).unwrap();
    assert!((a - 1.0).abs() < 1e-10 && (b - 1.0).abs() < 1e-10);
}

#[test]
fn parseval_dictionary_is_self_dual() {
    let d = build_spike_fourier_dictionary(32).unwrap();
    let (a, b) = frame_bounds(&d).unwrap();
    assert!((a - 1.0).abs() < 1e-10 && (b - 1.0).abs() < 1e-10);
    let dual = canonical_dual(&d).unwrap();
    assert!(max_abs(&(dual.matrix() - d.atoms())) < 1e-10);
}

#[test]
fn doubled_identity_has_bounds_two() {
    let mut m = CMatrix::zeros(5, 10);
    for i in 0..5 {
        m[(i, i)] = C64::new(1.0, 0.0);
        m[(i, i + 5)] = C64::new(1.0, 0.0);
    }
    let d = Dictionary::from_matrix(m, DictionaryKind::Custom).unwrap();
    let (a, b) = frame_bounds(&d).unwrap();
    assert!((a - 2.0).abs() < 1e-12 && (b - 2.0).abs() < 1e-12);
}

#[test]
fn coherence_edge_cases() {
    let id = Dictionary::from_matrix(CMatrix::identity(6, 6), DictionaryKind::Custom).unwrap();
    assert_eq!(coherence(&id).unwrap(), 0.0);
    let mut twin = CMatrix::zeros(1, 2);
    twin[(0, 0)] = C64::new(1.0, 0.0);
    twin[(0, 1)] = C64::new(1.0, 0.0);
    assert!((matrix_coherence(&twin).unwrap() - 1.0).abs() < 1e-15);
    assert!(matrix_coherence(&CMatrix::from_element(3, 1, C64::new(1.0, 0.0))).is_err());
}

#[test]
fn projector_trace_is_null_space_dimension() {
    let d = build_spike_fourier_dictionary(128).unwrap();
    let p = null_space_projector(&d).unwrap();
    let tr = p.trace();
    assert!((tr.re - 128.0).abs() < 1e-8 && tr.im.abs() < 1e-8);
    assert!(p.idempotence_error() < DUAL_TOLERANCE);
    assert!(p.adjoint_error() < DUAL_TOLERANCE);
    assert!(p.annihilation_error(&d) < DUAL_TOLERANCE);
}

#[test]
fn general_dual_with_zero_and_single_column() {
    let d = random_dictionary(6, 14, 3);
    let canon = canonical_dual(&d).unwrap();
    let zero = general_dual(&d, &CMatrix::zeros(14, 6)).unwrap();
    assert!(max_abs(&(zero.analysis() - canon.analysis())) < 1e-12);

    // W = w e_2^T contributes P w in column 2 of D̃* only
    let w = random_vector(14, 9);
    let mut wm = CMatrix::zeros(14, 6);
    wm.set_column(2, &w);
    let dual = general_dual(&d, &wm).unwrap();
    let p = null_space_projector(&d).unwrap();
    let diff = dual.analysis() - canon.analysis();
    let pw = p.matrix() * &w;
    for col in 0..6 {
        let expect = if col == 2 { pw.clone() } else { CVector::zeros(14) };
        assert!((diff.column(col) - expect).norm() < 1e-10);
    }
    assert!(dual.reconstruction_error(&d) < DUAL_TOLERANCE);
}

#[test]
fn optimal_dual_reduces_to_canonical_without_pg() {
    let d = random_dictionary(5, 9, 4);
    let f = random_vector(5, 5);
    let dual = optimal_dual_from_solution(&d, &f, &CVector::zeros(9)).unwrap();
    let canon = canonical_dual(&d).unwrap();
    assert!(max_abs(&(dual.analysis() - canon.analysis())) < 1e-12);
    assert!(matches!(
        optimal_dual_from_solution(&d, &CVector::zeros(5), &CVector::zeros(9)),
        Err(FrameError::ZeroSignal(_))
    ));
}

#[test]
fn optimal_dual_sparsifies_solver_output() {
    let d = build_spike_fourier_dictionary(128).unwrap();
    let phi = gaussian_sensing_matrix(32, 128, 11).unwrap();
    let truth = synthesize_sparse_signal(&d, &Sparsity::PerBlock(vec![4, 4]), 12).unwrap();
    let y = phi.apply(&truth.f);
    let res = solve(&phi, &d, &y, 0.0, &SolverConfig::default()).unwrap();
    let opt = optimal_dual_from_solution(&d, &res.f_hat, &res.p_g).unwrap();
    let canon = canonical_dual(&d).unwrap();
    assert!(opt.reconstruction_error(&d) < DUAL_TOLERANCE);
    let lhs = l1_norm(opt.coefficients(&res.f_hat).as_slice());
    let rhs = l1_norm(canon.coefficients(&res.f_hat).as_slice());
    assert!(lhs <= rhs + 1e-8, "{lhs} vs {rhs}");
}

#[test]
fn duals_reconstruct_random_signals() {
    let d = build_gabor_dictionary(16, 2, 3.0).unwrap();
    let duals = [
        canonical_dual(&d).unwrap(),
        general_dual(&d, &random_matrix(d.d(), 16, 1)).unwrap(),
        optimal_dual_from_solution(&d, &random_vector(16, 2), &d.project_null(&random_vector(d.d(), 3)).unwrap()).unwrap(),
    ];
    for dual in &duals {
        for t in 0..100 {
            let f = random_vector(16, 100 + t);
            let back = d.synthesize(&dual.coefficients(&f));
            assert!((back - &f).norm() < 1e-8 * f.norm());
        }
    }
}

#[test]
fn unitary_dft_is_unitary() {
    let f = unitary_dft(16);
    assert!(max_abs(&(f.adjoint() * &f - CMatrix::identity(16, 16))) < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn coherence_is_scale_invariant(seed in 0u64..1000, re in -5.0f64..5.0, im in -5.0f64..5.0) {
        prop_assume!(re.abs() + im.abs() > 1e-3);
        let m = random_matrix(4, 7, seed);
        let c = C64::new(re, im);
        let a = matrix_coherence(&m).unwrap();
        let b = matrix_coherence(&(m * c)).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn every_general_dual_is_a_dual(seed in 0u64..10_000, n in 2usize..6, extra in 1usize..6) {
        let d = random_dictionary(n, n + extra, seed);
        let dual = general_dual(&d, &random_matrix(n + extra, n, seed + 1)).unwrap();
        prop_assert!(dual.reconstruction_error(&d) < DUAL_TOLERANCE);
        let p = null_space_projector(&d).unwrap();
        prop_assert!(p.idempotence_error() < DUAL_TOLERANCE);
        prop_assert!(p.adjoint_error() < DUAL_TOLERANCE);
        prop_assert!(p.annihilation_error(&d) < DUAL_TOLERANCE);
        prop_assert!((p.trace().re - extra as f64).abs() < 1e-8);
    }

    #[test]
    fn optimal_dual_is_invariant_to_joint_scaling(seed in 0u64..10_000) {
        let d = random_dictionary(4, 9, seed);
        let f = random_vector(4, seed + 1);
        let pg = d.project_null(&random_vector(9, seed + 2)).unwrap();
        let a = optimal_dual_from_solution(&d, &f, &pg).unwrap();
        let b = optimal_dual_from_solution(&d, &(&f * C64::new(2.0, 0.0)), &(&pg * C64::new(2.0, 0.0))).unwrap();
        prop_assert!(max_abs(&(a.analysis() - b.analysis())) < 1e-10);
        prop_assert!(a.reconstruction_error(&d) < DUAL_TOLERANCE);
        // D̃_o* f̂ = D̄* f̂ + Pg
        let coeffs = a.coefficients(&f);
        let expect = d.canonical_coefficients(&f).unwrap() + &pg;
        prop_assert!((coeffs - expect).norm() < 1e-9 * (1.0 + pg.norm()));
    }
}
