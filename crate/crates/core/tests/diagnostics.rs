use optdual::diagnostics::{
    bound_rhs, check_sufficient_condition, decay_profile, delta_from_2s, relative_error, s_term_tail, scan_sufficient_condition, CoefficientSource,
};
use optdual::C64;
use proptest::prelude::*;

fn cv(v: &[f64]) -> Vec<C64> {
    v.iter().map(|&r| C64::new(r, 0.0)).collect()
}

/// Smallest ℓ1 mass left outside any s-subset, by enumeration.
fn tail_by_subsets(v: &[C64], s: usize) -> f64 {
    let n = v.len();
    let total: f64 = v.iter().map(|z| z.norm()).sum();
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != s {
            continue;
        }
        let kept: f64 = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| v[i].norm()).sum();
        best = best.min(total - kept);
    }
    best
}

#[test]
fn tail_two_of_three() {
    let v = cv(&[3.0, 1.0, -2.0]);
    assert_eq!(tail_by_subsets(&v, 2), 1.0);
    assert_eq!(s_term_tail(&v, 2).unwrap(), 1.0);
    assert_eq!(s_term_tail(&v, 1).unwrap(), 3.0);
    assert_eq!(s_term_tail(&v, 3).unwrap(), 0.0);
    assert!(s_term_tail(&v, 4).is_err());
}

#[test]
fn relative_error_examples() {
    let t = cv(&[1.0, -2.0, 0.5]);
    assert_eq!(relative_error(&t, &t).unwrap(), 0.0);
    assert_eq!(relative_error(&cv(&[0.0; 3]), &t).unwrap(), 1.0);
    let doubled: Vec<C64> = t.iter().map(|z| z * 2.0).collect();
    assert!((relative_error(&doubled, &t).unwrap() - 1.0).abs() < 1e-15);
    assert!(relative_error(&t, &cv(&[0.0; 3])).is_err());
}

#[test]
fn bound_examples() {
    assert_eq!(bound_rhs(0.0, &cv(&[0.0, 5.0, 0.0, -1.0]), 2, 1.0, 1.0).unwrap().rhs, 0.0);
    assert_eq!(bound_rhs(1.0, &cv(&[4.0]), 1, 2.0, 1.0).unwrap().rhs, 2.0);
    assert!(bound_rhs(0.0, &cv(&[1.0]), 0, 1.0, 1.0).is_err());
}

#[test]
fn condition_examples() {
    // ρ B B̃ = 1 leaves a negative right-hand side
    let r = check_sufficient_condition(8, 4, 8, 1.0, 1.0, 0.0, 0.0).unwrap();
    assert!(!r.satisfied);
    assert!((r.margin + 1.0).abs() < 1e-15);
    let r = check_sufficient_condition(2, 4, 16, 1.0, 1.0, 0.0, 0.0).unwrap();
    assert!(r.satisfied);
    assert!(check_sufficient_condition(2, 4, 4, 1.0, 1.0, 0.0, 0.0).is_err());
    assert!(check_sufficient_condition(2, 4, 17, 1.0, 1.0, 0.0, 0.0).is_err());
}

#[test]
fn parseval_scan_admits_small_constants() {
    for s in [1, 4, 7, 16] {
        let ok = scan_sufficient_condition(s, 1.0, 1.0, 8 * s, delta_from_2s(0.1, s)).unwrap();
        assert!(ok.iter().any(|r| r.satisfied), "s = {s}");
        let none = scan_sufficient_condition(s, 1.0, 1.0, 8 * s, delta_from_2s(0.5, s)).unwrap();
        assert!(none.iter().all(|r| !r.satisfied), "s = {s}");
    }
}

#[test]
fn decay_examples() {
    let p = decay_profile(&cv(&[0.0; 5]), 5, CoefficientSource::Other).unwrap();
    assert_eq!(p.magnitudes, vec![0.0; 5]);
    let p = decay_profile(&cv(&[1.0, 2.0, 3.0]), 2, CoefficientSource::CanonicalDual).unwrap();
    assert_eq!(p.magnitudes, vec![3.0, 2.0]);
    assert!(decay_profile(&cv(&[1.0]), 0, CoefficientSource::Other).is_err());
    assert!(decay_profile(&cv(&[1.0]), 2, CoefficientSource::Other).is_err());
}

#[test]
fn reports_serialize() {
    let b = bound_rhs(0.5, &cv(&[1.0, 2.0]), 1, 1.0, 1.0).unwrap().with_measured(0.25);
    let json = serde_json::to_string(&b).unwrap();
    assert!(json.contains("\"lhs\":0.25"));
    let p = decay_profile(&cv(&[1.0, 2.0]), 2, CoefficientSource::OptimalDual).unwrap();
    assert!(serde_json::to_string(&p).unwrap().contains("optimal_dual"));
}

fn complex_vec(max_len: usize) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0).prop_map(|(a, b)| C64::new(a, b)), 1..max_len)
}

proptest! {
    #[test]
    fn tail_matches_subset_enumeration(v in complex_vec(10), s in 0usize..10) {
        let s = s.min(v.len());
        prop_assert!((s_term_tail(&v, s).unwrap() - tail_by_subsets(&v, s)).abs() < 1e-9);
    }

    #[test]
    fn tail_is_non_increasing(v in complex_vec(30)) {
        let l1: f64 = v.iter().map(|z| z.norm()).sum();
        prop_assert!((s_term_tail(&v, 0).unwrap() - l1).abs() < 1e-12);
        for s in 1..=v.len() {
            prop_assert!(s_term_tail(&v, s).unwrap() <= s_term_tail(&v, s - 1).unwrap() + 1e-12);
        }
    }

    #[test]
    fn profile_prefixes_agree(v in complex_vec(30), k in 1usize..30) {
        let k = k.min(v.len());
        let full = decay_profile(&v, k, CoefficientSource::Other).unwrap();
        prop_assert!(full.magnitudes.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(full.magnitudes.iter().all(|&m| m >= 0.0));
        for j in 1..=k {
            let short = decay_profile(&v, j, CoefficientSource::Other).unwrap();
            prop_assert_eq!(&full.magnitudes[..j], &short.magnitudes[..]);
        }
    }

    #[test]
    fn bound_is_linear(v in complex_vec(12), s in 1usize..12, c0 in 0.0f64..3.0, c1 in 0.0f64..3.0) {
        let s = s.min(v.len());
        let tail = s_term_tail(&v, s).unwrap();
        for eps in [0.0, 0.7] {
            for scale in [1.0, 2.5] {
                let scaled: Vec<C64> = v.iter().map(|z| z * scale).collect();
                let r = bound_rhs(eps, &scaled, s, c0, c1).unwrap();
                let expect = c0 * eps + c1 * scale * tail / (s as f64).sqrt();
                prop_assert!((r.rhs - expect).abs() < 1e-9 * (1.0 + expect));
            }
        }
    }

    #[test]
    fn larger_deltas_never_help(
        s in 1usize..10, a in 1usize..10, gap in 1usize..30,
        bb in 0.1f64..2.0, d1 in 0.0f64..1.0, d2 in 0.0f64..1.0, up1 in 0.0f64..0.5, up2 in 0.0f64..0.5,
    ) {
        let b = a + 1 + gap % (3 * a);
        let base = check_sufficient_condition(s, a, b, bb, 1.0, d1, d2).unwrap();
        let worse = check_sufficient_condition(s, a, b, bb, 1.0, d1 + up1, d2 + up2).unwrap();
        prop_assert!(base.satisfied || !worse.satisfied);
        prop_assert!(worse.margin <= base.margin + 1e-15);
    }
}
