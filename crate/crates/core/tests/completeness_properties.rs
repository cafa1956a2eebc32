mod common;

use std::f64::consts::PI;

use common::*;
use cvic::completeness::*;
use cvic::fock::{hermitian_to_real_vector, quadrature_amplitudes, QuadraturePoint};
use cvic::povm::{build_binned_quadrature_povm, BinLayout};
use cvic::quadrature::gauss_hermite;
use cvic::SupportSet;
use nalgebra::DVector;
use proptest::prelude::*;

fn contiguous(d: usize) -> SupportSet {
    SupportSet::contiguous(d).unwrap()
}

/// Rows `v(|x_θ⟩⟨x_θ|)` built straight from the amplitudes, ranked by
/// elimination instead of the SVD.
fn oracle_rank(support: &SupportSet, phases: &[f64], n_nodes: usize) -> usize {
    let nodes = gauss_hermite(n_nodes).nodes;
    let mut rows = Vec::new();
    for &theta in phases {
        for &x in &nodes {
            let amps = quadrature_amplitudes(support.indices(), QuadraturePoint::new(x, theta));
            let v = DVector::from_vec(amps);
            rows.push(hermitian_to_real_vector(&(&v * v.adjoint())).unwrap());
        }
    }
    elimination_rank(&rows, 1e-9)
}

#[test]
fn svd_rank_matches_elimination_oracle() {
    for d in 1..=5 {
        for m in 1..=d + 1 {
            let s = contiguous(d);
            let phases = default_phases(&s, m);
            let expect = oracle_rank(&s, &phases, 2 * d + 2);
            assert_eq!(rank_for(&s, m).numerical_rank, expect, "d={d} m={m}");
            assert_eq!(expect, predicted_rank(d, m));
        }
    }
    let sparse = SupportSet::new(vec![0, 4, 8]).unwrap();
    for m in 1..=3 {
        let phases = default_phases(&sparse, m);
        assert_eq!(rank_for(&sparse, m).numerical_rank, oracle_rank(&sparse, &phases, 18));
    }
}

#[test]
fn rank_is_monotone_and_saturates() {
    for d in 1..=7 {
        let s = contiguous(d);
        let ranks: Vec<usize> = (1..=d + 3).map(|m| rank_for(&s, m).numerical_rank).collect();
        assert!(ranks.windows(2).all(|w| w[1] >= w[0]), "d={d}: {ranks:?}");
        assert!(ranks.iter().all(|&r| r <= d * d));
        let first_full = ranks.iter().position(|&r| r == d * d).unwrap();
        assert!(ranks[first_full..].iter().all(|&r| r == d * d));
    }
}

#[test]
fn extra_nodes_never_change_rank() {
    for d in 2..=6 {
        let s = contiguous(d);
        for m in 1..=d {
            let mut spec = MeasurementSpec::continuous(s.clone(), default_phases(&s, m)).unwrap();
            let base = numerical_rank(&design_matrix(&spec).unwrap(), None).unwrap().numerical_rank;
            for extra in [1, 5, 17] {
                spec.x_nodes_per_phase = default_x_nodes(&s) + extra;
                let r = numerical_rank(&design_matrix(&spec).unwrap(), None).unwrap();
                assert_eq!(r.numerical_rank, base, "d={d} m={m} extra={extra}");
            }
        }
    }
}

#[test]
fn too_few_nodes_rejected() {
    let s = contiguous(4);
    let mut spec = MeasurementSpec::continuous(s, vec![0.0, 1.0]).unwrap();
    spec.x_nodes_per_phase = 6;
    assert!(spec.validate().is_err());
}

#[test]
fn duplicate_phases_rejected() {
    let s = contiguous(3);
    assert!(rank_for_phases(&s, &[0.0, 0.5, 0.5], None).is_err());
    assert!(rank_for_phases(&s, &[0.2, 0.2 + PI], None).is_err());
}

#[test]
fn binned_span_is_capped() {
    for d in 1..=6 {
        for n_bins in 1..=2 * d + 3 {
            let layout = BinLayout::new(cvic::povm::default_x_max(d), n_bins, false).unwrap();
            let set = build_binned_quadrature_povm(0.3, &layout, d).unwrap();
            let r = povm_span_rank(&[set]).unwrap().numerical_rank;
            assert!(r <= n_bins.min(2 * d - 1), "d={d} bins={n_bins}: {r}");
        }
    }
}

#[test]
fn rank_report_json_round_trip() {
    let r = rank_for(&contiguous(3), 2);
    let text = serde_json::to_string(&r).unwrap();
    let back: RankReport = serde_json::from_str(&text).unwrap();
    assert_eq!(back, r);
    let full = rank_for(&contiguous(2), 2);
    assert!(full.gap.is_infinite());
    let text = serde_json::to_string(&full).unwrap();
    assert!(text.contains("\"gap\":null"));
    assert_eq!(serde_json::from_str::<RankReport>(&text).unwrap(), full);
}

#[test]
fn recursion_identity_exact() {
    for d in 1..=50u64 {
        for m in 1..=d {
            assert_eq!(incremental_rank_sum(d, m), m * (2 * d - m));
        }
    }
}

proptest! {
    #[test]
    fn phase_offset_leaves_rank_unchanged(d in 1usize..7, m in 1usize..8, phi in 0.0f64..PI) {
        let s = contiguous(d);
        let shifted: Vec<f64> = default_phases(&s, m).iter().map(|t| t + phi).collect();
        let r = rank_for_phases(&s, &shifted, None).unwrap();
        prop_assert_eq!(r.numerical_rank, predicted_rank(d, m));
    }

    #[test]
    fn singular_values_descend_and_bound_rank(d in 1usize..6, m in 1usize..7) {
        let r = rank_for(&contiguous(d), m);
        prop_assert!(r.numerical_rank <= d * d);
        prop_assert!(r.singular_values.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(r.singular_values.iter().all(|&s| s >= 0.0));
    }
}
