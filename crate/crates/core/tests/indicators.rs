use std::f64::consts::PI;

use proptest::prelude::*;
use rdbounds::discretization::{build_space_time_grid, solve_parabolic, Scheme, SpaceTimeField};
use rdbounds::flux::{patch_average_flux, FluxField, FluxLevel};
use rdbounds::indicators::{
    bulk_mark, element_indicator, ranked_histogram, spearman, strong_measure_elements, weak_measure, IndicatorField,
};
use rdbounds::majorant::{majorant_general, MajorantParams};
use rdbounds::problem::{embedding_constants, preset_problem, scalar_fn, Diffusion, PresetId, ProblemSpec};

/// Smallest number of entries whose sum reaches `goal`, by enumeration.
fn min_cover(values: &[f64], goal: f64) -> usize {
    let n = values.len();
    (0u32..1 << n)
        .filter(|m| (0..n).filter(|i| m & (1 << i) != 0).map(|i| values[i]).sum::<f64>() >= goal)
        .map(|m| m.count_ones() as usize)
        .min()
        .unwrap()
}

fn marked_sum(values: &[f64], marked: &[bool]) -> f64 {
    values.iter().zip(marked).filter(|(_, &m)| m).map(|(v, _)| v).sum()
}

#[test]
fn bulk_marking_is_minimal_on_small_example() {
    let values = [4.0, 3.0, 2.0, 1.0];
    for (theta, count) in [(0.1, 1), (0.4, 1), (0.5, 2), (0.7, 2), (0.75, 3), (0.9, 3), (0.95, 4)] {
        let m = bulk_mark(&values, theta).unwrap();
        assert_eq!(m.count(), count, "θ = {theta}");
        assert_eq!(min_cover(&values, theta * 10.0), count);
    }
    assert!(bulk_mark(&values, 0.0).is_err());
    assert!(bulk_mark(&values, 1.0).is_err());
}

#[test]
fn size_mismatch_is_reported() {
    let a = bulk_mark(&[1.0, 2.0], 0.5).unwrap();
    let b = bulk_mark(&[1.0, 2.0, 3.0], 0.5).unwrap();
    assert!(weak_measure(&a, &b).is_err());
    assert!(strong_measure_elements(&[1.0], &[1.0, 2.0]).is_err());
    assert!(ranked_histogram(&[1.0], &[]).is_err());
    assert!(spearman(&[1.0, 1.0], &[1.0, 2.0]).is_err());
    assert!(IndicatorField::new(0, vec![1.0, -1e-3]).is_err());
}

#[test]
fn spearman_handles_ties_and_reversal() {
    assert!((spearman(&[1.0, 2.0, 3.0, 4.0], &[8.0, 6.0, 4.0, 2.0]).unwrap() + 1.0).abs() < 1e-15);
    // Ranks (1.5, 1.5, 3) against (1, 2, 3).
    let r = spearman(&[5.0, 5.0, 7.0], &[1.0, 2.0, 3.0]).unwrap();
    assert!((r - 3f64.sqrt() / 2.0).abs() < 1e-15);
}

fn indicator_sum_matches_residual(spec: &ProblemSpec, cells: &[usize], slabs: usize) {
    let grid = build_space_time_grid(spec, cells, slabs).unwrap();
    let v = solve_parabolic(spec, &grid, Scheme::BackwardEuler).unwrap();
    let y = patch_average_flux(&v, spec, 3).unwrap();
    let c = embedding_constants(spec).unwrap();
    let m = majorant_general(&v, &y, spec, &grid, &c, &MajorantParams::default()).unwrap();
    for k in 0..slabs {
        let ind = element_indicator(&v, &y, spec, k, 3).unwrap();
        assert_eq!(ind.values.len(), grid.mesh.n_elements());
        let d = m.slabs[k].flux_residual_sq;
        assert!((ind.total - d).abs() <= 1e-12 * d, "slab {k}: {} vs {d}", ind.total);
    }
}

#[test]
fn indicators_sum_to_flux_residual() {
    let (spec, _) = preset_problem(PresetId::Ex1).unwrap();
    indicator_sum_matches_residual(&spec, &[10], 3);
    let (spec, _) = preset_problem(PresetId::Ex4).unwrap();
    indicator_sum_matches_residual(&spec, &[5, 5], 2);
}

#[test]
fn indicators_sum_to_flux_residual_with_anisotropic_diffusion() {
    let (mut spec, _) = preset_problem(PresetId::Ex4).unwrap();
    spec.t_final = 1.0;
    spec.diffusion = Diffusion::new(|_, _| [[2.0, 0.3], [0.3, 0.5]], 0.4, 2.1, false);
    spec.source = scalar_fn(|x, t| (PI * x[0]).sin() * (PI * x[1]).sin() * (1.0 + t));
    indicator_sum_matches_residual(&spec, &[4, 4], 2);
}

#[test]
fn matching_fields_give_zero_indicators() {
    let (spec, _) = preset_problem(PresetId::Ex1).unwrap();
    let grid = build_space_time_grid(&spec, &[6], 2).unwrap();
    let v = SpaceTimeField::zeros(grid.clone());
    let y = FluxField::from_levels(grid.clone(), vec![FluxLevel::zeros(&grid); 3]).unwrap();
    let ind = element_indicator(&v, &y, &spec, 1, 3).unwrap();
    assert!(ind.values.iter().all(|&x| x == 0.0));
    assert_eq!(bulk_mark(&ind.values, 0.5).unwrap().count(), 0);
    assert!(element_indicator(&v, &y, &spec, 2, 3).is_err());
}

proptest! {
    #[test]
    fn bulk_marking_reaches_bulk_with_fewest_elements(
        values in prop::collection::vec(0.0f64..10.0, 1..11),
        theta in 0.01f64..0.99,
    ) {
        let total: f64 = values.iter().sum();
        prop_assume!(total > 0.0);
        let m = bulk_mark(&values, theta).unwrap();
        prop_assert!(marked_sum(&values, &m.marked) >= theta * total);
        prop_assert_eq!(m.count(), min_cover(&values, theta * total));
        // Every marked value is at least every unmarked one.
        let lo = values.iter().zip(&m.marked).filter(|(_, &k)| k).map(|(v, _)| *v).fold(f64::INFINITY, f64::min);
        let hi = values.iter().zip(&m.marked).filter(|(_, &k)| !k).map(|(v, _)| *v).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(lo >= hi);
    }

    #[test]
    fn weak_measure_is_a_symmetric_distance(
        a in prop::collection::vec(0.0f64..1.0, 1..30),
        noise in prop::collection::vec(0.0f64..1.0, 30),
        theta in 0.05f64..0.95,
    ) {
        let b: Vec<f64> = a.iter().zip(&noise).map(|(x, n)| x * n).collect();
        prop_assume!(b.iter().sum::<f64>() > 0.0);
        let (ma, mb) = (bulk_mark(&a, theta).unwrap(), bulk_mark(&b, theta).unwrap());
        let d = weak_measure(&ma, &mb).unwrap();
        prop_assert_eq!(d, weak_measure(&mb, &ma).unwrap());
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert_eq!(weak_measure(&ma, &ma).unwrap(), 0.0);
    }

    #[test]
    fn ranked_histogram_is_a_permutation(err in prop::collection::vec(0.0f64..1.0, 2..40)) {
        let ind: Vec<f64> = err.iter().map(|e| 2.0 * e + 1.0).collect();
        let h = ranked_histogram(&err, &ind).unwrap();
        let mut seen = h.order.clone();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..err.len()).collect::<Vec<_>>());
        prop_assert!(h.err_sorted.windows(2).all(|w| w[0] >= w[1]));
        if err.iter().any(|&e| e != err[0]) {
            prop_assert!((spearman(&err, &ind).unwrap() - 1.0).abs() < 1e-12);
        }
    }
}
