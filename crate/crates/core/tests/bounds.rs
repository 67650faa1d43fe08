use std::f64::consts::PI;

use proptest::prelude::*;
use rdbounds::discretization::{
    build_space_time_grid, solve_parabolic, true_error_components, Analytic, ErrorOptions, Grid, Scheme,
    SpaceTimeField, TrueError,
};
use rdbounds::flux::{minimize_flux, minimize_flux_slab, patch_average_flux, AnalyticFlux, FluxField, FluxOptions};
use rdbounds::majorant::{
    majorant_general, majorant_incremental, two_sided_weights, BetaPolicy, MajorantParams, MuMode, SlabAlphas,
    SourceMode,
};
use rdbounds::minorant::{maximize_minorant, minorant_incremental, minorant_value, MinorantParams, TestField};
use rdbounds::problem::{
    embedding_constants, preset_problem, scalar_fn, vector_fn, Diffusion, ExactSolution, NormWeights, PresetId,
    ProblemSpec,
};

struct Setup {
    spec: ProblemSpec,
    grid: Grid,
    v: SpaceTimeField,
    y: FluxField,
    err: TrueError,
}

fn setup(id: PresetId, cells: &[usize], slabs: usize) -> Setup {
    let (spec, exact) = preset_problem(id).unwrap();
    setup_with(spec, exact, cells, slabs)
}

fn setup_with(spec: ProblemSpec, exact: ExactSolution, cells: &[usize], slabs: usize) -> Setup {
    let grid = build_space_time_grid(&spec, cells, slabs).unwrap();
    let v = solve_parabolic(&spec, &grid, Scheme::BackwardEuler).unwrap();
    let y = patch_average_flux(&v, &spec, 3).unwrap();
    let opts = ErrorOptions {
        space_points: 4,
        time_points: 4,
        element_wise: false,
    };
    let err = true_error_components(&v, &exact, &spec, &grid, opts).unwrap();
    Setup {
        spec,
        grid,
        v,
        y,
        err,
    }
}

fn errors(err: &TrueError, w: &NormWeights) -> Vec<f64> {
    (0..=err.n_slabs()).map(|k| err.cumulative(k).weighted(w)).collect()
}

fn rel_diff(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        a.abs()
    } else {
        ((a - b) / b).abs()
    }
}

/// u = sin(πx)sin(πy)(1+t) with A = diag(2, ½) and λ = 1.
fn anisotropic() -> (ProblemSpec, ExactSolution) {
    let (mut spec, mut exact) = preset_problem(PresetId::Ex4).unwrap();
    let s = |x: &[f64; 2]| (PI * x[0]).sin() * (PI * x[1]).sin();
    let k = 2.5 * PI * PI;
    spec.name = "anisotropic".into();
    spec.t_final = 1.0;
    spec.diffusion = Diffusion::new(|_, _| [[2.0, 0.0], [0.0, 0.5]], 0.5, 2.0, false);
    spec.reaction = scalar_fn(|_, _| 1.0);
    spec.source = scalar_fn(move |x, t| s(x) * (1.0 + (k + 1.0) * (1.0 + t)));
    spec.initial = scalar_fn(move |x, _| s(x));
    exact.id = "anisotropic".into();
    exact.u = scalar_fn(move |x, t| s(x) * (1.0 + t));
    exact.grad = vector_fn(move |x, t| {
        [
            PI * (PI * x[0]).cos() * (PI * x[1]).sin() * (1.0 + t),
            PI * (PI * x[0]).sin() * (PI * x[1]).cos() * (1.0 + t),
        ]
    });
    exact.u_t = scalar_fn(move |x, _| s(x));
    exact.div_flux = scalar_fn(move |x, t| -k * s(x) * (1.0 + t));
    (spec, exact)
}

#[test]
fn constant_residual_by_hand() {
    // v = 0, y = 0, f = 1 on (0,1)×(0,1): only the Friedrichs channel is
    // active and M̄² = α₁ C_F² ∫∫ 1 = 2/π² for α₁ = α₂ = 2.
    let (mut spec, _) = preset_problem(PresetId::Trivial).unwrap();
    spec.source = scalar_fn(|_, _| 1.0);
    let grid = build_space_time_grid(&spec, &[2], 1).unwrap();
    let v = SpaceTimeField::zeros(grid.clone());
    let y = FluxField::from_levels(grid.clone(), vec![rdbounds::flux::FluxLevel::zeros(&grid); 2]).unwrap();
    let c = embedding_constants(&spec).unwrap();
    let params = MajorantParams {
        alphas: Some(SlabAlphas::from_beta(1.0, 1.0, None)),
        beta: BetaPolicy::Fixed(1.0),
        ..MajorantParams::default()
    };
    let m = majorant_general(&v, &y, &spec, &grid, &c, &params).unwrap();
    let expected = 2.0 / (PI * PI);
    assert!(rel_diff(m.total, expected) < 1e-12, "{} vs {expected}", m.total);
    assert_eq!(m.slabs[0].alphas.a1, 2.0);
    assert_eq!(m.slabs[0].flux_term, 0.0);
    let inc = majorant_incremental(&v, &y, &spec, &c, &[1.0], 3).unwrap();
    assert!(rel_diff(inc[1], expected) < 1e-12);
}

#[test]
fn exact_data_gives_vanishing_majorant() {
    let cases: [(PresetId, &[usize]); 5] = [
        (PresetId::Ex1, &[8]),
        (PresetId::Ex2 { rho: 1.0 }, &[8]),
        (PresetId::Ex3 { sigma: Some(0.1) }, &[8]),
        (PresetId::Ex4, &[4, 4]),
        (PresetId::Ex5, &[4, 4]),
    ];
    for (id, cells) in cases {
        let (spec, exact) = preset_problem(id).unwrap();
        let grid = build_space_time_grid(&spec, cells, 3).unwrap();
        let c = embedding_constants(&spec).unwrap();
        let u = Analytic(&exact);
        let y = AnalyticFlux {
            spec: &spec,
            exact: &exact,
        };
        for mu in [MuMode::Zero, MuMode::OptimalMuHat] {
            let params = MajorantParams {
                mu,
                ..MajorantParams::default()
            };
            let m = majorant_general(&u, &y, &spec, &grid, &c, &params).unwrap();
            assert!(m.total < 1e-20, "{id}: {:e}", m.total);
        }
    }
}

#[test]
fn incremental_majorant_matches_quadrature() {
    for (id, cells) in [(PresetId::Ex1, vec![8]), (PresetId::Ex2 { rho: 10.0 }, vec![8]), (PresetId::Ex4, vec![4, 4])] {
        let s = setup(id, &cells, 6);
        let c = embedding_constants(&s.spec).unwrap();
        let betas = [0.3, 1.0, 2.0, 0.7, 5.0, 1.5];
        let inc = majorant_incremental(&s.v, &s.y, &s.spec, &c, &betas, 3).unwrap();
        let params = MajorantParams {
            beta: BetaPolicy::PerSlab(betas.to_vec()),
            source: SourceMode::Interpolated,
            ..MajorantParams::default()
        };
        let gen = majorant_general(&s.v, &s.y, &s.spec, &s.grid, &c, &params).unwrap().per_level();
        for (a, b) in inc.iter().zip(&gen) {
            assert!(rel_diff(*a, *b) < 1e-12, "{id}: {a} vs {b}");
        }
        assert!(inc.windows(2).all(|w| w[1] >= w[0]));
    }
}

#[test]
fn incremental_forms_reject_unsupported_data() {
    let (spec, exact) = anisotropic();
    let s = setup_with(spec, exact, &[3, 3], 2);
    let c = embedding_constants(&s.spec).unwrap();
    assert!(majorant_incremental(&s.v, &s.y, &s.spec, &c, &[1.0, 1.0], 3).is_err());
    let s = setup(PresetId::Ex3 { sigma: None }, &[4], 2);
    let c = embedding_constants(&s.spec).unwrap();
    assert!(majorant_incremental(&s.v, &s.y, &s.spec, &c, &[1.0, 1.0], 3).is_err());
    let s = setup(PresetId::Ex2 { rho: 1.0 }, &[4], 2);
    let c = embedding_constants(&s.spec).unwrap();
    let ts = two_sided_weights(0.1, 1.0, &c, 1.0).unwrap().with_reaction(1.0);
    let eta = TestField::zeros(s.grid.clone(), true);
    assert!(minorant_incremental(&s.v, &eta, &s.spec, &MinorantParams::new(ts.kappa)).is_err());
}

#[test]
fn incremental_minorant_matches_quadrature() {
    for lambda in [0.0, 2.0] {
        let (mut spec, exact) = preset_problem(PresetId::Ex1).unwrap();
        spec.reaction = scalar_fn(move |_, _| lambda);
        let s = setup_with(spec, exact, &[8], 5);
        let c = embedding_constants(&s.spec).unwrap();
        let mut ts = two_sided_weights(0.1, 1.0, &c, 1.0).unwrap();
        if lambda > 0.0 {
            ts = ts.with_reaction(1.0);
        }
        let params = MinorantParams {
            source: SourceMode::Interpolated,
            ..MinorantParams::new(ts.kappa)
        };
        let (eta, _) = maximize_minorant(&s.v, &s.spec, &s.grid, &params).unwrap();
        let inc = minorant_incremental(&s.v, &eta, &s.spec, &params).unwrap();
        let gen = minorant_value(&s.v, &eta, &s.spec, &params).unwrap().per_level();
        for (a, b) in inc.iter().zip(&gen).skip(1) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-3), "λ = {lambda}: {a} vs {b}");
        }
    }
}

#[test]
fn anisotropic_diffusion_keeps_both_bounds() {
    let (spec, exact) = anisotropic();
    let s = setup_with(spec, exact, &[6, 6], 4);
    let c = embedding_constants(&s.spec).unwrap();
    let params = MajorantParams::default();
    let y = minimize_flux(&s.v, &s.y, &s.spec, &c, &params, &FluxOptions::default()).unwrap();
    let maj = majorant_general(&s.v, &y, &s.spec, &s.grid, &c, &params).unwrap().per_level();
    let e = errors(&s.err, &params.norm_weights());
    for (k, (m, ek)) in maj.iter().zip(&e).enumerate().skip(1) {
        assert!(m >= ek, "level {k}: {m} < {ek}");
    }
    let ts = two_sided_weights(0.1, 1.0, &c, s.spec.diffusion.nu1).unwrap().with_reaction(1.0);
    let mp = MinorantParams::new(ts.kappa);
    let (_, mb) = maximize_minorant(&s.v, &s.spec, &s.grid, &mp).unwrap();
    let e = errors(&s.err, &mp.norm_weights());
    for (k, &ek) in e.iter().enumerate().skip(1) {
        assert!(mb.cumulative(k) <= ek, "level {k}: {} > {ek}", mb.cumulative(k));
        assert!(mb.cumulative(k) > 0.5 * ek);
    }
}

fn perturbed(y: &FluxField, noise: &[f64], scale: f64) -> FluxField {
    let mut out = y.clone();
    let mut it = noise.iter().cycle();
    for (a, b) in out.slabs.iter_mut() {
        for n in a.nodal.iter_mut().chain(b.nodal.iter_mut()) {
            n[0] += scale * it.next().unwrap();
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn majorant_bounds_error_for_any_flux(
        noise in prop::collection::vec(-1.0f64..1.0, 8),
        scale in 0.0f64..5.0,
        beta in 0.05f64..20.0,
        delta in 0.2f64..1.8,
        gamma in 0.6f64..4.0,
        mu in 0usize..3,
    ) {
        let s = setup(PresetId::Ex2 { rho: 1.0 }, &[6], 3);
        let c = embedding_constants(&s.spec).unwrap();
        let y = perturbed(&s.y, &noise, scale);
        let params = MajorantParams {
            delta,
            gamma,
            beta: BetaPolicy::Fixed(beta),
            mu: [MuMode::Zero, MuMode::One, MuMode::OptimalMuHat][mu].clone(),
            ..MajorantParams::default()
        };
        let maj = majorant_general(&s.v, &y, &s.spec, &s.grid, &c, &params).unwrap().per_level();
        let e = errors(&s.err, &params.norm_weights());
        for k in 0..=3 {
            prop_assert!(maj[k] >= e[k] * (1.0 - 1e-9), "level {}: {} < {}", k, maj[k], e[k]);
        }
    }

    #[test]
    fn minorant_never_exceeds_error(
        coeffs in prop::collection::vec(-2.0f64..2.0, 5 * 9),
        kappa in 0.01f64..0.9,
        bubbles in any::<bool>(),
    ) {
        let s = setup(PresetId::Ex1, &[6], 4);
        let c = embedding_constants(&s.spec).unwrap();
        let ts = two_sided_weights(kappa, 1.0, &c, 1.0).unwrap();
        let params = MinorantParams { bubbles, ..MinorantParams::new(ts.kappa) };
        let n = if bubbles { 7 + 6 } else { 7 };
        let mut it = coeffs.iter().cycle();
        let mut take = || -> Vec<f64> {
            let mut l: Vec<f64> = (0..n).map(|_| *it.next().unwrap()).collect();
            l[0] = 0.0;
            l[6] = 0.0;
            l
        };
        let levels = (0..5).map(|_| take()).collect();
        let alpha = (0..4).map(|_| take()).collect();
        let eta = TestField::new(s.grid.clone(), bubbles, levels, alpha).unwrap();
        let m = minorant_value(&s.v, &eta, &s.spec, &params).unwrap();
        let e = errors(&s.err, &params.norm_weights());
        for (k, &ek) in e.iter().enumerate().skip(1) {
            prop_assert!(m.cumulative(k) <= ek * (1.0 + 1e-9), "level {}: {} > {}", k, m.cumulative(k), ek);
        }
    }

    #[test]
    fn optimal_mu_beats_any_constant(c0 in 0.0f64..1.0, beta in 0.1f64..10.0, rho in 0.01f64..100.0) {
        let s = setup(PresetId::Ex2 { rho }, &[6], 2);
        let c = embedding_constants(&s.spec).unwrap();
        let at = |mu: MuMode| {
            let p = MajorantParams { beta: BetaPolicy::Fixed(beta), mu, ..MajorantParams::default() };
            majorant_general(&s.v, &s.y, &s.spec, &s.grid, &c, &p).unwrap().total
        };
        let hat = at(MuMode::OptimalMuHat);
        for other in [at(MuMode::Zero), at(MuMode::One), at(MuMode::Field(scalar_fn(move |_, _| c0)))] {
            prop_assert!(hat <= other * (1.0 + 1e-12), "{} > {}", hat, other);
        }
    }

    #[test]
    fn flux_minimization_never_worsens(noise in prop::collection::vec(-1.0f64..1.0, 6), scale in 0.0f64..3.0) {
        let s = setup(PresetId::Ex1, &[6], 2);
        let c = embedding_constants(&s.spec).unwrap();
        let start = perturbed(&s.y, &noise, scale);
        let params = MajorantParams::default();
        for k in 0..2 {
            let r = minimize_flux_slab(&s.v, &start.slabs[k], &s.spec, &c, &params, k, &FluxOptions::default()).unwrap();
            prop_assert!(r.after.total <= r.before.total);
        }
    }
}
