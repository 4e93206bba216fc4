mod common;

use std::sync::Arc;

use common::*;
use pmlab_core::geometry::Geometry;
use pmlab_core::nonlinearity::{regularize, Nonlinearity, Side};
use pmlab_core::solver::*;

const T0: f64 = 0.5;

fn geometry() -> Geometry {
    Geometry::new(&Nonlinearity::log_model(), T0).unwrap()
}

#[test]
fn manufactured_spatial_order() {
    let ns = [16, 32, 64];
    let errs: Vec<f64> = ns.iter().map(|&n| mms_error(n, 2e-5)).collect();
    let hs: Vec<f64> = ns.iter().map(|&n| 4.0 / n as f64).collect();
    let p = fitted_order(&hs, &errs);
    assert!(p >= 1.9, "spatial order {p}, errors {errs:?}");
}

#[test]
fn manufactured_temporal_order() {
    let dts = [0.02, 0.01, 0.005];
    let errs: Vec<f64> = dts.iter().map(|&dt| mms_error(400, dt)).collect();
    let p = fitted_order(&dts, &errs);
    assert!(p >= 0.9, "temporal order {p}, errors {errs:?}");
}

#[test]
fn affine_solution_is_reproduced_to_rounding() {
    let pot = regularize(&Nonlinearity::log_model(), 0.05, Side::Forward).unwrap();
    let exact = |r: f64, t: f64| 0.5 * r + 0.01 * t;
    let source = |r: f64, _t: f64| 0.01 - log_d1(0.5) / r;
    let spec = ProblemSpec::fixed_interval(
        pot,
        (1.0, 5.0),
        (0.5, 0.5),
        (0.0, 0.3),
        InitialDatum::linear(Region::Q4, 0.5),
        Some(Arc::new(source)),
    )
    .unwrap();
    let field = solve(&spec, &Grid::new(40, 0.01)).unwrap();
    for lvl in &field.levels {
        for i in 0..=field.n {
            assert!((lvl.u[i] - exact(lvl.r[i], lvl.t)).abs() < 1e-12);
        }
    }
    // The companion equations ignore the forcing, so with v = 0.5 constant
    // the v residual is exactly the unbalanced phi'(v) / r^2 at the first
    // checked node r = 1 + 3 dx.
    let comp = derived_companions(&field).unwrap();
    let expected = log_d1(0.5) / 1.3_f64.powi(2);
    assert!((comp.v_max - expected).abs() < 1e-9, "v residual {}", comp.v_max);
}

#[test]
fn q4_constant_datum_is_an_equilibrium() {
    let nl = Nonlinearity::log_model();
    let spec = ProblemSpec::q4(&nl, 0.05, T0, 2.0 * T0, InitialDatum::constant(Region::Q4, 0.7)).unwrap();
    let field = solve(&spec, &Grid::for_t0(64, T0)).unwrap();
    for lvl in &field.levels {
        assert!(lvl.u.iter().all(|&u| (u - 0.7).abs() < 1e-14));
    }
    let comp = derived_companions(&field).unwrap();
    assert!(comp.v_max < 1e-12 && comp.w_max < 1e-12);
}

#[test]
fn transform_maps_endpoints() {
    let g = geometry();
    let u0 = build_u0(Region::Q1, &g.b, ShapeParams::default()).unwrap();
    let q1 = ProblemSpec::q1(&g, 0.05, u0).unwrap();
    let tr = transform(&q1);
    assert!((tr.position(1.0, 0.0) - 2.0).abs() < 1e-15);
    let eps = 0.05;
    let t = ProblemSpec::t_region(&g, eps).unwrap();
    let len = transform(&t).length(eps);
    assert!((len - 2.0 * (eps / T0).sqrt()).abs() < 1e-12);
    let q4 = ProblemSpec::q4(&Nonlinearity::log_model(), eps, T0, 1.0, InitialDatum::constant(Region::Q4, 0.0)).unwrap();
    assert_eq!(transform(&q4).grid_velocity(0.7, 0.6), 0.0);
}

#[test]
fn q1_obeys_the_discrete_maximum_principle() {
    let g = geometry();
    let eps = 0.05;
    let u0 = build_u0(Region::Q1, &g.b, ShapeParams::default()).unwrap();
    let spec = ProblemSpec::q1(&g, eps, u0).unwrap();
    let n = 200;
    let field = solve(&spec, &Grid::for_t0(n, T0)).unwrap();
    let tol = 10.0 * (1.0 / n as f64).powi(2);
    for lvl in &field.levels {
        for &v in &lvl.ur {
            assert!(v >= -tol && v <= 1.0 - eps + tol, "u_r = {v} at t = {}", lvl.t);
        }
        assert!((lvl.ur[n] - (1.0 - eps)).abs() < 1e-14);
    }
    assert!(field.last().t < T0);
    assert!(field.stats.max_step_residual <= field.stats.tol_res);
}

#[test]
fn graded_steps_respect_the_square_root_law() {
    let g = geometry();
    let u0 = build_u0(Region::Q1, &g.b, ShapeParams::default()).unwrap();
    let spec = ProblemSpec::q1(&g, 0.05, u0).unwrap();
    let grid = Grid::for_t0(100, T0);
    let field = solve(&spec, &grid).unwrap();
    for w in field.levels.windows(2) {
        let dt = w[1].t - w[0].t;
        let bound = grid.dt_max * (1.0 - w[0].t / T0).max(0.0).sqrt();
        assert!(dt <= bound.max(grid.dt_min) * (1.0 + 1e-12), "dt {dt} > {bound}");
    }
}

#[test]
fn t_region_starts_from_the_linear_profile() {
    let g = geometry();
    let eps = 0.05;
    let spec = ProblemSpec::t_region(&g, eps).unwrap();
    let field = solve(&spec, &Grid::for_t0(100, T0)).unwrap();
    let first = field.first();
    assert_eq!(first.t, eps);
    for i in 0..=field.n {
        assert!((first.u[i] - (1.0 + eps) * first.r[i]).abs() < 1e-14);
    }
    for lvl in &field.levels {
        for &v in &lvl.ur {
            assert!(v >= 1.0 + eps - 1e-6 && v <= 2.0 + 0.5 * lvl.t + 1e-6);
        }
    }
}

#[test]
fn solves_are_deterministic_and_csv_round_trips() {
    let g = geometry();
    let u0 = build_u0(Region::Q3, &g.c, ShapeParams::default()).unwrap();
    let spec = ProblemSpec::q3(&g, 0.1, u0).unwrap();
    let grid = Grid::for_t0(60, T0);
    let (a, b) = (solve(&spec, &grid).unwrap(), solve(&spec, &grid).unwrap());
    let (mut ba, mut bb) = (Vec::new(), Vec::new());
    a.write_csv(&mut ba).unwrap();
    b.write_csv(&mut bb).unwrap();
    assert_eq!(ba, bb);
    let text = String::from_utf8(ba.clone()).unwrap();
    assert!(text.starts_with("region,eps,t,r,u,ur,urr,ut,residual\n"));
    let rows = read_field_csv(ba.as_slice()).unwrap();
    let kept = a.thinned_indices(MAX_EXPORT_LEVELS);
    assert_eq!(rows.len(), kept.len() * (a.n + 1));
    for (row, (k, i)) in rows.iter().zip(kept.iter().flat_map(|&k| (0..=a.n).map(move |i| (k, i)))) {
        let lvl = &a.levels[k];
        assert_eq!((row.t, row.r, row.u, row.ur), (lvl.t, lvl.r[i], lvl.u[i], lvl.ur[i]));
    }
}

#[test]
fn too_few_levels_is_a_usage_error() {
    let g = geometry();
    let spec = ProblemSpec::t_region(&g, 0.05).unwrap();
    let mut grid = Grid::for_t0(10, T0);
    grid.n = 2;
    assert!(matches!(solve(&spec, &grid), Err(pmlab_core::Error::Argument(_))));
}


proptest::proptest! {
    #![proptest_config(proptest::prelude::ProptestConfig::with_cases(12))]

    #[test]
    fn moving_regions_keep_their_slope_bounds(
        eps in 0.02..0.2f64,
        c0 in -0.5..0.5f64,
        c1 in -0.5..0.5f64,
    ) {
        let g = geometry();
        let shape = ShapeParams { c0, c1 };
        let n = 100;
        let tol = 10.0 * (1.0 / n as f64).powi(2);
        let grid = Grid::for_t0(n, T0);
        for (region, bc) in [(Region::Q1, &g.b), (Region::Q3, &g.c)] {
            let Ok(u0) = build_u0(region, bc, shape) else { continue };
            let spec = match region {
                Region::Q1 => ProblemSpec::q1(&g, eps, u0),
                _ => ProblemSpec::q3(&g, eps, u0),
            }
            .unwrap();
            let field = solve(&spec, &grid).unwrap();
            for lvl in &field.levels {
                for &v in &lvl.ur {
                    proptest::prop_assert!(v.abs() <= 1.0 - eps + tol, "{region:?} u_r = {v} at t = {}", lvl.t);
                    if region == Region::Q1 {
                        proptest::prop_assert!(v >= -tol);
                    }
                }
            }
        }
        let t = solve(&ProblemSpec::t_region(&g, eps).unwrap(), &grid).unwrap();
        for lvl in &t.levels {
            for &v in &lvl.ur {
                proptest::prop_assert!(v >= 1.0 + eps - tol && v <= 2.0 + 0.5 * lvl.t + tol, "T u_r = {v}");
            }
        }
    }

    #[test]
    fn q4_preserves_subcritical_slopes(amp in -0.99..0.99f64, eps in 0.02..0.2f64) {
        let k = std::f64::consts::FRAC_PI_4;
        let a = amp / k;
        let u0 = InitialDatum::from_fn(Region::Q4, move |r| {
            let (s, c) = (k * (r - 1.0)).sin_cos();
            [a * c, -a * k * s, -a * k * k * c, a * k.powi(3) * s]
        });
        let spec = ProblemSpec::q4(&Nonlinearity::log_model(), eps, T0, 2.0 * T0, u0).unwrap();
        let field = solve(&spec, &Grid::for_t0(64, T0)).unwrap();
        let start = field.first().ur.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for lvl in &field.levels {
            let peak = lvl.ur.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            proptest::prop_assert!(peak < 1.0 && peak <= start + 1e-12, "max |u_r| = {peak} at t = {}", lvl.t);
        }
    }
}
