use std::sync::OnceLock;

use pmlab_core::assembly::*;
use pmlab_core::nonlinearity::{compute_constants, Nonlinearity};
use pmlab_core::solver::{read_field_csv, Region, ShapeParams};
use pmlab_core::verification::tol_disc;
use pmlab_core::Error;

const T0: f64 = 0.5;

fn nl() -> Nonlinearity {
    Nonlinearity::log_model()
}

fn gamma2() -> f64 {
    static G2: OnceLock<f64> = OnceLock::new();
    *G2.get_or_init(|| compute_constants(&nl(), 4000).unwrap().gamma2)
}

fn raw(eps: f64, n: usize) -> (pmlab_core::geometry::Geometry, RegionalFields) {
    run_suite(&nl(), &SuiteConfig::new(T0, eps, n)).unwrap()
}

fn glued(eps: f64, n: usize) -> GluedSolution {
    let (g, f) = raw(eps, n);
    glue(f, &g).unwrap()
}

/// Shared eps = 0.05, N = 400 solution.
fn base() -> &'static GluedSolution {
    static BASE: OnceLock<GluedSolution> = OnceLock::new();
    BASE.get_or_init(|| glued(0.05, 400))
}

#[test]
fn q2_is_the_time_reflection_of_t() {
    let (g, f) = raw(0.05, 400);
    let t = f.t.clone();
    let s = glue(f, &g).unwrap();
    assert_eq!(s.q2.region, Region::Q2);
    assert_eq!(s.q2.levels.len(), t.levels.len());
    for (q, p) in s.q2.levels.iter().zip(t.levels.iter().rev()) {
        assert!((q.t - (T0 - p.t)).abs() < 1e-15);
        for i in 0..=t.n {
            assert_eq!(q.r[i], p.r[i]);
            assert!((q.u[i] - (p.u[i] + s.shifts.q2)).abs() < 1e-12);
            assert_eq!(q.ur[i], p.ur[i]);
            assert_eq!(q.ut[i], -p.ut[i]);
        }
    }
}

#[test]
fn q4_initial_trace_is_subcritical_off_the_pinch() {
    let s = base();
    let first = s.q4.first();
    assert_eq!(first.t, T0);
    for (r, ur) in first.r.iter().zip(&first.ur) {
        if (r - 3.0).abs() > 1e-12 {
            assert!((0.0..1.0).contains(ur), "u_r({r}, t0) = {ur}");
        }
    }
    let pinch = s.sample(3.0, T0).unwrap().1;
    assert!((pinch.ur - 1.0).abs() < 1e-3);
    assert!(pinch.urr.abs() < 1e-4);
    assert!(s.bridge.left < 3.0 && s.bridge.right > 3.0);
}

#[test]
fn gauge_pins_u_at_the_pinch() {
    let s = base();
    assert_eq!(s.sample(3.0, T0).unwrap().1.u, 0.0);
    // Q1 and Q3 end next to r = 3, where the trace formula vanishes.
    let tol = tol_disc(&s.q1, gamma2());
    assert!(s.q1.last().u[s.q1.n].abs() < tol);
    assert!(s.q3.last().u[0].abs() < tol);
}

#[test]
fn supercritical_set_starts_at_two_to_four_and_follows_the_interfaces() {
    let s = base();
    let h = 1.0 / 400.0;
    let at0 = s.classify_regions(0.0);
    assert_eq!(at0.len(), 1, "{at0:?}");
    assert!((at0[0].0 - 2.0).abs() <= 2.0 * h && (at0[0].1 - 4.0).abs() <= 2.0 * h);
    let t = 0.5 * T0;
    let mid = s.classify_regions(t);
    let (b, c) = (s.geometry.beta.eval(t, 0).unwrap(), s.geometry.gamma.eval(t, 0).unwrap());
    assert_eq!(mid.len(), 1, "{mid:?}");
    assert!((mid[0].0 - b).abs() <= 2.0 * h && (mid[0].1 - c).abs() <= 2.0 * h);
    assert!(s.classify_regions(1.1 * T0).is_empty());
}

#[test]
fn supercritical_region_is_extinct_after_t0() {
    let s = glued(0.025, 400);
    let mut count = 0;
    for lvl in s.q4.levels.iter().filter(|l| l.t >= 1.05 * T0 && l.t <= 2.0 * T0) {
        let m = lvl.ur.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        assert!(m < 1.0, "max |u_r| = {m} at t = {}", lvl.t);
        count += 1;
    }
    assert!(count > 10);
    // Late levels stay below the value at t0.
    let at_t0 = s.q4.first().ur.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let half = T0 + 0.5 * (s.q4.time_span().1 - T0);
    for lvl in s.q4.levels.iter().filter(|l| l.t >= half) {
        assert!(lvl.ur.iter().all(|v| v.abs() < at_t0));
    }
}

#[test]
fn interface_seams_respect_the_regularization_bounds() {
    let s = base();
    let eps = s.eps;
    let tol = tol_disc(&s.q1, gamma2());
    // Q1 values on the left interface follow the trace formula.
    for lvl in &s.q1.levels {
        let tr = s.geometry.b.trace_u(lvl.t, 32).unwrap();
        assert!((lvl.u[s.q1.n] - tr.u_value).abs() <= tol, "t = {}", lvl.t);
    }
    let rep = s.seams();
    assert_eq!(rep.seams.len(), 3);
    for name in ["gamma1", "gamma3"] {
        let seam = rep.get(name).unwrap();
        assert!(!seam.points.is_empty());
        assert!(seam.max_jump[1] <= 2.0 * eps + tol, "{name}: {:?}", seam.max_jump);
        assert!(seam.max_jump[2] <= eps + eps.sqrt() + tol, "{name}: {:?}", seam.max_jump);
    }
}

#[test]
fn seam_jumps_scale_with_the_refinement() {
    let coarse = base().seams();
    let fine = glued(0.025, 800).seams();
    let orders = seam_orders(&coarse, &fine);
    assert_eq!(orders.seams.len(), 3);
    for (name, o) in &orders.seams {
        // Interface u and u_r jumps are proportional to eps; u_rr jumps and
        // the bridged t0 junction only to a power between 1/2 and 1 (see the
        // decisions ledger).
        let first_order = if name == "t0" { 0.9 } else { 0.99 };
        assert!(o[0] > first_order && o[1] > first_order, "{name}: {o:?}");
        assert!(o[2] > 0.5, "{name}: {o:?}");
    }
}

#[test]
fn gauge_constants_do_not_change_jumps_or_classification() {
    let (g, f) = raw(0.05, 400);
    let mut shifted = f.clone();
    shifted.q1.shift(1.5);
    shifted.t.shift(-2.0);
    shifted.q3.shift(0.25);
    shifted.q4.shift(7.0);
    let (a, b) = (glue(f, &g).unwrap(), glue(shifted, &g).unwrap());
    let (ra, rb) = (a.seams(), b.seams());
    for (x, y) in ra.seams.iter().zip(&rb.seams) {
        for k in 0..3 {
            assert!((x.max_jump[k] - y.max_jump[k]).abs() < 1e-10, "{}", x.name);
        }
    }
    for t in [0.0, 0.2, 0.49, 0.6] {
        assert_eq!(a.classify_regions(t), b.classify_regions(t));
    }
}

#[test]
fn export_round_trips_fields_and_seams() {
    let s = base();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fields_glued.csv");
    s.export_csv(&path).unwrap();
    let rows = read_field_csv(std::fs::File::open(&path).unwrap()).unwrap();
    assert_eq!(rows.len(), s.exported_rows());
    // First row of each region is its first stored node, bit for bit.
    for f in s.fields() {
        let row = rows.iter().find(|r| r.region == f.region.label()).unwrap();
        let lvl = f.first();
        assert_eq!((row.t, row.r, row.u, row.ur, row.urr), (lvl.t, lvl.r[0], lvl.u[0], lvl.ur[0], lvl.urr[0]));
    }
    let seams = read_seams_csv(std::fs::File::open(dir.path().join("seams.csv")).unwrap()).unwrap();
    let mut groups: Vec<&str> = seams.iter().map(|(n, _)| n.as_str()).collect();
    groups.dedup();
    assert_eq!(groups, ["gamma1", "gamma3", "t0"]);
    let report = s.seams();
    let back: Vec<SeamPoint> = seams.iter().map(|(_, p)| *p).collect();
    let direct: Vec<SeamPoint> = report.seams.iter().flat_map(|s| s.points.clone()).collect();
    assert_eq!(back, direct);
}

#[test]
fn export_reports_unwritable_paths() {
    let err = base().export_csv(std::path::Path::new("/nonexistent/dir/f.csv")).unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
    assert!(err.to_string().contains("/nonexistent/dir/f.csv"));
}

#[test]
fn three_initial_shapes_give_distinct_transcritical_solutions() {
    let shapes = [
        ShapeParams::default(),
        ShapeParams { c0: 0.5, c1: 0.0 },
        ShapeParams { c0: -0.5, c1: 0.5 },
    ];
    let solutions: Vec<GluedSolution> = shapes
        .iter()
        .map(|&shape| {
            let cfg = SuiteConfig {
                shape_q1: shape,
                shape_q3: shape,
                ..SuiteConfig::new(T0, 0.05, 400)
            };
            let (g, f) = run_suite(&nl(), &cfg).unwrap();
            glue(f, &g).unwrap()
        })
        .collect();
    for s in &solutions {
        assert_eq!(s.classify_regions(0.0).len(), 1);
        assert!(s.classify_regions(1.1 * T0).is_empty());
    }
    for i in 0..3 {
        for j in i + 1..3 {
            let (a, b) = (solutions[i].sample(1.5, 0.1).unwrap().1, solutions[j].sample(1.5, 0.1).unwrap().1);
            assert!((a.ur - b.ur).abs() > 1e-3, "shapes {i} and {j} coincide");
        }
    }
}

#[test]
fn glue_rejects_inconsistent_fields() {
    let (g, f) = raw(0.05, 400);
    let (_, other) = raw(0.1, 200);
    let mut mixed = f.clone();
    mixed.q3 = other.q3;
    assert!(matches!(glue(mixed, &g), Err(Error::Argument(_))));
    let mut swapped = f;
    std::mem::swap(&mut swapped.q1, &mut swapped.q3);
    assert!(matches!(glue(swapped, &g), Err(Error::Argument(_))));
}

#[test]
fn sweep_distances_decrease_along_the_ladder() {
    let res = eps_sweep(&nl(), &SuiteConfig::new(T0, 0.1, 400), &[0.1, 0.05, 0.025]).unwrap();
    assert_eq!(res.regions.len(), 4);
    for r in &res.regions {
        assert_eq!(r.distances.len(), 2);
        assert!(r.decreasing, "{:?}", r);
    }
    assert!(res.converged && res.warnings.is_empty());
    assert!(res.order >= 0.8);
    // The limit keeps the Neumann value 1 and the curvature b on beta.
    assert!(res.boundary.max_ur_defect < 1e-9);
    assert!(res.boundary.max_urr_defect < 0.02);
    assert_eq!(res.limit.len(), res.regions.len() * COMPACT_SAMPLES * COMPACT_SAMPLES);
}

#[test]
fn sweep_rejects_bad_ladders() {
    let cfg = SuiteConfig::new(T0, 0.1, 100);
    for ladder in [&[0.1, 0.05][..], &[0.1, 0.1, 0.05], &[0.05, 0.1, 0.025], &[0.1, 0.05, 0.0]] {
        assert!(matches!(eps_sweep(&nl(), &cfg, ladder), Err(Error::Argument(_))), "{ladder:?}");
    }
}
