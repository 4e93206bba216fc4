//! Structural properties of the potential, its constants and its
//! regularisations, checked against closed forms written out here.

mod common;

use common::{log_d1, log_d2};
use pmlab_core::nonlinearity::{check_hypotheses, compute_constants, regularize, Nonlinearity, Side};
use pmlab_core::Error;
use proptest::prelude::*;

fn log_d0(s: f64) -> f64 {
    0.5 * (1.0 + s * s).ln()
}

fn log_d3(s: f64) -> f64 {
    (2.0 * s.powi(3) - 6.0 * s) / (1.0 + s * s).powi(3)
}

fn log_d4(s: f64) -> f64 {
    (-6.0 * s.powi(4) + 36.0 * s * s - 6.0) / (1.0 + s * s).powi(4)
}

fn oracle(s: f64, k: usize) -> f64 {
    [log_d0, log_d1, log_d2, log_d3, log_d4][k](s)
}

#[test]
fn log_model_values_at_the_degenerate_slope() {
    let nl = Nonlinearity::log_model();
    assert!((nl.eval_derivatives(1.0, 1).unwrap() - 0.5).abs() < 1e-15);
    assert!(nl.eval_derivatives(1.0, 2).unwrap().abs() < 1e-15);
    assert!((nl.eval_derivatives(1.0, 3).unwrap() + 0.5).abs() < 1e-15);
    assert!(nl.eval_derivatives(0.0, 1).unwrap().abs() < 1e-10);
    assert!(nl.eval_derivatives(0.0, 3).unwrap().abs() < 1e-10);
    assert!(nl.eval_derivatives(3.0, 1).unwrap() > 0.0);
}

#[test]
fn bad_orders_and_slopes_are_rejected() {
    let nl = Nonlinearity::log_model();
    assert!(matches!(nl.eval_derivatives(0.5, 5), Err(Error::Argument(_))));
    assert!(matches!(nl.eval_derivatives(4.5, 0), Err(Error::Domain(_))));
    assert!(matches!(nl.eval_derivatives(f64::NAN, 0), Err(Error::Domain(_))));
}

#[test]
fn hypotheses_hold_for_the_log_model_and_fail_for_a_convex_quadratic() {
    let report = check_hypotheses(&Nonlinearity::log_model(), 1000).unwrap();
    assert!(report.passed, "{report:?}");
    let report = check_hypotheses(&Nonlinearity::log_model(), 100).unwrap();
    let third = report.checks.iter().find(|c| c.name == "third_derivative_at_1_nonpositive").expect("third-derivative check");
    assert!((third.margin + 0.5).abs() < 1e-12, "{third:?}");

    let quad = Nonlinearity::closed_form("quadratic", |s, k| match k {
        0 => 0.5 * s * s,
        1 => s,
        2 => 1.0,
        _ => 0.0,
    });
    assert!(!check_hypotheses(&quad, 1000).unwrap().passed);
    assert!(matches!(compute_constants(&quad, 1000), Err(Error::InvalidNonlinearity(_))));
}

#[test]
fn constants_of_the_log_model() {
    let k = compute_constants(&Nonlinearity::log_model(), 100_000).unwrap();
    assert_eq!(k.gamma0, 3.0 * 0.5 + 5.0);
    assert_eq!(k.gamma1, 5.0 * 0.5 + 100.0);
    // Independent dense sampling of the four-derivative sum on [0, 3].
    let n = 200_000;
    let dense = (0..=n)
        .map(|i| 3.0 * i as f64 / n as f64)
        .map(|s| (1..=4).map(|k| oracle(s, k).abs()).sum::<f64>())
        .fold(0.0, f64::max);
    assert!(k.gamma2 >= dense, "{} < {dense}", k.gamma2);
    assert!(k.gamma2 <= 1.02 * dense);
    let min = k.t0_bounds.iter().map(|b| b.value).fold(f64::INFINITY, f64::min);
    assert_eq!(k.t0_bounds.len(), 5);
    assert_eq!(k.t0_max, min);
    assert!(k.t0_max <= 1.0 / (4.0 * 0.25));
    let again = compute_constants(&Nonlinearity::log_model(), 100_000).unwrap();
    assert_eq!(serde_json::to_string(&k).unwrap(), serde_json::to_string(&again).unwrap());
}

#[test]
fn forward_regularization_is_uniformly_parabolic_on_a_dense_grid() {
    let nl = Nonlinearity::log_model();
    let reg = regularize(&nl, 0.1, Side::Forward).unwrap();
    assert_eq!(reg.eval_derivatives(0.5, 2).unwrap(), nl.eval_derivatives(0.5, 2).unwrap());
    let (lo, hi) = nl.domain();
    let n = 10_000;
    for i in 0..=n {
        let s = lo + (hi - lo) * i as f64 / n as f64;
        assert!(reg.eval_derivatives(s, 2).unwrap() >= reg.nu() * (1.0 - 1e-12), "s = {s}");
    }
    let back = regularize(&nl, 0.1, Side::Backward).unwrap();
    assert_eq!(back.eval_derivatives(2.0, 2).unwrap(), nl.eval_derivatives(2.0, 2).unwrap());
    assert!(back.eval_derivatives(2.0, 2).unwrap() < 0.0);
}

#[test]
fn regularizations_are_c2_across_their_breakpoints() {
    let nl = Nonlinearity::log_model();
    for side in [Side::Forward, Side::Backward] {
        let reg = regularize(&nl, 0.05, side).unwrap();
        for p in reg.breakpoints() {
            let d = 1e-9;
            for k in 0..=2 {
                let jump = reg.eval_derivatives(p + d, k).unwrap() - reg.eval_derivatives(p - d, k).unwrap();
                assert!(jump.abs() <= 1e-8, "{side:?} order {k} jump {jump:e} at {p}");
            }
        }
    }
}

proptest! {
    #[test]
    fn log_model_is_even(s in 0.0..3.0f64) {
        let nl = Nonlinearity::log_model();
        for k in 0..=4 {
            let (a, b) = (nl.eval_derivatives(s, k).unwrap(), nl.eval_derivatives(-s, k).unwrap());
            let parity = if k % 2 == 0 { 1.0 } else { -1.0 };
            prop_assert!((a - parity * b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn derivatives_match_the_symbolic_oracle(s in -3.0..3.0f64, k in 0usize..=4) {
        let v = Nonlinearity::log_model().eval_derivatives(s, k).unwrap();
        prop_assert!((v - oracle(s, k)).abs() <= 1e-12 * (1.0 + v.abs()));
    }

    #[test]
    fn derivatives_match_central_differences(s in -3.0..3.0f64, k in 1usize..=4) {
        let nl = Nonlinearity::log_model();
        let h = 1e-5;
        let fd = (nl.eval_derivatives(s + h, k - 1).unwrap() - nl.eval_derivatives(s - h, k - 1).unwrap()) / (2.0 * h);
        let exact = nl.eval_derivatives(s, k).unwrap();
        // Relative where the derivative is O(1), absolute near its zeros.
        prop_assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1.0), "k = {} fd {} exact {}", k, fd, exact);
    }

    #[test]
    fn second_derivative_changes_sign_at_one(s in 0.0..3.0f64) {
        let d2 = Nonlinearity::log_model().eval_derivatives(s, 2).unwrap();
        if s < 1.0 - 1e-9 {
            prop_assert!(d2 > 0.0);
        } else if s > 1.0 + 1e-9 {
            prop_assert!(d2 < 0.0);
        }
    }

    #[test]
    fn forward_copy_coincides_and_stays_parabolic(eps in 0.01..0.9f64, s in -4.0..4.0f64) {
        let nl = Nonlinearity::log_model();
        let reg = regularize(&nl, eps, Side::Forward).unwrap();
        prop_assert!((reg.nu() - 0.5 * log_d2(1.0 - eps).abs()).abs() <= 1e-12);
        prop_assert!(reg.eval_derivatives(s, 2).unwrap() >= reg.nu() * (1.0 - 1e-12));
        if s.abs() <= 1.0 - eps {
            for k in 0..=2 {
                let (a, b) = (reg.eval_derivatives(s, k).unwrap(), nl.eval_derivatives(s, k).unwrap());
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn backward_copy_coincides_and_stays_backward(eps in 0.01..0.9f64, s in -4.0..4.0f64) {
        let nl = Nonlinearity::log_model();
        let reg = regularize(&nl, eps, Side::Backward).unwrap();
        prop_assert!(reg.eval_derivatives(s, 2).unwrap() <= -reg.nu() * (1.0 - 1e-12));
        if (1.0 + eps..=3.0).contains(&s) {
            for k in 0..=2 {
                let (a, b) = (reg.eval_derivatives(s, k).unwrap(), nl.eval_derivatives(s, k).unwrap());
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn parabolicity_floor_grows_with_eps(e1 in 0.01..0.9f64, e2 in 0.01..0.9f64) {
        let nl = Nonlinearity::log_model();
        let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        let nu = |e| regularize(&nl, e, Side::Forward).unwrap().nu();
        prop_assert!(nu(hi) >= nu(lo));
    }
}
