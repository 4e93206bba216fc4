//! Shared oracles for the integration tests. Every closed form here is
//! written out independently of the library.
#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use pmlab_core::nonlinearity::{regularize, Nonlinearity, Side};
use pmlab_core::solver::{solve, Grid, InitialDatum, ProblemSpec, Region, SpaceTimeField};

/// phi'(s) and phi''(s) of the log model.
pub fn log_d1(s: f64) -> f64 {
    s / (1.0 + s * s)
}

pub fn log_d2(s: f64) -> f64 {
    (1.0 - s * s) / (1.0 + s * s).powi(2)
}

/// u* = A cos(k (r - 1)) e^{-t} on [1, 5] with k = pi / 4, so u*_r = 0 at
/// both ends and |u*_r| <= A k < 1 - eps.
pub const MMS_AMP: f64 = 0.3;
pub const MMS_K: f64 = PI / 4.0;
pub const MMS_SPAN: (f64, f64) = (0.5, 0.7);

pub fn mms_exact(r: f64, t: f64) -> [f64; 4] {
    let (s, c, e) = ((MMS_K * (r - 1.0)).sin(), (MMS_K * (r - 1.0)).cos(), (-t).exp());
    let k = MMS_K;
    [
        MMS_AMP * c * e,
        -MMS_AMP * k * s * e,
        -MMS_AMP * k * k * c * e,
        MMS_AMP * k * k * k * s * e,
    ]
}

fn mms_source(r: f64, t: f64) -> f64 {
    let [u, ur, urr, _] = mms_exact(r, t);
    let ut = -u;
    ut - (log_d2(ur) * urr + log_d1(ur) / r)
}

/// Max nodal error at the final level of the manufactured problem.
pub fn mms_error(n: usize, dt: f64) -> f64 {
    let field = mms_solve(n, dt);
    let last = field.last();
    let t = last.t;
    (0..=n)
        .map(|i| (last.u[i] - mms_exact(last.r[i], t)[0]).abs())
        .fold(0.0, f64::max)
}

pub fn mms_solve(n: usize, dt: f64) -> SpaceTimeField {
    let nl = Nonlinearity::log_model();
    let pot = regularize(&nl, 0.05, Side::Forward).unwrap();
    let t_start = MMS_SPAN.0;
    let initial = InitialDatum::from_fn(Region::Q4, move |r| mms_exact(r, t_start));
    let spec = ProblemSpec::fixed_interval(
        pot,
        (1.0, 5.0),
        (0.0, 0.0),
        MMS_SPAN,
        initial,
        Some(Arc::new(mms_source)),
    )
    .unwrap();
    solve(&spec, &Grid::new(n, dt).with_tol_res(1.0)).unwrap()
}

/// Least-squares slope of log(err) against log(step).
pub fn fitted_order(steps: &[f64], errs: &[f64]) -> f64 {
    let xs: Vec<f64> = steps.iter().map(|x| x.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|x| x.ln()).collect();
    let m = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}
