//! A priori estimates of the regularised regional problems, evaluated on a
//! computed field. Margins are raw; `passed` applies the discretisation slack.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::nonlinearity::{Constants, Potential};
use crate::solver::{Region, SpaceTimeField};

use super::tol_disc;

/// Width of the boundary layer excluded from interior-strip estimates.
pub const DEFAULT_DELTA: f64 = 0.1;

#[derive(Clone, Debug, Serialize)]
pub struct EstimateCheck {
    pub name: String,
    /// Worst measured value of the estimated quantity.
    pub measured: f64,
    /// Bound from the theorem when it gives one explicitly.
    pub bound: Option<f64>,
    /// Distance to the bound (negative when violated), before slack.
    pub margin: Option<f64>,
    pub passed: bool,
}

impl EstimateCheck {
    fn bounded(name: &str, measured: f64, bound: f64, margin: f64, tol: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            bound: Some(bound),
            margin: Some(margin),
            passed: margin >= -tol,
        }
    }

    /// An existence-type estimate: only finiteness can be certified.
    fn finite(name: &str, measured: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            bound: None,
            margin: None,
            passed: measured.is_finite(),
        }
    }
}

/// Constants actually attained by the field.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct MeasuredConstants {
    /// sup of u_r on the strip (forward) or inf on the compact (backward).
    pub m1: f64,
    /// inf of |phi''(u_r)| on the same set.
    pub m2: f64,
    /// Smallest slope making the global second-derivative estimate hold.
    pub m3: f64,
    pub m4: f64,
    pub m5: f64,
    pub m6: f64,
    pub m7: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EstimateReport {
    pub region: Region,
    pub eps: f64,
    pub t0: f64,
    pub delta: f64,
    pub tolerance: f64,
    pub families: Vec<EstimateCheck>,
    pub constants: MeasuredConstants,
    pub passed: bool,
}

impl EstimateReport {
    pub fn get(&self, name: &str) -> Option<&EstimateCheck> {
        self.families.iter().find(|c| c.name == name)
    }
}

/// Discrete mixed derivatives of one level.
struct Derivs {
    /// u_rt along fixed r.
    urt: Vec<f64>,
    urrr: Vec<f64>,
    urrt: Vec<f64>,
}

fn derivs(field: &SpaceTimeField, k: usize) -> Derivs {
    let m = field.levels.len();
    let n = field.n;
    let (lo, hi) = match k {
        _ if m == 1 => (0, 0),
        0 => (0, 1),
        _ if k + 1 == m => (k - 1, k),
        _ => (k - 1, k + 1),
    };
    let lvl = &field.levels[k];
    let dx = lvl.r[1] - lvl.r[0];
    let urrr: Vec<f64> = (0..=n)
        .map(|i| match i {
            0 => (lvl.urr[1] - lvl.urr[0]) / dx,
            _ if i == n => (lvl.urr[n] - lvl.urr[n - 1]) / dx,
            _ => (lvl.urr[i + 1] - lvl.urr[i - 1]) / (2.0 * dx),
        })
        .collect();
    let (a, b) = (&field.levels[lo], &field.levels[hi]);
    let span = b.t - a.t;
    let mut urt = vec![0.0; n + 1];
    let mut urrt = vec![0.0; n + 1];
    if span > 0.0 {
        for i in 0..=n {
            // Quotients follow the node; subtract the advection it carries.
            let c = (b.r[i] - a.r[i]) / span;
            urt[i] = (b.ur[i] - a.ur[i]) / span - c * lvl.urr[i];
            urrt[i] = (b.urr[i] - a.urr[i]) / span - c * urrr[i];
        }
    }
    Derivs { urt, urrr, urrt }
}

/// Trapezoid rule over the nodes selected by `keep` (a contiguous run).
fn trapezoid(r: &[f64], f: impl Fn(usize) -> f64, keep: impl Fn(usize) -> bool) -> f64 {
    (1..r.len())
        .filter(|&i| keep(i - 1) && keep(i))
        .map(|i| 0.5 * (f(i - 1) + f(i)) * (r[i] - r[i - 1]))
        .sum()
}

/// Trapezoid rule in time over per-level values.
fn time_trapezoid(t: &[f64], g: &[f64]) -> f64 {
    t.windows(2)
        .zip(g.windows(2))
        .map(|(t, g)| 0.5 * (g[0] + g[1]) * (t[1] - t[0]))
        .sum()
}

/// Estimates of the theorem governing `field.region`: six families on Q1
/// and Q3, five on T, one (subcriticality) on Q4.
pub fn verify_estimates(
    field: &SpaceTimeField,
    geometry: &Geometry,
    constants: &Constants,
    delta: f64,
) -> Result<EstimateReport> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Argument(format!("delta must lie in (0, 1), got {delta}")));
    }
    if (field.t0 - geometry.t0()).abs() > 1e-12 * geometry.t0() {
        return Err(Error::Argument("field and geometry disagree on t0".into()));
    }
    if field.levels.len() < 2 {
        return Err(Error::Argument("estimates need at least two stored levels".into()));
    }
    let tol = tol_disc(field, constants.gamma2);
    let (families, measured) = match field.region {
        Region::Q1 | Region::Q3 => forward(field, geometry, constants, delta, tol),
        Region::T => backward(field, geometry, constants, delta, tol),
        Region::Q4 => subcritical(field, tol),
        Region::Q2 => {
            return Err(Error::Argument(
                "Q2 is never solved; verify the T field it reflects".into(),
            ))
        }
    };
    let passed = families.iter().all(|f| f.passed);
    Ok(EstimateReport {
        region: field.region,
        eps: field.eps,
        t0: field.t0,
        delta,
        tolerance: tol,
        families,
        constants: measured,
        passed,
    })
}

fn forward(
    field: &SpaceTimeField,
    geometry: &Geometry,
    constants: &Constants,
    delta: f64,
    tol: f64,
) -> (Vec<EstimateCheck>, MeasuredConstants) {
    let eps = field.eps;
    let n = field.n;
    let q1 = field.region == Region::Q1;
    // Index of the fixed and the moving edge, and the interface data.
    let (fixed, moving) = if q1 { (0, n) } else { (n, 0) };
    let (iface, curv) = if q1 {
        (&geometry.beta, &geometry.b)
    } else {
        (&geometry.gamma, &geometry.c)
    };
    let pot = &field.potential;

    let (mut ur_min, mut ur_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut m1, mut m2) = (f64::NEG_INFINITY, f64::INFINITY);
    let (mut fix_lo, mut fix_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut edge_err = 0.0_f64;
    let (mut m3, mut m4, mut m5) = (0.0_f64, 0.0_f64, 0.0_f64);
    let m = field.levels.len();
    let times: Vec<f64> = field.levels.iter().map(|l| l.t).collect();
    let mut energy = vec![0.0; m];
    let mut strip_rt = vec![0.0; m];
    let mut strip_rrt = vec![0.0; m];
    let mut strip_rrr_max = 0.0_f64;
    for (k, lvl) in field.levels.iter().enumerate() {
        let edge = iface.position(lvl.t);
        let bt = curv.value(lvl.t);
        let in_strip = |i: usize| (lvl.r[i] - edge).abs() >= delta;
        for i in 0..=n {
            let v = lvl.ur[i];
            ur_min = ur_min.min(v);
            ur_max = ur_max.max(v);
            if in_strip(i) {
                m1 = m1.max(v);
                m2 = m2.min(pot.d2(v));
            }
            let dist = (lvl.r[i] - edge).abs();
            if i != moving && dist > 0.0 {
                m3 = m3.max(((lvl.urr[i] - bt).abs() - eps) / dist);
            }
            m4 = m4.max(lvl.urr[i].abs());
            m5 = m5.max(lvl.ut[i].abs());
        }
        fix_lo = fix_lo.min(lvl.urr[fixed]);
        fix_hi = fix_hi.max(lvl.urr[fixed]);
        edge_err = edge_err.max((lvl.urr[moving] - bt).abs());

        let d = derivs(field, k);
        energy[k] = trapezoid(&lvl.r, |i| pot.d2(lvl.ur[i]) * d.urt[i] * d.urt[i], |_| true);
        strip_rt[k] = trapezoid(&lvl.r, |i| d.urt[i] * d.urt[i], in_strip);
        strip_rrt[k] = trapezoid(&lvl.r, |i| d.urrt[i] * d.urrt[i], in_strip);
        strip_rrr_max = strip_rrr_max.max(trapezoid(&lvl.r, |i| d.urrr[i] * d.urrr[i], in_strip));
    }
    let m6 = time_trapezoid(&times, &energy);
    let m7 = strip_rt
        .iter()
        .fold(0.0_f64, |a, &x| a.max(x))
        .max(strip_rrr_max)
        .max(time_trapezoid(&times, &strip_rrt));

    // Q3 mirrors Q1: u_r decreases to 0 at r = 5, so u_rr(5, t) <= 0 there.
    let (fix_bound_lo, fix_bound_hi) = if q1 { (0.0, 100.0) } else { (-100.0, 0.0) };
    let families = vec![
        EstimateCheck::bounded(
            "max_principle",
            ur_max,
            1.0 - eps,
            ur_min.min(1.0 - eps - ur_max),
            tol,
        ),
        EstimateCheck {
            name: "interior_parabolicity".into(),
            measured: m1,
            bound: Some(1.0),
            margin: Some(1.0 - m1),
            passed: m1 < 1.0 && m2 > 0.0,
        },
        EstimateCheck::bounded(
            "fixed_boundary_curvature",
            if q1 { fix_hi } else { fix_lo },
            if q1 { fix_bound_hi } else { fix_bound_lo },
            (fix_lo - fix_bound_lo).min(fix_bound_hi - fix_hi),
            tol,
        ),
        EstimateCheck::bounded("moving_boundary_curvature", edge_err, eps, eps - edge_err, tol),
        EstimateCheck {
            passed: m3.is_finite() && m4.is_finite() && m5.is_finite() && m3 <= constants.gamma1 + tol,
            ..EstimateCheck::bounded("global_second_derivative", m3, constants.gamma1, constants.gamma1 - m3, tol)
        },
        EstimateCheck {
            passed: m6.is_finite() && m7.is_finite(),
            ..EstimateCheck::finite("integral_estimates", m6)
        },
    ];
    let measured = MeasuredConstants { m1, m2, m3, m4, m5, m6, m7 };
    (families, measured)
}

fn backward(
    field: &SpaceTimeField,
    geometry: &Geometry,
    constants: &Constants,
    delta: f64,
    tol: f64,
) -> (Vec<EstimateCheck>, MeasuredConstants) {
    let eps = field.eps;
    let root = eps.sqrt();
    let n = field.n;
    let t0 = field.t0;
    let phi1 = geometry.phi1();
    let pot = &field.potential;
    // Compact set: past the initial layer, away from both edges.
    let t_compact = eps + delta * (t0 - eps);
    // Rectangle for the strip integrals: the middle half of the region at
    // its narrowest time in the rectangle.
    let half = (1.0 - (t0 - t_compact) / t0).max(0.0).sqrt();
    let (r1, r2) = (3.0 - 0.5 * half, 3.0 + 0.5 * half);

    let mut margin_mp = f64::INFINITY;
    let mut ur_max = f64::NEG_INFINITY;
    let (mut m1, mut m2) = (f64::INFINITY, f64::INFINITY);
    let mut edge_err = 0.0_f64;
    let (mut m3, mut m4, mut m5) = (0.0_f64, 0.0_f64, 0.0_f64);
    let m = field.levels.len();
    let times: Vec<f64> = field.levels.iter().map(|l| l.t).collect();
    let mut energy = vec![0.0; m];
    let mut rect_rrt = vec![0.0; m];
    let mut m7 = 0.0_f64;
    for (k, lvl) in field.levels.iter().enumerate() {
        let tau = t0 - lvl.t;
        let (bl, br) = (geometry.beta.position(tau), geometry.gamma.position(tau));
        let (kb, kc) = (geometry.b.value(tau), geometry.c.value(tau));
        for i in 0..=n {
            let (r, v) = (lvl.r[i], lvl.ur[i]);
            ur_max = ur_max.max(v);
            margin_mp = margin_mp.min(v - (1.0 + eps)).min(2.0 + phi1 * lvl.t - v);
            if lvl.t >= t_compact && r - bl >= delta && br - r >= delta {
                m1 = m1.min(v);
                m2 = m2.min(-pot.d2(v));
            }
            let w = lvl.urr[i];
            if i != 0 {
                m3 = m3.max(((w - kb).abs() - root) / (r - bl));
            }
            if i != n {
                m3 = m3.max(((w - kc).abs() - root) / (br - r));
            }
            m4 = m4.max(w.abs());
            m5 = m5.max(lvl.ut[i].abs());
        }
        edge_err = edge_err.max((lvl.urr[0] - kb).abs()).max((lvl.urr[n] - kc).abs());

        let d = derivs(field, k);
        energy[k] = -trapezoid(&lvl.r, |i| pot.d2(lvl.ur[i]) * d.urt[i] * d.urt[i], |_| true);
        if lvl.t >= t_compact {
            let in_rect = |i: usize| lvl.r[i] >= r1 && lvl.r[i] <= r2;
            rect_rrt[k] = trapezoid(&lvl.r, |i| d.urrt[i] * d.urrt[i], in_rect);
            m7 = m7
                .max(trapezoid(&lvl.r, |i| d.urt[i] * d.urt[i], in_rect))
                .max(trapezoid(&lvl.r, |i| d.urrr[i] * d.urrr[i], in_rect));
        }
    }
    let m6 = time_trapezoid(&times, &energy);
    let m7 = m7.max(time_trapezoid(&times, &rect_rrt));

    let families = vec![
        EstimateCheck::bounded("max_principle", ur_max, 2.0 + phi1 * t0, margin_mp, tol),
        EstimateCheck {
            name: "interior_parabolicity".into(),
            measured: m1,
            bound: Some(1.0),
            margin: Some(m1 - 1.0),
            passed: m1.is_finite() && m1 > 1.0 && m2 > 0.0,
        },
        EstimateCheck::bounded("boundary_curvature", edge_err, root, root - edge_err, tol),
        EstimateCheck {
            passed: m3.is_finite() && m4.is_finite() && m5.is_finite() && m3 <= constants.gamma1 + tol,
            ..EstimateCheck::bounded("global_second_derivative", m3, constants.gamma1, constants.gamma1 - m3, tol)
        },
        EstimateCheck {
            passed: m6.is_finite() && m7.is_finite(),
            ..EstimateCheck::finite("integral_estimates", m6)
        },
    ];
    (families, MeasuredConstants { m1, m2, m3, m4, m5, m6, m7 })
}

/// After the pinch the flow is subcritical: |u_r| < 1 at every level past
/// the initial one.
fn subcritical(field: &SpaceTimeField, tol: f64) -> (Vec<EstimateCheck>, MeasuredConstants) {
    let sup = field.levels[1..]
        .iter()
        .flat_map(|l| l.ur.iter())
        .fold(0.0_f64, |a, &v| a.max(v.abs()));
    let m4 = field
        .levels
        .iter()
        .flat_map(|l| l.urr.iter())
        .fold(0.0_f64, |a, &v| a.max(v.abs()));
    let m5 = field
        .levels
        .iter()
        .flat_map(|l| l.ut.iter())
        .fold(0.0_f64, |a, &v| a.max(v.abs()));
    let check = EstimateCheck {
        passed: sup < 1.0,
        ..EstimateCheck::bounded("subcritical", sup, 1.0, 1.0 - sup, tol)
    };
    (
        vec![check],
        MeasuredConstants {
            m1: sup,
            m4,
            m5,
            ..MeasuredConstants::default()
        },
    )
}
