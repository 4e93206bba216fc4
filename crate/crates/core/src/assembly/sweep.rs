//! Cauchy ladder in eps on fixed interior compacts and the extrapolated limit.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::nonlinearity::Nonlinearity;
use crate::solver::{PointValue, Region, SpaceTimeField};

use super::glue::{glue, GluedSolution};
use super::suite::{run_suite, SuiteConfig};

/// Distance kept from moving boundaries.
pub const COMPACT_MARGIN: f64 = 0.1;
/// Samples per direction on each compact.
pub const COMPACT_SAMPLES: usize = 41;

/// Sup-norm distances between consecutive ladder entries on one region.
#[derive(Clone, Debug, Serialize)]
pub struct RegionDistance {
    pub region: Region,
    /// `distances[i]` = sup |u^{eps_i} - u^{eps_{i+1}}|.
    pub distances: Vec<f64>,
    /// Least-squares slope of log distance against log eps.
    pub order: f64,
    pub decreasing: bool,
}

/// One point of the extrapolated limit.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LimitSample {
    pub region: Region,
    pub r: f64,
    pub t: f64,
    pub u: f64,
}

/// Limit traces on beta(t) from the Q1 side.
#[derive(Clone, Debug, Serialize)]
pub struct BoundaryLimit {
    pub times: Vec<f64>,
    /// Extrapolated u_r(beta(t), t); tends to 1.
    pub ur: Vec<f64>,
    /// Extrapolated u_rr(beta(t), t) and the boundary curvature b(t).
    pub urr: Vec<f64>,
    pub b: Vec<f64>,
    pub max_ur_defect: f64,
    pub max_urr_defect: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepResult {
    pub t0: f64,
    pub ladder: Vec<f64>,
    pub regions: Vec<RegionDistance>,
    /// Smallest fitted order over the regions.
    pub order: f64,
    pub limit: Vec<LimitSample>,
    pub boundary: BoundaryLimit,
    pub warnings: Vec<String>,
    pub converged: bool,
}

/// Fixed (r, t) points of one region's interior compact. Points whose
/// r-interval is empty at that time are dropped.
fn compact(region: Region, g: &Geometry, t0: f64, t_end: f64, eps_max: f64) -> Vec<(f64, f64)> {
    let (t_lo, t_hi) = match region {
        Region::Q1 | Region::Q3 => (0.0, 0.9 * t0),
        Region::Q2 => (0.0, (t0 - eps_max).min(0.9 * t0)),
        _ => (1.1 * t0, t_end),
    };
    let m = COMPACT_SAMPLES - 1;
    let mut out = Vec::with_capacity(COMPACT_SAMPLES * COMPACT_SAMPLES);
    for j in 0..=m {
        let t = t_lo + (t_hi - t_lo) * j as f64 / m as f64;
        let (Ok(b), Ok(c)) = (g.beta.eval(t.min(t0), 0), g.gamma.eval(t.min(t0), 0)) else {
            continue;
        };
        let (a, z) = match region {
            Region::Q1 => (1.0, b - COMPACT_MARGIN),
            Region::Q2 => (b + COMPACT_MARGIN, c - COMPACT_MARGIN),
            Region::Q3 => (c + COMPACT_MARGIN, 5.0),
            _ => (1.0, 5.0),
        };
        if z <= a {
            continue;
        }
        out.extend((0..=m).map(|i| (a + (z - a) * i as f64 / m as f64, t)));
    }
    out
}

fn field(g: &GluedSolution, region: Region) -> &SpaceTimeField {
    match region {
        Region::Q1 => &g.q1,
        Region::Q2 => &g.q2,
        Region::Q3 => &g.q3,
        _ => &g.q4,
    }
}

fn sample(f: &SpaceTimeField, r: f64, t: f64) -> Result<PointValue> {
    f.sample(r, t).ok_or_else(|| {
        Error::Argument(format!("{} does not cover the compact point ({r}, {t})", f.region))
    })
}

/// Least-squares slope of log y against log x over the finite positive pairs.
fn fit_order(x: &[f64], y: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(_, &y)| y > 0.0 && y.is_finite())
        .map(|(&x, &y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let (mx, my) = (
        pts.iter().map(|p| p.0).sum::<f64>() / n,
        pts.iter().map(|p| p.1).sum::<f64>() / n,
    );
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// Richardson extrapolation of the two finest values: the error is taken as
/// C eps^p, so u = u_f + (u_f - u_c) / ((eps_c / eps_f)^p - 1).
fn richardson(coarse: f64, fine: f64, ratio: f64, p: f64) -> f64 {
    fine + (fine - coarse) / (ratio.powf(p) - 1.0)
}

/// Order used for extrapolation: the fitted one if positive, else 1.
fn extrapolation_order(p: f64) -> f64 {
    if p.is_finite() && p > 0.0 {
        p
    } else {
        1.0
    }
}

/// Glued solutions along a strictly decreasing eps ladder, their
/// consecutive sup-norm distances on interior compacts, fitted orders and
/// the extrapolated limit.
pub fn eps_sweep(nl: &Nonlinearity, base: &SuiteConfig, ladder: &[f64]) -> Result<SweepResult> {
    if ladder.len() < 3 {
        return Err(Error::Argument(format!(
            "the eps ladder needs at least 3 entries, got {}",
            ladder.len()
        )));
    }
    if ladder.iter().any(|&e| !(e > 0.0)) || ladder.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Argument(format!("the eps ladder must be positive and strictly decreasing: {ladder:?}")));
    }
    let solutions: Vec<GluedSolution> = ladder
        .par_iter()
        .map(|&eps| {
            let cfg = SuiteConfig { eps, ..base.clone() };
            let (g, fields) = run_suite(nl, &cfg)?;
            glue(fields, &g)
        })
        .collect::<Result<_>>()?;
    glued_sweep(&solutions)
}

/// Sweep statistics for glued solutions already ordered along the ladder.
pub fn glued_sweep(solutions: &[GluedSolution]) -> Result<SweepResult> {
    let first = solutions
        .first()
        .ok_or_else(|| Error::Argument("empty sweep".into()))?;
    let (g, t0) = (&first.geometry, first.t0);
    let ladder: Vec<f64> = solutions.iter().map(|s| s.eps).collect();
    let t_end = solutions
        .iter()
        .map(|s| s.q4.time_span().1)
        .fold(f64::INFINITY, f64::min);
    let k = solutions.len();
    let ratio = ladder[k - 2] / ladder[k - 1];
    let mut regions = Vec::with_capacity(4);
    let mut limit = Vec::new();
    let mut warnings = Vec::new();
    for region in [Region::Q1, Region::Q2, Region::Q3, Region::Q4] {
        let points = compact(region, g, t0, t_end, ladder[0]);
        // values[e][p] = u^{eps_e} at point p.
        let values: Vec<Vec<f64>> = solutions
            .iter()
            .map(|s| {
                let f = field(s, region);
                points.iter().map(|&(r, t)| sample(f, r, t).map(|v| v.u)).collect()
            })
            .collect::<Result<_>>()?;
        let distances: Vec<f64> = values
            .windows(2)
            .map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .collect();
        let decreasing = distances.windows(2).all(|w| w[1] < w[0]);
        if !decreasing {
            warnings.push(format!("{region}: distances do not decrease along the ladder: {distances:?}"));
        }
        let order = fit_order(&ladder[..k - 1], &distances);
        let p = extrapolation_order(order);
        limit.extend(points.iter().enumerate().map(|(i, &(r, t))| LimitSample {
            region,
            r,
            t,
            u: richardson(values[k - 2][i], values[k - 1][i], ratio, p),
        }));
        regions.push(RegionDistance {
            region,
            distances,
            order,
            decreasing,
        });
    }
    let order = regions.iter().map(|r| r.order).fold(f64::INFINITY, f64::min);
    let boundary = boundary_limit(solutions, g, ratio)?;
    let converged = regions.iter().all(|r| r.decreasing);
    Ok(SweepResult {
        t0,
        ladder,
        regions,
        order,
        limit,
        boundary,
        warnings,
        converged,
    })
}

/// Extrapolated traces of u_r and u_rr on beta from the Q1 boundary nodes.
fn boundary_limit(solutions: &[GluedSolution], g: &Geometry, ratio: f64) -> Result<BoundaryLimit> {
    let k = solutions.len();
    let t0 = g.t0();
    let m = COMPACT_SAMPLES - 1;
    let times: Vec<f64> = (0..=m).map(|j| 0.9 * t0 * j as f64 / m as f64).collect();
    let trace = |pick: fn(&PointValue) -> f64| -> Result<Vec<f64>> {
        let per_eps: Vec<Vec<f64>> = solutions
            .iter()
            .map(|s| {
                times
                    .iter()
                    .map(|&t| {
                        let b = g.beta.eval(t, 0)?;
                        sample(&s.q1, b, t).map(|v| pick(&v))
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        let dist: Vec<f64> = per_eps
            .windows(2)
            .map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .collect();
        let ladder: Vec<f64> = solutions.iter().map(|s| s.eps).collect();
        let p = extrapolation_order(fit_order(&ladder[..k - 1], &dist));
        Ok((0..times.len())
            .map(|i| richardson(per_eps[k - 2][i], per_eps[k - 1][i], ratio, p))
            .collect())
    };
    let ur = trace(|v| v.ur)?;
    let urr = trace(|v| v.urr)?;
    let b: Vec<f64> = times.iter().map(|&t| g.b.eval(t)).collect::<Result<_>>()?;
    let max_ur_defect = ur.iter().map(|x| (x - 1.0).abs()).fold(0.0, f64::max);
    let max_urr_defect = urr.iter().zip(&b).map(|(x, b)| (x - b).abs()).fold(0.0, f64::max);
    Ok(BoundaryLimit {
        times,
        ur,
        urr,
        b,
        max_ur_defect,
        max_urr_defect,
    })
}
