//! Residuals of the equations satisfied by v = u_r and w = u_rr, evaluated on
//! difference quotients of a computed field.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::nonlinearity::Potential;

use super::field::SpaceTimeField;
use super::problem::Region;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CompanionLevel {
    pub t: f64,
    pub v_max: f64,
    pub v_l2: f64,
    pub w_max: f64,
    pub w_l2: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CompanionResiduals {
    pub region: Region,
    pub levels: Vec<CompanionLevel>,
    pub v_max: f64,
    pub w_max: f64,
}

/// Nodes this close (in cells) to either edge are skipped.
const EDGE_CELLS: usize = 3;

/// v_t = s [phi'' v_rr + phi''' v_r^2 + phi'' v_r / r - phi' / r^2] and
/// w_t = s [phi'' w_rr + 3 phi''' w_r w + phi'''' w^3 + phi''' w^2 / r
///          + phi'' w_r / r - 2 phi'' w / r^2 + 2 phi' / r^3],
/// with s = +1 on forward regions and -1 on the time-reversed one.
pub fn derived_companions(field: &SpaceTimeField) -> Result<CompanionResiduals> {
    if field.region == Region::Q2 {
        return Err(Error::Argument(
            "companion residuals are defined on solved regions (q1, t, q3, q4)".into(),
        ));
    }
    let n = field.n;
    if n < 2 * EDGE_CELLS + 2 || field.levels.len() < 2 {
        return Err(Error::Argument("field too coarse for companion residuals".into()));
    }
    let pot = &field.potential;
    let sign = pot.orientation();
    let m = field.levels.len();
    let mut out = Vec::with_capacity(m);
    for k in 0..m {
        let (lo, hi) = match k {
            0 => (0, 1),
            _ if k + 1 == m => (k - 1, k),
            _ => (k - 1, k + 1),
        };
        let lvl = &field.levels[k];
        let span = field.levels[hi].t - field.levels[lo].t;
        let (a, b) = field.edges_at(lvl.t);
        let (da, db) = (field.left.velocity(lvl.t), field.right.velocity(lvl.t));
        let dx = (b - a) / n as f64;
        let (v, w) = (&lvl.ur, &lvl.urr);
        let (mut v_max, mut v_sq, mut w_max, mut w_sq) = (0.0_f64, 0.0, 0.0_f64, 0.0);
        for i in EDGE_CELLS..=n - EDGE_CELLS {
            let s = i as f64 / n as f64;
            let r = lvl.r[i];
            let c = da + s * (db - da);
            let vr = (v[i + 1] - v[i - 1]) / (2.0 * dx);
            let vrr = (v[i + 1] - 2.0 * v[i] + v[i - 1]) / (dx * dx);
            let wr = (w[i + 1] - w[i - 1]) / (2.0 * dx);
            let wrr = (w[i + 1] - 2.0 * w[i] + w[i - 1]) / (dx * dx);
            let vt = (field.levels[hi].ur[i] - field.levels[lo].ur[i]) / span - c * vr;
            let wt = (field.levels[hi].urr[i] - field.levels[lo].urr[i]) / span - c * wr;
            let [_, p1, p2, p3, p4] = pot.jet(v[i]);
            let wi = w[i];
            let v_rhs = p2 * vrr + p3 * vr * vr + p2 * vr / r - p1 / (r * r);
            let w_rhs = p2 * wrr + 3.0 * p3 * wr * wi + p4 * wi * wi * wi + p3 * wi * wi / r
                + p2 * wr / r
                - 2.0 * p2 * wi / (r * r)
                + 2.0 * p1 / (r * r * r);
            let rv = vt - sign * v_rhs;
            let rw = wt - sign * w_rhs;
            v_max = v_max.max(rv.abs());
            w_max = w_max.max(rw.abs());
            v_sq += rv * rv * dx;
            w_sq += rw * rw * dx;
        }
        out.push(CompanionLevel {
            t: lvl.t,
            v_max,
            v_l2: v_sq.sqrt(),
            w_max,
            w_l2: w_sq.sqrt(),
        });
    }
    let v_max = out.iter().fold(0.0_f64, |a, l| a.max(l.v_max));
    let w_max = out.iter().fold(0.0_f64, |a, l| a.max(l.w_max));
    Ok(CompanionResiduals {
        region: field.region,
        levels: out,
        v_max,
        w_max,
    })
}
