//! The four regional solves and the initial trace that links Q4 to Q1/Q3.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::nonlinearity::Nonlinearity;
use crate::solver::{build_u0, solve, Grid, InitialDatum, Level, ProblemSpec, Region, ShapeParams, SpaceTimeField};

/// Default bridge half-width. Fixed rather than tied to h, so the jumps at
/// t = t0 scale with eps alone.
pub const DEFAULT_BRIDGE_WIDTH: f64 = 0.1;

/// Everything needed to run the four regional problems.
#[derive(Clone, Debug, Serialize)]
pub struct SuiteConfig {
    pub t0: f64,
    pub eps: f64,
    pub grid: Grid,
    pub shape_q1: ShapeParams,
    pub shape_q3: ShapeParams,
    /// Q4 runs on [t0, t_end_factor * t0].
    pub t_end_factor: f64,
    /// Smallest half-width of the pinch bridge in the Q4 initial trace.
    pub bridge_width: f64,
}

impl SuiteConfig {
    /// Default shapes, graded steps with dt_max = 2 t0 / n and Q4 up to 2 t0.
    pub fn new(t0: f64, eps: f64, n: usize) -> Self {
        Self {
            t0,
            eps,
            grid: Grid::for_t0(n, t0),
            shape_q1: ShapeParams::default(),
            shape_q3: ShapeParams::default(),
            t_end_factor: 2.0,
            bridge_width: DEFAULT_BRIDGE_WIDTH,
        }
    }
}

/// Where the Q4 initial trace departs from the Q1/Q3 terminal data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Bridge {
    pub left: f64,
    pub right: f64,
}

/// Raw regional solutions. `t` is the time-reversed backward region; the
/// gauges are fixed by [`super::glue`].
#[derive(Clone, Debug)]
pub struct RegionalFields {
    pub q1: SpaceTimeField,
    pub t: SpaceTimeField,
    pub q3: SpaceTimeField,
    pub q4: SpaceTimeField,
    pub bridge: Bridge,
}

/// Solves Q1, T and Q3 concurrently, then Q4 from their terminal data.
pub fn run_suite(nl: &Nonlinearity, cfg: &SuiteConfig) -> Result<(Geometry, RegionalFields)> {
    if !(cfg.t_end_factor > 1.0) {
        return Err(Error::Argument(format!(
            "Q4 needs t_end_factor > 1, got {}",
            cfg.t_end_factor
        )));
    }
    let geometry = Geometry::new(nl, cfg.t0)?;
    let g = &geometry;
    let q1_spec = ProblemSpec::q1(g, cfg.eps, build_u0(Region::Q1, &g.b, cfg.shape_q1)?)?;
    let q3_spec = ProblemSpec::q3(g, cfg.eps, build_u0(Region::Q3, &g.c, cfg.shape_q3)?)?;
    let t_spec = ProblemSpec::t_region(g, cfg.eps)?;
    let (q1, (t, q3)) = rayon::join(
        || solve(&q1_spec, &cfg.grid),
        || rayon::join(|| solve(&t_spec, &cfg.grid), || solve(&q3_spec, &cfg.grid)),
    );
    let (q1, t, q3) = (q1?, t?, q3?);
    let (trace, bridge) = q4_trace(&q1, &q3, cfg.bridge_width.max(4.0 / cfg.grid.n as f64))?;
    let q4_spec = ProblemSpec::q4(nl, cfg.eps, cfg.t0, cfg.t_end_factor * cfg.t0, trace)?;
    let q4 = solve(&q4_spec, &cfg.grid)?;
    Ok((geometry, RegionalFields { q1, t, q3, q4, bridge }))
}

/// Cubic Hermite interpolant on [x0, x1] with values p and slopes m.
#[derive(Clone, Copy, Debug)]
struct Hermite {
    x0: f64,
    x1: f64,
    p: [f64; 2],
    m: [f64; 2],
}

impl Hermite {
    /// `[int_{x0}^x p, p, p', p'']`.
    fn jet(&self, x: f64) -> [f64; 4] {
        let l = self.x1 - self.x0;
        let s = (x - self.x0) / l;
        let (s2, s3, s4) = (s * s, s * s * s, s * s * s * s);
        let [p0, p1] = self.p;
        let [m0, m1] = [self.m[0] * l, self.m[1] * l];
        let integral = l
            * (p0 * (0.5 * s4 - s3 + s)
                + m0 * (0.25 * s4 - 2.0 * s3 / 3.0 + 0.5 * s2)
                + p1 * (-0.5 * s4 + s3)
                + m1 * (0.25 * s4 - s3 / 3.0));
        let value = p0 * (2.0 * s3 - 3.0 * s2 + 1.0) + m0 * (s3 - 2.0 * s2 + s) + p1 * (-2.0 * s3 + 3.0 * s2) + m1 * (s3 - s2);
        let d1 = (p0 * (6.0 * s2 - 6.0 * s) + m0 * (3.0 * s2 - 4.0 * s + 1.0) + p1 * (-6.0 * s2 + 6.0 * s) + m1 * (3.0 * s2 - 2.0 * s)) / l;
        let d2 = (p0 * (12.0 * s - 6.0) + m0 * (6.0 * s - 4.0) + p1 * (6.0 - 12.0 * s) + m1 * (6.0 * s - 2.0)) / (l * l);
        [integral, value, d1, d2]
    }
}

/// Terminal level of Q1 or Q3 as a function of r: u by Hermite
/// interpolation of (u, u_r), u_r and u_rr piecewise linear.
#[derive(Clone, Debug)]
struct Profile {
    r: Vec<f64>,
    u: Vec<f64>,
    ur: Vec<f64>,
    urr: Vec<f64>,
}

impl Profile {
    fn new(level: &Level) -> Self {
        Self {
            r: level.r.clone(),
            u: level.u.clone(),
            ur: level.ur.clone(),
            urr: level.urr.clone(),
        }
    }

    /// `[u, u_r, u_rr, u_rrr]`, clamped to the sampled interval.
    fn jet(&self, x: f64) -> [f64; 4] {
        let n = self.r.len() - 1;
        let (a, b) = (self.r[0], self.r[n]);
        let x = x.clamp(a, b);
        let dx = (b - a) / n as f64;
        let i = (((x - a) / dx).floor() as usize).min(n - 1);
        let f = (x - self.r[i]) / dx;
        let h = Hermite {
            x0: self.r[i],
            x1: self.r[i + 1],
            p: [self.u[i], self.u[i + 1]],
            m: [self.ur[i], self.ur[i + 1]],
        };
        let lerp = |v: &[f64]| v[i] + f * (v[i + 1] - v[i]);
        [h.jet(x)[1], lerp(&self.ur), lerp(&self.urr), (self.urr[i + 1] - self.urr[i]) / dx]
    }
}

/// Initial datum of Q4 at t0 with u(3, t0) = 0: Q1 terminal data on
/// [1, 3 - w], Q3 terminal data on [3 + w, 5], and cubic Hermite bridges of
/// u_r to the exact pinch jet u_r = 1, u_rr = 0 at r = 3.
/// w = max(4 (distance of the last interfaces from 3), min_width).
pub fn q4_trace(q1: &SpaceTimeField, q3: &SpaceTimeField, min_width: f64) -> Result<(InitialDatum, Bridge)> {
    if q1.region != Region::Q1 || q3.region != Region::Q3 {
        return Err(Error::Argument("the Q4 trace is built from Q1 and Q3 fields".into()));
    }
    let (lp, rp) = (Profile::new(q1.last()), Profile::new(q3.last()));
    let gap = (3.0 - lp.r[lp.r.len() - 1]).max(rp.r[0] - 3.0);
    let w = (4.0 * gap).max(min_width);
    let (a, c) = (3.0 - w, 3.0 + w);
    if a <= 1.0 || c >= 5.0 {
        return Err(Error::Argument(format!("bridge width {w} leaves no room for the terminal data")));
    }
    let (ja, jc) = (lp.jet(a), rp.jet(c));
    let left = Hermite {
        x0: a,
        x1: 3.0,
        p: [ja[1], 1.0],
        m: [ja[2], 0.0],
    };
    let right = Hermite {
        x0: 3.0,
        x1: c,
        p: [1.0, jc[1]],
        m: [0.0, jc[2]],
    };
    // Shifts that make u continuous and zero at r = 3.
    let u_a = -left.jet(3.0)[0];
    let shift_l = u_a - ja[0];
    let shift_r = right.jet(c)[0] - jc[0];
    let datum = InitialDatum::from_fn(Region::Q4, move |r| {
        if r <= a {
            let j = lp.jet(r);
            [j[0] + shift_l, j[1], j[2], j[3]]
        } else if r <= 3.0 {
            let j = left.jet(r);
            [u_a + j[0], j[1], j[2], j[3]]
        } else if r <= c {
            right.jet(r)
        } else {
            let j = rp.jet(r);
            [j[0] + shift_r, j[1], j[2], j[3]]
        }
    });
    Ok((datum, Bridge { left: a, right: c }))
}
