//! Backward Euler on the front-fixed coordinate s in [0, 1].
//!
//! With r = a(t) + L(t) s the unknowns U_i(t) = u(r_i(t), t) satisfy
//! dU_i/dt = sign * [ (phi'(p_{i+1/2}) - phi'(p_{i-1/2})) / (hL) + phi'(q_i) / r_i ]
//!           + c_i * q_i + f(r_i, t),
//! with p the cell slopes, q the nodal central slope and c_i the node
//! velocity. Neumann ends use the ghost slope 2g - p and the exact g for q.
//! The node velocity over a step is the node displacement divided by dt, not
//! the instantaneous a' + s L': near a pinch L' changes by O(1) relative
//! within one step and the instantaneous value over-advects, which breaks
//! the discrete maximum principle for u_r.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::nonlinearity::{Potential, RegularizedNonlinearity};

use super::field::{Level, SpaceTimeField};
use super::problem::{Corner, ProblemSpec};

/// Discretisation parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Grid {
    /// Number of cells in s.
    pub n: usize,
    /// Step far from any pinch.
    pub dt_max: f64,
    /// Smallest step before a failing Newton solve is reported.
    pub dt_min: f64,
    /// dt <= dt_max * (distance to pinch / t0)^grading.
    pub grading: f64,
    /// Q1/Q3 stop this far before the pinch; `None` picks max(dt_min, 1e-6 t0).
    pub stop_offset: Option<f64>,
    /// Interior PDE residual a step must reach; `None` picks 10 (h + dt_max)(1 + gamma2).
    pub tol_res: Option<f64>,
    /// Newton tolerance on the max-norm of the step equations.
    pub newton_tol: f64,
    pub newton_max_iter: usize,
}

/// Floor on the number of cells for the backward region.
pub const MIN_BACKWARD_CELLS: usize = 32;

impl Grid {
    pub fn new(n: usize, dt_max: f64) -> Self {
        Self {
            n,
            dt_max,
            dt_min: dt_max * 1e-6,
            grading: 0.5,
            stop_offset: None,
            tol_res: None,
            newton_tol: 1e-11,
            newton_max_iter: 30,
        }
    }

    /// dt_max = 2 t0 / n.
    pub fn for_t0(n: usize, t0: f64) -> Self {
        Self::new(n, 2.0 * t0 / n as f64)
    }

    pub fn with_tol_res(mut self, tol: f64) -> Self {
        self.tol_res = Some(tol);
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n < 4 {
            return Err(Error::Argument(format!("need at least 4 cells, got {}", self.n)));
        }
        if !(self.dt_max > 0.0 && self.dt_min > 0.0 && self.dt_min <= self.dt_max) {
            return Err(Error::Argument(format!(
                "need 0 < dt_min <= dt_max, got {} and {}",
                self.dt_min, self.dt_max
            )));
        }
        if !(0.0..=1.0).contains(&self.grading) {
            return Err(Error::Argument("grading exponent must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Counters accumulated during a solve.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct SolveStats {
    pub steps: usize,
    pub rejected_steps: usize,
    pub newton_iterations: usize,
    pub max_step_residual: f64,
    pub tol_res: f64,
    pub min_dt: f64,
}

/// Geometry of the moving grid at one instant.
pub(crate) struct Frame {
    pub a: f64,
    pub len: f64,
    pub da: f64,
    pub dlen: f64,
}

impl Frame {
    pub(crate) fn at(spec: &ProblemSpec, t: f64) -> Self {
        let a = spec.left.edge.position(t);
        let b = spec.right.edge.position(t);
        let da = spec.left.edge.velocity(t);
        let db = spec.right.edge.velocity(t);
        Self {
            a,
            len: b - a,
            da,
            dlen: db - da,
        }
    }

    pub(crate) fn r(&self, s: f64) -> f64 {
        self.a + self.len * s
    }

    pub(crate) fn grid_velocity(&self, s: f64) -> f64 {
        self.da + self.dlen * s
    }

    /// Frame at `t_new` whose velocities are the mean node displacement
    /// since `t_old`, so a linear profile is advected exactly however fast
    /// the edges accelerate.
    pub(crate) fn swept(spec: &ProblemSpec, t_old: f64, t_new: f64) -> Self {
        let new = Self::at(spec, t_new);
        if t_new == t_old {
            return new;
        }
        let old = Self::at(spec, t_old);
        let dt = t_new - t_old;
        Self {
            da: (new.a - old.a) / dt,
            dlen: (new.len - old.len) / dt,
            ..new
        }
    }
}

/// Transformed-PDE coefficients `U_t = A(s,t,U_s) U_ss + B(s,t,U_s)`.
pub struct Transformed<'a> {
    spec: &'a ProblemSpec,
}

/// Maps a problem to the fixed unit interval.
pub fn transform(spec: &ProblemSpec) -> Transformed<'_> {
    Transformed { spec }
}

impl Transformed<'_> {
    pub fn length(&self, t: f64) -> f64 {
        Frame::at(self.spec, t).len
    }

    pub fn position(&self, s: f64, t: f64) -> f64 {
        Frame::at(self.spec, t).r(s)
    }

    pub fn grid_velocity(&self, s: f64, t: f64) -> f64 {
        Frame::at(self.spec, t).grid_velocity(s)
    }

    /// Diffusion coefficient `sign * phi''(U_s / L) / L^2`.
    pub fn diffusion(&self, s: f64, t: f64, us: f64) -> f64 {
        let _ = s;
        let f = Frame::at(self.spec, t);
        let pot = &self.spec.potential;
        pot.orientation() * pot.d2(us / f.len) / (f.len * f.len)
    }

    /// Lower-order part `sign * phi'(U_s / L) / r + (a' + s L') U_s / L`.
    pub fn drift(&self, s: f64, t: f64, us: f64) -> f64 {
        let f = Frame::at(self.spec, t);
        let pot = &self.spec.potential;
        let v = us / f.len;
        pot.orientation() * pot.d1(v) / f.r(s) + f.grid_velocity(s) * v
    }
}

struct Tridiagonal {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    scratch: Vec<f64>,
}

impl Tridiagonal {
    fn new(m: usize) -> Self {
        Self {
            lower: vec![0.0; m],
            diag: vec![0.0; m],
            upper: vec![0.0; m],
            scratch: vec![0.0; m],
        }
    }

    /// Thomas algorithm; overwrites `rhs` with the solution.
    fn solve(&mut self, rhs: &mut [f64]) -> bool {
        let m = rhs.len();
        let (a, b, c, cp) = (&self.lower, &self.diag, &self.upper, &mut self.scratch);
        if b[0] == 0.0 {
            return false;
        }
        cp[0] = c[0] / b[0];
        rhs[0] /= b[0];
        for i in 1..m {
            let den = b[i] - a[i] * cp[i - 1];
            if den == 0.0 || !den.is_finite() {
                return false;
            }
            cp[i] = c[i] / den;
            rhs[i] = (rhs[i] - a[i] * rhs[i - 1]) / den;
        }
        for i in (0..m - 1).rev() {
            rhs[i] -= cp[i] * rhs[i + 1];
        }
        rhs.iter().all(|x| x.is_finite())
    }
}

struct StepSystem<'a> {
    spec: &'a ProblemSpec,
    pot: &'a RegularizedNonlinearity,
    n: usize,
    h: f64,
}

impl StepSystem<'_> {
    /// Spatial operator F + advection + forcing at time t.
    fn operator(&self, u: &[f64], f: &Frame, t: f64, out: &mut [f64], jac: Option<&mut Tridiagonal>) {
        let n = self.n;
        let dx = self.h * f.len;
        let sign = self.pot.orientation();
        let (gl, gr) = (self.spec.left.flux, self.spec.right.flux);
        let cell = |i: usize| (u[i + 1] - u[i]) / dx;
        let mut jac = jac;
        #[allow(clippy::needless_range_loop)] // stencil reads i - 1, i, i + 1
        for i in 0..=n {
            let s = i as f64 * self.h;
            let r = f.r(s);
            let c = f.grid_velocity(s);
            let (pl, pr) = match i {
                0 => (2.0 * gl - cell(0), cell(0)),
                _ if i == n => (cell(n - 1), 2.0 * gr - cell(n - 1)),
                _ => (cell(i - 1), cell(i)),
            };
            let q = match i {
                0 => gl,
                _ if i == n => gr,
                _ => 0.5 * (pl + pr),
            };
            let jl = self.pot.jet(pl);
            let jr = self.pot.jet(pr);
            let jq = self.pot.jet(q);
            let mut val = sign * ((jr[1] - jl[1]) / dx + jq[1] / r) + c * q;
            if let Some(src) = &self.spec.source {
                val += src(r, t);
            }
            out[i] = val;

            if let Some(m) = jac.as_deref_mut() {
                let (mut lo, mut di, mut up) = (0.0, 0.0, 0.0);
                let inv2 = 1.0 / (dx * dx);
                if i == 0 {
                    let k = sign * (jr[2] + jl[2]) * inv2;
                    di -= k;
                    up += k;
                } else if i == n {
                    let k = sign * (jr[2] + jl[2]) * inv2;
                    di -= k;
                    lo += k;
                } else {
                    let kr = sign * jr[2] * inv2;
                    let kl = sign * jl[2] * inv2;
                    let kq = sign * jq[2] / (2.0 * dx * r);
                    let kc = c / (2.0 * dx);
                    up += kr + kq + kc;
                    di -= kr + kl;
                    lo += kl - kq - kc;
                }
                m.lower[i] = lo;
                m.diag[i] = di;
                m.upper[i] = up;
            }
        }
    }

    /// Solves U - U_old - dt * op(U, t_new) = 0; returns iterations used.
    fn newton(&self, u_old: &[f64], t_new: f64, dt: f64, grid: &Grid, u: &mut Vec<f64>) -> std::result::Result<usize, f64> {
        let m = self.n + 1;
        let frame = Frame::swept(self.spec, t_new - dt, t_new);
        let mut op = vec![0.0; m];
        let mut g = vec![0.0; m];
        let mut trial = vec![0.0; m];
        let mut jac = Tridiagonal::new(m);
        u.clear();
        u.extend_from_slice(u_old);

        let residual = |u: &[f64], op: &mut [f64], g: &mut [f64]| -> f64 {
            self.operator(u, &frame, t_new, op, None);
            let mut worst = 0.0_f64;
            for i in 0..m {
                g[i] = u[i] - u_old[i] - dt * op[i];
                worst = worst.max(g[i].abs());
            }
            worst
        };

        let scale = 1.0 + u_old.iter().fold(0.0_f64, |a, &x| a.max(x.abs()));
        let mut norm = residual(u, &mut op, &mut g);
        for iter in 0..grid.newton_max_iter {
            if norm <= grid.newton_tol {
                return Ok(iter);
            }
            self.operator(u, &frame, t_new, &mut op, Some(&mut jac));
            for i in 0..m {
                jac.lower[i] *= -dt;
                jac.upper[i] *= -dt;
                jac.diag[i] = 1.0 - dt * jac.diag[i];
            }
            let mut delta: Vec<f64> = g.iter().map(|x| -x).collect();
            if !jac.solve(&mut delta) {
                return Err(norm);
            }
            let step = delta.iter().fold(0.0_f64, |a, &x| a.max(x.abs()));
            let mut lambda = 1.0;
            let mut accepted = false;
            for _ in 0..8 {
                for i in 0..m {
                    trial[i] = u[i] + lambda * delta[i];
                }
                let trial_norm = residual(&trial, &mut op, &mut g);
                if trial_norm.is_finite() && (trial_norm < norm || trial_norm <= grid.newton_tol) {
                    std::mem::swap(u, &mut trial);
                    norm = trial_norm;
                    accepted = true;
                    break;
                }
                lambda *= 0.5;
            }
            if !accepted {
                return Err(norm);
            }
            if lambda * step <= 1e-15 * scale {
                // Stagnated at rounding level.
                return if norm <= 1e3 * grid.newton_tol {
                    Ok(iter + 1)
                } else {
                    Err(norm)
                };
            }
        }
        if norm <= grid.newton_tol {
            Ok(grid.newton_max_iter)
        } else {
            Err(norm)
        }
    }

    /// Max interior residual of the non-conservative PDE with the
    /// backward time quotient.
    fn step_residual(&self, u_old: &[f64], u: &[f64], t_new: f64, dt: f64) -> f64 {
        let n = self.n;
        let f = Frame::swept(self.spec, t_new - dt, t_new);
        let dx = self.h * f.len;
        let sign = self.pot.orientation();
        let mut worst = 0.0_f64;
        for i in 1..n {
            let s = i as f64 * self.h;
            let r = f.r(s);
            let q = (u[i + 1] - u[i - 1]) / (2.0 * dx);
            let urr = (u[i + 1] - 2.0 * u[i] + u[i - 1]) / (dx * dx);
            let ut = (u[i] - u_old[i]) / dt - f.grid_velocity(s) * q;
            let j = self.pot.jet(q);
            let mut res = ut - sign * (j[2] * urr + j[1] / r);
            if let Some(src) = &self.spec.source {
                res -= src(r, t_new);
            }
            worst = worst.max(res.abs());
        }
        worst
    }
}

fn default_tol_res(spec: &ProblemSpec, grid: &Grid, n: usize) -> f64 {
    let gamma2 = crate::nonlinearity::compute_constants(spec.potential.base(), 1000)
        .map(|c| c.gamma2)
        .unwrap_or(10.0);
    let len = Frame::at(spec, spec.t_start)
        .len
        .max(Frame::at(spec, spec.t_end).len);
    let h = len / n as f64;
    10.0 * (h + grid.dt_max) * (1.0 + gamma2)
}

/// Integrates the problem and returns every accepted time level.
pub fn solve(spec: &ProblemSpec, grid: &Grid) -> Result<SpaceTimeField> {
    grid.validate()?;
    let n = match spec.region {
        super::problem::Region::T => grid.n.max(MIN_BACKWARD_CELLS),
        _ => grid.n,
    };
    let h = 1.0 / n as f64;
    let t_stop = match spec.corner {
        Corner::AtEnd => {
            let offset = grid
                .stop_offset
                .unwrap_or_else(|| grid.dt_min.max(1e-6 * spec.t0));
            spec.t_end - offset
        }
        _ => spec.t_end,
    };
    if !(t_stop > spec.t_start) {
        return Err(Error::Argument(format!(
            "empty time span [{}, {t_stop}]",
            spec.t_start
        )));
    }
    let tol_res = grid.tol_res.unwrap_or_else(|| default_tol_res(spec, grid, n));
    let sys = StepSystem {
        spec,
        pot: &spec.potential,
        n,
        h,
    };

    let frame0 = Frame::at(spec, spec.t_start);
    let mut u: Vec<f64> = (0..=n)
        .map(|i| spec.initial_scale * spec.initial.value(frame0.r(i as f64 * h)))
        .collect();
    let mut raw: Vec<(f64, f64, Vec<f64>)> = vec![(spec.t_start, 0.0, u.clone())];
    let mut stats = SolveStats {
        tol_res,
        min_dt: f64::INFINITY,
        ..SolveStats::default()
    };
    let mut next = Vec::with_capacity(n + 1);
    let mut t = spec.t_start;
    let t0_scale = spec.t0.max(f64::MIN_POSITIVE);

    while t_stop - t > 1e-14 * t0_scale.max(t.abs()) {
        let dist = spec.pinch_distance(t).max(0.0);
        let grade = match spec.corner {
            Corner::None => 1.0,
            _ => (dist / spec.t0).min(1.0).powf(grid.grading),
        };
        let mut dt = (grid.dt_max * grade).max(grid.dt_min);
        if t + dt > t_stop || t_stop - (t + dt) < 0.5 * grid.dt_min {
            dt = t_stop - t;
        }
        let mut last_failure: (usize, f64, bool);
        loop {
            let t_new = if dt == t_stop - t { t_stop } else { t + dt };
            match sys.newton(&u, t_new, dt, grid, &mut next) {
                Ok(iters) => {
                    stats.newton_iterations += iters;
                    let res = sys.step_residual(&u, &next, t_new, dt);
                    if res <= tol_res {
                        stats.max_step_residual = stats.max_step_residual.max(res);
                        break;
                    }
                    last_failure = (iters, res, true);
                }
                Err(norm) => last_failure = (grid.newton_max_iter, norm, false),
            }
            stats.rejected_steps += 1;
            dt *= 0.5;
            if dt < grid.dt_min * 1e-3 {
                let (iterations, residual, accuracy) = last_failure;
                return Err(if accuracy {
                    Error::Accuracy {
                        region: spec.region.to_string(),
                        t,
                        residual,
                        tolerance: tol_res,
                    }
                } else {
                    Error::NonlinearSolve {
                        region: spec.region.to_string(),
                        t,
                        iterations,
                        residual,
                    }
                });
            }
        }
        t = if dt == t_stop - t { t_stop } else { t + dt };
        stats.steps += 1;
        stats.min_dt = stats.min_dt.min(dt);
        std::mem::swap(&mut u, &mut next);
        raw.push((t, dt, u.clone()));
    }

    let levels = build_levels(spec, n, &raw);
    Ok(SpaceTimeField::new(spec, n, levels, stats))
}

/// Derived fields for every stored level.
fn build_levels(spec: &ProblemSpec, n: usize, raw: &[(f64, f64, Vec<f64>)]) -> Vec<Level> {
    let h = 1.0 / n as f64;
    let pot = &spec.potential;
    let sign = pot.orientation();
    let (gl, gr) = (spec.left.flux, spec.right.flux);
    let m = raw.len();
    (0..m)
        .map(|k| {
            let (t, dt, u) = (&raw[k].0, raw[k].1, &raw[k].2);
            let f = Frame::at(spec, *t);
            let dx = h * f.len;
            let r: Vec<f64> = (0..=n).map(|i| f.r(i as f64 * h)).collect();
            // The initial level is data: its derivatives come from the exact jet.
            let exact = (k == 0).then(|| {
                r.iter()
                    .map(|&x| spec.initial.jet(x).map(|v| spec.initial_scale * v))
                    .collect::<Vec<_>>()
            });
            let ur: Vec<f64> = (0..=n)
                .map(|i| match (i, &exact) {
                    (0, _) => gl,
                    _ if i == n => gr,
                    (_, Some(j)) => j[i][1],
                    _ => (u[i + 1] - u[i - 1]) / (2.0 * dx),
                })
                .collect();
            let urr: Vec<f64> = (0..=n)
                .map(|i| match (i, &exact) {
                    (_, Some(j)) => j[i][2],
                    (0, _) => 2.0 * ((u[1] - u[0]) / dx - gl) / dx,
                    _ if i == n => 2.0 * (gr - (u[n] - u[n - 1]) / dx) / dx,
                    _ => (u[i + 1] - 2.0 * u[i] + u[i - 1]) / (dx * dx),
                })
                .collect();
            // Time quotient along s: central inside, one-sided at the ends.
            let (lo, hi) = match (k, m) {
                (_, 1) => (0, 0),
                (0, _) => (0, 1),
                (k, m) if k + 1 == m => (k - 1, k),
                (k, _) => (k - 1, k + 1),
            };
            let span = raw[hi].0 - raw[lo].0;
            let moved = Frame::swept(spec, raw[lo].0, raw[hi].0);
            let ut: Vec<f64> = (0..=n)
                .map(|i| {
                    let ds = if span > 0.0 {
                        (raw[hi].2[i] - raw[lo].2[i]) / span
                    } else {
                        0.0
                    };
                    ds - moved.grid_velocity(i as f64 * h) * ur[i]
                })
                .collect();
            let residual: Vec<f64> = (0..=n)
                .map(|i| {
                    let j = pot.jet(ur[i]);
                    let mut res = ut[i] - sign * (j[2] * urr[i] + j[1] / r[i]);
                    if let Some(src) = &spec.source {
                        res -= src(r[i], *t);
                    }
                    res
                })
                .collect();
            Level {
                t: *t,
                dt,
                r,
                u: u.clone(),
                ur,
                urr,
                ut,
                residual,
            }
        })
        .collect()
}
