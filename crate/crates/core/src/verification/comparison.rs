//! Sampled comparison principle: parabolic-boundary ordering plus the
//! differential inequality, and nodewise sandwiching of computed fields.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::nonlinearity::Potential;
use crate::solver::{Region, SpaceTimeField};

use super::candidates::{edge_state, CandidateFunction, Catalog, Role, Target};

/// A candidate passes when every margin is at least `-COMPARISON_TOL`.
pub const COMPARISON_TOL: f64 = 1e-8;

/// Smallest admissible sample count per direction.
pub const MIN_SAMPLES: usize = 50;

/// Samples of the coefficient v in the w inequalities.
const V_SAMPLES: usize = 33;

/// Worst margin over one sampled set and where it occurs.
#[derive(Clone, Debug, Serialize)]
pub struct Margin {
    pub piece: String,
    pub margin: f64,
    pub at_r: f64,
    pub at_t: f64,
    pub samples: usize,
}

impl Margin {
    fn new(piece: &str) -> Self {
        Self {
            piece: piece.to_string(),
            margin: f64::INFINITY,
            at_r: f64::NAN,
            at_t: f64::NAN,
            samples: 0,
        }
    }

    fn record(&mut self, margin: f64, r: f64, t: f64) {
        self.samples += 1;
        // NaN margins count as failures.
        if !(margin >= self.margin) {
            self.margin = margin;
            self.at_r = r;
            self.at_t = t;
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ComparisonReport {
    pub name: String,
    pub role: Role,
    pub target: Target,
    /// Left edge, right edge and initial line, in that order.
    pub boundary: Vec<Margin>,
    pub interior: Margin,
    pub passed: bool,
}

impl ComparisonReport {
    pub fn worst_margin(&self) -> f64 {
        self.boundary
            .iter()
            .chain(std::iter::once(&self.interior))
            .map(|m| m.margin)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Region of one side: edges as functions of the side's time and its span.
struct Domain<'a> {
    cat: &'a Catalog,
    target: Target,
}

impl Domain<'_> {
    fn span(&self) -> (f64, f64) {
        let t0 = self.cat.geometry.t0();
        match self.target.region() {
            // The interfaces are singular at the pinch.
            Region::Q1 => (0.0, t0 * (1.0 - 1e-9)),
            _ => (self.cat.eps, t0),
        }
    }

    fn edges(&self, t: f64) -> (f64, f64) {
        let g = &self.cat.geometry;
        match self.target.region() {
            Region::Q1 => (1.0, g.beta.position(t)),
            _ => {
                let tau = g.t0() - t;
                (g.beta.position(tau), g.gamma.position(tau))
            }
        }
    }

    /// Interval of admissible values of the unknown on the left and right
    /// edges at time t.
    fn edge_data(&self, t: f64) -> [(f64, f64); 2] {
        let eps = self.cat.eps;
        let g = &self.cat.geometry;
        match self.target {
            Target::VQ1 => [(0.0, 0.0), (1.0 - eps, 1.0 - eps)],
            Target::WQ1 => {
                let b = g.b.value(t);
                [(0.0, 100.0), (b - eps, b + eps)]
            }
            Target::VT => [(1.0 + eps, 1.0 + eps); 2],
            Target::WT => {
                let root = eps.sqrt();
                let b = edge_state(&g.b, t, true).curv;
                let c = edge_state(&g.c, t, true).curv;
                [(b - root, b + root), (c - root, c + root)]
            }
        }
    }

    fn initial_data(&self, r: f64) -> f64 {
        let eps = self.cat.eps;
        match self.target {
            Target::VQ1 => (1.0 - eps) * self.cat.initial.jet(r)[1],
            Target::WQ1 => (1.0 - eps) * self.cat.initial.jet(r)[2],
            Target::VT => 1.0 + eps,
            Target::WT => 0.0,
        }
    }

    /// Range of the coefficient v in the w equations at time t.
    fn v_range(&self, t: f64) -> (f64, f64) {
        let eps = self.cat.eps;
        match self.target.side() {
            crate::nonlinearity::Side::Forward => (0.0, 1.0 - eps),
            crate::nonlinearity::Side::Backward => (1.0 + eps, 2.0 + self.cat.geometry.phi1() * t),
        }
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |k| if n == 1 { lo } else { lo + (hi - lo) * k as f64 / (n - 1) as f64 })
}

/// Checks one candidate on `n_r x n_t` samples of its side.
pub fn check_candidate(c: &CandidateFunction, catalog: &Catalog, n_r: usize, n_t: usize) -> Result<ComparisonReport> {
    if n_r < MIN_SAMPLES || n_t < MIN_SAMPLES {
        return Err(Error::Argument(format!(
            "need at least {MIN_SAMPLES} samples per direction, got {n_r} x {n_t}"
        )));
    }
    let dom = Domain {
        cat: catalog,
        target: c.target,
    };
    let (start, end) = dom.span();
    let t_lo = c.validity.t_lo.max(start);
    let t_hi = c.validity.t_hi.min(end);
    if !(t_hi > t_lo) {
        return Err(Error::Argument(format!(
            "validity box of {} misses the region",
            c.name
        )));
    }
    let sub = c.role == Role::Subsolution;
    // Sub: data - z >= 0; super: z - data >= 0.
    let order = |z: f64, (lo, hi): (f64, f64)| if sub { lo - z } else { z - hi };

    let mut left = Margin::new("left");
    let mut right = Margin::new("right");
    for t in linspace(t_lo, t_hi, n_t) {
        let (a, b) = dom.edges(t);
        let [dl, dr] = dom.edge_data(t);
        left.record(order(c.value(a, t), dl), a, t);
        right.record(order(c.value(b, t), dr), b, t);
    }
    let mut initial = Margin::new("initial");
    let (a, b) = dom.edges(t_lo);
    for r in linspace(a, b, n_r) {
        let d = dom.initial_data(r);
        initial.record(order(c.value(r, t_lo), (d, d)), r, t_lo);
    }

    let phi = catalog.geometry.nonlinearity();
    let sign = match c.target.side() {
        crate::nonlinearity::Side::Forward => 1.0,
        crate::nonlinearity::Side::Backward => -1.0,
    };
    let mut interior = Margin::new("interior");
    for t in linspace(t_lo, t_hi, n_t) {
        let (a, b) = dom.edges(t);
        for r in linspace(a, b, n_r) {
            let j = c.eval(r, t);
            if let Some((lo, hi)) = c.validity.z_range {
                if j.z < lo || j.z > hi {
                    continue;
                }
            }
            let margin = if c.target.is_second_derivative() {
                let (vlo, vhi) = dom.v_range(t);
                linspace(vlo, vhi, V_SAMPLES)
                    .map(|v| {
                        let rhs = sign * w_operator(&phi.jet(v), j.z, j.zr, j.zrr, r);
                        if sub {
                            rhs - j.zt
                        } else {
                            j.zt - rhs
                        }
                    })
                    .fold(f64::INFINITY, f64::min)
            } else {
                let rhs = sign * v_operator(&phi.jet(j.z), j.zr, j.zrr, r);
                if sub {
                    rhs - j.zt
                } else {
                    j.zt - rhs
                }
            };
            interior.record(margin, r, t);
        }
    }
    let boundary = vec![left, right, initial];
    let passed = boundary
        .iter()
        .chain(std::iter::once(&interior))
        .all(|m| m.margin >= -COMPARISON_TOL);
    Ok(ComparisonReport {
        name: c.name.clone(),
        role: c.role,
        target: c.target,
        boundary,
        interior,
        passed,
    })
}

/// Every candidate of the catalog, in parallel, sorted by name.
pub fn check_catalog(catalog: &Catalog, n_r: usize, n_t: usize) -> Result<Vec<ComparisonReport>> {
    let mut out = catalog
        .candidates
        .par_iter()
        .map(|c| check_candidate(c, catalog, n_r, n_t))
        .collect::<Result<Vec<_>>>()?;
    out.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(out)
}

/// phi''(z) z_rr + phi'''(z) z_r^2 + phi''(z) z_r / r - phi'(z) / r^2.
pub(crate) fn v_operator(jet: &[f64; 5], zr: f64, zrr: f64, r: f64) -> f64 {
    let [_, p1, p2, p3, _] = *jet;
    p2 * zrr + p3 * zr * zr + p2 * zr / r - p1 / (r * r)
}

/// Right-hand side of the w equation with v frozen in the coefficients.
pub(crate) fn w_operator(jet: &[f64; 5], w: f64, wr: f64, wrr: f64, r: f64) -> f64 {
    let [_, p1, p2, p3, p4] = *jet;
    p2 * wrr + 3.0 * p3 * wr * w + p4 * w * w * w + p3 * w * w / r + p2 * wr / r
        - 2.0 * p2 * w / (r * r)
        + 2.0 * p1 / (r * r * r)
}

/// Nodewise ordering of one candidate against a field.
#[derive(Clone, Debug, Serialize)]
pub struct SandwichBound {
    pub candidate: String,
    pub role: Role,
    pub target: Target,
    pub worst_margin: f64,
    pub at_r: f64,
    pub at_t: f64,
    pub passed: bool,
}

/// A bound on a boundary derivative implied by two candidates that touch.
#[derive(Clone, Debug, Serialize)]
pub struct InducedBound {
    pub name: String,
    pub lower: String,
    pub upper: String,
    /// Worst excess of the measured quantity over the implied interval.
    pub worst_excess: f64,
    pub at_t: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SandwichReport {
    pub region: Region,
    pub eps: f64,
    pub tolerance: f64,
    pub bounds: Vec<SandwichBound>,
    pub induced: Vec<InducedBound>,
    pub passed: bool,
}

/// Compares the computed u_r (or u_rr) with every candidate of the field's
/// region, within `tolerance`, and checks the boundary-derivative intervals
/// implied by touching pairs.
pub fn sandwich_check(field: &SpaceTimeField, catalog: &Catalog, tolerance: f64) -> Result<SandwichReport> {
    if (field.t0 - catalog.geometry.t0()).abs() > 1e-12 * field.t0 || (field.eps - catalog.eps).abs() > 1e-15 {
        return Err(Error::Argument("field and catalog disagree on t0 or eps".into()));
    }
    let candidates: Vec<_> = catalog.for_region(field.region).collect();
    if candidates.is_empty() {
        return Err(Error::Argument(format!(
            "the catalog has no candidates for region {}",
            field.region
        )));
    }
    let bounds: Vec<SandwichBound> = candidates
        .par_iter()
        .map(|c| {
            let mut m = Margin::new(&c.name);
            for lvl in &field.levels {
                if lvl.t < c.validity.t_lo || lvl.t > c.validity.t_hi {
                    continue;
                }
                let values = if c.target.is_second_derivative() { &lvl.urr } else { &lvl.ur };
                for (i, &u) in values.iter().enumerate() {
                    let z = c.value(lvl.r[i], lvl.t);
                    let margin = match c.role {
                        Role::Subsolution => u - z,
                        Role::Supersolution => z - u,
                    };
                    m.record(margin, lvl.r[i], lvl.t);
                }
            }
            SandwichBound {
                candidate: c.name.clone(),
                role: c.role,
                target: c.target,
                worst_margin: m.margin,
                at_r: m.at_r,
                at_t: m.at_t,
                passed: m.margin >= -tolerance,
            }
        })
        .collect();

    let mut induced = Vec::new();
    let pairs: &[(&str, &str, bool)] = match field.region {
        Region::Q1 => &[
            ("q_v_moving_sub", "q_v_moving_super", false),
            ("q_v_zero", "q_v_fixed_boundary", true),
        ],
        Region::T => &[
            ("t_v_left_sub", "t_v_left_super", true),
            ("t_v_right_sub", "t_v_right_super", false),
        ],
        _ => &[],
    };
    let n = field.n;
    for &(lo_name, hi_name, at_left) in pairs {
        let (Some(lo), Some(hi)) = (catalog.get(lo_name), catalog.get(hi_name)) else {
            continue;
        };
        let mut worst = f64::NEG_INFINITY;
        let mut at_t = f64::NAN;
        for lvl in &field.levels {
            if lvl.t < lo.validity.t_lo.max(hi.validity.t_lo) || lvl.t > lo.validity.t_hi.min(hi.validity.t_hi) {
                continue;
            }
            let i = if at_left { 0 } else { n };
            let r = lvl.r[i];
            // Both candidates equal the boundary value at the edge, so their
            // slopes bracket v_r = u_rr there; the ordering flips on a left edge.
            let (s_lo, s_hi) = (lo.eval(r, lvl.t).zr, hi.eval(r, lvl.t).zr);
            let (a, b) = if at_left { (s_lo, s_hi) } else { (s_hi, s_lo) };
            let excess = (a - lvl.urr[i]).max(lvl.urr[i] - b);
            if excess > worst {
                worst = excess;
                at_t = lvl.t;
            }
        }
        induced.push(InducedBound {
            name: format!("{lo_name}/{hi_name}"),
            lower: lo_name.to_string(),
            upper: hi_name.to_string(),
            worst_excess: worst,
            at_t,
            passed: worst <= tolerance,
        });
    }
    let passed = bounds.iter().all(|b| b.passed) && induced.iter().all(|b| b.passed);
    Ok(SandwichReport {
        region: field.region,
        eps: field.eps,
        tolerance,
        bounds,
        induced,
        passed,
    })
}
