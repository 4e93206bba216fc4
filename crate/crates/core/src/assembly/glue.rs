//! Gauge fixing, the glued space-time solution, seam jumps and the
//! supercritical set.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::solver::{PointValue, Region, SpaceTimeField};

use super::suite::{Bridge, RegionalFields};

/// Quadrature points for the interface traces.
const TRACE_POINTS: usize = 32;

/// Additive constants applied to each regional field.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct GaugeShifts {
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
    pub q4: f64,
}

/// The four regions in one gauge, u(3, t0) = 0.
#[derive(Clone, Debug)]
pub struct GluedSolution {
    pub geometry: Geometry,
    pub t0: f64,
    pub eps: f64,
    pub q1: SpaceTimeField,
    /// Time reflection of the backward field, t -> t0 - t.
    pub q2: SpaceTimeField,
    pub q3: SpaceTimeField,
    pub q4: SpaceTimeField,
    pub shifts: GaugeShifts,
    pub bridge: Bridge,
}

/// The two headline properties of the glued solution: the supercritical set
/// starts as (2, 4) and is empty after t0.
#[derive(Clone, Debug, Serialize)]
pub struct HeadlineChecks {
    /// Cell width in r at t = 0 (largest over Q1 and Q3).
    pub h: f64,
    pub initial_set: Vec<(f64, f64)>,
    /// Largest endpoint distance from 2 and 4; infinite unless a single interval.
    pub start_error: f64,
    pub transcritical_start: bool,
    /// Stored Q4 levels with t in [1.05 t0, 2 t0].
    pub late_levels: usize,
    pub max_ur_after: f64,
    pub extinct: bool,
}

impl HeadlineChecks {
    pub fn passed(&self) -> bool {
        self.transcritical_start && self.extinct
    }
}

/// Values of u on both sides of a seam point and their differences.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeamPoint {
    pub t: f64,
    pub r: f64,
    pub u_jump: f64,
    pub ur_jump: f64,
    pub urr_jump: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Seam {
    /// `gamma1`, `gamma3` or `t0`.
    pub name: String,
    pub points: Vec<SeamPoint>,
    /// Largest |jump| of u, u_r and u_rr.
    pub max_jump: [f64; 3],
}

#[derive(Clone, Debug, Serialize)]
pub struct SeamReport {
    pub eps: f64,
    pub n: usize,
    pub seams: Vec<Seam>,
}

impl SeamReport {
    pub fn get(&self, name: &str) -> Option<&Seam> {
        self.seams.iter().find(|s| s.name == name)
    }
}

/// Per seam and per quantity, log2 of the jump ratio between a coarse and a
/// refined run (refinement by a factor of two in h, dt and eps).
#[derive(Clone, Debug, Serialize)]
pub struct SeamOrders {
    pub seams: Vec<(String, [f64; 3])>,
}

impl SeamOrders {
    pub fn min(&self) -> f64 {
        self.seams
            .iter()
            .flat_map(|(_, o)| o.iter().copied())
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn seam_orders(coarse: &SeamReport, fine: &SeamReport) -> SeamOrders {
    let seams = coarse
        .seams
        .iter()
        .filter_map(|c| {
            let f = fine.get(&c.name)?;
            let o = std::array::from_fn(|k| (c.max_jump[k] / f.max_jump[k]).log2());
            Some((c.name.clone(), o))
        })
        .collect();
    SeamOrders { seams }
}

fn same(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1e-300)
}

/// Node values of one edge at time t, interpolated between levels.
fn edge_at(field: &SpaceTimeField, node: usize, t: f64) -> Option<PointValue> {
    let (i0, i1, w) = field.bracket(t)?;
    let (p, q) = (&field.levels[i0], &field.levels[i1]);
    Some(PointValue {
        u: p.u[node] + w * (q.u[node] - p.u[node]),
        ur: p.ur[node] + w * (q.ur[node] - p.ur[node]),
        urr: p.urr[node] + w * (q.urr[node] - p.urr[node]),
    })
}

/// Applies the gauges and reflects the backward field:
/// Q1 and Q3 match the interface trace at their last level, the backward
/// field matches both traces on average at its first level, and Q4 is
/// shifted so u(3, t0) = 0.
pub fn glue(fields: RegionalFields, geometry: &Geometry) -> Result<GluedSolution> {
    let RegionalFields {
        mut q1,
        t,
        mut q3,
        mut q4,
        bridge,
    } = fields;
    let t0 = geometry.t0();
    let eps = q1.eps;
    for f in [&q1, &t, &q3, &q4] {
        if !same(f.t0, t0) || !same(f.eps, eps) {
            return Err(Error::Argument(format!(
                "inconsistent t0/eps: {} has ({}, {}), expected ({t0}, {eps})",
                f.region, f.t0, f.eps
            )));
        }
    }
    let expected = [Region::Q1, Region::T, Region::Q3, Region::Q4];
    for (f, r) in [&q1, &t, &q3, &q4].iter().zip(expected) {
        if f.region != r {
            return Err(Error::Argument(format!("expected a {r} field, got {}", f.region)));
        }
    }

    let mut shifts = GaugeShifts::default();
    let last = q1.last();
    shifts.q1 = geometry.b.trace_u(last.t, TRACE_POINTS)?.u_value - last.u[q1.n];
    let last = q3.last();
    shifts.q3 = geometry.c.trace_u(last.t, TRACE_POINTS)?.u_value - last.u[0];
    // The backward field runs in reversed time; its first level sits at t0 - eps.
    let first = t.first();
    let t_phys = t0 - first.t;
    let mismatch = (geometry.b.trace_u(t_phys, TRACE_POINTS)?.u_value - first.u[0])
        + (geometry.c.trace_u(t_phys, TRACE_POINTS)?.u_value - first.u[t.n]);
    shifts.q2 = 0.5 * mismatch;
    shifts.q4 = -q4
        .sample(3.0, t0)
        .ok_or_else(|| Error::Argument("Q4 does not cover (3, t0)".into()))?
        .u;

    q1.shift(shifts.q1);
    q3.shift(shifts.q3);
    q4.shift(shifts.q4);
    let mut q2 = t.reflected();
    q2.shift(shifts.q2);
    Ok(GluedSolution {
        geometry: geometry.clone(),
        t0,
        eps,
        q1,
        q2,
        q3,
        q4,
        shifts,
        bridge,
    })
}

/// Clamps t into the stored span of a field.
fn clamp_time(field: &SpaceTimeField, t: f64) -> f64 {
    let (lo, hi) = field.time_span();
    t.clamp(lo, hi)
}

/// Maps r at time t to the point with the same s coordinate at the nearest
/// stored time. The identity inside the stored span; in the gaps a solve
/// leaves near the pinch the nearest level is stretched onto the current
/// edges.
fn stored_point(field: &SpaceTimeField, r: f64, t: f64) -> (f64, f64) {
    let ts = clamp_time(field, t);
    if ts == t {
        return (r, t);
    }
    let ((a, b), (a_s, b_s)) = (field.edges_at(t), field.edges_at(ts));
    let s = if b > a { ((r - a) / (b - a)).clamp(0.0, 1.0) } else { 0.5 };
    (a_s + s * (b_s - a_s), ts)
}

/// Node (r, u_r) pairs of one field at time t, stretched as in [`stored_point`].
fn field_nodes(field: &SpaceTimeField, t: f64) -> Vec<(f64, f64)> {
    let (a, b) = field.edges_at(t);
    let Some(nodes) = field.nodes_at(clamp_time(field, t)) else {
        return Vec::new();
    };
    let n = field.n as f64;
    nodes
        .into_iter()
        .enumerate()
        .map(|(i, (_, ur))| (a + (b - a) * i as f64 / n, ur))
        .collect()
}

impl GluedSolution {
    pub fn fields(&self) -> [&SpaceTimeField; 4] {
        [&self.q1, &self.q2, &self.q3, &self.q4]
    }

    /// Region owning (r, t); interfaces belong to the forward side.
    pub fn region_at(&self, r: f64, t: f64) -> Option<Region> {
        let q4_end = self.q4.time_span().1;
        if !(1.0..=5.0).contains(&r) || t < 0.0 || t > q4_end {
            return None;
        }
        if t >= self.t0 {
            return Some(Region::Q4);
        }
        let (b, c) = (self.geometry.beta.eval(t, 0).ok()?, self.geometry.gamma.eval(t, 0).ok()?);
        Some(if r <= b {
            Region::Q1
        } else if r < c {
            Region::Q2
        } else {
            Region::Q3
        })
    }

    fn field(&self, region: Region) -> &SpaceTimeField {
        match region {
            Region::Q1 => &self.q1,
            Region::Q3 => &self.q3,
            Region::Q4 => &self.q4,
            _ => &self.q2,
        }
    }

    /// u, u_r, u_rr at (r, t). Times in the gaps a regional solve leaves
    /// near the pinch use the nearest stored level, see [`stored_point`].
    pub fn sample(&self, r: f64, t: f64) -> Option<(Region, PointValue)> {
        let region = self.region_at(r, t)?;
        let f = self.field(region);
        let (r, t) = stored_point(f, r, t);
        let (a, b) = f.edges_at(t);
        f.sample(r.clamp(a, b), t).map(|p| (region, p))
    }

    /// (r, u_r) at every node covering [1, 5] at time t, sorted by r.
    pub fn nodes_at(&self, t: f64) -> Vec<(f64, f64)> {
        let fields: Vec<&SpaceTimeField> = if t >= self.t0 {
            vec![&self.q4]
        } else {
            vec![&self.q1, &self.q2, &self.q3]
        };
        let mut out: Vec<(f64, f64)> = fields.into_iter().flat_map(|f| field_nodes(f, t)).collect();
        // Stable: equal r keeps the left region first.
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        out
    }

    /// Maximal intervals where |u_r| > 1 at time t, with crossings located
    /// by linear interpolation between nodes.
    pub fn classify_regions(&self, t: f64) -> Vec<(f64, f64)> {
        supercritical_intervals(&self.nodes_at(t))
    }

    pub fn headline_checks(&self) -> HeadlineChecks {
        let cell = |f: &SpaceTimeField| f.first().r[1] - f.first().r[0];
        let h = cell(&self.q1).max(cell(&self.q3));
        let initial_set = self.classify_regions(0.0);
        let start_error = match initial_set.as_slice() {
            [(a, b)] => (a - 2.0).abs().max((b - 4.0).abs()),
            _ => f64::INFINITY,
        };
        let (lo, hi) = (1.05 * self.t0, 2.0 * self.t0);
        let late: Vec<_> = self.q4.levels.iter().filter(|l| l.t >= lo && l.t <= hi).collect();
        let max_ur_after = late
            .iter()
            .flat_map(|l| l.ur.iter())
            .fold(0.0_f64, |m, v| m.max(v.abs()));
        HeadlineChecks {
            h,
            start_error,
            transcritical_start: start_error <= 2.0 * h,
            initial_set,
            late_levels: late.len(),
            max_ur_after,
            extinct: !late.is_empty() && max_ur_after < 1.0,
        }
    }

    /// Jumps across the interfaces and across t = t0.
    pub fn seams(&self) -> SeamReport {
        let mut seams = Vec::with_capacity(3);
        let q2_end = self.q2.time_span().1;
        for (name, side, node_side, node_q2) in [
            ("gamma1", &self.q1, self.q1.n, 0),
            ("gamma3", &self.q3, 0, self.q2.n),
        ] {
            let points: Vec<SeamPoint> = side
                .levels
                .iter()
                .filter(|l| l.t <= q2_end)
                .filter_map(|l| {
                    let q = edge_at(&self.q2, node_q2, l.t)?;
                    Some(SeamPoint {
                        t: l.t,
                        r: l.r[node_side],
                        u_jump: q.u - l.u[node_side],
                        ur_jump: q.ur - l.ur[node_side],
                        urr_jump: q.urr - l.urr[node_side],
                    })
                })
                .collect();
            seams.push(seam(name, points));
        }
        let t0 = self.t0;
        let mut points = Vec::new();
        for f in [&self.q1, &self.q3] {
            let l = f.last();
            for i in 0..=f.n {
                if let Some(p) = self.q4.sample(l.r[i], t0) {
                    points.push(SeamPoint {
                        t: t0,
                        r: l.r[i],
                        u_jump: p.u - l.u[i],
                        ur_jump: p.ur - l.ur[i],
                        urr_jump: p.urr - l.urr[i],
                    });
                }
            }
        }
        seams.push(seam("t0", points));
        SeamReport {
            eps: self.eps,
            n: self.q1.n,
            seams,
        }
    }

    /// Global field CSV at `path` (solver schema, regions q1, q2, q3, q4)
    /// and `seams.csv` next to it.
    pub fn export_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = csv::Writer::from_writer(std::io::BufWriter::new(file));
        for f in self.fields() {
            f.write_rows(&mut out)?;
        }
        out.flush().map_err(|e| Error::io(path, e))?;
        let seams_path = path.with_file_name("seams.csv");
        let file = std::fs::File::create(&seams_path).map_err(|e| Error::io(&seams_path, e))?;
        let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
        for s in self.seams().seams {
            for p in &s.points {
                w.serialize(SeamRow::new(&s.name, p))?;
            }
        }
        w.flush().map_err(|e| Error::io(&seams_path, e))?;
        Ok(())
    }

    /// Rows the global CSV holds.
    pub fn exported_rows(&self) -> usize {
        self.fields()
            .iter()
            .map(|f| f.thinned_indices(crate::solver::MAX_EXPORT_LEVELS).len() * (f.n + 1))
            .sum()
    }
}

/// Flat CSV row; csv cannot serialize flattened structs.
#[derive(Serialize, Deserialize)]
struct SeamRow {
    seam: String,
    t: f64,
    r: f64,
    u_jump: f64,
    ur_jump: f64,
    urr_jump: f64,
}

impl SeamRow {
    fn new(seam: &str, p: &SeamPoint) -> Self {
        Self {
            seam: seam.into(),
            t: p.t,
            r: p.r,
            u_jump: p.u_jump,
            ur_jump: p.ur_jump,
            urr_jump: p.urr_jump,
        }
    }

    fn into_pair(self) -> (String, SeamPoint) {
        let point = SeamPoint {
            t: self.t,
            r: self.r,
            u_jump: self.u_jump,
            ur_jump: self.ur_jump,
            urr_jump: self.urr_jump,
        };
        (self.seam, point)
    }
}

/// Reads `seams.csv` back as (seam name, point) pairs.
pub fn read_seams_csv<R: std::io::Read>(reader: R) -> Result<Vec<(String, SeamPoint)>> {
    let mut rdr = csv::Reader::from_reader(reader);
    rdr.deserialize::<SeamRow>()
        .map(|row| row.map(SeamRow::into_pair).map_err(Error::from))
        .collect()
}

fn seam(name: &str, points: Vec<SeamPoint>) -> Seam {
    let mut max_jump = [0.0_f64; 3];
    for p in &points {
        max_jump[0] = max_jump[0].max(p.u_jump.abs());
        max_jump[1] = max_jump[1].max(p.ur_jump.abs());
        max_jump[2] = max_jump[2].max(p.urr_jump.abs());
    }
    Seam {
        name: name.into(),
        points,
        max_jump,
    }
}

/// Intervals of sorted (r, u_r) samples where |u_r| > 1.
pub fn supercritical_intervals(nodes: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::new();
    let Some(&(r0, v0)) = nodes.first() else {
        return out;
    };
    let mut start = (v0.abs() > 1.0).then_some(r0);
    for w in nodes.windows(2) {
        let ((ra, va), (rb, vb)) = (w[0], w[1]);
        let (ina, inb) = (va.abs() > 1.0, vb.abs() > 1.0);
        if ina == inb {
            continue;
        }
        // |u_r| - 1 changes sign between the two samples.
        let (fa, fb) = (va.abs() - 1.0, vb.abs() - 1.0);
        let x = if rb > ra { ra + (rb - ra) * fa / (fa - fb) } else { ra };
        if inb {
            start = Some(x);
        } else if let Some(s) = start.take() {
            out.push((s, x));
        }
    }
    if let (Some(s), Some(&(r, _))) = (start, nodes.last()) {
        out.push((s, r));
    }
    // Touching intervals (a seam sample pair inside the set) are merged.
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(out.len());
    for iv in out {
        match merged.last_mut() {
            Some(prev) if iv.0 <= prev.1 => prev.1 = prev.1.max(iv.1),
            _ => merged.push(iv),
        }
    }
    merged
}
