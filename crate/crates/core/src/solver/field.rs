use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nonlinearity::RegularizedNonlinearity;

use super::problem::{Edge, ProblemSpec, Region};
use super::scheme::SolveStats;

/// One stored time level. All vectors are indexed by node i = 0..=n.
#[derive(Clone, Debug)]
pub struct Level {
    pub t: f64,
    /// Step that produced this level (0 for the initial one).
    pub dt: f64,
    pub r: Vec<f64>,
    pub u: Vec<f64>,
    pub ur: Vec<f64>,
    pub urr: Vec<f64>,
    pub ut: Vec<f64>,
    pub residual: Vec<f64>,
}

/// Discrete solution of one regional problem together with its frame.
#[derive(Clone)]
pub struct SpaceTimeField {
    pub region: Region,
    pub eps: f64,
    pub t0: f64,
    pub n: usize,
    pub left: Edge,
    pub right: Edge,
    pub left_flux: f64,
    pub right_flux: f64,
    pub potential: RegularizedNonlinearity,
    pub forced: bool,
    pub levels: Vec<Level>,
    pub stats: SolveStats,
}

impl std::fmt::Debug for SpaceTimeField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpaceTimeField")
            .field("region", &self.region)
            .field("eps", &self.eps)
            .field("n", &self.n)
            .field("levels", &self.levels.len())
            .finish()
    }
}

/// Interpolated state at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointValue {
    pub u: f64,
    pub ur: f64,
    pub urr: f64,
}

/// One CSV row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldRow {
    pub region: String,
    pub eps: f64,
    pub t: f64,
    pub r: f64,
    pub u: f64,
    pub ur: f64,
    pub urr: f64,
    pub ut: f64,
    pub residual: f64,
}

/// Upper bound on levels written to disk.
pub const MAX_EXPORT_LEVELS: usize = 200;

impl SpaceTimeField {
    pub(crate) fn new(spec: &ProblemSpec, n: usize, levels: Vec<Level>, stats: SolveStats) -> Self {
        Self {
            region: spec.region,
            eps: spec.eps,
            t0: spec.t0,
            n,
            left: spec.left.edge,
            right: spec.right.edge,
            left_flux: spec.left.flux,
            right_flux: spec.right.flux,
            potential: spec.potential.clone(),
            forced: spec.source.is_some(),
            levels,
            stats,
        }
    }

    pub fn first(&self) -> &Level {
        &self.levels[0]
    }

    pub fn last(&self) -> &Level {
        self.levels.last().expect("a field has at least one level")
    }

    pub fn time_span(&self) -> (f64, f64) {
        (self.first().t, self.last().t)
    }

    /// Cell width in s.
    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Adds a constant to u at every level.
    pub fn shift(&mut self, c: f64) {
        for lvl in &mut self.levels {
            lvl.u.iter_mut().for_each(|x| *x += c);
        }
    }

    /// Same field relabelled as Q2 with time t -> t0 - t and levels reordered
    /// so time increases.
    pub fn reflected(&self) -> Self {
        let mut out = self.clone();
        out.region = Region::Q2;
        out.levels.reverse();
        for lvl in &mut out.levels {
            lvl.t = self.t0 - lvl.t;
            lvl.ut.iter_mut().for_each(|x| *x = -*x);
            lvl.residual.iter_mut().for_each(|x| *x = -*x);
        }
        out.left = match self.left {
            Edge::Moving { interface, .. } => Edge::Moving {
                interface,
                reversed: false,
            },
            e => e,
        };
        out.right = match self.right {
            Edge::Moving { interface, .. } => Edge::Moving {
                interface,
                reversed: false,
            },
            e => e,
        };
        out
    }

    /// Index pair bracketing t and the weight of the upper one.
    pub fn bracket(&self, t: f64) -> Option<(usize, usize, f64)> {
        let (lo, hi) = self.time_span();
        let tol = 1e-12 * (1.0 + hi.abs());
        if t < lo - tol || t > hi + tol {
            return None;
        }
        let k = self.levels.partition_point(|l| l.t <= t);
        if k == 0 {
            return Some((0, 0, 0.0));
        }
        if k >= self.levels.len() {
            let last = self.levels.len() - 1;
            return Some((last, last, 0.0));
        }
        let (a, b) = (&self.levels[k - 1], &self.levels[k]);
        let w = (t - a.t) / (b.t - a.t);
        Some((k - 1, k, w))
    }

    /// Boundary positions at an arbitrary time of the span.
    pub fn edges_at(&self, t: f64) -> (f64, f64) {
        (self.left.position(t), self.right.position(t))
    }

    /// Linear interpolation in s within each bracketing level, then in time.
    pub fn sample(&self, r: f64, t: f64) -> Option<PointValue> {
        let (i0, i1, w) = self.bracket(t)?;
        let (a, b) = self.edges_at(t);
        let tol = 1e-9 * (1.0 + b - a);
        if r < a - tol || r > b + tol {
            return None;
        }
        let s = ((r - a) / (b - a)).clamp(0.0, 1.0);
        let at = |lvl: &Level| {
            let x = s * self.n as f64;
            let i = (x.floor() as usize).min(self.n - 1);
            let f = x - i as f64;
            let lerp = |v: &[f64]| v[i] + f * (v[i + 1] - v[i]);
            PointValue {
                u: lerp(&lvl.u),
                ur: lerp(&lvl.ur),
                urr: lerp(&lvl.urr),
            }
        };
        let (p, q) = (at(&self.levels[i0]), at(&self.levels[i1]));
        Some(PointValue {
            u: p.u + w * (q.u - p.u),
            ur: p.ur + w * (q.ur - p.ur),
            urr: p.urr + w * (q.urr - p.urr),
        })
    }

    /// Node values of (r, u_r) at time t, interpolated between levels at fixed s.
    pub fn nodes_at(&self, t: f64) -> Option<Vec<(f64, f64)>> {
        let (i0, i1, w) = self.bracket(t)?;
        let (a, b) = self.edges_at(t);
        let (p, q) = (&self.levels[i0], &self.levels[i1]);
        Some(
            (0..=self.n)
                .map(|i| {
                    let s = i as f64 / self.n as f64;
                    (a + (b - a) * s, p.ur[i] + w * (q.ur[i] - p.ur[i]))
                })
                .collect(),
        )
    }

    /// Indices of at most `max_levels` levels, evenly spread, first and last kept.
    pub fn thinned_indices(&self, max_levels: usize) -> Vec<usize> {
        let m = self.levels.len();
        if m <= max_levels {
            return (0..m).collect();
        }
        let keep = max_levels.max(2);
        let mut idx: Vec<usize> = (0..keep)
            .map(|k| ((k as f64) * (m - 1) as f64 / (keep - 1) as f64).round() as usize)
            .collect();
        idx.dedup();
        idx
    }

    /// Writes the CSV `region,eps,t,r,u,ur,urr,ut,residual` for at most
    /// `MAX_EXPORT_LEVELS` levels.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        self.write_rows(&mut w)?;
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    /// Appends the rows of [`Self::write_csv`] to an open writer, so several
    /// fields can share one header.
    pub fn write_rows<W: Write>(&self, w: &mut csv::Writer<W>) -> Result<()> {
        for k in self.thinned_indices(MAX_EXPORT_LEVELS) {
            let lvl = &self.levels[k];
            for i in 0..=self.n {
                w.serialize(FieldRow {
                    region: self.region.label().to_string(),
                    eps: self.eps,
                    t: lvl.t,
                    r: lvl.r[i],
                    u: lvl.u[i],
                    ur: lvl.ur[i],
                    urr: lvl.urr[i],
                    ut: lvl.ut[i],
                    residual: lvl.residual[i],
                })?;
            }
        }
        Ok(())
    }

    pub fn export_csv(&self, path: &std::path::Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Reads rows written by [`SpaceTimeField::write_csv`].
pub fn read_field_csv<R: Read>(reader: R) -> Result<Vec<FieldRow>> {
    let mut rdr = csv::Reader::from_reader(reader);
    rdr.deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}
