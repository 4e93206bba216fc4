use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BoundaryCurvature, Geometry, Interface, InterfaceKind};
use crate::nonlinearity::{regularize, Nonlinearity, RegularizedNonlinearity, Side};

/// Space-time regions of the construction. `T` is the time-reversed form of
/// `Q2`; only `Q1`, `T`, `Q3` and `Q4` are ever solved.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    Q1,
    Q2,
    Q3,
    Q4,
    T,
}

impl Region {
    pub fn label(self) -> &'static str {
        match self {
            Region::Q1 => "q1",
            Region::Q2 => "q2",
            Region::Q3 => "q3",
            Region::Q4 => "q4",
            Region::T => "t",
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Region {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "q1" => Ok(Region::Q1),
            "q2" => Ok(Region::Q2),
            "q3" => Ok(Region::Q3),
            "q4" => Ok(Region::Q4),
            "t" => Ok(Region::T),
            other => Err(Error::Argument(format!("unknown region `{other}`"))),
        }
    }
}

/// Where a boundary sits. A reversed interface is traversed backwards in
/// time: position `I(t0 - t)`.
#[derive(Clone, Copy, Debug)]
pub enum Edge {
    Fixed(f64),
    Moving { interface: Interface, reversed: bool },
}

impl Edge {
    pub fn position(&self, t: f64) -> f64 {
        match *self {
            Edge::Fixed(r) => r,
            Edge::Moving {
                interface,
                reversed: false,
            } => interface.position(t),
            Edge::Moving {
                interface,
                reversed: true,
            } => interface.position(interface.t0() - t),
        }
    }

    pub fn velocity(&self, t: f64) -> f64 {
        match *self {
            Edge::Fixed(_) => 0.0,
            Edge::Moving {
                interface,
                reversed: false,
            } => interface.velocity(t),
            Edge::Moving {
                interface,
                reversed: true,
            } => -interface.velocity(interface.t0() - t),
        }
    }

    pub fn is_moving(&self) -> bool {
        matches!(self, Edge::Moving { .. })
    }
}

/// Neumann condition `u_r = flux` on one edge.
#[derive(Clone, Copy, Debug)]
pub struct BoundaryDescriptor {
    pub edge: Edge,
    pub flux: f64,
}

/// Which end of the time span, if any, sits at the pinch of the interfaces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Corner {
    None,
    AtStart,
    AtEnd,
}

/// Coefficients of the shape perturbation `x(1-x)^2 (c0 + c1 x)` added to
/// the minimal-jerk initial slope.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ShapeParams {
    pub c0: f64,
    pub c1: f64,
}

type Profile = Arc<dyn Fn(f64) -> [f64; 4] + Send + Sync>;

#[derive(Clone)]
enum Datum {
    /// u = orient * U(orient * (r - origin)) with U a polynomial in x.
    Poly {
        coeffs: Vec<f64>,
        origin: f64,
        orient: f64,
    },
    Linear {
        slope: f64,
    },
    Function(Profile),
}

/// Initial profile with closed-form derivatives up to third order.
#[derive(Clone)]
pub struct InitialDatum {
    region: Region,
    datum: Datum,
    shape: Option<ShapeParams>,
}

impl fmt::Debug for InitialDatum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.datum {
            Datum::Poly { coeffs, .. } => format!("poly{coeffs:?}"),
            Datum::Linear { slope } => format!("linear({slope})"),
            Datum::Function(_) => "function".into(),
        };
        f.debug_struct("InitialDatum")
            .field("region", &self.region)
            .field("datum", &kind)
            .field("shape", &self.shape)
            .finish()
    }
}

impl InitialDatum {
    pub fn linear(region: Region, slope: f64) -> Self {
        Self {
            region,
            datum: Datum::Linear { slope },
            shape: None,
        }
    }

    pub fn constant(region: Region, value: f64) -> Self {
        Self::from_fn(region, move |_| [value, 0.0, 0.0, 0.0])
    }

    /// `f(r)` returns `[u, u_r, u_rr, u_rrr]`.
    pub fn from_fn<F>(region: Region, f: F) -> Self
    where
        F: Fn(f64) -> [f64; 4] + Send + Sync + 'static,
    {
        Self {
            region,
            datum: Datum::Function(Arc::new(f)),
            shape: None,
        }
    }

    pub fn region(&self) -> Region {
        self.region
    }

    pub fn shape(&self) -> Option<ShapeParams> {
        self.shape
    }

    /// `[u, u_r, u_rr, u_rrr]` at r.
    pub fn jet(&self, r: f64) -> [f64; 4] {
        match &self.datum {
            Datum::Poly {
                coeffs,
                origin,
                orient,
            } => {
                let x = orient * (r - origin);
                let mut out = [0.0; 4];
                let mut sign = *orient;
                for (k, slot) in out.iter_mut().enumerate() {
                    *slot = sign * poly_eval_shifted(coeffs, x, k);
                    sign *= orient;
                }
                out
            }
            Datum::Linear { slope } => [slope * r, *slope, 0.0, 0.0],
            Datum::Function(f) => f(r),
        }
    }

    pub fn value(&self, r: f64) -> f64 {
        self.jet(r)[0]
    }
}

// d^k/dx^k of sum c_j x^j.
fn poly_eval_shifted(coeffs: &[f64], x: f64, k: usize) -> f64 {
    let mut acc = 0.0;
    for j in (k..coeffs.len()).rev() {
        let falling: f64 = (0..k).map(|i| (j - i) as f64).product();
        acc = acc * x + coeffs[j] * falling;
    }
    acc
}

/// Builds the initial datum of `Q1` (on [1, 2]) or `Q3` (on [4, 5]) that
/// matches the boundary curvature of the adjacent interface at t = 0.
pub fn build_u0(region: Region, bc: &BoundaryCurvature, shape: ShapeParams) -> Result<InitialDatum> {
    let (kappa, origin, orient) = match (region, bc.interface().kind()) {
        (Region::Q1, InterfaceKind::Beta) => (bc.value(0.0), 1.0, 1.0),
        (Region::Q3, InterfaceKind::Gamma) => (-bc.value(0.0), 5.0, -1.0),
        _ => {
            return Err(Error::Argument(format!(
                "build_u0 needs Q1 with the left interface or Q3 with the right one, got {region}"
            )))
        }
    };
    let ShapeParams { c0, c1 } = shape;
    // Slope in x: (2-k)x - (1-k)x^2 + x(1-x)^2 (c0 + c1 x).
    let slope = [
        0.0,
        2.0 - kappa + c0,
        -(1.0 - kappa) - 2.0 * c0 + c1,
        c0 - 2.0 * c1,
        c1,
    ];
    let mut coeffs = vec![0.0; slope.len() + 1];
    for (k, &s) in slope.iter().enumerate() {
        coeffs[k + 1] = s / (k + 1) as f64;
    }
    let datum = InitialDatum {
        region,
        datum: Datum::Poly {
            coeffs,
            origin,
            orient,
        },
        shape: Some(shape),
    };
    validate_u0(&datum, kappa, origin, orient)?;
    Ok(datum)
}

fn validate_u0(datum: &InitialDatum, kappa: f64, origin: f64, orient: f64) -> Result<()> {
    const SAMPLES: usize = 10_000;
    let fail = |what: String| Err(Error::InfeasibleDatum(what));
    let at = |x: f64| datum.jet(origin + orient * x);
    // Derivatives in x: slope, curvature and jerk of the mirrored profile.
    let in_x = |x: f64| {
        let j = at(x);
        [j[1], orient * j[2], j[3]]
    };
    let (p0, p1) = (in_x(0.0), in_x(1.0));
    if p0[0].abs() > 1e-12 || (p1[0] - 1.0).abs() > 1e-12 || (p1[1] - kappa).abs() > 1e-12 {
        return fail(format!(
            "compatibility conditions: slope(0) = {}, slope(1) = {}, curvature(1) = {} vs {kappa}",
            p0[0], p1[0], p1[1]
        ));
    }
    for i in 0..=SAMPLES {
        let x = i as f64 / SAMPLES as f64;
        let [p, dp, ddp] = in_x(x);
        if i > 0 && i < SAMPLES && !(0.0..1.0).contains(&p) {
            return fail(format!("slope {p} leaves [0, 1) at x = {x}"));
        }
        if dp.abs() >= 10.0 || ddp.abs() >= 10.0 {
            return fail(format!("curvature {dp} or jerk {ddp} exceeds 10 at x = {x}"));
        }
        let d = 1.0 - x;
        if (p - 1.0 + kappa * d).abs() > 5.0 * d * d + 1e-12 {
            return fail(format!("slope leaves the Taylor band at x = {x}"));
        }
        if (dp - kappa).abs() > 10.0 * d + 1e-12 {
            return fail(format!("curvature leaves the Taylor band at x = {x}"));
        }
    }
    Ok(())
}

pub type Source = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// A fully specified regularised Neumann problem on a (possibly moving)
/// interval.
#[derive(Clone)]
pub struct ProblemSpec {
    pub region: Region,
    pub eps: f64,
    pub t0: f64,
    pub potential: RegularizedNonlinearity,
    pub left: BoundaryDescriptor,
    pub right: BoundaryDescriptor,
    pub initial: InitialDatum,
    /// Factor applied to the initial datum (1 - eps on the Q side).
    pub initial_scale: f64,
    pub t_start: f64,
    pub t_end: f64,
    pub corner: Corner,
    pub source: Option<Source>,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("region", &self.region)
            .field("eps", &self.eps)
            .field("t0", &self.t0)
            .field("left", &self.left)
            .field("right", &self.right)
            .field("t_start", &self.t_start)
            .field("t_end", &self.t_end)
            .field("corner", &self.corner)
            .field("forced", &self.source.is_some())
            .finish()
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(Error::Argument(format!("eps must lie in (0, 1), got {eps}")))
    }
}

impl ProblemSpec {
    /// Forward problem left of the left interface, t in [0, t0].
    pub fn q1(geometry: &Geometry, eps: f64, initial: InitialDatum) -> Result<Self> {
        check_eps(eps)?;
        if initial.region != Region::Q1 {
            return Err(Error::Argument("Q1 needs a Q1 initial datum".into()));
        }
        Ok(Self {
            region: Region::Q1,
            eps,
            t0: geometry.t0(),
            potential: regularize(geometry.nonlinearity(), eps, Side::Forward)?,
            left: BoundaryDescriptor {
                edge: Edge::Fixed(1.0),
                flux: 0.0,
            },
            right: BoundaryDescriptor {
                edge: Edge::Moving {
                    interface: geometry.beta,
                    reversed: false,
                },
                flux: 1.0 - eps,
            },
            initial,
            initial_scale: 1.0 - eps,
            t_start: 0.0,
            t_end: geometry.t0(),
            corner: Corner::AtEnd,
            source: None,
        })
    }

    /// Forward problem right of the right interface, t in [0, t0].
    pub fn q3(geometry: &Geometry, eps: f64, initial: InitialDatum) -> Result<Self> {
        check_eps(eps)?;
        if initial.region != Region::Q3 {
            return Err(Error::Argument("Q3 needs a Q3 initial datum".into()));
        }
        Ok(Self {
            region: Region::Q3,
            eps,
            t0: geometry.t0(),
            potential: regularize(geometry.nonlinearity(), eps, Side::Forward)?,
            left: BoundaryDescriptor {
                edge: Edge::Moving {
                    interface: geometry.gamma,
                    reversed: false,
                },
                flux: 1.0 - eps,
            },
            right: BoundaryDescriptor {
                edge: Edge::Fixed(5.0),
                flux: 0.0,
            },
            initial,
            initial_scale: 1.0 - eps,
            t_start: 0.0,
            t_end: geometry.t0(),
            corner: Corner::AtEnd,
            source: None,
        })
    }

    /// Time-reversed backward problem between the interfaces, t in [eps, t0].
    pub fn t_region(geometry: &Geometry, eps: f64) -> Result<Self> {
        check_eps(eps)?;
        let t0 = geometry.t0();
        if eps >= t0 {
            return Err(Error::Configuration(format!(
                "the backward region needs eps < t0, got eps = {eps}, t0 = {t0}"
            )));
        }
        let moving = |interface| Edge::Moving {
            interface,
            reversed: true,
        };
        Ok(Self {
            region: Region::T,
            eps,
            t0,
            potential: regularize(geometry.nonlinearity(), eps, Side::Backward)?,
            left: BoundaryDescriptor {
                edge: moving(geometry.beta),
                flux: 1.0 + eps,
            },
            right: BoundaryDescriptor {
                edge: moving(geometry.gamma),
                flux: 1.0 + eps,
            },
            initial: InitialDatum::linear(Region::T, 1.0),
            initial_scale: 1.0 + eps,
            t_start: eps,
            t_end: t0,
            corner: Corner::AtStart,
            source: None,
        })
    }

    /// Forward problem on [1, 5] after the pinch, t in [t0, t_end].
    pub fn q4(nl: &Nonlinearity, eps: f64, t0: f64, t_end: f64, initial: InitialDatum) -> Result<Self> {
        check_eps(eps)?;
        if !(t_end > t0) {
            return Err(Error::Argument(format!("Q4 needs t_end > t0, got {t_end} <= {t0}")));
        }
        let fixed = |r| BoundaryDescriptor {
            edge: Edge::Fixed(r),
            flux: 0.0,
        };
        Ok(Self {
            region: Region::Q4,
            eps,
            t0,
            potential: regularize(nl, eps, Side::Forward)?,
            left: fixed(1.0),
            right: fixed(5.0),
            initial,
            initial_scale: 1.0,
            t_start: t0,
            t_end,
            corner: Corner::None,
            source: None,
        })
    }

    /// Fixed interval with arbitrary Neumann data and an optional forcing,
    /// used by manufactured-solution studies.
    #[allow(clippy::too_many_arguments)]
    pub fn fixed_interval(
        potential: RegularizedNonlinearity,
        (lo, hi): (f64, f64),
        (flux_lo, flux_hi): (f64, f64),
        (t_start, t_end): (f64, f64),
        initial: InitialDatum,
        source: Option<Source>,
    ) -> Result<Self> {
        if !(hi > lo && lo > 0.0) || !(t_end > t_start) {
            return Err(Error::Argument("empty interval or time span".into()));
        }
        Ok(Self {
            region: Region::Q4,
            eps: potential.eps(),
            t0: t_start,
            potential,
            left: BoundaryDescriptor {
                edge: Edge::Fixed(lo),
                flux: flux_lo,
            },
            right: BoundaryDescriptor {
                edge: Edge::Fixed(hi),
                flux: flux_hi,
            },
            initial,
            initial_scale: 1.0,
            t_start,
            t_end,
            corner: Corner::None,
            source,
        })
    }

    pub fn with_source(mut self, source: Source) -> Self {
        self.source = Some(source);
        self
    }

    pub fn with_t_end(mut self, t_end: f64) -> Self {
        self.t_end = t_end;
        self
    }

    /// Signed distance-to-pinch factor used to grade the step: 1 away from
    /// any pinch, sqrt(dist / t0) near one.
    pub(crate) fn pinch_distance(&self, t: f64) -> f64 {
        match self.corner {
            Corner::None => self.t0.max(1.0),
            Corner::AtStart => t,
            Corner::AtEnd => self.t0 - t,
        }
    }
}
