//! Explicit sub- and supersolutions of the equations for v = u_r and w = u_rr.
//!
//! Q side: t in [0, t0], r in [1, beta(t)], x = beta(t) - r.
//! T side: t in [eps, t0], r in [B(t), C(t)] with B(t) = beta(t0 - t),
//! C(t) = gamma(t0 - t), x = r - B(t) and y = r - C(t) <= 0.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{BoundaryCurvature, Geometry};
use crate::nonlinearity::{Constants, Potential, Side};
use crate::solver::{InitialDatum, Region};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Subsolution,
    Supersolution,
}

/// Equation the candidate is compared against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Target {
    #[serde(rename = "v_eq_q1")]
    VQ1,
    #[serde(rename = "w_eq_q1")]
    WQ1,
    #[serde(rename = "v_eq_t")]
    VT,
    #[serde(rename = "w_eq_t")]
    WT,
}

impl Target {
    pub fn side(self) -> Side {
        match self {
            Target::VQ1 | Target::WQ1 => Side::Forward,
            Target::VT | Target::WT => Side::Backward,
        }
    }

    pub fn region(self) -> Region {
        match self.side() {
            Side::Forward => Region::Q1,
            Side::Backward => Region::T,
        }
    }

    /// Whether the unknown is w = u_rr (otherwise v = u_r).
    pub fn is_second_derivative(self) -> bool {
        matches!(self, Target::WQ1 | Target::WT)
    }
}

/// `z` and the derivatives entering the differential inequality.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CandidateJet {
    pub z: f64,
    pub zr: f64,
    pub zrr: f64,
    pub zt: f64,
}

/// Where the differential inequality is required.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ValidityBox {
    pub t_lo: f64,
    pub t_hi: f64,
    /// Only points with z in this range are checked (a priori bounds on the
    /// true solution make the rest irrelevant).
    pub z_range: Option<(f64, f64)>,
}

type Evaluator = Arc<dyn Fn(f64, f64) -> CandidateJet + Send + Sync>;

#[derive(Clone)]
pub struct CandidateFunction {
    pub name: String,
    pub role: Role,
    pub target: Target,
    pub validity: ValidityBox,
    eval: Evaluator,
}

impl fmt::Debug for CandidateFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CandidateFunction")
            .field("name", &self.name)
            .field("role", &self.role)
            .field("target", &self.target)
            .field("validity", &self.validity)
            .finish()
    }
}

impl CandidateFunction {
    pub fn new<F>(name: impl Into<String>, role: Role, target: Target, validity: ValidityBox, eval: F) -> Self
    where
        F: Fn(f64, f64) -> CandidateJet + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            role,
            target,
            validity,
            eval: Arc::new(eval),
        }
    }

    pub fn eval(&self, r: f64, t: f64) -> CandidateJet {
        (self.eval)(r, t)
    }

    pub fn value(&self, r: f64, t: f64) -> f64 {
        self.eval(r, t).z
    }
}

/// Interface data at one time, in the time variable of the side.
#[derive(Clone, Copy, Debug)]
pub(crate) struct EdgeState {
    pub pos: f64,
    /// d pos / dt in the side's own time.
    pub vel: f64,
    pub curv: f64,
    /// d curv / dt in the side's own time.
    pub dcurv: f64,
}

/// Edge state of the Q side (t is physical time) or of the T side (the
/// interface is read at t0 - t).
pub(crate) fn edge_state(bc: &BoundaryCurvature, t: f64, reversed: bool) -> EdgeState {
    let iface = bc.interface();
    if reversed {
        let tau = iface.t0() - t;
        EdgeState {
            pos: iface.position(tau),
            vel: -iface.velocity(tau),
            curv: bc.value(tau),
            dcurv: -bc.slope(tau),
        }
    } else {
        EdgeState {
            pos: iface.position(t),
            vel: iface.velocity(t),
            curv: bc.value(t),
            dcurv: bc.slope(t),
        }
    }
}

/// All candidates of one or both sides plus the data they were built from.
#[derive(Clone, Debug)]
pub struct Catalog {
    pub geometry: Geometry,
    pub constants: Constants,
    pub eps: f64,
    /// t0 <= t0_max. The candidates are built regardless; outside this range
    /// the comparison checks are expected to fail somewhere.
    pub t0_admissible: bool,
    pub initial: InitialDatum,
    /// eta of the Q-side interior supersolution (None if the side is absent).
    pub eta_q: Option<f64>,
    /// eta of the T-side interior subsolution.
    pub eta_t: Option<f64>,
    pub candidates: Vec<CandidateFunction>,
}

impl Catalog {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&CandidateFunction> {
        self.candidates.iter().find(|c| c.name == name)
    }

    pub fn for_region(&self, region: Region) -> impl Iterator<Item = &CandidateFunction> {
        self.candidates.iter().filter(move |c| c.target.region() == region)
    }
}

/// Both sides: 8 Q-side and 11 T-side candidates. Requires eps < t0.
pub fn catalog(geometry: &Geometry, constants: &Constants, eps: f64, initial: &InitialDatum) -> Result<Catalog> {
    let mut out = catalog_side(geometry, constants, eps, initial, Side::Forward)?;
    let t_side = catalog_side(geometry, constants, eps, initial, Side::Backward)?;
    out.eta_t = t_side.eta_t;
    out.candidates.extend(t_side.candidates);
    out.candidates.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(out)
}

/// One side only. The Q side needs the Q1 initial datum; the T side needs
/// eps < t0.
pub fn catalog_side(
    geometry: &Geometry,
    constants: &Constants,
    eps: f64,
    initial: &InitialDatum,
    side: Side,
) -> Result<Catalog> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Argument(format!("eps must lie in (0, 1), got {eps}")));
    }
    let t0 = geometry.t0();
    let mut cat = Catalog {
        t0_admissible: t0 <= constants.t0_max * (1.0 + 1e-12),
        geometry: geometry.clone(),
        constants: constants.clone(),
        eps,
        initial: initial.clone(),
        eta_q: None,
        eta_t: None,
        candidates: Vec::new(),
    };
    match side {
        Side::Forward => {
            if initial.region() != Region::Q1 {
                return Err(Error::Argument("the Q-side catalog needs the Q1 initial datum".into()));
            }
            let eta = eta_q(geometry, constants, initial)?;
            cat.eta_q = Some(eta);
            cat.candidates = q_side(geometry, constants, eps, eta);
        }
        Side::Backward => {
            if eps >= t0 {
                return Err(Error::Configuration(format!(
                    "the T region needs eps < t0, got eps = {eps} and t0 = {t0:e}"
                )));
            }
            let eta = eta_t(geometry, constants);
            cat.eta_t = Some(eta);
            cat.candidates = t_side(geometry, constants, eps, eta);
        }
    }
    cat.candidates.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(cat)
}

/// Samples of r in [1, 2) for the infimum in the Q-side eta.
const ETA_SAMPLES: usize = 20_000;

/// min(1/8, inf (1 - u0r) / ((2 - r)(4 - r)), (1/9)(1/t0 + 20 gamma2)^-1 phi'(1/2)).
pub fn eta_q(geometry: &Geometry, constants: &Constants, initial: &InitialDatum) -> Result<f64> {
    let nl = geometry.nonlinearity();
    let t0 = geometry.t0();
    let inf = (0..ETA_SAMPLES)
        .map(|k| {
            let r = 1.0 + k as f64 / ETA_SAMPLES as f64;
            (1.0 - initial.jet(r)[1]) / ((2.0 - r) * (4.0 - r))
        })
        .fold(f64::INFINITY, f64::min);
    let third = (1.0 / t0 + 20.0 * constants.gamma2).recip() * nl.d1(0.5) / 9.0;
    let eta = (0.125_f64).min(inf).min(third);
    if !(eta > 0.0) {
        return Err(Error::InfeasibleDatum(format!(
            "eta = {eta:e} <= 0 (sampled infimum {inf:e})"
        )));
    }
    Ok(eta)
}

/// min(t0, (1/16)(1/t0 + 20 gamma2)^-1 phi'(3)); the factor 1/16 matches
/// the lower bound phi'(z)/r^2 >= phi'(3)/16 the inequality relies on.
pub fn eta_t(geometry: &Geometry, constants: &Constants) -> f64 {
    let t0 = geometry.t0();
    let bound = (1.0 / t0 + 20.0 * constants.gamma2).recip() * geometry.nonlinearity().d1(3.0);
    t0.min(bound / 16.0)
}

fn q_side(geometry: &Geometry, constants: &Constants, eps: f64, eta: f64) -> Vec<CandidateFunction> {
    let t0 = geometry.t0();
    let (g0, g1, g2) = (constants.gamma0, constants.gamma1, constants.gamma2);
    let whole = ValidityBox {
        t_lo: 0.0,
        t_hi: t0,
        z_range: None,
    };
    let v_range = ValidityBox {
        z_range: Some((0.0, 1.0)),
        ..whole
    };
    let b = geometry.b.clone();
    let edge = move |t: f64| edge_state(&b, t, false);
    let constant = |z: f64| move |_: f64, _: f64| CandidateJet {
        z,
        ..CandidateJet::default()
    };
    let mut out = vec![
        CandidateFunction::new("q_v_zero", Role::Subsolution, Target::VQ1, v_range, constant(0.0)),
        CandidateFunction::new("q_v_one_minus_eps", Role::Supersolution, Target::VQ1, v_range, constant(1.0 - eps)),
        CandidateFunction::new("q_v_eta", Role::Supersolution, Target::VQ1, v_range, move |r, t| {
            let d = r - 3.0;
            CandidateJet {
                z: 1.0 - eta * (d * d + t / t0 - 1.0),
                zr: -2.0 * eta * d,
                zrr: -2.0 * eta,
                zt: -eta / t0,
            }
        }),
    ];

    // k(t) = 20 (1 - 800 gamma2 t)^{-1/2} solves k' = gamma2 k^3.
    let k_blowup = 1.0 / (800.0 * g2);
    let k_box = ValidityBox {
        t_hi: t0.min(k_blowup * (1.0 - 1e-9)),
        ..v_range
    };
    out.push(CandidateFunction::new("q_v_fixed_boundary", Role::Supersolution, Target::VQ1, k_box, move |r, t| {
        let k = 20.0 / (1.0 - 800.0 * g2 * t).sqrt();
        let e = (1.0 - r).exp();
        CandidateJet {
            z: k * (1.0 - e),
            zr: k * e,
            zrr: -k * e,
            zt: g2 * k * k * k * (1.0 - e),
        }
    }));

    let e1 = edge.clone();
    out.push(CandidateFunction::new("q_v_moving_sub", Role::Subsolution, Target::VQ1, v_range, move |r, t| {
        let s = e1(t);
        let x = s.pos - r;
        let slope = s.curv + eps;
        CandidateJet {
            z: 1.0 - eps - slope * x - g0 * x * x,
            zr: slope + 2.0 * g0 * x,
            zrr: -2.0 * g0,
            zt: -s.dcurv * x - slope * s.vel - 2.0 * g0 * x * s.vel,
        }
    }));
    let e2 = edge.clone();
    out.push(CandidateFunction::new("q_v_moving_super", Role::Supersolution, Target::VQ1, v_range, move |r, t| {
        let s = e2(t);
        let x = s.pos - r;
        let slope = s.curv - eps;
        CandidateJet {
            z: 1.0 - eps - slope * x + g0 * x * x,
            zr: slope - 2.0 * g0 * x,
            zrr: 2.0 * g0,
            zt: -s.dcurv * x - slope * s.vel + 2.0 * g0 * x * s.vel,
        }
    }));
    for (name, role, sign) in [
        ("q_w_sub", Role::Subsolution, -1.0),
        ("q_w_super", Role::Supersolution, 1.0),
    ] {
        let e = edge.clone();
        out.push(CandidateFunction::new(name, role, Target::WQ1, whole, move |r, t| {
            let s = e(t);
            let x = s.pos - r;
            CandidateJet {
                z: s.curv + sign * (eps + g1 * x),
                zr: -sign * g1,
                zrr: 0.0,
                zt: s.dcurv + sign * g1 * s.vel,
            }
        }));
    }
    out
}

fn t_side(geometry: &Geometry, constants: &Constants, eps: f64, eta: f64) -> Vec<CandidateFunction> {
    let t0 = geometry.t0();
    let phi1 = geometry.phi1();
    let (g0, g1) = (constants.gamma0, constants.gamma1);
    let root = eps.sqrt();
    let whole = ValidityBox {
        t_lo: eps,
        t_hi: t0,
        z_range: None,
    };
    let v_range = ValidityBox {
        z_range: Some((1.0, 3.0)),
        ..whole
    };
    let (b, c) = (geometry.b.clone(), geometry.c.clone());
    let left = move |t: f64| edge_state(&b, t, true);
    let right = move |t: f64| edge_state(&c, t, true);
    let mut out = vec![
        CandidateFunction::new("t_v_lower", Role::Subsolution, Target::VT, v_range, move |_, _| CandidateJet {
            z: 1.0 + eps,
            ..CandidateJet::default()
        }),
        CandidateFunction::new("t_v_upper", Role::Supersolution, Target::VT, v_range, move |_, t| CandidateJet {
            z: 2.0 + phi1 * t,
            zt: phi1,
            ..CandidateJet::default()
        }),
        t_eta_candidate(t0, eps, eta),
    ];

    // Quadratic pinches at each edge; d = signed distance from the edge.
    // z = 1 + eps + (k + s1 sqrt(eps)) d + s2 g0 d^2 with k the edge curvature.
    for (name, role, is_left, s1, s2) in [
        ("t_v_left_sub", Role::Subsolution, true, -1.0, -1.0),
        ("t_v_left_super", Role::Supersolution, true, 1.0, 1.0),
        ("t_v_right_sub", Role::Subsolution, false, 1.0, -1.0),
        ("t_v_right_super", Role::Supersolution, false, -1.0, 1.0),
    ] {
        let (l, r_) = (left.clone(), right.clone());
        out.push(CandidateFunction::new(name, role, Target::VT, v_range, move |r, t| {
            let s = if is_left { l(t) } else { r_(t) };
            let d = r - s.pos;
            let slope = s.curv + s1 * root;
            CandidateJet {
                z: 1.0 + eps + slope * d + s2 * g0 * d * d,
                zr: slope + 2.0 * s2 * g0 * d,
                zrr: 2.0 * s2 * g0,
                zt: s.dcurv * d - slope * s.vel - 2.0 * s2 * g0 * d * s.vel,
            }
        }));
    }

    // Linear envelopes of w: z = k + s (sqrt(eps) + g1 |d|).
    for (name, role, is_left, sign) in [
        ("t_w_left_sub", Role::Subsolution, true, -1.0),
        ("t_w_left_super", Role::Supersolution, true, 1.0),
        ("t_w_right_sub", Role::Subsolution, false, -1.0),
        ("t_w_right_super", Role::Supersolution, false, 1.0),
    ] {
        let (l, r_) = (left.clone(), right.clone());
        out.push(CandidateFunction::new(name, role, Target::WT, whole, move |r, t| {
            let s = if is_left { l(t) } else { r_(t) };
            // |d| = r - B on the left, C - r on the right.
            let (dist, ddist_r, ddist_t) = if is_left {
                (r - s.pos, 1.0, -s.vel)
            } else {
                (s.pos - r, -1.0, s.vel)
            };
            CandidateJet {
                z: s.curv + sign * (root + g1 * dist),
                zr: sign * g1 * ddist_r,
                zrr: 0.0,
                zt: s.dcurv + sign * g1 * ddist_t,
            }
        }));
    }
    out
}

/// z = 1 + eta (t/t0 - (r - 3)^2), the T-side interior subsolution.
pub(crate) fn t_eta_candidate(t0: f64, eps: f64, eta: f64) -> CandidateFunction {
    let v_range = ValidityBox {
        t_lo: eps,
        t_hi: t0,
        z_range: Some((1.0, 3.0)),
    };
    CandidateFunction::new("t_v_eta", Role::Subsolution, Target::VT, v_range, move |r, t| {
        let d = r - 3.0;
        CandidateJet {
            z: 1.0 + eta * (t / t0 - d * d),
            zr: -2.0 * eta * d,
            zrr: -2.0 * eta,
            zt: eta / t0,
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinearity::{compute_constants, Nonlinearity};
    use crate::solver::{build_u0, ShapeParams};
    use crate::verification::check_candidate;

    fn setup(t0: Option<f64>) -> (Geometry, Constants, InitialDatum) {
        let nl = Nonlinearity::log_model();
        let k = compute_constants(&nl, 4000).unwrap();
        let g = Geometry::new(&nl, t0.unwrap_or(k.t0_max)).unwrap();
        let u0 = build_u0(Region::Q1, &g.b, ShapeParams::default()).unwrap();
        (g, k, u0)
    }

    #[test]
    fn catalog_sizes() {
        let (g, k, u0) = setup(None);
        let eps = g.t0() / 4.0;
        let q = catalog_side(&g, &k, eps, &u0, Side::Forward).unwrap();
        assert_eq!(q.len(), 8);
        let t = catalog_side(&g, &k, eps, &u0, Side::Backward).unwrap();
        assert_eq!(t.len(), 11);
        let all = catalog(&g, &k, eps, &u0).unwrap();
        assert_eq!(all.len(), 19);
        assert_eq!(all.for_region(Region::Q1).count(), 8);
        let names: Vec<_> = all.candidates.iter().map(|c| c.name.as_str()).collect();
        let mut sorted = names.clone();
        sorted.sort_unstable();
        assert_eq!(names, sorted);
    }

    #[test]
    fn fixed_boundary_supersolution_starts_at_twenty() {
        let (g, k, u0) = setup(None);
        let cat = catalog_side(&g, &k, 0.05, &u0, Side::Forward).unwrap();
        let c = cat.get("q_v_fixed_boundary").unwrap();
        // z_r(1, 0) = k(0).
        assert_eq!(c.eval(1.0, 0.0).zr, 20.0);
        assert_eq!(c.value(1.0, 0.0), 0.0);
    }

    #[test]
    fn eta_is_the_smallest_constraint() {
        let (g, k, u0) = setup(None);
        let eta = eta_q(&g, &k, &u0).unwrap();
        let third = (1.0 / g.t0() + 20.0 * k.gamma2).recip() * g.nonlinearity().d1(0.5) / 9.0;
        assert!(eta <= 0.125 && eta <= third * (1.0 + 1e-15));
        // At t0_max the third constraint binds: it is of order t0.
        assert_eq!(eta, third);
    }

    #[test]
    fn backward_side_needs_eps_below_t0() {
        let (g, k, u0) = setup(Some(0.01));
        assert!(matches!(
            catalog(&g, &k, 0.05, &u0),
            Err(Error::Configuration(_))
        ));
        assert!(matches!(catalog(&g, &k, 0.0, &u0), Err(Error::Argument(_))));
        assert!(catalog_side(&g, &k, 0.05, &u0, Side::Forward).is_ok());
    }

    #[test]
    fn constant_candidates_pass() {
        let (g, k, u0) = setup(None);
        let cat = catalog_side(&g, &k, 0.05, &u0, Side::Forward).unwrap();
        for name in ["q_v_zero", "q_v_one_minus_eps"] {
            let rep = check_candidate(cat.get(name).unwrap(), &cat, 200, 200).unwrap();
            assert!(rep.passed, "{name}: {rep:?}");
        }
        let eps = g.t0() / 4.0;
        let cat = catalog_side(&g, &k, eps, &u0, Side::Backward).unwrap();
        let rep = check_candidate(cat.get("t_v_upper").unwrap(), &cat, 200, 200).unwrap();
        assert!(rep.passed, "{rep:?}");
    }

    #[test]
    fn printed_backward_eta_breaks_the_inequality() {
        let (g, k, u0) = setup(None);
        let t0 = g.t0();
        let eps = t0 / 4.0;
        let cat = catalog_side(&g, &k, eps, &u0, Side::Backward).unwrap();
        let printed = t0.min((1.0 / t0 + 20.0 * k.gamma2).recip() * g.nonlinearity().d1(3.0));
        let rep = check_candidate(&t_eta_candidate(t0, eps, printed), &cat, 200, 200).unwrap();
        assert!(!rep.passed);
        assert!(rep.interior.margin < 0.0);
        let used = check_candidate(cat.get("t_v_eta").unwrap(), &cat, 200, 200).unwrap();
        assert!(used.passed);
    }

    #[test]
    fn too_few_samples_is_an_argument_error() {
        let (g, k, u0) = setup(None);
        let cat = catalog_side(&g, &k, 0.05, &u0, Side::Forward).unwrap();
        let c = cat.get("q_v_zero").unwrap();
        assert!(matches!(check_candidate(c, &cat, 49, 200), Err(Error::Argument(_))));
    }
}
