//! The two interfaces that pinch together at (3, t0), the boundary curvatures
//! they force on a solution, and the value trace along each interface.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::nonlinearity::Nonlinearity;
use crate::quadrature;

/// Left interface `3 - sqrt(1 - t/t0)` or right interface `3 + sqrt(1 - t/t0)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InterfaceKind {
    Beta,
    Gamma,
}

impl InterfaceKind {
    fn sign(self) -> f64 {
        match self {
            InterfaceKind::Beta => -1.0,
            InterfaceKind::Gamma => 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Interface {
    kind: InterfaceKind,
    t0: f64,
}

const T_SLACK: f64 = 1e-12;

impl Interface {
    pub fn new(kind: InterfaceKind, t0: f64) -> Result<Self> {
        if !(t0 > 0.0 && t0 <= 1.0) {
            return Err(Error::Configuration(format!("t0 must lie in (0, 1], got {t0}")));
        }
        Ok(Self { kind, t0 })
    }

    pub fn kind(&self) -> InterfaceKind {
        self.kind
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    /// sqrt(1 - t/t0), clamped at the pinch.
    pub(crate) fn gap(&self, t: f64) -> f64 {
        (1.0 - t / self.t0).max(0.0).sqrt()
    }

    pub(crate) fn position(&self, t: f64) -> f64 {
        3.0 + self.kind.sign() * self.gap(t)
    }

    /// Speed; infinite at the pinch.
    pub(crate) fn velocity(&self, t: f64) -> f64 {
        -self.kind.sign() / (2.0 * self.t0 * self.gap(t))
    }

    pub(crate) fn acceleration(&self, t: f64) -> f64 {
        let g = self.gap(t);
        -self.kind.sign() / (4.0 * self.t0 * self.t0 * g * g * g)
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !t.is_finite() || t < 0.0 || t > self.t0 * (1.0 + T_SLACK) {
            return Err(Error::Domain(format!(
                "t = {t} outside [0, {}]",
                self.t0
            )));
        }
        Ok(())
    }

    /// Position (order 0), velocity (1) or acceleration (2).
    pub fn eval(&self, t: f64, order: usize) -> Result<f64> {
        self.check_time(t)?;
        if order > 2 {
            return Err(Error::Argument(format!("interface order {order} > 2")));
        }
        if order > 0 && t >= self.t0 {
            return Err(Error::Singularity(format!(
                "interface derivative of order {order} at the pinch t0 = {}",
                self.t0
            )));
        }
        Ok(match order {
            0 => self.position(t),
            1 => self.velocity(t),
            _ => self.acceleration(t),
        })
    }
}

/// Boundary value of the interface trace `u(I(t), t)` together with the
/// slope and curvature a solution must carry there.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TraceData {
    pub t: f64,
    pub u_value: f64,
    pub ur_value: f64,
    pub urr_value: f64,
}

/// Root of `phi'''(1) x^2 + I'(t) x - phi'(1) / I(t)^2 = 0`: the smallest one on
/// the left interface, the largest one on the right interface.
#[derive(Clone, Debug)]
pub struct BoundaryCurvature {
    interface: Interface,
    phi1: f64,
    phi3: f64,
}

impl BoundaryCurvature {
    /// Requires `1/t0 >= 4 sqrt(phi'(1) |phi'''(1)|)`.
    pub fn new(nl: &Nonlinearity, interface: Interface) -> Result<Self> {
        let phi1 = nl.eval_derivatives(1.0, 1)?;
        let phi3 = nl.eval_derivatives(1.0, 3)?;
        let lhs = 1.0 / interface.t0;
        let rhs = 4.0 * (phi1 * phi3.abs()).sqrt();
        if lhs < rhs * (1.0 - T_SLACK) {
            return Err(Error::Configuration(format!(
                "t0 = {} violates 1/t0 >= 4 sqrt(phi'(1)|phi'''(1)|) = {rhs}",
                interface.t0
            )));
        }
        Ok(Self {
            interface,
            phi1,
            phi3,
        })
    }

    pub fn interface(&self) -> &Interface {
        &self.interface
    }

    pub fn t0(&self) -> f64 {
        self.interface.t0
    }

    /// Unchecked value for 0 <= t <= t0.
    pub(crate) fn value(&self, t: f64) -> f64 {
        let iface = &self.interface;
        if t >= iface.t0 {
            return 0.0;
        }
        let a = self.phi3;
        let b = iface.velocity(t);
        let pos = iface.position(t);
        let c = -self.phi1 / (pos * pos);
        if a.abs() < 1e-14 {
            return -c / b;
        }
        let disc = (b * b - 4.0 * a * c).max(0.0);
        let q = -0.5 * (b + b.signum() * disc.sqrt());
        let (r1, r2) = (q / a, c / q);
        match iface.kind {
            InterfaceKind::Beta => r1.min(r2),
            InterfaceKind::Gamma => r1.max(r2),
        }
    }

    /// Unchecked time derivative for 0 <= t < t0 (implicit differentiation).
    pub(crate) fn slope(&self, t: f64) -> f64 {
        let iface = &self.interface;
        let x = self.value(t);
        let (pos, vel, acc) = (iface.position(t), iface.velocity(t), iface.acceleration(t));
        let num = acc * x + 2.0 * self.phi1 * vel / (pos * pos * pos);
        -num / (2.0 * self.phi3 * x + vel)
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        self.interface.check_time(t)?;
        if t < self.interface.t0 {
            let iface = &self.interface;
            let (b, pos) = (iface.velocity(t), iface.position(t));
            let disc = b * b + 4.0 * self.phi3 * self.phi1 / (pos * pos);
            if disc < 0.0 {
                return Err(Error::Configuration(format!(
                    "negative discriminant {disc:e} at t = {t}"
                )));
            }
        }
        Ok(self.value(t))
    }

    pub fn eval_derivative(&self, t: f64) -> Result<f64> {
        self.interface.check_time(t)?;
        if t >= self.interface.t0 {
            return Err(Error::Singularity(format!(
                "curvature derivative at the pinch t0 = {}",
                self.interface.t0
            )));
        }
        let x = self.eval(t)?;
        let den = 2.0 * self.phi3 * x + self.interface.velocity(t);
        if den.abs() < 1e-14 {
            return Err(Error::Singularity(format!("degenerate root at t = {t}")));
        }
        Ok(self.slope(t))
    }

    /// `u(I(t), t) = I(t) - 3 - phi'(1) * int_t^t0 ds / I(s)` in the gauge
    /// `u(3, t0) = 0`, integrated with adaptive Gauss-Legendre.
    pub fn trace_u(&self, t: f64, quad_points: usize) -> Result<TraceData> {
        if quad_points < 16 {
            return Err(Error::Argument(format!(
                "need at least 16 quadrature points, got {quad_points}"
            )));
        }
        self.interface.check_time(t)?;
        let iface = self.interface;
        let t = t.min(iface.t0);
        let rule = quadrature::GaussLegendre::new(quad_points);
        let integral = rule.adaptive(|s| 1.0 / iface.position(s), t, iface.t0, 1e-12);
        Ok(TraceData {
            t,
            u_value: iface.position(t) - 3.0 - self.phi1 * integral,
            ur_value: 1.0,
            urr_value: self.value(t),
        })
    }
}

/// Both interfaces and both curvature roots for one choice of t0.
#[derive(Clone, Debug)]
pub struct Geometry {
    nl: Nonlinearity,
    pub beta: Interface,
    pub gamma: Interface,
    pub b: BoundaryCurvature,
    pub c: BoundaryCurvature,
}

/// Worst margin of one inequality family over the sampled times; a negative
/// margin is a violation.
#[derive(Clone, Debug, Serialize)]
pub struct LemmaFamily {
    pub name: String,
    pub margin: f64,
    pub worst_t: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct LemmaReport {
    pub t0: f64,
    pub n_samples: usize,
    pub tolerance: f64,
    pub families: Vec<LemmaFamily>,
    pub passed: bool,
}

/// Margin floor for the lemma families.
pub const LEMMA_TOL: f64 = 1e-10;

struct Worst {
    margin: f64,
    t: f64,
}

impl Worst {
    fn new() -> Self {
        Self {
            margin: f64::INFINITY,
            t: f64::NAN,
        }
    }

    fn see(&mut self, margin: f64, t: f64) {
        if margin < self.margin || margin.is_nan() {
            self.margin = margin;
            self.t = t;
        }
    }
}

impl Geometry {
    pub fn new(nl: &Nonlinearity, t0: f64) -> Result<Self> {
        let beta = Interface::new(InterfaceKind::Beta, t0)?;
        let gamma = Interface::new(InterfaceKind::Gamma, t0)?;
        Ok(Self {
            nl: nl.clone(),
            beta,
            gamma,
            b: BoundaryCurvature::new(nl, beta)?,
            c: BoundaryCurvature::new(nl, gamma)?,
        })
    }

    pub fn t0(&self) -> f64 {
        self.beta.t0
    }

    pub fn nonlinearity(&self) -> &Nonlinearity {
        &self.nl
    }

    pub fn phi1(&self) -> f64 {
        self.b.phi1
    }

    pub fn phi3(&self) -> f64 {
        self.b.phi3
    }

    /// Samples the curvature inequalities at `n_samples` times of [0, t0).
    pub fn lemma_checks(&self, n_samples: usize) -> Result<LemmaReport> {
        if n_samples < 2 {
            return Err(Error::Argument("need at least 2 sample times".into()));
        }
        let t0 = self.t0();
        let p1 = self.phi1();
        let (b0, c0) = (self.b.eval(0.0)?, self.c.eval(0.0)?);
        let mut fam: Vec<(&str, Worst)> = [
            "sandwich",
            "derivative_bounds",
            "b_forward_bound",
            "b_backward_bound",
            "c_forward_bound",
            "c_backward_bound",
            "unit_and_root_bounds",
        ]
        .into_iter()
        .map(|n| (n, Worst::new()))
        .collect();

        for k in 0..=n_samples {
            let t = if k == n_samples {
                t0
            } else {
                t0 * k as f64 / n_samples as f64
            };
            let b = self.b.eval(t)?;
            let c = self.c.eval(t)?;
            let rest = t0 - t;

            fam[2].1.see(b.min(b0 - b).min(2.0 * p1 * t0 - b0), t);
            fam[3].1.see(b.min(2.0 * p1 * t0.sqrt() * rest.sqrt() - b), t);
            fam[4].1.see((c0 + 2.0 * p1 * t0).min(c - c0).min(-c), t);
            fam[5].1.see((-c).min(c + 2.0 * p1 * t0.sqrt() * rest.sqrt()), t);
            fam[6]
                .1
                .see((1.0 - b0).min(rest.sqrt() - b).min(c + rest.sqrt()), t);

            if k == n_samples {
                continue;
            }
            let (bp, bv) = (self.beta.position(t), self.beta.velocity(t));
            let (gp, gv) = (self.gamma.position(t), self.gamma.velocity(t));
            let sandwich = (b - p1 / (bp * bp * bv))
                .min(p1 / bv - b)
                .min(c - p1 / gv)
                .min(p1 / (gp * gp * gv) - c);
            fam[0].1.see(sandwich, t);

            let db = self.b.eval_derivative(t)?;
            let dc = self.c.eval_derivative(t)?;
            let deriv = (-db)
                .min(5.0 * t0 * p1 * bv + db)
                .min(dc)
                .min(-5.0 * t0 * p1 * gv - dc);
            fam[1].1.see(deriv, t);
        }

        let families: Vec<LemmaFamily> = fam
            .into_iter()
            .map(|(name, w)| LemmaFamily {
                name: name.to_string(),
                margin: w.margin,
                worst_t: w.t,
                passed: w.margin >= -LEMMA_TOL,
            })
            .collect();
        let passed = families.iter().all(|f| f.passed);
        Ok(LemmaReport {
            t0,
            n_samples,
            tolerance: LEMMA_TOL,
            families,
            passed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom(t0: f64) -> Geometry {
        Geometry::new(&Nonlinearity::log_model(), t0).unwrap()
    }

    #[test]
    fn interface_closed_forms() {
        let t0 = 0.01;
        let g = geom(t0);
        assert_eq!(g.beta.eval(0.0, 0).unwrap(), 2.0);
        assert_eq!(g.gamma.eval(0.0, 0).unwrap(), 4.0);
        assert_eq!(g.beta.eval(t0, 0).unwrap(), 3.0);
        assert!((g.beta.eval(0.0, 1).unwrap() - 50.0).abs() < 1e-12);
        assert!((g.gamma.eval(0.0, 1).unwrap() + 50.0).abs() < 1e-12);
        for &t in &[0.0, 0.003, 0.0099] {
            let (p, v, a) = (
                g.beta.eval(t, 0).unwrap(),
                g.beta.eval(t, 1).unwrap(),
                g.beta.eval(t, 2).unwrap(),
            );
            assert!((p + g.gamma.eval(t, 0).unwrap() - 6.0).abs() < 1e-14);
            assert!((a - 2.0 * t0 * v * v * v).abs() < 1e-9 * a.abs());
        }
        assert!(matches!(g.beta.eval(t0, 1), Err(Error::Singularity(_))));
        assert!(matches!(g.beta.eval(-1e-3, 0), Err(Error::Domain(_))));
        assert!(matches!(g.beta.eval(2.0 * t0, 0), Err(Error::Domain(_))));
    }

    #[test]
    fn curvature_roots_match_textbook_formula() {
        let g = geom(0.01);
        // Roots of -x^2/2 + 50x - 1/8 and -x^2/2 - 50x - 1/32, i.e.
        // (100 - sqrt(9999))/2 and (sqrt(9999.75) - 100)/2, at 40 digits.
        let b0 = 2.500_062_503_125_195e-3;
        let c0 = -6.250_039_062_988_289e-4;
        assert!((g.b.eval(0.0).unwrap() - b0).abs() < 1e-18);
        assert!((g.c.eval(0.0).unwrap() - c0).abs() < 1e-18);
        // The textbook form loses digits to cancellation.
        let naive = (100.0 - 9999.0_f64.sqrt()) / 2.0;
        assert!((naive - b0).abs() > 1e-18);
        assert_eq!(g.b.eval(0.01).unwrap(), 0.0);
    }

    #[test]
    fn curvature_derivative_matches_difference_quotient() {
        let g = geom(0.01);
        for &t in &[0.0005, 0.004, 0.009, 0.0099] {
            let h = 1e-9;
            for bc in [&g.b, &g.c] {
                let fd = (bc.value(t + h) - bc.value(t - h)) / (2.0 * h);
                let d = bc.eval_derivative(t).unwrap();
                assert!((fd - d).abs() < 1e-5 * (1.0 + d.abs()), "t={t} fd={fd} d={d}");
            }
        }
        assert!(g.b.eval_derivative(0.01).is_err());
    }

    #[test]
    fn curvature_near_pinch_stays_finite() {
        let t0 = 0.01;
        let g = geom(t0);
        for k in 4..=10 {
            let tau = 10f64.powi(-k);
            let b = g.b.eval(t0 - tau).unwrap();
            assert!(b.is_finite() && b > 0.0);
            assert!(b < 2.0 * 0.5 * t0.sqrt() * tau.sqrt());
        }
    }

    #[test]
    fn large_t0_is_rejected() {
        assert!(matches!(
            Geometry::new(&Nonlinearity::log_model(), 0.6),
            Err(Error::Configuration(_))
        ));
        assert!(Geometry::new(&Nonlinearity::log_model(), 0.5).is_ok());
    }

    fn closed_form_integral(kind: InterfaceKind, t: f64, t0: f64) -> f64 {
        let w = (1.0 - t / t0).sqrt();
        match kind {
            InterfaceKind::Beta => 2.0 * t0 * (-w - 3.0 * ((3.0 - w) / 3.0).ln()),
            InterfaceKind::Gamma => 2.0 * t0 * (w - 3.0 * ((3.0 + w) / 3.0).ln()),
        }
    }

    #[test]
    fn trace_matches_closed_form_integral() {
        let t0 = 0.25;
        let g = geom(t0);
        for bc in [&g.b, &g.c] {
            for &t in &[0.0, 0.05, 0.2, 0.249, t0] {
                let tr = bc.trace_u(t, 16).unwrap();
                let pos = bc.interface().position(t);
                let oracle = pos - 3.0 - 0.5 * closed_form_integral(bc.interface().kind(), t, t0);
                assert!((tr.u_value - oracle).abs() < 1e-11, "t={t}");
                assert_eq!(tr.ur_value, 1.0);
            }
        }
        assert!(g.b.trace_u(0.0, 8).is_err());
        assert_eq!(g.b.trace_u(t0, 16).unwrap().u_value, 0.0);
    }

    #[test]
    fn lemma_families_hold_at_small_t0() {
        let rep = geom(1e-3).lemma_checks(1000).unwrap();
        assert_eq!(rep.families.len(), 7);
        for f in &rep.families {
            assert!(f.passed, "{} margin {}", f.name, f.margin);
        }
    }
}
