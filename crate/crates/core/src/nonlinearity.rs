//! Flux potentials, their structural hypotheses, the derived constants and
//! the one-sided regularisations used by the forward and backward problems.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};

/// Highest derivative order any algorithm needs.
pub const MAX_ORDER: usize = 4;

/// Anything that can hand out `[phi, phi', phi'', phi''', phi'''']` at a slope.
///
/// Hot loops call this unchecked; the checked entry points live on the
/// concrete types.
pub trait Potential: Send + Sync {
    fn jet(&self, sigma: f64) -> [f64; 5];

    fn d1(&self, sigma: f64) -> f64 {
        self.jet(sigma)[1]
    }

    fn d2(&self, sigma: f64) -> f64 {
        self.jet(sigma)[2]
    }
}

type ClosedForm = Arc<dyn Fn(f64, usize) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Kind {
    Log,
    Closed { name: String, f: ClosedForm },
}

/// An even flux potential given in closed form up to fourth order.
#[derive(Clone)]
pub struct Nonlinearity {
    kind: Kind,
    domain: (f64, f64),
}

impl fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Nonlinearity")
            .field("name", &self.name())
            .field("domain", &self.domain)
            .finish()
    }
}

fn log_model(s: f64, order: usize) -> f64 {
    let q = 1.0 + s * s;
    match order {
        0 => 0.5 * (s * s).ln_1p(),
        1 => s / q,
        2 => (1.0 - s * s) / (q * q),
        3 => (2.0 * s * s * s - 6.0 * s) / (q * q * q),
        _ => {
            let s2 = s * s;
            (-6.0 * s2 * s2 + 36.0 * s2 - 6.0) / (q * q * q * q)
        }
    }
}

impl Nonlinearity {
    /// phi(s) = ln(1 + s^2) / 2.
    pub fn log_model() -> Self {
        Self {
            kind: Kind::Log,
            domain: (-4.0, 4.0),
        }
    }

    /// A user potential. `f(s, k)` must return the k-th derivative for `s >= 0`;
    /// negative slopes are served through evenness.
    pub fn closed_form<F>(name: impl Into<String>, f: F) -> Self
    where
        F: Fn(f64, usize) -> f64 + Send + Sync + 'static,
    {
        Self {
            kind: Kind::Closed {
                name: name.into(),
                f: Arc::new(f),
            },
            domain: (-4.0, 4.0),
        }
    }

    /// Resolves a configuration name.
    pub fn from_name(name: &str) -> Result<Self> {
        match name.trim() {
            "log" | "log_model" => Ok(Self::log_model()),
            other => Err(Error::Configuration(format!(
                "unknown nonlinearity `{other}` (available: log)"
            ))),
        }
    }

    pub fn with_domain(mut self, lo: f64, hi: f64) -> Self {
        self.domain = (lo, hi);
        self
    }

    pub fn name(&self) -> &str {
        match &self.kind {
            Kind::Log => "log",
            Kind::Closed { name, .. } => name,
        }
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    fn raw(&self, s: f64, order: usize) -> f64 {
        match &self.kind {
            Kind::Log => log_model(s, order),
            Kind::Closed { f, .. } => f(s, order),
        }
    }

    /// Derivative of the given order with evenness enforced: the closed form is
    /// evaluated at |s| and odd orders pick up sign(s).
    pub fn eval_derivatives(&self, sigma: f64, order: usize) -> Result<f64> {
        if order > MAX_ORDER {
            return Err(Error::Argument(format!(
                "derivative order {order} exceeds {MAX_ORDER}"
            )));
        }
        if !sigma.is_finite() || sigma < self.domain.0 || sigma > self.domain.1 {
            return Err(Error::Domain(format!(
                "slope {sigma} outside [{}, {}]",
                self.domain.0, self.domain.1
            )));
        }
        Ok(self.even(sigma, order))
    }

    fn even(&self, sigma: f64, order: usize) -> f64 {
        let v = self.raw(sigma.abs(), order);
        if sigma < 0.0 && order % 2 == 1 {
            -v
        } else {
            v
        }
    }
}

impl Potential for Nonlinearity {
    fn jet(&self, sigma: f64) -> [f64; 5] {
        std::array::from_fn(|k| self.even(sigma, k))
    }

    fn d1(&self, sigma: f64) -> f64 {
        self.even(sigma, 1)
    }

    fn d2(&self, sigma: f64) -> f64 {
        self.even(sigma, 2)
    }
}

/// Outcome of one structural hypothesis. `margin` is the worst sampled value
/// of the quantity the hypothesis constrains.
#[derive(Clone, Debug, Serialize)]
pub struct HypothesisCheck {
    pub name: String,
    pub margin: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct HypothesisReport {
    pub checks: Vec<HypothesisCheck>,
    pub passed: bool,
}

impl HypothesisReport {
    pub fn get(&self, name: &str) -> Option<&HypothesisCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

const HYP_TOL: f64 = 1e-10;

fn linspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(move |i| if i + 1 == n { hi } else { lo + step * i as f64 })
}

/// Samples the structural hypotheses on `n_samples` points of [-3, 3].
pub fn check_hypotheses(nl: &Nonlinearity, n_samples: usize) -> Result<HypothesisReport> {
    if n_samples < 100 {
        return Err(Error::Argument(format!(
            "need at least 100 samples, got {n_samples}"
        )));
    }
    let mut odd_gap = 0.0_f64;
    let mut pos_min = f64::INFINITY;
    let mut neg_max = f64::NEG_INFINITY;
    for s in linspace(-3.0, 3.0, n_samples) {
        // The closed form itself, not the symmetrised evaluation.
        let (lo, hi) = (nl.raw(s, 0), nl.raw(-s, 0));
        odd_gap = odd_gap.max((lo - hi).abs() - 1e-12 * (1.0 + lo.abs()));
        if (0.0..1.0).contains(&s) {
            pos_min = pos_min.min(nl.even(s, 2));
        }
        if s > 1.0 && s <= 3.0 {
            neg_max = neg_max.max(nl.even(s, 2));
        }
    }
    let vanish = nl.even(0.0, 1).abs().max(nl.even(0.0, 3).abs());
    let degenerate = nl.even(1.0, 2).abs();
    let flux3 = nl.even(3.0, 1);
    let third1 = nl.even(1.0, 3);

    let checks = vec![
        HypothesisCheck {
            name: "even".into(),
            margin: odd_gap,
            passed: odd_gap <= 0.0,
        },
        HypothesisCheck {
            name: "odd_derivatives_vanish_at_0".into(),
            margin: vanish,
            passed: vanish <= HYP_TOL,
        },
        HypothesisCheck {
            name: "forward_on_0_1".into(),
            margin: pos_min,
            passed: pos_min > 0.0,
        },
        HypothesisCheck {
            name: "degenerate_at_1".into(),
            margin: degenerate,
            passed: degenerate <= HYP_TOL,
        },
        HypothesisCheck {
            name: "backward_on_1_3".into(),
            margin: neg_max,
            passed: neg_max < 0.0,
        },
        HypothesisCheck {
            name: "positive_flux_at_3".into(),
            margin: flux3,
            passed: flux3 > 0.0,
        },
        HypothesisCheck {
            name: "third_derivative_at_1_nonpositive".into(),
            margin: third1,
            passed: third1 <= HYP_TOL,
        },
    ];
    let passed = checks.iter().all(|c| c.passed);
    Ok(HypothesisReport { checks, passed })
}

/// One upper bound on the admissible time-to-degeneracy.
#[derive(Clone, Debug, Serialize)]
pub struct T0Bound {
    pub label: String,
    pub value: f64,
}

/// Constants derived from a valid nonlinearity.
#[derive(Clone, Debug, Serialize)]
pub struct Constants {
    pub phi1_at_1: f64,
    pub phi3_at_1: f64,
    pub gamma0: f64,
    pub gamma1: f64,
    /// Sampled max of |phi'| + ... + |phi''''| on [0, 3], inflated by 1%.
    pub gamma2: f64,
    pub t0_bounds: Vec<T0Bound>,
    pub binding: usize,
    pub t0_max: f64,
    /// Largest t0 for which the boundary-curvature quadratics have real roots.
    pub discriminant_bound: f64,
}

impl Constants {
    pub fn binding_bound(&self) -> &T0Bound {
        &self.t0_bounds[self.binding]
    }
}

/// Samples the dense grid of [0, 3] used for the derivative bound.
pub const GAMMA2_MIN_SAMPLES: usize = 100_000;

pub fn compute_constants(nl: &Nonlinearity, n_samples: usize) -> Result<Constants> {
    let report = check_hypotheses(nl, n_samples)?;
    if !report.passed {
        let failed: Vec<_> = report
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect();
        return Err(Error::InvalidNonlinearity(format!(
            "{} fails {}",
            nl.name(),
            failed.join(", ")
        )));
    }
    let p1 = nl.even(1.0, 1);
    let p3 = nl.even(1.0, 3);
    let gamma0 = 3.0 * p1 + 5.0;
    let gamma1 = 5.0 * p1 + 100.0;
    let gamma2 = 1.01
        * linspace(0.0, 3.0, n_samples.max(GAMMA2_MIN_SAMPLES))
            .map(|s| (1..=4).map(|k| nl.even(s, k).abs()).sum::<f64>())
            .fold(0.0_f64, f64::max);

    let g1 = gamma1 + 1.0;
    let t0_bounds = vec![
        T0Bound {
            label: "1/(4[φ'(1)]²)".into(),
            value: 1.0 / (4.0 * p1 * p1),
        },
        T0Bound {
            label: "3/(2500γ₂)".into(),
            value: 3.0 / (2500.0 * gamma2),
        },
        T0Bound {
            label: "1/(96(γ₁+1)⁴γ₂)".into(),
            value: 1.0 / (96.0 * g1.powi(4) * gamma2),
        },
        T0Bound {
            label: "1/((20γ₀²+28γ₀+9)γ₂)".into(),
            value: 1.0 / ((20.0 * gamma0 * gamma0 + 28.0 * gamma0 + 9.0) * gamma2),
        },
        T0Bound {
            label: "1/((12γ₀+14)γ₂)".into(),
            value: 1.0 / ((12.0 * gamma0 + 14.0) * gamma2),
        },
    ];
    let binding = t0_bounds
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.value.total_cmp(&b.1.value))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let t0_max = t0_bounds[binding].value.min(1.0);
    let discriminant_bound = if p3 == 0.0 {
        f64::INFINITY
    } else {
        1.0 / (4.0 * (p1 * p3.abs()).sqrt())
    };
    Ok(Constants {
        phi1_at_1: p1,
        phi3_at_1: p3,
        gamma0,
        gamma1,
        gamma2,
        t0_bounds,
        binding,
        t0_max,
        discriminant_bound,
    })
}

/// Which side of the degenerate slope the regularisation keeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// Uniformly parabolic copy of phi on [0, 1 - eps], phi'' >= nu.
    Forward,
    /// Uniformly backward copy of phi on [1 + eps, 3], phi'' <= -nu.
    Backward,
}

#[derive(Clone, Copy, Debug)]
enum Segment {
    Base,
    /// phi'' is the cubic `a` in (s - anchor); p0, p1 are phi and phi' at anchor.
    Poly {
        anchor: f64,
        p0: f64,
        p1: f64,
        a: [f64; 4],
    },
}

#[derive(Clone, Copy, Debug)]
struct Piece {
    lo: f64,
    hi: f64,
    seg: Segment,
}

/// A C^2 regularisation that agrees with the base potential on the
/// coincidence interval and has |phi''| >= nu with a fixed sign everywhere.
#[derive(Clone, Debug)]
pub struct RegularizedNonlinearity {
    base: Nonlinearity,
    eps: f64,
    side: Side,
    nu: f64,
    blend_width: f64,
    coincidence: (f64, f64),
    pieces: Vec<Piece>,
}

fn hermite(xa: f64, da: f64, ma: f64, xb: f64, db: f64, mb: f64) -> [f64; 4] {
    let w = xb - xa;
    let slope = (db - da) / w;
    [
        da,
        ma,
        (3.0 * slope - 2.0 * ma - mb) / w,
        (ma + mb - 2.0 * slope) / (w * w),
    ]
}

fn poly_jet(anchor: f64, p0: f64, p1: f64, a: &[f64; 4], sigma: f64) -> [f64; 5] {
    let x = sigma - anchor;
    let [a0, a1, a2, a3] = *a;
    [
        p0 + x * (p1 + x * (a0 / 2.0 + x * (a1 / 6.0 + x * (a2 / 12.0 + x * a3 / 20.0)))),
        p1 + x * (a0 + x * (a1 / 2.0 + x * (a2 / 3.0 + x * a3 / 4.0))),
        a0 + x * (a1 + x * (a2 + x * a3)),
        a1 + x * (2.0 * a2 + x * 3.0 * a3),
        2.0 * a2 + 6.0 * a3 * x,
    ]
}

impl Piece {
    fn jet(&self, base: &Nonlinearity, sigma: f64) -> [f64; 5] {
        match self.seg {
            Segment::Base => std::array::from_fn(|k| base.raw(sigma, k)),
            Segment::Poly { anchor, p0, p1, a } => poly_jet(anchor, p0, p1, &a, sigma),
        }
    }
}

fn poly(lo: f64, hi: f64, anchor: f64, p0: f64, p1: f64, a: [f64; 4]) -> Piece {
    Piece {
        lo,
        hi,
        seg: Segment::Poly { anchor, p0, p1, a },
    }
}

/// Builds the one-sided regularisation for `0 < eps < 1`.
pub fn regularize(nl: &Nonlinearity, eps: f64, side: Side) -> Result<RegularizedNonlinearity> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Argument(format!("eps must lie in (0, 1), got {eps}")));
    }
    let raw = |s: f64, k: usize| nl.raw(s, k);
    match side {
        Side::Forward => {
            let x0 = 1.0 - eps;
            let min_pp = linspace(0.0, x0, 2001)
                .map(|s| raw(s, 2))
                .fold(f64::INFINITY, f64::min);
            if min_pp <= 0.0 {
                return Err(Error::InvalidNonlinearity(format!(
                    "phi'' is not positive on [0, {x0}]"
                )));
            }
            let nu = 0.5 * min_pp;
            let (d, m) = (raw(x0, 2), raw(x0, 3));
            let mut w = 0.5 * eps;
            if m < 0.0 {
                w = w.min(3.0 * (d - nu) / -m);
            }
            let x1 = x0 + w;
            let band = hermite(x0, d, m, x1, nu, 0.0);
            let blend = poly(x0, x1, x0, raw(x0, 0), raw(x0, 1), band);
            let end = blend.jet(nl, x1);
            let pieces = vec![
                Piece {
                    lo: 0.0,
                    hi: x0,
                    seg: Segment::Base,
                },
                blend,
                poly(x1, f64::INFINITY, x1, end[0], end[1], [nu, 0.0, 0.0, 0.0]),
            ];
            Ok(RegularizedNonlinearity {
                base: nl.clone(),
                eps,
                side,
                nu,
                blend_width: w,
                coincidence: (0.0, x0),
                pieces,
            })
        }
        Side::Backward => {
            let y0 = 1.0 + eps;
            let max_pp = linspace(y0, 3.0, 2001)
                .map(|s| raw(s, 2))
                .fold(f64::NEG_INFINITY, f64::max);
            if max_pp >= 0.0 {
                return Err(Error::InvalidNonlinearity(format!(
                    "phi'' is not negative on [{y0}, 3]"
                )));
            }
            let nu = -0.5 * max_pp;
            let (d, m) = (raw(y0, 2), raw(y0, 3));
            let mut w = 0.5 * eps;
            if m < 0.0 {
                w = w.min(3.0 * (d + nu) / m);
            }
            let y1 = y0 - w;
            let band = hermite(y0, d, m, y1, -nu, 0.0);
            let blend = poly(y1, y0, y0, raw(y0, 0), raw(y0, 1), band);
            let start = blend.jet(nl, y1);

            let (c3, m3) = (raw(3.0, 2), raw(3.0, 3));
            let mut w3 = 0.5 * eps;
            if m3 > 0.0 {
                w3 = w3.min(27.0 * (-nu - c3) / (4.0 * m3));
            }
            let tail_band = hermite(3.0, c3, m3, 3.0 + w3, c3, 0.0);
            let tail_blend = poly(3.0, 3.0 + w3, 3.0, raw(3.0, 0), raw(3.0, 1), tail_band);
            let tail_end = tail_blend.jet(nl, 3.0 + w3);
            let pieces = vec![
                poly(
                    f64::NEG_INFINITY,
                    y1,
                    y1,
                    start[0],
                    start[1],
                    [-nu, 0.0, 0.0, 0.0],
                ),
                blend,
                Piece {
                    lo: y0,
                    hi: 3.0,
                    seg: Segment::Base,
                },
                tail_blend,
                poly(
                    3.0 + w3,
                    f64::INFINITY,
                    3.0 + w3,
                    tail_end[0],
                    tail_end[1],
                    [c3, 0.0, 0.0, 0.0],
                ),
            ];
            Ok(RegularizedNonlinearity {
                base: nl.clone(),
                eps,
                side,
                nu,
                blend_width: w,
                coincidence: (y0, 3.0),
                pieces,
            })
        }
    }
}

impl RegularizedNonlinearity {
    pub fn base(&self) -> &Nonlinearity {
        &self.base
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn side(&self) -> Side {
        self.side
    }

    /// Lower bound of |phi_eps''| on all of R.
    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn blend_width(&self) -> f64 {
        self.blend_width
    }

    /// Interval on which phi_eps equals the base potential.
    pub fn coincidence(&self) -> (f64, f64) {
        self.coincidence
    }

    /// Slopes at which phi_eps switches between pieces (nonnegative side for
    /// the forward case).
    pub fn breakpoints(&self) -> Vec<f64> {
        self.pieces[1..].iter().map(|p| p.lo).collect()
    }

    /// +1 for the forward problem, -1 for the backward one: the PDE is
    /// u_t = sign * (phi_eps'(u_r))_r + sign * phi_eps'(u_r) / r.
    pub fn orientation(&self) -> f64 {
        match self.side {
            Side::Forward => 1.0,
            Side::Backward => -1.0,
        }
    }

    pub fn eval_derivatives(&self, sigma: f64, order: usize) -> Result<f64> {
        if order > MAX_ORDER {
            return Err(Error::Argument(format!(
                "derivative order {order} exceeds {MAX_ORDER}"
            )));
        }
        if !sigma.is_finite() {
            return Err(Error::Domain(format!("slope {sigma} is not finite")));
        }
        Ok(self.jet(sigma)[order])
    }

    fn locate(&self, s: f64) -> &Piece {
        self.pieces
            .iter()
            .find(|p| s < p.hi || (s == p.hi && matches!(p.seg, Segment::Base)))
            .unwrap_or_else(|| self.pieces.last().expect("pieces are non-empty"))
    }
}

impl Potential for RegularizedNonlinearity {
    fn jet(&self, sigma: f64) -> [f64; 5] {
        match self.side {
            Side::Forward => {
                let s = sigma.abs();
                let mut j = self.locate(s).jet(&self.base, s);
                if sigma < 0.0 {
                    j[1] = -j[1];
                    j[3] = -j[3];
                }
                j
            }
            Side::Backward => self.locate(sigma).jet(&self.base, sigma),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic() -> Nonlinearity {
        Nonlinearity::closed_form("quadratic", |s, k| match k {
            0 => 0.5 * s * s,
            1 => s,
            2 => 1.0,
            _ => 0.0,
        })
    }

    #[test]
    fn log_model_values() {
        let nl = Nonlinearity::log_model();
        assert_eq!(nl.eval_derivatives(1.0, 1).unwrap(), 0.5);
        assert_eq!(nl.eval_derivatives(1.0, 2).unwrap(), 0.0);
        assert_eq!(nl.eval_derivatives(1.0, 3).unwrap(), -0.5);
        assert_eq!(nl.eval_derivatives(0.0, 4).unwrap(), -6.0);
        assert_eq!(nl.eval_derivatives(1.0, 4).unwrap(), 1.5);
        assert_eq!(nl.eval_derivatives(-1.0, 1).unwrap(), -0.5);
        assert_eq!(nl.eval_derivatives(-1.0, 3).unwrap(), 0.5);
        let ln2 = std::f64::consts::LN_2;
        assert!((nl.eval_derivatives(1.0, 0).unwrap() - 0.5 * ln2).abs() < 1e-15);
    }

    #[test]
    fn log_model_derivatives_match_difference_quotients() {
        let nl = Nonlinearity::log_model();
        let h = 1e-5;
        for &s in &[-2.7, -1.0, -0.3, 0.0, 0.4, 1.0, 1.7, 3.0] {
            for k in 1..=4 {
                let fd = (nl.even(s + h, k - 1) - nl.even(s - h, k - 1)) / (2.0 * h);
                let exact = nl.even(s, k);
                assert!((fd - exact).abs() < 1e-8 * (1.0 + exact.abs()), "s={s} k={k}");
            }
        }
    }

    #[test]
    fn checked_evaluation_rejects_bad_input() {
        let nl = Nonlinearity::log_model();
        assert!(matches!(nl.eval_derivatives(0.5, 5), Err(Error::Argument(_))));
        assert!(matches!(nl.eval_derivatives(10.0, 1), Err(Error::Domain(_))));
        assert!(matches!(nl.eval_derivatives(f64::NAN, 1), Err(Error::Domain(_))));
        assert!(Nonlinearity::from_name("tanh").is_err());
    }

    #[test]
    fn hypotheses_for_log_model() {
        let rep = check_hypotheses(&Nonlinearity::log_model(), 100).unwrap();
        assert!(rep.passed);
        assert_eq!(rep.get("third_derivative_at_1_nonpositive").unwrap().margin, -0.5);
        assert!(check_hypotheses(&Nonlinearity::log_model(), 99).is_err());
    }

    #[test]
    fn quadratic_potential_is_rejected() {
        let nl = quadratic();
        let rep = check_hypotheses(&nl, 1000).unwrap();
        assert!(!rep.passed);
        assert!(!rep.get("degenerate_at_1").unwrap().passed);
        assert!(!rep.get("backward_on_1_3").unwrap().passed);
        assert!(matches!(
            compute_constants(&nl, 1000),
            Err(Error::InvalidNonlinearity(_))
        ));
    }

    // Max of |phi'|+|phi''|+|phi'''|+|phi''''| on [0,3] for the log model,
    // located by root-finding on the derivative at 30 digits (s* ~ 0.05518).
    const GAMMA2_RAW: f64 = 7.192_908_079_589_758;

    #[test]
    fn constants_for_log_model() {
        let c = compute_constants(&Nonlinearity::log_model(), 1000).unwrap();
        assert_eq!(c.gamma0, 6.5);
        assert_eq!(c.gamma1, 102.5);
        assert!((c.gamma2 - 1.01 * GAMMA2_RAW).abs() < 1e-6);
        assert_eq!(c.t0_bounds[0].value, 1.0);
        let g2 = c.gamma2;
        let oracle = 1.0 / (96.0 * 103.5_f64.powi(4) * g2);
        assert_eq!(c.binding, 2);
        assert!((c.t0_max - oracle).abs() < 1e-24);
        assert!((c.t0_max - 1.2495e-11).abs() < 1e-14);
        assert_eq!(c.discriminant_bound, 0.5);
    }

    #[test]
    fn forward_regularization_structure() {
        let nl = Nonlinearity::log_model();
        for &eps in &[0.3, 0.1, 0.05, 0.01] {
            let r = regularize(&nl, eps, Side::Forward).unwrap();
            let expected_nu = 0.5 * nl.even(1.0 - eps, 2);
            assert!((r.nu() - expected_nu).abs() < 1e-15);
            assert_eq!(r.blend_width(), eps / 2.0);
            for s in linspace(-(1.0 - eps), 1.0 - eps, 301) {
                for k in 0..=4 {
                    assert_eq!(r.jet(s)[k], nl.even(s, k));
                }
            }
            for s in linspace(-4.0, 4.0, 4001) {
                assert!(r.jet(s)[2] >= r.nu() * (1.0 - 1e-12));
            }
        }
    }

    #[test]
    fn backward_regularization_structure() {
        let nl = Nonlinearity::log_model();
        for &eps in &[0.3, 0.1, 0.05, 0.01] {
            let r = regularize(&nl, eps, Side::Backward).unwrap();
            // |phi''| on [1+eps, 3] is smallest at 3 once eps exceeds ~0.22.
            let expected = 0.5 * nl.even(1.0 + eps, 2).abs().min(nl.even(3.0, 2).abs());
            assert!((r.nu() - expected).abs() < 1e-15);
            for s in linspace(1.0 + eps, 3.0, 301) {
                for k in 0..=4 {
                    assert_eq!(r.jet(s)[k], nl.even(s, k));
                }
            }
            for s in linspace(-4.0, 6.0, 5001) {
                assert!(r.jet(s)[2] <= -r.nu() * (1.0 - 1e-12), "s={s}");
            }
        }
    }

    #[test]
    fn regularization_is_c2_across_breakpoints() {
        let nl = Nonlinearity::log_model();
        for side in [Side::Forward, Side::Backward] {
            let r = regularize(&nl, 0.05, side).unwrap();
            for b in r.breakpoints() {
                let (l, h) = (r.jet(b - 1e-12), r.jet(b + 1e-12));
                for k in 0..=2 {
                    assert!((l[k] - h[k]).abs() < 1e-8, "{side:?} b={b} k={k}");
                }
            }
            // phi_eps' is the antiderivative of phi_eps'' across the whole line.
            let h = 1e-5;
            for s in linspace(-3.5, 3.5, 701) {
                let fd = (r.jet(s + h)[1] - r.jet(s - h)[1]) / (2.0 * h);
                assert!((fd - r.jet(s)[2]).abs() < 1e-6, "{side:?} s={s}");
                let fd0 = (r.jet(s + h)[0] - r.jet(s - h)[0]) / (2.0 * h);
                assert!((fd0 - r.jet(s)[1]).abs() < 1e-6, "{side:?} s={s}");
            }
        }
    }

    #[test]
    fn nu_is_monotone_in_eps() {
        let nl = Nonlinearity::log_model();
        for side in [Side::Forward, Side::Backward] {
            let nus: Vec<f64> = [0.4, 0.2, 0.1, 0.05]
                .iter()
                .map(|&e| regularize(&nl, e, side).unwrap().nu())
                .collect();
            assert!(nus.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn regularize_rejects_bad_eps() {
        let nl = Nonlinearity::log_model();
        assert!(regularize(&nl, 0.0, Side::Forward).is_err());
        assert!(regularize(&nl, 1.0, Side::Backward).is_err());
    }
}
