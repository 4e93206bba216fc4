//! Executable comparison principle, the catalog of explicit sub- and
//! supersolutions, and the a priori estimates evaluated on computed fields.

mod candidates;
mod comparison;
mod estimates;
mod report;

pub use candidates::{
    catalog, catalog_side, eta_q, eta_t, CandidateFunction, CandidateJet, Catalog, Role, Target,
    ValidityBox,
};
pub use comparison::{
    check_candidate, check_catalog, sandwich_check, ComparisonReport, InducedBound, Margin,
    SandwichBound, SandwichReport, COMPARISON_TOL, MIN_SAMPLES,
};
pub use estimates::{verify_estimates, EstimateCheck, EstimateReport, MeasuredConstants, DEFAULT_DELTA};
pub use report::{report_file_name, KeyValue};

use crate::solver::SpaceTimeField;

/// Slack for pointwise estimates on a discrete field: 10 (h + dt)(1 + gamma2)
/// with h = 1/N and dt the largest accepted step.
pub fn tol_disc(field: &SpaceTimeField, gamma2: f64) -> f64 {
    let dt = field.levels.iter().map(|l| l.dt).fold(0.0_f64, f64::max);
    10.0 * (field.h() + dt) * (1.0 + gamma2)
}
