//! Gluing the regional solutions into one space-time solution and the
//! regularization sweep.

mod glue;
mod suite;
mod sweep;

pub use glue::{
    glue, read_seams_csv, seam_orders, supercritical_intervals, GaugeShifts, GluedSolution, HeadlineChecks, Seam, SeamOrders,
    SeamPoint, SeamReport,
};
pub use suite::{q4_trace, run_suite, Bridge, RegionalFields, SuiteConfig, DEFAULT_BRIDGE_WIDTH};
pub use sweep::{eps_sweep, glued_sweep, BoundaryLimit, LimitSample, RegionDistance, SweepResult, COMPACT_MARGIN, COMPACT_SAMPLES};
