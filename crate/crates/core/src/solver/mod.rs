//! Moving-boundary solver for the regularised regional problems.

mod companions;
mod field;
mod problem;
mod scheme;

pub use companions::{derived_companions, CompanionLevel, CompanionResiduals};
pub use field::{read_field_csv, FieldRow, Level, PointValue, SpaceTimeField, MAX_EXPORT_LEVELS};
pub use problem::{
    build_u0, BoundaryDescriptor, Corner, Edge, InitialDatum, ProblemSpec, Region, ShapeParams,
    Source,
};
pub use scheme::{solve, transform, Grid, SolveStats, Transformed, MIN_BACKWARD_CELLS};
