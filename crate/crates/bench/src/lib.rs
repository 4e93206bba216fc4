//! Fixtures shared by the benchmarks.

use pmlab_core::geometry::Geometry;
use pmlab_core::nonlinearity::{compute_constants, Constants, Nonlinearity};
use pmlab_core::solver::{build_u0, InitialDatum, ProblemSpec, Region, ShapeParams};

/// t0 of the numerical runs; the admissible t0 is far below one grid cell.
pub const NUMERICAL_T0: f64 = 0.5;

pub fn constants() -> Constants {
    compute_constants(&Nonlinearity::log_model(), 4000).expect("the log model is valid")
}

pub fn geometry(t0: f64) -> Geometry {
    Geometry::new(&Nonlinearity::log_model(), t0).expect("t0 is admissible")
}

pub fn q1_datum(g: &Geometry) -> InitialDatum {
    build_u0(Region::Q1, &g.b, ShapeParams::default()).expect("default shape is feasible")
}

pub fn q1_problem(eps: f64) -> ProblemSpec {
    let g = geometry(NUMERICAL_T0);
    ProblemSpec::q1(&g, eps, q1_datum(&g)).expect("eps < 1")
}
