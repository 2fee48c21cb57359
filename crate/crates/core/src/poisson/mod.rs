//! Screened-Poisson indicator fields and joint conflict resolution.

mod conflicts;
mod curvature;
mod grid;
mod solve;

pub use conflicts::{is_conflict_free, resolve_conflicts, ConflictConfig, ConflictReport, Neighborhood};
pub use curvature::{mean_curvature, MeanCurvature};
pub use grid::{extract_interior_points, remap_grid, GridFrame, IndicatorGrid};
pub use solve::{build_indicator, build_indicator_in, OrientedPointSet, PoissonConfig, SolveStats};
