//! Discrete p-energy minimization of maps from a grid domain into a target
//! manifold, and diagnostics of the resulting energy measures.

pub mod boundary;
pub mod energy;
pub mod extract;
pub mod grid;
pub mod manifold;
pub mod minimize;
pub mod seed;

pub use boundary::{
    energy_bound_ratio, four_point_datum, fractional_seminorm, rp2_pair_datum, smooth_datum, BoundRatio,
    BoundaryError, BoundaryField, Datum,
};
pub use energy::{
    energy_measure, eta_regularity_map, monotonicity_profile, p_energy, stress_divergence_residual, EnergyMeasure,
};
pub use extract::{detect_charge, extract_singular_set, segment_density, ExtractError, ExtractOptions, Extraction};
pub use grid::{FieldDump, Grid, GridError, GridMap, NodeKind};
pub use manifold::{Circle, ManifoldError, RealProjectivePlane, TargetManifold};
pub use minimize::{minimize, MinimizeError, MinimizeOptions, MinimizeOutcome, Status};
