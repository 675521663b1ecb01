//! Singular p-energies over finite fundamental groups, admissible charged
//! segment networks and a solver for their mass minimization.

pub mod chain;
pub mod energy;
pub mod formats;
pub mod geometry;
pub mod group;
pub mod plateau;

pub use chain::{
    balance_residuals, chain_mass, convex_hull_containment, max_balance_residual, validate_chain, BoundaryCharge,
    BoundaryChargeSpec, Chain, ChainError, Edge, MassReport, Provenance, ValidationReport, Vertex, VertexKind,
    Violation,
};
pub use energy::{
    class_energy_table, minimal_resolution, rp2_systole, singular_energy, EnergyError, EnergyTable,
    IntegerCharges, LengthSpectrum, Resolution, ResolutionSearch,
};
pub use geometry::Point;
pub use group::{ClassId, ClassSet, FiniteGroup, GroupError};
pub use plateau::{
    enumerate_topologies, minimal_connection_matching, optimize_positions, solve_plateau, PlateauError,
    SolveOptions, SolveReport, Topology,
};
