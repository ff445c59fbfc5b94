pub mod attractors;
pub mod chains;
pub mod error;
pub mod space;
pub mod shadowing;
pub mod systems;

pub use error::{Error, Result};
pub use space::{Axis, CellSet, GridSpace, Point, SpaceKind, Topology};
pub use systems::{
    build_cell_map, generate_pseudo_orbit, CellMap, Dynamics, LimitPseudoOrbit, MapKind, Noise, PointMap,
    PseudoOrbit,
};
pub use chains::{
    build_chain_graph, chain_components, chain_reaches, chain_recurrent_set, classify_components, is_chain_mixing,
    is_chain_stable, is_chain_transitive, ChainComponent, ChainDecomposition, ChainGraph,
};
pub mod harness;

pub use attractors::{attractor_of, Attractor, TrappingRegion, USpec};
pub use harness::{run_scenario, Report, Scenario, Suite, Verdict};
pub use shadowing::{HyperbolicSplitting, ShadowingCertificate};
