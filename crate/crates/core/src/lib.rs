//! Seeded Brownian-agent simulation that aggregates networked objects
//! (genes, terms) on a toroidal lattice and reports which populations end
//! up in a target population's neighborhood.
//!
//! Populations of agents random-walk on an `A×A` torus. Matrix entries
//! link a source population to a target population; linked agents follow
//! a field-biased walk toward nearby targets and freeze once they reach
//! them. Neighborhood frequency tables around a target population then
//! rank its associations.

pub mod cli;
pub mod dynamics;
pub mod io;
pub mod lattice;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod spatial;

pub use dynamics::{
    Agent, DynamicsError, Engine, PlannedMove, Snapshot, TransitionDistribution, WorldState,
};
pub use lattice::{Lattice, Position};
pub use metrics::{NeighborhoodReport, PopulationCount};
pub use model::{InteractionRule, MatrixEntry, Model, PopulationId, PopulationSpec, SimParams};
