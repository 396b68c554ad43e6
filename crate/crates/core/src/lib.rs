//! Static user-equilibrium traffic assignment with a decomposition heuristic.

pub mod decomposition;
pub mod demand;
pub mod driver;
pub mod equilibrium;
pub mod error;
pub mod metrics;
pub mod network;
pub mod par;
pub mod partition;
pub mod report;
pub mod shortest_path;
pub mod solution;
pub mod synth;
pub mod tntp;

pub use decomposition::Decomposition;
pub use demand::{OdMatrix, OdPair};
pub use driver::{HeuristicConfig, Phase, TimingSplit, TraceRecord};
pub use error::{Error, Result};
pub use network::{CostFunction, Link, LinkId, LinkKind, Network, NodeId};
pub use partition::Partition;
pub use solution::{OdFlows, PathFlow, PathFlowSolution};
