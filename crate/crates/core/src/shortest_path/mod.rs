//! One-to-all shortest paths, including the constrained variants used on
//! master networks, where a path may never take two artificial links in a
//! row.

mod dijkstra;
mod enumerate;
mod three_stage;
mod transform;

pub use dijkstra::{dijkstra, dijkstra_with};
pub(crate) use dijkstra::{check_costs, HeapEntry};
pub use enumerate::{enumerate_all_constrained_paths, enumerate_constrained_paths, ConstrainedPath};
pub use three_stage::{three_stage_spp, ThreeStageLabels};
pub use transform::{transform_master, TransformedMasterNetwork, ZoneRole};

use crate::error::{Error, Result};
use crate::network::{LinkId, Network, NodeId};

/// Result of a one-to-all search.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelSet {
    pub origin: NodeId,
    pub cost: Vec<f64>,
    pub back_link: Vec<Option<LinkId>>,
    /// Full link sequences per node, for searches where back labels are not
    /// enough to rebuild a path (the constrained master searches).
    pub explicit_paths: Option<Vec<Option<Vec<LinkId>>>>,
}

impl LabelSet {
    pub fn is_reachable(&self, node: NodeId) -> bool {
        self.cost[node].is_finite()
    }

    pub fn back_node(&self, network: &Network, node: NodeId) -> Option<NodeId> {
        self.back_link[node].map(|l| network.link(l).tail)
    }

    pub fn path_to(&self, network: &Network, destination: NodeId) -> Option<Vec<LinkId>> {
        if !self.is_reachable(destination) {
            return None;
        }
        if let Some(paths) = &self.explicit_paths {
            return paths[destination].clone();
        }
        let mut links = Vec::new();
        let mut at = destination;
        while at != self.origin {
            let l = self.back_link[at]?;
            links.push(l);
            at = network.link(l).tail;
            if links.len() > network.node_count() {
                return None;
            }
        }
        links.reverse();
        Some(links)
    }
}

/// A one-to-all shortest path engine bound to one network.
pub trait Router: Sync {
    fn network(&self) -> &Network;

    fn labels(&self, origin: NodeId, costs: &[f64]) -> Result<LabelSet>;
}

/// Plain Dijkstra with the first-through-node rule.
#[derive(Clone, Copy, Debug)]
pub struct Unconstrained<'a> {
    network: &'a Network,
}

impl<'a> Unconstrained<'a> {
    pub fn new(network: &'a Network) -> Self {
        Unconstrained { network }
    }
}

impl Router for Unconstrained<'_> {
    fn network(&self) -> &Network {
        self.network
    }

    fn labels(&self, origin: NodeId, costs: &[f64]) -> Result<LabelSet> {
        dijkstra(self.network, origin, costs)
    }
}

/// Subnetwork membership of every master node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MasterTopology {
    pub subnet: Vec<usize>,
    pub subnet_count: usize,
}

impl MasterTopology {
    /// A master node is a boundary node when it touches a physical (cut) link.
    pub fn boundary_flags(master: &Network) -> Vec<bool> {
        let mut flags = vec![false; master.node_count()];
        for l in master.links().iter().filter(|l| !l.is_artificial()) {
            flags[l.tail] = true;
            flags[l.head] = true;
        }
        flags
    }

    pub(crate) fn check(&self, master: &Network) -> Result<()> {
        if self.subnet.len() != master.node_count() {
            return Err(Error::Structural(format!(
                "topology covers {} nodes, master has {}",
                self.subnet.len(),
                master.node_count()
            )));
        }
        for (id, l) in master.links().iter().enumerate() {
            let same = self.subnet[l.tail] == self.subnet[l.head];
            if l.is_artificial() && !same {
                return Err(Error::Structural(format!(
                    "artificial link {} joins two subnetworks",
                    master.describe_link(id)
                )));
            }
            if !l.is_artificial() && same {
                return Err(Error::Structural(format!(
                    "physical master link {} is not a cut link",
                    master.describe_link(id)
                )));
            }
        }
        Ok(())
    }
}

/// Constrained shortest paths on a master network: 3-stage search for two
/// subnetworks, transformed-network Dijkstra otherwise.
#[derive(Clone, Debug)]
pub enum MasterRouter<'a> {
    ThreeStage {
        master: &'a Network,
        topology: MasterTopology,
        boundary: Vec<bool>,
    },
    Transformed {
        master: &'a Network,
        transformed: TransformedMasterNetwork,
    },
}

impl<'a> MasterRouter<'a> {
    /// Picks the 3-stage search when the master has exactly two
    /// subnetworks, the network transformation otherwise.
    pub fn new(master: &'a Network, topology: MasterTopology, roles: &[ZoneRole]) -> Result<Self> {
        if topology.subnet_count == 2 {
            Self::three_stage(master, topology)
        } else {
            Self::transformed(master, roles)
        }
    }

    pub fn three_stage(master: &'a Network, topology: MasterTopology) -> Result<Self> {
        if topology.subnet_count != 2 {
            return Err(Error::Unsupported(format!(
                "3-stage search needs exactly two subnetworks, got {}; use the network transformation",
                topology.subnet_count
            )));
        }
        topology.check(master)?;
        let boundary = MasterTopology::boundary_flags(master);
        Ok(MasterRouter::ThreeStage {
            master,
            topology,
            boundary,
        })
    }

    pub fn transformed(master: &'a Network, roles: &[ZoneRole]) -> Result<Self> {
        let transformed = transform_master(master, roles)?;
        Ok(MasterRouter::Transformed {
            master,
            transformed,
        })
    }
}

impl Router for MasterRouter<'_> {
    fn network(&self) -> &Network {
        match self {
            MasterRouter::ThreeStage { master, .. } | MasterRouter::Transformed { master, .. } => {
                master
            }
        }
    }

    fn labels(&self, origin: NodeId, costs: &[f64]) -> Result<LabelSet> {
        match self {
            MasterRouter::ThreeStage {
                master, boundary, ..
            } => {
                check_costs(costs, master.link_count())?;
                Ok(three_stage::search(master, boundary, origin, costs).labels)
            }
            MasterRouter::Transformed { transformed, .. } => transformed.labels(origin, costs),
        }
    }
}
