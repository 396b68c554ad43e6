use crate::demand::OdMatrix;
use crate::error::{Error, Result};
use crate::network::{LinkId, Network, NodeId};

#[derive(Clone, Debug, PartialEq)]
pub struct PathFlow {
    /// Ordered link sequence; this is the path's identity.
    pub links: Vec<LinkId>,
    pub flow: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OdFlows {
    pub origin: NodeId,
    pub destination: NodeId,
    pub demand: f64,
    pub paths: Vec<PathFlow>,
}

impl OdFlows {
    pub fn total_flow(&self) -> f64 {
        self.paths.iter().map(|p| p.flow).sum()
    }
}

/// Per-OD used paths with their flows, plus the induced link flows.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PathFlowSolution {
    pub ods: Vec<OdFlows>,
    pub link_flows: Vec<f64>,
}

impl PathFlowSolution {
    pub fn empty(network: &Network) -> Self {
        PathFlowSolution {
            ods: Vec::new(),
            link_flows: vec![0.0; network.link_count()],
        }
    }

    pub fn find(&self, origin: NodeId, destination: NodeId) -> Option<&OdFlows> {
        self.ods
            .binary_search_by(|o| (o.origin, o.destination).cmp(&(origin, destination)))
            .ok()
            .map(|i| &self.ods[i])
    }

    pub fn path_count(&self) -> usize {
        self.ods.iter().map(|o| o.paths.len()).sum()
    }

    /// Largest absolute violation of per-OD flow conservation.
    pub fn conservation_error(&self) -> f64 {
        self.ods
            .iter()
            .map(|o| (o.total_flow() - o.demand).abs())
            .fold(0.0, f64::max)
    }

    /// Checks non-negativity and per-OD conservation against `od`.
    pub fn check_feasible(&self, od: &OdMatrix, tolerance: f64) -> Result<()> {
        for pair in od.pairs() {
            let flows = self.find(pair.origin, pair.destination).ok_or_else(|| {
                Error::Consistency(format!(
                    "OD pair ({}, {}) has no paths",
                    pair.origin, pair.destination
                ))
            })?;
            let total = flows.total_flow();
            if (total - pair.demand).abs() > tolerance * pair.demand.max(1.0) {
                return Err(Error::Consistency(format!(
                    "OD pair ({}, {}) carries {total}, demand is {}",
                    pair.origin, pair.destination, pair.demand
                )));
            }
            if flows.paths.iter().any(|p| p.flow < 0.0) {
                return Err(Error::Consistency(format!(
                    "OD pair ({}, {}) has a negative path flow",
                    pair.origin, pair.destination
                )));
            }
        }
        Ok(())
    }
}

/// Node sequence visited by a contiguous link path starting at `origin`.
pub fn path_nodes(network: &Network, origin: NodeId, links: &[LinkId]) -> Vec<NodeId> {
    let mut nodes = Vec::with_capacity(links.len() + 1);
    nodes.push(origin);
    nodes.extend(links.iter().map(|&l| network.link(l).head));
    nodes
}

/// Checks that `links` is a contiguous walk from `origin` to `destination`.
pub fn validate_path(
    network: &Network,
    origin: NodeId,
    destination: NodeId,
    links: &[LinkId],
) -> Result<()> {
    let mut at = origin;
    for &l in links {
        if l >= network.link_count() {
            return Err(Error::Structural(format!(
                "path references link {l}, network has {}",
                network.link_count()
            )));
        }
        let link = network.link(l);
        if link.tail != at {
            return Err(Error::Structural(format!(
                "path is not contiguous: link {} does not start at node {}",
                network.describe_link(l),
                network.label(at)
            )));
        }
        at = link.head;
    }
    if at != destination {
        return Err(Error::Structural(format!(
            "path from {} ends at {} instead of {}",
            network.label(origin),
            network.label(at),
            network.label(destination)
        )));
    }
    Ok(())
}

/// Aggregates path flows onto links (`x_a = sum of h_p over paths using a`).
pub fn link_flows_from_paths(network: &Network, solution: &PathFlowSolution) -> Result<Vec<f64>> {
    let mut flows = vec![0.0; network.link_count()];
    for od in &solution.ods {
        for path in &od.paths {
            validate_path(network, od.origin, od.destination, &path.links)?;
            for &l in &path.links {
                flows[l] += path.flow;
            }
        }
    }
    Ok(flows)
}
