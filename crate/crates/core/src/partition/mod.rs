//! Two-way node partitions, the ψ statistic, partitioners and refinement.

mod fm;
mod prune;
mod sdda;
mod spectral;

pub use fm::{fm_refine, FmMove, FmOutcome};
pub use prune::{prune, Pruned, Reattached};
pub use sdda::sdda_partition;
pub use spectral::{fiedler_vector, spectral_partition, spectral_partition_unit, SpectralWeights};

use std::collections::BTreeMap;
use std::fmt;

use crate::demand::OdMatrix;
use crate::error::{Error, Result};
use crate::metrics::CompensatedSum;
use crate::network::{LinkId, Network, NodeId};

/// Node-to-subnetwork assignment. A node normally belongs to one subnet;
/// centroids reattached after pruning may belong to several (one copy per
/// subnet), in which case `assignment` holds the lowest.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    assignment: Vec<usize>,
    copies: BTreeMap<NodeId, Vec<usize>>,
    subnet_count: usize,
}

impl Partition {
    pub fn new(assignment: Vec<usize>) -> Result<Self> {
        Self::with_copies(assignment, BTreeMap::new())
    }

    /// `copies` maps a node to its full, sorted membership list.
    pub fn with_copies(assignment: Vec<usize>, copies: BTreeMap<NodeId, Vec<usize>>) -> Result<Self> {
        let mut copies_clean = BTreeMap::new();
        for (v, mut subnets) in copies {
            if v >= assignment.len() {
                return Err(Error::Structural(format!("copy of node {v} outside the partition")));
            }
            subnets.push(assignment[v]);
            subnets.sort_unstable();
            subnets.dedup();
            if subnets.len() > 1 {
                copies_clean.insert(v, subnets);
            }
        }
        let mut assignment = assignment;
        for (&v, subnets) in &copies_clean {
            assignment[v] = subnets[0];
        }
        let subnet_count = assignment
            .iter()
            .chain(copies_clean.values().flatten())
            .map(|&s| s + 1)
            .max()
            .unwrap_or(0);
        let mut used = vec![false; subnet_count];
        for &s in assignment.iter().chain(copies_clean.values().flatten()) {
            used[s] = true;
        }
        if let Some(gap) = used.iter().position(|u| !u) {
            return Err(Error::Validation(format!(
                "subnet ids must be contiguous from 0; subnet {gap} is empty but {} is used",
                subnet_count - 1
            )));
        }
        Ok(Partition {
            assignment,
            copies: copies_clean,
            subnet_count,
        })
    }

    /// Everything in subnet 0.
    pub fn single(nodes: usize) -> Self {
        Partition {
            assignment: vec![0; nodes],
            copies: BTreeMap::new(),
            subnet_count: usize::from(nodes > 0),
        }
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn subnet_count(&self) -> usize {
        self.subnet_count
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn subnet_of(&self, node: NodeId) -> usize {
        self.assignment[node]
    }

    pub fn memberships(&self, node: NodeId) -> &[usize] {
        match self.copies.get(&node) {
            Some(s) => s,
            None => std::slice::from_ref(&self.assignment[node]),
        }
    }

    pub fn is_member(&self, node: NodeId, subnet: usize) -> bool {
        self.memberships(node).contains(&subnet)
    }

    pub fn is_duplicated(&self, node: NodeId) -> bool {
        self.copies.contains_key(&node)
    }

    pub fn copies(&self) -> &BTreeMap<NodeId, Vec<usize>> {
        &self.copies
    }

    /// Lowest subnet shared by two nodes.
    pub fn common_subnet(&self, a: NodeId, b: NodeId) -> Option<usize> {
        let mb = self.memberships(b);
        self.memberships(a).iter().copied().find(|s| mb.contains(s))
    }

    /// Subnet owning link `l`, or `None` for a cut link.
    pub fn link_subnet(&self, network: &Network, l: LinkId) -> Option<usize> {
        let link = network.link(l);
        self.common_subnet(link.tail, link.head)
    }

    pub fn is_cut(&self, network: &Network, l: LinkId) -> bool {
        self.link_subnet(network, l).is_none()
    }

    pub fn cut_links(&self, network: &Network) -> Vec<LinkId> {
        (0..network.link_count())
            .filter(|&l| self.is_cut(network, l))
            .collect()
    }

    /// Nodes incident to at least one cut link.
    pub fn boundary_flags(&self, network: &Network) -> Vec<bool> {
        let mut flags = vec![false; network.node_count()];
        for l in self.cut_links(network) {
            let link = network.link(l);
            flags[link.tail] = true;
            flags[link.head] = true;
        }
        flags
    }

    pub fn boundary_nodes(&self, network: &Network) -> Vec<NodeId> {
        let flags = self.boundary_flags(network);
        (0..network.node_count()).filter(|&v| flags[v]).collect()
    }

    /// Node count per subnet, copies counted once per subnet they live in.
    pub fn node_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.subnet_count];
        for v in 0..self.assignment.len() {
            for &s in self.memberships(v) {
                counts[s] += 1;
            }
        }
        counts
    }

    /// Non-cut link count per subnet.
    pub fn link_counts(&self, network: &Network) -> Vec<usize> {
        let mut counts = vec![0; self.subnet_count];
        for l in 0..network.link_count() {
            if let Some(s) = self.link_subnet(network, l) {
                counts[s] += 1;
            }
        }
        counts
    }

    pub fn check_covers(&self, network: &Network) -> Result<()> {
        if self.assignment.len() != network.node_count() {
            return Err(Error::Structural(format!(
                "partition covers {} nodes, network has {}",
                self.assignment.len(),
                network.node_count()
            )));
        }
        Ok(())
    }

    /// Subnets whose induced subgraph is not weakly connected.
    pub fn disconnected_subnets(&self, network: &Network) -> Vec<usize> {
        let adjacency = undirected_adjacency(network);
        (0..self.subnet_count)
            .filter(|&s| {
                let members: Vec<NodeId> = (0..self.assignment.len())
                    .filter(|&v| self.is_member(v, s))
                    .collect();
                !members.is_empty()
                    && component_size(&adjacency, members[0], |v| self.is_member(v, s), None)
                        != members.len()
            })
            .collect()
    }

    pub fn check_connected(&self, network: &Network) -> Result<()> {
        self.check_covers(network)?;
        match self.disconnected_subnets(network).first() {
            Some(s) => Err(Error::Validation(format!("subnet {s} is not connected"))),
            None => Ok(()),
        }
    }
}

/// Undirected neighbour lists (parallel and antiparallel links collapse).
pub(crate) fn undirected_adjacency(network: &Network) -> Vec<Vec<NodeId>> {
    let mut adj = vec![Vec::new(); network.node_count()];
    for l in network.links() {
        adj[l.tail].push(l.head);
        adj[l.head].push(l.tail);
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    adj
}

/// Size of the component of `start` among nodes passing `keep`, skipping
/// `removed`.
pub(crate) fn component_size(
    adjacency: &[Vec<NodeId>],
    start: NodeId,
    keep: impl Fn(NodeId) -> bool,
    removed: Option<NodeId>,
) -> usize {
    let mut seen = vec![false; adjacency.len()];
    let mut stack = vec![start];
    seen[start] = true;
    let mut count = 0;
    while let Some(v) = stack.pop() {
        count += 1;
        for &w in &adjacency[v] {
            if !seen[w] && Some(w) != removed && keep(w) {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    count
}

/// Weakly connected components, labelled in order of their lowest node.
pub(crate) fn components(adjacency: &[Vec<NodeId>], keep: impl Fn(NodeId) -> bool) -> Vec<Option<usize>> {
    let mut label = vec![None; adjacency.len()];
    let mut next = 0;
    for s in 0..adjacency.len() {
        if label[s].is_some() || !keep(s) {
            continue;
        }
        label[s] = Some(next);
        let mut stack = vec![s];
        while let Some(v) = stack.pop() {
            for &w in &adjacency[v] {
                if label[w].is_none() && keep(w) {
                    label[w] = Some(next);
                    stack.push(w);
                }
            }
        }
        next += 1;
    }
    label
}

#[derive(Clone, Debug, PartialEq)]
pub struct PsiReport {
    pub interflow: f64,
    pub interdemand: f64,
    pub psi: f64,
    pub node_counts: Vec<usize>,
    pub link_counts: Vec<usize>,
    pub boundary_nodes: usize,
    pub cut_links: usize,
}

impl PsiReport {
    pub fn ratio(values: &[usize]) -> String {
        values
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(":")
    }

    pub const HEADER: [&'static str; 5] = ["n1:n2", "m1:m2", "# boundary nodes", "# cut links", "psi"];

    pub fn row(&self) -> [String; 5] {
        [
            Self::ratio(&self.node_counts),
            Self::ratio(&self.link_counts),
            self.boundary_nodes.to_string(),
            self.cut_links.to_string(),
            format!("{:.1}", self.psi),
        ]
    }
}

impl fmt::Display for PsiReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let row = self.row();
        let widths: Vec<usize> = Self::HEADER
            .iter()
            .zip(&row)
            .map(|(h, r)| h.chars().count().max(r.chars().count()))
            .collect();
        for (i, h) in Self::HEADER.iter().enumerate() {
            write!(f, "{:>w$}  ", h, w = widths[i])?;
        }
        writeln!(f)?;
        for (i, r) in row.iter().enumerate() {
            write!(f, "{:>w$}  ", r, w = widths[i])?;
        }
        writeln!(f)
    }
}

/// ψ = flow on cut links minus demand between zones in different subnets.
pub fn psi(
    network: &Network,
    od: &OdMatrix,
    reference_flows: &[f64],
    partition: &Partition,
) -> Result<PsiReport> {
    partition.check_covers(network)?;
    network.check_flow_vector(reference_flows)?;
    let cut = partition.cut_links(network);
    let interflow = cut
        .iter()
        .map(|&l| reference_flows[l])
        .collect::<CompensatedSum>()
        .value();
    let interdemand = od
        .pairs()
        .iter()
        .filter(|p| partition.common_subnet(p.origin, p.destination).is_none())
        .map(|p| p.demand)
        .collect::<CompensatedSum>()
        .value();
    Ok(PsiReport {
        interflow,
        interdemand,
        psi: interflow - interdemand,
        node_counts: partition.node_counts(),
        link_counts: partition.link_counts(network),
        boundary_nodes: partition.boundary_nodes(network).len(),
        cut_links: cut.len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Partitioner {
    Sdda,
    /// Fiedler bisection weighted by reference flows.
    Spectral,
    SpectralUnit,
}

impl fmt::Display for Partitioner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Partitioner::Sdda => "sdda",
            Partitioner::Spectral => "spectral",
            Partitioner::SpectralUnit => "spectral-unit",
        })
    }
}

impl std::str::FromStr for Partitioner {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "sdda" => Ok(Partitioner::Sdda),
            "spectral" => Ok(Partitioner::Spectral),
            "spectral-unit" => Ok(Partitioner::SpectralUnit),
            other => Err(format!("unknown partitioner {other:?}")),
        }
    }
}

/// Two-way partition of the full network: prune, split the pruned graph,
/// reattach centroids and dropped components.
pub fn partition_network(
    network: &Network,
    partitioner: Partitioner,
    reference_flows: Option<&[f64]>,
    seed: u64,
) -> Result<Reattached> {
    let pruned = match partitioner {
        Partitioner::Spectral => {
            let flows = reference_flows.ok_or_else(|| {
                Error::Validation("flow-weighted spectral partitioning needs reference flows".into())
            })?;
            prune(network, Some(flows))?
        }
        _ => prune(network, None)?,
    };
    let raw = match partitioner {
        Partitioner::Sdda => sdda_partition(&pruned.network, 2, seed)?,
        Partitioner::Spectral => {
            let flows = pruned.flows(reference_flows.expect("checked above"));
            spectral_partition(&pruned.network, &flows)?
        }
        Partitioner::SpectralUnit => spectral_partition_unit(&pruned.network)?,
    };
    pruned.reattach(network, &raw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{CostFunction, Link};

    fn path(n: usize) -> Network {
        let mut links = Vec::new();
        for i in 0..n - 1 {
            links.push(Link::physical(i, i + 1, CostFunction::bpr(1.0, 10.0)));
            links.push(Link::physical(i + 1, i, CostFunction::bpr(1.0, 10.0)));
        }
        Network::new(n, 2, 0, links).unwrap()
    }

    #[test]
    fn ids_must_be_contiguous() {
        assert!(matches!(Partition::new(vec![0, 2, 2]), Err(Error::Validation(_))));
        assert_eq!(Partition::new(vec![1, 0, 1]).unwrap().subnet_count(), 2);
    }

    #[test]
    fn single_subnet_has_zero_psi() {
        let net = path(4);
        let od = OdMatrix::from_entries(2, [(0, 1, 5.0)]).unwrap();
        let r = psi(&net, &od, &vec![3.0; net.link_count()], &Partition::single(4)).unwrap();
        assert_eq!((r.interflow, r.interdemand, r.psi), (0.0, 0.0, 0.0));
    }

    #[test]
    fn psi_is_interflow_minus_interdemand() {
        // zones 0 and 1 at the two ends of a 4-node path, split in the middle
        let links = vec![
            Link::physical(0, 2, CostFunction::bpr(1.0, 10.0)),
            Link::physical(2, 3, CostFunction::bpr(1.0, 10.0)),
            Link::physical(3, 1, CostFunction::bpr(1.0, 10.0)),
        ];
        let net = Network::new(4, 2, 0, links).unwrap();
        let od = OdMatrix::from_entries(2, [(0, 1, 100.0)]).unwrap();
        let p = Partition::new(vec![0, 1, 0, 1]).unwrap();
        let r = psi(&net, &od, &[150.0, 150.0, 150.0], &p).unwrap();
        assert_eq!((r.interflow, r.interdemand, r.psi), (150.0, 100.0, 50.0));
        assert_eq!(r.cut_links, 1);
        assert_eq!(r.boundary_nodes, 2);
        assert_eq!(r.node_counts, vec![2, 2]);
    }

    #[test]
    fn copies_share_subnets() {
        let net = path(4);
        let mut copies = BTreeMap::new();
        copies.insert(1, vec![0, 1]);
        let p = Partition::with_copies(vec![0, 1, 0, 1], copies).unwrap();
        assert_eq!(p.memberships(1), &[0, 1]);
        assert_eq!(p.subnet_of(1), 0);
        assert_eq!(p.node_counts(), vec![3, 2]);
        // link 1 -> 2 now lives in subnet 0
        let l = net.find_link(1, 2).unwrap();
        assert_eq!(p.link_subnet(&net, l), Some(0));
    }

    #[test]
    fn report_table_has_appendix_columns() {
        let net = path(4);
        let od = OdMatrix::from_entries(2, []).unwrap();
        let p = Partition::new(vec![0, 0, 1, 1]).unwrap();
        let text = psi(&net, &od, &vec![1.0; 6], &p).unwrap().to_string();
        assert!(text.contains("n1:n2") && text.contains("2:2") && text.contains("# cut links"));
    }

    #[test]
    fn disconnected_subnet_is_reported() {
        let net = path(4);
        let p = Partition::new(vec![0, 1, 0, 1]).unwrap();
        assert_eq!(p.disconnected_subnets(&net), vec![0, 1]);
        assert!(Partition::new(vec![0, 0, 1, 1]).unwrap().check_connected(&net).is_ok());
    }

    #[test]
    fn pipeline_covers_the_full_network() {
        let inst = crate::synth::grid(6, 6, 2, 10.0, 4);
        for method in [Partitioner::Sdda, Partitioner::SpectralUnit] {
            let r = partition_network(&inst.network, method, None, 0).unwrap();
            assert_eq!(r.partition.subnet_count(), 2, "{method}");
            r.partition.check_covers(&inst.network).unwrap();
        }
        assert!(matches!(
            partition_network(&inst.network, Partitioner::Spectral, None, 0),
            Err(Error::Validation(_))
        ));
        assert_eq!("spectral-unit".parse::<Partitioner>(), Ok(Partitioner::SpectralUnit));
    }
}
