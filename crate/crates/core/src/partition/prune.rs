use std::collections::{BTreeMap, VecDeque};

use super::{components, undirected_adjacency, Partition};
use crate::error::{Error, Result};
use crate::network::{Link, LinkId, Network, NodeId};

/// The graph handed to a partitioner: centroids and their connectors
/// removed, optionally zero-flow links too, largest component only.
#[derive(Clone, Debug)]
pub struct Pruned {
    pub network: Network,
    /// Full-network node behind each pruned node.
    pub nodes: Vec<NodeId>,
    /// Full-network link behind each pruned link.
    pub links: Vec<LinkId>,
    pub removed_centroids: Vec<NodeId>,
    /// Components cut off from the largest one, in full-network ids.
    pub dropped: Vec<Vec<NodeId>>,
}

#[derive(Clone, Debug)]
pub struct Reattached {
    pub partition: Partition,
    /// Centroids with connectors into more than one subnet.
    pub duplicated: Vec<NodeId>,
    /// Dropped components, each absorbed into an adjacent subnet.
    pub absorbed: Vec<Vec<NodeId>>,
}

/// Removes centroids that may not carry through traffic with their
/// connectors, then (when `reference_flows` is given) links without flow,
/// and keeps the largest remaining component.
pub fn prune(network: &Network, reference_flows: Option<&[f64]>) -> Result<Pruned> {
    if let Some(x) = reference_flows {
        network.check_flow_vector(x)?;
    }
    let n = network.node_count();
    let centroid = |v: NodeId| network.is_zone(v) && !network.is_through(v);
    let removed_centroids: Vec<NodeId> = (0..n).filter(|&v| centroid(v)).collect();
    let link_kept = |l: LinkId| {
        let link = network.link(l);
        !centroid(link.tail)
            && !centroid(link.head)
            && reference_flows.map_or(true, |x| x[l] > 0.0)
    };
    let mut adjacency = vec![Vec::new(); n];
    for l in (0..network.link_count()).filter(|&l| link_kept(l)) {
        let link = network.link(l);
        adjacency[link.tail].push(link.head);
        adjacency[link.head].push(link.tail);
    }
    let labels = components(&adjacency, |v| !centroid(v));
    let count = labels.iter().flatten().max().map_or(0, |m| m + 1);
    if count == 0 {
        return Err(Error::Degenerate("nothing left after removing centroids".into()));
    }
    let mut sizes = vec![0usize; count];
    for c in labels.iter().flatten() {
        sizes[*c] += 1;
    }
    let main = (0..count).max_by(|&a, &b| sizes[a].cmp(&sizes[b]).then(b.cmp(&a))).unwrap();
    // group what is cut off by its connectivity in the unpruned graph
    let full_adjacency = undirected_adjacency(network);
    let outside = components(&full_adjacency, |v| !centroid(v) && labels[v].is_some_and(|c| c != main));
    let groups = outside.iter().flatten().max().map_or(0, |m| m + 1);
    let mut dropped = vec![Vec::new(); groups];
    for (v, c) in outside.iter().enumerate() {
        if let Some(c) = *c {
            dropped[c].push(v);
        }
    }
    for d in &dropped {
        log::info!(
            "pruning drops a component of {} nodes starting at node {}",
            d.len(),
            network.label(d[0])
        );
    }

    let nodes: Vec<NodeId> = (0..n).filter(|&v| labels[v] == Some(main)).collect();
    let mut local = vec![usize::MAX; n];
    for (i, &v) in nodes.iter().enumerate() {
        local[v] = i;
    }
    let mut links = Vec::new();
    let mut pruned_links = Vec::new();
    for l in 0..network.link_count() {
        let link = network.link(l);
        if link_kept(l) && labels[link.tail] == Some(main) {
            links.push(l);
            pruned_links.push(Link {
                tail: local[link.tail],
                head: local[link.head],
                ..link.clone()
            });
        }
    }
    let pruned = Network::with_labels(
        nodes.iter().map(|&v| network.label(v)).collect(),
        0,
        0,
        pruned_links,
    )?;
    Ok(Pruned {
        network: pruned,
        nodes,
        links,
        removed_centroids,
        dropped,
    })
}

impl Pruned {
    /// Restricts a full-network flow vector to the pruned links.
    pub fn flows(&self, full_flows: &[f64]) -> Vec<f64> {
        self.links.iter().map(|&l| full_flows[l]).collect()
    }

    /// Lifts a partition of the pruned graph to the full network.
    ///
    /// Dropped components join the subnet they touch first in a
    /// breadth-first sweep, and every centroid joins the subnets of its
    /// connectors' other ends, with one copy per subnet when those differ.
    pub fn reattach(&self, full: &Network, raw: &Partition) -> Result<Reattached> {
        raw.check_covers(&self.network)?;
        let n = full.node_count();
        let adjacency = undirected_adjacency(full);
        let mut is_centroid = vec![false; n];
        for &c in &self.removed_centroids {
            is_centroid[c] = true;
        }
        let mut subnet: Vec<Option<usize>> = vec![None; n];
        for (i, &v) in self.nodes.iter().enumerate() {
            subnet[v] = Some(raw.subnet_of(i));
        }

        let spread = |subnet: &mut Vec<Option<usize>>, through_centroids: bool| {
            let mut queue: VecDeque<NodeId> = (0..n)
                .filter(|&v| subnet[v].is_some() && (through_centroids || !is_centroid[v]))
                .collect();
            while let Some(v) = queue.pop_front() {
                for &w in &adjacency[v] {
                    if subnet[w].is_none() && !is_centroid[w] {
                        subnet[w] = subnet[v];
                        queue.push_back(w);
                    }
                }
            }
        };
        spread(&mut subnet, false);

        let mut copies = BTreeMap::new();
        let mut duplicated = Vec::new();
        for &c in &self.removed_centroids {
            let mut set: Vec<usize> = adjacency[c]
                .iter()
                .filter(|&&u| !is_centroid[u])
                .filter_map(|&u| subnet[u])
                .collect();
            set.sort_unstable();
            set.dedup();
            match set.len() {
                0 => {
                    return Err(Error::Infeasible(format!(
                        "centroid {} has no connector into any subnet",
                        full.label(c)
                    )))
                }
                1 => subnet[c] = Some(set[0]),
                _ => {
                    subnet[c] = Some(set[0]);
                    duplicated.push(c);
                    copies.insert(c, set);
                }
            }
        }
        // nodes reachable only through centroids
        spread(&mut subnet, true);
        let assignment = subnet
            .iter()
            .enumerate()
            .map(|(v, s)| {
                s.unwrap_or_else(|| {
                    log::warn!("isolated node {} placed in subnet 0", full.label(v));
                    0
                })
            })
            .collect();
        Ok(Reattached {
            partition: Partition::with_copies(assignment, copies)?,
            duplicated,
            absorbed: self.dropped.clone(),
        })
    }
}
