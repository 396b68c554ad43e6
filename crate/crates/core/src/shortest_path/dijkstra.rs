use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::LabelSet;
use crate::error::{Error, Result};
use crate::network::{LinkId, Network, NodeId};

/// Min-heap entry ordered by cost, then by lower node id.
#[derive(Clone, Copy, Debug)]
pub(crate) struct HeapEntry<S = ()> {
    pub cost: f64,
    pub node: NodeId,
    pub state: S,
}

impl<S: Ord> PartialEq for HeapEntry<S> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<S: Ord> Eq for HeapEntry<S> {}

impl<S: Ord> PartialOrd for HeapEntry<S> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<S: Ord> Ord for HeapEntry<S> {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.node.cmp(&self.node))
            .then_with(|| other.state.cmp(&self.state))
    }
}

pub(crate) fn check_costs(costs: &[f64], expected: usize) -> Result<()> {
    if costs.len() != expected {
        return Err(Error::Structural(format!(
            "cost vector has {} entries, network has {expected} links",
            costs.len()
        )));
    }
    if let Some((i, c)) = costs.iter().enumerate().find(|(_, c)| !(**c >= 0.0)) {
        return Err(Error::Domain(format!("link {i} has cost {c}; costs must be >= 0")));
    }
    Ok(())
}

/// One-to-all label setting from `origin` at the given link costs.
///
/// Nodes below the network's first through node are labelled but never
/// expanded unless they are the origin.
pub fn dijkstra(network: &Network, origin: NodeId, costs: &[f64]) -> Result<LabelSet> {
    dijkstra_with(network, origin, costs, |v| network.is_through(v))
}

/// Dijkstra with a caller-supplied through-node predicate.
pub fn dijkstra_with(
    network: &Network,
    origin: NodeId,
    costs: &[f64],
    through: impl Fn(NodeId) -> bool,
) -> Result<LabelSet> {
    check_costs(costs, network.link_count())?;
    let n = network.node_count();
    if origin >= n {
        return Err(Error::Structural(format!("origin {origin} outside 0..{n}")));
    }
    let mut cost = vec![f64::INFINITY; n];
    let mut back_link: Vec<Option<LinkId>> = vec![None; n];
    let mut settled = vec![false; n];
    let mut heap = BinaryHeap::new();
    cost[origin] = 0.0;
    heap.push(HeapEntry {
        cost: 0.0,
        node: origin,
        state: (),
    });
    while let Some(HeapEntry { cost: c, node: v, .. }) = heap.pop() {
        if settled[v] || c > cost[v] {
            continue;
        }
        settled[v] = true;
        if v != origin && !through(v) {
            continue;
        }
        for &l in network.outgoing(v) {
            let w = network.link(l).head;
            let candidate = c + costs[l];
            if candidate < cost[w] {
                cost[w] = candidate;
                back_link[w] = Some(l);
                heap.push(HeapEntry {
                    cost: candidate,
                    node: w,
                    state: (),
                });
            }
        }
    }
    Ok(LabelSet {
        origin,
        cost,
        back_link,
        explicit_paths: None,
    })
}
