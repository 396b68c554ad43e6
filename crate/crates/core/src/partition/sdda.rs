use std::collections::BinaryHeap;

use super::{components, undirected_adjacency, Partition};
use crate::error::{Error, Result};
use crate::network::{Network, NodeId};
use crate::shortest_path::HeapEntry;

/// Undirected neighbour lists weighted by the cheaper free-flow time of the
/// links joining each pair.
fn free_flow_graph(network: &Network) -> Vec<Vec<(NodeId, f64)>> {
    let mut adj: Vec<Vec<(NodeId, f64)>> = vec![Vec::new(); network.node_count()];
    for l in network.links() {
        let t = l.cost.time(0.0);
        adj[l.tail].push((l.head, t));
        adj[l.head].push((l.tail, t));
    }
    for list in &mut adj {
        list.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
        list.dedup_by_key(|e| e.0);
    }
    adj
}

fn distances(adj: &[Vec<(NodeId, f64)>], source: NodeId) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; adj.len()];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(HeapEntry { cost: 0.0, node: source, state: () });
    while let Some(HeapEntry { cost, node, .. }) = heap.pop() {
        if cost > dist[node] {
            continue;
        }
        for &(w, t) in &adj[node] {
            let c = cost + t;
            if c < dist[w] {
                dist[w] = c;
                heap.push(HeapEntry { cost: c, node: w, state: () });
            }
        }
    }
    dist
}

fn farthest(dist: &[f64]) -> NodeId {
    let mut best = 0;
    for (v, &d) in dist.iter().enumerate() {
        if d > dist[best] {
            best = v;
        }
    }
    best
}

/// Shortest domain decomposition: `k` seeds far apart in free-flow time
/// (double sweep from node `seed % n`, then farthest-point for more seeds),
/// grown into regions by taking turns, each turn claiming the unassigned
/// node closest to that region. Subnets are numbered by their lowest node.
pub fn sdda_partition(network: &Network, k: usize, seed: u64) -> Result<Partition> {
    let n = network.node_count();
    if k == 0 || k > n {
        return Err(Error::Validation(format!(
            "cannot split {n} nodes into {k} subnets"
        )));
    }
    let adjacency = undirected_adjacency(network);
    if components(&adjacency, |_| true).iter().any(|c| *c != Some(0)) {
        return Err(Error::Validation(
            "network is not connected; prune it before partitioning".into(),
        ));
    }
    let adj = free_flow_graph(network);
    let start = (seed % n as u64) as NodeId;
    let mut seeds = vec![farthest(&distances(&adj, start))];
    let mut nearest = distances(&adj, seeds[0]);
    while seeds.len() < k {
        let mut next = None;
        for v in 0..n {
            if seeds.contains(&v) {
                continue;
            }
            if next.map_or(true, |b: NodeId| nearest[v] > nearest[b]) {
                next = Some(v);
            }
        }
        let s = next.expect("fewer seeds than nodes");
        seeds.push(s);
        for (m, d) in nearest.iter_mut().zip(distances(&adj, s)) {
            *m = m.min(d);
        }
    }

    let mut region = vec![usize::MAX; n];
    let mut heaps: Vec<BinaryHeap<HeapEntry>> = seeds
        .iter()
        .map(|&s| {
            let mut h = BinaryHeap::new();
            h.push(HeapEntry { cost: 0.0, node: s, state: () });
            h
        })
        .collect();
    let mut assigned = 0;
    let mut turn = 0;
    while assigned < n {
        let r = turn % k;
        turn += 1;
        while let Some(HeapEntry { cost, node, .. }) = heaps[r].pop() {
            if region[node] != usize::MAX {
                continue;
            }
            region[node] = r;
            assigned += 1;
            for &(w, t) in &adj[node] {
                if region[w] == usize::MAX {
                    heaps[r].push(HeapEntry { cost: cost + t, node: w, state: () });
                }
            }
            break;
        }
    }

    // canonical numbering: subnet 0 holds node 0, and so on
    let mut rename = vec![usize::MAX; k];
    let mut next = 0;
    for &r in &region {
        if rename[r] == usize::MAX {
            rename[r] = next;
            next += 1;
        }
    }
    Partition::new(region.into_iter().map(|r| rename[r]).collect())
}
