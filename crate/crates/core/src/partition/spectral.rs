use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{components, undirected_adjacency, Partition};
use crate::error::{Error, Result};
use crate::network::{Network, NodeId};

const RESIDUAL: f64 = 1e-8;

#[derive(Clone, Copy, Debug)]
pub enum SpectralWeights<'a> {
    /// Edge weight = sum of the reference flows in both directions.
    Flow(&'a [f64]),
    /// Every adjacent pair weighs 1, which approximates a minimum link cut.
    Unit,
}

/// Bisection by the sign of the Fiedler vector of the flow-weighted
/// Laplacian. Pairs without flow carry no weight, so zero-flow links
/// should be pruned first.
pub fn spectral_partition(network: &Network, reference_flows: &[f64]) -> Result<Partition> {
    network.check_flow_vector(reference_flows)?;
    bisect(network, SpectralWeights::Flow(reference_flows))
}

pub fn spectral_partition_unit(network: &Network) -> Result<Partition> {
    bisect(network, SpectralWeights::Unit)
}

fn weighted_edges(network: &Network, weights: SpectralWeights) -> Vec<(NodeId, NodeId, f64)> {
    let mut edges: Vec<(NodeId, NodeId, f64)> = network
        .links()
        .iter()
        .enumerate()
        .map(|(l, link)| {
            let w = match weights {
                SpectralWeights::Flow(x) => x[l].max(0.0),
                SpectralWeights::Unit => 1.0,
            };
            (link.tail.min(link.head), link.tail.max(link.head), w)
        })
        .collect();
    edges.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    let mut merged: Vec<(NodeId, NodeId, f64)> = Vec::new();
    for (a, b, w) in edges {
        match merged.last_mut() {
            Some(last) if (last.0, last.1) == (a, b) => {
                if matches!(weights, SpectralWeights::Flow(_)) {
                    last.2 += w;
                }
            }
            _ => merged.push((a, b, w)),
        }
    }
    merged.retain(|e| e.2 > 0.0);
    let max = merged.iter().map(|e| e.2).fold(0.0, f64::max);
    for e in &mut merged {
        e.2 /= max;
    }
    merged
}

fn bisect(network: &Network, weights: SpectralWeights) -> Result<Partition> {
    let n = network.node_count();
    if n < 2 {
        return Err(Error::Degenerate(format!("cannot bisect a network with {n} nodes")));
    }
    let edges = weighted_edges(network, weights);
    let vector = fiedler_vector(n, &edges)?;
    let assignment: Vec<usize> = vector.iter().map(|&v| usize::from(v > 0.0)).collect();
    let repaired = keep_largest_pieces(network, assignment);
    Partition::new(repaired)
}

/// Moves every piece of a subnet other than its largest one to the other
/// subnet, so that both sides come out connected.
fn keep_largest_pieces(network: &Network, mut assignment: Vec<usize>) -> Vec<usize> {
    let adjacency = undirected_adjacency(network);
    for s in 0..2 {
        let labels = components(&adjacency, |v| assignment[v] == s);
        let count = labels.iter().flatten().max().map_or(0, |m| m + 1);
        if count <= 1 {
            continue;
        }
        let mut sizes = vec![0usize; count];
        for c in labels.iter().flatten() {
            sizes[*c] += 1;
        }
        let keep = (0..count).max_by(|&a, &b| sizes[a].cmp(&sizes[b]).then(b.cmp(&a))).unwrap();
        for (v, c) in labels.iter().enumerate() {
            if matches!(c, Some(c) if *c != keep) {
                assignment[v] = 1 - s;
            }
        }
    }
    assignment
}

/// Fiedler vector of the Laplacian of an undirected weighted graph on `n`
/// nodes, by power iteration on `cI - L` with the constant vector projected
/// out. Normalised to unit length with a non-positive first entry.
pub fn fiedler_vector(n: usize, edges: &[(NodeId, NodeId, f64)]) -> Result<Vec<f64>> {
    let mut adj: Vec<Vec<(NodeId, f64)>> = vec![Vec::new(); n];
    for &(a, b, w) in edges {
        adj[a].push((b, w));
        adj[b].push((a, w));
    }
    let plain: Vec<Vec<NodeId>> = adj.iter().map(|l| l.iter().map(|e| e.0).collect()).collect();
    if components(&plain, |_| true).iter().any(|c| *c != Some(0)) {
        return Err(Error::Degenerate(
            "weighted graph is disconnected; prune zero-flow links and keep one component first".into(),
        ));
    }
    let degree: Vec<f64> = adj.iter().map(|l| l.iter().map(|e| e.1).sum()).collect();
    let shift = 2.0 * degree.iter().copied().fold(0.0, f64::max);
    let laplacian = |v: &[f64], out: &mut [f64]| {
        for i in 0..n {
            let mut s = degree[i] * v[i];
            for &(j, w) in &adj[i] {
                s -= w * v[j];
            }
            out[i] = s;
        }
    };
    let deflate_normalize = |v: &mut [f64]| {
        let mean = v.iter().sum::<f64>() / n as f64;
        v.iter_mut().for_each(|x| *x -= mean);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    deflate_normalize(&mut v);
    let mut lv = vec![0.0; n];
    let max_iterations = 2_000_000 / n.max(1) + 50_000;
    let mut residual = f64::INFINITY;
    for _ in 0..max_iterations {
        laplacian(&v, &mut lv);
        let lambda: f64 = v.iter().zip(&lv).map(|(a, b)| a * b).sum();
        residual = lv
            .iter()
            .zip(&v)
            .map(|(l, x)| (l - lambda * x).powi(2))
            .sum::<f64>()
            .sqrt();
        if residual <= RESIDUAL {
            break;
        }
        for i in 0..n {
            v[i] = shift * v[i] - lv[i];
        }
        deflate_normalize(&mut v);
    }
    if residual > RESIDUAL {
        log::warn!("Fiedler iteration stopped at residual {residual:.2e}");
    }
    if v[0] > 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    Ok(v)
}
