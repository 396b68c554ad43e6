use super::{components, undirected_adjacency, psi, Partition};
use crate::demand::OdMatrix;
use crate::error::{Error, Result};
use crate::network::{Network, NodeId};

const IMPROVEMENT: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FmMove {
    pub node: NodeId,
    pub from: usize,
    pub to: usize,
    /// Change in ψ predicted by the incremental bookkeeping.
    pub delta_psi: f64,
    pub psi_after: f64,
}

#[derive(Clone, Debug)]
pub struct FmOutcome {
    pub partition: Partition,
    pub initial_psi: f64,
    pub final_psi: f64,
    pub moves: Vec<FmMove>,
}

/// ψ-FM refinement of a two-way partition.
///
/// Each step moves the boundary node whose move lowers ψ the most (ties to
/// the lower node id), skipping moves that would empty a subnet or split it
/// into more pieces. A moved node stays locked until the pass ends; passes
/// repeat while they make progress, up to `max_moves` moves in total.
/// Centroids with copies in both subnets never move.
pub fn fm_refine(
    network: &Network,
    od: &OdMatrix,
    reference_flows: &[f64],
    partition: &Partition,
    max_moves: usize,
) -> Result<FmOutcome> {
    if partition.subnet_count() > 2 {
        return Err(Error::Unsupported(format!(
            "ψ-FM refines two-way partitions only, got {} subnets",
            partition.subnet_count()
        )));
    }
    let initial_psi = psi(network, od, reference_flows, partition)?.psi;
    let mut outcome = FmOutcome {
        partition: partition.clone(),
        initial_psi,
        final_psi: initial_psi,
        moves: Vec::new(),
    };
    if partition.subnet_count() < 2 {
        return Ok(outcome);
    }

    let n = network.node_count();
    let adjacency = undirected_adjacency(network);
    let mut zone_demand: Vec<Vec<(NodeId, f64)>> = vec![Vec::new(); n];
    for p in od.pairs() {
        zone_demand[p.origin].push((p.destination, p.demand));
        zone_demand[p.destination].push((p.origin, p.demand));
    }

    let mut part = partition.clone();
    let mut current = initial_psi;
    'passes: loop {
        let mut locked = vec![false; n];
        let mut moved = false;
        loop {
            if outcome.moves.len() >= max_moves {
                break 'passes;
            }
            let boundary = part.boundary_flags(network);
            let sizes = part.node_counts();
            let mut candidates: Vec<(f64, NodeId)> = (0..n)
                .filter(|&v| boundary[v] && !locked[v] && !part.is_duplicated(v))
                .filter(|&v| sizes[part.subnet_of(v)] > 1)
                .map(|v| (move_delta(network, &zone_demand, reference_flows, &part, v), v))
                .filter(|&(d, _)| d < -IMPROVEMENT)
                .collect();
            candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let chosen = candidates
                .into_iter()
                .find(|&(_, v)| keeps_connectivity(&adjacency, &part, v));
            let Some((delta, v)) = chosen else { break };
            let from = part.subnet_of(v);
            let to = 1 - from;
            let mut assignment = part.assignment().to_vec();
            assignment[v] = to;
            part = Partition::with_copies(assignment, part.copies().clone())?;
            current += delta;
            locked[v] = true;
            moved = true;
            log::debug!("ψ-FM moved node {} to subnet {to}, ψ = {current:.6}", network.label(v));
            outcome.moves.push(FmMove {
                node: v,
                from,
                to,
                delta_psi: delta,
                psi_after: current,
            });
        }
        if !moved {
            break;
        }
    }
    outcome.final_psi = current;
    outcome.partition = part;
    Ok(outcome)
}

/// Change in ψ if `v` switches subnets.
fn move_delta(
    network: &Network,
    zone_demand: &[Vec<(NodeId, f64)>],
    flows: &[f64],
    part: &Partition,
    v: NodeId,
) -> f64 {
    let from = part.subnet_of(v);
    let to = 1 - from;
    let cut_change = |u: NodeId| -> f64 {
        let before = !part.is_member(u, from);
        let after = !part.is_member(u, to);
        f64::from(u8::from(after)) - f64::from(u8::from(before))
    };
    let mut interflow = 0.0;
    for &l in network.outgoing(v).iter().chain(network.incoming(v)) {
        let link = network.link(l);
        let u = if link.tail == v { link.head } else { link.tail };
        interflow += flows[l] * cut_change(u);
    }
    let mut interdemand = 0.0;
    for &(u, d) in &zone_demand[v] {
        interdemand += d * cut_change(u);
    }
    interflow - interdemand
}

fn keeps_connectivity(adjacency: &[Vec<NodeId>], part: &Partition, v: NodeId) -> bool {
    let from = part.subnet_of(v);
    let pieces = |skip: Option<NodeId>| {
        components(adjacency, |u| Some(u) != skip && part.is_member(u, from))
            .into_iter()
            .flatten()
            .max()
            .map_or(0, |m| m + 1)
    };
    pieces(Some(v)) <= pieces(None).max(1)
}
