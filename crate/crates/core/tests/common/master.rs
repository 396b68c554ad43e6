//! Cross-checks between the two constrained master searches, exhaustive
//! enumeration and the network transformation's path mapping.

use dstap_core::network::{LinkId, Network, NodeId};
use dstap_core::shortest_path::{
    enumerate_all_constrained_paths, three_stage_spp, transform_master, TransformedMasterNetwork,
};
use dstap_core::synth::{random_master, RandomMaster};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn origins(m: &RandomMaster) -> Vec<NodeId> {
    (0..m.master.zone_count()).filter(|&z| super::is_origin(m.roles[z])).collect()
}

pub fn destinations(m: &RandomMaster) -> Vec<NodeId> {
    (0..m.master.zone_count()).filter(|&z| super::is_destination(m.roles[z])).collect()
}

/// Compares 3-stage labels, transformed-network labels and exhaustive
/// enumeration for every origin and destination zone of `m`; returns the
/// number of reachable pairs whose paths were verified.
pub fn triple_check(m: &RandomMaster) -> Result<usize, String> {
    let master = &m.master;
    let transformed = transform_master(master, &m.roles).map_err(|e| e.to_string())?;
    let max_links = master.link_count();
    let mut verified = 0;
    for o in origins(m) {
        let three = three_stage_spp(master, &m.topology, o, &m.costs).map_err(|e| e.to_string())?;
        let trans = transformed.labels(o, &m.costs).map_err(|e| e.to_string())?;
        let mut best = vec![f64::INFINITY; master.node_count()];
        for p in enumerate_all_constrained_paths(master, o, max_links, &m.costs) {
            best[p.destination] = best[p.destination].min(p.cost);
        }
        for d in destinations(m) {
            if d == o {
                continue;
            }
            let (a, b, c) = (three.labels.cost[d], trans.cost[d], best[d]);
            if a != c || b != c {
                return Err(format!("origin {o} destination {d}: 3-stage {a}, transformed {b}, enumeration {c}"));
            }
            if !c.is_finite() {
                continue;
            }
            verified += 1;
            for (name, labels) in [("3-stage", &three.labels), ("transformed", &trans)] {
                let path = labels
                    .path_to(master, d)
                    .ok_or_else(|| format!("{name}: no path to reachable destination {d}"))?;
                if let Some(why) = super::master_path_violation(master, o, &path, &m.costs, c) {
                    return Err(format!("{name} path {o}->{d}: {why}"));
                }
                if path.last().map(|&l| master.link(l).head) != Some(d) {
                    return Err(format!("{name} path {o}->{d} ends elsewhere"));
                }
            }
        }
    }
    Ok(verified)
}

/// Transformed-network paths from the origin node of `o`, expanding only
/// nodes the search may expand and never returning to a copy of `o` once a
/// real link has been taken.
pub fn transformed_paths(t: &TransformedMasterNetwork, o: NodeId, max_links: usize, cap: usize) -> Vec<(NodeId, Vec<LinkId>)> {
    struct Walk<'a> {
        t: &'a TransformedMasterNetwork,
        o: NodeId,
        max_links: usize,
        cap: usize,
        seen: Vec<bool>,
        stack: Vec<LinkId>,
        out: Vec<(NodeId, Vec<LinkId>)>,
    }
    impl Walk<'_> {
        fn go(&mut self, at: NodeId) {
            if self.out.len() >= self.cap {
                return;
            }
            let left = self.stack.iter().any(|&l| self.t.source_link[l].is_some());
            if !self.stack.is_empty() {
                self.out.push((at, self.stack.clone()));
                if !self.t.through[at] && self.t.parent[at] != self.o {
                    return;
                }
            }
            if self.stack.len() == self.max_links {
                return;
            }
            let net: &Network = &self.t.network;
            for &l in net.outgoing(at) {
                let w = net.link(l).head;
                if self.seen[w] || (left && self.t.parent[w] == self.o) {
                    continue;
                }
                self.seen[w] = true;
                self.stack.push(l);
                self.go(w);
                self.stack.pop();
                self.seen[w] = false;
            }
        }
    }
    let start = t.origin_node[o];
    let mut walk = Walk {
        t,
        o,
        max_links,
        cap,
        seen: vec![false; t.network.node_count()],
        stack: Vec::new(),
        out: Vec::new(),
    };
    walk.seen[start] = true;
    walk.go(start);
    walk.out
}

/// Whether some transformed path from the origin node of `o` to the arrival
/// node of `d` maps onto exactly `path`.
pub fn has_preimage(t: &TransformedMasterNetwork, o: NodeId, d: NodeId, path: &[LinkId]) -> bool {
    fn go(t: &TransformedMasterNetwork, at: NodeId, i: usize, target: NodeId, path: &[LinkId], depth: usize) -> bool {
        if i == path.len() && at == target {
            return true;
        }
        if depth > path.len() + 4 {
            return false;
        }
        for &l in t.network.outgoing(at) {
            let w = t.network.link(l).head;
            let ok = match t.source_link[l] {
                None => go(t, w, i, target, path, depth + 1),
                Some(src) => i < path.len() && src == path[i] && go(t, w, i + 1, target, path, depth + 1),
            };
            if ok {
                return true;
            }
        }
        false
    }
    go(t, t.origin_node[o], 0, t.destination_node[d], path, 0)
}

/// Checks both directions of the path mapping on one random master and
/// returns how many transformed and master paths were examined.
pub fn lemma_trial(seed: u64) -> Result<(usize, usize), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = random_master(&mut rng, 12, 6);
    let master = &m.master;
    let t = transform_master(master, &m.roles).map_err(|e| e.to_string())?;
    let tcosts = t.costs_from_master(&m.costs);
    let (mut forward, mut backward) = (0, 0);
    for o in origins(&m) {
        // every transformed path is a feasible master path of the same cost
        for (end, links) in transformed_paths(&t, o, 10, 20_000) {
            let mapped = t.map_path(&links);
            let cost: f64 = links.iter().map(|&l| tcosts[l]).sum();
            if mapped.is_empty() {
                continue;
            }
            forward += 1;
            if let Some(why) = super::master_path_violation(master, o, &mapped, &m.costs, cost) {
                return Err(format!("transformed path from {o} to node {end}: {why}"));
            }
            if master.link(*mapped.last().unwrap()).head != t.parent[end] {
                return Err(format!("transformed path from {o} ends at a different master node"));
            }
        }
        // every feasible master path to a destination has a pre-image
        for (end, path) in super::feasible_master_paths(master, o, 8) {
            if end >= master.zone_count() || !super::is_destination(m.roles[end]) || end == o {
                continue;
            }
            backward += 1;
            if !has_preimage(&t, o, end, &path) {
                return Err(format!("feasible master path {path:?} from {o} to {end} has no pre-image"));
            }
        }
    }
    Ok((forward, backward))
}

