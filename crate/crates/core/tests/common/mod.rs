//! Reference solvers and fixtures shared by the integration tests.
//!
//! Everything here is written against the public data model only: the
//! oracles carry their own cost evaluation, shortest-path search and
//! path bookkeeping so that they do not share code with the solvers they
//! check.

#![allow(dead_code)]

pub mod master;

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::path::PathBuf;

use dstap_core::network::{CostFunction, LinkId, Network, NodeId};
use dstap_core::shortest_path::ZoneRole;
use dstap_core::tntp;
use dstap_core::OdMatrix;

pub fn sioux_falls() -> (Network, OdMatrix) {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/sioux_falls");
    let network = tntp::parse_network(dir.join("SiouxFalls_net.tntp")).expect("network parses");
    let od = tntp::parse_trips(dir.join("SiouxFalls_trips.tntp"), &network).expect("trips parse");
    (network, od)
}

pub fn time(cost: &CostFunction, x: f64) -> f64 {
    match *cost {
        CostFunction::Bpr {
            free_flow_time,
            capacity,
            alpha,
            beta,
        } => free_flow_time * (1.0 + alpha * (x / capacity).powf(beta)),
        CostFunction::Affine { intercept, slope } => (intercept + slope * x).max(0.0),
    }
}

pub fn slope(cost: &CostFunction, x: f64) -> f64 {
    match *cost {
        CostFunction::Bpr {
            free_flow_time,
            capacity,
            alpha,
            beta,
        } => {
            if x <= 0.0 {
                0.0
            } else {
                free_flow_time * alpha * beta * x.powf(beta - 1.0) / capacity.powf(beta)
            }
        }
        CostFunction::Affine { intercept, slope } => {
            if intercept + slope * x > 0.0 {
                slope
            } else {
                0.0
            }
        }
    }
}

pub fn link_times(network: &Network, x: &[f64]) -> Vec<f64> {
    network.links().iter().zip(x).map(|(l, &f)| time(&l.cost, f)).collect()
}

#[derive(Clone, Copy, PartialEq)]
struct Item(f64, NodeId);

impl Eq for Item {}

impl Ord for Item {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Label-setting tree from `origin`; nodes below the first through node
/// are reached but never expanded.
pub fn tree(network: &Network, origin: NodeId, costs: &[f64]) -> (Vec<f64>, Vec<Option<LinkId>>) {
    let n = network.node_count();
    let mut dist = vec![f64::INFINITY; n];
    let mut back = vec![None; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[origin] = 0.0;
    heap.push(Item(0.0, origin));
    while let Some(Item(d, v)) = heap.pop() {
        if done[v] {
            continue;
        }
        done[v] = true;
        if v != origin && v < network.first_thru_node() {
            continue;
        }
        for &l in network.outgoing(v) {
            let w = network.link(l).head;
            let nd = d + costs[l];
            if nd < dist[w] {
                dist[w] = nd;
                back[w] = Some(l);
                heap.push(Item(nd, w));
            }
        }
    }
    (dist, back)
}

/// All-or-nothing loading at fixed link costs; returns the loaded flows and
/// the shortest-path total travel time.
pub fn all_or_nothing(network: &Network, od: &OdMatrix, costs: &[f64]) -> (Vec<f64>, f64) {
    let mut y = vec![0.0; network.link_count()];
    let mut sptt = 0.0;
    for (origin, range) in od.origin_groups() {
        let (dist, back) = tree(network, origin, costs);
        for p in &od.pairs()[range] {
            assert!(dist[p.destination].is_finite(), "unreachable OD pair");
            sptt += p.demand * dist[p.destination];
            let mut v = p.destination;
            while let Some(l) = back[v] {
                y[l] += p.demand;
                v = network.link(l).tail;
            }
        }
    }
    (y, sptt)
}

pub fn gap(network: &Network, od: &OdMatrix, x: &[f64]) -> f64 {
    let t = link_times(network, x);
    let tstt: f64 = t.iter().zip(x).map(|(a, b)| a * b).sum();
    let (_, sptt) = all_or_nothing(network, od, &t);
    tstt / sptt - 1.0
}

pub fn tstt(network: &Network, x: &[f64]) -> f64 {
    link_times(network, x).iter().zip(x).map(|(a, b)| a * b).sum()
}

/// Step in [0, 1] minimising the Beckmann function along `x + s d`.
fn line_search(network: &Network, x: &[f64], d: &[f64]) -> f64 {
    let g = |s: f64| -> f64 {
        network
            .links()
            .iter()
            .enumerate()
            .map(|(i, l)| time(&l.cost, x[i] + s * d[i]) * d[i])
            .sum()
    };
    if g(1.0) <= 0.0 {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

pub struct LinkSolution {
    pub flows: Vec<f64>,
    pub gap: f64,
    pub iterations: usize,
}

/// Method of successive averages with predetermined steps `1 / (k + 1)`.
pub fn msa(network: &Network, od: &OdMatrix, iterations: usize) -> LinkSolution {
    let free: Vec<f64> = link_times(network, &vec![0.0; network.link_count()]);
    let (mut x, _) = all_or_nothing(network, od, &free);
    for k in 1..=iterations {
        let (y, _) = all_or_nothing(network, od, &link_times(network, &x));
        let step = 1.0 / (k as f64 + 1.0);
        for (a, b) in x.iter_mut().zip(&y) {
            *a += step * (b - *a);
        }
    }
    let gap = gap(network, od, &x);
    LinkSolution {
        flows: x,
        gap,
        iterations,
    }
}

/// Averaging scheme of MSA with the step chosen by exact line search and
/// the target point made conjugate to the two previous search directions
/// (bi-conjugate Frank-Wolfe, falling back to the conjugate and plain
/// variants when the combination is degenerate or not a descent
/// direction). Stops at `target_gap` or `max_iterations`.
pub fn frank_wolfe(network: &Network, od: &OdMatrix, target_gap: f64, max_iterations: usize) -> LinkSolution {
    let m = network.link_count();
    let free = link_times(network, &vec![0.0; m]);
    let (mut x, _) = all_or_nothing(network, od, &free);
    // previous two target points and the last step length
    let mut s1: Option<Vec<f64>> = None;
    let mut s2: Option<Vec<f64>> = None;
    let mut last_step = 0.0;
    let mut iterations = 0;
    let mut current_gap = f64::INFINITY;
    while iterations < max_iterations {
        let t = link_times(network, &x);
        let (y, sptt) = all_or_nothing(network, od, &t);
        let tstt: f64 = t.iter().zip(&x).map(|(a, b)| a * b).sum();
        current_gap = tstt / sptt - 1.0;
        if current_gap <= target_gap {
            break;
        }
        iterations += 1;
        let h: Vec<f64> = network.links().iter().zip(&x).map(|(l, &f)| slope(&l.cost, f)).collect();
        let dot = |a: &dyn Fn(usize) -> f64, b: &dyn Fn(usize) -> f64| -> f64 { (0..m).map(|i| a(i) * h[i] * b(i)).sum() };
        let yx = |i: usize| y[i] - x[i];
        let mut s = y.clone();
        match (&s1, &s2) {
            (Some(p1), Some(p2)) if last_step > 0.0 && last_step < 1.0 => {
                let d1 = |i: usize| p1[i] - x[i];
                let d2 = |i: usize| last_step * p1[i] + (1.0 - last_step) * p2[i] - x[i];
                let den_mu = dot(&d2, &|i| p2[i] - p1[i]);
                let mut mu = if den_mu != 0.0 { -dot(&d2, &yx) / den_mu } else { 0.0 };
                mu = mu.max(0.0);
                let den_nu = dot(&d1, &d1);
                let mut nu = if den_nu != 0.0 { -dot(&d1, &yx) / den_nu } else { 0.0 };
                nu = (nu + mu * last_step / (1.0 - last_step)).max(0.0);
                let b0 = 1.0 / (1.0 + mu + nu);
                for i in 0..m {
                    s[i] = b0 * y[i] + nu * b0 * p1[i] + mu * b0 * p2[i];
                }
            }
            (Some(p1), _) => {
                let dbar = |i: usize| p1[i] - x[i];
                let den = dot(&dbar, &|i| y[i] - p1[i]);
                let alpha = if den != 0.0 { (dot(&dbar, &yx) / den).clamp(0.0, 0.99) } else { 0.0 };
                for i in 0..m {
                    s[i] = alpha * p1[i] + (1.0 - alpha) * y[i];
                }
            }
            _ => {}
        }
        let descent: f64 = (0..m).map(|i| t[i] * (s[i] - x[i])).sum();
        let restart = descent >= 0.0;
        if restart {
            s.clone_from(&y);
        }
        let d: Vec<f64> = s.iter().zip(&x).map(|(a, b)| a - b).collect();
        last_step = line_search(network, &x, &d);
        for i in 0..m {
            x[i] += last_step * d[i];
        }
        s2 = if restart { None } else { s1.take() };
        s1 = Some(s);
    }
    LinkSolution {
        flows: x,
        gap: current_gap,
        iterations,
    }
}

/// Every simple path from `o` to `d` whose interior nodes are through nodes.
pub fn simple_paths(network: &Network, o: NodeId, d: NodeId) -> Vec<Vec<LinkId>> {
    fn go(
        network: &Network,
        at: NodeId,
        d: NodeId,
        seen: &mut Vec<bool>,
        stack: &mut Vec<LinkId>,
        out: &mut Vec<Vec<LinkId>>,
    ) {
        if at == d {
            out.push(stack.clone());
            return;
        }
        if !stack.is_empty() && at < network.first_thru_node() {
            return;
        }
        for &l in network.outgoing(at) {
            let w = network.link(l).head;
            if !seen[w] {
                seen[w] = true;
                stack.push(l);
                go(network, w, d, seen, stack, out);
                stack.pop();
                seen[w] = false;
            }
        }
    }
    let mut seen = vec![false; network.node_count()];
    seen[o] = true;
    let mut out = Vec::new();
    go(network, o, d, &mut seen, &mut Vec::new(), &mut out);
    out
}

/// Equilibrium link flows by exhaustive path enumeration and pairwise
/// exchanges: every pair of paths of an OD pair is equalised by bisection
/// until no exchange moves more than `tolerance`.
pub fn path_exchange(network: &Network, od: &OdMatrix, tolerance: f64, max_sweeps: usize) -> Vec<f64> {
    let mut x = vec![0.0; network.link_count()];
    let mut sets: Vec<(Vec<Vec<LinkId>>, Vec<f64>)> = Vec::new();
    for p in od.pairs() {
        let paths = simple_paths(network, p.origin, p.destination);
        assert!(!paths.is_empty(), "OD pair without a path");
        let mut h = vec![0.0; paths.len()];
        h[0] = p.demand;
        for &l in &paths[0] {
            x[l] += p.demand;
        }
        sets.push((paths, h));
    }
    for _ in 0..max_sweeps {
        let mut largest: f64 = 0.0;
        for (paths, h) in &mut sets {
            for i in 0..paths.len() {
                for j in 0..paths.len() {
                    if i == j || h[j] <= 0.0 {
                        continue;
                    }
                    // links gaining and losing flow when moving from j to i
                    let plus: Vec<LinkId> = paths[i].iter().copied().filter(|l| !paths[j].contains(l)).collect();
                    let minus: Vec<LinkId> = paths[j].iter().copied().filter(|l| !paths[i].contains(l)).collect();
                    let diff = |delta: f64| -> f64 {
                        let ci: f64 = plus.iter().map(|&l| time(&network.link(l).cost, x[l] + delta)).sum();
                        let cj: f64 = minus.iter().map(|&l| time(&network.link(l).cost, x[l] - delta)).sum();
                        ci - cj
                    };
                    if diff(0.0) >= 0.0 {
                        continue;
                    }
                    let delta = if diff(h[j]) <= 0.0 {
                        h[j]
                    } else {
                        let (mut lo, mut hi) = (0.0, h[j]);
                        for _ in 0..100 {
                            let mid = 0.5 * (lo + hi);
                            if diff(mid) > 0.0 {
                                hi = mid;
                            } else {
                                lo = mid;
                            }
                        }
                        lo
                    };
                    h[i] += delta;
                    h[j] -= delta;
                    for &l in &plus {
                        x[l] += delta;
                    }
                    for &l in &minus {
                        x[l] -= delta;
                    }
                    largest = largest.max(delta);
                }
            }
        }
        if largest < tolerance {
            break;
        }
    }
    x
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn relative_l2(a: &[f64], reference: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(reference).map(|(x, y)| (x - y) * (x - y)).sum();
    let den: f64 = reference.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

/// Why a master path breaks the routing rules, if it does.
pub fn master_path_violation(
    master: &Network,
    origin: NodeId,
    links: &[LinkId],
    costs: &[f64],
    expected_cost: f64,
) -> Option<String> {
    let mut at = origin;
    let mut last_artificial = false;
    let mut cost = 0.0;
    for (i, &l) in links.iter().enumerate() {
        let link = master.link(l);
        if link.tail != at {
            return Some(format!("link {l} does not continue from node {at}"));
        }
        if i > 0 && at < master.first_thru_node() {
            return Some(format!("passes through non-through node {at}"));
        }
        if link.is_artificial() && last_artificial {
            return Some(format!("consecutive artificial links ending with {l}"));
        }
        last_artificial = link.is_artificial();
        cost += costs[l];
        at = link.head;
    }
    (cost != expected_cost).then(|| format!("path cost {cost} differs from label {expected_cost}"))
}

/// Simple master paths from `origin` that never take two artificial links
/// in a row and only pass through through nodes, with their end nodes.
pub fn feasible_master_paths(master: &Network, origin: NodeId, max_links: usize) -> Vec<(NodeId, Vec<LinkId>)> {
    fn go(
        master: &Network,
        at: NodeId,
        last_artificial: bool,
        max_links: usize,
        seen: &mut Vec<bool>,
        stack: &mut Vec<LinkId>,
        out: &mut Vec<(NodeId, Vec<LinkId>)>,
    ) {
        if !stack.is_empty() {
            out.push((at, stack.clone()));
            if at < master.first_thru_node() {
                return;
            }
        }
        if stack.len() == max_links {
            return;
        }
        for &l in master.outgoing(at) {
            let link = master.link(l);
            if (link.is_artificial() && last_artificial) || seen[link.head] {
                continue;
            }
            seen[link.head] = true;
            stack.push(l);
            go(master, link.head, link.is_artificial(), max_links, seen, stack, out);
            stack.pop();
            seen[link.head] = false;
        }
    }
    let mut seen = vec![false; master.node_count()];
    seen[origin] = true;
    let mut out = Vec::new();
    go(master, origin, false, max_links, &mut seen, &mut Vec::new(), &mut out);
    out
}

pub fn is_origin(role: ZoneRole) -> bool {
    matches!(role, ZoneRole::Origin | ZoneRole::Both)
}

pub fn is_destination(role: ZoneRole) -> bool {
    matches!(role, ZoneRole::Destination | ZoneRole::Both)
}


/// Two-cluster instance at equilibrium with its ψ = 0 partition and the
/// partition obtained by moving the bridge end of the first cluster across.
pub struct OneMoveAway {
    pub instance: dstap_core::synth::Instance,
    pub flows: Vec<f64>,
    pub zero: dstap_core::Partition,
    pub moved: dstap_core::Partition,
    pub node: NodeId,
}

pub fn one_move_away() -> OneMoveAway {
    use dstap_core::equilibrium::{solve, SolverConfig};
    let (instance, zero) = dstap_core::synth::twin_clusters(5, 30.0, 10.0, 17);
    let flows = solve(&instance.network, &instance.od, None, &SolverConfig::with_target(1e-10, 5000))
        .expect("twin clusters solve")
        .solution
        .link_flows;
    let node = zero
        .cut_links(&instance.network)
        .into_iter()
        .map(|l| instance.network.link(l).tail)
        .find(|&v| zero.subnet_of(v) == 0)
        .expect("bridge");
    let mut assignment = zero.assignment().to_vec();
    assignment[node] = 1;
    let moved = dstap_core::Partition::new(assignment).expect("valid partition");
    OneMoveAway {
        instance,
        flows,
        zero,
        moved,
        node,
    }
}
