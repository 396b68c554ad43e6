//! Graph data model and link performance functions.

use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};

pub type NodeId = usize;
pub type LinkId = usize;

pub const DEFAULT_ALPHA: f64 = 0.15;
pub const DEFAULT_BETA: f64 = 4.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LinkKind {
    Physical,
    /// Master-network link standing in for all paths between its endpoints
    /// inside one subnetwork.
    Artificial,
}

/// Link performance function.
///
/// `Affine` evaluates `max(intercept + slope * x, 0)`, which keeps artificial
/// link costs non-negative and convex when the intercept comes out negative
/// after a first-order update.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CostFunction {
    Bpr {
        free_flow_time: f64,
        capacity: f64,
        alpha: f64,
        beta: f64,
    },
    Affine {
        intercept: f64,
        slope: f64,
    },
}

#[inline]
fn pow(base: f64, exponent: f64) -> f64 {
    if exponent == exponent.trunc() && (0.0..=32.0).contains(&exponent) {
        base.powi(exponent as i32)
    } else {
        base.powf(exponent)
    }
}

impl CostFunction {
    pub fn bpr(free_flow_time: f64, capacity: f64) -> Self {
        CostFunction::Bpr {
            free_flow_time,
            capacity,
            alpha: DEFAULT_ALPHA,
            beta: DEFAULT_BETA,
        }
    }

    /// Travel time at `flow`. Negative inputs are treated as zero; use
    /// [`Link::travel_time`] for the checked variant.
    #[inline]
    pub fn time(&self, flow: f64) -> f64 {
        let x = flow.max(0.0);
        match *self {
            CostFunction::Bpr {
                free_flow_time,
                capacity,
                alpha,
                beta,
            } => free_flow_time * (1.0 + alpha * pow(x / capacity, beta)),
            CostFunction::Affine { intercept, slope } => (intercept + slope * x).max(0.0),
        }
    }

    #[inline]
    pub fn derivative(&self, flow: f64) -> f64 {
        let x = flow.max(0.0);
        match *self {
            CostFunction::Bpr {
                free_flow_time,
                capacity,
                alpha,
                beta,
            } => {
                if alpha == 0.0 || beta == 0.0 {
                    return 0.0;
                }
                if x == 0.0 {
                    return if beta == 1.0 {
                        free_flow_time * alpha / capacity
                    } else {
                        0.0
                    };
                }
                free_flow_time * alpha * beta * pow(x, beta - 1.0) / pow(capacity, beta)
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

    /// Integral of the cost function from 0 to `flow` (one Beckmann term).
    pub fn integral(&self, flow: f64) -> f64 {
        let x = flow.max(0.0);
        match *self {
            CostFunction::Bpr {
                free_flow_time,
                capacity,
                alpha,
                beta,
            } => {
                free_flow_time * x
                    + free_flow_time * alpha * pow(x, beta + 1.0)
                        / ((beta + 1.0) * pow(capacity, beta))
            }
            CostFunction::Affine { intercept, slope } => {
                if slope > 0.0 {
                    // the clamp is active on [0, -intercept / slope) when intercept < 0
                    let start = (-intercept / slope).max(0.0);
                    if x <= start {
                        0.0
                    } else {
                        let at = |v: f64| intercept * v + 0.5 * slope * v * v;
                        at(x) - at(start)
                    }
                } else {
                    intercept.max(0.0) * x
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            CostFunction::Bpr {
                free_flow_time,
                capacity,
                alpha,
                beta,
            } => {
                if !(capacity > 0.0) || !capacity.is_finite() {
                    return Err(Error::Validation(format!(
                        "capacity must be positive, got {capacity}"
                    )));
                }
                if !(free_flow_time >= 0.0) || !free_flow_time.is_finite() {
                    return Err(Error::Validation(format!(
                        "free-flow time must be non-negative, got {free_flow_time}"
                    )));
                }
                if !(alpha >= 0.0) {
                    return Err(Error::Validation(format!(
                        "BPR alpha must be non-negative, got {alpha}"
                    )));
                }
                if alpha > 0.0 && !(beta >= 1.0) {
                    return Err(Error::Validation(format!(
                        "BPR beta must be at least 1, got {beta}"
                    )));
                }
                Ok(())
            }
            CostFunction::Affine { intercept, slope } => {
                if !intercept.is_finite() || !(slope >= 0.0) || !slope.is_finite() {
                    return Err(Error::Validation(format!(
                        "affine cost needs finite intercept and slope >= 0, got ({intercept}, {slope})"
                    )));
                }
                Ok(())
            }
        }
    }
}

/// Columns of the instance file that the solver carries but never reads.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LinkAttributes {
    pub length: f64,
    pub speed: f64,
    pub toll: f64,
    pub link_type: i64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Link {
    pub tail: NodeId,
    pub head: NodeId,
    pub cost: CostFunction,
    pub kind: LinkKind,
    pub attributes: LinkAttributes,
}

impl Link {
    pub fn physical(tail: NodeId, head: NodeId, cost: CostFunction) -> Self {
        Link {
            tail,
            head,
            cost,
            kind: LinkKind::Physical,
            attributes: LinkAttributes::default(),
        }
    }

    pub fn artificial(tail: NodeId, head: NodeId, intercept: f64, slope: f64) -> Self {
        Link {
            tail,
            head,
            cost: CostFunction::Affine { intercept, slope },
            kind: LinkKind::Artificial,
            attributes: LinkAttributes::default(),
        }
    }

    pub fn is_artificial(&self) -> bool {
        self.kind == LinkKind::Artificial
    }

    pub fn travel_time(&self, flow: f64) -> Result<f64> {
        check_flow(flow)?;
        Ok(self.cost.time(flow))
    }

    pub fn travel_time_derivative(&self, flow: f64) -> Result<f64> {
        check_flow(flow)?;
        Ok(self.cost.derivative(flow))
    }
}

fn check_flow(flow: f64) -> Result<()> {
    if flow < 0.0 || flow.is_nan() {
        return Err(Error::Domain(format!("link flow must be >= 0, got {flow}")));
    }
    Ok(())
}

/// `t0 * (1 + alpha * (x / u)^beta)` for a BPR link; affine links evaluate
/// their own cost through the same entry point.
pub fn bpr_time(link: &Link, flow: f64) -> Result<f64> {
    link.travel_time(flow)
}

pub fn bpr_derivative(link: &Link, flow: f64) -> Result<f64> {
    link.travel_time_derivative(flow)
}

/// Directed road network.
///
/// Nodes are dense 0-based indices. The first `zone_count` nodes are zones
/// (centroids); nodes below `first_thru_node` may start or end a path but are
/// never passed through.
#[derive(Clone, Debug)]
pub struct Network {
    zone_count: usize,
    first_thru_node: usize,
    labels: Vec<u64>,
    links: Vec<Link>,
    out_offsets: Vec<usize>,
    out_links: Vec<LinkId>,
    in_offsets: Vec<usize>,
    in_links: Vec<LinkId>,
}

impl PartialEq for Network {
    fn eq(&self, other: &Self) -> bool {
        self.zone_count == other.zone_count
            && self.first_thru_node == other.first_thru_node
            && self.labels == other.labels
            && self.links == other.links
    }
}

impl Network {
    /// Builds a network whose external node labels are `1..=node_count`.
    pub fn new(
        node_count: usize,
        zone_count: usize,
        first_thru_node: usize,
        links: Vec<Link>,
    ) -> Result<Self> {
        let labels = (1..=node_count as u64).collect();
        Self::with_labels(labels, zone_count, first_thru_node, links)
    }

    pub fn with_labels(
        labels: Vec<u64>,
        zone_count: usize,
        first_thru_node: usize,
        links: Vec<Link>,
    ) -> Result<Self> {
        let node_count = labels.len();
        if zone_count > node_count {
            return Err(Error::Structural(format!(
                "{zone_count} zones but only {node_count} nodes"
            )));
        }
        if first_thru_node > zone_count {
            return Err(Error::Structural(format!(
                "first through node index {first_thru_node} exceeds zone count {zone_count}"
            )));
        }
        let mut seen = HashMap::with_capacity(node_count);
        for (i, &l) in labels.iter().enumerate() {
            if seen.insert(l, i).is_some() {
                return Err(Error::Structural(format!("duplicate node label {l}")));
            }
        }
        for (id, link) in links.iter().enumerate() {
            if link.tail >= node_count || link.head >= node_count {
                return Err(Error::Structural(format!(
                    "link {id} references node outside 0..{node_count}"
                )));
            }
            if link.tail == link.head {
                return Err(Error::Structural(format!(
                    "link {id} is a self-loop at node {}",
                    labels[link.tail]
                )));
            }
            link.cost.validate().map_err(|e| match e {
                Error::Validation(m) => Error::Validation(format!(
                    "link ({}, {}): {m}",
                    labels[link.tail], labels[link.head]
                )),
                other => other,
            })?;
        }
        let (out_offsets, out_links) = csr(node_count, links.iter().map(|l| l.tail));
        let (in_offsets, in_links) = csr(node_count, links.iter().map(|l| l.head));
        Ok(Network {
            zone_count,
            first_thru_node,
            labels,
            links,
            out_offsets,
            out_links,
            in_offsets,
            in_links,
        })
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn zone_count(&self) -> usize {
        self.zone_count
    }

    pub fn zones(&self) -> std::ops::Range<NodeId> {
        0..self.zone_count
    }

    pub fn is_zone(&self, node: NodeId) -> bool {
        node < self.zone_count
    }

    pub fn first_thru_node(&self) -> usize {
        self.first_thru_node
    }

    #[inline]
    pub fn is_through(&self, node: NodeId) -> bool {
        node >= self.first_thru_node
    }

    pub fn labels(&self) -> &[u64] {
        &self.labels
    }

    pub fn label(&self, node: NodeId) -> u64 {
        self.labels[node]
    }

    pub fn node_by_label(&self, label: u64) -> Option<NodeId> {
        self.labels.iter().position(|&l| l == label)
    }

    pub fn label_index(&self) -> HashMap<u64, NodeId> {
        self.labels.iter().enumerate().map(|(i, &l)| (l, i)).collect()
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    #[inline]
    pub fn link(&self, id: LinkId) -> &Link {
        &self.links[id]
    }

    #[inline]
    pub fn outgoing(&self, node: NodeId) -> &[LinkId] {
        &self.out_links[self.out_offsets[node]..self.out_offsets[node + 1]]
    }

    #[inline]
    pub fn incoming(&self, node: NodeId) -> &[LinkId] {
        &self.in_links[self.in_offsets[node]..self.in_offsets[node + 1]]
    }

    pub fn find_link(&self, tail: NodeId, head: NodeId) -> Option<LinkId> {
        self.outgoing(tail)
            .iter()
            .copied()
            .find(|&l| self.links[l].head == head)
    }

    pub fn set_cost_function(&mut self, link: LinkId, cost: CostFunction) -> Result<()> {
        cost.validate()?;
        self.links[link].cost = cost;
        Ok(())
    }

    /// Current link costs at `flows`.
    pub fn link_costs(&self, flows: &[f64]) -> Vec<f64> {
        let mut costs = vec![0.0; self.links.len()];
        self.fill_link_costs(flows, &mut costs);
        costs
    }

    pub fn fill_link_costs(&self, flows: &[f64], costs: &mut [f64]) {
        for ((c, link), &x) in costs.iter_mut().zip(&self.links).zip(flows) {
            *c = link.cost.time(x);
        }
    }

    pub fn check_flow_vector(&self, flows: &[f64]) -> Result<()> {
        if flows.len() != self.links.len() {
            return Err(Error::Structural(format!(
                "flow vector has {} entries, network has {} links",
                flows.len(),
                self.links.len()
            )));
        }
        Ok(())
    }

    pub fn describe_link(&self, link: LinkId) -> String {
        let l = &self.links[link];
        format!("({}, {})", self.labels[l.tail], self.labels[l.head])
    }
}

impl fmt::Display for Network {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let artificial = self.links.iter().filter(|l| l.is_artificial()).count();
        write!(
            f,
            "({}, {}, {})",
            self.node_count(),
            self.links.len() - artificial,
            artificial
        )
    }
}

fn csr(node_count: usize, keys: impl Iterator<Item = NodeId> + Clone) -> (Vec<usize>, Vec<LinkId>) {
    let mut offsets = vec![0usize; node_count + 1];
    for k in keys.clone() {
        offsets[k + 1] += 1;
    }
    for i in 0..node_count {
        offsets[i + 1] += offsets[i];
    }
    let mut cursor = offsets.clone();
    let mut items = vec![0; offsets[node_count]];
    for (id, k) in keys.enumerate() {
        items[cursor[k]] = id;
        cursor[k] += 1;
    }
    (offsets, items)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn test_link() -> Link {
        Link::physical(0, 1, CostFunction::bpr(10.0, 100.0))
    }

    #[test]
    fn bpr_reference_values() {
        let l = test_link();
        assert_eq!(bpr_time(&l, 0.0).unwrap(), 10.0);
        assert!((bpr_time(&l, 100.0).unwrap() - 11.5).abs() < 1e-12);
        // 10 * (1 + 0.15 * 2^4)
        assert!((bpr_time(&l, 200.0).unwrap() - 34.0).abs() < 1e-12);
    }

    #[test]
    fn bpr_derivative_reference_values() {
        let l = test_link();
        assert_eq!(bpr_derivative(&l, 0.0).unwrap(), 0.0);
        // 10 * 0.15 * 4 / 100
        assert!((bpr_derivative(&l, 100.0).unwrap() - 0.06).abs() < 1e-14);
    }

    #[test]
    fn derivative_matches_central_difference_at_137() {
        let l = test_link();
        let h = 1e-3;
        let fd = (l.cost.time(137.0 + h) - l.cost.time(137.0 - h)) / (2.0 * h);
        let d = bpr_derivative(&l, 137.0).unwrap();
        assert!(((fd - d) / d).abs() < 1e-6);
    }

    #[test]
    fn negative_flow_is_a_domain_error() {
        let l = test_link();
        assert!(matches!(bpr_time(&l, -1.0), Err(Error::Domain(_))));
        assert!(matches!(bpr_derivative(&l, -0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn affine_cost_clamps_at_zero() {
        let c = CostFunction::Affine {
            intercept: -2.0,
            slope: 0.5,
        };
        assert_eq!(c.time(0.0), 0.0);
        assert_eq!(c.time(4.0), 0.0);
        assert_eq!(c.time(6.0), 1.0);
        assert_eq!(c.derivative(1.0), 0.0);
        assert_eq!(c.derivative(6.0), 0.5);
        // area of the triangle between x = 4 and x = 6
        assert!((c.integral(6.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_zero_capacity_and_self_loops() {
        let bad = Link::physical(0, 1, CostFunction::bpr(1.0, 0.0));
        assert!(matches!(
            Network::new(2, 0, 0, vec![bad]),
            Err(Error::Validation(_))
        ));
        let lp = Link::physical(1, 1, CostFunction::bpr(1.0, 1.0));
        assert!(matches!(
            Network::new(2, 0, 0, vec![lp]),
            Err(Error::Structural(_))
        ));
    }

    #[test]
    fn adjacency_is_consistent_with_endpoints() {
        let links = vec![
            Link::physical(0, 1, CostFunction::bpr(1.0, 1.0)),
            Link::physical(1, 2, CostFunction::bpr(1.0, 1.0)),
            Link::physical(0, 2, CostFunction::bpr(1.0, 1.0)),
            Link::physical(2, 0, CostFunction::bpr(1.0, 1.0)),
        ];
        let net = Network::new(3, 1, 1, links).unwrap();
        assert_eq!(net.outgoing(0), &[0, 2]);
        assert_eq!(net.incoming(2), &[1, 2]);
        assert_eq!(net.incoming(0), &[3]);
        for v in 0..3 {
            assert!(net.outgoing(v).iter().all(|&l| net.link(l).tail == v));
            assert!(net.incoming(v).iter().all(|&l| net.link(l).head == v));
        }
        assert!(!net.is_through(0));
        assert!(net.is_through(1));
    }

    fn arb_bpr() -> impl Strategy<Value = CostFunction> {
        (0.1f64..50.0, 10.0f64..5000.0, 0.0f64..1.0, 1.0f64..6.0).prop_map(|(t, u, a, b)| {
            CostFunction::Bpr {
                free_flow_time: t,
                capacity: u,
                alpha: a,
                beta: b,
            }
        })
    }

    proptest! {
        #[test]
        fn bpr_is_monotone_and_convex(c in arb_bpr(), x1 in 0.0f64..5000.0, d1 in 0.01f64..2000.0, d2 in 0.01f64..2000.0) {
            let (x2, x3) = (x1 + d1, x1 + d1 + d2);
            let (t1, t2, t3) = (c.time(x1), c.time(x2), c.time(x3));
            prop_assert!(t1 <= t2 && t2 <= t3);
            // chord above the curve at the middle point
            let chord = t1 + (t3 - t1) * (x2 - x1) / (x3 - x1);
            prop_assert!(t2 <= chord * (1.0 + 1e-12) + 1e-12);
        }

        #[test]
        fn derivative_matches_finite_differences(c in arb_bpr(), x in 1.0f64..5000.0) {
            let h = 1e-4 * x;
            let fd = (c.time(x + h) - c.time(x - h)) / (2.0 * h);
            let d = c.derivative(x);
            // rounding in the difference quotient is about eps * t / h
            let tol = 1e-5 * d + 1e-13 * c.time(x) / h;
            prop_assert!((fd - d).abs() <= tol, "fd {} vs {}", fd, d);
        }

        #[test]
        fn integral_derivative_is_the_cost(c in arb_bpr(), x in 1.0f64..3000.0) {
            let h = 1e-3;
            let fd = (c.integral(x + h) - c.integral(x - h)) / (2.0 * h);
            prop_assert!((fd - c.time(x)).abs() <= 1e-6 * c.time(x).max(1.0));
        }
    }
}
