use std::collections::BinaryHeap;

use super::{check_costs, HeapEntry, LabelSet, MasterTopology};
use crate::error::{Error, Result};
use crate::network::{LinkId, Network, NodeId};

const PHYSICAL: u8 = 0;
const ARTIFICIAL: u8 = 1;

/// Output of the 3-stage search, with the intermediate stage labels kept
/// for inspection.
#[derive(Clone, Debug)]
pub struct ThreeStageLabels {
    /// Final constrained labels with explicit paths for every reachable node.
    pub labels: LabelSet,
    /// Labels after stage 1 (origin and heads of its artificial links).
    pub stage1: Vec<f64>,
    /// Labels after stage 2: best of the stage-1 label and the best
    /// arrival over a physical link.
    pub stage2: Vec<f64>,
}

/// Constrained one-to-all shortest paths on a two-subnetwork master network.
///
/// Stage 1 scans the origin's artificial links. Stage 2 is label setting
/// over boundary nodes; every label carries whether it was reached over an
/// artificial link, and artificial links are only taken from labels reached
/// physically. Stage 3a closes interior destinations through their incoming
/// artificial links, and stage 3b settles boundary destinations in
/// increasing label order.
pub fn three_stage_spp(
    master: &Network,
    topology: &MasterTopology,
    origin: NodeId,
    costs: &[f64],
) -> Result<ThreeStageLabels> {
    if topology.subnet_count != 2 {
        return Err(Error::Unsupported(format!(
            "3-stage search needs exactly two subnetworks, got {}; use transform_master",
            topology.subnet_count
        )));
    }
    topology.check(master)?;
    check_costs(costs, master.link_count())?;
    if origin >= master.node_count() {
        return Err(Error::Structural(format!("origin {origin} outside the master network")));
    }
    let boundary = MasterTopology::boundary_flags(master);
    Ok(search(master, &boundary, origin, costs))
}

type Back = Option<(LinkId, u8)>;

pub(crate) fn search(
    master: &Network,
    boundary: &[bool],
    origin: NodeId,
    costs: &[f64],
) -> ThreeStageLabels {
    let n = master.node_count();
    let expandable = |v: NodeId| v == origin || master.is_through(v);
    let mut label = [vec![f64::INFINITY; n], vec![f64::INFINITY; n]];
    let mut back: [Vec<Back>; 2] = [vec![None; n], vec![None; n]];
    label[PHYSICAL as usize][origin] = 0.0;

    // stage 1
    for &l in master.outgoing(origin) {
        let link = master.link(l);
        if link.is_artificial() && costs[l] < label[ARTIFICIAL as usize][link.head] {
            label[ARTIFICIAL as usize][link.head] = costs[l];
            back[ARTIFICIAL as usize][link.head] = Some((l, PHYSICAL));
        }
    }
    let stage1: Vec<f64> = (0..n)
        .map(|v| label[0][v].min(label[1][v]))
        .collect();

    // stage 2
    let mut heap = BinaryHeap::new();
    heap.push(HeapEntry {
        cost: 0.0,
        node: origin,
        state: PHYSICAL,
    });
    for v in 0..n {
        let c = label[ARTIFICIAL as usize][v];
        if c.is_finite() && boundary[v] {
            heap.push(HeapEntry {
                cost: c,
                node: v,
                state: ARTIFICIAL,
            });
        }
    }
    let mut settled = [vec![false; n], vec![false; n]];
    while let Some(HeapEntry { cost: c, node: v, state: s }) = heap.pop() {
        let si = s as usize;
        if settled[si][v] || c > label[si][v] {
            continue;
        }
        settled[si][v] = true;
        if !expandable(v) {
            continue;
        }
        for &l in master.outgoing(v) {
            let link = master.link(l);
            let w = link.head;
            let next = if link.is_artificial() {
                // the origin's artificial links were handled in stage 1;
                // interior heads are closed in stage 3a
                if s == ARTIFICIAL || v == origin || !boundary[w] {
                    continue;
                }
                ARTIFICIAL
            } else {
                PHYSICAL
            };
            let candidate = c + costs[l];
            let ni = next as usize;
            if candidate < label[ni][w] {
                label[ni][w] = candidate;
                back[ni][w] = Some((l, s));
                heap.push(HeapEntry {
                    cost: candidate,
                    node: w,
                    state: next,
                });
            }
        }
    }
    let stage2: Vec<f64> = (0..n)
        .map(|v| stage1[v].min(label[PHYSICAL as usize][v]))
        .collect();

    let trace = |mut v: NodeId, mut s: u8| -> Vec<LinkId> {
        let mut links = Vec::new();
        while let Some((l, prev)) = back[s as usize][v] {
            links.push(l);
            v = master.link(l).tail;
            s = prev;
        }
        links.reverse();
        links
    };

    let mut cost = vec![f64::INFINITY; n];
    let mut paths: Vec<Option<Vec<LinkId>>> = vec![None; n];
    cost[origin] = 0.0;
    paths[origin] = Some(Vec::new());

    // stage 3a: interior nodes through their incoming artificial links
    for d in 0..n {
        if boundary[d] || d == origin {
            continue;
        }
        let mut best: Option<(f64, LinkId)> = None;
        for &l in master.incoming(d) {
            let link = master.link(l);
            if !link.is_artificial() || !expandable(link.tail) {
                continue;
            }
            let c = label[PHYSICAL as usize][link.tail] + costs[l];
            if c.is_finite() && best.map_or(true, |(b, _)| c < b) {
                best = Some((c, l));
            }
        }
        if let Some((c, l)) = best {
            cost[d] = c;
            let mut p = trace(master.link(l).tail, PHYSICAL);
            p.push(l);
            paths[d] = Some(p);
        }
    }

    // stage 3b: boundary nodes in increasing order of their current labels
    let mut order: Vec<NodeId> = (0..n).filter(|&v| boundary[v] && v != origin).collect();
    order.sort_by(|&a, &b| stage2[a].total_cmp(&stage2[b]).then(a.cmp(&b)));
    for d in order {
        let (p, a) = (label[PHYSICAL as usize][d], label[ARTIFICIAL as usize][d]);
        if !p.is_finite() && !a.is_finite() {
            continue;
        }
        let state = if a < p { ARTIFICIAL } else { PHYSICAL };
        cost[d] = p.min(a);
        paths[d] = Some(trace(d, state));
    }

    ThreeStageLabels {
        labels: LabelSet {
            origin,
            cost,
            back_link: vec![None; n],
            explicit_paths: Some(paths),
        },
        stage1,
        stage2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{CostFunction, Link};

    /// Master in the shape of the two-subnetwork example: origin 1 and
    /// boundary nodes 5, 6 on the left; boundary nodes 7, 8 and interior
    /// destination 11 on the right, with 8 also a destination.
    fn example_master() -> (Network, MasterTopology, Vec<f64>) {
        // master nodes: 0 -> "1", 1 -> "8", 2 -> "11", 3 -> "5", 4 -> "6", 5 -> "7"
        let labels = vec![1, 8, 11, 5, 6, 7];
        let phys = |a, b| Link::physical(a, b, CostFunction::bpr(1.0, 1.0));
        let art = |a, b| Link::artificial(a, b, 0.0, 0.0);
        let links = vec![
            art(0, 3),  // 1 -> 5
            art(0, 4),  // 1 -> 6
            phys(3, 5), // 5 -> 7
            phys(5, 4), // 7 -> 6
            phys(4, 1), // 6 -> 8
            art(5, 1),  // 7 -> 8
            art(5, 2),  // 7 -> 11
            art(1, 2),  // 8 -> 11
        ];
        let costs = vec![1.0, 4.0, 1.0, 1.0, 5.0, 2.0, 10.0, 5.0];
        let net = Network::with_labels(labels, 3, 0, links).unwrap();
        let topo = MasterTopology {
            subnet: vec![0, 1, 1, 0, 0, 1],
            subnet_count: 2,
        };
        (net, topo, costs)
    }

    #[test]
    fn example_stage_labels_and_paths() {
        let (m, topo, costs) = example_master();
        let r = three_stage_spp(&m, &topo, 0, &costs).unwrap();
        let by_label = |lab: u64| m.node_by_label(lab).unwrap();
        assert_eq!(r.stage1[by_label(1)], 0.0);
        assert_eq!(r.stage1[by_label(5)], 1.0);
        assert_eq!(r.stage1[by_label(6)], 4.0);
        for (lab, want) in [(5, 1.0), (6, 3.0), (7, 2.0), (8, 8.0)] {
            assert_eq!(r.stage2[by_label(lab)], want, "stage 2 label of {lab}");
        }
        let nodes = |d: u64| {
            let p = r.labels.path_to(&m, by_label(d)).unwrap();
            crate::solution::path_nodes(&m, 0, &p)
                .into_iter()
                .map(|v| m.label(v))
                .collect::<Vec<_>>()
        };
        assert_eq!(r.labels.cost[by_label(11)], 12.0);
        assert_eq!(nodes(11), vec![1, 5, 7, 11]);
        assert_eq!(r.labels.cost[by_label(8)], 4.0);
        assert_eq!(nodes(8), vec![1, 5, 7, 8]);
    }

    #[test]
    fn single_boundary_route() {
        // o -a-> b -p-> b' -a-> d
        let links = vec![
            Link::artificial(0, 2, 0.0, 0.0),
            Link::physical(2, 3, CostFunction::bpr(1.0, 1.0)),
            Link::artificial(3, 1, 0.0, 0.0),
        ];
        let m = Network::new(4, 2, 2, links).unwrap();
        let topo = MasterTopology {
            subnet: vec![0, 1, 0, 1],
            subnet_count: 2,
        };
        let r = three_stage_spp(&m, &topo, 0, &[2.0, 3.5, 4.0]).unwrap();
        assert_eq!(r.labels.cost[1], 9.5);
        assert_eq!(r.labels.path_to(&m, 1).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn more_than_two_subnets_is_unsupported() {
        let m = Network::new(2, 2, 2, vec![Link::artificial(0, 1, 0.0, 0.0)]).unwrap();
        let topo = MasterTopology {
            subnet: vec![0, 0],
            subnet_count: 3,
        };
        assert!(matches!(
            three_stage_spp(&m, &topo, 0, &[1.0]),
            Err(Error::Unsupported(_))
        ));
    }
}
