use crate::network::{LinkId, Network, NodeId};

#[derive(Clone, Debug, PartialEq)]
pub struct ConstrainedPath {
    pub destination: NodeId,
    pub links: Vec<LinkId>,
    pub cost: f64,
}

/// Every path from `origin` with at most `max_links` links that never takes
/// two artificial links in a row and never passes through a non-through node.
///
/// Paths are simple except for one case: a node first reached over an
/// artificial link may be reached again over a physical link when it has
/// outgoing artificial links, since only the second arrival may take them.
/// Intended as a test oracle on small masters.
pub fn enumerate_all_constrained_paths(
    master: &Network,
    origin: NodeId,
    max_links: usize,
    costs: &[f64],
) -> Vec<ConstrainedPath> {
    struct Walk<'a> {
        master: &'a Network,
        origin: NodeId,
        max_links: usize,
        costs: &'a [f64],
        seen: Vec<[bool; 2]>,
        has_artificial_out: Vec<bool>,
        links: Vec<LinkId>,
        out: Vec<ConstrainedPath>,
    }

    impl Walk<'_> {
        fn go(&mut self, at: NodeId, via_artificial: bool, cost: f64) {
            if at != self.origin {
                self.out.push(ConstrainedPath {
                    destination: at,
                    links: self.links.clone(),
                    cost,
                });
                if !self.master.is_through(at) {
                    return;
                }
            }
            if self.links.len() == self.max_links {
                return;
            }
            for &l in self.master.outgoing(at) {
                let link = self.master.link(l);
                let art = link.is_artificial();
                if art && via_artificial {
                    continue;
                }
                let w = link.head;
                if w == self.origin || self.seen[w][0] {
                    continue;
                }
                if self.seen[w][1] && (art || !self.has_artificial_out[w]) {
                    continue;
                }
                self.seen[w][art as usize] = true;
                self.links.push(l);
                self.go(w, art, cost + self.costs[l]);
                self.links.pop();
                self.seen[w][art as usize] = false;
            }
        }
    }

    let mut walk = Walk {
        master,
        origin,
        max_links,
        costs,
        seen: vec![[false; 2]; master.node_count()],
        has_artificial_out: (0..master.node_count())
            .map(|v| master.outgoing(v).iter().any(|&l| master.link(l).is_artificial()))
            .collect(),
        links: Vec::new(),
        out: Vec::new(),
    };
    walk.go(origin, false, 0.0);
    walk.out
}

/// Constrained paths from `origin` to `destination`, with their costs.
pub fn enumerate_constrained_paths(
    master: &Network,
    origin: NodeId,
    destination: NodeId,
    max_links: usize,
    costs: &[f64],
) -> Vec<(Vec<LinkId>, f64)> {
    enumerate_all_constrained_paths(master, origin, max_links, costs)
        .into_iter()
        .filter(|p| p.destination == destination)
        .map(|p| (p.links, p.cost))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{CostFunction, Link};

    fn phys(a: usize, b: usize) -> Link {
        Link::physical(a, b, CostFunction::bpr(1.0, 1.0))
    }

    #[test]
    fn without_artificial_links_matches_plain_enumeration() {
        // 0 -> 1 -> 3, 0 -> 2 -> 3, 1 -> 2 : simple paths 0->3 are 013, 023, 0123
        let m = Network::new(4, 1, 0, vec![phys(0, 1), phys(1, 3), phys(0, 2), phys(2, 3), phys(1, 2)])
            .unwrap();
        let paths = enumerate_constrained_paths(&m, 0, 3, 10, &[1.0; 5]);
        assert_eq!(paths.len(), 3);
    }

    #[test]
    fn consecutive_artificial_links_are_excluded() {
        let m = Network::new(
            3,
            3,
            0,
            vec![Link::artificial(0, 1, 0.0, 0.0), Link::artificial(1, 2, 0.0, 0.0)],
        )
        .unwrap();
        assert!(enumerate_constrained_paths(&m, 0, 2, 10, &[1.0, 1.0]).is_empty());
        assert_eq!(enumerate_constrained_paths(&m, 0, 1, 10, &[1.0, 1.0]).len(), 1);
    }

    #[test]
    fn hand_counted_six_node_master() {
        // origin 0 (left), boundary 1, 2 (left), 3, 4 (right), destination 5 (right)
        // artificial: 0->1, 0->2, 3->5, 4->5 ; physical: 1->3, 2->4, 2->3, 3->2
        let links = vec![
            Link::artificial(0, 1, 0.0, 0.0),
            Link::artificial(0, 2, 0.0, 0.0),
            Link::artificial(3, 5, 0.0, 0.0),
            Link::artificial(4, 5, 0.0, 0.0),
            phys(1, 3),
            phys(2, 4),
            phys(2, 3),
            phys(3, 2),
        ];
        let m = Network::with_labels(vec![10, 11, 12, 13, 14, 15], 1, 0, links).unwrap();
        let paths = enumerate_constrained_paths(&m, 0, 5, 10, &[1.0; 8]);
        // 0-1-3-5, 0-1-3-2-4-5, 0-2-4-5, 0-2-3-5; revisiting 2 gains nothing
        assert_eq!(paths.len(), 4);
        let shortest = paths.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        assert_eq!(shortest, 3.0);
    }
}
