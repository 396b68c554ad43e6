use super::{dijkstra_with, LabelSet};
use crate::error::{Error, Result};
use crate::network::{CostFunction, Link, LinkId, LinkKind, Network, NodeId};

/// Role of a master-network zone in the master OD matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ZoneRole {
    #[default]
    None,
    Origin,
    Destination,
    Both,
}

impl ZoneRole {
    pub fn from_flags(origin: bool, destination: bool) -> Self {
        match (origin, destination) {
            (false, false) => ZoneRole::None,
            (true, false) => ZoneRole::Origin,
            (false, true) => ZoneRole::Destination,
            (true, true) => ZoneRole::Both,
        }
    }
}

/// Master network rewritten so that plain Dijkstra respects the
/// no-consecutive-artificial-links rule.
///
/// Every zone `z` gets a child `z_p` that receives the physical links into
/// `z` and a child `z_a` that receives the artificial ones; `z_a` keeps only
/// physical outgoing links. Zones acting as both origin and destination are
/// additionally split into `z_o` (the original index) and `z_d`. Non-zone
/// nodes that have both incoming and outgoing artificial links are split the
/// same way (without connectors), which covers networks where zones are
/// through nodes.
#[derive(Clone, Debug)]
pub struct TransformedMasterNetwork {
    pub network: Network,
    /// Master node each transformed node stands for.
    pub parent: Vec<NodeId>,
    /// Master link behind each transformed link; `None` for zero-cost connectors.
    pub source_link: Vec<Option<LinkId>>,
    /// Through-node status inherited from the parent.
    pub through: Vec<bool>,
    /// Node a search for master origin `z` starts from.
    pub origin_node: Vec<NodeId>,
    /// Node where flow to master destination `z` arrives.
    pub destination_node: Vec<NodeId>,
    master_nodes: usize,
    master_links: usize,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Child {
    Physical,
    Artificial,
    Destination,
}

pub fn transform_master(master: &Network, roles: &[ZoneRole]) -> Result<TransformedMasterNetwork> {
    if roles.len() != master.zone_count() {
        return Err(Error::Structural(format!(
            "{} zone roles for a master with {} zones",
            roles.len(),
            master.zone_count()
        )));
    }
    let n = master.node_count();
    let has_in_art = |v: NodeId| master.incoming(v).iter().any(|&l| master.link(l).is_artificial());
    let has_out_art = |v: NodeId| master.outgoing(v).iter().any(|&l| master.link(l).is_artificial());

    // transformed node ids: master nodes keep theirs, children are appended
    let mut parent: Vec<NodeId> = (0..n).collect();
    let mut kind: Vec<Option<Child>> = vec![None; n];
    let mut p_child = vec![None; n];
    let mut a_child = vec![None; n];
    let mut d_child = vec![None; n];
    let add_child = |parent_node: NodeId, c: Child, parent: &mut Vec<NodeId>, kind: &mut Vec<Option<Child>>| {
        parent.push(parent_node);
        kind.push(Some(c));
        parent.len() - 1
    };
    for v in 0..n {
        let split = master.is_zone(v) || (has_in_art(v) && has_out_art(v));
        if !split {
            continue;
        }
        p_child[v] = Some(add_child(v, Child::Physical, &mut parent, &mut kind));
        a_child[v] = Some(add_child(v, Child::Artificial, &mut parent, &mut kind));
        if master.is_zone(v) && roles[v] == ZoneRole::Both {
            d_child[v] = Some(add_child(v, Child::Destination, &mut parent, &mut kind));
        }
    }

    // (tail, head, source link)
    let mut arcs: Vec<(NodeId, NodeId, Option<LinkId>)> = Vec::new();
    for v in 0..n {
        if let (Some(p), Some(a)) = (p_child[v], a_child[v]) {
            let role = if master.is_zone(v) { roles[v] } else { ZoneRole::None };
            match role {
                ZoneRole::Origin => {
                    arcs.push((v, p, None));
                    arcs.push((v, a, None));
                }
                ZoneRole::Destination => {
                    arcs.push((p, v, None));
                    arcs.push((a, v, None));
                }
                ZoneRole::Both => {
                    let d = d_child[v].expect("destination child");
                    arcs.push((v, p, None));
                    arcs.push((v, a, None));
                    arcs.push((p, d, None));
                    arcs.push((a, d, None));
                }
                ZoneRole::None => {}
            }
        }
    }
    for (id, link) in master.links().iter().enumerate() {
        let heads: Vec<NodeId> = match (p_child[link.head], a_child[link.head]) {
            (Some(p), Some(a)) => vec![if link.is_artificial() { a } else { p }],
            _ => vec![link.head],
        };
        let tails: Vec<NodeId> = match (p_child[link.tail], a_child[link.tail]) {
            (Some(p), Some(a)) => {
                if link.is_artificial() {
                    vec![p]
                } else {
                    vec![p, a]
                }
            }
            _ => vec![link.tail],
        };
        for &t in &tails {
            for &h in &heads {
                arcs.push((t, h, Some(id)));
            }
        }
    }

    // drop children without any non-connector link, together with their connectors
    let total = parent.len();
    let mut keep = vec![true; total];
    let mut real_degree = vec![0usize; total];
    for &(t, h, src) in &arcs {
        if src.is_some() {
            real_degree[t] += 1;
            real_degree[h] += 1;
        }
    }
    for v in n..total {
        if kind[v] != Some(Child::Destination) && real_degree[v] == 0 {
            keep[v] = false;
        }
    }
    let mut new_index = vec![usize::MAX; total];
    let mut next = 0;
    for v in 0..total {
        if keep[v] {
            new_index[v] = next;
            next += 1;
        }
    }
    let parent: Vec<NodeId> = (0..total).filter(|&v| keep[v]).map(|v| parent[v]).collect();
    let mut links = Vec::new();
    let mut source_link = Vec::new();
    for &(t, h, src) in &arcs {
        if !keep[t] || !keep[h] {
            continue;
        }
        let link = match src {
            Some(id) => Link {
                tail: new_index[t],
                head: new_index[h],
                ..master.link(id).clone()
            },
            None => Link {
                tail: new_index[t],
                head: new_index[h],
                cost: CostFunction::Affine {
                    intercept: 0.0,
                    slope: 0.0,
                },
                kind: LinkKind::Physical,
                attributes: Default::default(),
            },
        };
        links.push(link);
        source_link.push(src);
    }
    let max_label = master.labels().iter().copied().max().unwrap_or(0);
    let labels: Vec<u64> = (0..parent.len())
        .map(|i| {
            if i < n {
                master.label(i)
            } else {
                max_label + (i - n + 1) as u64
            }
        })
        .collect();
    let through = parent.iter().map(|&p| master.is_through(p)).collect();
    let network = Network::with_labels(labels, 0, 0, links)?;
    let destination_node = (0..n)
        .map(|v| match d_child[v] {
            Some(d) => new_index[d],
            None => v,
        })
        .collect();
    Ok(TransformedMasterNetwork {
        network,
        parent,
        source_link,
        through,
        origin_node: (0..n).collect(),
        destination_node,
        master_nodes: n,
        master_links: master.link_count(),
    })
}

impl TransformedMasterNetwork {
    pub fn costs_from_master(&self, master_costs: &[f64]) -> Vec<f64> {
        self.source_link
            .iter()
            .map(|s| s.map_or(0.0, |l| master_costs[l]))
            .collect()
    }

    /// Maps a transformed link sequence onto the master network (child
    /// nodes collapse onto their parents, connectors vanish).
    pub fn map_path(&self, links: &[LinkId]) -> Vec<LinkId> {
        links.iter().filter_map(|&l| self.source_link[l]).collect()
    }

    /// Raw transformed-network Dijkstra from master origin `origin`.
    pub fn search(&self, origin: NodeId, master_costs: &[f64]) -> Result<LabelSet> {
        let costs = self.costs_from_master(master_costs);
        let start = self.origin_node[origin];
        dijkstra_with(&self.network, start, &costs, |v| {
            self.through[v] || self.parent[v] == origin
        })
    }

    /// Constrained labels in master coordinates: each master node takes the
    /// best label among its transformed copies.
    pub fn labels(&self, origin: NodeId, master_costs: &[f64]) -> Result<LabelSet> {
        if master_costs.len() != self.master_links {
            return Err(Error::Structural(format!(
                "cost vector has {} entries, master has {} links",
                master_costs.len(),
                self.master_links
            )));
        }
        let raw = self.search(origin, master_costs)?;
        let n = self.master_nodes;
        let mut best: Vec<Option<NodeId>> = vec![None; n];
        for (t, &p) in self.parent.iter().enumerate() {
            if !raw.cost[t].is_finite() {
                continue;
            }
            match best[p] {
                Some(b) if raw.cost[b] <= raw.cost[t] => {}
                _ => best[p] = Some(t),
            }
        }
        let mut cost = vec![f64::INFINITY; n];
        let mut paths = vec![None; n];
        for v in 0..n {
            if v == origin {
                cost[v] = 0.0;
                paths[v] = Some(Vec::new());
            } else if let Some(t) = best[v] {
                cost[v] = raw.cost[t];
                paths[v] = raw.path_to(&self.network, t).map(|p| self.map_path(&p));
            }
        }
        Ok(LabelSet {
            origin,
            cost,
            back_link: vec![None; n],
            explicit_paths: Some(paths),
        })
    }

    pub fn connector_count(&self) -> usize {
        self.source_link.iter().filter(|s| s.is_none()).count()
    }

    pub fn children_of(&self, master_node: NodeId) -> Vec<NodeId> {
        (self.master_nodes..self.parent.len())
            .filter(|&t| self.parent[t] == master_node)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn master(zones: usize, n: usize, arcs: &[(usize, usize, bool, f64)]) -> (Network, Vec<f64>) {
        let links = arcs
            .iter()
            .map(|&(a, b, art, _)| {
                if art {
                    Link::artificial(a, b, 1.0, 0.0)
                } else {
                    Link::physical(a, b, CostFunction::bpr(1.0, 1.0))
                }
            })
            .collect();
        let costs = arcs.iter().map(|a| a.3).collect();
        (Network::new(n, zones, zones, links).unwrap(), costs)
    }

    #[test]
    fn origin_only_zone_gets_two_children_and_two_connectors() {
        // zone 0 origin; artificial 0 -> 1, physical 0 -> 2 and 1 -> 2
        let (m, _) = master(
            1,
            3,
            &[(0, 1, true, 1.0), (0, 2, false, 1.0), (1, 2, false, 1.0)],
        );
        let t = transform_master(&m, &[ZoneRole::Origin]).unwrap();
        assert_eq!(t.children_of(0).len(), 2);
        assert_eq!(t.connector_count(), 2);
        // both connectors leave the zone itself
        for (l, s) in t.source_link.iter().enumerate() {
            if s.is_none() {
                assert_eq!(t.network.link(l).tail, 0);
            }
        }
    }

    #[test]
    fn dual_role_zone_gets_four_connectors() {
        // zone 0 both origin and destination, with links in and out
        let (m, _) = master(
            1,
            3,
            &[
                (0, 1, true, 1.0),
                (0, 2, false, 1.0),
                (1, 2, false, 1.0),
                (2, 0, false, 1.0),
            ],
        );
        let t = transform_master(&m, &[ZoneRole::Both]).unwrap();
        assert_eq!(t.connector_count(), 4);
        let d = t.destination_node[0];
        assert_ne!(d, 0);
        assert_eq!(t.parent[d], 0);
    }

    #[test]
    fn child_without_real_links_is_removed() {
        // zone 0 has only an outgoing artificial link: z_a keeps nothing
        let (m, _) = master(1, 2, &[(0, 1, true, 1.0)]);
        let t = transform_master(&m, &[ZoneRole::Origin]).unwrap();
        assert_eq!(t.children_of(0).len(), 1);
        assert_eq!(t.connector_count(), 1);
    }

    #[test]
    fn artificial_then_artificial_is_blocked() {
        // boundary destination 2 in the same subnet: 1 -a-> 2 -a-> 3 forbidden,
        // the only legal route to 3 is the direct artificial link 1 -> 3
        let (m, costs) = master(
            4,
            4,
            &[
                (0, 1, false, 1.0),
                (1, 2, true, 1.0),
                (2, 3, true, 1.0),
                (1, 3, true, 10.0),
            ],
        );
        let roles = [
            ZoneRole::Origin,
            ZoneRole::None,
            ZoneRole::Both,
            ZoneRole::Destination,
        ];
        // zones 1 and up are through nodes here
        let m2 = Network::new(4, 4, 1, m.links().to_vec()).unwrap();
        let t = transform_master(&m2, &roles).unwrap();
        let labels = t.labels(0, &costs).unwrap();
        assert_eq!(labels.cost[2], 2.0);
        assert_eq!(labels.cost[3], 11.0);
        assert_eq!(labels.path_to(&m2, 3).unwrap(), vec![0, 3]);
    }

    #[test]
    fn role_count_mismatch_is_structural() {
        let (m, _) = master(2, 3, &[(0, 2, true, 1.0)]);
        assert!(matches!(
            transform_master(&m, &[ZoneRole::Origin]),
            Err(Error::Structural(_))
        ));
    }
}
