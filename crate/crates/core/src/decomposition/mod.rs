//! Master network and subnetworks of the decomposition heuristic.
//!
//! Subnetworks carry no artificial links. The master keeps every cut link
//! plus artificial links from origins to boundary nodes and from boundary
//! nodes to destinations of the same subnetwork, each standing for all
//! paths between its endpoints inside that subnetwork.

mod mapping;
mod params;

pub use mapping::full_gap;
pub use params::ParamUpdate;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use crate::demand::OdMatrix;
use crate::error::{Error, Result};
use crate::metrics;
use crate::network::{CostFunction, Link, LinkId, Network, NodeId};
use crate::partition::Partition;
use crate::shortest_path::{dijkstra, LabelSet, MasterRouter, MasterTopology, ZoneRole};

/// Zero-flow updates in a row after which an artificial link stops being
/// re-estimated.
pub const FREEZE_AFTER: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct ArtificialLink {
    pub master_link: LinkId,
    pub subnet: usize,
    /// Endpoints in the owning subnetwork's local numbering.
    pub tail: NodeId,
    pub head: NodeId,
    /// Tail is a master origin.
    pub from_origin: bool,
    /// Head is a master destination.
    pub to_destination: bool,
    pub intercept: f64,
    pub slope: f64,
    pub flow: f64,
    zero_streak: usize,
}

impl ArtificialLink {
    pub fn cost(&self) -> CostFunction {
        CostFunction::Affine {
            intercept: self.intercept,
            slope: self.slope,
        }
    }

    pub fn is_frozen(&self) -> bool {
        self.zero_streak >= FREEZE_AFTER
    }
}

#[derive(Clone, Debug)]
pub struct Subnetwork {
    pub network: Network,
    /// Full-network node behind each local node.
    pub nodes: Vec<NodeId>,
    /// Full-network link behind each local link.
    pub links: Vec<LinkId>,
    /// Intra-subnet demand of the full OD matrix, local ids.
    pub native: OdMatrix,
    /// Native demand plus the current artificial OD demand.
    pub demand: OdMatrix,
}

#[derive(Clone, Debug)]
pub struct Decomposition {
    pub master: Network,
    /// Full-network node behind each master node.
    pub master_nodes: Vec<NodeId>,
    /// Full-network link behind each physical master link.
    pub master_links: Vec<Option<LinkId>>,
    pub master_od: OdMatrix,
    pub roles: Vec<ZoneRole>,
    pub topology: MasterTopology,
    /// Artificial links in master link order; they follow the cut links.
    pub artificial: Vec<ArtificialLink>,
    pub subnets: Vec<Subnetwork>,
    pub partition: Partition,
    three_stage: bool,
    full_nodes: usize,
    full_links: usize,
}

/// Free-flow label sets of one subnetwork, computed on first use.
struct Reach<'a> {
    network: &'a Network,
    costs: Vec<f64>,
    trees: HashMap<NodeId, LabelSet>,
}

impl<'a> Reach<'a> {
    fn new(network: &'a Network) -> Self {
        Reach {
            network,
            costs: network.link_costs(&vec![0.0; network.link_count()]),
            trees: HashMap::new(),
        }
    }

    fn distance(&mut self, from: NodeId, to: NodeId) -> Result<Option<f64>> {
        if !self.trees.contains_key(&from) {
            let set = dijkstra(self.network, from, &self.costs)?;
            self.trees.insert(from, set);
        }
        let c = self.trees[&from].cost[to];
        Ok(c.is_finite().then_some(c))
    }
}

impl Decomposition {
    pub fn build(network: &Network, od: &OdMatrix, partition: &Partition) -> Result<Self> {
        partition.check_connected(network)?;
        if od.zone_extent() > network.zone_count() {
            return Err(Error::Structural("OD matrix references non-zone nodes".into()));
        }
        let k = partition.subnet_count();
        let boundary = partition.boundary_flags(network);
        let mut subnets = Vec::with_capacity(k);
        let mut local: Vec<Vec<Option<NodeId>>> = Vec::with_capacity(k);
        for s in 0..k {
            let (sub, map) = subnetwork(network, partition, &boundary, s)?;
            subnets.push(sub);
            local.push(map);
        }

        let mut reach: Vec<Reach> = subnets.iter().map(|s| Reach::new(&s.network)).collect();
        let mut native: Vec<Vec<(NodeId, NodeId, f64)>> = vec![Vec::new(); k];
        let mut master_pairs = Vec::new();
        for p in od.pairs() {
            let (o, d) = (p.origin, p.destination);
            let home = partition.common_subnet(o, d).and_then(|s| {
                let (lo, ld) = (local[s][o]?, local[s][d]?);
                match reach[s].distance(lo, ld) {
                    Ok(Some(_)) => Some(Ok((s, lo, ld))),
                    Ok(None) => None,
                    Err(e) => Some(Err(e)),
                }
            });
            match home.transpose()? {
                Some((s, lo, ld)) => native[s].push((lo, ld, p.demand)),
                None => master_pairs.push(*p),
            }
        }

        // master nodes: OD endpoints and boundary zones first, in full order
        let n = network.node_count();
        let mut is_master_zone = vec![false; n];
        let mut is_origin = vec![false; n];
        let mut is_destination = vec![false; n];
        for p in &master_pairs {
            is_master_zone[p.origin] = true;
            is_master_zone[p.destination] = true;
            is_origin[p.origin] = true;
            is_destination[p.destination] = true;
        }
        for v in network.zones() {
            is_master_zone[v] |= boundary[v];
        }
        let mut master_nodes: Vec<NodeId> = (0..n).filter(|&v| is_master_zone[v]).collect();
        let master_zones = master_nodes.len();
        let master_ftn = master_nodes
            .iter()
            .filter(|&&v| !network.is_through(v))
            .count();
        master_nodes.extend((0..n).filter(|&v| boundary[v] && !is_master_zone[v]));
        let mut master_index = vec![usize::MAX; n];
        for (i, &v) in master_nodes.iter().enumerate() {
            master_index[v] = i;
        }

        let mut links = Vec::new();
        let mut master_links = Vec::new();
        for l in partition.cut_links(network) {
            let link = network.link(l);
            links.push(Link {
                tail: master_index[link.tail],
                head: master_index[link.head],
                ..link.clone()
            });
            master_links.push(Some(l));
        }

        // (subnet, tail, head) in full ids -> (from origin, to destination, free-flow time)
        let mut pairs: BTreeMap<(usize, NodeId, NodeId), (bool, bool, f64)> = BTreeMap::new();
        for s in 0..k {
            let members = &subnets[s].nodes;
            let borders: Vec<NodeId> = members.iter().copied().filter(|&v| boundary[v]).collect();
            for &o in members.iter().filter(|&&v| is_origin[v]) {
                for &b in borders.iter().filter(|&&b| b != o) {
                    let (lo, lb) = (local[s][o].unwrap(), local[s][b].unwrap());
                    if let Some(c) = reach[s].distance(lo, lb)? {
                        pairs.entry((s, o, b)).or_insert((false, false, c)).0 = true;
                    }
                }
            }
            for &b in &borders {
                for &d in members.iter().filter(|&&v| is_destination[v] && v != b) {
                    let (lb, ld) = (local[s][b].unwrap(), local[s][d].unwrap());
                    if let Some(c) = reach[s].distance(lb, ld)? {
                        pairs.entry((s, b, d)).or_insert((false, false, c)).1 = true;
                    }
                }
            }
        }
        drop(reach);
        for (sub, entries) in subnets.iter_mut().zip(native) {
            sub.native = OdMatrix::from_entries(sub.network.zone_count(), entries)?;
            sub.demand = sub.native.clone();
        }
        let mut artificial = Vec::with_capacity(pairs.len());
        for ((s, tail, head), (from_origin, to_destination, c0)) in pairs {
            let master_link = links.len();
            links.push(Link::artificial(master_index[tail], master_index[head], c0, 0.0));
            master_links.push(None);
            artificial.push(ArtificialLink {
                master_link,
                subnet: s,
                tail: local[s][tail].unwrap(),
                head: local[s][head].unwrap(),
                from_origin,
                to_destination,
                intercept: c0,
                slope: 0.0,
                flow: 0.0,
                zero_streak: 0,
            });
        }

        let labels = master_nodes.iter().map(|&v| network.label(v)).collect();
        let master = Network::with_labels(labels, master_zones, master_ftn, links)?;
        let master_od = OdMatrix::from_entries(
            master_zones,
            master_pairs
                .iter()
                .map(|p| (master_index[p.origin], master_index[p.destination], p.demand)),
        )?;
        let roles = master_nodes[..master_zones]
            .iter()
            .map(|&v| ZoneRole::from_flags(is_origin[v], is_destination[v]))
            .collect();
        let topology = MasterTopology {
            subnet: master_nodes.iter().map(|&v| partition.subnet_of(v)).collect(),
            subnet_count: k,
        };
        let three_stage = k == 2 && MasterRouter::three_stage(&master, topology.clone()).is_ok();
        let decomposition = Decomposition {
            master,
            master_nodes,
            master_links,
            master_od,
            roles,
            topology,
            artificial,
            subnets,
            partition: partition.clone(),
            three_stage,
            full_nodes: n,
            full_links: network.link_count(),
        };
        decomposition.check_master_paths()?;
        Ok(decomposition)
    }

    fn check_master_paths(&self) -> Result<()> {
        if self.master_od.is_empty() {
            return Ok(());
        }
        let router = self.master_router()?;
        let costs = self.master.link_costs(&vec![0.0; self.master.link_count()]);
        match metrics::origin_labels(&router, &self.master_od, &costs)
            .and_then(|labels| metrics::sptt_from_labels(&router, &self.master_od, &labels))
        {
            Err(Error::Disconnected { origin, destination }) => Err(Error::Infeasible(format!(
                "OD pair {origin} -> {destination} has no path in the master network"
            ))),
            other => other.map(|_| ()),
        }
    }

    /// Constrained path engine for the master at its current parameters:
    /// the 3-stage search for two subnets, the network transformation
    /// otherwise (or when duplicated centroids blur the subnet topology).
    pub fn master_router(&self) -> Result<MasterRouter<'_>> {
        if self.three_stage {
            MasterRouter::three_stage(&self.master, self.topology.clone())
        } else {
            MasterRouter::transformed(&self.master, &self.roles)
        }
    }

    pub fn uses_three_stage(&self) -> bool {
        self.three_stage
    }

    pub fn subnet_count(&self) -> usize {
        self.subnets.len()
    }

    pub fn cut_link_count(&self) -> usize {
        self.master_links.iter().filter(|l| l.is_some()).count()
    }

    /// Artificial link behind master link `l`, if any.
    pub fn artificial_of(&self, l: LinkId) -> Option<&ArtificialLink> {
        l.checked_sub(self.cut_link_count())
            .and_then(|i| self.artificial.get(i))
    }

    /// Copies the artificial-link flows of a master solution into the
    /// subnetwork demand: each artificial link with positive flow becomes an
    /// OD pair of that size on top of the native demand.
    pub fn update_subnet_demand(&mut self, master_flows: &[f64]) -> Result<()> {
        self.master.check_flow_vector(master_flows)?;
        let mut extra: Vec<BTreeMap<(NodeId, NodeId), f64>> = vec![BTreeMap::new(); self.subnets.len()];
        for a in &mut self.artificial {
            a.flow = master_flows[a.master_link];
            if a.flow > 0.0 {
                *extra[a.subnet].entry((a.tail, a.head)).or_insert(0.0) += a.flow;
            }
        }
        for (sub, mut extra) in self.subnets.iter_mut().zip(extra) {
            for p in sub.native.pairs() {
                *extra.entry((p.origin, p.destination)).or_insert(0.0) += p.demand;
            }
            sub.demand = OdMatrix::from_entries(
                sub.network.zone_count(),
                extra.into_iter().map(|((o, d), v)| (o, d, v)),
            )?;
        }
        Ok(())
    }

    pub fn summary(&self) -> Summary {
        Summary {
            master: self.master.to_string(),
            subnets: self.subnets.iter().map(|s| s.network.to_string()).collect(),
        }
    }
}

/// Induced subnetwork `s`: member zones first, then non-zone boundary
/// nodes (artificial OD endpoints need zone ids), then the rest.
fn subnetwork(
    network: &Network,
    partition: &Partition,
    boundary: &[bool],
    s: usize,
) -> Result<(Subnetwork, Vec<Option<NodeId>>)> {
    let n = network.node_count();
    let member = |v: NodeId| partition.is_member(v, s);
    let mut nodes: Vec<NodeId> = network.zones().filter(|&v| member(v)).collect();
    let ftn = nodes.iter().filter(|&&v| !network.is_through(v)).count();
    let zone_end = network.zone_count();
    nodes.extend((zone_end..n).filter(|&v| member(v) && boundary[v]));
    let zones = nodes.len();
    nodes.extend((zone_end..n).filter(|&v| member(v) && !boundary[v]));
    let mut local = vec![None; n];
    for (i, &v) in nodes.iter().enumerate() {
        local[v] = Some(i);
    }
    let mut links = Vec::new();
    let mut sub_links = Vec::new();
    for l in 0..network.link_count() {
        if partition.link_subnet(network, l) == Some(s) {
            let link = network.link(l);
            links.push(l);
            sub_links.push(Link {
                tail: local[link.tail].unwrap(),
                head: local[link.head].unwrap(),
                ..link.clone()
            });
        }
    }
    let labels = nodes.iter().map(|&v| network.label(v)).collect();
    let net = Network::with_labels(labels, zones, ftn, sub_links)?;
    Ok((
        Subnetwork {
            network: net,
            nodes,
            links,
            native: OdMatrix::default(),
            demand: OdMatrix::default(),
        },
        local,
    ))
}

/// Sizes of the master and subnetworks as (nodes, physical links,
/// artificial links).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Summary {
    pub master: String,
    pub subnets: Vec<String>,
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Master network - {}", self.master)?;
        for (i, s) in self.subnets.iter().enumerate() {
            writeln!(f, "Subnetwork {} - {}", i + 1, s)?;
        }
        Ok(())
    }
}
