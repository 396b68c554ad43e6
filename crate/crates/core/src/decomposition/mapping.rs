use std::collections::HashMap;

use super::Decomposition;
use crate::demand::OdMatrix;
use crate::error::{Error, Result};
use crate::metrics;
use crate::network::{LinkId, Network};
use crate::solution::{link_flows_from_paths, OdFlows, PathFlow, PathFlowSolution};

/// Full-network relative gap at the mapped link flows.
pub fn full_gap(network: &Network, od: &OdMatrix, mapped: &PathFlowSolution) -> Result<f64> {
    metrics::relative_gap(network, od, &mapped.link_flows)
}

/// Path flows of one full OD pair, merged by link sequence.
#[derive(Default)]
struct Collector {
    paths: Vec<PathFlow>,
    index: HashMap<Vec<LinkId>, usize>,
}

impl Collector {
    fn add(&mut self, links: Vec<LinkId>, flow: f64) {
        if flow <= 0.0 {
            return;
        }
        match self.index.get(&links) {
            Some(&i) => self.paths[i].flow += flow,
            None => {
                self.index.insert(links.clone(), self.paths.len());
                self.paths.push(PathFlow { links, flow });
            }
        }
    }
}

impl Decomposition {
    /// Lifts master and subnetwork path flows to the full network.
    ///
    /// Every artificial link on a master path is replaced by the used
    /// subnetwork paths of its artificial OD pair, splitting the flow in
    /// proportion to their flows; a master path with several artificial
    /// links expands into all combinations. Native subnetwork demand keeps
    /// its share of the subnetwork OD's paths.
    pub fn map_to_full(
        &self,
        network: &Network,
        od: &OdMatrix,
        master_solution: &PathFlowSolution,
        subnet_solutions: &[PathFlowSolution],
    ) -> Result<PathFlowSolution> {
        if network.node_count() != self.full_nodes || network.link_count() != self.full_links {
            return Err(Error::Structural("map_to_full called with a different network".into()));
        }
        if subnet_solutions.len() != self.subnets.len() {
            return Err(Error::Structural(format!(
                "{} subnetwork solutions for {} subnetworks",
                subnet_solutions.len(),
                self.subnets.len()
            )));
        }
        let pairs = od.pairs();
        let slot = |o: usize, d: usize| -> Result<usize> {
            pairs
                .binary_search_by(|p| (p.origin, p.destination).cmp(&(o, d)))
                .map_err(|_| {
                    Error::Consistency(format!(
                        "mapped flow for OD pair ({}, {}) which has no demand",
                        network.label(o),
                        network.label(d)
                    ))
                })
        };
        let mut collected: Vec<Collector> = (0..pairs.len()).map(|_| Collector::default()).collect();

        for (sub, solution) in self.subnets.iter().zip(subnet_solutions) {
            for flows in &solution.ods {
                let native = sub.native.demand(flows.origin, flows.destination);
                if native <= 0.0 {
                    continue;
                }
                let total = flows.total_flow();
                if total <= 0.0 {
                    continue;
                }
                let k = slot(sub.nodes[flows.origin], sub.nodes[flows.destination])?;
                for p in &flows.paths {
                    let links = p.links.iter().map(|&l| sub.links[l]).collect();
                    collected[k].add(links, p.flow * native / total);
                }
            }
        }

        for flows in &master_solution.ods {
            let k = slot(self.master_nodes[flows.origin], self.master_nodes[flows.destination])?;
            for p in flows.paths.iter().filter(|p| p.flow > 0.0) {
                let mut partial: Vec<(Vec<LinkId>, f64)> = vec![(Vec::new(), p.flow)];
                for &l in &p.links {
                    if let Some(full) = self.master_links[l] {
                        for (links, _) in &mut partial {
                            links.push(full);
                        }
                        continue;
                    }
                    let a = self.artificial_of(l).expect("master link is cut or artificial");
                    let sub = &self.subnets[a.subnet];
                    let inner = subnet_solutions[a.subnet]
                        .find(a.tail, a.head)
                        .filter(|f| f.total_flow() > 0.0)
                        .ok_or_else(|| {
                            Error::Consistency(format!(
                                "artificial link {} carries flow but its subnetwork OD pair has none",
                                self.master.describe_link(l)
                            ))
                        })?;
                    let total = inner.total_flow();
                    let mut next = Vec::with_capacity(partial.len() * inner.paths.len());
                    for (prefix, flow) in &partial {
                        for q in inner.paths.iter().filter(|q| q.flow > 0.0) {
                            let mut links = prefix.clone();
                            links.extend(q.links.iter().map(|&x| sub.links[x]));
                            next.push((links, flow * q.flow / total));
                        }
                    }
                    partial = next;
                }
                for (links, flow) in partial {
                    collected[k].add(links, flow);
                }
            }
        }

        let mut ods = Vec::with_capacity(pairs.len());
        for (pair, c) in pairs.iter().zip(collected) {
            let mut paths = c.paths;
            let total: f64 = paths.iter().map(|p| p.flow).sum();
            if !(total > 0.0) {
                return Err(Error::Consistency(format!(
                    "OD pair ({}, {}) received no flow from the decomposition",
                    network.label(pair.origin),
                    network.label(pair.destination)
                )));
            }
            // remove the rounding left by the proportional splits
            for p in &mut paths {
                p.flow *= pair.demand / total;
            }
            ods.push(OdFlows {
                origin: pair.origin,
                destination: pair.destination,
                demand: pair.demand,
                paths,
            });
        }
        let mut solution = PathFlowSolution {
            ods,
            link_flows: Vec::new(),
        };
        solution.link_flows = link_flows_from_paths(network, &solution)?;
        Ok(solution)
    }
}
