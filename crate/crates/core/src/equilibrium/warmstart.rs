use crate::demand::OdMatrix;
use crate::error::{Error, Result};
use crate::metrics;
use crate::network::Network;
use crate::shortest_path::{Router, Unconstrained};
use crate::solution::{link_flows_from_paths, validate_path, OdFlows, PathFlow, PathFlowSolution};

use super::shortest_path;

/// Turns a solution for other demands into a feasible starting point for
/// `od`: each OD pair's path flows are scaled to its new demand, and pairs
/// the solution does not cover are loaded onto their current shortest path.
pub fn warmstart_from(
    network: &Network,
    solution: &PathFlowSolution,
    od: &OdMatrix,
) -> Result<PathFlowSolution> {
    warmstart_with(&Unconstrained::new(network), solution, od)
}

pub(crate) fn warmstart_with(
    router: &dyn Router,
    solution: &PathFlowSolution,
    od: &OdMatrix,
) -> Result<PathFlowSolution> {
    let network = router.network();
    let mut ods = Vec::with_capacity(od.len());
    let mut missing = Vec::new();
    for (k, pair) in od.pairs().iter().enumerate() {
        let mut flows = OdFlows {
            origin: pair.origin,
            destination: pair.destination,
            demand: pair.demand,
            paths: Vec::new(),
        };
        let old = solution
            .find(pair.origin, pair.destination)
            .filter(|o| o.total_flow() > 0.0);
        match old {
            Some(old) => {
                let total = old.total_flow();
                for p in old.paths.iter().filter(|p| p.flow > 0.0) {
                    validate_path(network, pair.origin, pair.destination, &p.links).map_err(|e| {
                        Error::Mapping(format!(
                            "warmstart path for OD ({}, {}) does not fit the target network: {e}",
                            network.label(pair.origin),
                            network.label(pair.destination)
                        ))
                    })?;
                    flows.paths.push(PathFlow {
                        links: p.links.clone(),
                        flow: p.flow / total * pair.demand,
                    });
                }
            }
            None => missing.push(k),
        }
        ods.push(flows);
    }
    let mut result = PathFlowSolution {
        ods,
        link_flows: Vec::new(),
    };
    if !missing.is_empty() {
        let x = link_flows_from_paths(network, &result)?;
        let costs = network.link_costs(&x);
        let mut origins: Vec<_> = missing.iter().map(|&k| od.pairs()[k].origin).collect();
        origins.dedup();
        let sub = OdMatrix::from_entries(
            network.zone_count(),
            missing.iter().map(|&k| {
                let p = od.pairs()[k];
                (p.origin, p.destination, p.demand)
            }),
        )?;
        let labels = metrics::origin_labels(router, &sub, &costs)?;
        for &k in &missing {
            let origin = od.pairs()[k].origin;
            let g = origins.iter().position(|&o| o == origin).expect("origin listed");
            let links = shortest_path(network, &labels[g], &result.ods[k])?;
            let demand = result.ods[k].demand;
            result.ods[k].paths.push(PathFlow {
                links,
                flow: demand,
            });
        }
    }
    result.link_flows = link_flows_from_paths(network, &result)?;
    Ok(result)
}
