use std::collections::BTreeMap;

use super::{Decomposition, Subnetwork};
use crate::error::Result;
use crate::par;
use crate::shortest_path::dijkstra;
use crate::solution::PathFlowSolution;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ParamUpdate {
    pub updated: usize,
    pub frozen: usize,
    /// Links whose endpoints were not connected; they keep their parameters.
    pub disconnected: usize,
}

enum Outcome {
    Set { intercept: f64, slope: f64 },
    Frozen,
    Disconnected,
}

impl Decomposition {
    /// Re-estimates every artificial link as an affine function that is
    /// exact at its current flow: `L` is the congested shortest-path time
    /// between its endpoints in the subnetwork, the slope is the sum of the
    /// link cost derivatives along that path and the intercept is
    /// `L - slope * flow`. A link without flow takes its slope from the
    /// free-flow shortest path instead. Runs one task per subnetwork.
    pub fn update_artificial_params(&mut self, subnet_solutions: &[PathFlowSolution]) -> Result<ParamUpdate> {
        assert_eq!(subnet_solutions.len(), self.subnets.len(), "one solution per subnetwork");
        let mut owned: Vec<Vec<usize>> = vec![Vec::new(); self.subnets.len()];
        for (i, a) in self.artificial.iter_mut().enumerate() {
            if a.flow > 0.0 {
                a.zero_streak = 0;
            } else {
                a.zero_streak += 1;
            }
            owned[a.subnet].push(i);
        }
        let jobs: Vec<usize> = (0..self.subnets.len()).collect();
        let this = &*self;
        let results = par::map(&jobs, |&s| {
            estimate(&this.subnets[s], &subnet_solutions[s], &owned[s], this)
        });

        let mut report = ParamUpdate::default();
        for (s, outcomes) in results.into_iter().enumerate() {
            for (&i, outcome) in owned[s].iter().zip(outcomes?) {
                match outcome {
                    Outcome::Set { intercept, slope } => {
                        let a = &mut self.artificial[i];
                        a.intercept = intercept;
                        a.slope = slope;
                        let (l, cost) = (a.master_link, a.cost());
                        self.master.set_cost_function(l, cost)?;
                        report.updated += 1;
                    }
                    Outcome::Frozen => report.frozen += 1,
                    Outcome::Disconnected => {
                        let a = &self.artificial[i];
                        log::warn!(
                            "artificial link {} lost its subnetwork path; keeping its parameters",
                            self.master.describe_link(a.master_link)
                        );
                        report.disconnected += 1;
                    }
                }
            }
        }
        Ok(report)
    }
}

fn estimate(
    sub: &Subnetwork,
    solution: &PathFlowSolution,
    owned: &[usize],
    decomposition: &Decomposition,
) -> Result<Vec<Outcome>> {
    let net = &sub.network;
    let flows: Vec<f64> = if solution.link_flows.len() == net.link_count() {
        solution.link_flows.clone()
    } else {
        vec![0.0; net.link_count()]
    };
    let costs = net.link_costs(&flows);
    let free = net.link_costs(&vec![0.0; net.link_count()]);
    let mut congested = BTreeMap::new();
    let mut free_flow = BTreeMap::new();
    let mut out = Vec::with_capacity(owned.len());
    for &i in owned {
        let a = &decomposition.artificial[i];
        if a.is_frozen() {
            out.push(Outcome::Frozen);
            continue;
        }
        if !congested.contains_key(&a.tail) {
            congested.insert(a.tail, dijkstra(net, a.tail, &costs)?);
        }
        let tree = &congested[&a.tail];
        let Some(path) = tree.path_to(net, a.head) else {
            out.push(Outcome::Disconnected);
            continue;
        };
        let length = tree.cost[a.head];
        let slope_path = if a.flow > 0.0 {
            path
        } else {
            if !free_flow.contains_key(&a.tail) {
                free_flow.insert(a.tail, dijkstra(net, a.tail, &free)?);
            }
            free_flow[&a.tail].path_to(net, a.head).unwrap_or(path)
        };
        let slope: f64 = slope_path
            .iter()
            .map(|&l| net.link(l).cost.derivative(flows[l]))
            .sum::<f64>()
            .max(0.0);
        out.push(Outcome::Set {
            intercept: length - slope * a.flow,
            slope,
        });
    }
    Ok(out)
}
