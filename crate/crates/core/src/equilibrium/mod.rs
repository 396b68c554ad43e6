//! Path-based gradient projection for user equilibrium.

mod warmstart;

pub use warmstart::warmstart_from;
pub(crate) use warmstart::warmstart_with;

use std::time::Instant;

use crate::demand::OdMatrix;
use crate::error::{Error, Result};
use crate::metrics::{self, CompensatedSum};
use crate::network::{LinkId, Network};
use crate::shortest_path::{LabelSet, Router, Unconstrained};
use crate::solution::{link_flows_from_paths, OdFlows, PathFlow, PathFlowSolution};

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub target_rg: f64,
    pub max_iterations: usize,
    /// Fraction of the Newton step taken on each shift, in (0, 1].
    pub newton_scale: f64,
    /// Cost differences at or below this are treated as equal.
    pub path_cost_epsilon: f64,
    /// Paths whose flow falls below this are dropped.
    pub drop_threshold: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            target_rg: 1e-4,
            max_iterations: 1000,
            newton_scale: 1.0,
            path_cost_epsilon: 1e-10,
            drop_threshold: 1e-10,
        }
    }
}

impl SolverConfig {
    pub fn with_target(target_rg: f64, max_iterations: usize) -> Self {
        SolverConfig {
            target_rg,
            max_iterations,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.target_rg > 0.0) {
            return Err(Error::Validation(format!(
                "target relative gap must be positive, got {}",
                self.target_rg
            )));
        }
        if !(self.newton_scale > 0.0 && self.newton_scale <= 1.0) {
            return Err(Error::Validation(format!(
                "newton scale must lie in (0, 1], got {}",
                self.newton_scale
            )));
        }
        if !(self.path_cost_epsilon >= 0.0) || !(self.drop_threshold >= 0.0) {
            return Err(Error::Validation(
                "path cost epsilon and drop threshold must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// One row of a convergence trace, evaluated at the flows the solver held
/// after `iteration` sweeps (row 0 is the initial loading).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub elapsed_seconds: f64,
    pub relative_gap: f64,
    pub tstt: f64,
    pub sptt: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Convergence {
    pub rows: Vec<TraceRow>,
    pub converged: bool,
}

impl Convergence {
    pub fn final_gap(&self) -> Option<f64> {
        self.rows.last().map(|r| r.relative_gap)
    }

    pub fn iterations(&self) -> usize {
        self.rows.last().map_or(0, |r| r.iteration)
    }
}

#[derive(Clone, Debug)]
pub struct Solved {
    pub solution: PathFlowSolution,
    pub trace: Convergence,
}

/// Solves the full network with plain Dijkstra as the path generator.
pub fn solve(
    network: &Network,
    od: &OdMatrix,
    initial: Option<&PathFlowSolution>,
    config: &SolverConfig,
) -> Result<Solved> {
    solve_with(&Unconstrained::new(network), od, initial, config)
}

/// Gradient projection over the paths produced by `router`.
///
/// Each iteration computes one shortest-path tree per origin at the current
/// flows (in parallel), records the gap, adds the new shortest paths to the
/// working sets and then equilibrates every OD pair in origin order.
pub fn solve_with(
    router: &dyn Router,
    od: &OdMatrix,
    initial: Option<&PathFlowSolution>,
    config: &SolverConfig,
) -> Result<Solved> {
    config.validate()?;
    let network = router.network();
    let start = Instant::now();
    let mut solution = match initial {
        Some(init) => warmstart_with(router, init, od)?,
        None => all_or_nothing(router, od)?,
    };
    let mut trace = Convergence::default();
    let mut costs = vec![0.0; network.link_count()];
    let mut scratch = Scratch::new(network.link_count());

    for iteration in 0.. {
        solution.link_flows = link_flows_from_paths(network, &solution)?;
        fill_costs(network, &solution.link_flows, &mut costs, iteration)?;
        let labels = metrics::origin_labels(router, od, &costs)?;
        let tstt = metrics::tstt(network, &solution.link_flows)?;
        let sptt = metrics::sptt_from_labels(router, od, &labels)?;
        let relative_gap = metrics::gap_from_totals(tstt, sptt)?;
        trace.rows.push(TraceRow {
            iteration,
            elapsed_seconds: start.elapsed().as_secs_f64(),
            relative_gap,
            tstt,
            sptt,
        });
        log::debug!("iteration {iteration}: gap {relative_gap:.3e}, tstt {tstt:.6e}");
        if relative_gap <= config.target_rg {
            trace.converged = true;
            break;
        }
        if iteration >= config.max_iterations {
            break;
        }

        let mut x = std::mem::take(&mut solution.link_flows);
        for ((_, range), set) in od.origin_groups().into_iter().zip(&labels) {
            for k in range {
                let flows = &mut solution.ods[k];
                let path = shortest_path(network, set, flows)?;
                if !flows.paths.iter().any(|p| p.links == path) {
                    flows.paths.push(PathFlow { links: path, flow: 0.0 });
                }
                shift_flows(network, flows, &mut x, &mut costs, config, &mut scratch);
            }
        }
        if costs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Numerical {
                iteration,
                message: "non-finite link cost after flow shifts".into(),
            });
        }
        solution.link_flows = x;
    }
    Ok(Solved { solution, trace })
}

/// Equilibrates one OD pair within its current path set: flow moves from
/// every costlier path to the cheapest one by a projected Newton step, with
/// `link_flows` kept in step. Paths falling below the drop threshold are
/// removed and their flow handed to the cheapest path.
pub fn equilibrate_od(
    network: &Network,
    od_flows: &mut OdFlows,
    link_flows: &mut [f64],
    config: &SolverConfig,
) -> Result<()> {
    config.validate()?;
    network.check_flow_vector(link_flows)?;
    let mut costs = network.link_costs(link_flows);
    let mut scratch = Scratch::new(network.link_count());
    shift_flows(network, od_flows, link_flows, &mut costs, config, &mut scratch);
    Ok(())
}

/// All demand on the free-flow shortest path of every OD pair.
pub(crate) fn all_or_nothing(router: &dyn Router, od: &OdMatrix) -> Result<PathFlowSolution> {
    let network = router.network();
    let zero = vec![0.0; network.link_count()];
    let costs = network.link_costs(&zero);
    let labels = metrics::origin_labels(router, od, &costs)?;
    let mut ods = Vec::with_capacity(od.len());
    for ((_, range), set) in od.origin_groups().into_iter().zip(&labels) {
        for pair in &od.pairs()[range] {
            let mut flows = OdFlows {
                origin: pair.origin,
                destination: pair.destination,
                demand: pair.demand,
                paths: Vec::new(),
            };
            let links = shortest_path(network, set, &flows)?;
            flows.paths.push(PathFlow {
                links,
                flow: pair.demand,
            });
            ods.push(flows);
        }
    }
    let mut solution = PathFlowSolution {
        ods,
        link_flows: Vec::new(),
    };
    solution.link_flows = link_flows_from_paths(network, &solution)?;
    Ok(solution)
}

pub(crate) fn shortest_path(network: &Network, set: &LabelSet, od: &OdFlows) -> Result<Vec<LinkId>> {
    set.path_to(network, od.destination)
        .ok_or_else(|| Error::Disconnected {
            origin: network.label(od.origin),
            destination: network.label(od.destination),
        })
}

fn fill_costs(network: &Network, flows: &[f64], costs: &mut [f64], iteration: usize) -> Result<()> {
    network.fill_link_costs(flows, costs);
    if let Some(l) = costs.iter().position(|c| !c.is_finite()) {
        return Err(Error::Numerical {
            iteration,
            message: format!(
                "link {} has cost {} at flow {}",
                network.describe_link(l),
                costs[l],
                flows[l]
            ),
        });
    }
    Ok(())
}

/// Link stamps used to form symmetric differences without allocation.
struct Scratch {
    in_basic: Vec<u32>,
    in_other: Vec<u32>,
    basic_stamp: u32,
    other_stamp: u32,
    only_other: Vec<LinkId>,
    only_basic: Vec<LinkId>,
}

impl Scratch {
    fn new(links: usize) -> Self {
        Scratch {
            in_basic: vec![0; links],
            in_other: vec![0; links],
            basic_stamp: 0,
            other_stamp: 0,
            only_other: Vec::new(),
            only_basic: Vec::new(),
        }
    }

    fn mark_basic(&mut self, basic: &[LinkId]) {
        self.basic_stamp += 1;
        for &l in basic {
            self.in_basic[l] = self.basic_stamp;
        }
    }

    fn split(&mut self, basic: &[LinkId], other: &[LinkId]) {
        self.other_stamp += 1;
        self.only_other.clear();
        self.only_basic.clear();
        for &l in other {
            self.in_other[l] = self.other_stamp;
            if self.in_basic[l] != self.basic_stamp {
                self.only_other.push(l);
            }
        }
        for &l in basic {
            if self.in_other[l] != self.other_stamp {
                self.only_basic.push(l);
            }
        }
    }
}

fn path_cost(links: &[LinkId], costs: &[f64]) -> f64 {
    links.iter().map(|&l| costs[l]).collect::<CompensatedSum>().value()
}

fn move_flow(network: &Network, links: &[LinkId], delta: f64, x: &mut [f64], costs: &mut [f64]) {
    for &l in links {
        x[l] = (x[l] + delta).max(0.0);
        costs[l] = network.link(l).cost.time(x[l]);
    }
}

fn shift_flows(
    network: &Network,
    flows: &mut OdFlows,
    x: &mut [f64],
    costs: &mut [f64],
    config: &SolverConfig,
    scratch: &mut Scratch,
) {
    if flows.paths.len() < 2 {
        if let Some(p) = flows.paths.first_mut() {
            p.flow = flows.demand;
        }
        return;
    }
    let basic = (0..flows.paths.len())
        .min_by(|&a, &b| {
            path_cost(&flows.paths[a].links, costs)
                .total_cmp(&path_cost(&flows.paths[b].links, costs))
                .then(a.cmp(&b))
        })
        .expect("non-empty path set");
    let basic_links = flows.paths[basic].links.clone();
    scratch.mark_basic(&basic_links);

    for k in 0..flows.paths.len() {
        if k == basic || flows.paths[k].flow <= 0.0 {
            continue;
        }
        scratch.split(&basic_links, &flows.paths[k].links);
        let (only_other, only_basic) = (&scratch.only_other, &scratch.only_basic);
        let diff = path_cost(only_other, costs) - path_cost(only_basic, costs);
        if diff <= config.path_cost_epsilon {
            continue;
        }
        let curvature: f64 = only_other
            .iter()
            .chain(only_basic)
            .map(|&l| network.link(l).cost.derivative(x[l]))
            .sum();
        let h = flows.paths[k].flow;
        let mut delta = if curvature > 0.0 {
            (config.newton_scale * diff / curvature).min(h)
        } else {
            h
        };
        // back off while the shift overshoots past the mirror image of the
        // starting difference, which keeps every shift a descent step
        loop {
            move_flow(network, only_other, -delta, x, costs);
            move_flow(network, only_basic, delta, x, costs);
            let after = path_cost(only_basic, costs) - path_cost(only_other, costs);
            if after <= diff || delta <= h * 1e-12 {
                break;
            }
            move_flow(network, only_other, delta, x, costs);
            move_flow(network, only_basic, -delta, x, costs);
            delta *= 0.5;
        }
        flows.paths[k].flow -= delta;
        flows.paths[basic].flow += delta;
    }

    let mut k = 0;
    while k < flows.paths.len() {
        if k != basic_index(flows, &basic_links) && flows.paths[k].flow < config.drop_threshold {
            let dropped = flows.paths.remove(k);
            let b = basic_index(flows, &basic_links);
            if dropped.flow > 0.0 {
                scratch.split(&basic_links, &dropped.links);
                let (only_other, only_basic) = (scratch.only_other.clone(), scratch.only_basic.clone());
                move_flow(network, &only_other, -dropped.flow, x, costs);
                move_flow(network, &only_basic, dropped.flow, x, costs);
                flows.paths[b].flow += dropped.flow;
            }
        } else {
            k += 1;
        }
    }
    // absorb accumulated rounding into the basic path
    let b = basic_index(flows, &basic_links);
    let others: f64 = flows
        .paths
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != b)
        .map(|(_, p)| p.flow)
        .collect::<CompensatedSum>()
        .value();
    flows.paths[b].flow = (flows.demand - others).max(0.0);
}

fn basic_index(flows: &OdFlows, basic_links: &[LinkId]) -> usize {
    flows
        .paths
        .iter()
        .position(|p| p.links == basic_links)
        .expect("basic path stays in the set")
}
