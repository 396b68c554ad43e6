//! Outer loop of the decomposition heuristic, the warmstart handoff and the
//! centralized baseline.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::decomposition::{full_gap, Decomposition};
use crate::demand::OdMatrix;
use crate::equilibrium::{solve, solve_with, Convergence, SolverConfig};
use crate::error::{Error, Result};
use crate::metrics;
use crate::network::Network;
use crate::par;
use crate::partition::Partition;
use crate::solution::PathFlowSolution;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Phase {
    Heuristic,
    Centralized,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Heuristic => "heuristic",
            Phase::Centralized => "centralized",
        })
    }
}

impl FromStr for Phase {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "heuristic" => Ok(Phase::Heuristic),
            "centralized" => Ok(Phase::Centralized),
            other => Err(format!("unknown phase {other:?}")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRecord {
    pub phase: Phase,
    pub iteration: usize,
    pub elapsed_seconds: f64,
    /// NaN when the full-network gap was skipped.
    pub relative_gap: f64,
    pub tstt: f64,
}

/// Wall time of a heuristic run by category. Each category is timed around
/// its own call sites only, so the parts never overlap.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TimingSplit {
    pub master_seconds: f64,
    /// Subnetwork solves plus the artificial-link update.
    pub subnet_seconds: f64,
    pub mapping_seconds: f64,
    pub full_gap_seconds: f64,
    pub wall_seconds: f64,
}

impl TimingSplit {
    pub fn categories(&self) -> [(&'static str, f64); 4] {
        [
            ("master", self.master_seconds),
            ("subnetworks", self.subnet_seconds),
            ("mapping", self.mapping_seconds),
            ("full_gap", self.full_gap_seconds),
        ]
    }

    pub fn measured_seconds(&self) -> f64 {
        self.categories().iter().map(|c| c.1).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HeuristicConfig {
    pub outer_max_iterations: usize,
    pub full_gap_threshold: f64,
    /// Gap each master and subnetwork solve stops at.
    pub per_level_gap: f64,
    pub level_max_iterations: usize,
    pub worker_count: usize,
    /// Return the iterate with the lowest full gap instead of the last one.
    pub track_best: bool,
    pub skip_full_gap: bool,
    /// Settings of the centralized solver, also the base for level solves.
    pub solver: SolverConfig,
}

impl Default for HeuristicConfig {
    fn default() -> Self {
        HeuristicConfig {
            outer_max_iterations: 10,
            full_gap_threshold: 1e-4,
            per_level_gap: 0.05,
            level_max_iterations: 1000,
            worker_count: 1,
            track_best: true,
            skip_full_gap: false,
            solver: SolverConfig::default(),
        }
    }
}

impl HeuristicConfig {
    pub fn validate(&self) -> Result<()> {
        if self.worker_count == 0 {
            return Err(Error::Validation("worker count must be at least 1".into()));
        }
        if !(self.per_level_gap > 0.0) {
            return Err(Error::Validation(format!(
                "per-level gap must be positive, got {}",
                self.per_level_gap
            )));
        }
        if !(self.full_gap_threshold >= 0.0) {
            return Err(Error::Validation(format!(
                "full gap threshold must be non-negative, got {}",
                self.full_gap_threshold
            )));
        }
        self.solver.validate()
    }

    fn level(&self) -> SolverConfig {
        SolverConfig {
            target_rg: self.per_level_gap,
            max_iterations: self.level_max_iterations,
            ..self.solver.clone()
        }
    }
}

#[derive(Clone, Debug)]
pub struct HeuristicOutcome {
    pub solution: PathFlowSolution,
    pub trace: Vec<TraceRecord>,
    pub timing: TimingSplit,
    /// Outer iteration the returned solution comes from (1-based).
    pub best_iteration: usize,
    pub best_gap: f64,
    /// Subnetwork solutions of the last outer iteration.
    pub subnet_solutions: Vec<PathFlowSolution>,
    /// `None` when a one-subnet partition sent the run to the centralized solver.
    pub decomposition: Option<Decomposition>,
}

#[derive(Clone, Debug)]
pub struct CentralizedOutcome {
    pub solution: PathFlowSolution,
    pub trace: Vec<TraceRecord>,
    pub convergence: Convergence,
    pub seconds: f64,
}

#[derive(Clone, Debug)]
pub struct WarmstartOutcome {
    pub solution: PathFlowSolution,
    /// Heuristic rows followed by centralized rows on one clock.
    pub trace: Vec<TraceRecord>,
    pub heuristic: HeuristicOutcome,
    pub convergence: Convergence,
    pub heuristic_seconds: f64,
    pub centralized_seconds: f64,
}

impl WarmstartOutcome {
    pub fn total_seconds(&self) -> f64 {
        self.heuristic_seconds + self.centralized_seconds
    }
}

fn records(phase: Phase, convergence: &Convergence, offset: f64) -> Vec<TraceRecord> {
    convergence
        .rows
        .iter()
        .map(|r| TraceRecord {
            phase,
            iteration: r.iteration,
            elapsed_seconds: offset + r.elapsed_seconds,
            relative_gap: r.relative_gap,
            tstt: r.tstt,
        })
        .collect()
}

pub fn run_centralized(network: &Network, od: &OdMatrix, config: &SolverConfig) -> Result<CentralizedOutcome> {
    let start = Instant::now();
    let solved = solve(network, od, None, config)?;
    Ok(CentralizedOutcome {
        trace: records(Phase::Centralized, &solved.trace, 0.0),
        solution: solved.solution,
        convergence: solved.trace,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Runs the decomposition heuristic: each outer iteration solves the
/// master, hands artificial-link flows to the subnetworks as demand, solves
/// the subnetworks on `worker_count` workers, refits the artificial links,
/// maps the result to the full network and measures its gap. Master and
/// subnetwork solutions are carried over as warmstarts between iterations.
pub fn run_heuristic(
    network: &Network,
    od: &OdMatrix,
    partition: &Partition,
    config: &HeuristicConfig,
) -> Result<HeuristicOutcome> {
    config.validate()?;
    partition.check_covers(network)?;
    let start = Instant::now();
    if partition.subnet_count() <= 1 {
        let central = run_centralized(network, od, &config.solver)?;
        let best_gap = central.convergence.final_gap().unwrap_or(f64::NAN);
        return Ok(HeuristicOutcome {
            solution: central.solution,
            trace: central.trace,
            timing: TimingSplit {
                subnet_seconds: central.seconds,
                wall_seconds: start.elapsed().as_secs_f64(),
                ..TimingSplit::default()
            },
            best_iteration: 1,
            best_gap,
            subnet_solutions: Vec::new(),
            decomposition: None,
        });
    }

    let mut d = Decomposition::build(network, od, partition)?;
    log::info!("decomposition\n{}", d.summary());
    let level = config.level();
    let mut timing = TimingSplit::default();
    let mut trace = Vec::new();
    let mut master: Option<PathFlowSolution> = None;
    let mut subnets: Vec<Option<PathFlowSolution>> = vec![None; d.subnet_count()];
    let mut best: Option<(f64, usize, PathFlowSolution)> = None;

    for iteration in 1..=config.outer_max_iterations {
        let t = Instant::now();
        let master_solution = if d.master_od.is_empty() {
            PathFlowSolution::empty(&d.master)
        } else {
            let router = d.master_router()?;
            solve_with(&router, &d.master_od, master.as_ref(), &level)?.solution
        };
        timing.master_seconds += t.elapsed().as_secs_f64();

        let t = Instant::now();
        d.update_subnet_demand(&master_solution.link_flows)?;
        let jobs: Vec<usize> = (0..d.subnet_count()).collect();
        let solved = par::with_workers(config.worker_count, || {
            par::map(&jobs, |&s| {
                let sub = &d.subnets[s];
                solve(&sub.network, &sub.demand, subnets[s].as_ref(), &level)
            })
        })?;
        let subnet_solutions = solved
            .into_iter()
            .map(|r| r.map(|s| s.solution))
            .collect::<Result<Vec<_>>>()?;
        let update = d.update_artificial_params(&subnet_solutions)?;
        timing.subnet_seconds += t.elapsed().as_secs_f64();
        log::debug!(
            "iteration {iteration}: {} artificial links refit, {} frozen, {} disconnected",
            update.updated,
            update.frozen,
            update.disconnected
        );

        let t = Instant::now();
        let mapped = d.map_to_full(network, od, &master_solution, &subnet_solutions)?;
        let tstt = metrics::tstt(network, &mapped.link_flows)?;
        timing.mapping_seconds += t.elapsed().as_secs_f64();

        let gap = if config.skip_full_gap {
            f64::NAN
        } else {
            let t = Instant::now();
            let g = full_gap(network, od, &mapped)?;
            timing.full_gap_seconds += t.elapsed().as_secs_f64();
            g
        };
        log::info!("heuristic iteration {iteration}: full gap {gap:.3e}, tstt {tstt:.6e}");
        trace.push(TraceRecord {
            phase: Phase::Heuristic,
            iteration,
            elapsed_seconds: start.elapsed().as_secs_f64(),
            relative_gap: gap,
            tstt,
        });

        let better = match &best {
            None => true,
            Some((b, _, _)) => !config.track_best || gap.is_nan() || gap < *b,
        };
        let done = gap <= config.full_gap_threshold;
        master = Some(master_solution);
        let finished = done || iteration == config.outer_max_iterations;
        subnets = subnet_solutions.into_iter().map(Some).collect();
        if better {
            best = Some((gap, iteration, mapped));
        }
        if finished {
            break;
        }
    }

    timing.wall_seconds = start.elapsed().as_secs_f64();
    let (best_gap, best_iteration, solution) = best.ok_or_else(|| {
        Error::Validation("the heuristic needs at least one outer iteration".into())
    })?;
    Ok(HeuristicOutcome {
        solution,
        trace,
        timing,
        best_iteration,
        best_gap,
        subnet_solutions: subnets.into_iter().flatten().collect(),
        decomposition: Some(d),
    })
}

/// Runs `heuristic_iterations` outer iterations of the heuristic, then
/// warmstarts the centralized solver from the mapped solution.
pub fn run_warmstart(
    network: &Network,
    od: &OdMatrix,
    partition: &Partition,
    heuristic_iterations: usize,
    config: &HeuristicConfig,
) -> Result<WarmstartOutcome> {
    let heuristic_config = HeuristicConfig {
        outer_max_iterations: heuristic_iterations,
        ..config.clone()
    };
    let start = Instant::now();
    let heuristic = run_heuristic(network, od, partition, &heuristic_config)?;
    let heuristic_seconds = start.elapsed().as_secs_f64();
    let t = Instant::now();
    let solved = solve(network, od, Some(&heuristic.solution), &config.solver)?;
    let centralized_seconds = t.elapsed().as_secs_f64();
    let mut trace = heuristic.trace.clone();
    trace.extend(records(Phase::Centralized, &solved.trace, heuristic_seconds));
    Ok(WarmstartOutcome {
        solution: solved.solution,
        trace,
        heuristic,
        convergence: solved.trace,
        heuristic_seconds,
        centralized_seconds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{CostFunction, Link};

    /// Two 3x3 grids joined by a two-way bridge; zones 0..4 sit in the left
    /// grid and 4..8 in the right one, with demand mostly inside each side.
    fn twin_grids() -> (Network, OdMatrix, Partition) {
        let mut links = Vec::new();
        // zones first: left corners 0..4 then right corners 4..8
        let left = [0, 8, 1, 9, 10, 11, 2, 12, 3];
        let right = [4, 13, 5, 14, 15, 16, 6, 17, 7];
        for grid in [left, right] {
            for r in 0..3 {
                for c in 0..3 {
                    let v = grid[r * 3 + c];
                    if c < 2 {
                        let w = grid[r * 3 + c + 1];
                        links.push(Link::physical(v, w, CostFunction::bpr(2.0, 40.0)));
                        links.push(Link::physical(w, v, CostFunction::bpr(2.0, 40.0)));
                    }
                    if r < 2 {
                        let w = grid[(r + 1) * 3 + c];
                        links.push(Link::physical(v, w, CostFunction::bpr(2.0, 40.0)));
                        links.push(Link::physical(w, v, CostFunction::bpr(2.0, 40.0)));
                    }
                }
            }
        }
        links.push(Link::physical(9 + 2, 13 + 1, CostFunction::bpr(1.0, 500.0)));
        links.push(Link::physical(13 + 1, 9 + 2, CostFunction::bpr(1.0, 500.0)));
        let net = Network::new(18, 8, 0, links).unwrap();
        let mut entries = Vec::new();
        for o in 0..8 {
            for d in 0..8 {
                if o != d {
                    let same = (o < 4) == (d < 4);
                    entries.push((o, d, if same { 30.0 } else { 2.0 }));
                }
            }
        }
        let od = OdMatrix::from_entries(8, entries).unwrap();
        let assignment = (0..18)
            .map(|v| usize::from(right.contains(&v)))
            .collect();
        (net, od, Partition::new(assignment).unwrap())
    }

    #[test]
    fn heuristic_trace_and_timing() {
        let (net, od, part) = twin_grids();
        let config = HeuristicConfig {
            outer_max_iterations: 4,
            full_gap_threshold: 0.0,
            ..HeuristicConfig::default()
        };
        let out = run_heuristic(&net, &od, &part, &config).unwrap();
        assert_eq!(out.trace.len(), 4);
        let min = out.trace.iter().map(|r| r.relative_gap).fold(f64::INFINITY, f64::min);
        assert_eq!(out.best_gap, min);
        let again = full_gap(&net, &od, &out.solution).unwrap();
        assert_eq!(again, out.best_gap);
        assert!(out.timing.measured_seconds() <= out.timing.wall_seconds);
        out.solution.check_feasible(&od, 1e-9).unwrap();
    }

    #[test]
    fn single_subnet_matches_centralized() {
        let (net, od, _) = twin_grids();
        let config = HeuristicConfig::default();
        let h = run_heuristic(&net, &od, &Partition::single(18), &config).unwrap();
        let c = run_centralized(&net, &od, &config.solver).unwrap();
        let strip = |t: &[TraceRecord]| t.iter().map(|r| (r.iteration, r.relative_gap, r.tstt)).collect::<Vec<_>>();
        assert_eq!(strip(&h.trace), strip(&c.trace));
    }

    #[test]
    fn warmstart_reaches_the_centralized_flows() {
        let (net, od, part) = twin_grids();
        let config = HeuristicConfig {
            solver: SolverConfig::with_target(1e-9, 2000),
            ..HeuristicConfig::default()
        };
        let warm = run_warmstart(&net, &od, &part, 1, &config).unwrap();
        assert!(warm.trace.iter().any(|r| r.phase == Phase::Heuristic));
        assert!(warm.trace.last().unwrap().relative_gap <= 1e-9);
        let cold = run_centralized(&net, &od, &config.solver).unwrap();
        for (a, b) in warm.solution.link_flows.iter().zip(&cold.solution.link_flows) {
            assert!((a - b).abs() <= 1e-4 * b.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let (net, od, part) = twin_grids();
        let run = |workers| {
            let config = HeuristicConfig {
                outer_max_iterations: 3,
                worker_count: workers,
                ..HeuristicConfig::default()
            };
            run_heuristic(&net, &od, &part, &config).unwrap()
        };
        let one = run(1);
        for workers in [2, 4] {
            let other = run(workers);
            assert_eq!(one.subnet_solutions, other.subnet_solutions);
            assert_eq!(one.solution.link_flows, other.solution.link_flows);
        }
    }

    #[test]
    fn skipped_gap_is_nan_and_keeps_the_last_iterate() {
        let (net, od, part) = twin_grids();
        let config = HeuristicConfig {
            outer_max_iterations: 2,
            skip_full_gap: true,
            ..HeuristicConfig::default()
        };
        let out = run_heuristic(&net, &od, &part, &config).unwrap();
        assert_eq!(out.trace.len(), 2);
        assert!(out.trace.iter().all(|r| r.relative_gap.is_nan()));
        assert_eq!(out.best_iteration, 2);
    }

    #[test]
    fn zero_workers_is_rejected() {
        let (net, od, part) = twin_grids();
        let config = HeuristicConfig {
            worker_count: 0,
            ..HeuristicConfig::default()
        };
        assert!(matches!(run_heuristic(&net, &od, &part, &config), Err(Error::Validation(_))));
    }
}
