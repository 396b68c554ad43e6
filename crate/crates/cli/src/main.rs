//! `dstap`: static traffic assignment with network decomposition.
//!
//! Exit codes: 0 on success, 1 on invalid input or usage, 2 when the
//! instance is infeasible (demand between disconnected zones).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};

use dstap_core::driver::{run_centralized, run_heuristic, run_warmstart, HeuristicConfig};
use dstap_core::equilibrium::SolverConfig;
use dstap_core::partition::{fm_refine, partition_network, psi, Partitioner};
use dstap_core::tntp::{self, LogRow};
use dstap_core::{par, report, Error, Network, OdMatrix, Partition, Result};

#[derive(Parser, Debug)]
#[command(name = "dstap", version, about = "Static user-equilibrium traffic assignment with network decomposition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the full network with gradient projection.
    Solve(Shared),
    /// Split the network into two subnetworks.
    Partition(PartitionArgs),
    /// Improve a two-way partition with ψ-FM moves.
    Refine(RefineArgs),
    /// Run the decomposition heuristic.
    Heuristic(DecomposeArgs),
    /// Run the heuristic, then warmstart the full-network solver from it.
    Warmstart(DecomposeArgs),
    /// Compare solve and warmstart runs found in --out-dir.
    Report(ReportArgs),
}

#[derive(Args, Debug, Clone)]
struct Shared {
    #[arg(long)]
    net: PathBuf,
    #[arg(long)]
    trips: PathBuf,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Target relative gap.
    #[arg(long, default_value_t = 1e-4)]
    gap: f64,
    #[arg(long, default_value_t = 1000)]
    max_iters: usize,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Multiplies every OD demand.
    #[arg(long, default_value_t = 1.0)]
    demand_scale: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Method {
    Sdda,
    Spectral,
    SpectralUnit,
    Import,
}

#[derive(Args, Debug)]
struct PartitionArgs {
    #[command(flatten)]
    shared: Shared,
    #[arg(long, value_enum, default_value_t = Method::Sdda)]
    partitioner: Method,
    /// Partition to import when --partitioner import.
    #[arg(long)]
    partition_file: Option<PathBuf>,
    /// Reference link flows (tab-separated tail, head, flow).
    #[arg(long)]
    flows: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RefineArgs {
    #[command(flatten)]
    shared: Shared,
    #[arg(long)]
    partition_file: Option<PathBuf>,
    #[arg(long)]
    flows: Option<PathBuf>,
    /// Upper bound on accepted moves.
    #[arg(long, default_value_t = 10_000)]
    max_moves: usize,
}

#[derive(Args, Debug)]
struct DecomposeArgs {
    #[command(flatten)]
    shared: Shared,
    #[arg(long)]
    partition_file: Option<PathBuf>,
    /// Partitioner used when no --partition-file is given.
    #[arg(long, value_enum, default_value_t = Method::Sdda)]
    partitioner: Method,
    #[arg(long)]
    flows: Option<PathBuf>,
    /// Skip the full-network gap after each heuristic iteration.
    #[arg(long)]
    skip_full_gap: bool,
    /// Outer heuristic iterations (warmstart defaults to 1).
    #[arg(long)]
    heuristic_iters: Option<usize>,
    /// Gap each master and subnetwork solve stops at.
    #[arg(long, default_value_t = 0.05)]
    level_gap: f64,
}

#[derive(Args, Debug)]
struct ReportArgs {
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_infeasibility() { 2 } else { 1 })
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Solve(a) => solve(&a),
        Command::Partition(a) => partition(&a),
        Command::Refine(a) => refine(&a),
        Command::Heuristic(a) => decompose(&a, false),
        Command::Warmstart(a) => decompose(&a, true),
        Command::Report(a) => {
            let text = report::render(&report::collect(&a.out_dir)?);
            tntp::write_atomic(&a.out_dir.join("report.txt"), &text)?;
            print!("{text}");
            Ok(())
        }
    }
}

fn require_file(flag: &str, path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Validation(format!("{flag} {}: no such file", path.display())))
    }
}

impl Shared {
    /// Checks flags and input files, then loads the instance.
    fn load(&self, extra: &[(&str, Option<&PathBuf>)]) -> Result<(Network, OdMatrix)> {
        require_file("--net", &self.net)?;
        require_file("--trips", &self.trips)?;
        for (flag, path) in extra {
            if let Some(p) = path {
                require_file(flag, p)?;
            }
        }
        if !(self.demand_scale > 0.0 && self.demand_scale.is_finite()) {
            return Err(Error::Validation(format!(
                "--demand-scale must be positive, got {}",
                self.demand_scale
            )));
        }
        if self.workers == 0 {
            return Err(Error::Validation("--workers must be at least 1".into()));
        }
        self.solver().validate()?;
        fs::create_dir_all(&self.out_dir).map_err(|e| Error::Validation(format!("{}: {e}", self.out_dir.display())))?;
        let network = tntp::parse_network(&self.net)?;
        let od = tntp::parse_trips(&self.trips, &network)?.scaled(self.demand_scale)?;
        Ok((network, od))
    }

    fn solver(&self) -> SolverConfig {
        SolverConfig::with_target(self.gap, self.max_iters)
    }

    fn output(&self, command: &str, suffix: &str) -> PathBuf {
        self.out_dir.join(format!("{}_{suffix}", report::tag(command, self.demand_scale)))
    }
}

fn sha256(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::Validation(format!("{}: {e}", path.display())))?;
    Ok(Sha256::digest(&bytes).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    }))
}

/// Writes `<command>_x<scale>_manifest.txt` with everything needed to replay
/// the run.
fn write_manifest(shared: &Shared, command: &str, settings: &[(&str, String)], inputs: &[(&str, &Path)]) -> Result<()> {
    let mut s = String::new();
    let _ = writeln!(s, "command={command}");
    let _ = writeln!(s, "dstap_version={}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "parallel={}", par::is_parallel());
    for (k, v) in [
        ("gap", shared.gap.to_string()),
        ("max_iters", shared.max_iters.to_string()),
        ("workers", shared.workers.to_string()),
        ("seed", shared.seed.to_string()),
        ("demand_scale", shared.demand_scale.to_string()),
    ]
    .iter()
    .chain(settings)
    {
        let _ = writeln!(s, "{k}={v}");
    }
    for (k, p) in [("net", shared.net.as_path()), ("trips", shared.trips.as_path())].iter().chain(inputs) {
        let _ = writeln!(s, "{k}={}", p.display());
        let _ = writeln!(s, "{k}_sha256={}", sha256(p)?);
    }
    tntp::write_atomic(&shared.output(command, "manifest.txt"), &s)
}

fn write_flows(network: &Network, flows: &[f64], path: &Path) -> Result<()> {
    tntp::write_flows(network, flows, &network.link_costs(flows), path)
}

fn solve(a: &Shared) -> Result<()> {
    let (network, od) = a.load(&[])?;
    let solver = a.solver();
    let out = par::with_workers(a.workers, || run_centralized(&network, &od, &solver))??;
    write_flows(&network, &out.solution.link_flows, &a.output("solve", "flows.tsv"))?;
    let log: Vec<LogRow> = out.convergence.rows.iter().map(LogRow::from).collect();
    tntp::write_convergence_log(&log, a.output("solve", "convergence.csv"))?;
    tntp::write_trace(&out.trace, a.output("solve", "trace.csv"))?;
    write_manifest(a, "solve", &[], &[])?;
    let gap = out.convergence.final_gap().unwrap_or(f64::NAN);
    println!(
        "solve: {} iterations, relative gap {gap:.3e}, {:.3} s{}",
        out.convergence.iterations(),
        out.seconds,
        if out.convergence.converged { "" } else { " (target not reached)" }
    );
    Ok(())
}

fn load_flows(path: Option<&PathBuf>, network: &Network) -> Result<Option<Vec<f64>>> {
    path.map(|p| tntp::read_flows(p, network)).transpose()
}

fn make_partition(
    network: &Network,
    method: Method,
    file: Option<&PathBuf>,
    flows: Option<&[f64]>,
    seed: u64,
) -> Result<Partition> {
    let partitioner = match method {
        Method::Import => {
            let path = file.ok_or_else(|| Error::Validation("--partitioner import needs --partition-file".into()))?;
            return tntp::read_partition(path, network);
        }
        Method::Sdda => Partitioner::Sdda,
        Method::Spectral => Partitioner::Spectral,
        Method::SpectralUnit => Partitioner::SpectralUnit,
    };
    if method == Method::Spectral && flows.is_none() {
        return Err(Error::Validation(
            "--partitioner spectral weighs links by reference flows; pass --flows".into(),
        ));
    }
    let r = partition_network(network, partitioner, flows, seed)?;
    if !r.duplicated.is_empty() {
        log::info!("{} centroids duplicated across subnets", r.duplicated.len());
    }
    Ok(r.partition)
}

fn partition(a: &PartitionArgs) -> Result<()> {
    let s = &a.shared;
    let (network, od) = s.load(&[("--partition-file", a.partition_file.as_ref()), ("--flows", a.flows.as_ref())])?;
    let flows = load_flows(a.flows.as_ref(), &network)?;
    let p = make_partition(&network, a.partitioner, a.partition_file.as_ref(), flows.as_deref(), s.seed)?;
    tntp::write_partition(&p, &network, s.output("partition", "partition.tsv"))?;
    if let Some(x) = &flows {
        let stats = psi(&network, &od, x, &p)?;
        report::write_partition_stats(&stats, s.output("partition", "stats.csv"))?;
        print!("{stats}");
    }
    let mut inputs: Vec<(&str, &Path)> = Vec::new();
    if let Some(f) = &a.flows {
        inputs.push(("flows", f));
    }
    if let Some(f) = &a.partition_file {
        inputs.push(("partition_file", f));
    }
    write_manifest(s, "partition", &[("partitioner", format!("{:?}", a.partitioner).to_lowercase())], &inputs)?;
    println!(
        "partition: {} nodes, {} boundary nodes, {} cut links",
        PartitionSizes(&p.node_counts()),
        p.boundary_nodes(&network).len(),
        p.cut_links(&network).len()
    );
    Ok(())
}

struct PartitionSizes<'a>(&'a [usize]);

impl std::fmt::Display for PartitionSizes<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.0.iter().map(usize::to_string).collect();
        f.write_str(&parts.join(":"))
    }
}

fn refine(a: &RefineArgs) -> Result<()> {
    let s = &a.shared;
    let flows_path = a.flows.as_ref().ok_or_else(|| {
        Error::Validation("refine needs reference link flows (--flows) to evaluate ψ".into())
    })?;
    let part_path = a
        .partition_file
        .as_ref()
        .ok_or_else(|| Error::Validation("refine needs --partition-file".into()))?;
    let (network, od) = s.load(&[("--partition-file", Some(part_path)), ("--flows", Some(flows_path))])?;
    let flows = tntp::read_flows(flows_path, &network)?;
    let start = tntp::read_partition(part_path, &network)?;
    let out = fm_refine(&network, &od, &flows, &start, a.max_moves)?;
    tntp::write_partition(&out.partition, &network, s.output("refine", "partition.tsv"))?;
    let stats = psi(&network, &od, &flows, &out.partition)?;
    report::write_partition_stats(&stats, s.output("refine", "stats.csv"))?;
    let mut moves = String::from("node,from,to,delta_psi,psi_after\n");
    for m in &out.moves {
        let _ = writeln!(moves, "{},{},{},{},{}", network.label(m.node), m.from, m.to, m.delta_psi, m.psi_after);
    }
    tntp::write_atomic(&s.output("refine", "moves.csv"), &moves)?;
    write_manifest(
        s,
        "refine",
        &[("max_moves", a.max_moves.to_string())],
        &[("partition_file", part_path), ("flows", flows_path)],
    )?;
    println!(
        "refine: {} moves, psi {:.6} -> {:.6}",
        out.moves.len(),
        out.initial_psi,
        out.final_psi
    );
    Ok(())
}

fn decompose(a: &DecomposeArgs, warmstart: bool) -> Result<()> {
    let s = &a.shared;
    let command = if warmstart { "warmstart" } else { "heuristic" };
    let (network, od) = s.load(&[("--partition-file", a.partition_file.as_ref()), ("--flows", a.flows.as_ref())])?;
    let reference = load_flows(a.flows.as_ref(), &network)?;
    let method = if a.partition_file.is_some() { Method::Import } else { a.partitioner };
    let p = make_partition(&network, method, a.partition_file.as_ref(), reference.as_deref(), s.seed)?;
    let iterations = a.heuristic_iters.unwrap_or(if warmstart { 1 } else { 10 });
    let config = HeuristicConfig {
        outer_max_iterations: iterations,
        full_gap_threshold: if warmstart { 0.0 } else { s.gap },
        per_level_gap: a.level_gap,
        worker_count: s.workers,
        skip_full_gap: a.skip_full_gap,
        solver: s.solver(),
        ..HeuristicConfig::default()
    };
    config.validate()?;
    tntp::write_partition(&p, &network, s.output(command, "subnets.tsv"))?;

    let final_flows;
    if warmstart {
        let out = par::with_workers(s.workers, || run_warmstart(&network, &od, &p, iterations, &config))??;
        tntp::write_trace(&out.trace, s.output(command, "trace.csv"))?;
        tntp::write_timing_split(&out.heuristic.timing, s.output(command, "timing.csv"))?;
        println!(
            "warmstart: heuristic {:.3} s (gap {:.3e}), centralized {:.3} s to gap {:.3e}",
            out.heuristic_seconds,
            out.heuristic.best_gap,
            out.centralized_seconds,
            out.convergence.final_gap().unwrap_or(f64::NAN)
        );
        final_flows = out.solution.link_flows;
    } else {
        let out = par::with_workers(s.workers, || run_heuristic(&network, &od, &p, &config))??;
        tntp::write_trace(&out.trace, s.output(command, "trace.csv"))?;
        tntp::write_timing_split(&out.timing, s.output(command, "timing.csv"))?;
        println!(
            "heuristic: best gap {:.3e} at iteration {}, {:.3} s",
            out.best_gap, out.best_iteration, out.timing.wall_seconds
        );
        final_flows = out.solution.link_flows;
    }
    write_flows(&network, &final_flows, &s.output(command, "flows.tsv"))?;
    // ψ needs equilibrium flows; without --flows the run's own final flows stand in
    let stats = psi(&network, &od, reference.as_deref().unwrap_or(&final_flows), &p)?;
    report::write_partition_stats(&stats, s.output(command, "partition.csv"))?;

    let mut settings = vec![
        ("heuristic_iters", iterations.to_string()),
        ("level_gap", a.level_gap.to_string()),
        ("skip_full_gap", a.skip_full_gap.to_string()),
        ("partitioner", format!("{method:?}").to_lowercase()),
    ];
    settings.push(("psi_source", if reference.is_some() { "flows" } else { "final" }.to_string()));
    let mut inputs: Vec<(&str, &Path)> = Vec::new();
    if let Some(f) = &a.partition_file {
        inputs.push(("partition_file", f));
    }
    if let Some(f) = &a.flows {
        inputs.push(("flows", f));
    }
    write_manifest(s, command, &settings, &inputs)
}
