//! Readers and writers for TNTP instance files and the solver's own
//! flow, partition and log files.
//!
//! Node ids are 1-based labels in every file and dense 0-based indices in
//! memory. Every writer goes through a temporary file that is renamed into
//! place, so a failed run never leaves half a file behind.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::demand::OdMatrix;
use crate::driver::{Phase, TimingSplit, TraceRecord};
use crate::equilibrium::TraceRow;
use crate::error::{Error, Result};
use crate::network::{CostFunction, Link, LinkAttributes, Network, DEFAULT_ALPHA, DEFAULT_BETA};
use crate::partition::Partition;

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Splits `<KEY> value` metadata from the body. Returns the headers with
/// their line numbers and the 1-based line where the body starts.
fn metadata(text: &str) -> (HashMap<String, (String, usize)>, usize) {
    let mut headers = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('~') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('<') {
            if let Some((key, value)) = rest.split_once('>') {
                let key = key.trim().to_ascii_uppercase();
                if key == "END OF METADATA" {
                    return (headers, i + 2);
                }
                headers.insert(key, (value.trim().to_string(), i + 1));
                continue;
            }
        }
        return (headers, i + 1);
    }
    (headers, text.lines().count() + 1)
}

fn header_count(
    headers: &HashMap<String, (String, usize)>,
    key: &str,
    path: &Path,
    body_line: usize,
) -> Result<usize> {
    let (value, line) = headers
        .get(key)
        .ok_or_else(|| parse_error(path, body_line, format!("missing <{key}> header")))?;
    value
        .parse::<usize>()
        .map_err(|_| parse_error(path, *line, format!("<{key}> must be a count, got {value:?}")))
}

/// Body lines with comments, blanks and the trailing `;` removed.
fn body_lines(text: &str, start: usize) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .skip(start.saturating_sub(1))
        .map(|(i, l)| (i + 1, l.split('~').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
}

pub fn parse_network(path: impl AsRef<Path>) -> Result<Network> {
    let path = path.as_ref();
    network_from_str(&read(path)?, path)
}

/// Parses network file text; `source` only labels error messages.
pub fn network_from_str(text: &str, source: &Path) -> Result<Network> {
    let (headers, body) = metadata(text);
    let zones = header_count(&headers, "NUMBER OF ZONES", source, body)?;
    let nodes = header_count(&headers, "NUMBER OF NODES", source, body)?;
    let first_thru = header_count(&headers, "FIRST THRU NODE", source, body)?;
    let declared = header_count(&headers, "NUMBER OF LINKS", source, body)?;
    if zones > nodes {
        return Err(parse_error(source, body, format!("{zones} zones but {nodes} nodes")));
    }
    let ftn = first_thru.saturating_sub(1);
    if ftn > zones {
        return Err(Error::Validation(format!(
            "{}: first through node {first_thru} lies past the {zones} zones; \
             non-zone nodes that block through traffic are not supported",
            source.display()
        )));
    }

    let mut links = Vec::new();
    let mut seen = HashSet::new();
    for (line, content) in body_lines(text, body) {
        let content = content.trim_end_matches(';').trim();
        let fields: Vec<&str> = content.split_whitespace().collect();
        if fields.len() < 5 {
            return Err(parse_error(source, line, format!("link record needs at least 5 columns, got {}", fields.len())));
        }
        let num = |i: usize, name: &str| -> Result<f64> {
            fields[i]
                .parse::<f64>()
                .map_err(|_| parse_error(source, line, format!("{name} is not a number: {:?}", fields[i])))
        };
        let opt = |i: usize, name: &str, default: f64| -> Result<f64> {
            if i < fields.len() {
                num(i, name)
            } else {
                Ok(default)
            }
        };
        let node = |i: usize, name: &str| -> Result<usize> {
            let id = fields[i]
                .parse::<usize>()
                .map_err(|_| parse_error(source, line, format!("{name} is not a node id: {:?}", fields[i])))?;
            if id == 0 || id > nodes {
                return Err(parse_error(source, line, format!("{name} {id} outside 1..={nodes}")));
            }
            Ok(id - 1)
        };
        let (tail, head) = (node(0, "init node")?, node(1, "term node")?);
        if !seen.insert((tail, head)) {
            return Err(parse_error(source, line, format!("duplicate link ({}, {})", tail + 1, head + 1)));
        }
        let capacity = num(2, "capacity")?;
        if !(capacity > 0.0) {
            return Err(Error::Validation(format!(
                "{}:{line}: link ({}, {}) has capacity {capacity}; capacities must be positive",
                source.display(),
                tail + 1,
                head + 1
            )));
        }
        let link_type = opt(9, "link type", 0.0)?;
        links.push(Link {
            tail,
            head,
            cost: CostFunction::Bpr {
                free_flow_time: num(4, "free-flow time")?,
                capacity,
                alpha: opt(5, "B", DEFAULT_ALPHA)?,
                beta: opt(6, "power", DEFAULT_BETA)?,
            },
            kind: crate::network::LinkKind::Physical,
            attributes: LinkAttributes {
                length: num(3, "length")?,
                speed: opt(7, "speed", 0.0)?,
                toll: opt(8, "toll", 0.0)?,
                link_type: link_type as i64,
            },
        });
    }
    if links.len() != declared {
        return Err(parse_error(
            source,
            body,
            format!("<NUMBER OF LINKS> says {declared} but the file has {} link records", links.len()),
        ));
    }
    Network::new(nodes, zones, ftn, links).map_err(|e| match e {
        Error::Structural(m) => parse_error(source, body, m),
        other => other,
    })
}

pub fn network_to_string(network: &Network) -> Result<String> {
    let mut s = String::new();
    let _ = writeln!(s, "<NUMBER OF ZONES> {}", network.zone_count());
    let _ = writeln!(s, "<NUMBER OF NODES> {}", network.node_count());
    let _ = writeln!(s, "<FIRST THRU NODE> {}", network.first_thru_node() + 1);
    let _ = writeln!(s, "<NUMBER OF LINKS> {}", network.link_count());
    s.push_str("<END OF METADATA>\n\n\n");
    s.push_str("~ \tinit_node\tterm_node\tcapacity\tlength\tfree_flow_time\tb\tpower\tspeed\ttoll\tlink_type\t;\n");
    for (id, link) in network.links().iter().enumerate() {
        let CostFunction::Bpr {
            free_flow_time,
            capacity,
            alpha,
            beta,
        } = link.cost
        else {
            return Err(Error::Unsupported(format!(
                "link {} has no BPR function and cannot be written as TNTP",
                network.describe_link(id)
            )));
        };
        let a = &link.attributes;
        let _ = writeln!(
            s,
            "\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t;",
            network.label(link.tail),
            network.label(link.head),
            capacity,
            a.length,
            free_flow_time,
            alpha,
            beta,
            a.speed,
            a.toll,
            a.link_type
        );
    }
    Ok(s)
}

pub fn write_network(network: &Network, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &network_to_string(network)?)
}

pub fn parse_trips(path: impl AsRef<Path>, network: &Network) -> Result<OdMatrix> {
    let path = path.as_ref();
    trips_from_str(&read(path)?, path, network)
}

pub fn trips_from_str(text: &str, source: &Path, network: &Network) -> Result<OdMatrix> {
    let (headers, body) = metadata(text);
    if let Some((value, line)) = headers.get("NUMBER OF ZONES") {
        let zones: usize = value
            .parse()
            .map_err(|_| parse_error(source, *line, format!("<NUMBER OF ZONES> must be a count, got {value:?}")))?;
        if zones > network.zone_count() {
            return Err(Error::Validation(format!(
                "{}: trips file has {zones} zones, network only {}",
                source.display(),
                network.zone_count()
            )));
        }
    }
    let nodes = network.node_count();
    let node = |token: &str, line: usize, what: &str| -> Result<usize> {
        let id: usize = token
            .trim()
            .parse()
            .map_err(|_| parse_error(source, line, format!("{what} is not a node id: {token:?}")))?;
        if id == 0 || id > nodes {
            return Err(parse_error(source, line, format!("{what} {id} outside 1..={nodes}")));
        }
        Ok(id - 1)
    };
    let mut origin = None;
    let mut entries = Vec::new();
    let mut total = 0.0;
    for (line, content) in body_lines(text, body) {
        if let Some(rest) = content.strip_prefix("Origin") {
            origin = Some(node(rest, line, "origin")?);
            continue;
        }
        let o = origin.ok_or_else(|| parse_error(source, line, "demand entry before any Origin line"))?;
        for piece in content.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (d, v) = piece
                .split_once(':')
                .ok_or_else(|| parse_error(source, line, format!("expected `destination : demand`, got {piece:?}")))?;
            let d = node(d, line, "destination")?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| parse_error(source, line, format!("demand is not a number: {:?}", v.trim())))?;
            if v < 0.0 {
                return Err(Error::Validation(format!(
                    "{}:{line}: negative demand {v} from {} to {}",
                    source.display(),
                    o + 1,
                    d + 1
                )));
            }
            total += v;
            entries.push((o, d, v));
        }
    }
    if let Some((value, _)) = headers.get("TOTAL OD FLOW") {
        if let Ok(declared) = value.parse::<f64>() {
            if (declared - total).abs() > 1e-6 * declared.abs().max(1.0) {
                log::warn!("{}: <TOTAL OD FLOW> {declared} but entries sum to {total}", source.display());
            }
        }
    }
    OdMatrix::from_entries(network.zone_count(), entries)
}

pub fn trips_to_string(od: &OdMatrix, network: &Network) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "<NUMBER OF ZONES> {}", network.zone_count());
    let _ = writeln!(s, "<TOTAL OD FLOW> {}", od.total_demand());
    s.push_str("<END OF METADATA>\n\n");
    for (origin, range) in od.origin_groups() {
        let _ = writeln!(s, "\nOrigin \t{}", network.label(origin));
        for (i, p) in od.pairs()[range].iter().enumerate() {
            let _ = write!(s, "{:>5} : {};", network.label(p.destination), p.demand);
            s.push(if i % 5 == 4 { '\n' } else { '\t' });
        }
        s.push('\n');
    }
    s
}

pub fn write_trips(od: &OdMatrix, network: &Network, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &trips_to_string(od, network))
}

/// Tab-separated `tail head flow cost`, one line per link.
pub fn write_flows(network: &Network, flows: &[f64], costs: &[f64], path: impl AsRef<Path>) -> Result<()> {
    network.check_flow_vector(flows)?;
    network.check_flow_vector(costs)?;
    let mut s = String::new();
    for (l, link) in network.links().iter().enumerate() {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{}",
            network.label(link.tail),
            network.label(link.head),
            flows[l],
            costs[l]
        );
    }
    write_atomic(path.as_ref(), &s)
}

/// Reads a `tail head flow [...]` file into a per-link vector. Lines that
/// do not start with a number (column headers) are skipped; links missing
/// from the file get zero flow.
pub fn read_flows(path: impl AsRef<Path>, network: &Network) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let text = read(path)?;
    let labels = network.label_index();
    let mut flows = vec![0.0; network.link_count()];
    let mut filled = vec![false; network.link_count()];
    for (line, content) in body_lines(&text, 1) {
        let fields: Vec<&str> = content.trim_end_matches(';').split_whitespace().collect();
        if fields.first().map_or(true, |f| f.parse::<f64>().is_err()) {
            continue;
        }
        if fields.len() < 3 {
            return Err(parse_error(path, line, "flow record needs tail, head and flow"));
        }
        let node = |t: &str| -> Result<usize> {
            t.parse::<u64>()
                .ok()
                .and_then(|l| labels.get(&l).copied())
                .ok_or_else(|| parse_error(path, line, format!("unknown node {t:?}")))
        };
        let (tail, head) = (node(fields[0])?, node(fields[1])?);
        let flow: f64 = fields[2]
            .parse()
            .map_err(|_| parse_error(path, line, format!("flow is not a number: {:?}", fields[2])))?;
        let l = network
            .outgoing(tail)
            .iter()
            .copied()
            .find(|&l| network.link(l).head == head && !filled[l])
            .ok_or_else(|| parse_error(path, line, format!("no link ({}, {}) in the network", fields[0], fields[1])))?;
        flows[l] = flow;
        filled[l] = true;
    }
    let missing = filled.iter().filter(|f| !**f).count();
    if missing > 0 {
        log::warn!("{}: {missing} links have no flow record; using 0", path.display());
    }
    Ok(flows)
}

/// One `node subnet` line per membership; centroid copies repeat the node.
pub fn write_partition(partition: &Partition, network: &Network, path: impl AsRef<Path>) -> Result<()> {
    partition.check_covers(network)?;
    let mut s = String::new();
    for v in 0..network.node_count() {
        for &sub in partition.memberships(v) {
            let _ = writeln!(s, "{}\t{}", network.label(v), sub);
        }
    }
    write_atomic(path.as_ref(), &s)
}

pub fn read_partition(path: impl AsRef<Path>, network: &Network) -> Result<Partition> {
    let path = path.as_ref();
    let text = read(path)?;
    let labels = network.label_index();
    let mut memberships: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (line, content) in body_lines(&text, 1) {
        let fields: Vec<&str> = content.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(parse_error(path, line, "expected `node_id subnet_id`"));
        }
        let node = fields[0]
            .parse::<u64>()
            .ok()
            .and_then(|l| labels.get(&l).copied())
            .ok_or_else(|| parse_error(path, line, format!("unknown node {:?}", fields[0])))?;
        let subnet: usize = fields[1]
            .parse()
            .map_err(|_| parse_error(path, line, format!("subnet id is not a count: {:?}", fields[1])))?;
        memberships.entry(node).or_default().push(subnet);
    }
    if let Some(v) = (0..network.node_count()).find(|v| !memberships.contains_key(v)) {
        return Err(Error::Validation(format!(
            "{}: node {} has no subnet",
            path.display(),
            network.label(v)
        )));
    }
    let assignment = (0..network.node_count())
        .map(|v| *memberships[&v].iter().min().expect("non-empty"))
        .collect();
    let copies = memberships.into_iter().filter(|(_, s)| s.len() > 1).collect();
    Partition::with_copies(assignment, copies)
}

/// Convergence log row: `iteration,elapsed_seconds,relative_gap,tstt`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogRow {
    pub iteration: usize,
    pub elapsed_seconds: f64,
    pub relative_gap: f64,
    pub tstt: f64,
}

impl From<&TraceRow> for LogRow {
    fn from(r: &TraceRow) -> Self {
        LogRow {
            iteration: r.iteration,
            elapsed_seconds: r.elapsed_seconds,
            relative_gap: r.relative_gap,
            tstt: r.tstt,
        }
    }
}

const LOG_HEADER: &str = "iteration,elapsed_seconds,relative_gap,tstt";

pub fn write_convergence_log(rows: &[LogRow], path: impl AsRef<Path>) -> Result<()> {
    let mut s = String::from(LOG_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(s, "{},{},{},{}", r.iteration, r.elapsed_seconds, r.relative_gap, r.tstt);
    }
    write_atomic(path.as_ref(), &s)
}

fn csv_rows<'a>(text: &'a str, path: &Path, header: &str) -> Result<Vec<(usize, Vec<&'a str>)>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, h)) if h.trim() == header => {}
        _ => return Err(parse_error(path, 1, format!("expected header `{header}`"))),
    }
    let width = header.split(',').count();
    lines
        .map(|(i, l)| {
            let cells: Vec<&str> = l.split(',').map(str::trim).collect();
            if cells.len() != width {
                Err(parse_error(path, i + 1, format!("expected {width} columns, got {}", cells.len())))
            } else {
                Ok((i + 1, cells))
            }
        })
        .collect()
}

fn cell<T: std::str::FromStr>(path: &Path, line: usize, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| parse_error(path, line, format!("cannot parse {value:?}")))
}

pub fn read_convergence_log(path: impl AsRef<Path>) -> Result<Vec<LogRow>> {
    let path = path.as_ref();
    let text = read(path)?;
    csv_rows(&text, path, LOG_HEADER)?
        .into_iter()
        .map(|(line, c)| {
            Ok(LogRow {
                iteration: cell(path, line, c[0])?,
                elapsed_seconds: cell(path, line, c[1])?,
                relative_gap: cell(path, line, c[2])?,
                tstt: cell(path, line, c[3])?,
            })
        })
        .collect()
}

const TRACE_HEADER: &str = "phase,iteration,elapsed_seconds,relative_gap,tstt";

pub fn write_trace(records: &[TraceRecord], path: impl AsRef<Path>) -> Result<()> {
    let mut s = String::from(TRACE_HEADER);
    s.push('\n');
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.phase, r.iteration, r.elapsed_seconds, r.relative_gap, r.tstt
        );
    }
    write_atomic(path.as_ref(), &s)
}

pub fn read_trace(path: impl AsRef<Path>) -> Result<Vec<TraceRecord>> {
    let path = path.as_ref();
    let text = read(path)?;
    csv_rows(&text, path, TRACE_HEADER)?
        .into_iter()
        .map(|(line, c)| {
            Ok(TraceRecord {
                phase: c[0]
                    .parse::<Phase>()
                    .map_err(|m| parse_error(path, line, m))?,
                iteration: cell(path, line, c[1])?,
                elapsed_seconds: cell(path, line, c[2])?,
                relative_gap: cell(path, line, c[3])?,
                tstt: cell(path, line, c[4])?,
            })
        })
        .collect()
}

pub fn write_timing_split(split: &TimingSplit, path: impl AsRef<Path>) -> Result<()> {
    let mut s = String::from("category,seconds,fraction\n");
    for (name, seconds) in split.categories() {
        let fraction = if split.wall_seconds > 0.0 {
            seconds / split.wall_seconds
        } else {
            0.0
        };
        let _ = writeln!(s, "{name},{seconds},{fraction}");
    }
    let _ = writeln!(s, "wall,{},1", split.wall_seconds);
    write_atomic(path.as_ref(), &s)
}
