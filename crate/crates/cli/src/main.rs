//! `apsearch`: file-based runner for Apollonian network search experiments.
//!
//! Exit codes: 0 success, 2 usage or input error, 3 capacity exceeded,
//! 4 internal contract violation.

mod manifest;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use apollonian_search::format::{write_summary, write_trace};
use apollonian_search::search::{
    find_first_lobe_peak, find_peak, full_horizon, restricted_horizon, Channel, InitSet,
    MarkedSet, SearchConfig, SummaryRow, SweepConfig,
};
use apollonian_search::spectral::{invariant_checks, InvariantCheck, SpectralReport};
use apollonian_search::{
    build_apollonian, build_random_apollonian, dense_step_matrix, eigen_analysis, evolve_and_trace,
    sweep, ApollonianGraph, ArcSpace, CoinSpec, Error, NodeId, DEFAULT_SEED,
};
use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use serde::Serialize;
use serde_json::json;

use crate::manifest::Manifest;

const DEFAULT_GROUP_SAMPLE: usize = 200;

#[derive(Parser, Debug)]
#[command(name = "apsearch", version, about = "Quantum-walk spatial search on Apollonian networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a network and write its graph document.
    Generate(GenerateArgs),
    /// Trace the marked-node probability of one search run.
    Search(SearchArgs),
    /// Average search traces over many marked nodes, grouped by generation.
    Sweep(SweepArgs),
    /// Dense spectral analysis of the unmarked step operator.
    Spectrum(SpectrumArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum KindArg {
    Apollonian,
    Random,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum InitArg {
    Full,
    Last,
}

impl From<InitArg> for InitSet {
    fn from(a: InitArg) -> Self {
        match a {
            InitArg::Full => InitSet::Full,
            InitArg::Last => InitSet::LastGeneration,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MarkedSetArg {
    All,
    Last,
}

#[derive(clap::Args, Debug)]
struct GenerateArgs {
    #[arg(long, value_enum, default_value = "apollonian")]
    kind: KindArg,
    /// Generation K of a deterministic network.
    #[arg(long, required_if_eq("kind", "apollonian"))]
    generation: Option<u32>,
    /// Rounds of a random network.
    #[arg(long, required_if_eq("kind", "random"))]
    iterations: Option<u32>,
    /// Faces subdivided per round of a random network.
    #[arg(long, required_if_eq("kind", "random"))]
    subdivisions: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args, Debug)]
struct SearchArgs {
    /// Graph document to search on.
    #[arg(long, conflicts_with = "generation", required_unless_present = "generation")]
    graph: Option<PathBuf>,
    /// Build the deterministic network of this generation instead.
    #[arg(long)]
    generation: Option<u32>,
    #[arg(long)]
    marked: u32,
    #[arg(long, value_enum, default_value = "full")]
    init: InitArg,
    /// Number of steps; defaults to ceil(4 sqrt(N_last)) when the marked
    /// node is in the last generation, ceil(6 sqrt(N)) otherwise.
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long, default_value_t = 1)]
    record_every: usize,
    #[arg(long)]
    trace: PathBuf,
}

#[derive(clap::Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    generation: u32,
    #[arg(long, value_enum, default_value = "last")]
    marked_set: MarkedSetArg,
    #[arg(long, value_enum, default_value = "full")]
    init: InitArg,
    #[arg(long)]
    group_by_generation: bool,
    /// Seeded sample size per group. Whole-network sweeps above generation
    /// 6 default to 200; everything else defaults to every member.
    #[arg(long)]
    sample: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Defaults to ceil(4 sqrt(N_last)) for the last-generation set and
    /// ceil(6 sqrt(N)) for all nodes.
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long, default_value_t = 1)]
    record_every: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args, Debug)]
struct SpectrumArgs {
    #[arg(long)]
    generation: u32,
    /// Restrict the invariant-subspace checks to this node (default: all nodes).
    #[arg(long)]
    marked: Option<u32>,
    /// Random closure probes per node.
    #[arg(long, default_value_t = 10)]
    probes: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug)]
enum CliError {
    Core(Error),
    Io(PathBuf, std::io::Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(Error::Parameter(_) | Error::Format { .. }) => 2,
            CliError::Core(Error::Capacity(_)) => 3,
            CliError::Core(Error::Contract(_) | Error::DegenerateProjection(_)) => 4,
            CliError::Io(..) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(p, e) => write!(f, "{}: {e}", p.display()),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(dir.to_path_buf(), e))?;
    }
    fs::write(path, contents).map_err(|e| CliError::Io(path.to_path_buf(), e))
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let started = Instant::now();
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(a, started),
        Command::Search(a) => cmd_search(a, started),
        Command::Sweep(a) => cmd_sweep(a, started),
        Command::Spectrum(a) => cmd_spectrum(a, started),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("apsearch: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn cmd_generate(a: GenerateArgs, started: Instant) -> CliResult<()> {
    let (graph, params) = match a.kind {
        KindArg::Apollonian => {
            let k = a.generation.expect("clap enforces --generation");
            (build_apollonian(k)?, json!({ "kind": "apollonian", "generation": k }))
        }
        KindArg::Random => {
            let it = a.iterations.expect("clap enforces --iterations");
            let sub = a.subdivisions.expect("clap enforces --subdivisions");
            let seed = a.seed.unwrap_or(DEFAULT_SEED);
            (
                build_random_apollonian(it, sub, seed)?,
                json!({ "kind": "random_apollonian", "iterations": it, "subdivisions": sub }),
            )
        }
    };
    write_file(&a.out, &graph.serialize())?;
    let manifest = Manifest::new("generate", params, graph.seed(), vec![a.out.clone()], started);
    write_file(&sidecar(&a.out), &manifest.to_json())
}

fn load_graph(path: &Path) -> CliResult<ApollonianGraph> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))?;
    Ok(ApollonianGraph::deserialize(&text)?)
}

fn cmd_search(a: SearchArgs, started: Instant) -> CliResult<()> {
    let graph = match (&a.graph, a.generation) {
        (Some(p), _) => load_graph(p)?,
        (None, Some(k)) => build_apollonian(k)?,
        (None, None) => unreachable!("clap requires --graph or --generation"),
    };
    let arcs = ArcSpace::build(graph);
    let marked = NodeId(a.marked);
    if !arcs.graph().contains(marked) {
        return Err(Error::Parameter(format!(
            "unknown node {}: valid ids are 0..={}",
            a.marked,
            arcs.node_count() - 1
        ))
        .into());
    }
    let steps = a.steps.unwrap_or_else(|| {
        if arcs.is_last_generation(marked) {
            restricted_horizon(arcs.last_generation_nodes().len())
        } else {
            full_horizon(arcs.node_count())
        }
    });
    let config = SearchConfig::new(marked, a.init.into(), steps).record_every(a.record_every);
    let trace = evolve_and_trace::<f64>(&arcs, &config)?;
    write_file(&a.trace, &write_trace(&trace))?;
    let params = json!({
        "graph": a.graph.as_ref().map(|p| p.display().to_string()),
        "generation": arcs.graph().generation(),
        "marked": a.marked,
        "init": InitSet::from(a.init),
        "steps": steps,
        "record_every": a.record_every,
    });
    let manifest = Manifest::new("search", params, None, vec![a.trace.clone()], started);
    write_file(&sidecar(&a.trace), &manifest.to_json())
}

#[derive(Serialize)]
struct PeakLine {
    group: Option<u32>,
    members: usize,
    population: usize,
    raw: (usize, f64),
    raw_first_lobe: (usize, f64),
    conditional: Option<(usize, f64)>,
}

fn cmd_sweep(a: SweepArgs, started: Instant) -> CliResult<()> {
    let graph = build_apollonian(a.generation)?;
    let n_last = graph.last_generation().len();
    let n = graph.node_count();
    let arcs = ArcSpace::build(graph);
    let marked_set = match a.marked_set {
        MarkedSetArg::All => MarkedSet::All,
        MarkedSetArg::Last => MarkedSet::LastGeneration,
    };
    let steps = a.steps.unwrap_or(match a.marked_set {
        MarkedSetArg::Last => restricted_horizon(n_last),
        MarkedSetArg::All => full_horizon(n),
    });
    let seed = a.seed.unwrap_or(DEFAULT_SEED);
    let sample = a.sample.or(match a.marked_set {
        MarkedSetArg::All if a.generation > 6 => Some(DEFAULT_GROUP_SAMPLE),
        _ => None,
    });
    let mut config = SweepConfig::new(marked_set, a.init.into(), steps);
    config.record_every = a.record_every;
    config.group_by_generation = a.group_by_generation;
    config.sample_per_group = sample;
    config.seed = seed;
    let result = sweep::<f64>(&arcs, &config)?;

    let mut outputs = Vec::new();
    let mut peaks = Vec::new();
    let mut summary = Vec::new();
    for group in &result.groups {
        let name = match group.generation {
            Some(g) => format!("group_gen{g}.csv"),
            None => "all.csv".to_string(),
        };
        let path = a.out.join(name);
        write_file(&path, &write_trace(&group.trace))?;
        outputs.push(path);
        let raw = find_peak(&group.trace, Channel::Raw)?;
        let lobe = find_first_lobe_peak(&group.trace, Channel::Raw)?;
        // The conditional channel only means something when the marked
        // node lies inside the projected subspace.
        let last_only = group.members.iter().all(|&m| arcs.is_last_generation(m));
        let cond = last_only
            .then(|| find_peak(&group.trace, Channel::Conditional).ok())
            .flatten();
        peaks.push(PeakLine {
            group: group.generation,
            members: group.members.len(),
            population: group.population,
            raw: (raw.step, raw.probability),
            raw_first_lobe: (lobe.step, lobe.probability),
            conditional: cond.map(|p| (p.step, p.probability)),
        });
        if cond.is_some() {
            summary.push(SummaryRow::from_group(a.generation, n_last, group)?);
        }
    }
    let peaks_path = a.out.join("peaks.json");
    write_file(&peaks_path, &(serde_json::to_string_pretty(&peaks).expect("peaks serialize") + "\n"))?;
    outputs.push(peaks_path);
    if !summary.is_empty() {
        let path = a.out.join("summary.csv");
        write_file(&path, &write_summary(&summary))?;
        outputs.push(path);
    }

    let sampled: Vec<_> = result
        .groups
        .iter()
        .filter(|g| g.sampled())
        .map(|g| json!({ "group": g.generation, "members": g.members }))
        .collect();
    let skipped: Vec<_> = result
        .skipped
        .iter()
        .map(|s| json!({ "group": s.generation, "reason": s.reason }))
        .collect();
    let params = json!({
        "generation": a.generation,
        "marked_set": format!("{:?}", a.marked_set).to_lowercase(),
        "init": InitSet::from(a.init),
        "group_by_generation": a.group_by_generation,
        "sample": sample,
        "horizon": steps,
        "record_every": a.record_every,
        "sampled_groups": sampled,
        "skipped_groups": skipped,
    });
    let manifest = Manifest::new("sweep", params, Some(seed), outputs, started);
    write_file(&a.out.join("manifest.json"), &manifest.to_json())
}

/// Where the last-generation start sits relative to the unmarked
/// operator's eigenspaces. Reported only; nothing is asserted about it.
#[derive(Serialize)]
struct RestrictedStart {
    fixed_residual: f64,
    plus_one_weight: f64,
    x_prime_residual: f64,
}

#[derive(Serialize)]
struct SpectrumDocument<'a> {
    generation: u32,
    spectrum: &'a SpectralReport,
    invariant_checks: Vec<InvariantCheck>,
    restricted_start: RestrictedStart,
}

fn cmd_spectrum(a: SpectrumArgs, started: Instant) -> CliResult<()> {
    let graph = build_apollonian(a.generation)?;
    let arcs = ArcSpace::build(graph);
    let nodes: Vec<NodeId> = match a.marked {
        Some(m) => {
            let m = NodeId(m);
            if !arcs.graph().contains(m) {
                return Err(Error::Parameter(format!(
                    "unknown node {m}: valid ids are 0..={}",
                    arcs.node_count() - 1
                ))
                .into());
            }
            vec![m]
        }
        None => arcs.graph().nodes().collect(),
    };
    let seed = a.seed.unwrap_or(DEFAULT_SEED);
    let u = dense_step_matrix(&arcs, CoinSpec::unmarked())?;
    let start = apollonian_search::walk::uniform_state::<f64>(&arcs).into_amplitudes();
    let analysis = eigen_analysis(&u, &start)?.with_overlaps(&arcs, &nodes)?;
    let invariant_checks = invariant_checks(&analysis, &arcs, &nodes, a.probes, seed)?;
    let r = DVector::from_vec(InitSet::LastGeneration.state::<f64>(&arcs)?.into_amplitudes());
    let restricted_start = RestrictedStart {
        fixed_residual: (&u * &r - &r).norm(),
        plus_one_weight: (analysis.plus_one_basis().transpose() * &r).norm_squared(),
        x_prime_residual: analysis.x_prime_residual(&r),
    };
    let doc = SpectrumDocument {
        generation: a.generation,
        spectrum: analysis.report(),
        invariant_checks,
        restricted_start,
    };
    write_file(&a.out, &(serde_json::to_string_pretty(&doc).expect("report serializes") + "\n"))?;
    let params = json!({
        "generation": a.generation,
        "marked": a.marked,
        "probes": a.probes,
    });
    let manifest = Manifest::new("spectrum", params, Some(seed), vec![a.out.clone()], started);
    write_file(&sidecar(&a.out), &manifest.to_json())
}
