//! `gproc`: batch harness around the graph processor compiler and simulator.
//!
//! Exit status: 0 ok, 1 other error, 2 parse, 3 compile, 4 capacity,
//! 5 timeout, 6 machine fault.

mod bench;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use gproc_core::compiler::{compile, CompileOptions};
use gproc_core::kernels::KernelError;
use gproc_core::pipeline::{self, GraphSource, PipelineError, RunConfig};
use gproc_core::sim::ConfigError;
use gproc_core::{graph_stats, kernel_spec, random_graph, Graph, GraphStats, KernelKind, KernelParams, MachineConfig, MappingMode};

#[derive(Parser)]
#[command(name = "gproc", version, about = "Compile and simulate graph kernels on a NALE array")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compile, simulate and write results.csv / metrics.csv.
    Run(RunArgs),
    /// Compile only and write the loadable image directory.
    Compile(RunArgs),
    /// Run a kernel x graph x mapping matrix and emit one CSV table.
    Bench(BenchArgs),
    /// Print vertex/edge counts and average degree.
    Stats(StatsArgs),
    /// Write a seeded G(n, p) edge list.
    Gen(GenArgs),
}

#[derive(Args, Clone)]
struct GraphArgs {
    /// Edge-list file ("u v [w]" lines).
    #[arg(long, conflicts_with = "gen", required_unless_present = "gen")]
    graph: Option<PathBuf>,
    /// Generated graph: n,p or n,p,seed.
    #[arg(long)]
    gen: Option<String>,
    /// Seed for --gen when it has no third field.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    directed: bool,
}

impl GraphArgs {
    fn source(&self) -> Result<GraphSource> {
        if let Some(path) = &self.graph {
            return Ok(GraphSource::File { path: path.clone(), directed: self.directed });
        }
        let spec = self.gen.as_deref().unwrap_or_default();
        let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
        if parts.len() < 2 || parts.len() > 3 {
            return Err(BadArg(format!("--gen expects n,p[,seed], got {spec:?}")).into());
        }
        let n = parts[0].parse().with_context(|| format!("bad n in --gen {spec:?}"))?;
        let p = parts[1].parse().with_context(|| format!("bad p in --gen {spec:?}"))?;
        let seed = match parts.get(2) {
            Some(s) => s.parse().with_context(|| format!("bad seed in --gen {spec:?}"))?,
            None => self.seed,
        };
        Ok(GraphSource::Gen { n, p, seed, directed: self.directed })
    }
}

#[derive(Args, Clone)]
struct RunArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[arg(long)]
    kernel: KernelKind,
    /// Source vertex label (default: first vertex of the input).
    #[arg(long)]
    source: Option<u64>,
    #[arg(long)]
    damping: Option<f64>,
    #[arg(long)]
    iterations: Option<u32>,
    #[arg(long, default_value = "cluster")]
    mode: MappingMode,
    /// Cluster count; ignored in node mode.
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Array size RxC; defaults to the smallest square that fits.
    #[arg(long)]
    dims: Option<String>,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, env = "GPROC_CONFIG")]
    machine_config: Option<PathBuf>,
    /// Event budget override.
    #[arg(long)]
    budget: Option<u64>,
    /// Output directory (run: results files, compile: image).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub(crate) struct BenchArgs {
    /// JSON matrix: kernels, graphs, mappings, params.
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long, env = "GPROC_CONFIG")]
    pub machine_config: Option<PathBuf>,
    #[arg(long)]
    pub budget: Option<u64>,
    /// CSV output path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    path: PathBuf,
    #[arg(long)]
    directed: bool,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    directed: bool,
    #[arg(long)]
    out: PathBuf,
}

/// Malformed argument value; exits like a parse error.
#[derive(Debug)]
struct BadArg(String);

impl std::fmt::Display for BadArg {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for BadArg {}

fn parse_dims(s: &str) -> Result<(usize, usize)> {
    let (r, c) = s.split_once(['x', 'X']).ok_or_else(|| BadArg(format!("--dims expects RxC, got {s:?}")))?;
    Ok((r.trim().parse()?, c.trim().parse()?))
}

pub(crate) fn square_dims(k: usize) -> (usize, usize) {
    let s = (1..).find(|s| s * s >= k).unwrap();
    (s, s)
}

pub(crate) fn machine_config(path: Option<&PathBuf>, budget: Option<u64>) -> Result<MachineConfig> {
    let mut cfg = match path {
        Some(p) => MachineConfig::load(p)?,
        None => MachineConfig::default(),
    };
    if let Some(b) = budget {
        cfg.event_budget = b;
    }
    Ok(cfg)
}

/// Maps a source label to its dense id; kernels that need a source default
/// to the first vertex.
pub(crate) fn resolve_source(kind: KernelKind, label: Option<u64>, g: &Graph) -> Result<Option<u32>> {
    let Some(label) = label else {
        return Ok(kind.needs_source().then_some(0));
    };
    match g.labels().iter().position(|&l| l == label) {
        Some(v) => Ok(Some(v as u32)),
        None => Err(PipelineError::Kernel(KernelError::SourceOutOfRange {
            vertex: label.min(u32::MAX as u64) as u32,
            vertices: g.vertex_count(),
        })
        .into()),
    }
}

/// Builds the run configuration against the loaded graph (source labels and
/// default dims depend on it).
fn run_config(a: &RunArgs, g: &Graph) -> Result<RunConfig> {
    let source = resolve_source(a.kernel, a.source, g)?;
    let k = match a.mode {
        MappingMode::Node => g.vertex_count(),
        MappingMode::Cluster => a.k,
    };
    let dims = match &a.dims {
        Some(d) => parse_dims(d)?,
        None => square_dims(k),
    };
    Ok(RunConfig {
        kernel: a.kernel,
        params: KernelParams { source, damping: a.damping, iterations: a.iterations },
        graph: a.graph.source()?,
        mode: a.mode,
        k,
        dims,
        epsilon: a.epsilon,
        machine: machine_config(a.machine_config.as_ref(), a.budget)?,
    })
}

fn cmd_run(a: &RunArgs) -> Result<()> {
    let src = a.graph.source()?;
    let g = src.load()?;
    let cfg = run_config(a, &g)?;
    let out = pipeline::run_on(&cfg, &g)?;
    match &a.out {
        Some(dir) => pipeline::write_outputs(dir, &cfg, &out)?,
        None => print!("{}", pipeline::results_csv(&out.output, &out.labels)),
    }
    eprintln!(
        "{} on {}: makespan {} events {} energy {:.1} ({} k={} {}x{})",
        cfg.kernel, cfg.graph, out.metrics.makespan, out.metrics.events, out.metrics.energy, cfg.mode, out.k, cfg.dims.0, cfg.dims.1
    );
    Ok(())
}

fn cmd_compile(a: &RunArgs) -> Result<()> {
    let dir = a.out.as_ref().ok_or_else(|| anyhow!("compile needs --out DIR"))?;
    let g = a.graph.source()?.load()?;
    let cfg = run_config(a, &g)?;
    let spec = kernel_spec(cfg.kernel, cfg.params, g.vertex_count()).map_err(PipelineError::from)?;
    let opts = CompileOptions { mode: cfg.mode, k: cfg.k, dims: cfg.dims, epsilon: cfg.epsilon };
    let app = compile(&spec, &g, &opts).map_err(PipelineError::from)?;
    app.write_dir(dir)?;
    eprintln!("wrote {} NALE programs to {}", app.programs.iter().flatten().count(), dir.display());
    Ok(())
}

/// Datasets whose published counts `stats` checks against.
const KNOWN: [(&str, u64, u64, &str); 3] = [
    ("CA", 1_965_206, 2_766_607, "1.41"),
    ("FB", 2_937_612, 41_919_708, "14.3"),
    ("LJ", 4_847_571, 85_702_475, "17.6"),
];

fn print_stats(s: &GraphStats) {
    println!("vertices {}", s.vertices);
    println!("edges {}", s.edges);
    println!("avg_degree {:.4}", s.avg_degree());
    for (name, v, e, shown) in KNOWN {
        if s.vertices == v {
            let decimals = shown.split('.').nth(1).map_or(0, |d| d.len() as u32);
            let ours = s.format_avg_degree(decimals);
            let verdict = if s.edges != e {
                format!("edge count differs from published {e}")
            } else if ours == shown {
                format!("matches published avg degree {shown}")
            } else {
                format!("exact avg degree {ours} differs from published {shown}")
            };
            println!("dataset {name}: {verdict}");
        }
    }
}

fn cmd_stats(a: &StatsArgs) -> Result<()> {
    let g = GraphSource::File { path: a.path.clone(), directed: a.directed }.load()?;
    print_stats(&graph_stats(&g).map_err(PipelineError::from)?);
    Ok(())
}

fn cmd_gen(a: &GenArgs) -> Result<()> {
    let g = random_graph(a.n, a.p, pipeline::GEN_WEIGHTS, a.seed, a.directed).map_err(PipelineError::from)?;
    fs::write(&a.out, g.to_edge_list()).with_context(|| format!("writing {}", a.out.display()))?;
    let isolated = (0..g.vertex_count() as u32).filter(|&v| g.degree(v) == 0).count();
    eprintln!("wrote {} edges on {} vertices to {}", g.logical_edge_count(), g.vertex_count(), a.out.display());
    if isolated > 0 {
        eprintln!("{isolated} isolated vertices have no line in the edge list");
    }
    Ok(())
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if let Some(p) = e.downcast_ref::<PipelineError>() {
        return p.exit_code() as u8;
    }
    if e.downcast_ref::<ConfigError>().is_some()
        || e.downcast_ref::<BadArg>().is_some()
        || e.downcast_ref::<serde_json::Error>().is_some()
        || e.downcast_ref::<std::num::ParseIntError>().is_some()
        || e.downcast_ref::<std::num::ParseFloatError>().is_some()
    {
        return 2;
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let r = match &cli.cmd {
        Cmd::Run(a) => cmd_run(a),
        Cmd::Compile(a) => cmd_compile(a),
        Cmd::Bench(a) => bench::cmd_bench(a),
        Cmd::Stats(a) => cmd_stats(a),
        Cmd::Gen(a) => cmd_gen(a),
    };
    match r {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let mut msg = e.to_string();
            for cause in e.chain().skip(1) {
                let c = cause.to_string();
                if !msg.contains(&c) {
                    msg = format!("{msg}: {c}");
                }
            }
            eprintln!("error: {msg}");
            ExitCode::from(exit_code(&e))
        }
    }
}
