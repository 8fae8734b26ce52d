//! End-to-end run: load a graph, compile a kernel onto the array, simulate,
//! and write the results and metrics files.

use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::compiler::{compile, CompileError, CompileOptions, MappingMode};
use crate::graph::{parse_edge_list, random_graph, Graph, GraphError, Weight};
use crate::kernels::{kernel_spec, KernelError, KernelKind, KernelOutput, KernelParams};
use crate::sim::{simulate, MachineConfig, Metrics, SimError};

/// Weights drawn by generated graphs.
pub const GEN_WEIGHTS: (Weight, Weight) = (1, 10);

#[derive(Debug, Clone, PartialEq)]
pub enum GraphSource {
    File { path: PathBuf, directed: bool },
    Gen { n: usize, p: f64, seed: u64, directed: bool },
}

impl GraphSource {
    pub fn load(&self) -> Result<Graph, PipelineError> {
        match self {
            GraphSource::File { path, directed } => {
                let text = fs::read_to_string(path).map_err(|e| PipelineError::Io { path: path.clone(), err: e })?;
                Ok(parse_edge_list(&text, *directed)?)
            }
            GraphSource::Gen { n, p, seed, directed } => Ok(random_graph(*n, *p, GEN_WEIGHTS, *seed, *directed)?),
        }
    }
}

impl fmt::Display for GraphSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphSource::File { path, .. } => write!(f, "{}", path.display()),
            GraphSource::Gen { n, p, seed, .. } => write!(f, "gen:{n},{p},{seed}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub kernel: KernelKind,
    pub params: KernelParams,
    pub graph: GraphSource,
    pub mode: MappingMode,
    /// Ignored in node mode.
    pub k: usize,
    pub dims: (usize, usize),
    pub epsilon: f64,
    pub machine: MachineConfig,
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("graph: {0}")]
    Graph(#[from] GraphError),
    #[error("graph: {}: {err}", .path.display())]
    Io { path: PathBuf, err: io::Error },
    #[error("kernel: {0}")]
    Kernel(#[from] KernelError),
    #[error("compiler: {0}")]
    Compile(#[from] CompileError),
    #[error("sim: {0}")]
    Sim(#[from] SimError),
    #[error("output: {}: {err}", .path.display())]
    Write { path: PathBuf, err: io::Error },
}

impl PipelineError {
    /// Process exit status: 2 parse, 3 compile, 4 capacity, 5 timeout, 6 fault, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Graph(_) | PipelineError::Io { .. } => 2,
            PipelineError::Compile(CompileError::Capacity { .. }) => 4,
            PipelineError::Compile(_) | PipelineError::Kernel(_) => 3,
            PipelineError::Sim(SimError::Timeout { .. }) => 5,
            PipelineError::Sim(SimError::Fault { .. }) => 6,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub output: KernelOutput,
    pub metrics: Metrics,
    /// Clusters actually used.
    pub k: usize,
    /// Input label of each dense vertex id.
    pub labels: Vec<u64>,
}

/// Compiles and simulates on an already loaded graph.
pub fn run_on(cfg: &RunConfig, g: &Graph) -> Result<RunOutput, PipelineError> {
    let spec = kernel_spec(cfg.kernel, cfg.params, g.vertex_count())?;
    let opts = CompileOptions { mode: cfg.mode, k: cfg.k, dims: cfg.dims, epsilon: cfg.epsilon };
    let app = compile(&spec, g, &opts)?;
    let (output, run) = simulate(&app, &cfg.machine)?;
    Ok(RunOutput { output, metrics: run.metrics, k: app.cluster_count(), labels: g.labels().to_vec() })
}

pub fn run(cfg: &RunConfig) -> Result<RunOutput, PipelineError> {
    run_on(cfg, &cfg.graph.load()?)
}

/// `vertex,value` rows with vertices named by `labels` (dense ids when
/// empty); scalar kernels write a single `value` row. Component labels are
/// vertex ids and get renamed the same way.
pub fn results_csv(out: &KernelOutput, labels: &[u64]) -> String {
    let name = |v: usize| labels.get(v).copied().unwrap_or(v as u64);
    let mut s = String::new();
    match out {
        KernelOutput::Count(c) => s.push_str(&format!("value\n{c}\n")),
        KernelOutput::Labels(l) => {
            s.push_str("vertex,value\n");
            for (v, &c) in l.iter().enumerate() {
                s.push_str(&format!("{},{}\n", name(v), name(c as usize)));
            }
        }
        _ => {
            s.push_str("vertex,value\n");
            for (v, val) in out.rows() {
                s.push_str(&format!("{},{val}\n", name(v.unwrap_or(0))));
            }
        }
    }
    s
}

pub const METRICS_KEYS: [&str; 6] = ["kernel", "graph", "mode", "k", "dims", "model"];

/// Header for [`metrics_row`].
pub fn metrics_header() -> String {
    let mut h: Vec<String> = METRICS_KEYS.iter().map(|s| s.to_string()).collect();
    h.extend(Metrics::csv_header());
    h.join(",")
}

/// One metrics row; `model` is `sim` or `ref`.
pub fn metrics_row(cfg: &RunConfig, k: usize, model: &str, m: &Metrics) -> String {
    let mut f = vec![
        cfg.kernel.name().to_string(),
        csv_field(&cfg.graph.to_string()),
        cfg.mode.to_string(),
        k.to_string(),
        format!("{}x{}", cfg.dims.0, cfg.dims.1),
        model.to_string(),
    ];
    f.extend(m.csv_fields());
    f.join(",")
}

/// Quotes a CSV field when needed.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Writes `results.csv` and `metrics.csv` under `dir`.
pub fn write_outputs(dir: &Path, cfg: &RunConfig, out: &RunOutput) -> Result<(), PipelineError> {
    let w = |name: &str, body: String| {
        let p = dir.join(name);
        fs::write(&p, body).map_err(|e| PipelineError::Write { path: p, err: e })
    };
    fs::create_dir_all(dir).map_err(|e| PipelineError::Write { path: dir.to_path_buf(), err: e })?;
    w("results.csv", results_csv(&out.output, &out.labels))?;
    w("metrics.csv", format!("{}\n{}\n", metrics_header(), metrics_row(cfg, out.k, "sim", &out.metrics)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(k: usize, dims: (usize, usize)) -> RunConfig {
        RunConfig {
            kernel: KernelKind::Bfs,
            params: KernelParams { source: Some(0), ..Default::default() },
            graph: GraphSource::Gen { n: 12, p: 0.3, seed: 1, directed: false },
            mode: MappingMode::Cluster,
            k,
            dims,
            epsilon: 0.1,
            machine: MachineConfig::default(),
        }
    }

    #[test]
    fn exit_codes() {
        assert_eq!(run(&cfg(5, (2, 2))).unwrap_err().exit_code(), 4);
        assert_eq!(run(&cfg(0, (2, 2))).unwrap_err().exit_code(), 3);
        let mut c = cfg(2, (1, 2));
        c.graph = GraphSource::File { path: "/nonexistent/graph.txt".into(), directed: false };
        assert_eq!(run(&c).unwrap_err().exit_code(), 2);
        let mut c = cfg(2, (1, 2));
        c.machine.event_budget = 10;
        assert_eq!(run(&c).unwrap_err().exit_code(), 5);
    }

    #[test]
    fn csv_shapes() {
        assert_eq!(results_csv(&KernelOutput::Count(3), &[]), "value\n3\n");
        assert_eq!(results_csv(&KernelOutput::Reach(vec![Some(0), None]), &[]), "vertex,value\n0,0\n1,unreachable\n");
        assert_eq!(results_csv(&KernelOutput::Labels(vec![0, 0]), &[7, 3]), "vertex,value\n7,7\n3,7\n");
        let out = run(&cfg(3, (2, 2))).unwrap();
        let row = metrics_row(&cfg(3, (2, 2)), out.k, "sim", &out.metrics);
        assert_eq!(row.split(',').count(), metrics_header().split(',').count() + 2, "graph field is quoted");
        assert!(row.starts_with("bfs,\"gen:12,0.3,1\",cluster,3,2x2,sim,"));
    }
}
