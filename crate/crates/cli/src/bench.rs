//! `gproc bench`: kernel x graph x mapping matrix, one simulator row and one
//! sequential reference row per cell.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use gproc_core::pipeline::{self, csv_field, GraphSource, RunConfig};
use gproc_core::sim::{estimate_energy, reference_model};
use gproc_core::{kernel_spec, Graph, KernelKind, KernelParams, MachineConfig, MappingMode, Metrics};
use rayon::prelude::*;
use serde::Deserialize;

use crate::{machine_config, resolve_source, square_dims, BenchArgs};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Matrix {
    pub kernels: Vec<KernelKind>,
    pub graphs: Vec<GraphSpec>,
    #[serde(default = "default_mappings")]
    pub mappings: Vec<Mapping>,
    /// `source` is a vertex label, as on the command line.
    #[serde(default)]
    pub params: KernelParams,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    /// Relative paths resolve against the matrix file.
    pub path: Option<PathBuf>,
    pub gen: Option<GenSpec>,
    #[serde(default)]
    pub directed: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenSpec {
    pub n: usize,
    pub p: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mapping {
    pub mode: MappingMode,
    /// Capped at V.
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub dims: Option<(usize, usize)>,
}

fn default_mappings() -> Vec<Mapping> {
    vec![Mapping { mode: MappingMode::Cluster, k: Some(16), dims: Some((4, 4)) }]
}

fn default_epsilon() -> f64 {
    0.1
}

impl GraphSpec {
    fn source(&self, base: &Path) -> Result<GraphSource> {
        match (&self.path, &self.gen) {
            (Some(p), None) => Ok(GraphSource::File { path: base.join(p), directed: self.directed }),
            (None, Some(g)) => Ok(GraphSource::Gen { n: g.n, p: g.p, seed: g.seed, directed: self.directed }),
            _ => anyhow::bail!("graph entry needs exactly one of path or gen"),
        }
    }
}

pub fn header() -> String {
    format!("{},speedup,error", pipeline::metrics_header())
}

fn failed_row(key: [String; 6], err: &str) -> String {
    let blanks = vec![""; Metrics::csv_header().len()].join(",");
    format!("{},{blanks},,{}", key.join(","), csv_field(err))
}

struct Cell<'a> {
    kernel: KernelKind,
    graph: &'a Result<(GraphSource, Graph), String>,
    mapping: Mapping,
}

impl Cell<'_> {
    fn key(&self, model: &str, k: usize, dims: (usize, usize)) -> [String; 6] {
        let g = match self.graph {
            Ok((src, _)) => csv_field(&src.to_string()),
            Err(_) => String::new(),
        };
        let k = if k == 0 { String::new() } else { k.to_string() };
        [self.kernel.to_string(), g, self.mapping.mode.to_string(), k, format!("{}x{}", dims.0, dims.1), model.into()]
    }

    fn rows(&self, m: &Matrix, machine: &MachineConfig) -> [String; 2] {
        let guess_dims = self.mapping.dims.unwrap_or((0, 0));
        let (src, g) = match self.graph {
            Ok(x) => x,
            Err(e) => return [failed_row(self.key("sim", 0, guess_dims), e), failed_row(self.key("ref", 0, guess_dims), e)],
        };
        let v = g.vertex_count();
        let k = match self.mapping.mode {
            MappingMode::Node => v,
            MappingMode::Cluster => self.mapping.k.unwrap_or(1).min(v),
        };
        let dims = self.mapping.dims.unwrap_or_else(|| square_dims(k));
        let params = match resolve_source(self.kernel, m.params.source.map(u64::from), g) {
            Ok(source) => KernelParams { source, ..m.params },
            Err(e) => {
                let e = format!("{e:#}");
                return [failed_row(self.key("sim", k, dims), &e), failed_row(self.key("ref", k, dims), &e)];
            }
        };
        let cfg = RunConfig {
            kernel: self.kernel,
            params,
            graph: src.clone(),
            mode: self.mapping.mode,
            k,
            dims,
            epsilon: m.epsilon,
            machine: machine.clone(),
        };
        let reference = kernel_spec(self.kernel, params, v).map(|spec| {
            let mut r = reference_model(&spec, g, &machine.latency, &machine.memory);
            r.energy = estimate_energy(&r, &machine.energy).unwrap_or(f64::NAN);
            r
        });
        let ref_row = match &reference {
            Ok(r) => format!("{},,", pipeline::metrics_row(&cfg, k, "ref", r)),
            Err(e) => failed_row(self.key("ref", k, dims), &e.to_string()),
        };
        let sim_row = match pipeline::run_on(&cfg, g) {
            Ok(out) => {
                let speedup = match &reference {
                    Ok(r) if out.metrics.makespan > 0 => format!("{:.4}", r.makespan as f64 / out.metrics.makespan as f64),
                    _ => String::new(),
                };
                format!("{},{speedup},", pipeline::metrics_row(&cfg, out.k, "sim", &out.metrics))
            }
            Err(e) => failed_row(self.key("sim", k, dims), &e.to_string()),
        };
        [sim_row, ref_row]
    }
}

/// Rows in matrix order (graphs, then kernels, then mappings), whatever the
/// completion order.
pub fn bench_table(m: &Matrix, base: &Path, machine: &MachineConfig) -> Result<String> {
    let graphs: Vec<Result<(GraphSource, Graph), String>> = m
        .graphs
        .iter()
        .map(|spec| {
            let src = spec.source(base)?;
            let g = src.load()?;
            Ok::<_, anyhow::Error>((src, g))
        })
        .map(|r| r.map_err(|e| format!("{e:#}")))
        .collect();
    let cells: Vec<Cell> = graphs
        .iter()
        .flat_map(|graph| {
            m.kernels.iter().flat_map(move |&kernel| m.mappings.iter().map(move |&mapping| Cell { kernel, graph, mapping }))
        })
        .collect();
    let rows: Vec<[String; 2]> = cells.par_iter().map(|c| c.rows(m, machine)).collect();
    let mut out = header();
    out.push('\n');
    for r in rows.iter().flatten() {
        out.push_str(r);
        out.push('\n');
    }
    Ok(out)
}

pub fn cmd_bench(a: &BenchArgs) -> Result<()> {
    let text = fs::read_to_string(&a.matrix).with_context(|| format!("reading {}", a.matrix.display()))?;
    let m: Matrix = serde_json::from_str(&text).with_context(|| format!("parsing {}", a.matrix.display()))?;
    let machine = machine_config(a.machine_config.as_ref(), a.budget)?;
    let base = a.matrix.parent().unwrap_or(Path::new("."));
    let table = bench_table(&m, base, &machine)?;
    match &a.out {
        Some(p) => fs::write(p, table).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{table}"),
    }
    Ok(())
}
