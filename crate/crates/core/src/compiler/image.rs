//! On-disk machine image: `manifest.json`, one `nale_<row>_<col>.bin` per
//! programmed NALE, `routing.json` and `dispatch.csv`.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ClusterId, CompiledApp, Coord, DispatchEntry, GatherEntry, MappingMode};
use crate::isa::{read_words, NaleProgram, Port, ProgramError};
use crate::kernels::KernelSpec;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("bad manifest: {0}")]
    Json(#[from] serde_json::Error),
    #[error("bad program {path}: {source}")]
    Program { path: String, source: ProgramError },
    #[error("dispatch.csv line {line}: {reason}")]
    Dispatch { line: usize, reason: String },
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    dims: (usize, usize),
    mode: MappingMode,
    k: usize,
    kernel: KernelSpec,
    vertex_count: usize,
    cluster_of: Vec<ClusterId>,
    coord_of: Vec<Coord>,
    gather: Vec<GatherEntry>,
    fifo_words: usize,
    /// NALE ids that carry a program file, with their symbolic labels.
    programmed: BTreeMap<usize, BTreeMap<String, usize>>,
}

#[derive(Serialize, Deserialize)]
struct RouteEntry {
    nale: Coord,
    routes: BTreeMap<ClusterId, Port>,
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> ImageError + '_ {
    move |source| ImageError::Io { path: path.display().to_string(), source }
}

fn program_name((r, c): Coord) -> String {
    format!("nale_{r}_{c}.bin")
}

impl CompiledApp {
    pub fn write_dir(&self, dir: &Path) -> Result<(), ImageError> {
        fs::create_dir_all(dir).map_err(io(dir))?;
        let programmed = self.participants();
        let manifest = Manifest {
            dims: self.dims,
            mode: self.mode,
            k: self.cluster_count(),
            kernel: self.kernel,
            vertex_count: self.vertex_count,
            cluster_of: self.cluster_of.clone(),
            coord_of: self.coord_of.clone(),
            gather: self.gather.clone(),
            fifo_words: self.fifo_words,
            programmed: programmed.iter().map(|&id| (id, self.programs[id].as_ref().unwrap().labels.clone())).collect(),
        };
        let path = dir.join("manifest.json");
        fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(io(&path))?;

        for id in programmed {
            let path = dir.join(program_name(self.coord(id)));
            let file = fs::File::create(&path).map_err(io(&path))?;
            let prog = self.programs[id].as_ref().expect("participant has a program");
            prog.write_binary(std::io::BufWriter::new(file))
                .map_err(|source| ImageError::Program { path: path.display().to_string(), source })?;
        }

        let routes: Vec<RouteEntry> = self
            .routing
            .iter()
            .enumerate()
            .filter(|(_, t)| !t.is_empty())
            .map(|(id, t)| RouteEntry { nale: self.coord(id), routes: t.clone() })
            .collect();
        let path = dir.join("routing.json");
        fs::write(&path, serde_json::to_string_pretty(&routes)?).map_err(io(&path))?;

        let path = dir.join("dispatch.csv");
        let mut out = std::io::BufWriter::new(fs::File::create(&path).map_err(io(&path))?);
        writeln!(out, "vertex,nale,value").map_err(io(&path))?;
        for d in &self.dispatch {
            writeln!(out, "{},{},{}", d.vertex, d.nale, d.value).map_err(io(&path))?;
        }
        out.flush().map_err(io(&path))
    }

    pub fn read_dir(dir: &Path) -> Result<CompiledApp, ImageError> {
        let path = dir.join("manifest.json");
        let m: Manifest = serde_json::from_str(&fs::read_to_string(&path).map_err(io(&path))?)?;
        let cells = m.dims.0 * m.dims.1;

        let mut programs = vec![None; cells];
        for (id, labels) in m.programmed {
            let path = dir.join(program_name((id / m.dims.1, id % m.dims.1)));
            let bad = |source| ImageError::Program { path: path.display().to_string(), source };
            let file = fs::File::open(&path).map_err(io(&path))?;
            let words = read_words(BufReader::new(file)).map_err(bad)?;
            let mut prog = NaleProgram::decode(&words).map_err(bad)?;
            prog.labels = labels;
            programs[id] = Some(prog);
        }

        let path = dir.join("routing.json");
        let routes: Vec<RouteEntry> = serde_json::from_str(&fs::read_to_string(&path).map_err(io(&path))?)?;
        let mut routing = vec![BTreeMap::new(); cells];
        for r in routes {
            routing[r.nale.0 * m.dims.1 + r.nale.1] = r.routes;
        }

        let path = dir.join("dispatch.csv");
        let file = fs::File::open(&path).map_err(io(&path))?;
        let mut dispatch = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate().skip(1) {
            let line = line.map_err(io(&path))?;
            let bad = |reason: String| ImageError::Dispatch { line: i + 1, reason };
            let f: Vec<&str> = line.trim().split(',').collect();
            if f.len() != 3 {
                return Err(bad(format!("expected 3 fields, got {}", f.len())));
            }
            let num = |s: &str| s.parse::<i64>().map_err(|e| bad(format!("{s:?}: {e}")));
            dispatch.push(DispatchEntry { vertex: num(f[0])? as u32, nale: num(f[1])? as usize, value: num(f[2])? as i32 });
        }

        Ok(CompiledApp {
            kernel: m.kernel,
            mode: m.mode,
            dims: m.dims,
            vertex_count: m.vertex_count,
            cluster_of: m.cluster_of,
            coord_of: m.coord_of,
            programs,
            routing,
            dispatch,
            gather: m.gather,
            fifo_words: m.fifo_words,
        })
    }
}

#[cfg(test)]
mod tests {
    use crate::compiler::{compile, CompileOptions, CompiledApp, MappingMode};
    use crate::graph::random_graph;
    use crate::kernels::{kernel_spec, KernelKind, KernelParams};

    #[test]
    fn image_round_trip() {
        let g = random_graph(24, 0.2, (1, 9), 11, false).unwrap();
        let dir = tempfile::tempdir().unwrap();
        for kind in KernelKind::ALL {
            let spec = kernel_spec(kind, KernelParams { source: Some(3), ..Default::default() }, 24).unwrap();
            let opts = CompileOptions { mode: MappingMode::Cluster, k: 5, dims: (2, 3), epsilon: 0.1 };
            let app = compile(&spec, &g, &opts).unwrap();
            let sub = dir.path().join(kind.name());
            app.write_dir(&sub).unwrap();
            assert!(sub.join("manifest.json").exists());
            assert!(sub.join("dispatch.csv").exists());
            assert_eq!(CompiledApp::read_dir(&sub).unwrap(), app);
        }
    }
}
