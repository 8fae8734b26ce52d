//! Compiler and deterministic discrete-event simulator for an asynchronous
//! graph processor: a mesh of self-timed Node Arithmetic Logic Engines
//! (NALEs) that talk over handshake FIFO channels.
//!
//! The pipeline is `graph` (ingest) → `compiler` (topology, clustering,
//! dependency analysis, placement, code generation) → `sim` (load, run,
//! gather). `pipeline` strings them together for one run. `kernels` holds the six supported graph kernels and their
//! sequential oracles.

pub mod compiler;
pub mod graph;
pub mod isa;
pub mod kernels;
pub mod pipeline;
pub mod sim;

pub use graph::{graph_stats, parse_edge_list, random_graph, Graph, GraphError, GraphStats, VertexId, Weight};
pub use isa::{assemble, decode, disassemble, encode, Instruction, NaleProgram, Opcode, Port};
pub use kernels::{kernel_spec, oracle, KernelKind, KernelOutput, KernelParams, KernelSpec};
pub use compiler::{compile, CompileError, CompileOptions, CompiledApp, MappingMode};
pub use sim::{simulate, Machine, MachineConfig, Metrics, SimError};
