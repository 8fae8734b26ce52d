//! The discrete-event machine: NALEs, per-tile packet routers, handshake
//! channels, the host-side dispatch/output logic and the memory interface.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};

use thiserror::Error;

use super::channel::{Channel, ChannelClass, Endpoint};
use super::config::{ConfigError, MachineConfig};
use super::metrics::{estimate_energy, Metrics};
use crate::compiler::{ClusterId, CompiledApp, Coord, OutputError, TAG_IDLE, TAG_REDUCE};
use crate::isa::{decode, encode, Instruction, Opcode, Port, Src, SrcA, STATUS_REG};
use crate::kernels::KernelOutput;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("load error: {0}")]
    Load(String),
    #[error("timeout: {reason} (t = {}, {} events)", .metrics.makespan, .metrics.events)]
    Timeout { reason: String, metrics: Box<Metrics> },
    #[error("fault at NALE ({row},{col}) pc {pc}: {reason}")]
    Fault { row: usize, col: usize, pc: usize, reason: String },
    #[error("host protocol error from NALE {nale}: {reason}")]
    Protocol { nale: usize, reason: String },
    #[error("machine stopped with {words} words left in channels")]
    Unconsumed { words: usize, metrics: Box<Metrics> },
    #[error(transparent)]
    Output(#[from] OutputError),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NaleStatus {
    Running,
    BlockedRecv(Port),
    BlockedSend(Port),
    Halted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EventKind {
    /// Memory interface starts loading dispatch batch `i`.
    MemBatch(usize),
    /// Batch `i` is available to the dispatch logic.
    BatchReady(usize),
    /// NALE `n` issues its next instruction.
    Wake(usize),
    /// The oldest in-flight word of channel `c` lands.
    Arrive(usize),
    /// A credit of channel `c` is back at the sender.
    Credit(usize),
    /// Router of tile `n` tries to forward a packet.
    Route(usize),
}

/// What one processed event did.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Delta {
    Executed { pc: usize, op: Opcode },
    Blocked(NaleStatus),
    Halted,
    BatchStarted,
    BatchDelivered { words: usize },
    Arrived,
    CreditReturned,
    Routed { forwarded: bool },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepReport {
    pub t: u64,
    pub event: EventKind,
    /// Tile concerned by the event (`None` for the memory interface).
    pub tile: Option<Coord>,
    pub delta: Delta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Event(StepReport),
    End,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub metrics: Metrics,
    /// `(nale, header, value)` results in arrival order, NALE ids as in the
    /// loaded image.
    pub gathered: Vec<(usize, i32, i32)>,
    /// Every word that reached the host, in arrival order.
    pub host_words: Vec<(usize, i32)>,
}

struct Nale {
    code: Vec<Result<Instruction, u32>>,
    loaded: bool,
    regs: [i32; 16],
    pc: usize,
    fifo: VecDeque<i32>,
    status: NaleStatus,
    outs: [Option<usize>; 7],
    ins: [Option<usize>; 7],
    busy: u64,
    halted_at: Option<u64>,
}

struct Router {
    cluster: Option<ClusterId>,
    inputs: Vec<usize>,
    /// Outgoing links by mesh port (N, S, E, W).
    links: [Option<usize>; 4],
    eject: usize,
    table: BTreeMap<ClusterId, Port>,
    rr: usize,
    scheduled: bool,
}

enum Parse {
    Tag,
    Result(i32),
    Idle(Option<i32>),
    Reduce,
}

struct HostPort {
    queue: VecDeque<i32>,
    parse: Parse,
}

pub struct Machine {
    config: MachineConfig,
    dims: (usize, usize),
    nales: Vec<Nale>,
    routers: Vec<Router>,
    channels: Vec<Channel>,
    host: Vec<HostPort>,
    queue: BinaryHeap<Reverse<(u64, usize, u64, EventKind)>>,
    seq: u64,
    now: u64,
    /// Last event other than a bare credit return.
    last_active: u64,
    events: u64,
    opcode_counts: [u64; 20],
    batches: Vec<Vec<(usize, i32)>>,
    mem_batches: u64,
    fifo_capacity: usize,
    /// Interpret host words as the compiled protocol (false for raw loads).
    protocol: bool,
    cluster_of: Vec<ClusterId>,
    participants: Vec<usize>,
    wave: BTreeMap<usize, (i32, i32)>,
    last_wave: Option<(i64, i64)>,
    reduce: BTreeMap<usize, i32>,
    gathered: Vec<(usize, i32, i32)>,
    host_words: Vec<(usize, i32)>,
    /// Machine tile id -> image NALE id.
    image_id: Vec<usize>,
}

const MESH_DIRS: [(Port, isize, isize); 4] =
    [(Port::North, -1, 0), (Port::South, 1, 0), (Port::East, 0, 1), (Port::West, 0, -1)];

impl Machine {
    pub fn new(config: MachineConfig) -> Self {
        Machine {
            config,
            dims: (0, 0),
            nales: Vec::new(),
            routers: Vec::new(),
            channels: Vec::new(),
            host: Vec::new(),
            queue: BinaryHeap::new(),
            seq: 0,
            now: 0,
            last_active: 0,
            events: 0,
            opcode_counts: [0; 20],
            batches: Vec::new(),
            mem_batches: 0,
            fifo_capacity: 0,
            protocol: false,
            cluster_of: Vec::new(),
            participants: Vec::new(),
            wave: BTreeMap::new(),
            last_wave: None,
            reduce: BTreeMap::new(),
            gathered: Vec::new(),
            host_words: Vec::new(),
            image_id: Vec::new(),
        }
    }

    pub fn config(&self) -> &MachineConfig {
        &self.config
    }

    pub fn dims(&self) -> (usize, usize) {
        self.dims
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    fn id(&self, (r, c): Coord) -> usize {
        r * self.dims.1 + c
    }

    fn coord(&self, id: usize) -> Coord {
        (id / self.dims.1, id % self.dims.1)
    }

    pub fn status(&self, at: Coord) -> NaleStatus {
        self.nales[self.id(at)].status
    }

    pub fn registers(&self, at: Coord) -> [i32; 16] {
        self.nales[self.id(at)].regs
    }

    fn build(&mut self, dims: (usize, usize)) -> Result<(), SimError> {
        self.config.check()?;
        let (rows, cols) = dims;
        self.dims = dims;
        let cells = rows * cols;
        let ch = self.config.channel;
        let cap = Some(ch.capacity);
        self.nales = (0..cells)
            .map(|_| Nale {
                code: Vec::new(),
                loaded: false,
                regs: [0; 16],
                pc: 0,
                fifo: VecDeque::new(),
                status: NaleStatus::Halted,
                outs: [None; 7],
                ins: [None; 7],
                busy: 0,
                halted_at: None,
            })
            .collect();
        self.host = (0..cells).map(|_| HostPort { queue: VecDeque::new(), parse: Parse::Tag }).collect();
        let mut channels = Vec::new();
        let mut add = |c: Channel| {
            channels.push(c);
            channels.len() - 1
        };
        let mut routers = Vec::with_capacity(cells);
        for n in 0..cells {
            let col = n % cols;
            let inject = add(Channel::new(ChannelClass::Inject, Endpoint::Nale(n), Endpoint::Router(n), cap, 1, ch.tb));
            let eject = add(Channel::new(ChannelClass::Eject, Endpoint::Router(n), Endpoint::Nale(n), None, 1, ch.tb));
            let host_lat = ch.tf * (col as u64 + 1);
            let host_in = add(Channel::new(ChannelClass::HostIn, Endpoint::Host(n), Endpoint::Nale(n), cap, host_lat, ch.tb));
            let host_out =
                add(Channel::new(ChannelClass::HostOut, Endpoint::Nale(n), Endpoint::Host(n), cap, host_lat, ch.tb));
            let nale = &mut self.nales[n];
            nale.outs[Port::Net.code() as usize] = Some(inject);
            nale.ins[Port::Net.code() as usize] = Some(eject);
            nale.ins[Port::Host.code() as usize] = Some(host_in);
            nale.outs[Port::Host.code() as usize] = Some(host_out);
            routers.push(Router {
                cluster: None,
                inputs: vec![inject],
                links: [None; 4],
                eject,
                table: BTreeMap::new(),
                rr: 0,
                scheduled: false,
            });
        }
        for n in 0..cells {
            let (r, c) = ((n / cols) as isize, (n % cols) as isize);
            for (i, &(port, dr, dc)) in MESH_DIRS.iter().enumerate() {
                let (nr, nc) = (r + dr, c + dc);
                if nr < 0 || nc < 0 || nr >= rows as isize || nc >= cols as isize {
                    continue;
                }
                let m = nr as usize * cols + nc as usize;
                let mesh = add(Channel::new(ChannelClass::Mesh, Endpoint::Nale(n), Endpoint::Nale(m), cap, ch.tf, ch.tb));
                self.nales[n].outs[port.code() as usize] = Some(mesh);
                self.nales[m].ins[port.opposite().code() as usize] = Some(mesh);
                let link = add(Channel::new(ChannelClass::Net, Endpoint::Router(n), Endpoint::Router(m), cap, ch.tf, ch.tb));
                routers[n].links[i] = Some(link);
                routers[m].inputs.push(link);
            }
        }
        self.channels = channels;
        self.routers = routers;
        self.fifo_capacity = self.config.internal_fifo;
        self.image_id = (0..cells).collect();
        Ok(())
    }

    fn schedule(&mut self, t: u64, tile: usize, ev: EventKind) {
        self.queue.push(Reverse((t, tile, self.seq, ev)));
        self.seq += 1;
    }

    fn install(&mut self, id: usize, words: &[u32]) {
        let nale = &mut self.nales[id];
        nale.code = words.iter().map(|&w| decode(w).map_err(|_| w)).collect();
        nale.loaded = true;
        nale.status = NaleStatus::Running;
    }

    fn start(&mut self, dispatch: Vec<(usize, i32)>) {
        let b = self.config.memory.batch_words;
        self.batches = dispatch.chunks(b).map(|c| c.to_vec()).collect();
        if !self.batches.is_empty() {
            self.schedule(0, 0, EventKind::MemBatch(0));
        }
        for n in 0..self.nales.len() {
            if self.nales[n].loaded {
                self.schedule(0, n, EventKind::Wake(n));
            }
        }
    }

    /// Installs a compiled image: programs, routing tables, and the dispatch
    /// manifest queued behind the memory interface.
    pub fn load(&mut self, app: &CompiledApp) -> Result<(), SimError> {
        let dims = self.config.dims.unwrap_or(app.dims);
        if app.dims.0 > dims.0 || app.dims.1 > dims.1 {
            return Err(SimError::Load(format!(
                "image needs a {}x{} array, machine is {}x{}",
                app.dims.0, app.dims.1, dims.0, dims.1
            )));
        }
        if app.programs.len() != app.dims.0 * app.dims.1 || app.routing.len() != app.programs.len() {
            return Err(SimError::Load("program/routing tables do not match image dims".into()));
        }
        self.build(dims)?;
        let to_machine = |id: usize| (id / app.dims.1) * dims.1 + id % app.dims.1;
        self.image_id = vec![usize::MAX; dims.0 * dims.1];
        for id in 0..app.programs.len() {
            self.image_id[to_machine(id)] = id;
        }
        for (id, prog) in app.programs.iter().enumerate() {
            if let Some(p) = prog {
                let words = p.instructions.iter().map(encode).collect::<Result<Vec<_>, _>>().map_err(|e| {
                    SimError::Load(format!("NALE {id}: {e}"))
                })?;
                self.install(to_machine(id), &words);
            }
        }
        for (id, table) in app.routing.iter().enumerate() {
            self.routers[to_machine(id)].table = table.clone();
        }
        for (c, &at) in app.coord_of.iter().enumerate() {
            self.routers[to_machine(at.0 * app.dims.1 + at.1)].cluster = Some(c as ClusterId);
        }
        self.cluster_of = app.cluster_of.clone();
        self.participants = app.participants().into_iter().map(to_machine).collect();
        self.fifo_capacity = self.config.internal_fifo.max(app.fifo_words);
        self.protocol = true;
        let dispatch = app.dispatch_words().into_iter().map(|(n, w)| (to_machine(n), w)).collect();
        self.start(dispatch);
        Ok(())
    }

    /// Loads raw program words (which may contain undefined encodings) and
    /// raw dispatch words. Host words are logged but not interpreted.
    pub fn load_raw(&mut self, programs: &[(Coord, Vec<u32>)], dispatch: &[(Coord, i32)]) -> Result<(), SimError> {
        let dims = self.config.dims.ok_or_else(|| SimError::Load("raw load needs configured dims".into()))?;
        self.build(dims)?;
        let inside = |&(r, c): &Coord| r < dims.0 && c < dims.1;
        for (at, words) in programs {
            if !inside(at) {
                return Err(SimError::Load(format!("program for ({},{}) outside {}x{}", at.0, at.1, dims.0, dims.1)));
            }
            self.install(self.id(*at), words);
        }
        let mut words = Vec::with_capacity(dispatch.len());
        for (at, w) in dispatch {
            if !inside(at) {
                return Err(SimError::Load(format!("dispatch to ({},{}) outside the array", at.0, at.1)));
            }
            words.push((self.id(*at), *w));
        }
        self.participants = (0..self.nales.len()).filter(|&n| self.nales[n].loaded).collect();
        self.start(words);
        Ok(())
    }

    fn fault(&self, n: usize, reason: impl Into<String>) -> SimError {
        let (row, col) = self.coord(n);
        SimError::Fault { row, col, pc: self.nales[n].pc, reason: reason.into() }
    }

    fn wake_if_blocked(&mut self, n: usize, ch: usize, t: u64) {
        let nale = &self.nales[n];
        let waiting = match nale.status {
            NaleStatus::BlockedRecv(p) => nale.ins[p.code() as usize] == Some(ch),
            NaleStatus::BlockedSend(p) => nale.outs[p.code() as usize] == Some(ch),
            _ => false,
        };
        if waiting {
            self.nales[n].status = NaleStatus::Running;
            self.schedule(t, n, EventKind::Wake(n));
        }
    }

    fn kick_router(&mut self, n: usize, t: u64) {
        if !self.routers[n].scheduled {
            self.routers[n].scheduled = true;
            self.schedule(t, n, EventKind::Route(n));
        }
    }

    fn send_word(&mut self, ch: usize, t: u64, w: i32) {
        let arrive = self.channels[ch].send(t, w);
        let tile = self.channels[ch].to.tile();
        self.schedule(arrive, tile, EventKind::Arrive(ch));
    }

    fn pop_word(&mut self, ch: usize, t: u64) -> i32 {
        let (w, credit) = self.channels[ch].pop().expect("pop from empty channel");
        if credit {
            let tile = self.channels[ch].from.tile();
            self.schedule(t + self.channels[ch].credit_latency, tile, EventKind::Credit(ch));
        }
        w
    }

    fn halt(&mut self, n: usize, t: u64) {
        self.nales[n].status = NaleStatus::Halted;
        self.nales[n].halted_at = Some(t);
    }

    fn exec(&mut self, n: usize, t: u64) -> Result<Delta, SimError> {
        if self.nales[n].status == NaleStatus::Halted {
            return Ok(Delta::Halted);
        }
        let pc = self.nales[n].pc;
        let Some(slot) = self.nales[n].code.get(pc) else {
            self.halt(n, t);
            return Ok(Delta::Halted);
        };
        let inst = match *slot {
            Ok(i) => i,
            Err(word) => return Err(self.fault(n, format!("undefined instruction word {word:#010x}"))),
        };
        let op = inst.opcode();
        let mut lat = self.config.latency.get(op);
        let mut next = pc + 1;
        let val = |nale: &Nale, s: Src| match s {
            Src::Reg(r) => nale.regs[r.0 as usize],
            Src::Imm(i) => i as i32,
        };
        match inst {
            Instruction::Nop => {}
            Instruction::Halt => {
                self.opcode_counts[op as usize] += 1;
                self.halt(n, t);
                return Ok(Delta::Halted);
            }
            Instruction::Ldi { dst, imm } => self.nales[n].regs[dst.0 as usize] = imm as i32,
            Instruction::Mov { dst, src } => {
                let v = val(&self.nales[n], src);
                self.nales[n].regs[dst.0 as usize] = v;
            }
            Instruction::Alu { op: alu, dst, a, b } => {
                let nale = &mut self.nales[n];
                let av = match a {
                    SrcA::Reg(r) => nale.regs[r.0 as usize],
                    SrcA::Imm(i) => i as i32,
                };
                let bv = val(nale, b);
                let d = &mut nale.regs[dst.0 as usize];
                *d = alu.eval(*d, av, bv);
            }
            Instruction::Jmp { target } => next = target as usize,
            Instruction::Jz { cond, target } => {
                if self.nales[n].regs[cond.0 as usize] == 0 {
                    next = target as usize;
                }
            }
            Instruction::Jnz { cond, target } => {
                if self.nales[n].regs[cond.0 as usize] != 0 {
                    next = target as usize;
                }
            }
            Instruction::Send { port, src } => {
                let v = val(&self.nales[n], src);
                if port == Port::Internal {
                    self.push_fifo(n, v)?;
                } else {
                    let ch = self.nales[n].outs[port.code() as usize]
                        .ok_or_else(|| self.fault(n, format!("no {port} channel")))?;
                    if !self.channels[ch].can_send(1) {
                        let s = NaleStatus::BlockedSend(port);
                        self.nales[n].status = s;
                        return Ok(Delta::Blocked(s));
                    }
                    // The word leaves when the handoff completes.
                    self.send_word(ch, t + lat, v);
                }
            }
            Instruction::Recv { dst, port } | Instruction::TryRecv { dst, port } => {
                let blocking = matches!(inst, Instruction::Recv { .. });
                let got = if port == Port::Internal {
                    let w = self.nales[n].fifo.pop_front();
                    if w.is_none() && blocking {
                        return Err(self.fault(n, "RECV on empty internal FIFO"));
                    }
                    w
                } else {
                    let ch = self.nales[n].ins[port.code() as usize]
                        .ok_or_else(|| self.fault(n, format!("no {port} channel")))?;
                    if self.channels[ch].ready() > 0 {
                        Some(self.pop_word(ch, t))
                    } else if blocking {
                        let s = NaleStatus::BlockedRecv(port);
                        self.nales[n].status = s;
                        return Ok(Delta::Blocked(s));
                    } else {
                        None
                    }
                };
                let nale = &mut self.nales[n];
                if let Some(w) = got {
                    nale.regs[dst.0 as usize] = w;
                }
                if !blocking {
                    nale.regs[STATUS_REG.0 as usize] = got.is_some() as i32;
                }
            }
            Instruction::PushI { src } => {
                let v = val(&self.nales[n], src);
                self.push_fifo(n, v)?;
            }
            Instruction::PopI { dst } => {
                let w = self.nales[n].fifo.pop_front().ok_or_else(|| self.fault(n, "POPI on empty internal FIFO"))?;
                self.nales[n].regs[dst.0 as usize] = w;
            }
            Instruction::IterI { count } => {
                let c = val(&self.nales[n], count);
                if c < 0 {
                    return Err(self.fault(n, format!("ITERI with negative count {c}")));
                }
                let fifo = &mut self.nales[n].fifo;
                let eff = if fifo.is_empty() { 0 } else { c as usize % fifo.len() };
                fifo.rotate_left(eff);
                lat *= eff.max(1) as u64;
            }
        }
        self.opcode_counts[op as usize] += 1;
        let nale = &mut self.nales[n];
        nale.busy += lat;
        nale.pc = next;
        self.schedule(t + lat, n, EventKind::Wake(n));
        Ok(Delta::Executed { pc, op })
    }

    fn push_fifo(&mut self, n: usize, v: i32) -> Result<(), SimError> {
        if self.nales[n].fifo.len() >= self.fifo_capacity {
            return Err(self.fault(n, format!("internal FIFO full ({} words)", self.fifo_capacity)));
        }
        self.nales[n].fifo.push_back(v);
        Ok(())
    }

    fn route(&mut self, n: usize, t: u64) -> Result<bool, SimError> {
        self.routers[n].scheduled = false;
        let inputs = self.routers[n].inputs.len();
        for i in 0..inputs {
            let idx = (self.routers[n].rr + i) % inputs;
            let input = self.routers[n].inputs[idx];
            if self.channels[input].ready() < 2 {
                continue;
            }
            let header = self.channels[input].peek(0).unwrap();
            let r = &self.routers[n];
            let dest = usize::try_from(header)
                .ok()
                .and_then(|h| self.cluster_of.get(h).copied())
                .ok_or_else(|| self.fault(n, format!("packet header {header} is not a vertex")))?;
            let out = if r.cluster == Some(dest) {
                r.eject
            } else {
                let port = r.table.get(&dest).ok_or_else(|| self.fault(n, format!("no route to cluster {dest}")))?;
                let dir = MESH_DIRS.iter().position(|d| d.0 == *port);
                dir.and_then(|d| r.links[d]).ok_or_else(|| self.fault(n, format!("route to cluster {dest} leaves the array")))?
            };
            if !self.channels[out].can_send(2) {
                continue;
            }
            let h = self.pop_word(input, t);
            let p = self.pop_word(input, t);
            self.send_word(out, t + 1, h);
            self.send_word(out, t + 1, p);
            self.routers[n].rr = idx + 1;
            self.routers[n].scheduled = true;
            self.schedule(t + 1, n, EventKind::Route(n));
            return Ok(true);
        }
        Ok(false)
    }

    fn pump_host(&mut self, n: usize, t: u64) {
        let ch = self.nales[n].ins[Port::Host.code() as usize].expect("host channel");
        while self.channels[ch].can_send(1) {
            let Some(w) = self.host[n].queue.pop_front() else { break };
            self.send_word(ch, t, w);
        }
    }

    fn reply_all(&mut self, value: i32, t: u64) {
        for i in 0..self.participants.len() {
            let p = self.participants[i];
            self.host[p].queue.push_back(value);
            self.pump_host(p, t);
        }
    }

    fn host_receive(&mut self, n: usize, ch: usize, t: u64) -> Result<(), SimError> {
        let w = self.pop_word(ch, t);
        self.host_words.push((self.image_id[n], w));
        if !self.protocol {
            return Ok(());
        }
        let perr = |reason: String| SimError::Protocol { nale: n, reason };
        let state = std::mem::replace(&mut self.host[n].parse, Parse::Tag);
        match state {
            Parse::Tag if w >= 0 => self.host[n].parse = Parse::Result(w),
            Parse::Tag if w == TAG_IDLE => self.host[n].parse = Parse::Idle(None),
            Parse::Tag if w == TAG_REDUCE => self.host[n].parse = Parse::Reduce,
            Parse::Tag => return Err(perr(format!("unknown tag {w}"))),
            Parse::Result(h) => self.gathered.push((self.image_id[n], h, w)),
            Parse::Idle(None) => self.host[n].parse = Parse::Idle(Some(w)),
            Parse::Idle(Some(sent)) => {
                if self.wave.insert(n, (sent, w)).is_some() {
                    return Err(perr("second report in one wave".into()));
                }
                if self.wave.len() == self.participants.len() {
                    let (s, r) = self.wave.values().fold((0i64, 0i64), |(s, r), &(a, b)| (s + a as i64, r + b as i64));
                    let done = s == r && self.last_wave == Some((s, r));
                    self.last_wave = Some((s, r));
                    self.wave.clear();
                    self.reply_all(done as i32, t);
                }
            }
            Parse::Reduce => {
                if self.reduce.insert(n, w).is_some() {
                    return Err(perr("second contribution to one reduction".into()));
                }
                if self.reduce.len() == self.participants.len() {
                    let sum = self.reduce.values().fold(0i32, |a, &b| a.wrapping_add(b));
                    self.reduce.clear();
                    self.reply_all(sum, t);
                }
            }
        }
        Ok(())
    }

    fn process(&mut self, t: u64, ev: EventKind) -> Result<Delta, SimError> {
        Ok(match ev {
            EventKind::MemBatch(i) => {
                self.mem_batches += 1;
                self.schedule(t + self.config.memory.latency, 0, EventKind::BatchReady(i));
                Delta::BatchStarted
            }
            EventKind::BatchReady(i) => {
                let batch = std::mem::take(&mut self.batches[i]);
                let words = batch.len();
                let mut touched = Vec::new();
                for (n, w) in batch {
                    self.host[n].queue.push_back(w);
                    if touched.last() != Some(&n) {
                        touched.push(n);
                    }
                }
                touched.sort_unstable();
                touched.dedup();
                for n in touched {
                    self.pump_host(n, t);
                }
                if i + 1 < self.batches.len() {
                    self.schedule(t, 0, EventKind::MemBatch(i + 1));
                }
                Delta::BatchDelivered { words }
            }
            EventKind::Wake(n) => self.exec(n, t)?,
            EventKind::Arrive(ch) => {
                self.channels[ch].arrive(t);
                match self.channels[ch].to {
                    Endpoint::Nale(n) => self.wake_if_blocked(n, ch, t),
                    Endpoint::Router(n) => self.kick_router(n, t),
                    Endpoint::Host(n) => self.host_receive(n, ch, t)?,
                }
                Delta::Arrived
            }
            EventKind::Credit(ch) => {
                self.channels[ch].credit();
                match self.channels[ch].from {
                    Endpoint::Nale(n) => self.wake_if_blocked(n, ch, t),
                    Endpoint::Router(n) => self.kick_router(n, t),
                    Endpoint::Host(n) => self.pump_host(n, t),
                }
                Delta::CreditReturned
            }
            EventKind::Route(n) => Delta::Routed { forwarded: self.route(n, t)? },
        })
    }

    /// Processes exactly one event.
    pub fn step(&mut self) -> Result<Step, SimError> {
        let Some(Reverse((t, _, _, ev))) = self.queue.pop() else {
            return Ok(Step::End);
        };
        debug_assert!(t >= self.now, "event time went backwards");
        self.now = t;
        self.events += 1;
        if !matches!(ev, EventKind::Credit(_)) {
            self.last_active = t;
        }
        let delta = self.process(t, ev)?;
        let tile = match ev {
            EventKind::MemBatch(_) | EventKind::BatchReady(_) => None,
            EventKind::Wake(n) | EventKind::Route(n) => Some(self.coord(n)),
            EventKind::Arrive(c) => Some(self.coord(self.channels[c].to.tile())),
            EventKind::Credit(c) => Some(self.coord(self.channels[c].from.tile())),
        };
        Ok(Step::Event(StepReport { t, event: ev, tile, delta }))
    }

    /// Snapshot of the metrics so far.
    pub fn metrics(&self) -> Metrics {
        let mut words_by_class = BTreeMap::new();
        let mut words_moved = 0;
        for c in &self.channels {
            if c.received > 0 {
                *words_by_class.entry(c.class.name().to_string()).or_insert(0) += c.received;
                words_moved += c.received;
            }
        }
        let opcode_counts: BTreeMap<Opcode, u64> =
            Opcode::ALL.iter().filter(|&&op| self.opcode_counts[op as usize] > 0).map(|&op| (op, self.opcode_counts[op as usize])).collect();
        let mut m = Metrics {
            makespan: self.last_active,
            events: self.events,
            opcode_counts,
            words_moved,
            words_by_class,
            mem_batches: self.mem_batches,
            busy: self.nales.iter().map(|n| n.busy).collect(),
            halted_at: self.nales.iter().map(|n| n.halted_at).collect(),
            energy: 0.0,
        };
        m.energy = estimate_energy(&m, &self.config.energy).unwrap_or(f64::NAN);
        m
    }

    /// Runs with the configured event budget.
    pub fn run(&mut self) -> Result<RunResult, SimError> {
        self.run_with_budget(self.config.event_budget)
    }

    pub fn run_with_budget(&mut self, budget: u64) -> Result<RunResult, SimError> {
        loop {
            if self.events >= budget && !self.queue.is_empty() {
                return Err(SimError::Timeout {
                    reason: format!("event budget of {budget} exhausted"),
                    metrics: Box::new(self.metrics()),
                });
            }
            if self.step()? == Step::End {
                break;
            }
        }
        let running: Vec<Coord> =
            (0..self.nales.len()).filter(|&n| self.nales[n].status != NaleStatus::Halted).map(|n| self.coord(n)).collect();
        if !running.is_empty() {
            return Err(SimError::Timeout {
                reason: format!("no pending events but NALEs {running:?} never halted"),
                metrics: Box::new(self.metrics()),
            });
        }
        let left: usize = self.channels.iter().map(Channel::occupancy).sum();
        if left > 0 {
            return Err(SimError::Unconsumed { words: left, metrics: Box::new(self.metrics()) });
        }
        let metrics = self.metrics();
        estimate_energy(&metrics, &self.config.energy)?;
        Ok(RunResult { metrics, gathered: self.gathered.clone(), host_words: self.host_words.clone() })
    }

    /// Every NALE halted and no word left anywhere.
    pub fn is_quiescent(&self) -> bool {
        self.queue.is_empty()
            && self.nales.iter().all(|n| n.status == NaleStatus::Halted)
            && self.channels.iter().all(Channel::is_empty)
            && self.host.iter().all(|h| h.queue.is_empty())
    }

    /// Occupancy, conservation and ordering checks over the whole machine.
    pub fn validate(&self) -> Result<(), String> {
        for (i, c) in self.channels.iter().enumerate() {
            c.check().map_err(|e| format!("channel {i} ({} {:?}->{:?}): {e}", c.class.name(), c.from, c.to))?;
        }
        for (i, n) in self.nales.iter().enumerate() {
            if n.fifo.len() > self.fifo_capacity {
                return Err(format!("NALE {i} internal FIFO over capacity"));
            }
        }
        if let Some(Reverse((t, ..))) = self.queue.peek() {
            if *t < self.now {
                return Err(format!("pending event at {t} before current time {}", self.now));
            }
        }
        Ok(())
    }
}

/// Loads `app` on a fresh machine, runs it and decodes the kernel output.
pub fn simulate(app: &CompiledApp, config: &MachineConfig) -> Result<(KernelOutput, RunResult), SimError> {
    let mut m = Machine::new(config.clone());
    m.load(app)?;
    let r = m.run()?;
    let out = app.decode_output(&r.gathered)?;
    Ok((out, r))
}
