//! Per-NALE code generation, routing tables and host manifests.
//!
//! Register use in generated programs:
//!
//! | reg | use |
//! |-----|-----|
//! | r0 | accumulator (PR dangling mass, triangle count) |
//! | r1 | header of the current message (destination vertex) |
//! | r2 | payload |
//! | r3 | aux payload / host reply |
//! | r4-r7 | record fields and temporaries |
//! | r8 | scratch for constants that do not fit an immediate |
//! | r9 | comparison result |
//! | r10 | word offset of the internal FIFO head |
//! | r11 | loop counter |
//! | r12 | messages still expected |
//! | r13, r14 | packets sent / received (termination waves) |
//! | r15 | TRYRECV status |
//!
//! Every local vertex owns a fixed-width record in the internal FIFO, in
//! ascending vertex order. Adjacency is compiled into the code; an incoming
//! header is resolved to its vertex by a binary search tree of CMP3 branches.

use std::collections::BTreeMap;

use super::{
    ClusterId, CompileError, CompiledApp, Coord, DispatchEntry, GatherEntry, MappingMode, Partition, Placement,
};
use crate::graph::{Graph, VertexId};
use crate::isa::{AluOp, Instruction, NaleProgram, Port, Reg, Src, SrcA};
use crate::kernels::{KernelKind, KernelSpec};

/// "Infinite" distance word.
pub const INF_WORD: i32 = i32::MAX;
/// 1.0 in the Q16.16 format used for PageRank.
pub const FIXED_ONE: i32 = 1 << 16;

/// Host tag for a termination wave report: `[-1, sent, received]`.
pub const TAG_IDLE: i32 = -1;
/// Host tag for a sum reduction: `[-2, value]`.
pub const TAG_REDUCE: i32 = -2;

const MAX_PROGRAM: usize = 1 << 16;

const ACC: Reg = Reg(0);
const HDR: Reg = Reg(1);
const PAY: Reg = Reg(2);
const AUX: Reg = Reg(3);
const T4: Reg = Reg(4);
const T5: Reg = Reg(5);
const T6: Reg = Reg(6);
const T7: Reg = Reg(7);
const SCRATCH: Reg = Reg(8);
const CMP: Reg = Reg(9);
const POS: Reg = Reg(10);
const CNT: Reg = Reg(11);
const REM: Reg = Reg(12);
const SENT: Reg = Reg(13);
const RCVD: Reg = Reg(14);
const STATUS: Reg = Reg(15);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Label(usize);

#[derive(Default)]
struct Emitter {
    code: Vec<Instruction>,
    bound: Vec<Option<usize>>,
    names: Vec<Option<String>>,
    fixups: Vec<(usize, Label)>,
}

fn fits_i16(v: i64) -> bool {
    (i16::MIN as i64..=i16::MAX as i64).contains(&v)
}

impl Emitter {
    fn label(&mut self) -> Label {
        self.bound.push(None);
        self.names.push(None);
        Label(self.bound.len() - 1)
    }

    fn named(&mut self, name: impl Into<String>) -> Label {
        let l = self.label();
        self.names[l.0] = Some(name.into());
        l
    }

    fn bind(&mut self, l: Label) {
        debug_assert!(self.bound[l.0].is_none());
        self.bound[l.0] = Some(self.code.len());
    }

    fn emit(&mut self, i: Instruction) {
        self.code.push(i);
    }

    fn branch(&mut self, i: Instruction, l: Label) {
        self.fixups.push((self.code.len(), l));
        self.code.push(i);
    }

    fn jmp(&mut self, l: Label) {
        self.branch(Instruction::Jmp { target: 0 }, l);
    }

    fn jz(&mut self, cond: Reg, l: Label) {
        self.branch(Instruction::Jz { cond, target: 0 }, l);
    }

    fn jnz(&mut self, cond: Reg, l: Label) {
        self.branch(Instruction::Jnz { cond, target: 0 }, l);
    }

    fn alu(&mut self, op: AluOp, dst: Reg, a: Reg, b: Src) {
        self.emit(Instruction::Alu { op, dst, a: SrcA::Reg(a), b });
    }

    /// `dst = value` with wrapping ALU arithmetic when it does not fit LDI.
    fn load_const(&mut self, dst: Reg, value: i32) {
        if fits_i16(value as i64) {
            self.emit(Instruction::Ldi { dst, imm: value as i16 });
            return;
        }
        let lo = value as i16;
        let hi = (value.wrapping_sub(lo as i32) >> 16) as i16;
        self.emit(Instruction::Ldi { dst, imm: hi });
        self.alu(AluOp::Mul, dst, dst, Src::Imm(256));
        self.alu(AluOp::Mul, dst, dst, Src::Imm(256));
        if lo != 0 {
            self.alu(AluOp::Add, dst, dst, Src::Imm(lo));
        }
    }

    /// An operand holding `value`, going through `scratch` if needed.
    fn src(&mut self, value: i32, scratch: Reg) -> Src {
        if fits_i16(value as i64) {
            Src::Imm(value as i16)
        } else {
            self.load_const(scratch, value);
            Src::Reg(scratch)
        }
    }

    fn send(&mut self, port: Port, value: i32) {
        let src = self.src(value, SCRATCH);
        self.emit(Instruction::Send { port, src });
    }

    fn send_reg(&mut self, port: Port, r: Reg) {
        self.emit(Instruction::Send { port, src: Src::Reg(r) });
    }

    fn add_const(&mut self, dst: Reg, value: i32) {
        if value != 0 {
            let b = self.src(value, SCRATCH);
            self.alu(AluOp::Add, dst, dst, b);
        }
    }

    /// Branches to the label paired with `key`'s value, or to `miss`.
    fn bsearch(&mut self, key: Reg, keys: &[(i32, Label)], miss: Label) {
        if keys.is_empty() {
            self.jmp(miss);
            return;
        }
        let mid = keys.len() / 2;
        let b = self.src(keys[mid].0, SCRATCH);
        self.alu(AluOp::Cmp3, CMP, key, b);
        self.jz(CMP, keys[mid].1);
        let (left, right) = (&keys[..mid], &keys[mid + 1..]);
        match (left.is_empty(), right.is_empty()) {
            (true, true) => self.jmp(miss),
            (true, false) => {
                self.alu(AluOp::Add, CMP, CMP, Src::Imm(1));
                self.jz(CMP, miss);
                self.bsearch(key, right, miss);
            }
            (false, true) => {
                self.alu(AluOp::Add, CMP, CMP, Src::Imm(1));
                self.jnz(CMP, miss);
                self.bsearch(key, left, miss);
            }
            (false, false) => {
                let go_left = self.label();
                self.alu(AluOp::Add, CMP, CMP, Src::Imm(1));
                self.jz(CMP, go_left);
                self.bsearch(key, right, miss);
                self.bind(go_left);
                self.bsearch(key, left, miss);
            }
        }
    }

    /// `for _ in 0..n { body }` on CNT; skipped for n = 0.
    fn counted_loop(&mut self, n: usize, body: impl FnOnce(&mut Self)) {
        if n == 0 {
            return;
        }
        self.load_const(CNT, n as i32);
        let top = self.label();
        self.bind(top);
        body(self);
        self.alu(AluOp::Sub, CNT, CNT, Src::Imm(1));
        self.jnz(CNT, top);
    }

    fn finish(self, at: Coord) -> Result<NaleProgram, CompileError> {
        let len = self.code.len();
        if len > MAX_PROGRAM {
            return Err(CompileError::ProgramTooLong { row: at.0, col: at.1, len });
        }
        let mut code = self.code;
        for (at, l) in self.fixups {
            let target = self.bound[l.0].expect("every branch target is bound");
            code[at] = code[at].with_target(target as u16);
        }
        let labels: BTreeMap<String, usize> = self
            .names
            .into_iter()
            .zip(self.bound)
            .filter_map(|(n, b)| Some((n?, b.expect("named labels are bound"))))
            .collect();
        Ok(NaleProgram { instructions: code, labels })
    }
}

/// The vertices of one NALE and how their records are laid out.
struct Local<'a> {
    g: &'a Graph,
    members: &'a [VertexId],
    /// Record width in words.
    rw: usize,
}

impl Local<'_> {
    fn m(&self) -> usize {
        self.members.len()
    }

    fn words(&self) -> usize {
        self.m() * self.rw
    }

    /// Brings record `slot` to the FIFO head.
    fn rotate_to(&self, e: &mut Emitter, slot: usize) {
        if self.m() == 1 {
            return;
        }
        // Kept positive; ITERI rotates modulo the FIFO length.
        e.load_const(T4, (slot * self.rw + self.words()) as i32);
        e.alu(AluOp::Sub, T4, T4, Src::Reg(POS));
        e.emit(Instruction::IterI { count: Src::Reg(T4) });
    }

    /// Records that the head is now at `slot + 1` after a pop/push of `slot`.
    fn advance_pos(&self, e: &mut Emitter, slot: usize) {
        if self.m() > 1 {
            e.load_const(POS, (((slot + 1) % self.m()) * self.rw) as i32);
        }
    }

    /// Rotates the FIFO back so record 0 is at the head.
    fn realign(&self, e: &mut Emitter) {
        if self.m() == 1 {
            return;
        }
        e.load_const(T4, self.words() as i32);
        e.alu(AluOp::Sub, T4, T4, Src::Reg(POS));
        e.emit(Instruction::IterI { count: Src::Reg(T4) });
        e.emit(Instruction::Ldi { dst: POS, imm: 0 });
    }

    fn leaves(&self, e: &mut Emitter) -> Vec<(i32, Label)> {
        self.members.iter().map(|&u| (u as i32, e.named(format!("v{u}")))).collect()
    }

    /// Resolves HDR to a leaf label; jumps to `miss` for foreign headers.
    fn dispatch_header(&self, e: &mut Emitter, leaves: &[(i32, Label)], miss: Label) {
        if leaves.len() == 1 {
            e.jmp(leaves[0].1);
        } else {
            e.bsearch(HDR, leaves, miss);
        }
    }

    /// Sends one result per vertex: `[vid, value]` where the value is field 0.
    fn output_sweep(&self, e: &mut Emitter) {
        self.realign(e);
        for &u in self.members {
            e.emit(Instruction::PopI { dst: T5 });
            for _ in 1..self.rw {
                e.emit(Instruction::PopI { dst: T6 });
            }
            e.send(Port::Host, u as i32);
            e.send_reg(Port::Host, T5);
        }
        e.emit(Instruction::Halt);
    }
}

/// Termination wave: report counters, continue on a zero reply.
fn idle_block(e: &mut Emitter, idle: Label, net_loop: Label) {
    e.bind(idle);
    e.send(Port::Host, TAG_IDLE);
    e.send_reg(Port::Host, SENT);
    e.send_reg(Port::Host, RCVD);
    e.emit(Instruction::Recv { dst: AUX, port: Port::Host });
    e.jz(AUX, net_loop);
}

/// SSSP, BFS and CC: asynchronous min-relaxation, one word per record.
fn gen_relax(kind: KernelKind, loc: &Local, quiet: bool, e: &mut Emitter) {
    let m = loc.m();
    let disp = e.named("dispatch");
    let handle = e.named("handle");
    let after = e.named("after");
    let finish = e.named("finish");
    let trap = e.named("trap");

    e.load_const(T5, INF_WORD);
    e.counted_loop(m, |e| e.emit(Instruction::PushI { src: Src::Reg(T5) }));
    e.load_const(REM, m as i32);
    e.bind(disp);
    e.emit(Instruction::Recv { dst: HDR, port: Port::Host });
    e.emit(Instruction::Recv { dst: PAY, port: Port::Host });
    e.alu(AluOp::Sub, REM, REM, Src::Imm(1));

    e.bind(handle);
    let leaves = loc.leaves(e);
    loc.dispatch_header(e, &leaves, trap);

    for (slot, (&u, &(_, leaf))) in loc.members.iter().zip(&leaves).enumerate() {
        e.bind(leaf);
        loc.rotate_to(e, slot);
        e.emit(Instruction::PopI { dst: T5 });
        e.alu(AluOp::Cmp3, T6, PAY, Src::Reg(T5));
        e.alu(AluOp::Min, T5, PAY, Src::Reg(T5));
        e.emit(Instruction::PushI { src: Src::Reg(T5) });
        loc.advance_pos(e, slot);
        e.alu(AluOp::Add, T6, T6, Src::Imm(1));
        e.jnz(T6, after);
        if kind == KernelKind::Bfs && loc.g.degree(u) > 0 {
            e.alu(AluOp::Add, T7, PAY, Src::Imm(1));
        }
        for (v, w) in loc.g.adj(u) {
            e.send(Port::Net, v as i32);
            match kind {
                KernelKind::Sssp => {
                    let b = e.src(w as i32, SCRATCH);
                    e.alu(AluOp::Add, T7, PAY, b);
                    e.send_reg(Port::Net, T7);
                }
                KernelKind::Bfs => e.send_reg(Port::Net, T7),
                _ => e.send_reg(Port::Net, PAY),
            }
        }
        e.add_const(SENT, loc.g.degree(u) as i32);
        e.jmp(after);
    }

    e.bind(after);
    e.jnz(REM, disp);
    // Without edges no message can ever arrive.
    if !quiet {
        let net_loop = e.named("net_loop");
        let idle = e.named("idle");
        e.bind(net_loop);
        e.emit(Instruction::TryRecv { dst: HDR, port: Port::Net });
        e.jz(STATUS, idle);
        e.emit(Instruction::Recv { dst: PAY, port: Port::Net });
        e.alu(AluOp::Add, RCVD, RCVD, Src::Imm(1));
        e.jmp(handle);
        idle_block(e, idle, net_loop);
    }

    e.bind(finish);
    loc.output_sweep(e);
    e.bind(trap);
    e.emit(Instruction::Halt);
}

/// Receives `m` dispatch pairs and pushes `[value, extra...]` records.
fn init_records(loc: &Local, extra: &[i16], e: &mut Emitter) {
    e.counted_loop(loc.m(), |e| {
        e.emit(Instruction::Recv { dst: HDR, port: Port::Host });
        e.emit(Instruction::Recv { dst: PAY, port: Port::Host });
        e.emit(Instruction::PushI { src: Src::Reg(PAY) });
        for &x in extra {
            e.emit(Instruction::PushI { src: Src::Imm(x) });
        }
    });
}

fn send_pair(e: &mut Emitter, dest: Src, payload: Src) {
    e.emit(Instruction::Send { port: Port::Net, src: dest });
    e.emit(Instruction::Send { port: Port::Net, src: payload });
}

/// Sends a two-packet token message `[dest, counter] [dest, kind]`.
fn send_token(e: &mut Emitter, dest: Src, kind: Src) {
    send_pair(e, dest, Src::Reg(PAY));
    send_pair(e, dest, kind);
    e.alu(AluOp::Add, SENT, SENT, Src::Imm(2));
}

fn push_dfs_record(loc: &Local, slot: usize, e: &mut Emitter) {
    e.emit(Instruction::PushI { src: Src::Reg(T5) });
    e.emit(Instruction::PushI { src: Src::Reg(T6) });
    e.emit(Instruction::PushI { src: Src::Reg(T7) });
    loc.advance_pos(e, slot);
}

/// DFS by a single roving token. Records are `[index, parent, next
/// neighbour position]`. A token carries the preorder counter in PAY and
/// its kind in AUX: a parent vertex id for a discovery, -2 for the root
/// discovery, -1 for a return (child finished or target already visited).
fn gen_dfs(source: VertexId, loc: &Local, e: &mut Emitter) {
    let handle = e.named("handle");
    let net_loop = e.named("net_loop");
    let idle = e.named("idle");
    let finish = e.named("finish");
    let trap = e.named("trap");

    init_records(loc, &[-1, 0], e);
    if loc.members.contains(&source) {
        e.load_const(HDR, source as i32);
        e.emit(Instruction::Ldi { dst: PAY, imm: 0 });
        e.emit(Instruction::Ldi { dst: AUX, imm: -2 });
        e.jmp(handle);
    }
    e.bind(net_loop);
    e.emit(Instruction::TryRecv { dst: HDR, port: Port::Net });
    e.jz(STATUS, idle);
    e.emit(Instruction::Recv { dst: PAY, port: Port::Net });
    e.emit(Instruction::Recv { dst: T4, port: Port::Net });
    e.emit(Instruction::Recv { dst: AUX, port: Port::Net });
    e.alu(AluOp::Add, RCVD, RCVD, Src::Imm(2));

    e.bind(handle);
    let leaves = loc.leaves(e);
    loc.dispatch_header(e, &leaves, trap);

    for (slot, (&u, &(_, leaf))) in loc.members.iter().zip(&leaves).enumerate() {
        let fresh = e.label();
        let advance = e.label();
        let exhausted = e.label();
        e.bind(leaf);
        loc.rotate_to(e, slot);
        e.emit(Instruction::PopI { dst: T5 });
        e.emit(Instruction::PopI { dst: T6 });
        e.emit(Instruction::PopI { dst: T7 });
        e.alu(AluOp::Cmp3, CMP, AUX, Src::Imm(-1));
        e.jz(CMP, advance);
        e.alu(AluOp::Cmp3, CMP, T5, Src::Imm(-1));
        e.jz(CMP, fresh);
        // Already visited: bounce the token back.
        push_dfs_record(loc, slot, e);
        send_token(e, Src::Reg(AUX), Src::Imm(-1));
        e.jmp(net_loop);

        e.bind(fresh);
        e.emit(Instruction::Mov { dst: T5, src: Src::Reg(PAY) });
        e.alu(AluOp::Add, PAY, PAY, Src::Imm(1));
        e.emit(Instruction::Mov { dst: T6, src: Src::Reg(AUX) });
        e.emit(Instruction::Ldi { dst: T7, imm: 0 });

        e.bind(advance);
        let tries: Vec<(i32, Label)> = (0..loc.g.degree(u)).map(|i| (i as i32, e.label())).collect();
        e.bsearch(T7, &tries, exhausted);
        for ((v, _), &(_, try_v)) in loc.g.adj(u).zip(&tries) {
            e.bind(try_v);
            e.alu(AluOp::Add, T7, T7, Src::Imm(1));
            push_dfs_record(loc, slot, e);
            let dest = e.src(v as i32, SCRATCH);
            let me = e.src(u as i32, T4);
            send_token(e, dest, me);
            e.jmp(net_loop);
        }
        e.bind(exhausted);
        push_dfs_record(loc, slot, e);
        if u != source {
            send_token(e, Src::Reg(T6), Src::Imm(-1));
        }
        e.jmp(net_loop);
    }

    idle_block(e, idle, net_loop);
    e.bind(finish);
    loc.output_sweep(e);
    e.bind(trap);
    e.emit(Instruction::Halt);
}

fn q16(x: f64) -> i32 {
    (x * FIXED_ONE as f64).round() as i32
}

/// Barriered PageRank in Q16.16. Records are `[rank, incoming sum]`.
fn gen_pagerank(spec: &KernelSpec, loc: &Local, expected: usize, e: &mut Emitter) {
    let g = loc.g;
    let n = g.vertex_count() as f64;
    let d = spec.damping;
    let iter_top = e.named("iteration");
    let trap = e.named("trap");

    init_records(loc, &[0], e);
    e.load_const(CNT, spec.iterations as i32);
    e.bind(iter_top);

    // Scatter rank / outdeg to every out-neighbour.
    for &u in loc.members {
        e.emit(Instruction::PopI { dst: T5 });
        e.emit(Instruction::PopI { dst: T6 });
        e.emit(Instruction::PushI { src: Src::Reg(T5) });
        e.emit(Instruction::PushI { src: Src::Reg(T6) });
        let deg = g.degree(u);
        if deg == 0 {
            e.alu(AluOp::Add, ACC, ACC, Src::Reg(T5));
            continue;
        }
        if deg == 1 {
            e.emit(Instruction::Mov { dst: T7, src: Src::Reg(T5) });
        } else {
            let recip = e.src(q16(1.0 / deg as f64), SCRATCH);
            e.emit(Instruction::Ldi { dst: T7, imm: 0 });
            e.alu(AluOp::Macq, T7, T5, recip);
        }
        for (v, _) in g.adj(u) {
            let dest = e.src(v as i32, SCRATCH);
            send_pair(e, dest, Src::Reg(T7));
        }
    }

    // Gather exactly the statically known number of contributions.
    if expected > 0 {
        let recv_top = e.label();
        let next = e.label();
        e.load_const(REM, expected as i32);
        e.bind(recv_top);
        e.emit(Instruction::Recv { dst: HDR, port: Port::Net });
        e.emit(Instruction::Recv { dst: PAY, port: Port::Net });
        let leaves = loc.leaves(e);
        loc.dispatch_header(e, &leaves, trap);
        for (slot, &(_, leaf)) in leaves.iter().enumerate() {
            e.bind(leaf);
            loc.rotate_to(e, slot);
            e.emit(Instruction::PopI { dst: T5 });
            e.emit(Instruction::PopI { dst: T6 });
            e.alu(AluOp::Add, T6, T6, Src::Reg(PAY));
            e.emit(Instruction::PushI { src: Src::Reg(T5) });
            e.emit(Instruction::PushI { src: Src::Reg(T6) });
            loc.advance_pos(e, slot);
            e.jmp(next);
        }
        e.bind(next);
        e.alu(AluOp::Sub, REM, REM, Src::Imm(1));
        e.jnz(REM, recv_top);
        loc.realign(e);
    }

    // Barrier: global dangling mass.
    e.send(Port::Host, TAG_REDUCE);
    e.send_reg(Port::Host, ACC);
    e.emit(Instruction::Recv { dst: AUX, port: Port::Host });
    e.emit(Instruction::Ldi { dst: ACC, imm: 0 });

    // rank = base + d * (in + dangling / V)
    let inv_v = q16(1.0 / n);
    let base = q16((1.0 - d) / n);
    let dq = q16(d);
    for _ in loc.members {
        e.emit(Instruction::PopI { dst: T5 });
        e.emit(Instruction::PopI { dst: T6 });
        let b = e.src(inv_v, SCRATCH);
        e.alu(AluOp::Macq, T6, AUX, b);
        e.load_const(T5, base);
        let b = e.src(dq, SCRATCH);
        e.alu(AluOp::Macq, T5, T6, b);
        e.emit(Instruction::PushI { src: Src::Reg(T5) });
        e.emit(Instruction::PushI { src: Src::Imm(0) });
    }

    e.alu(AluOp::Sub, CNT, CNT, Src::Imm(1));
    e.jnz(CNT, iter_top);
    loc.output_sweep(e);
    e.bind(trap);
    e.emit(Instruction::Halt);
}

/// Neighbours of `u` with a larger id, ascending.
fn higher(g: &Graph, u: VertexId) -> Vec<VertexId> {
    g.adj(u).map(|(v, _)| v).filter(|&v| v > u).collect()
}

/// Triangle counting: for every local `u` and pair `v < w` of its higher
/// neighbours, ask `v` whether `w` is one of its higher neighbours.
fn gen_minitri(cid: ClusterId, loc: &Local, expected: usize, e: &mut Emitter) {
    let g = loc.g;
    let trap = e.named("trap");
    for &u in loc.members {
        let h = higher(g, u);
        for (i, &v) in h.iter().enumerate() {
            for &w in &h[i + 1..] {
                let dest = e.src(v as i32, SCRATCH);
                let payload = e.src(w as i32, T4);
                send_pair(e, dest, payload);
            }
        }
    }
    if expected > 0 {
        let recv_top = e.named("receive");
        let next = e.label();
        let hit = e.label();
        e.load_const(REM, expected as i32);
        e.bind(recv_top);
        e.emit(Instruction::Recv { dst: HDR, port: Port::Net });
        e.emit(Instruction::Recv { dst: PAY, port: Port::Net });
        let leaves = loc.leaves(e);
        loc.dispatch_header(e, &leaves, trap);
        for (&v, &(_, leaf)) in loc.members.iter().zip(&leaves) {
            e.bind(leaf);
            let keys: Vec<(i32, Label)> = higher(g, v).into_iter().map(|w| (w as i32, hit)).collect();
            e.bsearch(PAY, &keys, next);
        }
        e.bind(hit);
        e.alu(AluOp::Add, ACC, ACC, Src::Imm(1));
        e.bind(next);
        e.alu(AluOp::Sub, REM, REM, Src::Imm(1));
        e.jnz(REM, recv_top);
    }
    e.send(Port::Host, cid as i32);
    e.send_reg(Port::Host, ACC);
    e.emit(Instruction::Halt);
    e.bind(trap);
    e.emit(Instruction::Halt);
}

/// Next hop from `from` towards `to`, columns first.
pub fn xy_step(from: Coord, to: Coord) -> Option<Port> {
    use std::cmp::Ordering::*;
    match (to.1.cmp(&from.1), to.0.cmp(&from.0)) {
        (Greater, _) => Some(Port::East),
        (Less, _) => Some(Port::West),
        (Equal, Greater) => Some(Port::South),
        (Equal, Less) => Some(Port::North),
        (Equal, Equal) => None,
    }
}

fn step(at: Coord, port: Port) -> Coord {
    match port {
        Port::East => (at.0, at.1 + 1),
        Port::West => (at.0, at.1 - 1),
        Port::South => (at.0 + 1, at.1),
        Port::North => (at.0 - 1, at.1),
        _ => at,
    }
}

/// Message-carrying cluster pairs, both directions. A message from `a` to
/// `b` exists only if some edge joins them, in either orientation (DFS
/// returns tokens against the edge direction).
fn traffic(g: &Graph, cluster_of: &[ClusterId]) -> Vec<(ClusterId, ClusterId)> {
    let mut pairs = std::collections::BTreeSet::new();
    for (u, v, _) in g.edges() {
        let (a, b) = (cluster_of[u as usize], cluster_of[v as usize]);
        if a != b {
            pairs.insert((a, b));
            pairs.insert((b, a));
        }
    }
    pairs.into_iter().collect()
}

fn routing_tables(
    g: &Graph,
    cluster_of: &[ClusterId],
    coord_of: &[Coord],
    dims: (usize, usize),
) -> Vec<BTreeMap<ClusterId, Port>> {
    let mut tables = vec![BTreeMap::new(); dims.0 * dims.1];
    for (a, b) in traffic(g, cluster_of) {
        let dest = coord_of[b as usize];
        let mut at = coord_of[a as usize];
        while let Some(port) = xy_step(at, dest) {
            tables[at.0 * dims.1 + at.1].insert(b, port);
            at = step(at, port);
        }
    }
    tables
}

/// Generates the machine image for a partitioned and placed kernel.
pub fn codegen(
    spec: &KernelSpec,
    g: &Graph,
    p: &Partition,
    pl: &Placement,
    mode: MappingMode,
) -> Result<CompiledApp, CompileError> {
    let v = g.vertex_count();
    let k = p.cluster_count;
    if p.cluster_of.len() != v {
        return Err(CompileError::Inconsistent(format!("partition covers {} of {v} vertices", p.cluster_of.len())));
    }
    if pl.coord_of.len() != k {
        return Err(CompileError::Inconsistent(format!("placement has {} of {k} clusters", pl.coord_of.len())));
    }
    pl.validate().map_err(CompileError::Inconsistent)?;
    p.validate(v).map_err(CompileError::Inconsistent)?;
    if mode == MappingMode::Node && k != v {
        return Err(CompileError::ModeMismatch { clusters: k, vertices: v });
    }
    if let Some(s) = spec.source {
        if s as usize >= v {
            return Err(CompileError::Inconsistent(format!("source {s} outside {v} vertices")));
        }
    }

    let dims = pl.dims;
    let nale_of = |c: ClusterId| {
        let (r, col) = pl.coord_of[c as usize];
        r * dims.1 + col
    };
    let members = p.members();
    let rw = match spec.kind {
        KernelKind::Sssp | KernelKind::Bfs | KernelKind::Cc => 1,
        KernelKind::PageRank => 2,
        KernelKind::Dfs => 3,
        KernelKind::MiniTri => 0,
    };

    // Statically known receive counts.
    let mut expected = vec![0usize; k];
    match spec.kind {
        KernelKind::PageRank => {
            for (_, t, _) in g.edges() {
                expected[p.cluster_of[t as usize] as usize] += 1;
            }
        }
        KernelKind::MiniTri => {
            for u in 0..v as VertexId {
                let h = higher(g, u);
                for (i, &x) in h.iter().enumerate() {
                    expected[p.cluster_of[x as usize] as usize] += h.len() - i - 1;
                }
            }
        }
        _ => {}
    }
    let quiet = g.edge_count() == 0;

    let mut programs = vec![None; dims.0 * dims.1];
    for c in 0..k {
        let at = pl.coord_of[c];
        let loc = Local { g, members: &members[c], rw: rw.max(1) };
        let mut e = Emitter::default();
        match spec.kind {
            KernelKind::Sssp | KernelKind::Bfs | KernelKind::Cc => gen_relax(spec.kind, &loc, quiet, &mut e),
            KernelKind::Dfs => gen_dfs(spec.source.expect("validated spec"), &loc, &mut e),
            KernelKind::PageRank => gen_pagerank(spec, &loc, expected[c], &mut e),
            KernelKind::MiniTri => gen_minitri(c as ClusterId, &loc, expected[c], &mut e),
        }
        programs[nale_of(c as ClusterId)] = Some(e.finish(at)?);
    }

    let dispatch: Vec<DispatchEntry> = if spec.kind == KernelKind::MiniTri {
        Vec::new()
    } else {
        (0..v as VertexId)
            .map(|u| {
                let value = match spec.kind {
                    KernelKind::Sssp | KernelKind::Bfs => {
                        if Some(u) == spec.source {
                            0
                        } else {
                            INF_WORD
                        }
                    }
                    KernelKind::Cc => u as i32,
                    KernelKind::PageRank => q16(1.0 / v as f64),
                    _ => -1,
                };
                DispatchEntry { vertex: u, nale: nale_of(p.cluster_of[u as usize]), value }
            })
            .collect()
    };
    let gather = if spec.kind == KernelKind::MiniTri {
        (0..k as ClusterId).map(|c| GatherEntry { nale: nale_of(c), header: c as i32 }).collect()
    } else {
        (0..v as VertexId)
            .map(|u| GatherEntry { nale: nale_of(p.cluster_of[u as usize]), header: u as i32 })
            .collect()
    };

    let fifo_words = members.iter().map(|m| m.len() * rw).max().unwrap_or(0);
    Ok(CompiledApp {
        kernel: *spec,
        mode,
        dims,
        vertex_count: v,
        cluster_of: p.cluster_of.clone(),
        coord_of: pl.coord_of.clone(),
        programs,
        routing: routing_tables(g, &p.cluster_of, &pl.coord_of, dims),
        dispatch,
        gather,
        fifo_words,
    })
}
