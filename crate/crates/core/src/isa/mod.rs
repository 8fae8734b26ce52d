//! NALE instruction set: instruction model, fixed 32-bit encoding and the
//! binary program file.
//!
//! Word layout (bit ranges inclusive):
//!
//! ```text
//! [31:26] opcode  [25:22] dst  [21] modeA  [20:17] srcA  [16] modeB  [15:0] srcB
//! ```
//!
//! * `modeA = 1` makes `srcA` a 4-bit unsigned immediate, otherwise a register.
//! * `modeB = 1` makes `srcB` a 16-bit immediate, otherwise bits `[3:0]` hold a
//!   register and bits `[15:4]` are zero.
//! * Branch targets are unsigned 16-bit values in `srcB` (`modeB = 1`); the
//!   condition register of `JZ`/`JNZ` sits in `srcA`.
//! * Port instructions store the port code in `srcA` (`modeA = 0`).
//! * Every field an instruction does not use must be zero. Decoding rejects
//!   anything else, which makes encode/decode a bijection on valid words.

mod asm;

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use asm::{assemble, disassemble};

/// Number of general registers.
pub const REGISTER_COUNT: u8 = 16;

/// Register written by `TRYRECV`: 1 when a word was taken, 0 otherwise.
pub const STATUS_REG: Reg = Reg(15);

/// General register index, `0..16`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Reg(pub u8);

impl fmt::Display for Reg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

/// Second source operand: a register or a signed 16-bit immediate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Src {
    Reg(Reg),
    Imm(i16),
}

impl From<Reg> for Src {
    fn from(r: Reg) -> Self {
        Src::Reg(r)
    }
}

/// First source operand: a register or a 4-bit unsigned immediate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SrcA {
    Reg(Reg),
    Imm(u8),
}

impl From<Reg> for SrcA {
    fn from(r: Reg) -> Self {
        SrcA::Reg(r)
    }
}

/// Channel selector for `SEND`/`RECV`/`TRYRECV`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Port {
    North,
    South,
    East,
    West,
    /// The internal FIFO, same as `PUSHI`/`POPI`.
    Internal,
    /// Dispatch-in / gather-out link to the host logic.
    Host,
    /// Routed packet network.
    Net,
}

impl Port {
    pub const ALL: [Port; 7] =
        [Port::North, Port::South, Port::East, Port::West, Port::Internal, Port::Host, Port::Net];

    pub const MESH: [Port; 4] = [Port::North, Port::South, Port::East, Port::West];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Port> {
        Port::ALL.get(code as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Port::North => "NORTH",
            Port::South => "SOUTH",
            Port::East => "EAST",
            Port::West => "WEST",
            Port::Internal => "INTERNAL",
            Port::Host => "HOST",
            Port::Net => "NET",
        }
    }

    pub fn opposite(self) -> Port {
        match self {
            Port::North => Port::South,
            Port::South => Port::North,
            Port::East => Port::West,
            Port::West => Port::East,
            other => other,
        }
    }
}

impl fmt::Display for Port {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Operation code, the 6-bit field of an encoded word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Opcode {
    Nop = 0,
    Halt = 1,
    Ldi = 2,
    Mov = 3,
    Add = 4,
    Sub = 5,
    Mul = 6,
    Mac = 7,
    /// Q16.16 multiply-accumulate; executes on the MAC unit.
    Macq = 8,
    Cmp3 = 9,
    Min = 10,
    Jmp = 11,
    Jz = 12,
    Jnz = 13,
    Send = 14,
    Recv = 15,
    TryRecv = 16,
    PushI = 17,
    PopI = 18,
    IterI = 19,
}

impl Opcode {
    pub const ALL: [Opcode; 20] = [
        Opcode::Nop,
        Opcode::Halt,
        Opcode::Ldi,
        Opcode::Mov,
        Opcode::Add,
        Opcode::Sub,
        Opcode::Mul,
        Opcode::Mac,
        Opcode::Macq,
        Opcode::Cmp3,
        Opcode::Min,
        Opcode::Jmp,
        Opcode::Jz,
        Opcode::Jnz,
        Opcode::Send,
        Opcode::Recv,
        Opcode::TryRecv,
        Opcode::PushI,
        Opcode::PopI,
        Opcode::IterI,
    ];

    pub fn from_code(code: u8) -> Option<Opcode> {
        Opcode::ALL.get(code as usize).copied()
    }

    pub fn mnemonic(self) -> &'static str {
        match self {
            Opcode::Nop => "NOP",
            Opcode::Halt => "HALT",
            Opcode::Ldi => "LDI",
            Opcode::Mov => "MOV",
            Opcode::Add => "ADD",
            Opcode::Sub => "SUB",
            Opcode::Mul => "MUL",
            Opcode::Mac => "MAC",
            Opcode::Macq => "MACQ",
            Opcode::Cmp3 => "CMP3",
            Opcode::Min => "MIN",
            Opcode::Jmp => "JMP",
            Opcode::Jz => "JZ",
            Opcode::Jnz => "JNZ",
            Opcode::Send => "SEND",
            Opcode::Recv => "RECV",
            Opcode::TryRecv => "TRYRECV",
            Opcode::PushI => "PUSHI",
            Opcode::PopI => "POPI",
            Opcode::IterI => "ITERI",
        }
    }

    pub fn from_mnemonic(s: &str) -> Option<Opcode> {
        let upper = s.to_ascii_uppercase();
        Opcode::ALL.iter().copied().find(|op| op.mnemonic() == upper)
    }
}

impl fmt::Display for Opcode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.mnemonic())
    }
}

/// Three-operand datapath operations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AluOp {
    Add,
    Sub,
    Mul,
    /// `dst += a * b`
    Mac,
    /// `dst += round(a * b / 2^16)`
    Macq,
    /// `dst = -1, 0, +1` for `a <, =, > b`
    Cmp3,
    Min,
}

impl AluOp {
    pub fn opcode(self) -> Opcode {
        match self {
            AluOp::Add => Opcode::Add,
            AluOp::Sub => Opcode::Sub,
            AluOp::Mul => Opcode::Mul,
            AluOp::Mac => Opcode::Mac,
            AluOp::Macq => Opcode::Macq,
            AluOp::Cmp3 => Opcode::Cmp3,
            AluOp::Min => Opcode::Min,
        }
    }

    fn from_opcode(op: Opcode) -> Option<AluOp> {
        Some(match op {
            Opcode::Add => AluOp::Add,
            Opcode::Sub => AluOp::Sub,
            Opcode::Mul => AluOp::Mul,
            Opcode::Mac => AluOp::Mac,
            Opcode::Macq => AluOp::Macq,
            Opcode::Cmp3 => AluOp::Cmp3,
            Opcode::Min => AluOp::Min,
            _ => return None,
        })
    }

    /// Evaluates the operation. `acc` is the current destination value, used
    /// by the accumulating forms.
    pub fn eval(self, acc: i32, a: i32, b: i32) -> i32 {
        match self {
            AluOp::Add => a.wrapping_add(b),
            AluOp::Sub => a.wrapping_sub(b),
            AluOp::Mul => a.wrapping_mul(b),
            AluOp::Mac => acc.wrapping_add(a.wrapping_mul(b)),
            AluOp::Macq => {
                let prod = (a as i64 * b as i64 + (1 << 15)) >> 16;
                acc.wrapping_add(prod as i32)
            }
            AluOp::Cmp3 => match a.cmp(&b) {
                std::cmp::Ordering::Less => -1,
                std::cmp::Ordering::Equal => 0,
                std::cmp::Ordering::Greater => 1,
            },
            AluOp::Min => a.min(b),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Instruction {
    Nop,
    Halt,
    Ldi { dst: Reg, imm: i16 },
    Mov { dst: Reg, src: Src },
    Alu { op: AluOp, dst: Reg, a: SrcA, b: Src },
    Jmp { target: u16 },
    Jz { cond: Reg, target: u16 },
    Jnz { cond: Reg, target: u16 },
    Send { port: Port, src: Src },
    Recv { dst: Reg, port: Port },
    TryRecv { dst: Reg, port: Port },
    PushI { src: Src },
    PopI { dst: Reg },
    /// Rotates `count` words from the internal FIFO head to its tail.
    IterI { count: Src },
}

impl Instruction {
    pub fn opcode(&self) -> Opcode {
        match self {
            Instruction::Nop => Opcode::Nop,
            Instruction::Halt => Opcode::Halt,
            Instruction::Ldi { .. } => Opcode::Ldi,
            Instruction::Mov { .. } => Opcode::Mov,
            Instruction::Alu { op, .. } => op.opcode(),
            Instruction::Jmp { .. } => Opcode::Jmp,
            Instruction::Jz { .. } => Opcode::Jz,
            Instruction::Jnz { .. } => Opcode::Jnz,
            Instruction::Send { .. } => Opcode::Send,
            Instruction::Recv { .. } => Opcode::Recv,
            Instruction::TryRecv { .. } => Opcode::TryRecv,
            Instruction::PushI { .. } => Opcode::PushI,
            Instruction::PopI { .. } => Opcode::PopI,
            Instruction::IterI { .. } => Opcode::IterI,
        }
    }

    pub fn branch_target(&self) -> Option<u16> {
        match *self {
            Instruction::Jmp { target } | Instruction::Jz { target, .. } | Instruction::Jnz { target, .. } => {
                Some(target)
            }
            _ => None,
        }
    }

    pub(crate) fn with_target(self, new: u16) -> Instruction {
        match self {
            Instruction::Jmp { .. } => Instruction::Jmp { target: new },
            Instruction::Jz { cond, .. } => Instruction::Jz { cond, target: new },
            Instruction::Jnz { cond, .. } => Instruction::Jnz { cond, target: new },
            other => other,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EncodeError {
    #[error("register r{0} out of range (0..16)")]
    RegisterOutOfRange(u8),
    #[error("4-bit immediate {0} out of range (0..16)")]
    ImmediateOutOfRange(u8),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DecodeError {
    #[error("undefined opcode {opcode} in word {word:#010x}")]
    UndefinedOpcode { opcode: u8, word: u32 },
    #[error("malformed operands for {opcode} in word {word:#010x}: {reason}")]
    MalformedOperand { opcode: Opcode, word: u32, reason: &'static str },
}

const MODE_A: u32 = 1 << 21;
const MODE_B: u32 = 1 << 16;

fn reg_bits(r: Reg) -> Result<u32, EncodeError> {
    if r.0 >= REGISTER_COUNT {
        return Err(EncodeError::RegisterOutOfRange(r.0));
    }
    Ok(r.0 as u32)
}

fn dst_field(r: Reg) -> Result<u32, EncodeError> {
    Ok(reg_bits(r)? << 22)
}

fn a_field(a: SrcA) -> Result<u32, EncodeError> {
    Ok(match a {
        SrcA::Reg(r) => reg_bits(r)? << 17,
        SrcA::Imm(v) if v < 16 => MODE_A | (v as u32) << 17,
        SrcA::Imm(v) => return Err(EncodeError::ImmediateOutOfRange(v)),
    })
}

fn b_field(b: Src) -> Result<u32, EncodeError> {
    Ok(match b {
        Src::Reg(r) => reg_bits(r)?,
        Src::Imm(v) => MODE_B | v as u16 as u32,
    })
}

fn target_field(t: u16) -> u32 {
    MODE_B | t as u32
}

/// Encodes one instruction into its 32-bit word.
pub fn encode(i: &Instruction) -> Result<u32, EncodeError> {
    let op = (i.opcode() as u32) << 26;
    let rest = match *i {
        Instruction::Nop | Instruction::Halt => 0,
        Instruction::Ldi { dst, imm } => dst_field(dst)? | b_field(Src::Imm(imm))?,
        Instruction::Mov { dst, src } => dst_field(dst)? | b_field(src)?,
        Instruction::Alu { dst, a, b, .. } => dst_field(dst)? | a_field(a)? | b_field(b)?,
        Instruction::Jmp { target } => target_field(target),
        Instruction::Jz { cond, target } | Instruction::Jnz { cond, target } => {
            a_field(SrcA::Reg(cond))? | target_field(target)
        }
        Instruction::Send { port, src } => (port.code() as u32) << 17 | b_field(src)?,
        Instruction::Recv { dst, port } | Instruction::TryRecv { dst, port } => {
            dst_field(dst)? | (port.code() as u32) << 17
        }
        Instruction::PushI { src } => b_field(src)?,
        Instruction::PopI { dst } => dst_field(dst)?,
        Instruction::IterI { count } => b_field(count)?,
    };
    Ok(op | rest)
}

struct Fields {
    word: u32,
    opcode: Opcode,
    dst: u8,
    mode_a: bool,
    src_a: u8,
    mode_b: bool,
    src_b: u16,
}

impl Fields {
    fn malformed(&self, reason: &'static str) -> DecodeError {
        DecodeError::MalformedOperand { opcode: self.opcode, word: self.word, reason }
    }

    fn no_dst(&self) -> Result<(), DecodeError> {
        if self.dst != 0 {
            return Err(self.malformed("dst field must be zero"));
        }
        Ok(())
    }

    fn no_a(&self) -> Result<(), DecodeError> {
        if self.mode_a || self.src_a != 0 {
            return Err(self.malformed("srcA field must be zero"));
        }
        Ok(())
    }

    fn no_b(&self) -> Result<(), DecodeError> {
        if self.mode_b || self.src_b != 0 {
            return Err(self.malformed("srcB field must be zero"));
        }
        Ok(())
    }

    fn a_reg(&self) -> Result<Reg, DecodeError> {
        if self.mode_a {
            return Err(self.malformed("srcA must be a register"));
        }
        Ok(Reg(self.src_a))
    }

    fn a(&self) -> SrcA {
        if self.mode_a {
            SrcA::Imm(self.src_a)
        } else {
            SrcA::Reg(Reg(self.src_a))
        }
    }

    fn b(&self) -> Result<Src, DecodeError> {
        if self.mode_b {
            Ok(Src::Imm(self.src_b as i16))
        } else if self.src_b >= 16 {
            Err(self.malformed("register srcB has non-zero high bits"))
        } else {
            Ok(Src::Reg(Reg(self.src_b as u8)))
        }
    }

    fn target(&self) -> Result<u16, DecodeError> {
        if !self.mode_b {
            return Err(self.malformed("branch target must be immediate"));
        }
        Ok(self.src_b)
    }

    fn port(&self) -> Result<Port, DecodeError> {
        if self.mode_a {
            return Err(self.malformed("port field must not set modeA"));
        }
        Port::from_code(self.src_a).ok_or_else(|| self.malformed("undefined port code"))
    }
}

/// Decodes a 32-bit word.
pub fn decode(word: u32) -> Result<Instruction, DecodeError> {
    let code = (word >> 26) as u8;
    let opcode = Opcode::from_code(code).ok_or(DecodeError::UndefinedOpcode { opcode: code, word })?;
    let f = Fields {
        word,
        opcode,
        dst: ((word >> 22) & 0xF) as u8,
        mode_a: word & MODE_A != 0,
        src_a: ((word >> 17) & 0xF) as u8,
        mode_b: word & MODE_B != 0,
        src_b: (word & 0xFFFF) as u16,
    };
    let dst = Reg(f.dst);
    Ok(match opcode {
        Opcode::Nop | Opcode::Halt => {
            f.no_dst()?;
            f.no_a()?;
            f.no_b()?;
            if opcode == Opcode::Nop {
                Instruction::Nop
            } else {
                Instruction::Halt
            }
        }
        Opcode::Ldi => {
            f.no_a()?;
            match f.b()? {
                Src::Imm(imm) => Instruction::Ldi { dst, imm },
                Src::Reg(_) => return Err(f.malformed("LDI needs an immediate")),
            }
        }
        Opcode::Mov => {
            f.no_a()?;
            Instruction::Mov { dst, src: f.b()? }
        }
        Opcode::Add | Opcode::Sub | Opcode::Mul | Opcode::Mac | Opcode::Macq | Opcode::Cmp3 | Opcode::Min => {
            let op = AluOp::from_opcode(opcode).expect("ALU opcode");
            Instruction::Alu { op, dst, a: f.a(), b: f.b()? }
        }
        Opcode::Jmp => {
            f.no_dst()?;
            f.no_a()?;
            Instruction::Jmp { target: f.target()? }
        }
        Opcode::Jz | Opcode::Jnz => {
            f.no_dst()?;
            let cond = f.a_reg()?;
            let target = f.target()?;
            if opcode == Opcode::Jz {
                Instruction::Jz { cond, target }
            } else {
                Instruction::Jnz { cond, target }
            }
        }
        Opcode::Send => {
            f.no_dst()?;
            Instruction::Send { port: f.port()?, src: f.b()? }
        }
        Opcode::Recv | Opcode::TryRecv => {
            f.no_b()?;
            let port = f.port()?;
            if opcode == Opcode::Recv {
                Instruction::Recv { dst, port }
            } else {
                Instruction::TryRecv { dst, port }
            }
        }
        Opcode::PushI => {
            f.no_dst()?;
            f.no_a()?;
            Instruction::PushI { src: f.b()? }
        }
        Opcode::PopI => {
            f.no_a()?;
            f.no_b()?;
            Instruction::PopI { dst }
        }
        Opcode::IterI => {
            f.no_dst()?;
            f.no_a()?;
            Instruction::IterI { count: f.b()? }
        }
    })
}

#[derive(Debug, Error)]
pub enum ProgramError {
    #[error("instruction {index}: branch target {target} outside program of length {len}")]
    BranchOutOfRange { index: usize, target: u16, len: usize },
    #[error("program has {0} instructions; branch targets address at most 65536")]
    TooLong(usize),
    #[error("instruction {index}: {source}")]
    Encode { index: usize, source: EncodeError },
    #[error("word {index}: {source}")]
    Decode { index: usize, source: DecodeError },
    #[error("bad program file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Program loaded into one NALE. Execution starts at index 0; running past
/// the last instruction halts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NaleProgram {
    pub instructions: Vec<Instruction>,
    /// Assembler-level names; not part of the binary form.
    pub labels: BTreeMap<String, usize>,
}

pub const PROGRAM_MAGIC: &[u8; 4] = b"NALE";
pub const PROGRAM_VERSION: u8 = 1;

impl NaleProgram {
    pub fn new(instructions: Vec<Instruction>) -> Self {
        NaleProgram { instructions, labels: BTreeMap::new() }
    }

    pub fn len(&self) -> usize {
        self.instructions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instructions.is_empty()
    }

    pub fn validate(&self) -> Result<(), ProgramError> {
        let len = self.instructions.len();
        if len > u16::MAX as usize + 1 {
            return Err(ProgramError::TooLong(len));
        }
        for (index, inst) in self.instructions.iter().enumerate() {
            if let Some(target) = inst.branch_target() {
                if target as usize >= len {
                    return Err(ProgramError::BranchOutOfRange { index, target, len });
                }
            }
        }
        Ok(())
    }

    pub fn encode(&self) -> Result<Vec<u32>, ProgramError> {
        self.validate()?;
        self.instructions
            .iter()
            .enumerate()
            .map(|(index, i)| encode(i).map_err(|source| ProgramError::Encode { index, source }))
            .collect()
    }

    pub fn decode(words: &[u32]) -> Result<Self, ProgramError> {
        let instructions = words
            .iter()
            .enumerate()
            .map(|(index, &w)| decode(w).map_err(|source| ProgramError::Decode { index, source }))
            .collect::<Result<Vec<_>, _>>()?;
        let p = NaleProgram::new(instructions);
        p.validate()?;
        Ok(p)
    }

    /// Binary program file: magic `NALE`, version byte, little-endian `u32`
    /// word count, then little-endian words.
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<(), ProgramError> {
        write_words(&self.encode()?, &mut out)
    }
}

pub fn write_words<W: Write>(words: &[u32], mut out: W) -> Result<(), ProgramError> {
    out.write_all(PROGRAM_MAGIC)?;
    out.write_all(&[PROGRAM_VERSION])?;
    out.write_all(&(words.len() as u32).to_le_bytes())?;
    for w in words {
        out.write_all(&w.to_le_bytes())?;
    }
    Ok(())
}

/// Reads raw words from a program file without decoding them, so that a
/// machine can load (and later fault on) undefined encodings.
pub fn read_words<R: Read>(mut input: R) -> Result<Vec<u32>, ProgramError> {
    let mut header = [0u8; 9];
    input.read_exact(&mut header).map_err(|_| ProgramError::Format("truncated header".into()))?;
    if &header[..4] != PROGRAM_MAGIC {
        return Err(ProgramError::Format("missing NALE magic".into()));
    }
    if header[4] != PROGRAM_VERSION {
        return Err(ProgramError::Format(format!("unsupported version {}", header[4])));
    }
    let count = u32::from_le_bytes(header[5..9].try_into().unwrap()) as usize;
    let mut body = Vec::new();
    input.read_to_end(&mut body)?;
    if body.len() != count * 4 {
        return Err(ProgramError::Format(format!("expected {} body bytes, found {}", count * 4, body.len())));
    }
    Ok(body.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().unwrap())).collect())
}

#[cfg(test)]
pub(crate) mod strategy {
    use super::*;
    use proptest::prelude::*;

    fn reg() -> impl Strategy<Value = Reg> {
        (0u8..16).prop_map(Reg)
    }

    fn src() -> impl Strategy<Value = Src> {
        prop_oneof![reg().prop_map(Src::Reg), any::<i16>().prop_map(Src::Imm)]
    }

    fn src_a() -> impl Strategy<Value = SrcA> {
        prop_oneof![reg().prop_map(SrcA::Reg), (0u8..16).prop_map(SrcA::Imm)]
    }

    fn port() -> impl Strategy<Value = Port> {
        proptest::sample::select(Port::ALL.to_vec())
    }

    fn alu() -> impl Strategy<Value = AluOp> {
        proptest::sample::select(vec![
            AluOp::Add,
            AluOp::Sub,
            AluOp::Mul,
            AluOp::Mac,
            AluOp::Macq,
            AluOp::Cmp3,
            AluOp::Min,
        ])
    }

    /// Any encodable instruction; branch targets are bounded by `max_target`.
    pub fn instruction(max_target: u16) -> impl Strategy<Value = Instruction> {
        prop_oneof![
            Just(Instruction::Nop),
            Just(Instruction::Halt),
            (reg(), any::<i16>()).prop_map(|(dst, imm)| Instruction::Ldi { dst, imm }),
            (reg(), src()).prop_map(|(dst, src)| Instruction::Mov { dst, src }),
            (alu(), reg(), src_a(), src()).prop_map(|(op, dst, a, b)| Instruction::Alu { op, dst, a, b }),
            (0..=max_target).prop_map(|target| Instruction::Jmp { target }),
            (reg(), 0..=max_target).prop_map(|(cond, target)| Instruction::Jz { cond, target }),
            (reg(), 0..=max_target).prop_map(|(cond, target)| Instruction::Jnz { cond, target }),
            (port(), src()).prop_map(|(port, src)| Instruction::Send { port, src }),
            (reg(), port()).prop_map(|(dst, port)| Instruction::Recv { dst, port }),
            (reg(), port()).prop_map(|(dst, port)| Instruction::TryRecv { dst, port }),
            src().prop_map(|src| Instruction::PushI { src }),
            reg().prop_map(|dst| Instruction::PopI { dst }),
            src().prop_map(|count| Instruction::IterI { count }),
        ]
    }
}
