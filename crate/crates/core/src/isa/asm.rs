//! Two-pass assembler and matching disassembler.
//!
//! One instruction per line, optionally preceded by `name:` labels; `;`
//! starts a comment. Registers are `r0`..`r15`, immediates `#n` (decimal or
//! `0x` hex), ports by name, branch targets by label or `@index`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use super::{AluOp, Instruction, NaleProgram, Opcode, Port, Reg, Src, SrcA, REGISTER_COUNT};

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}: {kind}")]
pub struct AsmError {
    pub line: usize,
    pub kind: AsmErrorKind,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AsmErrorKind {
    #[error("unknown mnemonic {0:?}")]
    UnknownMnemonic(String),
    #[error("undefined label {0:?}")]
    UndefinedLabel(String),
    #[error("duplicate label {0:?}")]
    DuplicateLabel(String),
    #[error("invalid label name {0:?}")]
    InvalidLabel(String),
    #[error("{mnemonic} expects {expected} operand(s), found {found}")]
    OperandCount { mnemonic: &'static str, expected: usize, found: usize },
    #[error("bad operand {0:?}: {1}")]
    BadOperand(String, &'static str),
    #[error("branch target {0} outside program of length {1}")]
    TargetOutOfRange(usize, usize),
}

enum Target {
    Label(String),
    Index(usize),
}

struct Pending {
    line: usize,
    inst: Instruction,
    target: Option<Target>,
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
}

fn parse_int(s: &str) -> Option<i64> {
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let v = if let Some(hex) = body.strip_prefix("0x").or_else(|| body.strip_prefix("0X")) {
        i64::from_str_radix(hex, 16).ok()?
    } else {
        body.parse::<i64>().ok()?
    };
    Some(if neg { -v } else { v })
}

fn parse_reg(tok: &str) -> Result<Reg, AsmErrorKind> {
    let bad = || AsmErrorKind::BadOperand(tok.to_string(), "expected register r0..r15");
    let n = tok.strip_prefix(['r', 'R']).ok_or_else(bad)?;
    let n: u8 = n.parse().map_err(|_| bad())?;
    if n >= REGISTER_COUNT {
        return Err(bad());
    }
    Ok(Reg(n))
}

fn parse_imm(tok: &str) -> Option<i64> {
    tok.strip_prefix('#').and_then(parse_int)
}

fn parse_src(tok: &str) -> Result<Src, AsmErrorKind> {
    if tok.starts_with('#') {
        let v = parse_imm(tok).ok_or_else(|| AsmErrorKind::BadOperand(tok.into(), "bad immediate"))?;
        let v = i16::try_from(v).map_err(|_| AsmErrorKind::BadOperand(tok.into(), "immediate exceeds 16 bits"))?;
        Ok(Src::Imm(v))
    } else {
        parse_reg(tok).map(Src::Reg)
    }
}

fn parse_src_a(tok: &str) -> Result<SrcA, AsmErrorKind> {
    if tok.starts_with('#') {
        let v = parse_imm(tok).ok_or_else(|| AsmErrorKind::BadOperand(tok.into(), "bad immediate"))?;
        if !(0..16).contains(&v) {
            return Err(AsmErrorKind::BadOperand(tok.into(), "first-operand immediate must be 0..15"));
        }
        Ok(SrcA::Imm(v as u8))
    } else {
        parse_reg(tok).map(SrcA::Reg)
    }
}

fn parse_port(tok: &str) -> Result<Port, AsmErrorKind> {
    let upper = tok.to_ascii_uppercase();
    Port::ALL
        .iter()
        .copied()
        .find(|p| p.name() == upper)
        .ok_or_else(|| AsmErrorKind::BadOperand(tok.into(), "unknown port"))
}

fn parse_target(tok: &str) -> Result<Target, AsmErrorKind> {
    if let Some(n) = tok.strip_prefix('@') {
        let i: usize = n.parse().map_err(|_| AsmErrorKind::BadOperand(tok.into(), "bad index"))?;
        Ok(Target::Index(i))
    } else if is_ident(tok) {
        Ok(Target::Label(tok.to_string()))
    } else {
        Err(AsmErrorKind::BadOperand(tok.into(), "expected label or @index"))
    }
}

fn alu_for(op: Opcode) -> Option<AluOp> {
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

fn parse_instruction(mnemonic: &str, ops: &[&str]) -> Result<(Instruction, Option<Target>), AsmErrorKind> {
    let op = Opcode::from_mnemonic(mnemonic).ok_or_else(|| AsmErrorKind::UnknownMnemonic(mnemonic.into()))?;
    let expected = match op {
        Opcode::Nop | Opcode::Halt => 0,
        Opcode::Jmp | Opcode::PushI | Opcode::PopI | Opcode::IterI => 1,
        Opcode::Ldi | Opcode::Mov | Opcode::Jz | Opcode::Jnz | Opcode::Send | Opcode::Recv | Opcode::TryRecv => 2,
        _ => 3,
    };
    if ops.len() != expected {
        return Err(AsmErrorKind::OperandCount { mnemonic: op.mnemonic(), expected, found: ops.len() });
    }
    let mut target = None;
    let inst = match op {
        Opcode::Nop => Instruction::Nop,
        Opcode::Halt => Instruction::Halt,
        Opcode::Ldi => match parse_src(ops[1])? {
            Src::Imm(imm) => Instruction::Ldi { dst: parse_reg(ops[0])?, imm },
            Src::Reg(_) => return Err(AsmErrorKind::BadOperand(ops[1].into(), "LDI needs an immediate")),
        },
        Opcode::Mov => Instruction::Mov { dst: parse_reg(ops[0])?, src: parse_src(ops[1])? },
        Opcode::Jmp => {
            target = Some(parse_target(ops[0])?);
            Instruction::Jmp { target: 0 }
        }
        Opcode::Jz | Opcode::Jnz => {
            let cond = parse_reg(ops[0])?;
            target = Some(parse_target(ops[1])?);
            if op == Opcode::Jz {
                Instruction::Jz { cond, target: 0 }
            } else {
                Instruction::Jnz { cond, target: 0 }
            }
        }
        Opcode::Send => Instruction::Send { port: parse_port(ops[0])?, src: parse_src(ops[1])? },
        Opcode::Recv => Instruction::Recv { dst: parse_reg(ops[0])?, port: parse_port(ops[1])? },
        Opcode::TryRecv => Instruction::TryRecv { dst: parse_reg(ops[0])?, port: parse_port(ops[1])? },
        Opcode::PushI => Instruction::PushI { src: parse_src(ops[0])? },
        Opcode::PopI => Instruction::PopI { dst: parse_reg(ops[0])? },
        Opcode::IterI => Instruction::IterI { count: parse_src(ops[0])? },
        alu => Instruction::Alu {
            op: alu_for(alu).expect("remaining opcodes are ALU"),
            dst: parse_reg(ops[0])?,
            a: parse_src_a(ops[1])?,
            b: parse_src(ops[2])?,
        },
    };
    Ok((inst, target))
}

/// Assembles program text. Labels are resolved in a second pass.
pub fn assemble(text: &str) -> Result<NaleProgram, AsmError> {
    let mut labels = BTreeMap::new();
    let mut pending = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let err = |kind| AsmError { line, kind };
        let mut rest = raw.split(';').next().unwrap_or("").trim();
        while let Some(colon) = rest.find(':') {
            let name = rest[..colon].trim();
            if name.contains(char::is_whitespace) {
                break;
            }
            if !is_ident(name) {
                return Err(err(AsmErrorKind::InvalidLabel(name.into())));
            }
            if labels.insert(name.to_string(), pending.len()).is_some() {
                return Err(err(AsmErrorKind::DuplicateLabel(name.into())));
            }
            rest = rest[colon + 1..].trim();
        }
        if rest.is_empty() {
            continue;
        }
        let (mnemonic, operands) = match rest.find(char::is_whitespace) {
            Some(pos) => (&rest[..pos], rest[pos..].trim()),
            None => (rest, ""),
        };
        let ops: Vec<&str> = if operands.is_empty() {
            Vec::new()
        } else {
            operands.split(',').map(str::trim).collect()
        };
        let (inst, target) = parse_instruction(mnemonic, &ops).map_err(err)?;
        pending.push(Pending { line, inst, target });
    }

    let len = pending.len();
    let mut instructions = Vec::with_capacity(len);
    for p in pending {
        let inst = match p.target {
            None => p.inst,
            Some(t) => {
                let index = match t {
                    Target::Index(i) => i,
                    Target::Label(name) => *labels
                        .get(&name)
                        .ok_or(AsmError { line: p.line, kind: AsmErrorKind::UndefinedLabel(name.clone()) })?,
                };
                if index >= len || index > u16::MAX as usize {
                    return Err(AsmError { line: p.line, kind: AsmErrorKind::TargetOutOfRange(index, len) });
                }
                p.inst.with_target(index as u16)
            }
        };
        instructions.push(inst);
    }
    Ok(NaleProgram { instructions, labels })
}

fn fmt_src(s: Src) -> String {
    match s {
        Src::Reg(r) => r.to_string(),
        Src::Imm(v) => format!("#{v}"),
    }
}

fn fmt_src_a(s: SrcA) -> String {
    match s {
        SrcA::Reg(r) => r.to_string(),
        SrcA::Imm(v) => format!("#{v}"),
    }
}

/// Renders a program as assembly text that assembles back to the same
/// program, labels included.
pub fn disassemble(p: &NaleProgram) -> String {
    let mut by_index: BTreeMap<usize, Vec<&str>> = BTreeMap::new();
    for (name, &i) in &p.labels {
        by_index.entry(i).or_default().push(name);
    }
    let target = |t: u16| match by_index.get(&(t as usize)) {
        Some(names) => names[0].to_string(),
        None => format!("@{t}"),
    };
    let mut out = String::new();
    for (i, inst) in p.instructions.iter().enumerate() {
        for name in by_index.get(&i).into_iter().flatten() {
            let _ = writeln!(out, "{name}:");
        }
        let m = inst.opcode().mnemonic();
        let body = match *inst {
            Instruction::Nop | Instruction::Halt => m.to_string(),
            Instruction::Ldi { dst, imm } => format!("{m} {dst}, #{imm}"),
            Instruction::Mov { dst, src } => format!("{m} {dst}, {}", fmt_src(src)),
            Instruction::Alu { dst, a, b, .. } => format!("{m} {dst}, {}, {}", fmt_src_a(a), fmt_src(b)),
            Instruction::Jmp { target: t } => format!("{m} {}", target(t)),
            Instruction::Jz { cond, target: t } | Instruction::Jnz { cond, target: t } => {
                format!("{m} {cond}, {}", target(t))
            }
            Instruction::Send { port, src } => format!("{m} {port}, {}", fmt_src(src)),
            Instruction::Recv { dst, port } | Instruction::TryRecv { dst, port } => format!("{m} {dst}, {port}"),
            Instruction::PushI { src } => format!("{m} {}", fmt_src(src)),
            Instruction::PopI { dst } => format!("{m} {dst}"),
            Instruction::IterI { count } => format!("{m} {}", fmt_src(count)),
        };
        let _ = writeln!(out, "    {body}");
    }
    for name in by_index.range(p.instructions.len()..).flat_map(|(_, names)| names) {
        let _ = writeln!(out, "{name}:");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isa::strategy;
    use proptest::prelude::*;

    #[test]
    fn assembles_loop_example() {
        let p = assemble("loop: RECV r1, WEST\n MAC r2, r1, r3\n JNZ r4, loop\n HALT").unwrap();
        assert_eq!(p.len(), 4);
        assert_eq!(p.instructions[2], Instruction::Jnz { cond: Reg(4), target: 0 });
        assert_eq!(p.labels["loop"], 0);
    }

    #[test]
    fn empty_text_is_empty_program() {
        assert!(assemble("").unwrap().is_empty());
        assert!(assemble("; only a comment\n\n").unwrap().is_empty());
    }

    #[test]
    fn errors_name_the_problem_and_line() {
        let e = assemble("JMP nowhere\n").unwrap_err();
        assert_eq!(e, AsmError { line: 1, kind: AsmErrorKind::UndefinedLabel("nowhere".into()) });
        let e = assemble("NOP\nFOO r1\n").unwrap_err();
        assert_eq!(e, AsmError { line: 2, kind: AsmErrorKind::UnknownMnemonic("FOO".into()) });
        let e = assemble("a: NOP\na: HALT\n").unwrap_err();
        assert_eq!(e, AsmError { line: 2, kind: AsmErrorKind::DuplicateLabel("a".into()) });
        assert!(matches!(assemble("LDI r1, #40000").unwrap_err().kind, AsmErrorKind::BadOperand(..)));
        assert!(matches!(assemble("ADD r1, r2").unwrap_err().kind, AsmErrorKind::OperandCount { .. }));
    }

    #[test]
    fn immediates_and_ports() {
        let p = assemble("LDI r1,#7\nSEND HOST, r1\nITERI #0x10\nTRYRECV r2, net\n").unwrap();
        assert_eq!(p.instructions[0], Instruction::Ldi { dst: Reg(1), imm: 7 });
        assert_eq!(p.instructions[1], Instruction::Send { port: Port::Host, src: Src::Reg(Reg(1)) });
        assert_eq!(p.instructions[2], Instruction::IterI { count: Src::Imm(16) });
        assert_eq!(p.instructions[3], Instruction::TryRecv { dst: Reg(2), port: Port::Net });
    }

    fn program() -> impl Strategy<Value = NaleProgram> {
        (1usize..40).prop_flat_map(|len| {
            (
                proptest::collection::vec(strategy::instruction(len as u16 - 1), len),
                proptest::collection::btree_map("[a-z][a-z0-9_]{0,6}", 0..=len, 0..4),
            )
                .prop_map(|(instructions, labels)| NaleProgram { instructions, labels })
        })
    }

    proptest! {
        #[test]
        fn assemble_disassemble_round_trip(p in program()) {
            let text = disassemble(&p);
            prop_assert_eq!(assemble(&text).unwrap(), p);
        }
    }
}
