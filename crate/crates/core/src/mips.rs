//! The register/memory target machine with a per-opcode cost model.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::asm::{self, AsmParseError};
use crate::erasure::{self, JumpCode};
use crate::imp::{Ident, Label, Store, Trace};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Reg {
    A,
    B,
    R(usize),
}

impl fmt::Display for Reg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Reg::A => f.write_str("A"),
            Reg::B => f.write_str("B"),
            Reg::R(i) => write!(f, "R{i}"),
        }
    }
}

/// An abstract memory address: one per variable, one per spilled stack slot.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Loc {
    Var(Ident),
    Slot(usize),
}

impl fmt::Display for Loc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Loc::Var(x) => write!(f, "l_{x}"),
            Loc::Slot(h) => write!(f, "l_{h}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum MipsInstr {
    LoadI(Reg, i64),
    Load(Reg, Loc),
    Store(Reg, Loc),
    AddR(Reg, Reg, Reg),
    Branch(i64),
    /// Jumps to `pc + k + 1` iff `m(r1) >= m(r2)`.
    Bge(Reg, Reg, i64),
    Halt,
    Nop(Label),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Opcode {
    LoadI,
    Load,
    Store,
    Add,
    Branch,
    Bge,
    Halt,
    Nop,
}

impl Opcode {
    pub const ALL: [Opcode; 8] = [
        Opcode::LoadI,
        Opcode::Load,
        Opcode::Store,
        Opcode::Add,
        Opcode::Branch,
        Opcode::Bge,
        Opcode::Halt,
        Opcode::Nop,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Opcode::LoadI => "loadi",
            Opcode::Load => "load",
            Opcode::Store => "store",
            Opcode::Add => "add",
            Opcode::Branch => "branch",
            Opcode::Bge => "bge",
            Opcode::Halt => "halt",
            Opcode::Nop => "nop",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|o| o.name() == s)
    }
}

impl MipsInstr {
    pub fn opcode(&self) -> Opcode {
        match self {
            MipsInstr::LoadI(..) => Opcode::LoadI,
            MipsInstr::Load(..) => Opcode::Load,
            MipsInstr::Store(..) => Opcode::Store,
            MipsInstr::AddR(..) => Opcode::Add,
            MipsInstr::Branch(_) => Opcode::Branch,
            MipsInstr::Bge(..) => Opcode::Bge,
            MipsInstr::Halt => Opcode::Halt,
            MipsInstr::Nop(_) => Opcode::Nop,
        }
    }

    pub fn label(&self) -> Option<Label> {
        match self {
            MipsInstr::Nop(l) => Some(*l),
            _ => None,
        }
    }
}

impl fmt::Display for MipsInstr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MipsInstr::LoadI(r, n) => write!(f, "loadi {r} {n}"),
            MipsInstr::Load(r, l) => write!(f, "load {r} {l}"),
            MipsInstr::Store(r, l) => write!(f, "store {r} {l}"),
            MipsInstr::AddR(d, a, b) => write!(f, "add {d} {a} {b}"),
            MipsInstr::Branch(k) => write!(f, "branch {k}"),
            MipsInstr::Bge(a, b, k) => write!(f, "bge {a} {b} {k}"),
            MipsInstr::Halt => f.write_str("halt"),
            MipsInstr::Nop(l) => write!(f, "nop {l}"),
        }
    }
}

impl JumpCode for MipsInstr {
    fn is_nop(&self) -> bool {
        matches!(self, MipsInstr::Nop(_))
    }

    fn offset(&self) -> Option<i64> {
        match self {
            MipsInstr::Branch(k) | MipsInstr::Bge(_, _, k) => Some(*k),
            _ => None,
        }
    }

    fn with_offset(&self, k: i64) -> Self {
        match self {
            MipsInstr::Branch(_) => MipsInstr::Branch(k),
            MipsInstr::Bge(a, b, _) => MipsInstr::Bge(*a, *b, k),
            other => other.clone(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct MipsCode(pub Vec<MipsInstr>);

impl MipsCode {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn instrs(&self) -> &[MipsInstr] {
        &self.0
    }
}

impl fmt::Display for MipsCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for ins in &self.0 {
            writeln!(f, "{ins}")?;
        }
        Ok(())
    }
}

impl From<Vec<MipsInstr>> for MipsCode {
    fn from(v: Vec<MipsInstr>) -> Self {
        MipsCode(v)
    }
}

pub fn parse_mips(text: &str) -> Result<MipsCode, AsmParseError> {
    let mut code = Vec::new();
    for (line, w) in asm::lines(text) {
        let err = |msg: String| AsmParseError { line, msg };
        let reg = |s: &str| -> Result<Reg, AsmParseError> {
            match s {
                "A" => Ok(Reg::A),
                "B" => Ok(Reg::B),
                _ => s
                    .strip_prefix('R')
                    .filter(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()))
                    .and_then(|d| d.parse().ok())
                    .map(Reg::R)
                    .ok_or_else(|| err(format!("bad register `{s}`"))),
            }
        };
        let loc = |s: &str| -> Result<Loc, AsmParseError> {
            let rest = s
                .strip_prefix("l_")
                .ok_or_else(|| err(format!("bad location `{s}`")))?;
            if !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()) {
                rest.parse()
                    .map(Loc::Slot)
                    .map_err(|_| err(format!("bad location `{s}`")))
            } else {
                Ident::new(rest)
                    .map(Loc::Var)
                    .ok_or_else(|| err(format!("bad location `{s}`")))
            }
        };
        let ins = match w[0] {
            "loadi" => {
                asm::arity(line, &w, 2)?;
                MipsInstr::LoadI(reg(w[1])?, asm::int(line, w[2])?)
            }
            "load" => {
                asm::arity(line, &w, 2)?;
                MipsInstr::Load(reg(w[1])?, loc(w[2])?)
            }
            "store" => {
                asm::arity(line, &w, 2)?;
                MipsInstr::Store(reg(w[1])?, loc(w[2])?)
            }
            "add" => {
                asm::arity(line, &w, 3)?;
                MipsInstr::AddR(reg(w[1])?, reg(w[2])?, reg(w[3])?)
            }
            "branch" => {
                asm::arity(line, &w, 1)?;
                MipsInstr::Branch(asm::int(line, w[1])?)
            }
            "bge" => {
                asm::arity(line, &w, 3)?;
                MipsInstr::Bge(reg(w[1])?, reg(w[2])?, asm::int(line, w[3])?)
            }
            "halt" => {
                asm::arity(line, &w, 0)?;
                MipsInstr::Halt
            }
            "nop" => {
                asm::arity(line, &w, 1)?;
                MipsInstr::Nop(
                    w[1].parse()
                        .map_err(|_| err(format!("bad label `{}`", w[1])))?,
                )
            }
            other => return Err(err(format!("unknown instruction `{other}`"))),
        };
        code.push(ins);
    }
    Ok(MipsCode(code))
}

/// Per-opcode execution costs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CostModel(BTreeMap<Opcode, u64>);

impl Default for CostModel {
    /// Unit cost for every instruction except `nop` and `halt`, which are free.
    fn default() -> Self {
        CostModel(
            Opcode::ALL
                .into_iter()
                .map(|o| (o, u64::from(!matches!(o, Opcode::Nop | Opcode::Halt))))
                .collect(),
        )
    }
}

impl CostModel {
    pub fn cost(&self, op: Opcode) -> u64 {
        self.0.get(&op).copied().unwrap_or(0)
    }

    pub fn set(&mut self, op: Opcode, cost: u64) {
        self.0.insert(op, cost);
    }

    /// Applies overrides written as `<opcode> <nat>` lines (`#` comments allowed).
    pub fn parse_overrides(&mut self, text: &str) -> Result<(), AsmParseError> {
        for (line, w) in asm::lines(text) {
            asm::arity(line, &w, 1)?;
            let op = Opcode::from_name(w[0]).ok_or_else(|| AsmParseError {
                line,
                msg: format!("unknown opcode `{}`", w[0]),
            })?;
            let c = w[1].parse().map_err(|_| AsmParseError {
                line,
                msg: format!("bad cost `{}`", w[1]),
            })?;
            self.set(op, c);
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MachineConfig {
    /// Number of general registers `R0..R{b-1}` holding the stack base.
    pub b: usize,
    pub costs: CostModel,
}

impl Default for MachineConfig {
    fn default() -> Self {
        MachineConfig {
            b: 4,
            costs: CostModel::default(),
        }
    }
}

impl MachineConfig {
    pub fn with_registers(b: usize) -> Self {
        MachineConfig {
            b,
            ..Self::default()
        }
    }

    pub fn cost_of(&self, ins: &MipsInstr) -> u64 {
        self.costs.cost(ins.opcode())
    }
}

/// Registers and main memory. Both banks are total, defaulting to 0; zero
/// entries are not stored so derived equality is extensional.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Memory {
    regs: BTreeMap<Reg, i64>,
    mem: BTreeMap<Loc, i64>,
}

impl Memory {
    pub fn reg(&self, r: Reg) -> i64 {
        self.regs.get(&r).copied().unwrap_or(0)
    }

    pub fn load(&self, l: &Loc) -> i64 {
        self.mem.get(l).copied().unwrap_or(0)
    }

    pub fn set_reg(&mut self, r: Reg, v: i64) {
        if v == 0 {
            self.regs.remove(&r);
        } else {
            self.regs.insert(r, v);
        }
    }

    pub fn store(&mut self, l: Loc, v: i64) {
        if v == 0 {
            self.mem.remove(&l);
        } else {
            self.mem.insert(l, v);
        }
    }

    /// The variable bank viewed as a store.
    pub fn vars(&self) -> Store {
        self.mem
            .iter()
            .filter_map(|(l, v)| match l {
                Loc::Var(x) => Some((x.clone(), *v)),
                Loc::Slot(_) => None,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MipsError {
    #[error("machine halted at {pc}")]
    Halted { pc: usize },
    #[error("pc {pc} jumps outside the code (target {target})")]
    PcOutOfRange { pc: usize, target: i64 },
    #[error("slot l_{slot} at {pc} is below the register file size and has no address")]
    ReservedSlotViolation { pc: usize, slot: usize },
    #[error("register R{index} at {pc} does not exist")]
    InvalidRegister { pc: usize, index: usize },
    #[error("fuel exhausted after {0} steps")]
    FuelExhausted(u64),
    #[error("integer overflow at {pc}")]
    Overflow { pc: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MipsStep {
    pub pc: usize,
    pub label: Option<Label>,
    pub cost: u64,
}

/// One transition. Updates `m` in place and reports the next pc, the
/// emitted label and the cost of the executed instruction.
pub fn step_mips(
    code: &MipsCode,
    pc: usize,
    m: &mut Memory,
    cfg: &MachineConfig,
) -> Result<MipsStep, MipsError> {
    let ins = code.0.get(pc).ok_or(MipsError::PcOutOfRange {
        pc,
        target: pc as i64,
    })?;
    let reg = |r: Reg| match r {
        Reg::R(index) if index >= cfg.b => Err(MipsError::InvalidRegister { pc, index }),
        _ => Ok(r),
    };
    let loc = |l: &Loc| match l {
        Loc::Slot(slot) if *slot < cfg.b => Err(MipsError::ReservedSlotViolation { pc, slot: *slot }),
        _ => Ok(l.clone()),
    };
    let jump = |k: i64| {
        let t = pc as i64 + k + 1;
        if (0..code.len() as i64).contains(&t) {
            Ok(t as usize)
        } else {
            Err(MipsError::PcOutOfRange { pc, target: t })
        }
    };
    let mut label = None;
    let next = match ins {
        MipsInstr::LoadI(r, n) => {
            m.set_reg(reg(*r)?, *n);
            pc + 1
        }
        MipsInstr::Load(r, l) => {
            let v = m.load(&loc(l)?);
            m.set_reg(reg(*r)?, v);
            pc + 1
        }
        MipsInstr::Store(r, l) => {
            let v = m.reg(reg(*r)?);
            m.store(loc(l)?, v);
            pc + 1
        }
        MipsInstr::AddR(d, a, b) => {
            let v = m
                .reg(reg(*a)?)
                .checked_add(m.reg(reg(*b)?))
                .ok_or(MipsError::Overflow { pc })?;
            m.set_reg(reg(*d)?, v);
            pc + 1
        }
        MipsInstr::Branch(k) => jump(*k)?,
        MipsInstr::Bge(a, b, k) => {
            let target = jump(*k)?;
            if m.reg(reg(*a)?) >= m.reg(reg(*b)?) {
                target
            } else {
                pc + 1
            }
        }
        MipsInstr::Halt => return Err(MipsError::Halted { pc }),
        MipsInstr::Nop(l) => {
            label = Some(*l);
            pc + 1
        }
    };
    Ok(MipsStep {
        pc: next,
        label,
        cost: cfg.cost_of(ins),
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MipsOutcome {
    pub memory: Memory,
    pub trace: Trace,
    pub cost: u64,
    pub steps: u64,
    /// Executed positions, the final `halt` included (only when requested).
    pub pcs: Vec<usize>,
}

pub fn run_mips(
    code: &MipsCode,
    m: Memory,
    cfg: &MachineConfig,
    fuel: u64,
) -> Result<(Memory, Trace, u64), MipsError> {
    run_mips_with(code, m, cfg, fuel, false).map(|o| (o.memory, o.trace, o.cost))
}

pub fn run_mips_with(
    code: &MipsCode,
    mut m: Memory,
    cfg: &MachineConfig,
    fuel: u64,
    record_pcs: bool,
) -> Result<MipsOutcome, MipsError> {
    let mut pc = 0;
    let mut trace = Trace::new();
    let mut cost = 0u64;
    let mut steps = 0u64;
    let mut pcs = Vec::new();
    loop {
        if record_pcs {
            pcs.push(pc);
        }
        if let Some(MipsInstr::Halt) = code.0.get(pc) {
            cost += cfg.costs.cost(Opcode::Halt);
            return Ok(MipsOutcome {
                memory: m,
                trace,
                cost,
                steps,
                pcs,
            });
        }
        if steps == fuel {
            return Err(MipsError::FuelExhausted(steps));
        }
        let st = step_mips(code, pc, &mut m, cfg)?;
        if let Some(l) = st.label {
            trace.push(l);
        }
        cost += st.cost;
        pc = st.pc;
        steps += 1;
    }
}

/// Removes all `nop` instructions, recomputing jump offsets.
pub fn erase_mips(code: &MipsCode) -> MipsCode {
    MipsCode(erasure::erase(&code.0))
}

/// A memory representing the empty stack and the store `s`.
pub fn init_memory(s: &Store, _cfg: &MachineConfig) -> Memory {
    let mut m = Memory::default();
    for (x, v) in s.iter() {
        m.store(Loc::Var(x.clone()), v);
    }
    m
}

/// Whether `m` represents the stack `stack` (bottom first) and the store `s`:
/// every variable agrees with its location, slot `j` lives in `R_j` when
/// `j < b` and at `l_j` otherwise.
pub fn represents(m: &Memory, stack: &[i64], s: &Store, cfg: &MachineConfig) -> bool {
    if m.vars() != *s {
        return false;
    }
    stack.iter().enumerate().all(|(j, v)| {
        let held = if j < cfg.b {
            m.reg(Reg::R(j))
        } else {
            m.load(&Loc::Slot(j))
        };
        held == *v
    })
}
