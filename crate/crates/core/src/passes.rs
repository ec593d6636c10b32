//! The two compilation passes: source to stack machine, and stack machine to
//! register/memory code.
//!
//! # Stack slots
//!
//! Stack slot `j` (counted from the bottom) lives in register `R_j` when
//! `j < b` and at address `l_j` otherwise. Every instruction's block is
//! derived from that rule: at height `h` a push writes slot `h`, `add`
//! reads slots `h-2` and `h-1`, and `setvar`/`bge` read the top slots.
//!
//! # Comparison polarity
//!
//! On the stack machine `bge` jumps iff the top value is `>=` the value
//! below it. The register form `bge R_{h-2}, R_{h-1}` would invert that
//! test on unequal operands (`second >= top`) and break the simulation, so
//! the emitted operands are ordered top first. [`BgeOrder::SecondFirst`]
//! reproduces the inverted ordering and exists only to check that the
//! simulation tests detect it.

use thiserror::Error;

use crate::imp::{BoolCond, Expr, Program, Stmt};
use crate::mips::{Loc, MachineConfig, MipsCode, MipsInstr, Reg};
use crate::vm::{infer_heights, HeightFn, VmCode, VmInstr, WellFormedError};

pub fn compile_expr(e: &Expr) -> VmCode {
    let mut out = Vec::new();
    expr(e, &mut out);
    VmCode(out)
}

fn expr(e: &Expr, out: &mut Vec<VmInstr>) {
    match e {
        Expr::Var(x) => out.push(VmInstr::Var(x.clone())),
        Expr::Const(n) => out.push(VmInstr::Cnst(*n)),
        Expr::Add(a, b) => {
            expr(a, out);
            expr(b, out);
            out.push(VmInstr::Add);
        }
    }
}

pub fn expr_size(e: &Expr) -> usize {
    match e {
        Expr::Var(_) | Expr::Const(_) => 1,
        Expr::Add(a, b) => expr_size(a) + expr_size(b) + 1,
    }
}

pub fn bool_size(b: &BoolCond) -> usize {
    expr_size(&b.lhs) + expr_size(&b.rhs) + 1
}

pub fn stmt_size(s: &Stmt) -> usize {
    match s {
        Stmt::Skip => 0,
        Stmt::Assign(_, e) => expr_size(e) + 1,
        Stmt::Seq(a, b) => stmt_size(a) + stmt_size(b),
        Stmt::If(c, a, b) => bool_size(c) + stmt_size(a) + 1 + stmt_size(b),
        Stmt::While(c, body) => bool_size(c) + stmt_size(body) + 1,
        Stmt::Labelled(_, body) => 1 + stmt_size(body),
    }
}

/// `e < e'` compiles to `C(e') · C(e) · bge(k)`: a true condition falls
/// through, a false one jumps by `k`.
pub fn compile_bool(b: &BoolCond, k: i64) -> VmCode {
    let mut out = Vec::new();
    cond(b, k, &mut out);
    VmCode(out)
}

fn cond(b: &BoolCond, k: i64, out: &mut Vec<VmInstr>) {
    expr(&b.rhs, out);
    expr(&b.lhs, out);
    out.push(VmInstr::Bge(k));
}

pub fn compile_stmt(s: &Stmt) -> VmCode {
    let mut out = Vec::new();
    stmt(s, &mut out);
    VmCode(out)
}

fn stmt(s: &Stmt, out: &mut Vec<VmInstr>) {
    match s {
        Stmt::Skip => {}
        Stmt::Assign(x, e) => {
            expr(e, out);
            out.push(VmInstr::Setvar(x.clone()));
        }
        Stmt::Seq(a, b) => {
            stmt(a, out);
            stmt(b, out);
        }
        Stmt::If(c, then, otherwise) => {
            cond(c, stmt_size(then) as i64 + 1, out);
            stmt(then, out);
            out.push(VmInstr::Branch(stmt_size(otherwise) as i64));
            stmt(otherwise, out);
        }
        Stmt::While(c, body) => {
            let body_len = stmt_size(body) as i64;
            cond(c, body_len + 1, out);
            stmt(body, out);
            out.push(VmInstr::Branch(-(bool_size(c) as i64 + body_len + 1)));
        }
        Stmt::Labelled(l, body) => {
            out.push(VmInstr::Nop(*l));
            stmt(body, out);
        }
    }
}

pub fn compile_program(p: &Program) -> VmCode {
    let mut code = compile_stmt(&p.body);
    code.0.push(VmInstr::Halt);
    code
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompileError {
    #[error(transparent)]
    NotWellFormed(#[from] WellFormedError),
    #[error("code does not end with halt")]
    MissingHalt,
}

/// Operand order of the emitted register `bge`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum BgeOrder {
    /// `bge top, second`: same jump condition as the stack machine.
    #[default]
    TopFirst,
    /// `bge second, top`: inverted on unequal operands.
    SecondFirst,
}

/// `p[i]` is the index of the first register instruction compiled from
/// stack-machine position `i`; `p[|C|]` is the length of the output.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PositionMap(pub Vec<usize>);

impl PositionMap {
    pub fn at(&self, i: usize) -> usize {
        self.0[i]
    }

    /// Number of register instructions compiled from position `i`.
    pub fn block_len(&self, i: usize) -> usize {
        self.0[i + 1] - self.0[i]
    }
}

fn slot(j: usize, b: usize) -> Result<Reg, Loc> {
    if j < b {
        Ok(Reg::R(j))
    } else {
        Err(Loc::Slot(j))
    }
}

/// Length of the block for `ins` at height `h`; independent of jump offsets.
fn block_len(ins: &VmInstr, h: usize, b: usize) -> usize {
    match ins {
        VmInstr::Cnst(_) | VmInstr::Var(_) => {
            if h < b {
                1
            } else {
                2
            }
        }
        VmInstr::Add | VmInstr::Bge(_) => match (slot(h - 2, b), slot(h - 1, b)) {
            (Ok(_), Ok(_)) => 1,
            (Ok(_), Err(_)) => 2,
            _ if matches!(ins, VmInstr::Add) => 4,
            _ => 3,
        },
        VmInstr::Setvar(_) => {
            if h - 1 < b {
                1
            } else {
                2
            }
        }
        VmInstr::Branch(_) | VmInstr::Halt | VmInstr::Nop(_) => 1,
    }
}

fn positions(code: &VmCode, h: &HeightFn, b: usize) -> PositionMap {
    let mut p = Vec::with_capacity(code.len() + 1);
    p.push(0);
    for (i, ins) in code.0.iter().enumerate() {
        let last = *p.last().unwrap();
        p.push(last + block_len(ins, h.at(i), b));
    }
    PositionMap(p)
}

fn emit(
    i: usize,
    code: &VmCode,
    h: &HeightFn,
    p: &PositionMap,
    b: usize,
    order: BgeOrder,
    out: &mut Vec<MipsInstr>,
) {
    use MipsInstr as M;
    let hi = h.at(i);
    let offset = |k: i64| {
        let target = (i as i64 + k + 1) as usize;
        p.at(target) as i64 - p.at(i + 1) as i64
    };
    match &code.0[i] {
        VmInstr::Cnst(n) => match slot(hi, b) {
            Ok(r) => out.push(M::LoadI(r, *n)),
            Err(l) => out.extend([M::LoadI(Reg::A, *n), M::Store(Reg::A, l)]),
        },
        VmInstr::Var(x) => match slot(hi, b) {
            Ok(r) => out.push(M::Load(r, Loc::Var(x.clone()))),
            Err(l) => out.extend([M::Load(Reg::A, Loc::Var(x.clone())), M::Store(Reg::A, l)]),
        },
        VmInstr::Add => match (slot(hi - 2, b), slot(hi - 1, b)) {
            (Ok(second), Ok(top)) => out.push(M::AddR(second, second, top)),
            (Ok(second), Err(top)) => {
                out.extend([M::Load(Reg::A, top), M::AddR(second, second, Reg::A)])
            }
            (Err(second), Err(top)) => out.extend([
                M::Load(Reg::A, top),
                M::Load(Reg::B, second.clone()),
                M::AddR(Reg::A, Reg::B, Reg::A),
                M::Store(Reg::A, second),
            ]),
            (Err(_), Ok(_)) => unreachable!("slots below b are registers"),
        },
        VmInstr::Setvar(x) => match slot(hi - 1, b) {
            Ok(r) => out.push(M::Store(r, Loc::Var(x.clone()))),
            Err(l) => out.extend([M::Load(Reg::A, l), M::Store(Reg::A, Loc::Var(x.clone()))]),
        },
        VmInstr::Branch(k) => out.push(M::Branch(offset(*k))),
        VmInstr::Bge(k) => {
            let k2 = offset(*k);
            let (top, second) = match (slot(hi - 2, b), slot(hi - 1, b)) {
                (Ok(second), Ok(top)) => (top, second),
                (Ok(second), Err(top)) => {
                    out.push(M::Load(Reg::A, top));
                    (Reg::A, second)
                }
                (Err(second), Err(top)) => {
                    out.extend([M::Load(Reg::A, second), M::Load(Reg::B, top)]);
                    (Reg::B, Reg::A)
                }
                (Err(_), Ok(_)) => unreachable!("slots below b are registers"),
            };
            out.push(match order {
                BgeOrder::TopFirst => M::Bge(top, second, k2),
                BgeOrder::SecondFirst => M::Bge(second, top, k2),
            });
        }
        VmInstr::Halt => out.push(M::Halt),
        VmInstr::Nop(l) => out.push(M::Nop(*l)),
    }
}

/// The register block compiled from position `i` of well-formed code.
pub fn compile_vm_instr(
    i: usize,
    code: &VmCode,
    h: &HeightFn,
    cfg: &MachineConfig,
) -> MipsCode {
    let p = positions(code, h, cfg.b);
    let mut out = Vec::new();
    emit(i, code, h, &p, cfg.b, BgeOrder::TopFirst, &mut out);
    MipsCode(out)
}

pub fn compile_vm(code: &VmCode, cfg: &MachineConfig) -> Result<(MipsCode, PositionMap), CompileError> {
    compile_vm_with(code, cfg, BgeOrder::TopFirst)
}

/// Three passes: block lengths from heights, then positions, then code with
/// resolved offsets.
pub fn compile_vm_with(
    code: &VmCode,
    cfg: &MachineConfig,
    order: BgeOrder,
) -> Result<(MipsCode, PositionMap), CompileError> {
    let h = infer_heights(code)?;
    if code.0.last() != Some(&VmInstr::Halt) {
        return Err(CompileError::MissingHalt);
    }
    let p = positions(code, &h, cfg.b);
    let mut out = Vec::with_capacity(p.at(code.len()));
    for i in 0..code.len() {
        emit(i, code, &h, &p, cfg.b, order, &mut out);
        debug_assert_eq!(out.len(), p.at(i + 1));
    }
    Ok((MipsCode(out), p))
}
