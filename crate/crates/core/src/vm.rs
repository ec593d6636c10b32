//! The stack machine: instructions, small-step semantics, stack-height
//! inference for well-formed code, and label erasure.
//!
//! The operand stack is stored bottom first, so `stack[j]` is slot `j`
//! counted from the bottom and the top of the stack is the last element.

use std::fmt;

use thiserror::Error;

use crate::asm::{self, AsmParseError};
use crate::erasure::{self, JumpCode};
use crate::imp::{Ident, Label, Store, Trace};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum VmInstr {
    Cnst(i64),
    Var(Ident),
    Setvar(Ident),
    Add,
    /// Unconditional jump to `pc + k + 1`.
    Branch(i64),
    /// Pops the top `n` and the next `n'`; jumps to `pc + k + 1` iff `n >= n'`.
    Bge(i64),
    Halt,
    Nop(Label),
}

impl fmt::Display for VmInstr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VmInstr::Cnst(n) => write!(f, "cnst {n}"),
            VmInstr::Var(x) => write!(f, "var {x}"),
            VmInstr::Setvar(x) => write!(f, "setvar {x}"),
            VmInstr::Add => f.write_str("add"),
            VmInstr::Branch(k) => write!(f, "branch {k}"),
            VmInstr::Bge(k) => write!(f, "bge {k}"),
            VmInstr::Halt => f.write_str("halt"),
            VmInstr::Nop(l) => write!(f, "nop {l}"),
        }
    }
}

impl JumpCode for VmInstr {
    fn is_nop(&self) -> bool {
        matches!(self, VmInstr::Nop(_))
    }

    fn offset(&self) -> Option<i64> {
        match self {
            VmInstr::Branch(k) | VmInstr::Bge(k) => Some(*k),
            _ => None,
        }
    }

    fn with_offset(&self, k: i64) -> Self {
        match self {
            VmInstr::Branch(_) => VmInstr::Branch(k),
            VmInstr::Bge(_) => VmInstr::Bge(k),
            other => other.clone(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct VmCode(pub Vec<VmInstr>);

impl VmCode {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn instrs(&self) -> &[VmInstr] {
        &self.0
    }

    /// Absolute target of the jump at `pc`, if it is in range.
    fn target(&self, pc: usize, k: i64) -> Option<usize> {
        let t = pc as i64 + k + 1;
        (0..self.len() as i64).contains(&t).then_some(t as usize)
    }
}

impl fmt::Display for VmCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for ins in &self.0 {
            writeln!(f, "{ins}")?;
        }
        Ok(())
    }
}

impl From<Vec<VmInstr>> for VmCode {
    fn from(v: Vec<VmInstr>) -> Self {
        VmCode(v)
    }
}

pub fn parse_vm(text: &str) -> Result<VmCode, AsmParseError> {
    let mut code = Vec::new();
    for (line, w) in asm::lines(text) {
        let ident = |s: &str| {
            Ident::new(s).ok_or_else(|| AsmParseError {
                line,
                msg: format!("bad identifier `{s}`"),
            })
        };
        let ins = match w[0] {
            "cnst" => {
                asm::arity(line, &w, 1)?;
                VmInstr::Cnst(asm::int(line, w[1])?)
            }
            "var" => {
                asm::arity(line, &w, 1)?;
                VmInstr::Var(ident(w[1])?)
            }
            "setvar" => {
                asm::arity(line, &w, 1)?;
                VmInstr::Setvar(ident(w[1])?)
            }
            "add" => {
                asm::arity(line, &w, 0)?;
                VmInstr::Add
            }
            "branch" => {
                asm::arity(line, &w, 1)?;
                VmInstr::Branch(asm::int(line, w[1])?)
            }
            "bge" => {
                asm::arity(line, &w, 1)?;
                VmInstr::Bge(asm::int(line, w[1])?)
            }
            "halt" => {
                asm::arity(line, &w, 0)?;
                VmInstr::Halt
            }
            "nop" => {
                asm::arity(line, &w, 1)?;
                VmInstr::Nop(w[1].parse().map_err(|_| AsmParseError {
                    line,
                    msg: format!("bad label `{}`", w[1]),
                })?)
            }
            other => {
                return Err(AsmParseError {
                    line,
                    msg: format!("unknown instruction `{other}`"),
                })
            }
        };
        code.push(ins);
    }
    Ok(VmCode(code))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VmState {
    pub pc: usize,
    pub stack: Vec<i64>,
    pub store: Store,
}

impl VmState {
    pub fn initial(store: Store) -> Self {
        VmState {
            pc: 0,
            stack: Vec::new(),
            store,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VmError {
    #[error("stack underflow at {pc}")]
    StackUnderflow { pc: usize },
    #[error("pc {pc} jumps outside the code (target {target})")]
    PcOutOfRange { pc: usize, target: i64 },
    #[error("machine halted at {pc}")]
    Halted { pc: usize },
    #[error("fuel exhausted after {0} steps")]
    FuelExhausted(u64),
    #[error("halt at {pc} with {height} value(s) left on the stack")]
    NonEmptyStackAtHalt { pc: usize, height: usize },
    #[error("stack height {actual} at {pc}, predicted {expected}")]
    HeightMismatch {
        pc: usize,
        expected: usize,
        actual: usize,
    },
    #[error("integer overflow at {pc}")]
    Overflow { pc: usize },
    #[error(transparent)]
    NotWellFormed(#[from] WellFormedError),
}

/// One transition of the machine. Returns the label emitted by a `nop`.
pub fn step_vm(code: &VmCode, st: &mut VmState) -> Result<Option<Label>, VmError> {
    let pc = st.pc;
    let ins = code.0.get(pc).ok_or(VmError::PcOutOfRange {
        pc,
        target: pc as i64,
    })?;
    let jump = |k: i64| {
        code.target(pc, k).ok_or(VmError::PcOutOfRange {
            pc,
            target: pc as i64 + k + 1,
        })
    };
    let pop = |st: &mut VmState| st.stack.pop().ok_or(VmError::StackUnderflow { pc });
    match ins {
        VmInstr::Cnst(n) => {
            st.stack.push(*n);
            st.pc += 1;
        }
        VmInstr::Var(x) => {
            st.stack.push(st.store.get(x));
            st.pc += 1;
        }
        VmInstr::Setvar(x) => {
            let n = pop(st)?;
            st.store.set(x.clone(), n);
            st.pc += 1;
        }
        VmInstr::Add => {
            if st.stack.len() < 2 {
                return Err(VmError::StackUnderflow { pc });
            }
            let n = pop(st)?;
            let n2 = pop(st)?;
            st.stack
                .push(n.checked_add(n2).ok_or(VmError::Overflow { pc })?);
            st.pc += 1;
        }
        VmInstr::Branch(k) => st.pc = jump(*k)?,
        VmInstr::Bge(k) => {
            if st.stack.len() < 2 {
                return Err(VmError::StackUnderflow { pc });
            }
            let target = jump(*k)?;
            let n = pop(st)?;
            let n2 = pop(st)?;
            st.pc = if n < n2 { pc + 1 } else { target };
        }
        VmInstr::Halt => return Err(VmError::Halted { pc }),
        VmInstr::Nop(l) => {
            st.pc += 1;
            return Ok(Some(*l));
        }
    }
    Ok(None)
}

#[derive(Clone, Copy, Debug)]
pub struct VmRunOptions<'a> {
    pub fuel: u64,
    /// When set, every visited state is checked against the predicted height.
    pub heights: Option<&'a HeightFn>,
    /// Record the pc of every executed instruction, halt included.
    pub record_pcs: bool,
}

impl VmRunOptions<'_> {
    pub fn with_fuel(fuel: u64) -> Self {
        VmRunOptions {
            fuel,
            heights: None,
            record_pcs: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VmOutcome {
    pub store: Store,
    pub trace: Trace,
    pub steps: u64,
    pub pcs: Vec<usize>,
}

pub fn run_vm(code: &VmCode, s: Store, fuel: u64) -> Result<(Store, Trace), VmError> {
    run_vm_with(code, s, VmRunOptions::with_fuel(fuel)).map(|o| (o.store, o.trace))
}

pub fn run_vm_with(code: &VmCode, s: Store, opts: VmRunOptions<'_>) -> Result<VmOutcome, VmError> {
    let mut st = VmState::initial(s);
    let mut trace = Trace::new();
    let mut pcs = Vec::new();
    let mut steps = 0;
    loop {
        if let Some(h) = opts.heights {
            let expected = h.at(st.pc);
            if expected != st.stack.len() {
                return Err(VmError::HeightMismatch {
                    pc: st.pc,
                    expected,
                    actual: st.stack.len(),
                });
            }
        }
        if opts.record_pcs {
            pcs.push(st.pc);
        }
        if let Some(VmInstr::Halt) = code.0.get(st.pc) {
            if !st.stack.is_empty() {
                return Err(VmError::NonEmptyStackAtHalt {
                    pc: st.pc,
                    height: st.stack.len(),
                });
            }
            return Ok(VmOutcome {
                store: st.store,
                trace,
                steps,
                pcs,
            });
        }
        if steps == opts.fuel {
            return Err(VmError::FuelExhausted(steps));
        }
        if let Some(l) = step_vm(code, &mut st)? {
            trace.push(l);
        }
        steps += 1;
    }
}

/// Predicted stack height at every position `0..=|C|`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct HeightFn(pub Vec<usize>);

impl HeightFn {
    pub fn at(&self, i: usize) -> usize {
        self.0[i]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("code is not well formed at position {pos}: {reason}")]
pub struct WellFormedError {
    pub pos: usize,
    pub reason: WfReason,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WfReason {
    EmptyCode,
    HaltNotLast,
    /// The instruction requires height `expected` but `found` is predicted.
    Height { expected: usize, found: usize },
    AddNeedsTwo { found: usize },
    /// Jump target outside `0..|C|`.
    TargetOutOfRange { target: i64 },
    /// Jump target must have height 0.
    TargetHeight { target: usize, found: usize },
    Conflict { first: usize, second: usize },
    Undetermined,
}

impl fmt::Display for WfReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WfReason::EmptyCode => f.write_str("empty code"),
            WfReason::HaltNotLast => f.write_str("halt is not the last instruction"),
            WfReason::Height { expected, found } => {
                write!(f, "requires stack height {expected}, predicted {found}")
            }
            WfReason::AddNeedsTwo { found } => {
                write!(f, "add requires stack height >= 2, predicted {found}")
            }
            WfReason::TargetOutOfRange { target } => {
                write!(f, "jump target {target} outside the code")
            }
            WfReason::TargetHeight { target, found } => {
                write!(f, "jump target {target} has height {found}, must be 0")
            }
            WfReason::Conflict { first, second } => {
                write!(f, "conflicting heights {first} and {second}")
            }
            WfReason::Undetermined => f.write_str("height not determined"),
        }
    }
}

/// Infers the unique height function with `h(0) = 0`.
pub fn infer_heights(code: &VmCode) -> Result<HeightFn, WellFormedError> {
    if code.is_empty() {
        return Err(WellFormedError {
            pos: 0,
            reason: WfReason::EmptyCode,
        });
    }
    infer_heights_from(code, 0)
}

/// Forward height inference from an arbitrary entry height. Works on code
/// fragments (possibly empty, possibly without `halt`).
pub fn infer_heights_from(code: &VmCode, start: usize) -> Result<HeightFn, WellFormedError> {
    let n = code.len();
    let mut h = Vec::with_capacity(n + 1);
    h.push(start);
    let need = |pos, expected, found| -> Result<(), WellFormedError> {
        if expected == found {
            Ok(())
        } else {
            wf_fail(pos, WfReason::Height { expected, found })
        }
    };
    for (i, ins) in code.0.iter().enumerate() {
        let cur = h[i];
        let next = match ins {
            VmInstr::Cnst(_) | VmInstr::Var(_) => cur + 1,
            VmInstr::Nop(_) => cur,
            VmInstr::Add => {
                if cur < 2 {
                    return wf_fail(i, WfReason::AddNeedsTwo { found: cur });
                }
                cur - 1
            }
            VmInstr::Setvar(_) => {
                need(i, 1, cur)?;
                0
            }
            VmInstr::Branch(k) => {
                check_target(code, i, *k)?;
                need(i, 0, cur)?;
                0
            }
            VmInstr::Bge(k) => {
                check_target(code, i, *k)?;
                need(i, 2, cur)?;
                0
            }
            VmInstr::Halt => {
                if i + 1 != n {
                    return wf_fail(i, WfReason::HaltNotLast);
                }
                need(i, 0, cur)?;
                0
            }
        };
        h.push(next);
    }
    for (i, ins) in code.0.iter().enumerate() {
        if let VmInstr::Branch(k) | VmInstr::Bge(k) = ins {
            let t = (i as i64 + k + 1) as usize;
            if h[t] != 0 {
                return wf_fail(
                    i,
                    WfReason::TargetHeight {
                        target: t,
                        found: h[t],
                    },
                );
            }
        }
    }
    Ok(HeightFn(h))
}

fn wf_fail<T>(pos: usize, reason: WfReason) -> Result<T, WellFormedError> {
    Err(WellFormedError { pos, reason })
}

fn check_target(code: &VmCode, i: usize, k: i64) -> Result<usize, WellFormedError> {
    code.target(i, k).ok_or(WellFormedError {
        pos: i,
        reason: WfReason::TargetOutOfRange {
            target: i as i64 + k + 1,
        },
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Traversal {
    Forward,
    Reverse,
}

/// Height inference by constraint propagation over the well-formedness
/// conditions, visiting constraints in the given order.
///
/// This is an independent route to [`infer_heights_from`]: with
/// [`Traversal::Reverse`] the heights are mostly derived backwards from the
/// fixed anchors (`setvar`, jumps, `halt`) rather than from the seed.
pub fn solve_heights(
    code: &VmCode,
    start: usize,
    order: Traversal,
) -> Result<HeightFn, WellFormedError> {
    enum C {
        Link(usize, i64),
        Fix(usize, usize),
        AtLeastTwo(usize),
    }
    let n = code.len();
    let mut cs = Vec::new();
    for (i, ins) in code.0.iter().enumerate() {
        match ins {
            VmInstr::Cnst(_) | VmInstr::Var(_) => cs.push(C::Link(i, 1)),
            VmInstr::Nop(_) => cs.push(C::Link(i, 0)),
            VmInstr::Add => {
                cs.push(C::Link(i, -1));
                cs.push(C::AtLeastTwo(i));
            }
            VmInstr::Setvar(_) => {
                cs.push(C::Fix(i, 1));
                cs.push(C::Fix(i + 1, 0));
            }
            VmInstr::Branch(k) | VmInstr::Bge(k) => {
                let t = check_target(code, i, *k)?;
                let here = if matches!(ins, VmInstr::Bge(_)) { 2 } else { 0 };
                cs.push(C::Fix(i, here));
                cs.push(C::Fix(i + 1, 0));
                cs.push(C::Fix(t, 0));
            }
            VmInstr::Halt => {
                if i + 1 != n {
                    return Err(WellFormedError {
                        pos: i,
                        reason: WfReason::HaltNotLast,
                    });
                }
                cs.push(C::Fix(i, 0));
                cs.push(C::Fix(i + 1, 0));
            }
        }
    }
    if order == Traversal::Reverse {
        cs.reverse();
    }

    let mut h: Vec<Option<i64>> = vec![None; n + 1];
    let assign = |h: &mut Vec<Option<i64>>, pos: usize, v: i64| -> Result<bool, WellFormedError> {
        if v < 0 {
            return Err(WellFormedError {
                pos: pos.saturating_sub(1),
                reason: WfReason::AddNeedsTwo { found: 0 },
            });
        }
        match h[pos] {
            Some(old) if old == v => Ok(false),
            Some(old) => Err(WellFormedError {
                pos,
                reason: WfReason::Conflict {
                    first: old as usize,
                    second: v as usize,
                },
            }),
            None => {
                h[pos] = Some(v);
                Ok(true)
            }
        }
    };
    let seed_first = order == Traversal::Forward;
    if seed_first {
        assign(&mut h, 0, start as i64)?;
    }
    for c in &cs {
        if let C::Fix(p, v) = c {
            assign(&mut h, *p, *v as i64)?;
        }
    }
    if !seed_first {
        assign(&mut h, 0, start as i64)?;
    }
    loop {
        let mut changed = false;
        for c in &cs {
            if let C::Link(i, d) = c {
                match (h[*i], h[i + 1]) {
                    (Some(a), _) => changed |= assign(&mut h, i + 1, a + d)?,
                    (None, Some(b)) => changed |= assign(&mut h, *i, b - d)?,
                    (None, None) => {}
                }
            }
        }
        if !changed {
            break;
        }
    }
    for c in &cs {
        if let C::AtLeastTwo(i) = c {
            if let Some(v) = h[*i] {
                if v < 2 {
                    return Err(WellFormedError {
                        pos: *i,
                        reason: WfReason::AddNeedsTwo { found: v as usize },
                    });
                }
            }
        }
    }
    h.into_iter()
        .enumerate()
        .map(|(pos, v)| {
            v.map(|v| v as usize).ok_or(WellFormedError {
                pos,
                reason: WfReason::Undetermined,
            })
        })
        .collect::<Result<Vec<_>, _>>()
        .map(HeightFn)
}

/// Removes all `nop` instructions, recomputing jump offsets.
pub fn erase_vm(code: &VmCode) -> VmCode {
    VmCode(erasure::erase(&code.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use VmInstr::*;

    fn x() -> Ident {
        Ident::new("x").unwrap()
    }

    #[test]
    fn push_constant() {
        let code = VmCode(vec![Cnst(5), Halt]);
        let mut st = VmState::initial(Store::new());
        assert_eq!(step_vm(&code, &mut st), Ok(None));
        assert_eq!((st.pc, st.stack.clone()), (1, vec![5]));
    }

    #[test]
    fn bge_falls_through_when_top_is_smaller() {
        let code = VmCode(vec![Bge(1), Halt, Halt]);
        // top 3, next 7: stack is bottom-first
        let mut st = VmState {
            pc: 0,
            stack: vec![7, 3],
            store: Store::new(),
        };
        step_vm(&code, &mut st).unwrap();
        assert_eq!((st.pc, st.stack.len()), (1, 0));

        let mut st = VmState {
            pc: 0,
            stack: vec![3, 7],
            store: Store::new(),
        };
        step_vm(&code, &mut st).unwrap();
        assert_eq!(st.pc, 2);
    }

    #[test]
    fn nop_emits_label() {
        let code = VmCode(vec![Nop(Label(1)), Halt]);
        let mut st = VmState::initial(Store::new());
        assert_eq!(step_vm(&code, &mut st), Ok(Some(Label(1))));
        assert_eq!(st.pc, 1);
        assert!(st.stack.is_empty());
    }

    #[test]
    fn step_errors() {
        let mut st = VmState::initial(Store::new());
        assert_eq!(
            step_vm(&VmCode(vec![Add, Halt]), &mut st),
            Err(VmError::StackUnderflow { pc: 0 })
        );
        assert_eq!(
            step_vm(&VmCode(vec![Setvar(x())]), &mut st),
            Err(VmError::StackUnderflow { pc: 0 })
        );
        assert_eq!(
            step_vm(&VmCode(vec![Branch(5)]), &mut st),
            Err(VmError::PcOutOfRange { pc: 0, target: 6 })
        );
        assert_eq!(
            step_vm(&VmCode(vec![Halt]), &mut st),
            Err(VmError::Halted { pc: 0 })
        );
    }

    #[test]
    fn runs() {
        assert_eq!(
            run_vm(&VmCode(vec![Halt]), Store::new(), 1),
            Ok((Store::new(), Trace::new()))
        );
        let code = VmCode(vec![Cnst(2), Setvar(x()), Halt]);
        assert_eq!(
            run_vm(&code, Store::new(), 10),
            Ok((Store::new().with("x", 2), Trace::new()))
        );
        assert_eq!(
            run_vm(&VmCode(vec![Cnst(1), Halt]), Store::new(), 10),
            Err(VmError::NonEmptyStackAtHalt { pc: 1, height: 1 })
        );
        assert_eq!(
            run_vm(&VmCode(vec![Branch(-1), Halt]), Store::new(), 10),
            Err(VmError::FuelExhausted(10))
        );
    }

    #[test]
    fn heights_forward() {
        let code = VmCode(vec![Var(x()), Cnst(1), Add, Setvar(x()), Halt]);
        assert_eq!(infer_heights(&code).unwrap().0, vec![0, 1, 2, 1, 0, 0]);
    }

    #[test]
    fn heights_reject_bad_code() {
        let e = infer_heights(&VmCode(vec![Cnst(1), Halt])).unwrap_err();
        assert_eq!(e.pos, 1);
        assert_eq!(
            e.reason,
            WfReason::Height {
                expected: 0,
                found: 1
            }
        );
        let e = infer_heights(&VmCode(vec![Halt, Halt])).unwrap_err();
        assert_eq!((e.pos, e.reason), (0, WfReason::HaltNotLast));
        let e = infer_heights(&VmCode(vec![Var(x()), Setvar(x()), Branch(0)])).unwrap_err();
        assert_eq!(e.reason, WfReason::TargetOutOfRange { target: 3 });
        let e = infer_heights(&VmCode(vec![Cnst(1), Add, Halt])).unwrap_err();
        assert_eq!(e.reason, WfReason::AddNeedsTwo { found: 1 });
        // jump into the middle of an expression
        let code = VmCode(vec![Branch(1), Cnst(1), Cnst(2), Add, Setvar(x()), Halt]);
        let e = infer_heights(&code).unwrap_err();
        assert_eq!(e.reason, WfReason::TargetHeight { target: 2, found: 1 });
        assert_eq!(infer_heights(&VmCode(vec![])).unwrap_err().reason, WfReason::EmptyCode);
    }

    #[test]
    fn solver_routes_agree() {
        let code = VmCode(vec![
            Nop(Label(0)),
            Var(x()),
            Cnst(0),
            Bge(5),
            Var(x()),
            Cnst(1),
            Add,
            Setvar(x()),
            Branch(-8),
            Halt,
        ]);
        let fwd = infer_heights(&code).unwrap();
        assert_eq!(solve_heights(&code, 0, Traversal::Forward).unwrap(), fwd);
        assert_eq!(solve_heights(&code, 0, Traversal::Reverse).unwrap(), fwd);
        assert!(solve_heights(&VmCode(vec![Cnst(1), Halt]), 0, Traversal::Reverse).is_err());
    }

    #[test]
    fn run_checks_predicted_heights() {
        let code = VmCode(vec![Var(x()), Cnst(1), Add, Setvar(x()), Halt]);
        let h = infer_heights(&code).unwrap();
        let opts = VmRunOptions {
            fuel: 10,
            heights: Some(&h),
            record_pcs: true,
        };
        let out = run_vm_with(&code, Store::new(), opts).unwrap();
        assert_eq!(out.pcs, vec![0, 1, 2, 3, 4]);
        let wrong = HeightFn(vec![0, 0, 2, 1, 0, 0]);
        let opts = VmRunOptions {
            heights: Some(&wrong),
            ..opts
        };
        assert_eq!(
            run_vm_with(&code, Store::new(), opts),
            Err(VmError::HeightMismatch {
                pc: 1,
                expected: 0,
                actual: 1
            })
        );
    }

    #[test]
    fn erasure_recomputes_offsets() {
        assert_eq!(erase_vm(&VmCode(vec![Nop(Label(1)), Halt])), VmCode(vec![Halt]));
        let code = VmCode(vec![Branch(2), Cnst(1), Nop(Label(1)), Halt]);
        assert_eq!(erase_vm(&code), VmCode(vec![Branch(1), Cnst(1), Halt]));
        // backwards jump over a nop, and a jump landing on one
        let code = VmCode(vec![Nop(Label(0)), Cnst(1), Nop(Label(1)), Branch(-3), Halt]);
        assert_eq!(erase_vm(&code), VmCode(vec![Cnst(1), Branch(-2), Halt]));
    }

    #[test]
    fn text_round_trip() {
        let text = "cnst 5\nvar x\nsetvar x\nadd\nbranch -3\nbge 2\nnop _l1\nhalt\n";
        let code = parse_vm(text).unwrap();
        assert_eq!(code.to_string(), text);
        assert!(parse_vm("cnst").is_err());
        assert!(parse_vm("jump 3").is_err());
        assert!(parse_vm("nop l1").is_err());
    }
}
