//! Source labellings, the cost map, and instrumentation of labelled
//! programs with increments of the `cost` variable.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::costcheck::{self, CheckError, CheckReport};
use crate::imp::{Expr, Ident, Label, Program, Stmt, Trace};
use crate::mips::MachineConfig;
use crate::passes::{self, CompileError};

/// Cost of each label; extended additively to traces.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CostMap(pub BTreeMap<Label, u64>);

impl CostMap {
    pub fn get(&self, l: Label) -> Option<u64> {
        self.0.get(&l).copied()
    }

    pub fn insert(&mut self, l: Label, c: u64) {
        self.0.insert(l, c);
    }

    /// `κ(ℓ1 ⋯ ℓn) = κ(ℓ1) + ⋯ + κ(ℓn)`; `None` if a label is unknown.
    pub fn of_trace(&self, t: &Trace) -> Option<u64> {
        t.labels().iter().map(|l| self.get(*l)).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Label, u64)> + '_ {
        self.0.iter().map(|(l, c)| (*l, *c))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Source of fresh labels, issued in increasing order.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LabelSupply {
    next: u32,
}

impl LabelSupply {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn starting_at(next: u32) -> Self {
        LabelSupply { next }
    }

    pub fn fresh(&mut self) -> Label {
        let l = Label(self.next);
        self.next += 1;
        l
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Labelling {
    /// One label at the root and one at the head of every loop body.
    Simple,
    /// Labels every branch and every statement following a branching one.
    Precise,
}

impl fmt::Display for Labelling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Labelling::Simple => "simple",
            Labelling::Precise => "precise",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LabelError {
    #[error("program is already labelled")]
    AlreadyLabelled,
    #[error("label {0} has no cost")]
    UnknownLabel(Label),
    #[error("program already uses the reserved `cost` variable")]
    ReservedIdentifierInUse,
    #[error("cost {0} does not fit the integer range")]
    CostOverflow(u64),
}

pub fn label_simple(p: &Program) -> Result<Program, LabelError> {
    if !p.is_unlabelled() {
        return Err(LabelError::AlreadyLabelled);
    }
    let mut supply = LabelSupply::new();
    let root = supply.fresh();
    let body = simple(&p.body, &mut supply);
    Ok(Program::new(Stmt::labelled(root, body)))
}

fn simple(s: &Stmt, supply: &mut LabelSupply) -> Stmt {
    match s {
        Stmt::Skip | Stmt::Assign(..) => s.clone(),
        Stmt::Seq(a, b) => {
            let a = simple(a, supply);
            Stmt::seq(a, simple(b, supply))
        }
        Stmt::If(c, a, b) => {
            let a = simple(a, supply);
            Stmt::if_(c.clone(), a, simple(b, supply))
        }
        Stmt::While(c, body) => {
            let l = supply.fresh();
            Stmt::while_(c.clone(), Stmt::labelled(l, simple(body, supply)))
        }
        // unreachable on unlabelled input; kept total
        Stmt::Labelled(l, body) => Stmt::labelled(*l, simple(body, supply)),
    }
}

pub fn label_precise(p: &Program) -> Result<Program, LabelError> {
    if !p.is_unlabelled() {
        return Err(LabelError::AlreadyLabelled);
    }
    let mut supply = LabelSupply::new();
    Ok(Program::new(precise(&p.body, &mut supply)))
}

fn precise(s: &Stmt, supply: &mut LabelSupply) -> Stmt {
    let l = supply.fresh();
    let (body, _) = precise_inner(s, supply);
    Stmt::labelled(l, body)
}

/// Returns the labelled statement and whether its sequel must be labelled.
fn precise_inner(s: &Stmt, supply: &mut LabelSupply) -> (Stmt, bool) {
    match s {
        Stmt::Skip | Stmt::Assign(..) => (s.clone(), false),
        Stmt::If(c, a, b) => {
            let a = precise(a, supply);
            (Stmt::if_(c.clone(), a, precise(b, supply)), true)
        }
        Stmt::While(c, body) => (Stmt::while_(c.clone(), precise(body, supply)), true),
        Stmt::Seq(a, b) => {
            let (a, d1) = precise_inner(a, supply);
            let (b, d2) = precise_inner(b, supply);
            if d1 {
                let l = supply.fresh();
                (Stmt::seq(a, Stmt::labelled(l, b)), d2)
            } else {
                (Stmt::seq(a, b), d2)
            }
        }
        Stmt::Labelled(l, body) => {
            let (body, d) = precise_inner(body, supply);
            (Stmt::labelled(*l, body), d)
        }
    }
}

pub fn apply_labelling(p: &Program, labelling: Labelling) -> Result<Program, LabelError> {
    match labelling {
        Labelling::Simple => label_simple(p),
        Labelling::Precise => label_precise(p),
    }
}

/// Replaces every `ℓ: S` by `cost := cost + κ(ℓ); S`.
pub fn instrument(p: &Program, kappa: &CostMap) -> Result<Program, LabelError> {
    if p.uses_cost() {
        return Err(LabelError::ReservedIdentifierInUse);
    }
    Ok(Program::new(instr(&p.body, kappa)?))
}

fn instr(s: &Stmt, kappa: &CostMap) -> Result<Stmt, LabelError> {
    Ok(match s {
        Stmt::Skip | Stmt::Assign(..) => s.clone(),
        Stmt::Seq(a, b) => Stmt::seq(instr(a, kappa)?, instr(b, kappa)?),
        Stmt::If(c, a, b) => Stmt::if_(c.clone(), instr(a, kappa)?, instr(b, kappa)?),
        Stmt::While(c, body) => Stmt::while_(c.clone(), instr(body, kappa)?),
        Stmt::Labelled(l, body) => {
            let k = kappa.get(*l).ok_or(LabelError::UnknownLabel(*l))?;
            let k = i64::try_from(k).map_err(|_| LabelError::CostOverflow(k))?;
            let inc = Stmt::Assign(
                Ident::cost(),
                Expr::add(Expr::Var(Ident::cost()), Expr::Const(k)),
            );
            Stmt::seq(inc, instr(body, kappa)?)
        }
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnnotateError {
    #[error(transparent)]
    Label(#[from] LabelError),
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Check(#[from] CheckError),
    #[error("labelling is unsound: {0}")]
    UnsoundLabelling(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Annotation {
    pub program: Program,
    pub labelled: Program,
    pub kappa: CostMap,
    pub report: CheckReport,
}

/// Labels `p`, compiles it through both passes, checks the object code, and
/// instruments the labelled source with the resulting cost map.
pub fn annotate(
    p: &Program,
    labelling: Labelling,
    cfg: &MachineConfig,
) -> Result<Annotation, AnnotateError> {
    let labelled = apply_labelling(p, labelling)?;
    let vm = passes::compile_program(&labelled);
    let (mips, _) = passes::compile_vm(&vm, cfg)?;
    let report = costcheck::check(&mips, cfg)?;
    let kappa = match &report.kappa {
        Some(k) if report.sound => k.clone(),
        _ => {
            return Err(AnnotateError::UnsoundLabelling(
                report
                    .unsoundness
                    .as_ref()
                    .map(ToString::to_string)
                    .unwrap_or_default(),
            ))
        }
    };
    let program = instrument(&labelled, &kappa)?;
    Ok(Annotation {
        program,
        labelled,
        kappa,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imp::{parse_imp, parse_imp_with, print_imp, ParseOptions};

    fn p(text: &str) -> Program {
        parse_imp(text).unwrap()
    }

    #[test]
    fn simple_labelling() {
        assert_eq!(print_imp(&label_simple(&p("prog skip")).unwrap()), "prog _l0: skip");
        assert_eq!(
            print_imp(&label_simple(&p("prog while 0 < x do { x := x + 1 }")).unwrap()),
            "prog _l0: while 0 < x do { _l1: x := x + 1 }"
        );
        assert_eq!(
            label_simple(&p("prog _l3: skip")),
            Err(LabelError::AlreadyLabelled)
        );
    }

    #[test]
    fn precise_labelling() {
        assert_eq!(print_imp(&label_precise(&p("prog x := 1")).unwrap()), "prog _l0: x := 1");
        assert_eq!(
            print_imp(
                &label_precise(&p("prog if 0 < x then { x := 1 } else { skip }; y := 2")).unwrap()
            ),
            "prog _l0: { if 0 < x then { _l1: x := 1 } else { _l2: skip }; _l3: y := 2 }"
        );
        assert_eq!(
            print_imp(&label_precise(&p("prog while 0 < x do { x := x + 1 }")).unwrap()),
            "prog _l0: while 0 < x do { _l1: x := x + 1 }"
        );
    }

    #[test]
    fn precise_sequel_label_is_drawn_after_the_sequel() {
        let q = p("prog if 0 < x then { skip } else { skip }; if 0 < y then { skip } else { skip }");
        assert_eq!(
            print_imp(&label_precise(&q).unwrap()),
            "prog _l0: { if 0 < x then { _l1: skip } else { _l2: skip }; \
             _l5: if 0 < y then { _l3: skip } else { _l4: skip } }"
        );
    }

    #[test]
    fn instrumentation() {
        let mut k = CostMap::default();
        k.insert(Label(0), 0);
        let q = instrument(&p("prog _l0: skip"), &k).unwrap();
        assert_eq!(print_imp(&q), "prog cost := cost + 0; skip");
        k.insert(Label(0), 4);
        let q = instrument(&p("prog _l0: x := x + 1"), &k).unwrap();
        assert_eq!(print_imp(&q), "prog cost := cost + 4; x := x + 1");
        assert!(q.is_unlabelled());

        assert_eq!(
            instrument(&p("prog _l1: skip"), &k),
            Err(LabelError::UnknownLabel(Label(1)))
        );
        let uses = parse_imp_with("prog _l0: cost := 1", ParseOptions { allow_cost: true }).unwrap();
        assert_eq!(instrument(&uses, &k), Err(LabelError::ReservedIdentifierInUse));
    }

    #[test]
    fn kappa_on_traces() {
        let mut k = CostMap::default();
        k.insert(Label(0), 3);
        k.insert(Label(1), 5);
        assert_eq!(k.of_trace(&Trace::new()), Some(0));
        assert_eq!(k.of_trace(&Trace(vec![Label(0), Label(1), Label(1)])), Some(13));
        assert_eq!(k.of_trace(&Trace(vec![Label(2)])), None);
    }

    #[test]
    fn annotate_worked_examples() {
        let cfg = MachineConfig::with_registers(2);
        let a = annotate(&p("prog x := x + 1"), Labelling::Simple, &cfg).unwrap();
        assert_eq!(print_imp(&a.program), "prog cost := cost + 4; x := x + 1");
        assert_eq!(a.kappa.get(Label(0)), Some(4));
        assert!(a.report.sound && a.report.precise);

        for b in [0, 1, 4] {
            let a = annotate(&p("prog skip"), Labelling::Simple, &MachineConfig::with_registers(b))
                .unwrap();
            assert_eq!(print_imp(&a.program), "prog cost := cost + 0; skip");
            assert!(a.report.sound && a.report.precise);
        }
    }
}
