//! The source language: a small imperative language with assignments,
//! conditionals and loops, extended with statement labels.
//!
//! Integers are 64-bit and every arithmetic operation is checked; an
//! overflow is reported as a runtime error instead of wrapping.

mod parse;
mod print;
mod sem;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Serialize, Serializer};
use thiserror::Error;

pub use parse::{parse_imp, parse_imp_with, ParseError, ParseOptions};
pub use print::print_imp;
pub use sem::{eval_bool, eval_expr, run_imp, step_imp, Config, Continuation};

/// Identifier reserved for the cost counter introduced by instrumentation.
pub const COST_VAR: &str = "cost";

/// A variable name.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Ident(String);

impl Ident {
    /// Builds an identifier, checking the `[a-zA-Z_][a-zA-Z0-9_]*` shape.
    pub fn new(name: impl Into<String>) -> Option<Self> {
        let name = name.into();
        let mut chars = name.chars();
        let head_ok = matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_');
        if head_ok && chars.all(|c| c.is_ascii_alphanumeric() || c == '_') {
            Some(Ident(name))
        } else {
            None
        }
    }

    pub fn cost() -> Self {
        Ident(COST_VAR.to_string())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_cost(&self) -> bool {
        self.0 == COST_VAR
    }
}

impl fmt::Display for Ident {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Serialize for Ident {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

/// A cost label, printed `_l<n>`. Labels are ordered by `n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Label(pub u32);

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "_l{}", self.0)
    }
}

impl Serialize for Label {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl std::str::FromStr for Label {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        let digits = s.strip_prefix("_l").ok_or(())?;
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(());
        }
        digits.parse().map(Label).map_err(|_| ())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expr {
    Var(Ident),
    Const(i64),
    Add(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn var(name: &str) -> Self {
        Expr::Var(Ident::new(name).expect("valid identifier"))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn add(lhs: Expr, rhs: Expr) -> Self {
        Expr::Add(Box::new(lhs), Box::new(rhs))
    }
}

/// The only boolean condition of the language, `lhs < rhs`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BoolCond {
    pub lhs: Expr,
    pub rhs: Expr,
}

impl BoolCond {
    pub fn less(lhs: Expr, rhs: Expr) -> Self {
        BoolCond { lhs, rhs }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Stmt {
    Skip,
    Assign(Ident, Expr),
    Seq(Box<Stmt>, Box<Stmt>),
    If(BoolCond, Box<Stmt>, Box<Stmt>),
    While(BoolCond, Box<Stmt>),
    Labelled(Label, Box<Stmt>),
}

impl Stmt {
    pub fn assign(name: &str, e: Expr) -> Self {
        Stmt::Assign(Ident::new(name).expect("valid identifier"), e)
    }

    pub fn seq(first: Stmt, second: Stmt) -> Self {
        Stmt::Seq(Box::new(first), Box::new(second))
    }

    pub fn if_(cond: BoolCond, then: Stmt, otherwise: Stmt) -> Self {
        Stmt::If(cond, Box::new(then), Box::new(otherwise))
    }

    pub fn while_(cond: BoolCond, body: Stmt) -> Self {
        Stmt::While(cond, Box::new(body))
    }

    pub fn labelled(label: Label, body: Stmt) -> Self {
        Stmt::Labelled(label, Box::new(body))
    }

    /// True iff the statement contains no `Labelled` node.
    pub fn is_unlabelled(&self) -> bool {
        let mut labels = Vec::new();
        self.collect_labels(&mut labels);
        labels.is_empty()
    }

    /// Labels in pre-order.
    pub fn collect_labels(&self, out: &mut Vec<Label>) {
        match self {
            Stmt::Skip | Stmt::Assign(..) => {}
            Stmt::Seq(a, b) | Stmt::If(_, a, b) => {
                a.collect_labels(out);
                b.collect_labels(out);
            }
            Stmt::While(_, body) => body.collect_labels(out),
            Stmt::Labelled(l, body) => {
                out.push(*l);
                body.collect_labels(out);
            }
        }
    }

    /// Every identifier read or written, in first-occurrence order.
    pub fn collect_idents(&self, out: &mut Vec<Ident>) {
        fn push(out: &mut Vec<Ident>, id: &Ident) {
            if !out.contains(id) {
                out.push(id.clone());
            }
        }
        fn expr(e: &Expr, out: &mut Vec<Ident>) {
            match e {
                Expr::Var(x) => push(out, x),
                Expr::Const(_) => {}
                Expr::Add(a, b) => {
                    expr(a, out);
                    expr(b, out);
                }
            }
        }
        match self {
            Stmt::Skip => {}
            Stmt::Assign(x, e) => {
                push(out, x);
                expr(e, out);
            }
            Stmt::Seq(a, b) => {
                a.collect_idents(out);
                b.collect_idents(out);
            }
            Stmt::If(c, a, b) => {
                expr(&c.lhs, out);
                expr(&c.rhs, out);
                a.collect_idents(out);
                b.collect_idents(out);
            }
            Stmt::While(c, body) => {
                expr(&c.lhs, out);
                expr(&c.rhs, out);
                body.collect_idents(out);
            }
            Stmt::Labelled(_, body) => body.collect_idents(out),
        }
    }

    /// Removes every label; the identity on expressions and conditions.
    pub fn erase(&self) -> Stmt {
        match self {
            Stmt::Skip | Stmt::Assign(..) => self.clone(),
            Stmt::Seq(a, b) => Stmt::seq(a.erase(), b.erase()),
            Stmt::If(c, a, b) => Stmt::if_(c.clone(), a.erase(), b.erase()),
            Stmt::While(c, body) => Stmt::while_(c.clone(), body.erase()),
            Stmt::Labelled(_, body) => body.erase(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Program {
    pub body: Stmt,
}

impl Program {
    pub fn new(body: Stmt) -> Self {
        Program { body }
    }

    pub fn is_unlabelled(&self) -> bool {
        self.body.is_unlabelled()
    }

    pub fn labels(&self) -> Vec<Label> {
        let mut out = Vec::new();
        self.body.collect_labels(&mut out);
        out
    }

    pub fn idents(&self) -> Vec<Ident> {
        let mut out = Vec::new();
        self.body.collect_idents(&mut out);
        out
    }

    pub fn uses_cost(&self) -> bool {
        self.idents().iter().any(Ident::is_cost)
    }
}

/// Removes all labels from a program.
pub fn erase_imp(p: &Program) -> Program {
    Program::new(p.body.erase())
}

/// A total map from identifiers to integers. Unbound identifiers read as 0.
///
/// Zero bindings are never stored, so structural equality coincides with
/// equality of the total functions.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Store {
    bindings: BTreeMap<Ident, i64>,
}

impl Store {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, x: &Ident) -> i64 {
        self.bindings.get(x).copied().unwrap_or(0)
    }

    pub fn set(&mut self, x: Ident, v: i64) {
        if v == 0 {
            self.bindings.remove(&x);
        } else {
            self.bindings.insert(x, v);
        }
    }

    pub fn with(mut self, name: &str, v: i64) -> Self {
        self.set(Ident::new(name).expect("valid identifier"), v);
        self
    }

    /// Non-zero bindings in identifier order.
    pub fn iter(&self) -> impl Iterator<Item = (&Ident, i64)> {
        self.bindings.iter().map(|(k, v)| (k, *v))
    }

    /// The same store with `x` forced to 0.
    pub fn without(&self, x: &Ident) -> Store {
        let mut s = self.clone();
        s.bindings.remove(x);
        s
    }
}

/// `x=1 y=-2`, user variables in order and `cost` last; zero bindings omitted.
impl fmt::Display for Store {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let user = self.iter().filter(|(x, _)| !x.is_cost());
        let cost = self.iter().filter(|(x, _)| x.is_cost());
        for (i, (x, v)) in user.chain(cost).enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{x}={v}")?;
        }
        Ok(())
    }
}

impl FromIterator<(Ident, i64)> for Store {
    fn from_iter<I: IntoIterator<Item = (Ident, i64)>>(iter: I) -> Self {
        let mut s = Store::new();
        for (x, v) in iter {
            s.set(x, v);
        }
        s
    }
}

/// A finite sequence of emitted labels.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize)]
pub struct Trace(pub Vec<Label>);

impl Trace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, l: Label) {
        self.0.push(l);
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn labels(&self) -> &[Label] {
        &self.0
    }

    pub fn concat(mut self, other: &Trace) -> Trace {
        self.0.extend_from_slice(&other.0);
        self
    }

    /// The multiset view: labels with multiplicities.
    pub fn multiset(&self) -> BTreeMap<Label, usize> {
        let mut m = BTreeMap::new();
        for l in &self.0 {
            *m.entry(*l).or_insert(0) += 1;
        }
        m
    }
}

impl fmt::Display for Trace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("ε");
        }
        for (i, l) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ImpError {
    #[error("cannot step a terminal configuration")]
    Terminal,
    #[error("fuel exhausted after {0} steps")]
    FuelExhausted(u64),
    #[error("integer overflow")]
    Overflow,
}
