//! Random Imp programs and stores for differential testing.
//!
//! Imp has no subtraction, but negative literals are allowed, so most loops
//! are counter loops `while 0 < v do { S; v := v + -1 }` where `S` never
//! assigns `v`. A minority use arbitrary guards and may diverge; callers run
//! them under fuel.

use rand::Rng;

use crate::imp::{BoolCond, Expr, Ident, Label, Program, Stmt, Store};
use crate::mips::{MipsCode, MipsInstr, Reg};

const VARS: [&str; 4] = ["x", "y", "z", "w"];

#[derive(Clone, Copy, Debug)]
pub struct GenConfig {
    /// Upper bound on the number of statement nodes.
    pub max_size: usize,
    pub max_vars: usize,
    pub max_const: i64,
    pub max_depth: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            max_size: 30,
            max_vars: 4,
            max_const: 5,
            max_depth: 3,
        }
    }
}

/// Number of statement nodes, labels excluded.
pub fn program_size(p: &Program) -> usize {
    fn go(s: &Stmt) -> usize {
        match s {
            Stmt::Skip | Stmt::Assign(..) => 1,
            Stmt::Seq(a, b) => 1 + go(a) + go(b),
            Stmt::If(_, a, b) => 1 + go(a) + go(b),
            Stmt::While(_, b) => 1 + go(b),
            Stmt::Labelled(_, b) => go(b),
        }
    }
    go(&p.body)
}

struct Gen<'a, R> {
    rng: &'a mut R,
    cfg: GenConfig,
    vars: Vec<Ident>,
}

pub fn gen_program<R: Rng>(rng: &mut R, cfg: &GenConfig) -> Program {
    let n = rng.gen_range(1..=cfg.max_vars.clamp(1, VARS.len()));
    let vars: Vec<Ident> = VARS[..n].iter().map(|v| Ident::new(*v).unwrap()).collect();
    let max = cfg.max_size.max(1);
    // geometric, mean about a third of the bound
    let q = 1.0 - 3.0 / (max as f64 + 3.0);
    let mut size = 1;
    while size < max && rng.gen_bool(q) {
        size += 1;
    }
    let mut g = Gen {
        rng,
        cfg: *cfg,
        vars: vars.clone(),
    };
    let body = g.stmt(size, &vars, 0);
    Program::new(body)
}

/// Values for every variable the program mentions; `cost` is left at 0.
pub fn gen_store<R: Rng>(rng: &mut R, p: &Program) -> Store {
    p.idents()
        .into_iter()
        .filter(|x| !x.is_cost())
        .map(|x| (x, rng.gen_range(-3..=6)))
        .collect()
}

impl<R: Rng> Gen<'_, R> {
    fn stmt(&mut self, budget: usize, writable: &[Ident], depth: usize) -> Stmt {
        if budget <= 1 {
            return self.atom(writable);
        }
        let roll = self.rng.gen_range(0..100);
        let nested = depth < self.cfg.max_depth && budget >= 3;
        match roll {
            0..=44 => {
                let left = self.rng.gen_range(1..budget);
                let a = self.stmt(left, writable, depth);
                let b = self.stmt(budget - left, writable, depth);
                Stmt::seq(a, b)
            }
            45..=69 if nested => {
                let rest = budget - 1;
                let left = self.rng.gen_range(1..rest.max(2)).min(rest);
                let c = self.cond();
                let a = self.stmt(left, writable, depth + 1);
                let b = self.stmt((rest - left).max(1), writable, depth + 1);
                Stmt::if_(c, a, b)
            }
            70..=89 if nested && !writable.is_empty() => {
                let v = writable[self.rng.gen_range(0..writable.len())].clone();
                let inner: Vec<Ident> = writable.iter().filter(|x| **x != v).cloned().collect();
                let body = self.stmt(budget - 2, &inner, depth + 1);
                let dec = Stmt::Assign(v.clone(), Expr::add(Expr::Var(v.clone()), Expr::Const(-1)));
                Stmt::while_(
                    BoolCond::less(Expr::Const(0), Expr::Var(v)),
                    Stmt::seq(body, dec),
                )
            }
            90..=94 if nested => {
                let c = self.cond();
                let body = self.stmt(budget - 1, writable, depth + 1);
                Stmt::while_(c, body)
            }
            _ => self.atom(writable),
        }
    }

    fn atom(&mut self, writable: &[Ident]) -> Stmt {
        if writable.is_empty() || self.rng.gen_bool(0.15) {
            return Stmt::Skip;
        }
        let x = writable[self.rng.gen_range(0..writable.len())].clone();
        Stmt::Assign(x, self.expr(0))
    }

    fn cond(&mut self) -> BoolCond {
        BoolCond::less(self.expr(1), self.expr(1))
    }

    fn expr(&mut self, depth: usize) -> Expr {
        let roll = self.rng.gen_range(0..100);
        match roll {
            0..=44 => Expr::Var(self.vars[self.rng.gen_range(0..self.vars.len())].clone()),
            45..=74 => {
                let m = self.cfg.max_const;
                Expr::Const(self.rng.gen_range(-m..=m))
            }
            _ if depth < 2 => Expr::add(self.expr(depth + 1), self.expr(depth + 1)),
            _ => Expr::Const(1),
        }
    }
}

/// Arbitrary jump structure over `len` instructions, ending in `halt`.
/// Not the output of any compiler; used to exercise the graph checks.
pub fn gen_mips_graph<R: Rng>(rng: &mut R, len: usize) -> MipsCode {
    let len = len.max(1);
    let mut code = Vec::with_capacity(len);
    for i in 0..len - 1 {
        let k = rng.gen_range(0..len as i64) - i as i64 - 1;
        let ins = match rng.gen_range(0..10) {
            _ if i == 0 && rng.gen_bool(0.8) => MipsInstr::Nop(Label(0)),
            0..=2 => MipsInstr::Nop(Label(rng.gen_range(0..3))),
            3 => MipsInstr::LoadI(Reg::A, 1),
            4 => MipsInstr::AddR(Reg::A, Reg::A, Reg::B),
            5 | 6 => MipsInstr::Branch(k),
            _ => MipsInstr::Bge(Reg::A, Reg::B, k),
        };
        code.push(ins);
    }
    code.push(MipsInstr::Halt);
    MipsCode(code)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn deterministic_and_bounded() {
        let cfg = GenConfig::default();
        let mut a = ChaCha8Rng::seed_from_u64(7);
        let mut b = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let p = gen_program(&mut a, &cfg);
            assert_eq!(p, gen_program(&mut b, &cfg));
            assert!(p.is_unlabelled());
            assert!(!p.uses_cost());
            assert!(program_size(&p) <= 2 * cfg.max_size, "{}", program_size(&p));
            assert!(p.idents().len() <= 4);
        }
    }

    #[test]
    fn loops_appear() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = GenConfig::default();
        let n = (0..300)
            .map(|_| gen_program(&mut rng, &cfg))
            .filter(|p| crate::imp::print_imp(p).contains("while"))
            .count();
        assert!(n > 30, "{n}");
    }
}
