use super::{BoolCond, Expr, ImpError, Label, Program, Stmt, Store, Trace};

pub fn eval_expr(e: &Expr, s: &Store) -> Result<i64, ImpError> {
    match e {
        Expr::Const(n) => Ok(*n),
        Expr::Var(x) => Ok(s.get(x)),
        Expr::Add(a, b) => eval_expr(a, s)?
            .checked_add(eval_expr(b, s)?)
            .ok_or(ImpError::Overflow),
    }
}

pub fn eval_bool(b: &BoolCond, s: &Store) -> Result<bool, ImpError> {
    Ok(eval_expr(&b.lhs, s)? < eval_expr(&b.rhs, s)?)
}

/// Statements still to run, innermost first. The empty continuation is `halt`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Continuation {
    // Top of the continuation is the last element.
    frames: Vec<Stmt>,
}

impl Continuation {
    pub fn halt() -> Self {
        Self::default()
    }

    pub fn cons(mut self, s: Stmt) -> Self {
        self.frames.push(s);
        self
    }

    pub fn is_halt(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// A small-step configuration `(S, K, s)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Config {
    pub stmt: Stmt,
    pub cont: Continuation,
    pub store: Store,
}

impl Config {
    pub fn initial(p: &Program, store: Store) -> Self {
        Config {
            stmt: p.body.clone(),
            cont: Continuation::halt(),
            store,
        }
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self.stmt, Stmt::Skip) && self.cont.is_halt()
    }
}

/// One small step. Returns the emitted label when the labelled rule fires.
pub fn step_imp(c: Config) -> Result<(Config, Option<Label>), ImpError> {
    let Config {
        stmt,
        mut cont,
        mut store,
    } = c;
    let next = match stmt {
        Stmt::Assign(x, e) => {
            let v = eval_expr(&e, &store)?;
            store.set(x, v);
            Stmt::Skip
        }
        Stmt::Seq(first, second) => {
            cont.frames.push(*second);
            *first
        }
        Stmt::If(b, then, otherwise) => {
            if eval_bool(&b, &store)? {
                *then
            } else {
                *otherwise
            }
        }
        Stmt::While(b, body) => {
            if eval_bool(&b, &store)? {
                let inner = (*body).clone();
                cont.frames.push(Stmt::While(b, body));
                inner
            } else {
                Stmt::Skip
            }
        }
        Stmt::Skip => match cont.frames.pop() {
            Some(s) => s,
            None => return Err(ImpError::Terminal),
        },
        Stmt::Labelled(l, body) => {
            return Ok((
                Config {
                    stmt: *body,
                    cont,
                    store,
                },
                Some(l),
            ))
        }
    };
    Ok((
        Config {
            stmt: next,
            cont,
            store,
        },
        None,
    ))
}

/// Runs `p` from `s` to termination, failing after `fuel` steps.
pub fn run_imp(p: &Program, s: Store, fuel: u64) -> Result<(Store, Trace), ImpError> {
    let mut c = Config::initial(p, s);
    let mut trace = Trace::new();
    let mut steps = 0u64;
    while !c.is_terminal() {
        if steps == fuel {
            return Err(ImpError::FuelExhausted(steps));
        }
        let (next, label) = step_imp(c)?;
        if let Some(l) = label {
            trace.push(l);
        }
        c = next;
        steps += 1;
    }
    Ok((c.store, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imp::parse_imp;

    fn x() -> super::super::Ident {
        super::super::Ident::new("x").unwrap()
    }

    #[test]
    fn expression_rules() {
        let s = Store::new().with("x", 3);
        assert_eq!(eval_expr(&Expr::Const(7), &s), Ok(7));
        assert_eq!(eval_expr(&Expr::var("x"), &s), Ok(3));
        let s41 = Store::new().with("x", 41);
        assert_eq!(
            eval_expr(&Expr::add(Expr::var("x"), Expr::Const(1)), &s41),
            Ok(42)
        );
        assert_eq!(
            eval_expr(&Expr::add(Expr::Const(i64::MAX), Expr::Const(1)), &s),
            Err(ImpError::Overflow)
        );
    }

    #[test]
    fn condition_rules() {
        let s = Store::new().with("x", 5);
        assert_eq!(
            eval_bool(&BoolCond::less(Expr::Const(0), Expr::Const(1)), &s),
            Ok(true)
        );
        assert_eq!(
            eval_bool(&BoolCond::less(Expr::var("x"), Expr::var("x")), &s),
            Ok(false)
        );
        let b = BoolCond::less(Expr::add(Expr::var("x"), Expr::Const(1)), Expr::var("x"));
        assert_eq!(eval_bool(&b, &s), Ok(false));
    }

    #[test]
    fn assign_step() {
        let c = Config {
            stmt: Stmt::assign("x", Expr::Const(2)),
            cont: Continuation::halt(),
            store: Store::new(),
        };
        let (next, l) = step_imp(c).unwrap();
        assert_eq!(l, None);
        assert!(next.is_terminal());
        assert_eq!(next.store.get(&x()), 2);
    }

    #[test]
    fn labelled_step_emits() {
        let c = Config {
            stmt: Stmt::labelled(Label(1), Stmt::Skip),
            cont: Continuation::halt(),
            store: Store::new(),
        };
        let (next, l) = step_imp(c).unwrap();
        assert_eq!(l, Some(Label(1)));
        assert!(next.is_terminal());
    }

    #[test]
    fn false_guard_exits_loop() {
        let c = Config {
            stmt: Stmt::while_(BoolCond::less(Expr::var("x"), Expr::var("x")), Stmt::Skip),
            cont: Continuation::halt(),
            store: Store::new(),
        };
        let (next, l) = step_imp(c).unwrap();
        assert_eq!(l, None);
        assert_eq!(next.stmt, Stmt::Skip);
        assert!(next.cont.is_halt());
    }

    #[test]
    fn terminal_cannot_step() {
        let c = Config::initial(&Program::new(Stmt::Skip), Store::new());
        assert_eq!(step_imp(c), Err(ImpError::Terminal));
    }

    #[test]
    fn runs() {
        let p = parse_imp("prog skip").unwrap();
        assert_eq!(run_imp(&p, Store::new(), 10), Ok((Store::new(), Trace::new())));

        let p = parse_imp("prog _l1: x := x + 1").unwrap();
        let (s, t) = run_imp(&p, Store::new(), 10).unwrap();
        assert_eq!(s, Store::new().with("x", 1));
        assert_eq!(t, Trace(vec![Label(1)]));

        let p = parse_imp("prog _l1: while 0 < x do { x := x + 1 }").unwrap();
        assert!(matches!(
            run_imp(&p, Store::new().with("x", 1), 100),
            Err(ImpError::FuelExhausted(100))
        ));
    }

    #[test]
    fn seq_pushes_continuation() {
        let p = parse_imp("prog x := 1; x := x + 1; _l3: skip").unwrap();
        let (s, t) = run_imp(&p, Store::new(), 20).unwrap();
        assert_eq!(s.get(&x()), 2);
        assert_eq!(t, Trace(vec![Label(3)]));
    }
}
