use std::fmt::Write;

use super::{BoolCond, Expr, Program, Stmt};

/// Renders a program in the concrete syntax accepted by [`super::parse_imp`].
pub fn print_imp(p: &Program) -> String {
    let mut out = String::from("prog ");
    stmt(&p.body, &mut out);
    out
}

fn stmt(s: &Stmt, out: &mut String) {
    match s {
        Stmt::Seq(first, rest) => {
            atom(first, out);
            out.push_str("; ");
            stmt(rest, out);
        }
        _ => atom(s, out),
    }
}

fn atom(s: &Stmt, out: &mut String) {
    match s {
        Stmt::Skip => out.push_str("skip"),
        Stmt::Assign(x, e) => {
            let _ = write!(out, "{x} := ");
            expr(e, out);
        }
        Stmt::Seq(..) => block(s, out),
        Stmt::If(b, then, otherwise) => {
            out.push_str("if ");
            cond(b, out);
            out.push_str(" then ");
            block(then, out);
            out.push_str(" else ");
            block(otherwise, out);
        }
        Stmt::While(b, body) => {
            out.push_str("while ");
            cond(b, out);
            out.push_str(" do ");
            block(body, out);
        }
        Stmt::Labelled(l, body) => {
            let _ = write!(out, "{l}: ");
            atom(body, out);
        }
    }
}

fn block(s: &Stmt, out: &mut String) {
    out.push_str("{ ");
    stmt(s, out);
    out.push_str(" }");
}

fn cond(b: &BoolCond, out: &mut String) {
    expr(&b.lhs, out);
    out.push_str(" < ");
    expr(&b.rhs, out);
}

fn expr(e: &Expr, out: &mut String) {
    match e {
        Expr::Add(a, b) => {
            expr(a, out);
            out.push_str(" + ");
            term(b, out);
        }
        _ => term(e, out),
    }
}

fn term(e: &Expr, out: &mut String) {
    match e {
        Expr::Var(x) => out.push_str(x.as_str()),
        Expr::Const(n) => {
            let _ = write!(out, "{n}");
        }
        Expr::Add(..) => {
            out.push('(');
            expr(e, out);
            out.push(')');
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imp::{parse_imp, Label};

    #[test]
    fn simple_forms() {
        assert_eq!(print_imp(&Program::new(Stmt::Skip)), "prog skip");
        assert_eq!(
            print_imp(&Program::new(Stmt::labelled(Label(1), Stmt::Skip))),
            "prog _l1: skip"
        );
    }

    #[test]
    fn grouping_is_explicit() {
        let nested = Stmt::labelled(
            Label(0),
            Stmt::seq(Stmt::seq(Stmt::Skip, Stmt::Skip), Stmt::Skip),
        );
        let text = print_imp(&Program::new(nested.clone()));
        assert_eq!(text, "prog _l0: { { skip; skip }; skip }");
        assert_eq!(parse_imp(&text).unwrap().body, nested);

        let e = Expr::add(Expr::Const(1), Expr::add(Expr::var("y"), Expr::Const(-2)));
        let text = print_imp(&Program::new(Stmt::assign("x", e.clone())));
        assert_eq!(text, "prog x := 1 + (y + -2)");
        assert_eq!(parse_imp(&text).unwrap().body, Stmt::assign("x", e));
    }
}
