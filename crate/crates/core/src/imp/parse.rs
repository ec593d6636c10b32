use thiserror::Error;

use super::{BoolCond, Expr, Ident, Label, Program, Stmt, COST_VAR};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("{line}:{col}: `{COST_VAR}` is reserved for instrumentation")]
    Reserved { line: usize, col: usize },
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Accept the reserved `cost` identifier (used to read back annotated programs).
    pub allow_cost: bool,
}

pub fn parse_imp(text: &str) -> Result<Program, ParseError> {
    parse_imp_with(text, ParseOptions::default())
}

pub fn parse_imp_with(text: &str, opts: ParseOptions) -> Result<Program, ParseError> {
    let tokens = lex(text)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        opts,
    };
    p.expect(&Tok::Prog)?;
    let body = p.stmt()?;
    p.expect(&Tok::Eof)?;
    Ok(Program { body })
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Prog,
    Skip,
    If,
    Then,
    Else,
    While,
    Do,
    Ident(String),
    Label(u32),
    Int(i64),
    Assign,
    Colon,
    Semi,
    Plus,
    Less,
    LBrace,
    RBrace,
    LParen,
    RParen,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Prog => "`prog`".into(),
            Tok::Skip => "`skip`".into(),
            Tok::If => "`if`".into(),
            Tok::Then => "`then`".into(),
            Tok::Else => "`else`".into(),
            Tok::While => "`while`".into(),
            Tok::Do => "`do`".into(),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Label(n) => format!("label `_l{n}`"),
            Tok::Int(n) => format!("integer `{n}`"),
            Tok::Assign => "`:=`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Plus => "`+`".into(),
            Tok::Less => "`<`".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let err = |line, col, msg: String| ParseError::Syntax { line, col, msg };
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let (start_line, start_col) = (line, col);
        let start = i;
        let tok = if c.is_ascii_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            match word.as_str() {
                "prog" => Tok::Prog,
                "skip" => Tok::Skip,
                "if" => Tok::If,
                "then" => Tok::Then,
                "else" => Tok::Else,
                "while" => Tok::While,
                "do" => Tok::Do,
                _ if word.starts_with("_l")
                    && word.len() > 2
                    && word[2..].bytes().all(|b| b.is_ascii_digit()) =>
                {
                    let n = word[2..].parse().map_err(|_| {
                        err(start_line, start_col, format!("label `{word}` out of range"))
                    })?;
                    Tok::Label(n)
                }
                _ => Tok::Ident(word),
            }
        } else if c.is_ascii_digit() || (c == '-' && chars.get(i + 1).is_some_and(char::is_ascii_digit)) {
            i += 1;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let lit: String = chars[start..i].iter().collect();
            let n = lit.parse::<i64>().map_err(|_| {
                err(start_line, start_col, format!("integer `{lit}` out of range"))
            })?;
            Tok::Int(n)
        } else {
            i += 1;
            match c {
                ':' if chars.get(i) == Some(&'=') => {
                    i += 1;
                    Tok::Assign
                }
                ':' => Tok::Colon,
                ';' => Tok::Semi,
                '+' => Tok::Plus,
                '<' => Tok::Less,
                '{' => Tok::LBrace,
                '}' => Tok::RBrace,
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                _ => return Err(err(start_line, start_col, format!("unexpected character `{c}`"))),
            }
        };
        col += i - start;
        out.push(Spanned {
            tok,
            line: start_line,
            col: start_col,
        });
    }
    out.push(Spanned {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

struct Parser {
    tokens: Vec<Spanned>,
    pos: usize,
    opts: ParseOptions,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn bump(&mut self) -> Tok {
        let t = self.tokens[self.pos].tok.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &str) -> ParseError {
        let t = &self.tokens[self.pos];
        ParseError::Syntax {
            line: t.line,
            col: t.col,
            msg: format!("expected {expected}, found {}", t.tok.describe()),
        }
    }

    fn expect(&mut self, tok: &Tok) -> Result<(), ParseError> {
        if self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.error(&tok.describe()))
        }
    }

    fn ident(&mut self) -> Result<Ident, ParseError> {
        let (line, col) = (self.tokens[self.pos].line, self.tokens[self.pos].col);
        match self.peek().clone() {
            Tok::Ident(name) => {
                if name == COST_VAR && !self.opts.allow_cost {
                    return Err(ParseError::Reserved { line, col });
                }
                self.bump();
                Ok(Ident::new(name).expect("lexer produces valid identifiers"))
            }
            _ => Err(self.error("identifier")),
        }
    }

    fn stmt(&mut self) -> Result<Stmt, ParseError> {
        let first = self.atom()?;
        if self.peek() == &Tok::Semi {
            self.bump();
            let rest = self.stmt()?;
            Ok(Stmt::seq(first, rest))
        } else {
            Ok(first)
        }
    }

    fn block(&mut self) -> Result<Stmt, ParseError> {
        self.expect(&Tok::LBrace)?;
        let s = self.stmt()?;
        self.expect(&Tok::RBrace)?;
        Ok(s)
    }

    fn atom(&mut self) -> Result<Stmt, ParseError> {
        match self.peek().clone() {
            Tok::Skip => {
                self.bump();
                Ok(Stmt::Skip)
            }
            Tok::Ident(_) => {
                let x = self.ident()?;
                self.expect(&Tok::Assign)?;
                let e = self.expr()?;
                Ok(Stmt::Assign(x, e))
            }
            Tok::If => {
                self.bump();
                let b = self.bexp()?;
                self.expect(&Tok::Then)?;
                let then = self.block()?;
                self.expect(&Tok::Else)?;
                let otherwise = self.block()?;
                Ok(Stmt::if_(b, then, otherwise))
            }
            Tok::While => {
                self.bump();
                let b = self.bexp()?;
                self.expect(&Tok::Do)?;
                let body = self.block()?;
                Ok(Stmt::while_(b, body))
            }
            Tok::Label(n) => {
                self.bump();
                self.expect(&Tok::Colon)?;
                let body = self.atom()?;
                Ok(Stmt::labelled(Label(n), body))
            }
            Tok::LBrace => self.block(),
            _ => Err(self.error("statement")),
        }
    }

    fn bexp(&mut self) -> Result<BoolCond, ParseError> {
        let lhs = self.expr()?;
        self.expect(&Tok::Less)?;
        let rhs = self.expr()?;
        Ok(BoolCond { lhs, rhs })
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.term()?;
        while self.peek() == &Tok::Plus {
            self.bump();
            let rhs = self.term()?;
            e = Expr::add(e, rhs);
        }
        Ok(e)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Ident(_) => Ok(Expr::Var(self.ident()?)),
            Tok::Int(n) => {
                self.bump();
                Ok(Expr::Const(n))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(&Tok::RParen)?;
                Ok(e)
            }
            _ => Err(self.error("expression")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_program() {
        assert_eq!(parse_imp("prog skip").unwrap(), Program::new(Stmt::Skip));
    }

    #[test]
    fn increment() {
        assert_eq!(
            parse_imp("prog x := x + 1").unwrap(),
            Program::new(Stmt::assign("x", Expr::add(Expr::var("x"), Expr::Const(1))))
        );
    }

    #[test]
    fn labelled_loop() {
        let p = parse_imp("prog _l1: while 0 < x do { x := x + 1 }").unwrap();
        let expected = Stmt::labelled(
            Label(1),
            Stmt::while_(
                BoolCond::less(Expr::Const(0), Expr::var("x")),
                Stmt::assign("x", Expr::add(Expr::var("x"), Expr::Const(1))),
            ),
        );
        assert_eq!(p, Program::new(expected));
    }

    #[test]
    fn seq_is_right_associative_and_labels_bind_atoms() {
        let p = parse_imp("prog _l0: x := 1; y := 2; skip").unwrap();
        let expected = Stmt::seq(
            Stmt::labelled(Label(0), Stmt::assign("x", Expr::Const(1))),
            Stmt::seq(Stmt::assign("y", Expr::Const(2)), Stmt::Skip),
        );
        assert_eq!(p.body, expected);
    }

    #[test]
    fn negative_literals_and_comments() {
        let p = parse_imp("# decrement\nprog x := x + -3 # done\n").unwrap();
        assert_eq!(
            p.body,
            Stmt::assign("x", Expr::add(Expr::var("x"), Expr::Const(-3)))
        );
        let p = parse_imp("prog x := -9223372036854775808").unwrap();
        assert_eq!(p.body, Stmt::assign("x", Expr::Const(i64::MIN)));
    }

    #[test]
    fn reserved_cost() {
        assert_eq!(
            parse_imp("prog cost := 1"),
            Err(ParseError::Reserved { line: 1, col: 6 })
        );
        let opts = ParseOptions { allow_cost: true };
        assert!(parse_imp_with("prog cost := cost + 4; x := x + 1", opts).is_ok());
    }

    #[test]
    fn syntax_errors_carry_position() {
        match parse_imp("prog\n  x := ") {
            Err(ParseError::Syntax { line, col, .. }) => assert_eq!((line, col), (2, 8)),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_imp("prog if 0 < x then skip else skip").is_err());
        assert!(parse_imp("prog x := 1 < 2").is_err());
        assert!(parse_imp("prog skip skip").is_err());
        assert!(parse_imp("prog x = 1").is_err());
        assert!(parse_imp("skip").is_err());
    }
}
