//! Line-oriented text helpers shared by the Vm and Mips listings.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {msg}")]
pub struct AsmParseError {
    pub line: usize,
    pub msg: String,
}

/// Non-empty, comment-stripped lines of a listing, split into words.
pub(crate) fn lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let body = raw.split('#').next().unwrap_or("");
        let words: Vec<&str> = body.split_whitespace().collect();
        (!words.is_empty()).then_some((i + 1, words))
    })
}

pub(crate) fn arity(line: usize, words: &[&str], n: usize) -> Result<(), AsmParseError> {
    if words.len() == n + 1 {
        Ok(())
    } else {
        Err(AsmParseError {
            line,
            msg: format!("`{}` takes {n} operand(s)", words[0]),
        })
    }
}

pub(crate) fn int(line: usize, w: &str) -> Result<i64, AsmParseError> {
    w.parse().map_err(|_| AsmParseError {
        line,
        msg: format!("bad integer `{w}`"),
    })
}
