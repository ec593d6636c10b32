//! Brute-force reference answers for the object-code checks, by explicit
//! enumeration. Exponential; meant for codes of a dozen instructions.
//! Deliberately shares nothing with `costcheck` beyond the instruction type
//! and the cost table.

use std::collections::BTreeMap;

use crate::imp::Label;
use crate::mips::{MachineConfig, MipsCode, MipsInstr};

fn successors(code: &MipsCode, i: usize) -> Vec<usize> {
    let next = i as i64 + 1;
    let raw = match &code.0[i] {
        MipsInstr::Halt => vec![],
        MipsInstr::Branch(k) => vec![next + k],
        MipsInstr::Bge(_, _, k) => vec![next, next + k],
        _ => vec![next],
    };
    let mut out: Vec<usize> = Vec::new();
    for t in raw {
        assert!(t >= 0 && (t as usize) < code.len(), "dangling jump at {i}");
        if !out.contains(&(t as usize)) {
            out.push(t as usize);
        }
    }
    out
}

fn labelled(code: &MipsCode, i: usize) -> bool {
    matches!(code.0[i], MipsInstr::Nop(_))
}

fn leaf(code: &MipsCode, i: usize) -> bool {
    matches!(code.0[i], MipsInstr::Halt)
}

/// Every cycle made of unlabelled nodes, each reported once starting from
/// its smallest node.
pub fn unlabelled_cycles(code: &MipsCode) -> Vec<Vec<usize>> {
    fn walk(code: &MipsCode, start: usize, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        let v = *path.last().unwrap();
        for s in successors(code, v) {
            if labelled(code, s) || s < start {
                continue;
            }
            if s == start {
                let mut c = path.clone();
                c.push(start);
                out.push(c);
            } else if !path.contains(&s) {
                path.push(s);
                walk(code, start, path, out);
                path.pop();
            }
        }
    }
    let mut out = Vec::new();
    for start in 0..code.len() {
        if !labelled(code, start) {
            walk(code, start, &mut vec![start], &mut out);
        }
    }
    out
}

pub fn is_sound(code: &MipsCode) -> bool {
    !code.is_empty() && labelled(code, 0) && unlabelled_cycles(code).is_empty()
}

/// All simple paths, grouped by the label heading them. Only meaningful on
/// sound code.
pub fn simple_paths(code: &MipsCode) -> BTreeMap<Label, Vec<Vec<usize>>> {
    fn walk(code: &MipsCode, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        let v = *path.last().unwrap();
        let succ = successors(code, v);
        if succ.is_empty() {
            out.push(path.clone());
        }
        for s in succ {
            if labelled(code, s) || leaf(code, s) {
                out.push(path.clone());
            } else if !path.contains(&s) {
                path.push(s);
                walk(code, path, out);
                path.pop();
            }
        }
    }
    let mut out: BTreeMap<Label, Vec<Vec<usize>>> = BTreeMap::new();
    for i in 0..code.len() {
        if let MipsInstr::Nop(l) = code.0[i] {
            let paths = out.entry(l).or_default();
            walk(code, &mut vec![i], paths);
        }
    }
    out
}

pub fn path_cost(code: &MipsCode, path: &[usize], cfg: &MachineConfig) -> u64 {
    path.iter().map(|&i| cfg.cost_of(&code.0[i])).sum()
}

/// κ as the maximum over explicitly enumerated simple paths.
pub fn kappa(code: &MipsCode, cfg: &MachineConfig) -> BTreeMap<Label, u64> {
    simple_paths(code)
        .into_iter()
        .map(|(l, ps)| {
            let max = ps.iter().map(|p| path_cost(code, p, cfg)).max().unwrap_or(0);
            (l, max)
        })
        .collect()
}

pub fn is_precise(code: &MipsCode, cfg: &MachineConfig) -> bool {
    is_sound(code)
        && simple_paths(code).values().all(|ps| {
            let mut costs = ps.iter().map(|p| path_cost(code, p, cfg));
            let first = costs.next();
            costs.all(|c| Some(c) == first)
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mips::Reg;
    use MipsInstr::*;

    #[test]
    fn small_cases() {
        let code = MipsCode(vec![Nop(Label(0)), Branch(-2), Halt]);
        assert!(is_sound(&code));
        assert_eq!(simple_paths(&code)[&Label(0)], vec![vec![0, 1]]);
        let code = MipsCode(vec![Nop(Label(0)), LoadI(Reg::A, 1), Branch(-2), Halt]);
        assert_eq!(unlabelled_cycles(&code), vec![vec![1, 2, 1]]);
        assert!(!is_sound(&code));
        let code = MipsCode(vec![Nop(Label(0)), Bge(Reg::A, Reg::B, 1), LoadI(Reg::A, 1), Halt]);
        let cfg = MachineConfig::default();
        assert_eq!(kappa(&code, &cfg)[&Label(0)], 2);
        assert!(!is_precise(&code, &cfg));
    }
}
