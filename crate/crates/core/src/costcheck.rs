//! Checks on labelled object code.
//!
//! The control-flow graph has one node per instruction, rooted at 0. The
//! code is *sound* when the root is a `nop` label and every cycle crosses a
//! labelled node; the label cost `κ(ℓ)` is then the maximum cost of a simple
//! path starting at a node labelled `ℓ`. A simple path runs from the labelled
//! node through unlabelled nodes and ends just before the next labelled node
//! or leaf (`halt`). The code is *precise* when all simple paths from the
//! same label cost the same.
//!
//! The toy target has no calls, so the whole code is a single graph.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::{self, Write};

use serde::Serialize;
use thiserror::Error;

use crate::imp::Label;
use crate::labelling::CostMap;
use crate::mips::{MachineConfig, MipsCode, MipsInstr, Opcode};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CheckError {
    #[error("instruction {0} has a successor outside the code")]
    DanglingTarget(usize),
    #[error("cost analysis requires a soundly labelled graph: {0}")]
    UnsoundGraph(Unsoundness),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CfgNode {
    pub opcode: Opcode,
    pub label: Option<Label>,
    /// Fall-through first, then the jump target; no duplicates.
    pub succ: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Cfg {
    pub nodes: Vec<CfgNode>,
}

impl Cfg {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn is_labelled(&self, n: usize) -> bool {
        self.nodes[n].label.is_some()
    }

    pub fn is_leaf(&self, n: usize) -> bool {
        self.nodes[n].succ.is_empty()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .flat_map(|(i, n)| n.succ.iter().map(move |&j| (i, j)))
    }

    fn cost(&self, n: usize, cfg: &MachineConfig) -> u64 {
        cfg.costs.cost(self.nodes[n].opcode)
    }

    /// Labelled nodes grouped by label, positions ascending.
    pub fn label_heads(&self) -> BTreeMap<Label, Vec<usize>> {
        let mut heads: BTreeMap<Label, Vec<usize>> = BTreeMap::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if let Some(l) = n.label {
                heads.entry(l).or_default().push(i);
            }
        }
        heads
    }
}

pub fn build_cfg(code: &MipsCode) -> Result<Cfg, CheckError> {
    let len = code.len() as i64;
    let mut nodes = Vec::with_capacity(code.len());
    for (i, ins) in code.instrs().iter().enumerate() {
        let at = |t: i64| {
            if (0..len).contains(&t) {
                Ok(t as usize)
            } else {
                Err(CheckError::DanglingTarget(i))
            }
        };
        let next = i as i64 + 1;
        let mut succ = match ins {
            MipsInstr::Halt => vec![],
            MipsInstr::Branch(k) => vec![at(next + k)?],
            MipsInstr::Bge(_, _, k) => vec![at(next)?, at(next + k)?],
            _ => vec![at(next)?],
        };
        succ.dedup();
        nodes.push(CfgNode {
            opcode: ins.opcode(),
            label: ins.label(),
            succ,
        });
    }
    Ok(Cfg { nodes })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "cycle", rename_all = "snake_case")]
pub enum Unsoundness {
    EmptyCode,
    RootUnlabelled,
    /// A cycle through unlabelled nodes, first node repeated at the end.
    UnlabelledCycle(Vec<usize>),
}

impl fmt::Display for Unsoundness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Unsoundness::EmptyCode => f.write_str("empty code"),
            Unsoundness::RootUnlabelled => f.write_str("root is not labelled"),
            Unsoundness::UnlabelledCycle(c) => {
                f.write_str("cycle: ")?;
                for (i, n) in c.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" -> ")?;
                    }
                    write!(f, "{n}")?;
                }
                Ok(())
            }
        }
    }
}

/// Root labelled and the label-free subgraph acyclic.
pub fn check_sound(g: &Cfg) -> Result<(), Unsoundness> {
    if g.is_empty() {
        return Err(Unsoundness::EmptyCode);
    }
    if !g.is_labelled(0) {
        return Err(Unsoundness::RootUnlabelled);
    }
    if let Some(cycle) = unlabelled_cycle(g) {
        return Err(Unsoundness::UnlabelledCycle(cycle));
    }
    Ok(())
}

/// Strongly connected components of the subgraph induced by unlabelled
/// nodes (iterative Tarjan).
pub fn unlabelled_sccs(g: &Cfg) -> Vec<Vec<usize>> {
    let n = g.len();
    let keep = |v: usize| !g.is_labelled(v);
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut out = Vec::new();
    let mut counter = 0;
    for root in (0..n).filter(|&v| keep(v)) {
        if index[root] != usize::MAX {
            continue;
        }
        // (node, next successor slot)
        let mut work = vec![(root, 0usize)];
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut slot)) = work.last_mut() {
            let succ = &g.nodes[v].succ;
            if *slot < succ.len() {
                let w = succ[*slot];
                *slot += 1;
                if !keep(w) {
                    continue;
                }
                if index[w] == usize::MAX {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    work.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                work.pop();
                if let Some(&(parent, _)) = work.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    out.push(comp);
                }
            }
        }
    }
    out
}

fn unlabelled_cycle(g: &Cfg) -> Option<Vec<usize>> {
    let mut bad: Vec<Vec<usize>> = unlabelled_sccs(g)
        .into_iter()
        .filter(|c| c.len() > 1 || g.nodes[c[0]].succ.contains(&c[0]))
        .collect();
    bad.sort();
    let comp = bad.into_iter().next()?;
    let members: BTreeSet<usize> = comp.iter().copied().collect();
    let start = comp[0];
    // shortest path start -> ... -> start inside the component
    let mut prev = BTreeMap::new();
    let mut queue = VecDeque::from([start]);
    while let Some(v) = queue.pop_front() {
        for &w in &g.nodes[v].succ {
            if !members.contains(&w) {
                continue;
            }
            if w == start {
                let mut path = vec![v];
                while *path.last().unwrap() != start {
                    path.push(prev[path.last().unwrap()]);
                }
                path.reverse();
                path.push(start);
                return Some(path);
            }
            if let std::collections::btree_map::Entry::Vacant(e) = prev.entry(w) {
                e.insert(v);
                queue.push_back(w);
            }
        }
    }
    unreachable!("a non-trivial component contains a cycle through each member")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Warning {
    pub label: Label,
    /// Node at which two different costs were merged.
    pub at: usize,
    pub a: u64,
    pub b: u64,
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "warning {}: {} != {}", self.label, self.a, self.b)
    }
}

/// Cheapest and dearest simple path from a label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct PathCost {
    pub min: u64,
    pub max: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CostAnalysis {
    pub kappa: CostMap,
    pub warnings: Vec<Warning>,
    pub paths: BTreeMap<Label, PathCost>,
}

/// Cost of the remainder of a simple path entering `n`.
struct Tails<'a> {
    g: &'a Cfg,
    cfg: &'a MachineConfig,
    memo: Vec<Option<PathCost>>,
}

impl Tails<'_> {
    fn get(&mut self, n: usize) -> PathCost {
        if self.g.is_labelled(n) || self.g.is_leaf(n) {
            return PathCost { min: 0, max: 0 };
        }
        if let Some(c) = self.memo[n] {
            return c;
        }
        let c = self.through(n);
        self.memo[n] = Some(c);
        c
    }

    /// Cost of `n` itself plus the best/worst continuation.
    fn through(&mut self, n: usize) -> PathCost {
        let own = self.g.cost(n, self.cfg);
        let succ = self.g.nodes[n].succ.clone();
        let mut acc: Option<PathCost> = None;
        for s in succ {
            let t = self.get(s);
            acc = Some(match acc {
                None => t,
                Some(a) => PathCost {
                    min: a.min.min(t.min),
                    max: a.max.max(t.max),
                },
            });
        }
        let rest = acc.unwrap_or(PathCost { min: 0, max: 0 });
        PathCost {
            min: own + rest.min,
            max: own + rest.max,
        }
    }
}

/// Depth-first cost computation: `κ(ℓ)` is the maximum over the branches
/// (and over every node carrying `ℓ`); a warning is recorded whenever two
/// different costs are merged.
pub fn compute_costmap(g: &Cfg, cfg: &MachineConfig) -> Result<CostAnalysis, CheckError> {
    check_sound(g).map_err(CheckError::UnsoundGraph)?;
    let mut tails = Tails {
        g,
        cfg,
        memo: vec![None; g.len()],
    };
    let mut kappa = CostMap::default();
    let mut warnings = Vec::new();
    let mut paths = BTreeMap::new();
    for (label, heads) in g.label_heads() {
        let mut range: Option<PathCost> = None;
        for &head in &heads {
            let c = tails.through(head);
            merge_warnings(g, head, label, &mut tails, &mut warnings);
            if let Some(r) = range {
                if r.max != c.max {
                    warnings.push(Warning {
                        label,
                        at: head,
                        a: r.max,
                        b: c.max,
                    });
                }
                range = Some(PathCost {
                    min: r.min.min(c.min),
                    max: r.max.max(c.max),
                });
            } else {
                range = Some(c);
            }
        }
        let r = range.expect("every label has a head");
        kappa.insert(label, r.max);
        paths.insert(label, r);
    }
    Ok(CostAnalysis {
        kappa,
        warnings,
        paths,
    })
}

/// Visits the simple paths from `head` and reports every node whose
/// successors lead to different maximal path costs.
fn merge_warnings(
    g: &Cfg,
    head: usize,
    label: Label,
    tails: &mut Tails<'_>,
    out: &mut Vec<Warning>,
) {
    let mut seen = BTreeSet::new();
    // (node, cost of the path from head up to but excluding node)
    let mut todo = vec![(head, 0u64)];
    while let Some((v, before)) = todo.pop() {
        if !seen.insert(v) {
            continue;
        }
        let here = before + g.cost(v, tails.cfg);
        let succ = &g.nodes[v].succ;
        if let [s1, s2] = succ[..] {
            let (a, b) = (here + tails.get(s1).max, here + tails.get(s2).max);
            if a != b {
                out.push(Warning { label, at: v, a, b });
            }
        }
        for &s in succ.iter().rev() {
            if !g.is_labelled(s) && !g.is_leaf(s) {
                todo.push((s, here));
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Precision {
    pub precise: bool,
    pub warnings: Vec<Warning>,
    /// The sufficient condition: each label occurs once and both successors
    /// of every two-way branch are labelled or leaves.
    pub unique_labels_and_labelled_branches: bool,
}

pub fn check_precise(g: &Cfg, cfg: &MachineConfig) -> Result<Precision, CheckError> {
    let analysis = compute_costmap(g, cfg)?;
    let pre = precision_precheck(g);
    let precise = analysis.warnings.is_empty();
    debug_assert!(!pre || precise, "sufficient precision condition holds but costs differ");
    Ok(Precision {
        precise,
        warnings: analysis.warnings,
        unique_labels_and_labelled_branches: pre,
    })
}

pub fn precision_precheck(g: &Cfg) -> bool {
    let unique = g.label_heads().values().all(|h| h.len() == 1);
    unique
        && g.nodes.iter().all(|n| {
            n.succ.len() < 2 || n.succ.iter().all(|&s| g.is_labelled(s) || g.is_leaf(s))
        })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CheckReport {
    pub sound: bool,
    pub unsoundness: Option<Unsoundness>,
    pub precise: bool,
    pub warnings: Vec<Warning>,
    pub kappa: Option<CostMap>,
    pub paths: BTreeMap<Label, PathCost>,
}

/// Builds the graph and runs every check.
pub fn check(code: &MipsCode, cfg: &MachineConfig) -> Result<CheckReport, CheckError> {
    let g = build_cfg(code)?;
    Ok(check_cfg(&g, cfg))
}

pub fn check_cfg(g: &Cfg, cfg: &MachineConfig) -> CheckReport {
    match check_sound(g) {
        Err(u) => CheckReport {
            sound: false,
            unsoundness: Some(u),
            precise: false,
            warnings: Vec::new(),
            kappa: None,
            paths: BTreeMap::new(),
        },
        Ok(()) => {
            let a = compute_costmap(g, cfg).expect("graph checked sound");
            CheckReport {
                sound: true,
                unsoundness: None,
                precise: a.warnings.is_empty(),
                warnings: a.warnings,
                kappa: Some(a.kappa),
                paths: a.paths,
            }
        }
    }
}

impl CheckReport {
    /// Line-oriented rendering.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "sound={}", self.sound);
        let _ = writeln!(out, "precise={}", self.precise);
        if let Some(k) = &self.kappa {
            for (l, c) in k.iter() {
                let _ = writeln!(out, "kappa {l} = {c}");
            }
        }
        for w in &self.warnings {
            let _ = writeln!(out, "{w}");
        }
        match &self.unsoundness {
            Some(u @ Unsoundness::UnlabelledCycle(_)) => {
                let _ = writeln!(out, "{u}");
            }
            Some(u) => {
                let _ = writeln!(out, "unsound: {u}");
            }
            None => {}
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imp::{parse_imp, Ident};
    use crate::labelling::{label_simple, label_precise};
    use crate::mips::{Loc, Reg};
    use crate::passes::{compile_program, compile_vm};
    use MipsInstr::*;

    fn mips_of(src: &str, b: usize) -> MipsCode {
        let p = parse_imp(src).unwrap();
        compile_vm(&compile_program(&p), &MachineConfig::with_registers(b))
            .unwrap()
            .0
    }

    #[test]
    fn graphs() {
        let g = build_cfg(&MipsCode(vec![Halt])).unwrap();
        assert_eq!(g.edges().count(), 0);
        let g = build_cfg(&MipsCode(vec![Branch(0), Halt])).unwrap();
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 1)]);
        let g = build_cfg(&MipsCode(vec![Bge(Reg::A, Reg::B, 1), Halt, Halt])).unwrap();
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 1), (0, 2)]);
        assert_eq!(
            build_cfg(&MipsCode(vec![Branch(4), Halt])),
            Err(CheckError::DanglingTarget(0))
        );
        assert_eq!(
            build_cfg(&MipsCode(vec![Nop(Label(0))])),
            Err(CheckError::DanglingTarget(0))
        );
    }

    #[test]
    fn soundness() {
        let g = build_cfg(&MipsCode(vec![Nop(Label(1)), Halt])).unwrap();
        assert_eq!(check_sound(&g), Ok(()));
        let g = build_cfg(&MipsCode(vec![Halt])).unwrap();
        assert_eq!(check_sound(&g), Err(Unsoundness::RootUnlabelled));
        let g = build_cfg(&MipsCode(vec![Nop(Label(0)), Branch(-1), Halt])).unwrap();
        assert_eq!(
            check_sound(&g),
            Err(Unsoundness::UnlabelledCycle(vec![1, 1]))
        );
        // loop through the label is fine
        let g = build_cfg(&MipsCode(vec![Nop(Label(0)), Branch(-2), Halt])).unwrap();
        assert_eq!(check_sound(&g), Ok(()));
    }

    #[test]
    fn label_at_root_only_misses_the_loop() {
        let code = mips_of("prog _l1: while 0 < x do { x := x + 1 }", 4);
        let g = build_cfg(&code).unwrap();
        match check_sound(&g) {
            Err(Unsoundness::UnlabelledCycle(c)) => {
                assert_eq!(c.first(), c.last());
                assert!(c.len() > 2);
                for w in c.windows(2) {
                    assert!(g.nodes[w[0]].succ.contains(&w[1]), "{c:?} is not a path");
                    assert!(!g.is_labelled(w[0]));
                }
            }
            other => panic!("expected a cycle, got {other:?}"),
        }
        assert!(matches!(
            compute_costmap(&g, &MachineConfig::default()),
            Err(CheckError::UnsoundGraph(_))
        ));
    }

    #[test]
    fn worked_example_costs() {
        let x = Ident::new("x").unwrap();
        let code = MipsCode(vec![
            Nop(Label(0)),
            Load(Reg::R(0), Loc::Var(x.clone())),
            LoadI(Reg::R(1), 1),
            AddR(Reg::R(0), Reg::R(0), Reg::R(1)),
            Store(Reg::R(0), Loc::Var(x)),
            Halt,
        ]);
        let g = build_cfg(&code).unwrap();
        let a = compute_costmap(&g, &MachineConfig::with_registers(2)).unwrap();
        assert_eq!(a.kappa.get(Label(0)), Some(4));
        assert!(a.warnings.is_empty());

        let g = build_cfg(&MipsCode(vec![Nop(Label(0)), Halt])).unwrap();
        let a = compute_costmap(&g, &MachineConfig::default()).unwrap();
        assert_eq!(a.kappa.get(Label(0)), Some(0));
        assert!(check_precise(&g, &MachineConfig::default()).unwrap().precise);
    }

    #[test]
    fn conditional_under_a_single_label_is_imprecise() {
        let code = mips_of("prog _l0: if 0 < x then { x := x + 1 } else { skip }", 4);
        let g = build_cfg(&code).unwrap();
        let cfg = MachineConfig::default();
        let a = compute_costmap(&g, &cfg).unwrap();
        // nop, load, loadi, bge | load, loadi, add, store, branch
        assert_eq!(a.kappa.get(Label(0)), Some(8));
        assert_eq!(a.paths[&Label(0)], PathCost { min: 3, max: 8 });
        assert_eq!(a.warnings.len(), 1);
        assert_eq!((a.warnings[0].a, a.warnings[0].b), (8, 3));
        assert!(!check_precise(&g, &cfg).unwrap().precise);

        let labelled = label_simple(&parse_imp("prog if 0 < x then { x := x + 1 } else { skip }").unwrap()).unwrap();
        let code = compile_vm(&compile_program(&labelled), &cfg).unwrap().0;
        assert_eq!(check(&code, &cfg).unwrap().warnings.len(), 1);

        let labelled = label_precise(&parse_imp("prog if 0 < x then { x := x + 1 } else { skip }").unwrap()).unwrap();
        let code = compile_vm(&compile_program(&labelled), &cfg).unwrap().0;
        let g = build_cfg(&code).unwrap();
        let p = check_precise(&g, &cfg).unwrap();
        assert!(p.precise && p.unique_labels_and_labelled_branches);
    }

    #[test]
    fn repeated_label_takes_the_maximum() {
        let code = MipsCode(vec![
            Nop(Label(0)),
            LoadI(Reg::A, 1),
            Nop(Label(1)),
            Nop(Label(0)),
            Halt,
        ]);
        let g = build_cfg(&code).unwrap();
        let a = compute_costmap(&g, &MachineConfig::default()).unwrap();
        assert_eq!(a.kappa.get(Label(0)), Some(1));
        assert_eq!(a.warnings, vec![Warning { label: Label(0), at: 3, a: 1, b: 0 }]);
        assert!(!precision_precheck(&g));
    }

    #[test]
    fn report_text() {
        let code = mips_of("prog _l0: if 0 < x then { x := x + 1 } else { skip }", 4);
        let r = check(&code, &MachineConfig::default()).unwrap();
        assert_eq!(
            r.to_text(),
            "sound=true\nprecise=false\nkappa _l0 = 8\nwarning _l0: 8 != 3\n"
        );
        let code = mips_of("prog _l1: while 0 < x do { x := x + 1 }", 4);
        let r = check(&code, &MachineConfig::default()).unwrap();
        assert!(r.to_text().starts_with("sound=false\nprecise=false\ncycle: "));
        assert!(r.kappa.is_none());
    }
}
