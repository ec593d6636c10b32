//! Differential self-test: random programs through every stage, checking
//! the stated properties of each module. All randomness derives from the
//! seed; case `i` uses ChaCha stream `i`, so cases are independent.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::costcheck::{self, build_cfg, check_sound, compute_costmap, precision_precheck, Unsoundness};
use crate::gen::{gen_mips_graph, gen_program, gen_store, GenConfig};
use crate::imp::{erase_imp, parse_imp, print_imp, run_imp, Ident, ImpError, Label, Program, Store, Trace};
use crate::labelling::{apply_labelling, instrument, Labelling};
use crate::mips::{erase_mips, init_memory, represents, run_mips_with, CostModel, MachineConfig, MipsCode, Opcode};
use crate::oracle;
use crate::passes::{compile_program, compile_vm_with, BgeOrder};
use crate::vm::{erase_vm, infer_heights, run_vm_with, solve_heights, Traversal, VmRunOptions};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceCompare {
    #[default]
    Sequence,
    Multiset,
}

impl TraceCompare {
    fn same(self, a: &Trace, b: &Trace) -> bool {
        match self {
            TraceCompare::Sequence => a == b,
            TraceCompare::Multiset => a.multiset() == b.multiset(),
        }
    }
}

/// Faults injected into the compiler to show the battery notices them.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mutation {
    /// Emit register `bge` with its operands swapped.
    SwapBge,
}

#[derive(Clone, Debug)]
pub struct SelftestConfig {
    pub seed: u64,
    pub count: usize,
    pub max_size: usize,
    pub b_set: Vec<usize>,
    pub compare: TraceCompare,
    pub mutate: Option<Mutation>,
    pub fuel: u64,
    pub costs: CostModel,
}

impl Default for SelftestConfig {
    fn default() -> Self {
        SelftestConfig {
            seed: 0,
            count: 500,
            max_size: 30,
            b_set: vec![0, 1, 2, 4, 8],
            compare: TraceCompare::Sequence,
            mutate: None,
            fuel: 100_000,
            costs: CostModel::default(),
        }
    }
}

/// Property names, in report order.
pub mod prop {
    pub const PRINT_PARSE: &str = "imp.print_parse";
    pub const LABEL_ERASURE: &str = "labelling.erasure";
    pub const LABEL_FRESH: &str = "labelling.fresh";
    pub const VM_ERASURE: &str = "passes.vm_erasure_commutes";
    pub const MIPS_ERASURE: &str = "passes.mips_erasure_commutes";
    pub const LABELS_VANISH: &str = "passes.labels_vanish";
    pub const HEIGHTS_UNIQUE: &str = "vm.heights_unique";
    pub const HEIGHTS_RUNTIME: &str = "vm.heights_runtime";
    pub const VM_STORE: &str = "passes.vm_store";
    pub const VM_TRACE: &str = "passes.vm_trace";
    pub const MIPS_TRACE: &str = "passes.mips_trace";
    pub const SIMULATION: &str = "passes.mips_simulation";
    pub const LOCKSTEP: &str = "passes.mips_lockstep";
    pub const INIT_REPRESENTS: &str = "mips.init_represents";
    pub const SIMPLE_SOUND: &str = "costcheck.simple_sound";
    pub const PRECISE_SOUND: &str = "costcheck.precise_sound";
    pub const PRECISE_PRECISE: &str = "costcheck.precise_precise";
    pub const PRECHECK: &str = "costcheck.precheck_implies_precise";
    pub const ORACLE_KAPPA: &str = "costcheck.oracle_kappa";
    pub const ORACLE_SOUND: &str = "costcheck.oracle_sound";
    pub const MONOTONE: &str = "costcheck.monotone";
    pub const COST_BOUND: &str = "costcheck.cost_bounded";
    pub const COST_EXACT: &str = "costcheck.cost_exact_when_precise";
    pub const INSTRUMENT: &str = "labelling.instrument_trace";
    pub const END_TO_END: &str = "labelling.end_to_end";
    pub const TRANSPARENT: &str = "labelling.transparent";
    pub const ANNOT_SIMPLE: &str = "labelling.annotation_bound_simple";
    pub const ANNOT_PRECISE: &str = "labelling.annotation_exact_precise";

    pub const ALL: [&str; 28] = [
        PRINT_PARSE,
        LABEL_ERASURE,
        LABEL_FRESH,
        VM_ERASURE,
        MIPS_ERASURE,
        LABELS_VANISH,
        HEIGHTS_UNIQUE,
        HEIGHTS_RUNTIME,
        VM_STORE,
        VM_TRACE,
        MIPS_TRACE,
        SIMULATION,
        LOCKSTEP,
        INIT_REPRESENTS,
        SIMPLE_SOUND,
        PRECISE_SOUND,
        PRECISE_PRECISE,
        PRECHECK,
        ORACLE_KAPPA,
        ORACLE_SOUND,
        MONOTONE,
        COST_BOUND,
        COST_EXACT,
        INSTRUMENT,
        END_TO_END,
        TRANSPARENT,
        ANNOT_SIMPLE,
        ANNOT_PRECISE,
    ];
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct PropStats {
    pub pass: u64,
    pub fail: u64,
    pub skip: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Counterexample {
    pub property: &'static str,
    pub case: usize,
    pub labelling: Option<String>,
    pub b: Option<usize>,
    pub program: String,
    pub store: String,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct SelftestReport {
    pub seed: u64,
    pub count: usize,
    pub stats: BTreeMap<&'static str, PropStats>,
    /// First failing case for each failing property.
    pub counterexamples: BTreeMap<&'static str, Counterexample>,
    /// Smallest failing case index over all properties.
    pub first: Option<Counterexample>,
    /// Codes of at most twelve instructions compared against the oracle.
    pub small_codes: u64,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.stats.values().all(|s| s.fail == 0)
    }

    pub fn stats(&self, property: &str) -> PropStats {
        self.stats.get(property).copied().unwrap_or_default()
    }

    pub fn failing(&self) -> Vec<&'static str> {
        self.stats
            .iter()
            .filter(|(_, s)| s.fail > 0)
            .map(|(p, _)| *p)
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "seed={} cases={}", self.seed, self.count);
        for p in prop::ALL {
            let s = self.stats(p);
            let _ = writeln!(out, "{p:<40} pass={} fail={} skip={}", s.pass, s.fail, s.skip);
        }
        let failing = self.failing();
        if failing.is_empty() {
            let _ = writeln!(out, "all properties pass");
        } else {
            let _ = writeln!(out, "{} propert{} failed", failing.len(), if failing.len() == 1 { "y" } else { "ies" });
        }
        if let Some(c) = &self.first {
            let _ = writeln!(out, "first counterexample: {} (case {})", c.property, c.case);
            if let Some(l) = &c.labelling {
                let _ = writeln!(out, "  labelling: {l}");
            }
            if let Some(b) = c.b {
                let _ = writeln!(out, "  b: {b}");
            }
            let _ = writeln!(out, "  program: {}", c.program);
            let _ = writeln!(out, "  store: {}", c.store);
            let _ = writeln!(out, "  detail: {}", c.detail);
        }
        out
    }
}

struct Case<'a> {
    index: usize,
    program: &'a Program,
    store: &'a Store,
    labelling: Option<Labelling>,
    b: Option<usize>,
}

struct Tally {
    stats: BTreeMap<&'static str, PropStats>,
    counterexamples: BTreeMap<&'static str, Counterexample>,
    small_codes: u64,
}

impl Tally {
    fn record(&mut self, prop: &'static str, case: &Case<'_>, outcome: Result<(), String>) {
        let s = self.stats.entry(prop).or_default();
        match outcome {
            Ok(()) => s.pass += 1,
            Err(detail) => {
                s.fail += 1;
                self.counterexamples.entry(prop).or_insert_with(|| Counterexample {
                    property: prop,
                    case: case.index,
                    labelling: case.labelling.map(|l| l.to_string()),
                    b: case.b,
                    program: print_imp(case.program),
                    store: case.store.to_string(),
                    detail: detail.trim_end().replace('\n', "; "),
                });
            }
        }
    }

    fn check(&mut self, prop: &'static str, case: &Case<'_>, ok: bool, detail: impl FnOnce() -> String) {
        self.record(prop, case, if ok { Ok(()) } else { Err(detail()) });
    }

    fn skip(&mut self, prop: &'static str) {
        self.stats.entry(prop).or_default().skip += 1;
    }
}

pub fn run_selftest(cfg: &SelftestConfig) -> SelftestReport {
    let mut tally = Tally {
        stats: prop::ALL.iter().map(|p| (*p, PropStats::default())).collect(),
        counterexamples: BTreeMap::new(),
        small_codes: 0,
    };
    let gen_cfg = GenConfig {
        max_size: cfg.max_size,
        ..GenConfig::default()
    };
    for index in 0..cfg.count {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(index as u64);
        let p = gen_program(&mut rng, &gen_cfg);
        let s = gen_store(&mut rng, &p);
        run_case(cfg, &mut tally, &mut rng, index, &p, &s);
    }
    let first = tally
        .counterexamples
        .values()
        .min_by_key(|c| (c.case, prop::ALL.iter().position(|p| *p == c.property)))
        .cloned();
    SelftestReport {
        seed: cfg.seed,
        count: cfg.count,
        stats: tally.stats,
        counterexamples: tally.counterexamples,
        first,
        small_codes: tally.small_codes,
    }
}

fn imp_skippable(e: &ImpError) -> bool {
    matches!(e, ImpError::FuelExhausted(_) | ImpError::Overflow)
}

fn run_case(
    cfg: &SelftestConfig,
    tally: &mut Tally,
    rng: &mut ChaCha8Rng,
    index: usize,
    p: &Program,
    s: &Store,
) {
    let order = match cfg.mutate {
        Some(Mutation::SwapBge) => BgeOrder::SecondFirst,
        None => BgeOrder::TopFirst,
    };
    let big_fuel = cfg.fuel.saturating_mul(64);
    let mut case = Case {
        index,
        program: p,
        store: s,
        labelling: None,
        b: None,
    };
    let print_parse = |q: &Program| parse_imp(&print_imp(q)).as_ref() == Ok(q);
    tally.check(prop::PRINT_PARSE, &case, print_parse(p), || print_imp(p));

    let plain_run = run_imp(p, s.clone(), cfg.fuel);
    let plain_vm = compile_program(p);
    let cost_start: i64 = rng.gen_range(0..5);
    let bumped = Opcode::ALL[rng.gen_range(0..Opcode::ALL.len())];

    // random graphs for the oracle comparisons
    let graph_len = rng.gen_range(2..=12);
    let graph = gen_mips_graph(rng, graph_len);
    oracle_checks(tally, &case, &graph, &MachineConfig { b: 0, costs: cfg.costs.clone() });

    for labelling in [Labelling::Simple, Labelling::Precise] {
        case.labelling = Some(labelling);
        case.b = None;
        let l = match apply_labelling(p, labelling) {
            Ok(l) => l,
            Err(e) => {
                tally.record(prop::LABEL_ERASURE, &case, Err(e.to_string()));
                continue;
            }
        };
        tally.check(prop::LABEL_ERASURE, &case, erase_imp(&l) == *p, || print_imp(&l));
        let labels = l.labels();
        let distinct: BTreeSet<Label> = labels.iter().copied().collect();
        tally.check(prop::LABEL_FRESH, &case, distinct.len() == labels.len(), || print_imp(&l));
        tally.check(prop::PRINT_PARSE, &case, print_parse(&l), || print_imp(&l));

        let vm = compile_program(&l);
        tally.check(prop::VM_ERASURE, &case, erase_vm(&vm) == compile_program(&erase_imp(&l)), || {
            format!("er(C(L)) = {} ; C(er(L)) = {}", erase_vm(&vm), plain_vm)
        });
        let heights = match infer_heights(&vm) {
            Ok(h) => {
                let fwd = solve_heights(&vm, 0, Traversal::Forward);
                let rev = solve_heights(&vm, 0, Traversal::Reverse);
                let same = fwd.as_ref() == Ok(&h) && rev.as_ref() == Ok(&h);
                tally.check(prop::HEIGHTS_UNIQUE, &case, same, || format!("{h:?} / {fwd:?} / {rev:?}"));
                Some(h)
            }
            Err(e) => {
                tally.record(prop::HEIGHTS_UNIQUE, &case, Err(e.to_string()));
                None
            }
        };

        let imp_run = run_imp(&l, s.clone(), cfg.fuel);
        let vm_run = match (&imp_run, &heights) {
            (Ok(_), Some(h)) => {
                let opts = VmRunOptions {
                    fuel: big_fuel,
                    heights: Some(h),
                    record_pcs: true,
                };
                let r = run_vm_with(&vm, s.clone(), opts);
                tally.check(prop::HEIGHTS_RUNTIME, &case, r.is_ok(), || format!("{r:?}"));
                r.ok()
            }
            _ => {
                tally.skip(prop::HEIGHTS_RUNTIME);
                None
            }
        };
        match (&imp_run, &vm_run) {
            (Ok((s1, t1)), Some(o)) => {
                tally.check(prop::VM_STORE, &case, *s1 == o.store, || format!("imp {s1} / vm {}", o.store));
                tally.check(prop::VM_TRACE, &case, cfg.compare.same(t1, &o.trace), || {
                    format!("imp {t1} / vm {}", o.trace)
                });
            }
            (Err(e), _) if imp_skippable(e) => {
                tally.skip(prop::VM_STORE);
                tally.skip(prop::VM_TRACE);
            }
            _ => {
                let d = format!("imp {imp_run:?}");
                tally.record(prop::VM_STORE, &case, Err(d.clone()));
                tally.record(prop::VM_TRACE, &case, Err(d));
            }
        }

        for &b in &cfg.b_set {
            case.b = Some(b);
            let mcfg = MachineConfig { b, costs: cfg.costs.clone() };
            let compiled = compile_vm_with(&vm, &mcfg, order);
            let plain = compile_vm_with(&plain_vm, &mcfg, order);
            let ((mips, positions), (plain_mips, _)) = match (compiled, plain) {
                (Ok(a), Ok(b)) => (a, b),
                (a, b) => {
                    let d = format!("{:?} / {:?}", a.err(), b.err());
                    tally.record(prop::MIPS_ERASURE, &case, Err(d));
                    continue;
                }
            };
            let erased = erase_mips(&mips);
            let via_vm = compile_vm_with(&erase_vm(&vm), &mcfg, order).map(|r| r.0);
            tally.check(prop::MIPS_ERASURE, &case, via_vm.as_ref() == Ok(&erased), || {
                format!("er(C'(C)) = {erased:?}; C'(er(C)) = {via_vm:?}")
            });
            tally.check(prop::LABELS_VANISH, &case, erased == plain_mips, || {
                format!("er = {erased}; plain = {plain_mips}")
            });
            tally.check(prop::INIT_REPRESENTS, &case, represents(&init_memory(s, &mcfg), &[], s, &mcfg), || {
                s.to_string()
            });

            if mips.len() <= 12 {
                tally.small_codes += 1;
                oracle_checks(tally, &case, &mips, &mcfg);
            }

            let report = match costcheck::check(&mips, &mcfg) {
                Ok(r) => r,
                Err(e) => {
                    tally.record(prop::SIMPLE_SOUND, &case, Err(e.to_string()));
                    continue;
                }
            };
            match labelling {
                Labelling::Simple => {
                    tally.check(prop::SIMPLE_SOUND, &case, report.sound, || report.to_text());
                }
                Labelling::Precise => {
                    tally.check(prop::PRECISE_SOUND, &case, report.sound, || report.to_text());
                    tally.check(prop::PRECISE_PRECISE, &case, report.sound && report.precise, || {
                        report.to_text()
                    });
                }
            }
            if let Ok(g) = build_cfg(&mips) {
                if report.sound && precision_precheck(&g) {
                    tally.check(prop::PRECHECK, &case, report.precise, || report.to_text());
                } else {
                    tally.skip(prop::PRECHECK);
                }
            }
            let kappa = match &report.kappa {
                Some(k) => k.clone(),
                None => {
                    for q in [prop::MONOTONE, prop::COST_BOUND, prop::COST_EXACT, prop::INSTRUMENT] {
                        tally.skip(q);
                    }
                    continue;
                }
            };
            {
                let mut raised = mcfg.clone();
                raised.costs.set(bumped, mcfg.costs.cost(bumped) + 1);
                let again = costcheck::check(&mips, &raised).ok().and_then(|r| r.kappa);
                let ok = again
                    .as_ref()
                    .is_some_and(|k2| kappa.iter().all(|(l, c)| k2.get(l).is_some_and(|c2| c2 >= c)));
                tally.check(prop::MONOTONE, &case, ok, || format!("raising {} : {kappa:?} -> {again:?}", bumped.name()));
            }

            let (s1, t1) = match &imp_run {
                Ok(r) => r,
                Err(e) if imp_skippable(e) => {
                    for q in [
                        prop::MIPS_TRACE,
                        prop::SIMULATION,
                        prop::LOCKSTEP,
                        prop::COST_BOUND,
                        prop::COST_EXACT,
                        prop::INSTRUMENT,
                        prop::END_TO_END,
                        prop::TRANSPARENT,
                        prop::ANNOT_SIMPLE,
                        prop::ANNOT_PRECISE,
                    ] {
                        tally.skip(q);
                    }
                    continue;
                }
                Err(e) => {
                    tally.record(prop::SIMULATION, &case, Err(e.to_string()));
                    continue;
                }
            };
            // each stack instruction becomes at most four register instructions
            let mips_fuel = vm_run.as_ref().map_or(big_fuel, |o| 4 * o.steps + 4);
            let run = run_mips_with(&mips, init_memory(s, &mcfg), &mcfg, mips_fuel, true);
            let out = match run {
                Ok(o) => o,
                Err(e) => {
                    tally.record(prop::SIMULATION, &case, Err(format!("mips run failed: {e}")));
                    continue;
                }
            };
            if let Some(vo) = &vm_run {
                tally.check(prop::MIPS_TRACE, &case, cfg.compare.same(&vo.trace, &out.trace), || {
                    format!("vm {} / mips {}", vo.trace, out.trace)
                });
                tally.check(prop::SIMULATION, &case, represents(&out.memory, &[], &vo.store, &mcfg), || {
                    format!("vm store {} / mips variables {}", vo.store, out.memory.vars())
                });
                let starts: BTreeSet<usize> = (0..vm.len()).map(|i| positions.at(i)).collect();
                let seen: Vec<usize> = out.pcs.iter().copied().filter(|pc| starts.contains(pc)).collect();
                let expect: Vec<usize> = vo.pcs.iter().map(|&i| positions.at(i)).collect();
                tally.check(prop::LOCKSTEP, &case, seen == expect, || {
                    format!("block starts {seen:?}, expected {expect:?}")
                });
            } else {
                tally.skip(prop::MIPS_TRACE);
                tally.skip(prop::SIMULATION);
                tally.skip(prop::LOCKSTEP);
            }

            let predicted = kappa.of_trace(&out.trace);
            tally.check(prop::COST_BOUND, &case, predicted.is_some_and(|k| out.cost <= k), || {
                format!("measured {} > κ(λ) = {predicted:?} for λ = {}", out.cost, out.trace)
            });
            if report.precise {
                tally.check(prop::COST_EXACT, &case, predicted == Some(out.cost), || {
                    format!("measured {} != κ(λ) = {predicted:?}", out.cost)
                });
            } else {
                tally.skip(prop::COST_EXACT);
            }

            let annotated = match instrument(&l, &kappa) {
                Ok(a) => a,
                Err(e) => {
                    tally.record(prop::INSTRUMENT, &case, Err(e.to_string()));
                    continue;
                }
            };
            let mut start = s.clone();
            start.set(Ident::cost(), cost_start);
            let ann_run = run_imp(&annotated, start, cfg.fuel.saturating_mul(4));
            let (s_ann, t_ann) = match ann_run {
                Ok(r) => r,
                Err(e) if imp_skippable(&e) => {
                    for q in [prop::INSTRUMENT, prop::END_TO_END, prop::TRANSPARENT, prop::ANNOT_SIMPLE, prop::ANNOT_PRECISE] {
                        tally.skip(q);
                    }
                    continue;
                }
                Err(e) => {
                    tally.record(prop::INSTRUMENT, &case, Err(e.to_string()));
                    continue;
                }
            };
            let delta = s_ann.get(&Ident::cost()) - cost_start;
            let delta_u = u64::try_from(delta).ok();
            let k_imp = kappa.of_trace(t1);
            tally.check(
                prop::INSTRUMENT,
                &case,
                t_ann.is_empty() && delta_u == k_imp && s_ann.without(&Ident::cost()) == *s1,
                || format!("δ = {delta}, κ(λ) = {k_imp:?}, stores {} / {}", s_ann, s1),
            );
            tally.check(prop::END_TO_END, &case, delta_u == predicted, || {
                format!("δ = {delta}, κ(mips λ) = {predicted:?}")
            });
            let transparent = match &plain_run {
                Ok((s0, _)) => s_ann.without(&Ident::cost()) == *s0,
                Err(_) => false,
            };
            tally.check(prop::TRANSPARENT, &case, transparent, || {
                format!("annotated {s_ann} / plain {plain_run:?}")
            });
            let plain_run_mips = run_mips_with(&plain_mips, init_memory(s, &mcfg), &mcfg, mips_fuel, false);
            let plain_cost = plain_run_mips.as_ref().map(|o| o.cost).ok();
            match labelling {
                Labelling::Simple => {
                    tally.check(prop::ANNOT_SIMPLE, &case, delta_u.is_some_and(|d| plain_cost.is_some_and(|c| c <= d)), || {
                        format!("measured {plain_cost:?} > δ = {delta}")
                    });
                }
                Labelling::Precise => {
                    tally.check(prop::ANNOT_PRECISE, &case, delta_u.is_some() && plain_cost == delta_u, || {
                        format!("measured {plain_cost:?} != δ = {delta}")
                    });
                }
            }
        }
    }
}

/// Compares the checker against explicit enumeration on one code.
fn oracle_checks(tally: &mut Tally, case: &Case<'_>, code: &MipsCode, cfg: &MachineConfig) {
    let g = match build_cfg(code) {
        Ok(g) => g,
        Err(e) => {
            tally.record(prop::ORACLE_SOUND, case, Err(e.to_string()));
            return;
        }
    };
    let sound = check_sound(&g);
    let expected = oracle::is_sound(code);
    let witness_ok = match &sound {
        Err(Unsoundness::UnlabelledCycle(c)) => {
            let cycles = oracle::unlabelled_cycles(code);
            c.len() >= 2
                && c.first() == c.last()
                && c.windows(2).all(|w| g.nodes[w[0]].succ.contains(&w[1]) && !g.is_labelled(w[0]))
                && !cycles.is_empty()
        }
        _ => true,
    };
    tally.check(prop::ORACLE_SOUND, case, sound.is_ok() == expected && witness_ok, || {
        format!("{code} checker {sound:?}, oracle {expected}")
    });
    if !expected {
        tally.skip(prop::ORACLE_KAPPA);
        return;
    }
    let got = compute_costmap(&g, cfg).map(|a| (a.kappa.0, a.warnings.is_empty()));
    let want = (oracle::kappa(code, cfg), oracle::is_precise(code, cfg));
    tally.check(prop::ORACLE_KAPPA, case, got.as_ref() == Ok(&want), || {
        format!("{code} checker {got:?}, oracle {want:?}")
    });
}
