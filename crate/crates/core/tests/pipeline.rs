use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use costlab::costcheck::{build_cfg, check, check_precise, precision_precheck};
use costlab::gen::{gen_program, GenConfig};
use costlab::imp::{parse_imp, print_imp, run_imp, Ident, Label, Store};
use costlab::labelling::{annotate, label_precise, Labelling};
use costlab::mips::{init_memory, run_mips, MachineConfig};
use costlab::passes::{compile_program, compile_vm};
use costlab::pipeline::run_pipeline;

#[test]
fn annotated_increment_runs_to_the_predicted_cost() {
    let p = parse_imp("prog x := x + 1").unwrap();
    let cfg = MachineConfig::with_registers(2);
    let a = annotate(&p, Labelling::Simple, &cfg).unwrap();
    assert_eq!(print_imp(&a.program), "prog cost := cost + 4; x := x + 1");
    assert_eq!(a.kappa.get(Label(0)), Some(4));
    let (s, t) = run_imp(&a.program, Store::new(), 100).unwrap();
    assert_eq!(s, Store::new().with("x", 1).with("cost", 4));
    assert!(t.is_empty());

    let r = run_pipeline(&p, Some(Labelling::Simple), &cfg).unwrap();
    let (m, trace, cost) = run_mips(&r.mips, init_memory(&Store::new(), &cfg), &cfg, 100).unwrap();
    assert_eq!((trace.to_string(), cost), ("_l0".to_string(), 4));
    assert_eq!(m.vars(), Store::new().with("x", 1));
    let (_, trace, cost) = run_mips(&r.erased, init_memory(&Store::new(), &cfg), &cfg, 100).unwrap();
    assert_eq!((trace.to_string(), cost), ("ε".to_string(), 4));
}

#[test]
fn skip_annotates_with_a_zero_increment() {
    for b in [0, 1, 4] {
        let a = annotate(&parse_imp("prog skip").unwrap(), Labelling::Simple, &MachineConfig::with_registers(b)).unwrap();
        assert_eq!(print_imp(&a.program), "prog cost := cost + 0; skip");
        assert!(a.report.sound && a.report.precise);
    }
}

#[test]
fn precise_labelling_removes_the_branch_warning() {
    let p = parse_imp("prog if 0 < x then { x := x + 1 } else { skip }").unwrap();
    let cfg = MachineConfig::default();
    let simple = annotate(&p, Labelling::Simple, &cfg).unwrap();
    assert_eq!(simple.report.warnings.len(), 1);
    let precise = annotate(&p, Labelling::Precise, &cfg).unwrap();
    assert!(precise.report.warnings.is_empty());
    for x in [-1, 0, 1, 5] {
        let s = Store::new().with("x", x);
        let (s1, _) = run_imp(&precise.program, s.clone(), 1000).unwrap();
        let mips = compile_vm(&compile_program(&p), &cfg).unwrap().0;
        let (_, _, c) = run_mips(&mips, init_memory(&s, &cfg), &cfg, 1000).unwrap();
        assert_eq!(s1.get(&Ident::cost()) as u64, c);
    }
}

#[test]
fn hand_labelled_loop_is_rejected() {
    let p = parse_imp("prog _l1: while 0 < x do { x := x + 1 }").unwrap();
    let r = run_pipeline(&p, None, &MachineConfig::default()).unwrap();
    assert!(!r.report.sound);
    assert!(r.report.kappa.is_none());
    assert!(r.annotated.is_none());
    assert!(r.report.to_text().contains("cycle: "));
}

/// A loop at the end of a then-branch exits onto the branch that skips the
/// else-branch; no statement boundary sits there, so the loop body's label
/// heads two simple paths of different cost.
#[test]
fn loop_ending_a_then_branch_is_not_precise() {
    let p = parse_imp("prog if 0 < x then { while 0 < y do { y := y + -1 } } else { skip }").unwrap();
    let cfg = MachineConfig::default();
    let labelled = label_precise(&p).unwrap();
    let code = compile_vm(&compile_program(&labelled), &cfg).unwrap().0;
    let report = check(&code, &cfg).unwrap();
    assert!(report.sound);
    assert!(!report.precise);
    let w = &report.warnings[0];
    assert_eq!(w.a.abs_diff(w.b), 1);

    let a = annotate(&p, Labelling::Precise, &cfg).unwrap();
    let s = Store::new().with("x", 1).with("y", 3);
    let (s1, _) = run_imp(&a.program, s.clone(), 1000).unwrap();
    let plain = compile_vm(&compile_program(&p), &cfg).unwrap().0;
    let (_, _, measured) = run_mips(&plain, init_memory(&s, &cfg), &cfg, 1000).unwrap();
    // one unit over-estimated for every guard test that stays in the loop
    assert_eq!(s1.get(&Ident::cost()) as u64, measured + 3);
}

#[test]
fn sufficient_condition_implies_precision() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut hits = 0;
    for _ in 0..300 {
        let p = gen_program(&mut rng, &GenConfig::default());
        for labelling in [Labelling::Simple, Labelling::Precise] {
            let r = run_pipeline(&p, Some(labelling), &MachineConfig::default()).unwrap();
            let g = build_cfg(&r.mips).unwrap();
            if precision_precheck(&g) {
                hits += 1;
                let pr = check_precise(&g, &r.cfg).unwrap();
                assert!(pr.precise, "{}", print_imp(&r.labelled));
            }
        }
    }
    assert!(hits > 50, "{hits}");
}
