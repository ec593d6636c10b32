//! `costlab`: compile, label, check, annotate and run toy Imp programs.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use costlab::costcheck::{self, CheckReport};
use costlab::imp::{parse_imp, parse_imp_with, print_imp, run_imp, Ident, ImpError, ParseOptions, Program, Store, Trace};
use costlab::labelling::{annotate, AnnotateError, Labelling};
use costlab::mips::{init_memory, parse_mips, run_mips_with, MachineConfig, MipsCode, MipsError, MipsInstr, Loc};
use costlab::pipeline::{run_pipeline, PipelineError};
use costlab::selftest::{run_selftest, Mutation, SelftestConfig, TraceCompare};
use costlab::vm::{parse_vm, run_vm_with, VmCode, VmError, VmInstr, VmRunOptions};

const EXIT_PARSE: u8 = 1;
const EXIT_COMPILE: u8 = 2;
const EXIT_UNSOUND: u8 = 3;
const EXIT_FUEL: u8 = 4;
const EXIT_SELFTEST: u8 = 5;

#[derive(Parser)]
#[command(name = "costlab", version, about = "Cost-annotating compiler for a toy imperative language")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Machine {
    /// Number of registers holding stack slots.
    #[arg(long, default_value_t = 4)]
    b: usize,
    /// Per-opcode cost overrides, one `<opcode> <nat>` per line.
    #[arg(long)]
    costs: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the stack-machine or register-machine code of a program.
    Compile {
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Emit::Mips)]
        emit: Emit,
        #[arg(long, value_enum, default_value_t = LabellingArg::None)]
        labelling: LabellingArg,
        #[command(flatten)]
        machine: Machine,
    },
    /// Label, compile and check a program, then print it with cost updates.
    Annotate {
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = LabellingArg::Simple)]
        labelling: LabellingArg,
        #[command(flatten)]
        machine: Machine,
        #[arg(long)]
        json: bool,
    },
    /// Execute a program at one stage and print the final store and trace.
    Run {
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Stage::Imp)]
        stage: Stage,
        /// Initial value, `x=3`; repeatable.
        #[arg(long = "set", value_name = "VAR=INT")]
        set: Vec<String>,
        #[arg(long, default_value_t = 100_000)]
        fuel: u64,
        /// Labelling applied before compiling Imp input to a lower stage.
        #[arg(long, value_enum, default_value_t = LabellingArg::None)]
        labelling: LabellingArg,
        #[command(flatten)]
        machine: Machine,
        #[arg(long)]
        json: bool,
    },
    /// Check soundness and precision of labelled register-machine code.
    Check {
        input: PathBuf,
        /// Labelling applied when the input is an Imp program.
        #[arg(long, value_enum, default_value_t = LabellingArg::None)]
        labelling: LabellingArg,
        #[command(flatten)]
        machine: Machine,
        #[arg(long)]
        json: bool,
    },
    /// Random differential testing of every stage.
    Selftest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 500)]
        count: usize,
        #[arg(long, default_value_t = 30)]
        max_size: usize,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,4,8")]
        b_set: Vec<usize>,
        #[arg(long, value_enum, default_value_t = CompareArg::Sequence)]
        trace_compare: CompareArg,
        #[arg(long, value_enum)]
        mutate: Option<MutateArg>,
        #[arg(long, default_value_t = 100_000)]
        fuel: u64,
        #[arg(long)]
        costs: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Emit {
    Vm,
    Mips,
    MipsErased,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LabellingArg {
    None,
    Simple,
    Precise,
}

impl LabellingArg {
    fn get(self) -> Option<Labelling> {
        match self {
            LabellingArg::None => None,
            LabellingArg::Simple => Some(Labelling::Simple),
            LabellingArg::Precise => Some(Labelling::Precise),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Stage {
    Imp,
    Vm,
    Mips,
}

#[derive(Clone, Copy, ValueEnum)]
enum CompareArg {
    Sequence,
    Multiset,
}

#[derive(Clone, Copy, ValueEnum)]
enum MutateArg {
    SwapBge,
}

/// Failure with its exit code.
struct Fail(u8, String);

impl Fail {
    fn parse(msg: impl ToString) -> Self {
        Fail(EXIT_PARSE, msg.to_string())
    }

    fn compile(msg: impl ToString) -> Self {
        Fail(EXIT_COMPILE, msg.to_string())
    }
}

impl From<PipelineError> for Fail {
    fn from(e: PipelineError) -> Self {
        Fail::compile(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.cmd) {
        Ok(code) => ExitCode::from(code),
        Err(Fail(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

fn read(path: &Path) -> Result<String, Fail> {
    std::fs::read_to_string(path).map_err(|e| Fail::parse(format!("{}: {e}", path.display())))
}

fn machine(m: &Machine) -> Result<MachineConfig, Fail> {
    let mut cfg = MachineConfig::with_registers(m.b);
    if let Some(path) = &m.costs {
        cfg.costs.parse_overrides(&read(path)?).map_err(Fail::parse)?;
    }
    Ok(cfg)
}

fn has_ext(path: &Path, ext: &str) -> bool {
    path.extension().is_some_and(|e| e == ext)
}

fn read_imp(path: &Path, allow_cost: bool) -> Result<Program, Fail> {
    let text = read(path)?;
    let parsed = if allow_cost {
        parse_imp_with(&text, ParseOptions { allow_cost: true })
    } else {
        parse_imp(&text)
    };
    parsed.map_err(|e| Fail::parse(format!("{}: {e}", path.display())))
}

fn dispatch(cmd: Cmd) -> Result<u8, Fail> {
    match cmd {
        Cmd::Compile {
            input,
            emit,
            labelling,
            machine: m,
        } => {
            let cfg = machine(&m)?;
            let p = read_imp(&input, false)?;
            let r = run_pipeline(&p, labelling.get(), &cfg)?;
            let text = match emit {
                Emit::Vm => r.vm.to_string(),
                Emit::Mips => r.mips.to_string(),
                Emit::MipsErased => r.erased.to_string(),
            };
            print!("{text}");
            Ok(0)
        }
        Cmd::Annotate {
            input,
            labelling,
            machine: m,
            json,
        } => {
            let cfg = machine(&m)?;
            let p = read_imp(&input, false)?;
            let l = labelling
                .get()
                .ok_or_else(|| Fail::compile("annotation needs a labelling (simple or precise)"))?;
            match annotate(&p, l, &cfg) {
                Ok(a) => {
                    if json {
                        let v = json!({
                            "annotated": print_imp(&a.program),
                            "labelled": print_imp(&a.labelled),
                            "kappa": a.kappa,
                            "report": a.report,
                        });
                        println!("{v}");
                    } else {
                        println!("{}", print_imp(&a.program));
                        print!("{}", a.report.to_text());
                    }
                    Ok(0)
                }
                Err(AnnotateError::UnsoundLabelling(msg)) => Err(Fail(EXIT_UNSOUND, format!("unsound labelling: {msg}"))),
                Err(e) => Err(Fail::compile(e)),
            }
        }
        Cmd::Check {
            input,
            labelling,
            machine: m,
            json,
        } => {
            let cfg = machine(&m)?;
            let report = if has_ext(&input, "mips") {
                let code = parse_mips(&read(&input)?).map_err(Fail::parse)?;
                costcheck::check(&code, &cfg).map_err(Fail::compile)?
            } else {
                let p = read_imp(&input, false)?;
                run_pipeline(&p, labelling.get(), &cfg)?.report
            };
            print_report(&report, json);
            Ok(if report.sound { 0 } else { EXIT_UNSOUND })
        }
        Cmd::Run {
            input,
            stage,
            set,
            fuel,
            labelling,
            machine: m,
            json,
        } => {
            let cfg = machine(&m)?;
            let mut store = Store::new();
            let mut shown = Vec::new();
            for binding in &set {
                let (x, v) = parse_binding(binding)?;
                shown.push(x.clone());
                store.set(x, v);
            }
            let (final_store, trace, cost, names) = run_stage(&input, stage, labelling, store, fuel, &cfg)?;
            shown.extend(names);
            print_run(&final_store, &shown, &trace, cost, json);
            Ok(0)
        }
        Cmd::Selftest {
            seed,
            count,
            max_size,
            b_set,
            trace_compare,
            mutate,
            fuel,
            costs,
            json,
        } => {
            let mut cfg = SelftestConfig {
                seed,
                count,
                max_size,
                b_set,
                compare: match trace_compare {
                    CompareArg::Sequence => TraceCompare::Sequence,
                    CompareArg::Multiset => TraceCompare::Multiset,
                },
                mutate: mutate.map(|MutateArg::SwapBge| Mutation::SwapBge),
                fuel,
                ..SelftestConfig::default()
            };
            if let Some(path) = costs {
                cfg.costs.parse_overrides(&read(&path)?).map_err(Fail::parse)?;
            }
            let report = run_selftest(&cfg);
            if json {
                println!("{}", serde_json::to_string(&report).expect("report serializes"));
            } else {
                print!("{}", report.to_text());
            }
            Ok(if report.passed() { 0 } else { EXIT_SELFTEST })
        }
    }
}

fn parse_binding(s: &str) -> Result<(Ident, i64), Fail> {
    let bad = || Fail::parse(format!("bad binding `{s}`, expected VAR=INT"));
    let (x, v) = s.split_once('=').ok_or_else(bad)?;
    let x = Ident::new(x.trim()).ok_or_else(bad)?;
    let v = v.trim().parse().map_err(|_| bad())?;
    Ok((x, v))
}

type RunResult = (Store, Trace, Option<u64>, Vec<Ident>);

fn run_stage(
    input: &Path,
    stage: Stage,
    labelling: LabellingArg,
    store: Store,
    fuel: u64,
    cfg: &MachineConfig,
) -> Result<RunResult, Fail> {
    if has_ext(input, "vm") {
        let code = parse_vm(&read(input)?).map_err(Fail::parse)?;
        return run_on_vm(&code, store, fuel);
    }
    if has_ext(input, "mips") {
        let code = parse_mips(&read(input)?).map_err(Fail::parse)?;
        return run_on_mips(&code, store, fuel, cfg);
    }
    let p = read_imp(input, true)?;
    let names = p.idents();
    let mut result = match stage {
        Stage::Imp => {
            let p = match labelling.get() {
                Some(l) => costlab::labelling::apply_labelling(&p, l).map_err(Fail::compile)?,
                None => p,
            };
            match run_imp(&p, store, fuel) {
                Ok((s, t)) => (s, t, None, Vec::new()),
                Err(ImpError::FuelExhausted(n)) => return Err(Fail(EXIT_FUEL, format!("fuel exhausted after {n} steps"))),
                Err(e) => return Err(Fail::compile(e)),
            }
        }
        Stage::Vm => {
            let r = run_pipeline(&p, labelling.get(), cfg)?;
            run_on_vm(&r.vm, store, fuel)?
        }
        Stage::Mips => {
            let r = run_pipeline(&p, labelling.get(), cfg)?;
            run_on_mips(&r.mips, store, fuel, cfg)?
        }
    };
    result.3 = names;
    Ok(result)
}

fn run_on_vm(code: &VmCode, store: Store, fuel: u64) -> Result<RunResult, Fail> {
    let names = code
        .instrs()
        .iter()
        .filter_map(|i| match i {
            VmInstr::Var(x) | VmInstr::Setvar(x) => Some(x.clone()),
            _ => None,
        })
        .collect();
    match run_vm_with(code, store, VmRunOptions::with_fuel(fuel)) {
        Ok(o) => Ok((o.store, o.trace, None, names)),
        Err(VmError::FuelExhausted(n)) => Err(Fail(EXIT_FUEL, format!("fuel exhausted after {n} steps"))),
        Err(e) => Err(Fail::compile(e)),
    }
}

fn run_on_mips(code: &MipsCode, store: Store, fuel: u64, cfg: &MachineConfig) -> Result<RunResult, Fail> {
    let names = code
        .instrs()
        .iter()
        .filter_map(|i| match i {
            MipsInstr::Load(_, Loc::Var(x)) | MipsInstr::Store(_, Loc::Var(x)) => Some(x.clone()),
            _ => None,
        })
        .collect();
    match run_mips_with(code, init_memory(&store, cfg), cfg, fuel, false) {
        Ok(o) => Ok((o.memory.vars(), o.trace, Some(o.cost), names)),
        Err(MipsError::FuelExhausted(n)) => Err(Fail(EXIT_FUEL, format!("fuel exhausted after {n} steps"))),
        Err(e) => Err(Fail::compile(e)),
    }
}

fn print_run(store: &Store, shown: &[Ident], trace: &Trace, cost: Option<u64>, json: bool) {
    let mut names: Vec<Ident> = shown.to_vec();
    names.extend(store.iter().map(|(x, _)| x.clone()));
    names.sort_by(|a, b| (a.is_cost(), a).cmp(&(b.is_cost(), b)));
    names.dedup();
    if json {
        let vars: serde_json::Map<String, serde_json::Value> =
            names.iter().map(|x| (x.to_string(), json!(store.get(x)))).collect();
        let mut v = json!({ "store": vars, "trace": trace });
        if let Some(c) = cost {
            v["cost"] = json!(c);
        }
        println!("{v}");
        return;
    }
    let line: Vec<String> = names.iter().map(|x| format!("{x}={}", store.get(x))).collect();
    println!("{}", line.join(" "));
    println!("trace: {trace}");
    if let Some(c) = cost {
        println!("cost: {c}");
    }
}

fn print_report(r: &CheckReport, json: bool) {
    if json {
        println!("{}", serde_json::to_string(r).expect("report serializes"));
    } else {
        print!("{}", r.to_text());
    }
}
