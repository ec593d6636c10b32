//! Every artifact of one compilation, from a single program and a single
//! machine configuration.

use thiserror::Error;

use crate::costcheck::{self, CheckError, CheckReport};
use crate::imp::Program;
use crate::labelling::{apply_labelling, instrument, CostMap, LabelError, Labelling};
use crate::mips::{erase_mips, MachineConfig, MipsCode};
use crate::passes::{compile_program, compile_vm_with, BgeOrder, CompileError, PositionMap};
use crate::vm::{infer_heights, HeightFn, VmCode};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Label(#[from] LabelError),
    #[error(transparent)]
    Compile(#[from] CompileError),
    #[error(transparent)]
    Check(#[from] CheckError),
}

#[derive(Clone, Debug)]
pub struct PipelineResult {
    pub cfg: MachineConfig,
    pub labelling: Option<Labelling>,
    pub labelled: Program,
    pub vm: VmCode,
    pub heights: HeightFn,
    pub mips: MipsCode,
    pub positions: PositionMap,
    pub erased: MipsCode,
    pub report: CheckReport,
    /// Present when the labelled code is sound.
    pub kappa: Option<CostMap>,
    pub annotated: Option<Program>,
}

/// `labelling = None` compiles `p` as given (labels, if any, are kept).
pub fn run_pipeline(
    p: &Program,
    labelling: Option<Labelling>,
    cfg: &MachineConfig,
) -> Result<PipelineResult, PipelineError> {
    run_pipeline_with(p, labelling, cfg, BgeOrder::default())
}

pub fn run_pipeline_with(
    p: &Program,
    labelling: Option<Labelling>,
    cfg: &MachineConfig,
    order: BgeOrder,
) -> Result<PipelineResult, PipelineError> {
    let labelled = match labelling {
        Some(l) => apply_labelling(p, l)?,
        None => p.clone(),
    };
    let vm = compile_program(&labelled);
    let heights = infer_heights(&vm).map_err(CompileError::from)?;
    let (mips, positions) = compile_vm_with(&vm, cfg, order)?;
    let erased = erase_mips(&mips);
    let report = costcheck::check(&mips, cfg)?;
    let kappa = report.kappa.clone();
    let annotated = match &kappa {
        Some(k) if !labelled.uses_cost() => Some(instrument(&labelled, k)?),
        _ => None,
    };
    Ok(PipelineResult {
        cfg: cfg.clone(),
        labelling,
        labelled,
        vm,
        heights,
        mips,
        positions,
        erased,
        report,
        kappa,
        annotated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imp::{parse_imp, print_imp};

    #[test]
    fn golden_increment() {
        let p = parse_imp("prog x := x + 1").unwrap();
        let r = run_pipeline(&p, Some(Labelling::Simple), &MachineConfig::with_registers(2)).unwrap();
        assert_eq!(print_imp(r.annotated.as_ref().unwrap()), "prog cost := cost + 4; x := x + 1");
        assert!(r.report.sound && r.report.precise);
        assert_eq!(r.mips.len(), 6);
        assert_eq!(r.erased.len(), 5);
    }

    #[test]
    fn unlabelled_input_is_unsound() {
        let p = parse_imp("prog skip").unwrap();
        let r = run_pipeline(&p, None, &MachineConfig::default()).unwrap();
        assert!(!r.report.sound);
        assert!(r.annotated.is_none());
    }
}
