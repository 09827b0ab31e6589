//! Configuration files, command drivers, reports and the acceptance suite
//! behind the `bdssep` binary.

mod acceptance;
mod commands;
mod config;
pub mod invariants;
mod report;

pub use acceptance::{
    run_acceptance, run_criterion, AcceptanceOptions, AcceptanceSummary, Check, CriterionResult, Relation,
    CRITERION_NAMES,
};
pub use commands::{
    center_separation, cmd_hitting, cmd_hydro, cmd_ldp, cmd_mixing, cmd_quasipotential, cmd_scaling, cmd_stationary,
    conditioned_start, coupling_mixing, exact_hitting, exact_mixing, heat_path_cost, hydro_comparison,
    initial_from_profile, inverse_fit, rare_target, sampled_entropy_bound, sampled_quasipotentials, scaling_sweep,
    simulate_hitting, solve_chain, stationary_summary, two_state_mixing, ExactHitting, HydroComparison, InverseFit,
    MixingRow, PathCost, ProfileEstimate, ScalingResults, SimulatedHitting, StationarySummary, TrendDiagnostics,
    REPRESENTATION_STATE_CAP,
};
pub use config::{
    ExperimentConfig, HittingSection, HydroSection, LdpSection, MixingSection, ModelSection, Overrides, ProfileExpr,
    QuasiSection, RunSection, ScalingSection, SetSection, VerifySection,
};
pub use report::{cell, CsvBlock, Provenance, Report};

use crate::error::{Error, Result};

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_ACCEPTANCE: i32 = 4;

/// Bad input maps to the validation code, everything raised while running
/// to the numerical one.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Validation { .. } | Error::Argument(_) | Error::Capacity { .. } | Error::Domain(_) => EXIT_VALIDATION,
        _ => EXIT_NUMERICAL,
    }
}

/// Runs the acceptance suite selected by `[verify]` and reports it; the flag
/// is whether every selected criterion passed.
pub fn cmd_verify(cfg: &ExperimentConfig, progress: impl FnMut(&CriterionResult, f64)) -> Result<(Report, bool)> {
    let opts = AcceptanceOptions {
        criteria: cfg.verify.criteria.clone(),
        perturb: cfg.verify.perturb,
        seed: cfg.run.seed,
        workers: cfg.run.workers,
    };
    let summary = run_acceptance(&opts, progress);
    let mut block = CsvBlock::new("criteria", &["id", "name", "passed", "label", "observed", "relation", "bound", "holds"]);
    for r in &summary.results {
        for c in &r.checks {
            block.push(vec![
                r.id.to_string(),
                r.name.clone(),
                r.passed.to_string(),
                c.label.clone(),
                cell(c.observed),
                format!("{:?}", c.relation),
                cell(c.bound),
                c.holds.to_string(),
            ]);
        }
    }
    let seeds = std::collections::BTreeMap::from([("acceptance".to_string(), cfg.run.seed)]);
    let passed = summary.passed;
    Ok((Report::new("verify", cfg, seeds, &summary, vec![block])?, passed))
}
