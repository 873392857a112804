//! Per-run solver trace and its JSON / CSV serializations.
//!
//! JSON layout (`schema_version` 1):
//!
//! ```text
//! { "schema_version": 1, "method": "hcd", "lambda0": f64,
//!   "stages": [ { "lambda", "middle_iters", "inner_sweeps_total",
//!                 "strong_rule_size", "warm_start_objective",
//!                 "objective_checkpoints", "nnz_checkpoints",
//!                 "checkpoint_kinds", "admitted_coords",
//!                 "inner_cap_hits", "termination" } ],
//!   "total_middle_iters": usize, "cap_warnings": [string] }
//! ```
//!
//! The CSV form has one row per checkpoint with header
//! `stage,lambda,checkpoint,kind,objective,nnz`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckpointKind {
    /// After an inner-loop (active coordinate descent) return.
    Inner,
    /// After a greedy coordinate admission.
    Admission,
}

impl CheckpointKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CheckpointKind::Inner => "inner",
            CheckpointKind::Admission => "admission",
        }
    }
}

/// Why a stage's middle loop stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StageTermination {
    /// The largest inactive gradient fell below the greedy threshold.
    #[default]
    Converged,
    /// Every coordinate was already active.
    InactiveExhausted,
    /// The greedy coordinate passed the screening test but its thresholded
    /// value was zero, so admitting it cannot lower the objective.
    ZeroAdmission,
    /// The admission cap was hit.
    MiddleCap,
    /// Iteration cap of a single-loop method (plain IHT) was hit.
    IterationCap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct StageTrace {
    pub lambda: f64,
    pub middle_iters: usize,
    pub inner_sweeps_total: usize,
    /// Size of the strong-rule active set that seeded the stage.
    pub strong_rule_size: usize,
    /// Objective at this stage's lambda, evaluated at the warm start.
    pub warm_start_objective: f64,
    pub objective_checkpoints: Vec<f64>,
    pub nnz_checkpoints: Vec<usize>,
    pub checkpoint_kinds: Vec<CheckpointKind>,
    pub admitted_coords: Vec<usize>,
    pub inner_cap_hits: usize,
    pub termination: StageTermination,
}

impl StageTrace {
    pub(crate) fn new(lambda: f64, warm_start_objective: f64) -> Self {
        Self {
            lambda,
            warm_start_objective,
            ..Self::default()
        }
    }

    pub(crate) fn push(&mut self, kind: CheckpointKind, objective: f64, nnz: usize) {
        self.objective_checkpoints.push(objective);
        self.nnz_checkpoints.push(nnz);
        self.checkpoint_kinds.push(kind);
    }

    pub fn final_objective(&self) -> f64 {
        self.objective_checkpoints
            .last()
            .copied()
            .unwrap_or(self.warm_start_objective)
    }

    /// Number of checkpoint pairs `(a, b)` with `b > a + slack`, counting the
    /// warm start as the leading checkpoint.
    pub fn monotonicity_violations(&self, slack: f64) -> usize {
        std::iter::once(self.warm_start_objective)
            .chain(self.objective_checkpoints.iter().copied())
            .collect::<Vec<_>>()
            .windows(2)
            .filter(|w| w[1] > w[0] + slack)
            .count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct RunTrace {
    pub lambda0: f64,
    pub stages: Vec<StageTrace>,
    pub total_middle_iters: usize,
    pub cap_warnings: Vec<String>,
}

#[derive(Serialize)]
struct TraceDocument<'a> {
    schema_version: u32,
    method: &'a str,
    #[serde(flatten)]
    trace: &'a RunTrace,
}

impl RunTrace {
    pub(crate) fn push_stage(&mut self, stage: StageTrace) {
        self.total_middle_iters += stage.middle_iters;
        self.stages.push(stage);
    }

    pub fn stage_lambdas(&self) -> Vec<f64> {
        self.stages.iter().map(|s| s.lambda).collect()
    }

    pub fn total_admissions(&self) -> usize {
        self.stages.iter().map(|s| s.admitted_coords.len()).sum()
    }

    pub fn has_cap_warning(&self) -> bool {
        !self.cap_warnings.is_empty()
    }

    pub fn to_json(&self, method: &str) -> Result<String> {
        Ok(serde_json::to_string_pretty(&TraceDocument {
            schema_version: SCHEMA_VERSION,
            method,
            trace: self,
        })?)
    }

    /// Writes one CSV row per checkpoint.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["stage", "lambda", "checkpoint", "kind", "objective", "nnz"])?;
        for (n, stage) in self.stages.iter().enumerate() {
            for (c, ((obj, nnz), kind)) in stage
                .objective_checkpoints
                .iter()
                .zip(&stage.nnz_checkpoints)
                .zip(&stage.checkpoint_kinds)
                .enumerate()
            {
                w.write_record([
                    n.to_string(),
                    stage.lambda.to_string(),
                    c.to_string(),
                    kind.as_str().to_string(),
                    obj.to_string(),
                    nnz.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}
