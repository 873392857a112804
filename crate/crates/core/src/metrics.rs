//! Recovery metrics.
//!
//! `metrics.json` layout (`schema_version` 1):
//!
//! ```text
//! { "schema_version": 1, "method": str, "lambda_tgt": f64,
//!   "recon_error": f64, "objective": f64, "nnz": usize,
//!   "obj_gap": f64 | null,
//!   "phi_star": { "value": f64, "source": "truth" | "oracle" } | null,
//!   "support_recovered": bool | null, "wall_time_s": f64,
//!   "cap_warnings": [str] }
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{HcdError, Result};
use crate::problem::Problem;
use crate::scalar::Scalar;
use crate::solver::{objective, Solution};
use crate::trace::SCHEMA_VERSION;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiStarSource {
    /// Objective of the generating code.
    Truth,
    /// Global optimum from exhaustive support search.
    Oracle,
}

/// Reference objective value with its provenance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiStar {
    pub value: f64,
    pub source: PhiStarSource,
}

impl PhiStar {
    /// `Phi(a*)` at `lambda`, if the problem carries a truth vector.
    pub fn from_truth<T: Scalar>(problem: &Problem<T>, lambda: T) -> Option<Result<Self>> {
        problem.truth().map(|t| {
            Ok(Self {
                value: objective(problem, t, lambda)?.as_f64(),
                source: PhiStarSource::Truth,
            })
        })
    }

    pub fn oracle(value: f64) -> Self {
        Self {
            value,
            source: PhiStarSource::Oracle,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// `||x - D a||_2`.
    pub recon_error: f64,
    pub objective: f64,
    pub obj_gap: Option<f64>,
    pub phi_star: Option<PhiStar>,
    pub nnz: usize,
    pub support_recovered: Option<bool>,
    pub wall_time_s: f64,
}

#[derive(Serialize)]
struct MetricsDocument<'a> {
    schema_version: u32,
    method: &'a str,
    lambda_tgt: f64,
    #[serde(flatten)]
    metrics: &'a Metrics,
    cap_warnings: &'a [String],
}

impl Metrics {
    pub fn to_json(&self, method: &str, lambda_tgt: f64, cap_warnings: &[String]) -> Result<String> {
        Ok(serde_json::to_string_pretty(&MetricsDocument {
            schema_version: SCHEMA_VERSION,
            method,
            lambda_tgt,
            metrics: self,
            cap_warnings,
        })?)
    }
}

/// Computes metrics for `solution`; `wall_time_s` is measured by the caller.
pub fn compute_metrics<T: Scalar>(
    problem: &Problem<T>,
    solution: &Solution<T>,
    phi_star: Option<PhiStar>,
    wall_time_s: f64,
) -> Result<Metrics> {
    let alpha = &solution.alpha;
    problem.check_alpha(alpha)?;
    let zero_lambda_obj = objective(problem, alpha, T::zero())?;
    let recon_error = (T::lit(2.0) * zero_lambda_obj).sqrt().as_f64();
    let obj = solution.objective.as_f64();
    let support_recovered = problem
        .truth()
        .map(|t| support_recovered(t, alpha))
        .transpose()?;
    Ok(Metrics {
        recon_error,
        objective: obj,
        obj_gap: phi_star.map(|p| obj - p.value),
        phi_star,
        nnz: alpha.nnz(),
        support_recovered,
        wall_time_s,
    })
}

/// `true` iff both vectors have exactly the same nonzero pattern.
pub fn support_recovered<T: Scalar>(truth: &[T], alpha: &[T]) -> Result<bool> {
    if truth.len() != alpha.len() {
        return Err(HcdError::DimensionMismatch {
            context: "support comparison",
            expected: truth.len(),
            actual: alpha.len(),
        });
    }
    Ok(truth
        .iter()
        .zip(alpha)
        .all(|(t, a)| (*t != T::zero()) == (*a != T::zero())))
}
