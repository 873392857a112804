//! Homotopy coordinate descent for `min 1/2 ||x - D a||^2 + lambda ||a||_0`.
//!
//! Three nested loops:
//!
//! * [`act_coo_des`]: cyclic hard-thresholding sweeps over a fixed active set;
//! * [`ite_act_upd`]: strong-rule seeding, pruning of zeroed coordinates and
//!   greedy admission of one inactive coordinate at a time;
//! * [`solve_hcd`]: a geometric schedule of `lambda` values, each stage warm
//!   started from the previous one.

mod homotopy;
mod inner;
mod middle;

use serde::{Deserialize, Serialize};

use crate::error::{HcdError, Result};
use crate::linalg::{DenseVector, Residual};
use crate::problem::Problem;
use crate::scalar::Scalar;
use crate::trace::RunTrace;

pub use homotopy::{lambda_schedule, solve_hcd, solve_hcd_observed, Schedule};
pub use inner::{act_coo_des, InnerReport};
pub use middle::{ite_act_upd, ite_act_upd_observed, strong_rule_init};

pub(crate) use middle::run_stage;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverParams<T> {
    /// Target regularization weight.
    pub lambda_tgt: T,
    /// Homotopy ratio between consecutive stages, in (0, 1).
    pub eta: T,
    /// Inner-loop relative change tolerance (scaled by lambda).
    pub tau: T,
    /// Margin of the greedy admission test, in (0, 1).
    pub delta: T,
    /// Margin of the strong screening rule, in (0, 1).
    pub phi: T,
    /// Coordinatewise Lipschitz bound; 1 for unit-norm atoms.
    pub lipschitz: T,
    pub max_inner: usize,
    /// Admissions per stage; `None` means K.
    pub max_middle: Option<usize>,
    pub max_outer: usize,
}

impl<T: Scalar> Default for SolverParams<T> {
    fn default() -> Self {
        Self {
            lambda_tgt: T::lit(0.01),
            eta: T::lit(0.5),
            tau: T::lit(1e-6),
            delta: T::lit(1e-3),
            phi: T::lit(0.05),
            lipschitz: T::one(),
            max_inner: 10_000,
            max_middle: None,
            max_outer: 100,
        }
    }
}

impl<T: Scalar> SolverParams<T> {
    pub fn with_lambda_tgt(mut self, lambda_tgt: T) -> Self {
        self.lambda_tgt = lambda_tgt;
        self
    }

    pub fn with_eta(mut self, eta: T) -> Self {
        self.eta = eta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let open_unit = |v: T| v > T::zero() && v < T::one();
        let checks = [
            (open_unit(self.eta), "eta must lie in (0, 1)"),
            (open_unit(self.phi), "phi must lie in (0, 1)"),
            (open_unit(self.delta), "delta must lie in (0, 1)"),
            (self.tau > T::zero(), "tau must be positive"),
            (self.lambda_tgt > T::zero(), "lambda_tgt must be positive"),
            (self.lipschitz > T::zero(), "lipschitz must be positive"),
            (self.max_inner > 0, "max_inner must be positive"),
            (self.max_outer > 0, "max_outer must be positive"),
            (self.max_middle != Some(0), "max_middle must be positive"),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(HcdError::InvalidParameter(msg.into()));
            }
        }
        if !self.lambda_tgt.is_finite() || !self.lipschitz.is_finite() || !self.tau.is_finite() {
            return Err(HcdError::InvalidParameter("parameters must be finite".into()));
        }
        Ok(())
    }
}

/// Sorted, duplicate-free set of coordinate indices.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ActiveSet(Vec<usize>);

impl ActiveSet {
    pub fn from_indices(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        Self(indices)
    }

    /// `{ j : alpha_j != 0 }`.
    pub fn from_support<T: Scalar>(alpha: &[T]) -> Self {
        Self(
            alpha
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != T::zero())
                .map(|(j, _)| j)
                .collect(),
        )
    }

    pub fn contains(&self, j: usize) -> bool {
        self.0.binary_search(&j).is_ok()
    }

    /// Returns `false` if `j` was already present.
    pub fn insert(&mut self, j: usize) -> bool {
        match self.0.binary_search(&j) {
            Ok(_) => false,
            Err(pos) => {
                self.0.insert(pos, j);
                true
            }
        }
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }
}

/// Current iterate with its active set and maintained residual.
///
/// Every coordinate outside `active` is exactly zero, and `residual` tracks
/// `x - D alpha` up to rounding drift.
#[derive(Debug, Clone)]
pub struct SolverState<T> {
    alpha: DenseVector<T>,
    active: ActiveSet,
    residual: Residual<T>,
    lambda: T,
    stage: usize,
}

impl<T: Scalar> SolverState<T> {
    /// State at `alpha` with the active set equal to its sparse pattern.
    pub fn new(problem: &Problem<T>, alpha: DenseVector<T>) -> Result<Self> {
        problem.check_alpha(&alpha)?;
        let residual = Residual::compute(problem.matrix(), problem.signal(), &alpha)?;
        let active = ActiveSet::from_support(&alpha);
        Ok(Self {
            alpha,
            active,
            residual,
            lambda: T::zero(),
            stage: 0,
        })
    }

    /// Replaces the active set; it must cover every nonzero coordinate.
    pub fn with_active(mut self, active: ActiveSet) -> Result<Self> {
        self.set_active(active)?;
        Ok(self)
    }

    pub fn set_active(&mut self, active: ActiveSet) -> Result<()> {
        if let Some(&j) = active.as_slice().last() {
            if j >= self.alpha.len() {
                return Err(HcdError::IndexOutOfRange {
                    index: j,
                    len: self.alpha.len(),
                });
            }
        }
        if let Some(j) = self
            .alpha
            .iter()
            .enumerate()
            .find(|(j, v)| **v != T::zero() && !active.contains(*j))
            .map(|(j, _)| j)
        {
            return Err(HcdError::InvalidParameter(format!(
                "coordinate {j} is nonzero but not in the active set"
            )));
        }
        self.active = active;
        Ok(())
    }

    pub fn alpha(&self) -> &DenseVector<T> {
        &self.alpha
    }

    pub fn into_alpha(self) -> DenseVector<T> {
        self.alpha
    }

    pub fn active(&self) -> &ActiveSet {
        &self.active
    }

    pub fn residual(&self) -> &Residual<T> {
        &self.residual
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn stage(&self) -> usize {
        self.stage
    }

    pub(crate) fn refresh_residual(&mut self, problem: &Problem<T>) -> Result<()> {
        self.residual = Residual::compute(problem.matrix(), problem.signal(), &self.alpha)?;
        Ok(())
    }

    /// Objective at `lambda` using the maintained residual.
    pub(crate) fn objective_at(&self, lambda: T) -> T {
        let r = self.residual.norm2();
        T::lit(0.5) * r * r + lambda * T::lit(self.alpha.nnz() as f64)
    }

    pub(crate) fn commit(&mut self, problem: &Problem<T>, j: usize, value: T) {
        let old = self.alpha[j];
        if value != old {
            self.residual
                .update_unchecked(problem.matrix(), j, value - old);
            self.alpha[j] = value;
        }
    }
}

/// Hooks into a running solve. All methods default to no-ops.
pub trait SolveObserver<T: Scalar> {
    /// Request a copy of `alpha` before every inner loop.
    fn wants_snapshots(&self) -> bool {
        false
    }

    /// Called before each inner loop; `strong_rule_pass` marks the first
    /// pass of a stage, whose active set comes from the screening rule.
    fn inner_entry(&mut self, _state: &SolverState<T>, _strong_rule_pass: bool) {}

    /// Called after each inner loop, before pruning.
    fn inner_exit(&mut self, _before: Option<&[T]>, _state: &SolverState<T>) {}

    /// Called after coordinate `coord` was admitted; `pruned_len` is the
    /// active-set size just before the admission.
    fn admission(&mut self, _coord: usize, _pruned_len: usize, _state: &SolverState<T>) {}
}

impl<T: Scalar> SolveObserver<T> for () {}

#[derive(Debug, Clone)]
pub struct Solution<T> {
    pub alpha: DenseVector<T>,
    /// Objective at `lambda_tgt`, recomputed from scratch.
    pub objective: T,
    pub lambda_tgt: T,
    pub trace: RunTrace,
}

impl<T: Scalar> Solution<T> {
    pub fn nnz(&self) -> usize {
        self.alpha.nnz()
    }

    pub fn support(&self) -> Vec<usize> {
        self.alpha.support()
    }
}

/// `1/2 ||x - D alpha||^2 + lambda nnz(alpha)`.
pub fn objective<T: Scalar>(problem: &Problem<T>, alpha: &[T], lambda: T) -> Result<T> {
    problem.check_alpha(alpha)?;
    if lambda < T::zero() {
        return Err(HcdError::InvalidParameter("lambda must be nonnegative".into()));
    }
    let r = Residual::compute(problem.matrix(), problem.signal(), alpha)?.norm2();
    let nnz = alpha.iter().filter(|v| **v != T::zero()).count();
    Ok(T::lit(0.5) * r * r + lambda * T::lit(nnz as f64))
}

/// Hard-thresholds a gradient step value: keeps it when `step^2 > 2 lambda / L`.
#[inline]
pub fn threshold_step<T: Scalar>(step: T, lambda: T, lipschitz: T) -> T {
    if step * step > T::lit(2.0) * lambda / lipschitz {
        step
    } else {
        T::zero()
    }
}

/// Exact coordinate minimizer for coordinate `i` given the rest of `state`.
///
/// With the partial residual `z = r + d_i alpha_i` the gradient step is
/// `s = alpha_i + d_i^T r / L`; the result is `s` if `s^2 > 2 lambda / L`
/// and exactly zero otherwise. The caller commits the value.
pub fn hard_threshold<T: Scalar>(
    state: &SolverState<T>,
    problem: &Problem<T>,
    i: usize,
    lambda: T,
    lipschitz: T,
) -> Result<T> {
    let d = problem.matrix();
    let g = crate::linalg::column_dot(d, i, state.residual.as_slice())?;
    Ok(coordinate_step(state.alpha[i], g, lambda, lipschitz))
}

#[inline]
pub(crate) fn coordinate_step<T: Scalar>(alpha_i: T, corr: T, lambda: T, lipschitz: T) -> T {
    threshold_step(alpha_i + corr / lipschitz, lambda, lipschitz)
}
