use crate::error::Result;
use crate::linalg::dot;
use crate::problem::Problem;
use crate::scalar::Scalar;

use super::{coordinate_step, SolverParams, SolverState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct InnerReport {
    pub sweeps: usize,
    /// `max_inner` was reached before the stopping rule held.
    pub capped: bool,
}

/// Cyclic coordinate descent over the current active set.
///
/// Each sweep visits the active coordinates in ascending order and commits
/// the hard-thresholded coordinate minimizer immediately, so later
/// coordinates in the sweep see earlier updates. Sweeps repeat until
/// `||a_new - a_old|| / ||a_old|| < tau * lambda` (an all-zero iterate that
/// stays zero also counts as converged) or `max_inner` sweeps were run.
/// Coordinates outside the active set are never written.
pub fn act_coo_des<T: Scalar>(
    state: &mut SolverState<T>,
    problem: &Problem<T>,
    lambda: T,
    params: &SolverParams<T>,
) -> Result<InnerReport> {
    problem.check_alpha(&state.alpha)?;
    let mut report = InnerReport::default();
    if state.active.is_empty() {
        return Ok(report);
    }
    let d = problem.matrix();
    let lipschitz = params.lipschitz;
    let tol = params.tau * lambda;
    let active = state.active.as_slice().to_vec();

    loop {
        let mut prev_sq = T::zero();
        let mut step_sq = T::zero();
        let mut next_sq = T::zero();
        for &j in &active {
            let old = state.alpha[j];
            let corr = dot(d.column(j), state.residual.as_slice());
            let new = coordinate_step(old, corr, lambda, lipschitz);
            state.commit(problem, j, new);
            prev_sq += old * old;
            step_sq += (new - old) * (new - old);
            next_sq += new * new;
        }
        report.sweeps += 1;

        let converged = if prev_sq == T::zero() {
            next_sq == T::zero()
        } else {
            step_sq == T::zero() || step_sq.sqrt() / prev_sq.sqrt() < tol
        };
        if converged {
            break;
        }
        if report.sweeps >= params.max_inner {
            report.capped = true;
            break;
        }
    }
    Ok(report)
}
