use crate::error::Result;
use crate::linalg::{dot, DenseVector, Residual};
use crate::problem::Problem;
use crate::scalar::Scalar;
use crate::trace::{CheckpointKind, StageTermination, StageTrace};

use super::{act_coo_des, hard_threshold, ActiveSet, SolveObserver, SolverParams, SolverState};

/// Strong screening rule: every nonzero coordinate of `alpha0`, plus every
/// zero coordinate whose gradient magnitude reaches
/// `(1 - phi) sqrt(2 lambda / L)`.
pub fn strong_rule_init<T: Scalar>(
    alpha0: &[T],
    problem: &Problem<T>,
    lambda: T,
    params: &SolverParams<T>,
) -> Result<ActiveSet> {
    problem.check_alpha(alpha0)?;
    let r = Residual::compute(problem.matrix(), problem.signal(), alpha0)?;
    Ok(screen(alpha0, problem, r.as_slice(), lambda, params))
}

fn screen<T: Scalar>(
    alpha: &[T],
    problem: &Problem<T>,
    residual: &[T],
    lambda: T,
    params: &SolverParams<T>,
) -> ActiveSet {
    let d = problem.matrix();
    let cut = (T::one() - params.phi) * (T::lit(2.0) * lambda / params.lipschitz).sqrt();
    // grad_j f = -d_j^T r
    ActiveSet::from_indices(
        alpha
            .iter()
            .enumerate()
            .filter(|(j, a)| **a != T::zero() || dot(d.column(*j), residual).abs() >= cut)
            .map(|(j, _)| j)
            .collect(),
    )
}

/// Largest `|d_j^T r|` over zero coordinates; ties go to the lowest index.
fn greedy_pick<T: Scalar>(state: &SolverState<T>, problem: &Problem<T>) -> Option<(usize, T)> {
    let d = problem.matrix();
    let r = state.residual.as_slice();
    let mut best: Option<(usize, T)> = None;
    for (j, a) in state.alpha.iter().enumerate() {
        if *a != T::zero() {
            continue;
        }
        let g = dot(d.column(j), r).abs();
        if best.is_none_or(|(_, b)| g > b) {
            best = Some((j, g));
        }
    }
    best
}

/// Runs one homotopy stage in place and returns its trace.
pub(crate) fn run_stage<T: Scalar, O: SolveObserver<T>>(
    state: &mut SolverState<T>,
    problem: &Problem<T>,
    lambda: T,
    params: &SolverParams<T>,
    observer: &mut O,
) -> Result<StageTrace> {
    state.lambda = lambda;
    state.refresh_residual(problem)?;
    let mut trace = StageTrace::new(lambda.as_f64(), state.objective_at(lambda).as_f64());

    let active = screen(&state.alpha, problem, state.residual.as_slice(), lambda, params);
    trace.strong_rule_size = active.len();
    state.active = active;

    let k = problem.atoms();
    let max_middle = params.max_middle.unwrap_or(k);
    let stop = (T::one() - params.delta) * (T::lit(2.0) * lambda / params.lipschitz).sqrt();
    let mut strong_rule_pass = true;

    loop {
        observer.inner_entry(state, strong_rule_pass);
        let before = observer.wants_snapshots().then(|| state.alpha.to_vec());
        let report = act_coo_des(state, problem, lambda, params)?;
        trace.inner_sweeps_total += report.sweeps;
        if report.capped {
            trace.inner_cap_hits += 1;
        }
        observer.inner_exit(before.as_deref(), state);
        strong_rule_pass = false;

        // drop coordinates the inner loop zeroed, and clear rounding drift
        state.active = ActiveSet::from_support(&state.alpha);
        state.refresh_residual(problem)?;
        trace.push(
            CheckpointKind::Inner,
            state.objective_at(lambda).as_f64(),
            state.active.len(),
        );

        let Some((pick, grad)) = greedy_pick(state, problem) else {
            trace.termination = StageTermination::InactiveExhausted;
            break;
        };
        if grad <= stop {
            trace.termination = StageTermination::Converged;
            break;
        }
        if trace.admitted_coords.len() >= max_middle {
            trace.termination = StageTermination::MiddleCap;
            break;
        }
        let value = hard_threshold(state, problem, pick, lambda, params.lipschitz)?;
        if value == T::zero() {
            trace.termination = StageTermination::ZeroAdmission;
            break;
        }
        let pruned_len = state.active.len();
        state.commit(problem, pick, value);
        state.active.insert(pick);
        trace.admitted_coords.push(pick);
        trace.middle_iters += 1;
        trace.push(
            CheckpointKind::Admission,
            state.objective_at(lambda).as_f64(),
            state.active.len(),
        );
        observer.admission(pick, pruned_len, state);
    }
    Ok(trace)
}

/// Active-set updating loop at a fixed `lambda`, started from `alpha0`.
///
/// `middle_iters` in the returned trace counts active-set updates, i.e.
/// inner passes after the initial strong-rule pass.
pub fn ite_act_upd<T: Scalar>(
    alpha0: &[T],
    problem: &Problem<T>,
    lambda: T,
    params: &SolverParams<T>,
) -> Result<(DenseVector<T>, StageTrace)> {
    ite_act_upd_observed(alpha0, problem, lambda, params, &mut ())
}

pub fn ite_act_upd_observed<T: Scalar, O: SolveObserver<T>>(
    alpha0: &[T],
    problem: &Problem<T>,
    lambda: T,
    params: &SolverParams<T>,
    observer: &mut O,
) -> Result<(DenseVector<T>, StageTrace)> {
    params.validate()?;
    let mut state = SolverState::new(problem, DenseVector::from_vec(alpha0.to_vec())?)?;
    let trace = run_stage(&mut state, problem, lambda, params, observer)?;
    Ok((state.into_alpha(), trace))
}
