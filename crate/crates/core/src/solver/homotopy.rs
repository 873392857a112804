use crate::error::{HcdError, Result};
use crate::linalg::{dot, DenseVector, Residual};
use crate::problem::Problem;
use crate::scalar::Scalar;
use crate::trace::{RunTrace, StageTermination};

use super::{objective, run_stage, SolveObserver, SolverParams, SolverState, Solution};

/// Stage values of the regularization path.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule<T> {
    pub lambda0: T,
    pub lambdas: Vec<T>,
    /// The geometric schedule was cut short by `max_outer`.
    pub truncated: bool,
}

/// `lambda_{n+1} = eta * lambda_n` starting from `lambda0`, stopping at the
/// first value `<= lambda_tgt`, which is replaced by `lambda_tgt` itself.
/// If `lambda0 <= lambda_tgt` the schedule is the single stage `lambda_tgt`.
/// At most `max_outer` stages are produced; when the cap bites, the last
/// stage is still run at `lambda_tgt`.
pub fn lambda_schedule<T: Scalar>(lambda0: T, lambda_tgt: T, eta: T, max_outer: usize) -> Schedule<T> {
    let mut lambdas = Vec::new();
    let mut truncated = false;
    if lambda0.partial_cmp(&lambda_tgt) != Some(std::cmp::Ordering::Greater) {
        lambdas.push(lambda_tgt);
    } else {
        let mut lambda = lambda0;
        loop {
            lambda = eta * lambda;
            if lambda <= lambda_tgt {
                lambdas.push(lambda_tgt);
                break;
            }
            if lambdas.len() + 1 >= max_outer {
                lambdas.push(lambda_tgt);
                truncated = true;
                break;
            }
            lambdas.push(lambda);
        }
    }
    Schedule {
        lambda0,
        lambdas,
        truncated,
    }
}

/// Homotopy coordinate descent from `alpha_init`.
///
/// Requires unit-norm dictionary columns. `lambda0` is the sup-norm of the
/// gradient at `alpha_init` (`||D^T x||_inf` for a zero start).
pub fn solve_hcd<T: Scalar>(
    problem: &Problem<T>,
    params: &SolverParams<T>,
    alpha_init: &[T],
) -> Result<Solution<T>> {
    solve_hcd_observed(problem, params, alpha_init, &mut ())
}

pub fn solve_hcd_observed<T: Scalar, O: SolveObserver<T>>(
    problem: &Problem<T>,
    params: &SolverParams<T>,
    alpha_init: &[T],
    observer: &mut O,
) -> Result<Solution<T>> {
    params.validate()?;
    problem.dictionary().check_normalized()?;
    problem.check_alpha(alpha_init)?;

    let alpha = DenseVector::from_vec(alpha_init.to_vec())?;
    let mut state = SolverState::new(problem, alpha)?;
    let schedule = lambda_schedule(
        gradient_sup_norm(problem, state.residual()),
        params.lambda_tgt,
        params.eta,
        params.max_outer,
    );

    let mut trace = RunTrace {
        lambda0: schedule.lambda0.as_f64(),
        ..RunTrace::default()
    };
    if schedule.truncated {
        trace.cap_warnings.push(format!(
            "max_outer = {} reached; jumped to lambda_tgt",
            params.max_outer
        ));
    }
    for (n, &lambda) in schedule.lambdas.iter().enumerate() {
        state.stage = n;
        let stage = run_stage(&mut state, problem, lambda, params, observer)?;
        if stage.inner_cap_hits > 0 {
            trace.cap_warnings.push(format!(
                "stage {n}: max_inner = {} reached {} time(s)",
                params.max_inner, stage.inner_cap_hits
            ));
        }
        if stage.termination == StageTermination::MiddleCap {
            trace
                .cap_warnings
                .push(format!("stage {n}: admission cap reached"));
        }
        trace.push_stage(stage);
    }

    let alpha = state.into_alpha();
    let objective = objective(problem, &alpha, params.lambda_tgt)?;
    if !objective.is_finite() {
        return Err(HcdError::NonFinite("objective"));
    }
    Ok(Solution {
        alpha,
        objective,
        lambda_tgt: params.lambda_tgt,
        trace,
    })
}

pub(crate) fn gradient_sup_norm<T: Scalar>(problem: &Problem<T>, residual: &Residual<T>) -> T {
    let d = problem.matrix();
    (0..d.cols()).fold(T::zero(), |m, j| {
        m.max(dot(d.column(j), residual.as_slice()).abs())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseMatrix;
    use crate::problem::Dictionary;

    #[test]
    fn schedule_is_geometric_with_clamped_tail() {
        let s = lambda_schedule(1.0, 0.1, 0.5, 100);
        assert_eq!(s.lambdas, vec![0.5, 0.25, 0.125, 0.1]);
        assert!(!s.truncated);
        // exact hit is not duplicated
        let s = lambda_schedule(1.0, 0.25, 0.5, 100);
        assert_eq!(s.lambdas, vec![0.5, 0.25]);
    }

    #[test]
    fn schedule_length_matches_closed_form() {
        for &(l0, lt, eta) in &[(3.7f64, 0.01f64, 0.5f64), (12.0, 0.001, 0.2), (5.0, 0.01, 0.8)] {
            let s = lambda_schedule(l0, lt, eta, 1000);
            let want = ((lt / l0).ln() / eta.ln()).ceil() as usize;
            assert_eq!(s.lambdas.len(), want);
        }
    }

    #[test]
    fn degenerate_and_truncated_schedules() {
        assert_eq!(lambda_schedule(0.0, 0.01, 0.5, 100).lambdas, vec![0.01]);
        assert_eq!(lambda_schedule(0.01, 0.01, 0.5, 100).lambdas, vec![0.01]);
        let s = lambda_schedule(1e6, 1e-6, 0.5, 5);
        assert!(s.truncated);
        assert_eq!(s.lambdas.len(), 5);
        assert_eq!(*s.lambdas.last().unwrap(), 1e-6);
    }

    fn identity_problem(x: Vec<f64>) -> Problem<f64> {
        let n = x.len();
        Problem::new(
            Dictionary::new(DenseMatrix::identity(n)),
            DenseVector::from_vec(x).unwrap(),
            None,
        )
        .unwrap()
    }

    #[test]
    fn zero_signal_gives_zero_solution() {
        let p = identity_problem(vec![0.0; 4]);
        let s = solve_hcd(&p, &SolverParams::default(), &[0.0; 4]).unwrap();
        assert_eq!(s.nnz(), 0);
        assert_eq!(s.trace.stages.len(), 1);
        assert_eq!(s.trace.stages[0].lambda, 0.01);
        assert_eq!(s.objective, 0.0);
    }

    #[test]
    fn orthonormal_solution_is_hard_threshold_of_signal() {
        let x = vec![4.0, 0.12, -0.2, 1.0, 0.0, -3.0];
        let p = identity_problem(x);
        let s = solve_hcd(&p, &SolverParams::default(), &[0.0; 6]).unwrap();
        // sqrt(2 * 0.01) ~ 0.1414
        assert_eq!(s.alpha.as_slice(), &[4.0, 0.0, -0.2, 1.0, 0.0, -3.0]);
        let lambdas = s.trace.stage_lambdas();
        assert_eq!(lambdas[0], 2.0);
        assert_eq!(*lambdas.last().unwrap(), 0.01);
    }

    #[test]
    fn rejects_unnormalized_dictionary() {
        let d = DenseMatrix::from_columns(&[vec![3.0, 4.0]]).unwrap();
        let p = Problem::new(
            Dictionary::new(d),
            DenseVector::from_vec(vec![1.0, 1.0]).unwrap(),
            None,
        )
        .unwrap();
        let err = solve_hcd(&p, &SolverParams::default(), &[0.0]).unwrap_err();
        assert!(matches!(err, HcdError::NotNormalized { column: 0, .. }));
    }

    #[test]
    fn rejects_bad_initial_point() {
        let p = identity_problem(vec![1.0, 2.0]);
        assert!(solve_hcd(&p, &SolverParams::default(), &[0.0]).is_err());
        assert!(solve_hcd(&p, &SolverParams::default(), &[f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn generic_over_f32() {
        let p = identity_problem(vec![2.0, 0.05, -1.0]).cast::<f32>();
        let s = solve_hcd(&p, &SolverParams::<f32>::default(), &[0.0f32; 3]).unwrap();
        assert_eq!(s.alpha.as_slice(), &[2.0f32, 0.0, -1.0]);
    }
}
