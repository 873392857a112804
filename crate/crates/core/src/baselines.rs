//! Reference methods: an exhaustive support search that certifies the global
//! minimum on small instances, and a full-vector iterative hard thresholding
//! baseline run over the same homotopy schedule as HCD.

use crate::error::{HcdError, Result};
use crate::linalg::{cholesky_solve, dot, norm2, transpose_matvec, DenseMatrix, DenseVector, Residual};
use crate::problem::Problem;
use crate::scalar::Scalar;
use crate::solver::{
    lambda_schedule, objective, threshold_step, ActiveSet, Solution, SolverParams,
};
use crate::trace::{CheckpointKind, RunTrace, StageTermination, StageTrace};

/// Ridge added to the restricted Gram matrix when it is numerically singular.
pub const RIDGE_FALLBACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult<T> {
    pub support: ActiveSet,
    pub alpha: DenseVector<T>,
    pub objective: T,
}

/// Global minimizer of `1/2 ||x - D a||^2 + lambda ||a||_0` over all supports
/// of size at most `max_support`.
///
/// Supports are enumerated by increasing size, each solved by restricted
/// least squares. Enumeration stops early once `lambda * size` exceeds the
/// best objective found, since no larger support can beat it. Exact ties go
/// to the lexicographically smallest support.
pub fn brute_force_l0<T: Scalar>(
    problem: &Problem<T>,
    lambda: T,
    max_support: usize,
) -> Result<OracleResult<T>> {
    let k = problem.atoms();
    if k > 20 && max_support > 4 {
        return Err(HcdError::BudgetExceeded { k, max_support });
    }
    if lambda < T::zero() {
        return Err(HcdError::InvalidParameter("lambda must be nonnegative".into()));
    }
    let x = problem.signal().as_slice();
    let mut best = OracleResult {
        support: ActiveSet::default(),
        alpha: DenseVector::zeros(k),
        objective: T::lit(0.5) * dot(x, x),
    };

    for size in 1..=max_support.min(k) {
        if lambda * T::lit(size as f64) > best.objective {
            break;
        }
        let mut combo: Vec<usize> = (0..size).collect();
        loop {
            let (coef, obj) = restricted_fit(problem, &combo, lambda)?;
            let better = obj < best.objective
                || (obj == best.objective && combo.as_slice() < best.support.as_slice());
            if better {
                let mut alpha = DenseVector::zeros(k);
                for (&j, &c) in combo.iter().zip(&coef) {
                    alpha[j] = c;
                }
                best = OracleResult {
                    support: ActiveSet::from_indices(combo.clone()),
                    alpha,
                    objective: obj,
                };
            }
            if !next_combination(&mut combo, k) {
                break;
            }
        }
    }
    Ok(best)
}

/// Advances `combo` to the next `size`-subset of `0..n` in lexicographic order.
fn next_combination(combo: &mut [usize], n: usize) -> bool {
    let size = combo.len();
    let mut i = size;
    while i > 0 {
        i -= 1;
        if combo[i] < n - size + i {
            combo[i] += 1;
            for j in i + 1..size {
                combo[j] = combo[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Least squares on the columns in `support`, plus the objective it attains.
/// A zero coefficient would make the support smaller than claimed, so the
/// count uses the actual number of nonzeros.
pub fn restricted_fit<T: Scalar>(
    problem: &Problem<T>,
    support: &[usize],
    lambda: T,
) -> Result<(Vec<T>, T)> {
    let d = problem.matrix();
    let x = problem.signal().as_slice();
    let n = support.len();
    if let Some(&j) = support.iter().find(|&&j| j >= d.cols()) {
        return Err(HcdError::IndexOutOfRange {
            index: j,
            len: d.cols(),
        });
    }
    let mut gram = vec![T::zero(); n * n];
    for (a, &ja) in support.iter().enumerate() {
        for (b, &jb) in support.iter().enumerate().take(a + 1) {
            let v = dot(d.column(ja), d.column(jb));
            gram[a * n + b] = v;
            gram[b * n + a] = v;
        }
    }
    let rhs: Vec<T> = support.iter().map(|&j| dot(d.column(j), x)).collect();
    let coef = match cholesky_solve(&gram, &rhs, n) {
        Some(c) => c,
        None => {
            let ridge = T::lit(RIDGE_FALLBACK);
            for i in 0..n {
                gram[i * n + i] += ridge;
            }
            cholesky_solve(&gram, &rhs, n).ok_or_else(|| HcdError::Singular(support.to_vec()))?
        }
    };
    let mut r = x.to_vec();
    for (&j, &c) in support.iter().zip(&coef) {
        for (ri, &dij) in r.iter_mut().zip(d.column(j)) {
            *ri -= dij * c;
        }
    }
    let rn = norm2(&r);
    let nnz = coef.iter().filter(|c| **c != T::zero()).count();
    Ok((coef, T::lit(0.5) * rn * rn + lambda * T::lit(nnz as f64)))
}

/// Estimates `||D||_2^2` by power iteration on `D^T D`.
pub fn spectral_norm_sq<T: Scalar>(d: &DenseMatrix<T>) -> Result<T> {
    let k = d.cols();
    let mut v = DenseVector::from_vec(vec![T::one() / T::lit(k as f64).sqrt(); k])?;
    let mut est = T::zero();
    for _ in 0..1000 {
        let dv = crate::linalg::matvec(d, &v)?;
        let mut w = transpose_matvec(d, &dv)?;
        let nw = w.norm2();
        if nw == T::zero() {
            return Ok(T::zero());
        }
        for wi in w.iter_mut() {
            *wi /= nw;
        }
        let done = (nw - est).abs() <= T::lit(1e-12) * nw;
        est = nw;
        v = w;
        if done {
            break;
        }
    }
    Ok(est)
}

/// Homotopy IHT: every iteration thresholds the full gradient step
/// `a + D^T (x - D a) / L` with `L = max(params.lipschitz, ||D||_2^2)`.
/// Stages, warm starts and the stopping rule mirror [`crate::solve_hcd`], with
/// no active sets and no screening.
pub fn plain_iht_homotopy<T: Scalar>(
    problem: &Problem<T>,
    params: &SolverParams<T>,
) -> Result<Solution<T>> {
    params.validate()?;
    problem.dictionary().check_normalized()?;
    let d = problem.matrix();
    let x = problem.signal().as_slice();
    let k = problem.atoms();
    let lipschitz = params.lipschitz.max(spectral_norm_sq(d)?);

    let mut alpha = DenseVector::zeros(k);
    let mut residual = Residual::compute(d, x, &alpha)?;
    let lambda0 = transpose_matvec(d, residual.as_slice())?.norm_inf();
    let schedule = lambda_schedule(lambda0, params.lambda_tgt, params.eta, params.max_outer);

    let mut trace = RunTrace {
        lambda0: lambda0.as_f64(),
        ..RunTrace::default()
    };
    if schedule.truncated {
        trace.cap_warnings.push(format!(
            "max_outer = {} reached; jumped to lambda_tgt",
            params.max_outer
        ));
    }

    let half = T::lit(0.5);
    let obj = |r: &Residual<T>, a: &DenseVector<T>, lambda: T| {
        let rn = r.norm2();
        (half * rn * rn + lambda * T::lit(a.nnz() as f64)).as_f64()
    };

    for (n, &lambda) in schedule.lambdas.iter().enumerate() {
        let mut stage = StageTrace::new(lambda.as_f64(), obj(&residual, &alpha, lambda));
        stage.strong_rule_size = k;
        let tol = params.tau * lambda;
        stage.termination = StageTermination::IterationCap;
        for _ in 0..params.max_inner {
            let grad = transpose_matvec(d, residual.as_slice())?;
            let mut prev_sq = T::zero();
            let mut step_sq = T::zero();
            let mut next_sq = T::zero();
            let mut next = DenseVector::zeros(k);
            for j in 0..k {
                let v = threshold_step(alpha[j] + grad[j] / lipschitz, lambda, lipschitz);
                if alpha[j] == T::zero() && v != T::zero() {
                    stage.admitted_coords.push(j);
                }
                prev_sq += alpha[j] * alpha[j];
                step_sq += (v - alpha[j]) * (v - alpha[j]);
                next_sq += v * v;
                next[j] = v;
            }
            alpha = next;
            residual = Residual::compute(d, x, &alpha)?;
            stage.middle_iters += 1;
            stage.inner_sweeps_total += 1;
            stage.push(CheckpointKind::Inner, obj(&residual, &alpha, lambda), alpha.nnz());
            let converged = if prev_sq == T::zero() {
                next_sq == T::zero()
            } else {
                step_sq == T::zero() || step_sq.sqrt() / prev_sq.sqrt() < tol
            };
            if converged {
                stage.termination = StageTermination::Converged;
                break;
            }
        }
        if stage.termination == StageTermination::IterationCap {
            stage.inner_cap_hits = 1;
            trace.cap_warnings.push(format!(
                "stage {n}: max_inner = {} reached",
                params.max_inner
            ));
        }
        trace.push_stage(stage);
    }

    let objective = objective(problem, &alpha, params.lambda_tgt)?;
    Ok(Solution {
        alpha,
        objective,
        lambda_tgt: params.lambda_tgt,
        trace,
    })
}
