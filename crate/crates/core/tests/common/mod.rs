#![allow(dead_code)]

use hcd::datagen::{random_dictionary, Distribution};
use hcd::{ActiveSet, Dictionary, DenseVector, GenSpec, Problem, Scalar, SolveObserver, SolverState};

/// Counts violations of the per-iteration solver invariants.
#[derive(Debug, Default)]
pub struct InvariantObserver {
    pub inner_calls: usize,
    pub admissions: usize,
    pub freeze_violations: usize,
    pub admission_violations: usize,
    pub pattern_violations: usize,
}

impl InvariantObserver {
    pub fn clean(&self) -> bool {
        self.freeze_violations == 0 && self.admission_violations == 0 && self.pattern_violations == 0
    }
}

impl<T: Scalar> SolveObserver<T> for InvariantObserver {
    fn wants_snapshots(&self) -> bool {
        true
    }

    fn inner_entry(&mut self, state: &SolverState<T>, strong_rule_pass: bool) {
        // the first pass of a stage runs on the screened set, a superset
        if !strong_rule_pass && *state.active() != ActiveSet::from_support(state.alpha()) {
            self.pattern_violations += 1;
        }
    }

    fn inner_exit(&mut self, before: Option<&[T]>, state: &SolverState<T>) {
        self.inner_calls += 1;
        let before = before.expect("snapshots requested");
        let frozen = (0..before.len())
            .filter(|&j| !state.active().contains(j))
            .all(|j| before[j].as_f64().to_bits() == state.alpha()[j].as_f64().to_bits());
        if !frozen {
            self.freeze_violations += 1;
        }
    }

    fn admission(&mut self, _coord: usize, pruned_len: usize, state: &SolverState<T>) {
        self.admissions += 1;
        if state.active().len() > pruned_len + 1 {
            self.admission_violations += 1;
        }
    }
}

pub fn spec(dist: Distribution, d: usize, k: usize, s: usize, sigma: f64, seed: u64) -> GenSpec {
    GenSpec {
        dist,
        d,
        k,
        s,
        sigma,
        seed,
    }
}

/// Problem over a random normalized dictionary with an arbitrary signal.
pub fn problem_for_signal(dist: Distribution, k: usize, signal: Vec<f64>, seed: u64) -> Problem<f64> {
    let (dict, _) = random_dictionary(dist, signal.len(), k, seed).unwrap();
    Problem::new(
        Dictionary::new(dict),
        DenseVector::from_vec(signal).unwrap(),
        None,
    )
    .unwrap()
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
