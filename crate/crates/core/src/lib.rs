//! Homotopy coordinate descent (HCD) for l0-regularized least squares,
//!
//! ```text
//! minimize  1/2 ||x - D a||_2^2 + lambda ||a||_0
//! ```
//!
//! with a brute-force oracle and a full-vector iterative hard thresholding
//! baseline for verification, synthetic and image-patch data generation,
//! and recovery metrics.
//!
//! All numerics are generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root fix the scalar to `f64`.

pub mod baselines;
pub mod datagen;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod pgm;
pub mod problem;
pub mod scalar;
pub mod solver;
pub mod trace;

pub use baselines::{brute_force_l0, plain_iht_homotopy, OracleResult};
pub use datagen::{extract_patches, generate, normalize_columns, Distribution, GenSpec, Generated};
pub use error::{HcdError, Result};
pub use linalg::{column_dot, matvec, DenseMatrix, DenseVector, Residual};
pub use metrics::{compute_metrics, support_recovered, Metrics, PhiStar, PhiStarSource};
pub use pgm::GrayImage;
pub use problem::{Dictionary, Problem};
pub use scalar::Scalar;
pub use solver::{
    act_coo_des, hard_threshold, ite_act_upd, objective, solve_hcd, strong_rule_init, ActiveSet,
    Solution, SolveObserver, SolverParams, SolverState,
};
pub use trace::{RunTrace, StageTrace};

pub type Matrix = DenseMatrix<f64>;
pub type Vector = DenseVector<f64>;
pub type Problem64 = Problem<f64>;
pub type Params64 = SolverParams<f64>;
pub type State64 = SolverState<f64>;
pub type Solution64 = Solution<f64>;
pub type Oracle64 = OracleResult<f64>;

pub type Problem32 = Problem<f32>;
pub type Params32 = SolverParams<f32>;
pub type Solution32 = Solution<f32>;
