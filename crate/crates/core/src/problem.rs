use crate::error::{HcdError, Result};
use crate::linalg::{norm2, DenseMatrix, DenseVector};
use crate::scalar::Scalar;

/// A `d x K` sensing matrix with its column norms cached.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary<T> {
    matrix: DenseMatrix<T>,
    norms: Vec<T>,
}

impl<T: Scalar> Dictionary<T> {
    pub fn new(matrix: DenseMatrix<T>) -> Self {
        let norms = (0..matrix.cols()).map(|j| norm2(matrix.column(j))).collect();
        Self { matrix, norms }
    }

    pub fn matrix(&self) -> &DenseMatrix<T> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DenseMatrix<T> {
        self.matrix
    }

    /// Signal dimension `d`.
    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    /// Number of atoms `K`.
    pub fn atoms(&self) -> usize {
        self.matrix.cols()
    }

    pub fn column_norms(&self) -> &[T] {
        &self.norms
    }

    /// Fails on the first column whose norm deviates from one by more than
    /// the unit-norm tolerance of `T`.
    pub fn check_normalized(&self) -> Result<()> {
        let tol = T::unit_norm_tolerance();
        match self
            .norms
            .iter()
            .position(|n| (*n - T::one()).abs() > tol)
        {
            Some(column) => Err(HcdError::NotNormalized {
                column,
                norm: self.norms[column].as_f64(),
            }),
            None => Ok(()),
        }
    }
}

/// Dictionary, observed signal and (optionally) the generating sparse code.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem<T> {
    dictionary: Dictionary<T>,
    signal: DenseVector<T>,
    truth: Option<DenseVector<T>>,
}

impl<T: Scalar> Problem<T> {
    pub fn new(
        dictionary: Dictionary<T>,
        signal: DenseVector<T>,
        truth: Option<DenseVector<T>>,
    ) -> Result<Self> {
        if signal.len() != dictionary.dim() {
            return Err(HcdError::DimensionMismatch {
                context: "signal length",
                expected: dictionary.dim(),
                actual: signal.len(),
            });
        }
        if signal.iter().any(|v| !v.is_finite()) {
            return Err(HcdError::NonFinite("signal"));
        }
        if let Some(t) = &truth {
            if t.len() != dictionary.atoms() {
                return Err(HcdError::DimensionMismatch {
                    context: "truth length",
                    expected: dictionary.atoms(),
                    actual: t.len(),
                });
            }
            if t.iter().any(|v| !v.is_finite()) {
                return Err(HcdError::NonFinite("truth"));
            }
        }
        Ok(Self {
            dictionary,
            signal,
            truth,
        })
    }

    pub fn dictionary(&self) -> &Dictionary<T> {
        &self.dictionary
    }

    pub fn matrix(&self) -> &DenseMatrix<T> {
        self.dictionary.matrix()
    }

    pub fn signal(&self) -> &DenseVector<T> {
        &self.signal
    }

    pub fn truth(&self) -> Option<&DenseVector<T>> {
        self.truth.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.dictionary.dim()
    }

    pub fn atoms(&self) -> usize {
        self.dictionary.atoms()
    }

    pub(crate) fn check_alpha(&self, alpha: &[T]) -> Result<()> {
        if alpha.len() != self.atoms() {
            return Err(HcdError::DimensionMismatch {
                context: "coefficient vector",
                expected: self.atoms(),
                actual: alpha.len(),
            });
        }
        if alpha.iter().any(|v| !v.is_finite()) {
            return Err(HcdError::NonFinite("coefficient vector"));
        }
        Ok(())
    }

    /// Converts to another scalar type.
    pub fn cast<U: Scalar>(&self) -> Problem<U> {
        Problem {
            dictionary: Dictionary::new(self.dictionary.matrix.cast()),
            signal: self.signal.cast(),
            truth: self.truth.as_ref().map(DenseVector::cast),
        }
    }
}
