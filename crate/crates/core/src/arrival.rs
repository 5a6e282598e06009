//! Finite-state discrete-time batch Markovian arrival process.
//!
//! The process is specified by matrices `D_0 .. D_L` where entry `(i, j)` of
//! `D_l` is the probability that one slot transition moves the background
//! chain from state `i` to state `j` while a batch of `l` customers arrives.
//! Their sum `P = D_0 + ... + D_L` is the transition matrix of the background
//! chain and must be row-stochastic. Batch support is required to be finite:
//! analytically infinite batch laws must be pre-truncated by the caller, and
//! [`validate_parts`] reports the resulting row-sum defect so the caller
//! controls the tail.

use std::fmt;

use nalgebra::{DMatrix, RowDVector};
use thiserror::Error;

/// Row sums of `P` and the initial distribution must be 1 within this bound.
pub const STOCHASTICITY_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model: {0}")]
    Invalid(ValidationReport),
    #[error("probability {value} outside [0, 1]")]
    InvalidProbability { value: f64 },
    #[error("generating function argument {x} outside [0, 1]")]
    EvalOutOfDomain { x: f64 },
}

/// A single defect found by validation, with its location and magnitude.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NoBatchMatrices,
    ShapeMismatch {
        matrix: usize,
        rows: usize,
        cols: usize,
        expected: usize,
    },
    EntryOutOfRange {
        matrix: usize,
        row: usize,
        col: usize,
        value: f64,
    },
    RowSumDefect {
        row: usize,
        sum: f64,
    },
    InitialLengthMismatch {
        len: usize,
        expected: usize,
    },
    InitialEntryOutOfRange {
        index: usize,
        value: f64,
    },
    InitialSumDefect {
        sum: f64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoBatchMatrices => write!(f, "no batch matrices given"),
            Violation::ShapeMismatch {
                matrix,
                rows,
                cols,
                expected,
            } => write!(
                f,
                "batch matrix {matrix} is {rows}x{cols}, expected {expected}x{expected}"
            ),
            Violation::EntryOutOfRange {
                matrix,
                row,
                col,
                value,
            } => write!(
                f,
                "batch matrix {matrix} entry ({row}, {col}) = {value} outside [0, 1]"
            ),
            Violation::RowSumDefect { row, sum } => write!(
                f,
                "row {row} of the summed batch matrices has sum {sum} (defect {:.3e})",
                (sum - 1.0).abs()
            ),
            Violation::InitialLengthMismatch { len, expected } => {
                write!(
                    f,
                    "initial distribution has {len} entries, expected {expected}"
                )
            }
            Violation::InitialEntryOutOfRange { index, value } => {
                write!(
                    f,
                    "initial distribution entry {index} = {value} outside [0, 1]"
                )
            }
            Violation::InitialSumDefect { sum } => write!(
                f,
                "initial distribution sums to {sum} (defect {:.3e})",
                (sum - 1.0).abs()
            ),
        }
    }
}

/// Outcome of validating model data: empty means well-formed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return write!(f, "ok");
        }
        let msgs: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", msgs.join("; "))
    }
}

/// Check raw model data against every structural invariant. Usable before a
/// [`DBmapModel`] exists, so defective inputs can be reported in full.
pub fn validate_parts(batch_matrices: &[DMatrix<f64>], initial_dist: &[f64]) -> ValidationReport {
    let mut violations = Vec::new();
    if batch_matrices.is_empty() {
        violations.push(Violation::NoBatchMatrices);
        return ValidationReport { violations };
    }
    let k = batch_matrices[0].nrows();
    for (l, m) in batch_matrices.iter().enumerate() {
        if m.nrows() != k || m.ncols() != k {
            violations.push(Violation::ShapeMismatch {
                matrix: l,
                rows: m.nrows(),
                cols: m.ncols(),
                expected: k,
            });
        }
    }
    if !violations.is_empty() {
        return ValidationReport { violations };
    }
    for (l, m) in batch_matrices.iter().enumerate() {
        for row in 0..k {
            for col in 0..k {
                let value = m[(row, col)];
                if !(0.0..=1.0).contains(&value) || !value.is_finite() {
                    violations.push(Violation::EntryOutOfRange {
                        matrix: l,
                        row,
                        col,
                        value,
                    });
                }
            }
        }
    }
    for row in 0..k {
        let sum: f64 = batch_matrices
            .iter()
            .map(|m| m.row(row).iter().sum::<f64>())
            .sum();
        if (sum - 1.0).abs() > STOCHASTICITY_TOL {
            violations.push(Violation::RowSumDefect { row, sum });
        }
    }
    if initial_dist.len() != k {
        violations.push(Violation::InitialLengthMismatch {
            len: initial_dist.len(),
            expected: k,
        });
    } else {
        for (index, &value) in initial_dist.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) || !value.is_finite() {
                violations.push(Violation::InitialEntryOutOfRange { index, value });
            }
        }
        let sum: f64 = initial_dist.iter().sum();
        if (sum - 1.0).abs() > STOCHASTICITY_TOL {
            violations.push(Violation::InitialSumDefect { sum });
        }
    }
    ValidationReport { violations }
}

/// Validated batch Markovian arrival process. Immutable after construction;
/// safe to share across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct DBmapModel {
    batch_matrices: Vec<DMatrix<f64>>,
    initial_dist: RowDVector<f64>,
    transition: DMatrix<f64>,
}

impl DBmapModel {
    /// Build from explicit batch matrices `[D_0, ..., D_L]` and the initial
    /// state distribution. Rejects any input that fails validation.
    pub fn from_matrices(
        batch_matrices: Vec<DMatrix<f64>>,
        initial_dist: Vec<f64>,
    ) -> Result<Self, ModelError> {
        let report = validate_parts(&batch_matrices, &initial_dist);
        if !report.is_ok() {
            return Err(ModelError::Invalid(report));
        }
        let k = batch_matrices[0].nrows();
        let mut transition = DMatrix::zeros(k, k);
        for m in &batch_matrices {
            transition += m;
        }
        Ok(Self {
            batch_matrices,
            initial_dist: RowDVector::from_row_slice(&initial_dist),
            transition,
        })
    }

    /// Single-state process emitting one customer per slot with probability
    /// `p`: `D_0 = [1 - p]`, `D_1 = [p]`.
    pub fn from_bernoulli(p: f64) -> Result<Self, ModelError> {
        if !(0.0..=1.0).contains(&p) || !p.is_finite() {
            return Err(ModelError::InvalidProbability { value: p });
        }
        Self::from_matrices(
            vec![
                DMatrix::from_element(1, 1, 1.0 - p),
                DMatrix::from_element(1, 1, p),
            ],
            vec![1.0],
        )
    }

    /// Markov-modulated Bernoulli process: batches of size 0 or 1 only.
    pub fn from_mmbp(
        d0: DMatrix<f64>,
        d1: DMatrix<f64>,
        initial_dist: Vec<f64>,
    ) -> Result<Self, ModelError> {
        Self::from_matrices(vec![d0, d1], initial_dist)
    }

    pub fn num_states(&self) -> usize {
        self.initial_dist.len()
    }

    /// Largest batch size with a stored matrix.
    pub fn max_batch_size(&self) -> usize {
        self.batch_matrices.len() - 1
    }

    pub fn batch_matrices(&self) -> &[DMatrix<f64>] {
        &self.batch_matrices
    }

    /// `d_ij(l)`: probability of an `i -> j` transition with a size-`l` batch.
    pub fn batch_prob(&self, i: usize, j: usize, l: usize) -> f64 {
        self.batch_matrices.get(l).map_or(0.0, |m| m[(i, j)])
    }

    pub fn initial_dist(&self) -> &RowDVector<f64> {
        &self.initial_dist
    }

    /// Background transition matrix `P` (the batch matrices summed).
    pub fn transition_matrix(&self) -> &DMatrix<f64> {
        &self.transition
    }

    /// Re-check all invariants on the stored data.
    pub fn validate(&self) -> ValidationReport {
        validate_parts(&self.batch_matrices, self.initial_dist.as_slice())
    }

    /// Matrix generating function `D(x) = sum_l D_l x^l` for `x` in [0, 1].
    pub fn eval_pgf_matrix(&self, x: f64) -> Result<DMatrix<f64>, ModelError> {
        if !(0.0..=1.0).contains(&x) || !x.is_finite() {
            return Err(ModelError::EvalOutOfDomain { x });
        }
        let k = self.num_states();
        let mut acc = DMatrix::zeros(k, k);
        let mut x_pow = 1.0;
        for m in &self.batch_matrices {
            acc += m * x_pow;
            x_pow *= x;
        }
        Ok(acc)
    }

    /// `k`-th derivative of `D` at 1: entry `(i, j)` is
    /// `sum_{l >= k} l (l-1) ... (l-k+1) d_ij(l)`, the factorial-moment
    /// matrix of the batch-size law. `k = 0` returns `P`.
    pub fn derivative_matrix_at_one(&self, k: usize) -> DMatrix<f64> {
        let dim = self.num_states();
        let mut acc = DMatrix::zeros(dim, dim);
        for (l, m) in self.batch_matrices.iter().enumerate().skip(k) {
            acc += m * crate::poly::falling_factorial(l, k);
        }
        acc
    }
}
