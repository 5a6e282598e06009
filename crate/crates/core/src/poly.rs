//! Truncated power series in the generating-function variable `z`.
//!
//! Coefficients are plain `f64`; every operation is a pure value
//! transformation. Mass discarded by an explicit degree cap is accounted in
//! `truncation_loss` (the discarded coefficients evaluated at `z = 1`) and
//! carried through subsequent operations as a diagnostic. Nothing is ever
//! renormalized: a normalization defect must stay visible to the caller.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolyError {
    /// `affine_compose` only supports substitutions `z -> a*z + b` that map
    /// probability arguments into [0, 1].
    #[error("affine substitution a={a}, b={b} outside the probability domain (need a, b >= 0 and a + b <= 1)")]
    AffineOutOfDomain { a: f64, b: f64 },
}

/// Polynomial `c_0 + c_1 z + ... + c_N z^N` with truncation accounting.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    coeffs: Vec<f64>,
    truncation_loss: f64,
}

impl Poly {
    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn constant(c: f64) -> Self {
        Self {
            coeffs: vec![c],
            truncation_loss: 0.0,
        }
    }

    /// `coeffs[m]` is the coefficient of `z^m`. An empty slice is the zero
    /// polynomial. Trailing zeros are kept as stored.
    pub fn from_coeffs(coeffs: Vec<f64>) -> Self {
        if coeffs.is_empty() {
            Self::zero()
        } else {
            Self {
                coeffs,
                truncation_loss: 0.0,
            }
        }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn truncation_loss(&self) -> f64 {
        self.truncation_loss
    }

    /// Coefficient of `z^m`; zero beyond the stored degree.
    pub fn coefficient(&self, m: usize) -> f64 {
        self.coeffs.get(m).copied().unwrap_or(0.0)
    }

    /// Horner evaluation at `x`.
    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut coeffs = vec![0.0; self.coeffs.len().max(other.coeffs.len())];
        for (m, c) in coeffs.iter_mut().enumerate() {
            *c = self.coefficient(m) + other.coefficient(m);
        }
        Poly {
            coeffs,
            truncation_loss: self.truncation_loss + other.truncation_loss,
        }
    }

    pub fn scale(&self, factor: f64) -> Poly {
        Poly {
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
            truncation_loss: self.truncation_loss * factor.abs(),
        }
    }

    /// Convolution product. With `max_degree = Some(n)` the coefficients
    /// above `z^n` are dropped and their total (the discarded mass at
    /// `z = 1`) is added to the result's `truncation_loss`.
    pub fn mul(&self, other: &Poly, max_degree: Option<usize>) -> Poly {
        let natural_degree = self.degree() + other.degree();
        let kept_degree = max_degree.map_or(natural_degree, |n| n.min(natural_degree));
        let mut coeffs = vec![0.0; kept_degree + 1];
        let mut discarded = 0.0;
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                if i + j <= kept_degree {
                    coeffs[i + j] += a * b;
                } else {
                    discarded += a * b;
                }
            }
        }
        Poly {
            coeffs,
            truncation_loss: self.truncation_loss + other.truncation_loss + discarded,
        }
    }

    /// Substitute `z -> a*z + b`, exactly, via a Horner-style rebuild. The
    /// stored length (hence degree bound) is unchanged.
    pub fn affine_compose(&self, a: f64, b: f64) -> Result<Poly, PolyError> {
        if !(a >= 0.0 && b >= 0.0 && a + b <= 1.0 + 1e-12) {
            return Err(PolyError::AffineOutOfDomain { a, b });
        }
        let n = self.degree();
        let mut result = vec![self.coeffs[n]];
        for k in (0..n).rev() {
            // result <- result * (a z + b) + c_k
            let mut next = vec![0.0; result.len() + 1];
            for (m, &r) in result.iter().enumerate() {
                next[m] += b * r;
                next[m + 1] += a * r;
            }
            next[0] += self.coeffs[k];
            result = next;
        }
        Ok(Poly {
            coeffs: result,
            truncation_loss: self.truncation_loss,
        })
    }

    /// `k`-th formal derivative.
    pub fn derivative(&self, k: usize) -> Poly {
        if k == 0 {
            return self.clone();
        }
        if k > self.degree() {
            return Poly {
                coeffs: vec![0.0],
                truncation_loss: self.truncation_loss,
            };
        }
        let coeffs = (0..=self.degree() - k)
            .map(|m| self.coeffs[m + k] * falling_factorial(m + k, k))
            .collect();
        Poly {
            coeffs,
            truncation_loss: self.truncation_loss,
        }
    }
}

/// `n (n-1) ... (n-k+1)` as a float.
pub(crate) fn falling_factorial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).map(|i| (n - i) as f64).product()
}

/// One polynomial per background state: the state-dependent generating
/// functions of the customer count. Summing the entries gives the overall
/// generating function.
#[derive(Debug, Clone, PartialEq)]
pub struct PgfVector {
    entries: Vec<Poly>,
}

impl PgfVector {
    /// Constant vector, one degree-zero polynomial per entry.
    pub fn from_constants(values: &[f64]) -> Self {
        Self {
            entries: values.iter().map(|&v| Poly::constant(v)).collect(),
        }
    }

    pub fn from_entries(entries: Vec<Poly>) -> Self {
        Self { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[Poly] {
        &self.entries
    }

    pub fn entry(&self, j: usize) -> &Poly {
        &self.entries[j]
    }

    /// Sum over background states.
    pub fn sum(&self) -> Poly {
        self.entries.iter().fold(Poly::zero(), |acc, p| acc.add(p))
    }

    pub fn total_truncation_loss(&self) -> f64 {
        self.entries.iter().map(Poly::truncation_loss).sum()
    }
}
