//! Machine-readable emission with 17 significant digits, so downstream
//! comparisons are never limited by printing.

use std::io::{self, Write};

use serde::Serialize;
use transq_core::exact::TransientResult;
use transq_core::sim::{EffectiveCheckReport, EmpiricalResult};

/// JSON formatter printing every float as `d.dddddddddddddddde±x`
/// (17 significant digits, enough to round-trip any f64 exactly).
struct Sci17;

impl serde_json::ser::Formatter for Sci17 {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + Write,
    {
        write!(writer, "{value:.16e}")
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sci17);
    value
        .serialize(&mut ser)
        .expect("in-memory serialization cannot fail");
    let mut text = String::from_utf8(buf).expect("serializer emits utf-8");
    text.push('\n');
    text
}

#[derive(Debug, Serialize)]
pub struct SolveOutput {
    pub time: u64,
    pub mean: f64,
    pub variance: f64,
    pub fano: Option<f64>,
    pub factorial_moments: Vec<f64>,
    pub distribution: Vec<f64>,
    pub normalization_defect: f64,
    pub truncation_loss: f64,
}

impl From<&TransientResult> for SolveOutput {
    fn from(r: &TransientResult) -> Self {
        Self {
            time: r.time,
            mean: r.mean,
            variance: r.variance,
            fano: r.fano,
            factorial_moments: r.factorial_moments.clone(),
            distribution: r.distribution.clone(),
            normalization_defect: r.normalization_defect,
            truncation_loss: r.truncation_loss,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct EffectiveChecksOutput {
    pub runs: u64,
    pub terminal_identity_failures: u64,
    pub bound_failures: u64,
    pub monotonicity_failures: u64,
    pub clean: bool,
}

impl From<&EffectiveCheckReport> for EffectiveChecksOutput {
    fn from(r: &EffectiveCheckReport) -> Self {
        Self {
            runs: r.runs,
            terminal_identity_failures: r.terminal_identity_failures,
            bound_failures: r.bound_failures,
            monotonicity_failures: r.monotonicity_failures,
            clean: r.is_clean(),
        }
    }
}

/// Worker count is deliberately not echoed: the estimate is independent of
/// the partitioning, and the emitted bytes should be too.
#[derive(Debug, Serialize)]
pub struct SimulateOutput {
    pub time: u64,
    pub runs: u64,
    pub seed: u64,
    pub mean: f64,
    pub mean_se: f64,
    pub second_factorial_moment: f64,
    pub second_factorial_moment_se: f64,
    pub probabilities: Vec<f64>,
    pub standard_errors: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub effective_checks: Option<EffectiveChecksOutput>,
}

impl From<&EmpiricalResult> for SimulateOutput {
    fn from(r: &EmpiricalResult) -> Self {
        Self {
            time: r.horizon,
            runs: r.n_runs,
            seed: r.seed,
            mean: r.mean,
            mean_se: r.mean_se,
            second_factorial_moment: r.second_factorial_moment,
            second_factorial_moment_se: r.second_factorial_moment_se,
            probabilities: r.probabilities.clone(),
            standard_errors: r.standard_errors.clone(),
            effective_checks: None,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct StationaryOutput {
    pub t_converged: u64,
    pub last_tv: f64,
    pub distribution: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct MminfOutput {
    pub p: f64,
    pub alpha: f64,
    pub time: u64,
    pub mean: f64,
    pub variance: f64,
    pub fano: Option<f64>,
    pub coefficients: Vec<f64>,
}

/// `m,probability` rows.
pub fn distribution_csv(distribution: &[f64]) -> String {
    let mut out = String::from("m,probability\n");
    for (m, &p) in distribution.iter().enumerate() {
        out.push_str(&format!("{m},{p:.16e}\n"));
    }
    out
}

/// `m,probability,standard_error` rows.
pub fn empirical_csv(probabilities: &[f64], standard_errors: &[f64]) -> String {
    let mut out = String::from("m,probability,standard_error\n");
    for (m, (&p, &se)) in probabilities.iter().zip(standard_errors.iter()).enumerate() {
        out.push_str(&format!("{m},{p:.16e},{se:.16e}\n"));
    }
    out
}
