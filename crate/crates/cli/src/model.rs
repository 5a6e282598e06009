//! The JSON model file: one canonical schema feeding every engine.
//!
//! ```json
//! {
//!   "states": 2,
//!   "batches": [ [[..], [..]], ... ],   // K x K matrix per batch size l = 0..L
//!   "initial": [0.5, 0.5],
//!   "service": {"type": "geometric", "alpha": 0.5}
//! }
//! ```
//!
//! Service objects: `geometric {alpha}`, `shifted_poisson {lambda}`,
//! `deterministic {d}`, `pmf {q: [..]}`.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use transq_core::arrival::{validate_parts, DBmapModel};
use transq_core::service::ServiceLaw;

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed model file: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("invalid model: {0}")]
    Invalid(String),
}

impl LoadError {
    /// Exit code under the CLI contract: 3 for unreadable or unparseable
    /// input, 2 for a well-formed file describing an invalid model.
    pub fn exit_code(&self) -> i32 {
        match self {
            LoadError::Io { .. } | LoadError::Malformed(_) => 3,
            LoadError::Invalid(_) => 2,
        }
    }
}

/// Mirror of the on-disk document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub states: usize,
    /// `batches[l]` is the K x K matrix for batch size `l`, row major.
    pub batches: Vec<Vec<Vec<f64>>>,
    pub initial: Vec<f64>,
    pub service: ServiceSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServiceSpec {
    Geometric { alpha: f64 },
    ShiftedPoisson { lambda: f64 },
    Deterministic { d: u64 },
    Pmf { q: Vec<f64> },
}

pub fn parse_file(path: &Path) -> Result<ModelFile, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(serde_json::from_str(&text)?)
}

/// Assemble the batch matrices, rejecting ragged or mis-sized data.
pub fn batch_matrices(file: &ModelFile) -> Result<Vec<DMatrix<f64>>, LoadError> {
    let k = file.states;
    if k == 0 {
        return Err(LoadError::Invalid("states must be at least 1".into()));
    }
    if file.batches.is_empty() {
        return Err(LoadError::Invalid("batches must not be empty".into()));
    }
    let mut mats = Vec::with_capacity(file.batches.len());
    for (l, rows) in file.batches.iter().enumerate() {
        if rows.len() != k || rows.iter().any(|r| r.len() != k) {
            return Err(LoadError::Invalid(format!(
                "batch matrix {l} is not {k}x{k}"
            )));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        mats.push(DMatrix::from_row_slice(k, k, &flat));
    }
    Ok(mats)
}

pub fn service_law(spec: &ServiceSpec) -> Result<ServiceLaw, LoadError> {
    let law = match spec {
        ServiceSpec::Geometric { alpha } => ServiceLaw::geometric(*alpha),
        ServiceSpec::ShiftedPoisson { lambda } => ServiceLaw::shifted_poisson(*lambda),
        ServiceSpec::Deterministic { d } => ServiceLaw::deterministic(*d),
        ServiceSpec::Pmf { q } => ServiceLaw::explicit_pmf(q.clone()),
    };
    law.map_err(|e| LoadError::Invalid(e.to_string()))
}

/// One-shot load for engine commands: parse, validate, construct.
pub fn load(path: &Path) -> Result<(DBmapModel, ServiceLaw), LoadError> {
    let file = parse_file(path)?;
    let mats = batch_matrices(&file)?;
    let report = validate_parts(&mats, &file.initial);
    if !report.is_ok() {
        return Err(LoadError::Invalid(report.to_string()));
    }
    let model = DBmapModel::from_matrices(mats, file.initial.clone())
        .map_err(|e| LoadError::Invalid(e.to_string()))?;
    let law = service_law(&file.service)?;
    Ok((model, law))
}

/// Re-serialize a constructed model into the canonical document form.
pub fn dump(model: &DBmapModel, law: &ServiceLaw) -> ModelFile {
    let k = model.num_states();
    let batches = model
        .batch_matrices()
        .iter()
        .map(|m| {
            (0..k)
                .map(|i| (0..k).map(|j| m[(i, j)]).collect())
                .collect()
        })
        .collect();
    let service = match law {
        ServiceLaw::Geometric { alpha } => ServiceSpec::Geometric { alpha: *alpha },
        ServiceLaw::ShiftedPoisson { lambda } => ServiceSpec::ShiftedPoisson { lambda: *lambda },
        ServiceLaw::Deterministic { slots } => ServiceSpec::Deterministic { d: *slots },
        ServiceLaw::ExplicitPmf { probs } => ServiceSpec::Pmf { q: probs.clone() },
    };
    ModelFile {
        states: k,
        batches,
        initial: model.initial_dist().iter().copied().collect(),
        service,
    }
}
