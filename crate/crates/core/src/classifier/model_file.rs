//! Portable model file.
//!
//! Byte layout:
//!
//! | offset | size | content |
//! |--------|------|---------|
//! | 0      | 6    | ASCII `CPOCM1` |
//! | 6      | 4    | header length `H`, u32 little-endian |
//! | 10     | H    | UTF-8 JSON header ([`ModelHeader`]) |
//! | 10 + H | 8·P  | `P = header.param_count` parameters, f64 little-endian |
//!
//! The header's `params_sha256` is the hex SHA-256 of the parameter bytes.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::cnn::{CnnConfig, CnnModel};
use super::metrics::Metrics;
use super::mlp::{param_count_for, MlpModel};
use super::network::{MembershipVector, Network};
use super::train::TrainConfig;
use crate::error::{Error, Result};
use crate::features::Normalizer;

pub const MAGIC: &[u8; 6] = b"CPOCM1";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Architecture {
    Mlp { sizes: Vec<usize> },
    Cnn(CnnConfig),
}

impl Architecture {
    pub fn param_count(&self) -> usize {
        match self {
            Architecture::Mlp { sizes } => param_count_for(sizes),
            Architecture::Cnn(cfg) => cfg.param_count(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Architecture::Mlp { .. } => "mlp",
            Architecture::Cnn(_) => "cnn",
        }
    }
}

/// A trained network of either architecture.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Mlp(MlpModel),
    Cnn(CnnModel),
}

impl Model {
    pub fn architecture(&self) -> Architecture {
        match self {
            Model::Mlp(m) => Architecture::Mlp {
                sizes: m.sizes().to_vec(),
            },
            Model::Cnn(m) => Architecture::Cnn(m.config().clone()),
        }
    }

    pub fn from_params(arch: &Architecture, params: Vec<f64>) -> Result<Self> {
        Ok(match arch {
            Architecture::Mlp { sizes } => Model::Mlp(MlpModel::from_params(sizes, params)?),
            Architecture::Cnn(cfg) => Model::Cnn(CnnModel::from_params(cfg.clone(), params)?),
        })
    }

    fn inner(&self) -> &dyn Network {
        match self {
            Model::Mlp(m) => m,
            Model::Cnn(m) => m,
        }
    }

    fn inner_mut(&mut self) -> &mut dyn Network {
        match self {
            Model::Mlp(m) => m,
            Model::Cnn(m) => m,
        }
    }
}

impl Network for Model {
    fn input_len(&self) -> usize {
        self.inner().input_len()
    }

    fn n_classes(&self) -> usize {
        self.inner().n_classes()
    }

    fn params(&self) -> &[f64] {
        self.inner().params()
    }

    fn params_mut(&mut self) -> &mut [f64] {
        self.inner_mut().params_mut()
    }

    fn logits(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.inner().logits(input)
    }

    fn accumulate_gradient(&self, input: &[f64], label: usize, scale: f64, grad: &mut [f64]) -> Result<f64> {
        self.inner().accumulate_gradient(input, label, scale, grad)
    }
}

/// How a model was produced; enough to rerun the training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingProvenance {
    pub config: TrainConfig,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub final_loss: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_metrics: Option<Metrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelHeader {
    pub format_version: u32,
    pub architecture: Architecture,
    pub classes: Vec<String>,
    /// Names of the input columns, when the input is a feature vector.
    #[serde(default)]
    pub input_names: Vec<String>,
    pub normalizer: Option<Normalizer>,
    pub param_count: usize,
    pub params_sha256: String,
    #[serde(default)]
    pub provenance: Option<TrainingProvenance>,
}

/// A model plus everything needed to apply it to raw inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub model: Model,
    pub classes: Vec<String>,
    pub input_names: Vec<String>,
    pub normalizer: Option<Normalizer>,
    pub provenance: Option<TrainingProvenance>,
}

fn params_digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl ModelBundle {
    pub fn new(model: Model, classes: Vec<String>, normalizer: Option<Normalizer>) -> Result<Self> {
        if classes.len() != model.n_classes() {
            return Err(Error::shape(
                format!("{} class names", model.n_classes()),
                classes.len(),
            ));
        }
        if let Some(n) = &normalizer {
            if n.dim() != model.input_len() {
                return Err(Error::shape(
                    format!("normalizer of dim {}", model.input_len()),
                    n.dim(),
                ));
            }
        }
        Ok(Self {
            model,
            classes,
            input_names: Vec::new(),
            normalizer,
            provenance: None,
        })
    }

    /// Normalizes a raw input row (when a normalizer is attached) and returns
    /// class memberships.
    pub fn predict_memberships(&self, raw: &[f64]) -> Result<MembershipVector> {
        match &self.normalizer {
            Some(n) => self.model.predict_memberships(&n.apply(raw)?),
            None => self.model.predict_memberships(raw),
        }
    }

    /// Short identifier: architecture plus the first 12 hex digits of the parameter hash.
    pub fn version(&self) -> String {
        let digest = params_digest(&param_bytes(self.model.params()));
        format!("{}-{}", self.model.architecture().name(), &digest[..12])
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let params = param_bytes(self.model.params());
        let header = ModelHeader {
            format_version: FORMAT_VERSION,
            architecture: self.model.architecture(),
            classes: self.classes.clone(),
            input_names: self.input_names.clone(),
            normalizer: self.normalizer.clone(),
            param_count: self.model.params().len(),
            params_sha256: params_digest(&params),
            provenance: self.provenance.clone(),
        };
        let json = serde_json::to_vec(&header).expect("model header serializes");
        let mut out = Vec::with_capacity(MAGIC.len() + 4 + json.len() + params.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        out.extend_from_slice(&params);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < MAGIC.len() + 4 || &bytes[..MAGIC.len()] != MAGIC {
            return Err(Error::Format("not a model file (bad magic bytes)".into()));
        }
        let len_at = MAGIC.len();
        let header_len = u32::from_le_bytes(bytes[len_at..len_at + 4].try_into().expect("4 bytes")) as usize;
        let body = &bytes[len_at + 4..];
        if body.len() < header_len {
            return Err(Error::Format("truncated model header".into()));
        }
        let value: serde_json::Value =
            serde_json::from_slice(&body[..header_len]).map_err(|e| Error::Format(format!("model header: {e}")))?;
        let found = value.get("format_version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if found != FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                found,
                expected: FORMAT_VERSION,
            });
        }
        let header: ModelHeader =
            serde_json::from_value(value).map_err(|e| Error::Format(format!("model header: {e}")))?;
        let raw = &body[header_len..];
        if header.param_count != header.architecture.param_count() || raw.len() != header.param_count * 8 {
            return Err(Error::Format(format!(
                "expected {} parameters for the architecture, file holds {} bytes",
                header.architecture.param_count(),
                raw.len()
            )));
        }
        if params_digest(raw) != header.params_sha256 {
            return Err(Error::Format("parameter checksum mismatch".into()));
        }
        let params = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let model = Model::from_params(&header.architecture, params)?;
        let mut bundle = Self::new(model, header.classes, header.normalizer)?;
        bundle.input_names = header.input_names;
        bundle.provenance = header.provenance;
        Ok(bundle)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

fn param_bytes(params: &[f64]) -> Vec<u8> {
    params.iter().flat_map(|p| p.to_le_bytes()).collect()
}
