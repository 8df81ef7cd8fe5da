use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use coughpoc_core::detect::SegmentReport;
use coughpoc_core::features::SensorRecord;
use serde::{Deserialize, Serialize};

pub const MAX_REGION_LEN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportStatus {
    Draft,
    Submitted,
}

impl ReportStatus {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "draft" => Some(ReportStatus::Draft),
            "submitted" => Some(ReportStatus::Submitted),
            _ => None,
        }
    }
}

/// The `meta` part of an upload. Unknown fields are rejected so that no
/// identifying data can slip into a record.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UploadMeta {
    #[serde(default)]
    pub temp_c: Option<f64>,
    #[serde(default)]
    pub airflow_peak_lps: Option<f64>,
    #[serde(default)]
    pub airflow_volume_l: Option<f64>,
    /// Coarse free-text region, kept only with `consent_location = true`.
    #[serde(default)]
    pub region: Option<String>,
    #[serde(default)]
    pub consent_location: bool,
}

impl UploadMeta {
    pub fn sensor(&self) -> SensorRecord {
        SensorRecord {
            body_temp_c: self.temp_c,
            airflow_peak_lps: self.airflow_peak_lps,
            airflow_volume_l: self.airflow_volume_l,
        }
    }

    /// The region to store, if consent was given.
    pub fn consented_region(&self) -> Option<String> {
        if !self.consent_location {
            return None;
        }
        self.region
            .as_ref()
            .map(|r| r.trim().to_string())
            .filter(|r| !r.is_empty())
    }
}

/// One analysed upload. Holds no personal identifiers: the clip is referenced
/// by content hash and the location only as a consented coarse region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisRecord {
    pub record_id: String,
    pub created_at: DateTime<Utc>,
    /// SHA-256 of the stored WAV bytes.
    pub clip_ref: String,
    pub clip_duration_s: f64,
    pub sensor: SensorRecord,
    pub segments: Vec<SegmentReport>,
    pub memberships: Option<BTreeMap<String, f64>>,
    pub diagnosis: Option<String>,
    pub status: ReportStatus,
    #[serde(default)]
    pub submitted_at: Option<DateTime<Utc>>,
    pub consent_location: Option<String>,
    pub model_version: Option<String>,
    /// Hash of clip and metadata that makes uploads idempotent.
    pub upload_key: String,
}

pub fn new_record_id() -> String {
    format!("{:032x}", rand::random::<u128>())
}
