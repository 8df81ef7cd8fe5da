use serde::{Deserialize, Serialize};

use super::vector::{feature_names, FeatureVector, FEATURE_LEN};
use crate::error::{Error, Result};

pub const SENSOR_LEN: usize = 3;
pub const FUSED_LEN: usize = FEATURE_LEN + 2 * SENSOR_LEN;

pub const MIN_BODY_TEMP_C: f64 = 30.0;
pub const MAX_BODY_TEMP_C: f64 = 45.0;

/// Optional point-of-care sensor readings accompanying a clip.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SensorRecord {
    #[serde(rename = "temp_c", default)]
    pub body_temp_c: Option<f64>,
    #[serde(default)]
    pub airflow_peak_lps: Option<f64>,
    #[serde(default)]
    pub airflow_volume_l: Option<f64>,
}

impl SensorRecord {
    pub fn validate(&self) -> Result<()> {
        if let Some(t) = self.body_temp_c {
            if !(MIN_BODY_TEMP_C..=MAX_BODY_TEMP_C).contains(&t) {
                return Err(Error::Validation(format!(
                    "body temperature {t} °C outside {MIN_BODY_TEMP_C}..={MAX_BODY_TEMP_C}"
                )));
            }
        }
        for (name, v) in [
            ("airflow_peak_lps", self.airflow_peak_lps),
            ("airflow_volume_l", self.airflow_volume_l),
        ] {
            if let Some(v) = v {
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(Error::Validation(format!(
                        "{name} must be a finite value >= 0, got {v}"
                    )));
                }
            }
        }
        Ok(())
    }

    fn slots(&self) -> [Option<f64>; SENSOR_LEN] {
        [self.body_temp_c, self.airflow_peak_lps, self.airflow_volume_l]
    }
}

/// Acoustic features, then sensor values (0 when missing), then a presence mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusedVector(pub Vec<f64>);

impl FusedVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

pub fn fused_names() -> Vec<String> {
    let mut names = feature_names();
    names.extend(
        [
            "temp_c",
            "airflow_peak_lps",
            "airflow_volume_l",
            "has_temp_c",
            "has_airflow_peak_lps",
            "has_airflow_volume_l",
        ]
        .map(String::from),
    );
    names
}

pub fn fuse(features: &FeatureVector, sensor: &SensorRecord) -> Result<FusedVector> {
    sensor.validate()?;
    let mut v = features.to_vec();
    let slots = sensor.slots();
    v.extend(slots.iter().map(|s| s.unwrap_or(0.0)));
    v.extend(slots.iter().map(|s| if s.is_some() { 1.0 } else { 0.0 }));
    debug_assert_eq!(v.len(), FUSED_LEN);
    Ok(FusedVector(v))
}
