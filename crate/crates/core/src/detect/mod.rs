//! Cough event detection, phase segmentation and the wet/dry discriminator.

mod detector;
mod phases;
mod scoring;
mod segment;
mod wetdry;

use serde::{Deserialize, Serialize};

pub use detector::{detect_coughs, DetectorConfig};
pub use phases::segment_phases;
pub use scoring::{score_detections, DetectionScore, Interval};
pub use segment::{CoughPattern, CoughSegment, Phase, PhaseBoundary};
pub use wetdry::{classify_wet_dry, phase2_band_energies, WetDryLabel, WetDryResult, DRY_BAND_HZ, WET_BAND_HZ};

use segment::samples_to_ms;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseReport {
    pub name: String,
    pub start_ms: f64,
    pub end_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WetDrySummary {
    pub label: WetDryLabel,
    pub ratio: f64,
}

/// JSON export shape of a segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentReport {
    pub start_ms: f64,
    pub end_ms: f64,
    pub pattern: CoughPattern,
    pub phases: Vec<PhaseReport>,
    pub wet_dry: Option<WetDrySummary>,
}

impl SegmentReport {
    pub fn new(segment: &CoughSegment, wet_dry: Option<&WetDryResult>) -> Self {
        let fs = segment.sample_rate_hz;
        Self {
            start_ms: segment.start_ms(),
            end_ms: segment.end_ms(),
            pattern: segment.pattern,
            phases: segment
                .phases
                .iter()
                .map(|p| PhaseReport {
                    name: p.phase.name().to_string(),
                    start_ms: samples_to_ms(p.start, fs),
                    end_ms: samples_to_ms(p.end, fs),
                })
                .collect(),
            wet_dry: wet_dry.map(|w| WetDrySummary {
                label: w.label,
                ratio: w.ratio,
            }),
        }
    }

    pub fn interval(&self) -> Interval {
        Interval::new(self.start_ms, self.end_ms)
    }
}
