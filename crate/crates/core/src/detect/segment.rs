use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Explosive,
    Intermediate,
    Voiced,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Explosive => "explosive",
            Phase::Intermediate => "intermediate",
            Phase::Voiced => "voiced",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoughPattern {
    ThreePhase,
    TwoPhase,
    Peal,
}

impl CoughPattern {
    pub const ALL: [CoughPattern; 3] = [CoughPattern::ThreePhase, CoughPattern::TwoPhase, CoughPattern::Peal];

    pub fn name(self) -> &'static str {
        match self {
            CoughPattern::ThreePhase => "three_phase",
            CoughPattern::TwoPhase => "two_phase",
            CoughPattern::Peal => "peal",
        }
    }

    pub fn index(self) -> usize {
        match self {
            CoughPattern::ThreePhase => 0,
            CoughPattern::TwoPhase => 1,
            CoughPattern::Peal => 2,
        }
    }
}

/// Sample range `[start, end)` of one cough phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseBoundary {
    pub phase: Phase,
    pub start: usize,
    pub end: usize,
}

/// A detected (or synthesized ground-truth) cough event, `[start_sample, end_sample)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoughSegment {
    pub start_sample: usize,
    pub end_sample: usize,
    pub sample_rate_hz: u32,
    pub phases: Vec<PhaseBoundary>,
    pub pattern: CoughPattern,
    pub peak_amplitude: f64,
    pub duration_ms: f64,
    /// Set when the segment came from splitting an over-long detection.
    #[serde(default)]
    pub split: bool,
}

impl CoughSegment {
    pub fn phase(&self, phase: Phase) -> Option<&PhaseBoundary> {
        self.phases.iter().find(|p| p.phase == phase)
    }

    pub fn start_ms(&self) -> f64 {
        samples_to_ms(self.start_sample, self.sample_rate_hz)
    }

    pub fn end_ms(&self) -> f64 {
        samples_to_ms(self.end_sample, self.sample_rate_hz)
    }

    pub fn len(&self) -> usize {
        self.end_sample - self.start_sample
    }

    pub fn is_empty(&self) -> bool {
        self.end_sample <= self.start_sample
    }

    /// Checks ordering, containment and the pattern/voicing relation.
    pub fn is_consistent(&self) -> bool {
        if self.start_sample >= self.end_sample {
            return false;
        }
        if self.phases.first().map(|p| p.phase) != Some(Phase::Explosive) {
            return false;
        }
        let mut cursor = self.start_sample;
        for p in &self.phases {
            if p.start < cursor || p.start >= p.end || p.end > self.end_sample {
                return false;
            }
            cursor = p.end;
        }
        let voiced = self.phase(Phase::Voiced).is_some();
        voiced == (self.pattern == CoughPattern::ThreePhase)
    }
}

pub(crate) fn samples_to_ms(samples: usize, sample_rate_hz: u32) -> f64 {
    samples as f64 * 1000.0 / sample_rate_hz as f64
}
