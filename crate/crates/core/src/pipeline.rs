//! End-to-end analysis: resample, detect, segment phases, wet/dry, features,
//! and classification; plus manifest-level training and evaluation.

use std::collections::HashSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{
    evaluate, train, CnnConfig, CnnModel, MembershipVector, Metrics, MlpModel, Model, ModelBundle, TrainConfig,
    TrainReport, TrainingProvenance, DEFAULT_HIDDEN,
};
use crate::detect::{classify_wet_dry, detect_coughs, CoughSegment, DetectorConfig, SegmentReport, WetDryResult};
use crate::dsp::{load_wav, resample, AudioClip, FrameSpec, MelAnalyzer, CANONICAL_RATE_HZ, LOG_ENERGY_FLOOR};
use crate::error::{Error, Result};
use crate::features::{
    fuse, fused_names, split_dataset, DatasetManifest, FeatureExtractor, FeatureVector, Normalizer, SensorRecord,
    FUSED_LEN,
};

/// Everything the pipeline learns about one clip before classification.
#[derive(Debug, Clone)]
pub struct ClipAnalysis {
    /// The clip at the canonical rate.
    pub clip: AudioClip,
    pub segments: Vec<CoughSegment>,
    /// Wet/dry verdict per segment; `None` when a segment has no phase 2.
    pub wet_dry: Vec<Option<WetDryResult>>,
    pub features: Vec<FeatureVector>,
}

impl ClipAnalysis {
    pub fn reports(&self) -> Vec<SegmentReport> {
        self.segments
            .iter()
            .zip(&self.wet_dry)
            .map(|(s, w)| SegmentReport::new(s, w.as_ref()))
            .collect()
    }

    /// One fused feature row per cough.
    pub fn fused_rows(&self, sensor: &SensorRecord) -> Result<Vec<Vec<f64>>> {
        self.features.iter().map(|f| Ok(fuse(f, sensor)?.0)).collect()
    }

    /// One fixed-size log-mel image per cough.
    pub fn spectrogram_rows(&self, config: &CnnConfig) -> Result<Vec<Vec<f64>>> {
        self.segments
            .iter()
            .map(|s| cough_spectrogram(&self.clip, s, config.frames, config.mel_bands))
            .collect()
    }
}

/// Runs detection, phase segmentation, wet/dry and feature extraction.
pub fn analyze_clip(clip: &AudioClip, detector: &DetectorConfig) -> Result<ClipAnalysis> {
    let clip = if clip.sample_rate_hz() == CANONICAL_RATE_HZ {
        clip.clone()
    } else {
        resample(clip, CANONICAL_RATE_HZ)?
    };
    let segments = detect_coughs(&clip, detector)?;
    let extractor = FeatureExtractor::new(CANONICAL_RATE_HZ)?;
    let mut wet_dry = Vec::with_capacity(segments.len());
    let mut features = Vec::with_capacity(segments.len());
    for s in &segments {
        wet_dry.push(match classify_wet_dry(&clip, s, detector.wet_dry_threshold) {
            Ok(w) => Some(w),
            Err(Error::NotApplicable(_)) => None,
            Err(e) => return Err(e),
        });
        features.push(extractor.extract(&clip, s)?);
    }
    Ok(ClipAnalysis {
        clip,
        segments,
        wet_dry,
        features,
    })
}

/// Log-mel image of one cough, `frames × bands` row-major; short coughs are
/// padded with the log floor and long ones truncated.
pub fn cough_spectrogram(clip: &AudioClip, segment: &CoughSegment, frames: usize, bands: usize) -> Result<Vec<f64>> {
    let analyzer = MelAnalyzer::new(FrameSpec::default(), clip.sample_rate_hz(), bands, 0.0, None)?;
    let samples = &clip.samples()[segment.start_sample..segment.end_sample];
    let rows = if samples.len() >= analyzer.frame_len() {
        analyzer.log_mel(samples)?
    } else {
        Vec::new()
    };
    let floor = LOG_ENERGY_FLOOR.ln();
    let mut out = Vec::with_capacity(frames * bands);
    for r in 0..frames {
        match rows.get(r) {
            Some(row) => out.extend_from_slice(row),
            None => out.extend(std::iter::repeat_n(floor, bands)),
        }
    }
    Ok(out)
}

/// Clip-level diagnosis: memberships averaged over the detected coughs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnosis {
    pub memberships: MembershipVector,
    pub diagnosis: String,
    pub per_cough: Vec<MembershipVector>,
}

/// Model inputs for every cough in `analysis`, matching the bundle's architecture.
pub fn model_inputs(bundle: &ModelBundle, analysis: &ClipAnalysis, sensor: &SensorRecord) -> Result<Vec<Vec<f64>>> {
    match &bundle.model {
        Model::Mlp(_) => analysis.fused_rows(sensor),
        Model::Cnn(m) => analysis.spectrogram_rows(m.config()),
    }
}

/// Returns `None` when no cough was detected.
pub fn diagnose(bundle: &ModelBundle, analysis: &ClipAnalysis, sensor: &SensorRecord) -> Result<Option<Diagnosis>> {
    let inputs = model_inputs(bundle, analysis, sensor)?;
    if inputs.is_empty() {
        return Ok(None);
    }
    let per_cough = inputs
        .iter()
        .map(|x| bundle.predict_memberships(x))
        .collect::<Result<Vec<_>>>()?;
    let memberships = MembershipVector::mean(&per_cough)?;
    let diagnosis = bundle.classes[memberships.argmax()].clone();
    Ok(Some(Diagnosis {
        memberships,
        diagnosis,
        per_cough,
    }))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ArchChoice {
    Mlp { hidden: Vec<usize> },
    Cnn,
}

impl Default for ArchChoice {
    fn default() -> Self {
        ArchChoice::Mlp {
            hidden: DEFAULT_HIDDEN.to_vec(),
        }
    }
}

impl ArchChoice {
    fn input_kind(&self, n_classes: usize) -> InputKind {
        match self {
            ArchChoice::Mlp { .. } => InputKind::Fused,
            ArchChoice::Cnn => InputKind::Spectrogram(CnnConfig::new(n_classes)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InputKind {
    Fused,
    Spectrogram(CnnConfig),
}

/// Per-cough rows built from manifest entries.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledRows {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    /// Manifest entry id each row came from.
    pub ids: Vec<String>,
    /// Entries in which no cough was detected.
    pub empty_ids: Vec<String>,
}

/// Loads, analyzes and featurizes every entry, in parallel; row order follows
/// the manifest.
pub fn build_rows(manifest: &DatasetManifest, kind: &InputKind, detector: &DetectorConfig) -> Result<LabeledRows> {
    let per_entry: Vec<(Vec<Vec<f64>>, usize, String)> = manifest
        .entries
        .par_iter()
        .map(|entry| {
            let path = manifest
                .wav_path(entry)
                .ok_or_else(|| Error::Validation(format!("entry {} has no wav path", entry.id)))?;
            let clip = load_wav(&path)?;
            let analysis = analyze_clip(&clip, detector)?;
            let rows = match kind {
                InputKind::Fused => analysis.fused_rows(&entry.sensor)?,
                InputKind::Spectrogram(cfg) => analysis.spectrogram_rows(cfg)?,
            };
            let label = manifest.label_index(&entry.label).expect("labels validated");
            Ok((rows, label, entry.id.clone()))
        })
        .collect::<Result<_>>()?;
    let mut out = LabeledRows::default();
    for (rows, label, id) in per_entry {
        if rows.is_empty() {
            out.empty_ids.push(id);
            continue;
        }
        for r in rows {
            out.rows.push(r);
            out.labels.push(label);
            out.ids.push(id.clone());
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub bundle: ModelBundle,
    pub report: TrainReport,
    pub metrics: Metrics,
    pub train_rows: usize,
    pub test_rows: usize,
}

/// Stratified split by entry, normalizer fitted on training rows only, then
/// training and evaluation on the held-out entries.
pub fn train_from_manifest(
    manifest: &DatasetManifest,
    arch: &ArchChoice,
    config: &TrainConfig,
    detector: &DetectorConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    let n_classes = manifest.classes.len();
    if n_classes < 2 {
        return Err(Error::invalid("training needs at least 2 classes"));
    }
    let (train_set, test_set) = split_dataset(manifest, config.train_fraction, config.seed)?;
    log::info!(
        "split {} entries: {} train, {} test (seed {})",
        manifest.len(),
        train_set.len(),
        test_set.len(),
        config.seed
    );
    let kind = arch.input_kind(n_classes);
    let train_rows = build_rows(&train_set, &kind, detector)?;
    if train_rows.rows.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "only {} training coughs detected",
            train_rows.rows.len()
        )));
    }
    let normalizer = Normalizer::fit(&train_rows.rows)?;
    log::info!("normalizer fitted on {} training rows", train_rows.rows.len());
    let x_train = normalizer.apply_all(&train_rows.rows)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (mut model, input_names) = match (arch, &kind) {
        (ArchChoice::Mlp { hidden }, _) => {
            let mut sizes = vec![FUSED_LEN];
            sizes.extend(hidden);
            sizes.push(n_classes);
            (Model::Mlp(MlpModel::new(&sizes, &mut rng)?), fused_names())
        }
        (ArchChoice::Cnn, InputKind::Spectrogram(cfg)) => {
            (Model::Cnn(CnnModel::new(cfg.clone(), &mut rng)?), Vec::new())
        }
        (ArchChoice::Cnn, InputKind::Fused) => unreachable!("cnn always takes spectrograms"),
    };
    let report = train(&mut model, &x_train, &train_rows.labels, config)?;
    log::info!(
        "trained {} epochs: loss {:.5} -> {:.5}",
        config.epochs,
        report.initial_loss(),
        report.final_loss()
    );

    let test_rows = build_rows(&test_set, &kind, detector)?;
    log::info!(
        "test set: {} rows from {} entries",
        test_rows.rows.len(),
        test_set.len()
    );
    let x_test = normalizer.apply_all(&test_rows.rows)?;
    let metrics = evaluate(&model, &manifest.classes, &x_test, &test_rows.labels)?;

    let mut bundle = ModelBundle::new(model, manifest.classes.clone(), Some(normalizer))?;
    bundle.input_names = input_names;
    bundle.provenance = Some(TrainingProvenance {
        config: config.clone(),
        train_ids: train_set.entries.iter().map(|e| e.id.clone()).collect(),
        test_ids: test_set.entries.iter().map(|e| e.id.clone()).collect(),
        final_loss: report.final_loss(),
        test_metrics: Some(metrics.clone()),
    });
    Ok(TrainOutcome {
        bundle,
        report,
        metrics,
        train_rows: train_rows.rows.len(),
        test_rows: test_rows.rows.len(),
    })
}

/// Evaluates a bundle on every entry of `manifest`. Entries the model was
/// trained on are rejected.
pub fn evaluate_manifest(
    bundle: &ModelBundle,
    manifest: &DatasetManifest,
    detector: &DetectorConfig,
) -> Result<Metrics> {
    if let Some(p) = &bundle.provenance {
        let trained: HashSet<&str> = p.train_ids.iter().map(String::as_str).collect();
        if let Some(e) = manifest.entries.iter().find(|e| trained.contains(e.id.as_str())) {
            return Err(Error::Validation(format!("entry {} was used for training", e.id)));
        }
    }
    let mut class_map = Vec::with_capacity(manifest.classes.len());
    for c in &manifest.classes {
        class_map.push(
            bundle
                .classes
                .iter()
                .position(|b| b == c)
                .ok_or_else(|| Error::Validation(format!("class {c:?} unknown to the model")))?,
        );
    }
    let kind = match &bundle.model {
        Model::Mlp(_) => InputKind::Fused,
        Model::Cnn(m) => InputKind::Spectrogram(m.config().clone()),
    };
    let rows = build_rows(manifest, &kind, detector)?;
    let x = match &bundle.normalizer {
        Some(n) => n.apply_all(&rows.rows)?,
        None => rows.rows,
    };
    let labels: Vec<usize> = rows.labels.iter().map(|&l| class_map[l]).collect();
    evaluate(&bundle.model, &bundle.classes, &x, &labels)
}

/// Restricts a manifest to the entries a bundle did not train on.
pub fn held_out(bundle: &ModelBundle, manifest: &DatasetManifest) -> Result<DatasetManifest> {
    let Some(p) = &bundle.provenance else {
        return Ok(manifest.clone());
    };
    let trained: HashSet<&str> = p.train_ids.iter().map(String::as_str).collect();
    let entries = manifest
        .entries
        .iter()
        .filter(|e| !trained.contains(e.id.as_str()))
        .cloned()
        .collect();
    DatasetManifest::new(entries, Some(manifest.classes.clone()), manifest.base_dir.clone())
}
