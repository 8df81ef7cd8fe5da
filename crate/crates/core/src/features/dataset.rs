//! JSON Lines dataset manifests and stratified splitting.

use std::collections::{BTreeSet, HashSet};
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::sensor::SensorRecord;
use crate::error::{Error, Result};

/// One manifest line: `{"id","wav","label","temp_c","airflow_peak_lps","airflow_volume_l"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Anonymized identifier; never a person's name.
    pub id: String,
    #[serde(default)]
    pub wav: Option<String>,
    pub label: String,
    #[serde(flatten)]
    pub sensor: SensorRecord,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub classes: Vec<String>,
    pub entries: Vec<ManifestEntry>,
    /// Directory that relative `wav` paths resolve against.
    pub base_dir: PathBuf,
}

impl DatasetManifest {
    /// Validates ids and labels. With `classes = None` the class list is the
    /// sorted set of labels present.
    pub fn new(
        entries: Vec<ManifestEntry>,
        classes: Option<Vec<String>>,
        base_dir: impl Into<PathBuf>,
    ) -> Result<Self> {
        let classes = match classes {
            Some(c) => c,
            None => entries
                .iter()
                .map(|e| e.label.clone())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect(),
        };
        let mut seen = HashSet::new();
        for (i, e) in entries.iter().enumerate() {
            if !seen.insert(e.id.as_str()) {
                return Err(Error::Manifest {
                    line: i + 1,
                    message: format!("duplicate id {:?}", e.id),
                });
            }
            if !classes.contains(&e.label) {
                return Err(Error::Manifest {
                    line: i + 1,
                    message: format!("label {:?} not in class list {classes:?}", e.label),
                });
            }
        }
        Ok(Self {
            classes,
            entries,
            base_dir: base_dir.into(),
        })
    }

    pub fn load(path: impl AsRef<Path>, classes: Option<Vec<String>>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, classes, base)
    }

    /// Parses JSON Lines; blank lines are skipped, errors carry 1-based line numbers.
    pub fn parse(text: &str, classes: Option<Vec<String>>, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: ManifestEntry = serde_json::from_str(line).map_err(|e| Error::Manifest {
                line: i + 1,
                message: e.to_string(),
            })?;
            entry.sensor.validate().map_err(|e| Error::Manifest {
                line: i + 1,
                message: e.to_string(),
            })?;
            entries.push(entry);
        }
        Self::new(entries, classes, base_dir)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
        for e in &self.entries {
            let line = serde_json::to_string(e).expect("manifest entries serialize");
            writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == label)
    }

    pub fn labels(&self) -> Vec<usize> {
        self.entries
            .iter()
            .map(|e| self.label_index(&e.label).expect("labels validated"))
            .collect()
    }

    pub fn wav_path(&self, entry: &ManifestEntry) -> Option<PathBuf> {
        entry.wav.as_ref().map(|w| {
            let p = Path::new(w);
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                self.base_dir.join(p)
            }
        })
    }

    fn subset(&self, mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        Self {
            classes: self.classes.clone(),
            entries: indices.into_iter().map(|i| self.entries[i].clone()).collect(),
            base_dir: self.base_dir.clone(),
        }
    }
}

/// Stratified, seed-deterministic train/test split.
///
/// Each class contributes `round(n_c * train_fraction)` entries to training,
/// clamped so both sides get at least one. Entry order within each side
/// follows the manifest.
pub fn split_dataset(
    manifest: &DatasetManifest,
    train_fraction: f64,
    seed: u64,
) -> Result<(DatasetManifest, DatasetManifest)> {
    if !(0.5..1.0).contains(&train_fraction) {
        return Err(Error::invalid(format!(
            "train fraction {train_fraction} outside [0.5, 1)"
        )));
    }
    let labels = manifest.labels();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (c, name) in manifest.classes.iter().enumerate() {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        if members.is_empty() {
            continue;
        }
        if members.len() < 2 {
            return Err(Error::Stratification(format!(
                "class {name:?} has {} example(s); need at least 2",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        let n = members.len();
        let n_train = ((n as f64 * train_fraction).round() as usize).clamp(1, n - 1);
        test.extend_from_slice(&members[n_train..]);
        members.truncate(n_train);
        train.extend(members);
    }
    Ok((manifest.subset(train), manifest.subset(test)))
}

/// Writes a CSV with a header row naming every column.
pub fn write_feature_csv<W: Write>(writer: W, names: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    let to_err = |e: csv::Error| Error::Format(e.to_string());
    csv.write_record(names).map_err(to_err)?;
    for row in rows {
        if row.len() != names.len() {
            return Err(Error::shape(names.len(), row.len()));
        }
        csv.write_record(row.iter().map(|v| v.to_string())).map_err(to_err)?;
    }
    csv.flush().map_err(|e| Error::Format(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest(counts: &[(&str, usize)]) -> DatasetManifest {
        let mut entries = Vec::new();
        for (label, n) in counts {
            for i in 0..*n {
                entries.push(ManifestEntry {
                    id: format!("{label}-{i}"),
                    wav: Some(format!("clips/{label}-{i}.wav")),
                    label: label.to_string(),
                    sensor: SensorRecord::default(),
                });
            }
        }
        DatasetManifest::new(entries, None, "/data").unwrap()
    }

    #[test]
    fn hundred_rows_split_80_20_stratified() {
        let m = manifest(&[("a", 50), ("b", 30), ("c", 20)]);
        let (train, test) = split_dataset(&m, 0.8, 1).unwrap();
        assert_eq!(train.len() + test.len(), 100);
        assert!((79..=81).contains(&train.len()));
        for (label, n) in [("a", 50.0), ("b", 30.0), ("c", 20.0)] {
            let k = train.entries.iter().filter(|e| e.label == label).count() as f64;
            assert!((k - n * 0.8).abs() <= 1.0);
        }
    }

    #[test]
    fn split_is_deterministic_disjoint_exhaustive() {
        let m = manifest(&[("a", 13), ("b", 9)]);
        let (tr1, te1) = split_dataset(&m, 0.85, 42).unwrap();
        let (tr2, te2) = split_dataset(&m, 0.85, 42).unwrap();
        assert_eq!(tr1, tr2);
        assert_eq!(te1, te2);
        let train_ids: HashSet<_> = tr1.entries.iter().map(|e| e.id.clone()).collect();
        let test_ids: HashSet<_> = te1.entries.iter().map(|e| e.id.clone()).collect();
        assert!(train_ids.is_disjoint(&test_ids));
        assert_eq!(train_ids.len() + test_ids.len(), 22);
        let (tr3, _) = split_dataset(&m, 0.85, 43).unwrap();
        assert_ne!(tr1, tr3);
    }

    #[test]
    fn split_errors() {
        let m = manifest(&[("a", 5), ("b", 1)]);
        assert!(matches!(split_dataset(&m, 0.8, 0), Err(Error::Stratification(_))));
        let m = manifest(&[("a", 5), ("b", 5)]);
        assert!(split_dataset(&m, 0.4, 0).is_err());
        assert!(split_dataset(&m, 1.0, 0).is_err());
    }

    #[test]
    fn parse_reports_line_numbers() {
        let text = "{\"id\":\"x1\",\"wav\":\"a.wav\",\"label\":\"flu_like\",\"temp_c\":38.2,\"airflow_peak_lps\":null,\"airflow_volume_l\":null}\n\nnot json\n";
        match DatasetManifest::parse(text, None, ".") {
            Err(Error::Manifest { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let text = "{\"id\":\"x1\",\"label\":\"a\",\"temp_c\":50.0}\n";
        assert!(matches!(
            DatasetManifest::parse(text, None, "."),
            Err(Error::Manifest { line: 1, .. })
        ));
        let dup = "{\"id\":\"x\",\"label\":\"a\"}\n{\"id\":\"x\",\"label\":\"a\"}\n";
        assert!(matches!(
            DatasetManifest::parse(dup, None, "."),
            Err(Error::Manifest { line: 2, .. })
        ));
        let unknown = "{\"id\":\"x\",\"label\":\"zzz\"}\n";
        assert!(DatasetManifest::parse(unknown, Some(vec!["a".into()]), ".").is_err());
    }

    #[test]
    fn manifest_round_trip_and_paths() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = manifest(&[("a", 2), ("b", 2)]);
        m.entries[0].sensor.body_temp_c = Some(38.5);
        let path = dir.path().join("manifest.jsonl");
        m.write(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.lines().next().unwrap().contains("\"temp_c\":38.5"));
        let back = DatasetManifest::load(&path, None).unwrap();
        assert_eq!(back.entries, m.entries);
        assert_eq!(
            back.wav_path(&back.entries[0]).unwrap(),
            dir.path().join("clips/a-0.wav")
        );
    }

    #[test]
    fn csv_has_header() {
        let mut buf = Vec::new();
        write_feature_csv(&mut buf, &["x".into(), "y".into()], &[vec![1.0, 2.5]]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "x,y\n1,2.5\n");
        assert!(write_feature_csv(Vec::new(), &["x".into()], &[vec![1.0, 2.0]]).is_err());
    }
}
