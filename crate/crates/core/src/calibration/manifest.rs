use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimepointEntry {
    pub t_index: u32,
    pub volume_path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_count: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubjectEntry {
    pub subject_id: String,
    pub timepoints: Vec<TimepointEntry>,
}

/// Subjects with ordered timepoints and optional ground-truth counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LongitudinalManifest {
    pub subjects: Vec<SubjectEntry>,
}

impl LongitudinalManifest {
    pub fn validate(&self) -> Result<()> {
        if self.subjects.is_empty() {
            return Err(Error::Manifest("no subjects".into()));
        }
        let mut seen = HashSet::new();
        for s in &self.subjects {
            if !seen.insert(s.subject_id.as_str()) {
                return Err(Error::Manifest(format!(
                    "duplicate subject id {:?}",
                    s.subject_id
                )));
            }
            if s.timepoints.len() < 2 {
                return Err(Error::Manifest(format!(
                    "subject {:?} has {} timepoint(s); at least 2 are required",
                    s.subject_id,
                    s.timepoints.len()
                )));
            }
            if s.timepoints[0].t_index < 1 {
                return Err(Error::Manifest(format!(
                    "subject {:?}: t_index starts at 1",
                    s.subject_id
                )));
            }
            if s.timepoints
                .windows(2)
                .any(|w| w[1].t_index <= w[0].t_index)
            {
                return Err(Error::Manifest(format!(
                    "subject {:?}: t_index must be strictly increasing",
                    s.subject_id
                )));
            }
        }
        Ok(())
    }

    /// Parses and validates; volume paths are kept as written.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: LongitudinalManifest =
            serde_json::from_str(&text).map_err(|source| Error::Json {
                path: path.to_path_buf(),
                source,
            })?;
        m.validate()?;
        Ok(m)
    }

    /// Pretty JSON with a trailing newline.
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Relative volume paths joined onto `base`.
    pub fn resolved(&self, base: &Path) -> Self {
        let mut m = self.clone();
        for tp in m.subjects.iter_mut().flat_map(|s| s.timepoints.iter_mut()) {
            if tp.volume_path.is_relative() {
                tp.volume_path = base.join(&tp.volume_path);
            }
        }
        m
    }

    pub fn has_ground_truth(&self) -> bool {
        self.subjects
            .iter()
            .all(|s| s.timepoints.iter().all(|t| t.gt_count.is_some()))
    }

    /// `gt[i][t]`, or the first missing entry as an error.
    pub fn ground_truth(&self) -> Result<Vec<Vec<usize>>> {
        self.subjects
            .iter()
            .map(|s| {
                s.timepoints
                    .iter()
                    .map(|t| {
                        t.gt_count.ok_or_else(|| Error::MissingGroundTruth {
                            subject: s.subject_id.clone(),
                            t_index: t.t_index,
                        })
                    })
                    .collect()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<LongitudinalManifest> {
        let m: LongitudinalManifest = serde_json::from_str(s).unwrap();
        m.validate().map(|_| m)
    }

    #[test]
    fn accepts_minimal_manifest() {
        let m = parse(
            r#"{"subjects":[{"subject_id":"a","timepoints":[
                {"t_index":1,"volume_path":"a1.json","gt_count":3},
                {"t_index":2,"volume_path":"/abs/a2.json"}]}]}"#,
        )
        .unwrap();
        assert!(!m.has_ground_truth());
        assert!(matches!(
            m.ground_truth(),
            Err(Error::MissingGroundTruth { t_index: 2, .. })
        ));
        let r = m.resolved(Path::new("/data"));
        assert_eq!(
            r.subjects[0].timepoints[0].volume_path,
            PathBuf::from("/data/a1.json")
        );
        assert_eq!(
            r.subjects[0].timepoints[1].volume_path,
            PathBuf::from("/abs/a2.json")
        );
    }

    #[test]
    fn rejects_bad_manifests() {
        let one =
            r#"{"subjects":[{"subject_id":"a","timepoints":[{"t_index":1,"volume_path":"x"}]}]}"#;
        let order = r#"{"subjects":[{"subject_id":"a","timepoints":[
            {"t_index":2,"volume_path":"x"},{"t_index":2,"volume_path":"y"}]}]}"#;
        let zero = r#"{"subjects":[{"subject_id":"a","timepoints":[
            {"t_index":0,"volume_path":"x"},{"t_index":1,"volume_path":"y"}]}]}"#;
        let dup = r#"{"subjects":[
            {"subject_id":"a","timepoints":[{"t_index":1,"volume_path":"x"},{"t_index":2,"volume_path":"y"}]},
            {"subject_id":"a","timepoints":[{"t_index":1,"volume_path":"x"},{"t_index":2,"volume_path":"y"}]}]}"#;
        for s in [one, order, zero, dup, r#"{"subjects":[]}"#] {
            assert!(matches!(parse(s), Err(Error::Manifest(_))), "{s}");
        }
    }

    #[test]
    fn load_reports_json_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        fs::write(&p, "{\"subjects\": 3}").unwrap();
        assert!(matches!(
            LongitudinalManifest::load(&p),
            Err(Error::Json { .. })
        ));
        assert!(matches!(
            LongitudinalManifest::load(&dir.path().join("missing.json")),
            Err(Error::Io { .. })
        ));
    }
}
