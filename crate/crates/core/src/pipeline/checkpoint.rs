//! Append-only JSONL checkpoint: one record per sample per completed stage.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::sample::ReasoningSample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Enrich,
    Generate,
    Structural,
    Consistency,
    Verifier,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointRecord {
    pub id: String,
    pub stage: Stage,
    pub sample: ReasoningSample,
}

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("checkpoint {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("checkpoint {path} line {line}: {reason}")]
    Corrupt { path: PathBuf, line: usize, reason: String },
}

pub struct Checkpoint {
    path: PathBuf,
    file: Mutex<File>,
    latest: HashMap<String, (Stage, ReasoningSample)>,
}

impl Checkpoint {
    /// Opens (creating if needed) and replays the file. A torn final line,
    /// left by an interrupted write, is cut off; corruption elsewhere is an
    /// error.
    pub fn open(path: &Path) -> Result<Checkpoint, CheckpointError> {
        let io = |source| CheckpointError::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut latest: HashMap<String, (Stage, ReasoningSample)> = HashMap::new();
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
            Err(e) => return Err(io(e)),
        };
        let mut keep = text.len();
        let mut offset = 0;
        let lines: Vec<&str> = text.split_inclusive('\n').collect();
        for (k, raw) in lines.iter().enumerate() {
            let line_start = offset;
            offset += raw.len();
            if raw.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<CheckpointRecord>(raw) {
                Ok(r) => {
                    if latest.get(&r.id).is_none_or(|(s, _)| r.stage >= *s) {
                        latest.insert(r.id, (r.stage, r.sample));
                    }
                }
                Err(e) if k + 1 == lines.len() => {
                    log::warn!("{}: dropping torn final line: {e}", path.display());
                    keep = line_start;
                }
                Err(e) => {
                    return Err(CheckpointError::Corrupt {
                        path: path.to_path_buf(),
                        line: k + 1,
                        reason: e.to_string(),
                    })
                }
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(io)?;
        if keep < text.len() {
            file.set_len(keep as u64).map_err(io)?;
        }
        Ok(Checkpoint {
            path: path.to_path_buf(),
            file: Mutex::new(file),
            latest,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Most advanced recorded state of a sample, as of opening.
    pub fn latest(&self, id: &str) -> Option<&(Stage, ReasoningSample)> {
        self.latest.get(id)
    }

    pub fn len(&self) -> usize {
        self.latest.len()
    }

    pub fn is_empty(&self) -> bool {
        self.latest.is_empty()
    }

    pub fn append(&self, stage: Stage, sample: &ReasoningSample) -> Result<(), CheckpointError> {
        let record = CheckpointRecord {
            id: sample.id.clone(),
            stage,
            sample: sample.clone(),
        };
        let mut line = serde_json::to_string(&record).expect("records serialize");
        line.push('\n');
        let mut f = self.file.lock().expect("checkpoint lock");
        f.write_all(line.as_bytes())
            .and_then(|_| f.flush())
            .map_err(|source| CheckpointError::Io {
                path: self.path.clone(),
                source,
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::sample::TaskKind;

    #[test]
    fn latest_stage_wins_and_survives_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.jsonl");
        let mut s = ReasoningSample::new("a", TaskKind::MolRecognition, "C", "C");
        {
            let ck = Checkpoint::open(&path).unwrap();
            ck.append(Stage::Enrich, &s).unwrap();
            s.generated_text = Some("t".into());
            ck.append(Stage::Generate, &s).unwrap();
        }
        let ck = Checkpoint::open(&path).unwrap();
        let (stage, sample) = ck.latest("a").unwrap();
        assert_eq!(*stage, Stage::Generate);
        assert_eq!(sample.generated_text.as_deref(), Some("t"));
        assert!(ck.latest("b").is_none());
    }

    #[test]
    fn torn_tail_is_tolerated() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.jsonl");
        let s = ReasoningSample::new("a", TaskKind::MolRecognition, "C", "C");
        Checkpoint::open(&path).unwrap().append(Stage::Enrich, &s).unwrap();
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"{\"id\":\"b\",\"sta").unwrap();
        drop(f);
        let ck = Checkpoint::open(&path).unwrap();
        assert_eq!(ck.len(), 1);
        ck.append(Stage::Generate, &s).unwrap();
        drop(ck);
        let ck = Checkpoint::open(&path).unwrap();
        assert_eq!(ck.latest("a").unwrap().0, Stage::Generate);
        drop(ck);
        std::fs::write(&path, "garbage\n{}\n").unwrap();
        assert!(matches!(Checkpoint::open(&path), Err(CheckpointError::Corrupt { line: 1, .. })));
    }
}
