//! Optional on-disk persistence: one directory per session holding the
//! uploaded volume and a JSON-lines journal of applied mutations.

use std::fs::{self, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::session::{Mutation, Session, SessionError};

const VOLUME_FILE: &str = "volume.nrrd";
const JOURNAL_FILE: &str = "journal.jsonl";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}:{line}: bad journal entry: {source}")]
    Journal {
        path: PathBuf,
        line: usize,
        source: serde_json::Error,
    },
    #[error("{path}: replay failed: {source}")]
    Replay { path: PathBuf, source: SessionError },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(io_err(&root))?;
        Ok(Store { root })
    }

    pub fn create(&self, id: &str, nrrd: &[u8]) -> Result<(), StoreError> {
        let dir = self.root.join(id);
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let vol = dir.join(VOLUME_FILE);
        fs::write(&vol, nrrd).map_err(io_err(&vol))?;
        let journal = dir.join(JOURNAL_FILE);
        fs::write(&journal, b"").map_err(io_err(&journal))
    }

    pub fn append(&self, id: &str, m: &Mutation) -> Result<(), StoreError> {
        let path = self.root.join(id).join(JOURNAL_FILE);
        let mut line = serde_json::to_vec(m).expect("mutations serialize");
        line.push(b'\n');
        let mut f = OpenOptions::new()
            .append(true)
            .open(&path)
            .map_err(io_err(&path))?;
        f.write_all(&line).map_err(io_err(&path))
    }

    /// Rebuilds every stored session by replaying its journal.
    pub fn load_all(&self) -> Result<Vec<(String, Session)>, StoreError> {
        let mut out = Vec::new();
        let mut dirs: Vec<_> = fs::read_dir(&self.root)
            .map_err(io_err(&self.root))?
            .collect::<Result<_, _>>()
            .map_err(io_err(&self.root))?;
        dirs.sort_by_key(|e| e.file_name());
        for entry in dirs {
            let dir = entry.path();
            let vol = dir.join(VOLUME_FILE);
            if !vol.is_file() {
                continue;
            }
            let Some(id) = entry.file_name().to_str().map(str::to_string) else {
                continue;
            };
            let bytes = fs::read(&vol).map_err(io_err(&vol))?;
            let mut session = Session::from_nrrd(&bytes).map_err(|source| StoreError::Replay {
                path: vol.clone(),
                source,
            })?;
            let journal = dir.join(JOURNAL_FILE);
            if journal.is_file() {
                let f = fs::File::open(&journal).map_err(io_err(&journal))?;
                for (i, line) in BufReader::new(f).lines().enumerate() {
                    let line = line.map_err(io_err(&journal))?;
                    if line.trim().is_empty() {
                        continue;
                    }
                    let m: Mutation =
                        serde_json::from_str(&line).map_err(|source| StoreError::Journal {
                            path: journal.clone(),
                            line: i + 1,
                            source,
                        })?;
                    session.apply(&m).map_err(|source| StoreError::Replay {
                        path: journal.clone(),
                        source,
                    })?;
                }
            }
            out.push((id, session));
        }
        Ok(out)
    }
}
