//! Embedded record store: one JSON document per record inside a directory.
//!
//! Each file wraps its payload as `{"schema": "<tag>", "record": {...}}`.
//! Writes go to a temporary file that is fsynced and renamed over the target,
//! so a record is either fully old or fully new after a crash. A store opened
//! without a directory keeps nothing on disk.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StorageError {
    #[error("storage I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt record {path}: {message}")]
    Corrupt { path: PathBuf, message: String },
}

#[derive(Serialize)]
struct EnvelopeRef<'a, T> {
    schema: &'a str,
    record: &'a T,
}

#[derive(Deserialize)]
struct Envelope<T> {
    schema: String,
    record: T,
}

#[derive(Debug, Clone)]
pub struct RecordDir {
    dir: Option<PathBuf>,
    schema: &'static str,
    durable: bool,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StorageError + '_ {
    move |source| StorageError::Io {
        path: path.to_path_buf(),
        source,
    }
}

impl RecordDir {
    /// Opens (creating if needed) `dir`, tagging records with `schema`.
    pub fn open(dir: &Path, schema: &'static str, durable: bool) -> Result<Self, StorageError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        Ok(Self {
            dir: Some(dir.to_path_buf()),
            schema,
            durable,
        })
    }

    pub fn in_memory(schema: &'static str) -> Self {
        Self {
            dir: None,
            schema,
            durable: false,
        }
    }

    pub fn path(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    fn file(&self, dir: &Path, key: &str) -> PathBuf {
        dir.join(format!("{key}.json"))
    }

    pub fn write<T: Serialize>(&self, key: &str, record: &T) -> Result<(), StorageError> {
        let Some(dir) = &self.dir else {
            return Ok(());
        };
        let target = self.file(dir, key);
        let tmp = dir.join(format!(".{key}.json.tmp"));
        let body = serde_json::to_vec_pretty(&EnvelopeRef {
            schema: self.schema,
            record,
        })
        .map_err(|e| StorageError::Corrupt {
            path: target.clone(),
            message: e.to_string(),
        })?;
        let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
        f.write_all(&body).map_err(io_err(&tmp))?;
        if self.durable {
            f.sync_data().map_err(io_err(&tmp))?;
        }
        drop(f);
        fs::rename(&tmp, &target).map_err(io_err(&target))?;
        Ok(())
    }

    pub fn remove(&self, key: &str) -> Result<(), StorageError> {
        let Some(dir) = &self.dir else {
            return Ok(());
        };
        let target = self.file(dir, key);
        match fs::remove_file(&target) {
            Ok(()) => Ok(()),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(()),
            Err(e) => Err(io_err(&target)(e)),
        }
    }

    /// Reads every record in the directory. Leftover temporary files from an
    /// interrupted write are ignored.
    pub fn load_all<T: DeserializeOwned>(&self) -> Result<Vec<T>, StorageError> {
        let Some(dir) = &self.dir else {
            return Ok(Vec::new());
        };
        let mut out = Vec::new();
        for entry in fs::read_dir(dir).map_err(io_err(dir))? {
            let path = entry.map_err(io_err(dir))?.path();
            let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
            if name.starts_with('.') || !name.ends_with(".json") {
                continue;
            }
            let bytes = fs::read(&path).map_err(io_err(&path))?;
            let env: Envelope<T> =
                serde_json::from_slice(&bytes).map_err(|e| StorageError::Corrupt {
                    path: path.clone(),
                    message: e.to_string(),
                })?;
            if env.schema != self.schema {
                return Err(StorageError::Corrupt {
                    path,
                    message: format!("schema `{}`, expected `{}`", env.schema, self.schema),
                });
            }
            out.push(env.record);
        }
        Ok(out)
    }
}
