//! Output files are collected in memory and written together with a
//! `manifest.json` that lists each file's hash, so a failed run leaves no
//! partial output behind.

use std::fs;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Serialize)]
struct FileEntry<'a> {
    name: &'a str,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    seed: u64,
    config_sha256: &'a str,
    exit_code: i32,
    files: Vec<FileEntry<'a>>,
}

fn pretty<S: Serialize>(value: &S) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("artifact types always serialize");
    bytes.push(b'\n');
    bytes
}

#[derive(Default)]
pub struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(|(n, _)| n.as_str())
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, b)| b.as_slice())
    }

    pub fn json<S: Serialize>(&mut self, name: &str, value: &S) {
        self.files.push((name.into(), pretty(value)));
    }

    pub fn csv<R, I>(&mut self, name: &str, header: &[&str], rows: I) -> Result<(), CliError>
    where
        R: IntoIterator<Item = String>,
        I: IntoIterator<Item = R>,
    {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io {
            path: name.into(),
            source: e.into_error(),
        })?;
        self.files.push((name.into(), bytes));
        Ok(())
    }

    /// Writes every file and the manifest under `dir`.
    pub fn write_all(
        &self,
        dir: &Path,
        command: &str,
        seed: u64,
        config_sha256: &str,
        exit_code: i32,
    ) -> Result<(), CliError> {
        fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.into(),
            source,
        })?;
        let mut entries = Vec::with_capacity(self.files.len());
        for (name, bytes) in &self.files {
            let path = dir.join(name);
            fs::write(&path, bytes).map_err(|source| CliError::Io { path, source })?;
            entries.push(FileEntry {
                name,
                sha256: sha256_hex(bytes),
            });
        }
        let manifest = Manifest {
            command,
            seed,
            config_sha256,
            exit_code,
            files: entries,
        };
        let path = dir.join("manifest.json");
        fs::write(&path, pretty(&manifest)).map_err(|source| CliError::Io { path, source })
    }
}
