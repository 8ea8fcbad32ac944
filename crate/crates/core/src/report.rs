//! Report emission: CSV tables with a manifest preamble, pretty JSON, and
//! all-or-nothing writes of a set of output files.
//!
//! CSV conventions: UTF-8, comma separated, one header row, numbers printed
//! with 12 significant digits, absent values as empty fields. Lines starting
//! with `#` before the header carry the run manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::RunManifest;
use crate::error::{Error, Result};

/// Rounds to 12 significant digits and prints the shortest decimal that
/// reads back as the rounded value.
pub fn fmt_num(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

/// In-memory CSV table.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Serializes with an optional manifest preamble.
    pub fn to_csv(&self, manifest: Option<&RunManifest>) -> Result<String> {
        let mut out = String::new();
        if let Some(m) = manifest {
            out.push_str(&manifest_preamble(m));
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        out.push_str(&String::from_utf8(bytes).expect("csv output is utf-8"));
        Ok(out)
    }

    /// Parses text produced by [`to_csv`](Self::to_csv), skipping the
    /// preamble.
    pub fn parse(text: &str) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let header = r.headers()?.iter().map(str::to_string).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|rec| rec.iter().map(str::to_string).collect()))
            .collect::<std::result::Result<_, _>>()?;
        Ok(Self { header, rows })
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

fn manifest_preamble(m: &RunManifest) -> String {
    format!(
        "# master_seed: {}\n# config_digest: {}\n# artifact_version: {}\n# timestamp: {}\n",
        m.master_seed,
        m.config_digest,
        m.artifact_version,
        m.timestamp.as_deref().unwrap_or("")
    )
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

/// Files written together: either all land in the target directory or none
/// do.
#[derive(Debug, Default)]
pub struct OutputSet {
    files: Vec<(String, String)>,
}

impl OutputSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }

    /// Writes each file to a hidden temporary next to its destination, then
    /// renames them into place. Temporaries are removed on any failure.
    pub fn commit(self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut staged: Vec<(PathBuf, PathBuf)> = Vec::new();
        let cleanup = |staged: &[(PathBuf, PathBuf)]| {
            for (tmp, _) in staged {
                let _ = fs::remove_file(tmp);
            }
        };
        for (name, contents) in &self.files {
            let tmp = dir.join(format!(".{name}.partial"));
            let result = fs::File::create(&tmp).and_then(|mut f| {
                f.write_all(contents.as_bytes())?;
                f.sync_all()
            });
            staged.push((tmp, dir.join(name)));
            if let Err(e) = result {
                cleanup(&staged);
                return Err(e.into());
            }
        }
        let mut done = Vec::new();
        for (i, (tmp, dest)) in staged.iter().enumerate() {
            if let Err(e) = fs::rename(tmp, dest) {
                cleanup(&staged[i..]);
                for d in &done {
                    let _ = fs::remove_file(d);
                }
                return Err(e.into());
            }
            done.push(dest.clone());
        }
        Ok(done)
    }
}
