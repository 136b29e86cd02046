//! Output artifacts. Everything is rendered in memory first and then
//! written all-or-nothing.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::config::Meta;
use crate::CliError;

#[derive(Debug, Default)]
pub struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    pub fn new() -> Self {
        Self::default()
    }

    /// JSON document with a leading `meta` object.
    pub fn json<T: Serialize>(&mut self, name: &str, meta: &Meta, body: &T) -> Result<(), CliError> {
        let mut doc = serde_json::Map::new();
        doc.insert("meta".into(), serde_json::to_value(meta)?);
        match serde_json::to_value(body)? {
            Value::Object(m) => doc.extend(m),
            other => {
                doc.insert("result".into(), other);
            }
        }
        let mut text = serde_json::to_string_pretty(&Value::Object(doc))?;
        text.push('\n');
        self.files.push((name.to_string(), text.into_bytes()));
        Ok(())
    }

    /// CSV with `config_hash,seed,version` appended to the header and every row.
    pub fn csv(&mut self, name: &str, meta: &Meta, csv: &str) {
        self.files.push((name.to_string(), with_meta_columns(csv, meta).into_bytes()));
    }

    /// Verbatim text.
    pub fn raw(&mut self, name: &str, text: String) {
        self.files.push((name.to_string(), text.into_bytes()));
    }

    pub fn bytes(&mut self, name: &str, data: Vec<u8>) {
        self.files.push((name.to_string(), data));
    }

    pub fn names(&self) -> Vec<&str> {
        self.files.iter().map(|(n, _)| n.as_str()).collect()
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.files
            .iter()
            .find(|(n, _)| n == name)
            .and_then(|(_, t)| std::str::from_utf8(t).ok())
    }

    /// Writes every file to temporaries, then renames them into place.
    /// On any failure the temporaries are removed and nothing is published.
    pub fn commit(self, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
        let mut staged = Vec::with_capacity(self.files.len());
        let cleanup = |staged: &[(PathBuf, PathBuf)]| {
            for (tmp, _) in staged {
                let _ = std::fs::remove_file(tmp);
            }
        };
        for (name, text) in &self.files {
            let fin = dir.join(name);
            let tmp = dir.join(format!(".{name}.partial"));
            if let Err(e) = std::fs::write(&tmp, text) {
                cleanup(&staged);
                let _ = std::fs::remove_file(&tmp);
                return Err(CliError::Io(format!("cannot write {}: {e}", tmp.display())));
            }
            staged.push((tmp, fin));
        }
        for (tmp, fin) in &staged {
            if let Err(e) = std::fs::rename(tmp, fin) {
                cleanup(&staged);
                return Err(CliError::Io(format!("cannot publish {}: {e}", fin.display())));
            }
        }
        Ok(staged.into_iter().map(|(_, f)| f).collect())
    }
}

pub fn with_meta_columns(csv: &str, meta: &Meta) -> String {
    let mut out = String::with_capacity(csv.len() + 128);
    let suffix = format!(",{},{},{}", meta.config_hash, meta.seed, meta.version);
    for (i, line) in csv.lines().enumerate() {
        out.push_str(line);
        if i == 0 {
            out.push_str(",config_hash,seed,version");
        } else {
            out.push_str(&suffix);
        }
        out.push('\n');
    }
    out
}

/// Tiny CSV builder; values are formatted by the caller.
pub struct Table {
    text: String,
    width: usize,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            text: format!("{}\n", header.join(",")),
            width: header.len(),
        }
    }

    pub fn row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.width);
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn finish(self) -> String {
        self.text
    }
}

/// Quotes a field that contains commas.
pub fn quoted(s: &str) -> String {
    if s.contains(',') || s.contains('"') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
