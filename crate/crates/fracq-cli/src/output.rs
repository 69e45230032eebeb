//! Artifact staging. Outputs accumulate in memory and reach disk only
//! after the whole run has succeeded, so a failed run leaves no partial
//! files behind.

use std::fs;
use std::path::Path;

use fracq::ifs::PointCloud;

use crate::fail::{CliError, CliResult};

#[derive(Debug, Default)]
pub struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    pub fn new() -> Self {
        Artifacts::default()
    }

    pub fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    pub fn add_json<T: serde::Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::Validation(format!("serializing {}: {}", name, e)))?;
        text.push('\n');
        self.add(name, text.into_bytes());
        Ok(())
    }

    /// Writes every staged file into `dir`. If any write fails, files
    /// already written by this call are removed before returning.
    pub fn commit(self, dir: &Path) -> CliResult<()> {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Validation(format!("creating {}: {}", dir.display(), e)))?;
        let mut written = Vec::new();
        for (name, bytes) in &self.files {
            let path = dir.join(name);
            match fs::write(&path, bytes) {
                Ok(()) => written.push(path),
                Err(e) => {
                    let msg = format!("writing {}: {}", path.display(), e);
                    for p in written {
                        let _ = fs::remove_file(p);
                    }
                    return Err(CliError::Validation(msg));
                }
            }
        }
        for (name, _) in &self.files {
            println!("wrote {}", dir.join(name).display());
        }
        Ok(())
    }
}

/// Shortest decimal string that parses back to the same f64. Artifacts
/// produced twice from one configuration match byte for byte.
pub fn fmt_f64(x: f64) -> String {
    format!("{}", x)
}

/// CSV table of a point cloud: header `x1,...,xd` plus an optional
/// trailing `weight` column.
pub fn csv_cloud(cloud: &PointCloud, weights: Option<&[f64]>) -> Vec<u8> {
    let d = cloud.dim();
    let mut text = String::new();
    for t in 0..d {
        if t > 0 {
            text.push(',');
        }
        text.push_str("x");
        text.push_str(&(t + 1).to_string());
    }
    if weights.is_some() {
        text.push_str(",weight");
    }
    text.push('\n');
    for i in 0..cloud.len() {
        for (t, v) in cloud.point(i).iter().enumerate() {
            if t > 0 {
                text.push(',');
            }
            text.push_str(&fmt_f64(*v));
        }
        if let Some(w) = weights {
            text.push(',');
            text.push_str(&fmt_f64(w[i]));
        }
        text.push('\n');
    }
    text.into_bytes()
}

/// Quotes a CSV field when it contains a delimiter, quote, or newline.
pub fn csv_quote(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
