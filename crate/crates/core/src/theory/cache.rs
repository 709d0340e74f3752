//! On-disk cache for solver outputs, keyed by a hash of the full parameter
//! set. One record per key, versioned header `THRY1`.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

const HEADER: &str = "THRY1";

/// Append-only key/value store of numeric vectors. Safe for concurrent
/// reads of the in-memory map; writes go through `&mut self`.
#[derive(Debug)]
pub struct TheoryCache {
    path: PathBuf,
    records: HashMap<String, Vec<f64>>,
    hits: u64,
    misses: u64,
}

impl TheoryCache {
    /// Canonical key for a solver request. The string packs every input that
    /// influences the output: point, smoothing, family parameters,
    /// quadrature order and tolerance, plus grid geometry when the record is
    /// a whole curve.
    pub fn key(parts: &[(&str, String)]) -> String {
        let mut canon = String::new();
        for (name, value) in parts {
            canon.push_str(name);
            canon.push('=');
            canon.push_str(value);
            canon.push(';');
        }
        let mut hasher = Sha256::new();
        hasher.update(canon.as_bytes());
        hex_string(&hasher.finalize())
    }

    /// Open an existing cache file or start an empty one.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut records = HashMap::new();
        if path.exists() {
            let text = fs::read_to_string(&path)?;
            let mut lines = text.lines();
            match lines.next() {
                Some(h) if h == HEADER => {}
                other => {
                    return Err(Error::Cache(format!(
                        "bad header {:?} in {}",
                        other,
                        path.display()
                    )))
                }
            }
            for (lineno, line) in lines.enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let (key, rest) = line
                    .split_once(' ')
                    .ok_or_else(|| Error::Cache(format!("malformed record at line {}", lineno + 2)))?;
                let values: std::result::Result<Vec<f64>, _> =
                    rest.split(' ').map(|v| v.parse::<f64>()).collect();
                let values =
                    values.map_err(|e| Error::Cache(format!("bad float at line {}: {e}", lineno + 2)))?;
                records.insert(key.to_string(), values);
            }
        }
        Ok(TheoryCache {
            path,
            records,
            hits: 0,
            misses: 0,
        })
    }

    pub fn get(&mut self, key: &str) -> Option<&Vec<f64>> {
        if self.records.contains_key(key) {
            self.hits += 1;
            self.records.get(key)
        } else {
            self.misses += 1;
            None
        }
    }

    /// Insert and append to disk immediately.
    pub fn put(&mut self, key: String, values: Vec<f64>) -> Result<()> {
        let existed = self.path.exists();
        let mut file = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)?;
        if !existed {
            writeln!(file, "{HEADER}")?;
        }
        let mut line = String::with_capacity(values.len() * 24 + 70);
        line.push_str(&key);
        for v in &values {
            line.push(' ');
            // round-trip exact float formatting
            line.push_str(&format!("{v:?}"));
        }
        writeln!(file, "{line}")?;
        self.records.insert(key, values);
        Ok(())
    }

    pub fn hits(&self) -> u64 {
        self.hits
    }

    pub fn misses(&self) -> u64 {
        self.misses
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

fn hex_string(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_hit_accounting() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("solver.thry1");
        let key = TheoryCache::key(&[("z", "1+0i".into()), ("eps", "0.01".into())]);
        {
            let mut cache = TheoryCache::open(&path).unwrap();
            assert!(cache.get(&key).is_none());
            cache.put(key.clone(), vec![1.0, -0.5, 3.25e-17, f64::MIN_POSITIVE]).unwrap();
        }
        let mut cache = TheoryCache::open(&path).unwrap();
        assert_eq!(cache.len(), 1);
        let got = cache.get(&key).unwrap().clone();
        assert_eq!(got, vec![1.0, -0.5, 3.25e-17, f64::MIN_POSITIVE]);
        assert_eq!(cache.hits(), 1);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("THRY1\n"));
    }

    #[test]
    fn rejects_bad_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.thry1");
        std::fs::write(&path, "NOPE\n").unwrap();
        assert!(TheoryCache::open(&path).is_err());
    }

    #[test]
    fn distinct_parameters_distinct_keys() {
        let a = TheoryCache::key(&[("z", "1".into()), ("gamma", "0.5".into())]);
        let b = TheoryCache::key(&[("z", "1".into()), ("gamma", "0.25".into())]);
        assert_ne!(a, b);
    }
}
