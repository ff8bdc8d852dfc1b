//! Line-delimited JSON feature store, one record per (sample, kind).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::spectral::FeatureVector;

/// Writes one JSON object per line. Floats use shortest round-trip formatting,
/// so reading the file back reproduces every value bit for bit.
pub fn write_features(path: &Path, records: &[FeatureVector]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_features(path: &Path) -> Result<Vec<FeatureVector>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: FeatureVector =
            serde_json::from_str(&line).map_err(|e| Error::Feature(format!("{}:{}: {e}", path.display(), n + 1)))?;
        records.push(record);
    }
    Ok(records)
}
