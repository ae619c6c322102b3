//! Dataset ingestion, CSV writing, and the jitter-plus-standardize
//! preprocessing with its invertible transform record.

use crate::error::{Error, Result};
use crate::state::Dataset;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use std::path::Path;

/// Affine transform applied during preprocessing: `y -> (y - center) / scale`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transform {
    pub center: f64,
    pub scale: f64,
}

impl Transform {
    pub fn identity() -> Self {
        Self { center: 0.0, scale: 1.0 }
    }

    pub fn forward(&self, y: f64) -> f64 {
        (y - self.center) / self.scale
    }

    pub fn inverse(&self, z: f64) -> f64 {
        z * self.scale + self.center
    }

    /// Density transported back to the original scale.
    pub fn density_to_original(&self, density_model_scale: f64) -> f64 {
        density_model_scale / self.scale
    }
}

/// Optional jitter followed by optional pooled standardization. The returned
/// transform maps original-scale values into the model scale; with
/// standardization off it is the identity.
pub fn preprocess<R: Rng + ?Sized>(
    data: &Dataset,
    jitter_variance: f64,
    standardize: bool,
    rng: &mut R,
) -> Result<(Dataset, Transform)> {
    if jitter_variance < 0.0 || !jitter_variance.is_finite() {
        return Err(Error::Config(format!("jitter variance must be >= 0, got {jitter_variance}")));
    }
    let mut groups: Vec<Vec<f64>> = data.groups().to_vec();
    if jitter_variance > 0.0 {
        let noise = Normal::new(0.0, jitter_variance.sqrt()).expect("valid normal");
        for g in &mut groups {
            for y in g.iter_mut() {
                *y += noise.sample(rng);
            }
        }
    }
    let transform = if standardize {
        let n = data.total_len() as f64;
        let mean = groups.iter().flatten().sum::<f64>() / n;
        let ss: f64 = groups.iter().flatten().map(|y| (y - mean) * (y - mean)).sum();
        let sd = (ss / (n - 1.0)).sqrt();
        if !(sd > 0.0) {
            return Err(Error::Data("cannot standardize: zero pooled standard deviation".into()));
        }
        for g in &mut groups {
            for y in g.iter_mut() {
                *y = (*y - mean) / sd;
            }
        }
        Transform { center: mean, scale: sd }
    } else {
        Transform::identity()
    };
    Ok((Dataset::new(groups, data.group_ids().to_vec())?, transform))
}

/// Parse `group_id,value` rows; an unparseable second field in the first
/// line is treated as a header. Groups keep first-appearance order.
pub fn ingest_csv(path: &Path) -> Result<Dataset> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
    let reader = std::io::BufReader::new(file);
    let mut order: Vec<String> = Vec::new();
    let mut groups: std::collections::HashMap<String, Vec<f64>> = Default::default();
    for (idx, line) in reader.lines().enumerate() {
        let row = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let (id, value_str) = trimmed.split_once(',').ok_or_else(|| {
            Error::Data(format!("row {row}: expected 'group_id,value', got '{trimmed}'"))
        })?;
        let value_str = value_str.trim();
        let value: f64 = match value_str.parse() {
            Ok(v) => v,
            Err(_) if row == 1 => continue, // header
            Err(_) => {
                return Err(Error::Data(format!(
                    "row {row}: cannot parse value '{value_str}'"
                )))
            }
        };
        if !value.is_finite() {
            return Err(Error::Data(format!("row {row}: non-finite value '{value_str}'")));
        }
        let id = id.trim().to_string();
        if !groups.contains_key(&id) {
            order.push(id.clone());
        }
        groups.entry(id).or_default().push(value);
    }
    if order.is_empty() {
        return Err(Error::Data(format!("{}: no data rows", path.display())));
    }
    let data: Vec<Vec<f64>> = order.iter().map(|id| groups.remove(id).unwrap()).collect();
    Dataset::new(data, order)
}

/// Write `group_id,value` rows with a header; floats print in shortest
/// round-trip form.
pub fn write_csv(path: &Path, data: &Dataset) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "group,value")?;
    for (id, group) in data.group_ids().iter().zip(data.groups()) {
        for y in group {
            writeln!(w, "{id},{y}")?;
        }
    }
    w.flush()?;
    Ok(())
}
