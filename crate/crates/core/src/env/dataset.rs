use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Labeled feature rows for classification bandits.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    classes: usize,
    features: Vec<f64>,
    labels: Vec<usize>,
}

impl Dataset {
    /// `rows_per_class` standard normal rows around each class mean, where
    /// class `c` has mean `separation * e_(c mod dim)`.
    pub fn gaussian_classes<R: Rng + ?Sized>(
        classes: usize,
        dim: usize,
        rows_per_class: usize,
        separation: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if classes == 0 || rows_per_class == 0 {
            return Err(Error::Config("need at least one class and one row per class".into()));
        }
        let mut features = Vec::with_capacity(classes * rows_per_class * dim);
        let mut labels = Vec::with_capacity(classes * rows_per_class);
        for c in 0..classes {
            for _ in 0..rows_per_class {
                features.extend((0..dim).map(|j| {
                    let z: f64 = StandardNormal.sample(rng);
                    z + if j == c % dim { separation } else { 0.0 }
                }));
                labels.push(c);
            }
        }
        Self::new(dim, features, labels)
    }

    /// `features` is `labels.len() x dim`, row-major.
    pub fn new(dim: usize, features: Vec<f64>, labels: Vec<usize>) -> Result<Self> {
        if dim == 0 || labels.is_empty() || features.len() != dim * labels.len() {
            return Err(Error::Input("dataset shape mismatch".into()));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("dataset contains non-finite features".into()));
        }
        let classes = labels.iter().max().map_or(0, |m| m + 1);
        Ok(Self { dim, classes, features, labels })
    }

    /// Read a CSV file with a header row, an integer `label` column and
    /// numeric feature columns (in file order).
    pub fn load_csv(path: &Path, bias: bool, standardize: bool) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path)?;
        let headers = reader.headers()?.clone();
        let label_col = headers
            .iter()
            .position(|h| h.trim() == "label")
            .ok_or_else(|| Error::Input(format!("{}: no `label` column", path.display())))?;
        let dim = headers.len() - 1;
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (row, record) in reader.records().enumerate() {
            let record = record?;
            for (col, field) in record.iter().enumerate() {
                let field = field.trim();
                if col == label_col {
                    let label = field.parse::<usize>().map_err(|_| {
                        Error::Input(format!("{}: row {}: bad label `{field}`", path.display(), row + 2))
                    })?;
                    labels.push(label);
                } else {
                    let value = field.parse::<f64>().map_err(|_| {
                        Error::Input(format!("{}: row {}: bad feature `{field}`", path.display(), row + 2))
                    })?;
                    features.push(value);
                }
            }
        }
        let mut data = Self::new(dim, features, labels)?;
        if standardize {
            data.standardize();
        }
        if bias {
            data.append_bias();
        }
        Ok(data)
    }

    /// Zero mean, unit variance per feature over all rows. Constant features
    /// are only centered.
    pub fn standardize(&mut self) {
        let (n, d) = (self.rows() as f64, self.dim);
        for j in 0..d {
            let mean = (0..self.rows()).map(|r| self.features[r * d + j]).sum::<f64>() / n;
            let var = (0..self.rows()).map(|r| (self.features[r * d + j] - mean).powi(2)).sum::<f64>() / n;
            let scale = if var > 0.0 { var.sqrt() } else { 1.0 };
            for r in 0..self.rows() {
                let v = &mut self.features[r * d + j];
                *v = (*v - mean) / scale;
            }
        }
    }

    /// Append a constant-one feature.
    pub fn append_bias(&mut self) {
        let d = self.dim;
        let mut features = Vec::with_capacity(self.rows() * (d + 1));
        for row in self.features.chunks_exact(d) {
            features.extend_from_slice(row);
            features.push(1.0);
        }
        self.features = features;
        self.dim += 1;
    }

    pub fn rows(&self) -> usize {
        self.labels.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn features(&self, row: usize) -> &[f64] {
        &self.features[row * self.dim..(row + 1) * self.dim]
    }

    pub fn label(&self, row: usize) -> usize {
        self.labels[row]
    }

    /// Write in the CSV layout read by [`Dataset::load_csv`].
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?;
        let mut header: Vec<String> = (0..self.dim).map(|j| format!("x{j}")).collect();
        header.push("label".into());
        writer.write_record(&header)?;
        for r in 0..self.rows() {
            let mut rec: Vec<String> = self.features(r).iter().map(|v| format!("{v:?}")).collect();
            rec.push(self.label(r).to_string());
            writer.write_record(&rec)?;
        }
        writer.flush()?;
        Ok(())
    }
}
