//! Covariate standardization and the dense design matrix.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// SDs below this are treated as constant columns.
pub const MIN_SD: f64 = 1e-12;

/// Per-covariate centering and scaling learned on the training rows.
///
/// `NaN` marks a missing value: it is ignored when fitting and maps to 0
/// (the training mean) when transforming.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub names: Vec<String>,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    /// Constant columns are dropped from the design.
    pub kept: Vec<bool>,
}

impl Standardizer {
    pub fn fit(names: &[String], rows: &[Vec<f64>]) -> Result<Self> {
        let p = names.len();
        let mut means = alloc::vec![0.0; p];
        let mut sds = alloc::vec![0.0; p];
        let mut kept = alloc::vec![false; p];
        for (j, name) in names.iter().enumerate() {
            let mut column = Vec::with_capacity(rows.len());
            for row in rows {
                if row.len() != p {
                    return Err(Error::Shape {
                        expected: p,
                        actual: row.len(),
                    });
                }
                if !row[j].is_nan() {
                    column.push(row[j]);
                }
            }
            means[j] = crate::stats::mean(&column);
            sds[j] = crate::stats::sample_sd(&column);
            kept[j] = sds[j].is_finite() && sds[j] > MIN_SD;
            if !kept[j] {
                log::warn!("covariate {name} is constant on the training rows; dropped");
                if !means[j].is_finite() {
                    means[j] = 0.0;
                }
                sds[j] = 1.0;
            }
        }
        Ok(Standardizer {
            names: names.to_vec(),
            means,
            sds,
            kept,
        })
    }

    /// Leaves every covariate unchanged.
    pub fn identity(names: &[String]) -> Self {
        let p = names.len();
        Standardizer {
            names: names.to_vec(),
            means: alloc::vec![0.0; p],
            sds: alloc::vec![1.0; p],
            kept: alloc::vec![true; p],
        }
    }

    pub fn n_inputs(&self) -> usize {
        self.names.len()
    }

    pub fn n_kept(&self) -> usize {
        self.kept.iter().filter(|k| **k).count()
    }

    pub fn kept_names(&self) -> Vec<String> {
        self.names
            .iter()
            .zip(&self.kept)
            .filter(|(_, k)| **k)
            .map(|(n, _)| n.clone())
            .collect()
    }

    /// Standardized values of the kept covariates.
    pub fn transform(&self, raw: &[f64]) -> Result<Vec<f64>> {
        if raw.len() != self.names.len() {
            return Err(Error::Shape {
                expected: self.names.len(),
                actual: raw.len(),
            });
        }
        let mut out = Vec::with_capacity(self.n_kept());
        for (j, &v) in raw.iter().enumerate() {
            if !self.kept[j] {
                continue;
            }
            if v.is_nan() {
                out.push(0.0);
            } else if !v.is_finite() {
                return Err(Error::NumericDomain(format!(
                    "covariate {} is not finite",
                    self.names[j]
                )));
            } else {
                out.push((v - self.means[j]) / self.sds[j]);
            }
        }
        Ok(out)
    }

    /// Inverse of [`transform`](Self::transform); dropped columns come back
    /// as their constant training value.
    pub fn inverse(&self, standardized: &[f64]) -> Result<Vec<f64>> {
        if standardized.len() != self.n_kept() {
            return Err(Error::Shape {
                expected: self.n_kept(),
                actual: standardized.len(),
            });
        }
        let mut it = standardized.iter();
        Ok((0..self.names.len())
            .map(|j| {
                if self.kept[j] {
                    it.next().expect("length checked") * self.sds[j] + self.means[j]
                } else {
                    self.means[j]
                }
            })
            .collect())
    }
}

/// Row-major covariates with their targets.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Design {
    pub n_cov: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Design {
    pub fn new(n_cov: usize) -> Self {
        Design {
            n_cov,
            x: Vec::new(),
            y: Vec::new(),
        }
    }

    pub fn from_rows(rows: &[Vec<f64>], y: &[f64]) -> Result<Self> {
        let n_cov = rows.first().map_or(0, Vec::len);
        let mut d = Design::new(n_cov);
        if rows.len() != y.len() {
            return Err(Error::Shape {
                expected: rows.len(),
                actual: y.len(),
            });
        }
        for (r, &t) in rows.iter().zip(y) {
            d.push(r, t)?;
        }
        Ok(d)
    }

    pub fn push(&mut self, row: &[f64], target: f64) -> Result<()> {
        if row.len() != self.n_cov {
            return Err(Error::Shape {
                expected: self.n_cov,
                actual: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericDomain("covariates must be finite".into()));
        }
        if !(0.0..1.0).contains(&target) {
            return Err(Error::invalid(format!("target BRE must lie in [0, 1), got {target}")));
        }
        self.x.extend_from_slice(row);
        self.y.push(target);
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.n_cov..(i + 1) * self.n_cov]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.x.chunks_exact(self.n_cov.max(1)).take(self.n_rows())
    }

    pub fn zero_fraction(&self) -> f64 {
        if self.y.is_empty() {
            return f64::NAN;
        }
        self.y.iter().filter(|v| **v == 0.0).count() as f64 / self.y.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn constant_column_dropped() {
        let names: Vec<String> = ["a", "b"].iter().map(|s| String::from(*s)).collect();
        let rows = vec![vec![1.0, 5.0], vec![2.0, 5.0], vec![3.0, 5.0]];
        let s = Standardizer::fit(&names, &rows).unwrap();
        assert_eq!(s.kept, [true, false]);
        assert_eq!(s.transform(&[2.0, 5.0]).unwrap(), [0.0]);
        assert_eq!(s.inverse(&[1.0]).unwrap(), [3.0, 5.0]);
    }

    #[test]
    fn missing_maps_to_zero() {
        let names: Vec<String> = vec!["p".into()];
        let rows = vec![vec![1.0], vec![f64::NAN], vec![3.0]];
        let s = Standardizer::fit(&names, &rows).unwrap();
        assert_eq!(s.means[0], 2.0);
        assert_eq!(s.transform(&[f64::NAN]).unwrap(), [0.0]);
    }

    #[test]
    fn design_rejects_bad_targets() {
        let mut d = Design::new(1);
        assert!(d.push(&[0.0], 1.0).is_err());
        assert!(d.push(&[f64::INFINITY], 0.2).is_err());
        assert!(d.push(&[0.0, 1.0], 0.2).is_err());
        d.push(&[0.3], 0.0).unwrap();
        assert_eq!(d.n_rows(), 1);
    }
}
