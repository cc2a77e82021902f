//! Comparison generators: independent-marginal Monte Carlo and SMOTE.

use alloc::format;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::schema::{Cell, FeatureSchema, Inventory, Row};
use crate::stats;
use crate::{Error, Result, EPSILON};

#[derive(Debug, Clone, PartialEq)]
pub enum Marginal {
    /// Gaussian KDE: resample a training value and add kernel noise.
    Numeric {
        sorted_values: Vec<f64>,
        bandwidth: f64,
    },
    Categorical {
        frequencies: Vec<f64>,
    },
}

/// Independently fitted per-column distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalModel {
    schema: FeatureSchema,
    marginals: Vec<Marginal>,
}

impl MarginalModel {
    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn marginals(&self) -> &[Marginal] {
        &self.marginals
    }
}

fn check_source(train: &Inventory) -> Result<()> {
    if train.n_rows() == 0 {
        return Err(Error::InsufficientData("cannot fit on an empty table".into()));
    }
    if train.has_missing() {
        return Err(Error::InsufficientData("table contains missing cells; impute them first".into()));
    }
    Ok(())
}

pub fn mc_fit(train: &Inventory) -> Result<MarginalModel> {
    check_source(train)?;
    let schema = train.schema().clone();
    let n = train.n_rows() as f64;
    let marginals = (0..schema.len())
        .map(|c| {
            let spec = schema.feature(c);
            if spec.kind.is_numeric() {
                let values = train.numeric_values(c);
                let bandwidth = stats::silverman_bandwidth(&values);
                Marginal::Numeric { sorted_values: stats::sorted(&values), bandwidth }
            } else {
                let mut counts = alloc::vec![0usize; spec.categories.len()];
                for cell in train.column(c) {
                    if let Cell::Category(k) = cell {
                        counts[*k] += 1;
                    }
                }
                Marginal::Categorical { frequencies: counts.iter().map(|&k| k as f64 / n).collect() }
            }
        })
        .collect();
    Ok(MarginalModel { schema, marginals })
}

/// Draw `n` rows, every column independently of the others.
pub fn mc_generate(model: &MarginalModel, n: usize, seed: u64) -> Result<Inventory> {
    if n == 0 {
        return Err(Error::InvalidParameter("row count must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Row> = (0..n)
        .map(|_| {
            model
                .marginals
                .iter()
                .map(|m| match m {
                    Marginal::Numeric { sorted_values, bandwidth } => {
                        let j = rng.random_range(0..sorted_values.len());
                        let z: f64 = StandardNormal.sample(&mut rng);
                        Cell::Number(sorted_values[j] + bandwidth * z)
                    }
                    Marginal::Categorical { frequencies } => Cell::Category(stats::draw_index(frequencies, &mut rng)),
                })
                .collect()
        })
        .collect();
    Inventory::new(model.schema.clone(), rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SmoteConfig {
    /// Neighbors considered per base row.
    pub k: usize,
    /// Synthetic rows to produce.
    pub n_new: usize,
    pub seed: u64,
}

/// One SMOTE row together with how it was built.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoteSample {
    pub row: Row,
    pub base: usize,
    pub neighbor: usize,
    pub lambda: f64,
}

/// k nearest rows of every source row (self excluded, ties by index), under
/// Euclidean distance over z-scored numeric columns plus a squared penalty
/// per categorical mismatch equal to the median numeric column SD.
pub fn smote_neighbors(source: &Inventory, k: usize) -> Result<Vec<Vec<usize>>> {
    let schema = source.schema();
    let numeric = schema.numeric_indices();
    let categorical: Vec<usize> = (0..schema.len()).filter(|c| !numeric.contains(c)).collect();
    let n = source.n_rows();
    let mut z: Vec<Vec<f64>> = alloc::vec![Vec::with_capacity(numeric.len()); n];
    let mut sds = Vec::with_capacity(numeric.len());
    for &c in &numeric {
        let values = source.numeric_values(c);
        let (m, s) = (stats::mean(&values), stats::sample_sd(&values));
        let scaled: Vec<f64> = values.iter().map(|v| (v - m) / (s + EPSILON)).collect();
        sds.push(stats::sample_sd(&scaled));
        for (row, v) in z.iter_mut().zip(scaled) {
            row.push(v);
        }
    }
    let penalty = stats::median(&sds);
    let penalty2 = penalty * penalty;
    let rows = source.rows();
    Ok((0..n)
        .map(|i| {
            let mut dist: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let num: f64 = z[i].iter().zip(&z[j]).map(|(a, b)| (a - b) * (a - b)).sum();
                    let mismatches = categorical.iter().filter(|&&c| rows[i][c] != rows[j][c]).count();
                    (num + mismatches as f64 * penalty2, j)
                })
                .collect();
            dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            dist.truncate(k);
            dist.into_iter().map(|(_, j)| j).collect()
        })
        .collect())
}

/// SMOTE with the SMOTE-NC treatment of categorical columns.
pub fn smote_generate_traced(source: &Inventory, cfg: &SmoteConfig) -> Result<Vec<SmoteSample>> {
    check_source(source)?;
    if cfg.k == 0 {
        return Err(Error::InvalidParameter("SMOTE needs k >= 1".into()));
    }
    if cfg.k >= source.n_rows() {
        return Err(Error::InsufficientData(format!(
            "SMOTE needs more than k = {} source rows, found {}",
            cfg.k,
            source.n_rows()
        )));
    }
    let schema = source.schema();
    if schema.numeric_indices().is_empty() {
        return Err(Error::InvalidParameter("SMOTE needs at least one numeric column".into()));
    }
    let neighbors = smote_neighbors(source, cfg.k)?;
    let rows = source.rows();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::with_capacity(cfg.n_new);
    for _ in 0..cfg.n_new {
        let base = rng.random_range(0..rows.len());
        let nn = &neighbors[base];
        let neighbor = nn[rng.random_range(0..nn.len())];
        let lambda: f64 = rng.random();
        let row = (0..schema.len())
            .map(|c| match (rows[base][c], rows[neighbor][c]) {
                (Cell::Number(a), Cell::Number(b)) => {
                    // clamp away the rounding of a + lambda (b - a)
                    Cell::Number((a + lambda * (b - a)).clamp(a.min(b), a.max(b)))
                }
                (Cell::Category(own), _) => {
                    let mut counts = alloc::vec![0usize; schema.feature(c).categories.len()];
                    for &j in nn {
                        if let Cell::Category(label) = rows[j][c] {
                            counts[label] += 1;
                        }
                    }
                    let best = counts.iter().copied().max().unwrap_or(0);
                    let leaders: Vec<usize> = (0..counts.len()).filter(|&l| counts[l] == best).collect();
                    Cell::Category(if leaders.len() == 1 { leaders[0] } else { own })
                }
                (other, _) => other,
            })
            .collect();
        out.push(SmoteSample { row, base, neighbor, lambda });
    }
    Ok(out)
}

pub fn smote_generate(source: &Inventory, cfg: &SmoteConfig) -> Result<Inventory> {
    let rows = smote_generate_traced(source, cfg)?.into_iter().map(|s| s.row).collect();
    Inventory::new(source.schema().clone(), rows)
}
