//! Fitted preprocessing steps and pipelines.
//!
//! Every step is fitted once on a training inventory and then replayed with
//! the stored parameters on any table with the same columns. Missing cells
//! pass through every step except the explicit imputation steps.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::schema::{Cell, FeatureSchema, FeatureSpec, Inventory, Row};
use crate::stats::{self, normal_cdf, normal_quantile};
use crate::{Error, Result, EPSILON};

/// Suffix of the indicator column appended for a column with missing cells.
pub const MISSING_SUFFIX: &str = "__missing";
pub const INDICATOR_PRESENT: &str = "present";
pub const INDICATOR_ABSENT: &str = "absent";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuantileTarget {
    Uniform,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Invertibility {
    Exact,
    Approximate,
    No,
}

/// An unfitted step as requested by the user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepRequest {
    MissingIndicator,
    ImputeMedian { column: String },
    ImputeKnn { column: String, k: usize },
    Winsorize { column: String, q_lo: f64, q_hi: f64 },
    Log { column: String },
    RankQuantile { column: String, target: QuantileTarget },
    Zscore { column: String },
}

/// Reference data kept by a fitted kNN imputer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnReference {
    pub distance_columns: Vec<String>,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    /// Raw distance-column values of every training row with the target present.
    pub points: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

/// A fitted step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransformStep {
    MissingIndicator { columns: Vec<String> },
    ImputeMedian { column: String, median: f64 },
    ImputeKnn { column: String, k: usize, reference: KnnReference },
    Winsorize { column: String, q_lo: f64, q_hi: f64, lo: f64, hi: f64 },
    Log { column: String },
    RankQuantile { column: String, target: QuantileTarget, reference: Vec<f64> },
    Zscore { column: String, mean: f64, sd: f64 },
}

fn numeric_column(schema: &FeatureSchema, column: &str) -> Result<usize> {
    let idx = schema.require(column)?;
    if !schema.feature(idx).kind.is_numeric() {
        return Err(Error::NotNumeric(column.to_string()));
    }
    Ok(idx)
}

fn map_numeric(inv: &Inventory, col: usize, mut f: impl FnMut(usize, f64) -> Result<f64>) -> Result<Inventory> {
    let mut rows = inv.rows().to_vec();
    for (r, row) in rows.iter_mut().enumerate() {
        if let Cell::Number(v) = row[col] {
            row[col] = Cell::Number(f(r, v)?);
        }
    }
    Inventory::new(inv.schema().clone(), rows)
}

fn bad_cell(inv: &Inventory, row: usize, col: usize, reason: impl Into<String>) -> Error {
    Error::Cell { row, column: inv.schema().feature(col).name.clone(), reason: reason.into() }
}

/// Append a `<name>__missing` indicator for every column holding a missing cell.
pub fn add_missing_indicators(inv: &Inventory) -> Result<Inventory> {
    let step = fit_step(inv, &StepRequest::MissingIndicator)?;
    step.apply(inv)
}

pub fn impute_median(inv: &Inventory, column: &str) -> Result<(Inventory, f64)> {
    let step = fit_step(inv, &StepRequest::ImputeMedian { column: column.to_string() })?;
    let out = step.apply(inv)?;
    match step {
        TransformStep::ImputeMedian { median, .. } => Ok((out, median)),
        _ => unreachable!(),
    }
}

pub fn impute_knn(inv: &Inventory, column: &str, k: usize) -> Result<Inventory> {
    fit_step(inv, &StepRequest::ImputeKnn { column: column.to_string(), k })?.apply(inv)
}

pub fn winsorize(inv: &Inventory, column: &str, q_lo: f64, q_hi: f64) -> Result<(Inventory, (f64, f64))> {
    let step = fit_step(inv, &StepRequest::Winsorize { column: column.to_string(), q_lo, q_hi })?;
    let out = step.apply(inv)?;
    match step {
        TransformStep::Winsorize { lo, hi, .. } => Ok((out, (lo, hi))),
        _ => unreachable!(),
    }
}

pub fn transform_log(inv: &Inventory, column: &str) -> Result<Inventory> {
    fit_step(inv, &StepRequest::Log { column: column.to_string() })?.apply(inv)
}

pub fn transform_rank_quantile(inv: &Inventory, column: &str, target: QuantileTarget) -> Result<(Inventory, Vec<f64>)> {
    let step = fit_step(inv, &StepRequest::RankQuantile { column: column.to_string(), target })?;
    let out = step.apply(inv)?;
    match step {
        TransformStep::RankQuantile { reference, .. } => Ok((out, reference)),
        _ => unreachable!(),
    }
}

pub fn transform_zscore(inv: &Inventory, column: &str) -> Result<(Inventory, f64, f64)> {
    let step = fit_step(inv, &StepRequest::Zscore { column: column.to_string() })?;
    let out = step.apply(inv)?;
    match step {
        TransformStep::Zscore { mean, sd, .. } => Ok((out, mean, sd)),
        _ => unreachable!(),
    }
}

/// Fit one step on `inv` without applying it.
pub fn fit_step(inv: &Inventory, request: &StepRequest) -> Result<TransformStep> {
    let schema = inv.schema();
    Ok(match request {
        StepRequest::MissingIndicator => {
            let columns: Vec<String> = (0..schema.len())
                .filter(|&c| inv.column(c).any(Cell::is_missing))
                .map(|c| schema.feature(c).name.clone())
                .collect();
            for name in &columns {
                let indicator = format!("{name}{MISSING_SUFFIX}");
                if schema.index_of(&indicator).is_some() {
                    return Err(Error::Schema(format!("indicator column `{indicator}` already exists")));
                }
            }
            TransformStep::MissingIndicator { columns }
        }
        StepRequest::ImputeMedian { column } => {
            let col = numeric_column(schema, column)?;
            let values = inv.numeric_values(col);
            if values.is_empty() {
                return Err(Error::InsufficientData(format!("column `{column}` has no observed values")));
            }
            TransformStep::ImputeMedian { column: column.clone(), median: stats::median(&values) }
        }
        StepRequest::ImputeKnn { column, k } => fit_knn(inv, column, *k)?,
        StepRequest::Winsorize { column, q_lo, q_hi } => {
            if !(0.0 <= *q_lo && q_lo < q_hi && *q_hi <= 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "winsorize needs 0 <= q_lo < q_hi <= 1, got ({q_lo}, {q_hi})"
                )));
            }
            let col = numeric_column(schema, column)?;
            let sorted = stats::sorted(&inv.numeric_values(col));
            if sorted.is_empty() {
                return Err(Error::InsufficientData(format!("column `{column}` has no observed values")));
            }
            TransformStep::Winsorize {
                column: column.clone(),
                q_lo: *q_lo,
                q_hi: *q_hi,
                lo: stats::quantile_sorted(&sorted, *q_lo),
                hi: stats::quantile_sorted(&sorted, *q_hi),
            }
        }
        StepRequest::Log { column } => {
            numeric_column(schema, column)?;
            TransformStep::Log { column: column.clone() }
        }
        StepRequest::RankQuantile { column, target } => {
            let col = numeric_column(schema, column)?;
            let reference = stats::sorted(&inv.numeric_values(col));
            let distinct = reference.windows(2).filter(|w| w[0] != w[1]).count() + 1;
            if reference.len() < 2 || distinct < 2 {
                return Err(Error::InsufficientData(format!("column `{column}` needs at least two distinct values")));
            }
            TransformStep::RankQuantile { column: column.clone(), target: *target, reference }
        }
        StepRequest::Zscore { column } => {
            let col = numeric_column(schema, column)?;
            let values = inv.numeric_values(col);
            if values.len() < 2 {
                return Err(Error::InsufficientData(format!("column `{column}` needs at least two observed values")));
            }
            TransformStep::Zscore { column: column.clone(), mean: stats::mean(&values), sd: stats::sample_sd(&values) }
        }
    })
}

fn fit_knn(inv: &Inventory, column: &str, k: usize) -> Result<TransformStep> {
    if k == 0 {
        return Err(Error::InvalidParameter("impute_knn needs k >= 1".into()));
    }
    let schema = inv.schema();
    let target = numeric_column(schema, column)?;
    let distance_idx: Vec<usize> =
        schema.numeric_indices().into_iter().filter(|&c| c != target && !inv.column(c).any(Cell::is_missing)).collect();
    if distance_idx.is_empty() || inv.n_rows() == 0 {
        return Err(Error::InsufficientData(format!(
            "no fully observed numeric column to measure distances for `{column}`"
        )));
    }
    let mut means = Vec::with_capacity(distance_idx.len());
    let mut sds = Vec::with_capacity(distance_idx.len());
    for &c in &distance_idx {
        let values = inv.numeric_values(c);
        means.push(stats::mean(&values));
        sds.push(stats::sample_sd(&values));
    }
    let mut points = Vec::new();
    let mut targets = Vec::new();
    for row in inv.rows() {
        if let Cell::Number(t) = row[target] {
            points.push(distance_idx.iter().map(|&c| row[c].as_number().unwrap_or(f64::NAN)).collect());
            targets.push(t);
        }
    }
    if targets.len() < k {
        return Err(Error::InsufficientData(format!(
            "column `{column}` has {} observed rows, fewer than k = {k}",
            targets.len()
        )));
    }
    Ok(TransformStep::ImputeKnn {
        column: column.to_string(),
        k,
        reference: KnnReference {
            distance_columns: distance_idx.iter().map(|&c| schema.feature(c).name.clone()).collect(),
            means,
            sds,
            points,
            targets,
        },
    })
}

impl KnnReference {
    /// Mean target of the `k` reference points nearest to `query`
    /// (z-scored Euclidean distance; ties go to the lower reference index).
    /// Dimensions where `query` is NaN are skipped.
    fn impute(&self, query: &[f64], k: usize) -> f64 {
        let mut dist: Vec<(f64, usize)> = self
            .points
            .iter()
            .enumerate()
            .map(|(j, p)| {
                let d2: f64 = query
                    .iter()
                    .zip(p)
                    .enumerate()
                    .filter(|(_, (q, _))| !q.is_nan())
                    .map(|(c, (q, v))| {
                        let z = (q - v) / (self.sds[c] + EPSILON);
                        z * z
                    })
                    .sum();
                (d2, j)
            })
            .collect();
        dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        dist[..k].iter().map(|&(_, j)| self.targets[j]).sum::<f64>() / k as f64
    }
}

/// Map `x` through the empirical plotting-position CDF of `reference`.
fn plotting_position(reference: &[f64], x: f64) -> f64 {
    let (values, positions) = distinct_positions(reference);
    if x <= values[0] {
        return positions[0];
    }
    let last = values.len() - 1;
    if x >= values[last] {
        return positions[last];
    }
    let hi = values.partition_point(|&v| v < x);
    if values[hi] == x {
        return positions[hi];
    }
    let lo = hi - 1;
    let t = (x - values[lo]) / (values[hi] - values[lo]);
    positions[lo] + t * (positions[hi] - positions[lo])
}

/// Empirical quantile function: inverse of [`plotting_position`].
fn position_to_value(reference: &[f64], u: f64) -> f64 {
    let (values, positions) = distinct_positions(reference);
    if u <= positions[0] {
        return values[0];
    }
    let last = values.len() - 1;
    if u >= positions[last] {
        return values[last];
    }
    let hi = positions.partition_point(|&p| p < u);
    if positions[hi] == u {
        return values[hi];
    }
    let lo = hi - 1;
    let t = (u - positions[lo]) / (positions[hi] - positions[lo]);
    values[lo] + t * (values[hi] - values[lo])
}

/// Distinct sorted values with plotting positions `(avg_rank - 0.5) / n`.
fn distinct_positions(reference: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = reference.len() as f64;
    let mut values = Vec::new();
    let mut positions = Vec::new();
    let mut i = 0;
    while i < reference.len() {
        let mut j = i;
        while j + 1 < reference.len() && reference[j + 1] == reference[i] {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        values.push(reference[i]);
        positions.push((avg_rank - 0.5) / n);
        i = j + 1;
    }
    (values, positions)
}

impl TransformStep {
    pub fn column(&self) -> Option<&str> {
        match self {
            TransformStep::MissingIndicator { .. } => None,
            TransformStep::ImputeMedian { column, .. }
            | TransformStep::ImputeKnn { column, .. }
            | TransformStep::Winsorize { column, .. }
            | TransformStep::Log { column }
            | TransformStep::RankQuantile { column, .. }
            | TransformStep::Zscore { column, .. } => Some(column),
        }
    }

    pub fn invertibility(&self) -> Invertibility {
        match self {
            TransformStep::Log { .. } | TransformStep::Zscore { .. } => Invertibility::Exact,
            TransformStep::RankQuantile { .. } => Invertibility::Approximate,
            // the indicator columns can be dropped, but imputation and clamping lose information
            TransformStep::MissingIndicator { .. } => Invertibility::Exact,
            TransformStep::ImputeMedian { .. } | TransformStep::ImputeKnn { .. } | TransformStep::Winsorize { .. } => {
                Invertibility::No
            }
        }
    }

    /// Apply the fitted step. Never refits.
    pub fn apply(&self, inv: &Inventory) -> Result<Inventory> {
        let schema = inv.schema();
        match self {
            TransformStep::MissingIndicator { columns } => {
                if columns.is_empty() {
                    return Ok(inv.clone());
                }
                let idx: Vec<usize> = columns.iter().map(|c| schema.require(c)).collect::<Result<_>>()?;
                let mut new_schema = schema.clone();
                for name in columns {
                    new_schema = new_schema.with_feature(FeatureSpec::categorical(
                        format!("{name}{MISSING_SUFFIX}"),
                        [INDICATOR_PRESENT, INDICATOR_ABSENT],
                    ))?;
                }
                let rows = inv
                    .rows()
                    .iter()
                    .map(|row| {
                        let mut out = row.clone();
                        out.extend(idx.iter().map(|&c| Cell::Category(usize::from(row[c].is_missing()))));
                        out
                    })
                    .collect();
                Inventory::new(new_schema, rows)
            }
            TransformStep::ImputeMedian { column, median } => {
                let col = numeric_column(schema, column)?;
                let mut rows = inv.rows().to_vec();
                for row in &mut rows {
                    if row[col].is_missing() {
                        row[col] = Cell::Number(*median);
                    }
                }
                Inventory::new(schema.clone(), rows)
            }
            TransformStep::ImputeKnn { column, k, reference } => {
                let col = numeric_column(schema, column)?;
                let dist_idx: Vec<usize> =
                    reference.distance_columns.iter().map(|c| numeric_column(schema, c)).collect::<Result<_>>()?;
                let mut rows: Vec<Row> = inv.rows().to_vec();
                for row in &mut rows {
                    if row[col].is_missing() {
                        let query: Vec<f64> =
                            dist_idx.iter().map(|&c| row[c].as_number().unwrap_or(f64::NAN)).collect();
                        row[col] = Cell::Number(reference.impute(&query, *k));
                    }
                }
                Inventory::new(schema.clone(), rows)
            }
            TransformStep::Winsorize { column, lo, hi, .. } => {
                let col = numeric_column(schema, column)?;
                map_numeric(inv, col, |_, v| Ok(v.clamp(*lo, *hi)))
            }
            TransformStep::Log { column } => {
                let col = numeric_column(schema, column)?;
                map_numeric(inv, col, |r, v| {
                    if v > 0.0 {
                        Ok(libm::log(v))
                    } else {
                        Err(bad_cell(inv, r, col, format!("log needs a positive value, found {v}")))
                    }
                })
            }
            TransformStep::RankQuantile { column, target, reference } => {
                let col = numeric_column(schema, column)?;
                map_numeric(inv, col, |_, v| {
                    let u = plotting_position(reference, v);
                    Ok(match target {
                        QuantileTarget::Uniform => u,
                        QuantileTarget::Normal => normal_quantile(u),
                    })
                })
            }
            TransformStep::Zscore { column, mean, sd } => {
                let col = numeric_column(schema, column)?;
                map_numeric(inv, col, |_, v| Ok((v - mean) / (sd + EPSILON)))
            }
        }
    }

    /// Undo the step where it is invertible; identity for non-invertible steps.
    pub fn invert(&self, inv: &Inventory) -> Result<Inventory> {
        let schema = inv.schema();
        match self {
            TransformStep::MissingIndicator { columns } => {
                if columns.is_empty() {
                    return Ok(inv.clone());
                }
                let drop: Vec<usize> =
                    columns.iter().map(|c| schema.require(&format!("{c}{MISSING_SUFFIX}"))).collect::<Result<_>>()?;
                let keep: Vec<usize> = (0..schema.len()).filter(|c| !drop.contains(c)).collect();
                let new_schema = FeatureSchema::new(keep.iter().map(|&c| schema.feature(c).clone()).collect())?;
                let rows = inv.rows().iter().map(|row| keep.iter().map(|&c| row[c]).collect()).collect();
                Inventory::new(new_schema, rows)
            }
            TransformStep::ImputeMedian { .. } | TransformStep::ImputeKnn { .. } | TransformStep::Winsorize { .. } => {
                Ok(inv.clone())
            }
            TransformStep::Log { column } => {
                let col = numeric_column(schema, column)?;
                map_numeric(inv, col, |_, v| Ok(libm::exp(v)))
            }
            TransformStep::RankQuantile { column, target, reference } => {
                let col = numeric_column(schema, column)?;
                map_numeric(inv, col, |_, v| {
                    let u = match target {
                        QuantileTarget::Uniform => v,
                        QuantileTarget::Normal => normal_cdf(v),
                    };
                    Ok(position_to_value(reference, u))
                })
            }
            TransformStep::Zscore { column, mean, sd } => {
                let col = numeric_column(schema, column)?;
                map_numeric(inv, col, |_, v| Ok(v * (sd + EPSILON) + mean))
            }
        }
    }
}

/// Ordered fitted steps plus a fingerprint of the table they were fitted on.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TransformPipeline {
    pub steps: Vec<TransformStep>,
    pub fitted_on: String,
}

impl TransformPipeline {
    pub fn apply(&self, inv: &Inventory) -> Result<Inventory> {
        let mut current = inv.clone();
        for (index, step) in self.steps.iter().enumerate() {
            current = step.apply(&current).map_err(|e| Error::Step { index, source: e.into() })?;
        }
        Ok(current)
    }

    /// Invert the steps in reverse order, skipping non-invertible ones.
    pub fn invert(&self, inv: &Inventory) -> Result<Inventory> {
        let mut current = inv.clone();
        for (index, step) in self.steps.iter().enumerate().rev() {
            current = step.invert(&current).map_err(|e| Error::Step { index, source: e.into() })?;
        }
        Ok(current)
    }
}

/// Fit and apply `requests` in order; each step is fitted on the output of
/// the previous one.
pub fn fit_apply_pipeline(inv: &Inventory, requests: &[StepRequest]) -> Result<(Inventory, TransformPipeline)> {
    let mut current = inv.clone();
    let mut steps = Vec::with_capacity(requests.len());
    for (index, request) in requests.iter().enumerate() {
        let wrap = |e: Error| Error::Step { index, source: e.into() };
        let step = fit_step(&current, request).map_err(wrap)?;
        current = step.apply(&current).map_err(wrap)?;
        steps.push(step);
    }
    Ok((current, TransformPipeline { steps, fitted_on: fingerprint(inv) }))
}

/// SHA-256 over the schema names and every cell, hex encoded.
pub fn fingerprint(inv: &Inventory) -> String {
    let mut hasher = Sha256::new();
    for name in inv.schema().names() {
        hasher.update(name.as_bytes());
        hasher.update([0u8]);
    }
    for row in inv.rows() {
        for cell in row {
            match cell {
                Cell::Number(v) => {
                    hasher.update([1u8]);
                    hasher.update(v.to_le_bytes());
                }
                Cell::Category(c) => {
                    hasher.update([2u8]);
                    hasher.update((*c as u64).to_le_bytes());
                }
                Cell::Missing => hasher.update([3u8]),
            }
        }
    }
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn numeric_inv(cols: &[(&str, Vec<Option<f64>>)]) -> Inventory {
        let schema =
            FeatureSchema::new(cols.iter().map(|(n, _)| FeatureSpec::numeric(*n).nullable()).collect()).unwrap();
        let n = cols[0].1.len();
        let rows =
            (0..n).map(|r| cols.iter().map(|(_, v)| v[r].map_or(Cell::Missing, Cell::Number)).collect()).collect();
        Inventory::new(schema, rows).unwrap()
    }

    fn col(inv: &Inventory, name: &str) -> Vec<Option<f64>> {
        let c = inv.schema().index_of(name).unwrap();
        inv.column(c).map(Cell::as_number).collect()
    }

    #[test]
    fn indicators_noop_without_missing() {
        let inv = numeric_inv(&[("a", vec![Some(1.0), Some(2.0)])]);
        assert_eq!(add_missing_indicators(&inv).unwrap(), inv);
    }

    #[test]
    fn indicator_marks_missing_row() {
        let inv = numeric_inv(&[("slope", vec![Some(1.0), Some(2.0), None, Some(4.0)])]);
        let out = add_missing_indicators(&inv).unwrap();
        assert_eq!(out.n_features(), 2);
        let ind = out.schema().index_of("slope__missing").unwrap();
        let labels: Vec<&str> =
            out.column(ind).map(|c| out.schema().feature(ind).categories[c.as_category().unwrap()].as_str()).collect();
        assert_eq!(labels, ["present", "present", "absent", "present"]);
        assert_eq!(col(&out, "slope"), col(&inv, "slope"));
    }

    #[test]
    fn indicators_follow_column_order() {
        let inv = numeric_inv(&[
            ("a", vec![None, Some(1.0)]),
            ("b", vec![Some(1.0), Some(1.0)]),
            ("c", vec![Some(2.0), None]),
        ]);
        let out = add_missing_indicators(&inv).unwrap();
        let names: Vec<&str> = out.schema().names().collect();
        assert_eq!(names, ["a", "b", "c", "a__missing", "c__missing"]);
    }

    #[test]
    fn indicator_name_collision_errors() {
        let schema =
            FeatureSchema::new(vec![FeatureSpec::numeric("a").nullable(), FeatureSpec::numeric("a__missing")]).unwrap();
        let inv = Inventory::new(schema, vec![vec![Cell::Missing, Cell::Number(1.0)]]).unwrap();
        assert!(add_missing_indicators(&inv).is_err());
    }

    #[test]
    fn median_imputation() {
        let inv = numeric_inv(&[("a", vec![Some(1.0), Some(2.0), None, Some(4.0)])]);
        let (out, median) = impute_median(&inv, "a").unwrap();
        assert_eq!(median, 2.0);
        assert_eq!(col(&out, "a")[2], Some(2.0));

        let inv = numeric_inv(&[("a", vec![Some(1.0), None, Some(3.0)])]);
        assert_eq!(impute_median(&inv, "a").unwrap().1, 2.0);

        let inv = numeric_inv(&[("a", vec![Some(5.0), Some(1.0)])]);
        let (out, median) = impute_median(&inv, "a").unwrap();
        assert_eq!(median, 3.0);
        assert_eq!(out, inv);

        let inv = numeric_inv(&[("a", vec![None, None])]);
        assert!(impute_median(&inv, "a").is_err());
    }

    #[test]
    fn median_rejects_categorical() {
        let schema = FeatureSchema::new(vec![FeatureSpec::categorical("c", ["x"])]).unwrap();
        let inv = Inventory::new(schema, vec![vec![Cell::Category(0)]]).unwrap();
        assert_eq!(impute_median(&inv, "c").unwrap_err(), Error::NotNumeric("c".into()));
    }

    #[test]
    fn knn_k1_copies_nearest() {
        let inv =
            numeric_inv(&[("x", vec![Some(0.0), Some(10.0), Some(0.1)]), ("y", vec![Some(7.0), Some(100.0), None])]);
        let out = impute_knn(&inv, "y", 1).unwrap();
        assert_eq!(col(&out, "y")[2], Some(7.0));
    }

    #[test]
    fn knn_k2_averages() {
        let inv = numeric_inv(&[
            ("x", vec![Some(0.0), Some(1.0), Some(0.5), Some(50.0)]),
            ("y", vec![Some(2.0), Some(4.0), None, Some(100.0)]),
        ]);
        let out = impute_knn(&inv, "y", 2).unwrap();
        assert_eq!(col(&out, "y")[2], Some(3.0));
    }

    #[test]
    fn knn_matches_exhaustive_oracle() {
        // 3 rows: two observed, one missing; with k = 2 the oracle is the mean
        // over every observed row, and with k = 1 the closest by enumeration.
        let x = [1.0, 4.0, 2.0];
        let y = [10.0, 40.0];
        let inv =
            numeric_inv(&[("x", x.iter().map(|v| Some(*v)).collect()), ("y", vec![Some(y[0]), Some(y[1]), None])]);
        let sd = stats::sample_sd(&x);
        let dists: Vec<f64> = (0..2).map(|j| ((x[2] - x[j]) / (sd + EPSILON)).abs()).collect();
        let nearest = if dists[0] <= dists[1] { 0 } else { 1 };
        assert_eq!(col(&impute_knn(&inv, "y", 2).unwrap(), "y")[2], Some((y[0] + y[1]) / 2.0));
        assert_eq!(col(&impute_knn(&inv, "y", 1).unwrap(), "y")[2], Some(y[nearest]));
    }

    #[test]
    fn knn_errors() {
        let inv = numeric_inv(&[("x", vec![Some(0.0), Some(1.0)]), ("y", vec![Some(2.0), None])]);
        assert!(impute_knn(&inv, "y", 2).is_err());
        assert!(impute_knn(&inv, "y", 0).is_err());
        let inv = numeric_inv(&[("y", vec![Some(2.0), None])]);
        assert!(impute_knn(&inv, "y", 1).is_err());
    }

    #[test]
    fn knn_ties_prefer_lower_index() {
        let inv = numeric_inv(&[("x", vec![Some(0.0), Some(2.0), Some(1.0)]), ("y", vec![Some(5.0), Some(9.0), None])]);
        assert_eq!(col(&impute_knn(&inv, "y", 1).unwrap(), "y")[2], Some(5.0));
    }

    #[test]
    fn winsorize_clamps_to_limits() {
        let step = TransformStep::Winsorize { column: "a".into(), q_lo: 0.1, q_hi: 0.9, lo: 1.0, hi: 10.0 };
        let inv = numeric_inv(&[("a", vec![Some(0.0), Some(5.0), Some(100.0), None])]);
        let out = step.apply(&inv).unwrap();
        assert_eq!(col(&out, "a"), vec![Some(1.0), Some(5.0), Some(10.0), None]);
    }

    #[test]
    fn winsorize_full_range_is_identity() {
        let inv = numeric_inv(&[("a", vec![Some(3.0), Some(-1.0), Some(8.0)])]);
        let (out, limits) = winsorize(&inv, "a", 0.0, 1.0).unwrap();
        assert_eq!(out, inv);
        assert_eq!(limits, (-1.0, 8.0));
    }

    #[test]
    fn winsorize_limits_match_quantile_oracle() {
        let values: Vec<f64> = (1..=10).map(f64::from).collect();
        // brute force: position q*(n-1) between order statistics
        let oracle = |q: f64| {
            let pos = q * 9.0;
            let lo = pos as usize;
            values[lo] + (pos - lo as f64) * (values[(lo + 1).min(9)] - values[lo])
        };
        let inv = numeric_inv(&[("a", values.iter().map(|v| Some(*v)).collect())]);
        let (_, (lo, hi)) = winsorize(&inv, "a", 0.1, 0.9).unwrap();
        assert!((lo - oracle(0.1)).abs() < 1e-12 && (lo - 1.9).abs() < 1e-12);
        assert!((hi - oracle(0.9)).abs() < 1e-12 && (hi - 9.1).abs() < 1e-12);
        assert!(winsorize(&inv, "a", 0.5, 0.5).is_err());
        assert!(winsorize(&inv, "a", -0.1, 0.5).is_err());
        let empty = numeric_inv(&[("a", vec![None])]);
        assert!(winsorize(&empty, "a", 0.1, 0.9).is_err());
    }

    #[test]
    fn log_transform() {
        let e = core::f64::consts::E;
        let inv = numeric_inv(&[("a", vec![Some(1.0), Some(e), Some(e * e)])]);
        let out = transform_log(&inv, "a").unwrap();
        let got = col(&out, "a");
        for (g, want) in got.iter().zip([0.0, 1.0, 2.0]) {
            assert!((g.unwrap() - want).abs() < 1e-15);
        }
        let bad = numeric_inv(&[("a", vec![Some(1.0), Some(0.0)])]);
        assert!(transform_log(&bad, "a").is_err());
    }

    #[test]
    fn rank_quantile_plotting_positions() {
        let inv = numeric_inv(&[("a", vec![Some(20.0), Some(10.0), Some(30.0)])]);
        let (out, reference) = transform_rank_quantile(&inv, "a", QuantileTarget::Uniform).unwrap();
        assert_eq!(reference, vec![10.0, 20.0, 30.0]);
        let got = col(&out, "a");
        let want = [3.0 / 6.0, 1.0 / 6.0, 5.0 / 6.0];
        for (g, w) in got.iter().zip(want) {
            assert!((g.unwrap() - w).abs() < 1e-15);
        }
        let (out, _) = transform_rank_quantile(&inv, "a", QuantileTarget::Normal).unwrap();
        assert_eq!(col(&out, "a")[0], Some(0.0));
    }

    #[test]
    fn rank_quantile_ties_average() {
        let inv = numeric_inv(&[("a", vec![Some(1.0), Some(1.0), Some(2.0), Some(3.0)])]);
        let (out, _) = transform_rank_quantile(&inv, "a", QuantileTarget::Uniform).unwrap();
        // ranks 1.5, 1.5, 3, 4 over n = 4
        let want = [0.25, 0.25, 0.625, 0.875];
        for (g, w) in col(&out, "a").iter().zip(want) {
            assert!((g.unwrap() - w).abs() < 1e-15);
        }
    }

    #[test]
    fn rank_quantile_rejects_constant() {
        let inv = numeric_inv(&[("a", vec![Some(4.0), Some(4.0)])]);
        assert!(transform_rank_quantile(&inv, "a", QuantileTarget::Uniform).is_err());
    }

    #[test]
    fn zscore_examples() {
        let inv = numeric_inv(&[("a", vec![Some(1.0), Some(2.0), Some(3.0)])]);
        let (out, mean, sd) = transform_zscore(&inv, "a").unwrap();
        assert_eq!((mean, sd), (2.0, 1.0));
        for (g, w) in col(&out, "a").iter().zip([-1.0, 0.0, 1.0]) {
            assert!((g.unwrap() - w).abs() < 1e-7);
        }
        let inv = numeric_inv(&[("a", vec![Some(5.0), Some(5.0), Some(5.0)])]);
        let (out, _, _) = transform_zscore(&inv, "a").unwrap();
        assert_eq!(col(&out, "a"), vec![Some(0.0); 3]);
        let inv = numeric_inv(&[("a", vec![Some(5.0), None])]);
        assert!(transform_zscore(&inv, "a").is_err());
    }

    #[test]
    fn empty_pipeline_is_identity() {
        let inv = numeric_inv(&[("a", vec![Some(1.0), None])]);
        let (out, pipeline) = fit_apply_pipeline(&inv, &[]).unwrap();
        assert_eq!(out, inv);
        assert!(pipeline.steps.is_empty());
    }

    #[test]
    fn median_then_zscore_pipeline() {
        let inv = numeric_inv(&[("c", vec![Some(1.0), Some(2.0), None, Some(4.0)])]);
        let requests = [StepRequest::ImputeMedian { column: "c".into() }, StepRequest::Zscore { column: "c".into() }];
        let (out, pipeline) = fit_apply_pipeline(&inv, &requests).unwrap();
        // hand computation over {1, 2, 2, 4}: mean 2.25, sample variance 1.5833..
        let imputed = [1.0, 2.0, 2.0, 4.0];
        let m = 2.25;
        let sd = libm::sqrt(((1.25f64).powi(2) + 2.0 * 0.0625 + 1.75f64.powi(2)) / 3.0);
        for (g, x) in col(&out, "c").iter().zip(imputed) {
            assert!((g.unwrap() - (x - m) / (sd + EPSILON)).abs() < 1e-12);
        }
        assert_eq!(pipeline.apply(&inv).unwrap(), out);
        assert_eq!(pipeline.apply(&inv).unwrap(), pipeline.apply(&inv).unwrap());
    }

    #[test]
    fn pipeline_reuses_fitted_parameters() {
        let train = numeric_inv(&[("c", vec![Some(1.0), Some(2.0), None, Some(4.0)])]);
        let (_, pipeline) = fit_apply_pipeline(&train, &[StepRequest::ImputeMedian { column: "c".into() }]).unwrap();
        let held_out = numeric_inv(&[("c", vec![Some(100.0), None, Some(200.0)])]);
        let out = pipeline.apply(&held_out).unwrap();
        assert_eq!(col(&out, "c")[1], Some(2.0));
        assert_eq!(pipeline.steps[0], TransformStep::ImputeMedian { column: "c".into(), median: 2.0 });
    }

    #[test]
    fn pipeline_error_carries_step_index() {
        let inv = numeric_inv(&[("c", vec![Some(0.0), Some(2.0)])]);
        let requests = [StepRequest::Zscore { column: "c".into() }, StepRequest::Log { column: "zz".into() }];
        match fit_apply_pipeline(&inv, &requests) {
            Err(Error::Step { index, .. }) => assert_eq!(index, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn pipeline_inverts_log_zscore_and_indicators() {
        let inv = numeric_inv(&[("c", vec![Some(1.5), Some(2.0), None, Some(40.0)])]);
        let requests = [
            StepRequest::MissingIndicator,
            StepRequest::Log { column: "c".into() },
            StepRequest::Zscore { column: "c".into() },
        ];
        let (out, pipeline) = fit_apply_pipeline(&inv, &requests).unwrap();
        assert_eq!(out.n_features(), 2);
        let back = pipeline.invert(&out).unwrap();
        assert_eq!(back.schema(), inv.schema());
        for (a, b) in col(&back, "c").iter().zip(col(&inv, "c")) {
            match (a, b) {
                (Some(a), Some(b)) => assert!((a - b).abs() <= 1e-9 * b.abs()),
                (None, None) => {}
                _ => panic!("missing mismatch"),
            }
        }
    }

    #[test]
    fn fingerprint_is_stable_and_sensitive() {
        let a = numeric_inv(&[("c", vec![Some(1.0), Some(2.0)])]);
        let b = numeric_inv(&[("c", vec![Some(1.0), Some(2.5)])]);
        assert_eq!(fingerprint(&a), fingerprint(&a.clone()));
        assert_ne!(fingerprint(&a), fingerprint(&b));
        assert_eq!(fingerprint(&a).len(), 64);
    }

    proptest! {
        #[test]
        fn log_round_trip(values in proptest::collection::vec(1e-6f64..1e6, 1..30)) {
            let inv = numeric_inv(&[("a", values.iter().map(|v| Some(*v)).collect())]);
            let step = fit_step(&inv, &StepRequest::Log { column: "a".into() }).unwrap();
            let back = step.invert(&step.apply(&inv).unwrap()).unwrap();
            for (g, w) in col(&back, "a").iter().zip(&values) {
                prop_assert!((g.unwrap() - w).abs() <= 1e-9 * w.abs());
            }
        }

        #[test]
        fn zscore_round_trip(values in proptest::collection::vec(-1e4f64..1e4, 2..30)) {
            let inv = numeric_inv(&[("a", values.iter().map(|v| Some(*v)).collect())]);
            let step = fit_step(&inv, &StepRequest::Zscore { column: "a".into() }).unwrap();
            let back = step.invert(&step.apply(&inv).unwrap()).unwrap();
            for (g, w) in col(&back, "a").iter().zip(&values) {
                prop_assert!((g.unwrap() - w).abs() <= 1e-9 * w.abs().max(1.0));
            }
        }

        #[test]
        fn rank_quantile_round_trip(values in proptest::collection::vec(-1e3f64..1e3, 2..40), normal in any::<bool>()) {
            prop_assume!(values.iter().any(|v| *v != values[0]));
            let target = if normal { QuantileTarget::Normal } else { QuantileTarget::Uniform };
            let inv = numeric_inv(&[("a", values.iter().map(|v| Some(*v)).collect())]);
            let step = fit_step(&inv, &StepRequest::RankQuantile { column: "a".into(), target }).unwrap();
            let back = step.invert(&step.apply(&inv).unwrap()).unwrap();
            for (g, w) in col(&back, "a").iter().zip(&values) {
                prop_assert!((g.unwrap() - w).abs() <= 1e-6 * w.abs().max(1.0));
            }
        }

        #[test]
        fn winsorized_values_within_limits(
            values in proptest::collection::vec(-1e3f64..1e3, 1..40),
            q_lo in 0.0f64..0.5,
            width in 0.01f64..0.5,
        ) {
            let inv = numeric_inv(&[("a", values.iter().map(|v| Some(*v)).collect())]);
            let (out, (lo, hi)) = winsorize(&inv, "a", q_lo, q_lo + width).unwrap();
            for v in col(&out, "a").into_iter().flatten() {
                prop_assert!(lo <= v && v <= hi);
            }
        }

        #[test]
        fn indicators_preserve_rows(mask in proptest::collection::vec(any::<bool>(), 1..20)) {
            let inv = numeric_inv(&[("a", mask.iter().enumerate().map(|(i, m)| (!m).then_some(i as f64)).collect())]);
            let out = add_missing_indicators(&inv).unwrap();
            prop_assert_eq!(out.n_rows(), inv.n_rows());
            for (a, b) in out.rows().iter().zip(inv.rows()) {
                prop_assert_eq!(&a[..1], &b[..]);
            }
        }
    }
}
