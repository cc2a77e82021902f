//! Metric reports as JSON and flat CSV, plus plot-ready density and CDF grids.

use std::path::Path;

use invsynth_core::metrics::{self, FeatureMetrics, MetricReport, KDE_GRID_POINTS};
use invsynth_core::schema::{FeatureSchema, Inventory};
use invsynth_core::{stats, EPSILON};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::io::{format_number, kind_label};

/// Scalar metric columns of the flat per-feature table.
pub const FLAT_COLUMNS: [&str; 12] = [
    "abs_err",
    "rel_err",
    "sd_diff",
    "rel_sd_diff",
    "bias_per_sd",
    "w1",
    "w1_per_sd",
    "ks_stat",
    "js_div",
    "tv_distance",
    "max_freq_abs_err",
    "n_categories",
];

fn num(v: f64) -> Value {
    json!(v)
}

fn feature_json(schema: &FeatureSchema, index: usize, m: &FeatureMetrics) -> Value {
    let mut obj = Map::new();
    for (name, v) in m.scalars() {
        obj.insert(name.into(), num(v));
    }
    match m {
        FeatureMetrics::Numeric(n) => {
            obj.insert("w1".into(), num(n.w1));
        }
        FeatureMetrics::Categorical(c) => {
            let labels = &schema.feature(index).categories;
            let per: Map<String, Value> = labels.iter().cloned().zip(c.freq_abs_err.iter().map(|v| num(*v))).collect();
            obj.insert("freq_abs_err".into(), Value::Object(per));
        }
    }
    Value::Object(obj)
}

/// `{meta, features: {name: {metric: value}}, dependence: [...], aggregates: {...}}`.
pub fn report_json(report: &MetricReport, schema: &FeatureSchema) -> Value {
    let features: Map<String, Value> =
        report.features.iter().enumerate().map(|(i, (name, m))| (name.clone(), feature_json(schema, i, m))).collect();
    let dependence: Vec<Value> = report
        .dependence
        .iter()
        .map(|d| json!({ "a": d.a, "b": d.b, "pearson_delta": d.pearson_delta, "spearman_delta": d.spearman_delta }))
        .collect();
    let aggregates: Map<String, Value> =
        report.aggregates.iter().map(|(name, a)| (name.clone(), json!({ "mean": a.mean, "max": a.max }))).collect();
    json!({
        "meta": {
            "method": report.meta.method,
            "seed": report.meta.seed,
            "n_orig": report.meta.n_orig,
            "n_gen": report.meta.n_gen,
            "log_base": "e",
            "sd_divisor": "n-1",
            "epsilon": EPSILON,
            "kde_grid_points": KDE_GRID_POINTS,
            "kde_bandwidth": "silverman, pooled",
        },
        "features": features,
        "dependence": dependence,
        "aggregates": aggregates,
    })
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(file))
}

/// Write rows of string fields as CSV.
pub fn write_rows(path: &Path, rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv_writer(path)?;
    for row in rows {
        w.write_record(row).map_err(|e| Error::format(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// One row per feature, blank where a metric does not apply.
pub fn flat_table(report: &MetricReport, schema: &FeatureSchema) -> Vec<Vec<String>> {
    let mut header = vec!["feature".to_string(), "kind".to_string()];
    header.extend(FLAT_COLUMNS.iter().map(|s| s.to_string()));
    let mut rows = vec![header];
    for (i, (name, m)) in report.features.iter().enumerate() {
        let scalars = m.scalars();
        let mut row = vec![name.clone(), kind_label(schema.feature(i).kind).to_string()];
        for col in FLAT_COLUMNS {
            let v = match (col, m) {
                ("w1", FeatureMetrics::Numeric(n)) => Some(n.w1),
                ("n_categories", FeatureMetrics::Categorical(c)) => Some(c.freq_abs_err.len() as f64),
                _ => scalars.iter().find(|(k, _)| *k == col).map(|(_, v)| *v),
            };
            row.push(v.map(format_number).unwrap_or_default());
        }
        rows.push(row);
    }
    rows
}

/// KDE grid per numeric feature: `x` then one density column per sample.
pub fn kde_table(samples: &[(&str, &[f64])]) -> Result<Vec<Vec<String>>> {
    let data: Vec<&[f64]> = samples.iter().map(|(_, s)| *s).collect();
    let grid = metrics::kde_grid(&data, KDE_GRID_POINTS)?;
    let mut rows = vec![std::iter::once("x".to_string()).chain(samples.iter().map(|(n, _)| n.to_string())).collect()];
    for (g, x) in grid.x.iter().enumerate() {
        let mut row = vec![format_number(*x)];
        row.extend(grid.densities.iter().map(|d| format_number(d[g])));
        rows.push(row);
    }
    Ok(rows)
}

/// Empirical CDFs of every sample on a shared grid over the pooled range.
pub fn cdf_table(samples: &[(&str, &[f64])], points: usize) -> Vec<Vec<String>> {
    let sorted: Vec<Vec<f64>> = samples.iter().map(|(_, s)| stats::sorted(s)).collect();
    let lo = sorted.iter().filter_map(|s| s.first()).copied().fold(f64::INFINITY, f64::min);
    let hi = sorted.iter().filter_map(|s| s.last()).copied().fold(f64::NEG_INFINITY, f64::max);
    let mut rows = vec![std::iter::once("x".to_string()).chain(samples.iter().map(|(n, _)| n.to_string())).collect()];
    let step = (hi - lo) / (points.max(2) - 1) as f64;
    for i in 0..points {
        let x = if i + 1 == points { hi } else { lo + i as f64 * step };
        let mut row = vec![format_number(x)];
        for s in &sorted {
            let below = s.partition_point(|v| *v <= x);
            row.push(format_number(below as f64 / s.len().max(1) as f64));
        }
        rows.push(row);
    }
    rows
}

/// Category frequencies of every table for categorical feature `index`.
pub fn frequency_table(index: usize, tables: &[(&str, &Inventory)]) -> Vec<Vec<String>> {
    let labels = &tables[0].1.schema().feature(index).categories;
    let mut rows =
        vec![std::iter::once("category".to_string()).chain(tables.iter().map(|(n, _)| n.to_string())).collect()];
    let freqs: Vec<Vec<f64>> = tables
        .iter()
        .map(|(_, inv)| {
            let codes: Vec<usize> = inv.column(index).filter_map(|c| c.as_category()).collect();
            let mut f = vec![0.0; labels.len()];
            codes.iter().for_each(|c| f[*c] += 1.0);
            f.iter().map(|v| v / codes.len().max(1) as f64).collect()
        })
        .collect();
    for (c, label) in labels.iter().enumerate() {
        let mut row = vec![label.clone()];
        row.extend(freqs.iter().map(|f| format_number(f[c])));
        rows.push(row);
    }
    rows
}
