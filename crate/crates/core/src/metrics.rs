//! Fidelity metrics comparing a generated sample to an original one.
//!
//! Every per-SD normalization uses the sample SD (divisor n - 1) of the
//! original sample plus [`EPSILON`]. Divergences use the natural logarithm.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::schema::{Cell, FeatureSchema, Inventory};
use crate::stats::{self, normal_pdf};
use crate::{Error, Result, EPSILON};

/// Grid size of the kernel density estimates compared by [`js_divergence`].
pub const KDE_GRID_POINTS: usize = 512;
/// The grid extends this many bandwidths past the pooled sample range.
pub const KDE_GRID_PAD: f64 = 3.0;
/// Probabilities at or below this are treated as zero in KL terms.
pub const PROB_FLOOR: f64 = 1e-12;

fn nonempty(xs: &[f64], what: &str) -> Result<()> {
    if xs.is_empty() {
        Err(Error::InsufficientData(format!("{what} sample is empty")))
    } else {
        Ok(())
    }
}

fn at_least_two(xs: &[f64], what: &str) -> Result<()> {
    if xs.len() < 2 {
        Err(Error::InsufficientData(format!("{what} sample needs at least two values")))
    } else {
        Ok(())
    }
}

/// `(|mean(orig) - mean(gen)|, that / (|mean(orig)| + eps))`.
pub fn mean_metrics(orig: &[f64], gen: &[f64]) -> Result<(f64, f64)> {
    nonempty(orig, "original")?;
    nonempty(gen, "generated")?;
    let m = stats::mean(orig);
    let abs_err = (m - stats::mean(gen)).abs();
    Ok((abs_err, abs_err / (m.abs() + EPSILON)))
}

/// `(|s_orig - s_gen|, that / (s_orig + eps))`.
pub fn sd_metrics(orig: &[f64], gen: &[f64]) -> Result<(f64, f64)> {
    at_least_two(orig, "original")?;
    at_least_two(gen, "generated")?;
    let s = stats::sample_sd(orig);
    let diff = (s - stats::sample_sd(gen)).abs();
    Ok((diff, diff / (s + EPSILON)))
}

/// Mean error in units of the original SD.
pub fn bias_per_sd(orig: &[f64], gen: &[f64]) -> Result<f64> {
    at_least_two(orig, "original")?;
    nonempty(gen, "generated")?;
    Ok((stats::mean(orig) - stats::mean(gen)).abs() / (stats::sample_sd(orig) + EPSILON))
}

/// One-dimensional W1: integral over (0, 1) of the absolute difference of the
/// two empirical quantile functions, walked over the merged breakpoints
/// `i / n` and `j / m`.
pub fn wasserstein1(orig: &[f64], gen: &[f64]) -> Result<f64> {
    nonempty(orig, "original")?;
    nonempty(gen, "generated")?;
    let a = stats::sorted(orig);
    let b = stats::sorted(gen);
    let (n, m) = (a.len() as u128, b.len() as u128);
    // positions counted in units of 1 / (n m)
    let denom = (n * m) as f64;
    let (mut i, mut j) = (0usize, 0usize);
    let mut pos: u128 = 0;
    let mut total = 0.0;
    while i < a.len() && j < b.len() {
        let next_a = (i as u128 + 1) * m;
        let next_b = (j as u128 + 1) * n;
        let next = next_a.min(next_b);
        total += (next - pos) as f64 / denom * (a[i] - b[j]).abs();
        pos = next;
        if next_a == next {
            i += 1;
        }
        if next_b == next {
            j += 1;
        }
    }
    Ok(total)
}

pub fn wasserstein_per_sd(orig: &[f64], gen: &[f64]) -> Result<f64> {
    at_least_two(orig, "original")?;
    Ok(wasserstein1(orig, gen)? / (stats::sample_sd(orig) + EPSILON))
}

/// Two-sample KS statistic: largest gap between the right-continuous
/// empirical CDFs over the pooled sample points.
pub fn ks_statistic(orig: &[f64], gen: &[f64]) -> Result<f64> {
    nonempty(orig, "original")?;
    nonempty(gen, "generated")?;
    let a = stats::sorted(orig);
    let b = stats::sorted(gen);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    Ok(d)
}

/// Jensen-Shannon divergence of two discrete distributions (normalized
/// first). Entries at or below [`PROB_FLOOR`] contribute nothing.
pub fn js_divergence_discrete(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() || p.is_empty() {
        return Err(Error::InvalidParameter("distributions must have the same non-zero length".into()));
    }
    let norm = |v: &[f64]| -> Result<Vec<f64>> {
        let s: f64 = v.iter().sum();
        if s.is_nan() || s <= 0.0 || v.iter().any(|x| *x < 0.0 || !x.is_finite()) {
            return Err(Error::InvalidParameter("distribution must be non-negative with positive mass".into()));
        }
        Ok(v.iter().map(|x| x / s).collect())
    };
    let (p, q) = (norm(p)?, norm(q)?);
    let mut js = 0.0;
    for (&pi, &qi) in p.iter().zip(&q) {
        let mi = 0.5 * (pi + qi);
        if pi > PROB_FLOOR {
            js += 0.5 * pi * libm::log(pi / mi);
        }
        if qi > PROB_FLOOR {
            js += 0.5 * qi * libm::log(qi / mi);
        }
    }
    Ok(js.clamp(0.0, core::f64::consts::LN_2))
}

/// Gaussian KDEs of several samples on one shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct KdeGrid {
    pub bandwidth: f64,
    pub x: Vec<f64>,
    /// One density per input sample, each normalized to sum to 1 on the grid.
    pub densities: Vec<Vec<f64>>,
}

/// KDEs of `samples` with a shared Silverman bandwidth taken from the pooled
/// sample, on `points` evenly spaced points spanning the pooled range padded
/// by [`KDE_GRID_PAD`] bandwidths.
pub fn kde_grid(samples: &[&[f64]], points: usize) -> Result<KdeGrid> {
    if samples.iter().any(|s| s.is_empty()) || samples.is_empty() {
        return Err(Error::InsufficientData("KDE needs non-empty samples".into()));
    }
    let pooled: Vec<f64> = samples.iter().flat_map(|s| s.iter().copied()).collect();
    let h = stats::silverman_bandwidth(&pooled);
    let lo = pooled.iter().copied().fold(f64::INFINITY, f64::min) - KDE_GRID_PAD * h;
    let hi = pooled.iter().copied().fold(f64::NEG_INFINITY, f64::max) + KDE_GRID_PAD * h;
    let step = (hi - lo) / (points.max(2) - 1) as f64;
    let x: Vec<f64> = (0..points).map(|i| lo + i as f64 * step).collect();
    let densities = samples
        .iter()
        .map(|s| {
            let mut dens: Vec<f64> = x.iter().map(|&g| s.iter().map(|&v| normal_pdf(g, v, h)).sum()).collect();
            let total: f64 = dens.iter().sum();
            if total > 0.0 {
                dens.iter_mut().for_each(|d| *d /= total);
            }
            dens
        })
        .collect();
    Ok(KdeGrid { bandwidth: h, x, densities })
}

/// JS divergence between KDEs of two numeric samples on a common grid.
pub fn js_divergence(orig: &[f64], gen: &[f64]) -> Result<f64> {
    at_least_two(orig, "original")?;
    at_least_two(gen, "generated")?;
    let grid = kde_grid(&[orig, gen], KDE_GRID_POINTS)?;
    js_divergence_discrete(&grid.densities[0], &grid.densities[1])
}

#[derive(Debug, Clone, PartialEq)]
pub struct NumericMetrics {
    pub abs_err: f64,
    pub rel_err: f64,
    pub sd_diff: f64,
    pub rel_sd_diff: f64,
    pub bias_per_sd: f64,
    pub w1: f64,
    pub w1_per_sd: f64,
    pub ks_stat: f64,
    pub js_div: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalMetrics {
    pub tv_distance: f64,
    pub js_div: f64,
    /// `|f_orig(c) - f_gen(c)|` per category, in schema order.
    pub freq_abs_err: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureMetrics {
    Numeric(NumericMetrics),
    Categorical(CategoricalMetrics),
}

impl FeatureMetrics {
    /// Named scalar metrics, in a fixed order.
    pub fn scalars(&self) -> Vec<(&'static str, f64)> {
        match self {
            FeatureMetrics::Numeric(m) => alloc::vec![
                ("abs_err", m.abs_err),
                ("rel_err", m.rel_err),
                ("sd_diff", m.sd_diff),
                ("rel_sd_diff", m.rel_sd_diff),
                ("bias_per_sd", m.bias_per_sd),
                ("w1_per_sd", m.w1_per_sd),
                ("ks_stat", m.ks_stat),
                ("js_div", m.js_div),
            ],
            FeatureMetrics::Categorical(m) => alloc::vec![
                ("tv_distance", m.tv_distance),
                ("js_div", m.js_div),
                ("max_freq_abs_err", m.freq_abs_err.iter().copied().fold(0.0, f64::max)),
            ],
        }
    }
}

pub fn numeric_metrics(orig: &[f64], gen: &[f64]) -> Result<NumericMetrics> {
    let (abs_err, rel_err) = mean_metrics(orig, gen)?;
    let (sd_diff, rel_sd_diff) = sd_metrics(orig, gen)?;
    let w1 = wasserstein1(orig, gen)?;
    Ok(NumericMetrics {
        abs_err,
        rel_err,
        sd_diff,
        rel_sd_diff,
        bias_per_sd: bias_per_sd(orig, gen)?,
        w1,
        w1_per_sd: w1 / (stats::sample_sd(orig) + EPSILON),
        ks_stat: ks_statistic(orig, gen)?,
        js_div: js_divergence(orig, gen)?,
    })
}

fn frequencies(codes: &[usize], n_categories: usize) -> Vec<f64> {
    let mut f = alloc::vec![0.0; n_categories];
    for &c in codes {
        f[c] += 1.0;
    }
    let n = codes.len() as f64;
    f.iter_mut().for_each(|v| *v /= n);
    f
}

pub fn categorical_metrics(orig: &[usize], gen: &[usize], n_categories: usize) -> Result<CategoricalMetrics> {
    if orig.is_empty() || gen.is_empty() {
        return Err(Error::InsufficientData("categorical samples must be non-empty".into()));
    }
    let p = frequencies(orig, n_categories);
    let q = frequencies(gen, n_categories);
    let freq_abs_err: Vec<f64> = p.iter().zip(&q).map(|(a, b)| (a - b).abs()).collect();
    Ok(CategoricalMetrics {
        tv_distance: (0.5 * freq_abs_err.iter().sum::<f64>()).min(1.0),
        js_div: js_divergence_discrete(&p, &q)?,
        freq_abs_err,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DependenceRow {
    pub a: String,
    pub b: String,
    /// `None` when either table has a constant column in the pair.
    pub pearson_delta: Option<f64>,
    pub spearman_delta: Option<f64>,
}

fn check_same_schema(a: &FeatureSchema, b: &FeatureSchema) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::SchemaMismatch(format!("{} vs {} features", a.len(), b.len())));
    }
    for (fa, fb) in a.features().iter().zip(b.features()) {
        if fa.name != fb.name || fa.kind != fb.kind || fa.categories != fb.categories {
            return Err(Error::SchemaMismatch(format!("feature `{}` differs from `{}`", fa.name, fb.name)));
        }
    }
    Ok(())
}

fn paired_values(inv: &Inventory, a: usize, b: usize) -> (Vec<f64>, Vec<f64>) {
    inv.rows().iter().filter_map(|r| Some((r[a].as_number()?, r[b].as_number()?))).unzip()
}

/// `|rho_orig - rho_gen|` (Pearson and Spearman) for every unordered numeric pair.
pub fn dependence_delta(orig: &Inventory, gen: &Inventory) -> Result<Vec<DependenceRow>> {
    check_same_schema(orig.schema(), gen.schema())?;
    if orig.n_rows() < 3 || gen.n_rows() < 3 {
        return Err(Error::InsufficientData("dependence needs at least three rows per table".into()));
    }
    let numeric = orig.schema().numeric_indices();
    let mut out = Vec::new();
    for (k, &a) in numeric.iter().enumerate() {
        for &b in &numeric[k + 1..] {
            let (oa, ob) = paired_values(orig, a, b);
            let (ga, gb) = paired_values(gen, a, b);
            let delta = |f: fn(&[f64], &[f64]) -> Option<f64>| Some((f(&oa, &ob)? - f(&ga, &gb)?).abs());
            out.push(DependenceRow {
                a: orig.schema().feature(a).name.clone(),
                b: orig.schema().feature(b).name.clone(),
                pearson_delta: delta(stats::pearson),
                spearman_delta: delta(stats::spearman),
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub mean: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportMeta {
    pub n_orig: usize,
    pub n_gen: usize,
    pub method: String,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub meta: ReportMeta,
    /// One entry per schema feature, in schema order.
    pub features: Vec<(String, FeatureMetrics)>,
    pub dependence: Vec<DependenceRow>,
    /// Mean and max of each scalar metric over the features (and dependence
    /// deltas over the pairs) where it applies.
    pub aggregates: Vec<(String, Aggregate)>,
}

impl MetricReport {
    pub fn feature(&self, name: &str) -> Option<&FeatureMetrics> {
        self.features.iter().find(|(n, _)| n == name).map(|(_, m)| m)
    }

    pub fn aggregate(&self, metric: &str) -> Option<Aggregate> {
        self.aggregates.iter().find(|(n, _)| n == metric).map(|(_, a)| *a)
    }
}

fn push_value(acc: &mut Vec<(String, Vec<f64>)>, name: &str, v: f64) {
    match acc.iter_mut().find(|(n, _)| n == name) {
        Some((_, vs)) => vs.push(v),
        None => acc.push((name.to_string(), alloc::vec![v])),
    }
}

/// All per-feature metrics, the dependence table and aggregates. Missing
/// cells are dropped per column.
pub fn full_report(orig: &Inventory, gen: &Inventory, method: &str, seed: Option<u64>) -> Result<MetricReport> {
    check_same_schema(orig.schema(), gen.schema())?;
    let schema = orig.schema();
    let mut features = Vec::with_capacity(schema.len());
    for c in 0..schema.len() {
        let spec = schema.feature(c);
        let with_name = |e: Error| match e {
            Error::InsufficientData(msg) => Error::InsufficientData(format!("feature `{}`: {msg}", spec.name)),
            other => other,
        };
        let metrics = if spec.kind.is_numeric() {
            FeatureMetrics::Numeric(
                numeric_metrics(&orig.numeric_values(c), &gen.numeric_values(c)).map_err(with_name)?,
            )
        } else {
            let codes = |inv: &Inventory| inv.column(c).filter_map(Cell::as_category).collect::<Vec<_>>();
            FeatureMetrics::Categorical(
                categorical_metrics(&codes(orig), &codes(gen), spec.categories.len()).map_err(with_name)?,
            )
        };
        features.push((spec.name.clone(), metrics));
    }
    let dependence = if schema.numeric_indices().len() >= 2 { dependence_delta(orig, gen)? } else { Vec::new() };

    let mut acc: Vec<(String, Vec<f64>)> = Vec::new();
    for (_, m) in &features {
        for (name, v) in m.scalars() {
            push_value(&mut acc, name, v);
        }
    }
    for row in &dependence {
        if let Some(v) = row.pearson_delta {
            push_value(&mut acc, "pearson_delta", v);
        }
        if let Some(v) = row.spearman_delta {
            push_value(&mut acc, "spearman_delta", v);
        }
    }
    let aggregates = acc
        .into_iter()
        .map(|(name, vs)| {
            let mean = vs.iter().sum::<f64>() / vs.len() as f64;
            let max = vs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (name, Aggregate { mean, max })
        })
        .collect();

    Ok(MetricReport {
        meta: ReportMeta { n_orig: orig.n_rows(), n_gen: gen.n_rows(), method: method.to_string(), seed },
        features,
        dependence,
        aggregates,
    })
}
