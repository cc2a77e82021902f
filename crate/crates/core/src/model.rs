//! Conditional models used for sequential row generation.
//!
//! [`ConditionalModel`] is the contract the generator relies on: a log
//! probability of one feature given any subset of the others, and a tempered
//! sampler for the same conditional. [`KernelBackend`] is the reference
//! implementation, a product-kernel estimator over the training rows.

use alloc::format;
use alloc::vec::Vec;

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use crate::schema::{Cell, FeatureSchema, Inventory};
use crate::stats::{self, log_normal_pdf, logsumexp, softmax_in_place};
use crate::{Error, Result};

/// Partial row: `context[k]` is `Some` when feature `k` is conditioned on.
pub type Context = [Option<Cell>];

pub trait ConditionalModel {
    fn schema(&self) -> &FeatureSchema;

    /// Log density (numeric target) or log mass (categorical target) of
    /// `value` for feature `target` given `context`.
    fn log_conditional(&self, target: usize, value: &Cell, context: &Context) -> Result<f64>;

    /// Draw feature `target` given `context` at temperature `temperature`.
    fn sample_conditional(
        &self,
        target: usize,
        context: &Context,
        temperature: f64,
        rng: &mut dyn RngCore,
    ) -> Result<Cell>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    /// Weight applied when a categorical context cell disagrees with a
    /// training row; must lie in (0, 1].
    pub cat_mismatch_weight: f64,
}

impl Default for KernelParams {
    fn default() -> Self {
        KernelParams { cat_mismatch_weight: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum KernelColumn {
    Numeric { values: Vec<f64>, bandwidth: f64 },
    Categorical { codes: Vec<usize>, n_categories: usize },
}

/// Product-kernel conditional estimator over the training rows.
///
/// Row `j` gets weight proportional to the product over context features of
/// a Gaussian kernel (numeric) or 1 / `cat_mismatch_weight` (categorical match
/// / mismatch). A numeric target is a Gaussian mixture centred on the training
/// values with the Silverman bandwidth of its column; a categorical target
/// sums the weights of rows carrying each label.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelBackend {
    schema: FeatureSchema,
    columns: Vec<KernelColumn>,
    n_rows: usize,
    log_mismatch: f64,
}

impl KernelBackend {
    pub fn fit(train: &Inventory) -> Result<Self> {
        Self::fit_with(train, KernelParams::default())
    }

    pub fn fit_with(train: &Inventory, params: KernelParams) -> Result<Self> {
        let lambda = params.cat_mismatch_weight;
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "categorical mismatch weight must lie in (0, 1], got {lambda}"
            )));
        }
        if train.n_rows() == 0 {
            return Err(Error::InsufficientData("cannot fit a model on an empty table".into()));
        }
        if train.has_missing() {
            return Err(Error::InsufficientData("training table contains missing cells; impute them first".into()));
        }
        let schema = train.schema().clone();
        let columns = (0..schema.len())
            .map(|c| {
                if schema.feature(c).kind.is_numeric() {
                    let values = train.numeric_values(c);
                    let bandwidth = stats::silverman_bandwidth(&values);
                    KernelColumn::Numeric { values, bandwidth }
                } else {
                    KernelColumn::Categorical {
                        codes: train.column(c).filter_map(Cell::as_category).collect(),
                        n_categories: schema.feature(c).categories.len(),
                    }
                }
            })
            .collect();
        Ok(KernelBackend { schema, columns, n_rows: train.n_rows(), log_mismatch: libm::log(lambda) })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    /// Kernel bandwidth of a numeric feature.
    pub fn bandwidth(&self, feature: usize) -> Option<f64> {
        match &self.columns[feature] {
            KernelColumn::Numeric { bandwidth, .. } => Some(*bandwidth),
            KernelColumn::Categorical { .. } => None,
        }
    }

    fn check_context(&self, target: usize, context: &Context) -> Result<()> {
        let d = self.schema.len();
        if target >= d {
            return Err(Error::InvalidParameter(format!("feature index {target} out of range")));
        }
        if context.len() != d {
            return Err(Error::InvalidParameter(format!(
                "context has {} slots, schema has {d} features",
                context.len()
            )));
        }
        if context[target].is_some() {
            return Err(Error::InvalidParameter(format!(
                "context already fixes the target feature `{}`",
                self.schema.feature(target).name
            )));
        }
        for (k, cell) in context.iter().enumerate() {
            if let Some(cell) = cell {
                if cell.is_missing() {
                    return Err(Error::InvalidParameter(format!(
                        "context cell for `{}` is missing",
                        self.schema.feature(k).name
                    )));
                }
                self.schema.check_cell(k, cell).map_err(|reason| {
                    Error::InvalidParameter(format!("context `{}`: {reason}", self.schema.feature(k).name))
                })?;
            }
        }
        Ok(())
    }

    /// Normalized log weights of the training rows given `context`.
    fn log_weights(&self, context: &Context) -> Vec<f64> {
        let mut logw = alloc::vec![0.0; self.n_rows];
        for (k, cell) in context.iter().enumerate() {
            match (cell, &self.columns[k]) {
                (Some(Cell::Number(x)), KernelColumn::Numeric { values, bandwidth }) => {
                    for (w, &t) in logw.iter_mut().zip(values) {
                        *w += log_normal_pdf(*x, t, *bandwidth);
                    }
                }
                (Some(Cell::Category(c)), KernelColumn::Categorical { codes, .. }) => {
                    for (w, &t) in logw.iter_mut().zip(codes) {
                        if t != *c {
                            *w += self.log_mismatch;
                        }
                    }
                }
                _ => {}
            }
        }
        let lse = logsumexp(&logw);
        if lse.is_finite() {
            for w in &mut logw {
                *w -= lse;
            }
        } else {
            // every kernel underflowed: fall back to uniform weights
            let uniform = -libm::log(self.n_rows as f64);
            logw.iter_mut().for_each(|w| *w = uniform);
        }
        logw
    }

    /// Normalized row weights given `context`.
    pub fn weights(&self, target: usize, context: &Context) -> Result<Vec<f64>> {
        self.check_context(target, context)?;
        let mut w = self.log_weights(context);
        softmax_in_place(&mut w);
        Ok(w)
    }

    /// Category masses of a categorical target, tempered as `p^(1/T)` and
    /// renormalized.
    pub fn category_masses(&self, target: usize, context: &Context, temperature: f64) -> Result<Vec<f64>> {
        self.check_context(target, context)?;
        check_temperature(temperature)?;
        let (codes, n_categories) = match &self.columns[target] {
            KernelColumn::Categorical { codes, n_categories } => (codes, *n_categories),
            KernelColumn::Numeric { .. } => {
                return Err(Error::InvalidParameter(format!(
                    "feature `{}` is numeric",
                    self.schema.feature(target).name
                )))
            }
        };
        let logw = self.log_weights(context);
        let mut masses = alloc::vec![0.0; n_categories];
        for (&lw, &c) in logw.iter().zip(codes) {
            masses[c] += libm::exp(lw);
        }
        Ok(temper(&masses, temperature))
    }
}

fn check_temperature(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("temperature must be positive, got {t}")))
    }
}

/// `p^(1/T)` renormalized; zero-probability entries stay zero.
pub fn temper(probs: &[f64], temperature: f64) -> Vec<f64> {
    let mut logp: Vec<f64> =
        probs.iter().map(|&p| if p > 0.0 { libm::log(p) / temperature } else { f64::NEG_INFINITY }).collect();
    softmax_in_place(&mut logp);
    logp
}

impl ConditionalModel for KernelBackend {
    fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    fn log_conditional(&self, target: usize, value: &Cell, context: &Context) -> Result<f64> {
        self.check_context(target, context)?;
        match (&self.columns[target], value) {
            (KernelColumn::Numeric { values, bandwidth }, Cell::Number(x)) => {
                let mut terms = self.log_weights(context);
                for (w, &t) in terms.iter_mut().zip(values) {
                    *w += log_normal_pdf(*x, t, *bandwidth);
                }
                Ok(logsumexp(&terms))
            }
            (KernelColumn::Categorical { codes, n_categories }, Cell::Category(c)) if c < n_categories => {
                let logw = self.log_weights(context);
                let matching: Vec<f64> = logw.iter().zip(codes).filter(|(_, &t)| t == *c).map(|(&w, _)| w).collect();
                Ok(logsumexp(&matching))
            }
            (KernelColumn::Categorical { .. }, Cell::Category(c)) => Err(Error::InvalidParameter(format!(
                "category index {c} outside the list of `{}`",
                self.schema.feature(target).name
            ))),
            _ => Err(Error::InvalidParameter(format!(
                "value {value:?} does not match the kind of `{}`",
                self.schema.feature(target).name
            ))),
        }
    }

    fn sample_conditional(
        &self,
        target: usize,
        context: &Context,
        temperature: f64,
        rng: &mut dyn RngCore,
    ) -> Result<Cell> {
        self.check_context(target, context)?;
        check_temperature(temperature)?;
        match &self.columns[target] {
            KernelColumn::Numeric { values, bandwidth } => {
                let mut probs = self.log_weights(context);
                for w in &mut probs {
                    *w /= temperature;
                }
                softmax_in_place(&mut probs);
                let j = stats::draw_index(&probs, rng);
                let z: f64 = StandardNormal.sample(rng);
                Ok(Cell::Number(values[j] + bandwidth * libm::sqrt(temperature) * z))
            }
            KernelColumn::Categorical { .. } => {
                let masses = self.category_masses(target, context, temperature)?;
                Ok(Cell::Category(stats::draw_index(&masses, rng)))
            }
        }
    }
}
