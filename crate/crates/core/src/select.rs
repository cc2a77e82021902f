//! Plausibility-based selection and controlled mixing with observations.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::generate::Candidate;
use crate::schema::{Cell, FeatureSpec, Inventory, Row};
use crate::{Error, Result};

pub const SOURCE_COLUMN: &str = "__source";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionRule {
    /// Keep candidates with `log_plausibility >= tau`.
    Threshold(f64),
    /// Keep the `ceil(q * N)` highest-scoring candidates.
    TopQuantile(f64),
}

impl Default for SelectionRule {
    fn default() -> Self {
        SelectionRule::TopQuantile(0.5)
    }
}

/// How an oversupplied accepted pool is reduced to the mixing target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subsample {
    #[default]
    Score,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub rule: SelectionRule,
    pub alpha: f64,
    pub seed: u64,
    #[serde(default)]
    pub subsample: Subsample,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig { rule: SelectionRule::default(), alpha: 0.0, seed: 0, subsample: Subsample::Score }
    }
}

/// Candidates with score at least `tau`, in pool order.
pub fn select(pool: &[Candidate], tau: f64) -> Vec<Candidate> {
    pool.iter().filter(|c| c.log_plausibility >= tau).cloned().collect()
}

/// Pool indices sorted by descending score, ties by ascending index.
fn score_rank(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx
}

/// The `ceil(q * N)` highest-scoring candidates, returned in pool order.
pub fn select_top_quantile(pool: &[Candidate], q: f64) -> Result<Vec<Candidate>> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::InvalidParameter(format!("top quantile must lie in (0, 1], got {q}")));
    }
    if pool.is_empty() {
        return Err(Error::InsufficientData("candidate pool is empty".into()));
    }
    let keep = (libm::ceil(q * pool.len() as f64) as usize).clamp(1, pool.len());
    let scores: Vec<f64> = pool.iter().map(|c| c.log_plausibility).collect();
    let mut chosen = score_rank(&scores)[..keep].to_vec();
    chosen.sort_unstable();
    Ok(chosen.into_iter().map(|i| pool[i].clone()).collect())
}

/// Apply whichever rule `rule` names.
pub fn apply_rule(pool: &[Candidate], rule: SelectionRule) -> Result<Vec<Candidate>> {
    match rule {
        SelectionRule::Threshold(tau) => Ok(select(pool, tau)),
        SelectionRule::TopQuantile(q) => select_top_quantile(pool, q),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Observed,
    Synthetic,
}

/// Observed rows followed by the synthetic rows chosen for mixing.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedCorpus {
    pub rows: Inventory,
    pub sources: Vec<Source>,
    /// Candidate id of every synthetic row, `None` for observed rows.
    pub candidate_ids: Vec<Option<usize>>,
}

impl MixedCorpus {
    pub fn n_synthetic(&self) -> usize {
        self.sources.iter().filter(|s| **s == Source::Synthetic).count()
    }

    pub fn synthetic_fraction(&self) -> f64 {
        if self.sources.is_empty() {
            0.0
        } else {
            self.n_synthetic() as f64 / self.sources.len() as f64
        }
    }

    /// The corpus with a trailing categorical `__source` column.
    pub fn tagged(&self) -> Result<Inventory> {
        let schema =
            self.rows.schema().with_feature(FeatureSpec::categorical(SOURCE_COLUMN, ["observed", "synthetic"]))?;
        let rows = self
            .rows
            .rows()
            .iter()
            .zip(&self.sources)
            .map(|(row, src)| {
                let mut r = row.clone();
                r.push(Cell::Category(match src {
                    Source::Observed => 0,
                    Source::Synthetic => 1,
                }));
                r
            })
            .collect();
        Inventory::new(schema, rows)
    }
}

/// Number of synthetic rows that makes them a fraction `alpha` of the corpus.
pub fn synthetic_target(n_observed: usize, alpha: f64) -> Result<usize> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::InvalidParameter(format!("alpha must lie in [0, 1), got {alpha}")));
    }
    // libm::round rounds half away from zero
    Ok(libm::round(alpha * n_observed as f64 / (1.0 - alpha)) as usize)
}

/// Append accepted candidates to `observed` so that they make up a fraction
/// `alpha` of the result. An oversupplied pool is cut by score rank (or at
/// random with [`Subsample::Random`]).
pub fn mix(observed: &Inventory, accepted: &[Candidate], config: &SelectionConfig) -> Result<MixedCorpus> {
    let n = observed.n_rows();
    let s = synthetic_target(n, config.alpha)?;
    if accepted.len() < s {
        return Err(Error::Shortfall { required: s, available: accepted.len() });
    }
    let mut chosen: Vec<usize> = match config.subsample {
        Subsample::Score => {
            let scores: Vec<f64> = accepted.iter().map(|c| c.log_plausibility).collect();
            score_rank(&scores)[..s].to_vec()
        }
        Subsample::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            index::sample(&mut rng, accepted.len(), s).into_vec()
        }
    };
    chosen.sort_unstable();

    let schema = observed.schema().clone();
    let mut rows: Vec<Row> = observed.rows().to_vec();
    let mut sources = alloc::vec![Source::Observed; n];
    let mut candidate_ids = alloc::vec![None; n];
    for &i in &chosen {
        let c = &accepted[i];
        if c.row.len() != schema.len() {
            return Err(Error::SchemaMismatch(format!(
                "candidate {} has {} cells, observed schema has {}",
                c.id,
                c.row.len(),
                schema.len()
            )));
        }
        rows.push(c.row.clone());
        sources.push(Source::Synthetic);
        candidate_ids.push(Some(c.id));
    }
    let rows = Inventory::new(schema, rows)
        .map_err(|e| Error::SchemaMismatch(format!("accepted rows do not fit the observed schema: {e}")))?;
    Ok(MixedCorpus { rows, sources, candidate_ids })
}
