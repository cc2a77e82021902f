//! Sequential candidate generation and permutation-averaged plausibility.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{ConditionalModel, Context};
use crate::schema::{Cell, FeatureSchema, Row};
use crate::stats::logsumexp;
use crate::{Error, Result};

/// Knobs of one generation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    /// Number of candidates to produce.
    pub candidates: usize,
    pub temperature: f64,
    /// Permutations averaged by the plausibility score.
    pub permutations: usize,
    /// Features held fixed in every candidate, by name.
    #[serde(default)]
    pub conditioning: Vec<(String, Cell)>,
    pub seed: u64,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig { candidates: 500, temperature: 1.0, permutations: 8, conditioning: Vec::new(), seed: 0 }
    }
}

impl GenerationConfig {
    /// Check the config against `schema` and resolve the conditioning into a
    /// partial row.
    pub fn resolve(&self, schema: &FeatureSchema) -> Result<Vec<Option<Cell>>> {
        if self.candidates == 0 {
            return Err(Error::InvalidParameter("candidate count must be at least 1".into()));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::InvalidParameter(format!("temperature must be positive, got {}", self.temperature)));
        }
        if self.permutations == 0 {
            return Err(Error::InvalidParameter("permutation count must be at least 1".into()));
        }
        let mut context = alloc::vec![None; schema.len()];
        for (name, cell) in &self.conditioning {
            let idx = schema.require(name)?;
            if cell.is_missing() {
                return Err(Error::InvalidParameter(format!("cannot condition `{name}` on a missing value")));
            }
            schema
                .check_cell(idx, cell)
                .map_err(|reason| Error::InvalidParameter(format!("conditioning `{name}`: {reason}")))?;
            context[idx] = Some(*cell);
        }
        Ok(context)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateMeta {
    pub config: GenerationConfig,
    /// Features in the order they were sampled; conditioned features excluded.
    pub order: Vec<usize>,
    /// Log conditional (at temperature 1) of each sampled feature given the
    /// features before it; `None` for conditioned features.
    pub feature_log_probs: Vec<Option<f64>>,
    /// Random stream the candidate was drawn from.
    pub stream: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: usize,
    pub row: Row,
    /// Permutation-averaged log plausibility, always scored at temperature 1.
    pub log_plausibility: f64,
    pub meta: CandidateMeta,
}

/// Random stream for candidate `id`: independent of every other candidate,
/// so pools can be generated in any order or in parallel.
pub fn candidate_rng(seed: u64, id: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id as u64);
    rng
}

/// Sample one row. Conditioned cells are copied first; the remaining
/// features are drawn one by one in a fresh random order, each conditioned
/// on everything fixed so far.
pub fn generate_row<M: ConditionalModel + ?Sized>(
    model: &M,
    temperature: f64,
    conditioning: &Context,
    rng: &mut dyn RngCore,
) -> Result<(Row, Vec<usize>)> {
    let d = model.schema().len();
    if conditioning.len() != d {
        return Err(Error::InvalidParameter(format!(
            "conditioning has {} slots, schema has {d} features",
            conditioning.len()
        )));
    }
    let mut context = conditioning.to_vec();
    let mut order: Vec<usize> = (0..d).filter(|&i| context[i].is_none()).collect();
    order.shuffle(rng);
    for &i in &order {
        let cell = model.sample_conditional(i, &context, temperature, rng)?;
        context[i] = Some(cell);
    }
    let row = context.into_iter().map(|c| c.unwrap_or(Cell::Missing)).collect();
    Ok((row, order))
}

/// Chain-rule log likelihood of `row` under feature order `order`.
pub fn chain_log_likelihood<M: ConditionalModel + ?Sized>(model: &M, row: &[Cell], order: &[usize]) -> Result<f64> {
    let mut context: Vec<Option<Cell>> = alloc::vec![None; row.len()];
    let mut total = 0.0;
    for &i in order {
        let lp = model.log_conditional(i, &row[i], &context)?;
        if !lp.is_finite() {
            return Err(Error::NonFinite { feature: i });
        }
        total += lp;
        context[i] = Some(row[i]);
    }
    Ok(total)
}

fn factorial_at_most(d: usize, limit: usize) -> Option<usize> {
    let mut f: usize = 1;
    for k in 2..=d {
        f = f.checked_mul(k)?;
        if f > limit {
            return None;
        }
    }
    Some(f)
}

/// All permutations of `0..d` in lexicographic order.
fn all_permutations(d: usize) -> Vec<Vec<usize>> {
    let mut current: Vec<usize> = (0..d).collect();
    let mut out = alloc::vec![current.clone()];
    loop {
        let Some(i) = (1..d).rev().find(|&i| current[i - 1] < current[i]) else {
            return out;
        };
        let j = (i..d).rev().find(|&j| current[j] > current[i - 1]).unwrap();
        current.swap(i - 1, j);
        current[i..].reverse();
        out.push(current.clone());
    }
}

/// Log of the chain-rule likelihood averaged over `permutations` random
/// feature orders. When `permutations >= d!` every order is used exactly once.
pub fn plausibility<M: ConditionalModel + ?Sized>(
    model: &M,
    row: &[Cell],
    permutations: usize,
    rng: &mut dyn RngCore,
) -> Result<f64> {
    if permutations == 0 {
        return Err(Error::InvalidParameter("permutation count must be at least 1".into()));
    }
    if let Some(i) = row.iter().position(Cell::is_missing) {
        return Err(Error::InvalidParameter(format!("cannot score a row with feature {i} missing")));
    }
    let d = row.len();
    let orders: Vec<Vec<usize>> = match factorial_at_most(d, permutations) {
        Some(_) => all_permutations(d),
        None => (0..permutations)
            .map(|_| {
                let mut p: Vec<usize> = (0..d).collect();
                p.shuffle(rng);
                p
            })
            .collect(),
    };
    let sums = orders.iter().map(|order| chain_log_likelihood(model, row, order)).collect::<Result<Vec<f64>>>()?;
    Ok(logsumexp(&sums) - libm::log(sums.len() as f64))
}

/// Generate and score candidate `id` of a pool.
pub fn generate_candidate<M: ConditionalModel + ?Sized>(
    model: &M,
    config: &GenerationConfig,
    conditioning: &Context,
    id: usize,
) -> Result<Candidate> {
    let mut rng = candidate_rng(config.seed, id);
    let (row, order) = generate_row(model, config.temperature, conditioning, &mut rng)?;
    let mut feature_log_probs = alloc::vec![None; row.len()];
    let mut context = conditioning.to_vec();
    for &i in &order {
        feature_log_probs[i] = Some(model.log_conditional(i, &row[i], &context)?);
        context[i] = Some(row[i]);
    }
    let log_plausibility = plausibility(model, &row, config.permutations, &mut rng)?;
    Ok(Candidate {
        id,
        row,
        log_plausibility,
        meta: CandidateMeta { config: config.clone(), order, feature_log_probs, stream: id as u64 },
    })
}

/// Generate a pool of `config.candidates` scored candidates.
pub fn generate_pool<M: ConditionalModel + ?Sized>(model: &M, config: &GenerationConfig) -> Result<Vec<Candidate>> {
    let conditioning = config.resolve(model.schema())?;
    (0..config.candidates).map(|id| generate_candidate(model, config, &conditioning, id)).collect()
}
