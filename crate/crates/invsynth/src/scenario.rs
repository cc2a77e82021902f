//! Ground-truth scenarios: a Gaussian copula pushed through per-feature
//! marginal maps, with optional categorical features cut from latent
//! coordinates.

use invsynth_core::schema::{FeatureSchema, FeatureSpec, Inventory, Row};
use invsynth_core::stats::normal_cdf;
use invsynth_core::{Cell, Error as CoreError};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::derive_seed;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: f64,
    pub sd: f64,
}

/// Map from a standard normal latent to a feature value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MarginalMap {
    Identity { loc: f64, scale: f64 },
    LogNormal { mu: f64, sigma: f64 },
    StudentT { df: f64, loc: f64, scale: f64 },
    Mixture { components: Vec<MixtureComponent> },
}

impl MarginalMap {
    fn check(&self) -> Result<()> {
        let ok = match self {
            MarginalMap::Identity { scale, .. } => *scale > 0.0,
            MarginalMap::LogNormal { sigma, .. } => *sigma > 0.0,
            MarginalMap::StudentT { df, scale, .. } => *df > 0.0 && *scale > 0.0,
            MarginalMap::Mixture { components } => {
                !components.is_empty() && components.iter().all(|c| c.weight > 0.0 && c.sd > 0.0)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Usage(format!("invalid marginal {self:?}")))
        }
    }

    /// Value at latent `z`, i.e. the marginal quantile at `Phi(z)`.
    pub fn apply(&self, z: f64) -> f64 {
        match self {
            MarginalMap::Identity { loc, scale } => loc + scale * z,
            MarginalMap::LogNormal { mu, sigma } => (mu + sigma * z).exp(),
            MarginalMap::StudentT { df, loc, scale } => {
                let t = StudentsT::new(0.0, 1.0, *df).expect("validated parameters");
                // evaluate in the lower tail for precision
                let q = t.inverse_cdf(normal_cdf(-z.abs()));
                loc - scale * q * z.signum()
            }
            MarginalMap::Mixture { components } => mixture_quantile(components, normal_cdf(z)),
        }
    }
}

fn mixture_cdf(components: &[MixtureComponent], x: f64) -> f64 {
    let total: f64 = components.iter().map(|c| c.weight).sum();
    components.iter().map(|c| c.weight * normal_cdf((x - c.mean) / c.sd)).sum::<f64>() / total
}

fn mixture_quantile(components: &[MixtureComponent], u: f64) -> f64 {
    let mut lo = components.iter().map(|c| c.mean - 40.0 * c.sd).fold(f64::INFINITY, f64::min);
    let mut hi = components.iter().map(|c| c.mean + 40.0 * c.sd).fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if mixture_cdf(components, mid) < u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericFeature {
    pub name: String,
    #[serde(default)]
    pub unit: String,
    pub map: MarginalMap,
}

/// Categorical feature read off latent coordinate `latent`: label `i` when
/// the latent falls between `thresholds[i - 1]` and `thresholds[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentCategory {
    pub name: String,
    pub latent: usize,
    pub thresholds: Vec<f64>,
    pub labels: Vec<String>,
}

/// Numeric feature `j` reads latent coordinate `j`; the correlation matrix
/// may carry extra coordinates used only by categorical features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub numeric: Vec<NumericFeature>,
    #[serde(default)]
    pub categorical: Vec<LatentCategory>,
    pub correlation: Vec<Vec<f64>>,
    pub truth_seed: u64,
    pub n_train: usize,
    pub n_truth: usize,
}

impl Scenario {
    pub fn schema(&self) -> Result<FeatureSchema> {
        let mut features: Vec<FeatureSpec> =
            self.numeric.iter().map(|f| FeatureSpec::numeric(f.name.clone()).with_unit(f.unit.clone())).collect();
        features.extend(self.categorical.iter().map(|c| FeatureSpec::categorical(c.name.clone(), c.labels.clone())));
        Ok(FeatureSchema::new(features)?)
    }

    fn check(&self) -> Result<()> {
        let k = self.correlation.len();
        let usage = |m: String| Err(Error::Usage(format!("scenario `{}`: {m}", self.name)));
        if k < self.numeric.len() || self.correlation.iter().any(|r| r.len() != k) {
            return usage("correlation matrix must be square and cover every numeric feature".into());
        }
        for i in 0..k {
            if (self.correlation[i][i] - 1.0).abs() > 1e-12 {
                return usage("correlation matrix needs a unit diagonal".into());
            }
            for j in 0..i {
                if (self.correlation[i][j] - self.correlation[j][i]).abs() > 1e-12 {
                    return usage("correlation matrix must be symmetric".into());
                }
            }
        }
        if self.n_train < 10 || self.n_truth < 10 * self.n_train {
            return usage("need n_train >= 10 and n_truth >= 10 n_train".into());
        }
        for f in &self.numeric {
            f.map.check()?;
        }
        for c in &self.categorical {
            let sorted = c.thresholds.windows(2).all(|w| w[0] < w[1]);
            if c.latent >= k || !sorted || c.labels.len() != c.thresholds.len() + 1 {
                return usage(format!("bad categorical feature `{}`", c.name));
            }
        }
        Ok(())
    }

    fn cholesky(&self) -> Result<DMatrix<f64>> {
        let k = self.correlation.len();
        let r = DMatrix::from_fn(k, k, |i, j| self.correlation[i][j]);
        r.cholesky().map(|c| c.l()).ok_or_else(|| {
            Error::Data(CoreError::InvalidParameter(format!(
                "scenario `{}`: correlation matrix is not positive definite",
                self.name
            )))
        })
    }

    fn draw(&self, schema: &FeatureSchema, l: &DMatrix<f64>, n: usize, seed: u64) -> Result<Inventory> {
        let k = l.nrows();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows: Vec<Row> = Vec::with_capacity(n);
        for _ in 0..n {
            let e = DVector::from_fn(k, |_, _| StandardNormal.sample(&mut rng));
            let z = l * e;
            let mut row: Row = self.numeric.iter().enumerate().map(|(j, f)| Cell::Number(f.map.apply(z[j]))).collect();
            for c in &self.categorical {
                let v = z[c.latent];
                row.push(Cell::Category(c.thresholds.iter().filter(|t| v > **t).count()));
            }
            rows.push(row);
        }
        Ok(Inventory::new(schema.clone(), rows)?)
    }
}

/// Draw the sparse training table and the large truth table, from
/// independent streams derived from the scenario's seed.
pub fn make_scenario(spec: &Scenario) -> Result<(Inventory, Inventory)> {
    spec.check()?;
    let schema = spec.schema()?;
    let l = spec.cholesky()?;
    let train = spec.draw(&schema, &l, spec.n_train, derive_seed(spec.truth_seed, "train"))?;
    let truth = spec.draw(&schema, &l, spec.n_truth, derive_seed(spec.truth_seed, "truth"))?;
    Ok((train, truth))
}

pub const PRESETS: [&str; 4] = ["zero_peak", "heavy_tail", "irregular", "coupled_met"];

fn identity(loc: f64, scale: f64) -> MarginalMap {
    MarginalMap::Identity { loc, scale }
}

fn feature(name: &str, unit: &str, map: MarginalMap) -> NumericFeature {
    NumericFeature { name: name.into(), unit: unit.into(), map }
}

/// Named preset scenario with 200 training and 10,000 truth rows.
pub fn preset(name: &str, truth_seed: u64) -> Option<Scenario> {
    let base = |numeric, categorical, correlation| Scenario {
        name: name.to_string(),
        numeric,
        categorical,
        correlation,
        truth_seed,
        n_train: 200,
        n_truth: 10_000,
    };
    let scenario = match name {
        "zero_peak" => base(
            vec![
                feature("profile_curvature", "1/m", MarginalMap::StudentT { df: 4.0, loc: 0.0, scale: 0.5 }),
                feature("slope", "deg", identity(25.0, 8.0)),
            ],
            vec![LatentCategory {
                name: "lithology".into(),
                latent: 2,
                thresholds: vec![-0.5, 0.6],
                labels: vec!["clay".into(), "sand".into(), "rock".into()],
            }],
            vec![vec![1.0, 0.3, 0.0], vec![0.3, 1.0, 0.5], vec![0.0, 0.5, 1.0]],
        ),
        "heavy_tail" => base(
            vec![
                feature("distance_to_river", "m", MarginalMap::LogNormal { mu: 5.0, sigma: 1.0 }),
                feature("elevation", "m", identity(600.0, 150.0)),
            ],
            vec![],
            vec![vec![1.0, 0.5], vec![0.5, 1.0]],
        ),
        "irregular" => base(
            vec![
                feature(
                    "wetness_index",
                    "",
                    MarginalMap::Mixture {
                        components: vec![
                            MixtureComponent { weight: 0.4, mean: 4.0, sd: 0.6 },
                            MixtureComponent { weight: 0.35, mean: 8.0, sd: 0.8 },
                            MixtureComponent { weight: 0.25, mean: 13.0, sd: 1.0 },
                        ],
                    },
                ),
                feature("slope", "deg", identity(20.0, 7.0)),
            ],
            vec![],
            vec![vec![1.0, -0.4], vec![-0.4, 1.0]],
        ),
        "coupled_met" => base(
            vec![
                feature("humidity", "%", identity(70.0, 10.0)),
                feature("rainfall_24h", "mm", identity(40.0, 15.0)),
                feature("rainfall_72h", "mm", identity(90.0, 30.0)),
                feature("soil_moisture", "m3/m3", identity(0.3, 0.08)),
            ],
            vec![],
            vec![
                vec![1.0, 0.7, 0.6, 0.7],
                vec![0.7, 1.0, 0.7, 0.8],
                vec![0.6, 0.7, 1.0, 0.6],
                vec![0.7, 0.8, 0.6, 1.0],
            ],
        ),
        _ => return None,
    };
    Some(scenario)
}
