//! Seeded Monte Carlo experiments: scene generation, method pipelines,
//! scoring and CSV output.

mod config;
mod pipeline;

pub use config::{DictionaryConfig, DictionaryKind, ExperimentConfig, Method, MusicConfig, OneOrMany, Scene};
pub use pipeline::{pipeline, BatchContext, PipelineOutput, PipelineSettings};

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::channel::{asf_covariance, draw_samples, noise_power_for_snr, random_mixed_asf, two_spike_two_rect_scene, Asf};
use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;
use crate::metrics::{err_frobenius, err_nmse, power_efficiency};
use crate::spikes::MusicOptions;

pub const METRICS: [&str; 3] = ["nf", "nmse", "pe"];

/// One CSV row. `value` is `None` for metrics that do not apply or failed.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub asf_seed: u64,
    pub realization_seed: u64,
    pub method: Method,
    pub m: usize,
    pub n: usize,
    pub g: usize,
    pub nu: f64,
    pub metric: &'static str,
    pub value: Option<f64>,
    pub status: String,
}

impl Row {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    fn sort_key(&self) -> (u64, u64, Method, usize, usize, usize, u64, &'static str) {
        (self.asf_seed, self.realization_seed, self.method, self.m, self.n, self.g, self.nu.to_bits(), self.metric)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResultTable {
    pub rows: Vec<Row>,
}

impl ResultTable {
    pub fn all_ok(&self) -> bool {
        self.rows.iter().all(Row::is_ok)
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["asf_seed", "realization_seed", "method", "M", "N", "G", "nu", "metric", "value", "status"])?;
        for r in &self.rows {
            let value = r.value.map_or_else(|| "NA".to_string(), |v| v.to_string());
            w.write_record([
                r.asf_seed.to_string(),
                r.realization_seed.to_string(),
                r.method.to_string(),
                r.m.to_string(),
                r.n.to_string(),
                r.g.to_string(),
                r.nu.to_string(),
                r.metric.to_string(),
                value,
                r.status.clone(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    /// Means over trials of every available value, keyed by
    /// `(method, N, G, ν, metric)`.
    pub fn summary(&self) -> BTreeMap<(Method, usize, usize, u64, &'static str), (f64, usize)> {
        let mut acc: BTreeMap<_, (f64, usize)> = BTreeMap::new();
        for r in &self.rows {
            if let (Some(v), true) = (r.value, r.is_ok()) {
                let e = acc.entry((r.method, r.n, r.g, r.nu.to_bits(), r.metric)).or_default();
                e.0 += v;
                e.1 += 1;
            }
        }
        acc.values_mut().for_each(|(s, c)| *s /= *c as f64);
        acc
    }

    /// Mean of `metric` for `method` at sample count `n` and carrier ratio `nu`.
    pub fn mean(&self, method: Method, n: usize, nu: f64, metric: &str) -> Option<f64> {
        let vals: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.method == method && r.n == n && r.nu == nu && r.metric == metric && r.is_ok())
            .filter_map(|r| r.value)
            .collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the `index`-th ASF of an experiment.
pub fn asf_seed(seed: u64, index: usize) -> u64 {
    splitmix64(splitmix64(seed) ^ index as u64)
}

/// Seed of the `index`-th channel realization under one ASF.
pub fn realization_seed(asf_seed: u64, index: usize) -> u64 {
    splitmix64(splitmix64(asf_seed ^ 0x5851_f42d_4c95_7f2d) ^ index as u64)
}

/// The true ASF for a trial.
pub fn scene_asf(config: &ExperimentConfig, asf_seed: u64) -> Result<Asf> {
    match config.scene {
        config::Scene::Random => random_mixed_asf(&config.asf, asf_seed),
        config::Scene::TwoSpikeTwoRect => Ok(two_spike_two_rect_scene()),
    }
}

/// Ground truth shared by all methods of one ASF.
pub struct Truth {
    pub asf: Asf,
    pub ul: ComplexMatrix,
    pub dl: ComplexMatrix,
    pub noise_power: f64,
}

impl Truth {
    pub fn new(config: &ExperimentConfig, asf_seed: u64) -> Result<Self> {
        let asf = scene_asf(config, asf_seed)?;
        let ul = asf_covariance(&asf, config.m, 1.0)?;
        let dl = asf_covariance(&asf, config.m, config.nu_dl())?;
        let noise_power = noise_power_for_snr(asf.total_mass(), config.snr_db);
        Ok(Self { asf, ul, dl, noise_power })
    }
}

/// `(E_NF, E_NMSE, E_PE)` of an estimate. E_NMSE is `None` when the MMSE
/// filter built from the estimate is singular.
pub fn score(truth: &ComplexMatrix, est: &ComplexMatrix, n0: f64, p: usize) -> Result<[Option<f64>; 3]> {
    let nmse = match err_nmse(truth, est, n0) {
        Ok(v) => Some(v),
        Err(Error::Singular(msg)) => {
            log::debug!("E_NMSE undefined: {msg}");
            None
        }
        Err(e) => return Err(e),
    };
    Ok([Some(err_frobenius(truth, est)?), nmse, Some(power_efficiency(truth, est, p)?)])
}

/// Settings per dictionary size, built once and shared by all trials.
fn settings_for(config: &ExperimentConfig) -> Result<Vec<(usize, PipelineSettings)>> {
    let music = MusicOptions { grid_size: config.music.grid_size, refine: config.music.refine, keep_spectrum: false };
    Ok(config
        .dictionary_sizes()?
        .into_iter()
        .map(|g| {
            let mut s = PipelineSettings::new(config.dictionary.kind, g, config.nu_dl());
            s.music = music;
            s.qp.grid_size = config.qp_grid;
            (g, s)
        })
        .collect())
}

/// All rows of one `(asf, realization)` trial.
pub fn run_trial(config: &ExperimentConfig, asf_index: usize, realization_index: usize) -> Result<Vec<Row>> {
    let settings = settings_for(config)?;
    Ok(trial_rows(config, &settings, asf_index, realization_index))
}

fn trial_rows(config: &ExperimentConfig, settings: &[(usize, PipelineSettings)], ai: usize, ri: usize) -> Vec<Row> {
    let a_seed = asf_seed(config.seed, ai);
    let r_seed = realization_seed(a_seed, ri);
    let nu_dl = config.nu_dl();
    let p = config.pe_p();
    let ns = config.sample_counts().expect("validated config");
    let truth = Truth::new(config, a_seed);
    let mut rows = Vec::new();
    for &n in &ns {
        let batch = truth.as_ref().map_err(|e| e.to_string()).and_then(|t| {
            draw_samples(&t.ul, t.noise_power, n, r_seed).map_err(|e| e.to_string())
        });
        let setup = match (&truth, &batch) {
            (Ok(t), Ok(b)) => Ok((t, BatchContext::new(b))),
            (Err(e), _) => Err(e.to_string()),
            (_, Err(e)) => Err(e.clone()),
        };
        for &method in &config.methods {
            let sizes: Vec<&(usize, PipelineSettings)> =
                if method.uses_dictionary() { settings.iter().collect() } else { settings.iter().take(1).collect() };
            for (g, s) in sizes {
                let g = if method.uses_dictionary() { *g } else { 0 };
                let mut push = |nu: f64, vals: std::result::Result<Option<[Option<f64>; 3]>, String>| {
                    for (k, metric) in METRICS.iter().enumerate() {
                        let (value, status) = match &vals {
                            Ok(v) => (v.and_then(|v| v[k]), "ok".to_string()),
                            Err(e) => (None, format!("error: {e}")),
                        };
                        rows.push(Row { asf_seed: a_seed, realization_seed: r_seed, method, m: config.m, n, g, nu, metric, value, status });
                    }
                };
                let (truth, ctx) = match &setup {
                    Ok((t, c)) => (*t, c),
                    Err(e) => {
                        push(1.0, Err(e.clone()));
                        push(nu_dl, Err(e.clone()));
                        continue;
                    }
                };
                match ctx.run(s, method) {
                    Ok(out) => {
                        let n0 = truth.noise_power;
                        push(1.0, score(&truth.ul, &out.ul, n0, p).map(Some).map_err(|e| e.to_string()));
                        let dl = match &out.dl {
                            Some(dl) => score(&truth.dl, dl, n0, p).map(Some).map_err(|e| e.to_string()),
                            None => Ok(None),
                        };
                        push(nu_dl, dl);
                    }
                    Err(e) => {
                        log::warn!("trial ({a_seed}, {r_seed}) N={n} G={g}: {e}");
                        push(1.0, Err(e.to_string()));
                        push(nu_dl, Err(e.to_string()));
                    }
                }
            }
        }
    }
    rows
}

/// Worker count from `ASFCOV_THREADS`, or rayon's default.
fn thread_count() -> Result<usize> {
    match std::env::var("ASFCOV_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&t| t > 0)
            .ok_or_else(|| Error::Config(format!("ASFCOV_THREADS must be a positive integer, got '{v}'"))),
        Err(_) => Ok(0),
    }
}

/// Runs every trial of `config` and returns rows in a fixed order.
/// Workers are capped by `ASFCOV_THREADS` when set.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ResultTable> {
    run_experiment_with_threads(config, thread_count()?)
}

/// As [`run_experiment`] with an explicit worker count; 0 picks the default.
pub fn run_experiment_with_threads(config: &ExperimentConfig, threads: usize) -> Result<ResultTable> {
    config.validate()?;
    let settings = settings_for(config)?;
    let trials: Vec<(usize, usize)> =
        (0..config.trials_asf).flat_map(|a| (0..config.trials_realization).map(move |r| (a, r))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let mut rows: Vec<Row> = pool.install(|| {
        trials.par_iter().flat_map_iter(|&(a, r)| trial_rows(config, &settings, a, r)).collect()
    });
    rows.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    Ok(ResultTable { rows })
}
