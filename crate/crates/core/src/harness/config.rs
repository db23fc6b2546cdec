use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;

use crate::channel::MixedAsfParams;
use crate::error::{Error, Result};

/// A scalar or a sweep list.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            Self::One(x) => vec![x.clone()],
            Self::Many(xs) => xs.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Sample,
    Nnls,
    Qp,
    Em,
    NnlsNoMusic,
    EmNoMusic,
    ToeplitzPsd,
    Spice,
    Projection,
}

impl Method {
    pub const ALL: [Method; 9] = [
        Method::Sample,
        Method::Nnls,
        Method::Qp,
        Method::Em,
        Method::NnlsNoMusic,
        Method::EmNoMusic,
        Method::ToeplitzPsd,
        Method::Spice,
        Method::Projection,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Sample => "sample",
            Method::Nnls => "nnls",
            Method::Qp => "qp",
            Method::Em => "em",
            Method::NnlsNoMusic => "nnls-no-music",
            Method::EmNoMusic => "em-no-music",
            Method::ToeplitzPsd => "toeplitz-psd",
            Method::Spice => "spice",
            Method::Projection => "projection",
        }
    }

    /// Whether the method fits dictionary coefficients (and so depends on G).
    pub fn uses_dictionary(self) -> bool {
        matches!(self, Method::Nnls | Method::Qp | Method::Em | Method::NnlsNoMusic | Method::EmNoMusic | Method::Spice)
    }

    /// Whether a downlink covariance can be extrapolated from the output.
    pub fn has_downlink(self) -> bool {
        !matches!(self, Method::Sample | Method::ToeplitzPsd)
    }

    pub fn uses_music(self) -> bool {
        matches!(self, Method::Nnls | Method::Qp | Method::Em)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DictionaryKind {
    #[default]
    Dirac,
    Gauss,
}

impl FromStr for DictionaryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dirac" => Ok(Self::Dirac),
            "gauss" => Ok(Self::Gauss),
            _ => Err(Error::Config(format!("unknown dictionary kind '{s}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DictionaryConfig {
    #[serde(default)]
    pub kind: DictionaryKind,
    #[serde(rename = "G", default)]
    pub g: Option<OneOrMany<usize>>,
    #[serde(default)]
    pub g_over_m: Option<OneOrMany<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MusicConfig {
    pub grid_size: usize,
    pub refine: bool,
}

impl Default for MusicConfig {
    fn default() -> Self {
        Self { grid_size: 4096, refine: true }
    }
}

/// Where the true ASFs come from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scene {
    /// Fresh synthetic mixed ASF per `asf_seed`.
    #[default]
    Random,
    /// Fixed two-rect, two-spike test scene.
    TwoSpikeTwoRect,
}

fn default_f_ul() -> f64 {
    1.9
}

fn default_f_dl() -> f64 {
    2.1
}

fn default_qp_grid() -> usize {
    10_000
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N", default)]
    pub n: Option<OneOrMany<usize>>,
    #[serde(default)]
    pub n_over_m: Option<OneOrMany<f64>>,
    pub snr_db: f64,
    pub dictionary: DictionaryConfig,
    pub methods: Vec<Method>,
    pub trials_asf: usize,
    pub trials_realization: usize,
    pub seed: u64,
    #[serde(default = "default_f_ul")]
    pub f_ul_ghz: f64,
    #[serde(default = "default_f_dl")]
    pub f_dl_ghz: f64,
    #[serde(default)]
    pub music: MusicConfig,
    #[serde(default)]
    pub scene: Scene,
    #[serde(default)]
    pub asf: MixedAsfParams,
    #[serde(default = "default_qp_grid")]
    pub qp_grid: usize,
    /// Subspace dimension of the power-efficiency metric; `max(1, M/8)` when absent.
    #[serde(default)]
    pub pe_p: Option<usize>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg = Self::parse(&std::fs::read_to_string(path)?)?;
        if let (Some(out), Some(dir)) = (&cfg.output, path.parent()) {
            if out.is_relative() {
                cfg.output = Some(dir.join(out));
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(config_err(format!("M must be at least 2, got {}", self.m)));
        }
        if self.trials_asf == 0 || self.trials_realization == 0 {
            return Err(config_err("trial counts must be at least 1"));
        }
        if self.methods.is_empty() {
            return Err(config_err("methods list is empty"));
        }
        if !self.snr_db.is_finite() {
            return Err(config_err("snr_db must be finite"));
        }
        if !(self.f_ul_ghz > 0.0 && self.f_dl_ghz > 0.0 && self.nu_dl().is_finite()) {
            return Err(config_err("carrier frequencies must be positive"));
        }
        if self.music.grid_size < 3 {
            return Err(config_err("music.grid_size must be at least 3"));
        }
        if let Some(p) = self.pe_p {
            if p == 0 || p > self.m {
                return Err(config_err(format!("pe_p must lie in 1..={}", self.m)));
            }
        }
        self.asf.validate()?;
        self.sample_counts()?;
        let gs = self.dictionary_sizes()?;
        if self.qp_grid < gs.iter().copied().max().unwrap_or(0) && self.methods.contains(&Method::Qp) {
            return Err(config_err("qp_grid must be at least the dictionary size"));
        }
        Ok(())
    }

    pub fn nu_dl(&self) -> f64 {
        self.f_dl_ghz / self.f_ul_ghz
    }

    pub fn pe_p(&self) -> usize {
        self.pe_p.unwrap_or((self.m / 8).max(1))
    }

    /// Snapshot counts of the sweep, in config order.
    pub fn sample_counts(&self) -> Result<Vec<usize>> {
        let ns = match (&self.n, &self.n_over_m) {
            (Some(n), None) => n.to_vec(),
            (None, Some(r)) => r.to_vec().iter().map(|&x| (x * self.m as f64).round() as usize).collect(),
            (Some(_), Some(_)) => return Err(config_err("give either N or n_over_m, not both")),
            (None, None) => return Err(config_err("missing N or n_over_m")),
        };
        if ns.is_empty() || ns.contains(&0) {
            return Err(config_err("every sample count must be at least 1"));
        }
        Ok(ns)
    }

    /// Dictionary sizes of the sweep, in config order.
    pub fn dictionary_sizes(&self) -> Result<Vec<usize>> {
        let d = &self.dictionary;
        let gs = match (&d.g, &d.g_over_m) {
            (Some(g), None) => g.to_vec(),
            (None, Some(r)) => r.to_vec().iter().map(|&x| (x * self.m as f64).round() as usize).collect(),
            (Some(_), Some(_)) => return Err(config_err("give either dictionary.G or dictionary.g_over_m, not both")),
            (None, None) => vec![2 * self.m],
        };
        if gs.is_empty() || gs.contains(&0) {
            return Err(config_err("every dictionary size must be at least 1"));
        }
        Ok(gs)
    }
}
