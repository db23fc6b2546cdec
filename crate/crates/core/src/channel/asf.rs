use std::f64::consts::PI;

use serde::Deserialize;

use crate::channel::quadrature::lag_moments;
use crate::error::{invalid, Error, Result};
use crate::linalg::{ComplexMatrix, C64};

/// A specular path `c·δ(ξ − φ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Spike {
    pub location: f64,
    pub weight: f64,
}

/// Continuous part of an angular scattering function.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Piece {
    /// Constant height `height` on `[alpha, beta]`.
    Rect { alpha: f64, beta: f64, height: f64 },
    /// Gaussian bump truncated to `center ± half_width` (and to `[-1, 1]`),
    /// scaled to carry `mass`.
    TruncatedGaussian { center: f64, sigma: f64, half_width: f64, mass: f64 },
    /// Piecewise-constant density on `values.len()` equal cells of `[-1, 1]`.
    GridDensity { values: Vec<f64> },
}

impl Piece {
    fn validate(&self) -> Result<()> {
        match *self {
            Piece::Rect { alpha, beta, height } => {
                if !(-1.0..1.0).contains(&alpha) || !(alpha < beta && beta <= 1.0) {
                    return Err(invalid(format!("rect needs -1 <= alpha < beta <= 1, got [{alpha}, {beta}]")));
                }
                if !(height >= 0.0 && height.is_finite()) {
                    return Err(invalid(format!("rect height must be finite and >= 0, got {height}")));
                }
            }
            Piece::TruncatedGaussian { center, sigma, half_width, mass } => {
                let ok = center.is_finite()
                    && sigma > 0.0
                    && sigma.is_finite()
                    && half_width > 0.0
                    && half_width.is_finite()
                    && mass >= 0.0
                    && mass.is_finite();
                if !ok {
                    return Err(invalid("truncated gaussian needs finite center, sigma > 0, half_width > 0, mass >= 0"));
                }
                if center + half_width <= -1.0 || center - half_width >= 1.0 {
                    return Err(invalid("truncated gaussian support misses [-1, 1]"));
                }
            }
            Piece::GridDensity { ref values } => {
                if values.is_empty() {
                    return Err(invalid("grid density needs at least one value"));
                }
                if values.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                    return Err(invalid("grid density values must be finite and >= 0"));
                }
            }
        }
        Ok(())
    }

    pub fn mass(&self) -> f64 {
        match self {
            Piece::Rect { alpha, beta, height } => height * (beta - alpha),
            Piece::TruncatedGaussian { mass, .. } => *mass,
            Piece::GridDensity { values } => values.iter().sum::<f64>() * 2.0 / values.len() as f64,
        }
    }

    pub fn density(&self, xi: f64) -> f64 {
        match self {
            Piece::Rect { alpha, beta, height } => {
                if (*alpha..=*beta).contains(&xi) {
                    *height
                } else {
                    0.0
                }
            }
            Piece::TruncatedGaussian { center, sigma, half_width, mass } => {
                let (lo, hi) = gauss_support(*center, *half_width);
                if xi < lo || xi > hi {
                    return 0.0;
                }
                let z = gauss_lags(*center, *sigma, *half_width, 1, 0.0)[0].re;
                mass * gauss_kernel(xi, *center, *sigma) / z
            }
            Piece::GridDensity { values } => {
                if !(-1.0..=1.0).contains(&xi) {
                    return 0.0;
                }
                let g = values.len();
                let cell = (((xi + 1.0) * g as f64 / 2.0) as usize).min(g - 1);
                values[cell]
            }
        }
    }

    /// `∫ piece(ξ) e^{jπνkξ} dξ` for `k = 0..m`.
    pub fn lags(&self, m: usize, nu: f64) -> Vec<C64> {
        match *self {
            Piece::Rect { alpha, beta, height } => {
                (0..m).map(|k| rect_lag(alpha, beta, k, nu) * height).collect()
            }
            Piece::TruncatedGaussian { center, sigma, half_width, mass } => {
                let raw = gauss_lags(center, sigma, half_width, m, nu);
                let z = raw[0].re;
                raw.into_iter().map(|v| v * (mass / z)).collect()
            }
            Piece::GridDensity { ref values } => {
                let g = values.len();
                let width = 2.0 / g as f64;
                let mut out = vec![C64::new(0.0, 0.0); m];
                for (j, &h) in values.iter().enumerate() {
                    if h == 0.0 {
                        continue;
                    }
                    let a = -1.0 + j as f64 * width;
                    let b = if j + 1 == g { 1.0 } else { a + width };
                    for (k, o) in out.iter_mut().enumerate() {
                        *o += rect_lag(a, b, k, nu) * h;
                    }
                }
                out
            }
        }
    }
}

fn gauss_support(center: f64, half_width: f64) -> (f64, f64) {
    ((center - half_width).max(-1.0), (center + half_width).min(1.0))
}

fn gauss_kernel(xi: f64, center: f64, sigma: f64) -> f64 {
    let d = (xi - center) / sigma;
    (-0.5 * d * d).exp()
}

/// Lags of the unnormalized truncated Gaussian kernel.
fn gauss_lags(center: f64, sigma: f64, half_width: f64, m: usize, nu: f64) -> Vec<C64> {
    let (lo, hi) = gauss_support(center, half_width);
    lag_moments(|x| gauss_kernel(x, center, sigma), |x| x, lo, hi, m.max(1), nu)
}

/// `∫_α^β e^{jπνkξ} dξ`.
pub fn rect_lag(alpha: f64, beta: f64, k: usize, nu: f64) -> C64 {
    if k == 0 || nu == 0.0 {
        return C64::new(beta - alpha, 0.0);
    }
    let w = PI * nu * k as f64;
    (C64::from_polar(1.0, w * beta) - C64::from_polar(1.0, w * alpha)) / C64::new(0.0, w)
}

/// Mixed angular scattering function: spikes plus continuous pieces.
#[derive(Clone, Debug, PartialEq)]
pub struct Asf {
    spikes: Vec<Spike>,
    pieces: Vec<Piece>,
}

impl Asf {
    pub fn new(spikes: Vec<Spike>, pieces: Vec<Piece>) -> Result<Self> {
        for s in &spikes {
            if !(-1.0..1.0).contains(&s.location) {
                return Err(invalid(format!("spike location {} outside [-1, 1)", s.location)));
            }
            if !(s.weight > 0.0 && s.weight.is_finite()) {
                return Err(invalid(format!("spike weight must be finite and > 0, got {}", s.weight)));
            }
        }
        for (i, a) in spikes.iter().enumerate() {
            if spikes[..i].iter().any(|b| b.location == a.location) {
                return Err(invalid(format!("duplicate spike location {}", a.location)));
            }
        }
        for p in &pieces {
            p.validate()?;
        }
        let asf = Self { spikes, pieces };
        let mass = asf.total_mass();
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(invalid("ASF total mass must be finite and > 0"));
        }
        Ok(asf)
    }

    pub fn spikes(&self) -> &[Spike] {
        &self.spikes
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn total_mass(&self) -> f64 {
        self.spikes.iter().map(|s| s.weight).sum::<f64>() + self.pieces.iter().map(Piece::mass).sum::<f64>()
    }

    /// Density of the continuous part at `xi`.
    pub fn continuous_density(&self, xi: f64) -> f64 {
        self.pieces.iter().map(|p| p.density(xi)).sum()
    }

    /// The same ASF with every weight, height and mass multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let spikes = self.spikes.iter().map(|s| Spike { location: s.location, weight: s.weight * factor }).collect();
        let pieces = self
            .pieces
            .iter()
            .map(|p| match p.clone() {
                Piece::Rect { alpha, beta, height } => Piece::Rect { alpha, beta, height: height * factor },
                Piece::TruncatedGaussian { center, sigma, half_width, mass } => {
                    Piece::TruncatedGaussian { center, sigma, half_width, mass: mass * factor }
                }
                Piece::GridDensity { values } => {
                    Piece::GridDensity { values: values.into_iter().map(|v| v * factor).collect() }
                }
            })
            .collect();
        Self::new(spikes, pieces)
    }

    /// Sum of two ASFs (spikes at identical locations are merged).
    pub fn plus(&self, other: &Asf) -> Result<Self> {
        let mut spikes = self.spikes.clone();
        for s in &other.spikes {
            match spikes.iter_mut().find(|t| t.location == s.location) {
                Some(t) => t.weight += s.weight,
                None => spikes.push(*s),
            }
        }
        let mut pieces = self.pieces.clone();
        pieces.extend(other.pieces.iter().cloned());
        Self::new(spikes, pieces)
    }
}

/// Array response of an `m`-element half-wavelength ULA, scaled by `nu`.
pub fn array_response(m: usize, xi: f64, nu: f64) -> Vec<C64> {
    (0..m).map(|k| C64::from_polar(1.0, PI * nu * k as f64 * xi)).collect()
}

/// First column `∫γ(ξ) e^{jπνkξ} dξ`, `k = 0..m`, of the covariance.
pub fn asf_lags(asf: &Asf, m: usize, nu: f64) -> Vec<C64> {
    let mut lags = vec![C64::new(0.0, 0.0); m];
    for s in &asf.spikes {
        for (k, l) in lags.iter_mut().enumerate() {
            *l += C64::from_polar(s.weight, PI * nu * k as f64 * s.location);
        }
    }
    for p in &asf.pieces {
        for (l, v) in lags.iter_mut().zip(p.lags(m, nu)) {
            *l += v;
        }
    }
    if let Some(l0) = lags.first_mut() {
        l0.im = 0.0;
    }
    lags
}

/// Channel covariance `∫γ(ξ) a(νξ) a(νξ)^H dξ`.
pub fn asf_covariance(asf: &Asf, m: usize, nu: f64) -> Result<ComplexMatrix> {
    if m == 0 {
        return Err(invalid("M must be at least 1"));
    }
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(invalid(format!("nu must be positive, got {nu}")));
    }
    Ok(ComplexMatrix::hermitian_toeplitz(&asf_lags(asf, m, nu)))
}

/// Noise power for a target per-antenna SNR given the ASF mass.
pub fn noise_power_for_snr(mass: f64, snr_db: f64) -> f64 {
    mass * 10f64.powf(-snr_db / 10.0)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AsfFile {
    #[serde(default)]
    spikes: Vec<[f64; 2]>,
    #[serde(default)]
    pieces: Vec<Piece>,
}

/// Parses the key-value ASF format:
///
/// ```toml
/// spikes = [[-0.2, 0.5], [0.4, 0.5]]
/// pieces = [{ kind = "rect", alpha = -0.7, beta = -0.4, height = 1.0 }]
/// ```
pub fn parse_asf(text: &str) -> Result<Asf> {
    let file: AsfFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let spikes = file.spikes.iter().map(|&[location, weight]| Spike { location, weight }).collect();
    Asf::new(spikes, file.pieces)
}

pub fn write_asf(asf: &Asf) -> String {
    let spikes: Vec<String> = asf.spikes.iter().map(|s| format!("[{:?}, {:?}]", s.location, s.weight)).collect();
    let pieces: Vec<String> = asf
        .pieces
        .iter()
        .map(|p| match p {
            Piece::Rect { alpha, beta, height } => {
                format!("{{ kind = \"rect\", alpha = {alpha:?}, beta = {beta:?}, height = {height:?} }}")
            }
            Piece::TruncatedGaussian { center, sigma, half_width, mass } => format!(
                "{{ kind = \"truncated_gaussian\", center = {center:?}, sigma = {sigma:?}, half_width = {half_width:?}, mass = {mass:?} }}"
            ),
            Piece::GridDensity { values } => {
                let v: Vec<String> = values.iter().map(|x| format!("{x:?}")).collect();
                format!("{{ kind = \"grid_density\", values = [{}] }}", v.join(", "))
            }
        })
        .collect();
    let mut out = format!("spikes = [{}]\n", spikes.join(", "));
    if pieces.is_empty() {
        out.push_str("pieces = []\n");
    } else {
        out.push_str("pieces = [\n");
        for p in pieces {
            out.push_str("  ");
            out.push_str(&p);
            out.push_str(",\n");
        }
        out.push_str("]\n");
    }
    out
}

pub fn read_asf_file(path: impl AsRef<std::path::Path>) -> Result<Asf> {
    parse_asf(&std::fs::read_to_string(path)?)
}

pub fn write_asf_file(path: impl AsRef<std::path::Path>, asf: &Asf) -> Result<()> {
    std::fs::write(path, write_asf(asf))?;
    Ok(())
}

/// Two spikes at −0.2 and 0.4 (weight ½ each) over rects on [−0.7, −0.4]
/// and [0, 0.6]; total mass 1.9.
pub fn two_spike_two_rect_scene() -> Asf {
    Asf::new(
        vec![Spike { location: -0.2, weight: 0.5 }, Spike { location: 0.4, weight: 0.5 }],
        vec![
            Piece::Rect { alpha: -0.7, beta: -0.4, height: 1.0 },
            Piece::Rect { alpha: 0.0, beta: 0.6, height: 1.0 },
        ],
    )
    .expect("static scene is valid")
}
