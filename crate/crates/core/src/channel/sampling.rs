use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::linalg::cmx::{read_cmx_file, write_cmx_file};
use crate::linalg::{from_nalgebra, psd_sqrt, to_nalgebra, ComplexMatrix, C64};

/// Deterministic generator for `(seed, stream)`.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Circularly-symmetric complex normal with unit variance.
pub fn complex_normal(rng: &mut impl Rng) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// `N` noisy snapshots of an `M`-antenna channel, stored as an `M×N` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleBatch {
    snapshots: ComplexMatrix,
    noise_power: f64,
    seed: u64,
}

impl SampleBatch {
    pub fn new(snapshots: ComplexMatrix, noise_power: f64, seed: u64) -> Result<Self> {
        if snapshots.rows() == 0 || snapshots.cols() == 0 {
            return Err(invalid("a batch needs M >= 1 and N >= 1"));
        }
        if !(noise_power >= 0.0 && noise_power.is_finite()) {
            return Err(invalid(format!("noise power must be finite and >= 0, got {noise_power}")));
        }
        Ok(Self { snapshots, noise_power, seed })
    }

    pub fn m(&self) -> usize {
        self.snapshots.rows()
    }

    pub fn n(&self) -> usize {
        self.snapshots.cols()
    }

    pub fn snapshots(&self) -> &ComplexMatrix {
        &self.snapshots
    }

    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let meta = format!("N0={:?} seed={}", self.noise_power, self.seed);
        write_cmx_file(path, &self.snapshots, &[meta])
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let (snapshots, meta) = read_cmx_file(path)?;
        let mut n0 = None;
        let mut seed = None;
        for tok in meta.iter().flat_map(|l| l.split_whitespace()) {
            match tok.split_once('=') {
                Some(("N0", v)) => n0 = v.parse::<f64>().ok(),
                Some(("seed", v)) => seed = v.parse::<u64>().ok(),
                _ => {}
            }
        }
        match (n0, seed) {
            (Some(n0), Some(seed)) => Self::new(snapshots, n0, seed),
            _ => Err(Error::Parse { line: 2, msg: "batch needs a '# N0=<v> seed=<s>' line".into() }),
        }
    }
}

/// Draws `y[s] = Σ_h^{1/2} g[s] + z[s]` with `z ~ CN(0, N0·I)`, on stream 0 of `seed`.
pub fn draw_samples(sigma_h: &ComplexMatrix, noise_power: f64, n: usize, seed: u64) -> Result<SampleBatch> {
    draw_samples_stream(sigma_h, noise_power, n, seed, 0)
}

pub fn draw_samples_stream(
    sigma_h: &ComplexMatrix,
    noise_power: f64,
    n: usize,
    seed: u64,
    stream: u64,
) -> Result<SampleBatch> {
    let m = sigma_h.ensure_square()?;
    if n == 0 {
        return Err(invalid("N must be at least 1"));
    }
    if !(noise_power >= 0.0 && noise_power.is_finite()) {
        return Err(invalid(format!("noise power must be finite and >= 0, got {noise_power}")));
    }
    let root = to_nalgebra(&psd_sqrt(sigma_h)?);
    let mut rng = rng_for(seed, stream);
    let mut g = nalgebra::DMatrix::<C64>::zeros(m, n);
    let mut z = nalgebra::DMatrix::<C64>::zeros(m, n);
    let noise_std = noise_power.sqrt();
    for s in 0..n {
        for i in 0..m {
            g[(i, s)] = complex_normal(&mut rng);
        }
        for i in 0..m {
            z[(i, s)] = complex_normal(&mut rng) * noise_std;
        }
    }
    let y = root * g + z;
    SampleBatch::new(from_nalgebra(&y), noise_power, seed)
}

/// `Σ̂_y = (1/N) Σ_s y[s] y[s]^H`.
pub fn sample_covariance_y(batch: &SampleBatch) -> ComplexMatrix {
    let y = to_nalgebra(batch.snapshots());
    let s = &y * y.adjoint() / C64::new(batch.n() as f64, 0.0);
    let m = batch.m();
    ComplexMatrix::from_fn(m, m, |r, c| {
        if r == c {
            C64::new(s[(r, r)].re, 0.0)
        } else if r > c {
            s[(r, c)]
        } else {
            s[(c, r)].conj()
        }
    })
}

/// `Σ̂_h = Σ̂_y − N0·I`; may be indefinite.
pub fn sample_covariance_h(batch: &SampleBatch) -> ComplexMatrix {
    let mut s = sample_covariance_y(batch);
    s.add_diag(-batch.noise_power());
    s
}
