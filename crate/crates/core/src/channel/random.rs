use rand::Rng;
use serde::Deserialize;

use crate::channel::asf::{Asf, Piece, Spike};
use crate::channel::sampling::rng_for;
use crate::error::{invalid, Result};

/// Ranges for the synthetic scene generator.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixedAsfParams {
    pub min_spikes: usize,
    pub max_spikes: usize,
    pub min_clusters: usize,
    pub max_clusters: usize,
    /// Share of the unit mass carried by spikes when both kinds are present.
    pub spike_fraction: f64,
    pub min_cluster_width: f64,
    pub max_cluster_width: f64,
}

impl Default for MixedAsfParams {
    fn default() -> Self {
        Self {
            min_spikes: 1,
            max_spikes: 3,
            min_clusters: 1,
            max_clusters: 3,
            spike_fraction: 0.5,
            min_cluster_width: 0.1,
            max_cluster_width: 0.4,
        }
    }
}

impl MixedAsfParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_spikes + self.max_clusters == 0 {
            return Err(invalid("random ASF needs at least one spike or cluster"));
        }
        if self.min_spikes > self.max_spikes || self.min_clusters > self.max_clusters {
            return Err(invalid("random ASF min counts exceed max counts"));
        }
        if !(0.0..=1.0).contains(&self.spike_fraction) {
            return Err(invalid("spike_fraction must lie in [0, 1]"));
        }
        let w = (self.min_cluster_width, self.max_cluster_width);
        if !(w.0 > 0.0 && w.0 <= w.1 && w.1 <= 2.0) {
            return Err(invalid("cluster widths need 0 < min <= max <= 2"));
        }
        Ok(())
    }
}

/// Random spikes and rect clusters with total mass 1.
///
/// Spike locations are uniform on `[-1, 1)`; cluster centers are uniform and
/// clusters are clipped to `[-1, 1]`.
pub fn random_mixed_asf(params: &MixedAsfParams, seed: u64) -> Result<Asf> {
    params.validate()?;
    let mut rng = rng_for(seed, 0);
    let mut n_spikes = rng.random_range(params.min_spikes..=params.max_spikes);
    let mut n_clusters = rng.random_range(params.min_clusters..=params.max_clusters);
    if n_spikes + n_clusters == 0 {
        if params.max_clusters > 0 {
            n_clusters = 1;
        } else {
            n_spikes = 1;
        }
    }
    random_mixed_asf_with(params, &mut rng, n_spikes, n_clusters)
}

fn random_mixed_asf_with(params: &MixedAsfParams, rng: &mut impl Rng, n_spikes: usize, n_clusters: usize) -> Result<Asf> {
    let spike_mass = match (n_spikes, n_clusters) {
        (0, _) => 0.0,
        (_, 0) => 1.0,
        _ => params.spike_fraction,
    };
    let mut locations: Vec<f64> = Vec::with_capacity(n_spikes);
    while locations.len() < n_spikes {
        let phi = rng.random_range(-1.0..1.0);
        if !locations.contains(&phi) {
            locations.push(phi);
        }
    }
    let raw: Vec<f64> = (0..n_spikes).map(|_| rng.random_range(0.5..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let spikes = locations
        .into_iter()
        .zip(&raw)
        .map(|(location, w)| Spike { location, weight: spike_mass * w / total })
        .collect();

    let mut clusters = Vec::with_capacity(n_clusters);
    for _ in 0..n_clusters {
        let center: f64 = rng.random_range(-1.0..1.0);
        let width = rng.random_range(params.min_cluster_width..=params.max_cluster_width);
        let alpha = (center - 0.5 * width).max(-1.0);
        let beta = (center + 0.5 * width).min(1.0);
        let share = rng.random_range(0.5..1.0);
        clusters.push((alpha, beta, share));
    }
    let share_total: f64 = clusters.iter().map(|c| c.2).sum();
    let pieces = clusters
        .into_iter()
        .map(|(alpha, beta, share)| Piece::Rect {
            alpha,
            beta,
            height: (1.0 - spike_mass) * share / share_total / (beta - alpha),
        })
        .collect();
    Asf::new(spikes, pieces)
}
