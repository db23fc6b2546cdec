use std::sync::{Arc, OnceLock};

use crate::benchmarks::{convex_projection, spice, toeplitz_psd, ProjectionOptions, SpiceOptions};
use crate::channel::{sample_covariance_h, sample_covariance_y, SampleBatch};
use crate::dictionary::{assemble_design, reconstruct_covariance, Dictionary};
use crate::error::{Error, Result};
use crate::estimators::{em_estimate_cov, estimate_nnls, estimate_qp, EmOptions, QpOptions};
use crate::harness::config::{DictionaryKind, Method};
use crate::linalg::ComplexMatrix;
use crate::spikes::{detect_spikes, MusicOptions, SpikeEstimate};

/// Everything a method needs besides the batch.
#[derive(Clone, Debug)]
pub struct PipelineSettings {
    pub nu_dl: f64,
    /// Dictionary for NNLS and QP.
    pub dictionary: Arc<Dictionary>,
    /// Dirac grid of the same size, for EM and SPICE.
    pub dirac: Arc<Dictionary>,
    pub music: MusicOptions,
    pub qp: QpOptions,
    pub spice: SpiceOptions,
    pub projection: ProjectionOptions,
}

impl PipelineSettings {
    pub fn new(kind: DictionaryKind, g: usize, nu_dl: f64) -> Self {
        let dirac = Arc::new(Dictionary::dirac(g));
        let dictionary = match kind {
            DictionaryKind::Dirac => dirac.clone(),
            DictionaryKind::Gauss => Arc::new(Dictionary::gaussian(g)),
        };
        Self {
            nu_dl,
            dictionary,
            dirac,
            music: MusicOptions::default(),
            qp: QpOptions::default(),
            spice: SpiceOptions::default(),
            projection: ProjectionOptions::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct PipelineOutput {
    pub method: Method,
    pub ul: ComplexMatrix,
    pub dl: Option<ComplexMatrix>,
    /// Coefficients for dictionary methods, continuous atoms then spikes.
    pub u: Option<Vec<f64>>,
    pub spikes: Option<SpikeEstimate>,
    pub iterations: usize,
    pub converged: bool,
}

/// Per-batch quantities shared by all methods.
pub struct BatchContext<'a> {
    batch: &'a SampleBatch,
    sigma_y: ComplexMatrix,
    sigma_h: ComplexMatrix,
    spikes: OnceLock<std::result::Result<SpikeEstimate, String>>,
}

impl<'a> BatchContext<'a> {
    pub fn new(batch: &'a SampleBatch) -> Self {
        Self { batch, sigma_y: sample_covariance_y(batch), sigma_h: sample_covariance_h(batch), spikes: OnceLock::new() }
    }

    pub fn sigma_y(&self) -> &ComplexMatrix {
        &self.sigma_y
    }

    pub fn sigma_h(&self) -> &ComplexMatrix {
        &self.sigma_h
    }

    fn spikes(&self, opts: &MusicOptions) -> Result<SpikeEstimate> {
        self.spikes
            .get_or_init(|| detect_spikes(&self.sigma_y, self.batch.n(), opts).map_err(|e| e.to_string()))
            .clone()
            .map_err(|e| Error::InvalidArgument(format!("spike detection: {e}")))
    }

    pub fn run(&self, settings: &PipelineSettings, method: Method) -> Result<PipelineOutput> {
        self.run_inner(settings, method).map_err(|e| tag(method, e))
    }

    fn run_inner(&self, s: &PipelineSettings, method: Method) -> Result<PipelineOutput> {
        let n0 = self.batch.noise_power();
        let bare = |ul: ComplexMatrix, dl, iterations, converged| PipelineOutput {
            method,
            ul,
            dl,
            u: None,
            spikes: None,
            iterations,
            converged,
        };
        match method {
            Method::Sample => Ok(bare(self.sigma_h.clone(), None, 0, true)),
            Method::ToeplitzPsd => {
                let rep = toeplitz_psd(&self.sigma_h, 1e-8, 500)?;
                Ok(bare(rep.covariance, None, rep.iterations, rep.converged))
            }
            Method::Projection => {
                let rep = convex_projection(&self.sigma_h, &s.projection)?;
                let dl = rep.measure.as_ref().map(|m| m.covariance(self.batch.m(), s.nu_dl)).transpose()?;
                Ok(bare(rep.covariance, dl, rep.iterations, rep.converged))
            }
            Method::Spice => {
                let system = assemble_design(s.dirac.clone(), &[], &self.sigma_y, 1.0)?;
                let rep = spice(&self.sigma_y, &system, self.batch.n(), &s.spice)?;
                let measure = rep.measure.as_ref().expect("SPICE returns its measure");
                let dl = measure.covariance(self.batch.m(), s.nu_dl)?;
                let mut out = bare(rep.covariance, Some(dl), rep.iterations, rep.converged);
                out.u = Some(measure.weights.clone());
                Ok(out)
            }
            Method::Nnls | Method::NnlsNoMusic | Method::Qp | Method::Em | Method::EmNoMusic => {
                let spikes = if method.uses_music() { self.spikes(&s.music)? } else { SpikeEstimate::none() };
                let dictionary = match method {
                    Method::Em | Method::EmNoMusic => s.dirac.clone(),
                    _ => s.dictionary.clone(),
                };
                let system = assemble_design(dictionary, &spikes.locations, &self.sigma_h, 1.0)?;
                let rep = match method {
                    Method::Qp => estimate_qp(&system, &s.qp)?,
                    Method::Em | Method::EmNoMusic => em_estimate_cov(&self.sigma_y, n0, &system, &EmOptions::default())?,
                    _ => estimate_nnls(&system)?,
                };
                let ul = reconstruct_covariance(&system, &rep.u, 1.0)?;
                let dl = reconstruct_covariance(&system, &rep.u, s.nu_dl)?;
                Ok(PipelineOutput {
                    method,
                    ul,
                    dl: Some(dl),
                    u: Some(rep.u),
                    spikes: Some(spikes),
                    iterations: rep.iterations,
                    converged: rep.converged,
                })
            }
        }
    }
}

fn tag(method: Method, e: Error) -> Error {
    Error::Method { method: method.to_string(), source: Box::new(e) }
}

/// Runs one method on one batch: detect, fit, reconstruct.
pub fn pipeline(batch: &SampleBatch, settings: &PipelineSettings, method: Method) -> Result<PipelineOutput> {
    BatchContext::new(batch).run(settings, method)
}
