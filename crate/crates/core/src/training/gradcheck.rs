//! Central finite differences as an independent check on [`backward`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use super::backward;
use crate::error::{Error, Result};
use crate::network::{default_levels, DespawnModel, SharingMode};

/// `(loss(theta + step) - loss(theta - step)) / (2 step)` for one parameter,
/// from two full forward passes.
pub fn finite_difference_grad(
    signal: &[f64],
    model: &DespawnModel,
    gamma: f64,
    param_index: usize,
    step: f64,
) -> Result<f64> {
    let params = model.parameters();
    if param_index >= params.len() {
        return Err(Error::Index {
            index: param_index,
            count: params.len(),
        });
    }
    let eval = |delta: f64| -> Result<f64> {
        let mut shifted = params.clone();
        shifted[param_index] += delta;
        let mut m = model.clone();
        m.set_parameters(&shifted)?;
        let record = m.forward(signal)?;
        Ok(crate::network::loss(&record, signal, gamma)?.total)
    };
    Ok((eval(step)? - eval(-step)?) / (2.0 * step))
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckConfig {
    pub signal_length: usize,
    pub kernel_size: usize,
    pub gamma: f64,
    pub seeds: Vec<u64>,
    pub relative_tolerance: f64,
    pub absolute_tolerance: f64,
    /// Standard deviation of the noise added to kernels before checking, so
    /// the reconstruction residual stays away from the kink of `|.|`.
    pub kernel_noise: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            signal_length: 256,
            kernel_size: 8,
            gamma: 1.0,
            seeds: (0..5).collect(),
            relative_tolerance: 1e-4,
            absolute_tolerance: 1e-7,
            kernel_noise: 0.05,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ParameterCheck {
    pub seed: u64,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub mode: SharingMode,
    pub parameters: usize,
    pub checks: Vec<ParameterCheck>,
    pub max_abs_error: f64,
    pub failures: usize,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// A randomly perturbed model and a random signal for one seed.
pub fn perturbed_case(
    mode: SharingMode,
    config: &GradCheckConfig,
    seed: u64,
) -> Result<(DespawnModel, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let levels = default_levels(config.signal_length);
    let mut model = DespawnModel::new(levels, config.kernel_size, mode, config.gamma)?;
    let noise =
        Normal::new(0.0, config.kernel_noise.max(0.0)).map_err(|e| Error::Config(e.to_string()))?;
    let kernel_params = mode
        .scheme()
        .kernel_parameter_count(levels, config.kernel_size);
    let mut params = model.parameters();
    for (i, p) in params.iter_mut().enumerate() {
        if i < kernel_params {
            *p += noise.sample(&mut rng);
        } else {
            *p = rng.random_range(0.05..0.3);
        }
    }
    model.set_parameters(&params)?;
    let signal = (0..config.signal_length)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    Ok((model, signal))
}

/// Compares [`backward`] with central differences on every parameter, for
/// every configured seed.
pub fn gradient_check(mode: SharingMode, config: &GradCheckConfig) -> Result<GradCheckReport> {
    let mut checks = Vec::new();
    let mut parameters = 0;
    for &seed in &config.seeds {
        let (model, signal) = perturbed_case(mode, config, seed)?;
        let (_, grads) = backward(&signal, &model, config.gamma)?;
        let params = model.parameters();
        parameters = params.len();
        for (index, (&theta, &analytic)) in params.iter().zip(grads.as_slice()).enumerate() {
            let step = 1e-6 * theta.abs().max(1.0);
            let numeric = finite_difference_grad(&signal, &model, config.gamma, index, step)?;
            let scale = analytic.abs().max(numeric.abs());
            let bound = (config.relative_tolerance * scale).max(config.absolute_tolerance);
            checks.push(ParameterCheck {
                seed,
                index,
                analytic,
                numeric,
                passed: (analytic - numeric).abs() <= bound,
            });
        }
    }
    let max_abs_error = checks
        .iter()
        .map(|c| (c.analytic - c.numeric).abs())
        .fold(0.0, f64::max);
    let failures = checks.iter().filter(|c| !c.passed).count();
    Ok(GradCheckReport {
        mode,
        parameters,
        checks,
        max_abs_error,
        failures,
    })
}
