//! The learnable wavelet cascade.
//!
//! An `L`-level network mirrors the fast wavelet transform: each encoder block
//! correlates its input with the level's `h` and `g` kernels at stride two,
//! passes the detail branch through a learnable hard-threshold gate, and hands
//! the approximation to the next block. Decoder blocks consume the thresholded
//! details through skip connections and rebuild the signal with `h_bar` and
//! `g_bar`. The final approximation is never thresholded.

mod scheme;

use serde::{Deserialize, Serialize};

pub use scheme::{
    registered_schemes, scheme_by_name, BankGradient, KernelRole, KernelScheme, SharingMode,
    SlotRole,
};

use crate::error::{Error, Result};
use crate::wavelet::{
    check_depth, correlate_pair, pad_even, scatter_pair, CoefficientPyramid, FilterBank, Kernel,
};

/// Sharpness of the threshold gate.
pub const DEFAULT_ALPHA: f64 = 10.0;

/// Overflow-safe logistic function.
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Positive and negative thresholds of one level's gate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPair {
    pub b_plus: f64,
    pub b_minus: f64,
    pub alpha: f64,
}

impl ThresholdPair {
    pub fn zero(alpha: f64) -> Self {
        Self {
            b_plus: 0.0,
            b_minus: 0.0,
            alpha,
        }
    }

    pub fn new(b_plus: f64, b_minus: f64, alpha: f64) -> Self {
        Self {
            b_plus,
            b_minus,
            alpha,
        }
    }

    /// The two logistic arguments `(alpha (x + b_minus), alpha (x - b_plus))`.
    fn arguments(&self, x: f64) -> (f64, f64) {
        (
            self.alpha * (x + self.b_minus),
            self.alpha * (x - self.b_plus),
        )
    }
}

/// Smooth asymmetric hard threshold:
/// `x * (sigmoid(-alpha (x + b_minus)) + sigmoid(alpha (x - b_plus)))`.
///
/// The gate is evaluated as `1 + sigmoid(v) - sigmoid(u)`, which equals the
/// form above and is exactly one whenever both thresholds are zero.
pub fn ht_activation(x: f64, t: &ThresholdPair) -> f64 {
    let (u, v) = t.arguments(x);
    x * (1.0 + (sigmoid(v) - sigmoid(u)))
}

/// Partial derivatives of [`ht_activation`] with respect to `(x, b_plus, b_minus)`.
pub fn ht_derivatives(x: f64, t: &ThresholdPair) -> (f64, f64, f64) {
    let (u, v) = t.arguments(x);
    let (su, sv) = (sigmoid(u), sigmoid(v));
    let gate = 1.0 + (sv - su);
    let du = t.alpha * su * (1.0 - su);
    let dv = t.alpha * sv * (1.0 - sv);
    (gate + x * (dv - du), -x * dv, -x * du)
}

/// Thresholded coefficients and the reconstruction of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardRecord {
    pub pyramid: CoefficientPyramid,
    pub reconstruction: Vec<f64>,
    pub input_length: usize,
}

/// Everything the backward pass needs from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub banks: Vec<FilterBank>,
    /// Encoder input of each level after odd-length padding.
    pub padded_inputs: Vec<Vec<f64>>,
    /// Detail coefficients before the threshold gate.
    pub raw_details: Vec<Vec<f64>>,
    /// Approximation entering each decoder level.
    pub decoder_inputs: Vec<Vec<f64>>,
    pub record: ForwardRecord,
}

/// Components of the training objective.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub recon: f64,
    pub sparsity: f64,
}

/// Complete learnable state of a wavelet network.
#[derive(Debug, Clone, PartialEq)]
pub struct DespawnModel {
    levels: usize,
    kernel_size: usize,
    mode: SharingMode,
    alpha: f64,
    gamma: f64,
    kernels: Vec<Kernel>,
    thresholds: Vec<ThresholdPair>,
}

impl DespawnModel {
    /// Builds a model whose every kernel starts at the Daubechies filter of
    /// `kernel_size` taps (db4 for 8) and whose thresholds start at zero, so
    /// the untrained network is the classical transform.
    pub fn new(levels: usize, kernel_size: usize, mode: SharingMode, gamma: f64) -> Result<Self> {
        if levels == 0 {
            return Err(Error::Config("at least one level is required".into()));
        }
        if kernel_size < 2 || !kernel_size.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "kernel size must be even and >= 2, got {kernel_size}"
            )));
        }
        if !gamma.is_finite() || gamma < 0.0 {
            return Err(Error::Config(format!(
                "gamma must be finite and >= 0, got {gamma}"
            )));
        }
        let kernels = mode.scheme().initial_slots(levels, kernel_size)?;
        Ok(Self {
            levels,
            kernel_size,
            mode,
            alpha: DEFAULT_ALPHA,
            gamma,
            kernels,
            thresholds: vec![ThresholdPair::zero(DEFAULT_ALPHA); levels],
        })
    }

    /// Rebuilds a model from stored parts.
    pub fn from_parts(
        levels: usize,
        kernel_size: usize,
        mode: SharingMode,
        alpha: f64,
        gamma: f64,
        kernels: Vec<Kernel>,
        thresholds: Vec<ThresholdPair>,
    ) -> Result<Self> {
        let mut model = Self::new(levels, kernel_size, mode, gamma)?;
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::Config(format!(
                "alpha must be positive, got {alpha}"
            )));
        }
        if kernels.len() != model.kernels.len() {
            return Err(Error::Config(format!(
                "mode {mode} with {levels} levels needs {} kernels, got {}",
                model.kernels.len(),
                kernels.len()
            )));
        }
        if let Some(k) = kernels.iter().find(|k| k.len() != kernel_size) {
            return Err(Error::Config(format!(
                "kernel of {} taps in a model of kernel size {kernel_size}",
                k.len()
            )));
        }
        if thresholds.len() != levels {
            return Err(Error::Config(format!(
                "{} threshold pairs for {levels} levels",
                thresholds.len()
            )));
        }
        model.alpha = alpha;
        model.kernels = kernels;
        model.thresholds = thresholds
            .into_iter()
            .map(|t| ThresholdPair { alpha, ..t })
            .collect();
        if !model.scheme().learns_thresholds()
            && model
                .thresholds
                .iter()
                .any(|t| t.b_plus != 0.0 || t.b_minus != 0.0)
        {
            return Err(Error::Config(format!(
                "mode {mode} does not use thresholds"
            )));
        }
        Ok(model)
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn kernel_size(&self) -> usize {
        self.kernel_size
    }

    pub fn mode(&self) -> SharingMode {
        self.mode
    }

    pub fn scheme(&self) -> &'static dyn KernelScheme {
        self.mode.scheme()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Learned kernels in scheme slot order.
    pub fn kernels(&self) -> &[Kernel] {
        &self.kernels
    }

    pub fn thresholds(&self) -> &[ThresholdPair] {
        &self.thresholds
    }

    pub fn set_kernel(&mut self, slot: usize, kernel: Kernel) -> Result<()> {
        if kernel.len() != self.kernel_size {
            return Err(Error::InvalidKernel(format!(
                "expected {} taps, got {}",
                self.kernel_size,
                kernel.len()
            )));
        }
        let count = self.kernels.len();
        let dst = self
            .kernels
            .get_mut(slot)
            .ok_or(Error::Index { index: slot, count })?;
        *dst = kernel;
        Ok(())
    }

    pub fn set_threshold(&mut self, level: usize, b_plus: f64, b_minus: f64) -> Result<()> {
        if !self.scheme().learns_thresholds() {
            return Err(Error::Config(format!(
                "mode {} does not use thresholds",
                self.mode
            )));
        }
        let alpha = self.alpha;
        let count = self.levels;
        let dst = self.thresholds.get_mut(level).ok_or(Error::Index {
            index: level,
            count,
        })?;
        *dst = ThresholdPair::new(b_plus, b_minus, alpha);
        Ok(())
    }

    pub fn parameter_count(&self) -> usize {
        self.scheme().parameter_count(self.levels, self.kernel_size)
    }

    /// Trainable scalars: learned kernel taps in slot order, then
    /// `(b_plus, b_minus)` per level when the mode learns thresholds.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parameter_count());
        for k in &self.kernels {
            out.extend_from_slice(k.taps());
        }
        if self.scheme().learns_thresholds() {
            for t in &self.thresholds {
                out.push(t.b_plus);
                out.push(t.b_minus);
            }
        }
        out
    }

    pub fn set_parameters(&mut self, values: &[f64]) -> Result<()> {
        let count = self.parameter_count();
        if values.len() != count {
            return Err(Error::InvalidInput(format!(
                "expected {count} parameters, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("parameter {i} is not finite")));
        }
        let k = self.kernel_size;
        let (kernel_part, threshold_part) = values.split_at(self.kernels.len() * k);
        for (dst, src) in self.kernels.iter_mut().zip(kernel_part.chunks_exact(k)) {
            *dst = Kernel::new(src.to_vec())?;
        }
        for (dst, src) in self
            .thresholds
            .iter_mut()
            .zip(threshold_part.chunks_exact(2))
        {
            dst.b_plus = src[0];
            dst.b_minus = src[1];
        }
        Ok(())
    }

    /// Filter bank of every level, re-derived from the learned kernels.
    pub fn banks(&self) -> Result<Vec<FilterBank>> {
        let scheme = self.scheme();
        (0..self.levels)
            .map(|l| scheme.bank(&self.kernels, l, self.kernel_size))
            .collect()
    }

    /// `|h_bar| / |h|` per level. Unconstrained kernels can trade small
    /// analysis filters for large synthesis filters; this exposes that drift.
    pub fn synthesis_gain_ratios(&self) -> Result<Vec<f64>> {
        Ok(self
            .banks()?
            .iter()
            .map(|b| b.h_bar.l2_norm() / b.h.l2_norm())
            .collect())
    }

    pub fn forward(&self, signal: &[f64]) -> Result<ForwardRecord> {
        Ok(self.trace(signal)?.record)
    }

    /// Forward pass that keeps the intermediates needed for backpropagation.
    pub fn trace(&self, signal: &[f64]) -> Result<ForwardTrace> {
        if signal.len() < 2 {
            return Err(Error::InvalidSignal(format!(
                "need at least 2 samples, got {}",
                signal.len()
            )));
        }
        check_depth(signal.len(), self.levels)?;
        let banks = self.banks()?;
        let gated = self.scheme().learns_thresholds();

        let mut padded_inputs = Vec::with_capacity(self.levels);
        let mut raw_details = Vec::with_capacity(self.levels);
        let mut details = Vec::with_capacity(self.levels);
        let mut level_lengths = Vec::with_capacity(self.levels);
        let mut approx = signal.to_vec();
        for (bank, t) in banks.iter().zip(&self.thresholds) {
            level_lengths.push(approx.len());
            let padded = pad_even(&approx);
            let (next, raw) = correlate_pair(&padded, bank.h.taps(), bank.g.taps());
            let d = if gated {
                raw.iter().map(|&x| ht_activation(x, t)).collect()
            } else {
                raw.clone()
            };
            padded_inputs.push(padded);
            raw_details.push(raw);
            details.push(d);
            approx = next;
        }

        let mut decoder_inputs = vec![Vec::new(); self.levels];
        let mut current = approx.clone();
        for l in (0..self.levels).rev() {
            let bank = &banks[l];
            let mut out = scatter_pair(
                &current,
                &details[l],
                bank.h_bar.reversed().taps(),
                bank.g_bar.reversed().taps(),
            );
            out.truncate(level_lengths[l]);
            decoder_inputs[l] = std::mem::replace(&mut current, out);
        }

        Ok(ForwardTrace {
            banks,
            padded_inputs,
            raw_details,
            decoder_inputs,
            record: ForwardRecord {
                pyramid: CoefficientPyramid {
                    details,
                    approx,
                    level_lengths,
                },
                reconstruction: current,
                input_length: signal.len(),
            },
        })
    }

    /// Objective of `signal` under this model with the model's own gamma.
    pub fn evaluate(&self, signal: &[f64]) -> Result<LossBreakdown> {
        loss(&self.forward(signal)?, signal, self.gamma)
    }
}

/// Mean absolute residual plus `gamma` times the mean absolute value of every
/// coefficient (details and final approximation).
pub fn loss(record: &ForwardRecord, signal: &[f64], gamma: f64) -> Result<LossBreakdown> {
    if signal.len() != record.reconstruction.len() || signal.is_empty() {
        return Err(Error::InvalidInput(format!(
            "signal has {} samples, reconstruction {}",
            signal.len(),
            record.reconstruction.len()
        )));
    }
    let recon = signal
        .iter()
        .zip(&record.reconstruction)
        .map(|(f, r)| (f - r).abs())
        .sum::<f64>()
        / signal.len() as f64;
    let pyramid = &record.pyramid;
    let l1 = pyramid
        .details
        .iter()
        .flatten()
        .chain(&pyramid.approx)
        .map(|c| c.abs())
        .sum::<f64>();
    let sparsity = l1 / pyramid.coefficient_count() as f64;
    Ok(LossBreakdown {
        total: recon + gamma * sparsity,
        recon,
        sparsity,
    })
}

/// Depth used when none is given: the nearest integer to `log2(length)`,
/// capped at what the signal supports.
pub fn default_levels(length: usize) -> usize {
    let nearest = (length.max(2) as f64).log2().round() as usize;
    nearest.clamp(1, crate::wavelet::max_levels(length.max(2)))
}
