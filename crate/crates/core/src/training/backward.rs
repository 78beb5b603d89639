//! Hand-written reverse pass through the cascade.

use crate::error::Result;
use crate::network::{ht_derivatives, loss, BankGradient, DespawnModel, LossBreakdown};
use crate::wavelet::{correlate_pair, scatter_pair};

/// Gradient of the objective with respect to every trainable scalar, laid out
/// like [`DespawnModel::parameters`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    values: Vec<f64>,
}

impl Gradients {
    pub fn zeros(len: usize) -> Self {
        Self {
            values: vec![0.0; len],
        }
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub(crate) fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
    }

    pub(crate) fn scale(&mut self, factor: f64) {
        self.values.iter_mut().for_each(|v| *v *= factor);
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `out[j] = sum_k coeff[k] * signal[(2k + j) mod N]` for `j < taps`.
fn strided_kernel_grad(signal: &[f64], coeff: &[f64], taps: usize) -> Vec<f64> {
    let n = signal.len();
    let mut out = vec![0.0; taps];
    for (k, &c) in coeff.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        let base = 2 * k;
        for (j, o) in out.iter_mut().enumerate() {
            *o += c * signal[(base + j) % n];
        }
    }
    out
}

fn padded(v: &[f64], len: usize) -> Vec<f64> {
    let mut out = v.to_vec();
    out.resize(len, 0.0);
    out
}

/// Loss and exact gradient for one signal.
pub fn backward(
    signal: &[f64],
    model: &DespawnModel,
    gamma: f64,
) -> Result<(LossBreakdown, Gradients)> {
    let trace = model.trace(signal)?;
    let record = &trace.record;
    let value = loss(record, signal, gamma)?;

    let levels = model.levels();
    let taps = model.kernel_size();
    let scheme = model.scheme();
    let gated = scheme.learns_thresholds();
    let pyramid = &record.pyramid;
    let sparsity_scale = gamma / pyramid.coefficient_count() as f64;
    let recon_scale = 1.0 / signal.len() as f64;

    let mut bank_grads = vec![BankGradient::zeros(taps); levels];
    let mut detail_grads: Vec<Vec<f64>> = Vec::with_capacity(levels);

    // Decoder, from the output (level 1) inwards.
    let mut upstream: Vec<f64> = signal
        .iter()
        .zip(&record.reconstruction)
        .map(|(f, r)| -recon_scale * sign(f - r))
        .collect();
    for l in 0..levels {
        let bank = &trace.banks[l];
        let input = &trace.decoder_inputs[l];
        let d = &pyramid.details[l];
        let g_out = padded(&upstream, 2 * input.len());
        let h_bar_rev = bank.h_bar.reversed();
        let g_bar_rev = bank.g_bar.reversed();
        let (g_input, g_detail) = correlate_pair(&g_out, h_bar_rev.taps(), g_bar_rev.taps());

        let grad_h_bar_rev = strided_kernel_grad(&g_out, input, taps);
        let grad_g_bar_rev = strided_kernel_grad(&g_out, d, taps);
        let bg = &mut bank_grads[l];
        for j in 0..taps {
            bg.h_bar[taps - 1 - j] += grad_h_bar_rev[j];
            bg.g_bar[taps - 1 - j] += grad_g_bar_rev[j];
        }
        detail_grads.push(g_detail);
        upstream = g_input;
    }

    // `upstream` now holds the decoder's gradient on the final approximation.
    let mut g_approx: Vec<f64> = upstream
        .iter()
        .zip(&pyramid.approx)
        .map(|(g, a)| g + sparsity_scale * sign(*a))
        .collect();

    let threshold_offset = scheme.kernel_parameter_count(levels, taps);
    let mut grads = Gradients::zeros(model.parameter_count());

    // Encoder, from the deepest level outwards.
    for l in (0..levels).rev() {
        let d = &pyramid.details[l];
        let raw = &trace.raw_details[l];
        let mut g_raw: Vec<f64> = detail_grads[l]
            .iter()
            .zip(d)
            .map(|(g, v)| g + sparsity_scale * sign(*v))
            .collect();
        if gated {
            let t = &model.thresholds()[l];
            let (mut gbp, mut gbm) = (0.0, 0.0);
            for (g, &x) in g_raw.iter_mut().zip(raw) {
                let (dx, dbp, dbm) = ht_derivatives(x, t);
                gbp += *g * dbp;
                gbm += *g * dbm;
                *g *= dx;
            }
            grads.values[threshold_offset + 2 * l] = gbp;
            grads.values[threshold_offset + 2 * l + 1] = gbm;
        }

        let bank = &trace.banks[l];
        let input = &trace.padded_inputs[l];
        let bg = &mut bank_grads[l];
        for (dst, src) in
            bg.h.iter_mut()
                .zip(strided_kernel_grad(input, &g_approx, taps))
        {
            *dst += src;
        }
        for (dst, src) in
            bg.g.iter_mut()
                .zip(strided_kernel_grad(input, &g_raw, taps))
        {
            *dst += src;
        }
        let mut g_input = scatter_pair(&g_approx, &g_raw, bank.h.taps(), bank.g.taps());
        g_input.truncate(pyramid.level_lengths[l]);
        g_approx = g_input;
    }

    let mut slot_grads = vec![vec![0.0; taps]; scheme.slot_count(levels)];
    for (l, bg) in bank_grads.iter().enumerate() {
        scheme.fold_gradient(l, bg, &mut slot_grads);
    }
    for (dst, src) in grads.values[..threshold_offset]
        .iter_mut()
        .zip(slot_grads.iter().flatten())
    {
        *dst = *src;
    }
    Ok((value, grads))
}
