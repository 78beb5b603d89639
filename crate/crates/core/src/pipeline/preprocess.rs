use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Length of the anti-aliasing filter used by [`decimate`].
pub const DECIMATION_TAPS: usize = 63;

/// Hann-windowed sinc low-pass with unit DC gain; `cutoff` in cycles per
/// sample (0.5 is Nyquist).
pub fn lowpass_kernel(taps: usize, cutoff: f64) -> Vec<f64> {
    let centre = (taps - 1) as f64 / 2.0;
    let mut h: Vec<f64> = (0..taps)
        .map(|m| {
            let t = m as f64 - centre;
            let sinc = if t == 0.0 {
                2.0 * cutoff
            } else {
                (2.0 * PI * cutoff * t).sin() / (PI * t)
            };
            let window = if taps > 1 {
                0.5 - 0.5 * (2.0 * PI * m as f64 / (taps - 1) as f64).cos()
            } else {
                1.0
            };
            sinc * window
        })
        .collect();
    let sum: f64 = h.iter().sum();
    h.iter_mut().for_each(|v| *v /= sum);
    h
}

/// Whole-sample symmetric reflection of an out-of-range index.
fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let mut j = i.rem_euclid(period);
    if j >= n as isize {
        j = period - j;
    }
    j as usize
}

/// Low-pass filters with a zero-phase windowed sinc at the new Nyquist rate,
/// then keeps every `factor`-th sample.
pub fn decimate(samples: &[f64], factor: usize) -> Result<Vec<f64>> {
    if factor == 0 {
        return Err(Error::Config("decimation factor must be >= 1".into()));
    }
    if factor == 1 || samples.is_empty() {
        return Ok(samples.to_vec());
    }
    let kernel = lowpass_kernel(DECIMATION_TAPS, 0.5 / factor as f64);
    let half = (DECIMATION_TAPS / 2) as isize;
    let n = samples.len();
    Ok((0..n)
        .step_by(factor)
        .map(|centre| {
            kernel
                .iter()
                .enumerate()
                .map(|(m, w)| w * samples[reflect(centre as isize + m as isize - half, n)])
                .sum()
        })
        .collect())
}

/// Non-overlapping windows; a trailing remainder shorter than `window_size`
/// is dropped.
pub fn window_split(samples: &[f64], window_size: usize) -> Result<Vec<Vec<f64>>> {
    if window_size < 2 {
        return Err(Error::Config(format!(
            "window size must be >= 2, got {window_size}"
        )));
    }
    Ok(samples
        .chunks_exact(window_size)
        .map(<[f64]>::to_vec)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn power(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
    }

    #[test]
    fn factor_one_is_identity() {
        let x: Vec<f64> = (0..100).map(|i| (i as f64).sin()).collect();
        assert_eq!(decimate(&x, 1).unwrap(), x);
        assert!(matches!(decimate(&x, 0), Err(Error::Config(_))));
    }

    #[test]
    fn unit_dc_gain() {
        for factor in [2, 3, 4, 8] {
            let y = decimate(&[0.37; 500], factor).unwrap();
            assert_eq!(y.len(), 500usize.div_ceil(factor));
            assert!(y.iter().all(|v| (v - 0.37).abs() < 1e-6));
        }
    }

    #[test]
    fn rejects_tone_above_new_nyquist() {
        // 0.4 of Nyquist = 0.2 cycles per sample, well above 0.125 after /4.
        let x: Vec<f64> = (0..8192)
            .map(|t| (2.0 * PI * 0.2 * t as f64).sin())
            .collect();
        let y = decimate(&x, 4).unwrap();
        assert!(
            power(&y) < 0.01 * power(&x),
            "{} vs {}",
            power(&y),
            power(&x)
        );
    }

    #[test]
    fn passes_low_tone() {
        let x: Vec<f64> = (0..8192)
            .map(|t| (2.0 * PI * 0.02 * t as f64).sin())
            .collect();
        let y = decimate(&x, 4).unwrap();
        assert!((power(&y) / power(&x) - 1.0).abs() < 0.05);
    }

    #[test]
    fn reflection_indices() {
        assert_eq!(reflect(-1, 5), 1);
        assert_eq!(reflect(-4, 5), 4);
        assert_eq!(reflect(5, 5), 3);
        assert_eq!(reflect(12, 5), 4);
        assert_eq!(reflect(-7, 1), 0);
    }

    #[test]
    fn windows_drop_remainder() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let w = window_split(&x, 4).unwrap();
        assert_eq!(w, vec![vec![0.0, 1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0, 7.0]]);
        assert!(window_split(&x, 1).is_err());
        assert!(window_split(&x, 11).unwrap().is_empty());
    }
}
