//! Fixed-filter fast discrete wavelet transform.
//!
//! All filtering is strided periodic cross-correlation. A level of length `N`
//! (after zero-padding odd lengths by one sample) produces `N/2` approximation
//! and `N/2` detail coefficients:
//!
//! ```text
//! a_next[k] = sum_n h[n] * a[(2k + n) mod N]
//! d[k]      = sum_n g[n] * a[(2k + n) mod N]
//! ```
//!
//! Synthesis scatters each coefficient through the index-reversed synthesis
//! kernel, which makes it the exact transpose of analysis whenever the
//! synthesis kernels are the reversals of the analysis kernels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SQRT_HALF: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Daubechies scaling filters (sum = sqrt 2, unit energy), indexed by number of
/// vanishing moments. Lengths 2, 4, 6, 8.
const DAUBECHIES: [&[f64]; 4] = [
    &[SQRT_HALF, SQRT_HALF],
    &[
        0.482_962_913_144_534_16,
        0.836_516_303_737_807_9,
        0.224_143_868_042_013_4,
        -0.129_409_522_551_260_37,
    ],
    &[
        0.332_670_552_950_082_6,
        0.806_891_509_311_092_5,
        0.459_877_502_118_491_5,
        -0.135_011_020_010_254_58,
        -0.085_441_273_882_026_66,
        0.035_226_291_885_709_53,
    ],
    &[
        0.230_377_813_308_896_4,
        0.714_846_570_552_915_5,
        0.630_880_767_929_858_7,
        -0.027_983_769_416_859_854,
        -0.187_034_811_719_093_09,
        0.030_841_381_835_560_764,
        0.032_883_011_666_885_2,
        -0.010_597_401_785_069_032,
    ],
];

/// A finite filter with an even number of finite taps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Kernel(Vec<f64>);

impl Kernel {
    pub fn new(taps: Vec<f64>) -> Result<Self> {
        if taps.is_empty() || !taps.len().is_multiple_of(2) {
            return Err(Error::InvalidKernel(format!(
                "length must be even and >= 2, got {}",
                taps.len()
            )));
        }
        if let Some(i) = taps.iter().position(|t| !t.is_finite()) {
            return Err(Error::InvalidKernel(format!("tap {i} is not finite")));
        }
        Ok(Self(taps))
    }

    pub fn taps(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `out[n] = self[K-1-n]`
    pub fn reversed(&self) -> Kernel {
        Kernel(self.0.iter().rev().copied().collect())
    }

    /// `out[n] = (-1)^n * self[K-1-n]`
    pub fn alternating_flip(&self) -> Kernel {
        Kernel(
            self.0
                .iter()
                .rev()
                .enumerate()
                .map(|(n, &t)| if n % 2 == 0 { t } else { -t })
                .collect(),
        )
    }

    pub fn l2_norm(&self) -> f64 {
        self.0.iter().map(|t| t * t).sum::<f64>().sqrt()
    }
}

impl TryFrom<Vec<f64>> for Kernel {
    type Error = Error;

    fn try_from(taps: Vec<f64>) -> Result<Self> {
        Kernel::new(taps)
    }
}

impl From<Kernel> for Vec<f64> {
    fn from(k: Kernel) -> Self {
        k.0
    }
}

/// Analysis (`h`, `g`) and synthesis (`h_bar`, `g_bar`) kernels of one level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterBank {
    pub h: Kernel,
    pub g: Kernel,
    pub h_bar: Kernel,
    pub g_bar: Kernel,
}

impl FilterBank {
    /// Builds a bank from four kernels of a common length.
    pub fn new(h: Kernel, g: Kernel, h_bar: Kernel, g_bar: Kernel) -> Result<Self> {
        let k = h.len();
        if g.len() != k || h_bar.len() != k || g_bar.len() != k {
            return Err(Error::InvalidKernel(format!(
                "kernel lengths differ: h={}, g={}, h_bar={}, g_bar={}",
                k,
                g.len(),
                h_bar.len(),
                g_bar.len()
            )));
        }
        Ok(Self { h, g, h_bar, g_bar })
    }

    pub fn kernel_size(&self) -> usize {
        self.h.len()
    }
}

/// Full conjugate-quadrature bank derived from a single scaling filter:
/// `g[n] = (-1)^n h[K-1-n]`, `h_bar[n] = h[K-1-n]`, `g_bar[n] = (-1)^(n+1) h[n]`.
pub fn cqf_from_scaling(h: &Kernel) -> Result<FilterBank> {
    let h = Kernel::new(h.0.clone())?;
    let g = h.alternating_flip();
    let h_bar = h.reversed();
    let g_bar = Kernel(
        h.0.iter()
            .enumerate()
            .map(|(n, &t)| if n % 2 == 0 { -t } else { t })
            .collect(),
    );
    Ok(FilterBank { h, g, h_bar, g_bar })
}

/// Partial constraint: analysis kernels are free, synthesis kernels are their
/// reversals.
pub fn cqf_partial(h: &Kernel, g: &Kernel) -> Result<FilterBank> {
    let h = Kernel::new(h.0.clone())?;
    let g = Kernel::new(g.0.clone())?;
    if h.len() != g.len() {
        return Err(Error::InvalidKernel(format!(
            "h has {} taps but g has {}",
            h.len(),
            g.len()
        )));
    }
    let h_bar = h.reversed();
    let g_bar = g.reversed();
    Ok(FilterBank { h, g, h_bar, g_bar })
}

/// Daubechies scaling filter with `taps` coefficients. Lengths 2..=8 come from
/// the standard table; longer even lengths are db4 followed by zeros, which
/// keeps the filter orthonormal under even shifts.
pub fn daubechies_scaling(taps: usize) -> Result<Kernel> {
    if taps < 2 || !taps.is_multiple_of(2) {
        return Err(Error::InvalidKernel(format!(
            "length must be even and >= 2, got {taps}"
        )));
    }
    let table = DAUBECHIES[(taps / 2).min(4) - 1];
    let mut out = table.to_vec();
    out.resize(taps, 0.0);
    Kernel::new(out)
}

/// The 8-tap Daubechies-4 conjugate-quadrature bank.
pub fn db4_filterbank() -> FilterBank {
    cqf_from_scaling(&Kernel(DAUBECHIES[3].to_vec())).expect("db4 taps are a valid kernel")
}

/// Haar bank, the 2-tap Daubechies filter.
pub fn haar_filterbank() -> FilterBank {
    cqf_from_scaling(&Kernel(DAUBECHIES[0].to_vec())).expect("haar taps are a valid kernel")
}

/// Detail coefficients of every level plus the final approximation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientPyramid {
    /// `details[0]` is the finest (highest-frequency) level.
    pub details: Vec<Vec<f64>>,
    pub approx: Vec<f64>,
    /// Input length of each level before odd-length padding.
    pub level_lengths: Vec<usize>,
}

impl CoefficientPyramid {
    pub fn levels(&self) -> usize {
        self.details.len()
    }

    /// Total number of coefficients, details plus approximation.
    pub fn coefficient_count(&self) -> usize {
        self.details.iter().map(Vec::len).sum::<usize>() + self.approx.len()
    }

    pub fn validate(&self) -> Result<()> {
        let levels = self.details.len();
        if levels == 0 {
            return Err(Error::InvalidPyramid("no levels".into()));
        }
        if self.level_lengths.len() != levels {
            return Err(Error::InvalidPyramid(format!(
                "{} level lengths for {} levels",
                self.level_lengths.len(),
                levels
            )));
        }
        for (l, (d, &len)) in self.details.iter().zip(&self.level_lengths).enumerate() {
            if len == 0 || d.len() != len.div_ceil(2) {
                return Err(Error::InvalidPyramid(format!(
                    "level {} holds {} details for input length {}",
                    l + 1,
                    d.len(),
                    len
                )));
            }
            let next_len = self
                .level_lengths
                .get(l + 1)
                .copied()
                .unwrap_or(self.approx.len());
            if next_len != d.len() {
                return Err(Error::InvalidPyramid(format!(
                    "level {} output length {} does not match next input length {}",
                    l + 1,
                    d.len(),
                    next_len
                )));
            }
        }
        Ok(())
    }
}

/// Largest usable depth for a signal of `length` samples: each level must see
/// at least two samples.
pub fn max_levels(length: usize) -> usize {
    let mut len = length;
    let mut levels = 0;
    while len >= 2 {
        levels += 1;
        len = len.div_ceil(2);
        if len == 1 {
            break;
        }
    }
    levels
}

/// Checks that `levels` decomposition steps fit a signal of `length` samples.
pub fn check_depth(length: usize, levels: usize) -> Result<()> {
    let max = max_levels(length);
    if levels == 0 || levels > max {
        return Err(Error::InvalidDepth {
            levels,
            length,
            max,
        });
    }
    Ok(())
}

/// Copies `a`, appending one zero if its length is odd.
pub(crate) fn pad_even(a: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() + 1);
    out.extend_from_slice(a);
    if out.len() % 2 == 1 {
        out.push(0.0);
    }
    out
}

/// Strided periodic correlation of an even-length signal with two kernels.
pub(crate) fn correlate_pair(a: &[f64], h: &[f64], g: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = a.len();
    debug_assert!(n.is_multiple_of(2));
    let half = n / 2;
    let mut lo = vec![0.0; half];
    let mut hi = vec![0.0; half];
    for k in 0..half {
        let base = 2 * k;
        let (mut sl, mut sh) = (0.0, 0.0);
        if base + h.len() <= n {
            for (j, &x) in a[base..base + h.len()].iter().enumerate() {
                sl += h[j] * x;
                sh += g[j] * x;
            }
        } else {
            for j in 0..h.len() {
                let x = a[(base + j) % n];
                sl += h[j] * x;
                sh += g[j] * x;
            }
        }
        lo[k] = sl;
        hi[k] = sh;
    }
    (lo, hi)
}

/// Transpose of [`correlate_pair`]: scatters `lo`/`hi` through `h`/`g` into a
/// periodic signal of length `2 * lo.len()`.
pub(crate) fn scatter_pair(lo: &[f64], hi: &[f64], h: &[f64], g: &[f64]) -> Vec<f64> {
    let half = lo.len();
    let n = 2 * half;
    let mut out = vec![0.0; n];
    for k in 0..half {
        let base = 2 * k;
        let (cl, ch) = (lo[k], hi[k]);
        if base + h.len() <= n {
            for (j, o) in out[base..base + h.len()].iter_mut().enumerate() {
                *o += cl * h[j] + ch * g[j];
            }
        } else {
            for j in 0..h.len() {
                out[(base + j) % n] += cl * h[j] + ch * g[j];
            }
        }
    }
    out
}

/// One analysis step. Odd-length input is zero-padded by one sample.
pub fn analyze_level(a: &[f64], h: &Kernel, g: &Kernel) -> Result<(Vec<f64>, Vec<f64>)> {
    if a.is_empty() {
        return Err(Error::InvalidSignal("empty input".into()));
    }
    if h.len() != g.len() {
        return Err(Error::InvalidKernel("h and g lengths differ".into()));
    }
    Ok(correlate_pair(&pad_even(a), h.taps(), g.taps()))
}

/// One synthesis step, truncated to `original_length` samples.
pub fn synthesize_level(
    a_next: &[f64],
    d: &[f64],
    h_bar: &Kernel,
    g_bar: &Kernel,
    original_length: usize,
) -> Result<Vec<f64>> {
    if a_next.len() != d.len() || a_next.is_empty() {
        return Err(Error::InvalidPyramid(format!(
            "approximation has {} samples, details {}",
            a_next.len(),
            d.len()
        )));
    }
    let full = 2 * a_next.len();
    if original_length != full && original_length + 1 != full {
        return Err(Error::InvalidPyramid(format!(
            "original length {original_length} incompatible with {} coefficients",
            a_next.len()
        )));
    }
    let mut out = scatter_pair(a_next, d, h_bar.reversed().taps(), g_bar.reversed().taps());
    out.truncate(original_length);
    Ok(out)
}

/// Multi-level decomposition with one bank reused at every level.
pub fn fdwt(signal: &[f64], bank: &FilterBank, levels: usize) -> Result<CoefficientPyramid> {
    if signal.len() < 2 {
        return Err(Error::InvalidSignal(format!(
            "need at least 2 samples, got {}",
            signal.len()
        )));
    }
    check_depth(signal.len(), levels)?;
    let mut details = Vec::with_capacity(levels);
    let mut level_lengths = Vec::with_capacity(levels);
    let mut approx = signal.to_vec();
    for _ in 0..levels {
        level_lengths.push(approx.len());
        let (next, d) = analyze_level(&approx, &bank.h, &bank.g)?;
        details.push(d);
        approx = next;
    }
    Ok(CoefficientPyramid {
        details,
        approx,
        level_lengths,
    })
}

/// Inverse of [`fdwt`].
pub fn ifdwt(pyramid: &CoefficientPyramid, bank: &FilterBank) -> Result<Vec<f64>> {
    pyramid.validate()?;
    let mut approx = pyramid.approx.clone();
    for (d, &len) in pyramid.details.iter().zip(&pyramid.level_lengths).rev() {
        approx = synthesize_level(&approx, d, &bank.h_bar, &bank.g_bar, len)?;
    }
    Ok(approx)
}
