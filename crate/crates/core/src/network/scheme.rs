//! Kernel-sharing schemes.
//!
//! Every network variant differs only in which kernels it learns and how the
//! remaining kernels of each level are derived from them. A [`KernelScheme`]
//! owns that mapping in both directions: learned slots to per-level filter
//! banks for the forward pass, and per-level bank gradients back onto the
//! learned slots for the backward pass. Schemes are registered by name and
//! selected at runtime through [`SharingMode`] or [`scheme_by_name`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::wavelet::{cqf_from_scaling, cqf_partial, daubechies_scaling, FilterBank, Kernel};

/// Gradient of a scalar objective with respect to the four kernels of one
/// level, in the same index convention as [`FilterBank`].
#[derive(Debug, Clone, PartialEq)]
pub struct BankGradient {
    pub h: Vec<f64>,
    pub g: Vec<f64>,
    pub h_bar: Vec<f64>,
    pub g_bar: Vec<f64>,
}

impl BankGradient {
    pub fn zeros(kernel_size: usize) -> Self {
        Self {
            h: vec![0.0; kernel_size],
            g: vec![0.0; kernel_size],
            h_bar: vec![0.0; kernel_size],
            g_bar: vec![0.0; kernel_size],
        }
    }
}

/// Role of a learned kernel within its level's filter bank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelRole {
    H,
    G,
    HBar,
    GBar,
}

/// Where a learned kernel lives: a single level, or shared by all levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotRole {
    pub level: Option<usize>,
    pub role: KernelRole,
}

/// Which kernels of a wavelet network are learned, and how the others follow.
pub trait KernelScheme: Send + Sync {
    fn mode(&self) -> SharingMode;

    /// Short name used on the command line and in model files.
    fn name(&self) -> &'static str {
        self.mode().name()
    }

    /// Human-readable variant name.
    fn label(&self) -> &'static str;

    fn learns_thresholds(&self) -> bool;

    /// Number of learned kernels for a network of `levels` levels.
    fn slot_count(&self, levels: usize) -> usize {
        self.slot_layout(levels).len()
    }

    /// Role of every learned slot, in slot order.
    fn slot_layout(&self, levels: usize) -> Vec<SlotRole>;

    fn initial_slots(&self, levels: usize, kernel_size: usize) -> Result<Vec<Kernel>>;

    /// Filter bank used at `level` (0-based), derived from the learned slots.
    fn bank(&self, slots: &[Kernel], level: usize, kernel_size: usize) -> Result<FilterBank>;

    /// Adds the contribution of one level's bank gradient to the gradients of
    /// the learned slots.
    fn fold_gradient(&self, level: usize, grad: &BankGradient, slot_grads: &mut [Vec<f64>]);

    fn kernel_parameter_count(&self, levels: usize, kernel_size: usize) -> usize {
        self.slot_count(levels) * kernel_size
    }

    fn parameter_count(&self, levels: usize, kernel_size: usize) -> usize {
        let thresholds = if self.learns_thresholds() {
            2 * levels
        } else {
            0
        };
        self.kernel_parameter_count(levels, kernel_size) + thresholds
    }
}

/// Chain rule of the full conjugate-quadrature derivation onto `h`.
fn fold_cqf(grad: &BankGradient, dh: &mut [f64]) {
    let k = dh.len();
    for n in 0..k {
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        dh[n] += grad.h[n] - sign * grad.g_bar[n];
        dh[k - 1 - n] += sign * grad.g[n] + grad.h_bar[n];
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

fn add_reversed_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src.iter().rev()) {
        *d += s;
    }
}

/// Daubechies bank of the model's kernel size at every level; nothing learned
/// except optionally the thresholds.
struct FixedDaubechies {
    thresholds: bool,
}

impl KernelScheme for FixedDaubechies {
    fn mode(&self) -> SharingMode {
        if self.thresholds {
            SharingMode::Db4FixedHt
        } else {
            SharingMode::Db4Fixed
        }
    }

    fn label(&self) -> &'static str {
        if self.thresholds {
            "db4+HT"
        } else {
            "db4"
        }
    }

    fn learns_thresholds(&self) -> bool {
        self.thresholds
    }

    fn slot_layout(&self, _levels: usize) -> Vec<SlotRole> {
        Vec::new()
    }

    fn initial_slots(&self, _levels: usize, _kernel_size: usize) -> Result<Vec<Kernel>> {
        Ok(Vec::new())
    }

    fn bank(&self, _slots: &[Kernel], _level: usize, kernel_size: usize) -> Result<FilterBank> {
        cqf_from_scaling(&daubechies_scaling(kernel_size)?)
    }

    fn fold_gradient(&self, _level: usize, _grad: &BankGradient, _slot_grads: &mut [Vec<f64>]) {}
}

/// One scaling filter shared by all levels, the rest derived by CQF.
struct SharedCqf {
    thresholds: bool,
}

impl KernelScheme for SharedCqf {
    fn mode(&self) -> SharingMode {
        if self.thresholds {
            SharingMode::SharedCqfHt
        } else {
            SharingMode::SharedCqf
        }
    }

    fn label(&self) -> &'static str {
        if self.thresholds {
            "DeCWN"
        } else {
            "CWN"
        }
    }

    fn learns_thresholds(&self) -> bool {
        self.thresholds
    }

    fn slot_layout(&self, _levels: usize) -> Vec<SlotRole> {
        vec![SlotRole {
            level: None,
            role: KernelRole::H,
        }]
    }

    fn initial_slots(&self, _levels: usize, kernel_size: usize) -> Result<Vec<Kernel>> {
        Ok(vec![daubechies_scaling(kernel_size)?])
    }

    fn bank(&self, slots: &[Kernel], _level: usize, _kernel_size: usize) -> Result<FilterBank> {
        cqf_from_scaling(&slots[0])
    }

    fn fold_gradient(&self, _level: usize, grad: &BankGradient, slot_grads: &mut [Vec<f64>]) {
        fold_cqf(grad, &mut slot_grads[0]);
    }
}

/// One scaling filter per level, the rest of each level derived by CQF.
struct PerLevelCqf {
    thresholds: bool,
}

impl KernelScheme for PerLevelCqf {
    fn mode(&self) -> SharingMode {
        if self.thresholds {
            SharingMode::PerLevelCqfHt
        } else {
            SharingMode::PerLevelCqf
        }
    }

    fn label(&self) -> &'static str {
        if self.thresholds {
            "DeSpaWN"
        } else {
            "LCWN"
        }
    }

    fn learns_thresholds(&self) -> bool {
        self.thresholds
    }

    fn slot_layout(&self, levels: usize) -> Vec<SlotRole> {
        (0..levels)
            .flat_map(|l| {
                [KernelRole::H].map(|role| SlotRole {
                    level: Some(l),
                    role,
                })
            })
            .collect()
    }

    fn initial_slots(&self, levels: usize, kernel_size: usize) -> Result<Vec<Kernel>> {
        Ok(vec![daubechies_scaling(kernel_size)?; levels])
    }

    fn bank(&self, slots: &[Kernel], level: usize, _kernel_size: usize) -> Result<FilterBank> {
        cqf_from_scaling(&slots[level])
    }

    fn fold_gradient(&self, level: usize, grad: &BankGradient, slot_grads: &mut [Vec<f64>]) {
        fold_cqf(grad, &mut slot_grads[level]);
    }
}

/// Independent low- and high-pass analysis filters per level; synthesis
/// filters are their reversals.
struct PerLevelTwoKernel;

impl KernelScheme for PerLevelTwoKernel {
    fn mode(&self) -> SharingMode {
        SharingMode::PerLevelTwoKernelHt
    }

    fn label(&self) -> &'static str {
        "DeSpaWN-2"
    }

    fn learns_thresholds(&self) -> bool {
        true
    }

    fn slot_layout(&self, levels: usize) -> Vec<SlotRole> {
        (0..levels)
            .flat_map(|l| {
                [KernelRole::H, KernelRole::G].map(|role| SlotRole {
                    level: Some(l),
                    role,
                })
            })
            .collect()
    }

    fn initial_slots(&self, levels: usize, kernel_size: usize) -> Result<Vec<Kernel>> {
        let bank = cqf_from_scaling(&daubechies_scaling(kernel_size)?)?;
        Ok((0..levels)
            .flat_map(|_| [bank.h.clone(), bank.g.clone()])
            .collect())
    }

    fn bank(&self, slots: &[Kernel], level: usize, _kernel_size: usize) -> Result<FilterBank> {
        cqf_partial(&slots[2 * level], &slots[2 * level + 1])
    }

    fn fold_gradient(&self, level: usize, grad: &BankGradient, slot_grads: &mut [Vec<f64>]) {
        let (dh, rest) = slot_grads[2 * level..].split_at_mut(1);
        let dg = &mut rest[0];
        add_into(&mut dh[0], &grad.h);
        add_reversed_into(&mut dh[0], &grad.h_bar);
        add_into(dg, &grad.g);
        add_reversed_into(dg, &grad.g_bar);
    }
}

/// All four kernels of every level learned without constraint.
struct FreeKernels;

impl KernelScheme for FreeKernels {
    fn mode(&self) -> SharingMode {
        SharingMode::FreeHt
    }

    fn label(&self) -> &'static str {
        "FreeWN"
    }

    fn learns_thresholds(&self) -> bool {
        true
    }

    fn slot_layout(&self, levels: usize) -> Vec<SlotRole> {
        (0..levels)
            .flat_map(|l| {
                [
                    KernelRole::H,
                    KernelRole::G,
                    KernelRole::HBar,
                    KernelRole::GBar,
                ]
                .map(|role| SlotRole {
                    level: Some(l),
                    role,
                })
            })
            .collect()
    }

    fn initial_slots(&self, levels: usize, kernel_size: usize) -> Result<Vec<Kernel>> {
        let bank = cqf_from_scaling(&daubechies_scaling(kernel_size)?)?;
        Ok((0..levels)
            .flat_map(|_| {
                [
                    bank.h.clone(),
                    bank.g.clone(),
                    bank.h_bar.clone(),
                    bank.g_bar.clone(),
                ]
            })
            .collect())
    }

    fn bank(&self, slots: &[Kernel], level: usize, _kernel_size: usize) -> Result<FilterBank> {
        let s = &slots[4 * level..4 * level + 4];
        FilterBank::new(s[0].clone(), s[1].clone(), s[2].clone(), s[3].clone())
    }

    fn fold_gradient(&self, level: usize, grad: &BankGradient, slot_grads: &mut [Vec<f64>]) {
        let s = &mut slot_grads[4 * level..4 * level + 4];
        add_into(&mut s[0], &grad.h);
        add_into(&mut s[1], &grad.g);
        add_into(&mut s[2], &grad.h_bar);
        add_into(&mut s[3], &grad.g_bar);
    }
}

static DB4: FixedDaubechies = FixedDaubechies { thresholds: false };
static DB4_HT: FixedDaubechies = FixedDaubechies { thresholds: true };
static CWN: SharedCqf = SharedCqf { thresholds: false };
static DECWN: SharedCqf = SharedCqf { thresholds: true };
static LCWN: PerLevelCqf = PerLevelCqf { thresholds: false };
static DESPAWN: PerLevelCqf = PerLevelCqf { thresholds: true };
static DESPAWN2: PerLevelTwoKernel = PerLevelTwoKernel;
static FREE: FreeKernels = FreeKernels;

static REGISTRY: [&(dyn KernelScheme + 'static); 8] = [
    &DB4, &DB4_HT, &CWN, &DECWN, &LCWN, &DESPAWN, &DESPAWN2, &FREE,
];

/// All registered schemes in declaration order.
pub fn registered_schemes() -> &'static [&'static dyn KernelScheme] {
    &REGISTRY
}

pub fn scheme_by_name(name: &str) -> Option<&'static dyn KernelScheme> {
    REGISTRY.iter().copied().find(|s| s.name() == name)
}

/// Network variant, identified on the command line by its short name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SharingMode {
    Db4Fixed,
    Db4FixedHt,
    SharedCqf,
    SharedCqfHt,
    PerLevelCqf,
    PerLevelCqfHt,
    PerLevelTwoKernelHt,
    FreeHt,
}

impl SharingMode {
    pub const ALL: [SharingMode; 8] = [
        SharingMode::Db4Fixed,
        SharingMode::Db4FixedHt,
        SharingMode::SharedCqf,
        SharingMode::SharedCqfHt,
        SharingMode::PerLevelCqf,
        SharingMode::PerLevelCqfHt,
        SharingMode::PerLevelTwoKernelHt,
        SharingMode::FreeHt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SharingMode::Db4Fixed => "db4",
            SharingMode::Db4FixedHt => "db4-ht",
            SharingMode::SharedCqf => "cwn",
            SharingMode::SharedCqfHt => "decwn",
            SharingMode::PerLevelCqf => "lcwn",
            SharingMode::PerLevelCqfHt => "despawn",
            SharingMode::PerLevelTwoKernelHt => "despawn2",
            SharingMode::FreeHt => "free",
        }
    }

    pub fn scheme(self) -> &'static dyn KernelScheme {
        scheme_by_name(self.name()).expect("every mode is registered")
    }
}

impl fmt::Display for SharingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SharingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        scheme_by_name(s)
            .map(|scheme| scheme.mode())
            .ok_or_else(|| {
                let names: Vec<_> = registered_schemes().iter().map(|s| s.name()).collect();
                Error::Config(format!(
                    "unknown mode {s:?}; expected one of {}",
                    names.join(", ")
                ))
            })
    }
}

impl TryFrom<String> for SharingMode {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<SharingMode> for String {
    fn from(m: SharingMode) -> Self {
        m.name().to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_round_trips_names() {
        for mode in SharingMode::ALL {
            assert_eq!(mode.scheme().mode(), mode);
            assert_eq!(mode.name().parse::<SharingMode>().unwrap(), mode);
        }
        assert!("wavenet".parse::<SharingMode>().is_err());
        assert_eq!(registered_schemes().len(), SharingMode::ALL.len());
    }

    #[test]
    fn parameter_counts_follow_mode_formulas() {
        let (l, k) = (17, 8);
        let count = |m: SharingMode| m.scheme().parameter_count(l, k);
        assert_eq!(count(SharingMode::PerLevelCqfHt), 170);
        assert_eq!(count(SharingMode::PerLevelTwoKernelHt), 306);
        assert_eq!(count(SharingMode::FreeHt), (4 * k + 2) * l);
        assert_eq!(count(SharingMode::SharedCqfHt), k + 2 * l);
        assert_eq!(count(SharingMode::SharedCqf), k);
        assert_eq!(count(SharingMode::PerLevelCqf), k * l);
        assert_eq!(count(SharingMode::Db4FixedHt), 2 * l);
        assert_eq!(count(SharingMode::Db4Fixed), 0);
    }

    #[test]
    fn initial_banks_are_db4_everywhere() {
        let db4 = crate::wavelet::db4_filterbank();
        for scheme in registered_schemes() {
            let slots = scheme.initial_slots(5, 8).unwrap();
            assert_eq!(slots.len(), scheme.slot_count(5));
            for level in 0..5 {
                assert_eq!(
                    scheme.bank(&slots, level, 8).unwrap(),
                    db4,
                    "{}",
                    scheme.name()
                );
            }
        }
    }

    #[test]
    fn cqf_fold_is_transpose_of_derivation() {
        // <grad, d(bank)/dh * v> == <fold(grad), v> for the linear CQF map.
        let k = 6;
        let v: Vec<f64> = (0..k).map(|i| ((i * 7 % 5) as f64) - 2.0).collect();
        let grad = BankGradient {
            h: (0..k).map(|i| i as f64).collect(),
            g: (0..k).map(|i| 1.0 - i as f64).collect(),
            h_bar: (0..k).map(|i| (i * i) as f64 * 0.1).collect(),
            g_bar: (0..k).map(|i| 2.0 * i as f64 - 3.0).collect(),
        };
        let bank_v = cqf_from_scaling(&Kernel::new(v.clone()).unwrap()).unwrap();
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let lhs = dot(&grad.h, bank_v.h.taps())
            + dot(&grad.g, bank_v.g.taps())
            + dot(&grad.h_bar, bank_v.h_bar.taps())
            + dot(&grad.g_bar, bank_v.g_bar.taps());
        let mut folded = vec![vec![0.0; k]];
        PerLevelCqf { thresholds: true }.fold_gradient(0, &grad, &mut folded);
        assert!((lhs - dot(&folded[0], &v)).abs() < 1e-12);
    }
}
