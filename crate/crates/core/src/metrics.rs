//! Detection statistics of the BS and Eve RD maps, KL divergences between
//! the target-present and target-absent statistic, communication metrics
//! and PSLR.
//!
//! For a filter `g` applied to a reference grid `x` the per-bin response is
//! `gamma = g x`. A target of RD amplitude `a` at the cell under test
//! contributes the mean `a/MN sum(gamma)`, white noise of variance `s2`
//! contributes `s2/MN sum|g|^2`, and each other target `q` leaks through the
//! filter response at its lag offset.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{Target, TargetSet};
use crate::error::{Error, Result};
use crate::receiver::{filter_coeff, rf_floor, to_rd_map, FilterKind, RdMap};
use crate::special::{i0e, i1e, integrate, ln_i0};
use crate::waveform::{modulation_transform, GridDims, PerturbationWeights, SymbolVector, TfGrid, WaveformKind};

/// Reported PSLR when the map has no sidelobe energy at all.
pub const PSLR_CAP_DB: f64 = 300.0;

/// Smallest Eve KLD used as the gap denominator.
pub const GAP_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Bs,
    Eve,
}

impl Side {
    /// LMMSE for the BS, matched filter for Eve.
    pub fn default_filter(self) -> FilterKind {
        match self {
            Side::Bs => FilterKind::Lmmse,
            Side::Eve => FilterKind::Mf,
        }
    }

    pub fn targets(self, set: &TargetSet) -> &[Target] {
        match self {
            Side::Bs => &set.bs,
            Side::Eve => &set.eve,
        }
    }
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Side::Bs => "bs",
            Side::Eve => "eve",
        })
    }
}

/// How the leakage of unintended targets into the cell under test is
/// modelled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InterferenceModel {
    /// Lag-averaged: every other target leaks the mean sidelobe power.
    #[default]
    Isl,
    /// The filter response evaluated at the actual lag differences.
    Exact,
}

/// Sums over the per-bin response that every closed form is built from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResponseSums {
    pub len: usize,
    pub sum_gamma: Complex64,
    pub sum_gamma_sq: f64,
    pub sum_g_sq: f64,
}

impl ResponseSums {
    pub fn from_slice(x: &[Complex64], kind: FilterKind, noise_var: f64) -> Result<Self> {
        let floor = if kind == FilterKind::Rf { rf_floor(x) } else { 0.0 };
        let mut sum_gamma = Complex64::new(0.0, 0.0);
        let mut sum_gamma_sq = 0.0;
        let mut sum_g_sq = 0.0;
        for (i, &v) in x.iter().enumerate() {
            let g = filter_coeff(v, kind, noise_var, floor)
                .filter(|g| g.is_finite())
                .ok_or(Error::SingularFilter { m: i, n: 0 })?;
            let gamma = g * v;
            sum_gamma += gamma;
            sum_gamma_sq += gamma.norm_sqr();
            sum_g_sq += g.norm_sqr();
        }
        Ok(Self { len: x.len(), sum_gamma, sum_gamma_sq, sum_g_sq })
    }

    pub fn mainlobe(&self, alpha0: f64) -> Complex64 {
        self.sum_gamma * (alpha0 / self.len as f64)
    }

    pub fn noise_power(&self, noise_var: f64) -> f64 {
        noise_var * self.sum_g_sq / self.len as f64
    }

    pub fn isl(&self) -> f64 {
        let mn = self.len as f64;
        ((self.sum_gamma_sq - self.sum_gamma.norm_sqr() / mn) / mn).max(0.0)
    }
}

/// Real per-bin response: `|x|^2 / (|x|^2 + s2)` for the BS, `|x|^2` for Eve.
pub fn gamma_grid(x: &TfGrid, side: Side, noise_var: f64) -> Vec<f64> {
    x.as_slice()
        .iter()
        .map(|v| {
            let p = v.norm_sqr();
            match side {
                Side::Bs => p / (p + noise_var),
                Side::Eve => p,
            }
        })
        .collect()
}

fn sums(x: &TfGrid, side: Side, noise_var: f64) -> ResponseSums {
    ResponseSums::from_slice(x.as_slice(), side.default_filter(), noise_var)
        .expect("LMMSE and MF have no singular bins")
}

pub fn mainlobe_mean(x: &TfGrid, alpha0: f64, side: Side, noise_var: f64) -> Complex64 {
    sums(x, side, noise_var).mainlobe(alpha0)
}

pub fn noise_power(x: &TfGrid, side: Side, noise_var: f64) -> f64 {
    sums(x, side, noise_var).noise_power(noise_var)
}

/// `(1/MN) (sum|gamma|^2 - |sum gamma|^2 / MN)`.
pub fn isl(x: &TfGrid, side: Side, noise_var: f64) -> f64 {
    sums(x, side, noise_var).isl()
}

/// Mean sidelobe power of an RD response, normalised like [`isl`].
pub fn isl_from_response(rd: &RdMap) -> f64 {
    let total = rd.energy();
    let main = rd.get(0, 0).norm_sqr();
    (total - main) / rd.dims().len() as f64
}

fn check_desired(targets: &[Target], desired: usize) -> Result<()> {
    if desired >= targets.len() {
        return Err(Error::invalid(format!("desired index {desired} >= K={}", targets.len())));
    }
    Ok(())
}

fn clutter_power(targets: &[Target], desired: usize) -> f64 {
    targets
        .iter()
        .enumerate()
        .filter(|(q, _)| *q != desired)
        .map(|(_, t)| t.alpha0 * t.alpha0)
        .sum()
}

/// Interference `P_i` at the desired target's cell for any filter kind.
pub fn interference_power_with(
    x: &TfGrid,
    targets: &[Target],
    desired: usize,
    kind: FilterKind,
    noise_var: f64,
    model: InterferenceModel,
) -> Result<f64> {
    check_desired(targets, desired)?;
    let mn = x.dims().len() as f64;
    match model {
        InterferenceModel::Isl => {
            let s = ResponseSums::from_slice(x.as_slice(), kind, noise_var)?;
            Ok(clutter_power(targets, desired) * s.isl() / mn)
        }
        InterferenceModel::Exact => {
            let rd = crate::receiver::filter_response(x, kind, noise_var)?;
            let p = &targets[desired];
            Ok(targets
                .iter()
                .enumerate()
                .filter(|(q, _)| *q != desired)
                .map(|(_, t)| {
                    let leak = rd.at_lag(p.l as i64 - t.l as i64, p.k as i64 - t.k as i64);
                    t.alpha0 * t.alpha0 * leak.norm_sqr() / mn
                })
                .sum())
        }
    }
}

pub fn interference_power(
    x: &TfGrid,
    targets: &TargetSet,
    side: Side,
    noise_var: f64,
    model: InterferenceModel,
) -> Result<f64> {
    interference_power_with(x, side.targets(targets), targets.desired, side.default_filter(), noise_var, model)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionStats {
    pub mu: Complex64,
    pub sigma2: f64,
    pub side: Side,
}

impl DetectionStats {
    /// `|mu|^2 / s2`; infinite when `s2 = 0` and `mu != 0`.
    pub fn snr(&self) -> f64 {
        if self.sigma2 > 0.0 {
            self.mu.norm_sqr() / self.sigma2
        } else if self.mu.norm_sqr() == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }

    pub fn is_degenerate(&self) -> bool {
        !(self.sigma2 > 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerBreakdown {
    pub p_signal: f64,
    pub p_noise: f64,
    pub p_interf: f64,
    pub isl: f64,
}

impl PowerBreakdown {
    pub fn sinr(&self) -> f64 {
        self.p_signal / (self.p_interf + self.p_noise)
    }
}

pub fn power_breakdown_with(
    x: &TfGrid,
    targets: &[Target],
    desired: usize,
    kind: FilterKind,
    noise_var: f64,
    model: InterferenceModel,
) -> Result<PowerBreakdown> {
    check_desired(targets, desired)?;
    let s = ResponseSums::from_slice(x.as_slice(), kind, noise_var)?;
    Ok(PowerBreakdown {
        p_signal: s.mainlobe(targets[desired].alpha0).norm_sqr(),
        p_noise: s.noise_power(noise_var),
        p_interf: interference_power_with(x, targets, desired, kind, noise_var, model)?,
        isl: s.isl(),
    })
}

pub fn power_breakdown(x: &TfGrid, targets: &TargetSet, side: Side, noise_var: f64) -> Result<PowerBreakdown> {
    power_breakdown_with(
        x,
        side.targets(targets),
        targets.desired,
        side.default_filter(),
        noise_var,
        InterferenceModel::Isl,
    )
}

pub fn sinr(b: &PowerBreakdown) -> f64 {
    b.sinr()
}

/// `(mu, P_i + P_n)` for an arbitrary filter and interference model.
pub fn detection_stats_with(
    x: &TfGrid,
    targets: &[Target],
    desired: usize,
    side: Side,
    kind: FilterKind,
    noise_var: f64,
    model: InterferenceModel,
) -> Result<DetectionStats> {
    let b = power_breakdown_with(x, targets, desired, kind, noise_var, model)?;
    let s = ResponseSums::from_slice(x.as_slice(), kind, noise_var)?;
    Ok(DetectionStats { mu: s.mainlobe(targets[desired].alpha0), sigma2: b.p_interf + b.p_noise, side })
}

/// Stats of the side's default filter with the lag-averaged interference.
pub fn detection_stats(x: &TfGrid, targets: &TargetSet, side: Side, noise_var: f64) -> Result<DetectionStats> {
    detection_stats_with(
        x,
        side.targets(targets),
        targets.desired,
        side,
        side.default_filter(),
        noise_var,
        InterferenceModel::Isl,
    )
}

/// Fast path used by the optimizer: stats straight from response sums.
pub fn stats_from_sums(s: &ResponseSums, alpha0: f64, clutter: f64, noise_var: f64, side: Side) -> DetectionStats {
    let mn = s.len as f64;
    DetectionStats {
        mu: s.mainlobe(alpha0),
        sigma2: clutter * s.isl() / mn + s.noise_power(noise_var),
        side,
    }
}

/// Sum of unintended-target powers `sum_{q != p} alpha_q0^2`.
pub fn clutter_of(targets: &[Target], desired: usize) -> f64 {
    clutter_power(targets, desired)
}

fn check_stats(stats: &DetectionStats) -> Result<f64> {
    if stats.is_degenerate() {
        return Err(Error::DegenerateInput(format!(
            "effective noise variance must be positive, got {}",
            stats.sigma2
        )));
    }
    Ok(stats.mu.norm_sqr() / stats.sigma2)
}

/// `E[R]` for a Rice variable with LoS amplitude `nu` and total complex
/// noise variance `sigma2`.
pub fn rice_first_moment(nu: f64, sigma2: f64) -> f64 {
    let x = nu * nu / sigma2;
    sigma2.sqrt() * (PI.sqrt() / 2.0) * ((1.0 + x) * i0e(x / 2.0) + x * i1e(x / 2.0))
}

/// KLD between the target-present and target-absent laws of `T = |L|^2`:
/// `E[ln I0(2|mu| sqrt(T) / s2)] - |mu|^2/s2`, by adaptive quadrature over
/// the Rice density of `sqrt(T)`.
pub fn kld_exact(stats: &DetectionStats) -> Result<f64> {
    let a = check_stats(stats)?;
    Ok(kld_exact_snr(a))
}

/// [`kld_exact`] as a function of `a = |mu|^2 / s2` alone.
pub fn kld_exact_snr(a: f64) -> f64 {
    if a == 0.0 {
        return 0.0;
    }
    let nu = a.sqrt();
    // u = R / s has density 2u exp(-(u - nu)^2) i0e(2 nu u)
    let spread = 12.0 / 2f64.sqrt();
    let lo = (nu - spread).max(0.0);
    let hi = nu + spread;
    let f = |u: f64| {
        if u <= 0.0 {
            return 0.0;
        }
        let z = 2.0 * nu * u;
        let dens = 2.0 * u * (-(u - nu) * (u - nu)).exp() * i0e(z);
        dens * (ln_i0(z) - a)
    };
    // the integrand scales like a, the result like a^2 for small a
    integrate(f, lo, hi, 1e-10 * a.min(1.0)).max(0.0)
}

/// Jensen surrogate `ln I0(2|mu| E[R] / s2) - |mu|^2/s2`, without clamping.
/// Negative for small `|mu|^2/s2`.
pub fn kld_surrogate_raw(stats: &DetectionStats) -> Result<f64> {
    let a = check_stats(stats)?;
    Ok(kld_surrogate_snr_raw(a))
}

pub fn kld_surrogate_snr_raw(a: f64) -> f64 {
    if a == 0.0 {
        return 0.0;
    }
    let nu = a.sqrt();
    let er = rice_first_moment(nu, 1.0);
    ln_i0(2.0 * nu * er) - a
}

/// Jensen lower bound on [`kld_exact`], clamped at zero.
pub fn kld_surrogate(stats: &DetectionStats) -> Result<f64> {
    Ok(kld_surrogate_raw(stats)?.max(0.0))
}

pub fn kld_surrogate_snr(a: f64) -> f64 {
    kld_surrogate_snr_raw(a).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KldGap {
    pub value: f64,
    pub d_bs: f64,
    pub d_eve: f64,
    /// Set when Eve's surrogate KLD was at or below [`GAP_FLOOR`].
    pub guarded: bool,
}

pub fn gap_of(d_bs: f64, d_eve: f64) -> KldGap {
    let guarded = d_eve <= GAP_FLOOR;
    KldGap { value: d_bs / d_eve.max(GAP_FLOOR), d_bs, d_eve, guarded }
}

/// `D~_BS / D~_E` for the default filters of both sides.
pub fn kld_gap(x: &TfGrid, targets: &TargetSet, bs_noise: f64, eve_noise: f64) -> Result<KldGap> {
    let bs = kld_surrogate(&detection_stats(x, targets, Side::Bs, bs_noise)?)?;
    let eve = kld_surrogate(&detection_stats(x, targets, Side::Eve, eve_noise)?)?;
    Ok(gap_of(bs, eve))
}

/// `|| H_eff W U s - s ||^2`.
pub fn comm_mismatch(
    h_eff: &DMatrix<Complex64>,
    w: &PerturbationWeights,
    kind: WaveformKind,
    dims: GridDims,
    s: &SymbolVector,
) -> Result<f64> {
    let len = dims.len();
    if s.len() != len || h_eff.nrows() != len || h_eff.ncols() != len || w.len() != len {
        return Err(Error::invalid(format!(
            "mismatch needs {len} symbols, a {len}x{len} channel and {len} weights, got {}, {}x{} and {}",
            s.len(),
            h_eff.nrows(),
            h_eff.ncols(),
            w.len()
        )));
    }
    let mut x = s.data().to_vec();
    modulation_transform(kind, dims).apply_in_place(&mut x);
    Ok(mismatch_of(h_eff, &x, w.as_slice(), s.data()))
}

fn mismatch_of(h: &DMatrix<Complex64>, us: &[Complex64], w: &[Complex64], s: &[Complex64]) -> f64 {
    let x = DVector::from_iterator(us.len(), us.iter().zip(w).map(|(a, b)| a * b));
    let y = h * x;
    y.iter().zip(s).map(|(a, b)| (a - b).norm_sqr()).sum()
}

/// `log2(1 + ||s||^2 / (mismatch + ||z||^2))` in bits.
pub fn achievable_rate(mismatch: f64, s_energy: f64, noise_energy: f64) -> Result<f64> {
    let den = mismatch + noise_energy;
    if !(den > 0.0) {
        return Err(Error::invalid(format!("rate denominator must be positive, got {den}")));
    }
    Ok((1.0 + s_energy / den).log2())
}

/// Peak-to-sidelobe ratio in dB of the bin `main` against the strongest
/// other bin. Capped at [`PSLR_CAP_DB`].
pub fn pslr(rd: &RdMap, main: (usize, usize)) -> Result<f64> {
    let dims = rd.dims();
    if dims.len() < 2 {
        return Err(Error::invalid("PSLR needs at least two bins"));
    }
    if main.0 >= dims.m || main.1 >= dims.n {
        return Err(Error::invalid(format!("bin {:?} outside {}x{} map", main, dims.m, dims.n)));
    }
    let idx = dims.index(main.0, main.1);
    let peak = rd.as_slice()[idx].norm_sqr();
    let side = rd
        .as_slice()
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != idx)
        .map(|(_, v)| v.norm_sqr())
        .fold(0.0, f64::max);
    if side == 0.0 {
        return Ok(PSLR_CAP_DB);
    }
    Ok((10.0 * (peak / side).log10()).min(PSLR_CAP_DB))
}

/// RD response map of a grid under the given filter (shorthand used by the
/// case study).
pub fn response_map(x: &TfGrid, kind: FilterKind, noise_var: f64) -> Result<RdMap> {
    let g = crate::receiver::per_bin_filter(x, kind, noise_var)?;
    Ok(to_rd_map(&g.hadamard(x)?))
}
