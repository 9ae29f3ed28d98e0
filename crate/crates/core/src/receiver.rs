//! Per-bin receive filters and the TF to range-Doppler (RD) transform.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dsp::{self, Dir};
use crate::error::{Error, Result};
use crate::waveform::{GridDims, TfGrid};

/// Bins whose power falls below this fraction of the mean grid power are
/// dropped by the truncated reciprocal filter.
pub const RF_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    /// `x* / (|x|^2 + s2)`
    Lmmse,
    /// `x*`
    Mf,
    /// `1 / x`, errors on an empty bin.
    Zf,
    /// `1 / x` on bins above [`RF_FLOOR`] times the mean power, zero elsewhere.
    Rf,
}

impl FilterKind {
    pub const ALL: [FilterKind; 4] = [FilterKind::Lmmse, FilterKind::Mf, FilterKind::Zf, FilterKind::Rf];
}

impl fmt::Display for FilterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FilterKind::Lmmse => "lmmse",
            FilterKind::Mf => "mf",
            FilterKind::Zf => "zf",
            FilterKind::Rf => "rf",
        })
    }
}

impl FromStr for FilterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lmmse" => Ok(FilterKind::Lmmse),
            "mf" => Ok(FilterKind::Mf),
            "zf" => Ok(FilterKind::Zf),
            "rf" => Ok(FilterKind::Rf),
            other => Err(Error::Parse(format!("unknown filter '{other}'"))),
        }
    }
}

/// Filter coefficient for a single bin. `floor` is only used by RF.
#[inline]
pub(crate) fn filter_coeff(x: Complex64, kind: FilterKind, noise_var: f64, floor: f64) -> Option<Complex64> {
    let p = x.norm_sqr();
    match kind {
        FilterKind::Lmmse => Some(x.conj() / (p + noise_var)),
        FilterKind::Mf => Some(x.conj()),
        FilterKind::Zf => (p > 0.0).then(|| x.conj() / p),
        FilterKind::Rf => Some(if p > floor { x.conj() / p } else { Complex64::new(0.0, 0.0) }),
    }
}

pub(crate) fn rf_floor(x: &[Complex64]) -> f64 {
    RF_FLOOR * x.iter().map(|v| v.norm_sqr()).sum::<f64>() / x.len().max(1) as f64
}

/// Per-bin filter grid `G` built from the reference `x`.
pub fn per_bin_filter(x: &TfGrid, kind: FilterKind, noise_var: f64) -> Result<TfGrid> {
    // s2 = 0 is allowed: LMMSE then collapses to ZF
    if noise_var < 0.0 {
        return Err(Error::invalid(format!("noise variance must be >= 0, got {noise_var}")));
    }
    let dims = x.dims();
    let floor = rf_floor(x.as_slice());
    let mut g = Vec::with_capacity(dims.len());
    for (i, &v) in x.as_slice().iter().enumerate() {
        match filter_coeff(v, kind, noise_var, floor) {
            Some(c) if c.is_finite() => g.push(c),
            _ => return Err(Error::SingularFilter { m: i % dims.m, n: i / dims.m }),
        }
    }
    TfGrid::from_vec(dims, g)
}

/// `H^ = G (.) R`.
pub fn estimate_channel(r: &TfGrid, g: &TfGrid) -> Result<TfGrid> {
    g.hadamard(r)
}

/// Range-Doppler map indexed by delay bin `l` (fastest) and Doppler bin `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct RdMap {
    dims: GridDims,
    data: Vec<Complex64>,
}

impl RdMap {
    pub fn from_vec(dims: GridDims, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != dims.len() {
            return Err(Error::invalid(format!("RD map needs {} bins, got {}", dims.len(), data.len())));
        }
        Ok(Self { dims, data })
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn get(&self, l: usize, k: usize) -> Complex64 {
        self.data[self.dims.index(l, k)]
    }

    /// Value at a circular lag; negative lags wrap.
    pub fn at_lag(&self, dl: i64, dk: i64) -> Complex64 {
        let l = dl.rem_euclid(self.dims.m as i64) as usize;
        let k = dk.rem_euclid(self.dims.n as i64) as usize;
        self.get(l, k)
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn power(&self) -> Vec<f64> {
        self.data.iter().map(|v| v.norm_sqr()).collect()
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn scale(&mut self, c: f64) {
        self.data.iter_mut().for_each(|v| *v *= c);
    }
}

/// `[L]_{l,k} = 1/sqrt(MN) sum_{m,n} H_{m,n} exp(j 2 pi (m l / M - n k / N))`.
pub fn to_rd_map(h: &TfGrid) -> RdMap {
    let dims = h.dims();
    let mut data = h.as_slice().to_vec();
    dsp::transform_2d(&mut data, dims.m, dims.n, Dir::Inverse, Dir::Forward);
    RdMap { dims, data }
}

/// Noise-free RD response of a unit target at zero lag, i.e. the RD map of
/// `gamma = g (.) x`.
pub fn filter_response(x: &TfGrid, kind: FilterKind, noise_var: f64) -> Result<RdMap> {
    let g = per_bin_filter(x, kind, noise_var)?;
    Ok(to_rd_map(&g.hadamard(x)?))
}
