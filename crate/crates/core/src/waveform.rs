//! Transmit-side signal model: data symbols, the OFDM/OTFS modulation
//! transform and the diagonal TF perturbation `x_TF = W_TF U s`.
//!
//! All vectors of length `MN` use column-major order with the subcarrier /
//! delay index `m` fastest, so TF bin `(m, n)` sits at `n * M + m`.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dsp::{self, Dir};
use crate::error::{Error, Result};
use crate::rng;

/// Frame dimensions: `m` subcarriers by `n` time slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridDims {
    pub m: usize,
    pub n: usize,
}

impl GridDims {
    pub fn new(m: usize, n: usize) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::invalid(format!("grid dimensions must be positive, got {m}x{n}")));
        }
        Ok(Self { m, n })
    }

    pub fn len(&self) -> usize {
        self.m * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, m: usize, n: usize) -> usize {
        n * self.m + m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstellationKind {
    Qam16,
    Qpsk,
}

impl fmt::Display for ConstellationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConstellationKind::Qam16 => "qam16",
            ConstellationKind::Qpsk => "qpsk",
        })
    }
}

/// Gray-mapped constellation scaled to unit average energy.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    kind: ConstellationKind,
    points: Vec<Complex64>,
}

impl Constellation {
    pub fn new(kind: ConstellationKind) -> Self {
        let points = match kind {
            ConstellationKind::Qpsk => [(0, 0), (0, 1), (1, 0), (1, 1)]
                .iter()
                .map(|&(bi, bq)| {
                    let i = if bi == 0 { 1.0 } else { -1.0 };
                    let q = if bq == 0 { 1.0 } else { -1.0 };
                    Complex64::new(i, q) * FRAC_1_SQRT_2
                })
                .collect(),
            ConstellationKind::Qam16 => {
                // two Gray-coded bits per rail: 00 -> -3, 01 -> -1, 11 -> 1, 10 -> 3
                let level = |bits: usize| match bits {
                    0b00 => -3.0,
                    0b01 => -1.0,
                    0b11 => 1.0,
                    _ => 3.0,
                };
                let scale = 1.0 / 10f64.sqrt();
                (0..16)
                    .map(|word: usize| Complex64::new(level(word >> 2), level(word & 0b11)) * scale)
                    .collect()
            }
        };
        Self { kind, points }
    }

    pub fn kind(&self) -> ConstellationKind {
        self.kind
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn contains(&self, s: Complex64) -> bool {
        self.points.iter().any(|p| (p - s).norm() < 1e-12)
    }
}

/// The data symbols `s` of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolVector {
    data: Vec<Complex64>,
    constellation: ConstellationKind,
}

impl SymbolVector {
    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn constellation(&self) -> ConstellationKind {
        self.constellation
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum()
    }
}

/// Draws `count` i.i.d. uniform constellation points.
pub fn draw_symbols(constellation: &Constellation, count: usize, seed: u64) -> Result<SymbolVector> {
    let mut rng = rng::seeded(seed);
    draw_symbols_with(constellation, count, &mut rng)
}

pub fn draw_symbols_with<R: Rng + ?Sized>(
    constellation: &Constellation,
    count: usize,
    rng: &mut R,
) -> Result<SymbolVector> {
    if count == 0 {
        return Err(Error::invalid("symbol count must be positive"));
    }
    let pts = constellation.points();
    let data = (0..count).map(|_| pts[rng.random_range(0..pts.len())]).collect();
    Ok(SymbolVector { data, constellation: constellation.kind() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WaveformKind {
    Ofdm,
    Otfs,
}

impl fmt::Display for WaveformKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WaveformKind::Ofdm => "ofdm",
            WaveformKind::Otfs => "otfs",
        })
    }
}

impl FromStr for WaveformKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ofdm" => Ok(WaveformKind::Ofdm),
            "otfs" => Ok(WaveformKind::Otfs),
            other => Err(Error::Parse(format!("unknown waveform '{other}'"))),
        }
    }
}

/// The unitary map `U` from symbols to TF samples: identity for OFDM,
/// `F_N^H (x) F_M` (inverse SFFT) for OTFS. Applied with FFTs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModulationTransform {
    kind: WaveformKind,
    dims: GridDims,
}

pub fn modulation_transform(kind: WaveformKind, dims: GridDims) -> ModulationTransform {
    ModulationTransform { kind, dims }
}

impl ModulationTransform {
    pub fn kind(&self) -> WaveformKind {
        self.kind
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    /// `U v`.
    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        let mut out = v.to_vec();
        self.apply_in_place(&mut out);
        out
    }

    pub fn apply_in_place(&self, v: &mut [Complex64]) {
        assert_eq!(v.len(), self.dims.len(), "vector length must be MN");
        if self.kind == WaveformKind::Otfs {
            // vec(F_M S F_N^H)
            dsp::transform_2d(v, self.dims.m, self.dims.n, Dir::Forward, Dir::Inverse);
        }
    }

    /// `U^H v`.
    pub fn adjoint(&self, v: &[Complex64]) -> Vec<Complex64> {
        let mut out = v.to_vec();
        self.adjoint_in_place(&mut out);
        out
    }

    pub fn adjoint_in_place(&self, v: &mut [Complex64]) {
        assert_eq!(v.len(), self.dims.len(), "vector length must be MN");
        if self.kind == WaveformKind::Otfs {
            dsp::transform_2d(v, self.dims.m, self.dims.n, Dir::Inverse, Dir::Forward);
        }
    }

    /// Dense `MN x MN` matrix, built column by column through the fast path.
    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let len = self.dims.len();
        let mut out = DMatrix::zeros(len, len);
        let mut e = vec![Complex64::new(0.0, 0.0); len];
        for j in 0..len {
            e.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
            e[j] = Complex64::new(1.0, 0.0);
            self.apply_in_place(&mut e);
            out.column_mut(j).iter_mut().zip(&e).for_each(|(o, v)| *o = *v);
        }
        out
    }
}

/// Diagonal of `W_TF`, scaled so that `sum |w_i|^2` equals the power budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PerturbationWeights {
    w: Vec<Complex64>,
}

impl PerturbationWeights {
    /// The unperturbed all-ones weights.
    pub fn ones(len: usize) -> Self {
        Self { w: vec![Complex64::new(1.0, 0.0); len] }
    }

    /// Scales `raw` to trace power `p_max`, keeping phases.
    pub fn scaled_to(raw: Vec<Complex64>, p_max: f64) -> Result<Self> {
        if !(p_max > 0.0) {
            return Err(Error::invalid(format!("power budget must be positive, got {p_max}")));
        }
        let energy: f64 = raw.iter().map(|v| v.norm_sqr()).sum();
        if !(energy > 0.0) || !energy.is_finite() {
            return Err(Error::DegenerateInput(format!("weight vector has energy {energy}")));
        }
        let c = (p_max / energy).sqrt();
        Ok(Self { w: raw.into_iter().map(|v| v * c).collect() })
    }

    /// Wraps weights without rescaling. Used for infeasible test inputs and
    /// for weights read back from disk.
    pub fn from_raw(w: Vec<Complex64>) -> Self {
        Self { w }
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.w
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.w
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn trace_power(&self) -> f64 {
        self.w.iter().map(|v| v.norm_sqr()).sum()
    }
}

/// Scales `w` so that its trace power is `MN` (= its length).
pub fn normalize_weights(w: Vec<Complex64>) -> Result<PerturbationWeights> {
    let len = w.len() as f64;
    PerturbationWeights::scaled_to(w, len)
}

/// An M x N complex grid in the TF (or any 2-D) domain.
#[derive(Debug, Clone, PartialEq)]
pub struct TfGrid {
    dims: GridDims,
    data: Vec<Complex64>,
}

impl TfGrid {
    pub fn zeros(dims: GridDims) -> Self {
        Self { dims, data: vec![Complex64::new(0.0, 0.0); dims.len()] }
    }

    /// `vec^{-1}`: reshapes a length-MN vector.
    pub fn from_vec(dims: GridDims, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != dims.len() {
            return Err(Error::invalid(format!(
                "vector of length {} cannot form a {}x{} grid",
                data.len(),
                dims.m,
                dims.n
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn from_fn(dims: GridDims, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(dims.len());
        for n in 0..dims.n {
            for m in 0..dims.m {
                data.push(f(m, n));
            }
        }
        Self { dims, data }
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    /// `vec(X)` as a slice.
    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data
    }

    #[inline]
    pub fn get(&self, m: usize, n: usize) -> Complex64 {
        self.data[self.dims.index(m, n)]
    }

    #[inline]
    pub fn set(&mut self, m: usize, n: usize, v: Complex64) {
        let i = self.dims.index(m, n);
        self.data[i] = v;
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn hadamard(&self, other: &TfGrid) -> Result<TfGrid> {
        self.check_same(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect();
        Ok(TfGrid { dims: self.dims, data })
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> TfGrid {
        TfGrid { dims: self.dims, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    /// Per-bin power `|x_{m,n}|^2`, column-major.
    pub fn power(&self) -> Vec<f64> {
        self.data.iter().map(|v| v.norm_sqr()).collect()
    }

    pub(crate) fn check_same(&self, other: &TfGrid) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::invalid(format!(
                "grid size mismatch: {}x{} vs {}x{}",
                self.dims.m, self.dims.n, other.dims.m, other.dims.n
            )));
        }
        Ok(())
    }
}

/// `X_TF = vec^{-1}(W_TF U s)`.
pub fn modulate(
    s: &SymbolVector,
    kind: WaveformKind,
    dims: GridDims,
    w: &PerturbationWeights,
) -> Result<TfGrid> {
    if s.len() != dims.len() || w.len() != dims.len() {
        return Err(Error::invalid(format!(
            "modulate expects {} symbols and weights, got {} and {}",
            dims.len(),
            s.len(),
            w.len()
        )));
    }
    let mut x = s.data().to_vec();
    modulation_transform(kind, dims).apply_in_place(&mut x);
    x.iter_mut().zip(w.as_slice()).for_each(|(v, wi)| *v *= wi);
    TfGrid::from_vec(dims, x)
}

/// `(I_N (x) F_M^H) x_TF`: the OFDM-style time-domain samples of a TF grid.
pub fn to_time_domain(x: &TfGrid) -> Vec<Complex64> {
    let mut out = x.as_slice().to_vec();
    dsp::transform_columns(&mut out, x.dims().m, Dir::Inverse);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims(m: usize, n: usize) -> GridDims {
        GridDims::new(m, n).unwrap()
    }

    #[test]
    fn constellations_have_unit_energy_and_zero_mean() {
        for kind in [ConstellationKind::Qam16, ConstellationKind::Qpsk] {
            let c = Constellation::new(kind);
            let n = c.points().len() as f64;
            let mean: Complex64 = c.points().iter().sum::<Complex64>() / n;
            let energy: f64 = c.points().iter().map(|p| p.norm_sqr()).sum::<f64>() / n;
            assert!(mean.norm() < 1e-15);
            assert!((energy - 1.0).abs() < 1e-15);
        }
        assert_eq!(Constellation::new(ConstellationKind::Qam16).points().len(), 16);
    }

    #[test]
    fn qam16_neighbours_differ_in_one_bit() {
        let c = Constellation::new(ConstellationKind::Qam16);
        let d = 2.0 / 10f64.sqrt();
        for (i, a) in c.points().iter().enumerate() {
            for (j, b) in c.points().iter().enumerate() {
                if ((a - b).norm() - d).abs() < 1e-12 {
                    assert_eq!((i ^ j).count_ones(), 1, "{i} vs {j}");
                }
            }
        }
    }

    #[test]
    fn draw_symbols_is_deterministic() {
        let c = Constellation::new(ConstellationKind::Qam16);
        let a = draw_symbols(&c, 64, 7).unwrap();
        let b = draw_symbols(&c, 64, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.data().iter().all(|&s| c.contains(s)));
    }

    #[test]
    fn qpsk_symbols_have_unit_modulus() {
        let c = Constellation::new(ConstellationKind::Qpsk);
        let s = draw_symbols(&c, 4, 11).unwrap();
        assert!(s.data().iter().all(|v| (v.norm() - 1.0).abs() < 1e-15));
    }

    #[test]
    fn qam16_sample_energy_converges() {
        let c = Constellation::new(ConstellationKind::Qam16);
        let s = draw_symbols(&c, 100_000, 1).unwrap();
        let mean = s.energy() / s.len() as f64;
        assert!((mean - 1.0).abs() < 0.05, "{mean}");
    }

    #[test]
    fn zero_count_is_rejected() {
        let c = Constellation::new(ConstellationKind::Qpsk);
        assert!(matches!(draw_symbols(&c, 0, 1), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn ofdm_transform_is_identity() {
        let d = dims(8, 8);
        let c = Constellation::new(ConstellationKind::Qam16);
        let s = draw_symbols(&c, 64, 3).unwrap();
        let t = modulation_transform(WaveformKind::Ofdm, d);
        assert_eq!(t.apply(s.data()), s.data().to_vec());
    }

    #[test]
    fn otfs_transform_is_unitary_2x2() {
        let u = modulation_transform(WaveformKind::Otfs, dims(2, 2)).to_dense();
        let g = u.adjoint() * &u;
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g[(i, j)] - Complex64::new(want, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn normalize_examples() {
        let ones = vec![Complex64::new(1.0, 0.0); 64];
        assert_eq!(normalize_weights(ones.clone()).unwrap().as_slice(), &ones[..]);
        let twos = vec![Complex64::new(2.0, 0.0); 64];
        let w = normalize_weights(twos).unwrap();
        assert!(w.as_slice().iter().all(|v| (v - Complex64::new(1.0, 0.0)).norm() < 1e-15));
        let zero = vec![Complex64::new(0.0, 0.0); 8];
        assert!(matches!(normalize_weights(zero), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn ofdm_all_ones_modulation_is_reshape() {
        let d = dims(4, 8);
        let c = Constellation::new(ConstellationKind::Qam16);
        let s = draw_symbols(&c, 32, 5).unwrap();
        let x = modulate(&s, WaveformKind::Ofdm, d, &PerturbationWeights::ones(32)).unwrap();
        assert_eq!(x.as_slice(), s.data());
        assert_eq!(x.get(3, 1), s.data()[4 + 3]);
    }

    #[test]
    fn modulate_rejects_mismatched_lengths() {
        let d = dims(4, 4);
        let c = Constellation::new(ConstellationKind::Qpsk);
        let s = draw_symbols(&c, 8, 5).unwrap();
        assert!(modulate(&s, WaveformKind::Ofdm, d, &PerturbationWeights::ones(16)).is_err());
    }

    #[test]
    fn grid_from_vec_checks_length() {
        assert!(TfGrid::from_vec(dims(2, 2), vec![Complex64::new(0.0, 0.0); 3]).is_err());
        assert!(GridDims::new(0, 3).is_err());
    }

    #[test]
    fn time_domain_of_single_subcarrier_is_tone() {
        let d = dims(4, 1);
        let mut x = TfGrid::zeros(d);
        x.set(1, 0, Complex64::new(1.0, 0.0));
        let t = to_time_domain(&x);
        for (i, v) in t.iter().enumerate() {
            let want = Complex64::from_polar(0.5, 2.0 * std::f64::consts::PI * i as f64 / 4.0);
            assert!((v - want).norm() < 1e-12);
        }
    }
}
