//! Channels: the Rician communication link seen in the symbol domain, the
//! LoS point-target sensing channels of the BS and Eve, and Eve's direct
//! link from which she recovers a reference copy of the transmit grid.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, complex_normal};
use crate::waveform::{modulation_transform, GridDims, TfGrid, WaveformKind};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// LoS and NLoS amplitude factors `sqrt(k/(k+1))`, `sqrt(1/(k+1))`.
/// `kappa = inf` is a pure LoS link.
pub fn rician_split(kappa: f64) -> (f64, f64) {
    if kappa.is_infinite() {
        (1.0, 0.0)
    } else {
        ((kappa / (kappa + 1.0)).sqrt(), (1.0 / (kappa + 1.0)).sqrt())
    }
}

/// Variance of the entries of the dense NLoS matrix.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NlosScaling {
    /// `CN(0, 1/MN)`: every output sample gets unit NLoS power, so `kappa`
    /// is the LoS-to-NLoS power ratio.
    #[default]
    PerRow,
    /// `CN(0, 1)` entries; the NLoS power grows with MN.
    PerEntry,
}

impl NlosScaling {
    fn variance(self, len: usize) -> f64 {
        match self {
            NlosScaling::PerRow => 1.0 / len as f64,
            NlosScaling::PerEntry => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommChannelSpec {
    pub alpha_c: Complex64,
    /// Rician factor, linear.
    pub kappa_c: f64,
    pub l_c: usize,
    pub k_c: i64,
    pub noise_var: f64,
    #[serde(default)]
    pub nlos: NlosScaling,
}

impl CommChannelSpec {
    pub fn validate(&self, dims: GridDims) -> Result<()> {
        if !(self.kappa_c >= 0.0) {
            return Err(Error::invalid(format!("Rician factor must be >= 0, got {}", self.kappa_c)));
        }
        if self.l_c >= dims.len() {
            return Err(Error::invalid(format!("delay {} outside [0, {})", self.l_c, dims.len())));
        }
        if !(self.noise_var > 0.0) {
            return Err(Error::invalid(format!("noise variance must be > 0, got {}", self.noise_var)));
        }
        Ok(())
    }
}

/// `H_c = a sqrt(k/(k+1)) Pi^l Delta^k + a sqrt(1/(k+1)) H_NLoS` in the
/// sample domain. `Pi` is the MN-point circular down-shift and
/// `Delta = diag(exp(j 2 pi k i / MN))`.
pub fn comm_channel_matrix<R: Rng + ?Sized>(
    spec: &CommChannelSpec,
    dims: GridDims,
    rng: &mut R,
) -> DMatrix<Complex64> {
    let len = dims.len();
    let (los, nlos) = rician_split(spec.kappa_c);
    let mut h = DMatrix::from_element(len, len, ZERO);
    if nlos > 0.0 {
        let var = spec.nlos.variance(len);
        // column-major fill; draws are consumed in storage order
        for v in h.iter_mut() {
            *v = complex_normal(rng, var) * spec.alpha_c * nlos;
        }
    }
    if los > 0.0 {
        for col in 0..len {
            let row = (col + spec.l_c) % len;
            let phase = 2.0 * PI * (spec.k_c as f64) * (col as f64) / len as f64;
            h[(row, col)] += spec.alpha_c * los * Complex64::from_polar(1.0, phase);
        }
    }
    h
}

/// Dense unitary DFT `F_M` (or `F_M^H` when `inverse`) on every length-M
/// block, i.e. `I_N (x) F_M`.
fn block_dft(dims: GridDims, inverse: bool) -> DMatrix<Complex64> {
    let len = dims.len();
    let m = dims.m;
    let sign = if inverse { 1.0 } else { -1.0 };
    let scale = 1.0 / (m as f64).sqrt();
    let mut f = DMatrix::from_element(len, len, ZERO);
    for b in 0..dims.n {
        for r in 0..m {
            for c in 0..m {
                let ph = sign * 2.0 * PI * (r * c) as f64 / m as f64;
                f[(b * m + r, b * m + c)] = Complex64::from_polar(scale, ph);
            }
        }
    }
    f
}

/// `H_c,eff = U^H (I_N (x) F_M) H_c (I_N (x) F_M^H)`.
pub fn comm_effective_channel(
    spec: &CommChannelSpec,
    kind: WaveformKind,
    dims: GridDims,
    seed: u64,
) -> Result<DMatrix<Complex64>> {
    let mut rng = rng::seeded(seed);
    comm_effective_channel_with(spec, kind, dims, &mut rng)
}

pub fn comm_effective_channel_with<R: Rng + ?Sized>(
    spec: &CommChannelSpec,
    kind: WaveformKind,
    dims: GridDims,
    rng: &mut R,
) -> Result<DMatrix<Complex64>> {
    spec.validate(dims)?;
    let h = comm_channel_matrix(spec, dims, rng);
    let inner = block_dft(dims, false) * h * block_dft(dims, true);
    let u = modulation_transform(kind, dims);
    let mut out = inner;
    if kind == WaveformKind::Otfs {
        for mut col in out.column_iter_mut() {
            let mut v: Vec<Complex64> = col.iter().copied().collect();
            u.adjoint_in_place(&mut v);
            col.iter_mut().zip(v).for_each(|(o, x)| *o = x);
        }
    }
    Ok(out)
}

/// `y = H_eff x + z`, `z ~ CN(0, noise_var I)`.
pub fn apply_comm_channel<R: Rng + ?Sized>(
    h_eff: &DMatrix<Complex64>,
    x_precoded: &[Complex64],
    noise_var: f64,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    if h_eff.ncols() != x_precoded.len() {
        return Err(Error::invalid(format!(
            "channel has {} columns but input has length {}",
            h_eff.ncols(),
            x_precoded.len()
        )));
    }
    let x = nalgebra::DVector::from_column_slice(x_precoded);
    let mut y: Vec<Complex64> = (h_eff * x).iter().copied().collect();
    if noise_var > 0.0 {
        for v in &mut y {
            *v += complex_normal(rng, noise_var);
        }
    }
    Ok(y)
}

/// One point target. `alpha0` is the RD-domain amplitude scale: a unit
/// target produces a unit mainlobe after an ideal (ZF) receiver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub alpha0: f64,
    pub l: usize,
    pub k: usize,
}

impl Target {
    pub fn new(alpha0: f64, l: usize, k: usize) -> Self {
        Self { alpha0, l, k }
    }

    fn validate(&self, dims: GridDims) -> Result<()> {
        if !(self.alpha0 >= 0.0) {
            return Err(Error::invalid(format!("alpha0 must be >= 0, got {}", self.alpha0)));
        }
        if self.l >= dims.m || self.k >= dims.n {
            return Err(Error::invalid(format!(
                "target bin ({}, {}) outside {}x{} map",
                self.l, self.k, dims.m, dims.n
            )));
        }
        Ok(())
    }
}

/// The same K physical targets as seen by the BS and by Eve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSet {
    pub bs: Vec<Target>,
    pub eve: Vec<Target>,
    pub desired: usize,
}

impl TargetSet {
    pub fn new(bs: Vec<Target>, eve: Vec<Target>, desired: usize) -> Result<Self> {
        let set = Self { bs, eve, desired };
        if set.bs.is_empty() || set.bs.len() != set.eve.len() {
            return Err(Error::invalid(format!(
                "BS and Eve target lists must be non-empty and equal length ({} vs {})",
                set.bs.len(),
                set.eve.len()
            )));
        }
        if set.desired >= set.bs.len() {
            return Err(Error::invalid(format!("desired index {} >= K={}", set.desired, set.bs.len())));
        }
        Ok(set)
    }

    pub fn validate(&self, dims: GridDims) -> Result<()> {
        Self::new(self.bs.clone(), self.eve.clone(), self.desired)?;
        self.bs.iter().chain(&self.eve).try_for_each(|t| t.validate(dims))
    }

    pub fn len(&self) -> usize {
        self.bs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bs.is_empty()
    }
}

/// `[H]_{m,n} = sum_p a_p exp(-j 2 pi m l_p / M) exp(+j 2 pi n k_p / N)`.
pub fn sensing_channel_grid(targets: &[Target], alphas: &[Complex64], dims: GridDims) -> Result<TfGrid> {
    if targets.len() != alphas.len() {
        return Err(Error::invalid(format!(
            "{} targets but {} path-loss draws",
            targets.len(),
            alphas.len()
        )));
    }
    let (m_len, n_len) = (dims.m as f64, dims.n as f64);
    let mut h = TfGrid::zeros(dims);
    for (t, &a) in targets.iter().zip(alphas) {
        if a == ZERO {
            continue;
        }
        let delay: Vec<Complex64> = (0..dims.m)
            .map(|m| Complex64::from_polar(1.0, -2.0 * PI * ((m * t.l) % dims.m) as f64 / m_len))
            .collect();
        for n in 0..dims.n {
            let dop = a * Complex64::from_polar(1.0, 2.0 * PI * ((n * t.k) % dims.n) as f64 / n_len);
            for (m, d) in delay.iter().enumerate() {
                let i = dims.index(m, n);
                h.as_mut_slice()[i] += dop * d;
            }
        }
    }
    Ok(h)
}

/// Grid-domain amplitude for an RD-domain amplitude: the TF channel of a
/// target with RD mainlobe `a` is `a / sqrt(MN)` times the phase ramps.
pub fn rd_to_grid_amplitude(a: Complex64, dims: GridDims) -> Complex64 {
    a / (dims.len() as f64).sqrt()
}

/// `alpha_p ~ CN(0, alpha0_p^2)`, independent across targets.
pub fn draw_target_alphas<R: Rng + ?Sized>(targets: &[Target], rng: &mut R) -> Vec<Complex64> {
    targets
        .iter()
        .map(|t| {
            let z = complex_normal(rng, 1.0);
            z * t.alpha0
        })
        .collect()
}

/// `R = H (.) X + Z`, `Z` i.i.d. CN(0, noise_var) per TF bin.
pub fn receive_sensing<R: Rng + ?Sized>(
    x: &TfGrid,
    h: &TfGrid,
    noise_var: f64,
    rng: &mut R,
) -> Result<TfGrid> {
    let mut r = h.hadamard(x)?;
    if noise_var > 0.0 {
        for v in r.as_mut_slice() {
            *v += complex_normal(rng, noise_var);
        }
    }
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EveDirectSpec {
    pub alpha_d: Complex64,
    /// Rician factor, linear.
    pub kappa_e: f64,
    pub l_d: usize,
    pub k_d: usize,
    pub noise_var: f64,
}

/// Unit-modulus LoS grid of Eve's direct link.
pub fn direct_los_grid(spec: &EveDirectSpec, dims: GridDims) -> TfGrid {
    let t = Target::new(1.0, spec.l_d % dims.m, spec.k_d % dims.n);
    sensing_channel_grid(&[t], &[Complex64::new(1.0, 0.0)], dims).expect("one target, one alpha")
}

/// Eve's reference `X^ = R_E,d (/) H_E,d,LoS`, where
/// `R_E,d = (a sqrt(k/(k+1)) H_LoS + a sqrt(1/(k+1)) H_NLoS) (.) X + Z`.
pub fn extract_reference<R: Rng + ?Sized>(x: &TfGrid, spec: &EveDirectSpec, rng: &mut R) -> Result<TfGrid> {
    let dims = x.dims();
    let (los, nlos) = rician_split(spec.kappa_e);
    if los == 0.0 || spec.alpha_d.norm() == 0.0 {
        return Err(Error::SingularReference(
            "direct link has no line-of-sight component".to_string(),
        ));
    }
    let h_los = direct_los_grid(spec, dims);
    let mut out = TfGrid::zeros(dims);
    for i in 0..dims.len() {
        let hl = h_los.as_slice()[i];
        if hl.norm() == 0.0 {
            return Err(Error::SingularReference(format!("LoS bin {i} is zero")));
        }
        let mut h = spec.alpha_d * los * hl;
        if nlos > 0.0 {
            h += spec.alpha_d * nlos * complex_normal(rng, 1.0);
        }
        let mut r = h * x.as_slice()[i];
        if spec.noise_var > 0.0 {
            r += complex_normal(rng, spec.noise_var);
        }
        out.as_mut_slice()[i] = r / hl;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn dims(m: usize, n: usize) -> GridDims {
        GridDims::new(m, n).unwrap()
    }

    fn spec(kappa: f64, l: usize, k: i64) -> CommChannelSpec {
        CommChannelSpec {
            alpha_c: Complex64::new(1.0, 0.0),
            kappa_c: kappa,
            l_c: l,
            k_c: k,
            noise_var: 1e-3,
            nlos: NlosScaling::PerRow,
        }
    }

    #[test]
    fn pure_los_identity_channel() {
        let h = comm_effective_channel(&spec(f64::INFINITY, 0, 0), WaveformKind::Ofdm, dims(8, 8), 1).unwrap();
        let eye = DMatrix::<Complex64>::identity(64, 64);
        assert!((h - eye).norm() < 1e-12);
    }

    #[test]
    fn pure_los_shift_preserves_norm() {
        let mut rng = seeded(9);
        let h = comm_channel_matrix(&spec(f64::INFINITY, 2, 0), dims(4, 4), &mut rng);
        let x = nalgebra::DVector::from_fn(16, |i, _| Complex64::new(i as f64, 1.0 - i as f64));
        assert!(((&h * &x).norm() - x.norm()).abs() < 1e-12);
    }

    #[test]
    fn otfs_los_effective_channel_is_scaled_unitary() {
        let mut s = spec(f64::INFINITY, 2, 3);
        s.alpha_c = Complex64::new(0.0, 0.5);
        let h = comm_effective_channel(&s, WaveformKind::Otfs, dims(4, 4), 2).unwrap();
        let sv = h.singular_values();
        assert!(sv.iter().all(|v| (v - 0.5).abs() < 1e-9));
    }

    #[test]
    fn sensing_grid_examples() {
        let d = dims(4, 3);
        let one = [Complex64::new(1.0, 0.0)];
        let h = sensing_channel_grid(&[Target::new(1.0, 0, 0)], &one, d).unwrap();
        assert!(h.as_slice().iter().all(|v| (v - one[0]).norm() < 1e-15));
        assert!((h.energy() - 12.0).abs() < 1e-12);

        let h = sensing_channel_grid(&[Target::new(1.0, 1, 0)], &one, d).unwrap();
        for n in 0..3 {
            for m in 0..4 {
                let want = Complex64::from_polar(1.0, -2.0 * PI * m as f64 / 4.0);
                assert!((h.get(m, n) - want).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn sensing_grid_is_linear_in_targets() {
        let d = dims(8, 8);
        let targets = [Target::new(1.0, 1, 2), Target::new(1.0, 5, 7), Target::new(1.0, 3, 0)];
        let mut rng = seeded(4);
        let alphas = draw_target_alphas(&targets, &mut rng);
        let all = sensing_channel_grid(&targets, &alphas, d).unwrap();
        let mut sum = TfGrid::zeros(d);
        for (t, a) in targets.iter().zip(&alphas) {
            let g = sensing_channel_grid(&[*t], &[*a], d).unwrap();
            sum.as_mut_slice().iter_mut().zip(g.as_slice()).for_each(|(s, v)| *s += v);
        }
        for (a, b) in all.as_slice().iter().zip(sum.as_slice()) {
            assert!((a - b).norm() < 1e-12);
        }
        assert!(sensing_channel_grid(&targets, &alphas[..2], d).is_err());
    }

    #[test]
    fn zero_scale_alpha_is_exactly_zero_and_draws_repeat() {
        let targets = [Target::new(0.0, 0, 0), Target::new(1.0, 0, 0)];
        let a = draw_target_alphas(&targets, &mut seeded(5));
        let b = draw_target_alphas(&targets, &mut seeded(5));
        assert_eq!(a[0], ZERO);
        assert_eq!(a, b);
    }

    #[test]
    fn alpha_variance_matches_scale() {
        let targets = [Target::new(1.0, 0, 0)];
        let mut rng = seeded(6);
        let n = 10_000;
        let v: f64 = (0..n).map(|_| draw_target_alphas(&targets, &mut rng)[0].norm_sqr()).sum::<f64>() / n as f64;
        assert!((v - 1.0).abs() < 0.05, "{v}");
    }

    #[test]
    fn noiseless_reception_is_hadamard() {
        let d = dims(4, 4);
        let x = TfGrid::from_fn(d, |m, n| Complex64::new(m as f64, n as f64));
        let ones = TfGrid::from_fn(d, |_, _| Complex64::new(1.0, 0.0));
        let r = receive_sensing(&x, &ones, 0.0, &mut seeded(1)).unwrap();
        assert_eq!(r, x);
        let h = TfGrid::from_fn(d, |m, _| Complex64::new(0.0, m as f64));
        let r = receive_sensing(&x, &h, 0.0, &mut seeded(1)).unwrap();
        assert_eq!(r, x.hadamard(&h).unwrap());
    }

    #[test]
    fn perfect_direct_link_returns_transmit_grid() {
        let d = dims(4, 4);
        let x = TfGrid::from_fn(d, |m, n| Complex64::new(1.0 + m as f64, n as f64));
        let spec = EveDirectSpec {
            alpha_d: Complex64::new(1.0, 0.0),
            kappa_e: f64::INFINITY,
            l_d: 1,
            k_d: 2,
            noise_var: 0.0,
        };
        let xh = extract_reference(&x, &spec, &mut seeded(2)).unwrap();
        for (a, b) in xh.as_slice().iter().zip(x.as_slice()) {
            assert!((a - b).norm() < 1e-12);
        }
        assert!(direct_los_grid(&spec, d).as_slice().iter().all(|v| (v.norm() - 1.0).abs() < 1e-14));
        let dead = EveDirectSpec { kappa_e: 0.0, ..spec };
        assert!(matches!(extract_reference(&x, &dead, &mut seeded(2)), Err(Error::SingularReference(_))));
    }
}
