//! Cell-averaging CFAR on RD maps and Monte Carlo detection probability.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{
    extract_reference, rd_to_grid_amplitude, receive_sensing, sensing_channel_grid, EveDirectSpec, Target,
    TargetSet,
};
use crate::error::{Error, Result};
use crate::metrics::Side;
use crate::receiver::{estimate_channel, per_bin_filter, to_rd_map, FilterKind, RdMap};
use crate::rng::{self, complex_normal, Purpose};
use crate::waveform::{draw_symbols_with, modulate, Constellation, GridDims, PerturbationWeights, TfGrid, WaveformKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CfarConfig {
    /// Guard cells on each side of the cell under test, per axis.
    pub guard_cells: usize,
    /// Training cells beyond the guard ring, per axis.
    pub training_cells: usize,
    /// Threshold factor over the training mean, in dB.
    pub threshold_db: f64,
    /// Treat the map as periodic in both axes.
    pub wrap: bool,
}

impl Default for CfarConfig {
    fn default() -> Self {
        Self { guard_cells: 1, training_cells: 2, threshold_db: 10.0, wrap: true }
    }
}

impl CfarConfig {
    pub fn threshold_factor(&self) -> f64 {
        10f64.powf(self.threshold_db / 10.0)
    }

    /// Window half-width `guard + training`.
    pub fn reach(&self) -> usize {
        self.guard_cells + self.training_cells
    }

    /// Training cells of an interior cell (or any cell under wrap).
    pub fn training_count(&self) -> usize {
        let full = 2 * self.reach() + 1;
        let guard = 2 * self.guard_cells + 1;
        full * full - guard * guard
    }

    pub fn validate(&self, dims: GridDims) -> Result<()> {
        if !self.threshold_db.is_finite() {
            return Err(Error::InvalidConfig("CFAR threshold must be finite".into()));
        }
        if self.training_cells == 0 {
            return Err(Error::InvalidConfig("CFAR needs at least one training cell per axis".into()));
        }
        let span = 2 * self.reach() + 1;
        if self.wrap && (span > dims.m || span > dims.n) {
            return Err(Error::InvalidConfig(format!(
                "CFAR window {span}x{span} does not fit a {}x{} map",
                dims.m, dims.n
            )));
        }
        Ok(())
    }
}

/// Probability that exponential noise alone crosses the CA-CFAR threshold:
/// `(1 + a / Nt)^(-Nt)`.
pub fn analytic_pfa(cfg: &CfarConfig) -> f64 {
    let nt = cfg.training_count() as f64;
    (1.0 + cfg.threshold_factor() / nt).powf(-nt)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionOutcome {
    pub bin: (usize, usize),
    pub detected: bool,
    pub test_statistic: f64,
    pub local_noise_estimate: f64,
}

/// CA-CFAR on a power map laid out like [`RdMap`].
pub fn ca_cfar_power(
    power: &[f64],
    dims: GridDims,
    cfg: &CfarConfig,
    bins: &[(usize, usize)],
) -> Result<Vec<DetectionOutcome>> {
    cfg.validate(dims)?;
    if power.len() != dims.len() {
        return Err(Error::invalid("power map size does not match its dimensions"));
    }
    let factor = cfg.threshold_factor();
    let reach = cfg.reach() as i64;
    let guard = cfg.guard_cells as i64;
    let (m, n) = (dims.m as i64, dims.n as i64);
    bins.iter()
        .map(|&(l, k)| {
            if l >= dims.m || k >= dims.n {
                return Err(Error::invalid(format!("bin ({l}, {k}) outside map")));
            }
            let mut sum = 0.0;
            let mut count = 0usize;
            for dk in -reach..=reach {
                for dl in -reach..=reach {
                    if dl.abs() <= guard && dk.abs() <= guard {
                        continue;
                    }
                    let (li, ki) = (l as i64 + dl, k as i64 + dk);
                    let (li, ki) = if cfg.wrap {
                        (li.rem_euclid(m), ki.rem_euclid(n))
                    } else if li < 0 || li >= m || ki < 0 || ki >= n {
                        continue;
                    } else {
                        (li, ki)
                    };
                    sum += power[dims.index(li as usize, ki as usize)];
                    count += 1;
                }
            }
            if count == 0 {
                return Err(Error::InvalidConfig(format!("no training cells around ({l}, {k})")));
            }
            let noise = sum / count as f64;
            let t = power[dims.index(l, k)];
            Ok(DetectionOutcome { bin: (l, k), detected: t > factor * noise, test_statistic: t, local_noise_estimate: noise })
        })
        .collect()
}

pub fn ca_cfar(rd: &RdMap, cfg: &CfarConfig, bins: &[(usize, usize)]) -> Result<Vec<DetectionOutcome>> {
    ca_cfar_power(&rd.power(), rd.dims(), cfg, bins)
}

/// Where Eve's filter reference comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum EveReference {
    /// The true transmit grid (best case for Eve).
    #[default]
    Ideal,
    /// The grid recovered from the direct link by the reciprocal filter.
    Extracted(EveDirectSpec),
}

/// Everything a sensing trial needs apart from the transmit weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingScene {
    pub kind: WaveformKind,
    pub dims: GridDims,
    pub constellation: Constellation,
    pub targets: TargetSet,
    pub bs_noise: f64,
    pub eve_noise: f64,
    pub eve_reference: EveReference,
    pub cfar: CfarConfig,
}

impl SensingScene {
    pub fn validate(&self) -> Result<()> {
        self.targets.validate(self.dims)?;
        self.cfar.validate(self.dims)?;
        if !(self.bs_noise > 0.0) || !(self.eve_noise > 0.0) {
            return Err(Error::InvalidConfig("sensing noise variances must be positive".into()));
        }
        Ok(())
    }

    pub fn noise(&self, side: Side) -> f64 {
        match side {
            Side::Bs => self.bs_noise,
            Side::Eve => self.eve_noise,
        }
    }

    /// The same scene with the desired target removed (H0).
    pub fn without_desired(&self) -> Self {
        let mut s = self.clone();
        s.targets.bs[s.targets.desired].alpha0 = 0.0;
        s.targets.eve[s.targets.desired].alpha0 = 0.0;
        s
    }
}

/// One receiver chain: the side's targets and noise, processed by `filter`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Chain {
    pub side: Side,
    pub filter: FilterKind,
}

impl Chain {
    pub const BS: Chain = Chain { side: Side::Bs, filter: FilterKind::Lmmse };
    pub const EVE_MF: Chain = Chain { side: Side::Eve, filter: FilterKind::Mf };

    pub fn new(side: Side, filter: FilterKind) -> Self {
        Self { side, filter }
    }
}

/// Random path-loss draws of one frame, shared by BS and Eve: unit-variance
/// complex Gaussians for the unintended targets and a unit phasor for the
/// desired one.
pub fn draw_frame_alphas<R: rand::Rng + ?Sized>(targets: &TargetSet, rng: &mut R) -> Vec<Complex64> {
    (0..targets.len())
        .map(|p| {
            if p == targets.desired {
                let theta: f64 = rng.random::<f64>() * std::f64::consts::TAU;
                Complex64::from_polar(1.0, theta)
            } else {
                complex_normal(rng, 1.0)
            }
        })
        .collect()
}

fn side_channel(targets: &[Target], unit: &[Complex64], dims: GridDims) -> Result<TfGrid> {
    let alphas: Vec<Complex64> =
        targets.iter().zip(unit).map(|(t, z)| rd_to_grid_amplitude(z * t.alpha0, dims)).collect();
    sensing_channel_grid(targets, &alphas, dims)
}

/// RD map of one frame as seen by `chain`, for transmit grid `x`. `trial`
/// keys the random streams; chains of the same side share the noise draw.
pub fn frame_rd_map(scene: &SensingScene, x: &TfGrid, chain: Chain, seed: u64, trial: u64) -> Result<RdMap> {
    let mut alpha_rng = rng::stream(seed, Purpose::TargetAlphas, &[trial]);
    let unit = draw_frame_alphas(&scene.targets, &mut alpha_rng);
    let (targets, purpose) = match chain.side {
        Side::Bs => (&scene.targets.bs, Purpose::BsNoise),
        Side::Eve => (&scene.targets.eve, Purpose::EveNoise),
    };
    let h = side_channel(targets, &unit, scene.dims)?;
    let mut noise_rng = rng::stream(seed, purpose, &[trial]);
    let r = receive_sensing(x, &h, scene.noise(chain.side), &mut noise_rng)?;
    let reference = match (chain.side, scene.eve_reference) {
        (Side::Eve, EveReference::Extracted(spec)) => {
            let mut d_rng = rng::stream(seed, Purpose::EveDirect, &[trial]);
            extract_reference(x, &spec, &mut d_rng)?
        }
        _ => x.clone(),
    };
    let g = per_bin_filter(&reference, chain.filter, scene.noise(chain.side))?;
    Ok(to_rd_map(&estimate_channel(&r, &g)?))
}

/// CFAR decision at the desired target's bin for each chain in one frame.
pub fn detect_frame(
    scene: &SensingScene,
    x: &TfGrid,
    chains: &[Chain],
    seed: u64,
    trial: u64,
) -> Result<Vec<DetectionOutcome>> {
    chains
        .iter()
        .map(|&c| {
            let rd = frame_rd_map(scene, x, c, seed, trial)?;
            let t = &c.side.targets(&scene.targets)[scene.targets.desired];
            Ok(ca_cfar(&rd, &scene.cfar, &[(t.l, t.k)])?[0])
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdEstimate {
    pub detections: u64,
    pub trials: u64,
}

impl PdEstimate {
    pub fn pd(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.detections as f64 / self.trials as f64
        }
    }

    /// Binomial standard error.
    pub fn stderr(&self) -> f64 {
        if self.trials == 0 {
            return 0.0;
        }
        let p = self.pd();
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }

    pub fn merge(self, other: Self) -> Self {
        Self { detections: self.detections + other.detections, trials: self.trials + other.trials }
    }
}

/// Detection counts for several chains over `trials` frames of the fixed
/// grid `x`. Frames are keyed by `trial_offset + i`.
pub fn count_detections(
    scene: &SensingScene,
    x: &TfGrid,
    chains: &[Chain],
    trials: u64,
    seed: u64,
    trial_offset: u64,
) -> Result<Vec<PdEstimate>> {
    let hits = (0..trials)
        .into_par_iter()
        .map(|i| detect_frame(scene, x, chains, seed, trial_offset + i).map(|o| o.iter().map(|d| d.detected as u64).collect::<Vec<_>>()))
        .try_reduce(|| vec![0u64; chains.len()], |a, b| Ok(a.iter().zip(&b).map(|(x, y)| x + y).collect()))?;
    Ok(hits.into_iter().map(|detections| PdEstimate { detections, trials }).collect())
}

/// Fraction of frames with fresh symbols, path losses and noise in which
/// the desired target is detected by `chain`, using the fixed weights `w`.
pub fn detection_probability(
    scene: &SensingScene,
    chain: Chain,
    w: &PerturbationWeights,
    trials: u64,
    seed: u64,
) -> Result<PdEstimate> {
    if trials == 0 {
        return Err(Error::invalid("trials must be >= 1"));
    }
    scene.validate()?;
    let hits: u64 = (0..trials)
        .into_par_iter()
        .map(|i| -> Result<u64> {
            let mut srng = rng::stream(seed, Purpose::Symbols, &[i]);
            let s = draw_symbols_with(&scene.constellation, scene.dims.len(), &mut srng)?;
            let x = modulate(&s, scene.kind, scene.dims, w)?;
            Ok(detect_frame(scene, &x, &[chain], seed, i)?[0].detected as u64)
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(PdEstimate { detections: hits, trials })
}
