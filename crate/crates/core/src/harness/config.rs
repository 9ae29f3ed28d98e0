//! Scenario files. Sections and key names follow the simulation-parameter
//! tables; every SNR and Rician factor is given in dB and converted once
//! here.
//!
//! Amplitude convention: the desired target has unit per-sample gain, so a
//! target SNR of `s` dB means a TF-bin noise variance of `10^(-s/10)`.
//! Unintended-target coefficients are in dB relative to the desired one.
//! Internally amplitudes are stored in the RD domain, i.e. scaled by
//! `sqrt(MN)` (see [`rd_alpha0`]).

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{CommChannelSpec, EveDirectSpec, NlosScaling, Target, TargetSet};
use crate::detection::{CfarConfig, EveReference, SensingScene};
use crate::error::{Error, Result};
use crate::optimizer::{EveAssumption, EveMode, SaConfig};
use crate::rng::{self, Purpose};
use crate::waveform::{Constellation, ConstellationKind, GridDims, WaveformKind};

pub fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// TF-bin noise variance for a desired-target SNR in dB.
pub fn sensing_noise_var(snr_db: f64) -> f64 {
    db_to_lin(-snr_db)
}

/// RD-domain amplitude scale of a target whose per-sample power is
/// `coeff_db` dB.
pub fn rd_alpha0(coeff_db: f64, dims: GridDims) -> f64 {
    (dims.len() as f64 * db_to_lin(coeff_db)).sqrt()
}

/// `count` values from `hi` down to `lo` in uniform dB steps.
pub fn expand_ladder(range_db: [f64; 2], count: usize) -> Vec<f64> {
    let [lo, hi] = range_db;
    match count {
        0 => Vec::new(),
        1 => vec![hi],
        _ => (0..count).map(|i| hi - (hi - lo) * i as f64 / (count - 1) as f64).collect(),
    }
}

/// Label used for a clutter ladder in result files, e.g. `[-15, 10]`.
pub fn ladder_label(range_db: [f64; 2]) -> String {
    format!("[{}, {}]", range_db[0], range_db[1])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub seed: u64,
    /// Monte Carlo symbol sequences per sweep point.
    pub sequences: usize,
    /// Path-loss and noise draws per sequence.
    pub frames_per_sequence: usize,
    /// Optimise once per sweep point and reuse the weights.
    pub amortized: bool,
    pub waveforms: Vec<WaveformKind>,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            seed: 1,
            sequences: 100,
            frames_per_sequence: 10,
            amortized: false,
            waveforms: vec![WaveformKind::Otfs, WaveformKind::Ofdm],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    /// M
    pub subcarriers: usize,
    /// N
    pub time_slots: usize,
    pub constellation: ConstellationKind,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { subcarriers: 8, time_slots: 8, constellation: ConstellationKind::Qam16 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CommunicationSection {
    /// l_c
    pub delay: usize,
    /// k_c
    pub doppler: i64,
    /// alpha_c (real)
    pub coefficient: f64,
    /// SNR_c
    pub snr_db: f64,
    /// kappa_c
    pub rician_factor_db: f64,
    pub nlos_scaling: NlosScaling,
}

impl Default for CommunicationSection {
    fn default() -> Self {
        Self {
            delay: 2,
            doppler: 3,
            coefficient: 1.0,
            snr_db: 25.0,
            rician_factor_db: 10.0,
            nlos_scaling: NlosScaling::PerRow,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensingSection {
    /// K
    pub targets: usize,
    pub desired_index: usize,
    /// Unintended-target coefficient range, expanded to K - 1 values.
    pub unintended_coeff_range_db: [f64; 2],
    /// Target SNR sweep points.
    pub target_snr_db: Vec<f64>,
    /// Delay/Doppler bins at the BS, desired first unless `desired_index`
    /// says otherwise. Empty means the built-in layout.
    pub bs_bins: Vec<[usize; 2]>,
    pub eve_bins: Vec<[usize; 2]>,
}

impl Default for SensingSection {
    fn default() -> Self {
        Self {
            targets: 3,
            desired_index: 0,
            unintended_coeff_range_db: [-15.0, 10.0],
            target_snr_db: vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
            bs_bins: Vec::new(),
            eve_bins: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReferenceMode {
    Ideal,
    Extracted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EveSection {
    /// SNR_ref
    pub direct_link_snr_db: f64,
    /// kappa_ref
    pub direct_link_rician_db: f64,
    pub direct_link_bin: [usize; 2],
    pub reference: ReferenceMode,
    /// Eve surveillance noise relative to the BS noise.
    pub noise_offset_db: f64,
    pub mode: EveMode,
    /// Agnostic-mode stand-ins for Eve's clutter and noise.
    pub surrogate_unintended_coeff_range_db: [f64; 2],
    pub surrogate_noise_offset_db: f64,
}

impl Default for EveSection {
    fn default() -> Self {
        Self {
            direct_link_snr_db: 0.0,
            direct_link_rician_db: 0.0,
            direct_link_bin: [1, 1],
            reference: ReferenceMode::Ideal,
            noise_offset_db: 0.0,
            mode: EveMode::Aware,
            surrogate_unintended_coeff_range_db: [-12.0, 13.0],
            surrogate_noise_offset_db: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerSection {
    pub beta: f64,
    #[serde(flatten)]
    pub sa: SaConfig,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        Self { beta: 1.0, sa: SaConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TradeoffSection {
    pub betas: Vec<f64>,
    pub clutter_ranges_db: Vec<[f64; 2]>,
}

impl Default for TradeoffSection {
    fn default() -> Self {
        Self {
            betas: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            clutter_ranges_db: vec![[-15.0, 10.0]],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CaseStudySection {
    pub betas: Vec<f64>,
    /// Which sweep point of `target_snr_db` to use.
    pub snr_index: usize,
}

impl Default for CaseStudySection {
    fn default() -> Self {
        Self { betas: vec![0.0, 1.0], snr_index: 0 }
    }
}

/// A complete experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub experiment: ExperimentSection,
    pub grid: GridSection,
    pub communication: CommunicationSection,
    pub sensing: SensingSection,
    pub eve: EveSection,
    pub optimizer: OptimizerSection,
    pub cfar: CfarConfig,
    pub tradeoff: TradeoffSection,
    pub case_study: CaseStudySection,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(msg.into())
}

impl ScenarioConfig {
    /// Sensing-security setup (M = N = 8, K = 3, beta = 1).
    pub fn table_one() -> Self {
        Self::default()
    }

    /// Trade-off setup: fixed 25 dB target SNR, 20 dB / 10 dB direct link.
    pub fn table_two() -> Self {
        let mut c = Self::default();
        c.sensing.target_snr_db = vec![25.0];
        c.eve.direct_link_snr_db = 20.0;
        c.eve.direct_link_rician_db = 10.0;
        c.tradeoff.clutter_ranges_db = vec![[-20.0, 5.0], [-15.0, 10.0], [-12.0, 13.0]];
        c.experiment.waveforms = vec![WaveformKind::Otfs];
        c
    }

    /// RD-map case study: M = N = 16, K = 5, 20 dB.
    pub fn case_study() -> Self {
        let mut c = Self::default();
        c.grid.subcarriers = 16;
        c.grid.time_slots = 16;
        c.sensing.targets = 5;
        c.sensing.target_snr_db = vec![20.0];
        c.experiment.sequences = 1;
        c
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn dims(&self) -> Result<GridDims> {
        GridDims::new(self.grid.subcarriers, self.grid.time_slots)
    }

    pub fn validate(&self) -> Result<()> {
        let dims = self.dims().map_err(|e| bad(e.to_string()))?;
        let e = &self.experiment;
        if e.sequences == 0 || e.frames_per_sequence == 0 {
            return Err(bad("sequences and frames_per_sequence must be >= 1"));
        }
        if e.waveforms.is_empty() {
            return Err(bad("at least one waveform is required"));
        }
        let s = &self.sensing;
        if s.targets == 0 || s.desired_index >= s.targets {
            return Err(bad(format!("need K >= 1 and desired_index < K (K={}, p={})", s.targets, s.desired_index)));
        }
        if s.target_snr_db.is_empty() || s.target_snr_db.iter().any(|v| !v.is_finite()) {
            return Err(bad("target_snr_db must hold finite values"));
        }
        for (name, bins) in [("bs_bins", &s.bs_bins), ("eve_bins", &s.eve_bins)] {
            if !bins.is_empty() && bins.len() != s.targets {
                return Err(bad(format!("{name} must list K={} bins, got {}", s.targets, bins.len())));
            }
            if bins.iter().any(|b| b[0] >= dims.m || b[1] >= dims.n) {
                return Err(bad(format!("{name} has a bin outside the {}x{} map", dims.m, dims.n)));
            }
        }
        let beta_ok = |b: f64| (0.0..=1.0).contains(&b);
        if !beta_ok(self.optimizer.beta) || !self.tradeoff.betas.iter().all(|b| beta_ok(*b)) {
            return Err(bad("beta values must lie in [0, 1]"));
        }
        if !self.case_study.betas.iter().all(|b| beta_ok(*b)) {
            return Err(bad("case-study beta values must lie in [0, 1]"));
        }
        if self.case_study.snr_index >= s.target_snr_db.len() {
            return Err(bad("case_study.snr_index is outside target_snr_db"));
        }
        if self.communication.delay >= dims.len() {
            return Err(bad("communication delay exceeds the frame length"));
        }
        self.optimizer.sa.validate()?;
        self.cfar.validate(dims)?;
        Ok(())
    }

    pub fn comm_spec(&self) -> CommChannelSpec {
        let c = &self.communication;
        CommChannelSpec {
            alpha_c: Complex64::new(c.coefficient, 0.0),
            kappa_c: db_to_lin(c.rician_factor_db),
            l_c: c.delay,
            k_c: c.doppler,
            noise_var: c.coefficient * c.coefficient / db_to_lin(c.snr_db),
            nlos: c.nlos_scaling,
        }
    }

    pub fn direct_spec(&self, dims: GridDims) -> EveDirectSpec {
        let e = &self.eve;
        EveDirectSpec {
            alpha_d: Complex64::new(1.0, 0.0),
            kappa_e: db_to_lin(e.direct_link_rician_db),
            l_d: e.direct_link_bin[0] % dims.m,
            k_d: e.direct_link_bin[1] % dims.n,
            noise_var: 1.0 / db_to_lin(e.direct_link_snr_db),
        }
    }

    fn bins(&self, dims: GridDims, eve: bool) -> Vec<[usize; 2]> {
        let given = if eve { &self.sensing.eve_bins } else { &self.sensing.bs_bins };
        if !given.is_empty() {
            return given.clone();
        }
        default_bins(dims, self.sensing.targets, self.sensing.desired_index, self.cfar.reach(), eve)
    }

    /// Targets with the given clutter range.
    pub fn target_set_with(&self, dims: GridDims, range_db: [f64; 2]) -> Result<TargetSet> {
        let k = self.sensing.targets;
        let p = self.sensing.desired_index;
        let ladder = expand_ladder(range_db, k - 1);
        let coeffs: Vec<f64> = (0..k)
            .map(|q| match q.cmp(&p) {
                std::cmp::Ordering::Equal => 0.0,
                std::cmp::Ordering::Less => ladder[q],
                std::cmp::Ordering::Greater => ladder[q - 1],
            })
            .collect();
        let make = |bins: Vec<[usize; 2]>| -> Vec<Target> {
            bins.iter().zip(&coeffs).map(|(b, c)| Target::new(rd_alpha0(*c, dims), b[0], b[1])).collect()
        };
        let set = TargetSet::new(make(self.bins(dims, false)), make(self.bins(dims, true)), p)?;
        set.validate(dims)?;
        Ok(set)
    }

    pub fn target_set(&self, dims: GridDims) -> Result<TargetSet> {
        self.target_set_with(dims, self.sensing.unintended_coeff_range_db)
    }

    /// The sensing scene of one waveform at one SNR point.
    pub fn scene(&self, kind: WaveformKind, snr_db: f64) -> Result<SensingScene> {
        self.scene_with(kind, snr_db, self.sensing.unintended_coeff_range_db)
    }

    pub fn scene_with(&self, kind: WaveformKind, snr_db: f64, range_db: [f64; 2]) -> Result<SensingScene> {
        let dims = self.dims()?;
        let bs_noise = sensing_noise_var(snr_db);
        let scene = SensingScene {
            kind,
            dims,
            constellation: Constellation::new(self.grid.constellation),
            targets: self.target_set_with(dims, range_db)?,
            bs_noise,
            eve_noise: bs_noise * db_to_lin(self.eve.noise_offset_db),
            eve_reference: match self.eve.reference {
                ReferenceMode::Ideal => EveReference::Ideal,
                ReferenceMode::Extracted => EveReference::Extracted(self.direct_spec(dims)),
            },
            cfar: self.cfar,
        };
        scene.validate()?;
        Ok(scene)
    }

    /// The Eve parameters the optimizer is told about.
    pub fn eve_assumption(&self, scene: &SensingScene) -> Result<EveAssumption> {
        Ok(match self.eve.mode {
            EveMode::Aware => EveAssumption::aware(),
            EveMode::Agnostic => {
                let surrogate = self.target_set_with(scene.dims, self.eve.surrogate_unintended_coeff_range_db)?;
                EveAssumption::agnostic(surrogate.eve, scene.bs_noise * db_to_lin(self.eve.surrogate_noise_offset_db))
            }
        })
    }
}

/// Built-in target layout. The desired target sits near the origin; the
/// others are drawn (from a fixed stream, independent of the experiment
/// seed) among bins outside the desired cell's CFAR window so that clutter
/// peaks never enter its training band. Eve's layout uses a different draw.
pub fn default_bins(dims: GridDims, k: usize, desired: usize, reach: usize, eve: bool) -> Vec<[usize; 2]> {
    use rand::seq::SliceRandom;
    let anchor = if eve { [(3 % dims.m), (5 % dims.n)] } else { [1 % dims.m, 2 % dims.n] };
    let circ = |a: usize, b: usize, len: usize| {
        let d = a.abs_diff(b);
        d.min(len - d)
    };
    let mut outside: Vec<[usize; 2]> = (0..dims.n)
        .flat_map(|kk| (0..dims.m).map(move |l| [l, kk]))
        .filter(|b| circ(b[0], anchor[0], dims.m) > reach || circ(b[1], anchor[1], dims.n) > reach)
        .collect();
    if outside.len() < k.saturating_sub(1) {
        // tiny maps: fall back to any other bin
        outside = (0..dims.n)
            .flat_map(|kk| (0..dims.m).map(move |l| [l, kk]))
            .filter(|b| *b != anchor)
            .collect();
    }
    let mut r = rng::stream(0, Purpose::Geometry, &[eve as u64, dims.m as u64, dims.n as u64]);
    outside.shuffle(&mut r);
    let mut others = outside.into_iter();
    (0..k)
        .map(|q| if q == desired { anchor } else { others.next().unwrap_or(anchor) })
        .collect()
}
