//! Trade-off objective `beta * D~_BS / D~_E - (1 - beta) * mismatch` over
//! the per-bin weights, maximised by simulated annealing on the sphere
//! `sum |w|^2 = P_max`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::channel::Target;
use crate::detection::SensingScene;
use crate::error::{Error, Result};
use crate::metrics::{clutter_of, gap_of, kld_surrogate_snr, stats_from_sums, ResponseSums, Side};
use crate::rng::{self, Purpose, SimRng};
use crate::waveform::{modulation_transform, GridDims, PerturbationWeights, SymbolVector, WaveformKind};

/// Relative slack on the power budget.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Accepted moves between full recomputations of the cached channel output.
const REFRESH_EVERY: usize = 256;

/// What the objective needs to know about one sensing side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SideModel {
    /// Desired target scale.
    pub alpha0: f64,
    /// `sum_{q != p} alpha_q0^2`.
    pub clutter: f64,
    pub noise_var: f64,
}

impl SideModel {
    pub fn from_targets(targets: &[Target], desired: usize, noise_var: f64) -> Result<Self> {
        let t = targets
            .get(desired)
            .ok_or_else(|| Error::invalid(format!("desired index {desired} >= K={}", targets.len())))?;
        Ok(Self { alpha0: t.alpha0, clutter: clutter_of(targets, desired), noise_var })
    }

    fn surrogate(&self, x: &[Complex64], side: Side) -> f64 {
        let s = ResponseSums::from_slice(x, side.default_filter(), self.noise_var)
            .expect("LMMSE and MF have no singular bins");
        let st = stats_from_sums(&s, self.alpha0, self.clutter, self.noise_var, side);
        if st.sigma2 > 0.0 {
            kld_surrogate_snr(st.mu.norm_sqr() / st.sigma2)
        } else if st.mu.norm_sqr() > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EveMode {
    Aware,
    Agnostic,
}

/// Which Eve parameters the optimizer plugs into the objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EveAssumption {
    pub mode: EveMode,
    /// Surrogate geometry; only read in agnostic mode.
    pub eve_targets: Vec<Target>,
    /// Surrogate noise; only read in agnostic mode.
    pub eve_noise_var: f64,
}

impl EveAssumption {
    pub fn aware() -> Self {
        Self { mode: EveMode::Aware, eve_targets: Vec::new(), eve_noise_var: 0.0 }
    }

    pub fn agnostic(eve_targets: Vec<Target>, eve_noise_var: f64) -> Self {
        Self { mode: EveMode::Agnostic, eve_targets, eve_noise_var }
    }

    /// Eve's side model under this assumption.
    pub fn side_model(&self, scene: &SensingScene) -> Result<SideModel> {
        let desired = scene.targets.desired;
        match self.mode {
            EveMode::Aware => SideModel::from_targets(&scene.targets.eve, desired, scene.eve_noise),
            EveMode::Agnostic => {
                if !(self.eve_noise_var > 0.0) {
                    return Err(Error::InvalidConfig("surrogate Eve noise must be positive".into()));
                }
                SideModel::from_targets(&self.eve_targets, desired, self.eve_noise_var)
            }
        }
    }
}

/// Everything the objective depends on apart from the weights.
#[derive(Debug, Clone)]
pub struct Objective {
    pub beta: f64,
    pub kind: WaveformKind,
    pub dims: GridDims,
    pub h_eff: DMatrix<Complex64>,
    /// The data symbols `s`.
    pub s: Vec<Complex64>,
    /// `U s`, cached.
    pub us: Vec<Complex64>,
    pub bs: SideModel,
    pub eve: SideModel,
    pub p_max: f64,
}

impl Objective {
    pub fn new(
        beta: f64,
        kind: WaveformKind,
        dims: GridDims,
        s: &SymbolVector,
        h_eff: DMatrix<Complex64>,
        bs: SideModel,
        eve: SideModel,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::invalid(format!("beta must lie in [0, 1], got {beta}")));
        }
        let len = dims.len();
        if s.len() != len || h_eff.nrows() != len || h_eff.ncols() != len {
            return Err(Error::invalid("objective dimensions disagree"));
        }
        let us = modulation_transform(kind, dims).apply(s.data());
        Ok(Self { beta, kind, dims, h_eff, s: s.data().to_vec(), us, bs, eve, p_max: len as f64 })
    }

    /// Builds the objective of a sensing scene for one data sequence.
    pub fn for_scene(
        scene: &SensingScene,
        h_eff: DMatrix<Complex64>,
        s: &SymbolVector,
        beta: f64,
        eve: &EveAssumption,
    ) -> Result<Self> {
        let bs = SideModel::from_targets(&scene.targets.bs, scene.targets.desired, scene.bs_noise)?;
        let eve = eve.side_model(scene)?;
        Self::new(beta, scene.kind, scene.dims, s, h_eff, bs, eve)
    }

    pub fn with_p_max(mut self, p_max: f64) -> Result<Self> {
        if !(p_max > 0.0) {
            return Err(Error::invalid(format!("power budget must be positive, got {p_max}")));
        }
        self.p_max = p_max;
        Ok(self)
    }

    fn check_feasible(&self, w: &PerturbationWeights) -> Result<()> {
        if w.len() != self.dims.len() {
            return Err(Error::invalid(format!("expected {} weights, got {}", self.dims.len(), w.len())));
        }
        let trace = w.trace_power();
        if trace > self.p_max * (1.0 + FEASIBILITY_TOL) {
            return Err(Error::ConstraintViolation { trace, p_max: self.p_max });
        }
        Ok(())
    }

    fn grid(&self, w: &[Complex64]) -> Vec<Complex64> {
        self.us.iter().zip(w).map(|(a, b)| a * b).collect()
    }

    fn combine(&self, x: &[Complex64], mismatch: impl FnOnce() -> f64) -> Terms {
        let (gap, mismatch) = if self.beta == 0.0 {
            (0.0, mismatch())
        } else if self.beta == 1.0 {
            (self.gap(x), 0.0)
        } else {
            (self.gap(x), mismatch())
        };
        Terms { value: self.beta * gap - (1.0 - self.beta) * mismatch, gap, mismatch }
    }

    fn gap(&self, x: &[Complex64]) -> f64 {
        gap_of(self.bs.surrogate(x, Side::Bs), self.eve.surrogate(x, Side::Eve)).value
    }

    fn mismatch_from_output(&self, y: &[Complex64]) -> f64 {
        y.iter().zip(&self.s).map(|(a, b)| (a - b).norm_sqr()).sum()
    }

    fn channel_output(&self, x: &[Complex64]) -> Vec<Complex64> {
        let v = nalgebra::DVector::from_column_slice(x);
        (&self.h_eff * v).iter().copied().collect()
    }

    /// Objective value and its two terms, computed from scratch.
    pub fn terms(&self, w: &PerturbationWeights) -> Result<Terms> {
        self.check_feasible(w)?;
        let x = self.grid(w.as_slice());
        Ok(self.combine(&x, || self.mismatch_from_output(&self.channel_output(&x))))
    }
}

/// One objective evaluation split into its parts. `gap` is 0 when `beta = 0`
/// and `mismatch` is 0 when `beta = 1` (those terms are not computed).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Terms {
    pub value: f64,
    pub gap: f64,
    pub mismatch: f64,
}

pub fn evaluate_objective(w: &PerturbationWeights, obj: &Objective) -> Result<f64> {
    Ok(obj.terms(w)?.value)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SaConfig {
    /// `None` calibrates so that about 80% of random moves from the start
    /// point would be accepted.
    pub initial_temp: Option<f64>,
    pub cooling_rate: f64,
    pub iters_per_temp: usize,
    /// Stop temperature as a fraction of the initial one.
    pub min_temp_ratio: f64,
    /// Std-dev of the log-amplitude step.
    pub move_scale_amp: f64,
    /// Std-dev of the phase step, radians.
    pub move_scale_phase: f64,
    /// Bins touched per move.
    pub move_batch: usize,
    pub seed: u64,
    pub max_evals: usize,
}

impl Default for SaConfig {
    fn default() -> Self {
        Self {
            initial_temp: None,
            cooling_rate: 0.95,
            iters_per_temp: 50,
            min_temp_ratio: 1e-4,
            move_scale_amp: 0.5,
            move_scale_phase: 0.5,
            move_batch: 1,
            seed: 0,
            max_evals: 200_000,
        }
    }
}

impl SaConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if let Some(t) = self.initial_temp {
            if !(t > 0.0) {
                return bad("initial temperature must be positive");
            }
        }
        if !(self.cooling_rate > 0.0 && self.cooling_rate < 1.0) {
            return bad("cooling rate must lie in (0, 1)");
        }
        if self.iters_per_temp == 0 || self.move_batch == 0 || self.max_evals == 0 {
            return bad("iteration counts must be positive");
        }
        if !(self.min_temp_ratio > 0.0 && self.min_temp_ratio < 1.0) {
            return bad("min temperature ratio must lie in (0, 1)");
        }
        if !(self.move_scale_amp >= 0.0 && self.move_scale_phase >= 0.0) {
            return bad("move scales must be non-negative");
        }
        Ok(())
    }

    /// Number of temperature levels of the geometric schedule.
    pub fn levels(&self) -> usize {
        (self.min_temp_ratio.ln() / self.cooling_rate.ln()).ceil() as usize
    }
}

/// A proposed change: new values for a few bins before renormalisation.
#[derive(Debug, Clone)]
struct Move {
    idx: Vec<usize>,
    new: Vec<Complex64>,
}

fn draw_move<R: Rng + ?Sized>(w: &[Complex64], cfg: &SaConfig, rng: &mut R) -> Move {
    let mut idx = Vec::with_capacity(cfg.move_batch);
    let mut new = Vec::with_capacity(cfg.move_batch);
    for _ in 0..cfg.move_batch {
        let i = rng.random_range(0..w.len());
        let la: f64 = rng.sample::<f64, _>(StandardNormal) * cfg.move_scale_amp;
        let ph: f64 = rng.sample::<f64, _>(StandardNormal) * cfg.move_scale_phase;
        let base = match idx.iter().position(|&j| j == i) {
            Some(p) => new[p],
            None => w[i],
        };
        let v = base * Complex64::from_polar(la.exp(), ph);
        match idx.iter().position(|&j| j == i) {
            Some(p) => new[p] = v,
            None => {
                idx.push(i);
                new.push(v);
            }
        }
    }
    Move { idx, new }
}

/// Random multiplicative amplitude / additive phase step on a few bins,
/// followed by renormalisation to `p_max`.
pub fn propose_move<R: Rng + ?Sized>(
    w: &PerturbationWeights,
    cfg: &SaConfig,
    p_max: f64,
    rng: &mut R,
) -> Result<PerturbationWeights> {
    let mv = draw_move(w.as_slice(), cfg, rng);
    let mut raw = w.as_slice().to_vec();
    for (&i, &v) in mv.idx.iter().zip(&mv.new) {
        raw[i] = v;
    }
    PerturbationWeights::scaled_to(raw, p_max)
}

/// Current state of a run with the channel output cached so that a move
/// touching `b` bins costs `O(b MN)` instead of `O((MN)^2)`.
struct State<'a> {
    obj: &'a Objective,
    w: Vec<Complex64>,
    energy: f64,
    /// `H_eff (w (.) U s)`.
    y: Vec<Complex64>,
    value: f64,
    accepted: usize,
}

impl<'a> State<'a> {
    fn new(obj: &'a Objective, w: &PerturbationWeights) -> Result<Self> {
        let t = obj.terms(w)?;
        let x = obj.grid(w.as_slice());
        Ok(Self {
            obj,
            w: w.as_slice().to_vec(),
            energy: w.trace_power(),
            y: if obj.beta < 1.0 { obj.channel_output(&x) } else { Vec::new() },
            value: t.value,
            accepted: 0,
        })
    }

    /// Weights, channel output and value after applying `mv`.
    fn trial(&self, mv: &Move) -> Option<(Vec<Complex64>, Vec<Complex64>, f64, f64)> {
        let obj = self.obj;
        let mut energy = self.energy;
        for (&i, v) in mv.idx.iter().zip(&mv.new) {
            energy += v.norm_sqr() - self.w[i].norm_sqr();
        }
        if !(energy > 0.0) || !energy.is_finite() {
            return None;
        }
        let c = (obj.p_max / energy).sqrt();
        let mut w: Vec<Complex64> = self.w.iter().map(|v| v * c).collect();
        for (&i, v) in mv.idx.iter().zip(&mv.new) {
            w[i] = v * c;
        }
        let mut y = Vec::new();
        if obj.beta < 1.0 {
            y = self.y.clone();
            for (&i, v) in mv.idx.iter().zip(&mv.new) {
                let d = (v - self.w[i]) * obj.us[i];
                let col = obj.h_eff.column(i);
                y.iter_mut().zip(col.iter()).for_each(|(a, h)| *a += h * d);
            }
            y.iter_mut().for_each(|a| *a *= c);
        }
        let x = obj.grid(&w);
        let t = obj.combine(&x, || obj.mismatch_from_output(&y));
        Some((w, y, obj.p_max, t.value))
    }

    fn accept(&mut self, w: Vec<Complex64>, y: Vec<Complex64>, energy: f64, value: f64) {
        self.w = w;
        self.y = y;
        self.energy = energy;
        self.value = value;
        self.accepted += 1;
        if self.accepted.is_multiple_of(REFRESH_EVERY) {
            self.refresh();
        }
    }

    fn refresh(&mut self) {
        let x = self.obj.grid(&self.w);
        self.energy = self.w.iter().map(|v| v.norm_sqr()).sum();
        if self.obj.beta < 1.0 {
            self.y = self.obj.channel_output(&x);
        }
        self.value = self.obj.combine(&x, || self.obj.mismatch_from_output(&self.y)).value;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub temperature: f64,
    pub current: f64,
    pub best: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaOutcome {
    pub best: PerturbationWeights,
    pub best_value: f64,
    pub initial_value: f64,
    /// One point per temperature level.
    pub trace: Vec<TracePoint>,
    /// Set when `max_evals` ran out before the schedule reached its floor.
    pub budget_exhausted: bool,
    pub evals: usize,
    pub initial_temp: f64,
}

/// Temperature at which a typical worsening move from the start point is
/// accepted with probability 0.8.
fn calibrate_temperature(state: &State<'_>, cfg: &SaConfig, rng: &mut SimRng) -> (f64, usize) {
    const SAMPLES: usize = 100;
    let mut worse = Vec::new();
    for _ in 0..SAMPLES {
        let mv = draw_move(&state.w, cfg, rng);
        if let Some((_, _, _, v)) = state.trial(&mv) {
            let d = v - state.value;
            if d < 0.0 && d.is_finite() {
                worse.push(-d);
            }
        }
    }
    let t = if worse.is_empty() {
        1e-6 * state.value.abs().max(1.0)
    } else {
        worse.sort_by(f64::total_cmp);
        let median = worse[worse.len() / 2];
        median / -(0.8f64.ln())
    };
    (t, SAMPLES)
}

/// Metropolis search with geometric cooling, keeping the best state seen.
pub fn simulated_annealing(init: &PerturbationWeights, obj: &Objective, cfg: &SaConfig) -> Result<SaOutcome> {
    cfg.validate()?;
    let mut state = State::new(obj, init)?;
    let initial_value = state.value;
    let mut rng = rng::stream(cfg.seed, Purpose::Annealing, &[]);
    let (t0, mut evals) = match cfg.initial_temp {
        Some(t) => (t, 0),
        None => calibrate_temperature(&state, cfg, &mut rng),
    };
    let t_min = t0 * cfg.min_temp_ratio;
    let mut best_w = state.w.clone();
    let mut best_value = state.value;
    let mut trace = Vec::with_capacity(cfg.levels() + 1);
    let mut temp = t0;
    let mut exhausted = false;
    'outer: while temp >= t_min {
        for _ in 0..cfg.iters_per_temp {
            if evals >= cfg.max_evals {
                exhausted = true;
                break 'outer;
            }
            evals += 1;
            let mv = draw_move(&state.w, cfg, &mut rng);
            let Some((w, y, e, v)) = state.trial(&mv) else { continue };
            if !v.is_finite() {
                continue;
            }
            let delta = v - state.value;
            let u: f64 = rng.random();
            if delta >= 0.0 || u < (delta / temp).exp() {
                state.accept(w, y, e, v);
                if state.value > best_value {
                    best_value = state.value;
                    best_w.clone_from(&state.w);
                }
            }
        }
        trace.push(TracePoint { temperature: temp, current: state.value, best: best_value });
        temp *= cfg.cooling_rate;
    }
    if exhausted {
        trace.push(TracePoint { temperature: temp, current: state.value, best: best_value });
    }
    let best = PerturbationWeights::scaled_to(best_w, obj.p_max)?;
    // rescoring removes any drift accumulated by the incremental updates
    let best_value = evaluate_objective(&best, obj)?;
    Ok(SaOutcome {
        best,
        best_value,
        initial_value,
        trace,
        budget_exhausted: exhausted,
        evals,
        initial_temp: t0,
    })
}

/// Builds the objective for one data sequence and anneals from all-ones.
pub fn optimize_for_sequence(
    scene: &SensingScene,
    h_eff: &DMatrix<Complex64>,
    s: &SymbolVector,
    beta: f64,
    eve: &EveAssumption,
    cfg: &SaConfig,
) -> Result<SaOutcome> {
    let obj = Objective::for_scene(scene, h_eff.clone(), s, beta, eve)?;
    simulated_annealing(&PerturbationWeights::ones(scene.dims.len()), &obj, cfg)
}

/// Eve's default-filter surrogate KLD for the weights `w` (used to compare
/// designs against the all-ones baseline).
pub fn eve_surrogate(obj: &Objective, w: &PerturbationWeights) -> f64 {
    obj.eve.surrogate(&obj.grid(w.as_slice()), Side::Eve)
}

pub fn bs_surrogate(obj: &Objective, w: &PerturbationWeights) -> f64 {
    obj.bs.surrogate(&obj.grid(w.as_slice()), Side::Bs)
}

/// Targets used for the optimizer's Eve term; re-exported for callers that
/// want to show what an agnostic run assumed.
pub fn assumed_eve_targets<'a>(scene: &'a SensingScene, eve: &'a EveAssumption) -> &'a [Target] {
    match eve.mode {
        EveMode::Aware => &scene.targets.eve,
        EveMode::Agnostic => &eve.eve_targets,
    }
}
