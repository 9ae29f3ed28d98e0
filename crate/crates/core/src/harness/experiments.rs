//! Monte Carlo experiment runners. Work items (sweep point x sequence) run
//! on the rayon pool; every random draw is keyed by its position in the
//! sweep, so results do not depend on scheduling or thread count.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::RngCore;
use rayon::prelude::*;

use super::config::{ladder_label, ScenarioConfig};
use super::output::{ExperimentResult, Value};
use crate::channel::comm_effective_channel_with;
use crate::detection::{count_detections, frame_rd_map, Chain, PdEstimate, SensingScene};
use crate::error::Result;
use crate::metrics::{
    achievable_rate, comm_mismatch, detection_stats_with, kld_exact, kld_surrogate, pslr, InterferenceModel, Side,
};
use crate::optimizer::{optimize_for_sequence, EveMode, SaConfig};
use crate::receiver::{filter_response, FilterKind};
use crate::rng::{self, complex_normal, Purpose};
use crate::waveform::{draw_symbols_with, modulate, PerturbationWeights, SymbolVector, TfGrid, WaveformKind};

/// Receiver chains reported by the detection sweep.
pub const SWEEP_CHAINS: [Chain; 5] = [
    Chain { side: Side::Bs, filter: FilterKind::Lmmse },
    Chain { side: Side::Eve, filter: FilterKind::Mf },
    Chain { side: Side::Eve, filter: FilterKind::Zf },
    Chain { side: Side::Eve, filter: FilterKind::Lmmse },
    Chain { side: Side::Eve, filter: FilterKind::Rf },
];

pub const DETECTION_COLUMNS: [&str; 13] = [
    "snr_db",
    "beta",
    "waveform",
    "side",
    "filter",
    "secure",
    "pd",
    "pd_stderr",
    "kld_exact",
    "kld_surrogate",
    "rate_bits",
    "mismatch",
    "pslr_db",
];

fn waveform_tag(kind: WaveformKind) -> u64 {
    match kind {
        WaveformKind::Ofdm => 0,
        WaveformKind::Otfs => 1,
    }
}

/// Seed for an annealing run at a position in the sweep.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    rng::stream(seed, Purpose::Annealing, path).next_u64()
}

/// Communication channel of one waveform; fixed for the whole experiment.
pub fn comm_channel(cfg: &ScenarioConfig, kind: WaveformKind) -> Result<DMatrix<Complex64>> {
    let mut r = rng::stream(cfg.experiment.seed, Purpose::CommNlos, &[waveform_tag(kind)]);
    comm_effective_channel_with(&cfg.comm_spec(), kind, cfg.dims()?, &mut r)
}

/// The `i`-th data sequence. Shared across waveforms and sweep points.
pub fn sequence(cfg: &ScenarioConfig, i: u64) -> Result<SymbolVector> {
    let mut r = rng::stream(cfg.experiment.seed, Purpose::Symbols, &[u64::MAX, i]);
    let c = crate::waveform::Constellation::new(cfg.grid.constellation);
    draw_symbols_with(&c, cfg.dims()?.len(), &mut r)
}

/// `||z||^2` of the communication noise that accompanies sequence `i`.
fn comm_noise_energy(cfg: &ScenarioConfig, i: u64) -> Result<f64> {
    let mut r = rng::stream(cfg.experiment.seed, Purpose::CommNoise, &[i]);
    let var = cfg.comm_spec().noise_var;
    Ok((0..cfg.dims()?.len()).map(|_| complex_normal(&mut r, var).norm_sqr()).sum())
}

fn sa_for(cfg: &ScenarioConfig, path: &[u64]) -> SaConfig {
    SaConfig { seed: derive_seed(cfg.experiment.seed, path), ..cfg.optimizer.sa }
}

/// Closed-form and Monte Carlo figures of one design for one sequence.
#[derive(Debug, Clone)]
struct DesignEval {
    counts: Vec<PdEstimate>,
    kld_exact: Vec<f64>,
    kld_surrogate: Vec<f64>,
    pslr: Vec<f64>,
    mismatch: f64,
    rate: f64,
}

struct Context<'a> {
    cfg: &'a ScenarioConfig,
    scene: &'a SensingScene,
    h_eff: &'a DMatrix<Complex64>,
    chains: &'a [Chain],
    frame_seed: u64,
}

impl Context<'_> {
    fn evaluate(&self, i: u64, s: &SymbolVector, w: &PerturbationWeights) -> Result<DesignEval> {
        let scene = self.scene;
        let x = modulate(s, scene.kind, scene.dims, w)?;
        let frames = self.cfg.experiment.frames_per_sequence as u64;
        let counts = count_detections(scene, &x, self.chains, frames, self.frame_seed, i * frames)?;
        let mut kld_e = Vec::with_capacity(self.chains.len());
        let mut kld_s = Vec::with_capacity(self.chains.len());
        let mut pslrs = Vec::with_capacity(self.chains.len());
        for c in self.chains {
            let noise = scene.noise(c.side);
            let st = detection_stats_with(
                &x,
                c.side.targets(&scene.targets),
                scene.targets.desired,
                c.side,
                c.filter,
                noise,
                InterferenceModel::Isl,
            )?;
            kld_e.push(kld_exact(&st)?);
            kld_s.push(kld_surrogate(&st)?);
            pslrs.push(pslr(&filter_response(&x, c.filter, noise)?, (0, 0))?);
        }
        let mismatch = comm_mismatch(self.h_eff, w, scene.kind, scene.dims, s)?;
        let rate = achievable_rate(mismatch, s.energy(), comm_noise_energy(self.cfg, i)?)?;
        Ok(DesignEval { counts, kld_exact: kld_e, kld_surrogate: kld_s, pslr: pslrs, mismatch, rate })
    }
}

/// Secure weights for every sequence of one sweep point, either one SA run
/// per sequence or one shared run on the first sequence.
fn secure_weights(
    cfg: &ScenarioConfig,
    scene: &SensingScene,
    h_eff: &DMatrix<Complex64>,
    seqs: &[SymbolVector],
    beta: f64,
    path: &[u64],
) -> Result<Vec<PerturbationWeights>> {
    let eve = cfg.eve_assumption(scene)?;
    if cfg.experiment.amortized {
        let mut p = path.to_vec();
        p.push(0);
        let out = optimize_for_sequence(scene, h_eff, &seqs[0], beta, &eve, &sa_for(cfg, &p))?;
        return Ok(vec![out.best; seqs.len()]);
    }
    seqs.par_iter()
        .enumerate()
        .map(|(i, s)| {
            let mut p = path.to_vec();
            p.push(i as u64);
            Ok(optimize_for_sequence(scene, h_eff, s, beta, &eve, &sa_for(cfg, &p))?.best)
        })
        .collect()
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

fn base_metadata(res: &mut ExperimentResult, cfg: &ScenarioConfig) -> Result<()> {
    let sa = &cfg.optimizer.sa;
    res.meta("experiment", res.id.clone());
    res.meta("build", format!("{}-{}", env!("CARGO_PKG_VERSION"), config_id(cfg)?));
    res.meta("seed", cfg.experiment.seed);
    res.meta("sequences", cfg.experiment.sequences);
    res.meta("frames_per_sequence", cfg.experiment.frames_per_sequence);
    res.meta("optimization", if cfg.experiment.amortized { "amortized" } else { "per-sequence" });
    res.meta(
        "sa_budget",
        format!(
            "levels={} iters_per_temp={} cooling={} max_evals={} batch={}",
            sa.levels(),
            sa.iters_per_temp,
            sa.cooling_rate,
            sa.max_evals,
            sa.move_batch
        ),
    );
    res.meta(
        "cfar",
        format!(
            "guard={} training={} threshold_db={} wrap={} nt={}",
            cfg.cfar.guard_cells,
            cfg.cfar.training_cells,
            cfg.cfar.threshold_db,
            cfg.cfar.wrap,
            cfg.cfar.training_count()
        ),
    );
    res.meta("grid", format!("{}x{} {}", cfg.grid.subcarriers, cfg.grid.time_slots, cfg.grid.constellation));
    res.meta("eve_mode", format!("{:?}", cfg.eve.mode).to_lowercase());
    res.meta("eve_reference", format!("{:?}", cfg.eve.reference).to_lowercase());
    Ok(())
}

/// Short content hash of the configuration, used as a build/provenance id.
pub fn config_id(cfg: &ScenarioConfig) -> Result<String> {
    let text = cfg.to_toml_string()?;
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in text.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    Ok(format!("{h:016x}"))
}

/// Rows of the detection sweep for one configuration (no metadata).
fn detection_rows(cfg: &ScenarioConfig, prefix: &[Value]) -> Result<Vec<Vec<Value>>> {
    let n = cfg.experiment.sequences;
    let seqs: Vec<SymbolVector> = (0..n as u64).map(|i| sequence(cfg, i)).collect::<Result<_>>()?;
    let beta = cfg.optimizer.beta;
    let mut rows = Vec::new();
    for &kind in &cfg.experiment.waveforms {
        let h_eff = comm_channel(cfg, kind)?;
        let tag = waveform_tag(kind);
        for (si, &snr) in cfg.sensing.target_snr_db.iter().enumerate() {
            let scene = cfg.scene(kind, snr)?;
            let secure = secure_weights(cfg, &scene, &h_eff, &seqs, beta, &[1, tag, si as u64])?;
            let ctx = Context {
                cfg,
                scene: &scene,
                h_eff: &h_eff,
                chains: &SWEEP_CHAINS,
                frame_seed: derive_seed(cfg.experiment.seed, &[2, tag]),
            };
            let ones = PerturbationWeights::ones(scene.dims.len());
            let evals: Vec<[DesignEval; 2]> = (0..n)
                .into_par_iter()
                .map(|i| Ok([ctx.evaluate(i as u64, &seqs[i], &ones)?, ctx.evaluate(i as u64, &seqs[i], &secure[i])?]))
                .collect::<Result<_>>()?;
            for design in 0..2 {
                for (ci, c) in SWEEP_CHAINS.iter().enumerate() {
                    let pd = evals.iter().map(|e| e[design].counts[ci]).fold(PdEstimate { detections: 0, trials: 0 }, PdEstimate::merge);
                    let mut row = prefix.to_vec();
                    row.extend([
                        Value::Float(snr),
                        Value::Float(if design == 1 { beta } else { f64::NAN }),
                        Value::Str(kind.to_string()),
                        Value::Str(c.side.to_string()),
                        Value::Str(c.filter.to_string()),
                        Value::Bool(design == 1),
                        Value::Float(pd.pd()),
                        Value::Float(pd.stderr()),
                        Value::Float(mean(evals.iter().map(|e| e[design].kld_exact[ci]))),
                        Value::Float(mean(evals.iter().map(|e| e[design].kld_surrogate[ci]))),
                        Value::Float(mean(evals.iter().map(|e| e[design].rate))),
                        Value::Float(mean(evals.iter().map(|e| e[design].mismatch))),
                        Value::Float(mean(evals.iter().map(|e| e[design].pslr[ci]))),
                    ]);
                    rows.push(row);
                }
            }
        }
    }
    Ok(rows)
}

/// Detection probability and KLD against target SNR for BS and Eve, with
/// and without the security design.
pub fn run_detection_sweep(cfg: &ScenarioConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let mut res = ExperimentResult::new("detection-sweep", &DETECTION_COLUMNS);
    base_metadata(&mut res, cfg)?;
    res.meta("beta", cfg.optimizer.beta);
    res.meta("unintended_coeff_range_db", ladder_label(cfg.sensing.unintended_coeff_range_db));
    for r in detection_rows(cfg, &[])? {
        res.push(r)?;
    }
    Ok(res)
}

/// The detection-sweep protocol once with Eve's true parameters and once
/// with the configured stand-ins.
pub fn run_eve_mode_comparison(cfg: &ScenarioConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let mut cols = vec!["eve_mode"];
    cols.extend(DETECTION_COLUMNS);
    let mut res = ExperimentResult::new("eve-compare", &cols);
    base_metadata(&mut res, cfg)?;
    res.meta(
        "surrogate",
        format!(
            "clutter={} noise_offset_db={}",
            ladder_label(cfg.eve.surrogate_unintended_coeff_range_db),
            cfg.eve.surrogate_noise_offset_db
        ),
    );
    for mode in [EveMode::Aware, EveMode::Agnostic] {
        let mut c = cfg.clone();
        c.eve.mode = mode;
        let label = format!("{mode:?}").to_lowercase();
        for r in detection_rows(&c, &[Value::Str(label)])? {
            res.push(r)?;
        }
    }
    Ok(res)
}

pub const TRADEOFF_COLUMNS: [&str; 13] = [
    "clutter_db",
    "waveform",
    "beta",
    "secure",
    "pd_bs",
    "pd_bs_stderr",
    "pd_eve",
    "pd_eve_stderr",
    "pd_gap",
    "pd_gap_stderr",
    "rate_bits",
    "rate_stderr",
    "mismatch",
];

/// Pd of BS and Eve and the average rate against beta, for each clutter
/// ladder.
pub fn run_tradeoff_sweep(cfg: &ScenarioConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let mut res = ExperimentResult::new("tradeoff-sweep", &TRADEOFF_COLUMNS);
    base_metadata(&mut res, cfg)?;
    let snr = cfg.sensing.target_snr_db[0];
    res.meta("target_snr_db", snr);
    let n = cfg.experiment.sequences;
    let seqs: Vec<SymbolVector> = (0..n as u64).map(|i| sequence(cfg, i)).collect::<Result<_>>()?;
    let chains = [Chain::BS, Chain::EVE_MF];
    for &kind in &cfg.experiment.waveforms {
        let h_eff = comm_channel(cfg, kind)?;
        let tag = waveform_tag(kind);
        for (ri, &range) in cfg.tradeoff.clutter_ranges_db.iter().enumerate() {
            let scene = cfg.scene_with(kind, snr, range)?;
            let ctx = Context {
                cfg,
                scene: &scene,
                h_eff: &h_eff,
                chains: &chains,
                frame_seed: derive_seed(cfg.experiment.seed, &[4, tag, ri as u64]),
            };
            let ones = PerturbationWeights::ones(scene.dims.len());
            let mut designs: Vec<(f64, bool, Vec<PerturbationWeights>)> = vec![(f64::NAN, false, vec![ones; n])];
            for &beta in &cfg.tradeoff.betas {
                // same annealing seeds for every beta: only the objective changes
                designs.push((beta, true, secure_weights(cfg, &scene, &h_eff, &seqs, beta, &[3, tag, ri as u64])?));
            }
            for (beta, secure, ws) in designs {
                let evals: Vec<DesignEval> = (0..n)
                    .into_par_iter()
                    .map(|i| ctx.evaluate(i as u64, &seqs[i], &ws[i]))
                    .collect::<Result<_>>()?;
                let merge = |ci: usize| {
                    evals.iter().map(|e| e.counts[ci]).fold(PdEstimate { detections: 0, trials: 0 }, PdEstimate::merge)
                };
                let (bs, eve) = (merge(0), merge(1));
                let rates: Vec<f64> = evals.iter().map(|e| e.rate).collect();
                let rate = mean(rates.iter().copied());
                let rate_se = if n > 1 {
                    (rates.iter().map(|r| (r - rate).powi(2)).sum::<f64>() / ((n - 1) * n) as f64).sqrt()
                } else {
                    0.0
                };
                res.push(vec![
                    Value::Str(ladder_label(range)),
                    Value::Str(kind.to_string()),
                    Value::Float(beta),
                    Value::Bool(secure),
                    Value::Float(bs.pd()),
                    Value::Float(bs.stderr()),
                    Value::Float(eve.pd()),
                    Value::Float(eve.stderr()),
                    Value::Float(bs.pd() - eve.pd()),
                    Value::Float((bs.stderr().powi(2) + eve.stderr().powi(2)).sqrt()),
                    Value::Float(rate),
                    Value::Float(rate_se),
                    Value::Float(mean(evals.iter().map(|e| e.mismatch))),
                ])?;
            }
        }
    }
    Ok(res)
}

pub const CASE_STUDY_COLUMNS: [&str; 8] = ["record", "waveform", "beta", "side", "map", "l", "k", "value"];

/// RD maps, PSLRs and TF power of one sequence for each beta. `pslr` rows
/// hold dB values; `rd` rows hold linear bin powers; `tf` rows hold the
/// per-bin weight power (`map = weight`) and transmit power (`map = signal`).
pub fn run_case_study(cfg: &ScenarioConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let mut res = ExperimentResult::new("case-study", &CASE_STUDY_COLUMNS);
    base_metadata(&mut res, cfg)?;
    let snr = cfg.sensing.target_snr_db[cfg.case_study.snr_index];
    res.meta("target_snr_db", snr);
    let s = sequence(cfg, 0)?;
    let frame_seed = derive_seed(cfg.experiment.seed, &[6]);
    for &kind in &cfg.experiment.waveforms {
        let h_eff = comm_channel(cfg, kind)?;
        let scene = cfg.scene(kind, snr)?;
        let eve = cfg.eve_assumption(&scene)?;
        let designs: Vec<(f64, PerturbationWeights)> = cfg
            .case_study
            .betas
            .par_iter()
            .enumerate()
            .map(|(bi, &beta)| {
                let sa = sa_for(cfg, &[5, waveform_tag(kind), bi as u64]);
                Ok((beta, optimize_for_sequence(&scene, &h_eff, &s, beta, &eve, &sa)?.best))
            })
            .collect::<Result<_>>()?;
        for (beta, w) in designs {
            let x = modulate(&s, kind, scene.dims, &w)?;
            let mut push = |record: &str, side: &str, map: &str, l: usize, k: usize, v: f64| {
                res.push(vec![
                    record.into(),
                    kind.to_string().into(),
                    beta.into(),
                    side.into(),
                    map.into(),
                    l.into(),
                    k.into(),
                    v.into(),
                ])
            };
            for chain in [Chain::BS, Chain::EVE_MF] {
                let side = chain.side.to_string();
                let noise = scene.noise(chain.side);
                let desired = chain.side.targets(&scene.targets)[scene.targets.desired];
                let response = filter_response(&x, chain.filter, noise)?;
                let frame = frame_rd_map(&scene, &x, chain, frame_seed, 0)?;
                push("pslr", &side, "response", 0, 0, pslr(&response, (0, 0))?)?;
                push("pslr", &side, "scene", desired.l, desired.k, pslr(&frame, (desired.l, desired.k))?)?;
                for (map, rd) in [("response", &response), ("scene", &frame)] {
                    let d = rd.dims();
                    for k in 0..d.n {
                        for l in 0..d.m {
                            push("rd", &side, map, l, k, rd.get(l, k).norm_sqr())?;
                        }
                    }
                }
            }
            let d = scene.dims;
            for k in 0..d.n {
                for l in 0..d.m {
                    let i = d.index(l, k);
                    push("tf", "tx", "weight", l, k, w.as_slice()[i].norm_sqr())?;
                    push("tf", "tx", "signal", l, k, x.as_slice()[i].norm_sqr())?;
                }
            }
        }
    }
    Ok(res)
}

/// Transmit grid of a design, exposed for callers that post-process maps.
pub fn design_grid(cfg: &ScenarioConfig, kind: WaveformKind, s: &SymbolVector, w: &PerturbationWeights) -> Result<TfGrid> {
    modulate(s, kind, cfg.dims()?, w)
}
