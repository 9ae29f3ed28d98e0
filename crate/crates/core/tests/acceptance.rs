//! End-to-end acceptance suite. Each test prints one `criterion N: PASS|FAIL`
//! line and fails when the criterion does not hold. Run with
//! `cargo test -p isac-shield-core --test acceptance -- --nocapture --test-threads 1`
//! to see the report lines in order.

use std::path::PathBuf;
use std::time::Instant;

use isac_shield::channel::{
    comm_effective_channel, rd_to_grid_amplitude, receive_sensing, sensing_channel_grid,
};
use isac_shield::detection::{analytic_pfa, ca_cfar, ca_cfar_power};
use isac_shield::harness::output::ExperimentResult;
use isac_shield::harness::{run_case_study, run_detection_sweep, run_tradeoff_sweep, ScenarioConfig};
use isac_shield::metrics::{
    achievable_rate, comm_mismatch, detection_stats_with, gap_of, isl, isl_from_response, kld_exact,
    kld_exact_snr, kld_surrogate, mainlobe_mean, pslr, stats_from_sums, InterferenceModel,
    ResponseSums,
};
use isac_shield::optimizer::{evaluate_objective, propose_move, Objective, SaConfig, SideModel};
use isac_shield::receiver::{estimate_channel, filter_response, per_bin_filter, to_rd_map};
use isac_shield::rng::{self, complex_normal, complex_normal_vec, Purpose};
use isac_shield::special::ln_i0;
use isac_shield::waveform::{draw_symbols, modulate, normalize_weights};
use isac_shield::{
    CfarConfig, CommChannelSpec, Complex64, Constellation, ConstellationKind, DetectionStats, FilterKind,
    GridDims, NlosScaling, PerturbationWeights, RdMap, Side, Target, TfGrid, WaveformKind,
};
use rand::Rng;

fn report(n: u32, ok: bool, detail: &str, started: Instant) {
    use std::io::Write;
    let status = if ok { "PASS" } else { "FAIL" };
    // straight to the handle so the line shows even when the harness captures output
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "criterion {n}: {status} ({:.1} s) {detail}", started.elapsed().as_secs_f64());
    let _ = out.flush();
}

fn config(name: &str) -> ScenarioConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    ScenarioConfig::load(&path).expect("shipped config parses")
}

fn dims(m: usize, n: usize) -> GridDims {
    GridDims::new(m, n).unwrap()
}

fn random_grid(d: GridDims, seed: u64, tag: u64) -> TfGrid {
    let mut r = rng::stream(seed, Purpose::Misc, &[tag]);
    TfGrid::from_vec(d, complex_normal_vec(&mut r, d.len(), 1.0)).unwrap()
}

fn str_col(res: &ExperimentResult, row: usize, col: &str) -> String {
    res.rows[row][res.column(col).unwrap()].to_string()
}

fn fl(res: &ExperimentResult, row: usize, col: &str) -> f64 {
    res.float(&res.rows[row], col).unwrap()
}

#[test]
fn criterion_1_isl_oracle() {
    let t = Instant::now();
    let d = dims(8, 8);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let x = random_grid(d, 11, i);
        let nv = 10f64.powf(-((i % 7) as f64) / 2.0);
        for side in [Side::Bs, Side::Eve] {
            let closed = isl(&x, side, nv);
            let brute = isl_from_response(&filter_response(&x, side.default_filter(), nv).unwrap());
            worst = worst.max((closed - brute).abs() / brute.abs());
        }
    }
    let ok = worst <= 1e-9 && t.elapsed().as_secs_f64() < 10.0;
    report(1, ok, &format!("max relative error {worst:.2e} over 200 grid/side pairs"), t);
    assert!(ok);
}

/// Per-trial desired-bin values with the desired path gain held at its
/// nominal (real) value, so the complex mean is the mainlobe term.
#[allow(clippy::too_many_arguments)]
fn desired_bin_samples(
    x: &TfGrid,
    targets: &[Target],
    desired: usize,
    include_desired: bool,
    filter: FilterKind,
    nv: f64,
    trials: u64,
    seed: u64,
) -> Vec<Complex64> {
    let d = x.dims();
    let g = per_bin_filter(x, filter, nv).unwrap();
    let (l, k) = (targets[desired].l, targets[desired].k);
    (0..trials)
        .map(|t| {
            let mut r = rng::stream(seed, Purpose::Misc, &[t]);
            let alphas: Vec<Complex64> = targets
                .iter()
                .enumerate()
                .map(|(p, tg)| {
                    let a = if p == desired {
                        if include_desired {
                            Complex64::new(tg.alpha0, 0.0)
                        } else {
                            Complex64::new(0.0, 0.0)
                        }
                    } else {
                        complex_normal(&mut r, tg.alpha0 * tg.alpha0)
                    };
                    rd_to_grid_amplitude(a, d)
                })
                .collect();
            let h = sensing_channel_grid(targets, &alphas, d).unwrap();
            let rx = receive_sensing(x, &h, nv, &mut r).unwrap();
            to_rd_map(&estimate_channel(&rx, &g).unwrap()).get(l, k)
        })
        .collect()
}

#[test]
fn criterion_2_statistical_model() {
    let t = Instant::now();
    let cfg = config("table1.toml");
    let trials = 10_000u64;
    let mut lines = Vec::new();
    let mut ok = true;
    for kind in [WaveformKind::Otfs, WaveformKind::Ofdm] {
        let scene = cfg.scene(kind, 10.0).unwrap();
        let c = Constellation::new(ConstellationKind::Qam16);
        let s = draw_symbols(&c, scene.dims.len(), 3).unwrap();
        let x = modulate(&s, kind, scene.dims, &PerturbationWeights::ones(scene.dims.len())).unwrap();
        for (side, filter) in [(Side::Bs, FilterKind::Lmmse), (Side::Eve, FilterKind::Mf)] {
            let targets = side.targets(&scene.targets);
            let desired = scene.targets.desired;
            let nv = scene.noise(side);
            let st = detection_stats_with(&x, targets, desired, side, filter, nv, InterferenceModel::Exact).unwrap();
            for h1 in [true, false] {
                let v = desired_bin_samples(&x, targets, desired, h1, filter, nv, trials, 40 + h1 as u64);
                let n = v.len() as f64;
                let mean = v.iter().sum::<Complex64>() / n;
                let var = v.iter().map(|z| (z - mean).norm_sqr()).sum::<f64>() / (n - 1.0);
                let mu = if h1 { st.mu } else { Complex64::new(0.0, 0.0) };
                // complex mean error ~ CN(0, s2/n); |z|^2 of a Gaussian bin has sd s2
                let mean_se = (st.sigma2 / n).sqrt();
                let var_se = st.sigma2 / n.sqrt();
                let mean_ok = (mean - mu).norm() <= 3.0 * mean_se;
                let var_ok = (var - st.sigma2).abs() <= 3.0 * var_se;
                ok &= mean_ok && var_ok;
                lines.push(format!(
                    "{kind}/{side}/{}: |mean-mu|={:.2}se var/sigma2={:.4}",
                    if h1 { "H1" } else { "H0" },
                    (mean - mu).norm() / mean_se,
                    var / st.sigma2
                ));
            }
        }
    }
    ok &= t.elapsed().as_secs_f64() < 120.0;
    report(2, ok, &lines.join("; "), t);
    assert!(ok);
}

fn kld_monte_carlo(a: f64, samples: usize, seed: u64) -> (f64, f64) {
    // unit noise, mu = sqrt(a)
    let mu = a.sqrt();
    let mut r = rng::stream(seed, Purpose::Misc, &[a.to_bits()]);
    let (mut s, mut s2) = (0.0, 0.0);
    for _ in 0..samples {
        let z = Complex64::new(mu, 0.0) + complex_normal(&mut r, 1.0);
        let v = ln_i0(2.0 * mu * z.norm()) - a;
        s += v;
        s2 += v * v;
    }
    let n = samples as f64;
    let mean = s / n;
    (mean, ((s2 / n - mean * mean) / n).sqrt())
}

#[test]
fn criterion_3_kld_bound_and_tightness() {
    let t = Instant::now();
    let mut bound_ok = true;
    let mut tight_ok = true;
    let mut worst_tight = (0.0, 0.0);
    for i in 0..20 {
        for j in 0..20 {
            let mu2 = 10f64.powf(-1.5 + 3.0 * i as f64 / 19.0);
            let sigma2 = 10f64.powf(-1.5 + 3.0 * j as f64 / 19.0);
            let st = DetectionStats { mu: Complex64::new(mu2.sqrt(), 0.0), sigma2, side: Side::Bs };
            let exact = kld_exact(&st).unwrap();
            let sur = kld_surrogate(&st).unwrap();
            bound_ok &= sur <= exact + 1e-12;
            if mu2 / sigma2 >= 1.0 {
                let rel = (exact - sur) / exact;
                if rel > worst_tight.1 {
                    worst_tight = (mu2 / sigma2, rel);
                }
                tight_ok &= rel <= 0.10;
            }
        }
    }
    let mut mc_ok = true;
    let mut mc = Vec::new();
    for (i, a) in [0.01, 0.3, 1.0, 10.0, 100.0].into_iter().enumerate() {
        let (m, se) = kld_monte_carlo(a, 1_000_000, 7 + i as u64);
        let exact = kld_exact_snr(a);
        mc_ok &= (m - exact).abs() <= 3.0 * se;
        mc.push(format!("a={a}: {:.2}se", (m - exact).abs() / se));
    }
    let ok = bound_ok && tight_ok && mc_ok && t.elapsed().as_secs_f64() < 60.0;
    report(
        3,
        ok,
        &format!(
            "bound {} | tightness {} (worst {:.1}% at a={:.3}) | Monte Carlo {} [{}]",
            if bound_ok { "ok" } else { "violated" },
            if tight_ok { "ok" } else { "violated" },
            100.0 * worst_tight.1,
            worst_tight.0,
            if mc_ok { "ok" } else { "off" },
            mc.join(", ")
        ),
        t,
    );
    assert!(ok);
}

#[test]
fn criterion_4_cfar_calibration() {
    let t = Instant::now();
    let d = dims(8, 8);
    let maps = 100_000u64;
    let mut ok = true;
    let mut lines = Vec::new();
    for threshold_db in [5.0, 10.0] {
        let cfg = CfarConfig { threshold_db, ..CfarConfig::default() };
        let mut hits = 0u64;
        for i in 0..maps {
            let mut r = rng::stream(threshold_db as u64, Purpose::Misc, &[i]);
            let power: Vec<f64> = (0..d.len()).map(|_| -(1.0 - r.random::<f64>()).ln()).collect();
            // one cell under test per map keeps the trials independent
            let cell = (i as usize % 8, (i as usize / 8) % 8);
            hits += ca_cfar_power(&power, d, &cfg, &[cell]).unwrap()[0].detected as u64;
        }
        let p = analytic_pfa(&cfg);
        let n = maps as f64;
        let emp = hits as f64 / n;
        let se = (p * (1.0 - p) / n).sqrt();
        ok &= (emp - p).abs() <= 3.0 * se;
        lines.push(format!("{threshold_db} dB: empirical {emp:.3e} analytic {p:.3e} ({:.2}se)", (emp - p).abs() / se));
    }
    ok &= t.elapsed().as_secs_f64() < 60.0;
    report(4, ok, &format!("{} cells per threshold; {}", maps, lines.join("; ")), t);
    assert!(ok);
}

/// Pd of one chain in a detection-sweep result.
fn pd_of(res: &ExperimentResult, snr: f64, kind: &str, side: &str, filter: &str, secure: bool) -> f64 {
    let i = res
        .rows
        .iter()
        .position(|r| {
            let f = |c: &str| r[res.column(c).unwrap()].to_string();
            f("snr_db").parse::<f64>().unwrap() == snr
                && f("waveform") == kind
                && f("side") == side
                && f("filter") == filter
                && f("secure") == secure.to_string()
        })
        .expect("row present");
    fl(res, i, "pd")
}

#[test]
fn criterion_5_security_effect() {
    let t = Instant::now();
    let cfg = config("table1.toml");
    let res = run_detection_sweep(&cfg).unwrap();
    let snrs = &cfg.sensing.target_snr_db;
    // interior points of the sweep
    let mid = &snrs[1..snrs.len() - 1];
    let mut ok = true;
    let mut lines = Vec::new();
    for (kind, reference_pd) in [("otfs", 0.794), ("ofdm", 0.943)] {
        let snr = *mid
            .iter()
            .min_by(|a, b| {
                let da = (pd_of(&res, **a, kind, "eve", "mf", false) - reference_pd).abs();
                let db = (pd_of(&res, **b, kind, "eve", "mf", false) - reference_pd).abs();
                da.total_cmp(&db)
            })
            .unwrap();
        let eve0 = pd_of(&res, snr, kind, "eve", "mf", false);
        let eve1 = pd_of(&res, snr, kind, "eve", "mf", true);
        let bs0 = pd_of(&res, snr, kind, "bs", "lmmse", false);
        let bs1 = pd_of(&res, snr, kind, "bs", "lmmse", true);
        let pass = eve0 - eve1 >= 0.25 && bs0 - bs1 <= 0.10;
        ok &= pass;
        lines.push(format!(
            "{kind} @ {snr} dB: Eve-MF {:.1}% -> {:.1}%, BS-LMMSE {:.1}% -> {:.1}%",
            100.0 * eve0,
            100.0 * eve1,
            100.0 * bs0,
            100.0 * bs1
        ));
    }
    ok &= t.elapsed().as_secs_f64() < 1800.0;
    report(5, ok, &lines.join("; "), t);
    assert!(ok);
}

#[test]
fn criterion_6_case_study() {
    let t = Instant::now();
    let cfg = config("case_study.toml");
    let res = run_case_study(&cfg).unwrap();
    let mn = (cfg.grid.subcarriers * cfg.grid.time_slots) as f64;
    let pslr_of = |kind: &str, beta: &str, side: &str| -> f64 {
        let i = (0..res.rows.len())
            .find(|&i| {
                str_col(&res, i, "record") == "pslr"
                    && str_col(&res, i, "map") == "response"
                    && str_col(&res, i, "waveform") == kind
                    && str_col(&res, i, "beta") == beta
                    && str_col(&res, i, "side") == side
            })
            .expect("pslr row");
        fl(&res, i, "value")
    };
    let mut ok = true;
    let mut lines = Vec::new();
    for kind in ["otfs", "ofdm"] {
        let (eve0, eve1) = (pslr_of(kind, "0", "eve"), pslr_of(kind, "1", "eve"));
        let (bs0, bs1) = (pslr_of(kind, "0", "bs"), pslr_of(kind, "1", "bs"));
        ok &= eve0 - eve1 >= 8.0 && bs1 >= 20.0;
        lines.push(format!(
            "{kind}: Eve {eve0:.2} -> {eve1:.2} dB (drop {:.2}), BS {bs0:.2} -> {bs1:.2} dB",
            eve0 - eve1
        ));
        for beta in ["0", "1"] {
            let total: f64 = (0..res.rows.len())
                .filter(|&i| {
                    str_col(&res, i, "record") == "tf"
                        && str_col(&res, i, "map") == "weight"
                        && str_col(&res, i, "waveform") == kind
                        && str_col(&res, i, "beta") == beta
                })
                .map(|i| fl(&res, i, "value"))
                .sum();
            // values carry 6 significant digits
            ok &= (total - mn).abs() <= 1e-3 * mn;
        }
    }
    ok &= t.elapsed().as_secs_f64() < 600.0;
    report(6, ok, &lines.join("; "), t);
    assert!(ok);
}

#[test]
fn criterion_7_tradeoff_monotonicity() {
    let t = Instant::now();
    let cfg = config("table2.toml");
    let res = run_tradeoff_sweep(&cfg).unwrap();
    let mut ok = true;
    let mut lines = Vec::new();
    for range in &cfg.tradeoff.clutter_ranges_db {
        let label = isac_shield::harness::config::ladder_label(*range);
        let rows: Vec<usize> = (0..res.rows.len())
            .filter(|&i| str_col(&res, i, "clutter_db") == label && str_col(&res, i, "secure") == "true")
            .collect();
        let f = |i: usize, c: &str| fl(&res, i, c);
        let mut gap_ok = true;
        let mut rate_ok = true;
        for w in rows.windows(2) {
            let slack = 2.0 * (f(w[0], "pd_gap_stderr").powi(2) + f(w[1], "pd_gap_stderr").powi(2)).sqrt();
            gap_ok &= f(w[1], "pd_gap") >= f(w[0], "pd_gap") - slack;
            rate_ok &= f(w[1], "rate_bits") <= f(w[0], "rate_bits");
        }
        ok &= gap_ok && rate_ok;
        let rates: Vec<String> = rows.iter().map(|&i| format!("{:.4}", f(i, "rate_bits"))).collect();
        let gaps: Vec<String> = rows.iter().map(|&i| format!("{:.3}", f(i, "pd_gap"))).collect();
        lines.push(format!(
            "{label}: gap [{}] {} rate [{}] {}",
            gaps.join(" "),
            if gap_ok { "ok" } else { "decreasing" },
            rates.join(" "),
            if rate_ok { "ok" } else { "increasing" }
        ));
    }
    report(7, ok, &lines.join("; "), t);
    assert!(ok);
}

#[test]
fn criterion_8_identities() {
    let t = Instant::now();
    let d = dims(8, 8);
    let c = Constellation::new(ConstellationKind::Qam16);
    let s = draw_symbols(&c, d.len(), 5).unwrap();
    let ones = PerturbationWeights::ones(d.len());
    let mut failed: Vec<&str> = Vec::new();
    let mut check = |name: &'static str, cond: bool| {
        if !cond {
            failed.push(name);
        }
    };

    // KLDs vanish at zero mean
    let zero = DetectionStats { mu: Complex64::new(0.0, 0.0), sigma2: 0.7, side: Side::Eve };
    check("zero KLD at mu = 0", kld_exact(&zero).unwrap() == 0.0 && kld_surrogate(&zero).unwrap() == 0.0);

    // constant-modulus grid: the MF response is an impulse
    let cm = TfGrid::from_fn(d, |m, n| Complex64::from_polar(1.0, 0.37 * (m + 3 * n) as f64));
    check("zero ISL for constant modulus", isl(&cm, Side::Eve, 0.0).abs() <= 1e-12);

    let x = modulate(&s, WaveformKind::Ofdm, d, &ones).unwrap();
    check("OFDM identity modulation", x.as_slice() == s.data());

    check("all-ones normalization", ones.trace_power() == d.len() as f64);
    let w = normalize_weights(vec![Complex64::new(3.0, -1.0); d.len()]).unwrap();
    check("normalized weights have trace MN", (w.trace_power() - d.len() as f64).abs() <= 1e-12);

    let g = random_grid(d, 3, 0);
    check("Parseval", (to_rd_map(&g).energy() - g.energy()).abs() <= 1e-12 * g.energy());

    // CFAR decisions are unchanged by a common scale factor
    let bins: Vec<(usize, usize)> = (0..8).flat_map(|k| (0..8).map(move |l| (l, k))).collect();
    let cfg = CfarConfig::default();
    let rd = to_rd_map(&g);
    let mut scaled = rd.clone();
    scaled.scale(41.0);
    let a: Vec<bool> = ca_cfar(&rd, &cfg, &bins).unwrap().iter().map(|o| o.detected).collect();
    let b: Vec<bool> = ca_cfar(&scaled, &cfg, &bins).unwrap().iter().map(|o| o.detected).collect();
    check("CFAR scale invariance", a == b);

    // spike and constant maps
    let mut spike = vec![1.0; d.len()];
    spike[d.index(2, 3)] = 100.0;
    check("CFAR spike detected", ca_cfar_power(&spike, d, &cfg, &[(2, 3)]).unwrap()[0].detected);
    let flat = vec![1.0; d.len()];
    check(
        "CFAR constant map silent",
        ca_cfar_power(&flat, d, &cfg, &bins).unwrap().iter().all(|o| !o.detected),
    );

    // single target at the origin: all-ones channel grid
    let h = sensing_channel_grid(&[Target::new(1.0, 0, 0)], &[Complex64::new(1.0, 0.0)], d).unwrap();
    check("origin target gives all-ones grid", h.as_slice().iter().all(|v| (v - 1.0).norm() <= 1e-15));

    // pure LoS, no shift: identity effective channel
    let spec = CommChannelSpec {
        alpha_c: Complex64::new(1.0, 0.0),
        kappa_c: f64::INFINITY,
        l_c: 0,
        k_c: 0,
        noise_var: 1e-3,
        nlos: NlosScaling::PerRow,
    };
    let heff = comm_effective_channel(&spec, WaveformKind::Ofdm, d, 1).unwrap();
    check("identity channel has zero mismatch", comm_mismatch(&heff, &ones, WaveformKind::Ofdm, d, &s).unwrap() <= 1e-20);
    check("rate example", (achievable_rate(0.0, 4.0, 4.0).unwrap() - 1.0).abs() <= 1e-15);

    // PSLR sentinels
    let mut imp = vec![Complex64::new(0.0, 0.0); d.len()];
    imp[0] = Complex64::new(1.0, 0.0);
    check("impulse PSLR capped", pslr(&RdMap::from_vec(d, imp.clone()).unwrap(), (0, 0)).unwrap() >= 300.0);
    imp[9] = Complex64::new(0.0, 1.0);
    check("two equal peaks give 0 dB", pslr(&RdMap::from_vec(d, imp).unwrap(), (0, 0)).unwrap().abs() <= 1e-12);

    check("identical sides give unit gap", gap_of(2.5, 2.5).value == 1.0);

    // objective endpoints
    let x = modulate(&s, WaveformKind::Otfs, d, &ones).unwrap();
    let bs = SideModel { alpha0: 8.0, clutter: 100.0, noise_var: 0.1 };
    let eve = SideModel { alpha0: 8.0, clutter: 100.0, noise_var: 0.1 };
    let o0 = Objective::new(0.0, WaveformKind::Otfs, d, &s, heff.clone(), bs, eve).unwrap();
    let o1 = Objective::new(1.0, WaveformKind::Otfs, d, &s, heff.clone(), bs, eve).unwrap();
    let mm = comm_mismatch(&heff, &ones, WaveformKind::Otfs, d, &s).unwrap();
    check("beta = 0 objective is -mismatch", evaluate_objective(&ones, &o0).unwrap() == -mm);
    let side_kld = |side: Side, m: SideModel| {
        let sums = ResponseSums::from_slice(x.as_slice(), side.default_filter(), m.noise_var).unwrap();
        kld_surrogate(&stats_from_sums(&sums, m.alpha0, m.clutter, m.noise_var, side)).unwrap()
    };
    let expect = gap_of(side_kld(Side::Bs, bs), side_kld(Side::Eve, eve)).value;
    let got = evaluate_objective(&ones, &o1).unwrap();
    check("beta = 1 objective is the KLD gap", (got - expect).abs() <= 1e-12 * expect.abs());

    // zero move scales leave the weights alone
    let still = SaConfig { move_scale_amp: 0.0, move_scale_phase: 0.0, ..SaConfig::default() };
    let mut r = rng::seeded(3);
    let moved = propose_move(&ones, &still, d.len() as f64, &mut r).unwrap();
    check("zero-scale move is a no-op", moved.as_slice() == ones.as_slice());

    let mu = mainlobe_mean(&x, 2.0, Side::Eve, 0.0);
    check("MF mainlobe of unit-power grid", (mu - Complex64::new(2.0 * x.energy() / 64.0, 0.0)).norm() <= 1e-12);

    let ok = failed.is_empty() && t.elapsed().as_secs_f64() < 30.0;
    report(8, ok, &if ok { "all identities hold".to_string() } else { format!("failed: {failed:?}") }, t);
    assert!(ok);
}

fn small(mut cfg: ScenarioConfig) -> ScenarioConfig {
    cfg.experiment.sequences = 3;
    cfg.experiment.frames_per_sequence = 4;
    cfg.optimizer.sa.max_evals = 3000;
    cfg
}

fn emit_bytes(res: &ExperimentResult, dir: &std::path::Path, name: &str) -> (Vec<u8>, Vec<u8>) {
    use isac_shield::harness::{emit_results, Format};
    let csv = dir.join(format!("{name}.csv"));
    let json = dir.join(format!("{name}.json"));
    emit_results(res, &csv, Format::Csv).unwrap();
    emit_results(res, &json, Format::Json).unwrap();
    (std::fs::read(csv).unwrap(), std::fs::read(json).unwrap())
}

#[test]
fn criterion_9_determinism() {
    let t = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    type Runner = fn(&ScenarioConfig) -> isac_shield::Result<ExperimentResult>;
    let runs: [(&str, Runner, ScenarioConfig); 4] = [
        ("detection-sweep", run_detection_sweep, small(config("table1.toml"))),
        ("case-study", run_case_study, config("case_study.toml")),
        ("tradeoff-sweep", run_tradeoff_sweep, small(config("table2.toml"))),
        ("eve-compare", isac_shield::harness::run_eve_mode_comparison, small(config("table1.toml"))),
    ];
    let mut ok = true;
    let mut differing = Vec::new();
    for (name, run, cfg) in &runs {
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = emit_bytes(&one.install(|| run(cfg)).unwrap(), dir.path(), &format!("{name}-a"));
        let b = emit_bytes(&four.install(|| run(cfg)).unwrap(), dir.path(), &format!("{name}-b"));
        if a != b {
            ok = false;
            differing.push(*name);
        }
    }
    report(
        9,
        ok,
        &if ok { "all four experiments byte-identical across reruns and thread counts".into() } else { format!("differs: {differing:?}") },
        t,
    );
    assert!(ok);
}
