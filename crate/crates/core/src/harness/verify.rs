//! Fast built-in self-checks behind `isac-shield verify`. The full oracle
//! and property suites live in the crate's test targets; these are the
//! cheap subset worth running on an installed binary.

use num_complex::Complex64;
use rand::Rng;

use crate::detection::{analytic_pfa, ca_cfar, ca_cfar_power, CfarConfig};
use crate::metrics::{isl, isl_from_response, kld_exact_snr, kld_surrogate_snr, Side};
use crate::receiver::{filter_response, to_rd_map};
use crate::rng::{self, complex_normal_vec, Purpose};
use crate::waveform::{
    draw_symbols_with, modulate, Constellation, ConstellationKind, GridDims, PerturbationWeights, TfGrid, WaveformKind,
};
use crate::Result;

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

fn random_grid(dims: GridDims, r: &mut impl Rng) -> TfGrid {
    TfGrid::from_vec(dims, complex_normal_vec(r, dims.len(), 1.0)).expect("length matches")
}

fn isl_oracle(seed: u64) -> Result<Check> {
    let dims = GridDims::new(8, 8)?;
    let mut worst = 0.0f64;
    for t in 0..100 {
        let mut r = rng::stream(seed, Purpose::Misc, &[1, t]);
        let x = random_grid(dims, &mut r);
        for side in [Side::Bs, Side::Eve] {
            let nv = 0.1;
            let closed = isl(&x, side, nv);
            let brute = isl_from_response(&filter_response(&x, side.default_filter(), nv)?);
            worst = worst.max((closed - brute).abs() / brute.abs().max(f64::MIN_POSITIVE));
        }
    }
    Ok(check("isl closed form vs RD sidelobe sum", worst <= 1e-9, format!("max rel err {worst:.2e}")))
}

fn kld_bound() -> Check {
    let mut worst = f64::INFINITY;
    for i in 0..400 {
        let a = 10f64.powf(-3.0 + 6.0 * i as f64 / 399.0);
        worst = worst.min(kld_exact_snr(a) - kld_surrogate_snr(a));
    }
    check("surrogate KLD below exact KLD", worst >= -1e-9, format!("min exact-surrogate {worst:.2e}"))
}

fn cfar_calibration(seed: u64) -> Result<Check> {
    let dims = GridDims::new(8, 8)?;
    let cfg = CfarConfig { threshold_db: 5.0, ..CfarConfig::default() };
    let bins: Vec<(usize, usize)> = (0..8).flat_map(|k| (0..8).map(move |l| (l, k))).collect();
    let maps = 2000;
    let mut hits = 0u64;
    for t in 0..maps {
        let mut r = rng::stream(seed, Purpose::Misc, &[2, t]);
        let power: Vec<f64> = (0..dims.len()).map(|_| -r.random::<f64>().ln()).collect();
        hits += ca_cfar_power(&power, dims, &cfg, &bins)?.iter().filter(|o| o.detected).count() as u64;
    }
    let n = (maps * bins.len() as u64) as f64;
    let p = analytic_pfa(&cfg);
    let emp = hits as f64 / n;
    let se = (p * (1.0 - p) / n).sqrt();
    // cells within one map share training cells, so allow a wider band than iid
    let ok = (emp - p).abs() <= 6.0 * se;
    Ok(check("CA-CFAR false-alarm rate", ok, format!("empirical {emp:.5} analytic {p:.5} over {n} cells")))
}

fn identities(seed: u64) -> Result<Vec<Check>> {
    let dims = GridDims::new(8, 8)?;
    let mut r = rng::stream(seed, Purpose::Misc, &[3]);
    let s = draw_symbols_with(&Constellation::new(ConstellationKind::Qam16), dims.len(), &mut r)?;
    let ones = PerturbationWeights::ones(dims.len());
    let x = modulate(&s, WaveformKind::Ofdm, dims, &ones)?;
    let ofdm_identity = x.as_slice() == s.data();

    let g = random_grid(dims, &mut r);
    let parseval = (to_rd_map(&g).energy() - g.energy()).abs() <= 1e-9 * g.energy();

    let cm = TfGrid::from_fn(dims, |m, n| Complex64::from_polar(1.0, 0.3 * (m * n) as f64));
    let cm_isl = isl(&cm, Side::Eve, 0.0);

    let mut scaled = complex_normal_vec(&mut r, dims.len(), 1.0);
    scaled.iter_mut().for_each(|v| *v *= 7.0);
    let w = PerturbationWeights::scaled_to(scaled, dims.len() as f64)?;
    let norm_ok = (w.trace_power() - dims.len() as f64).abs() <= 1e-9 && ones.trace_power() == dims.len() as f64;

    let rd = to_rd_map(&g);
    let bins: Vec<(usize, usize)> = (0..8).flat_map(|k| (0..8).map(move |l| (l, k))).collect();
    let cfg = CfarConfig::default();
    let before: Vec<bool> = ca_cfar(&rd, &cfg, &bins)?.iter().map(|o| o.detected).collect();
    let mut big = rd.clone();
    big.scale(123.0);
    let after: Vec<bool> = ca_cfar(&big, &cfg, &bins)?.iter().map(|o| o.detected).collect();

    Ok(vec![
        check("OFDM modulation is the identity", ofdm_identity, String::new()),
        check("RD transform preserves energy", parseval, String::new()),
        check("constant-modulus grid has zero MF ISL", cm_isl.abs() <= 1e-12, format!("isl {cm_isl:.2e}")),
        check("weights normalize to MN", norm_ok, String::new()),
        check("KLD vanishes at zero SNR", kld_exact_snr(0.0) == 0.0 && kld_surrogate_snr(0.0) == 0.0, String::new()),
        check("CFAR decisions are scale invariant", before == after, String::new()),
    ])
}

/// Runs every self-check. An `Err` means a check could not run at all.
pub fn run_checks(seed: u64) -> Result<Vec<Check>> {
    let mut out = vec![isl_oracle(seed)?, kld_bound(), cfar_calibration(seed)?];
    out.extend(identities(seed)?);
    Ok(out)
}
