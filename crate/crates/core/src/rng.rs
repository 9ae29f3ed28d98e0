//! Reproducible random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 generator keyed by a
//! user seed plus a path of indices (experiment point, trial, purpose). Two
//! different paths never share a stream, so Monte Carlo work items can run in
//! any order on any thread and still produce identical numbers.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type SimRng = ChaCha8Rng;

/// Named purposes, mixed into the stream key so that e.g. the BS noise and
/// Eve noise of the same trial are independent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Purpose {
    Symbols = 1,
    CommNlos = 2,
    CommNoise = 3,
    TargetAlphas = 4,
    BsNoise = 5,
    EveNoise = 6,
    EveDirect = 7,
    Annealing = 8,
    Geometry = 9,
    Misc = 10,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a generator from `seed` and an index path.
pub fn stream(seed: u64, purpose: Purpose, path: &[u64]) -> SimRng {
    let mut key = splitmix64(seed ^ 0x5EED_0000_0000_0000);
    key = splitmix64(key ^ purpose as u64);
    for &p in path {
        key = splitmix64(key ^ p);
    }
    ChaCha8Rng::seed_from_u64(key)
}

/// Generator for a bare seed, used by the single-call operations.
pub fn seeded(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One draw from CN(0, variance).
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let scale = (0.5 * variance).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * scale, im * scale)
}

pub fn complex_normal_vec<R: Rng + ?Sized>(rng: &mut R, len: usize, variance: f64) -> Vec<Complex64> {
    (0..len).map(|_| complex_normal(rng, variance)).collect()
}
