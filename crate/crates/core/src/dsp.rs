//! Unitary DFTs along the two axes of a column-major M x N grid
//! (index `n * M + m`).

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

type PlanCache = (FftPlanner<f64>, HashMap<(usize, bool), Arc<dyn Fft<f64>>>);

thread_local! {
    static PLANS: RefCell<PlanCache> =
        RefCell::new((FftPlanner::new(), HashMap::new()));
}

fn plan(len: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    let forward = direction == FftDirection::Forward;
    PLANS.with(|cell| {
        let mut guard = cell.borrow_mut();
        let (planner, cache) = &mut *guard;
        cache
            .entry((len, forward))
            .or_insert_with(|| planner.plan_fft(len, direction))
            .clone()
    })
}

/// Direction of the transform applied along one axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Dir {
    /// `e^{-j 2 pi ...}`, i.e. multiplication by `F`.
    Forward,
    /// `e^{+j 2 pi ...}`, i.e. multiplication by `F^H`.
    Inverse,
}

impl From<Dir> for FftDirection {
    fn from(d: Dir) -> Self {
        match d {
            Dir::Forward => FftDirection::Forward,
            Dir::Inverse => FftDirection::Inverse,
        }
    }
}

/// Applies a unitary DFT along `m` (every column) and along `n` (every row)
/// in place. The result is `D_M X D_N^T` with `D` either `F` or `F^H`.
pub(crate) fn transform_2d(data: &mut [Complex64], m: usize, n: usize, along_m: Dir, along_n: Dir) {
    debug_assert_eq!(data.len(), m * n);
    if m > 1 {
        let fft = plan(m, along_m.into());
        fft.process(data);
    }
    if n > 1 {
        let fft = plan(n, along_n.into());
        let mut row = vec![Complex64::new(0.0, 0.0); n];
        for mi in 0..m {
            for ni in 0..n {
                row[ni] = data[ni * m + mi];
            }
            fft.process(&mut row);
            for ni in 0..n {
                data[ni * m + mi] = row[ni];
            }
        }
    }
    let scale = 1.0 / ((m * n) as f64).sqrt();
    for v in data.iter_mut() {
        *v *= scale;
    }
}

/// Unitary DFT along `m` only (each column separately).
pub(crate) fn transform_columns(data: &mut [Complex64], m: usize, dir: Dir) {
    if m > 1 {
        let fft = plan(m, dir.into());
        fft.process(data);
    }
    let scale = 1.0 / (m as f64).sqrt();
    for v in data.iter_mut() {
        *v *= scale;
    }
}
