#![allow(dead_code)]

use quadinv_core::{FirTransferMatrix, Matrix, Pattern};
use rand::Rng;
use rand_distr::StandardNormal;

pub fn gaussian<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn uniform<R: Rng>(rng: &mut R, rows: usize, cols: usize, lo: f64, hi: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(lo..hi))
}

pub fn random_pattern<R: Rng>(rng: &mut R, rows: usize, cols: usize, density: f64) -> Pattern {
    let entries = (0..rows * cols).map(|_| rng.random_bool(density)).collect();
    Pattern::new(rows, cols, entries).unwrap()
}

/// Positive entries in `[0.5, 1.5)` on the pattern, zero elsewhere.
pub fn numeric_on<R: Rng>(rng: &mut R, p: &Pattern) -> Matrix {
    Matrix::from_fn(p.rows(), p.cols(), |i, j| {
        if p.get(i, j) {
            rng.random_range(0.5..1.5)
        } else {
            0.0
        }
    })
}

#[allow(clippy::too_many_arguments)]
/// Gaussian taps scaled by `scale * decay^k` on lags `first..=last`, zero up to `horizon`.
pub fn random_fir<R: Rng>(
    rng: &mut R,
    rows: usize,
    cols: usize,
    first: usize,
    last: usize,
    horizon: usize,
    scale: f64,
    decay: f64,
) -> FirTransferMatrix {
    let taps = (0..=horizon.max(last))
        .map(|k| {
            if k >= first && k <= last {
                gaussian(rng, rows, cols) * (scale * decay.powi(k as i32))
            } else {
                Matrix::zeros(rows, cols)
            }
        })
        .collect();
    FirTransferMatrix::new(taps).unwrap()
}

/// Largest tap magnitude of `x` on lags `0..=horizon`.
pub fn max_abs_tap(x: &FirTransferMatrix, horizon: usize) -> f64 {
    x.taps()
        .iter()
        .take(horizon + 1)
        .map(|t| t.amax())
        .fold(0.0, f64::max)
}

/// Identity-dominated block (`I` padded with zeros at lag 0) plus small
/// random dynamics; left/right invertible with a well-behaved inverse.
pub fn dominant_fir<R: Rng>(
    rng: &mut R,
    rows: usize,
    cols: usize,
    horizon: usize,
) -> FirTransferMatrix {
    let mut taps = random_fir(rng, rows, cols, 0, 2, horizon, 0.3, 0.5).into_taps();
    for i in 0..rows.min(cols) {
        taps[0][(i, i)] += 1.0;
    }
    FirTransferMatrix::new(taps).unwrap()
}
