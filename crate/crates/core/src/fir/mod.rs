//! Causal discrete-time LTI maps represented by their impulse-response taps on
//! an explicit truncation horizon.
//!
//! `X = [X(0), ..., X(N)]` acts as `(Xu)(t) = sum_{k <= min(t, N)} X(k) u(t - k)`.
//! Every operation takes an output horizon and is exact on the taps it returns.

mod inertness;
mod subspace;

pub use inertness::{inertness_check, Certification, InertnessOptions, InertnessReport};
pub use subspace::{fir_subspace_qi_check, project_onto_fir_subspace, FirSubspace};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{self, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FirJson", into = "FirJson")]
pub struct FirTransferMatrix {
    taps: Vec<Matrix>,
}

#[derive(Serialize, Deserialize)]
struct FirJson {
    horizon: usize,
    #[serde(with = "matrix::serde_rows_vec")]
    taps: Vec<Matrix>,
}

impl TryFrom<FirJson> for FirTransferMatrix {
    type Error = Error;
    fn try_from(j: FirJson) -> Result<Self> {
        if j.taps.len() != j.horizon + 1 {
            return Err(Error::Invalid(format!(
                "horizon {} needs {} taps, got {}",
                j.horizon,
                j.horizon + 1,
                j.taps.len()
            )));
        }
        FirTransferMatrix::new(j.taps)
    }
}

impl From<FirTransferMatrix> for FirJson {
    fn from(x: FirTransferMatrix) -> Self {
        FirJson {
            horizon: x.horizon(),
            taps: x.taps,
        }
    }
}

impl FirTransferMatrix {
    pub fn new(taps: Vec<Matrix>) -> Result<Self> {
        let first = taps
            .first()
            .ok_or_else(|| Error::Invalid("FIR system needs at least one tap".into()))?;
        let shape = first.shape();
        if let Some((k, bad)) = taps.iter().enumerate().find(|(_, t)| t.shape() != shape) {
            return Err(Error::dims(
                "FirTransferMatrix::new",
                format!(
                    "tap {k} is {}, tap 0 is {}x{}",
                    matrix::shape(bad),
                    shape.0,
                    shape.1
                ),
            ));
        }
        Ok(FirTransferMatrix { taps })
    }

    pub fn zeros(rows: usize, cols: usize, horizon: usize) -> Self {
        FirTransferMatrix {
            taps: vec![Matrix::zeros(rows, cols); horizon + 1],
        }
    }

    /// Identity at lag 0, zero elsewhere.
    pub fn identity(n: usize, horizon: usize) -> Self {
        let mut x = Self::zeros(n, n, horizon);
        x.taps[0] = Matrix::identity(n, n);
        x
    }

    /// A static gain as a single-tap system.
    pub fn constant(m: Matrix) -> Self {
        FirTransferMatrix { taps: vec![m] }
    }

    /// `m z^{-lag}` on the given horizon.
    pub fn delayed(m: Matrix, lag: usize, horizon: usize) -> Self {
        let mut x = Self::zeros(m.nrows(), m.ncols(), horizon.max(lag));
        x.taps[lag] = m;
        x
    }

    /// Scalar system from its taps.
    pub fn scalar(taps: &[f64]) -> Self {
        FirTransferMatrix {
            taps: taps
                .iter()
                .map(|&t| Matrix::from_element(1, 1, t))
                .collect(),
        }
    }

    pub fn horizon(&self) -> usize {
        self.taps.len() - 1
    }

    pub fn rows(&self) -> usize {
        self.taps[0].nrows()
    }

    pub fn cols(&self) -> usize {
        self.taps[0].ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.taps[0].shape()
    }

    pub fn taps(&self) -> &[Matrix] {
        &self.taps
    }

    pub fn tap(&self, k: usize) -> Option<&Matrix> {
        self.taps.get(k)
    }

    pub fn into_taps(self) -> Vec<Matrix> {
        self.taps
    }

    /// Truncates or zero-pads to the given horizon.
    pub fn with_horizon(&self, horizon: usize) -> Self {
        let (r, c) = self.shape();
        let taps = (0..=horizon)
            .map(|k| {
                self.taps
                    .get(k)
                    .cloned()
                    .unwrap_or_else(|| Matrix::zeros(r, c))
            })
            .collect();
        FirTransferMatrix { taps }
    }

    pub fn is_strictly_causal(&self) -> bool {
        self.taps[0].iter().all(|x| *x == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.taps.iter().all(|t| t.iter().all(|x| x.is_finite()))
    }

    pub fn scale(&self, c: f64) -> Self {
        FirTransferMatrix {
            taps: self.taps.iter().map(|t| t * c).collect(),
        }
    }

    /// Tap-wise sum on the longer of the two horizons.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with("FirTransferMatrix::add", other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with("FirTransferMatrix::sub", other, |a, b| a - b)
    }

    fn zip_with(
        &self,
        op: &'static str,
        other: &Self,
        f: impl Fn(&Matrix, &Matrix) -> Matrix,
    ) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(Error::dims(
                op,
                format!("{:?} vs {:?}", self.shape(), other.shape()),
            ));
        }
        let h = self.horizon().max(other.horizon());
        let (a, b) = (self.with_horizon(h), other.with_horizon(h));
        Ok(FirTransferMatrix {
            taps: a.taps.iter().zip(&b.taps).map(|(x, y)| f(x, y)).collect(),
        })
    }

    /// Largest entrywise difference over taps `0..=horizon` (missing taps are zero).
    pub fn max_tap_error(&self, other: &Self, horizon: usize) -> f64 {
        let (a, b) = (self.with_horizon(horizon), other.with_horizon(horizon));
        a.taps
            .iter()
            .zip(&b.taps)
            .map(|(x, y)| (x - y).amax())
            .fold(0.0, f64::max)
    }

    /// All taps concatenated, each in row-major order.
    pub fn flatten(&self) -> Vec<f64> {
        self.taps
            .iter()
            .flat_map(matrix::flatten_row_major)
            .collect()
    }

    /// Transfer matrix `sum_k X(k) e^{-i omega k}`.
    pub fn evaluate(&self, omega: f64) -> DMatrix<Complex64> {
        let (r, c) = self.shape();
        let mut out = DMatrix::<Complex64>::zeros(r, c);
        for (k, t) in self.taps.iter().enumerate() {
            let w = Complex64::from_polar(1.0, -omega * k as f64);
            out += t.map(|x| Complex64::new(x, 0.0)) * w;
        }
        out
    }
}

/// `(AB)(k) = sum_{j <= k} A(j) B(k - j)` for `k <= out_horizon`.
pub fn fir_mul(
    a: &FirTransferMatrix,
    b: &FirTransferMatrix,
    out_horizon: usize,
) -> Result<FirTransferMatrix> {
    if a.cols() != b.rows() {
        return Err(Error::dims(
            "fir_mul",
            format!("{:?} times {:?}", a.shape(), b.shape()),
        ));
    }
    let mut taps = vec![Matrix::zeros(a.rows(), b.cols()); out_horizon + 1];
    for (j, aj) in a.taps.iter().enumerate().take(out_horizon + 1) {
        if aj.iter().all(|x| *x == 0.0) {
            continue;
        }
        for (i, bi) in b.taps.iter().enumerate().take(out_horizon + 1 - j) {
            if bi.iter().all(|x| *x == 0.0) {
                continue;
            }
            taps[j + i] += aj * bi;
        }
    }
    Ok(FirTransferMatrix { taps })
}

/// `(I - X)^{-1}` on the horizon, by the recursion
/// `(I - X(0)) Y(0) = I`, `(I - X(0)) Y(k) = sum_{j=1..k} X(j) Y(k - j)`.
pub fn fir_causal_inverse(x: &FirTransferMatrix, out_horizon: usize) -> Result<FirTransferMatrix> {
    let (n, c) = x.shape();
    if n != c {
        return Err(Error::dims(
            "fir_causal_inverse",
            format!("X is {n}x{c}, must be square"),
        ));
    }
    let a0 = Matrix::identity(n, n) - &x.taps[0];
    let rcond = matrix::relative_min_singular(&a0);
    if rcond < crate::feedback::DEFAULT_COND_TOL {
        return Err(Error::Singular { rcond });
    }
    let lu = a0.lu();
    let mut taps: Vec<Matrix> = Vec::with_capacity(out_horizon + 1);
    taps.push(
        lu.solve(&Matrix::identity(n, n))
            .ok_or(Error::Singular { rcond })?,
    );
    for k in 1..=out_horizon {
        let mut rhs = Matrix::zeros(n, n);
        for j in 1..=k.min(x.horizon()) {
            if x.taps[j].iter().all(|v| *v == 0.0) {
                continue;
            }
            rhs += &x.taps[j] * &taps[k - j];
        }
        taps.push(lu.solve(&rhs).ok_or(Error::Singular { rcond })?);
    }
    Ok(FirTransferMatrix { taps })
}

/// `sqrt(sum_k ||X(k)||_F^2)`
pub fn fir_h2_norm(x: &FirTransferMatrix) -> f64 {
    x.taps.iter().map(|t| t.norm_squared()).sum::<f64>().sqrt()
}

/// `h_G(K) = -K (I - GK)^{-1}` on the horizon. Requires the spectral radius of
/// `(GK)(0) = G(0) K(0)` to be below 1.
pub fn fir_hmap(
    g: &FirTransferMatrix,
    k: &FirTransferMatrix,
    out_horizon: usize,
) -> Result<FirTransferMatrix> {
    if g.cols() != k.rows() || g.rows() != k.cols() {
        return Err(Error::dims(
            "fir_hmap",
            format!("G is {:?}, K is {:?}", g.shape(), k.shape()),
        ));
    }
    let radius = matrix::spectral_radius(&(&g.taps[0] * &k.taps[0]));
    if radius >= 1.0 {
        return Err(Error::Inertness { radius });
    }
    let gk = fir_mul(g, k, out_horizon)?;
    let inv = fir_causal_inverse(&gk, out_horizon)?;
    Ok(fir_mul(k, &inv, out_horizon)?.scale(-1.0))
}

/// FIR plant blocks; `G` is the `P22` block seen by the controller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FirPlantJson", into = "FirPlantJson")]
pub struct FirPlant {
    p11: FirTransferMatrix,
    p12: FirTransferMatrix,
    p21: FirTransferMatrix,
    g: FirTransferMatrix,
}

#[derive(Serialize, Deserialize)]
struct FirPlantJson {
    #[serde(rename = "P11")]
    p11: FirTransferMatrix,
    #[serde(rename = "P12")]
    p12: FirTransferMatrix,
    #[serde(rename = "P21")]
    p21: FirTransferMatrix,
    #[serde(rename = "G")]
    g: FirTransferMatrix,
}

impl TryFrom<FirPlantJson> for FirPlant {
    type Error = Error;
    fn try_from(j: FirPlantJson) -> Result<Self> {
        FirPlant::new(j.p11, j.p12, j.p21, j.g)
    }
}

impl From<FirPlant> for FirPlantJson {
    fn from(p: FirPlant) -> Self {
        FirPlantJson {
            p11: p.p11,
            p12: p.p12,
            p21: p.p21,
            g: p.g,
        }
    }
}

impl FirPlant {
    pub fn new(
        p11: FirTransferMatrix,
        p12: FirTransferMatrix,
        p21: FirTransferMatrix,
        g: FirTransferMatrix,
    ) -> Result<Self> {
        let (nz, nw) = p11.shape();
        let (ny, nu) = g.shape();
        if p12.shape() != (nz, nu) || p21.shape() != (ny, nw) {
            return Err(Error::dims(
                "FirPlant::new",
                format!(
                    "P11 {:?}, P12 {:?}, P21 {:?}, G {:?}",
                    p11.shape(),
                    p12.shape(),
                    p21.shape(),
                    g.shape()
                ),
            ));
        }
        Ok(FirPlant { p11, p12, p21, g })
    }

    pub fn p11(&self) -> &FirTransferMatrix {
        &self.p11
    }
    pub fn p12(&self) -> &FirTransferMatrix {
        &self.p12
    }
    pub fn p21(&self) -> &FirTransferMatrix {
        &self.p21
    }
    pub fn g(&self) -> &FirTransferMatrix {
        &self.g
    }
}

/// `P11 - P12 Q P21` on the horizon.
pub fn affine_closed_loop(
    p: &FirPlant,
    q: &FirTransferMatrix,
    horizon: usize,
) -> Result<FirTransferMatrix> {
    let pq = fir_mul(&p.p12, q, horizon)?;
    let pqp = fir_mul(&pq, &p.p21, horizon)?;
    p.p11.with_horizon(horizon).sub(&pqp)
}

/// Closed loop of the plant with controller K: `P11 + P12 K (I - GK)^{-1} P21`.
pub fn fir_closed_loop(
    p: &FirPlant,
    k: &FirTransferMatrix,
    horizon: usize,
) -> Result<FirTransferMatrix> {
    let gk = fir_mul(&p.g, k, horizon)?;
    let inv = fir_causal_inverse(&gk, horizon)?;
    let kinv = fir_mul(k, &inv, horizon)?;
    let mid = fir_mul(&fir_mul(&p.p12, &kinv, horizon)?, &p.p21, horizon)?;
    p.p11.with_horizon(horizon).add(&mid)
}
