//! The feedback map `h_G(K) = -K (I - GK)^{-1}` and closed-loop maps for
//! static (real matrix) plants.
//!
//! In finite dimensions the spectrum of GK is finite, so the resolvent set
//! has a single unbounded component and the domain `M = {K : I - GK invertible}`
//! is the only domain condition that needs checking.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{self, Matrix};

/// Default relative smallest-singular-value cutoff for invertibility of `I - GK`.
pub const DEFAULT_COND_TOL: f64 = 1e-12;

/// Plant blocks `[P11 P12; P21 G]` with `z = P11 w + P12 u`, `y = P21 w + G u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PlantJson", into = "PlantJson")]
pub struct StaticPlant {
    p11: Matrix,
    p12: Matrix,
    p21: Matrix,
    g: Matrix,
}

#[derive(Serialize, Deserialize)]
struct PlantJson {
    #[serde(rename = "P11", with = "matrix::serde_rows")]
    p11: Matrix,
    #[serde(rename = "P12", with = "matrix::serde_rows")]
    p12: Matrix,
    #[serde(rename = "P21", with = "matrix::serde_rows")]
    p21: Matrix,
    #[serde(rename = "G", with = "matrix::serde_rows")]
    g: Matrix,
}

impl TryFrom<PlantJson> for StaticPlant {
    type Error = Error;
    fn try_from(j: PlantJson) -> Result<Self> {
        StaticPlant::new(j.p11, j.p12, j.p21, j.g)
    }
}

impl From<StaticPlant> for PlantJson {
    fn from(p: StaticPlant) -> Self {
        PlantJson {
            p11: p.p11,
            p12: p.p12,
            p21: p.p21,
            g: p.g,
        }
    }
}

impl StaticPlant {
    pub fn new(p11: Matrix, p12: Matrix, p21: Matrix, g: Matrix) -> Result<Self> {
        let (nz, nw) = p11.shape();
        let (nz2, nu) = p12.shape();
        let (ny, nw2) = p21.shape();
        if nz2 != nz || nw2 != nw || g.shape() != (ny, nu) {
            return Err(Error::dims(
                "StaticPlant::new",
                format!(
                    "P11 {}, P12 {}, P21 {}, G {}",
                    matrix::shape(&p11),
                    matrix::shape(&p12),
                    matrix::shape(&p21),
                    matrix::shape(&g)
                ),
            ));
        }
        Ok(StaticPlant { p11, p12, p21, g })
    }

    pub fn p11(&self) -> &Matrix {
        &self.p11
    }
    pub fn p12(&self) -> &Matrix {
        &self.p12
    }
    pub fn p21(&self) -> &Matrix {
        &self.p21
    }
    pub fn g(&self) -> &Matrix {
        &self.g
    }

    /// `(n_z, n_w, n_u, n_y)`
    pub fn dims(&self) -> (usize, usize, usize, usize) {
        (
            self.p11.nrows(),
            self.p11.ncols(),
            self.g.ncols(),
            self.g.nrows(),
        )
    }
}

fn check_conformable(op: &'static str, g: &Matrix, k: &Matrix) -> Result<()> {
    if g.ncols() != k.nrows() || g.nrows() != k.ncols() {
        return Err(Error::dims(
            op,
            format!(
                "G is {}, K is {} (K must be {}x{})",
                matrix::shape(g),
                matrix::shape(k),
                g.ncols(),
                g.nrows()
            ),
        ));
    }
    Ok(())
}

/// `I - scale * G K`
fn resolvent(g: &Matrix, k: &Matrix, scale: f64) -> Matrix {
    let n = g.nrows();
    Matrix::identity(n, n) - (g * k) * scale
}

/// Membership in M: `I - GK` has relative smallest singular value `>= cond_tol`.
pub fn in_domain_m(g: &Matrix, k: &Matrix, cond_tol: f64) -> Result<bool> {
    check_conformable("in_domain_m", g, k)?;
    Ok(matrix::relative_min_singular(&resolvent(g, k, 1.0)) >= cond_tol)
}

/// Solves `X (I - sGK) = -K`, i.e. `X = -K (I - sGK)^{-1}`.
fn feedback_solve(g: &Matrix, k: &Matrix, scale: f64) -> Result<Matrix> {
    let r = resolvent(g, k, scale);
    let rcond = matrix::relative_min_singular(&r);
    if rcond < DEFAULT_COND_TOL {
        return Err(Error::Singular { rcond });
    }
    let rhs = -k.transpose();
    let xt = r
        .transpose()
        .lu()
        .solve(&rhs)
        .ok_or(Error::Singular { rcond })?;
    Ok(xt.transpose())
}

/// `h_G(K) = -K (I - GK)^{-1}`. An involution on M: `h_G(h_G(K)) = K`.
pub fn hmap(g: &Matrix, k: &Matrix) -> Result<Matrix> {
    check_conformable("hmap", g, k)?;
    feedback_solve(g, k, 1.0)
}

/// Closed-loop map `P11 - P12 h_G(K) P21`.
pub fn closed_loop(p: &StaticPlant, k: &Matrix) -> Result<Matrix> {
    let q = hmap(&p.g, k)?;
    Ok(&p.p11 - &p.p12 * q * &p.p21)
}

/// Closed-loop map through the direct formula `P11 + P12 K (I - GK)^{-1} P21`.
pub fn closed_loop_direct(p: &StaticPlant, k: &Matrix) -> Result<Matrix> {
    check_conformable("closed_loop_direct", &p.g, k)?;
    let r = resolvent(&p.g, k, 1.0);
    let rcond = matrix::relative_min_singular(&r);
    let inv = r.try_inverse().ok_or(Error::Singular { rcond })?;
    Ok(&p.p11 + &p.p12 * k * inv * &p.p21)
}

/// The path `g(alpha) = -K (I - (1 - alpha) G K)^{-1}` from `h_G(K)` (alpha = 0)
/// to `-K` (alpha = 1).
pub fn homotopy_g(g: &Matrix, k: &Matrix, alpha: f64) -> Result<Matrix> {
    check_conformable("homotopy_g", g, k)?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Invalid(format!("alpha = {alpha} outside [0, 1]")));
    }
    if alpha == 1.0 {
        return Ok(-k);
    }
    feedback_solve(g, k, 1.0 - alpha)
}
