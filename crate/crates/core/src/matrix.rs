//! Small dense-matrix helpers shared by the static and FIR code paths.

use nalgebra::DMatrix;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;

/// Unit matrix `E_ij` of the given shape.
pub fn unit(rows: usize, cols: usize, i: usize, j: usize) -> Matrix {
    let mut m = Matrix::zeros(rows, cols);
    m[(i, j)] = 1.0;
    m
}

/// Frobenius inner product `trace(A^T B)`.
pub fn frob_dot(a: &Matrix, b: &Matrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Row-major flattening; used for point clouds and CSV output.
pub fn flatten_row_major(m: &Matrix) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

pub fn from_rows(rows: &[Vec<f64>]) -> Result<Matrix> {
    let nrows = rows.len();
    if nrows == 0 {
        return Err(Error::Invalid("matrix has no rows".into()));
    }
    let ncols = rows[0].len();
    if ncols == 0 {
        return Err(Error::Invalid("matrix has no columns".into()));
    }
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != ncols) {
        return Err(Error::Invalid(format!(
            "ragged matrix: row {i} has {} entries, expected {ncols}",
            r.len()
        )));
    }
    Ok(Matrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub fn to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Singular values sorted in decreasing order, padded with zeros up to `min(rows, cols)`.
pub fn singular_values(m: &Matrix) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Smallest over largest singular value; 0 for the zero matrix.
pub fn relative_min_singular(m: &Matrix) -> f64 {
    let sv = singular_values(m);
    match (sv.first(), sv.last()) {
        (Some(&max), Some(&min)) if max > 0.0 => min / max,
        _ => 0.0,
    }
}

/// Spectral radius of a square real matrix.
pub fn spectral_radius(m: &Matrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    if m.iter().all(|x| *x == 0.0) {
        return 0.0;
    }
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

pub(crate) fn shape(m: &Matrix) -> String {
    format!("{}x{}", m.nrows(), m.ncols())
}

/// A matrix that (de)serializes as a row-major array of arrays of floats.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense(pub Matrix);

impl std::ops::Deref for Dense {
    type Target = Matrix;
    fn deref(&self) -> &Matrix {
        &self.0
    }
}

impl From<Matrix> for Dense {
    fn from(m: Matrix) -> Self {
        Dense(m)
    }
}

impl Serialize for Dense {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        serde_rows::serialize(&self.0, s)
    }
}

impl<'de> Deserialize<'de> for Dense {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        serde_rows::deserialize(d).map(Dense)
    }
}

/// Serde adapter: a matrix as a row-major array of arrays of floats.
pub mod serde_rows {
    use super::*;

    pub fn serialize<S: Serializer>(m: &Matrix, s: S) -> Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Matrix, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        from_rows(&rows).map_err(D::Error::custom)
    }
}

pub mod serde_rows_opt {
    use super::*;

    pub fn serialize<S: Serializer>(m: &Option<Matrix>, s: S) -> Result<S::Ok, S::Error> {
        m.as_ref().map(to_rows).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Matrix>, D::Error> {
        let rows = Option::<Vec<Vec<f64>>>::deserialize(d)?;
        rows.map(|r| from_rows(&r).map_err(D::Error::custom))
            .transpose()
    }
}

pub mod serde_rows_vec {
    use super::*;

    pub fn serialize<S: Serializer>(ms: &[Matrix], s: S) -> Result<S::Ok, S::Error> {
        ms.iter().map(to_rows).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Matrix>, D::Error> {
        let all = Vec::<Vec<Vec<f64>>>::deserialize(d)?;
        all.iter()
            .map(|r| from_rows(r).map_err(D::Error::custom))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flatten_is_row_major() {
        let m = from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(flatten_row_major(&m), vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(from_rows(&[vec![1.0, 2.0], vec![3.0]]).is_err());
    }

    #[test]
    fn spectral_radius_of_rotation() {
        let m = from_rows(&[vec![0.0, -2.0], vec![2.0, 0.0]]).unwrap();
        assert!((spectral_radius(&m) - 2.0).abs() < 1e-12);
    }
}
