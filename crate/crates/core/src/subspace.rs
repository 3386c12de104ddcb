//! Finite-dimensional controller subspaces and exact subspace QI testing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{self, Dense, Matrix};
use crate::report::{QiReport, WitnessIndices};

/// Relative norm below which a Gram–Schmidt remainder counts as dependent.
const DEPENDENCE_TOL: f64 = 1e-10;

/// Default tolerance on normalized QI residuals.
pub const DEFAULT_QI_TOL: f64 = 1e-9;

/// A finite basis of `rows x cols` real matrices spanning a controller subspace.
///
/// The raw elements are kept (they define sampling coordinates); an
/// orthonormal basis for their span under the Frobenius inner product is
/// computed once at construction with modified Gram–Schmidt.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceBasis {
    rows: usize,
    cols: usize,
    elements: Vec<Matrix>,
    orthonormal: Vec<Matrix>,
}

impl SubspaceBasis {
    pub fn new(rows: usize, cols: usize, elements: Vec<Matrix>) -> Result<Self> {
        if let Some(bad) = elements
            .iter()
            .find(|e| e.nrows() != rows || e.ncols() != cols)
        {
            return Err(Error::dims(
                "SubspaceBasis::new",
                format!("element is {}, expected {rows}x{cols}", matrix::shape(bad)),
            ));
        }
        let orthonormal = orthonormalize(&elements);
        Ok(SubspaceBasis {
            rows,
            cols,
            elements,
            orthonormal,
        })
    }

    /// Shape taken from the first element; fails on an empty list.
    pub fn from_elements(elements: Vec<Matrix>) -> Result<Self> {
        let first = elements
            .first()
            .ok_or_else(|| Error::Invalid("empty basis needs explicit dimensions".into()))?;
        let (rows, cols) = first.shape();
        Self::new(rows, cols, elements)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn elements(&self) -> &[Matrix] {
        &self.elements
    }

    pub fn orthonormal(&self) -> &[Matrix] {
        &self.orthonormal
    }

    /// Dimension of the spanned subspace (after dropping dependent elements).
    pub fn dim(&self) -> usize {
        self.orthonormal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orthonormal.is_empty()
    }

    /// `sum_i coeffs[i] * elements[i]` over the raw elements.
    pub fn combine(&self, coeffs: &[f64]) -> Result<Matrix> {
        if coeffs.len() != self.elements.len() {
            return Err(Error::dims(
                "SubspaceBasis::combine",
                format!(
                    "{} coefficients for {} elements",
                    coeffs.len(),
                    self.elements.len()
                ),
            ));
        }
        let mut k = Matrix::zeros(self.rows, self.cols);
        for (c, e) in coeffs.iter().zip(&self.elements) {
            k += e * *c;
        }
        Ok(k)
    }

    /// Coordinates of the Frobenius projection in the orthonormal basis.
    pub fn coordinates(&self, x: &Matrix) -> Vec<f64> {
        self.orthonormal
            .iter()
            .map(|q| matrix::frob_dot(q, x))
            .collect()
    }
}

fn orthonormalize(elements: &[Matrix]) -> Vec<Matrix> {
    let mut out: Vec<Matrix> = Vec::with_capacity(elements.len());
    for e in elements {
        let scale = e.norm();
        if scale == 0.0 {
            continue;
        }
        let mut v = e.clone();
        // two sweeps of modified Gram-Schmidt
        for _ in 0..2 {
            for q in &out {
                let c = matrix::frob_dot(q, &v);
                v -= q * c;
            }
        }
        let n = v.norm();
        if n > DEPENDENCE_TOL * scale {
            out.push(v / n);
        }
    }
    out
}

/// Frobenius-orthogonal projection of `x` onto the span of the basis and the
/// residual norm `||x - projection||_F`.
pub fn project_onto_subspace(basis: &SubspaceBasis, x: &Matrix) -> Result<(Matrix, f64)> {
    if x.shape() != (basis.rows, basis.cols) {
        return Err(Error::dims(
            "project_onto_subspace",
            format!(
                "matrix is {}, basis elements are {}x{}",
                matrix::shape(x),
                basis.rows,
                basis.cols
            ),
        ));
    }
    let mut proj = Matrix::zeros(basis.rows, basis.cols);
    let mut rem = x.clone();
    for _ in 0..2 {
        for q in &basis.orthonormal {
            let c = matrix::frob_dot(q, &rem);
            proj += q * c;
            rem -= q * c;
        }
    }
    let residual = rem.norm();
    Ok((proj, residual))
}

/// `dist(x, S) / ||x||_F`, or 0 for `x = 0`.
pub fn normalized_residual(basis: &SubspaceBasis, x: &Matrix) -> Result<f64> {
    let (_, r) = project_onto_subspace(basis, x)?;
    let n = x.norm();
    Ok(if n == 0.0 { 0.0 } else { r / n })
}

/// Exact QI test for a subspace given by a basis.
///
/// `K -> KGK` is a quadratic form in the basis coordinates, so `KGK in S` for
/// all `K in S` iff every symmetrized product `B_i G B_j + B_j G B_i` lies in S.
/// Diagonal pairs are tested first; the reported witness is the pair with
/// the largest violation.
pub fn subspace_qi_check(basis: &SubspaceBasis, g: &Matrix, tol: f64) -> Result<QiReport<Dense>> {
    if g.nrows() != basis.cols || g.ncols() != basis.rows {
        return Err(Error::dims(
            "subspace_qi_check",
            format!(
                "G is {}, expected {}x{}",
                matrix::shape(g),
                basis.cols,
                basis.rows
            ),
        ));
    }
    let q = &basis.orthonormal;
    let n = q.len();
    let gq: Vec<Matrix> = q.iter().map(|b| g * b).collect();
    let pairs = (0..n)
        .map(|i| (i, i))
        .chain((0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))));

    let mut max_residual = 0.0_f64;
    let mut worst: Option<(usize, usize, f64)> = None;
    for (i, j) in pairs {
        let sym = if i == j {
            &q[i] * &gq[i]
        } else {
            &q[i] * &gq[j] + &q[j] * &gq[i]
        };
        let (_, r) = project_onto_subspace(basis, &sym)?;
        let scaled = r / (1.0 + sym.norm());
        max_residual = max_residual.max(scaled);
        if scaled > tol && worst.is_none_or(|(_, _, w)| scaled > w) {
            worst = Some((i, j, scaled));
        }
    }

    let Some((i, j, _)) = worst else {
        return Ok(QiReport::invariant(max_residual, tol));
    };
    let witness = if i == j { q[i].clone() } else { &q[i] + &q[j] };
    let kgk = &witness * g * &witness;
    let witness_residual = normalized_residual(basis, &kgk)?;
    Ok(QiReport {
        qi: false,
        witness_controller: Some(Dense(witness)),
        witness_residual,
        witness_indices: Some(WitnessIndices::Basis { i, j }),
        max_residual,
        tol,
        notes: vec!["indices refer to the orthonormalized basis".into()],
    })
}

#[derive(Serialize, Deserialize)]
struct BasisJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rows: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cols: Option<usize>,
    #[serde(with = "matrix::serde_rows_vec")]
    basis: Vec<Matrix>,
}

impl Serialize for SubspaceBasis {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        BasisJson {
            rows: Some(self.rows),
            cols: Some(self.cols),
            basis: self.elements.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SubspaceBasis {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = BasisJson::deserialize(d)?;
        let (rows, cols) = match (raw.rows, raw.cols, raw.basis.first()) {
            (Some(r), Some(c), _) => (r, c),
            (_, _, Some(first)) => first.shape(),
            _ => return Err(D::Error::custom("empty basis needs \"rows\" and \"cols\"")),
        };
        SubspaceBasis::new(rows, cols, raw.basis).map_err(D::Error::custom)
    }
}
