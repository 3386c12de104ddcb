use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{fir_mul, inertness_check, FirTransferMatrix, InertnessOptions};
use crate::error::{Error, Result};
use crate::matrix::{self, Matrix};
use crate::pattern::Pattern;
use crate::report::{QiReport, WitnessIndices};
use crate::subspace::SubspaceBasis;

/// A subspace of FIR controllers on a shared horizon, spanned by basis elements.
///
/// Membership is tested on taps `0..=horizon` under the inner product
/// `sum_k <A(k), B(k)>_F`.
#[derive(Debug, Clone, PartialEq)]
pub struct FirSubspace {
    rows: usize,
    cols: usize,
    horizon: usize,
    elements: Vec<FirTransferMatrix>,
    orthonormal: Vec<DVector<f64>>,
}

impl FirSubspace {
    pub fn new(
        rows: usize,
        cols: usize,
        horizon: usize,
        elements: Vec<FirTransferMatrix>,
    ) -> Result<Self> {
        if let Some(bad) = elements
            .iter()
            .find(|e| e.shape() != (rows, cols) || e.horizon() != horizon)
        {
            return Err(Error::dims(
                "FirSubspace::new",
                format!(
                    "element is {:?} with horizon {}, expected ({rows}, {cols}) with horizon {horizon}",
                    bad.shape(),
                    bad.horizon()
                ),
            ));
        }
        let mut orthonormal: Vec<DVector<f64>> = Vec::with_capacity(elements.len());
        for e in &elements {
            let mut v = DVector::from_vec(e.flatten());
            let scale = v.norm();
            if scale == 0.0 {
                continue;
            }
            for _ in 0..2 {
                for q in &orthonormal {
                    let c = q.dot(&v);
                    v.axpy(-c, q, 1.0);
                }
            }
            let n = v.norm();
            if n > 1e-10 * scale {
                orthonormal.push(v / n);
            }
        }
        Ok(FirSubspace {
            rows,
            cols,
            horizon,
            elements,
            orthonormal,
        })
    }

    /// All FIR maps whose every tap is supported on the pattern.
    pub fn from_pattern(pattern: &Pattern, horizon: usize) -> Self {
        let zero_delays = vec![vec![0; pattern.cols()]; pattern.rows()];
        Self::from_delay_pattern(pattern, &zero_delays, horizon)
            .expect("zero delay table matches the pattern")
    }

    /// Sparsity plus delay structure: entry `(i,j)` may be nonzero only at lags
    /// `k >= delays[i][j]`.
    pub fn from_delay_pattern(
        pattern: &Pattern,
        delays: &[Vec<usize>],
        horizon: usize,
    ) -> Result<Self> {
        let (rows, cols) = (pattern.rows(), pattern.cols());
        if delays.len() != rows || delays.iter().any(|r| r.len() != cols) {
            return Err(Error::dims(
                "FirSubspace::from_delay_pattern",
                format!("delay table must be {rows}x{cols}"),
            ));
        }
        let mut elements = Vec::new();
        for lag in 0..=horizon {
            for (i, j) in pattern.positions() {
                if lag >= delays[i][j] {
                    elements.push(FirTransferMatrix::delayed(
                        matrix::unit(rows, cols, i, j),
                        lag,
                        horizon,
                    ));
                }
            }
        }
        Self::new(rows, cols, horizon, elements)
    }

    /// Static gains from a matrix basis, as constant FIR maps on the horizon.
    pub fn from_static_basis(basis: &SubspaceBasis, horizon: usize) -> Self {
        let elements = basis
            .elements()
            .iter()
            .map(|e| FirTransferMatrix::constant(e.clone()).with_horizon(horizon))
            .collect();
        Self::new(basis.rows(), basis.cols(), horizon, elements)
            .expect("elements share the basis shape")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn elements(&self) -> &[FirTransferMatrix] {
        &self.elements
    }

    pub fn dim(&self) -> usize {
        self.orthonormal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orthonormal.is_empty()
    }

    /// The `i`-th orthonormalized basis element.
    pub fn orthonormal_element(&self, i: usize) -> FirTransferMatrix {
        self.unflatten(self.orthonormal[i].as_slice())
    }

    pub fn orthonormal_elements(&self) -> Vec<FirTransferMatrix> {
        (0..self.dim())
            .map(|i| self.orthonormal_element(i))
            .collect()
    }

    /// `sum_i coeffs[i] * elements[i]` over the raw elements.
    pub fn combine(&self, coeffs: &[f64]) -> Result<FirTransferMatrix> {
        if coeffs.len() != self.elements.len() {
            return Err(Error::dims(
                "FirSubspace::combine",
                format!(
                    "{} coefficients for {} elements",
                    coeffs.len(),
                    self.elements.len()
                ),
            ));
        }
        let mut flat = DVector::zeros(self.flat_len());
        for (c, e) in coeffs.iter().zip(&self.elements) {
            flat.axpy(*c, &DVector::from_vec(e.flatten()), 1.0);
        }
        Ok(self.unflatten(flat.as_slice()))
    }

    /// `sum_i coeffs[i] * orthonormal[i]`.
    pub fn combine_orthonormal(&self, coeffs: &[f64]) -> Result<FirTransferMatrix> {
        if coeffs.len() != self.dim() {
            return Err(Error::dims(
                "FirSubspace::combine_orthonormal",
                format!("{} coefficients for dimension {}", coeffs.len(), self.dim()),
            ));
        }
        let mut flat = DVector::zeros(self.flat_len());
        for (c, q) in coeffs.iter().zip(&self.orthonormal) {
            flat.axpy(*c, q, 1.0);
        }
        Ok(self.unflatten(flat.as_slice()))
    }

    fn flat_len(&self) -> usize {
        (self.horizon + 1) * self.rows * self.cols
    }

    fn unflatten(&self, flat: &[f64]) -> FirTransferMatrix {
        let block = self.rows * self.cols;
        let taps = flat
            .chunks(block)
            .map(|c| Matrix::from_row_slice(self.rows, self.cols, c))
            .collect();
        FirTransferMatrix::new(taps).expect("flattened taps share one shape")
    }
}

/// Projection of `x` (taps `0..=horizon` of the subspace) onto the subspace and
/// the residual norm. Taps of `x` beyond the horizon are ignored.
pub fn project_onto_fir_subspace(
    s: &FirSubspace,
    x: &FirTransferMatrix,
) -> Result<(FirTransferMatrix, f64)> {
    if x.shape() != (s.rows, s.cols) {
        return Err(Error::dims(
            "project_onto_fir_subspace",
            format!(
                "system is {:?}, subspace is ({}, {})",
                x.shape(),
                s.rows,
                s.cols
            ),
        ));
    }
    let mut rem = DVector::from_vec(x.with_horizon(s.horizon).flatten());
    let mut proj = DVector::zeros(rem.len());
    for _ in 0..2 {
        for q in &s.orthonormal {
            let c = q.dot(&rem);
            proj.axpy(c, q, 1.0);
            rem.axpy(-c, q, 1.0);
        }
    }
    Ok((s.unflatten(proj.as_slice()), rem.norm()))
}

/// QI test over an FIR subspace: every symmetrized product
/// `B_i G B_j + B_j G B_i`, computed to the subspace horizon, must lie in S.
pub fn fir_subspace_qi_check(
    s: &FirSubspace,
    g: &FirTransferMatrix,
    tol: f64,
) -> Result<QiReport<FirTransferMatrix>> {
    if g.shape() != (s.cols, s.rows) {
        return Err(Error::dims(
            "fir_subspace_qi_check",
            format!("G is {:?}, expected ({}, {})", g.shape(), s.cols, s.rows),
        ));
    }
    let inert = inertness_check(g, s, &InertnessOptions::default())?;
    if !inert.inert {
        return Err(Error::Inertness {
            radius: inert.max_radius,
        });
    }

    let h = s.horizon;
    let q = s.orthonormal_elements();
    let gq = q
        .iter()
        .map(|b| fir_mul(g, b, h))
        .collect::<Result<Vec<_>>>()?;
    let n = q.len();
    let pairs = (0..n)
        .map(|i| (i, i))
        .chain((0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))));

    let mut max_residual = 0.0_f64;
    let mut worst: Option<(usize, usize, f64)> = None;
    for (i, j) in pairs {
        let sym = if i == j {
            fir_mul(&q[i], &gq[i], h)?
        } else {
            fir_mul(&q[i], &gq[j], h)?.add(&fir_mul(&q[j], &gq[i], h)?)?
        };
        let (_, r) = project_onto_fir_subspace(s, &sym)?;
        let scaled = r / (1.0 + super::fir_h2_norm(&sym));
        max_residual = max_residual.max(scaled);
        if scaled > tol && worst.is_none_or(|(_, _, w)| scaled > w) {
            worst = Some((i, j, scaled));
        }
    }

    let mut notes = vec![format!("inertness: {:?}", inert.certification)];
    let Some((i, j, _)) = worst else {
        let mut report = QiReport::invariant(max_residual, tol);
        report.notes.append(&mut notes);
        return Ok(report);
    };
    let witness = if i == j {
        q[i].clone()
    } else {
        q[i].add(&q[j])?
    };
    let kgk = fir_mul(&witness, &fir_mul(g, &witness, h)?, h)?;
    let (_, r) = project_onto_fir_subspace(s, &kgk)?;
    let norm = super::fir_h2_norm(&kgk);
    notes.push("indices refer to the orthonormalized basis".into());
    Ok(QiReport {
        qi: false,
        witness_controller: Some(witness),
        witness_residual: if norm == 0.0 { 0.0 } else { r / norm },
        witness_indices: Some(WitnessIndices::Basis { i, j }),
        max_residual,
        tol,
        notes,
    })
}

#[derive(Serialize, Deserialize)]
struct FirSubspaceJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rows: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cols: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    horizon: Option<usize>,
    basis: Vec<FirTransferMatrix>,
}

impl Serialize for FirSubspace {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        FirSubspaceJson {
            rows: Some(self.rows),
            cols: Some(self.cols),
            horizon: Some(self.horizon),
            basis: self.elements.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for FirSubspace {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = FirSubspaceJson::deserialize(d)?;
        let (rows, cols, horizon) = match (raw.rows, raw.cols, raw.horizon, raw.basis.first()) {
            (Some(r), Some(c), Some(h), _) => (r, c, h),
            (_, _, _, Some(first)) => (first.rows(), first.cols(), first.horizon()),
            _ => {
                return Err(D::Error::custom(
                    "empty FIR basis needs \"rows\", \"cols\" and \"horizon\"",
                ))
            }
        };
        FirSubspace::new(rows, cols, horizon, raw.basis).map_err(D::Error::custom)
    }
}
