//! Boolean sparsity patterns and the pattern-level quadratic-invariance test.
//!
//! A pattern stands for the subspace `{K : K_ij = 0 whenever entry (i,j) is false}`.
//! Pattern products over-approximate the support of numeric products, so the
//! test below decides QI for generic numeric data supported on the pattern of G.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::matrix::{self, Dense, Matrix};
use crate::report::{QiReport, WitnessIndices};
use crate::subspace::SubspaceBasis;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Pattern {
    rows: usize,
    cols: usize,
    entries: Vec<bool>,
}

impl Pattern {
    pub fn new(rows: usize, cols: usize, entries: Vec<bool>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Invalid(
                "pattern must have positive dimensions".into(),
            ));
        }
        if entries.len() != rows * cols {
            return Err(Error::Invalid(format!(
                "pattern {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                entries.len()
            )));
        }
        Ok(Pattern {
            rows,
            cols,
            entries,
        })
    }

    pub fn from_rows(rows: &[Vec<bool>]) -> Result<Self> {
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::Invalid("ragged pattern rows".into()));
        }
        Self::new(rows.len(), ncols, rows.concat())
    }

    /// Parses `[[1,0],[1,1]]`-style 0/1 literals; handy in tests.
    pub fn from_bits(rows: &[&[u8]]) -> Result<Self> {
        let rows: Vec<Vec<bool>> = rows
            .iter()
            .map(|r| r.iter().map(|&b| b != 0).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn full(rows: usize, cols: usize) -> Self {
        Pattern {
            rows,
            cols,
            entries: vec![true; rows * cols],
        }
    }

    pub fn empty(rows: usize, cols: usize) -> Self {
        Pattern {
            rows,
            cols,
            entries: vec![false; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut p = Self::empty(n, n);
        for i in 0..n {
            p.set(i, i, true);
        }
        p
    }

    /// Support of a numeric matrix (entries with |x| > `tol`).
    pub fn support_of(m: &Matrix, tol: f64) -> Self {
        let mut p = Self::empty(m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                p.set(i, j, m[(i, j)].abs() > tol);
            }
        }
        p
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.entries[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: bool) {
        self.entries[i * self.cols + j] = v;
    }

    pub fn count(&self) -> usize {
        self.entries.iter().filter(|&&b| b).count()
    }

    /// Allowed positions in row-major order.
    pub fn positions(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.rows)
            .flat_map(move |i| (0..self.cols).map(move |j| (i, j)))
            .filter(move |&(i, j)| self.get(i, j))
    }

    /// Entrywise `self <= other` (every allowed entry of self is allowed in other).
    pub fn is_subset_of(&self, other: &Pattern) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|(&a, &b)| !a || b)
    }

    /// Boolean matrix product: `(AB)_ik = OR_j (A_ij AND B_jk)`.
    pub fn bool_product(&self, other: &Pattern) -> Result<Pattern> {
        if self.cols != other.rows {
            return Err(Error::dims(
                "bool_product",
                format!(
                    "{}x{} times {}x{}",
                    self.rows, self.cols, other.rows, other.cols
                ),
            ));
        }
        let mut out = Pattern::empty(self.rows, other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                if !self.get(i, j) {
                    continue;
                }
                for k in 0..other.cols {
                    if other.get(j, k) {
                        out.set(i, k, true);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Numeric matrix with ones on the allowed entries.
    pub fn to_indicator(&self) -> Matrix {
        Matrix::from_fn(
            self.rows,
            self.cols,
            |i, j| {
                if self.get(i, j) {
                    1.0
                } else {
                    0.0
                }
            },
        )
    }

    pub fn to_bits(&self) -> Vec<Vec<u8>> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j) as u8).collect())
            .collect()
    }
}

impl Serialize for Pattern {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_bits().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Pattern {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = Vec::<Vec<u8>>::deserialize(d)?;
        if let Some(bad) = raw.iter().flatten().find(|&&b| b > 1) {
            return Err(D::Error::custom(format!(
                "pattern entries must be 0 or 1, found {bad}"
            )));
        }
        let rows: Vec<Vec<bool>> = raw
            .iter()
            .map(|r| r.iter().map(|&b| b == 1).collect())
            .collect();
        Pattern::from_rows(&rows).map_err(D::Error::custom)
    }
}

/// Pattern-level QI test: S is QI under G iff `S G S <= S` as boolean matrices.
///
/// `s` is `n_u x n_y` and `g` is `n_y x n_u`. On failure the witness controller
/// is `E_il + E_jk`, whose product `K G K` hits the forbidden entry `(i,k)`
/// with coefficient `G_lj` for any numeric G on the pattern.
pub fn pattern_qi_check(s: &Pattern, g: &Pattern) -> Result<QiReport<Dense>> {
    if s.cols != g.rows || g.cols != s.rows {
        return Err(Error::dims(
            "pattern_qi_check",
            format!(
                "S is {}x{}, G is {}x{} (expected {}x{})",
                s.rows, s.cols, g.rows, g.cols, s.cols, s.rows
            ),
        ));
    }
    const NOTE: &str = "pattern-level test: decided for generic numeric G on the pattern";
    let sgs = s.bool_product(g)?.bool_product(s)?;
    if sgs.is_subset_of(s) {
        return Ok(QiReport::invariant(0.0, 0.0).with_note(NOTE));
    }

    let (i, k) = (0..s.rows)
        .flat_map(|i| (0..s.cols).map(move |k| (i, k)))
        .find(|&(i, k)| sgs.get(i, k) && !s.get(i, k))
        .expect("SGS exceeds S somewhere");
    let (l, j) = (0..s.cols)
        .flat_map(|l| (0..s.rows).map(move |j| (l, j)))
        .find(|&(l, j)| s.get(i, l) && g.get(l, j) && s.get(j, k))
        .expect("a violating entry has a witness path");

    let mut witness = matrix::unit(s.rows, s.cols, i, l);
    witness[(j, k)] += 1.0;
    let residual = indicator_residual(s, &witness, &g.to_indicator());
    Ok(QiReport {
        qi: false,
        witness_controller: Some(Dense(witness)),
        witness_residual: residual,
        witness_indices: Some(WitnessIndices::Pattern { i, l, j, k }),
        max_residual: residual,
        tol: 0.0,
        notes: vec![NOTE.to_string()],
    })
}

/// Normalized mass of `K G K` outside the pattern S.
fn indicator_residual(s: &Pattern, k: &Matrix, g: &Matrix) -> f64 {
    let kgk = k * g * k;
    let total = kgk.norm();
    if total == 0.0 {
        return 0.0;
    }
    let mut outside = 0.0;
    for i in 0..s.rows {
        for j in 0..s.cols {
            if !s.get(i, j) {
                outside += kgk[(i, j)].powi(2);
            }
        }
    }
    outside.sqrt() / total
}

/// One unit matrix per allowed entry, in row-major order.
pub fn pattern_to_basis(s: &Pattern) -> SubspaceBasis {
    let elements = s
        .positions()
        .map(|(i, j)| matrix::unit(s.rows, s.cols, i, j))
        .collect();
    SubspaceBasis::new(s.rows, s.cols, elements).expect("unit matrices share a shape")
}
