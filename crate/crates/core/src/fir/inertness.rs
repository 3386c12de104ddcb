use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{FirSubspace, FirTransferMatrix};
use crate::error::{Error, Result};
use crate::matrix::{self, Matrix};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InertnessOptions {
    /// Radii must stay below `1 - margin`.
    pub margin: f64,
    /// Random unit-norm combinations tested on top of the basis elements.
    pub random_combinations: usize,
    pub seed: u64,
}

impl Default for InertnessOptions {
    fn default() -> Self {
        InertnessOptions {
            margin: 1e-9,
            random_combinations: 32,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Certification {
    /// `G(0) B(0) = 0` for every basis element, so `(GK)(0) = 0` on all of S.
    Structural,
    /// Basis elements and sampled combinations pass; not exhaustive.
    Sampled,
    Violated,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InertnessReport {
    pub inert: bool,
    pub certification: Certification,
    pub max_radius: f64,
    /// Spectral radius of `(G B_i)(0)` per raw basis element.
    pub element_radii: Vec<f64>,
    /// Offending basis element index, when a basis element fails.
    pub offending_element: Option<usize>,
    /// Offending combination coefficients (orthonormal basis), when a sample fails.
    pub offending_combination: Option<Vec<f64>>,
    pub margin: f64,
    pub notes: Vec<String>,
}

/// Discrete-time inertness: `(GK)(0) = G(0) K(0)` must have spectral radius
/// below 1 and all impulse-response taps must be finite.
///
/// A linear subspace scales freely, so the condition holds on all of S exactly
/// when `G(0) K(0)` is nilpotent for every K; the only case certified
/// exhaustively here is the structural one `G(0) B(0) = 0`.
pub fn inertness_check(
    g: &FirTransferMatrix,
    s: &FirSubspace,
    opts: &InertnessOptions,
) -> Result<InertnessReport> {
    if g.shape() != (s.cols(), s.rows()) {
        return Err(Error::dims(
            "inertness_check",
            format!(
                "G is {:?}, expected ({}, {})",
                g.shape(),
                s.cols(),
                s.rows()
            ),
        ));
    }
    let g0 = &g.taps()[0];
    let limit = 1.0 - opts.margin;
    let mut notes = Vec::new();

    let finite = g.is_finite() && s.elements().iter().all(FirTransferMatrix::is_finite);
    if !finite {
        notes.push("non-finite taps".into());
    }

    let products: Vec<Matrix> = s.elements().iter().map(|b| g0 * &b.taps()[0]).collect();
    let element_radii: Vec<f64> = products.iter().map(matrix::spectral_radius).collect();
    let structural = products
        .iter()
        .zip(s.elements())
        .all(|(p, b)| p.norm() <= f64::EPSILON * g0.norm() * b.taps()[0].norm());

    let mut max_radius = element_radii.iter().copied().fold(0.0, f64::max);
    let offending_element = element_radii.iter().position(|&r| r >= limit);
    let mut offending_combination = None;

    if !structural && offending_element.is_none() && s.dim() > 1 {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        for _ in 0..opts.random_combinations {
            let mut c: Vec<f64> = (0..s.dim())
                .map(|_| StandardNormal.sample(&mut rng))
                .collect();
            let n = c.iter().map(|x| x * x).sum::<f64>().sqrt();
            c.iter_mut().for_each(|x| *x /= n);
            let k = s.combine_orthonormal(&c)?;
            let r = matrix::spectral_radius(&(g0 * &k.taps()[0]));
            max_radius = max_radius.max(r);
            if r >= limit {
                offending_combination = Some(c);
                break;
            }
        }
    }

    let inert = finite && offending_element.is_none() && offending_combination.is_none();
    let certification = match (inert, structural) {
        (false, _) => Certification::Violated,
        (true, true) => Certification::Structural,
        (true, false) => {
            notes
                .push("certified on basis elements and sampled unit-norm combinations only".into());
            Certification::Sampled
        }
    };
    Ok(InertnessReport {
        inert,
        certification,
        max_radius,
        element_radii,
        offending_element,
        offending_combination,
        margin: opts.margin,
        notes,
    })
}
