//! Convex H2 model matching over the Youla-type parameter `Q = h_G(K)`.
//!
//! When S is quadratically invariant under G, `h_G(S) = S`, so the achievable
//! closed loops are exactly `P11 - P12 Q P21` with `Q in S`. Each tap of
//! `P12 Q P21` is linear in the coordinates of Q, so the finite-horizon H2
//! objective is a linear least-squares problem.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feedback::StaticPlant;
use crate::fir::{
    affine_closed_loop, fir_h2_norm, fir_hmap, fir_mul, fir_subspace_qi_check,
    project_onto_fir_subspace, FirPlant, FirSubspace, FirTransferMatrix,
};
use crate::matrix::{self, Matrix};
use crate::report::QiReport;
use crate::subspace::DEFAULT_QI_TOL;

pub const DEFAULT_RANK_TOL: f64 = 1e-9;
pub const DEFAULT_FREQ_COUNT: usize = 64;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrequencySample {
    pub omega: f64,
    /// Relative smallest singular value of `P12(e^{i omega})` for column rank.
    pub p12_min_singular: f64,
    /// Relative smallest singular value of `P21(e^{i omega})` for row rank.
    pub p21_min_singular: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub p12_left_invertible: bool,
    pub p21_right_invertible: bool,
    pub d12_full_column_rank: bool,
    pub d21_full_row_rank: bool,
    /// Worst relative smallest singular value over all checks of P12 / P21.
    pub p12_min_singular: f64,
    pub p21_min_singular: f64,
    pub frequency_samples: Vec<FrequencySample>,
    pub tol: f64,
}

#[derive(Debug, Clone, Copy)]
pub enum PlantRef<'a> {
    Static(&'a StaticPlant),
    Fir(&'a FirPlant),
}

/// `sigma_n / sigma_1` for an `m x n` matrix when `m >= n`, else 0.
fn column_rank_ratio(m: &Matrix) -> f64 {
    if m.nrows() < m.ncols() {
        return 0.0;
    }
    matrix::relative_min_singular(m)
}

fn complex_column_rank_ratio(m: &DMatrix<Complex64>) -> f64 {
    if m.nrows() < m.ncols() || m.is_empty() {
        return 0.0;
    }
    let sv = m.singular_values();
    let max = sv.max();
    if max > 0.0 {
        sv.min() / max
    } else {
        0.0
    }
}

/// Left-invertibility of P12 and right-invertibility of P21, plus the
/// feedthrough (lag-0) rank conditions.
pub fn rank_checks(plant: PlantRef<'_>, freq_count: usize, tol: f64) -> AssumptionReport {
    match plant {
        PlantRef::Static(p) => {
            let c12 = column_rank_ratio(p.p12());
            let c21 = column_rank_ratio(&p.p21().transpose());
            AssumptionReport {
                p12_left_invertible: c12 >= tol,
                p21_right_invertible: c21 >= tol,
                d12_full_column_rank: c12 >= tol,
                d21_full_row_rank: c21 >= tol,
                p12_min_singular: c12,
                p21_min_singular: c21,
                frequency_samples: Vec::new(),
                tol,
            }
        }
        PlantRef::Fir(p) => {
            let d12 = column_rank_ratio(&p.p12().taps()[0]);
            let d21 = column_rank_ratio(&p.p21().taps()[0].transpose());
            let count = freq_count.max(1);
            let samples: Vec<FrequencySample> = (0..count)
                .map(|j| {
                    let omega = if count == 1 {
                        0.0
                    } else {
                        std::f64::consts::PI * j as f64 / (count - 1) as f64
                    };
                    FrequencySample {
                        omega,
                        p12_min_singular: complex_column_rank_ratio(&p.p12().evaluate(omega)),
                        p21_min_singular: complex_column_rank_ratio(
                            &p.p21().evaluate(omega).transpose(),
                        ),
                    }
                })
                .collect();
            let p12_min = samples
                .iter()
                .map(|s| s.p12_min_singular)
                .fold(f64::INFINITY, f64::min);
            let p21_min = samples
                .iter()
                .map(|s| s.p21_min_singular)
                .fold(f64::INFINITY, f64::min);
            AssumptionReport {
                p12_left_invertible: p12_min >= tol,
                p21_right_invertible: p21_min >= tol,
                d12_full_column_rank: d12 >= tol,
                d21_full_row_rank: d21 >= tol,
                p12_min_singular: p12_min,
                p21_min_singular: p21_min,
                frequency_samples: samples,
                tol,
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthesisOptions {
    pub qi_tol: f64,
    /// Relative singular-value cutoff of the least-squares solve.
    pub lstsq_rcond: f64,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        SynthesisOptions {
            qi_tol: DEFAULT_QI_TOL,
            lstsq_rcond: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthesisResult {
    pub horizon: usize,
    pub q_opt: FirTransferMatrix,
    /// Finite-horizon H2 norm of `P11 - P12 Q* P21`.
    pub objective: f64,
    pub controller: FirTransferMatrix,
    /// Coordinates of `Q*` in the orthonormalized basis of S.
    pub coefficients: Vec<f64>,
    pub q_membership_residual: f64,
    pub controller_membership_residual: f64,
    /// `||A^T (b - A a)|| / (||A||_F ||b||)` for the assembled system.
    pub normal_equation_residual: f64,
    pub lstsq_rank: usize,
    pub qi: QiReport<FirTransferMatrix>,
}

/// Least-squares data `min_a ||b - A a||` for the model-matching objective.
#[derive(Debug, Clone)]
pub struct ModelMatchingSystem {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl ModelMatchingSystem {
    /// Column `m` is the flattened `P12 Q_m P21` for the orthonormal element `Q_m`.
    pub fn assemble(p: &FirPlant, s: &FirSubspace, horizon: usize) -> Result<Self> {
        let b = DVector::from_vec(p.p11().with_horizon(horizon).flatten());
        let columns = s
            .orthonormal_elements()
            .iter()
            .map(|q| {
                let pq = fir_mul(p.p12(), q, horizon)?;
                Ok(fir_mul(&pq, p.p21(), horizon)?.flatten())
            })
            .collect::<Result<Vec<_>>>()?;
        let a = DMatrix::from_fn(b.len(), columns.len(), |i, j| columns[j][i]);
        Ok(ModelMatchingSystem { a, b })
    }

    /// `||b - A a||`
    pub fn objective(&self, coeffs: &DVector<f64>) -> f64 {
        (&self.b - &self.a * coeffs).norm()
    }
}

fn normalized_membership(s: &FirSubspace, x: &FirTransferMatrix) -> Result<f64> {
    let (_, r) = project_onto_fir_subspace(s, x)?;
    let n = fir_h2_norm(&x.with_horizon(s.horizon()));
    Ok(if n == 0.0 { 0.0 } else { r / n })
}

/// Minimizes `||P11 - P12 Q P21||_{H2}` over `Q in S` on the horizon and
/// recovers the controller `K = h_G(Q*)`. Refuses when S is not QI under G.
pub fn h2_model_match(
    p: &FirPlant,
    s: &FirSubspace,
    horizon: usize,
    opts: &SynthesisOptions,
) -> Result<SynthesisResult> {
    if s.rows() != p.g().cols() || s.cols() != p.g().rows() {
        return Err(Error::dims(
            "h2_model_match",
            format!(
                "subspace elements are ({}, {}), G is {:?}",
                s.rows(),
                s.cols(),
                p.g().shape()
            ),
        ));
    }
    let qi = fir_subspace_qi_check(s, p.g(), opts.qi_tol)?;
    if !qi.qi {
        return Err(Error::NotQuadraticallyInvariant(Box::new(qi)));
    }

    let sys = ModelMatchingSystem::assemble(p, s, horizon)?;
    let (coeffs, rank) = min_norm_lstsq(&sys.a, &sys.b, opts.lstsq_rcond);
    let r = &sys.b - &sys.a * &coeffs;
    let denom = sys.a.norm() * sys.b.norm();
    let normal_equation_residual = if denom == 0.0 {
        0.0
    } else {
        (sys.a.transpose() * &r).norm() / denom
    };

    let q_opt = s.combine_orthonormal(coeffs.as_slice())?;
    let objective = fir_h2_norm(&affine_closed_loop(p, &q_opt, horizon)?);
    let controller = recover_controller(p.g(), &q_opt, horizon)?;
    Ok(SynthesisResult {
        horizon,
        q_membership_residual: normalized_membership(s, &q_opt)?,
        controller_membership_residual: normalized_membership(s, &controller)?,
        q_opt,
        objective,
        controller,
        coefficients: coeffs.iter().copied().collect(),
        normal_equation_residual,
        lstsq_rank: rank,
        qi,
    })
}

/// Minimum-norm least-squares solution through the SVD; returns the numerical rank.
fn min_norm_lstsq(a: &DMatrix<f64>, b: &DVector<f64>, rcond: f64) -> (DVector<f64>, usize) {
    if a.ncols() == 0 {
        return (DVector::zeros(0), 0);
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if smax == 0.0 {
        return (DVector::zeros(a.ncols()), 0);
    }
    let cutoff = rcond * smax;
    let rank = svd.singular_values.iter().filter(|&&s| s > cutoff).count();
    let x = svd.solve(b, cutoff).expect("U and V were computed");
    (x, rank)
}

/// `K = h_G(Q)`, the inverse of the parameterization `Q = h_G(K)`.
pub fn recover_controller(
    g: &FirTransferMatrix,
    q: &FirTransferMatrix,
    horizon: usize,
) -> Result<FirTransferMatrix> {
    fir_hmap(g, q, horizon)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HorizonPoint {
    pub horizon: usize,
    pub objective: f64,
}

/// Optimal finite-horizon objective for a family of subspaces indexed by horizon.
pub fn horizon_sweep(
    p: &FirPlant,
    horizons: &[usize],
    subspace_at: impl Fn(usize) -> Result<FirSubspace>,
    opts: &SynthesisOptions,
) -> Result<Vec<HorizonPoint>> {
    horizons
        .iter()
        .map(|&h| {
            let s = subspace_at(h)?;
            let r = h2_model_match(p, &s, h, opts)?;
            Ok(HorizonPoint {
                horizon: h,
                objective: r.objective,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::Pattern;

    fn p11_full(h: usize) -> FirTransferMatrix {
        let taps = (0..=h)
            .map(|k| {
                Matrix::from_fn(2, 2, |i, j| {
                    1.0 + k as f64 * 0.5 - i as f64 + 2.0 * j as f64
                })
            })
            .collect();
        FirTransferMatrix::new(taps).unwrap()
    }

    fn identity_plant(p11: FirTransferMatrix, h: usize) -> FirPlant {
        FirPlant::new(
            p11,
            FirTransferMatrix::identity(2, h),
            FirTransferMatrix::identity(2, h),
            FirTransferMatrix::zeros(2, 2, h),
        )
        .unwrap()
    }

    #[test]
    fn exact_matching_on_full_subspace() {
        let h = 3;
        let p = identity_plant(p11_full(h), h);
        let s = FirSubspace::from_pattern(&Pattern::full(2, 2), h);
        let r = h2_model_match(&p, &s, h, &SynthesisOptions::default()).unwrap();
        assert!(r.objective < 1e-12);
        assert!(r.q_opt.max_tap_error(p.p11(), h) < 1e-12);
    }

    #[test]
    fn diagonal_subspace_keeps_diagonal_part() {
        let h = 3;
        let p11 = p11_full(h);
        let p = identity_plant(p11.clone(), h);
        let s = FirSubspace::from_pattern(&Pattern::identity(2), h);
        let r = h2_model_match(&p, &s, h, &SynthesisOptions::default()).unwrap();
        let mut off = 0.0;
        for (k, t) in p11.taps().iter().enumerate() {
            let q = &r.q_opt.taps()[k];
            assert!((q[(0, 0)] - t[(0, 0)]).abs() < 1e-12);
            assert!((q[(1, 1)] - t[(1, 1)]).abs() < 1e-12);
            assert!(q[(0, 1)].abs() < 1e-12 && q[(1, 0)].abs() < 1e-12);
            off += t[(0, 1)].powi(2) + t[(1, 0)].powi(2);
        }
        assert!((r.objective - off.sqrt()).abs() < 1e-12);
        assert!(r.normal_equation_residual < 1e-12);
    }

    #[test]
    fn zero_p12_gives_minimum_norm_zero() {
        let h = 2;
        let p11 = p11_full(h);
        let p = FirPlant::new(
            p11.clone(),
            FirTransferMatrix::zeros(2, 2, h),
            FirTransferMatrix::identity(2, h),
            FirTransferMatrix::zeros(2, 2, h),
        )
        .unwrap();
        let s = FirSubspace::from_pattern(&Pattern::full(2, 2), h);
        let r = h2_model_match(&p, &s, h, &SynthesisOptions::default()).unwrap();
        assert_eq!(fir_h2_norm(&r.q_opt), 0.0);
        assert_eq!(r.lstsq_rank, 0);
        assert!((r.objective - fir_h2_norm(&p11)).abs() < 1e-12);
    }

    #[test]
    fn refuses_non_qi() {
        let h = 2;
        let g = FirTransferMatrix::delayed(Matrix::from_element(2, 2, 1.0), 1, h);
        let p = FirPlant::new(
            p11_full(h),
            FirTransferMatrix::identity(2, h),
            FirTransferMatrix::identity(2, h),
            g,
        )
        .unwrap();
        let s = FirSubspace::from_pattern(&Pattern::identity(2), h);
        match h2_model_match(&p, &s, h, &SynthesisOptions::default()) {
            Err(Error::NotQuadraticallyInvariant(report)) => {
                assert!(!report.qi);
                assert!(report.witness_controller.is_some());
            }
            other => panic!("expected refusal, got {other:?}"),
        }
    }

    #[test]
    fn recover_controller_cases() {
        let g = FirTransferMatrix::scalar(&[0.0, 0.6]);
        let zero = recover_controller(&g, &FirTransferMatrix::scalar(&[0.0]), 4).unwrap();
        assert_eq!(fir_h2_norm(&zero), 0.0);
        let q = 0.9;
        let k = recover_controller(&g, &FirTransferMatrix::scalar(&[q]), 5).unwrap();
        for (n, t) in k.taps().iter().enumerate() {
            let want = -q.powi(n as i32 + 1) * 0.6f64.powi(n as i32);
            assert!((t[(0, 0)] - want).abs() < 1e-14);
        }
    }

    #[test]
    fn static_rank_checks() {
        let p = StaticPlant::new(
            Matrix::zeros(2, 2),
            Matrix::identity(2, 2),
            Matrix::identity(2, 2),
            Matrix::zeros(2, 2),
        )
        .unwrap();
        let r = rank_checks(PlantRef::Static(&p), DEFAULT_FREQ_COUNT, DEFAULT_RANK_TOL);
        assert!(r.p12_left_invertible && r.p21_right_invertible);
        let wide = StaticPlant::new(
            Matrix::zeros(2, 1),
            Matrix::from_row_slice(2, 4, &[0.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0, -2.0]),
            Matrix::from_row_slice(4, 1, &[0.0, 1.0, 0.0, -1.0]),
            Matrix::zeros(4, 4),
        )
        .unwrap();
        let r = rank_checks(
            PlantRef::Static(&wide),
            DEFAULT_FREQ_COUNT,
            DEFAULT_RANK_TOL,
        );
        assert!(!r.p12_left_invertible && !r.p21_right_invertible);
    }

    #[test]
    fn fir_rank_checks_detect_frequency_zero() {
        // P12 = 1 - z^{-1} vanishes at omega = 0.
        let h = 1;
        let p = FirPlant::new(
            FirTransferMatrix::zeros(1, 1, h),
            FirTransferMatrix::scalar(&[1.0, -1.0]),
            FirTransferMatrix::scalar(&[1.0, 0.0]),
            FirTransferMatrix::zeros(1, 1, h),
        )
        .unwrap();
        let r = rank_checks(PlantRef::Fir(&p), 16, DEFAULT_RANK_TOL);
        assert!(r.d12_full_column_rank);
        assert!(!r.p12_left_invertible);
        assert!(r.p21_right_invertible);
        assert_eq!(r.frequency_samples.len(), 16);
    }
}
