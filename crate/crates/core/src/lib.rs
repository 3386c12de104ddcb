//! Quadratic invariance, the feedback map `h_G` and convex structured synthesis.
//!
//! The crate is organized around the objects of decentralized control design:
//!
//! * [`pattern`]: boolean sparsity patterns and the pattern-level QI test.
//! * [`feedback`] and [`subspace`]: static plants, `h_G(K) = -K(I - GK)^{-1}`,
//!   closed-loop maps and exact QI testing for matrix subspaces.
//! * [`fir`]: the same objects for causal FIR systems on a truncation horizon.
//! * [`synthesis`]: H2 model matching over the Youla-type parameter `Q = h_G(K)`.
//! * [`probe`]: sampling-based convexity, star-shape and set-equality probes,
//!   and the reference examples.

pub mod error;
pub mod feedback;
pub mod fir;
pub mod matrix;
pub mod pattern;
pub mod probe;
pub mod report;
pub mod subspace;
pub mod synthesis;

pub use error::{Error, Result};
pub use feedback::{closed_loop, hmap, homotopy_g, in_domain_m, StaticPlant};
pub use fir::{
    fir_causal_inverse, fir_h2_norm, fir_hmap, fir_mul, FirPlant, FirSubspace, FirTransferMatrix,
};
pub use matrix::{Dense, Matrix};
pub use pattern::{pattern_qi_check, pattern_to_basis, Pattern};
pub use probe::{PointCloud, ProbeReport, Verdict};
pub use report::{QiReport, WitnessIndices};
pub use subspace::{project_onto_subspace, subspace_qi_check, SubspaceBasis};
pub use synthesis::{h2_model_match, rank_checks, AssumptionReport, SynthesisResult};
