//! Sampling-based probes of controller sets and their closed-loop images.

mod cloud;
mod convexity;
mod examples;
mod kdtree;

pub use cloud::{
    probe_hmap_image, probe_image, sample_subspace, scheme_params, CloudMeta, ControllerSamples,
    PointCloud, SamplingScheme,
};
pub use convexity::{
    bounding_diameter, convexity_probe, coverage_radius, set_equality_probe, star_shape_probe,
    verify_midpoint_witness, ConvexityOptions, EqualityMode, EqualityReport, ProbeReport, Verdict,
    Witness,
};
pub use examples::*;
