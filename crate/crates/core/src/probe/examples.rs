//! The three reference examples: a non-QI subspace with a convex (disc)
//! closed-loop set, the same subspace with a nonconvex closed-loop set, and a
//! non-QI subspace whose closed-loop set is nonetheless affine.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cloud::{probe_image, sample_subspace, scheme_params, PointCloud, SamplingScheme};
use super::convexity::{
    convexity_probe, set_equality_probe, verify_midpoint_witness, ConvexityOptions, EqualityMode,
    ProbeReport, Verdict, Witness,
};
use crate::error::Result;
use crate::feedback::{closed_loop, StaticPlant, DEFAULT_COND_TOL};
use crate::matrix::Matrix;
use crate::subspace::{subspace_qi_check, SubspaceBasis, DEFAULT_QI_TOL};
use crate::synthesis::{rank_checks, PlantRef, DEFAULT_RANK_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExampleId {
    A,
    B,
    Affine,
}

impl std::str::FromStr for ExampleId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "a" => Ok(ExampleId::A),
            "b" => Ok(ExampleId::B),
            "affine" => Ok(ExampleId::Affine),
            other => Err(format!(
                "unknown example {other:?}; expected a, b or affine"
            )),
        }
    }
}

impl std::fmt::Display for ExampleId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ExampleId::A => "a",
            ExampleId::B => "b",
            ExampleId::Affine => "affine",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleOptions {
    /// `(t, s)` grid on `[-grid_half_width, grid_half_width]^2`.
    pub grid_points: usize,
    pub grid_half_width: f64,
    /// Extra samples on circles `t^2 + s^2 = r^2` for each listed radius.
    pub polar_radii: Vec<f64>,
    /// Angles per circle; a multiple of 4 keeps the sample set symmetric
    /// under swapping `t` and `s`.
    pub polar_angles: usize,
    pub affine_draws: usize,
    pub affine_triples: usize,
    pub seed: u64,
    pub match_tol: f64,
    pub probe: ConvexityOptions,
}

impl Default for ExampleOptions {
    fn default() -> Self {
        ExampleOptions {
            grid_points: 301,
            grid_half_width: 6.0,
            polar_radii: (0..=20).map(|i| 0.9 + 0.01 * i as f64).collect(),
            polar_angles: 720,
            affine_draws: 20,
            affine_triples: 100,
            seed: 42,
            match_tol: 1e-9,
            probe: ConvexityOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

impl Check {
    fn at_most(name: &str, value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            passed: value <= threshold,
            value,
            threshold,
            detail: detail.into(),
        }
    }

    fn at_least(name: &str, value: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            passed: value >= threshold,
            value,
            threshold,
            detail: detail.into(),
        }
    }

    fn holds(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            passed,
            value: if passed { 1.0 } else { 0.0 },
            threshold: 1.0,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExampleReport {
    pub id: ExampleId,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub probe: Option<ProbeReport>,
    /// The sampled closed-loop set (not serialized; export it as CSV).
    #[serde(skip)]
    pub cloud: Option<PointCloud>,
}

impl ExampleReport {
    fn new(id: ExampleId, seed: u64, checks: Vec<Check>) -> Self {
        ExampleReport {
            id,
            seed,
            passed: checks.iter().all(|c| c.passed),
            checks,
            probe: None,
            cloud: None,
        }
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn m(rows: usize, cols: usize, data: &[f64]) -> Matrix {
    Matrix::from_row_slice(rows, cols, data)
}

/// The shared plant block and the subspace `{diag(t, t, s, s)}`.
pub fn nonaffine_core() -> (Matrix, SubspaceBasis) {
    #[rustfmt::skip]
    let g = m(4, 4, &[
         0.0, 1.0,  0.0, 0.0,
        -1.0, 0.0,  1.0, 0.0,
         0.0, 0.0,  0.0, 1.0,
         1.0, 0.0, -1.0, 0.0,
    ]);
    let t = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 1.0, 0.0, 0.0]));
    let s = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.0, 0.0, 1.0, 1.0]));
    let basis = SubspaceBasis::from_elements(vec![t, s]).expect("two independent elements");
    (g, basis)
}

pub fn example_a_plant() -> StaticPlant {
    let (g, _) = nonaffine_core();
    StaticPlant::new(
        Matrix::zeros(2, 1),
        m(2, 4, &[0.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0, -2.0]),
        m(4, 1, &[0.0, 1.0, 0.0, -1.0]),
        g,
    )
    .expect("consistent dimensions")
}

pub fn example_b_plant() -> StaticPlant {
    let (g, _) = nonaffine_core();
    StaticPlant::new(
        Matrix::zeros(2, 1),
        m(2, 4, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0]),
        m(4, 1, &[0.0, 2.0, 0.0, -1.0]),
        g,
    )
    .expect("consistent dimensions")
}

/// Case (a) closed-loop map as printed: `[2s, 2t] / (1 + s^2 + t^2)`.
pub fn example_a_printed(t: f64, s: f64) -> [f64; 2] {
    let d = 1.0 + s * s + t * t;
    [2.0 * s / d, 2.0 * t / d]
}

/// Case (a) closed-loop map in the component order obtained by evaluating
/// `P11 - P12 h_G(K) P21`: `[2t, 2s] / (1 + s^2 + t^2)`. The printed form is
/// the same set with the components swapped.
pub fn example_a_evaluated(t: f64, s: f64) -> [f64; 2] {
    let [x, y] = example_a_printed(t, s);
    [y, x]
}

/// Case (b) closed-loop map: `[(s^2+2) t^2, s^2 (1-t^2)] / (1 + s^2 + t^2)`.
pub fn example_b_printed(t: f64, s: f64) -> [f64; 2] {
    let d = 1.0 + s * s + t * t;
    [(s * s + 2.0) * t * t / d, s * s * (1.0 - t * t) / d]
}

/// `(t, s)` samples: the square grid followed by the polar refinement.
pub fn example_params(opts: &ExampleOptions) -> Result<Vec<Vec<f64>>> {
    let w = opts.grid_half_width;
    let mut params = scheme_params(
        &SamplingScheme::Grid {
            ranges: vec![(-w, w), (-w, w)],
            points_per_dim: opts.grid_points,
        },
        2,
        opts.seed,
    )?;
    for &r in &opts.polar_radii {
        for j in 0..opts.polar_angles {
            let th = std::f64::consts::TAU * j as f64 / opts.polar_angles as f64;
            params.push(vec![r * th.cos(), r * th.sin()]);
        }
    }
    Ok(params)
}

fn nonaffine_cloud(plant: &StaticPlant, opts: &ExampleOptions) -> Result<PointCloud> {
    let (_, basis) = nonaffine_core();
    let samples = sample_subspace(
        &basis,
        plant.g(),
        &SamplingScheme::List {
            params: example_params(opts)?,
        },
        opts.seed,
        DEFAULT_COND_TOL,
    )?;
    probe_image(plant, &samples)
}

fn max_formula_error(cloud: &PointCloud, f: fn(f64, f64) -> [f64; 2]) -> (f64, usize) {
    let mut worst = (0.0, 0);
    for (i, (p, x)) in cloud.params.iter().zip(&cloud.points).enumerate() {
        let c = f(p[0], p[1]);
        let e = (x[0] - c[0]).abs().max((x[1] - c[1]).abs());
        if e > worst.0 {
            worst = (e, i);
        }
    }
    worst
}

fn formula_cloud(cloud: &PointCloud, f: fn(f64, f64) -> [f64; 2]) -> PointCloud {
    let points = cloud
        .params
        .iter()
        .map(|p| f(p[0], p[1]).to_vec())
        .collect();
    PointCloud::new(points, cloud.params.clone(), cloud.meta.clone()).expect("parallel lists")
}

fn shared_checks(plant: &StaticPlant, checks: &mut Vec<Check>) -> Result<()> {
    let (g, basis) = nonaffine_core();
    let qi = subspace_qi_check(&basis, &g, DEFAULT_QI_TOL)?;
    checks.push(Check::holds(
        "s_not_qi",
        !qi.qi,
        format!("witness residual {:.3e}", qi.witness_residual),
    ));
    let ranks = rank_checks(PlantRef::Static(plant), 1, DEFAULT_RANK_TOL);
    checks.push(Check::holds(
        "p12_not_left_invertible",
        !ranks.p12_left_invertible,
        format!("relative sigma_min {:.3e}", ranks.p12_min_singular),
    ));
    checks.push(Check::holds(
        "p21_not_right_invertible",
        !ranks.p21_right_invertible,
        format!("relative sigma_min {:.3e}", ranks.p21_min_singular),
    ));
    Ok(())
}

fn reproduce_a(opts: &ExampleOptions) -> Result<ExampleReport> {
    let plant = example_a_plant();
    let cloud = nonaffine_cloud(&plant, opts)?;
    let tol = opts.match_tol;
    let mut checks = Vec::new();

    let (err, at) = max_formula_error(&cloud, example_a_evaluated);
    checks.push(Check::at_most(
        "closed_form_pointwise",
        err,
        tol,
        format!(
            "[2t, 2s]/(1+s^2+t^2) vs direct evaluation; worst at (t,s) = {:?}",
            cloud.params[at]
        ),
    ));
    let printed = formula_cloud(&cloud, example_a_printed);
    let eq = set_equality_probe(&cloud, &printed, tol, EqualityMode::Hausdorff)?;
    checks.push(Check::at_most(
        "printed_form_same_set",
        eq.distance,
        tol,
        "Hausdorff distance to the printed [2s, 2t]/(1+s^2+t^2) over a swap-symmetric sample",
    ));

    let norms: Vec<f64> = cloud
        .points
        .iter()
        .map(|x| x.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let max_norm = norms.iter().copied().fold(0.0, f64::max);
    checks.push(Check::at_most(
        "max_norm",
        max_norm,
        1.0 + 1e-9,
        "cloud lies in the unit disc",
    ));
    checks.push(Check::at_least(
        "boundary_reached",
        max_norm,
        1.0 - 1e-6,
        "some sample reaches the unit circle",
    ));

    let probe = convexity_probe(&cloud, &opts.probe);
    checks.push(Check::holds(
        "convexity_probe_pass",
        probe.verdict == Verdict::Pass,
        format!(
            "{:?}, coverage {:.3e}, reject_tol {:.3e}",
            probe.verdict, probe.coverage_radius, probe.reject_tol
        ),
    ));
    shared_checks(&plant, &mut checks)?;

    let mut report = ExampleReport::new(ExampleId::A, opts.seed, checks);
    report.probe = Some(probe);
    report.cloud = Some(cloud);
    Ok(report)
}

fn reproduce_b(opts: &ExampleOptions) -> Result<ExampleReport> {
    let plant = example_b_plant();
    let cloud = nonaffine_cloud(&plant, opts)?;
    let tol = opts.match_tol;
    let mut checks = Vec::new();

    let (err, at) = max_formula_error(&cloud, example_b_printed);
    checks.push(Check::at_most(
        "closed_form_pointwise",
        err,
        tol,
        format!("worst at (t,s) = {:?}", cloud.params[at]),
    ));
    let k = Matrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.0, 0.0, 1.0, 1.0]));
    let x = closed_loop(&plant, &k)?;
    let dist = (x[0] - 0.0).abs().max((x[1] - 0.5).abs());
    checks.push(Check::at_most(
        "contains_0_half",
        dist,
        tol,
        "(t,s) = (0,1) maps to (0, 0.5)",
    ));

    let probe = convexity_probe(&cloud, &opts.probe);
    let (gap, sound) = match &probe.witness {
        Some(w @ Witness::Midpoint { gap, .. }) => {
            (*gap, verify_midpoint_witness(&cloud, w, probe.reject_tol))
        }
        _ => (0.0, false),
    };
    checks.push(Check::holds(
        "convexity_probe_witness",
        probe.verdict == Verdict::NonconvexWitness && sound,
        format!("{:?}", probe.verdict),
    ));
    checks.push(Check::at_least(
        "witness_gap_fraction",
        gap / probe.diameter,
        0.01,
        format!("gap {gap:.4} over diameter {:.4}", probe.diameter),
    ));
    shared_checks(&plant, &mut checks)?;

    let mut report = ExampleReport::new(ExampleId::B, opts.seed, checks);
    report.probe = Some(probe);
    report.cloud = Some(cloud);
    Ok(report)
}

/// Plant data for the affine example.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineData {
    pub a: f64,
    pub b: [f64; 2],
    pub c: [f64; 2],
    pub g: [f64; 3],
}

impl AffineData {
    pub fn random<R: Rng>(rng: &mut R) -> Self {
        let mut u = || rng.random_range(-1.0..1.0);
        AffineData {
            a: u(),
            b: [u(), u()],
            c: [u(), u()],
            g: [u(), u(), u()],
        }
    }

    /// The 3-input plant with subspace of diagonal controllers.
    pub fn plant(&self) -> StaticPlant {
        let AffineData { a, b, c, g } = *self;
        StaticPlant::new(
            m(1, 1, &[a]),
            m(1, 3, &[b[0], b[1], b[1]]),
            m(3, 1, &[c[0], c[0], c[1]]),
            m(3, 3, &[g[0], 0.0, 0.0, g[0], 0.0, 0.0, g[1], g[2], g[2]]),
        )
        .expect("consistent dimensions")
    }

    /// The reduced 2-input plant with lower-triangular controllers.
    pub fn reduced_plant(&self) -> StaticPlant {
        let AffineData { a, b, c, g } = *self;
        StaticPlant::new(
            m(1, 1, &[a]),
            m(1, 2, &[b[0], b[1]]),
            m(2, 1, &[c[0], c[1]]),
            m(2, 2, &[g[0], 0.0, g[1], g[2]]),
        )
        .expect("consistent dimensions")
    }

    /// `diag(k1, k2, k3)`.
    pub fn subspace() -> SubspaceBasis {
        let e = |i: usize| crate::matrix::unit(3, 3, i, i);
        SubspaceBasis::from_elements(vec![e(0), e(1), e(2)]).expect("independent")
    }

    /// `[[k1, 0], [k2, k3]]`.
    pub fn reduced_subspace() -> SubspaceBasis {
        let e = |i: usize, j: usize| crate::matrix::unit(2, 2, i, j);
        SubspaceBasis::from_elements(vec![e(0, 0), e(1, 0), e(1, 1)]).expect("independent")
    }
}

fn reproduce_affine(opts: &ExampleOptions) -> Result<ExampleReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let (s, st) = (AffineData::subspace(), AffineData::reduced_subspace());
    let mut s_qi_count = 0;
    let mut st_not_qi_count = 0;
    let mut worst = 0.0_f64;
    let mut compared = 0;
    let mut excluded = 0;
    let mut mismatched_domains = 0;
    for _ in 0..opts.affine_draws {
        let data = AffineData::random(&mut rng);
        let (p, pt) = (data.plant(), data.reduced_plant());
        if subspace_qi_check(&s, p.g(), DEFAULT_QI_TOL)?.qi {
            s_qi_count += 1;
        }
        if !subspace_qi_check(&st, pt.g(), DEFAULT_QI_TOL)?.qi {
            st_not_qi_count += 1;
        }
        let params: Vec<Vec<f64>> = (0..opts.affine_triples)
            .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let scheme = SamplingScheme::List { params };
        let samples = sample_subspace(&s, p.g(), &scheme, opts.seed, DEFAULT_COND_TOL)?;
        let samples_t = sample_subspace(&st, pt.g(), &scheme, opts.seed, DEFAULT_COND_TOL)?;
        excluded += samples.excluded.len();
        if samples.params != samples_t.params {
            mismatched_domains += 1;
            continue;
        }
        let c = probe_image(&p, &samples)?;
        let ct = probe_image(&pt, &samples_t)?;
        let eq = set_equality_probe(&c, &ct, opts.match_tol, EqualityMode::Matched)?;
        worst = worst.max(eq.distance);
        compared += c.len();
    }
    let draws = opts.affine_draws;
    let checks = vec![
        Check::holds(
            "s_not_qi",
            s_qi_count == 0,
            format!("diagonal S was QI in {s_qi_count} of {draws} draws"),
        ),
        Check::holds(
            "reduced_s_qi",
            st_not_qi_count == 0,
            format!("lower-triangular S was not QI in {st_not_qi_count} of {draws} draws"),
        ),
        Check::holds(
            "same_domain",
            mismatched_domains == 0,
            format!("{excluded} triples outside M; {mismatched_domains} draws disagreed on M"),
        ),
        Check::at_most(
            "matched_closed_loops",
            worst,
            opts.match_tol,
            format!("max |C - C~| over {compared} matched triples"),
        ),
    ];
    Ok(ExampleReport::new(ExampleId::Affine, opts.seed, checks))
}

/// Rebuilds one reference example from embedded data and reports each check.
pub fn reproduce_example(id: ExampleId, opts: &ExampleOptions) -> Result<ExampleReport> {
    match id {
        ExampleId::A => reproduce_a(opts),
        ExampleId::B => reproduce_b(opts),
        ExampleId::Affine => reproduce_affine(opts),
    }
}
