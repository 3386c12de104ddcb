use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::cloud::PointCloud;
use super::kdtree::KdTree;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    NonconvexWitness,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    /// Two cloud members whose midpoint is far from every cloud member.
    Midpoint {
        index_a: usize,
        index_b: usize,
        point_a: Vec<f64>,
        point_b: Vec<f64>,
        midpoint: Vec<f64>,
        gap: f64,
        nearest_index: usize,
    },
    /// A cloud member `v` such that `alpha * v` is far from the cloud.
    Scaling {
        index: usize,
        point: Vec<f64>,
        alpha: f64,
        scaled: Vec<f64>,
        gap: f64,
        nearest_index: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub verdict: Verdict,
    pub witness: Option<Witness>,
    /// Largest distance from a sample to its nearest distinct sample.
    pub coverage_radius: f64,
    /// Bounding-box diagonal of the cloud (an upper bound on its diameter).
    pub diameter: f64,
    pub reject_tol: f64,
    /// Inward hull margin used to filter boundary midpoints.
    pub interior_margin: f64,
    pub candidates_tested: usize,
    pub points: usize,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexityOptions {
    /// Gap threshold; `None` picks `max(0.01 * diameter, 1.1 * coverage_radius)`.
    pub reject_tol: Option<f64>,
    /// Inward hull margin as a fraction of the diameter.
    pub margin_fraction: f64,
    pub random_pairs: usize,
    pub antipodal_pairs: usize,
    pub random_directions: usize,
    pub seed: u64,
}

impl Default for ConvexityOptions {
    fn default() -> Self {
        ConvexityOptions {
            reject_tol: None,
            margin_fraction: 1e-3,
            random_pairs: 20_000,
            antipodal_pairs: 5_000,
            random_directions: 64,
            seed: 42,
        }
    }
}

impl ConvexityOptions {
    pub fn with_reject_tol(reject_tol: f64) -> Self {
        ConvexityOptions {
            reject_tol: Some(reject_tol),
            ..Self::default()
        }
    }
}

/// Largest nearest-distinct-neighbour distance in the cloud.
pub fn coverage_radius(points: &[Vec<f64>]) -> f64 {
    let tree = KdTree::build(points);
    points
        .iter()
        .filter_map(|p| tree.nearest_beyond(p, 0.0).map(|(_, d)| d))
        .fold(0.0, f64::max)
}

/// Bounding-box diagonal.
pub fn bounding_diameter(points: &[Vec<f64>]) -> f64 {
    let Some(first) = points.first() else {
        return 0.0;
    };
    let mut lo = first.clone();
    let mut hi = first.clone();
    for p in points {
        for (k, &x) in p.iter().enumerate() {
            lo[k] = lo[k].min(x);
            hi[k] = hi[k].max(x);
        }
    }
    lo.iter()
        .zip(&hi)
        .map(|(a, b)| (b - a) * (b - a))
        .sum::<f64>()
        .sqrt()
}

/// Support functions of the cloud along a fixed set of directions inside its
/// principal subspace. Used for a conservative hull-depth estimate.
struct HullSketch {
    center: DVector<f64>,
    /// Rows are unit directions expressed in ambient coordinates.
    directions: DMatrix<f64>,
    support: Vec<f64>,
    extreme: Vec<usize>,
}

impl HullSketch {
    fn build(points: &[Vec<f64>], max_rank: usize, extra: usize, rng: &mut ChaCha8Rng) -> Self {
        let n = points.len();
        let dim = points[0].len();
        let mut center = DVector::zeros(dim);
        for p in points {
            center += DVector::from_column_slice(p);
        }
        center /= n as f64;
        let mut cov = DMatrix::zeros(dim, dim);
        for p in points {
            let y = DVector::from_column_slice(p) - &center;
            cov.syger(1.0, &y, &y, 1.0);
        }
        let eig = cov.symmetric_eigen();
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[b]
                .total_cmp(&eig.eigenvalues[a])
                .then(a.cmp(&b))
        });
        let top = order.first().map_or(0.0, |&i| eig.eigenvalues[i]);
        let rank = order
            .iter()
            .filter(|&&i| eig.eigenvalues[i] > 1e-12 * top && top > 0.0)
            .count()
            .min(max_rank);
        let axes: Vec<DVector<f64>> = order[..rank]
            .iter()
            .map(|&i| eig.eigenvectors.column(i).into_owned())
            .collect();

        let mut local: Vec<DVector<f64>> = (0..rank)
            .map(|i| {
                let mut e = DVector::zeros(rank);
                e[i] = 1.0;
                e
            })
            .collect();
        if rank > 0 {
            for _ in 0..extra {
                let v = DVector::from_fn(rank, |_, _| rng.sample::<f64, _>(StandardNormal));
                let norm = v.norm();
                if norm > 0.0 {
                    local.push(v / norm);
                }
            }
        }
        let negated: Vec<DVector<f64>> = local.iter().map(|v| -v).collect();
        local.extend(negated);

        let mut directions = DMatrix::zeros(local.len(), dim);
        for (r, v) in local.iter().enumerate() {
            let mut amb = DVector::zeros(dim);
            for (k, axis) in axes.iter().enumerate() {
                amb.axpy(v[k], axis, 1.0);
            }
            directions.set_row(r, &amb.transpose());
        }

        let mut support = vec![f64::NEG_INFINITY; local.len()];
        let mut arg = vec![0usize; local.len()];
        for (i, p) in points.iter().enumerate() {
            let y = DVector::from_column_slice(p) - &center;
            let proj = &directions * y;
            for r in 0..local.len() {
                if proj[r] > support[r] {
                    support[r] = proj[r];
                    arg[r] = i;
                }
            }
        }
        let mut extreme = arg;
        extreme.sort_unstable();
        extreme.dedup();
        HullSketch {
            center,
            directions,
            support,
            extreme,
        }
    }

    /// Smallest slack over all sketched half-spaces (positive means inside).
    fn depth(&self, x: &[f64]) -> f64 {
        if self.support.is_empty() {
            return 0.0;
        }
        let y = DVector::from_column_slice(x) - &self.center;
        let proj = &self.directions * y;
        self.support
            .iter()
            .zip(proj.iter())
            .map(|(s, p)| s - p)
            .fold(f64::INFINITY, f64::min)
    }
}

fn midpoint(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect()
}

fn candidate_pairs(
    cloud: &PointCloud,
    sketch: &HullSketch,
    opts: &ConvexityOptions,
    rng: &mut ChaCha8Rng,
) -> Vec<(usize, usize)> {
    let n = cloud.len();
    let mut pairs = Vec::new();
    for (a, &i) in sketch.extreme.iter().enumerate() {
        for &j in &sketch.extreme[a + 1..] {
            pairs.push((i, j));
        }
    }
    if n <= 200 {
        for i in 0..n {
            for j in i + 1..n {
                pairs.push((i, j));
            }
        }
    } else {
        for _ in 0..opts.random_pairs {
            pairs.push((rng.random_range(0..n), rng.random_range(0..n)));
        }
    }
    // Pairs whose parameters are roughly opposite: their midpoints sit where a
    // convex image would have to fill in around the image of the origin.
    if cloud.param_dim() > 0 {
        let tree = KdTree::build(&cloud.params);
        let sources: Vec<usize> = if n <= opts.antipodal_pairs {
            (0..n).collect()
        } else {
            (0..opts.antipodal_pairs)
                .map(|_| rng.random_range(0..n))
                .collect()
        };
        for i in sources {
            let neg: Vec<f64> = cloud.params[i].iter().map(|x| -x).collect();
            if let Some((j, _)) = tree.nearest(&neg) {
                pairs.push((i, j));
            }
        }
    }
    pairs
}

/// Sampling surrogate for convexity: looks for pairs of cloud members whose
/// midpoint lies inside the (sketched) hull but farther than `reject_tol` from
/// every cloud member.
///
/// A pass is evidence, not proof; `coverage_radius` says how fine the sampling
/// was. Any witness is exact and re-checkable from the report alone.
pub fn convexity_probe(cloud: &PointCloud, opts: &ConvexityOptions) -> ProbeReport {
    let n = cloud.len();
    let coverage = coverage_radius(&cloud.points);
    let diameter = bounding_diameter(&cloud.points);
    let reject_tol = opts
        .reject_tol
        .unwrap_or_else(|| (0.01 * diameter).max(1.1 * coverage));
    let margin = opts.margin_fraction * diameter;
    let mut report = ProbeReport {
        verdict: Verdict::Pass,
        witness: None,
        coverage_radius: coverage,
        diameter,
        reject_tol,
        interior_margin: margin,
        candidates_tested: 0,
        points: n,
        notes: Vec::new(),
    };
    if n < 2 || diameter == 0.0 {
        report.notes.push("fewer than two distinct points".into());
        return report;
    }
    if opts.reject_tol.is_none() && 1.1 * coverage > 0.01 * diameter {
        report.notes.push(format!(
            "reject tolerance set by sampling density; gaps below {reject_tol:.3e} \
             ({:.2}% of the diameter) are not resolvable",
            100.0 * reject_tol / diameter
        ));
    }
    if coverage > reject_tol {
        report.verdict = Verdict::Inconclusive;
        report.notes.push(format!(
            "coverage radius {coverage:.3e} exceeds reject tolerance {reject_tol:.3e}"
        ));
        return report;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let max_rank = if cloud.param_dim() > 0 {
        cloud.param_dim()
    } else {
        cloud.dim()
    };
    let sketch = HullSketch::build(&cloud.points, max_rank, opts.random_directions, &mut rng);
    let pairs = candidate_pairs(cloud, &sketch, opts, &mut rng);
    report.candidates_tested = pairs.len();

    let tree = KdTree::build(&cloud.points);
    let mut best: Option<(f64, usize, usize, usize)> = None;
    for &(i, j) in &pairs {
        if i == j {
            continue;
        }
        let m = midpoint(&cloud.points[i], &cloud.points[j]);
        if sketch.depth(&m) < margin {
            continue;
        }
        let Some((near, gap)) = tree.nearest(&m) else {
            continue;
        };
        if gap > reject_tol && best.is_none_or(|(g, ..)| gap > g) {
            best = Some((gap, i.min(j), i.max(j), near));
        }
    }
    if let Some((gap, a, b, near)) = best {
        report.verdict = Verdict::NonconvexWitness;
        report.witness = Some(Witness::Midpoint {
            index_a: a,
            index_b: b,
            point_a: cloud.points[a].clone(),
            point_b: cloud.points[b].clone(),
            midpoint: midpoint(&cloud.points[a], &cloud.points[b]),
            gap,
            nearest_index: near,
        });
    }
    report
}

/// Re-checks a midpoint witness against the cloud using brute force.
pub fn verify_midpoint_witness(cloud: &PointCloud, witness: &Witness, reject_tol: f64) -> bool {
    let Witness::Midpoint {
        point_a,
        point_b,
        midpoint: m,
        ..
    } = witness
    else {
        return false;
    };
    let member = |p: &Vec<f64>| cloud.points.iter().any(|q| q == p);
    if !member(point_a) || !member(point_b) || *m != midpoint(point_a, point_b) {
        return false;
    }
    cloud.points.iter().all(|q| {
        q.iter()
            .zip(m)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
            > reject_tol
    })
}

/// Checks that `alpha * v` stays within `tol` of the cloud for every member
/// `v` and every `alpha`. The verdict is inconclusive when the cloud is too
/// sparse for `tol` to be meaningful.
pub fn star_shape_probe(cloud: &PointCloud, alphas: &[f64], tol: f64) -> ProbeReport {
    let coverage = coverage_radius(&cloud.points);
    let mut report = ProbeReport {
        verdict: Verdict::Pass,
        witness: None,
        coverage_radius: coverage,
        diameter: bounding_diameter(&cloud.points),
        reject_tol: tol,
        interior_margin: 0.0,
        candidates_tested: cloud.len() * alphas.len(),
        points: cloud.len(),
        notes: Vec::new(),
    };
    let tree = KdTree::build(&cloud.points);
    let mut best: Option<(f64, usize, f64, usize)> = None;
    for (i, v) in cloud.points.iter().enumerate() {
        for &alpha in alphas {
            let scaled: Vec<f64> = v.iter().map(|x| alpha * x).collect();
            if let Some((near, gap)) = tree.nearest(&scaled) {
                if gap > tol && best.is_none_or(|(g, ..)| gap > g) {
                    best = Some((gap, i, alpha, near));
                }
            }
        }
    }
    if let Some((gap, i, alpha, near)) = best {
        report.verdict = Verdict::NonconvexWitness;
        report.witness = Some(Witness::Scaling {
            index: i,
            point: cloud.points[i].clone(),
            alpha,
            scaled: cloud.points[i].iter().map(|x| alpha * x).collect(),
            gap,
            nearest_index: near,
        });
        report
            .notes
            .push("cloud is not star-shaped about the origin".into());
        if coverage > tol {
            report.verdict = Verdict::Inconclusive;
            report.notes.push(format!(
                "coverage radius {coverage:.3e} exceeds tolerance {tol:.3e}"
            ));
        }
    }
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EqualityMode {
    /// Symmetric nearest-neighbour distance between the clouds.
    Hausdorff,
    /// Point-by-point comparison for clouds generated from the same parameters.
    Matched,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EqualityReport {
    pub equal: bool,
    pub mode: EqualityMode,
    /// Hausdorff distance, or the largest entrywise difference in matched mode.
    pub distance: f64,
    pub tol: f64,
    /// Index (into A, or into the matched list) attaining `distance`.
    pub worst_index: Option<usize>,
}

pub fn set_equality_probe(
    a: &PointCloud,
    b: &PointCloud,
    tol: f64,
    mode: EqualityMode,
) -> Result<EqualityReport> {
    if !a.is_empty() && !b.is_empty() && a.dim() != b.dim() {
        return Err(Error::dims(
            "set_equality_probe",
            format!("point dimensions {} and {}", a.dim(), b.dim()),
        ));
    }
    let (distance, worst_index) = match mode {
        EqualityMode::Hausdorff => hausdorff(a, b),
        EqualityMode::Matched => {
            if a.len() != b.len() {
                return Err(Error::dims(
                    "set_equality_probe",
                    format!(
                        "matched mode needs equal sizes, got {} and {}",
                        a.len(),
                        b.len()
                    ),
                ));
            }
            if a.params != b.params {
                return Err(Error::Invalid(
                    "matched mode needs identical parameter lists".into(),
                ));
            }
            let mut worst = (0.0, None);
            for (i, (p, q)) in a.points.iter().zip(&b.points).enumerate() {
                let d = p
                    .iter()
                    .zip(q)
                    .map(|(x, y)| (x - y).abs())
                    .fold(0.0, f64::max);
                if worst.1.is_none() || d > worst.0 {
                    worst = (d, Some(i));
                }
            }
            worst
        }
    };
    Ok(EqualityReport {
        equal: distance <= tol,
        mode,
        distance,
        tol,
        worst_index,
    })
}

fn hausdorff(a: &PointCloud, b: &PointCloud) -> (f64, Option<usize>) {
    if a.is_empty() || b.is_empty() {
        let d = if a.is_empty() && b.is_empty() {
            0.0
        } else {
            f64::INFINITY
        };
        return (d, None);
    }
    let ta = KdTree::build(&a.points);
    let tb = KdTree::build(&b.points);
    let mut worst = (0.0, None);
    for (i, p) in a.points.iter().enumerate() {
        let d = tb.nearest(p).map_or(f64::INFINITY, |(_, d)| d);
        if worst.1.is_none() || d > worst.0 {
            worst = (d, Some(i));
        }
    }
    for q in &b.points {
        let d = ta.nearest(q).map_or(f64::INFINITY, |(_, d)| d);
        if d > worst.0 {
            worst = (d, worst.1);
        }
    }
    worst
}
