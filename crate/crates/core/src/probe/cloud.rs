use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feedback::{closed_loop, hmap, in_domain_m, StaticPlant};
use crate::matrix::{self, Matrix};
use crate::subspace::SubspaceBasis;

/// Sampled points with the controller parameters that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    pub points: Vec<Vec<f64>>,
    pub params: Vec<Vec<f64>>,
    pub meta: CloudMeta,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CloudMeta {
    pub generator: String,
    pub seed: Option<u64>,
    /// Samples dropped because `I - GK` was singular.
    pub excluded: usize,
}

impl PointCloud {
    pub fn new(points: Vec<Vec<f64>>, params: Vec<Vec<f64>>, meta: CloudMeta) -> Result<Self> {
        if points.len() != params.len() {
            return Err(Error::Invalid(format!(
                "{} points but {} parameter vectors",
                points.len(),
                params.len()
            )));
        }
        if let Some(first) = points.first() {
            if points.iter().any(|p| p.len() != first.len()) {
                return Err(Error::Invalid("points differ in dimension".into()));
            }
        }
        if let Some(first) = params.first() {
            if params.iter().any(|p| p.len() != first.len()) {
                return Err(Error::Invalid("parameters differ in dimension".into()));
            }
        }
        Ok(PointCloud {
            points,
            params,
            meta,
        })
    }

    /// A cloud without generating parameters.
    pub fn from_points(points: Vec<Vec<f64>>) -> Result<Self> {
        let params = vec![Vec::new(); points.len()];
        Self::new(points, params, CloudMeta::default())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }

    pub fn param_dim(&self) -> usize {
        self.params.first().map_or(0, Vec::len)
    }

    /// One row per point: parameter columns `p0..`, then point columns `x0..`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let header: Vec<String> = (0..self.param_dim())
            .map(|i| format!("p{i}"))
            .chain((0..self.dim()).map(|i| format!("x{i}")))
            .collect();
        w.write_record(&header)?;
        for (p, x) in self.params.iter().zip(&self.points) {
            w.write_record(p.iter().chain(x).map(|v| format!("{v:e}")))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers()?.clone();
        let nparams = header.iter().filter(|h| h.starts_with('p')).count();
        let (mut points, mut params) = (Vec::new(), Vec::new());
        for rec in r.records() {
            let rec = rec?;
            let vals = rec
                .iter()
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|e| Error::Invalid(format!("bad CSV value {v:?}: {e}")))
                })
                .collect::<Result<Vec<_>>>()?;
            params.push(vals[..nparams].to_vec());
            points.push(vals[nparams..].to_vec());
        }
        Self::new(points, params, CloudMeta::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum SamplingScheme {
    /// Tensor grid; the last coordinate varies fastest.
    Grid {
        ranges: Vec<(f64, f64)>,
        points_per_dim: usize,
    },
    /// Independent uniform draws in the box.
    Random {
        ranges: Vec<(f64, f64)>,
        count: usize,
    },
    /// Tensor grid on `[-radius, radius]^d` restricted to the Euclidean ball.
    BallGrid { radius: f64, points_per_dim: usize },
    /// Explicit parameter vectors.
    List { params: Vec<Vec<f64>> },
}

/// Controllers sampled from a subspace, in basis coordinates.
#[derive(Debug, Clone)]
pub struct ControllerSamples {
    pub params: Vec<Vec<f64>>,
    pub controllers: Vec<Matrix>,
    /// Parameters whose controller fell outside M.
    pub excluded: Vec<Vec<f64>>,
    pub generator: String,
    pub seed: u64,
}

fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

fn tensor_grid(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new()];
    for ax in axes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                ax.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect();
    }
    out
}

fn check_ranges(ranges: &[(f64, f64)], dim: usize) -> Result<()> {
    if ranges.len() != dim
        || ranges
            .iter()
            .any(|(lo, hi)| lo.partial_cmp(hi).is_none_or(|o| o.is_gt()))
    {
        return Err(Error::EmptyRanges);
    }
    Ok(())
}

/// Parameter vectors for the scheme; deterministic given the seed.
pub fn scheme_params(scheme: &SamplingScheme, dim: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    match scheme {
        SamplingScheme::Grid {
            ranges,
            points_per_dim,
        } => {
            check_ranges(ranges, dim)?;
            if *points_per_dim == 0 {
                return Err(Error::EmptyRanges);
            }
            let axes: Vec<Vec<f64>> = ranges
                .iter()
                .map(|&(lo, hi)| axis(lo, hi, *points_per_dim))
                .collect();
            Ok(tensor_grid(&axes))
        }
        SamplingScheme::Random { ranges, count } => {
            check_ranges(ranges, dim)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok((0..*count)
                .map(|_| {
                    ranges
                        .iter()
                        .map(|&(lo, hi)| {
                            if lo == hi {
                                lo
                            } else {
                                rng.random_range(lo..hi)
                            }
                        })
                        .collect()
                })
                .collect())
        }
        SamplingScheme::BallGrid {
            radius,
            points_per_dim,
        } => {
            if radius.is_nan() || *radius < 0.0 || *points_per_dim == 0 {
                return Err(Error::EmptyRanges);
            }
            let ax = axis(-radius, *radius, *points_per_dim);
            let axes = vec![ax; dim];
            let r2 = radius * radius * (1.0 + 1e-12);
            Ok(tensor_grid(&axes)
                .into_iter()
                .filter(|p| p.iter().map(|x| x * x).sum::<f64>() <= r2)
                .collect())
        }
        SamplingScheme::List { params } => {
            if params.iter().any(|p| p.len() != dim) {
                return Err(Error::EmptyRanges);
            }
            Ok(params.clone())
        }
    }
}

/// Samples controllers `K = sum_i p_i B_i` from the subspace, dropping those
/// outside M (singular `I - GK`). An empty basis yields the single sample 0.
pub fn sample_subspace(
    basis: &SubspaceBasis,
    g: &Matrix,
    scheme: &SamplingScheme,
    seed: u64,
    cond_tol: f64,
) -> Result<ControllerSamples> {
    let dim = basis.elements().len();
    let candidates = if dim == 0 {
        vec![Vec::new()]
    } else {
        scheme_params(scheme, dim, seed)?
    };
    let mut out = ControllerSamples {
        params: Vec::new(),
        controllers: Vec::new(),
        excluded: Vec::new(),
        generator: format!("{scheme:?}"),
        seed,
    };
    for p in candidates {
        let k = if dim == 0 {
            Matrix::zeros(basis.rows(), basis.cols())
        } else {
            basis.combine(&p)?
        };
        if in_domain_m(g, &k, cond_tol)? {
            out.params.push(p);
            out.controllers.push(k);
        } else {
            out.excluded.push(p);
        }
    }
    Ok(out)
}

fn meta_of(samples: &ControllerSamples, what: &str) -> CloudMeta {
    CloudMeta {
        generator: format!("{what} over {}", samples.generator),
        seed: Some(samples.seed),
        excluded: samples.excluded.len(),
    }
}

/// Closed-loop images: one flattened `closed_loop(P, K)` per sample.
pub fn probe_image(p: &StaticPlant, samples: &ControllerSamples) -> Result<PointCloud> {
    let points = samples
        .controllers
        .iter()
        .map(|k| closed_loop(p, k).map(|c| matrix::flatten_row_major(&c)))
        .collect::<Result<Vec<_>>>()?;
    PointCloud::new(
        points,
        samples.params.clone(),
        meta_of(samples, "closed loop"),
    )
}

/// Images under the feedback map: one flattened `h_G(K)` per sample.
pub fn probe_hmap_image(g: &Matrix, samples: &ControllerSamples) -> Result<PointCloud> {
    let points = samples
        .controllers
        .iter()
        .map(|k| hmap(g, k).map(|q| matrix::flatten_row_major(&q)))
        .collect::<Result<Vec<_>>>()?;
    PointCloud::new(points, samples.params.clone(), meta_of(samples, "h_G"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feedback::DEFAULT_COND_TOL;
    use crate::matrix::unit;

    #[test]
    fn empty_basis_gives_zero_sample() {
        let b = SubspaceBasis::new(2, 2, vec![]).unwrap();
        let s = sample_subspace(
            &b,
            &Matrix::identity(2, 2),
            &SamplingScheme::Grid {
                ranges: vec![],
                points_per_dim: 3,
            },
            42,
            DEFAULT_COND_TOL,
        )
        .unwrap();
        assert_eq!(s.controllers, vec![Matrix::zeros(2, 2)]);
    }

    #[test]
    fn grid_counts() {
        let b = SubspaceBasis::from_elements(vec![unit(2, 2, 0, 0), unit(2, 2, 1, 1)]).unwrap();
        let scheme = SamplingScheme::Grid {
            ranges: vec![(-1.0, 1.0), (0.0, 2.0)],
            points_per_dim: 3,
        };
        let s = sample_subspace(&b, &Matrix::zeros(2, 2), &scheme, 0, DEFAULT_COND_TOL).unwrap();
        assert_eq!(s.controllers.len(), 9);
        assert_eq!(s.params[1], vec![-1.0, 1.0]);
    }

    #[test]
    fn singular_sample_excluded() {
        let b = SubspaceBasis::from_elements(vec![Matrix::from_element(1, 1, 1.0)]).unwrap();
        let scheme = SamplingScheme::Grid {
            ranges: vec![(0.0, 2.0)],
            points_per_dim: 3,
        };
        let s = sample_subspace(
            &b,
            &Matrix::from_element(1, 1, 1.0),
            &scheme,
            0,
            DEFAULT_COND_TOL,
        )
        .unwrap();
        assert_eq!(s.excluded, vec![vec![1.0]]);
        assert_eq!(s.params, vec![vec![0.0], vec![2.0]]);
    }

    #[test]
    fn empty_ranges_rejected() {
        let b = SubspaceBasis::from_elements(vec![unit(1, 1, 0, 0)]).unwrap();
        let bad = SamplingScheme::Random {
            ranges: vec![],
            count: 3,
        };
        assert!(matches!(
            sample_subspace(&b, &Matrix::zeros(1, 1), &bad, 0, DEFAULT_COND_TOL),
            Err(Error::EmptyRanges)
        ));
        let inverted = SamplingScheme::Grid {
            ranges: vec![(1.0, -1.0)],
            points_per_dim: 2,
        };
        assert!(sample_subspace(&b, &Matrix::zeros(1, 1), &inverted, 0, DEFAULT_COND_TOL).is_err());
    }

    #[test]
    fn random_scheme_is_deterministic() {
        let s1 = scheme_params(
            &SamplingScheme::Random {
                ranges: vec![(-1.0, 1.0); 2],
                count: 5,
            },
            2,
            9,
        )
        .unwrap();
        let s2 = scheme_params(
            &SamplingScheme::Random {
                ranges: vec![(-1.0, 1.0); 2],
                count: 5,
            },
            2,
            9,
        )
        .unwrap();
        assert_eq!(s1, s2);
    }

    #[test]
    fn open_loop_cloud_is_p11() {
        let p = StaticPlant::new(
            Matrix::from_row_slice(1, 2, &[3.0, 4.0]),
            Matrix::zeros(1, 1),
            Matrix::zeros(1, 2),
            Matrix::zeros(1, 1),
        )
        .unwrap();
        let b = SubspaceBasis::new(1, 1, vec![]).unwrap();
        let s = sample_subspace(
            &b,
            p.g(),
            &SamplingScheme::List { params: vec![] },
            0,
            DEFAULT_COND_TOL,
        )
        .unwrap();
        let cloud = probe_image(&p, &s).unwrap();
        assert_eq!(cloud.points, vec![vec![3.0, 4.0]]);
    }

    #[test]
    fn csv_round_trip() {
        let cloud = PointCloud::new(
            vec![vec![0.25, -1.0], vec![1e-12, 3.5]],
            vec![vec![1.0], vec![2.0]],
            CloudMeta::default(),
        )
        .unwrap();
        let mut buf = Vec::new();
        cloud.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("p0,x0,x1\n"));
        let back = PointCloud::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.points, cloud.points);
        assert_eq!(back.params, cloud.params);
    }
}
