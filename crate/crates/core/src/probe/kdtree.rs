//! Static kd-tree for exact nearest-neighbour queries on point clouds.

const LEAF_SIZE: usize = 8;

enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

pub(crate) struct KdTree<'a> {
    points: &'a [Vec<f64>],
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl<'a> KdTree<'a> {
    pub fn build(points: &'a [Vec<f64>]) -> Self {
        let mut tree = KdTree {
            points,
            order: (0..points.len()).collect(),
            nodes: Vec::new(),
        };
        if !points.is_empty() {
            tree.build_node(0, points.len());
        }
        tree
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let dim = self.points[0].len();
        let axis = (0..dim)
            .max_by(|&a, &b| {
                self.spread(start, end, a)
                    .total_cmp(&self.spread(start, end, b))
            })
            .unwrap_or(0);
        if self.spread(start, end, axis) == 0.0 {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mid = start + (end - start) / 2;
        let points = self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&i, &j| {
            points[i][axis].total_cmp(&points[j][axis]).then(i.cmp(&j))
        });
        let value = points[self.order[mid]][axis];
        self.nodes.push(Node::Leaf { start, end });
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[id] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        id
    }

    fn spread(&self, start: usize, end: usize, axis: usize) -> f64 {
        let (lo, hi) = self.order[start..end]
            .iter()
            .map(|&i| self.points[i][axis])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
                (lo.min(x), hi.max(x))
            });
        hi - lo
    }

    /// Nearest point with distance strictly greater than `min_dist`; ties go to
    /// the smaller index. Returns `(index, distance)`.
    pub fn nearest_beyond(&self, q: &[f64], min_dist: f64) -> Option<(usize, f64)> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best: Option<(usize, f64)> = None;
        let min_d2 = if min_dist < 0.0 {
            -1.0
        } else {
            min_dist * min_dist
        };
        self.search(0, q, min_d2, &mut best);
        best.map(|(i, d2)| (i, d2.sqrt()))
    }

    pub fn nearest(&self, q: &[f64]) -> Option<(usize, f64)> {
        self.nearest_beyond(q, -1.0)
    }

    fn search(&self, node: usize, q: &[f64], min_d2: f64, best: &mut Option<(usize, f64)>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let d2 = dist2(&self.points[i], q);
                    if min_d2 >= 0.0 && d2 <= min_d2 {
                        continue;
                    }
                    let better = match *best {
                        None => true,
                        Some((bi, bd)) => d2 < bd || (d2 == bd && i < bi),
                    };
                    if better {
                        *best = Some((i, d2));
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.search(near, q, min_d2, best);
                let prune = best.is_some_and(|(_, bd)| diff * diff > bd);
                if !prune {
                    self.search(far, q, min_d2, best);
                }
            }
        }
    }
}

pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for dim in 1..=5 {
            let pts: Vec<Vec<f64>> = (0..500)
                .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let tree = KdTree::build(&pts);
            for _ in 0..200 {
                let q: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.2..1.2)).collect();
                let brute = pts
                    .iter()
                    .enumerate()
                    .map(|(i, p)| (i, dist2(p, &q)))
                    .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
                    .unwrap();
                let (i, d) = tree.nearest(&q).unwrap();
                assert_eq!(i, brute.0);
                assert!((d - brute.1.sqrt()).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn beyond_skips_duplicates() {
        let pts = vec![vec![0.0], vec![0.0], vec![1.0], vec![3.0]];
        let tree = KdTree::build(&pts);
        assert_eq!(tree.nearest_beyond(&[0.0], 0.0), Some((2, 1.0)));
        assert_eq!(tree.nearest(&[0.0]), Some((0, 0.0)));
    }
}
