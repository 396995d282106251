//! Static k-d tree over a point cloud, used for exact range counting.
//!
//! Counts are exact (boundary-inclusive); the tree only accelerates the
//! search. Average query cost is O(log n) on uniformly sampled data, worst
//! case O(n).

use crate::scalar::Real;
use crate::space::PointCloud;

/// Norm defining the counting ball.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RangeNorm {
    /// Axis-aligned cube of half-width h.
    #[default]
    Linf,
    /// Euclidean ball of radius h.
    L2,
}

#[derive(Debug, Clone)]
struct Node {
    /// Index into the reordered point buffer of the splitting point.
    point: usize,
    axis: usize,
    left: Option<Box<Node>>,
    right: Option<Box<Node>>,
}

/// Immutable k-d tree; build once, query concurrently.
#[derive(Debug, Clone)]
pub struct KdTree<T> {
    points: Vec<T>,
    dim: usize,
    root: Option<Box<Node>>,
    len: usize,
}

impl<T: Real> KdTree<T> {
    pub fn build(cloud: &PointCloud<T>) -> Self {
        let dim = cloud.dim();
        let n = cloud.len();
        let mut order: Vec<usize> = (0..n).collect();
        let root = build_rec(cloud, &mut order, 0, dim);
        // Reorder points into a flat buffer following the original indices;
        // nodes store original indices so no reorder is actually needed.
        let points = (0..n)
            .flat_map(|i| cloud.point(i).to_vec())
            .collect();
        Self { points, dim, root, len: n }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    fn point(&self, i: usize) -> &[T] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    /// Number of stored points within distance `h` of `center` under `norm`,
    /// boundary inclusive.
    pub fn range_count(&self, center: &[T], h: T, norm: RangeNorm) -> usize {
        assert_eq!(center.len(), self.dim, "query dimension mismatch");
        let mut count = 0;
        if let Some(root) = &self.root {
            self.count_rec(root, center, h, norm, &mut count);
        }
        count
    }

    fn count_rec(&self, node: &Node, center: &[T], h: T, norm: RangeNorm, count: &mut usize) {
        let p = self.point(node.point);
        let inside = match norm {
            RangeNorm::Linf => p
                .iter()
                .zip(center)
                .all(|(&a, &c)| (a - c).abs() <= h),
            RangeNorm::L2 => {
                let d2: T = p
                    .iter()
                    .zip(center)
                    .map(|(&a, &c)| {
                        let d = a - c;
                        d * d
                    })
                    .sum();
                d2 <= h * h
            }
        };
        if inside {
            *count += 1;
        }
        let split = p[node.axis];
        let c = center[node.axis];
        // A subtree can be skipped only if the slab [c-h, c+h] lies strictly
        // on one side of the splitting plane; <= keeps boundary points.
        if let Some(left) = &node.left {
            if c - h <= split {
                self.count_rec(left, center, h, norm, count);
            }
        }
        if let Some(right) = &node.right {
            if c + h >= split {
                self.count_rec(right, center, h, norm, count);
            }
        }
    }
}

fn build_rec<T: Real>(
    cloud: &PointCloud<T>,
    order: &mut [usize],
    depth: usize,
    dim: usize,
) -> Option<Box<Node>> {
    if order.is_empty() {
        return None;
    }
    let axis = depth % dim;
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        cloud.point(a)[axis]
            .partial_cmp(&cloud.point(b)[axis])
            .expect("finite coordinates")
            .then(a.cmp(&b))
    });
    let point = order[mid];
    let (left, rest) = order.split_at_mut(mid);
    let right = &mut rest[1..];
    Some(Box::new(Node {
        point,
        axis,
        left: build_rec(cloud, left, depth + 1, dim),
        right: build_rec(cloud, right, depth + 1, dim),
    }))
}

/// Brute-force range count; O(n) per query. This is the oracle the tree is
/// tested against and the fallback for tiny inputs.
pub fn brute_force_count<T: Real>(
    cloud: &PointCloud<T>,
    center: &[T],
    h: T,
    norm: RangeNorm,
) -> usize {
    cloud
        .iter_points()
        .filter(|p| match norm {
            RangeNorm::Linf => p.iter().zip(center).all(|(&a, &c)| (a - c).abs() <= h),
            RangeNorm::L2 => {
                let d2: T = p
                    .iter()
                    .zip(center)
                    .map(|(&a, &c)| {
                        let d = a - c;
                        d * d
                    })
                    .sum();
                d2 <= h * h
            }
        })
        .count()
}
