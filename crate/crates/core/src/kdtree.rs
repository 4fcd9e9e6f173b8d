//! Static 2D k-d tree for nearest-neighbor association against pole maps.

/// Balanced k-d tree over a fixed set of planar points. Stores indices into
/// the original point list so query results refer back to caller data.
#[derive(Debug, Clone)]
pub struct KdTree2 {
    points: Vec<[f64; 2]>,
    nodes: Vec<Node>,
    root: Option<usize>,
}

#[derive(Debug, Clone, Copy)]
struct Node {
    point: usize,
    axis: usize,
    left: Option<usize>,
    right: Option<usize>,
}

impl KdTree2 {
    pub fn build(points: Vec<[f64; 2]>) -> Self {
        let mut idx: Vec<usize> = (0..points.len()).collect();
        let mut nodes = Vec::with_capacity(points.len());
        let root = Self::build_rec(&points, &mut idx, 0, &mut nodes);
        Self {
            points,
            nodes,
            root,
        }
    }

    fn build_rec(
        points: &[[f64; 2]],
        idx: &mut [usize],
        depth: usize,
        nodes: &mut Vec<Node>,
    ) -> Option<usize> {
        if idx.is_empty() {
            return None;
        }
        let axis = depth % 2;
        let mid = idx.len() / 2;
        idx.select_nth_unstable_by(mid, |&a, &b| {
            points[a][axis]
                .total_cmp(&points[b][axis])
                .then(a.cmp(&b))
        });
        let slot = nodes.len();
        nodes.push(Node {
            point: idx[mid],
            axis,
            left: None,
            right: None,
        });
        let (lo, rest) = idx.split_at_mut(mid);
        let left = Self::build_rec(points, lo, depth + 1, nodes);
        let right = Self::build_rec(points, &mut rest[1..], depth + 1, nodes);
        nodes[slot].left = left;
        nodes[slot].right = right;
        Some(slot)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> [f64; 2] {
        self.points[i]
    }

    /// Closest stored point as `(index, distance)`. Ties resolve to the lower
    /// index so results do not depend on tree layout.
    pub fn nearest(&self, q: [f64; 2]) -> Option<(usize, f64)> {
        self.nearest_within(q, f64::INFINITY)
    }

    /// Closest stored point no farther than `max_dist`.
    pub fn nearest_within(&self, q: [f64; 2], max_dist: f64) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let mut bound = max_dist * max_dist;
        if let Some(root) = self.root {
            self.nearest_rec(root, q, &mut best, &mut bound);
        }
        best.map(|(i, d2)| (i, d2.sqrt()))
    }

    fn nearest_rec(&self, n: usize, q: [f64; 2], best: &mut Option<(usize, f64)>, bound: &mut f64) {
        let node = self.nodes[n];
        let p = self.points[node.point];
        let d2 = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2);
        let better = match best {
            None => d2 <= *bound,
            Some((bi, bd)) => d2 < *bd || (d2 == *bd && node.point < *bi),
        };
        if better {
            *best = Some((node.point, d2));
            *bound = d2;
        }
        let diff = q[node.axis] - p[node.axis];
        let (near, far) = if diff < 0.0 {
            (node.left, node.right)
        } else {
            (node.right, node.left)
        };
        if let Some(c) = near {
            self.nearest_rec(c, q, best, bound);
        }
        // <= keeps equal-distance candidates reachable for the tie rule.
        if diff * diff <= *bound {
            if let Some(c) = far {
                self.nearest_rec(c, q, best, bound);
            }
        }
    }

    /// Indices of all points within `radius` of `q`, in ascending index order.
    pub fn within_radius(&self, q: [f64; 2], radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        if let Some(root) = self.root {
            self.radius_rec(root, q, radius * radius, &mut out);
        }
        out.sort_unstable();
        out
    }

    fn radius_rec(&self, n: usize, q: [f64; 2], r2: f64, out: &mut Vec<usize>) {
        let node = self.nodes[n];
        let p = self.points[node.point];
        if (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) <= r2 {
            out.push(node.point);
        }
        let diff = q[node.axis] - p[node.axis];
        if diff <= 0.0 || diff * diff <= r2 {
            if let Some(c) = node.left {
                self.radius_rec(c, q, r2, out);
            }
        }
        if diff >= 0.0 || diff * diff <= r2 {
            if let Some(c) = node.right {
                self.radius_rec(c, q, r2, out);
            }
        }
    }
}
