//! Distance-ordered traversal of a point set.
//!
//! Neighbors of a center are visited in ascending distance; points at the
//! same distance form one tie group, emitted together in ascending index
//! order. Both the particle force and the mean-field force accumulate in
//! this order, which makes their sums bitwise reproducible.

/// Euclidean distance. In one dimension this is `|a - b|` exactly.
#[inline]
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    if a.len() == 1 {
        (a[0] - b[0]).abs()
    } else {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }
}

/// Reusable buffers for [`NeighborIndex::for_each_tie_group`].
#[derive(Debug, Default)]
pub struct Scratch {
    dists: Vec<(f64, usize)>,
    group: Vec<usize>,
}

impl Scratch {
    pub(crate) fn group_mut(&mut self) -> &mut Vec<usize> {
        &mut self.group
    }
}

#[derive(Debug, Clone)]
pub struct NeighborIndex<'a> {
    dim: usize,
    points: &'a [f64],
    // One-dimensional fast path: points sorted by (coordinate, index).
    sorted_x: Vec<f64>,
    sorted_idx: Vec<usize>,
}

impl<'a> NeighborIndex<'a> {
    /// Builds an index over `points` (row-major, `len / dim` points).
    pub fn new(dim: usize, points: &'a [f64]) -> Self {
        assert!(dim >= 1 && points.len().is_multiple_of(dim));
        let (sorted_x, sorted_idx) = if dim == 1 {
            let mut order: Vec<usize> = (0..points.len()).collect();
            order.sort_unstable_by(|&a, &b| points[a].total_cmp(&points[b]).then(a.cmp(&b)));
            (order.iter().map(|&i| points[i]).collect(), order)
        } else {
            (Vec::new(), Vec::new())
        };
        Self {
            dim,
            points,
            sorted_x,
            sorted_idx,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    /// Calls `f(distance, group)` for every tie group in ascending distance.
    pub fn for_each_tie_group<F>(&self, center: &[f64], scratch: &mut Scratch, f: F)
    where
        F: FnMut(f64, &[usize]),
    {
        debug_assert_eq!(center.len(), self.dim);
        if self.dim == 1 {
            self.walk_sorted_line(center[0], &mut scratch.group, f);
        } else {
            self.walk_sorted_distances(center, scratch, f);
        }
    }

    fn walk_sorted_line<F>(&self, x: f64, group: &mut Vec<usize>, mut f: F)
    where
        F: FnMut(f64, &[usize]),
    {
        let xs = &self.sorted_x;
        let idx = &self.sorted_idx;
        let n = xs.len();
        let split = xs.partition_point(|&p| p <= x);
        // `left` counts the points still unvisited on the left: xs[..left].
        let mut left = split;
        let mut right = split;
        loop {
            let dl = if left > 0 { (x - xs[left - 1]).abs() } else { f64::INFINITY };
            let dr = if right < n { (x - xs[right]).abs() } else { f64::INFINITY };
            let d = dl.min(dr);
            if d == f64::INFINITY {
                break;
            }
            group.clear();
            while left > 0 && (x - xs[left - 1]).abs() == d {
                left -= 1;
                group.push(idx[left]);
            }
            while right < n && (x - xs[right]).abs() == d {
                group.push(idx[right]);
                right += 1;
            }
            if group.len() > 1 {
                group.sort_unstable();
            }
            f(d, group);
        }
    }

    fn walk_sorted_distances<F>(&self, center: &[f64], scratch: &mut Scratch, mut f: F)
    where
        F: FnMut(f64, &[usize]),
    {
        let dists = &mut scratch.dists;
        dists.clear();
        dists.extend((0..self.len()).map(|j| (distance(center, self.point(j)), j)));
        dists.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let group = &mut scratch.group;
        let mut k = 0;
        while k < dists.len() {
            let d = dists[k].0;
            group.clear();
            while k < dists.len() && dists[k].0 == d {
                group.push(dists[k].1);
                k += 1;
            }
            f(d, group);
        }
    }

    /// Permutation sorting the points by coordinate (one-dimensional indices only).
    pub fn line_order(&self) -> &[usize] {
        &self.sorted_idx
    }

    /// One-dimensional alignment sum `sum_j weight[rank_j] * (vel_j - v)`
    /// around the center `x`, accumulated in the canonical tie-group order.
    ///
    /// `sorted_vel` holds the velocities permuted by [`Self::line_order`] and
    /// `weight_by_count[c]` is the weight for a neighbor whose inclusive count
    /// is `c`.
    pub fn line_alignment_sum(
        &self,
        x: f64,
        v: f64,
        sorted_vel: &[f64],
        weight_by_count: &[f64],
        group: &mut Vec<usize>,
    ) -> f64 {
        debug_assert_eq!(self.dim, 1);
        let xs = &self.sorted_x;
        let n = xs.len();
        let split = xs.partition_point(|&p| p <= x);
        let mut left = split;
        let mut right = split;
        let mut count = 0usize;
        let mut acc = 0.0;
        loop {
            let dl = if left > 0 { x - xs[left - 1] } else { f64::INFINITY };
            let dr = if right < n { xs[right] - x } else { f64::INFINITY };
            if dl < dr {
                if left < 2 || x - xs[left - 2] != dl {
                    left -= 1;
                    count += 1;
                    acc += weight_by_count[count] * (sorted_vel[left] - v);
                    continue;
                }
            } else if dr < dl {
                if right + 1 >= n || xs[right + 1] - x != dr {
                    count += 1;
                    acc += weight_by_count[count] * (sorted_vel[right] - v);
                    right += 1;
                    continue;
                }
            } else if dl == f64::INFINITY {
                break;
            }
            // Tie group: gather every point at distance d, ordered by original index.
            let d = dl.min(dr);
            group.clear();
            while left > 0 && x - xs[left - 1] == d {
                left -= 1;
                group.push(left);
            }
            while right < n && xs[right] - x == d {
                group.push(right);
                right += 1;
            }
            group.sort_unstable_by_key(|&s| self.sorted_idx[s]);
            count += group.len();
            let w = weight_by_count[count];
            for &s in group.iter() {
                acc += w * (sorted_vel[s] - v);
            }
        }
        acc
    }

    /// Sorted distances from `center` to every point (with multiplicity).
    pub fn sorted_distances(&self, center: &[f64], scratch: &mut Scratch) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        self.for_each_tie_group(center, scratch, |d, g| out.extend(std::iter::repeat_n(d, g.len())));
        out
    }
}
