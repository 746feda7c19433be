//! Exact Euclidean nearest-neighbour search over static point sets.
//!
//! [`NeighborIndex`] is a kd-tree (median splits on the widest coordinate,
//! small brute-force leaves). Every distance it reports is produced by
//! [`distance`], so results are bit-identical to a brute-force scan.

use std::collections::HashMap;

use crate::error::{Error, Result};

const LEAF_SIZE: usize = 12;

/// Row-major `n × d` matrix of points.
#[derive(Clone, Debug, PartialEq)]
pub struct Points {
    data: Vec<f64>,
    n: usize,
    d: usize,
}

impl Points {
    pub fn new(data: Vec<f64>, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::Dimension("points need at least one coordinate".into()));
        }
        if data.len() % d != 0 {
            return Err(Error::Dimension(format!(
                "{} values do not fill rows of width {}",
                data.len(),
                d
            )));
        }
        Ok(Points {
            n: data.len() / d,
            data,
            d,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map(Vec::len).unwrap_or(1);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Points::new(rows.concat(), d)
    }

    /// One-dimensional points.
    pub fn from_values(values: &[f64]) -> Self {
        Points {
            data: values.to_vec(),
            n: values.len(),
            d: 1,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn select(&self, idx: &[usize]) -> Points {
        let mut data = Vec::with_capacity(idx.len() * self.d);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Points {
            data,
            n: idx.len(),
            d: self.d,
        }
    }

    /// Applies `f` to every coordinate.
    pub fn map(&self, f: impl Fn(usize, f64) -> f64) -> Points {
        let d = self.d;
        Points {
            data: self
                .data
                .iter()
                .enumerate()
                .map(|(k, &v)| f(k % d, v))
                .collect(),
            n: self.n,
            d,
        }
    }
}

#[inline]
fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Euclidean distance. The single definition used by the index and by
/// brute-force checks.
#[inline]
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    squared_distance(a, b).sqrt()
}

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        dim: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

/// Result of a closed-ball query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiusHits {
    /// Eligible points at distance `<= r`.
    pub count: usize,
    /// Largest such distance, if any point was found.
    pub max_distance: Option<f64>,
}

/// Immutable kd-tree over a point set. Safe to query from several threads.
#[derive(Debug, Clone)]
pub struct NeighborIndex {
    points: Points,
    // tree-ordered copy of the coordinates
    ordered: Vec<f64>,
    nodes: Vec<Node>,
}

impl NeighborIndex {
    pub fn build(points: Points) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Empty("cannot index an empty point set".into()));
        }
        if let Some(k) = points.data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: k / points.d,
                col: k % points.d,
            });
        }
        let mut order: Vec<usize> = (0..points.n).collect();
        let mut nodes = Vec::new();
        build_node(&points, &mut order, 0, &mut nodes);
        let mut ordered = Vec::with_capacity(points.data.len());
        for &i in &order {
            ordered.extend_from_slice(points.row(i));
        }
        Ok(NeighborIndex {
            points,
            ordered,
            nodes,
        })
    }

    pub fn points(&self) -> &Points {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.n
    }

    pub fn is_empty(&self) -> bool {
        self.points.n == 0
    }

    fn check_query(&self, query: &[f64]) -> Result<()> {
        if query.len() != self.points.d {
            return Err(Error::Dimension(format!(
                "query has {} coordinates, index has {}",
                query.len(),
                self.points.d
            )));
        }
        Ok(())
    }

    /// The `k` smallest squared distances, ascending.
    fn nearest_squared(&self, query: &[f64], k: usize) -> Vec<f64> {
        let mut best: Vec<f64> = Vec::with_capacity(k + 1);
        self.knn_rec(0, query, k, &mut best);
        best
    }

    fn knn_rec(&self, node: usize, q: &[f64], k: usize, best: &mut Vec<f64>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                let d = self.points.d;
                for p in start..end {
                    let d2 = squared_distance(q, &self.ordered[p * d..(p + 1) * d]);
                    if best.len() < k || d2 < best[best.len() - 1] {
                        let pos = best.partition_point(|&b| b <= d2);
                        best.insert(pos, d2);
                        if best.len() > k {
                            best.pop();
                        }
                    }
                }
            }
            Node::Split {
                dim,
                value,
                left,
                right,
            } => {
                let diff = q[dim] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.knn_rec(near, q, k, best);
                if best.len() < k || diff * diff <= best[best.len() - 1] {
                    self.knn_rec(far, q, k, best);
                }
            }
        }
    }

    /// Distance to the `k`-th nearest eligible point (`k >= 1`).
    ///
    /// With `exclude_exact_match`, one point at distance zero (the query
    /// itself, when it is a member) is removed before ranking.
    pub fn knn_distance(&self, query: &[f64], k: usize, exclude_exact_match: bool) -> Result<f64> {
        self.check_query(query)?;
        if k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        let want = (k + usize::from(exclude_exact_match)).min(self.points.n);
        let mut best = self.nearest_squared(query, want);
        if exclude_exact_match && best.first() == Some(&0.0) {
            best.remove(0);
        }
        if best.len() < k {
            return Err(Error::NotEnoughPoints {
                k,
                available: best.len(),
            });
        }
        Ok(best[k - 1].sqrt())
    }

    /// Closed-ball query: eligible points with `distance <= r`.
    pub fn radius_query(&self, query: &[f64], r: f64, exclude_exact_match: bool) -> Result<RadiusHits> {
        self.check_query(query)?;
        if !(r >= 0.0) {
            return Err(Error::InvalidArgument(format!("radius {} must be >= 0", r)));
        }
        // prune bound slightly above r^2 so rounding never drops a point with sqrt(d2) <= r
        let bound = r * r * (1.0 + 1e-12) + f64::MIN_POSITIVE;
        let mut acc = RadiusAcc::default();
        self.radius_rec(0, query, r, bound, &mut acc);
        let mut count = acc.count;
        let mut max_distance = acc.max;
        if exclude_exact_match && acc.zeros > 0 {
            count -= 1;
            if count == 0 {
                max_distance = None;
            }
        }
        Ok(RadiusHits {
            count,
            max_distance,
        })
    }

    /// Number of eligible points within the closed ball of radius `r`.
    pub fn count_within_radius(&self, query: &[f64], r: f64, exclude_exact_match: bool) -> Result<usize> {
        Ok(self.radius_query(query, r, exclude_exact_match)?.count)
    }

    fn radius_rec(&self, node: usize, q: &[f64], r: f64, bound: f64, acc: &mut RadiusAcc) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                let d = self.points.d;
                for p in start..end {
                    let d2 = squared_distance(q, &self.ordered[p * d..(p + 1) * d]);
                    if d2 > bound {
                        continue;
                    }
                    let dist = d2.sqrt();
                    if dist <= r {
                        acc.count += 1;
                        if dist == 0.0 {
                            acc.zeros += 1;
                        }
                        acc.max = Some(acc.max.map_or(dist, |m: f64| m.max(dist)));
                    }
                }
            }
            Node::Split {
                dim,
                value,
                left,
                right,
            } => {
                let diff = q[dim] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.radius_rec(near, q, r, bound, acc);
                if diff * diff <= bound {
                    self.radius_rec(far, q, r, bound, acc);
                }
            }
        }
    }
}

#[derive(Default)]
struct RadiusAcc {
    count: usize,
    zeros: usize,
    max: Option<f64>,
}

fn build_node(points: &Points, order: &mut [usize], offset: usize, nodes: &mut Vec<Node>) -> usize {
    let id = nodes.len();
    let len = order.len();
    if len <= LEAF_SIZE {
        nodes.push(Node::Leaf {
            start: offset,
            end: offset + len,
        });
        return id;
    }
    let d = points.d;
    let mut best_dim = 0;
    let mut best_spread = -1.0;
    for dim in 0..d {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &i in order.iter() {
            let v = points.data[i * d + dim];
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if hi - lo > best_spread {
            best_spread = hi - lo;
            best_dim = dim;
        }
    }
    if best_spread <= 0.0 {
        // all points identical
        nodes.push(Node::Leaf {
            start: offset,
            end: offset + len,
        });
        return id;
    }
    let mid = len / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        points.data[a * d + best_dim].total_cmp(&points.data[b * d + best_dim])
    });
    let value = points.data[order[mid] * d + best_dim];
    nodes.push(Node::Leaf { start: 0, end: 0 });
    let (lo, hi) = order.split_at_mut(mid);
    let left = build_node(points, lo, offset, nodes);
    let right = build_node(points, hi, offset + mid, nodes);
    nodes[id] = Node::Split {
        dim: best_dim,
        value,
        left,
        right,
    };
    id
}

fn row_key(row: &[f64]) -> Vec<u64> {
    // -0.0 == 0.0 numerically, so both hash alike
    row.iter().map(|&v| if v == 0.0 { 0 } else { v.to_bits() }).collect()
}

/// First pair `(i, j)`, `i < j`, of exactly equal rows, if any.
pub fn has_duplicate_points(points: &Points) -> Option<(usize, usize)> {
    let mut seen: HashMap<Vec<u64>, usize> = HashMap::with_capacity(points.len());
    for j in 0..points.len() {
        if let Some(&i) = seen.get(&row_key(points.row(j))) {
            return Some((i, j));
        }
        seen.insert(row_key(points.row(j)), j);
    }
    None
}

/// First `(x_row, y_row)` pair of exactly equal points across two sets.
pub fn find_coincident(x: &Points, y: &Points) -> Option<(usize, usize)> {
    let mut ys: HashMap<Vec<u64>, usize> = HashMap::with_capacity(y.len());
    for j in (0..y.len()).rev() {
        ys.insert(row_key(y.row(j)), j);
    }
    (0..x.len()).find_map(|i| ys.get(&row_key(x.row(i))).map(|&j| (i, j)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(values: &[f64]) -> NeighborIndex {
        NeighborIndex::build(Points::from_values(values)).unwrap()
    }

    #[test]
    fn one_dimensional_examples() {
        let idx = line(&[0.0, 1.0, 3.0]);
        assert_eq!(idx.knn_distance(&[0.0], 1, true).unwrap(), 1.0);
        assert_eq!(idx.knn_distance(&[2.0], 2, false).unwrap(), 1.0);
        assert_eq!(idx.count_within_radius(&[0.0], 2.0, true).unwrap(), 1);
        assert_eq!(idx.count_within_radius(&[0.0], 3.0, true).unwrap(), 2);
        assert_eq!(idx.count_within_radius(&[0.5], 0.0, false).unwrap(), 0);
    }

    #[test]
    fn three_four_five() {
        let idx = NeighborIndex::build(Points::from_rows(&[vec![0.0, 0.0], vec![3.0, 4.0]]).unwrap()).unwrap();
        assert_eq!(idx.knn_distance(&[0.0, 0.0], 1, true).unwrap(), 5.0);
    }

    #[test]
    fn single_point_has_no_neighbour_but_itself() {
        let idx = line(&[4.0]);
        assert!(matches!(
            idx.knn_distance(&[4.0], 1, true),
            Err(Error::NotEnoughPoints { k: 1, available: 0 })
        ));
        assert_eq!(idx.knn_distance(&[4.0], 1, false).unwrap(), 0.0);
    }

    #[test]
    fn self_exclusion_removes_only_one_copy() {
        let idx = line(&[2.0, 2.0, 5.0]);
        assert_eq!(idx.knn_distance(&[2.0], 1, true).unwrap(), 0.0);
        assert_eq!(idx.count_within_radius(&[2.0], 0.0, true).unwrap(), 1);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(NeighborIndex::build(Points::from_values(&[1.0, f64::NAN])).is_err());
        assert!(NeighborIndex::build(Points::from_values(&[])).is_err());
    }

    #[test]
    fn duplicates() {
        let p = Points::from_rows(&[vec![1.0, 2.0], vec![1.0, 2.0]]).unwrap();
        assert_eq!(has_duplicate_points(&p), Some((0, 1)));
        let q = Points::from_rows(&[vec![1.0, 2.0], vec![1.0, 2.0 + 1e-12]]).unwrap();
        assert_eq!(has_duplicate_points(&q), None);
        assert_eq!(has_duplicate_points(&Points::from_values(&[1.0])), None);
        assert_eq!(has_duplicate_points(&Points::from_values(&[])), None);
        assert_eq!(has_duplicate_points(&Points::from_values(&[0.0, -0.0])), Some((0, 1)));
    }

    #[test]
    fn coincident_across_sets() {
        let x = Points::from_values(&[0.0, 1.0, 2.0]);
        let y = Points::from_values(&[5.0, 2.0]);
        assert_eq!(find_coincident(&x, &y), Some((2, 1)));
        assert_eq!(find_coincident(&x, &Points::from_values(&[7.0])), None);
    }
}
