//! Sampling sites and ring kernels `f_h(s) = 1(c_{h-1} < ‖s‖ ≤ c_h)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of ring kernels used when none is specified.
pub const DEFAULT_KERNELS: usize = 10;

/// `n ≥ 2` distinct, finite sampling sites in `ℝᵈ`.
#[derive(Clone, Debug, PartialEq)]
pub struct LocationSet {
    dim: usize,
    coords: Vec<f64>,
}

impl LocationSet {
    /// `coords` is row-major, `dim` values per site.
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("spatial dimension must be at least 1".into()));
        }
        if coords.len() % dim != 0 {
            return Err(Error::DimensionMismatch(format!(
                "{} coordinates is not a multiple of dimension {dim}",
                coords.len()
            )));
        }
        let n = coords.len() / dim;
        if n < 2 {
            return Err(Error::InvalidInput(format!("need at least 2 sites, got {n}")));
        }
        if let Some(pos) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "site {} has a non-finite coordinate",
                pos / dim + 1
            )));
        }
        let set = Self { dim, coords };
        if let Some((a, b)) = set.find_duplicate() {
            return Err(Error::InvalidInput(format!(
                "sites {} and {} coincide",
                a + 1,
                b + 1
            )));
        }
        Ok(set)
    }

    pub fn from_points<P: AsRef<[f64]>>(points: &[P]) -> Result<Self> {
        let dim = points.first().map_or(0, |p| p.as_ref().len());
        let mut coords = Vec::with_capacity(points.len() * dim);
        for p in points {
            let p = p.as_ref();
            if p.len() != dim {
                return Err(Error::DimensionMismatch("points of differing dimension".into()));
            }
            coords.extend_from_slice(p);
        }
        Self::new(dim, coords)
    }

    /// Zero-based indices `(a, b)`, `a < b`, of two identical sites if any.
    fn find_duplicate(&self) -> Option<(usize, usize)> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| {
            self.site(a)
                .iter()
                .zip(self.site(b))
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        idx.windows(2)
            .find(|w| self.site(w[0]) == self.site(w[1]))
            .map(|w| (w[0].min(w[1]), w[0].max(w[1])))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    #[inline]
    pub fn site(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    #[inline]
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.site(i)
            .iter()
            .zip(self.site(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn pair_count(&self) -> usize {
        let n = self.len();
        n * (n - 1) / 2
    }
}

/// Euclidean distances of all unordered pairs in the order
/// `(1,2), (1,3), …, (1,n), (2,3), …, (n−1,n)`.
pub fn pairwise_distances(locs: &LocationSet) -> Vec<f64> {
    let n = locs.len();
    let mut out = Vec::with_capacity(locs.pair_count());
    for i in 0..n {
        for j in i + 1..n {
            out.push(locs.distance(i, j));
        }
    }
    out
}

/// Ring boundaries `c₀ < c₁ < … < c_k`; kernel `h` (1-based) covers
/// `(c_{h−1}, c_h]`. `c_k` may be `+∞`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct KernelBank {
    boundaries: Vec<f64>,
}

impl KernelBank {
    pub fn new(boundaries: Vec<f64>) -> Result<Self> {
        if boundaries.len() < 2 {
            return Err(Error::InvalidConfig(
                "a kernel bank needs at least two boundaries".into(),
            ));
        }
        if boundaries.iter().any(|c| c.is_nan()) || boundaries[0] < 0.0 || !boundaries[0].is_finite() {
            return Err(Error::InvalidConfig(format!(
                "invalid kernel boundaries {boundaries:?}"
            )));
        }
        if let Some(w) = boundaries.windows(2).find(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidConfig(format!(
                "kernel boundaries must increase strictly, found {} then {}",
                w[0], w[1]
            )));
        }
        if boundaries[..boundaries.len() - 1].iter().any(|c| c.is_infinite()) {
            return Err(Error::InvalidConfig("only the last boundary may be infinite".into()));
        }
        Ok(Self { boundaries })
    }

    /// Single ring `(0, ∞)` covering every pair.
    pub fn all_pairs() -> Self {
        Self {
            boundaries: vec![0.0, f64::INFINITY],
        }
    }

    pub fn k(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    fn check_index(&self, h: usize) -> Result<()> {
        if h == 0 || h > self.k() {
            return Err(Error::IndexOutOfRange {
                index: h,
                len: self.k(),
            });
        }
        Ok(())
    }

    /// `f_h` evaluated at a distance: 1 iff `c_{h−1} < dist ≤ c_h`.
    pub fn ring_indicator(&self, h: usize, dist: f64) -> Result<u8> {
        self.check_index(h)?;
        let inside = self.boundaries[h - 1] < dist && dist <= self.boundaries[h];
        Ok(inside as u8)
    }

    /// 1-based ring containing `dist`, if any.
    pub fn ring_of(&self, dist: f64) -> Option<usize> {
        let b = &self.boundaries;
        if !(dist > b[0]) || dist > b[b.len() - 1] {
            return None;
        }
        // first boundary ≥ dist
        Some(b.partition_point(|&c| c < dist))
    }

    /// The one-kernel bank made of ring `h` of this bank.
    pub fn single(&self, h: usize) -> Result<KernelBank> {
        self.check_index(h)?;
        Ok(KernelBank {
            boundaries: vec![self.boundaries[h - 1], self.boundaries[h]],
        })
    }
}

impl TryFrom<Vec<f64>> for KernelBank {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        KernelBank::new(v)
    }
}

impl From<KernelBank> for Vec<f64> {
    fn from(b: KernelBank) -> Vec<f64> {
        b.boundaries
    }
}

/// Boundaries at pair-distance quantiles so each ring holds about `1/k` of
/// all pairs.
pub fn decile_boundaries(locs: &LocationSet, k: usize) -> Result<KernelBank> {
    quantile_boundaries(&pairwise_distances(locs), k)
}

/// As [`decile_boundaries`], from precomputed pair distances.
///
/// `c_h` is the `⌈h·P/k⌉`-th smallest distance. Pairs tied with a boundary
/// stay in the lower ring; when ties swallow a whole target the next ring
/// starts at the following distinct distance.
pub fn quantile_boundaries(distances: &[f64], k: usize) -> Result<KernelBank> {
    let total = distances.len();
    if k == 0 {
        return Err(Error::InvalidConfig("kernel count must be at least 1".into()));
    }
    if total < k {
        return Err(Error::InvalidConfig(format!(
            "{total} site pairs cannot fill {k} kernels"
        )));
    }
    let mut sorted = distances.to_vec();
    sorted.sort_by(f64::total_cmp);

    let mut boundaries = Vec::with_capacity(k + 1);
    boundaries.push(0.0);
    let mut covered = 0;
    for h in 1..k {
        let target = (h * total).div_ceil(k).max(covered + 1);
        if target > total {
            return Err(Error::InvalidConfig(format!(
                "too few distinct pair distances for {k} kernels"
            )));
        }
        let c = sorted[target - 1];
        covered = sorted.partition_point(|&d| d <= c);
        boundaries.push(c);
    }
    if covered >= total {
        return Err(Error::InvalidConfig(format!(
            "too few distinct pair distances for {k} kernels"
        )));
    }
    boundaries.push(f64::INFINITY);
    KernelBank::new(boundaries)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring_counts(bank: &KernelBank, d: &[f64]) -> Vec<usize> {
        let mut c = vec![0; bank.k()];
        for &x in d {
            c[bank.ring_of(x).unwrap() - 1] += 1;
        }
        c
    }

    #[test]
    fn distances_in_pair_order() {
        let l = LocationSet::from_points(&[[0.0, 0.0], [3.0, 4.0]]).unwrap();
        assert_eq!(pairwise_distances(&l), vec![5.0]);
        let l = LocationSet::from_points(&[[0.0], [1.0], [3.0]]).unwrap();
        assert_eq!(pairwise_distances(&l), vec![1.0, 3.0, 2.0]);
        let l = LocationSet::new(2, (0..14).map(|x| (x * x) as f64).collect()).unwrap();
        assert_eq!(pairwise_distances(&l).len(), 7 * 6 / 2);
    }

    #[test]
    fn location_validation() {
        assert!(LocationSet::from_points(&[[0.0, 0.0]]).is_err());
        assert!(LocationSet::from_points(&[[0.0, f64::NAN], [1.0, 1.0]]).is_err());
        let err = LocationSet::from_points(&[[0.0, 0.0], [1.0, 1.0], [0.0, 0.0]]).unwrap_err();
        assert!(err.to_string().contains("sites 1 and 3"), "{err}");
    }

    #[test]
    fn ring_indicator_edges() {
        let b = KernelBank::new(vec![0.0, 1.0, f64::INFINITY]).unwrap();
        assert_eq!(b.ring_indicator(1, 1.0).unwrap(), 1);
        assert_eq!(b.ring_indicator(2, 1.0).unwrap(), 0);
        assert_eq!(b.ring_indicator(2, 1e300).unwrap(), 1);
        for h in 1..=2 {
            assert_eq!(b.ring_indicator(h, 0.0).unwrap(), 0);
        }
        assert!(matches!(
            b.ring_indicator(3, 0.5),
            Err(Error::IndexOutOfRange { index: 3, len: 2 })
        ));
        assert!(b.ring_indicator(0, 0.5).is_err());
        assert_eq!(b.ring_of(0.0), None);
        assert_eq!(b.ring_of(0.5), Some(1));
        assert_eq!(b.ring_of(2.0), Some(2));
    }

    #[test]
    fn bank_validation() {
        assert!(KernelBank::new(vec![0.0]).is_err());
        assert!(KernelBank::new(vec![0.0, 1.0, 1.0]).is_err());
        assert!(KernelBank::new(vec![0.0, f64::INFINITY, f64::INFINITY]).is_err());
        assert!(KernelBank::new(vec![-1.0, 1.0]).is_err());
        let b: KernelBank = serde_json::from_str("[0.0, 2.5]").unwrap();
        assert_eq!(b.k(), 1);
    }

    #[test]
    fn ten_distinct_pairs_one_per_ring() {
        // 5 points on a line at 0,1,3,7,15: pair distances are all distinct
        let l = LocationSet::from_points(&[[0.0], [1.0], [3.0], [7.0], [15.0]]).unwrap();
        let d = pairwise_distances(&l);
        let mut s = d.clone();
        s.sort_by(f64::total_cmp);
        s.dedup();
        assert_eq!(s.len(), 10);
        let bank = decile_boundaries(&l, 10).unwrap();
        assert_eq!(ring_counts(&bank, &d), vec![1; 10]);
        assert_eq!(&bank.boundaries()[1..10], &s[..9]);
    }

    #[test]
    fn single_kernel_bank() {
        let l = LocationSet::from_points(&[[0.0], [1.0], [3.0]]).unwrap();
        let bank = decile_boundaries(&l, 1).unwrap();
        assert_eq!(bank.boundaries(), &[0.0, f64::INFINITY]);
        assert_eq!(ring_counts(&bank, &pairwise_distances(&l)), vec![3]);
    }

    #[test]
    fn ties_stay_together() {
        // unit square corners plus centre: four sides of length 1, four
        // half-diagonals, two diagonals
        let l = LocationSet::from_points(&[
            [0.0, 0.0],
            [1.0, 0.0],
            [0.0, 1.0],
            [1.0, 1.0],
            [0.5, 0.5],
        ])
        .unwrap();
        let d = pairwise_distances(&l);
        let bank = decile_boundaries(&l, 3).unwrap();
        let counts = ring_counts(&bank, &d);
        assert_eq!(counts.iter().sum::<usize>(), 10);
        assert!(counts.iter().all(|&c| c > 0));
        assert_eq!(counts, vec![4, 4, 2]);
        // target of 5 lands inside the run of four unit distances
        let bank = decile_boundaries(&l, 2).unwrap();
        assert_eq!(bank.boundaries()[1], 1.0);
        assert_eq!(ring_counts(&bank, &d), vec![8, 2]);
        // more kernels than distinct distances
        assert!(decile_boundaries(&l, 4).is_err());
    }

    #[test]
    fn too_many_kernels() {
        let l = LocationSet::from_points(&[[0.0], [1.0], [3.0]]).unwrap();
        assert!(matches!(decile_boundaries(&l, 4), Err(Error::InvalidConfig(_))));
        assert!(decile_boundaries(&l, 0).is_err());
    }

    #[test]
    fn single_selects_ring() {
        let b = KernelBank::new(vec![0.0, 1.0, 2.0, f64::INFINITY]).unwrap();
        let s = b.single(2).unwrap();
        assert_eq!(s.boundaries(), &[1.0, 2.0]);
        assert!(b.single(4).is_err());
    }
}
