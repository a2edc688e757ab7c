//! Row and column index selection from orthonormal bases.
//!
//! [`deim`] and [`qdeim`] pick one index per basis vector; [`oversample`]
//! appends further rows greedily, each time choosing the row that maximizes
//! the smallest singular value of the sampled block. [`find_adjacent`]
//! resolves the extra rows a sparse spatial stencil needs before a
//! right-hand side can be evaluated at the sampled rows.
//!
//! All selectors are deterministic; ties in any argmax go to the lowest index.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::Deref;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::dense::{select_rows, svd_economy, DenseMatrix};
use crate::error::{Error, Result};

/// Ordered list of distinct indices into a dimension of size `bound`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexVector {
    indices: Vec<usize>,
    bound: usize,
}

impl IndexVector {
    /// Validates: non-empty, every index `< bound`, no duplicates.
    pub fn new(indices: Vec<usize>, bound: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidIndex("empty index vector".into()));
        }
        let v = Self::possibly_empty(indices, bound)?;
        Ok(v)
    }

    /// Like [`IndexVector::new`] but accepts an empty list (adjacency results).
    pub fn possibly_empty(indices: Vec<usize>, bound: usize) -> Result<Self> {
        let mut seen = vec![false; bound];
        for &i in &indices {
            if i >= bound {
                return Err(Error::InvalidIndex(format!("index {i} out of bound {bound}")));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidIndex(format!("duplicate index {i}")));
            }
        }
        Ok(Self { indices, bound })
    }

    /// `0..len` as an index vector.
    pub fn range(len: usize, bound: usize) -> Result<Self> {
        Self::new((0..len).collect(), bound)
    }

    pub fn bound(&self) -> usize {
        self.bound
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.indices
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.indices
    }
}

impl Deref for IndexVector {
    type Target = [usize];

    fn deref(&self) -> &[usize] {
        &self.indices
    }
}

type NeighborFn = dyn Fn(usize) -> Vec<usize> + Send + Sync;

#[derive(Clone)]
enum Stencil {
    Independent,
    Full,
    Line { radius: usize, periodic: bool },
    Cross { nx: usize, ny: usize },
    Custom(Arc<NeighborFn>),
}

/// Which other rows (or columns) a right-hand-side evaluation at one index reads.
#[derive(Clone)]
pub struct AdjacencyMap {
    bound: usize,
    width: usize,
    stencil: Stencil,
}

impl fmt::Debug for AdjacencyMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.stencil {
            Stencil::Independent => "independent",
            Stencil::Full => "full",
            Stencil::Line { .. } => "line",
            Stencil::Cross { .. } => "cross",
            Stencil::Custom(_) => "custom",
        };
        f.debug_struct("AdjacencyMap")
            .field("bound", &self.bound)
            .field("width", &self.width)
            .field("kind", &kind)
            .finish()
    }
}

impl AdjacencyMap {
    /// No coupling: every index depends only on itself.
    pub fn independent(bound: usize) -> Self {
        Self { bound, width: 0, stencil: Stencil::Independent }
    }

    /// Dense coupling: every index depends on every other one.
    pub fn full(bound: usize) -> Self {
        Self { bound, width: bound.saturating_sub(1), stencil: Stencil::Full }
    }

    /// 1D stencil reaching `radius` points either side.
    pub fn line(bound: usize, radius: usize, periodic: bool) -> Self {
        Self { bound, width: 2 * radius, stencil: Stencil::Line { radius, periodic } }
    }

    /// 5-point cross on an `nx × ny` grid with index `ix * ny + iy`.
    pub fn cross(nx: usize, ny: usize) -> Self {
        Self { bound: nx * ny, width: 4, stencil: Stencil::Cross { nx, ny } }
    }

    /// Arbitrary deterministic neighbor function with declared maximum width.
    pub fn custom<F>(bound: usize, width: usize, f: F) -> Self
    where
        F: Fn(usize) -> Vec<usize> + Send + Sync + 'static,
    {
        Self { bound, width, stencil: Stencil::Custom(Arc::new(f)) }
    }

    pub fn bound(&self) -> usize {
        self.bound
    }

    /// Declared maximum number of neighbors per index.
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn is_independent(&self) -> bool {
        matches!(self.stencil, Stencil::Independent)
    }

    /// Neighbors of `i`, excluding `i` itself.
    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        let n = self.bound;
        let mut out = match &self.stencil {
            Stencil::Independent => Vec::new(),
            Stencil::Full => (0..n).filter(|&j| j != i).collect(),
            Stencil::Line { radius, periodic } => {
                let mut v = Vec::with_capacity(2 * radius);
                for d in 1..=*radius {
                    if *periodic {
                        v.push((i + n - d % n) % n);
                        v.push((i + d) % n);
                    } else {
                        if i >= d {
                            v.push(i - d);
                        }
                        if i + d < n {
                            v.push(i + d);
                        }
                    }
                }
                v
            }
            Stencil::Cross { nx, ny } => {
                let (ix, iy) = (i / ny, i % ny);
                let mut v = Vec::with_capacity(4);
                if ix > 0 {
                    v.push(i - ny);
                }
                if ix + 1 < *nx {
                    v.push(i + ny);
                }
                if iy > 0 {
                    v.push(i - 1);
                }
                if iy + 1 < *ny {
                    v.push(i + 1);
                }
                v
            }
            Stencil::Custom(f) => f(i),
        };
        out.retain(|&j| j != i);
        out.sort_unstable();
        out.dedup();
        debug_assert!(out.len() <= self.width, "stencil wider than declared");
        out
    }
}

/// Index selector used for both row and column sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Selector {
    #[default]
    Deim,
    Qdeim,
}

impl Selector {
    pub fn select(self, basis: &DenseMatrix) -> Result<IndexVector> {
        match self {
            Selector::Deim => deim(basis),
            Selector::Qdeim => qdeim(basis),
        }
    }
}

/// Greedy argmax of `|v|` over indices not yet taken; lowest index wins ties.
fn argmax_abs(values: impl Iterator<Item = f64>, taken: &[bool]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.enumerate() {
        if taken[i] {
            continue;
        }
        let a = v.abs();
        if best.is_none_or(|(_, b)| a > b) {
            best = Some((i, a));
        }
    }
    best
}

fn check_basis(u: &DenseMatrix) -> Result<()> {
    let (n, r) = u.shape();
    if r == 0 || r > n {
        return Err(Error::Shape(format!("selection basis must satisfy 1 <= r <= n, got {n}x{r}")));
    }
    if u.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("selection basis"));
    }
    Ok(())
}

/// Discrete empirical interpolation: one row per basis column.
pub fn deim(u: &DenseMatrix) -> Result<IndexVector> {
    check_basis(u)?;
    let (n, r) = u.shape();
    let mut taken = vec![false; n];
    let mut p = Vec::with_capacity(r);

    let (first, mag) = argmax_abs(u.column(0).iter().copied(), &taken).expect("n >= 1");
    if mag == 0.0 {
        return Err(Error::DegenerateBasis { step: 0 });
    }
    p.push(first);
    taken[first] = true;

    for j in 1..r {
        let a = DMatrix::from_fn(j, j, |i, k| u[(p[i], k)]);
        let b = DVector::from_fn(j, |i, _| u[(p[i], j)]);
        let c = a.lu().solve(&b).ok_or(Error::DegenerateBasis { step: j })?;
        let residual = u.column(j) - u.columns(0, j) * c;
        let (idx, mag) = argmax_abs(residual.iter().copied(), &taken).expect("r <= n");
        if mag == 0.0 || !mag.is_finite() {
            return Err(Error::DegenerateBasis { step: j });
        }
        p.push(idx);
        taken[idx] = true;
    }
    IndexVector::new(p, n)
}

/// Pivot order of column-pivoted QR applied to `Uᵀ`.
///
/// Computed as greedy Gram–Schmidt on the rows of `U`: each step takes the
/// row with the largest component orthogonal to the rows already chosen.
pub fn qdeim(u: &DenseMatrix) -> Result<IndexVector> {
    check_basis(u)?;
    let (n, r) = u.shape();
    let mut w = u.clone();
    let mut taken = vec![false; n];
    let mut p = Vec::with_capacity(r);
    for step in 0..r {
        let norms = (0..n).map(|i| w.row(i).norm());
        let (idx, mag) = argmax_abs(norms, &taken).expect("r <= n");
        if mag == 0.0 || !mag.is_finite() {
            return Err(Error::DegenerateBasis { step });
        }
        let q = w.row(idx).transpose() / mag;
        let proj = &w * &q;
        w -= proj * q.transpose();
        p.push(idx);
        taken[idx] = true;
    }
    IndexVector::new(p, n)
}

/// Smallest eigenvalue of `diag(lambda) + c cᵀ` with `lambda` ascending.
///
/// `lower` must be a valid lower bound; the root is bracketed by
/// `[max(λ₁, lower), min(λ₂, λ₁ + c₁²)]` and found by bisection on the
/// (increasing) secular function.
fn rank_one_min_eigenvalue(lambda: &[f64], c: &[f64], lower: f64) -> f64 {
    let l1 = lambda[0];
    let upper_rayleigh = l1 + c[0] * c[0];
    let mut hi = match lambda.get(1) {
        Some(&l2) => l2.min(upper_rayleigh),
        None => return upper_rayleigh,
    };
    let mut lo = lower.max(l1);
    if c[0] == 0.0 || hi <= lo {
        return lo.min(hi.max(lo));
    }
    let secular = |x: f64| -> f64 {
        1.0 + lambda
            .iter()
            .zip(c)
            .map(|(&l, &ci)| ci * ci / (l - x))
            .sum::<f64>()
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f = secular(mid);
        if !f.is_finite() || f > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    lo
}

/// Appends `m` rows to `p0`, each maximizing `σ_min(U(p,:))` over unused rows.
///
/// The candidate scan uses the eigendecomposition of `U(p,:)ᵀU(p,:)`: the
/// new smallest eigenvalue after adding row `u` is the smallest root of a
/// secular equation. A closed-form lower bound and a two-vector Ritz upper bound
/// prune candidates that cannot win before any root is solved.
pub fn oversample(u: &DenseMatrix, p0: &IndexVector, m: usize) -> Result<IndexVector> {
    check_basis(u)?;
    let (n, r) = u.shape();
    if p0.bound() != n {
        return Err(Error::Shape(format!("p0 indexes {} rows, basis has {n}", p0.bound())));
    }
    if p0.len() < r {
        return Err(Error::Shape(format!("p0 has {} indices for a rank-{r} basis", p0.len())));
    }
    let total = p0.len() + m;
    if total > n {
        return Err(Error::TooManySamples { requested: total, available: n });
    }
    let mut p = p0.as_slice().to_vec();
    let mut taken = vec![false; n];
    for &i in &p {
        taken[i] = true;
    }

    for _ in 0..m {
        let block = select_rows(u, &p);
        let svd = svd_economy(&block)?;
        // eigenvalues of the Gram matrix, ascending, with matching eigenvectors
        let lambda: Vec<f64> = svd.sigma.iter().rev().map(|s| s * s).collect();
        let w = DenseMatrix::from_fn(r, r, |i, j| svd.y[(i, r - 1 - j)]);
        let coeffs = u * &w; // row i holds Wᵀ u_i

        let gap = if r > 1 { lambda[1] - lambda[0] } else { 0.0 };
        let mut lower = vec![f64::NEG_INFINITY; n];
        let mut upper = vec![f64::NEG_INFINITY; n];
        let mut best_lower = f64::NEG_INFINITY;
        for i in (0..n).filter(|&i| !taken[i]) {
            let c1 = coeffs[(i, 0)];
            let cn2 = coeffs.row(i).norm_squared();
            let lb = if r == 1 {
                lambda[0] + c1 * c1
            } else {
                let a = gap + cn2;
                let disc = (a * a - 4.0 * gap * c1 * c1).max(0.0);
                lambda[0] + 0.5 * (a - disc.sqrt())
            };
            let ub = match lambda.get(1) {
                Some(&l2) => {
                    // Ritz value on span(e₁, e₂), capped by interlacing
                    let c2 = coeffs[(i, 1)];
                    let (a, d, b) = (lambda[0] + c1 * c1, l2 + c2 * c2, c1 * c2);
                    let ritz = 0.5 * (a + d) - (0.25 * (a - d) * (a - d) + b * b).sqrt();
                    ritz.min(l2)
                }
                None => lambda[0] + c1 * c1,
            };
            lower[i] = lb;
            upper[i] = ub.max(lb);
            best_lower = best_lower.max(lb);
        }

        // slack keeps candidates whose bounds tie with the leader up to rounding
        let slack = 1e-12 * best_lower.abs().max(lambda[r - 1]) + f64::MIN_POSITIVE;
        let mut order: Vec<usize> = (0..n).filter(|&i| !taken[i] && upper[i] + slack >= best_lower).collect();
        order.sort_by(|&a, &b| upper[b].total_cmp(&upper[a]).then(a.cmp(&b)));
        let mut best: Option<(usize, f64)> = None;
        let mut c = vec![0.0; r];
        for i in order {
            if best.is_some_and(|(_, b)| upper[i] + slack < b) {
                break;
            }
            c.iter_mut().zip(coeffs.row(i).iter()).for_each(|(dst, &v)| *dst = v);
            let value = rank_one_min_eigenvalue(&lambda, &c, lower[i]);
            if best.is_none_or(|(j, b)| value > b || (value == b && i < j)) {
                best = Some((i, value));
            }
        }
        let (idx, _) = best.ok_or(Error::TooManySamples { requested: total, available: n })?;
        p.push(idx);
        taken[idx] = true;
    }
    IndexVector::new(p, n)
}

/// `selector` indices grown to `count` by [`oversample`].
pub fn sparse_selection(selector: Selector, basis: &DenseMatrix, count: usize) -> Result<IndexVector> {
    let base = selector.select(basis)?;
    if count < base.len() {
        return Err(Error::Shape(format!(
            "cannot select {count} indices from a rank-{} basis",
            base.len()
        )));
    }
    oversample(basis, &base, count - base.len())
}

/// Indices reached from `p` by applying `adj` up to `stages` times, minus `p`, sorted.
pub fn find_adjacent(p: &IndexVector, adj: &AdjacencyMap, stages: usize) -> IndexVector {
    let n = adj.bound();
    if stages == 0 || adj.is_independent() {
        return IndexVector { indices: Vec::new(), bound: n };
    }
    if matches!(adj.stencil, Stencil::Full) {
        let inside: BTreeSet<usize> = p.iter().copied().collect();
        let rest = (0..n).filter(|i| !inside.contains(i)).collect();
        return IndexVector { indices: rest, bound: n };
    }
    let mut reached: BTreeSet<usize> = p.iter().copied().collect();
    let mut frontier: Vec<usize> = p.to_vec();
    for _ in 0..stages {
        let mut next = Vec::new();
        for &i in &frontier {
            for j in adj.neighbors(i) {
                if reached.insert(j) {
                    next.push(j);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    let inside: BTreeSet<usize> = p.iter().copied().collect();
    let indices = reached.into_iter().filter(|i| !inside.contains(i)).collect();
    IndexVector { indices, bound: n }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::{norm2_of_pinv, qr_economy};
    use crate::rng::{normal_matrix, stream, stream_rng};

    fn orthonormal(seed: u64, n: usize, r: usize) -> DenseMatrix {
        let a = normal_matrix(&mut stream_rng(seed, stream::TESTING), n, r);
        qr_economy(&a).unwrap().q
    }

    fn unit_columns(n: usize, cols: &[usize]) -> DenseMatrix {
        let mut u = DenseMatrix::zeros(n, cols.len());
        for (k, &c) in cols.iter().enumerate() {
            u[(c, k)] = 1.0;
        }
        u
    }

    /// Straight transcription of the greedy recursion, used as an oracle.
    fn deim_oracle(u: &DenseMatrix) -> Vec<usize> {
        let (n, r) = u.shape();
        let mut p: Vec<usize> = Vec::new();
        for j in 0..r {
            let mut res: Vec<f64> = (0..n).map(|i| u[(i, j)]).collect();
            if j > 0 {
                let a = DMatrix::from_fn(j, j, |i, k| u[(p[i], k)]);
                let b = DVector::from_fn(j, |i, _| u[(p[i], j)]);
                let c = a.try_inverse().unwrap() * b;
                for (i, v) in res.iter_mut().enumerate() {
                    for k in 0..j {
                        *v -= u[(i, k)] * c[k];
                    }
                }
            }
            let mut best = 0;
            for i in 0..n {
                if !p.contains(&i) && (p.contains(&best) || res[i].abs() > res[best].abs()) {
                    best = i;
                }
            }
            p.push(best);
        }
        p
    }

    fn sigma_min(u: &DenseMatrix, rows: &[usize]) -> f64 {
        *svd_economy(&select_rows(u, rows)).unwrap().sigma.last().unwrap()
    }

    #[test]
    fn deim_unit_vectors() {
        let u = unit_columns(10, &[3, 7]);
        assert_eq!(deim(&u).unwrap().as_slice(), &[3, 7]);
        let mut q = qdeim(&u).unwrap().into_vec();
        q.sort();
        assert_eq!(q, vec![3, 7]);
    }

    #[test]
    fn single_column_is_argmax() {
        let u = DenseMatrix::from_column_slice(2, 1, &[0.6, 0.8]);
        assert_eq!(deim(&u).unwrap().as_slice(), &[1]);
        assert_eq!(qdeim(&u).unwrap().as_slice(), &[1]);
    }

    #[test]
    fn deim_matches_greedy_oracle() {
        let u = orthonormal(21, 30, 4);
        assert_eq!(deim(&u).unwrap().into_vec(), deim_oracle(&u));
    }

    #[test]
    fn qdeim_comparable_to_deim() {
        let u = orthonormal(22, 30, 4);
        let a = norm2_of_pinv(&select_rows(&u, &deim(&u).unwrap())).unwrap();
        let b = norm2_of_pinv(&select_rows(&u, &qdeim(&u).unwrap())).unwrap();
        assert!(b <= 2.0 * a && a <= 2.0 * b, "deim {a} qdeim {b}");
    }

    #[test]
    fn oversample_noop_and_zero_rows() {
        let u = orthonormal(23, 12, 3);
        let p0 = deim(&u).unwrap();
        assert_eq!(oversample(&u, &p0, 0).unwrap(), p0);

        let u = unit_columns(4, &[0, 1]);
        let p0 = IndexVector::new(vec![0, 1], 4).unwrap();
        let p = oversample(&u, &p0, 2).unwrap();
        assert_eq!(&p[..2], &[0, 1]);
        let mut tail = p[2..].to_vec();
        tail.sort();
        assert_eq!(tail, vec![2, 3]);
        assert!((sigma_min(&u, &p) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn oversample_reduces_eta() {
        let u = orthonormal(24, 40, 5);
        let p0 = deim(&u).unwrap();
        let p = oversample(&u, &p0, 5).unwrap();
        let before = norm2_of_pinv(&select_rows(&u, &p0)).unwrap();
        let after = norm2_of_pinv(&select_rows(&u, &p)).unwrap();
        assert!(after <= before);
    }

    #[test]
    fn oversample_matches_brute_force_svd_scan() {
        for seed in 0..20 {
            let (n, r) = (25 + seed as usize, 1 + seed as usize % 6);
            let u = orthonormal(100 + seed, n, r);
            let mut p = deim(&u).unwrap().into_vec();
            for _ in 0..4 {
                let fast = oversample(&u, &IndexVector::new(p.clone(), n).unwrap(), 1).unwrap();
                let chosen = *fast.last().unwrap();
                let best = (0..n)
                    .filter(|i| !p.contains(i))
                    .map(|i| {
                        let mut rows = p.clone();
                        rows.push(i);
                        sigma_min(&u, &rows)
                    })
                    .fold(0.0, f64::max);
                let mut rows = p.clone();
                rows.push(chosen);
                let got = sigma_min(&u, &rows);
                assert!(got >= best * (1.0 - 1e-10), "seed {seed}: got {got}, best {best}");
                p.push(chosen);
            }
        }
    }

    #[test]
    fn oversample_rejects_too_many() {
        let u = orthonormal(25, 5, 2);
        let p0 = deim(&u).unwrap();
        assert_eq!(
            oversample(&u, &p0, 4).unwrap_err(),
            Error::TooManySamples { requested: 6, available: 5 }
        );
    }

    #[test]
    fn adjacency_examples() {
        let line = AdjacencyMap::line(10, 1, false);
        let p = IndexVector::new(vec![5], 10).unwrap();
        assert_eq!(find_adjacent(&p, &line, 1).as_slice(), &[4, 6]);

        let ring = AdjacencyMap::line(10, 1, true);
        let p = IndexVector::new(vec![0], 10).unwrap();
        assert_eq!(find_adjacent(&p, &ring, 1).as_slice(), &[1, 9]);

        let cross = AdjacencyMap::cross(10, 10);
        let p = IndexVector::new(vec![4 * 10 + 5], 100).unwrap();
        assert_eq!(find_adjacent(&p, &cross, 1).len(), 4);

        let p = IndexVector::new(vec![5], 10).unwrap();
        assert_eq!(find_adjacent(&p, &line, 2).as_slice(), &[3, 4, 6, 7]);
        assert!(find_adjacent(&p, &line, 0).is_empty());

        let full = AdjacencyMap::full(5);
        let p = IndexVector::new(vec![3, 1], 5).unwrap();
        assert_eq!(find_adjacent(&p, &full, 1).as_slice(), &[0, 2, 4]);
    }

    #[test]
    fn index_vector_validation() {
        assert!(IndexVector::new(vec![], 3).is_err());
        assert!(IndexVector::new(vec![0, 3], 3).is_err());
        assert!(IndexVector::new(vec![1, 1], 3).is_err());
        assert!(IndexVector::possibly_empty(vec![], 3).is_ok());
    }
}
