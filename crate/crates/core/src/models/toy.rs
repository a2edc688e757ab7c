use crate::dense::{matrix_exponential, select_cols, select_rows, DenseMatrix};
use crate::error::{Error, Result};
use crate::integrators::{InitialCondition, MdeModel};
use crate::rng::{stream, stream_rng, uniform_matrix};
use crate::sampling::AdjacencyMap;

/// Number of non-zero diagonal entries in the rank-deficient variant.
pub const RANK_DEFICIENT_MODES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToySpec {
    pub n: usize,
    pub seed: u64,
    pub rank_deficient: bool,
}

impl Default for ToySpec {
    fn default() -> Self {
        Self { n: 100, seed: 0, rank_deficient: false }
    }
}

/// `dV/dt = W₁V + V + VW₂ᵀ` with skew-symmetric `W₁`, `W₂` and `V(0) = D`.
///
/// The exact solution is `e^{tW₁} eᵗ D (e^{tW₂})ᵀ`, so the singular values
/// of `V(t)` are `eᵗ dᵢ` for all time.
#[derive(Debug, Clone)]
pub struct ToyModel {
    spec: ToySpec,
    w1: DenseMatrix,
    w2: DenseMatrix,
    d: DenseMatrix,
    adjacency: AdjacencyMap,
}

fn skew(w: DenseMatrix) -> DenseMatrix {
    (&w - w.transpose()) * 0.5
}

impl ToyModel {
    pub fn new(spec: ToySpec) -> Result<Self> {
        let n = spec.n;
        if n < 2 {
            return Err(Error::InvalidParameter(format!("toy problem needs n >= 2, got {n}")));
        }
        let w1 = skew(uniform_matrix(&mut stream_rng(spec.seed, stream::TOY_W1), n, n));
        let w2 = skew(uniform_matrix(&mut stream_rng(spec.seed, stream::TOY_W2), n, n));
        let modes = if spec.rank_deficient { RANK_DEFICIENT_MODES.min(n) } else { n };
        let mut d = DenseMatrix::zeros(n, n);
        for i in 0..modes {
            d[(i, i)] = 0.5f64.powi(i as i32 + 1);
        }
        Ok(Self { spec, w1, w2, d, adjacency: AdjacencyMap::full(n) })
    }

    pub fn spec(&self) -> &ToySpec {
        &self.spec
    }

    pub fn initial_condition(&self) -> InitialCondition {
        InitialCondition::Dense(self.d.clone())
    }

    /// Closed-form solution at time `t`.
    pub fn exact(&self, t: f64) -> Result<DenseMatrix> {
        let e1 = matrix_exponential(&(&self.w1 * t))?;
        let e2 = matrix_exponential(&(&self.w2 * t))?;
        Ok(e1 * (&self.d * t.exp()) * e2.transpose())
    }

    /// Exact singular values at time `t`, descending.
    pub fn exact_singular_values(&self, t: f64) -> Vec<f64> {
        (0..self.spec.n).map(|i| self.d[(i, i)] * t.exp()).collect()
    }
}

impl MdeModel for ToyModel {
    fn nrows(&self) -> usize {
        self.spec.n
    }

    fn ncols(&self) -> usize {
        self.spec.n
    }

    fn row_adjacency(&self) -> &AdjacencyMap {
        &self.adjacency
    }

    fn col_adjacency(&self) -> Option<&AdjacencyMap> {
        Some(&self.adjacency)
    }

    fn rhs_cols(&self, _t: f64, v: &DenseMatrix, cols: &[usize], extra: &[usize]) -> Result<DenseMatrix> {
        let all: Vec<usize> = cols.iter().chain(extra).copied().collect();
        if v.shape() != (self.spec.n, all.len()) || all.len() != self.spec.n {
            return Err(Error::Shape(format!(
                "toy columns need all {} columns of V, got {}x{}",
                self.spec.n,
                v.nrows(),
                v.ncols()
            )));
        }
        let own = v.columns(0, cols.len());
        // (V W₂ᵀ)(:, cols) = V(:, all) · W₂(cols, all)ᵀ
        let w2 = select_cols(&select_rows(&self.w2, cols), &all);
        Ok(&self.w1 * own + own + v * w2.transpose())
    }

    fn rhs_rows(&self, _t: f64, v: &DenseMatrix, rows: &[usize], adjacent: &[usize]) -> Result<DenseMatrix> {
        let all: Vec<usize> = rows.iter().chain(adjacent).copied().collect();
        if v.shape() != (self.spec.n, self.spec.n) || all.len() != self.spec.n {
            return Err(Error::Shape(format!(
                "toy rows need all {} rows of V, got {}x{}",
                self.spec.n,
                v.nrows(),
                v.ncols()
            )));
        }
        let own = v.rows(0, rows.len());
        let w1 = select_cols(&select_rows(&self.w1, rows), &all);
        Ok(w1 * v + own + own * self.w2.transpose())
    }

    fn rhs_full(&self, _t: f64, v: &DenseMatrix) -> Result<DenseMatrix> {
        Ok(&self.w1 * v + v + v * self.w2.transpose())
    }
}
