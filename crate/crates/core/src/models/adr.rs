use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::integrators::{InitialCondition, LocalIndex, MdeModel};
use crate::rng::{stream, stream_rng};
use crate::sampling::AdjacencyMap;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdrSpec {
    /// Grid points along the channel, `x₁ ∈ [0, length]`.
    pub nx1: usize,
    /// Grid points across the channel, `x₂ ∈ [−1, 1]`.
    pub nx2: usize,
    pub length: f64,
    pub s: usize,
    /// `α = 1/ξ` with `ξ ~ N(xi_mean, xi_std²)`, redrawn while `ξ <= xi_min`.
    pub xi_mean: f64,
    pub xi_std: f64,
    pub xi_min: f64,
    /// Centerline speed of the parabolic channel profile.
    pub u_max: f64,
    pub reaction: bool,
    /// Zero-gradient outflow at `x₁ = length`; Dirichlet zero when false.
    pub neumann_outflow: bool,
    pub seed: u64,
}

impl Default for AdrSpec {
    fn default() -> Self {
        Self {
            nx1: 128,
            nx2: 64,
            length: 10.0,
            s: 1000,
            xi_mean: 100.0,
            xi_std: 25.0,
            xi_min: 10.0,
            u_max: 1.0,
            reaction: true,
            neumann_outflow: true,
            seed: 0,
        }
    }
}

impl AdrSpec {
    pub const DT: f64 = 5e-4;
    pub const T_FINAL: f64 = 5.0;

    pub fn n(&self) -> usize {
        self.nx1 * self.nx2
    }
}

/// Advection–diffusion–reaction in a 2D channel with a random diffusivity per column.
///
/// Grid index `k = i₁·nx2 + i₂`. Central differences throughout. The inlet
/// `x₁ = 0` and the walls `x₂ = ±1` hold `v = 0`; their rows of `F` vanish.
#[derive(Debug, Clone)]
pub struct AdrModel {
    spec: AdrSpec,
    h1: f64,
    h2: f64,
    alpha: Vec<f64>,
    /// Streamwise velocity per `i₂`.
    velocity: Vec<f64>,
    redraws: usize,
    adjacency: AdjacencyMap,
}

/// Rate of the non-polynomial source term.
pub fn reaction_rate(v: f64) -> f64 {
    v * v / (10.0 + v)
}

impl AdrModel {
    pub fn new(spec: AdrSpec) -> Result<Self> {
        if spec.nx1 < 3 || spec.nx2 < 3 || spec.s == 0 {
            return Err(Error::InvalidParameter(format!(
                "ADR needs nx1, nx2 >= 3 and s >= 1, got {}x{}, s={}",
                spec.nx1, spec.nx2, spec.s
            )));
        }
        if !(spec.length > 0.0) || !(spec.xi_min >= 0.0) || !(spec.xi_std >= 0.0) || !(spec.xi_mean > spec.xi_min) {
            return Err(Error::InvalidParameter(
                "ADR needs length > 0, xi_std >= 0, xi_mean > xi_min >= 0".into(),
            ));
        }
        let normal = Normal::new(spec.xi_mean, spec.xi_std).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let mut rng = stream_rng(spec.seed, stream::ADR_XI);
        let mut redraws = 0;
        let alpha = (0..spec.s)
            .map(|_| loop {
                let xi: f64 = normal.sample(&mut rng);
                if xi > spec.xi_min {
                    break 1.0 / xi;
                }
                redraws += 1;
            })
            .collect();
        let h2 = 2.0 / (spec.nx2 - 1) as f64;
        let velocity = (0..spec.nx2)
            .map(|i| {
                let x2 = -1.0 + i as f64 * h2;
                spec.u_max * (1.0 - x2 * x2)
            })
            .collect();
        Ok(Self {
            spec,
            h1: spec.length / (spec.nx1 - 1) as f64,
            h2,
            alpha,
            velocity,
            redraws,
            adjacency: AdjacencyMap::cross(spec.nx1, spec.nx2),
        })
    }

    pub fn spec(&self) -> &AdrSpec {
        &self.spec
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// Number of `ξ` draws rejected for falling at or below `xi_min`.
    pub fn redraws(&self) -> usize {
        self.redraws
    }

    fn fixed(&self, i1: usize, i2: usize) -> bool {
        i1 == 0 || i2 == 0 || i2 == self.spec.nx2 - 1 || (i1 == self.spec.nx1 - 1 && !self.spec.neumann_outflow)
    }

    /// Deterministic band profile in `x₂`, zero on the Dirichlet boundaries. Rank one.
    pub fn initial_condition(&self) -> InitialCondition {
        let (nx1, nx2) = (self.spec.nx1, self.spec.nx2);
        let mut a = DenseMatrix::zeros(nx1 * nx2, 1);
        for i1 in 0..nx1 {
            for i2 in 0..nx2 {
                if self.fixed(i1, i2) {
                    continue;
                }
                let x2 = -1.0 + i2 as f64 * self.h2;
                a[(i1 * nx2 + i2, 0)] = 0.5 * (((x2 + 0.5) / 0.1).tanh() - ((x2 - 0.5) / 0.1).tanh());
            }
        }
        InitialCondition::Factored { a, b: DenseMatrix::from_element(self.spec.s, 1, 1.0) }
    }

    /// `F` at grid point `(i₁, i₂)` from its own value and four neighbors.
    /// `east` is ignored on the outflow boundary, where it mirrors `west`.
    #[inline]
    #[allow(clippy::too_many_arguments)]
    fn node(&self, i1: usize, i2: usize, v: f64, west: f64, east: f64, south: f64, north: f64, alpha: f64) -> f64 {
        if self.fixed(i1, i2) {
            return 0.0;
        }
        let east = if i1 == self.spec.nx1 - 1 { west } else { east };
        let advection = self.velocity[i2] * (east - west) / (2.0 * self.h1);
        let diffusion =
            alpha * ((east - 2.0 * v + west) / (self.h1 * self.h1) + (north - 2.0 * v + south) / (self.h2 * self.h2));
        let source = if self.spec.reaction { reaction_rate(v) } else { 0.0 };
        -advection + diffusion + source
    }

    fn column(&self, alpha: f64, v: &[f64], out: &mut [f64]) {
        let (nx1, nx2) = (self.spec.nx1, self.spec.nx2);
        for i1 in 0..nx1 {
            for i2 in 0..nx2 {
                let k = i1 * nx2 + i2;
                out[k] = if self.fixed(i1, i2) {
                    0.0
                } else {
                    let east = if i1 + 1 < nx1 { v[k + nx2] } else { 0.0 };
                    self.node(i1, i2, v[k], v[k - nx2], east, v[k - 1], v[k + 1], alpha)
                };
            }
        }
    }
}

impl MdeModel for AdrModel {
    fn nrows(&self) -> usize {
        self.spec.n()
    }

    fn ncols(&self) -> usize {
        self.spec.s
    }

    fn row_adjacency(&self) -> &AdjacencyMap {
        &self.adjacency
    }

    fn rhs_cols(&self, _t: f64, v: &DenseMatrix, cols: &[usize], _extra: &[usize]) -> Result<DenseMatrix> {
        let n = self.spec.n();
        if v.nrows() != n || v.ncols() < cols.len() {
            return Err(Error::Shape(format!("ADR columns: got {}x{}", v.nrows(), v.ncols())));
        }
        let mut out = DenseMatrix::zeros(n, cols.len());
        let input = v.as_slice();
        out.as_mut_slice()
            .par_chunks_mut(n)
            .zip(cols.par_iter())
            .enumerate()
            .for_each(|(k, (dst, &j))| self.column(self.alpha[j], &input[k * n..(k + 1) * n], dst));
        Ok(out)
    }

    fn rhs_rows(&self, _t: f64, v: &DenseMatrix, rows: &[usize], adjacent: &[usize]) -> Result<DenseMatrix> {
        let (n, s, nx1, nx2) = (self.spec.n(), self.spec.s, self.spec.nx1, self.spec.nx2);
        if v.ncols() != s || v.nrows() != rows.len() + adjacent.len() {
            return Err(Error::Shape(format!("ADR rows: got {}x{}", v.nrows(), v.ncols())));
        }
        let local = LocalIndex::new(n, rows, adjacent);
        // (row, i₁, i₂, own, west, east, south, north) for the rows that are not held fixed
        let stencil: Vec<_> = rows
            .iter()
            .enumerate()
            .filter_map(|(r, &k)| {
                let (i1, i2) = (k / nx2, k % nx2);
                if self.fixed(i1, i2) {
                    return None;
                }
                let east = (i1 + 1 < nx1).then(|| local.get(k + nx2));
                Some((r, i1, i2, local.get(k), local.get(k - nx2), east, local.get(k - 1), local.get(k + 1)))
            })
            .collect();
        let mut out = DenseMatrix::zeros(rows.len(), s);
        for j in 0..s {
            let (vj, alpha) = (v.column(j), self.alpha[j]);
            let mut oj = out.column_mut(j);
            for &(r, i1, i2, lk, lw, le, ls, ln) in &stencil {
                let east = le.map_or(0.0, |l| vj[l]);
                oj[r] = self.node(i1, i2, vj[lk], vj[lw], east, vj[ls], vj[ln], alpha);
            }
        }
        Ok(out)
    }
}
