use std::f64::consts::PI;

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::integrators::{InitialCondition, LocalIndex, MdeModel};
use crate::rng::{stream, stream_rng};
use crate::sampling::AdjacencyMap;

use super::kl::{kl_expansion, unit_grid};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BurgersSpec {
    pub n: usize,
    pub s: usize,
    pub nu: f64,
    /// Number of random dimensions.
    pub d: usize,
    /// Mean and standard deviation of each `ξᵢ`.
    pub noise_mean: f64,
    pub noise_sigma: f64,
    /// Prefactor of the noise terms in the initial and inflow data.
    pub noise_amplitude: f64,
    /// Length scale of the squared-exponential kernel.
    pub length_scale: f64,
    /// Penalty strength is `tau_factor / Δx`.
    pub tau_factor: f64,
    pub seed: u64,
}

impl Default for BurgersSpec {
    fn default() -> Self {
        Self {
            n: 401,
            s: 256,
            nu: 2.5e-3,
            d: 17,
            noise_mean: 0.0,
            noise_sigma: 1e-3,
            noise_amplitude: 1.0,
            length_scale: 0.4,
            tau_factor: 10.0,
            seed: 0,
        }
    }
}

impl BurgersSpec {
    pub const DT: f64 = 2.5e-4;
    pub const T_FINAL: f64 = 5.0;

    /// Largest `Δt` (capped at [`BurgersSpec::DT`]) keeping explicit RK4 stable
    /// for both the diffusion and the boundary penalty on this grid.
    pub fn stable_dt(&self) -> f64 {
        let h = 1.0 / (self.n - 1) as f64;
        let diffusion = 0.5 * h * h / self.nu;
        let penalty = 0.5 * h / self.tau_factor;
        Self::DT.min(diffusion).min(penalty)
    }
}

/// Viscous Burgers equation on `[0, 1]` with one column per random sample.
///
/// Interior rows use second-order central differences. The two boundary rows
/// use one-sided differences and enforce the boundary data weakly through a
/// penalty `τ (g − v)`.
#[derive(Debug, Clone)]
pub struct BurgersModel {
    spec: BurgersSpec,
    h: f64,
    tau: f64,
    /// `d × s`.
    xi: DenseMatrix,
    adjacency: AdjacencyMap,
}

impl BurgersModel {
    pub fn new(spec: BurgersSpec) -> Result<Self> {
        if spec.n < 4 || spec.s == 0 {
            return Err(Error::InvalidParameter(format!(
                "Burgers grid needs n >= 4 and s >= 1, got n={}, s={}",
                spec.n, spec.s
            )));
        }
        if spec.d == 0 || spec.d > spec.n {
            return Err(Error::InvalidParameter(format!("Burgers needs 1 <= d <= n, got d={}", spec.d)));
        }
        if !(spec.nu >= 0.0) || !(spec.noise_sigma >= 0.0) || !(spec.tau_factor > 0.0) {
            return Err(Error::InvalidParameter(
                "Burgers needs nu >= 0, noise_sigma >= 0, tau_factor > 0".into(),
            ));
        }
        let n = spec.n;
        let h = 1.0 / (n - 1) as f64;
        let xi = if spec.noise_sigma > 0.0 {
            let normal = Normal::new(spec.noise_mean, spec.noise_sigma)
                .map_err(|e| Error::InvalidParameter(e.to_string()))?;
            let mut rng = stream_rng(spec.seed, stream::BURGERS_XI);
            // filled column by column, so each sample's draws are contiguous in the stream
            DenseMatrix::from_fn(spec.d, spec.s, |_, _| normal.sample(&mut rng))
        } else {
            DenseMatrix::from_element(spec.d, spec.s, spec.noise_mean)
        };
        let adjacency = AdjacencyMap::custom(n, 2, move |i| {
            if i == 0 {
                vec![1, 2]
            } else if i == n - 1 {
                vec![n - 3, n - 2]
            } else {
                vec![i - 1, i + 1]
            }
        });
        Ok(Self { spec, h, tau: spec.tau_factor / h, xi, adjacency })
    }

    pub fn spec(&self) -> &BurgersSpec {
        &self.spec
    }

    /// Random inputs, one column per sample.
    pub fn xi(&self) -> &DenseMatrix {
        &self.xi
    }

    /// Inflow value `g(t; ξⱼ)` at `x = 0`.
    pub fn inflow(&self, t: f64, j: usize) -> f64 {
        let noise: f64 = (1..=self.spec.d)
            .map(|i| (i as f64).powi(-2) * (i as f64 * PI * t).sin() * self.xi[(i - 1, j)])
            .sum();
        -(2.0 * PI * t).sin() + self.spec.noise_amplitude * noise
    }

    /// `V₀ = A Bᵀ`: the deterministic profile plus one term per KL mode.
    pub fn initial_condition(&self) -> Result<InitialCondition> {
        let (n, s, d) = (self.spec.n, self.spec.s, self.spec.d);
        let x = unit_grid(n);
        let kl = kl_expansion(self.spec.length_scale, n, d)?;
        let mut a = DenseMatrix::zeros(n, d + 1);
        for (k, &xk) in x.iter().enumerate() {
            let env = (2.0 * PI * xk).sin();
            a[(k, 0)] = env * 0.5 * ((2.0 * PI * xk).cos().exp() - 1.5);
            for i in 0..d {
                a[(k, i + 1)] = env * self.spec.noise_amplitude * kl.lambda[i].sqrt() * kl.psi[(k, i)];
            }
        }
        let b = DenseMatrix::from_fn(s, d + 1, |j, c| if c == 0 { 1.0 } else { self.xi[(c - 1, j)] });
        Ok(InitialCondition::Factored { a, b })
    }

    /// `F` at node `k` given the node's value and the two values its stencil reads.
    #[inline]
    fn node(&self, k: usize, vm: f64, v0: f64, vp: f64, g: f64) -> f64 {
        let (h, nu) = (self.h, self.spec.nu);
        let n = self.spec.n;
        if k == 0 {
            // vm, vp hold v₁, v₂
            let (v1, v2) = (vm, vp);
            -v0 * (v1 - v0) / h + nu * (v0 - 2.0 * v1 + v2) / (h * h) + self.tau * (g - v0)
        } else if k == n - 1 {
            // vm, vp hold v_{n-2}, v_{n-3}
            let (v1, v2) = (vm, vp);
            -v0 * (v0 - v1) / h + nu * (v0 - 2.0 * v1 + v2) / (h * h) - self.tau * v0
        } else {
            -v0 * (vp - vm) / (2.0 * h) + nu * (vp - 2.0 * v0 + vm) / (h * h)
        }
    }

    fn column(&self, t: f64, j: usize, v: &[f64], out: &mut [f64]) {
        let n = self.spec.n;
        let g = self.inflow(t, j);
        out[0] = self.node(0, v[1], v[0], v[2], g);
        for k in 1..n - 1 {
            out[k] = self.node(k, v[k - 1], v[k], v[k + 1], g);
        }
        out[n - 1] = self.node(n - 1, v[n - 2], v[n - 1], v[n - 3], g);
    }
}

impl MdeModel for BurgersModel {
    fn nrows(&self) -> usize {
        self.spec.n
    }

    fn ncols(&self) -> usize {
        self.spec.s
    }

    fn row_adjacency(&self) -> &AdjacencyMap {
        &self.adjacency
    }

    fn rhs_cols(&self, t: f64, v: &DenseMatrix, cols: &[usize], _extra: &[usize]) -> Result<DenseMatrix> {
        let n = self.spec.n;
        if v.nrows() != n || v.ncols() < cols.len() {
            return Err(Error::Shape(format!("Burgers columns: got {}x{}", v.nrows(), v.ncols())));
        }
        let mut out = DenseMatrix::zeros(n, cols.len());
        let input = v.as_slice();
        out.as_mut_slice()
            .par_chunks_mut(n)
            .zip(cols.par_iter())
            .enumerate()
            .for_each(|(k, (dst, &j))| self.column(t, j, &input[k * n..(k + 1) * n], dst));
        Ok(out)
    }

    fn rhs_rows(&self, t: f64, v: &DenseMatrix, rows: &[usize], adjacent: &[usize]) -> Result<DenseMatrix> {
        let (n, s) = (self.spec.n, self.spec.s);
        if v.ncols() != s || v.nrows() != rows.len() + adjacent.len() {
            return Err(Error::Shape(format!("Burgers rows: got {}x{}", v.nrows(), v.ncols())));
        }
        let local = LocalIndex::new(n, rows, adjacent);
        let stencil: Vec<_> = rows
            .iter()
            .map(|&k| {
                let (a, b) = match k {
                    0 => (1, 2),
                    _ if k == n - 1 => (n - 2, n - 3),
                    _ => (k - 1, k + 1),
                };
                (k, local.get(a), local.get(k), local.get(b))
            })
            .collect();
        let mut out = DenseMatrix::zeros(rows.len(), s);
        for j in 0..s {
            let vj = v.column(j);
            let g = if rows.contains(&0) { self.inflow(t, j) } else { 0.0 };
            let mut oj = out.column_mut(j);
            for (r, &(k, la, lk, lb)) in stencil.iter().enumerate() {
                oj[r] = self.node(k, vj[la], vj[lk], vj[lb], g);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::svd_economy;

    fn small(noise_sigma: f64) -> BurgersModel {
        BurgersModel::new(BurgersSpec { n: 41, s: 12, d: 5, noise_sigma, ..Default::default() }).unwrap()
    }

    #[test]
    fn noiseless_initial_condition_is_rank_one() {
        let m = small(0.0);
        let v0 = m.initial_condition().unwrap().to_dense();
        let sv = svd_economy(&v0).unwrap().sigma;
        assert!(sv[1] <= 1e-14 * sv[0]);
        for j in 1..12 {
            assert_eq!(v0.column(j), v0.column(0));
        }
    }

    #[test]
    fn rows_and_columns_agree_with_full() {
        let m = small(0.3);
        let mut rng = stream_rng(71, stream::TESTING);
        let v = crate::rng::normal_matrix(&mut rng, 41, 12);
        let full = m.rhs_full(0.37, &v).unwrap();
        let rows = [0usize, 17, 40, 39];
        let adj: Vec<usize> = vec![1, 2, 16, 18, 37, 38];
        let stacked: Vec<usize> = rows.iter().chain(&adj).copied().collect();
        let block = crate::dense::select_rows(&v, &stacked);
        let fr = m.rhs_rows(0.37, &block, &rows, &adj).unwrap();
        for (r, &k) in rows.iter().enumerate() {
            for j in 0..12 {
                assert!((fr[(r, j)] - full[(k, j)]).abs() <= 1e-12 * full.amax());
            }
        }
        let cols = [5usize, 0];
        let fc = m.rhs_cols(0.37, &crate::dense::select_cols(&v, &cols), &cols, &[]).unwrap();
        assert!((fc - crate::dense::select_cols(&full, &cols)).amax() <= 1e-12 * full.amax());
    }

    #[test]
    fn inflow_is_deterministic_without_noise() {
        let m = small(0.0);
        assert!((m.inflow(0.25, 3) + 1.0).abs() < 1e-15);
    }
}
