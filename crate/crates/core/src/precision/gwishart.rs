//! Exact G-Wishart sampling on decomposable graphs.
//!
//! The density is proportional to `|K|^((df - 2) / 2) exp(-tr(D K) / 2)` on
//! the symmetric positive-definite matrices whose zero pattern follows the
//! graph. With a perfect vertex numbering every vertex `i` has a clique `P` of
//! earlier neighbours, and `K` factors as `(I - B)ᵀ Λ⁻¹ (I - B)` where row `i`
//! of `B` holds the regression of vertex `i` on `P`. The family parameters are
//! independent across vertices: the conditional precision `1/λ_i` is gamma
//! with shape `(df + |P|) / 2` and rate `d_{i|P} / 2`, and the regression
//! coefficients are normal around `D_PP⁻¹ D_Pi` with covariance `λ_i D_PP⁻¹`.
//! These are the clique-marginal Wishart laws restricted to each family.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma};

use super::graph::PrecisionGraph;
use crate::error::{Error, Result};
use crate::linalg::{self, is_symmetric, select};

/// Parameters `(df, D)` of a G-Wishart law.
#[derive(Debug, Clone, PartialEq)]
pub struct GWishartSpec {
    df: f64,
    scale: DMatrix<f64>,
}

impl GWishartSpec {
    pub fn new(df: f64, scale: DMatrix<f64>) -> Result<Self> {
        if !(df > 2.0) || !df.is_finite() {
            return Err(Error::input(format!("G-Wishart degrees of freedom must exceed 2, got {df}")));
        }
        if !is_symmetric(&scale, 1e-10) {
            return Err(Error::input("G-Wishart scale must be symmetric"));
        }
        if linalg::min_cholesky_pivot(&scale).is_none_or(|p| p <= 0.0) {
            return Err(Error::input("G-Wishart scale must be positive definite"));
        }
        Ok(Self { df, scale })
    }

    /// `W_G(df, c · I_n)`.
    pub fn scaled_identity(df: f64, c: f64, n: usize) -> Result<Self> {
        Self::new(df, DMatrix::identity(n, n) * c)
    }

    pub fn df(&self) -> f64 {
        self.df
    }

    pub fn scale(&self) -> &DMatrix<f64> {
        &self.scale
    }

    pub fn dim(&self) -> usize {
        self.scale.nrows()
    }
}

/// Symmetric positive-definite matrix following a graph's zero pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionMatrix(DMatrix<f64>);

impl PrecisionMatrix {
    /// Wraps `values`, checking symmetry and positive definiteness.
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if !is_symmetric(&values, 1e-10) {
            return Err(Error::input("precision matrix must be symmetric"));
        }
        if linalg::min_cholesky_pivot(&values).is_none_or(|p| p <= 0.0) {
            return Err(Error::input("precision matrix must be positive definite"));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    /// Writes `row,col,value` triples for every nonzero entry.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("row,col,value\n");
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                let v = self.0[(i, j)];
                if v != 0.0 {
                    out.push_str(&format!("{i},{j},{v}\n"));
                }
            }
        }
        std::fs::File::create(path)
            .and_then(|mut f| f.write_all(out.as_bytes()))
            .map_err(|e| Error::io(path, e))
    }
}

/// One exact draw from `W_G(spec.df, spec.scale)`.
pub fn sample_gwishart<R: Rng + ?Sized>(
    spec: &GWishartSpec,
    graph: &PrecisionGraph,
    rng: &mut R,
) -> Result<PrecisionMatrix> {
    let n = graph.n();
    if spec.dim() != n {
        return Err(Error::input(format!(
            "G-Wishart scale is {}x{} but the graph has {n} vertices",
            spec.dim(),
            spec.dim()
        )));
    }
    if !graph.is_perfectly_ordered() {
        return Err(Error::UnsupportedStructure(
            "graph is not decomposable in its vertex order".into(),
        ));
    }
    let d = &spec.scale;
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        let parents = graph.earlier_neighbors(i);
        let p = parents.len();
        let shape = 0.5 * (spec.df + p as f64);
        let (cond_scale, coef) = if p == 0 {
            (d[(i, i)], DVector::zeros(0))
        } else {
            let d_pp = select(d, parents, parents);
            let d_pi = DVector::from_iterator(p, parents.iter().map(|&j| d[(j, i)]));
            let chol = d_pp.cholesky().ok_or_else(|| Error::Numerical {
                what: format!("scale block for vertex {i} is not positive definite"),
                jitter_retries: 0,
            })?;
            let mean = chol.solve(&d_pi);
            let cond = d[(i, i)] - d_pi.dot(&mean);
            (cond, mean)
        };
        if !(cond_scale > 0.0) {
            return Err(Error::Numerical {
                what: format!("conditional scale for vertex {i} is {cond_scale}"),
                jitter_retries: 0,
            });
        }
        let gamma = Gamma::new(shape, 2.0 / cond_scale).map_err(|e| Error::Numerical {
            what: format!("gamma({shape}, {cond_scale}): {e}"),
            jitter_retries: 0,
        })?;
        let w: f64 = gamma.sample(rng);

        let b = if p == 0 {
            coef
        } else {
            // coefficients ~ N(mean, D_PP⁻¹ / w)
            let d_pp = select(d, parents, parents);
            let chol = d_pp.cholesky().expect("factorized above");
            let mut z = linalg::standard_normals(p, rng) / w.sqrt();
            chol.l_dirty().tr_solve_lower_triangular_mut(&mut z);
            coef + z
        };

        // K += w · u uᵀ with u = e_i - b on the family {i} ∪ P.
        k[(i, i)] += w;
        for (a, &pa) in parents.iter().enumerate() {
            k[(i, pa)] -= w * b[a];
            k[(pa, i)] -= w * b[a];
            for (c, &pc) in parents.iter().enumerate().take(a + 1) {
                let v = w * b[a] * b[c];
                k[(pa, pc)] += v;
                if pc != pa {
                    k[(pc, pa)] += v;
                }
            }
        }
    }
    Ok(PrecisionMatrix(k))
}

/// Conjugate update `W_G(df + n_obs, D + S)`.
pub fn gwishart_posterior(prior: &GWishartSpec, scatter: &DMatrix<f64>, n_obs: usize) -> Result<GWishartSpec> {
    if scatter.shape() != prior.scale.shape() {
        return Err(Error::input(format!(
            "scatter is {:?} but prior scale is {:?}",
            scatter.shape(),
            prior.scale.shape()
        )));
    }
    if !is_symmetric(scatter, 1e-10) {
        return Err(Error::input("residual scatter must be symmetric"));
    }
    Ok(GWishartSpec {
        df: prior.df + n_obs as f64,
        scale: &prior.scale + scatter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::precision::GraphKind;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(20120101)
    }

    #[test]
    fn scalar_case_is_gamma_with_mean_df() {
        // 1x1: gamma(shape df/2, rate 1/2), mean df = 3
        let spec = GWishartSpec::scaled_identity(3.0, 1.0, 1).unwrap();
        let g = PrecisionGraph::build(GraphKind::Independent, &[1]).unwrap();
        let mut rng = rng();
        let n = 100_000;
        let mean = (0..n)
            .map(|_| sample_gwishart(&spec, &g, &mut rng).unwrap().values()[(0, 0)])
            .sum::<f64>()
            / n as f64;
        assert!((mean - 3.0).abs() < 0.05, "mean {mean}");
    }

    #[test]
    fn zero_pattern_is_exact() {
        let leads = [1, 2, 3, 5, 6, 9, 10, 11, 12];
        let mut rng = rng();
        for kind in [GraphKind::Independent, GraphKind::Ar1, GraphKind::Ar2] {
            let g = PrecisionGraph::build(kind, &leads).unwrap();
            let spec = GWishartSpec::scaled_identity(3.0, 1.0, leads.len()).unwrap();
            for _ in 0..200 {
                let k = sample_gwishart(&spec, &g, &mut rng).unwrap();
                for i in 0..leads.len() {
                    for j in 0..leads.len() {
                        if i != j && !g.has_edge(i, j) {
                            assert_eq!(k.values()[(i, j)], 0.0);
                        }
                    }
                }
                assert!(linalg::min_cholesky_pivot(k.values()).unwrap() > 0.0);
            }
        }
    }

    #[test]
    fn non_decomposable_order_is_unsupported() {
        let g = PrecisionGraph::from_edges(4, &[(0, 1), (1, 2), (2, 3), (0, 3)]).unwrap();
        let spec = GWishartSpec::scaled_identity(3.0, 1.0, 4).unwrap();
        assert!(matches!(
            sample_gwishart(&spec, &g, &mut rng()),
            Err(Error::UnsupportedStructure(_))
        ));
    }

    #[test]
    fn path_graph_clique_marginals_have_inverse_wishart_mean() {
        // Σ_C ~ IW(df, D_C) on each clique, so E[Σ_C] = D_C / (df - 2).
        let d = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.2, 0.5, 1.5, 0.4, 0.2, 0.4, 1.0]);
        let spec = GWishartSpec::new(12.0, d.clone()).unwrap();
        let g = PrecisionGraph::build(GraphKind::Ar1, &[1, 2, 3]).unwrap();
        let mut rng = rng();
        let n = 40_000;
        let mut acc = DMatrix::zeros(3, 3);
        for _ in 0..n {
            let k = sample_gwishart(&spec, &g, &mut rng).unwrap();
            acc += k.into_inner().try_inverse().unwrap();
        }
        acc /= n as f64;
        for (i, j) in [(0, 0), (1, 1), (2, 2), (0, 1), (1, 2)] {
            let expected = d[(i, j)] / 10.0;
            assert!(
                (acc[(i, j)] - expected).abs() < 0.03 * d[(i, i)].max(d[(j, j)]) / 10.0 + 0.002,
                "Σ[{i},{j}] = {} vs {expected}",
                acc[(i, j)]
            );
        }
    }

    #[test]
    fn posterior_is_additive() {
        let prior = GWishartSpec::scaled_identity(3.0, 1.0, 4).unwrap();
        let same = gwishart_posterior(&prior, &DMatrix::zeros(4, 4), 0).unwrap();
        assert_eq!(same, prior);
        let post = gwishart_posterior(&prior, &(DMatrix::identity(4, 4) * 10.0), 10).unwrap();
        assert_eq!(post.df(), 13.0);
        assert_eq!(post.scale(), &(DMatrix::identity(4, 4) * 11.0));
    }

    #[test]
    fn asymmetric_scatter_is_rejected() {
        let prior = GWishartSpec::scaled_identity(3.0, 1.0, 2).unwrap();
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(gwishart_posterior(&prior, &s, 1).is_err());
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(GWishartSpec::scaled_identity(2.0, 1.0, 2).is_err());
        assert!(GWishartSpec::new(3.0, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).is_err());
    }

    #[test]
    fn precision_csv_lists_nonzeros() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("k.csv");
        let k = PrecisionMatrix::new(DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0])).unwrap();
        k.write_csv(&path).unwrap();
        assert_eq!(std::fs::read_to_string(path).unwrap(), "row,col,value\n0,0,2\n1,1,1\n");
    }
}
