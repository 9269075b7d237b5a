use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::precision::{GraphKind, PrecisionGraph};

pub const PRIOR_INTERCEPT_MEAN: f64 = 0.0;
pub const PRIOR_SLOPE_MEAN: f64 = 1.0;
pub const PRIOR_VARIANCE: f64 = 100.0;
pub const PRIOR_NEIGHBOR_CORRELATION: f64 = 0.5;

/// Gaussian prior on `β = (β0ᵀ, β1ᵀ)ᵀ` in precision form.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientPrior {
    pub mean: DVector<f64>,
    pub precision: DMatrix<f64>,
}

impl CoefficientPrior {
    /// Default prior over the active lead times: intercepts centred at 0,
    /// slopes at 1, marginal variance 100. With an AR(1) coefficient graph,
    /// neighbouring lead times within each block have prior correlation 0.5;
    /// the intercept and slope blocks are independent of each other.
    pub fn new(kind: GraphKind, lead_times: &[usize]) -> Result<Self> {
        Self::with_params(
            kind,
            lead_times,
            PRIOR_INTERCEPT_MEAN,
            PRIOR_SLOPE_MEAN,
            PRIOR_VARIANCE,
            PRIOR_NEIGHBOR_CORRELATION,
        )
    }

    pub fn with_params(
        kind: GraphKind,
        lead_times: &[usize],
        intercept_mean: f64,
        slope_mean: f64,
        variance: f64,
        neighbor_correlation: f64,
    ) -> Result<Self> {
        if kind == GraphKind::Ar2 {
            return Err(Error::input("coefficient graph must be independent or AR(1)"));
        }
        if !(variance > 0.0) || !(neighbor_correlation.abs() < 1.0) {
            return Err(Error::input("invalid coefficient prior parameters"));
        }
        let n = lead_times.len();
        let graph = PrecisionGraph::build(kind, lead_times)?;
        let block = ar1_block_precision(&graph, variance, neighbor_correlation);
        let mut precision = DMatrix::zeros(2 * n, 2 * n);
        precision.view_mut((0, 0), (n, n)).copy_from(&block);
        precision.view_mut((n, n), (n, n)).copy_from(&block);
        let mean = DVector::from_fn(2 * n, |i, _| if i < n { intercept_mean } else { slope_mean });
        Ok(Self { mean, precision })
    }

    /// A prior with zero precision (improper, flat).
    pub fn flat(n: usize) -> Self {
        Self {
            mean: DVector::zeros(2 * n),
            precision: DMatrix::zeros(2 * n, 2 * n),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Precision of a stationary AR(1) with variance `var` and lag-one correlation
/// `phi` on each connected run of the graph; runs are independent.
fn ar1_block_precision(graph: &PrecisionGraph, var: f64, phi: f64) -> DMatrix<f64> {
    let n = graph.n();
    let mut q = DMatrix::zeros(n, n);
    let c = 1.0 / (var * (1.0 - phi * phi));
    for i in 0..n {
        let links = graph.neighbors(i).len();
        q[(i, i)] = match links {
            0 => 1.0 / var,
            1 => c,
            _ => c * (1.0 + phi * phi),
        };
    }
    for (i, j) in graph.edges() {
        q[(i, j)] = -c * phi;
        q[(j, i)] = -c * phi;
    }
    q
}
