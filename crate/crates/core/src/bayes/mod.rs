//! Bayesian log-linear regression of production on GHI with graph-structured
//! coefficient and residual precisions.

mod design;
pub mod diagnostics;
mod gibbs;
mod predict;
mod prior;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::precision::{GraphKind, PrecisionMatrix};

pub use design::{build_design, DayRows, RegressionData};
pub use gibbs::{gibbs_fit, posterior_mean_beta, posterior_mean_precision, GibbsSettings, DEFAULT_BURN_IN, DEFAULT_ITERS};
pub use predict::{predict_trajectory, t0_fallback, t0_fallbacks, PredictiveTrajectory};
pub use prior::{CoefficientPrior, PRIOR_NEIGHBOR_CORRELATION, PRIOR_VARIANCE};

/// Graph structures for the coefficient prior and the residual precision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModelVariant {
    pub coefficient_graph: GraphKind,
    pub residual_graph: GraphKind,
}

impl ModelVariant {
    pub const FULL: Self = Self {
        coefficient_graph: GraphKind::Ar1,
        residual_graph: GraphKind::Ar1,
    };
    pub const FULLY_INDEPENDENT: Self = Self {
        coefficient_graph: GraphKind::Independent,
        residual_graph: GraphKind::Independent,
    };
    pub const INDEPENDENT_RESIDUALS: Self = Self {
        coefficient_graph: GraphKind::Ar1,
        residual_graph: GraphKind::Independent,
    };

    pub fn new(coefficient_graph: GraphKind, residual_graph: GraphKind) -> Result<Self> {
        if coefficient_graph == GraphKind::Ar2 {
            return Err(Error::input("coefficient graph must be independent or AR(1)"));
        }
        Ok(Self {
            coefficient_graph,
            residual_graph,
        })
    }

    pub fn label(&self) -> String {
        match *self {
            Self::FULL => "full".into(),
            Self::FULLY_INDEPENDENT => "indep".into(),
            Self::INDEPENDENT_RESIDUALS => "indep-resid".into(),
            v => format!("coef-{:?}-resid-{:?}", v.coefficient_graph, v.residual_graph).to_lowercase(),
        }
    }
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for ModelVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "full" => Ok(Self::FULL),
            "indep" | "fully-independent" => Ok(Self::FULLY_INDEPENDENT),
            "indep-resid" | "independent-residuals" => Ok(Self::INDEPENDENT_RESIDUALS),
            other => Err(Error::Config {
                field: "model",
                reason: format!("unknown model `{other}` (expected full, indep or indep-resid)"),
            }),
        }
    }
}

/// Intercepts and slopes per active lead time.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientState {
    pub beta0: Vec<f64>,
    pub beta1: Vec<f64>,
}

/// Retained Gibbs draws.
#[derive(Debug, Clone)]
pub struct PosteriorDraws {
    pub lead_times: Vec<usize>,
    pub betas: Vec<CoefficientState>,
    pub precisions: Vec<PrecisionMatrix>,
    pub burn_in: usize,
    /// Number of factorizations that needed the diagonal jitter.
    pub jitter_events: usize,
    /// Largest split-chain R-hat over the slope coordinates (reported only).
    pub rhat_beta1_max: f64,
}

impl PosteriorDraws {
    pub fn len(&self) -> usize {
        self.betas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.betas.is_empty()
    }

    /// Writes `draw_id,parameter,value` rows for the coefficients and the
    /// nonzero upper-triangular precision entries.
    pub fn write_csv(&self, path: &std::path::Path) -> Result<()> {
        let mut w = crate::data::io::writer(path)?;
        let map = |e| Error::csv(path, e);
        w.write_record(["draw_id", "parameter", "value"]).map_err(map)?;
        for (d, (b, k)) in self.betas.iter().zip(&self.precisions).enumerate() {
            let id = d.to_string();
            for (v, &t) in self.lead_times.iter().enumerate() {
                w.write_record([id.as_str(), &format!("beta0[{t}]"), &b.beta0[v].to_string()]).map_err(map)?;
                w.write_record([id.as_str(), &format!("beta1[{t}]"), &b.beta1[v].to_string()]).map_err(map)?;
            }
            let kv = k.values();
            for i in 0..kv.nrows() {
                for j in i..kv.ncols() {
                    if kv[(i, j)] != 0.0 {
                        let name = format!("K[{},{}]", self.lead_times[i], self.lead_times[j]);
                        w.write_record([id.as_str(), &name, &kv[(i, j)].to_string()]).map_err(map)?;
                    }
                }
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}
