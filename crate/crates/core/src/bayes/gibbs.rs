//! Blocked Gibbs sampler for the multivariate log-linear regression.
//!
//! Each sweep draws the coefficients given the precision with the missing
//! rows of every training day marginalized out, then completes the missing
//! residuals from their conditional normal law and draws the precision from
//! its conjugate G-Wishart full conditional.

use std::collections::HashMap;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;

use super::design::RegressionData;
use super::diagnostics::split_rhat;
use super::prior::CoefficientPrior;
use super::{CoefficientState, ModelVariant, PosteriorDraws};
use crate::error::{Error, Result};
use crate::linalg::{cholesky_with_jitter, sample_with_precision, select};
use crate::precision::{gwishart_posterior, sample_gwishart, GWishartSpec, PrecisionGraph};

pub const DEFAULT_ITERS: usize = 2000;
pub const DEFAULT_BURN_IN: usize = 500;

/// Chain length settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GibbsSettings {
    pub iters: usize,
    pub burn_in: usize,
}

impl Default for GibbsSettings {
    fn default() -> Self {
        Self {
            iters: DEFAULT_ITERS,
            burn_in: DEFAULT_BURN_IN,
        }
    }
}

/// Per-sweep cache of the marginal precision and the missing-block factor for
/// each distinct missingness pattern.
struct PatternCache {
    n: usize,
    entries: HashMap<Vec<usize>, PatternEntry>,
}

struct PatternEntry {
    missing: Vec<usize>,
    /// Precision of the observed block after marginalizing the missing rows.
    marginal: DMatrix<f64>,
    /// Factor of `K_MM` and `K_MO`, for completing missing residuals.
    missing_factor: Option<(Cholesky<f64, Dyn>, DMatrix<f64>)>,
}

impl PatternCache {
    fn new(n: usize) -> Self {
        Self {
            n,
            entries: HashMap::new(),
        }
    }

    fn get(&mut self, k: &DMatrix<f64>, observed: &[usize], jitter: &mut usize) -> Result<&PatternEntry> {
        if !self.entries.contains_key(observed) {
            let entry = self.build(k, observed, jitter)?;
            self.entries.insert(observed.to_vec(), entry);
        }
        Ok(&self.entries[observed])
    }

    fn build(&self, k: &DMatrix<f64>, observed: &[usize], jitter: &mut usize) -> Result<PatternEntry> {
        let missing: Vec<usize> = {
            let mut it = observed.iter().peekable();
            (0..self.n)
                .filter(|v| {
                    if it.peek() == Some(&v) {
                        it.next();
                        false
                    } else {
                        true
                    }
                })
                .collect()
        };
        let k_oo = select(k, observed, observed);
        if missing.is_empty() {
            return Ok(PatternEntry {
                missing,
                marginal: k_oo,
                missing_factor: None,
            });
        }
        let k_mm = select(k, &missing, &missing);
        let k_mo = select(k, &missing, observed);
        let (chol, jittered) = cholesky_with_jitter(k_mm, "missing-row precision block")?;
        *jitter += usize::from(jittered);
        let solved = chol.solve(&k_mo);
        let mut marginal = k_oo - k_mo.transpose() * solved;
        marginal = (&marginal + marginal.transpose()) * 0.5;
        Ok(PatternEntry {
            missing,
            marginal,
            missing_factor: Some((chol, k_mo)),
        })
    }
}

/// Factor and mean of the coefficient full conditional given `k`, with each
/// day's missing rows marginalized out.
fn beta_conditional(
    data: &RegressionData,
    prior: &CoefficientPrior,
    prior_shift: &DVector<f64>,
    k: &DMatrix<f64>,
    cache: &mut PatternCache,
    jitter: &mut usize,
) -> Result<(Cholesky<f64, Dyn>, DVector<f64>)> {
    let n = data.n();
    let mut prec = prior.precision.clone();
    let mut shift = prior_shift.clone();
    for day in data.days() {
        let q = &cache.get(k, &day.vertices, jitter)?.marginal;
        for (r, &vr) in day.vertices.iter().enumerate() {
            let lr = day.log_x[r];
            let mut qy = 0.0;
            for (s, &vs) in day.vertices.iter().enumerate() {
                let qrs = q[(r, s)];
                let ls = day.log_x[s];
                prec[(vr, vs)] += qrs;
                prec[(vr, n + vs)] += qrs * ls;
                prec[(n + vr, vs)] += lr * qrs;
                prec[(n + vr, n + vs)] += lr * qrs * ls;
                qy += qrs * day.log_y[s];
            }
            shift[vr] += qy;
            shift[n + vr] += lr * qy;
        }
    }
    let (chol, jittered) = cholesky_with_jitter(prec, "coefficient full-conditional precision")?;
    *jitter += usize::from(jittered);
    let mean = chol.solve(&shift);
    Ok((chol, mean))
}

/// Runs the sampler and keeps the `iters - burn_in` post-burn-in draws.
pub fn gibbs_fit<R: Rng + ?Sized>(
    data: &RegressionData,
    variant: ModelVariant,
    prior_beta: &CoefficientPrior,
    prior_k: &GWishartSpec,
    settings: GibbsSettings,
    rng: &mut R,
) -> Result<PosteriorDraws> {
    let n = data.n();
    if settings.iters <= settings.burn_in {
        return Err(Error::input(format!(
            "Gibbs iterations ({}) must exceed burn-in ({})",
            settings.iters, settings.burn_in
        )));
    }
    if data.days().is_empty() {
        return Err(Error::input("no complete training rows in the window"));
    }
    if prior_beta.dim() != 2 * n || prior_k.dim() != n {
        return Err(Error::input("prior dimensions do not match the active lead times"));
    }
    let residual_graph = PrecisionGraph::build(variant.residual_graph, data.lead_times())?;
    let prior_shift = &prior_beta.precision * &prior_beta.mean;

    let kept = settings.iters - settings.burn_in;
    let mut betas = Vec::with_capacity(kept);
    let mut precisions = Vec::with_capacity(kept);
    let mut jitter = 0usize;

    let mut k = DMatrix::identity(n, n);
    for iter in 0..settings.iters {
        let mut cache = PatternCache::new(n);

        let (chol, mean) = beta_conditional(data, prior_beta, &prior_shift, &k, &mut cache, &mut jitter)?;
        let beta = sample_with_precision(&mean, &chol, rng);

        // missing residuals | β, K, then K | completed residuals
        let mut scatter = DMatrix::zeros(n, n);
        let mut resid = DVector::zeros(n);
        for day in data.days() {
            let entry = cache.get(&k, &day.vertices, &mut jitter)?;
            let e_o = DVector::from_iterator(
                day.vertices.len(),
                day.vertices
                    .iter()
                    .enumerate()
                    .map(|(r, &v)| day.log_y[r] - beta[v] - beta[n + v] * day.log_x[r]),
            );
            for (r, &v) in day.vertices.iter().enumerate() {
                resid[v] = e_o[r];
            }
            if let Some((chol_mm, k_mo)) = &entry.missing_factor {
                let cond_mean = -chol_mm.solve(&(k_mo * &e_o));
                let e_m = sample_with_precision(&cond_mean, chol_mm, rng);
                for (r, &v) in entry.missing.iter().enumerate() {
                    resid[v] = e_m[r];
                }
            }
            scatter.ger(1.0, &resid, &resid, 1.0);
        }
        let posterior = gwishart_posterior(prior_k, &scatter, data.days().len())?;
        let draw = sample_gwishart(&posterior, &residual_graph, rng)?;

        if iter >= settings.burn_in {
            betas.push(CoefficientState {
                beta0: beta.rows(0, n).iter().copied().collect(),
                beta1: beta.rows(n, n).iter().copied().collect(),
            });
            precisions.push(draw.clone());
        }
        k = draw.into_inner();
    }

    let rhat = (0..n)
        .map(|v| split_rhat(&betas.iter().map(|b| b.beta1[v]).collect::<Vec<_>>()))
        .filter(|r| r.is_finite())
        .fold(f64::NAN, f64::max);

    Ok(PosteriorDraws {
        lead_times: data.lead_times().to_vec(),
        betas,
        precisions,
        burn_in: settings.burn_in,
        jitter_events: jitter,
        rhat_beta1_max: rhat,
    })
}

/// Convenience: the posterior mean of the stacked coefficient vector.
pub fn posterior_mean_beta(draws: &PosteriorDraws) -> DVector<f64> {
    let n = draws.lead_times.len();
    let mut acc = DVector::zeros(2 * n);
    for b in &draws.betas {
        for v in 0..n {
            acc[v] += b.beta0[v];
            acc[n + v] += b.beta1[v];
        }
    }
    acc / draws.betas.len() as f64
}

/// Element-wise posterior mean of the precision draws.
pub fn posterior_mean_precision(draws: &PosteriorDraws) -> DMatrix<f64> {
    let n = draws.lead_times.len();
    let mut acc = DMatrix::zeros(n, n);
    for k in &draws.precisions {
        acc += k.values();
    }
    acc / draws.precisions.len() as f64
}
