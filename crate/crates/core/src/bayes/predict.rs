use std::collections::HashMap;

use nalgebra::{Cholesky, DVector, Dyn};
use rand::Rng;

use super::PosteriorDraws;
use crate::data::{ForecastCase, LeadTimePartition, HORIZON};
use crate::error::{Error, Result};
use crate::linalg::{cholesky_with_jitter, sample_with_precision};

/// Ensemble of production paths over the full horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveTrajectory {
    /// `samples[i][t - 1]` is sample `i` at lead time `t` (MW).
    pub samples: Vec<Vec<f64>>,
    pub t_zero: Vec<usize>,
    pub t_zero_values: Vec<f64>,
}

impl PredictiveTrajectory {
    pub fn m(&self) -> usize {
        self.samples.len()
    }

    /// Samples at lead time `t` (1-based).
    pub fn column(&self, t: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s[t - 1]).collect()
    }

    pub fn set_column(&mut self, t: usize, values: &[f64]) {
        for (s, &v) in self.samples.iter_mut().zip(values) {
            s[t - 1] = v;
        }
    }
}

/// Mean of the training-window production for one lead time.
pub fn t0_fallback(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Fallback value for every lead time: the mean realized production at that
/// lead time over the window. Lead times with no realized value in the window
/// (late leads of the most recent cases) use the same hour of day at the
/// other lead times instead.
pub fn t0_fallbacks(window: &[ForecastCase]) -> Vec<f64> {
    let observed = |t: usize| -> Vec<f64> { window.iter().filter_map(|c| c.y_obs[t - 1]).collect() };
    (1..=HORIZON)
        .map(|t| {
            let own = observed(t);
            if !own.is_empty() {
                return t0_fallback(&own);
            }
            let hour = (t - 1) % 24;
            let same_hour: Vec<f64> = (0..HORIZON / 24).flat_map(|d| observed(hour + 1 + 24 * d)).collect();
            t0_fallback(&same_hour)
        })
        .collect()
}

/// Posterior predictive trajectories: each sample picks a retained draw
/// uniformly, adds a correlated log-scale error and exponentiates; inactive
/// lead times take their fallback value.
pub fn predict_trajectory<R: Rng + ?Sized>(
    draws: &PosteriorDraws,
    case: &ForecastCase,
    partition: &LeadTimePartition,
    fallbacks: &[f64],
    m: usize,
    rng: &mut R,
) -> Result<PredictiveTrajectory> {
    if draws.is_empty() {
        return Err(Error::State("no posterior draws to predict from".into()));
    }
    if m == 0 {
        return Err(Error::input("at least one trajectory sample is required"));
    }
    if draws.lead_times != partition.t_plus {
        return Err(Error::State("posterior was fitted on a different active set".into()));
    }
    if fallbacks.len() != HORIZON {
        return Err(Error::input(format!("expected {HORIZON} fallback values")));
    }
    let n = partition.t_plus.len();
    let log_x: Vec<f64> = partition
        .t_plus
        .iter()
        .map(|&t| {
            let x = case.x[t - 1];
            if x > 0.0 {
                Ok(x.ln())
            } else {
                Err(Error::input(format!("covariate at active lead {t} is not positive")))
            }
        })
        .collect::<Result<_>>()?;
    let t_zero_values: Vec<f64> = partition.t_zero.iter().map(|&t| fallbacks[t - 1]).collect();

    let mut template = vec![0.0; HORIZON];
    for (&t, &v) in partition.t_zero.iter().zip(&t_zero_values) {
        template[t - 1] = v;
    }

    let mut factors: HashMap<usize, Cholesky<f64, Dyn>> = HashMap::new();
    let zero = DVector::zeros(n);
    let mut samples = Vec::with_capacity(m);
    for _ in 0..m {
        let j = rng.random_range(0..draws.len());
        if !factors.contains_key(&j) {
            let (c, _) = cholesky_with_jitter(draws.precisions[j].values().clone(), "posterior precision draw")?;
            factors.insert(j, c);
        }
        let eps = if n > 0 {
            sample_with_precision(&zero, &factors[&j], rng)
        } else {
            DVector::zeros(0)
        };
        let beta = &draws.betas[j];
        let mut path = template.clone();
        for (v, &t) in partition.t_plus.iter().enumerate() {
            path[t - 1] = (beta.beta0[v] + beta.beta1[v] * log_x[v] + eps[v]).exp();
        }
        samples.push(path);
    }
    Ok(PredictiveTrajectory {
        samples,
        t_zero: partition.t_zero.clone(),
        t_zero_values,
    })
}
