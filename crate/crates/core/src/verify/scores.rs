use rand::Rng;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Sample CRPS in energy form, `E|X − y| − ½ E|X − X′|`, with the pairwise
/// term averaged over the `m(m − 1)` ordered pairs of distinct members.
pub fn crps_sample(ensemble: &[f64], obs: f64) -> Result<f64> {
    let m = ensemble.len();
    if m == 0 {
        return Err(Error::input("CRPS needs a non-empty ensemble"));
    }
    let abs_err = ensemble.iter().map(|x| (x - obs).abs()).sum::<f64>() / m as f64;
    if m == 1 {
        return Ok(abs_err);
    }
    let mut sorted = ensemble.to_vec();
    sorted.sort_by(f64::total_cmp);
    // sum over i < j of |x_i - x_j| from the order statistics
    let pair_sum: f64 = sorted
        .iter()
        .enumerate()
        .map(|(k, x)| x * (2.0 * k as f64 + 1.0 - m as f64))
        .sum();
    Ok(abs_err - pair_sum / (m as f64 * (m as f64 - 1.0)))
}

/// Closed-form CRPS of `N(mu, sigma²)` at `obs`.
pub fn crps_gaussian(mu: f64, sigma: f64, obs: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::input(format!("sigma must be positive, got {sigma}")));
    }
    let n = Normal::standard();
    let z = (obs - mu) / sigma;
    Ok(sigma * (z * (2.0 * n.cdf(z) - 1.0) + 2.0 * n.pdf(z) - 1.0 / std::f64::consts::PI.sqrt()))
}

/// Empirical quantile with linear interpolation between order statistics
/// (the "type 7" definition). `sorted` must be ascending and non-empty.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::input("median of an empty ensemble"));
    }
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(quantile_sorted(&s, 0.5))
}

pub fn mean(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::input("mean of an empty ensemble"));
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointScores {
    /// Mean absolute error of the predictive medians.
    pub mae: f64,
    /// Root mean squared error of the predictive means.
    pub rmse: f64,
}

pub fn point_scores(ensembles: &[Vec<f64>], observations: &[f64]) -> Result<PointScores> {
    if ensembles.len() != observations.len() {
        return Err(Error::input(format!(
            "{} ensembles but {} observations",
            ensembles.len(),
            observations.len()
        )));
    }
    if ensembles.is_empty() {
        return Err(Error::input("no cases to score"));
    }
    let (mut abs, mut sq) = (0.0, 0.0);
    for (e, &y) in ensembles.iter().zip(observations) {
        abs += (median(e)? - y).abs();
        sq += (mean(e)? - y).powi(2);
    }
    let n = observations.len() as f64;
    Ok(PointScores {
        mae: abs / n,
        rmse: (sq / n).sqrt(),
    })
}

/// Randomized PIT: uniform between the left and right limits of the
/// empirical CDF at `obs`.
pub fn pit<R: Rng + ?Sized>(ensemble: &[f64], obs: f64, rng: &mut R) -> Result<f64> {
    let m = ensemble.len();
    if m == 0 {
        return Err(Error::input("PIT needs a non-empty ensemble"));
    }
    let below = ensemble.iter().filter(|&&x| x < obs).count();
    let at = ensemble.iter().filter(|&&x| x == obs).count();
    let lo = below as f64 / m as f64;
    let hi = (below + at) as f64 / m as f64;
    let u: f64 = rng.random();
    Ok(lo + u * (hi - lo))
}

/// Width of the central `level` interval between empirical quantiles, and
/// whether `obs` lies inside it (closed bounds).
pub fn interval_score(ensemble: &[f64], obs: f64, level: f64) -> Result<(f64, bool)> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::input(format!("interval level {level} outside (0, 1)")));
    }
    if ensemble.is_empty() {
        return Err(Error::input("interval of an empty ensemble"));
    }
    let mut s = ensemble.to_vec();
    s.sort_by(f64::total_cmp);
    let lo = quantile_sorted(&s, (1.0 - level) / 2.0);
    let hi = quantile_sorted(&s, (1.0 + level) / 2.0);
    Ok((hi - lo, lo <= obs && obs <= hi))
}
