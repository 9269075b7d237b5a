use rand::Rng;

use crate::error::{Error, Result};

/// Modified band depth of every curve in `curves`, as the number of
/// (curve pair, time point) combinations whose closed band contains the
/// curve. Pairs are unordered pairs of distinct curves from the whole set,
/// including pairs with the curve itself. Dividing by `C(n, 2) · d` gives
/// the depth in `[0, 1]`; integer counts make ties exact.
pub fn modified_band_depth_counts(curves: &[Vec<f64>]) -> Result<Vec<u64>> {
    let n = curves.len();
    if n < 2 {
        return Err(Error::input("band depth needs at least two curves"));
    }
    let d = curves[0].len();
    if curves.iter().any(|c| c.len() != d) {
        return Err(Error::input("curves differ in length"));
    }
    let choose2 = |k: u64| k * k.saturating_sub(1) / 2;
    let all_pairs = choose2(n as u64);
    let mut counts = vec![0u64; n];
    let mut order: Vec<usize> = (0..n).collect();
    for t in 0..d {
        order.sort_by(|&a, &b| curves[a][t].total_cmp(&curves[b][t]));
        // walk groups of equal values
        let mut start = 0;
        while start < n {
            let v = curves[order[start]][t];
            let mut end = start;
            while end < n && curves[order[end]][t] == v {
                end += 1;
            }
            let below = start as u64;
            let above = (n - end) as u64;
            // pairs lying entirely below or entirely above miss the curve
            let inside = all_pairs - choose2(below) - choose2(above);
            for &i in &order[start..end] {
                counts[i] += inside;
            }
            start = end;
        }
    }
    Ok(counts)
}

/// Rank of the observed curve's depth among the pooled `m + 1` curves, in
/// `1..=m + 1`, with ties broken uniformly at random.
pub fn band_depth_rank<R: Rng + ?Sized>(obs: &[f64], ensemble: &[Vec<f64>], rng: &mut R) -> Result<usize> {
    if ensemble.len() < 2 {
        return Err(Error::input("band depth rank needs at least two members"));
    }
    if ensemble.iter().any(|c| c.len() != obs.len()) {
        return Err(Error::input("observation and ensemble curves differ in length"));
    }
    let mut pooled = Vec::with_capacity(ensemble.len() + 1);
    pooled.push(obs.to_vec());
    pooled.extend(ensemble.iter().cloned());
    let depth = modified_band_depth_counts(&pooled)?;
    let own = depth[0];
    let lower = depth[1..].iter().filter(|&&x| x < own).count();
    let ties = depth[1..].iter().filter(|&&x| x == own).count();
    Ok(1 + lower + rng.random_range(0..=ties))
}
