/// Split-chain potential scale reduction factor of a single chain.
///
/// The chain is cut into two halves treated as separate chains. Returns NaN
/// for chains shorter than four draws or with zero within-half variance.
pub fn split_rhat(chain: &[f64]) -> f64 {
    let half = chain.len() / 2;
    if half < 2 {
        return f64::NAN;
    }
    let parts = [&chain[..half], &chain[chain.len() - half..]];
    let len = half as f64;
    let mut means = [0.0; 2];
    let mut vars = [0.0; 2];
    for (i, part) in parts.iter().enumerate() {
        let m = part.iter().sum::<f64>() / len;
        means[i] = m;
        vars[i] = part.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (len - 1.0);
    }
    let within = 0.5 * (vars[0] + vars[1]);
    if within <= 0.0 {
        return f64::NAN;
    }
    let grand = 0.5 * (means[0] + means[1]);
    let between = len * ((means[0] - grand).powi(2) + (means[1] - grand).powi(2));
    let pooled = (len - 1.0) / len * within + between / len;
    (pooled / within).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn stationary_chain_is_near_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let chain: Vec<f64> = (0..4000).map(|_| StandardNormal.sample(&mut rng)).collect();
        assert!((split_rhat(&chain) - 1.0).abs() < 0.01);
    }

    #[test]
    fn trending_chain_is_flagged() {
        let chain: Vec<f64> = (0..1000).map(|i| i as f64 / 100.0 + (i % 7) as f64 * 0.01).collect();
        assert!(split_rhat(&chain) > 1.1);
    }

    #[test]
    fn short_chain_is_nan() {
        assert!(split_rhat(&[1.0, 2.0, 3.0]).is_nan());
    }
}
