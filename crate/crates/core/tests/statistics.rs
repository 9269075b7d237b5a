use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use solarcast::bayes::{gibbs_fit, posterior_mean_beta, CoefficientPrior, DayRows, GibbsSettings, ModelVariant, RegressionData};
use solarcast::linalg::{cholesky_with_jitter, sample_with_precision};
use solarcast::precision::GWishartSpec;
use solarcast::synth::TruthConfig;
use solarcast::verify::{band_depth_rank, crps_sample, make_histogram, pit, rank_bin_probabilities, rank_position};

fn normals(n: usize, mu: f64, sd: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| mu + sd * rng.sample::<f64, _>(StandardNormal)).collect()
}

#[test]
fn crps_prefers_the_true_distribution() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let distortions = [(0.5, 1.0), (-0.5, 1.0), (0.0, 0.6), (0.0, 1.6), (0.3, 1.3)];
    let mut truth_score = 0.0;
    let mut other = [0.0; 5];
    for _ in 0..10_000 {
        let y: f64 = rng.sample(StandardNormal);
        truth_score += crps_sample(&normals(50, 0.0, 1.0, &mut rng), y).unwrap();
        for (k, &(mu, sd)) in distortions.iter().enumerate() {
            other[k] += crps_sample(&normals(50, mu, sd, &mut rng), y).unwrap();
        }
    }
    for (k, s) in other.iter().enumerate() {
        assert!(truth_score < *s, "distortion {k}: {truth_score} vs {s}");
    }
}

#[test]
fn pit_and_band_rank_are_uniform_for_exchangeable_draws() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let m = 20;
    let (mut pits, mut ranks) = (Vec::new(), Vec::new());
    for _ in 0..4000 {
        let curve = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            let mut x = 0.0;
            (0..12)
                .map(|_| {
                    x = 0.7 * x + rng.sample::<f64, _>(StandardNormal);
                    x
                })
                .collect()
        };
        let obs = curve(&mut rng);
        let ens: Vec<Vec<f64>> = (0..m).map(|_| curve(&mut rng)).collect();
        let column: Vec<f64> = ens.iter().map(|c| c[5]).collect();
        pits.push(pit(&column, obs[5], &mut rng).unwrap());
        ranks.push(rank_position(band_depth_rank(&obs, &ens, &mut rng).unwrap(), m));
    }
    // 99.9% point of chi-square with 9 degrees of freedom
    let limit = 27.88;
    let pit_hist = make_histogram(&pits, 10, 0.0, 1.0).unwrap();
    // without ties the PIT takes the m + 1 values k / m
    let mut pit_probs = vec![0.0; 10];
    for k in 0..=m {
        pit_probs[(k * 10 / m).min(9)] += 1.0 / (m + 1) as f64;
    }
    assert!(pit_hist.chi_square(&pit_probs) < limit, "{:?}", pit_hist.counts);
    let rank_hist = make_histogram(&ranks, 10, 0.0, 1.0).unwrap();
    let probs = rank_bin_probabilities(m, 10);
    assert!(rank_hist.chi_square(&probs) < limit, "{:?}", rank_hist.counts);
}

fn regression_data(leads: &[usize], days: usize, rng: &mut ChaCha8Rng) -> (RegressionData, Vec<f64>) {
    let truth = TruthConfig::default();
    let n = leads.len();
    let k = truth.residual_precision(leads).unwrap();
    let (chol, _) = cholesky_with_jitter(k.values().clone(), "truth").unwrap();
    let rows = (0..days)
        .map(|_| {
            let eps = sample_with_precision(&DVector::zeros(n), &chol, rng);
            let log_x = normals(n, 5.5, 0.5, rng);
            let log_y = (0..n)
                .map(|v| truth.beta0(leads[v]) + truth.beta1(leads[v]) * log_x[v] + eps[v])
                .collect();
            DayRows { vertices: (0..n).collect(), log_x, log_y }
        })
        .collect();
    let beta = leads
        .iter()
        .map(|&t| truth.beta0(t))
        .chain(leads.iter().map(|&t| truth.beta1(t)))
        .collect();
    (RegressionData::new(leads.to_vec(), rows).unwrap(), beta)
}

fn fitted_mean(data: &RegressionData, variant: ModelVariant, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let n = data.n();
    let prior = CoefficientPrior::new(variant.coefficient_graph, data.lead_times()).unwrap();
    let pk = GWishartSpec::scaled_identity(3.0, 1.0, n).unwrap();
    let settings = GibbsSettings { iters: 800, burn_in: 200 };
    let draws = gibbs_fit(data, variant, &prior, &pk, settings, rng).unwrap();
    posterior_mean_beta(&draws)
}

fn posterior_error(data: &RegressionData, beta: &[f64], variant: ModelVariant, rng: &mut ChaCha8Rng) -> f64 {
    let mean = fitted_mean(data, variant, rng);
    mean.iter().zip(beta).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
}

#[test]
fn posterior_contracts_with_more_days() {
    let leads: Vec<usize> = (8..=15).collect();
    let mut worse = 0;
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(200 + seed);
        let (small, beta) = regression_data(&leads, 10, &mut rng);
        let (large, _) = regression_data(&leads, 160, &mut rng);
        let e_small = posterior_error(&small, &beta, ModelVariant::FULL, &mut rng);
        let e_large = posterior_error(&large, &beta, ModelVariant::FULL, &mut rng);
        if e_large >= e_small {
            worse += 1;
        }
    }
    assert!(worse <= 1, "{worse} of 10 seeds did not contract");
}

#[test]
fn every_variant_recovers_the_coefficients() {
    let leads: Vec<usize> = (9..=14).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(300);
    let (data, beta) = regression_data(&leads, 200, &mut rng);
    for variant in [ModelVariant::FULL, ModelVariant::FULLY_INDEPENDENT, ModelVariant::INDEPENDENT_RESIDUALS] {
        let n = leads.len();
        let mean = fitted_mean(&data, variant, &mut rng);
        for v in 0..n {
            // intercept and slope are confounded; the level at the mean covariate is not
            let level = mean[v] + 5.5 * mean[n + v];
            let want = beta[v] + 5.5 * beta[n + v];
            assert!((level - want).abs() < 0.15, "{} lead {}: {level} vs {want}", variant.label(), leads[v]);
            assert!((mean[n + v] - beta[n + v]).abs() < 0.3, "{} slope", variant.label());
        }
    }
}

