use std::path::Path;

use super::scores::{crps_sample, interval_score, mean, median};
use crate::data::io::writer;
use crate::data::HORIZON;
use crate::error::{Error, Result};

/// Central interval level used in reports.
pub const INTERVAL_LEVEL: f64 = 0.8;
pub const DAY_BLOCKS: [(&str, std::ops::RangeInclusive<usize>); 3] =
    [("day1", 1..=24), ("day2", 25..=48), ("day3", 49..=72)];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathStatistic {
    Sum,
    Max,
}

impl PathStatistic {
    pub fn apply(self, path: &[f64]) -> f64 {
        match self {
            Self::Sum => path.iter().sum(),
            Self::Max => path.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Sum => "sum",
            Self::Max => "max",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AggregateScores {
    pub mae: f64,
    pub rmse: f64,
    pub crps: f64,
}

fn check_path(p: &[f64]) -> Result<()> {
    if p.len() != HORIZON || p.iter().any(|v| !v.is_finite()) {
        return Err(Error::input(format!("path must hold {HORIZON} finite values")));
    }
    Ok(())
}

/// Scores the scalar `statistic` of each sample path against the statistic
/// of the realized path, averaged over cases.
pub fn aggregate_scores(
    trajectories: &[Vec<Vec<f64>>],
    observations: &[Vec<f64>],
    statistic: PathStatistic,
) -> Result<AggregateScores> {
    if trajectories.len() != observations.len() || trajectories.is_empty() {
        return Err(Error::input("need one observed path per trajectory ensemble"));
    }
    let mut acc = ScalarAccumulator::default();
    for (ens, obs) in trajectories.iter().zip(observations) {
        check_path(obs)?;
        let values = ens
            .iter()
            .map(|p| check_path(p).map(|_| statistic.apply(p)))
            .collect::<Result<Vec<f64>>>()?;
        acc.add(&values, statistic.apply(obs))?;
    }
    Ok(acc.finish())
}

#[derive(Debug, Clone, Copy, Default)]
struct ScalarAccumulator {
    n: usize,
    abs: f64,
    sq: f64,
    crps: f64,
}

impl ScalarAccumulator {
    fn add(&mut self, ensemble: &[f64], obs: f64) -> Result<()> {
        self.n += 1;
        self.abs += (median(ensemble)? - obs).abs();
        self.sq += (mean(ensemble)? - obs).powi(2);
        self.crps += crps_sample(ensemble, obs)?;
        Ok(())
    }

    fn merge(&mut self, other: &Self) {
        self.n += other.n;
        self.abs += other.abs;
        self.sq += other.sq;
        self.crps += other.crps;
    }

    fn finish(&self) -> AggregateScores {
        let n = self.n.max(1) as f64;
        AggregateScores {
            mae: self.abs / n,
            rmse: (self.sq / n).sqrt(),
            crps: self.crps / n,
        }
    }
}

/// Marginal scores for one lead time or a block of lead times.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MarginalScores {
    pub mae: f64,
    pub rmse: f64,
    pub crps: f64,
    pub width: f64,
    pub coverage: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct LeadAccumulator {
    scalar: ScalarAccumulator,
    width: f64,
    covered: usize,
}

impl LeadAccumulator {
    fn merge(&mut self, other: &Self) {
        self.scalar.merge(&other.scalar);
        self.width += other.width;
        self.covered += other.covered;
    }

    fn finish(&self) -> MarginalScores {
        let a = self.scalar.finish();
        let n = self.scalar.n.max(1) as f64;
        MarginalScores {
            mae: a.mae,
            rmse: a.rmse,
            crps: a.crps,
            width: self.width / n,
            coverage: self.covered as f64 / n,
        }
    }
}

/// Streaming accumulation of verification scores over forecast cases.
#[derive(Debug, Clone)]
pub struct ScoreAccumulator {
    leads: Vec<LeadAccumulator>,
    sum: ScalarAccumulator,
    max: ScalarAccumulator,
}

impl Default for ScoreAccumulator {
    fn default() -> Self {
        Self {
            leads: vec![LeadAccumulator::default(); HORIZON],
            sum: ScalarAccumulator::default(),
            max: ScalarAccumulator::default(),
        }
    }
}

impl ScoreAccumulator {
    /// Adds one case: `samples[i]` is a full sample path, `obs` the realized path.
    pub fn add(&mut self, samples: &[Vec<f64>], obs: &[f64]) -> Result<()> {
        if samples.is_empty() {
            return Err(Error::input("no samples to score"));
        }
        check_path(obs)?;
        for s in samples {
            check_path(s)?;
        }
        let mut column = vec![0.0; samples.len()];
        for (t, lead) in self.leads.iter_mut().enumerate() {
            for (c, s) in column.iter_mut().zip(samples) {
                *c = s[t];
            }
            lead.scalar.add(&column, obs[t])?;
            let (w, covered) = interval_score(&column, obs[t], INTERVAL_LEVEL)?;
            lead.width += w;
            lead.covered += usize::from(covered);
        }
        for (stat, acc) in [(PathStatistic::Sum, &mut self.sum), (PathStatistic::Max, &mut self.max)] {
            let values: Vec<f64> = samples.iter().map(|p| stat.apply(p)).collect();
            acc.add(&values, stat.apply(obs))?;
        }
        Ok(())
    }

    pub fn n_cases(&self) -> usize {
        self.sum.n
    }

    pub fn finish(&self, model: &str) -> ScoreReport {
        let per_lead: Vec<MarginalScores> = self.leads.iter().map(LeadAccumulator::finish).collect();
        let blocks = DAY_BLOCKS
            .iter()
            .map(|(name, range)| {
                let mut acc = LeadAccumulator::default();
                for t in range.clone() {
                    acc.merge(&self.leads[t - 1]);
                }
                (name.to_string(), acc.finish())
            })
            .collect();
        ScoreReport {
            model: model.to_string(),
            n_cases: self.n_cases(),
            per_lead,
            blocks,
            sum: self.sum.finish(),
            max: self.max.finish(),
        }
    }
}

/// Verification summary for one model over a set of forecast cases.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    pub model: String,
    pub n_cases: usize,
    pub per_lead: Vec<MarginalScores>,
    pub blocks: Vec<(String, MarginalScores)>,
    pub sum: AggregateScores,
    pub max: AggregateScores,
}

impl ScoreReport {
    /// `(metric, block, value)` rows in report order.
    pub fn rows(&self) -> Vec<(&'static str, String, f64)> {
        let mut rows = Vec::new();
        for (name, s) in &self.blocks {
            rows.push(("mae", name.clone(), s.mae));
            rows.push(("rmse", name.clone(), s.rmse));
            rows.push(("crps", name.clone(), s.crps));
            rows.push(("width80", name.clone(), s.width));
            rows.push(("coverage80", name.clone(), s.coverage));
        }
        for (name, a) in [("sum", &self.sum), ("max", &self.max)] {
            rows.push(("mae", name.to_string(), a.mae));
            rows.push(("rmse", name.to_string(), a.rmse));
            rows.push(("crps", name.to_string(), a.crps));
        }
        rows
    }

    pub fn block(&self, name: &str) -> Option<&MarginalScores> {
        self.blocks.iter().find(|(n, _)| n == name).map(|(_, s)| s)
    }
}

/// Writes `metric,block,model,value` rows for one or more reports.
pub fn write_report_csv(path: &Path, reports: &[ScoreReport]) -> Result<()> {
    let mut w = writer(path)?;
    let map = |e| Error::csv(path, e);
    w.write_record(["metric", "block", "model", "value"]).map_err(map)?;
    for r in reports {
        for (metric, block, value) in r.rows() {
            w.write_record([metric, block.as_str(), r.model.as_str(), &value.to_string()])
                .map_err(map)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn perfect_deterministic_paths_score_zero() {
        let obs: Vec<f64> = (0..HORIZON).map(|t| (t % 24) as f64).collect();
        for stat in [PathStatistic::Sum, PathStatistic::Max] {
            let a = aggregate_scores(&[vec![obs.clone(); 3]], &[obs.clone()], stat).unwrap();
            assert_eq!(a, AggregateScores::default());
        }
    }

    #[test]
    fn sum_of_ones_and_threes() {
        let ens = vec![vec![1.0; HORIZON], vec![3.0; HORIZON]];
        let a = aggregate_scores(&[ens], &[vec![2.0; HORIZON]], PathStatistic::Sum).unwrap();
        assert_eq!(a.mae, 0.0);
    }

    #[test]
    fn incomplete_paths_are_rejected() {
        let r = aggregate_scores(&[vec![vec![1.0; 10]]], &[vec![1.0; HORIZON]], PathStatistic::Max);
        assert!(r.is_err());
    }

    #[test]
    fn coupling_changes_max_but_not_sum_mean() {
        // identical marginals, coupled comonotonically or independently
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = 200;
        let base: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..1.0)).collect();
        let comonotone: Vec<Vec<f64>> = base.iter().map(|&u| vec![u; HORIZON]).collect();
        let mut independent = comonotone.clone();
        for t in 0..HORIZON {
            let mut col: Vec<f64> = base.clone();
            for i in (1..m).rev() {
                col.swap(i, rng.random_range(0..=i));
            }
            for i in 0..m {
                independent[i][t] = col[i];
            }
        }
        let obs = vec![vec![0.5; HORIZON]];
        let sum_mean = |e: &Vec<Vec<f64>>| e.iter().map(|p| p.iter().sum::<f64>()).sum::<f64>() / m as f64;
        assert!((sum_mean(&comonotone) - sum_mean(&independent)).abs() < 1e-9);
        let a = aggregate_scores(&[comonotone], &obs, PathStatistic::Max).unwrap();
        let b = aggregate_scores(&[independent], &obs, PathStatistic::Max).unwrap();
        assert!((a.crps - b.crps).abs() > 0.1);
    }

    #[test]
    fn report_has_three_blocks_and_aggregates() {
        let mut acc = ScoreAccumulator::default();
        let samples = vec![vec![1.0; HORIZON], vec![2.0; HORIZON], vec![3.0; HORIZON]];
        acc.add(&samples, &vec![2.0; HORIZON]).unwrap();
        let report = acc.finish("full");
        let rows = report.rows();
        for block in ["day1", "day2", "day3", "sum", "max"] {
            assert!(rows.iter().any(|r| r.1 == block));
        }
        let d1 = report.block("day1").unwrap();
        assert_eq!(d1.coverage, 1.0);
        assert_eq!(d1.mae, 0.0);
        assert!(rows.iter().all(|r| r.2 >= 0.0));
    }
}
