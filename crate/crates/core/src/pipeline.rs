//! Rolling-window forecasting over a date range: fit, predict, optionally
//! couple with the Gaussian copula, verify, and write the run outputs.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use chrono::{Datelike, Duration, NaiveDate};
use rayon::prelude::*;

use crate::bayes::{
    gibbs_fit, predict_trajectory, t0_fallbacks, CoefficientPrior, GibbsSettings, ModelVariant, PredictiveTrajectory,
    RegressionData,
};
use crate::config::RunConfig;
use crate::copula::{couple_samples, estimate_correlation, normal_score, CopulaStructure, ResidualArchive};
use crate::data::io::{read_forecasts, read_mask, read_production, writer};
use crate::data::{
    assemble_window, issue_time, latest_observed_lag, partition_lead_times, preprocess_forecast, ForecastCase,
    GridForecastSeries, LeadTimePartition, ProductionSeries, HORIZON,
};
use crate::error::{Error, Result};
use crate::precision::GWishartSpec;
use crate::rng::{substream, Stream};
use crate::synth::SyntheticData;
use crate::verify::{
    band_depth_rank, interval_score, make_histogram, pit, rank_position, write_report_csv,
    HistogramBins, ScoreAccumulator, ScoreReport, HISTOGRAM_BINS, INTERVAL_LEVEL,
};

/// Prior degrees of freedom and scale of the residual precision.
pub const PRECISION_PRIOR_DF: f64 = 3.0;
pub const PRECISION_PRIOR_SCALE: f64 = 1.0;
/// Active lead times with fewer positive training rows than this use the fallback.
pub const MIN_TRAINING_ROWS: usize = 3;

/// Forecast cases keyed by issue date plus the production record.
#[derive(Debug, Clone)]
pub struct Dataset {
    cases: BTreeMap<NaiveDate, ForecastCase>,
    production: ProductionSeries,
}

impl Dataset {
    /// Builds one case per issue date whose lagged production is available.
    pub fn from_covariates(covariates: BTreeMap<NaiveDate, Vec<f64>>, production: ProductionSeries) -> Result<Self> {
        let mut cases = BTreeMap::new();
        for (date, x) in covariates {
            let lag = match latest_observed_lag(&production, issue_time(date)) {
                Ok(lag) => lag,
                Err(Error::Input(_)) => continue,
                Err(e) => return Err(e),
            };
            cases.insert(date, ForecastCase::new(date, x, lag)?);
        }
        if cases.is_empty() {
            return Err(Error::Data("no issue date has a full day of lagged production".into()));
        }
        Ok(Self { cases, production })
    }

    pub fn from_series(
        series: &BTreeMap<chrono::NaiveDateTime, GridForecastSeries>,
        mask: &std::collections::HashMap<u32, bool>,
        production: ProductionSeries,
    ) -> Result<Self> {
        let mut covariates = BTreeMap::new();
        for (issue, s) in series {
            if *issue != issue_time(issue.date()) {
                return Err(Error::Data(format!("forecast issued at {issue} is not a 00 UTC run")));
            }
            covariates.insert(issue.date(), preprocess_forecast(s, mask)?);
        }
        Self::from_covariates(covariates, production)
    }

    /// Reads `forecasts.csv`, `production.csv` and `mask.csv` from `dir`.
    pub fn load(dir: &Path) -> Result<Self> {
        let series = read_forecasts(&dir.join("forecasts.csv"))?;
        let mask = read_mask(&dir.join("mask.csv"))?;
        let production = read_production(&dir.join("production.csv"))?;
        Self::from_series(&series, &mask, production)
    }

    pub fn from_synthetic(data: &SyntheticData) -> Result<Self> {
        let covariates = data
            .ghi
            .forecasts
            .iter()
            .enumerate()
            .map(|(d, x)| (data.ghi.start + Duration::days(d as i64), x.clone()))
            .collect();
        Self::from_covariates(covariates, data.production.clone())
    }

    pub fn cases(&self) -> &BTreeMap<NaiveDate, ForecastCase> {
        &self.cases
    }

    pub fn production(&self) -> &ProductionSeries {
        &self.production
    }

    /// Realized production over the 72 lead times, if every hour is recorded.
    pub fn observed(&self, date: NaiveDate) -> Option<Vec<f64>> {
        let start = issue_time(date);
        (0..HORIZON)
            .map(|i| self.production.at(start + Duration::hours(i as i64)))
            .collect()
    }

    /// Earliest date with `window_days` preceding cases and latest date with
    /// a complete observed trajectory.
    pub fn default_range(&self, window_days: usize) -> Result<(NaiveDate, NaiveDate)> {
        let first = *self.cases.keys().next().expect("dataset is non-empty");
        let from = first + Duration::days(window_days as i64);
        let to = self
            .cases
            .keys()
            .rev()
            .find(|d| self.observed(**d).is_some())
            .copied()
            .ok_or_else(|| Error::Data("no issue date has a complete observed trajectory".into()))?;
        if to < from {
            return Err(Error::Data(format!(
                "data span too short for a {window_days}-day training window"
            )));
        }
        Ok((from, to))
    }
}

/// Settings for the per-date marginal forecast.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginalSettings {
    pub model: ModelVariant,
    pub window_days: usize,
    pub gibbs: GibbsSettings,
    pub samples: usize,
    pub seed: u64,
}

impl MarginalSettings {
    pub fn from_config(cfg: &RunConfig) -> Self {
        Self {
            model: cfg.model,
            window_days: cfg.window_days,
            gibbs: GibbsSettings {
                iters: cfg.iters,
                burn_in: cfg.burn_in,
            },
            samples: cfg.samples,
            seed: cfg.seed,
        }
    }
}

/// Uncoupled forecast for one issue date with its verification inputs.
#[derive(Debug, Clone)]
pub struct MarginalForecast {
    pub date: NaiveDate,
    pub partition: LeadTimePartition,
    pub trajectory: PredictiveTrajectory,
    pub observed: Option<Vec<f64>>,
    /// Randomized PIT per lead time; defined on active leads with an observation.
    pub pit: Vec<Option<f64>>,
    pub jitter_events: usize,
    pub rhat_beta1_max: f64,
}

impl MarginalForecast {
    /// Normal scores of the PIT values, as stored in the copula archive.
    pub fn normal_scores(&self) -> Result<Vec<Option<f64>>> {
        self.pit.iter().map(|p| p.map(normal_score).transpose()).collect()
    }
}

fn day_index(date: NaiveDate) -> u64 {
    date.num_days_from_ce() as u64
}

/// Fits the model on the training window before `date` and samples
/// trajectories for `date`.
pub fn marginal_forecast(ds: &Dataset, date: NaiveDate, settings: &MarginalSettings) -> Result<MarginalForecast> {
    let case = ds.cases.get(&date).ok_or_else(|| Error::MissingHistory {
        target: date,
        missing: vec![date],
    })?;
    let window = assemble_window(&ds.cases, &ds.production, date, settings.window_days)?;
    let partition = modelled_partition(case, &window);
    let fallbacks = t0_fallbacks(&window);
    let index = day_index(date) ^ ((settings.window_days as u64) << 32);
    let mut predict_rng = substream(settings.seed, Stream::Predict, index);

    let (trajectory, jitter_events, rhat) = if partition.t_plus.is_empty() {
        let path: Vec<f64> = fallbacks.clone();
        let trajectory = PredictiveTrajectory {
            samples: vec![path; settings.samples],
            t_zero: partition.t_zero.clone(),
            t_zero_values: partition.t_zero.iter().map(|&t| fallbacks[t - 1]).collect(),
        };
        (trajectory, 0, f64::NAN)
    } else {
        let data = RegressionData::from_cases(&window, &partition.t_plus)?;
        let prior_beta = CoefficientPrior::new(settings.model.coefficient_graph, &partition.t_plus)?;
        let prior_k = GWishartSpec::scaled_identity(PRECISION_PRIOR_DF, PRECISION_PRIOR_SCALE, partition.t_plus.len())?;
        let mut fit_rng = substream(settings.seed, Stream::Fit, index);
        let draws = gibbs_fit(&data, settings.model, &prior_beta, &prior_k, settings.gibbs, &mut fit_rng)?;
        let trajectory = predict_trajectory(&draws, case, &partition, &fallbacks, settings.samples, &mut predict_rng)?;
        (trajectory, draws.jitter_events, draws.rhat_beta1_max)
    };

    let observed = ds.observed(date);
    let mut pits = vec![None; HORIZON];
    if let Some(obs) = &observed {
        let mut rng = substream(settings.seed, Stream::Verify, day_index(date));
        for &t in &partition.t_plus {
            pits[t - 1] = Some(pit(&trajectory.column(t), obs[t - 1], &mut rng)?);
        }
    }
    Ok(MarginalForecast {
        date,
        partition,
        trajectory,
        observed,
        pit: pits,
        jitter_events,
        rhat_beta1_max: rhat,
    })
}

/// The case's lead-time partition, with active lead times that have fewer
/// than [`MIN_TRAINING_ROWS`] positive rows in `window` moved to the fallback set.
pub fn modelled_partition(case: &ForecastCase, window: &[ForecastCase]) -> LeadTimePartition {
    let base = partition_lead_times(case);
    let rows = |t: usize| {
        window
            .iter()
            .filter(|c| c.x[t - 1] > 0.0 && c.y_obs[t - 1].is_some_and(|y| y > 0.0))
            .count()
    };
    let (t_plus, sparse): (Vec<usize>, Vec<usize>) = base.t_plus.iter().partition(|&&t| rows(t) >= MIN_TRAINING_ROWS);
    let mut t_zero = base.t_zero;
    t_zero.extend(sparse);
    t_zero.sort_unstable();
    LeadTimePartition { t_plus, t_zero }
}

/// Reorders the marginal samples with the copula estimated from `archive`.
pub fn couple(
    forecast: &MarginalForecast,
    archive: &ResidualArchive,
    structure: CopulaStructure,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let correlation = estimate_correlation(archive, structure);
    let mut rng = substream(seed, Stream::Copula, day_index(forecast.date));
    couple_samples(&forecast.trajectory.samples, &correlation, &mut rng)
}

/// Dates whose full trajectory has been observed by the issue time of `target`.
fn archive_cutoff(target: NaiveDate) -> NaiveDate {
    target - Duration::days((HORIZON / 24) as i64 - 1)
}

/// Verification record for one forecast date.
#[derive(Debug, Clone, PartialEq)]
pub struct DateRecord {
    pub date: NaiveDate,
    pub t_plus: Vec<usize>,
    pub observed: Option<Vec<f64>>,
    pub pit: Vec<Option<f64>>,
    /// Whether the central 80% interval covered the observation, on active leads.
    pub covered: Vec<Option<bool>>,
    /// Band-depth rank over the active leads of the final trajectories.
    pub band_rank: Option<usize>,
    pub t_zero_values: Vec<f64>,
}

/// Everything a forecast run produces, before it is written to disk.
#[derive(Debug, Clone)]
pub struct ForecastRun {
    pub config: RunConfig,
    pub records: Vec<DateRecord>,
    pub reports: Vec<ScoreReport>,
    pub pit_histogram: HistogramBins,
    pub band_histogram: HistogramBins,
    pub sweep: Vec<SweepPoint>,
    pub jitter_events: usize,
    pub rhat_beta1_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub window_days: usize,
    pub n_cases: usize,
    pub crps: f64,
}

impl ForecastRun {
    pub fn label(&self) -> String {
        run_label(&self.config)
    }

    /// Empirical coverage of the 80% intervals over active leads.
    pub fn coverage(&self) -> f64 {
        let (hit, n) = self
            .records
            .iter()
            .flat_map(|r| r.covered.iter().flatten())
            .fold((0usize, 0usize), |(h, n), c| (h + usize::from(*c), n + 1));
        hit as f64 / n as f64
    }
}

fn run_label(cfg: &RunConfig) -> String {
    match cfg.copula {
        Some(s) => format!("{}+copula-{s}", cfg.model),
        None => cfg.model.label(),
    }
}

/// Receives final trajectories in date order.
pub trait TrajectorySink {
    fn write(&mut self, date: NaiveDate, samples: &[Vec<f64>]) -> Result<()>;
}

/// Discards trajectories.
pub struct NoSink;

impl TrajectorySink for NoSink {
    fn write(&mut self, _: NaiveDate, _: &[Vec<f64>]) -> Result<()> {
        Ok(())
    }
}

/// Streams `date,sample_id,lead_h,mw` rows.
pub struct CsvSink {
    path: PathBuf,
    out: std::io::BufWriter<std::fs::File>,
}

impl CsvSink {
    pub fn create(path: &Path) -> Result<Self> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        writeln!(out, "date,sample_id,lead_h,mw").map_err(|e| Error::io(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            out,
        })
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

impl TrajectorySink for CsvSink {
    fn write(&mut self, date: NaiveDate, samples: &[Vec<f64>]) -> Result<()> {
        for (i, s) in samples.iter().enumerate() {
            for (t, v) in s.iter().enumerate() {
                writeln!(self.out, "{date},{i},{},{v}", t + 1).map_err(|e| Error::io(&self.path, e))?;
            }
        }
        Ok(())
    }
}

/// Band-depth rank of the observation over the active leads, or `None` when
/// nothing is active.
fn active_band_rank(
    samples: &[Vec<f64>],
    obs: &[f64],
    t_plus: &[usize],
    rng: &mut impl rand::Rng,
) -> Result<Option<usize>> {
    if t_plus.is_empty() || samples.len() < 2 {
        return Ok(None);
    }
    let pick = |p: &[f64]| -> Vec<f64> { t_plus.iter().map(|&t| p[t - 1]).collect() };
    let ensemble: Vec<Vec<f64>> = samples.iter().map(|s| pick(s)).collect();
    band_depth_rank(&pick(obs), &ensemble, rng).map(Some)
}

fn verify_date(
    forecast: &MarginalForecast,
    samples: &[Vec<f64>],
    seed: u64,
) -> Result<DateRecord> {
    let mut covered = vec![None; HORIZON];
    let mut band_rank = None;
    if let Some(obs) = &forecast.observed {
        for &t in &forecast.partition.t_plus {
            let column: Vec<f64> = samples.iter().map(|s| s[t - 1]).collect();
            covered[t - 1] = Some(interval_score(&column, obs[t - 1], INTERVAL_LEVEL)?.1);
        }
        let mut rng = substream(seed, Stream::Verify, day_index(forecast.date) | (1 << 40));
        band_rank = active_band_rank(samples, obs, &forecast.partition.t_plus, &mut rng)?;
    }
    Ok(DateRecord {
        date: forecast.date,
        t_plus: forecast.partition.t_plus.clone(),
        observed: forecast.observed.clone(),
        pit: forecast.pit.clone(),
        covered,
        band_rank,
        t_zero_values: forecast.trajectory.t_zero_values.clone(),
    })
}

fn dates_between(from: NaiveDate, to: NaiveDate) -> Vec<NaiveDate> {
    from.iter_days().take_while(|d| *d <= to).collect()
}

fn chunk_len() -> usize {
    (rayon::current_num_threads() * 2).max(4)
}

pub fn pit_histogram(records: &[DateRecord]) -> Result<HistogramBins> {
    let values: Vec<f64> = records.iter().flat_map(|r| r.pit.iter().flatten().copied()).collect();
    make_histogram(&values, HISTOGRAM_BINS, 0.0, 1.0)
}

pub fn band_depth_histogram(records: &[DateRecord], m: usize) -> Result<HistogramBins> {
    let values: Vec<f64> = records
        .iter()
        .filter_map(|r| r.band_rank)
        .map(|r| rank_position(r, m))
        .collect();
    make_histogram(&values, HISTOGRAM_BINS, 0.0, 1.0)
}

/// Runs the rolling forecast over the configured date range.
pub fn forecast_dataset(ds: &Dataset, cfg: &RunConfig, sink: &mut dyn TrajectorySink) -> Result<ForecastRun> {
    cfg.validate()?;
    let (default_from, default_to) = ds.default_range(cfg.window_days)?;
    let from = cfg.from.unwrap_or(default_from);
    let to = cfg.to.unwrap_or(default_to);
    if to < from {
        return Err(Error::Config {
            field: "to",
            reason: format!("{to} precedes from date {from}"),
        });
    }
    let settings = MarginalSettings::from_config(cfg);
    let targets = dates_between(from, to);

    // the copula for `from` needs scores from the preceding archive window
    let spin_up: Vec<NaiveDate> = match cfg.copula {
        Some(_) => {
            let start = archive_cutoff(from) - Duration::days(cfg.copula_window_days as i64);
            dates_between(start, from - Duration::days(1))
                .into_iter()
                .filter(|d| ds.cases.contains_key(d))
                .collect()
        }
        None => Vec::new(),
    };

    let mut history: BTreeMap<NaiveDate, Vec<Option<f64>>> = BTreeMap::new();
    let mut jitter_events = 0;
    let mut rhat_max = f64::NEG_INFINITY;
    let note_fit = |f: &MarginalForecast, j: &mut usize, r: &mut f64| {
        *j += f.jitter_events;
        if f.rhat_beta1_max.is_finite() {
            *r = r.max(f.rhat_beta1_max);
        }
    };

    for chunk in spin_up.chunks(chunk_len()) {
        let results: Vec<Result<MarginalForecast>> =
            chunk.par_iter().map(|&d| marginal_forecast(ds, d, &settings)).collect();
        for r in results {
            match r {
                Ok(f) => {
                    note_fit(&f, &mut jitter_events, &mut rhat_max);
                    if f.observed.is_some() {
                        history.insert(f.date, f.normal_scores()?);
                    }
                }
                Err(Error::MissingHistory { .. }) => {}
                Err(e) => return Err(e),
            }
        }
    }

    let mut uncoupled = ScoreAccumulator::default();
    let mut coupled = ScoreAccumulator::default();
    let mut records = Vec::with_capacity(targets.len());
    for chunk in targets.chunks(chunk_len()) {
        let forecasts: Vec<MarginalForecast> = chunk
            .par_iter()
            .map(|&d| marginal_forecast(ds, d, &settings))
            .collect::<Result<_>>()?;
        for f in &forecasts {
            note_fit(f, &mut jitter_events, &mut rhat_max);
            if f.observed.is_some() {
                history.insert(f.date, f.normal_scores()?);
            }
        }
        let finals: Vec<(Option<Vec<Vec<f64>>>, DateRecord)> = forecasts
            .par_iter()
            .map(|f| {
                let joint = match cfg.copula {
                    Some(structure) => {
                        let archive = ResidualArchive::window(&history, archive_cutoff(f.date), cfg.copula_window_days);
                        Some(couple(f, &archive, structure, cfg.seed)?)
                    }
                    None => None,
                };
                let samples = joint.as_deref().unwrap_or(&f.trajectory.samples);
                let record = verify_date(f, samples, cfg.seed)?;
                Ok((joint, record))
            })
            .collect::<Result<_>>()?;
        for (f, (joint, record)) in forecasts.iter().zip(finals) {
            let samples = joint.as_deref().unwrap_or(&f.trajectory.samples);
            if let Some(obs) = &f.observed {
                uncoupled.add(&f.trajectory.samples, obs)?;
                if let Some(j) = &joint {
                    coupled.add(j, obs)?;
                }
            }
            sink.write(f.date, samples)?;
            records.push(record);
        }
    }

    let mut reports = vec![uncoupled.finish(&cfg.model.label())];
    if cfg.copula.is_some() {
        reports.push(coupled.finish(&run_label(cfg)));
    }
    let sweep = if cfg.sweep.is_empty() {
        Vec::new()
    } else {
        window_sweep(ds, cfg, &targets)?
    };
    Ok(ForecastRun {
        config: cfg.clone(),
        pit_histogram: pit_histogram(&records)?,
        band_histogram: band_depth_histogram(&records, cfg.samples)?,
        records,
        reports,
        sweep,
        jitter_events,
        rhat_beta1_max: rhat_max,
    })
}

/// Mean CRPS over all lead times of uncoupled forecasts, for each training
/// window length in the sweep, on the dates every length can reach.
pub fn window_sweep(ds: &Dataset, cfg: &RunConfig, targets: &[NaiveDate]) -> Result<Vec<SweepPoint>> {
    let longest = *cfg.sweep.iter().max().expect("sweep is non-empty");
    let first = *ds.cases.keys().next().expect("dataset is non-empty");
    let earliest = first + Duration::days(longest as i64);
    let dates: Vec<NaiveDate> = targets
        .iter()
        .copied()
        .filter(|d| *d >= earliest && ds.observed(*d).is_some())
        .collect();
    if dates.is_empty() {
        return Err(Error::Data(format!(
            "no forecast date has {longest} days of training history for the window sweep"
        )));
    }
    cfg.sweep
        .iter()
        .map(|&w| {
            let settings = MarginalSettings {
                window_days: w,
                samples: cfg.sweep_samples,
                ..MarginalSettings::from_config(cfg)
            };
            let mut acc = ScoreAccumulator::default();
            for chunk in dates.chunks(chunk_len()) {
                let fs: Vec<MarginalForecast> = chunk
                    .par_iter()
                    .map(|&d| marginal_forecast(ds, d, &settings))
                    .collect::<Result<_>>()?;
                for f in fs {
                    acc.add(&f.trajectory.samples, f.observed.as_ref().expect("filtered on observed"))?;
                }
            }
            let report = acc.finish(&cfg.model.label());
            let crps = report.per_lead.iter().map(|s| s.crps).sum::<f64>() / HORIZON as f64;
            Ok(SweepPoint {
                window_days: w,
                n_cases: report.n_cases,
                crps,
            })
        })
        .collect()
}

pub fn write_sweep_csv(path: &Path, points: &[SweepPoint]) -> Result<()> {
    let mut w = writer(path)?;
    let map = |e| Error::csv(path, e);
    w.write_record(["window_days", "n_cases", "crps"]).map_err(map)?;
    for p in points {
        w.write_record([p.window_days.to_string(), p.n_cases.to_string(), p.crps.to_string()])
            .map_err(map)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_observed_csv(path: &Path, records: &[DateRecord]) -> Result<()> {
    let mut w = writer(path)?;
    let map = |e| Error::csv(path, e);
    w.write_record(["date", "lead_h", "mw", "active"]).map_err(map)?;
    for r in records {
        if let Some(obs) = &r.observed {
            for (i, v) in obs.iter().enumerate() {
                let active = r.t_plus.binary_search(&(i + 1)).is_ok();
                w.write_record([r.date.to_string(), (i + 1).to_string(), v.to_string(), u8::from(active).to_string()])
                    .map_err(map)?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_pit_csv(path: &Path, records: &[DateRecord]) -> Result<()> {
    let mut w = writer(path)?;
    let map = |e| Error::csv(path, e);
    w.write_record(["date", "lead_h", "pit"]).map_err(map)?;
    for r in records {
        for (i, p) in r.pit.iter().enumerate() {
            if let Some(p) = p {
                w.write_record([r.date.to_string(), (i + 1).to_string(), p.to_string()]).map_err(map)?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_band_depth_csv(path: &Path, records: &[DateRecord], m: usize) -> Result<()> {
    let mut w = writer(path)?;
    let map = |e| Error::csv(path, e);
    w.write_record(["date", "rank", "m"]).map_err(map)?;
    for r in records {
        if let Some(rank) = r.band_rank {
            w.write_record([r.date.to_string(), rank.to_string(), m.to_string()]).map_err(map)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes the PIT and band-depth histograms as CSV and SVG into `dir`.
pub fn write_histograms(dir: &Path, pit_hist: &HistogramBins, band_hist: &HistogramBins) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    pit_hist.write_csv(&dir.join("pit_histogram.csv"))?;
    pit_hist.write_svg(&dir.join("pit_histogram.svg"), "PIT histogram")?;
    band_hist.write_csv(&dir.join("band_depth_histogram.csv"))?;
    band_hist.write_svg(&dir.join("band_depth_histogram.svg"), "Band depth rank histogram")
}

fn write_run_file(path: &Path, run: &ForecastRun) -> Result<()> {
    let mut text = run.config.to_text();
    text.push_str(&format!("label = {}\n", run.label()));
    text.push_str(&format!("dates = {}\n", run.records.len()));
    text.push_str(&format!("coverage80_active = {}\n", run.coverage()));
    text.push_str(&format!("jitter_events = {}\n", run.jitter_events));
    text.push_str(&format!("rhat_beta1_max = {}\n", run.rhat_beta1_max));
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Loads the data, runs the forecast and writes every output file into
/// the configured output directory.
pub fn run_forecast(cfg: &RunConfig) -> Result<ForecastRun> {
    cfg.validate()?;
    let ds = Dataset::load(&cfg.data_dir)?;
    let out = &cfg.out_dir;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let run = if cfg.write_trajectories {
        let mut sink = CsvSink::create(&out.join("trajectories.csv"))?;
        let run = forecast_dataset(&ds, cfg, &mut sink)?;
        sink.finish()?;
        run
    } else {
        forecast_dataset(&ds, cfg, &mut NoSink)?
    };
    write_report_csv(&out.join("report.csv"), &run.reports)?;
    write_observed_csv(&out.join("observed.csv"), &run.records)?;
    write_pit_csv(&out.join("pit.csv"), &run.records)?;
    write_band_depth_csv(&out.join("band_depth.csv"), &run.records, cfg.samples)?;
    write_histograms(out, &run.pit_histogram, &run.band_histogram)?;
    if !run.sweep.is_empty() {
        write_sweep_csv(&out.join("window_sweep.csv"), &run.sweep)?;
    }
    write_run_file(&out.join("run.txt"), &run)?;
    Ok(run)
}

/// Saved trajectories and observations of a forecast run.
#[derive(Debug, Clone)]
struct SavedRun {
    label: String,
    seed: u64,
    trajectories: BTreeMap<NaiveDate, Vec<Vec<f64>>>,
    observed: BTreeMap<NaiveDate, (Vec<f64>, Vec<usize>)>,
}

#[derive(serde::Deserialize)]
struct TrajectoryRow {
    date: NaiveDate,
    sample_id: usize,
    lead_h: usize,
    mw: f64,
}

#[derive(serde::Deserialize)]
struct ObservedRow {
    date: NaiveDate,
    lead_h: usize,
    mw: f64,
    active: u8,
}

fn check_lead(lead: usize, path: &Path) -> Result<usize> {
    if (1..=HORIZON).contains(&lead) {
        Ok(lead - 1)
    } else {
        Err(Error::Data(format!("{}: lead time {lead} outside 1..={HORIZON}", path.display())))
    }
}

fn load_saved_run(dir: &Path) -> Result<SavedRun> {
    let run_path = dir.join("run.txt");
    let text = std::fs::read_to_string(&run_path).map_err(|e| Error::io(&run_path, e))?;
    let mut meta: BTreeMap<&str, &str> = BTreeMap::new();
    for line in text.lines() {
        if let Some((k, v)) = line.split_once('=') {
            meta.insert(k.trim(), v.trim());
        }
    }
    let label = meta.get("label").map(|s| s.to_string()).unwrap_or_else(|| "model".into());
    let seed = meta
        .get("seed")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Data(format!("{}: missing seed", run_path.display())))?;

    let path = dir.join("trajectories.csv");
    let mut trajectories: BTreeMap<NaiveDate, Vec<Vec<f64>>> = BTreeMap::new();
    for row in crate::data::io::reader(&path)?.deserialize() {
        let row: TrajectoryRow = row.map_err(|e| Error::csv(&path, e))?;
        let t = check_lead(row.lead_h, &path)?;
        let samples = trajectories.entry(row.date).or_default();
        if row.sample_id >= samples.len() {
            samples.resize(row.sample_id + 1, vec![f64::NAN; HORIZON]);
        }
        samples[row.sample_id][t] = row.mw;
    }
    let path = dir.join("observed.csv");
    let mut observed: BTreeMap<NaiveDate, (Vec<f64>, Vec<usize>)> = BTreeMap::new();
    for row in crate::data::io::reader(&path)?.deserialize() {
        let row: ObservedRow = row.map_err(|e| Error::csv(&path, e))?;
        let t = check_lead(row.lead_h, &path)?;
        let entry = observed.entry(row.date).or_insert_with(|| (vec![f64::NAN; HORIZON], Vec::new()));
        entry.0[t] = row.mw;
        if row.active != 0 {
            entry.1.push(t + 1);
        }
    }
    for (date, samples) in &trajectories {
        if samples.iter().flatten().any(|v| v.is_nan()) {
            return Err(Error::Data(format!("incomplete trajectories for {date}")));
        }
    }
    Ok(SavedRun {
        label,
        seed,
        trajectories,
        observed,
    })
}

/// Recomputes `report.csv` and the histograms from a forecast output directory.
pub fn run_report(in_dir: &Path, histogram_dir: &Path) -> Result<ScoreReport> {
    let saved = load_saved_run(in_dir)?;
    let mut acc = ScoreAccumulator::default();
    let mut records = Vec::new();
    let mut m = 0;
    for (date, samples) in &saved.trajectories {
        let Some((obs, t_plus)) = saved.observed.get(date) else {
            continue;
        };
        if obs.iter().any(|v| v.is_nan()) {
            return Err(Error::Data(format!("incomplete observations for {date}")));
        }
        m = samples.len();
        acc.add(samples, obs)?;
        let mut t_plus = t_plus.clone();
        t_plus.sort_unstable();
        let mut rng = substream(saved.seed, Stream::Verify, day_index(*date));
        let mut pits = vec![None; HORIZON];
        for &t in &t_plus {
            let column: Vec<f64> = samples.iter().map(|s| s[t - 1]).collect();
            pits[t - 1] = Some(pit(&column, obs[t - 1], &mut rng)?);
        }
        let mut rng = substream(saved.seed, Stream::Verify, day_index(*date) | (1 << 40));
        records.push(DateRecord {
            date: *date,
            band_rank: active_band_rank(samples, obs, &t_plus, &mut rng)?,
            t_plus,
            observed: Some(obs.clone()),
            pit: pits,
            covered: vec![None; HORIZON],
            t_zero_values: Vec::new(),
        });
    }
    if records.is_empty() {
        return Err(Error::Data(format!("{}: no observed forecast dates", in_dir.display())));
    }
    let report = acc.finish(&saved.label);
    std::fs::create_dir_all(histogram_dir).map_err(|e| Error::io(histogram_dir, e))?;
    write_report_csv(&histogram_dir.join("report.csv"), std::slice::from_ref(&report))?;
    write_histograms(histogram_dir, &pit_histogram(&records)?, &band_depth_histogram(&records, m)?)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{simulate, TruthConfig};

    fn small_config() -> RunConfig {
        RunConfig {
            window_days: 5,
            copula_window_days: 10,
            iters: 60,
            burn_in: 20,
            samples: 20,
            ..RunConfig::default()
        }
    }

    fn dataset(days: usize) -> Dataset {
        Dataset::from_synthetic(&simulate(days, &TruthConfig::default()).unwrap()).unwrap()
    }

    #[test]
    fn first_synthetic_day_has_no_lag() {
        let ds = dataset(8);
        let first = TruthConfig::default().start;
        assert!(!ds.cases().contains_key(&first));
        assert!(ds.cases().contains_key(&(first + Duration::days(1))));
        // the final two issue dates lack a complete observed trajectory
        let (_, to) = ds.default_range(1).unwrap();
        assert_eq!(to, first + Duration::days(7));
    }

    #[test]
    fn night_leads_equal_window_mean() {
        let ds = dataset(12);
        let cfg = small_config();
        let date = TruthConfig::default().start + Duration::days(9);
        let f = marginal_forecast(&ds, date, &MarginalSettings::from_config(&cfg)).unwrap();
        let window = assemble_window(ds.cases(), ds.production(), date, cfg.window_days).unwrap();
        assert!(!f.partition.t_zero.is_empty());
        for &t in &f.partition.t_zero {
            let vals: Vec<f64> = window.iter().filter_map(|c| c.y_obs[t - 1]).collect();
            let want = if vals.is_empty() {
                t0_fallbacks(&window)[t - 1]
            } else {
                vals.iter().sum::<f64>() / vals.len() as f64
            };
            assert!(f.trajectory.samples.iter().all(|s| s[t - 1] == want));
        }
    }

    #[test]
    fn sparsely_trained_leads_fall_back() {
        let date = NaiveDate::from_ymd_opt(2011, 5, 1).unwrap();
        let mut case = ForecastCase::new(date, vec![0.0; HORIZON], vec![0.0; HORIZON]).unwrap();
        for t in [10, 11, 12] {
            case.x[t - 1] = 50.0;
            case.y_lag[t - 1] = 5.0;
        }
        // lead 10 has two positive rows, lead 11 has three, lead 12 only zeros
        let window: Vec<ForecastCase> = (0..4)
            .map(|d| {
                let mut c = ForecastCase::new(date - Duration::days(4 - d), vec![40.0; HORIZON], vec![1.0; HORIZON]).unwrap();
                c.y_obs[9] = Some(if d < 2 { 3.0 } else { 0.0 });
                c.y_obs[10] = Some(if d < 3 { 3.0 } else { 0.0 });
                c.y_obs[11] = Some(0.0);
                c
            })
            .collect();
        let p = modelled_partition(&case, &window);
        assert_eq!(p.t_plus, vec![11]);
        assert_eq!(p.t_zero.len(), HORIZON - 1);
        assert!(p.t_zero.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn missing_target_history_is_reported() {
        let ds = dataset(8);
        let cfg = RunConfig {
            from: Some(TruthConfig::default().start + Duration::days(2)),
            ..small_config()
        };
        match forecast_dataset(&ds, &cfg, &mut NoSink) {
            Err(Error::MissingHistory { target, .. }) => assert_eq!(target, cfg.from.unwrap()),
            other => panic!("expected missing history, got {other:?}"),
        }
    }

    #[test]
    fn coupled_run_reports_both_variants() {
        let ds = dataset(30);
        let start = TruthConfig::default().start;
        let cfg = RunConfig {
            model: ModelVariant::FULLY_INDEPENDENT,
            copula: Some(CopulaStructure::Full),
            from: Some(start + Duration::days(24)),
            to: Some(start + Duration::days(26)),
            ..small_config()
        };
        let run = forecast_dataset(&ds, &cfg, &mut NoSink).unwrap();
        assert_eq!(run.records.len(), 3);
        assert_eq!(run.reports.len(), 2);
        assert_eq!(run.reports[1].model, "indep+copula-full");
        let (a, b) = (&run.reports[0], &run.reports[1]);
        // coupling reorders samples, so marginal scores are unchanged
        for (x, y) in a.per_lead.iter().zip(&b.per_lead) {
            for (u, v) in [(x.mae, y.mae), (x.rmse, y.rmse), (x.crps, y.crps), (x.width, y.width), (x.coverage, y.coverage)] {
                assert!((u - v).abs() <= 1e-9 * u.abs().max(1.0));
            }
        }
        let names: Vec<&str> = a.blocks.iter().map(|(n, _)| n.as_str()).collect();
        assert_eq!(names, ["day1", "day2", "day3"]);
    }
}
