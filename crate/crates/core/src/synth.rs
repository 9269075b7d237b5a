//! Synthetic GHI forecasts and production drawn from a known instance of the
//! log-linear model, written in the same CSV formats as real inputs.
//!
//! GHI is generated per valid hour (clear-sky arc times lognormal cloud
//! noise), aggregated to 3-hour blocks and spread over ensemble members and
//! grid cells whose in-region averages reproduce the blocks. Production is
//! drawn from the model on the hourly covariate the preprocessing recovers,
//! so the regression holds exactly for every issue date and lead time.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::path::Path;

use chrono::{Duration, NaiveDate};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::data::io::{write_forecasts, write_mask, write_production, writer};
use crate::data::{issue_time, preprocess_forecast, GridForecastSeries, ProductionSeries, HORIZON};
use crate::error::{Error, Result};
use crate::precision::PrecisionMatrix;
use crate::rng::{substream, Stream};

const BLOCK_HOURS: usize = 3;
const SOLAR_NOON_UTC: f64 = 11.5;

/// Ground truth and generator settings.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthConfig {
    pub start: NaiveDate,
    /// Intercept and slope by UTC hour of day; lead `t` uses hour `(t - 1) % 24`.
    pub beta0_hour: Vec<f64>,
    pub beta1_hour: Vec<f64>,
    /// Marginal standard deviation and lag-one correlation of the log residuals.
    pub sigma: f64,
    pub rho: f64,
    /// Mean day length and seasonal half-range (hours).
    pub day_length_mean: f64,
    pub day_length_amplitude: f64,
    pub peak_ghi: f64,
    pub cloud_noise: f64,
    /// Slow sinusoidal drift of all intercepts.
    pub drift_amplitude: f64,
    pub drift_period_days: f64,
    pub members: usize,
    pub cells: usize,
    pub seed: u64,
}

impl Default for TruthConfig {
    fn default() -> Self {
        Self {
            start: NaiveDate::from_ymd_opt(2011, 1, 1).expect("valid date"),
            beta0_hour: (0..24).map(|h| 3.4 + 0.15 * (2.0 * PI * h as f64 / 24.0).sin()).collect(),
            beta1_hour: (0..24).map(|h| 0.95 + 0.05 * (2.0 * PI * h as f64 / 24.0).cos()).collect(),
            // matches the pseudo-variance of the W_G(3, I) residual prior
            sigma: (1.0f64 / 3.0).sqrt(),
            rho: 0.7,
            day_length_mean: 11.2,
            day_length_amplitude: 4.0,
            peak_ghi: 750.0,
            cloud_noise: 0.5,
            drift_amplitude: 0.0,
            drift_period_days: 120.0,
            members: 5,
            cells: 12,
            seed: 1,
        }
    }
}

impl TruthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &'static str, reason: &str| Err(Error::Config { field, reason: reason.into() });
        if self.beta0_hour.len() != 24 || self.beta1_hour.len() != 24 {
            return bad("beta", "need 24 hourly intercepts and slopes");
        }
        if !(self.sigma >= 0.0) || !(self.rho.abs() < 1.0) {
            return bad("sigma", "need sigma >= 0 and |rho| < 1");
        }
        let longest = self.day_length_mean + self.day_length_amplitude.abs();
        // daylight stays clear of the first and last 3-hour block of each day
        if self.day_length_mean <= 0.0 || SOLAR_NOON_UTC + longest / 2.0 > 21.0 || SOLAR_NOON_UTC - longest / 2.0 < 3.0 {
            return bad("day_length", "daylight window must lie within 03-21 UTC");
        }
        if self.members == 0 || self.cells < 2 {
            return bad("grid", "need at least one member and two cells");
        }
        if !(self.drift_period_days > 0.0) {
            return bad("drift_period_days", "must be positive");
        }
        Ok(())
    }

    pub fn beta0(&self, lead: usize) -> f64 {
        self.beta0_hour[(lead - 1) % 24]
    }

    pub fn beta1(&self, lead: usize) -> f64 {
        self.beta1_hour[(lead - 1) % 24]
    }

    fn intercept_offset(&self, valid_day: usize) -> f64 {
        self.drift_amplitude * (2.0 * PI * valid_day as f64 / self.drift_period_days).sin()
    }

    fn day_length(&self, date: NaiveDate) -> f64 {
        use chrono::Datelike;
        let doy = date.ordinal0() as f64;
        self.day_length_mean + self.day_length_amplitude * (2.0 * PI * (doy - 172.0) / 365.25).cos()
    }

    /// Residual precision over `lead_times`: a stationary AR(1) within each
    /// run of consecutive lead times, independent across gaps.
    pub fn residual_precision(&self, lead_times: &[usize]) -> Result<PrecisionMatrix> {
        let n = lead_times.len();
        let var = self.sigma * self.sigma;
        let c = 1.0 / (var * (1.0 - self.rho * self.rho));
        let linked = |i: usize, j: usize| lead_times[j] - lead_times[i] == 1;
        let mut k = DMatrix::zeros(n, n);
        for i in 0..n {
            let left = i > 0 && linked(i - 1, i);
            let right = i + 1 < n && linked(i, i + 1);
            k[(i, i)] = match (left, right) {
                (false, false) => 1.0 / var,
                (true, true) => c * (1.0 + self.rho * self.rho),
                _ => c,
            };
            if right {
                k[(i, i + 1)] = -c * self.rho;
                k[(i + 1, i)] = -c * self.rho;
            }
        }
        PrecisionMatrix::new(k)
    }

    pub fn mask(&self) -> BTreeMap<u32, bool> {
        let inside = (self.cells * 3).div_ceil(4);
        (0..self.cells as u32).map(|c| (c, (c as usize) < inside)).collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = writer(path)?;
        let map = |e| Error::csv(path, e);
        w.write_record(["parameter", "lead_h", "value"]).map_err(map)?;
        for t in 1..=HORIZON {
            w.write_record(["beta0", &t.to_string(), &self.beta0(t).to_string()]).map_err(map)?;
            w.write_record(["beta1", &t.to_string(), &self.beta1(t).to_string()]).map_err(map)?;
        }
        for (name, v) in [
            ("sigma", self.sigma),
            ("rho", self.rho),
            ("drift_amplitude", self.drift_amplitude),
            ("drift_period_days", self.drift_period_days),
        ] {
            w.write_record([name, "", &v.to_string()]).map_err(map)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Simulated covariates for a run of issue dates.
#[derive(Debug, Clone)]
pub struct SimulatedGhi {
    pub start: NaiveDate,
    /// Raw ensemble/grid series, one per issue date.
    pub series: Vec<GridForecastSeries>,
    /// Preprocessed hourly GHI per issue date (72 lead times).
    pub forecasts: Vec<Vec<f64>>,
    /// Preprocessed hourly GHI along the valid-time axis from `start`.
    pub valid_hourly: Vec<f64>,
}

/// Clear-sky arc times cloud noise, exactly zero outside daylight.
fn hourly_ghi<R: Rng + ?Sized>(date: NaiveDate, config: &TruthConfig, rng: &mut R) -> Vec<f64> {
    use chrono::Datelike;
    let length = config.day_length(date);
    let sunrise = SOLAR_NOON_UTC - length / 2.0;
    let season = 0.6 + 0.4 * (2.0 * PI * (date.ordinal0() as f64 - 172.0) / 365.25).cos();
    let s = config.cloud_noise;
    let day_noise: f64 = rng.sample::<f64, _>(StandardNormal) * 0.8;
    (0..24)
        .map(|h| {
            let hour_noise: f64 = rng.sample::<f64, _>(StandardNormal) * 0.6;
            let mid = h as f64 + 0.5;
            let phase = (mid - sunrise) / length;
            if phase <= 0.0 || phase >= 1.0 {
                return 0.0;
            }
            let cloud = (s * (day_noise + hour_noise) - 0.5 * s * s).exp();
            config.peak_ghi * season * (PI * phase).sin() * cloud
        })
        .collect()
}

/// Member and cell multipliers; the in-region cells and the members each
/// average to exactly one in exact arithmetic.
fn spread(n: usize, range: f64) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    let half = (n - 1) as f64 / 2.0;
    (0..n).map(|i| 1.0 + range * (i as f64 - half) / half).collect()
}

/// Daily 72-lead GHI forecasts: hourly generation, 3-hour accumulation over
/// members and cells, then the standard preprocessing.
pub fn simulate_ghi<R: Rng + ?Sized>(days: usize, config: &TruthConfig, rng: &mut R) -> Result<SimulatedGhi> {
    if days == 0 {
        return Err(Error::Config {
            field: "days",
            reason: "must be at least 1".into(),
        });
    }
    config.validate()?;
    let valid_days = days + HORIZON / 24 - 1;
    let hourly: Vec<f64> = (0..valid_days)
        .flat_map(|d| hourly_ghi(config.start + Duration::days(d as i64), config, rng))
        .collect();
    let blocks: Vec<f64> = hourly.chunks(BLOCK_HOURS).map(|c| c.iter().sum()).collect();

    let mask = config.mask();
    let inside = mask.values().filter(|v| **v).count();
    let members = spread(config.members, 0.2);
    let mut cell_factor = spread(inside, 0.3);
    cell_factor.extend(std::iter::repeat_n(2.0, config.cells - inside));
    let cells: Vec<u32> = mask.keys().copied().collect();
    let steps: Vec<u32> = (1..=HORIZON / BLOCK_HOURS).map(|k| (k * BLOCK_HOURS) as u32).collect();
    let hash_mask: HashMap<u32, bool> = mask.iter().map(|(k, v)| (*k, *v)).collect();

    let blocks_per_day = 24 / BLOCK_HOURS;
    let mut series = Vec::with_capacity(days);
    let mut forecasts = Vec::with_capacity(days);
    for d in 0..days {
        let own = &blocks[d * blocks_per_day..d * blocks_per_day + HORIZON / BLOCK_HOURS];
        let accum: Vec<Vec<Vec<f64>>> = members
            .iter()
            .map(|fm| {
                cell_factor
                    .iter()
                    .map(|fc| {
                        let mut total = 0.0;
                        own.iter()
                            .map(|b| {
                                total += b * fm * fc;
                                total
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let date = config.start + Duration::days(d as i64);
        let s = GridForecastSeries::new(issue_time(date), steps.clone(), cells.clone(), accum)?;
        forecasts.push(preprocess_forecast(&s, &hash_mask)?);
        series.push(s);
    }
    // every valid hour is covered by the first 24 leads of its own issue
    // date, except the last two days which only the final issue reaches
    let mut valid_hourly: Vec<f64> = forecasts.iter().flat_map(|f| f[..24].iter().copied()).collect();
    valid_hourly.extend_from_slice(&forecasts[days - 1][24..]);
    Ok(SimulatedGhi {
        start: config.start,
        series,
        forecasts,
        valid_hourly,
    })
}

/// Production along the valid-time axis: zero where GHI is zero, otherwise
/// `exp(β0 + β1 log x + ε)` with AR(1) residuals inside each daylight run.
pub fn simulate_production<R: Rng + ?Sized>(
    ghi: &[f64],
    start: NaiveDate,
    truth: &TruthConfig,
    rng: &mut R,
) -> Result<ProductionSeries> {
    if ghi.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::input("GHI must be non-negative"));
    }
    let t0 = issue_time(start);
    let innovation = truth.sigma * (1.0 - truth.rho * truth.rho).sqrt();
    let mut prev: Option<f64> = None;
    let mut values = Vec::with_capacity(ghi.len());
    for (i, &x) in ghi.iter().enumerate() {
        if x <= 0.0 {
            prev = None;
            values.push(0.0);
            continue;
        }
        let z: f64 = rng.sample(StandardNormal);
        let eps = match prev {
            Some(p) => truth.rho * p + innovation * z,
            None => truth.sigma * z,
        };
        prev = Some(eps);
        let lead = i % 24 + 1;
        let b0 = truth.beta0(lead) + truth.intercept_offset(i / 24);
        values.push((b0 + truth.beta1(lead) * x.ln() + eps).exp());
    }
    let times = (0..ghi.len()).map(|i| t0 + Duration::hours(i as i64)).collect();
    ProductionSeries::new(times, values)
}

/// A complete synthetic dataset.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub truth: TruthConfig,
    pub ghi: SimulatedGhi,
    pub production: ProductionSeries,
}

pub fn simulate(days: usize, truth: &TruthConfig) -> Result<SyntheticData> {
    let ghi = simulate_ghi(days, truth, &mut substream(truth.seed, Stream::Ghi, 0))?;
    let production = simulate_production(
        &ghi.valid_hourly,
        truth.start,
        truth,
        &mut substream(truth.seed, Stream::Production, 0),
    )?;
    Ok(SyntheticData {
        truth: truth.clone(),
        ghi,
        production,
    })
}

/// Writes `forecasts.csv`, `production.csv`, `mask.csv` and `truth.csv`.
pub fn write_dataset(dir: &Path, data: &SyntheticData) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_forecasts(&dir.join("forecasts.csv"), &data.ghi.series)?;
    write_production(&dir.join("production.csv"), &data.production)?;
    write_mask(&dir.join("mask.csv"), &data.truth.mask())?;
    data.truth.write_csv(&dir.join("truth.csv"))
}
