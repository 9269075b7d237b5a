//! Raw covariate and production ingestion, preprocessing and training windows.
//!
//! Raw NWP input arrives as accumulated GHI per ensemble member, grid cell and
//! native lead step. It is reduced to a single hourly series per issue date by
//! averaging the ensemble, interpolating each cell to hourly interval means and
//! averaging over the cells inside the region mask.

pub mod io;
mod preprocess;
mod window;

use chrono::{NaiveDate, NaiveDateTime, NaiveTime};

use crate::error::{Error, Result};

pub use preprocess::{
    ensemble_mean, interpolate_hourly, pchip_interpolant, preprocess_forecast, spatial_average,
    CellField,
};
pub use window::{assemble_window, latest_observed_lag, partition_lead_times};

/// Forecast horizon in hours.
pub const HORIZON: usize = 72;

/// Issue time of the forecast for `date` (00 UTC initialization).
pub fn issue_time(date: NaiveDate) -> NaiveDateTime {
    date.and_time(NaiveTime::MIN)
}

/// Raw ensemble forecast of accumulated GHI for a single issue time.
#[derive(Debug, Clone, PartialEq)]
pub struct GridForecastSeries {
    pub issue_time: NaiveDateTime,
    /// Lead hours of the native steps, strictly increasing and ending at 72.
    pub steps: Vec<u32>,
    /// Cell identifiers; `accum[m][c]` refers to `cells[c]`.
    pub cells: Vec<u32>,
    /// Accumulated GHI (W h / m²) indexed `[member][cell][step]`.
    pub accum: Vec<Vec<Vec<f64>>>,
}

impl GridForecastSeries {
    pub fn new(
        issue_time: NaiveDateTime,
        steps: Vec<u32>,
        cells: Vec<u32>,
        accum: Vec<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        validate_steps(&steps)?;
        if accum.is_empty() {
            return Err(Error::input("forecast series has no ensemble members"));
        }
        for (m, member) in accum.iter().enumerate() {
            if member.len() != cells.len() {
                return Err(Error::input(format!(
                    "member {m} has {} cells, expected {}",
                    member.len(),
                    cells.len()
                )));
            }
            for (c, values) in member.iter().enumerate() {
                if values.len() != steps.len() {
                    return Err(Error::input(format!(
                        "member {m} cell {} has {} steps, expected {}",
                        cells[c],
                        values.len(),
                        steps.len()
                    )));
                }
                validate_accumulation(values)?;
            }
        }
        Ok(Self {
            issue_time,
            steps,
            cells,
            accum,
        })
    }

    pub fn n_members(&self) -> usize {
        self.accum.len()
    }
}

pub(crate) fn validate_steps(steps: &[u32]) -> Result<()> {
    if steps.is_empty() {
        return Err(Error::input("no lead steps"));
    }
    if steps.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::input("lead steps must be strictly increasing"));
    }
    if steps[0] == 0 || *steps.last().unwrap() as usize != HORIZON {
        return Err(Error::input(format!(
            "lead steps must lie in 1..={HORIZON} and end at {HORIZON}"
        )));
    }
    Ok(())
}

pub(crate) fn validate_accumulation(values: &[f64]) -> Result<()> {
    let mut prev = 0.0;
    for &v in values {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::input(format!(
                "accumulated GHI must be finite and non-negative, got {v}"
            )));
        }
        if v < prev {
            return Err(Error::input(format!(
                "accumulated GHI decreases from {prev} to {v}"
            )));
        }
        prev = v;
    }
    Ok(())
}

/// Hourly observed production. Timestamps mark the start of each hour.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProductionSeries {
    times: Vec<NaiveDateTime>,
    values: Vec<f64>,
}

impl ProductionSeries {
    pub fn new(times: Vec<NaiveDateTime>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::input("production times and values differ in length"));
        }
        for w in times.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::Data(format!(
                    "production timestamps not strictly increasing at {}",
                    w[1]
                )));
            }
        }
        for (t, &v) in times.iter().zip(&values) {
            if t.and_utc().timestamp() % 3600 != 0 {
                return Err(Error::Data(format!("production timestamp {t} is not on the hour")));
            }
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Data(format!("production at {t} is {v}")));
            }
        }
        Ok(Self { times, values })
    }

    pub fn times(&self) -> &[NaiveDateTime] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Production for the hour starting at `t`, if recorded.
    pub fn at(&self, t: NaiveDateTime) -> Option<f64> {
        self.times.binary_search(&t).ok().map(|i| self.values[i])
    }

    /// Index of the first record at or after `t`.
    pub(crate) fn lower_bound(&self, t: NaiveDateTime) -> usize {
        self.times.partition_point(|&x| x < t)
    }
}

/// One issue date's covariates, lagged production and (for training) realized production.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastCase {
    pub issue_date: NaiveDate,
    /// Hourly interval-mean GHI for lead times 1..=72 (W/m²).
    pub x: Vec<f64>,
    /// Realized production per lead time (MW); `None` when unavailable.
    pub y_obs: Vec<Option<f64>>,
    /// Most recent observed production at each lead time's hour of day (MW).
    pub y_lag: Vec<f64>,
}

impl ForecastCase {
    pub fn new(issue_date: NaiveDate, x: Vec<f64>, y_lag: Vec<f64>) -> Result<Self> {
        if x.len() != HORIZON || y_lag.len() != HORIZON {
            return Err(Error::input(format!(
                "forecast case needs {HORIZON} covariates and lags"
            )));
        }
        if x.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::input("GHI covariates must be finite and non-negative"));
        }
        Ok(Self {
            issue_date,
            x,
            y_obs: vec![None; HORIZON],
            y_lag,
        })
    }

    pub fn issue_time(&self) -> NaiveDateTime {
        issue_time(self.issue_date)
    }
}

/// Split of the lead times 1..=72 into modelled (`t_plus`) and fallback (`t_zero`) sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeadTimePartition {
    /// Lead times (1-based, increasing) with positive lag and positive GHI.
    pub t_plus: Vec<usize>,
    pub t_zero: Vec<usize>,
}

impl LeadTimePartition {
    pub fn is_active(&self, lead: usize) -> bool {
        self.t_plus.binary_search(&lead).is_ok()
    }
}
