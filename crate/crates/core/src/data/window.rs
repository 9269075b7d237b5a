use std::collections::BTreeMap;

use chrono::{Duration, NaiveDate, NaiveDateTime, Timelike};

use super::{issue_time, ForecastCase, LeadTimePartition, ProductionSeries, HORIZON};
use crate::error::{Error, Result};

/// For each lead time, the latest production observed before `issue` at the
/// same UTC hour of day as the lead time's valid hour.
pub fn latest_observed_lag(production: &ProductionSeries, issue: NaiveDateTime) -> Result<Vec<f64>> {
    let earliest_needed = issue - Duration::hours(24);
    match production.times().first() {
        Some(&first) if first <= earliest_needed => {}
        _ => {
            return Err(Error::input(format!(
                "production history must cover the 24 h before {issue}"
            )))
        }
    }
    let mut by_hour: [Option<f64>; 24] = [None; 24];
    let mut found = 0;
    let end = production.lower_bound(issue);
    for i in (0..end).rev() {
        let h = production.times()[i].hour() as usize;
        if by_hour[h].is_none() {
            by_hour[h] = Some(production.values()[i]);
            found += 1;
            if found == 24 {
                break;
            }
        }
    }
    let per_hour = by_hour
        .iter()
        .enumerate()
        .map(|(h, v)| {
            v.ok_or_else(|| Error::input(format!("no production observed at hour {h:02} before {issue}")))
        })
        .collect::<Result<Vec<f64>>>()?;
    let issue_hour = issue.hour() as usize;
    Ok((1..=HORIZON)
        .map(|t| per_hour[(issue_hour + t - 1) % 24])
        .collect())
}

/// Lead time `t` is modelled iff both its lagged production and its GHI forecast are positive.
pub fn partition_lead_times(case: &ForecastCase) -> LeadTimePartition {
    let (t_plus, t_zero) = (1..=case.x.len())
        .partition(|&t| case.y_lag[t - 1] > 0.0 && case.x[t - 1] > 0.0);
    LeadTimePartition { t_plus, t_zero }
}

/// The `window_days` cases immediately preceding `target`, with realized
/// production filled in for every lead time whose hour had ended by the
/// target's issue time.
pub fn assemble_window(
    cases: &BTreeMap<NaiveDate, ForecastCase>,
    production: &ProductionSeries,
    target: NaiveDate,
    window_days: usize,
) -> Result<Vec<ForecastCase>> {
    if window_days == 0 {
        return Err(Error::input("training window must span at least one day"));
    }
    let dates: Vec<NaiveDate> = (1..=window_days as i64)
        .rev()
        .map(|k| target - Duration::days(k))
        .collect();
    let missing: Vec<NaiveDate> = dates
        .iter()
        .copied()
        .filter(|d| !cases.contains_key(d))
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingHistory { target, missing });
    }
    let cutoff = issue_time(target);
    Ok(dates
        .iter()
        .map(|d| {
            let mut case = cases[d].clone();
            let start = case.issue_time();
            for t in 1..=HORIZON {
                let hour_start = start + Duration::hours(t as i64 - 1);
                case.y_obs[t - 1] = if hour_start + Duration::hours(1) <= cutoff {
                    production.at(hour_start)
                } else {
                    None
                };
            }
            case
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn date(d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(2012, 3, d).unwrap()
    }

    fn hourly(start: NaiveDateTime, values: Vec<f64>) -> ProductionSeries {
        let times = (0..values.len())
            .map(|i| start + Duration::hours(i as i64))
            .collect();
        ProductionSeries::new(times, values).unwrap()
    }

    #[test]
    fn lag_takes_yesterdays_hour() {
        let mut values = vec![0.0; 48];
        values[24 + 10] = 500.0;
        values[10] = 300.0;
        let p = hourly(issue_time(date(1)), values);
        let lag = latest_observed_lag(&p, issue_time(date(3))).unwrap();
        for t in [11, 35, 59] {
            assert_eq!(lag[t - 1], 500.0);
        }
        assert_eq!(lag[0], 0.0);
    }

    #[test]
    fn lag_replicates_every_24_hours() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let values: Vec<f64> = (0..24 * 9).map(|_| rng.random_range(0.0..1000.0)).collect();
        // punch random holes to exercise the backward scan
        let start = issue_time(date(1));
        let (times, vals): (Vec<_>, Vec<_>) = values
            .iter()
            .enumerate()
            .filter(|_| rng.random_bool(0.8))
            .map(|(i, &v)| (start + Duration::hours(i as i64), v))
            .unzip();
        let p = ProductionSeries::new(times, vals).unwrap();
        let issue = issue_time(date(10));
        let lag = latest_observed_lag(&p, issue).unwrap();
        // direct oracle: scan all records for the newest matching hour
        for t in 1..=24 {
            let hod = (t - 1) as u32;
            let oracle = p
                .times()
                .iter()
                .zip(p.values())
                .filter(|(tm, _)| **tm < issue && tm.hour() == hod)
                .last()
                .map(|(_, v)| *v)
                .unwrap();
            assert_eq!(lag[t - 1], oracle);
            assert_eq!(lag[t - 1], lag[t + 23]);
            assert_eq!(lag[t - 1], lag[t + 47]);
        }
    }

    #[test]
    fn lag_needs_a_full_day() {
        let p = hourly(issue_time(date(2)) + Duration::hours(3), vec![1.0; 21]);
        assert!(latest_observed_lag(&p, issue_time(date(3))).is_err());
    }

    #[test]
    fn partition_small_example() {
        let mut case = ForecastCase::new(date(1), vec![0.0; 72], vec![0.0; 72]).unwrap();
        case.x[..3].copy_from_slice(&[0.0, 5.0, 2.0]);
        case.y_lag[..3].copy_from_slice(&[1.0, 3.0, 0.0]);
        let p = partition_lead_times(&case);
        assert_eq!(p.t_plus, vec![2]);
        assert_eq!(p.t_zero[..2], [1, 3]);
        assert_eq!(p.t_plus.len() + p.t_zero.len(), 72);

        let all = ForecastCase::new(date(1), vec![1.0; 72], vec![1.0; 72]).unwrap();
        assert_eq!(partition_lead_times(&all).t_plus, (1..=72).collect::<Vec<_>>());
    }

    fn store(dates: &[NaiveDate]) -> BTreeMap<NaiveDate, ForecastCase> {
        dates
            .iter()
            .map(|&d| (d, ForecastCase::new(d, vec![1.0; 72], vec![1.0; 72]).unwrap()))
            .collect()
    }

    #[test]
    fn window_of_one_day_is_yesterday() {
        let cases = store(&[date(1), date(2), date(3)]);
        let p = hourly(issue_time(date(1)), vec![7.0; 24 * 5]);
        let w = assemble_window(&cases, &p, date(4), 1).unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].issue_date, date(3));
        // only the first 24 leads of yesterday's case have been observed by today 00 UTC
        assert!(w[0].y_obs[..24].iter().all(|v| *v == Some(7.0)));
        assert!(w[0].y_obs[24..].iter().all(|v| v.is_none()));
    }

    #[test]
    fn window_of_twenty_days_is_contiguous() {
        let dates: Vec<NaiveDate> = (1..=25).map(date).collect();
        let cases = store(&dates);
        let p = hourly(issue_time(date(1)), vec![1.0; 24 * 30]);
        let w = assemble_window(&cases, &p, date(26), 20).unwrap();
        assert_eq!(w.len(), 20);
        assert!(w.windows(2).all(|p| p[1].issue_date - p[0].issue_date == Duration::days(1)));
        assert_eq!(w.last().unwrap().issue_date, date(25));
        assert!(w[0].y_obs.iter().all(|v| v.is_some()));
    }

    #[test]
    fn window_gap_is_named() {
        let dates: Vec<NaiveDate> = (1..=10).filter(|&d| d != 7).map(date).collect();
        let cases = store(&dates);
        let p = hourly(issue_time(date(1)), vec![1.0; 24 * 12]);
        match assemble_window(&cases, &p, date(11), 5) {
            Err(Error::MissingHistory { missing, .. }) => assert_eq!(missing, vec![date(7)]),
            other => panic!("expected missing history, got {other:?}"),
        }
    }
}
