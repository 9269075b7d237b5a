use std::collections::HashMap;

use super::{validate_accumulation, validate_steps, GridForecastSeries, HORIZON};
use crate::error::{Error, Result};

/// Deterministic (ensemble-mean) accumulated GHI per cell and native step.
#[derive(Debug, Clone, PartialEq)]
pub struct CellField {
    pub steps: Vec<u32>,
    pub cells: Vec<u32>,
    /// `values[cell][step]`
    pub values: Vec<Vec<f64>>,
}

/// Pointwise arithmetic mean over ensemble members.
pub fn ensemble_mean(series: &GridForecastSeries) -> Result<CellField> {
    let n_members = series.accum.len();
    if n_members == 0 {
        return Err(Error::input("ensemble mean of an empty member set"));
    }
    let n_steps = series.steps.len();
    let mut values = vec![vec![0.0; n_steps]; series.cells.len()];
    for member in &series.accum {
        for (acc, cell) in values.iter_mut().zip(member) {
            for (a, v) in acc.iter_mut().zip(cell) {
                *a += v;
            }
        }
    }
    let scale = 1.0 / n_members as f64;
    for acc in values.iter_mut().flatten() {
        *acc *= scale;
    }
    Ok(CellField {
        steps: series.steps.clone(),
        cells: series.cells.clone(),
        values,
    })
}

/// Mean of the cell values flagged as inside the region.
pub fn spatial_average(cell_values: &[f64], mask: &[bool]) -> Result<f64> {
    if cell_values.len() != mask.len() {
        return Err(Error::input(format!(
            "{} cell values but {} mask flags",
            cell_values.len(),
            mask.len()
        )));
    }
    let (sum, count) = cell_values
        .iter()
        .zip(mask)
        .filter(|(_, &inside)| inside)
        .fold((0.0, 0usize), |(s, n), (v, _)| (s + v, n + 1));
    if count == 0 {
        return Err(Error::input("region mask selects no cells"));
    }
    Ok(sum / count as f64)
}

/// Monotone piecewise-cubic Hermite interpolant (Fritsch–Carlson slopes),
/// held flat beyond the outermost knots.
#[derive(Debug, Clone)]
pub struct Pchip {
    knots: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl Pchip {
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.knots.len();
        if n == 1 || t <= self.knots[0] {
            return self.values[0];
        }
        if t >= self.knots[n - 1] {
            return self.values[n - 1];
        }
        let k = self.knots.partition_point(|&x| x <= t) - 1;
        let h = self.knots[k + 1] - self.knots[k];
        let s = (t - self.knots[k]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.values[k]
            + h10 * h * self.slopes[k]
            + h01 * self.values[k + 1]
            + h11 * h * self.slopes[k + 1]
    }
}

fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
    if n == 2 {
        return vec![delta[0]; 2];
    }
    let mut d = vec![0.0; n];
    for k in 1..n - 1 {
        let (a, b) = (delta[k - 1], delta[k]);
        if a * b <= 0.0 {
            d[k] = 0.0;
        } else {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            d[k] = (w1 + w2) / (w1 / a + w2 / b);
        }
    }
    d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

fn end_slope(h0: f64, h1: f64, m0: f64, m1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
    if d.signum() != m0.signum() || m0 == 0.0 {
        0.0
    } else if m0.signum() != m1.signum() && d.abs() > 3.0 * m0.abs() {
        3.0 * m0
    } else {
        d
    }
}

/// De-accumulated block-mean rates and the shape-preserving interpolant
/// through them at the block midpoints.
///
/// Returns `(rates, block_bounds, interpolant)`; block `k` covers lead hours
/// `block_bounds[k]..block_bounds[k + 1]`.
pub fn pchip_interpolant(steps: &[u32], accumulated: &[f64]) -> Result<(Vec<f64>, Vec<u32>, Pchip)> {
    validate_steps(steps)?;
    if steps.len() != accumulated.len() {
        return Err(Error::input("steps and accumulations differ in length"));
    }
    validate_accumulation(accumulated)?;

    let mut bounds = Vec::with_capacity(steps.len() + 1);
    bounds.push(0u32);
    bounds.extend_from_slice(steps);

    let mut rates = Vec::with_capacity(steps.len());
    let mut knots = Vec::with_capacity(steps.len());
    let mut prev = 0.0;
    for (k, &acc) in accumulated.iter().enumerate() {
        let len = f64::from(bounds[k + 1] - bounds[k]);
        rates.push(((acc - prev) / len).max(0.0));
        knots.push(f64::from(bounds[k]) + 0.5 * len);
        prev = acc;
    }
    let slopes = pchip_slopes(&knots, &rates);
    let interp = Pchip {
        knots,
        values: rates.clone(),
        slopes,
    };
    Ok((rates, bounds, interp))
}

/// Converts accumulated GHI at native steps into 72 hourly interval means.
///
/// Block rates are interpolated at the hourly midpoints, clamped at zero and
/// rescaled within each native block so the block's energy is conserved.
pub fn interpolate_hourly(steps: &[u32], accumulated: &[f64]) -> Result<Vec<f64>> {
    let (rates, bounds, interp) = pchip_interpolant(steps, accumulated)?;
    let mut hourly = vec![0.0; HORIZON];
    for (k, &rate) in rates.iter().enumerate() {
        let (lo, hi) = (bounds[k] as usize, bounds[k + 1] as usize);
        let block = &mut hourly[lo..hi];
        if rate == 0.0 {
            continue;
        }
        for (i, v) in block.iter_mut().enumerate() {
            *v = interp.eval((lo + i) as f64 + 0.5).max(0.0);
        }
        let total: f64 = block.iter().sum();
        let target = rate * block.len() as f64;
        if total > 0.0 {
            let scale = target / total;
            block.iter_mut().for_each(|v| *v *= scale);
        } else {
            block.fill(rate);
        }
    }
    Ok(hourly)
}

/// Full reduction of one raw forecast to the hourly regional GHI series:
/// ensemble mean, per-cell hourly interpolation, then the masked spatial mean.
pub fn preprocess_forecast(series: &GridForecastSeries, mask: &HashMap<u32, bool>) -> Result<Vec<f64>> {
    let field = ensemble_mean(series)?;
    let flags: Vec<bool> = field
        .cells
        .iter()
        .map(|c| mask.get(c).copied().unwrap_or(false))
        .collect();
    let hourly_by_cell = field
        .values
        .iter()
        .zip(&flags)
        .map(|(acc, &inside)| {
            if inside {
                interpolate_hourly(&field.steps, acc)
            } else {
                Ok(vec![0.0; HORIZON])
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(HORIZON);
    let mut column = vec![0.0; hourly_by_cell.len()];
    for t in 0..HORIZON {
        for (c, series) in hourly_by_cell.iter().enumerate() {
            column[c] = series[t];
        }
        out.push(spatial_average(&column, &flags)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn three_hourly() -> Vec<u32> {
        (1..=24).map(|k| 3 * k).collect()
    }

    fn series(members: Vec<Vec<Vec<f64>>>, steps: Vec<u32>) -> GridForecastSeries {
        let cells = (0..members[0].len() as u32).collect();
        let t = NaiveDate::from_ymd_opt(2012, 6, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
        GridForecastSeries::new(t, steps, cells, members).unwrap()
    }

    #[test]
    fn ensemble_mean_of_three_members() {
        let s = series(vec![vec![vec![1.0]], vec![vec![2.0]], vec![vec![3.0]]], vec![72]);
        let m = ensemble_mean(&s).unwrap();
        assert!((m.values[0][0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn single_member_is_identity() {
        let acc: Vec<f64> = (1..=24).map(|k| 10.0 * k as f64).collect();
        let s = series(vec![vec![acc.clone()]], three_hourly());
        assert_eq!(ensemble_mean(&s).unwrap().values[0], acc);
    }

    #[test]
    fn ensemble_mean_stays_non_negative() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let members: Vec<Vec<Vec<f64>>> = (0..50)
            .map(|_| {
                (0..5)
                    .map(|_| {
                        let mut acc = 0.0;
                        (0..24)
                            .map(|_| {
                                acc += rng.random_range(0.0..300.0);
                                acc
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let s = series(members, three_hourly());
        let m = ensemble_mean(&s).unwrap();
        // brute-force check against a direct per-entry mean
        for c in 0..5 {
            for k in 0..24 {
                let direct: f64 = s.accum.iter().map(|mem| mem[c][k]).sum::<f64>() / 50.0;
                assert!((m.values[c][k] - direct).abs() < 1e-9);
                assert!(m.values[c][k] >= 0.0);
            }
        }
    }

    #[test]
    fn empty_ensemble_is_rejected() {
        let t = NaiveDate::from_ymd_opt(2012, 6, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
        assert!(GridForecastSeries::new(t, vec![72], vec![0], vec![]).is_err());
        let raw = GridForecastSeries {
            issue_time: t,
            steps: vec![72],
            cells: vec![0],
            accum: vec![],
        };
        assert!(matches!(ensemble_mean(&raw), Err(Error::Input(_))));
    }

    #[test]
    fn spatial_average_cases() {
        assert_eq!(spatial_average(&[0.0, 10.0], &[true, true]).unwrap(), 5.0);
        assert_eq!(spatial_average(&[4.0; 6], &[true; 6]).unwrap(), 4.0);
        assert!(spatial_average(&[1.0, 2.0], &[false, false]).is_err());
    }

    #[test]
    fn spatial_average_counts_only_masked_cells() {
        // 724 in-region cells of a 1000-cell grid; outside cells carry a decoy value.
        let values: Vec<f64> = (0..1000).map(|i| if i < 724 { i as f64 } else { 1e6 }).collect();
        let mask: Vec<bool> = (0..1000).map(|i| i < 724).collect();
        let expected = (0..724).map(|i| i as f64).sum::<f64>() / 724.0;
        assert!((spatial_average(&values, &mask).unwrap() - expected).abs() < 1e-9);
    }

    #[test]
    fn zero_accumulation_gives_zeros() {
        let h = interpolate_hourly(&three_hourly(), &[0.0; 24]).unwrap();
        assert_eq!(h, vec![0.0; HORIZON]);
    }

    #[test]
    fn constant_rate_is_reproduced() {
        let r = 123.5;
        let acc: Vec<f64> = (1..=24).map(|k| 3.0 * r * k as f64).collect();
        let h = interpolate_hourly(&three_hourly(), &acc).unwrap();
        for v in h {
            assert!((v - r).abs() < 1e-9);
        }
    }

    #[test]
    fn isolated_block_never_goes_negative() {
        // one nonzero block among zeros; evaluate the raw interpolant on a fine grid
        let mut acc = vec![0.0; 24];
        for v in acc.iter_mut().skip(10) {
            *v = 900.0;
        }
        let (_, _, interp) = pchip_interpolant(&three_hourly(), &acc).unwrap();
        let fine_min = (0..=7200)
            .map(|i| interp.eval(i as f64 * 0.01))
            .fold(f64::INFINITY, f64::min);
        assert!(fine_min >= 0.0, "interpolant dips to {fine_min}");
        let h = interpolate_hourly(&three_hourly(), &acc).unwrap();
        assert!(h.iter().all(|&v| v >= 0.0));
        assert!((h[30..33].iter().sum::<f64>() - 900.0).abs() < 1e-9);
        assert!(h.iter().enumerate().all(|(i, &v)| (30..33).contains(&i) || v == 0.0));
    }

    #[test]
    fn decreasing_accumulation_is_rejected() {
        let mut acc: Vec<f64> = (1..=24).map(|k| k as f64).collect();
        acc[5] = 0.5;
        assert!(interpolate_hourly(&three_hourly(), &acc).is_err());
    }

    #[test]
    fn hourly_input_is_left_unchanged() {
        let steps: Vec<u32> = (1..=72).collect();
        let rates: Vec<f64> = (0..72)
            .map(|t| (200.0 * ((t % 24) as f64 / 24.0 * std::f64::consts::PI).sin()).max(0.0))
            .collect();
        let acc: Vec<f64> = rates
            .iter()
            .scan(0.0, |s, r| {
                *s += r;
                Some(*s)
            })
            .collect();
        let h = interpolate_hourly(&steps, &acc).unwrap();
        for (a, b) in h.iter().zip(&rates) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn energy_is_conserved_for_diurnal_cycle() {
        let hourly_truth: Vec<f64> = (0..72)
            .map(|t| {
                let hod = (t % 24) as f64 + 0.5;
                if (5.0..19.0).contains(&hod) {
                    600.0 * ((hod - 5.0) / 14.0 * std::f64::consts::PI).sin()
                } else {
                    0.0
                }
            })
            .collect();
        let mut acc = Vec::new();
        let mut total = 0.0;
        for k in 0..24 {
            total += hourly_truth[3 * k..3 * k + 3].iter().sum::<f64>();
            acc.push(total);
        }
        let h = interpolate_hourly(&three_hourly(), &acc).unwrap();
        let sum: f64 = h.iter().sum();
        assert!((sum - total).abs() / total < 0.01);
    }
}
