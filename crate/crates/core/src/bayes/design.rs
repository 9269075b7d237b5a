use nalgebra::DMatrix;

use crate::data::ForecastCase;
use crate::error::{Error, Result};

/// `X = [I | Diag(log x)]` for the active lead times of one case.
pub fn build_design(x_active: &[f64]) -> Result<DMatrix<f64>> {
    if let Some(bad) = x_active.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(Error::input(format!("covariate {bad} is not positive")));
    }
    let n = x_active.len();
    let mut x = DMatrix::zeros(n, 2 * n);
    for (i, v) in x_active.iter().enumerate() {
        x[(i, i)] = 1.0;
        x[(i, n + i)] = v.ln();
    }
    Ok(x)
}

/// Observed rows of one training case, indexed by vertex of the active set.
#[derive(Debug, Clone, PartialEq)]
pub struct DayRows {
    /// Increasing vertex indices into `RegressionData::lead_times`.
    pub vertices: Vec<usize>,
    pub log_x: Vec<f64>,
    pub log_y: Vec<f64>,
}

/// Stacked log-scale training data over a fixed set of active lead times.
/// Each day contributes only the rows where both production and GHI are positive.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionData {
    lead_times: Vec<usize>,
    days: Vec<DayRows>,
}

impl RegressionData {
    pub fn new(lead_times: Vec<usize>, days: Vec<DayRows>) -> Result<Self> {
        let n = lead_times.len();
        if n == 0 {
            return Err(Error::input("no active lead times"));
        }
        for (d, day) in days.iter().enumerate() {
            if day.vertices.len() != day.log_x.len() || day.vertices.len() != day.log_y.len() {
                return Err(Error::input(format!("training day {d}: ragged rows")));
            }
            if day.vertices.windows(2).any(|w| w[0] >= w[1]) || day.vertices.last().is_some_and(|&v| v >= n) {
                return Err(Error::input(format!("training day {d}: invalid vertex indices")));
            }
            if day.log_x.iter().chain(&day.log_y).any(|v| !v.is_finite()) {
                return Err(Error::input(format!("training day {d}: non-finite response or covariate")));
            }
        }
        let days = days.into_iter().filter(|d| !d.vertices.is_empty()).collect();
        Ok(Self { lead_times, days })
    }

    /// Rows of `cases` at the lead times `t_plus` where both the realized
    /// production and the GHI forecast are positive; everything else is missing.
    pub fn from_cases(cases: &[ForecastCase], t_plus: &[usize]) -> Result<Self> {
        let days = cases
            .iter()
            .map(|case| {
                let mut rows = DayRows {
                    vertices: Vec::new(),
                    log_x: Vec::new(),
                    log_y: Vec::new(),
                };
                for (v, &t) in t_plus.iter().enumerate() {
                    let x = case.x[t - 1];
                    if let Some(y) = case.y_obs[t - 1] {
                        if y > 0.0 && x > 0.0 {
                            rows.vertices.push(v);
                            rows.log_x.push(x.ln());
                            rows.log_y.push(y.ln());
                        }
                    }
                }
                rows
            })
            .collect();
        Self::new(t_plus.to_vec(), days)
    }

    pub fn lead_times(&self) -> &[usize] {
        &self.lead_times
    }

    pub fn n(&self) -> usize {
        self.lead_times.len()
    }

    pub fn days(&self) -> &[DayRows] {
        &self.days
    }

    pub fn n_rows(&self) -> usize {
        self.days.iter().map(|d| d.vertices.len()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn design_for_e_and_e_squared() {
        let e = std::f64::consts::E;
        let x = build_design(&[e, e * e]).unwrap();
        let expected = DMatrix::from_row_slice(2, 4, &[1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 2.0]);
        assert!((x - expected).amax() < 1e-12);
    }

    #[test]
    fn design_for_single_unit_covariate() {
        assert_eq!(build_design(&[1.0]).unwrap(), DMatrix::from_row_slice(1, 2, &[1.0, 0.0]));
    }

    #[test]
    fn design_right_block_holds_logs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let xs: Vec<f64> = (0..17).map(|_| rng.random_range(0.01..900.0)).collect();
        let d = build_design(&xs).unwrap();
        for i in 0..17 {
            for j in 0..17 {
                let left = if i == j { 1.0 } else { 0.0 };
                let right = if i == j { xs[i].ln() } else { 0.0 };
                assert_eq!(d[(i, j)], left);
                assert_eq!(d[(i, 17 + j)], right);
            }
        }
    }

    #[test]
    fn nonpositive_covariate_is_rejected() {
        assert!(build_design(&[1.0, 0.0]).is_err());
    }

    #[test]
    fn zeros_become_missing_rows() {
        let date = NaiveDate::from_ymd_opt(2012, 4, 1).unwrap();
        let mut case = ForecastCase::new(date, vec![100.0; 72], vec![1.0; 72]).unwrap();
        case.y_obs[9] = Some(50.0);
        case.y_obs[10] = Some(0.0);
        case.y_obs[11] = Some(70.0);
        case.x[11] = 0.0;
        let data = RegressionData::from_cases(&[case], &[10, 11, 12]).unwrap();
        assert_eq!(data.days().len(), 1);
        assert_eq!(data.days()[0].vertices, vec![0]);
        assert!((data.days()[0].log_y[0] - 50f64.ln()).abs() < 1e-12);
    }
}
