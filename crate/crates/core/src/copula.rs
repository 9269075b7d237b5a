//! Gaussian copula post-processing: normal-score residual archive, correlation
//! estimation and rank reordering of marginal samples.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use serde::Deserialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::io::{reader, writer};
use crate::data::HORIZON;
use crate::error::{Error, Result};
use crate::linalg::{select, standard_normals};

/// PIT values are clamped to `[EPS, 1 - EPS]` before the normal quantile.
pub const NORMAL_SCORE_EPS: f64 = 1e-6;
/// Minimum number of complete pairs for a correlation entry to be estimated.
pub const MIN_PAIRS: usize = 10;
/// Eigenvalue floor used when repairing a correlation matrix.
pub const EIGEN_FLOOR: f64 = 1e-6;

pub fn normal_score(pit: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&pit) {
        return Err(Error::input(format!("PIT {pit} outside [0, 1]")));
    }
    let p = pit.clamp(NORMAL_SCORE_EPS, 1.0 - NORMAL_SCORE_EPS);
    Ok(Normal::standard().inverse_cdf(p))
}

pub fn normal_scores(pits: &[f64]) -> Result<Vec<f64>> {
    pits.iter().map(|&p| normal_score(p)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CopulaStructure {
    Full,
    Ar1Band,
}

impl fmt::Display for CopulaStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Full => "full",
            Self::Ar1Band => "ar1",
        })
    }
}

impl FromStr for CopulaStructure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "full" => Ok(Self::Full),
            "ar1" | "ar1-band" => Ok(Self::Ar1Band),
            other => Err(Error::Config {
                field: "copula",
                reason: format!("unknown copula structure `{other}` (expected full or ar1)"),
            }),
        }
    }
}

/// Per-date normal scores by lead time; `None` where no PIT is defined.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResidualArchive {
    capacity: usize,
    entries: BTreeMap<NaiveDate, Vec<Option<f64>>>,
}

impl ResidualArchive {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            entries: BTreeMap::new(),
        }
    }

    /// The `capacity` most recent entries of `history` dated strictly before `target`.
    pub fn window(history: &BTreeMap<NaiveDate, Vec<Option<f64>>>, target: NaiveDate, capacity: usize) -> Self {
        let entries = history
            .range(..target)
            .rev()
            .take(capacity)
            .map(|(d, z)| (*d, z.clone()))
            .collect();
        Self { capacity, entries }
    }

    /// Adds a date, evicting the oldest entries beyond capacity.
    pub fn insert(&mut self, date: NaiveDate, z: Vec<Option<f64>>) -> Result<()> {
        if z.len() != HORIZON {
            return Err(Error::input(format!("archive row needs {HORIZON} lead times")));
        }
        if z.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::input("archive normal scores must be finite"));
        }
        self.entries.insert(date, z);
        while self.entries.len() > self.capacity {
            self.entries.pop_first();
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &BTreeMap<NaiveDate, Vec<Option<f64>>> {
        &self.entries
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = writer(path)?;
        let map = |e| Error::csv(path, e);
        w.write_record(["date", "lead_h", "z"]).map_err(map)?;
        for (date, z) in &self.entries {
            for (i, v) in z.iter().enumerate() {
                if let Some(v) = v {
                    w.write_record([date.to_string(), (i + 1).to_string(), v.to_string()])
                        .map_err(map)?;
                }
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path, capacity: usize) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            date: NaiveDate,
            lead_h: usize,
            z: f64,
        }
        let mut rows: BTreeMap<NaiveDate, Vec<Option<f64>>> = BTreeMap::new();
        for row in reader(path)?.deserialize::<Row>() {
            let row = row.map_err(|e| Error::csv(path, e))?;
            if !(1..=HORIZON).contains(&row.lead_h) {
                return Err(Error::Data(format!("archive lead {} out of range", row.lead_h)));
            }
            rows.entry(row.date).or_insert_with(|| vec![None; HORIZON])[row.lead_h - 1] = Some(row.z);
        }
        let mut archive = Self::new(capacity);
        for (d, z) in rows {
            archive.insert(d, z)?;
        }
        Ok(archive)
    }
}

/// Correlation of the normal scores across lead times.
#[derive(Debug, Clone, PartialEq)]
pub struct CopulaCorrelation {
    pub matrix: DMatrix<f64>,
    /// `valid[(i, j)]` is false where too few pairs were available and the
    /// entry was set to zero.
    pub valid: DMatrix<bool>,
}

impl CopulaCorrelation {
    pub fn identity(n: usize) -> Self {
        Self {
            matrix: DMatrix::identity(n, n),
            valid: DMatrix::from_element(n, n, true),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = writer(path)?;
        let map = |e| Error::csv(path, e);
        w.write_record(["row_lead", "col_lead", "value"]).map_err(map)?;
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                w.write_record([(i + 1).to_string(), (j + 1).to_string(), self.matrix[(i, j)].to_string()])
                    .map_err(map)?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Pairwise-complete sample correlation of the archived normal scores,
/// always repaired to a positive semi-definite correlation matrix.
///
/// With `Ar1Band` only the lag-one entries are estimated; the rest follow
/// from conditional independence beyond the band (inverse tridiagonal), so
/// entry `(i, j)` is the product of the lag-one correlations between them.
pub fn estimate_correlation(archive: &ResidualArchive, structure: CopulaStructure) -> CopulaCorrelation {
    let rows: Vec<&Vec<Option<f64>>> = archive.entries.values().collect();
    let n = HORIZON;
    let mut matrix = DMatrix::identity(n, n);
    let mut valid = DMatrix::from_element(n, n, false);
    for i in 0..n {
        let count = rows.iter().filter(|z| z[i].is_some()).count();
        valid[(i, i)] = count >= MIN_PAIRS;
        for j in 0..i {
            if structure == CopulaStructure::Ar1Band && i - j > 1 {
                valid[(i, j)] = true;
                valid[(j, i)] = true;
                continue;
            }
            let pairs: Vec<(f64, f64)> = rows.iter().filter_map(|z| Some((z[i]?, z[j]?))).collect();
            if pairs.len() < MIN_PAIRS {
                continue;
            }
            if let Some(r) = pearson(&pairs) {
                matrix[(i, j)] = r;
                matrix[(j, i)] = r;
                valid[(i, j)] = true;
                valid[(j, i)] = true;
            }
        }
    }
    if structure == CopulaStructure::Ar1Band {
        for i in 0..n {
            for j in (0..i.saturating_sub(1)).rev() {
                matrix[(i, j)] = matrix[(i, j + 1)] * matrix[(j + 1, j)];
                matrix[(j, i)] = matrix[(i, j)];
            }
        }
    }
    CopulaCorrelation {
        matrix: repair_correlation(&matrix),
        valid,
    }
}

fn pearson(pairs: &[(f64, f64)]) -> Option<f64> {
    let n = pairs.len() as f64;
    let (mx, my) = pairs.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
    let (mx, my) = (mx / n, my / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    let denom = (sxx * syy).sqrt();
    (denom > 0.0).then(|| (sxy / denom).clamp(-1.0, 1.0))
}

/// Nearest-PSD repair: floor the eigenvalues at `EIGEN_FLOOR`, rebuild and
/// rescale to unit diagonal.
pub fn repair_correlation(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let floored = eig.eigenvalues.map(|l| l.max(EIGEN_FLOOR));
    let rebuilt = &eig.eigenvectors * DMatrix::from_diagonal(&floored) * eig.eigenvectors.transpose();
    let d: Vec<f64> = (0..rebuilt.nrows()).map(|i| rebuilt[(i, i)].sqrt()).collect();
    let mut out = DMatrix::from_fn(rebuilt.nrows(), rebuilt.ncols(), |i, j| rebuilt[(i, j)] / (d[i] * d[j]));
    for i in 0..out.nrows() {
        out[(i, i)] = 1.0;
        for j in 0..i {
            let v = 0.5 * (out[(i, j)] + out[(j, i)]);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// Reorders each column of `samples` (`m` rows of `HORIZON` values) to follow
/// the ranks of `m` joint normal draws with the given correlation. Constant
/// columns are left as they are.
pub fn couple_samples<R: Rng + ?Sized>(
    samples: &[Vec<f64>],
    correlation: &CopulaCorrelation,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    let m = samples.len();
    if m < 2 {
        return Err(Error::input("coupling needs at least two samples"));
    }
    let width = samples[0].len();
    if samples.iter().any(|s| s.len() != width) || correlation.dim() != width {
        return Err(Error::input("sample width does not match the correlation matrix"));
    }
    let columns: Vec<usize> = (0..width)
        .filter(|&j| samples.iter().any(|s| s[j] != samples[0][j]))
        .collect();
    let mut out = samples.to_vec();
    if columns.is_empty() {
        return Ok(out);
    }
    let factor = psd_factor(&select(&correlation.matrix, &columns, &columns))?;
    let k = columns.len();
    let gauss: Vec<nalgebra::DVector<f64>> = (0..m).map(|_| &factor * standard_normals(k, rng)).collect();

    let mut order: Vec<usize> = (0..m).collect();
    let mut sorted = vec![0.0; m];
    for (c, &j) in columns.iter().enumerate() {
        order.sort_by(|&a, &b| samples[a][j].total_cmp(&samples[b][j]).then(a.cmp(&b)));
        for (r, &i) in order.iter().enumerate() {
            sorted[r] = samples[i][j];
        }
        order.sort_by(|&a, &b| gauss[a][c].total_cmp(&gauss[b][c]).then(a.cmp(&b)));
        for (r, &i) in order.iter().enumerate() {
            out[i][j] = sorted[r];
        }
    }
    Ok(out)
}

/// `F` with `F Fᵀ = c` for a positive semi-definite `c`.
fn psd_factor(c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = c.nrows();
    let eig = SymmetricEigen::new(c.clone());
    let tol = 1e-8 * n.max(1) as f64;
    if eig.eigenvalues.iter().any(|&l| l < -tol || !l.is_finite()) {
        return Err(Error::State("copula correlation is not positive semi-definite".into()));
    }
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&roots))
}
