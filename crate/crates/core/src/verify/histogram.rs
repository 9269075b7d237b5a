use std::fmt::Write as _;
use std::path::Path;

use crate::data::io::writer;
use crate::error::{Error, Result};

/// Equal-width histogram with the flat reference level `total / bins`.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramBins {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub reference: f64,
}

impl HistogramBins {
    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Pearson chi-square statistic against the given bin probabilities.
    pub fn chi_square(&self, probs: &[f64]) -> f64 {
        let total = self.total() as f64;
        self.counts
            .iter()
            .zip(probs)
            .map(|(&c, &p)| {
                let e = total * p;
                (c as f64 - e).powi(2) / e
            })
            .sum()
    }

    pub fn chi_square_uniform(&self) -> f64 {
        let p = vec![1.0 / self.n_bins() as f64; self.n_bins()];
        self.chi_square(&p)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = writer(path)?;
        let map = |e| Error::csv(path, e);
        w.write_record(["bin_lo", "bin_hi", "count"]).map_err(map)?;
        for (i, c) in self.counts.iter().enumerate() {
            w.write_record([self.edges[i].to_string(), self.edges[i + 1].to_string(), c.to_string()])
                .map_err(map)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Bar chart with a dashed line at the flat reference level.
    pub fn to_svg(&self, title: &str) -> String {
        let (w, h, pad) = (480.0, 300.0, 30.0);
        let top = self.counts.iter().copied().max().unwrap_or(0) as f64;
        let ymax = top.max(self.reference).max(1.0) * 1.1;
        let bw = (w - 2.0 * pad) / self.n_bins().max(1) as f64;
        let y = |v: f64| h - pad - v / ymax * (h - 2.0 * pad);
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
        );
        let _ = writeln!(s, r#"<text x="{}" y="18" font-size="13" text-anchor="middle">{title}</text>"#, w / 2.0);
        for (i, &c) in self.counts.iter().enumerate() {
            let x = pad + i as f64 * bw;
            let top = y(c as f64);
            let _ = writeln!(
                s,
                r##"<rect x="{x:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="#9db4cf" stroke="#33475b"/>"##,
                bw,
                h - pad - top
            );
        }
        let r = y(self.reference);
        let _ = writeln!(
            s,
            r#"<line x1="{pad}" y1="{r:.2}" x2="{}" y2="{r:.2}" stroke="black" stroke-dasharray="6,4"/>"#,
            w - pad
        );
        let _ = writeln!(s, r#"<line x1="{pad}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#, h - pad, w - pad, h - pad);
        s.push_str("</svg>\n");
        s
    }

    pub fn write_svg(&self, path: &Path, title: &str) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        std::fs::write(path, self.to_svg(title)).map_err(|e| Error::io(path, e))
    }
}

/// Equal-width bins over `[lo, hi]`; values equal to `hi` fall in the last bin.
pub fn make_histogram(values: &[f64], n_bins: usize, lo: f64, hi: f64) -> Result<HistogramBins> {
    if n_bins == 0 || !(hi > lo) {
        return Err(Error::input("histogram needs at least one bin and hi > lo"));
    }
    let width = (hi - lo) / n_bins as f64;
    let edges: Vec<f64> = (0..=n_bins).map(|i| lo + i as f64 * width).collect();
    let mut counts = vec![0u64; n_bins];
    for &v in values {
        if !(lo..=hi).contains(&v) {
            return Err(Error::input(format!("value {v} outside [{lo}, {hi}]")));
        }
        let i = (((v - lo) / (hi - lo) * n_bins as f64) as usize).min(n_bins - 1);
        counts[i] += 1;
    }
    Ok(HistogramBins {
        edges,
        reference: values.len() as f64 / n_bins as f64,
        counts,
    })
}

/// Maps band-depth ranks `1..=m + 1` onto `[0, 1]` for display binning.
pub fn rank_position(rank: usize, m: usize) -> f64 {
    (rank as f64 - 0.5) / (m + 1) as f64
}

/// Probability of each display bin under uniform ranks, accounting for bins
/// that hold unequal numbers of ranks.
pub fn rank_bin_probabilities(m: usize, n_bins: usize) -> Vec<f64> {
    let mut p = vec![0.0; n_bins];
    for r in 1..=m + 1 {
        let i = ((rank_position(r, m) * n_bins as f64) as usize).min(n_bins - 1);
        p[i] += 1.0 / (m + 1) as f64;
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn even_grid_gives_equal_counts() {
        let v: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        let h = make_histogram(&v, 10, 0.0, 1.0).unwrap();
        assert!(h.counts.iter().all(|&c| c == 10));
        assert_eq!(h.chi_square_uniform(), 0.0);
    }

    #[test]
    fn single_value_fills_one_bin() {
        let h = make_histogram(&[0.3], 20, 0.0, 1.0).unwrap();
        assert_eq!(h.counts.iter().filter(|&&c| c > 0).count(), 1);
        assert_eq!(h.counts[6], 1);
        let h = make_histogram(&[1.0], 4, 0.0, 1.0).unwrap();
        assert_eq!(h.counts[3], 1);
    }

    #[test]
    fn reference_line_for_9741_cases() {
        let v = vec![0.5; 9741];
        let h = make_histogram(&v, 20, 0.0, 1.0).unwrap();
        assert!((h.reference - 487.05).abs() < 1e-9);
        assert_eq!(h.total(), 9741);
    }

    #[test]
    fn rank_bins_sum_to_one() {
        let p = rank_bin_probabilities(1000, 20);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|&x| (x - 0.05).abs() < 0.002));
    }

    #[test]
    fn svg_has_dashed_reference() {
        let h = make_histogram(&[0.1, 0.2, 0.9], 4, 0.0, 1.0).unwrap();
        let svg = h.to_svg("PIT");
        assert!(svg.contains("stroke-dasharray"));
        assert_eq!(svg.matches("<rect").count(), 4);
    }
}
