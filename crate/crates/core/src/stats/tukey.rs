use serde::{Deserialize, Serialize};

use super::anova::{check_groups, group_summary};
use super::special::{studentized_range_cdf, studentized_range_quantile};
use super::StatsError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairComparison {
    pub i: usize,
    pub j: usize,
    /// mean_i − mean_j
    pub mean_difference: f64,
    pub q: f64,
    pub p: f64,
    pub significant: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TukeyResult {
    pub alpha: f64,
    pub groups: usize,
    pub df: usize,
    pub ms_within: f64,
    pub q_critical: f64,
    /// Pairs with `i < j`, in lexicographic order.
    pub comparisons: Vec<PairComparison>,
}

impl TukeyResult {
    /// Comparison for an unordered pair; the mean difference is oriented as `a − b`.
    pub fn pair(&self, a: usize, b: usize) -> Option<PairComparison> {
        let (i, j) = if a < b { (a, b) } else { (b, a) };
        let c = self.comparisons.iter().find(|c| c.i == i && c.j == j)?;
        let mut c = c.clone();
        if a > b {
            c.i = a;
            c.j = b;
            c.mean_difference = -c.mean_difference;
        }
        Some(c)
    }

    pub fn significant_pairs(&self) -> Vec<(usize, usize)> {
        self.comparisons.iter().filter(|c| c.significant).map(|c| (c.i, c.j)).collect()
    }
}

/// Tukey HSD (Tukey–Kramer for unequal sizes) over all pairs of groups.
pub fn tukey_hsd(groups: &[Vec<f64>], alpha: f64) -> Result<TukeyResult, StatsError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(StatsError::InvalidArgument(format!("alpha must be in (0, 1), got {alpha}")));
    }
    check_groups(groups)?;
    let k = groups.len();
    let summaries: Vec<_> = groups.iter().map(|g| group_summary(g)).collect();
    let total: usize = groups.iter().map(Vec::len).sum();
    let df = total - k;
    let ss_within: f64 = groups
        .iter()
        .zip(&summaries)
        .map(|(g, s)| g.iter().map(|x| (x - s.mean).powi(2)).sum::<f64>())
        .sum();
    let ms_within = ss_within / df as f64;
    let q_critical = studentized_range_quantile(1.0 - alpha, k as f64, df as f64);

    let mut comparisons = Vec::with_capacity(k * (k - 1) / 2);
    for i in 0..k {
        for j in i + 1..k {
            let diff = summaries[i].mean - summaries[j].mean;
            let se = (ms_within / 2.0 * (1.0 / summaries[i].n as f64 + 1.0 / summaries[j].n as f64)).sqrt();
            let (q, p) = if se == 0.0 {
                if diff == 0.0 {
                    (0.0, 1.0)
                } else {
                    (f64::INFINITY, 0.0)
                }
            } else {
                let q = diff.abs() / se;
                (q, (1.0 - studentized_range_cdf(q, k as f64, df as f64)).clamp(0.0, 1.0))
            };
            comparisons.push(PairComparison { i, j, mean_difference: diff, q, p, significant: q > q_critical });
        }
    }
    Ok(TukeyResult { alpha, groups: k, df, ms_within, q_critical, comparisons })
}
