use serde::{Deserialize, Serialize};

use super::special::f_survival;
use super::StatsError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (n − 1 denominator).
    pub sd: f64,
}

pub fn group_summary(xs: &[f64]) -> GroupSummary {
    let n = xs.len();
    if n == 0 {
        return GroupSummary { n, mean: f64::NAN, sd: f64::NAN };
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    let sd = if n > 1 {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    GroupSummary { n, mean, sd }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnovaResult {
    pub f: f64,
    pub p: f64,
    pub df_between: usize,
    pub df_within: usize,
    pub ss_between: f64,
    pub ss_within: f64,
    pub groups: Vec<GroupSummary>,
}

impl AnovaResult {
    pub fn significant(&self, alpha: f64) -> bool {
        self.p < alpha
    }

    pub fn ms_within(&self) -> f64 {
        self.ss_within / self.df_within as f64
    }
}

pub(crate) fn check_groups(groups: &[Vec<f64>]) -> Result<(), StatsError> {
    if groups.len() < 2 {
        return Err(StatsError::TooFewGroups { needed: 2, got: groups.len() });
    }
    for (i, g) in groups.iter().enumerate() {
        if g.len() < 2 {
            return Err(StatsError::GroupTooSmall { group: i, size: g.len() });
        }
        if g.iter().any(|x| !x.is_finite()) {
            return Err(StatsError::NonFinite { group: i });
        }
    }
    Ok(())
}

pub fn one_way_anova(groups: &[Vec<f64>]) -> Result<AnovaResult, StatsError> {
    check_groups(groups)?;
    let summaries: Vec<GroupSummary> = groups.iter().map(|g| group_summary(g)).collect();
    let total: usize = groups.iter().map(Vec::len).sum();
    let grand = groups.iter().flatten().sum::<f64>() / total as f64;

    let ss_between: f64 = summaries.iter().map(|s| s.n as f64 * (s.mean - grand).powi(2)).sum();
    let ss_within: f64 = groups
        .iter()
        .zip(&summaries)
        .map(|(g, s)| g.iter().map(|x| (x - s.mean).powi(2)).sum::<f64>())
        .sum();

    let df_between = groups.len() - 1;
    let df_within = total - groups.len();
    let (f, p) = if ss_within == 0.0 {
        if ss_between == 0.0 {
            (0.0, 1.0)
        } else {
            (f64::INFINITY, 0.0)
        }
    } else {
        let f = (ss_between / df_between as f64) / (ss_within / df_within as f64);
        (f, f_survival(f, df_between as f64, df_within as f64))
    };

    Ok(AnovaResult { f, p, df_between, df_within, ss_between, ss_within, groups: summaries })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_fixture() {
        // grand mean 3; SSB = 3·(1 + 0 + 1) = 6; SSW = 3·2 = 6; F = 3 / 1 = 3
        let r = one_way_anova(&[vec![1.0, 2.0, 3.0], vec![2.0, 3.0, 4.0], vec![3.0, 4.0, 5.0]]).unwrap();
        assert_eq!((r.df_between, r.df_within), (2, 6));
        assert!((r.ss_between - 6.0).abs() < 1e-12);
        assert!((r.ss_within - 6.0).abs() < 1e-12);
        assert!((r.f - 3.0).abs() < 1e-12);
        assert!((r.p - 0.125).abs() < 1e-12);
    }

    #[test]
    fn identical_groups_are_degenerate() {
        let r = one_way_anova(&[vec![2.0, 2.0], vec![2.0, 2.0, 2.0]]).unwrap();
        assert_eq!((r.f, r.p), (0.0, 1.0));
    }

    #[test]
    fn identical_spread_groups_give_zero_f() {
        let r = one_way_anova(&[vec![1.0, 2.0, 3.0], vec![3.0, 2.0, 1.0]]).unwrap();
        assert_eq!(r.f, 0.0);
        assert!((r.p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_but_distinct_groups() {
        let r = one_way_anova(&[vec![1.0, 1.0], vec![2.0, 2.0]]).unwrap();
        assert!(r.f.is_infinite());
        assert_eq!(r.p, 0.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(one_way_anova(&[vec![1.0, 2.0]]), Err(StatsError::TooFewGroups { .. })));
        assert!(matches!(
            one_way_anova(&[vec![1.0, 2.0], vec![1.0]]),
            Err(StatsError::GroupTooSmall { group: 1, size: 1 })
        ));
        assert!(matches!(
            one_way_anova(&[vec![1.0, f64::NAN], vec![1.0, 2.0]]),
            Err(StatsError::NonFinite { group: 0 })
        ));
    }

    #[test]
    fn summary_uses_sample_sd() {
        let s = group_summary(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]);
        assert_eq!(s.mean, 5.0);
        assert!((s.sd - (32.0f64 / 7.0).sqrt()).abs() < 1e-12);
    }
}
