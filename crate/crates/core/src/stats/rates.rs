use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::anova::{one_way_anova, AnovaResult};
use super::tukey::{tukey_hsd, TukeyResult};
use super::StatsError;
use crate::autodiff::Matrix;
use crate::graph::{DetectionLog, ObjectVocabulary};
use crate::par::{self, Execution};
use crate::task::Label;

/// Appearance rate of every class in every vlog: total instances / frames.
#[derive(Clone, Debug, PartialEq)]
pub struct ObjectRateTable {
    pub vlog_ids: Vec<String>,
    pub labels: Vec<Label>,
    /// vlogs × classes
    pub rates: Matrix,
}

impl ObjectRateTable {
    /// Rates of one class split by label, in [`Label::ALL`] order; labels
    /// with no vlogs are omitted.
    pub fn grouped(&self, class_id: usize) -> Vec<(Label, Vec<f64>)> {
        Label::ALL
            .into_iter()
            .map(|l| {
                let xs = self
                    .labels
                    .iter()
                    .enumerate()
                    .filter(|(_, &x)| x == l)
                    .map(|(v, _)| self.rates[[v, class_id]])
                    .collect::<Vec<_>>();
                (l, xs)
            })
            .filter(|(_, xs)| !xs.is_empty())
            .collect()
    }
}

pub fn normalized_counts(
    logs: &[DetectionLog],
    labels: &BTreeMap<String, Label>,
    vocab: &ObjectVocabulary,
) -> Result<ObjectRateTable, StatsError> {
    let t = vocab.len();
    let mut rates = Matrix::zeros((logs.len(), t));
    let mut out_labels = Vec::with_capacity(logs.len());
    for (v, log) in logs.iter().enumerate() {
        let label = *labels.get(&log.vlog_id).ok_or_else(|| StatsError::Unlabeled(log.vlog_id.clone()))?;
        out_labels.push(label);
        log.validate()?;
        let totals = log.instance_totals(t)?;
        let n = log.frame_count as f64;
        for (c, &k) in totals.iter().enumerate() {
            rates[[v, c]] = k as f64 / n;
        }
    }
    Ok(ObjectRateTable { vlog_ids: logs.iter().map(|l| l.vlog_id.clone()).collect(), labels: out_labels, rates })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectTest {
    pub class_id: usize,
    pub name: String,
    pub labels: Vec<Label>,
    pub anova: AnovaResult,
    pub tukey: TukeyResult,
}

impl ObjectTest {
    pub fn significant(&self) -> bool {
        self.anova.significant(self.tukey.alpha)
    }

    /// Label pairs flagged by the post-hoc test.
    pub fn differing_pairs(&self) -> Vec<(Label, Label)> {
        self.tukey.significant_pairs().into_iter().map(|(i, j)| (self.labels[i], self.labels[j])).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectAnalysis {
    pub alpha: f64,
    pub vlogs: usize,
    /// Sorted by ascending ANOVA p-value, ties by class id.
    pub tests: Vec<ObjectTest>,
}

impl ObjectAnalysis {
    pub fn significant_count(&self) -> usize {
        self.tests.iter().filter(|t| t.significant()).count()
    }

    /// Plain-text report: one block per object with per-label mean (SD),
    /// followed by F, p and the differing pairs. `top` limits the rows.
    pub fn render(&self, top: Option<usize>) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} vlogs, {} objects, {} significant at alpha = {}",
            self.vlogs,
            self.tests.len(),
            self.significant_count(),
            self.alpha
        );
        let _ = writeln!(out);
        let _ = writeln!(out, "{:<16} | {:<20} | {:>18} | {:>10} | {:>10}", "Object", "Label", "Mean (SD)", "F", "p");
        let rule = "-".repeat(86);
        let _ = writeln!(out, "{rule}");
        let n = top.unwrap_or(self.tests.len()).min(self.tests.len());
        for test in &self.tests[..n] {
            let name = capitalize(&test.name);
            for (row, (label, s)) in test.labels.iter().zip(&test.anova.groups).enumerate() {
                let cell = format!("{:.3} ({:.3})", s.mean, s.sd);
                if row == 0 {
                    let _ = writeln!(
                        out,
                        "{:<16} | {:<20} | {:>18} | {:>10.3} | {:>10}",
                        name,
                        label.display_name(),
                        cell,
                        test.anova.f,
                        format_p(test.anova.p)
                    );
                } else {
                    let _ = writeln!(out, "{:<16} | {:<20} | {:>18} | {:>10} | {:>10}", "", label.display_name(), cell, "", "");
                }
            }
            let pairs = test.differing_pairs();
            if !pairs.is_empty() {
                let list: Vec<String> = pairs.iter().map(|(a, b)| format!("{a}/{b}")).collect();
                let _ = writeln!(out, "{:<16} | post hoc: {}", "", list.join(", "));
            }
            let _ = writeln!(out, "{rule}");
        }
        out
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn format_p(p: f64) -> String {
    if p < 1e-4 {
        format!("{p:.2e}")
    } else {
        format!("{p:.4}")
    }
}

/// One-way ANOVA and Tukey HSD for every class across the label groups
/// present in `table`.
pub fn analyze_objects(
    table: &ObjectRateTable,
    vocab: &ObjectVocabulary,
    alpha: f64,
    exec: Execution,
) -> Result<ObjectAnalysis, StatsError> {
    if table.rates.ncols() != vocab.len() {
        return Err(StatsError::InvalidArgument(format!(
            "rate table has {} classes, vocabulary has {}",
            table.rates.ncols(),
            vocab.len()
        )));
    }
    let classes: Vec<usize> = (0..vocab.len()).collect();
    let mut tests = par::try_map(&classes, exec, |&c| {
        let grouped = table.grouped(c);
        let labels: Vec<Label> = grouped.iter().map(|(l, _)| *l).collect();
        let groups: Vec<Vec<f64>> = grouped.into_iter().map(|(_, xs)| xs).collect();
        let anova = one_way_anova(&groups)?;
        let tukey = tukey_hsd(&groups, alpha)?;
        Ok::<_, StatsError>(ObjectTest {
            class_id: c,
            name: vocab.name(c).unwrap_or_default().to_string(),
            labels,
            anova,
            tukey,
        })
    })?;
    tests.sort_by(|a, b| a.anova.p.total_cmp(&b.anova.p).then(a.class_id.cmp(&b.class_id)));
    Ok(ObjectAnalysis { alpha, vlogs: table.vlog_ids.len(), tests })
}
