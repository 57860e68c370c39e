use std::fmt::Write as _;

use super::experiment::{EvaluationReport, MeanSd};

fn cell(m: MeanSd, repetitions: usize) -> String {
    if repetitions > 1 {
        format!("{:.3} ± {:.3}", m.mean, m.sd)
    } else {
        format!("{:.3}", m.mean)
    }
}

/// Per-label rows under one model heading; accuracy appears on the first row.
pub fn render_report(report: &EvaluationReport) -> String {
    let reps = report.repetitions.len();
    let agg = &report.aggregate;
    let mut out = String::new();
    let _ = writeln!(out, "Task: {}", report.task.title());
    let _ = writeln!(out, "Model: {} ({} repetition{}, seed {})", report.model, reps, if reps == 1 { "" } else { "s" }, report.seed);
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "{:<20} | {:>15} | {:>15} | {:>15} | {:>15}",
        "Label", "Accuracy", "Precision", "Recall", "F1-Score"
    );
    let _ = writeln!(out, "{}", "-".repeat(90));
    for (i, c) in agg.per_class.iter().enumerate() {
        let acc = if i == 0 { cell(agg.accuracy, reps) } else { String::new() };
        let _ = writeln!(
            out,
            "{:<20} | {:>15} | {:>15} | {:>15} | {:>15}",
            c.label.display_name(),
            acc,
            cell(c.precision, reps),
            cell(c.recall, reps),
            cell(c.f1, reps)
        );
    }
    let _ = writeln!(out, "{}", "-".repeat(90));
    let _ = writeln!(out, "Macro F1-Score: {}", cell(agg.macro_f1, reps));
    let _ = writeln!(out);
    for r in &report.repetitions {
        let _ = writeln!(
            out,
            "repetition {} (seed {}, best epoch {}): accuracy {:.3}, macro F1 {:.3}, confusion {:?}",
            r.repetition + 1,
            r.seed,
            r.best_epoch,
            r.test.accuracy,
            r.test.macro_f1,
            r.test.confusion.counts
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::task::Task;
    use crate::train::experiment::{aggregate, RepetitionResult};
    use crate::train::metrics::{ConfusionMatrix, Metrics};

    #[test]
    fn rows_follow_task_labels() {
        let r = RepetitionResult {
            repetition: 0,
            seed: 3,
            best_epoch: 2,
            test: Metrics::from_confusion(ConfusionMatrix { counts: vec![vec![8, 2], vec![1, 9]] }).unwrap(),
        };
        let report = EvaluationReport {
            model: "MOGAM with GAT".into(),
            task: Task::DailyVsDepression,
            seed: 3,
            aggregate: aggregate(Task::DailyVsDepression, std::slice::from_ref(&r)).unwrap(),
            repetitions: vec![r],
        };
        let text = render_report(&report);
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].contains("Daily and Depression"));
        assert!(lines[5].starts_with("Daily "));
        assert!(lines[5].contains("0.850"));
        assert!(lines[6].starts_with("Depression"));
        assert!(lines[6].contains("0.818"));
    }
}
