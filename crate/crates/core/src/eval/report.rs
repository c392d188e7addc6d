//! Comparison table: one row per model plus the external baseline.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::config::BaselineRow;
use super::metrics::MetricsReport;

pub const BASELINE_NAME: &str = "Baseline (external)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub model: String,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub rows: Vec<ReportRow>,
    pub baseline: BaselineRow,
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "-".into())
}

impl Report {
    pub fn row(&self, model: &str) -> Option<&MetricsReport> {
        self.rows.iter().find(|r| r.model == model).map(|r| &r.metrics)
    }

    fn cells(&self) -> Vec<[String; 6]> {
        let mut out: Vec<[String; 6]> = self
            .rows
            .iter()
            .map(|r| {
                let m = &r.metrics;
                [
                    r.model.clone(),
                    cell(Some(m.f1)),
                    cell(Some(m.f2)),
                    cell(Some(m.tpr)),
                    cell(Some(m.fpr)),
                    cell(Some(m.auc)),
                ]
            })
            .collect();
        let b = &self.baseline;
        out.push([BASELINE_NAME.into(), cell(b.f1), cell(b.f2), cell(b.tpr), cell(b.fpr), cell(b.auc)]);
        out
    }

    /// Aligned plain-text table, three decimals, `-` for unknown baseline values.
    pub fn to_text(&self) -> String {
        let header = ["Model", "F1", "F2", "TPR", "FPR", "AUC"].map(String::from);
        let rows = self.cells();
        let mut widths = header.clone().map(|h| h.len());
        for r in &rows {
            for (w, c) in widths.iter_mut().zip(r) {
                *w = (*w).max(c.len());
            }
        }
        let mut s = String::new();
        for r in std::iter::once(&header).chain(&rows) {
            let mut line = format!("{:<w$}", r[0], w = widths[0]);
            for (c, w) in r[1..].iter().zip(&widths[1..]) {
                let _ = write!(line, "  {c:>w$}");
            }
            s.push_str(line.trim_end());
            s.push('\n');
        }
        s
    }

    /// `model,f1,f2,tpr,fpr,auc,tp,fp,tn,fn`; baseline counts are empty.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("model,f1,f2,tpr,fpr,auc,tp,fp,tn,fn\n");
        for r in &self.rows {
            let m = &r.metrics;
            let c = &m.counts;
            let _ = writeln!(
                s,
                "{},{:.6},{:.6},{:.6},{:.6},{:.6},{},{},{},{}",
                r.model, m.f1, m.f2, m.tpr, m.fpr, m.auc, c.tp, c.fp, c.tn, c.fn_
            );
        }
        let b = &self.baseline;
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        let _ = writeln!(
            s,
            "{BASELINE_NAME},{},{},{},{},{},,,,",
            opt(b.f1),
            opt(b.f2),
            opt(b.tpr),
            opt(b.fpr),
            opt(b.auc)
        );
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::metrics::ConfusionCounts;

    fn report() -> Report {
        let counts = ConfusionCounts { tp: 10, fp: 5, tn: 6, fn_: 1 };
        Report {
            rows: vec![ReportRow {
                model: "SVM(HF)".into(),
                metrics: MetricsReport { f1: 20.0 / 27.0, f2: 50.0 / 60.0, tpr: 10.0 / 11.0, fpr: 5.0 / 11.0, auc: 0.8, counts },
            }],
            baseline: BaselineRow { f2: Some(0.7), ..Default::default() },
        }
    }

    #[test]
    fn text_table_is_aligned() {
        let t = report().to_text();
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[1].contains("0.741") && lines[1].contains("0.833"));
        assert!(lines[2].starts_with(BASELINE_NAME) && lines[2].contains("0.700"));
        assert_eq!(lines[0].find("F1").unwrap() + 2, lines[1].find("0.741").unwrap() + 5);
    }

    #[test]
    fn csv_has_counts() {
        let c = report().to_csv();
        let lines: Vec<&str> = c.lines().collect();
        assert_eq!(lines[0], "model,f1,f2,tpr,fpr,auc,tp,fp,tn,fn");
        assert!(lines[1].ends_with(",10,5,6,1"));
        assert_eq!(lines[2], format!("{BASELINE_NAME},,0.700000,,,,,,,"));
    }
}
