use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{run_experiment, ExperimentConfig, ExperimentSummary};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub algo: String,
    pub mean: Option<f64>,
    pub stderr: Option<f64>,
    pub trials: usize,
    pub mean_calls_to_goal: Option<f64>,
}

impl ComparisonRow {
    fn from_summary(algo: String, s: &ExperimentSummary) -> Self {
        ComparisonRow {
            algo,
            mean: s.mean_best_return,
            stderr: s.stderr_best_return,
            trials: s.trials.len(),
            mean_calls_to_goal: s.mean_calls_to_goal,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

const COLUMNS: [&str; 5] = ["algo", "mean", "stderr", "trials", "mean_calls_to_goal"];

fn cell(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| format!("{v:?}"))
}

impl ComparisonTable {
    /// Builds the table from two finished experiments. Rows are labelled by
    /// algorithm; identical labels get `-a` / `-b` suffixes.
    pub fn from_summaries(a: &ExperimentSummary, b: &ExperimentSummary) -> Self {
        let (la, lb) = (a.algorithm.to_string(), b.algorithm.to_string());
        let (la, lb) = if la == lb {
            (format!("{la}-a"), format!("{lb}-b"))
        } else {
            (la, lb)
        };
        ComparisonTable {
            rows: vec![ComparisonRow::from_summary(la, a), ComparisonRow::from_summary(lb, b)],
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = COLUMNS.join(",");
        out.push('\n');
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{}",
                r.algo,
                cell(r.mean),
                cell(r.stderr),
                r.trials,
                cell(r.mean_calls_to_goal)
            )
            .unwrap();
        }
        out
    }

    /// Column-aligned plain text for terminals.
    pub fn to_text(&self) -> String {
        let fmt = |x: Option<f64>, prec: usize| x.map_or_else(|| "-".to_string(), |v| format!("{v:.prec$}"));
        let mut cells: Vec<[String; 5]> = vec![COLUMNS.map(str::to_string)];
        for r in &self.rows {
            cells.push([
                r.algo.clone(),
                fmt(r.mean, 4),
                fmt(r.stderr, 4),
                r.trials.to_string(),
                fmt(r.mean_calls_to_goal, 0),
            ]);
        }
        let widths: Vec<usize> = (0..5)
            .map(|c| cells.iter().map(|row| row[c].len()).max().unwrap())
            .collect();
        let mut out = String::new();
        for row in &cells {
            let line: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(c, s)| {
                    if c == 0 {
                        format!("{s:<w$}", w = widths[c])
                    } else {
                        format!("{s:>w$}", w = widths[c])
                    }
                })
                .collect();
            out.push_str(line.join("  ").trim_end());
            out.push('\n');
        }
        out
    }
}

/// Runs both experiments and tabulates them. The configs must target the
/// same task and budget.
pub fn compare(a: &ExperimentConfig, b: &ExperimentConfig) -> Result<ComparisonTable> {
    if a.env != b.env {
        return Err(Error::Config("compared configs must use the same task settings".into()));
    }
    if a.budget != b.budget {
        return Err(Error::Config(format!(
            "compared configs must share a budget ({} vs {})",
            a.budget, b.budget
        )));
    }
    if a.output_dir == b.output_dir {
        return Err(Error::Config(
            "compared configs must write to different output directories".into(),
        ));
    }
    let sa = run_experiment(a)?;
    let sb = run_experiment(b)?;
    Ok(ComparisonTable::from_summaries(&sa, &sb))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_table_is_aligned() {
        let t = ComparisonTable {
            rows: vec![
                ComparisonRow {
                    algo: "mctspo".into(),
                    mean: Some(0.93),
                    stderr: Some(0.01),
                    trials: 10,
                    mean_calls_to_goal: Some(123456.0),
                },
                ComparisonRow {
                    algo: "deepga".into(),
                    mean: Some(-0.05),
                    stderr: None,
                    trials: 1,
                    mean_calls_to_goal: None,
                },
            ],
        };
        let text = t.to_text();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("algo"));
        let col = lines[0].find("trials").unwrap() + "trials".len();
        assert!(lines.iter().all(|l| l.len() >= col));
        assert_eq!(&lines[1][col - 2..col], "10");
        assert_eq!(
            t.to_csv(),
            "algo,mean,stderr,trials,mean_calls_to_goal\nmctspo,0.93,0.01,10,123456.0\ndeepga,-0.05,,1,\n"
        );
    }
}
