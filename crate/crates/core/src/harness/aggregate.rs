use std::collections::BTreeMap;
use std::fmt;

use crate::officeworld::TaskKind;

use super::MetricsRow;

/// Mean and standard error of the mean over runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanStderr {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

/// Values are sorted before summing so the result does not depend on input
/// order.
pub fn mean_stderr(values: &[f64]) -> MeanStderr {
    let n = values.len();
    if n == 0 {
        return MeanStderr {
            mean: f64::NAN,
            stderr: f64::NAN,
            n,
        };
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mean = v.iter().sum::<f64>() / n as f64;
    let stderr = if n < 2 {
        0.0
    } else {
        let mut sq: Vec<f64> = v.iter().map(|x| (x - mean) * (x - mean)).collect();
        sq.sort_by(f64::total_cmp);
        (sq.iter().sum::<f64>() / (n - 1) as f64).sqrt() / (n as f64).sqrt()
    };
    MeanStderr { mean, stderr, n }
}

impl fmt::Display for MeanStderr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = f.precision().unwrap_or(1);
        write!(f, "{:.p$} ({:.p$})", self.mean, self.stderr)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub task: TaskKind,
    pub runs: usize,
    pub n_pos: MeanStderr,
    pub n_neg: MeanStderr,
    pub n_inc: MeanStderr,
    pub total: MeanStderr,
    pub solver_time_ms: MeanStderr,
    pub auc: MeanStderr,
    pub final_success: MeanStderr,
}

impl AggregateRow {
    pub const HEADER: [&'static str; 9] = [
        "task",
        "runs",
        "positive",
        "negative",
        "incomplete",
        "total",
        "solver_time_ms",
        "auc",
        "final_success",
    ];

    pub fn record(&self) -> Vec<String> {
        vec![
            self.task.to_string(),
            self.runs.to_string(),
            self.n_pos.to_string(),
            self.n_neg.to_string(),
            self.n_inc.to_string(),
            self.total.to_string(),
            self.solver_time_ms.to_string(),
            format!("{:.3}", self.auc),
            format!("{:.3}", self.final_success),
        ]
    }
}

/// One row per task over a set of runs (one metrics table per run): final
/// example counts and solver time, mean greedy return over the run, and the
/// success rate of the last evaluation.
pub fn aggregate_runs(runs: &[Vec<MetricsRow>]) -> Vec<AggregateRow> {
    let mut per_task: BTreeMap<TaskKind, Vec<[f64; 7]>> = BTreeMap::new();
    for rows in runs {
        let mut tasks: Vec<TaskKind> = rows.iter().map(|r| r.task).collect();
        tasks.sort();
        tasks.dedup();
        for t in tasks {
            let mine: Vec<&MetricsRow> = rows.iter().filter(|r| r.task == t).collect();
            let last = mine.iter().map(|r| r.episode).max().unwrap();
            let fin: Vec<&&MetricsRow> = mine.iter().filter(|r| r.episode == last).collect();
            let f = fin[0];
            let auc = mean_stderr(&mine.iter().map(|r| r.greedy_return).collect::<Vec<_>>()).mean;
            let success = fin.iter().filter(|r| r.greedy_return > 0.0).count() as f64 / fin.len() as f64;
            per_task.entry(t).or_default().push([
                f.n_pos as f64,
                f.n_neg as f64,
                f.n_inc as f64,
                (f.n_pos + f.n_neg + f.n_inc) as f64,
                f.cum_solver_time_ms,
                auc,
                success,
            ]);
        }
    }
    per_task
        .into_iter()
        .map(|(task, vals)| {
            let col = |i: usize| mean_stderr(&vals.iter().map(|v| v[i]).collect::<Vec<_>>());
            AggregateRow {
                task,
                runs: vals.len(),
                n_pos: col(0),
                n_neg: col(1),
                n_inc: col(2),
                total: col(3),
                solver_time_ms: col(4),
                auc: col(5),
                final_success: col(6),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub task: TaskKind,
    pub episode: usize,
    pub greedy_return: MeanStderr,
}

/// Learning curve per task: for every evaluation point the grid-averaged
/// greedy return, summarised over runs.
pub fn aggregate_curves(runs: &[Vec<MetricsRow>]) -> Vec<CurvePoint> {
    let mut points: BTreeMap<(TaskKind, usize), Vec<f64>> = BTreeMap::new();
    for rows in runs {
        let mut per: BTreeMap<(TaskKind, usize), Vec<f64>> = BTreeMap::new();
        for r in rows {
            per.entry((r.task, r.episode)).or_default().push(r.greedy_return);
        }
        for (k, v) in per {
            points.entry(k).or_default().push(mean_stderr(&v).mean);
        }
    }
    points
        .into_iter()
        .map(|((task, episode), v)| CurvePoint {
            task,
            episode,
            greedy_return: mean_stderr(&v),
        })
        .collect()
}
