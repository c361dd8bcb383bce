//! Experiment configuration, seeded runs, metrics files and aggregation.

mod aggregate;
mod config;

pub use aggregate::{aggregate_curves, aggregate_runs, mean_stderr, AggregateRow, CurvePoint, MeanStderr};
pub use config::{AlphabetChoice, ConfigError, ExperimentConfig, Scale, Setting};

use std::fs;
use std::io;
use std::path::Path;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::automaton::SubgoalAutomaton;
use crate::isa::{IsaError, RelearnEvent, RunState};
use crate::officeworld::{random_grid, GridLayout, TaskKind};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Isa(#[from] IsaError),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Named substreams of one run seed.
pub mod streams {
    pub const GRIDS: u64 = 1;
    pub const EVAL: u64 = 2;
    /// Policy stream of task `i` is `POLICY + i`.
    pub const POLICY: u64 = 16;
}

pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// The experiment's grid set: random layouts with the default walls.
pub fn make_grids(grid_seed: u64, n: usize) -> Vec<GridLayout> {
    let base = GridLayout::default_layout();
    let mut rng = substream(grid_seed, streams::GRIDS);
    (0..n).map(|_| random_grid(&base, rng.gen())).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub episode: usize,
    pub task: TaskKind,
    pub grid: usize,
    pub greedy_return: f64,
    pub steps: usize,
    pub relearn_flag: u8,
    pub num_automaton_states: usize,
    pub cum_solver_time_ms: f64,
    pub n_pos: usize,
    pub n_neg: usize,
    pub n_inc: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskSummary {
    pub task: TaskKind,
    pub automaton: SubgoalAutomaton,
    pub counts: (usize, usize, usize),
    pub relearns: usize,
    pub solver_time: Duration,
    pub divergences: usize,
    pub repeat_transitions: usize,
    /// Fraction of grids solved by the last greedy evaluation.
    pub final_success: f64,
    /// Mean greedy return over every evaluation point and grid.
    pub auc: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub setting: Setting,
    pub seed: u64,
    pub rows: Vec<MetricsRow>,
    pub tasks: Vec<TaskSummary>,
    pub relearn_log: Vec<RelearnEvent>,
    /// Every stored counterexample was classified correctly by each
    /// automaton learned after it.
    pub coverage_ok: bool,
}

impl RunOutput {
    pub fn task(&self, t: TaskKind) -> Option<&TaskSummary> {
        self.tasks.iter().find(|s| s.task == t)
    }
}

/// Runs one (config, seed) experiment; in the single-task settings every
/// task gets its own independent run.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutput, HarnessError> {
    config.validate()?;
    let grids = make_grids(config.grid_seed, config.num_grids());
    let alphabets = config.alphabets()?;
    let groups: Vec<Vec<(TaskKind, _)>> = if config.setting.multitask() {
        vec![alphabets]
    } else {
        alphabets.into_iter().map(|x| vec![x]).collect()
    };
    let mut out = RunOutput {
        setting: config.setting,
        seed: config.seed,
        rows: Vec::new(),
        tasks: Vec::new(),
        relearn_log: Vec::new(),
        coverage_ok: true,
    };
    for group in groups {
        let run = RunState::new(config.isa_config(), grids.clone(), group);
        run_group(config, run, &mut out)?;
    }
    out.rows.sort_by_key(|r| (r.episode, r.task, r.grid));
    out.tasks.sort_by_key(|t| t.task);
    Ok(out)
}

fn run_group(config: &ExperimentConfig, mut run: RunState, out: &mut RunOutput) -> Result<(), HarnessError> {
    let num_tasks = run.tasks.len();
    let num_grids = run.grids.len();
    let mut policy: Vec<ChaCha8Rng> = run
        .tasks
        .iter()
        .map(|t| substream(config.seed, streams::POLICY + t.kind as u64))
        .collect();
    let mut eval_rng = substream(config.seed, streams::EVAL + 1000 * run.tasks[0].kind as u64);
    let mut relearned = vec![false; num_tasks];
    let mut rows = Vec::new();
    let mut coverage_ok = true;
    for e in 0..config.episodes_per_grid() {
        for g in 0..num_grids {
            for t in 0..num_tasks {
                let rec = run.run_episode(t, g, e, &mut policy[t])?;
                if rec.relearned {
                    relearned[t] = true;
                    let tr = &run.tasks[t];
                    coverage_ok &= crate::induction::check_consistency(&tr.automaton, &tr.examples).is_ok();
                }
            }
        }
        if (e + 1) % config.eval_every == 0 || e + 1 == config.episodes_per_grid() {
            for (t, flag) in relearned.iter_mut().enumerate() {
                let tr = &run.tasks[t];
                let (n_pos, n_neg, n_inc) = tr.examples.counts();
                let ms = if config.record_wall_time {
                    tr.solver_time.as_secs_f64() * 1e3
                } else {
                    0.0
                };
                for g in 0..num_grids {
                    let (ret, steps) = run.evaluate(t, g, &mut eval_rng);
                    rows.push(MetricsRow {
                        episode: e + 1,
                        task: tr.kind,
                        grid: g,
                        greedy_return: ret,
                        steps,
                        relearn_flag: u8::from(*flag),
                        num_automaton_states: tr.automaton.num_states(),
                        cum_solver_time_ms: ms,
                        n_pos,
                        n_neg,
                        n_inc,
                    });
                }
                *flag = false;
            }
        }
    }
    let last = rows.iter().map(|r| r.episode).max().unwrap_or(0);
    for tr in &run.tasks {
        let mine: Vec<&MetricsRow> = rows.iter().filter(|r| r.task == tr.kind).collect();
        let fin: Vec<&&MetricsRow> = mine.iter().filter(|r| r.episode == last).collect();
        let final_success = fin.iter().filter(|r| r.greedy_return > 0.0).count() as f64 / fin.len().max(1) as f64;
        let auc = mine.iter().map(|r| r.greedy_return).sum::<f64>() / mine.len().max(1) as f64;
        out.tasks.push(TaskSummary {
            task: tr.kind,
            automaton: tr.automaton.clone(),
            counts: tr.examples.counts(),
            relearns: tr.relearn_count,
            solver_time: tr.solver_time,
            divergences: tr.divergences,
            repeat_transitions: tr.repeat_transitions,
            final_success,
            auc,
        });
    }
    out.rows.extend(rows);
    out.relearn_log.extend(run.relearn_log);
    out.coverage_ok &= coverage_ok;
    Ok(())
}

/// Independent runs of one config for several seeds, in parallel.
pub fn run_seeds(config: &ExperimentConfig, seeds: &[u64]) -> Result<Vec<RunOutput>, HarnessError> {
    seeds
        .par_iter()
        .map(|&seed| {
            let c = ExperimentConfig {
                seed,
                ..config.clone()
            };
            run_experiment(&c)
        })
        .collect()
}

pub fn write_metrics<W: io::Write>(rows: &[MetricsRow], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics<R: io::Read>(input: R) -> Result<Vec<MetricsRow>, HarnessError> {
    let mut r = csv::Reader::from_reader(input);
    let rows = r.deserialize().collect::<Result<Vec<MetricsRow>, _>>()?;
    Ok(rows)
}

pub fn write_relearn_log<W: io::Write>(log: &[RelearnEvent], wall_time: bool, out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "episode",
        "task",
        "kind",
        "label",
        "num_states",
        "literals",
        "solver_ms",
        "n_pos",
        "n_neg",
        "n_inc",
    ])?;
    for e in log {
        w.write_record([
            e.episode.to_string(),
            e.task.to_string(),
            format!("{:?}", e.kind),
            e.label.as_str().to_string(),
            e.num_states.to_string(),
            e.stats.literals.to_string(),
            format!(
                "{:.3}",
                if wall_time { e.stats.elapsed.as_secs_f64() * 1e3 } else { 0.0 }
            ),
            e.counts.0.to_string(),
            e.counts.1.to_string(),
            e.counts.2.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `metrics.csv`, `relearn.csv` and `<task>.aut` / `<task>.dot` per
/// learned automaton into `dir`.
pub fn write_outputs(dir: &Path, out: &RunOutput, record_wall_time: bool) -> Result<(), HarnessError> {
    fs::create_dir_all(dir)?;
    write_metrics(&out.rows, fs::File::create(dir.join("metrics.csv"))?)?;
    write_relearn_log(&out.relearn_log, record_wall_time, fs::File::create(dir.join("relearn.csv"))?)?;
    for t in &out.tasks {
        fs::write(dir.join(format!("{}.aut", t.task)), t.automaton.to_text())?;
        fs::write(dir.join(format!("{}.dot", t.task)), t.automaton.to_dot())?;
    }
    Ok(())
}
