use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use isa_core::automaton::SubgoalAutomaton;
use isa_core::harness::{
    aggregate_curves, aggregate_runs, read_metrics, run_experiment, write_outputs, AggregateRow,
    ExperimentConfig, Scale, Setting,
};
use isa_core::induction::{expected_verdict, find_minimal_automaton, AutomatonLearningTask, SolveResult};
use isa_core::traces::{parse_traces, Alphabet};

#[derive(Parser)]
#[command(name = "isa", version, about = "Subgoal automaton induction interleaved with Q-learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a TOML config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        scale: Option<Scale>,
        #[arg(long)]
        setting: Option<Setting>,
        #[arg(long)]
        episodes_per_grid: Option<usize>,
        #[arg(long)]
        num_grids: Option<usize>,
        /// Output directory (overrides `output_dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write zero solver times so outputs are byte-identical across runs.
        #[arg(long)]
        no_wall_time: bool,
    },
    /// Learn a minimal automaton from a labeled trace file.
    Induce {
        #[arg(long)]
        traces: PathBuf,
        /// Comma separated observables.
        #[arg(long)]
        alphabet: String,
        #[arg(long, default_value_t = 10)]
        max_states: usize,
        #[arg(long, default_value_t = 1)]
        max_edges_per_pair: usize,
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// Run an automaton over a trace file and print one verdict per trace.
    Replay {
        #[arg(long)]
        automaton: PathBuf,
        #[arg(long)]
        traces: PathBuf,
    },
    /// Summarise metrics files of several runs.
    Aggregate {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// Summary CSV path; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the averaged learning curves here.
        #[arg(long)]
        curves: Option<PathBuf>,
    },
}

type BoxError = Box<dyn std::error::Error>;

fn read(path: &PathBuf) -> Result<String, BoxError> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()).into())
}

fn run(cli: Cli) -> Result<(), BoxError> {
    match cli.command {
        Command::Run {
            config,
            seed,
            scale,
            setting,
            episodes_per_grid,
            num_grids,
            out,
            no_wall_time,
        } => {
            let mut c = ExperimentConfig::parse(&read(&config)?)?;
            if let Some(s) = seed {
                c.seed = s;
            }
            if let Some(s) = scale {
                c.scale = s;
            }
            if let Some(s) = setting {
                c.setting = s;
            }
            if episodes_per_grid.is_some() {
                c.episodes_per_grid = episodes_per_grid;
            }
            if num_grids.is_some() {
                c.num_grids = num_grids;
            }
            if no_wall_time {
                c.record_wall_time = false;
            }
            let dir = out
                .or_else(|| c.output_dir.clone())
                .unwrap_or_else(|| PathBuf::from(format!("runs/{}-seed{}", c.setting, c.seed)));
            c.validate()?;
            let result = run_experiment(&c)?;
            write_outputs(&dir, &result, c.record_wall_time)?;
            for t in &result.tasks {
                println!(
                    "{}: {} states, examples +{} -{} I{}, {} relearns, final success {:.2}",
                    t.task,
                    t.automaton.num_states(),
                    t.counts.0,
                    t.counts.1,
                    t.counts.2,
                    t.relearns,
                    t.final_success
                );
            }
            println!("wrote {}", dir.display());
        }
        Command::Induce {
            traces,
            alphabet,
            max_states,
            max_edges_per_pair,
            dot,
        } => {
            let alphabet = Alphabet::parse_list(&alphabet)?;
            let traces = parse_traces(&read(&traces)?, &alphabet)?;
            let task = AutomatonLearningTask::from_traces(alphabet, traces)
                .with_max_states(max_states)
                .with_max_edges_per_pair(max_edges_per_pair);
            let outcome = find_minimal_automaton(&task)?;
            match &outcome.result {
                SolveResult::Solution(a) => {
                    print!("{}", a.to_text());
                    if let Some(p) = dot {
                        fs::write(p, a.to_dot())?;
                    }
                }
                SolveResult::Unsatisfiable { num_states } => {
                    println!("# unsatisfiable with at most {num_states} states");
                }
            }
            let s = &outcome.stats;
            println!(
                "# states: {}, literals: {}, wall time: {:.3} ms, nodes: {}, candidates: {}",
                s.num_states,
                s.literals,
                s.elapsed.as_secs_f64() * 1e3,
                s.nodes,
                s.candidates
            );
            if outcome.automaton().is_none() {
                return Err("no automaton found".into());
            }
        }
        Command::Replay { automaton, traces } => {
            let a = SubgoalAutomaton::parse(&read(&automaton)?)?;
            let traces = parse_traces(&read(&traces)?, a.alphabet())?;
            let mut mismatches = 0;
            for t in &traces {
                let (verdict, ok) = match a.run_trace(t) {
                    Ok(v) => (format!("{:?}", v.kind).to_lowercase(), v.kind == expected_verdict(t.label())),
                    Err(e) => (format!("violation at step {}", e.step), false),
                };
                mismatches += usize::from(!ok);
                println!("{}\t{verdict}\t{}", t.format(a.alphabet()), if ok { "ok" } else { "MISMATCH" });
            }
            println!("# {} traces, {mismatches} mismatches", traces.len());
        }
        Command::Aggregate { files, out, curves } => {
            let mut runs = Vec::new();
            for f in &files {
                let file = fs::File::open(f).map_err(|e| format!("{}: {e}", f.display()))?;
                runs.push(read_metrics(file)?);
            }
            let mut w: csv::Writer<Box<dyn std::io::Write>> = csv::Writer::from_writer(match &out {
                Some(p) => Box::new(fs::File::create(p)?),
                None => Box::new(std::io::stdout()),
            });
            w.write_record(AggregateRow::HEADER)?;
            for row in aggregate_runs(&runs) {
                w.write_record(row.record())?;
            }
            w.flush()?;
            if let Some(p) = curves {
                let mut w = csv::Writer::from_path(p)?;
                w.write_record(["task", "episode", "greedy_return", "stderr", "runs"])?;
                for pt in aggregate_curves(&runs) {
                    w.write_record([
                        pt.task.to_string(),
                        pt.episode.to_string(),
                        format!("{:.6}", pt.greedy_return.mean),
                        format!("{:.6}", pt.greedy_return.stderr),
                        pt.greedy_return.n.to_string(),
                    ])?;
                }
                w.flush()?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
