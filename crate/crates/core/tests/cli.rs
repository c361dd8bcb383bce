use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use isa_core::automaton::SubgoalAutomaton;
use isa_core::harness::read_metrics;
use isa_core::officeworld::TaskKind;

const COFFEE_TRACES: &str = "\
+; {}; {coffee}; {}; {office}
+; {coffee}; {office}
-; {}; {deco}
-; {coffee}; {deco}
I; {}; {coffee}
I; {office}
I; {}
";

fn isa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_isa"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn induce_learns_coffee() {
    let dir = tempfile::tempdir().unwrap();
    let traces = dir.path().join("coffee.txt");
    let dot = dir.path().join("coffee.dot");
    fs::write(&traces, COFFEE_TRACES).unwrap();
    let o = isa(&[
        "induce",
        "--traces",
        path(&traces),
        "--alphabet",
        "coffee,office,deco",
        "--dot",
        path(&dot),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.contains("# states: 4"), "{out}");
    let text: String = out.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    let learned = SubgoalAutomaton::parse(&text).unwrap();
    assert_eq!(learned.num_states(), 4);
    assert!(fs::read_to_string(&dot).unwrap().starts_with("digraph"));
}

#[test]
fn induce_reports_contradiction() {
    let dir = tempfile::tempdir().unwrap();
    let traces = dir.path().join("bad.txt");
    fs::write(&traces, "+; {coffee}\n-; {coffee}\n").unwrap();
    let o = isa(&["induce", "--traces", path(&traces), "--alphabet", "coffee", "--max-states", "4"]);
    assert!(!o.status.success());
    assert!(stdout(&o).contains("unsatisfiable"));
}

#[test]
fn replay_flags_mismatches() {
    let dir = tempfile::tempdir().unwrap();
    let aut = dir.path().join("coffee.aut");
    let traces = dir.path().join("t.txt");
    fs::write(&aut, TaskKind::Coffee.ground_truth().to_text()).unwrap();
    fs::write(&traces, format!("{COFFEE_TRACES}+; {{office}}\n")).unwrap();
    let o = isa(&["replay", "--automaton", path(&aut), "--traces", path(&traces)]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert_eq!(out.matches("\tok").count(), 7, "{out}");
    assert_eq!(out.matches("MISMATCH").count(), 1);
    assert!(out.ends_with("# 8 traces, 1 mismatches\n"));
}

#[test]
fn run_then_aggregate() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.toml");
    fs::write(&config, "tasks = [\"coffee\"]\nscale = \"desk\"\nalphabet = \"restricted\"\n").unwrap();
    let mut metrics = Vec::new();
    for seed in ["0", "1"] {
        let out = dir.path().join(format!("run{seed}"));
        let o = isa(&[
            "run",
            "--config",
            path(&config),
            "--seed",
            seed,
            "--num-grids",
            "2",
            "--episodes-per-grid",
            "200",
            "--out",
            path(&out),
            "--no-wall-time",
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        for f in ["metrics.csv", "relearn.csv", "coffee.aut", "coffee.dot"] {
            assert!(out.join(f).exists(), "{f}");
        }
        let rows = read_metrics(fs::File::open(out.join("metrics.csv")).unwrap()).unwrap();
        assert_eq!(rows.len(), 2 * 2);
        metrics.push(out.join("metrics.csv"));
    }
    let summary = dir.path().join("summary.csv");
    let curves = dir.path().join("curves.csv");
    let o = isa(&[
        "aggregate",
        path(&metrics[0]),
        path(&metrics[1]),
        "--out",
        path(&summary),
        "--curves",
        path(&curves),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = fs::read_to_string(&summary).unwrap();
    assert!(s.starts_with("task,runs,"), "{s}");
    assert!(s.lines().nth(1).unwrap().starts_with("coffee,2,"), "{s}");
    let c = fs::read_to_string(&curves).unwrap();
    assert_eq!(c.lines().count(), 1 + 2);
}

#[test]
fn run_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.toml");
    fs::write(&config, "tasks = [\"coffee\", \"coffee-mail\"]\nsetting = \"M\"\nscale = \"desk\"\n").unwrap();
    let go = |name: &str| {
        let out = dir.path().join(name);
        let o = isa(&[
            "run",
            "--config",
            path(&config),
            "--num-grids",
            "2",
            "--episodes-per-grid",
            "300",
            "--out",
            path(&out),
            "--no-wall-time",
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        (
            fs::read(out.join("metrics.csv")).unwrap(),
            fs::read(out.join("relearn.csv")).unwrap(),
        )
    };
    assert_eq!(go("a"), go("b"));
}

#[test]
fn bad_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.toml");
    fs::write(&config, "tasks = [\"coffee\"]\nlearning_rate = 0.5\n").unwrap();
    let o = isa(&["run", "--config", path(&config), "--out", path(dir.path())]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("learning_rate"));
}
