use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::automaton::VerdictKind;
use crate::officeworld::random_grid;

fn coffee_run(config: IsaConfig, grids: Vec<GridLayout>) -> RunState {
    let kind = TaskKind::Coffee;
    RunState::new(config, grids, vec![(kind, kind.restricted_alphabet())])
}

fn sets(al: &Alphabet, steps: &[&[&str]]) -> Vec<ObservationSet> {
    steps.iter().map(|s| al.set_of(s.iter().copied()).unwrap()).collect()
}

#[test]
fn counterexample_examples() {
    let a = TaskKind::Coffee.ground_truth();
    let (u1, ua, ur) = (StateId(1), a.accepting(), a.rejecting());
    use CounterexampleKind::*;
    assert_eq!(is_counterexample(EpisodeStatus::Goal, u1, &a, false), Some(RecognitionMismatch));
    assert_eq!(is_counterexample(EpisodeStatus::Alive, u1, &a, false), None);
    assert_eq!(is_counterexample(EpisodeStatus::Alive, ua, &a, false), Some(RecognitionMismatch));
    assert_eq!(is_counterexample(EpisodeStatus::DeadEnd, ur, &a, false), None);
    assert_eq!(is_counterexample(EpisodeStatus::Goal, ua, &a, false), None);
    assert_eq!(is_counterexample(EpisodeStatus::Alive, u1, &a, true), Some(DeterminismViolation));
}

#[test]
fn first_positive_triggers_learning() {
    let config = IsaConfig {
        store_before_positive: true,
        ..IsaConfig::default()
    };
    let mut run = coffee_run(config, vec![GridLayout::default_layout()]);
    let al = run.tasks[0].alphabet.clone();
    let neg = sets(&al, &[&[], &["deco"]]);
    let changed = run
        .on_counterexample(0, &neg, EpisodeStatus::DeadEnd, CounterexampleKind::RecognitionMismatch, 0)
        .unwrap();
    assert!(!changed);
    assert_eq!(run.tasks[0].examples.counts(), (0, 1, 0));
    assert_eq!(run.tasks[0].automaton.edges().len(), 0);

    let pos = sets(&al, &[&[], &["coffee"], &[], &[], &["office"]]);
    let changed = run
        .on_counterexample(0, &pos, EpisodeStatus::Goal, CounterexampleKind::RecognitionMismatch, 1)
        .unwrap();
    assert!(changed);
    let a = &run.tasks[0].automaton;
    assert_eq!(a.num_states(), 3);
    assert_eq!(a.run(&pos).unwrap().kind, VerdictKind::Accepted);
    // the negative example forces an edge into the rejecting state
    assert!(a.edges().iter().any(|e| e.to == a.rejecting()));
    assert_eq!(run.relearn_log.len(), 1);
    assert_eq!(run.relearn_log[0].counts, (1, 1, 0));
}

#[test]
fn early_counterexamples_are_dropped_by_default() {
    let mut run = coffee_run(IsaConfig::default(), vec![GridLayout::default_layout()]);
    let al = run.tasks[0].alphabet.clone();
    let neg = sets(&al, &[&[], &["deco"]]);
    let kind = CounterexampleKind::RecognitionMismatch;
    assert!(!run.on_counterexample(0, &neg, EpisodeStatus::DeadEnd, kind, 0).unwrap());
    assert!(run.tasks[0].examples.is_empty());
    assert_eq!(run.tasks[0].skipped_before_positive, 1);
    let pos = sets(&al, &[&[], &["coffee"], &["office"]]);
    assert!(run.on_counterexample(0, &pos, EpisodeStatus::Goal, kind, 1).unwrap());
    // after the first positive, negatives are stored and trigger learning
    assert!(run.on_counterexample(0, &neg, EpisodeStatus::DeadEnd, kind, 2).unwrap());
    assert_eq!(run.tasks[0].examples.counts(), (1, 1, 0));
}

#[test]
fn relearning_clears_q_values() {
    let mut run = coffee_run(IsaConfig::default(), vec![GridLayout::default_layout()]);
    let key = QKey { task: 0, grid: 0, state: StateId(0) };
    run.qbank.row_mut(key, 3)[1] = 0.7;
    let al = run.tasks[0].alphabet.clone();
    let pos = sets(&al, &[&[], &["coffee"], &["office"]]);
    run.on_counterexample(0, &pos, EpisodeStatus::Goal, CounterexampleKind::RecognitionMismatch, 0)
        .unwrap();
    for c in 0..run.qbank.num_cells() {
        for u in 0..3 {
            assert_eq!(run.qbank.values(QKey { state: StateId(u), ..key }, c), [0.0; 4]);
        }
    }
}

#[test]
fn contradictory_labels_are_fatal() {
    let mut run = coffee_run(IsaConfig::default(), vec![GridLayout::default_layout()]);
    let al = run.tasks[0].alphabet.clone();
    let t = sets(&al, &[&[], &["coffee"], &["office"]]);
    run.on_counterexample(0, &t, EpisodeStatus::Goal, CounterexampleKind::RecognitionMismatch, 0)
        .unwrap();
    let err = run
        .on_counterexample(0, &t, EpisodeStatus::DeadEnd, CounterexampleKind::RecognitionMismatch, 1)
        .unwrap_err();
    assert!(matches!(err, IsaError::Unsatisfiable { .. }), "{err}");
}

#[test]
fn covered_counterexample_is_not_relearned() {
    let mut run = coffee_run(IsaConfig::default(), vec![GridLayout::default_layout()]);
    let al = run.tasks[0].alphabet.clone();
    let t = sets(&al, &[&[], &["coffee"], &["office"]]);
    run.on_counterexample(0, &t, EpisodeStatus::Goal, CounterexampleKind::RecognitionMismatch, 0)
        .unwrap();
    let again = run
        .on_counterexample(0, &t, EpisodeStatus::Goal, CounterexampleKind::RecognitionMismatch, 1)
        .unwrap();
    assert!(!again);
    assert_eq!(run.tasks[0].divergences, 1);
    assert_eq!(run.tasks[0].examples.len(), 1);
}

#[test]
fn ground_truth_produces_no_counterexamples_and_converges() {
    let kind = TaskKind::Coffee;
    let config = IsaConfig {
        learn: false,
        ..IsaConfig::default()
    };
    let mut run = RunState::with_automata(
        config,
        vec![GridLayout::default_layout()],
        vec![(kind, kind.restricted_alphabet())],
        vec![kind.ground_truth()],
    );
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut eval_rng = ChaCha8Rng::seed_from_u64(2);
    let mut solved_at = None;
    for e in 0..5000 {
        let rec = run.run_episode(0, 0, e, &mut rng).unwrap();
        assert_eq!(rec.counterexample, None, "episode {e}");
        if (e + 1) % 100 == 0 && solved_at.is_none() {
            let (ret, _) = run.evaluate(0, 0, &mut eval_rng);
            if ret > 0.0 {
                solved_at = Some(e);
            }
        }
    }
    assert!(solved_at.is_some());
    let (ret, steps) = run.evaluate(0, 0, &mut eval_rng);
    // shortest path: left to coffee, right, down twice
    assert_eq!(steps, 4);
    assert!((ret - 0.99f64.powi(3)).abs() < 1e-12);
}

#[test]
fn first_goal_episode_is_a_positive_counterexample() {
    let mut run = coffee_run(IsaConfig::default(), vec![GridLayout::default_layout()]);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for e in 0..10_000 {
        let rec = run.run_episode(0, 0, e, &mut rng).unwrap();
        match rec.status {
            EpisodeStatus::Goal => {
                assert_eq!(rec.counterexample, Some(CounterexampleKind::RecognitionMismatch));
                assert!(rec.relearned);
                assert_eq!(run.tasks[0].examples.positive().len(), 1);
                let a = &run.tasks[0].automaton;
                assert_eq!(a.run_trace(&rec.trace).unwrap().kind, VerdictKind::Accepted);
                return;
            }
            EpisodeStatus::DeadEnd => {
                assert!(!rec.relearned);
                assert_eq!(rec.trace.label(), TraceLabel::Negative);
            }
            EpisodeStatus::Alive => {
                assert_eq!(rec.counterexample, None);
                assert_eq!(rec.steps, 100);
            }
        }
    }
    panic!("no goal reached");
}

#[test]
fn interleaved_run_keeps_examples_covered() {
    let base = GridLayout::default_layout();
    let grids: Vec<GridLayout> = (0..3).map(|s| random_grid(&base, s)).collect();
    let mut run = coffee_run(IsaConfig::default(), grids);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for e in 0..1500 {
        for g in 0..3 {
            run.run_episode(0, g, e, &mut rng).unwrap();
        }
    }
    let tr = &run.tasks[0];
    assert!(tr.relearn_count >= 1 && tr.relearn_count < 50);
    assert!(check_consistency(&tr.automaton, &tr.examples).is_ok());
    let restricted = TaskKind::Coffee.restricted_alphabet();
    let domain: Vec<ObservationSet> = std::iter::once(ObservationSet::EMPTY)
        .chain(restricted.ids().map(ObservationSet::singleton))
        .collect();
    assert!(
        tr.automaton.equivalent_over(&TaskKind::Coffee.ground_truth(), &domain, 5),
        "{}",
        tr.automaton.to_text()
    );
}
