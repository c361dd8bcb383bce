use std::collections::{HashSet, VecDeque};

use super::*;
use crate::automaton::StateId;
use crate::traces::{label_from_outcome, ExecutionTrace, TraceLabel};

fn layout() -> GridLayout {
    GridLayout::default_layout()
}

#[test]
fn default_layout_matches_map() {
    let l = layout();
    assert_eq!((l.width(), l.height()), (12, 9));
    assert_eq!(l.start(), Cell::new(4, 6));
    assert_eq!(l.placements(Item::Coffee), vec![Cell::new(3, 6)]);
    assert_eq!(l.placements(Item::Mail), vec![Cell::new(7, 4)]);
    assert_eq!(l.placements(Item::Office), vec![Cell::new(4, 4)]);
    assert_eq!(l.placements(Item::A), vec![Cell::new(1, 1)]);
    assert_eq!(l.placements(Item::B), vec![Cell::new(10, 1)]);
    assert_eq!(l.placements(Item::C), vec![Cell::new(10, 7)]);
    assert_eq!(l.placements(Item::D), vec![Cell::new(1, 7)]);
    assert_eq!(l.placements(Item::Decoration).len(), 6);
    assert!(l.items_reachable());
    assert_eq!(GridLayout::parse(&l.to_map_text()).unwrap(), l);
}

#[test]
fn walls_block_moves() {
    let l = layout();
    // room boundary between x=2 and x=3 at y=6
    assert_eq!(l.neighbor(Cell::new(3, 6), Action::Left), Cell::new(3, 6));
    // doorway at y=7
    assert_eq!(l.neighbor(Cell::new(3, 7), Action::Left), Cell::new(2, 7));
    // border
    assert_eq!(l.neighbor(Cell::new(0, 0), Action::Down), Cell::new(0, 0));
    assert_eq!(l.neighbor(Cell::new(11, 8), Action::Right), Cell::new(11, 8));
    // horizontal wall between y=5 and y=6 except at doorways
    assert_eq!(l.neighbor(Cell::new(3, 6), Action::Down), Cell::new(3, 6));
    assert_eq!(l.neighbor(Cell::new(4, 6), Action::Down), Cell::new(4, 5));
}

#[test]
fn reset_examples() {
    let l = layout();
    let s = reset(&l, TaskKind::Coffee);
    assert_eq!(s.cell, l.start());
    assert!(!s.has_coffee && !s.has_mail);
    assert_eq!(s.status, EpisodeStatus::Alive);

    let mut items = vec![None; 3];
    items[0] = Some(Item::Decoration);
    items[2] = Some(Item::Office);
    let on_deco = GridLayout::new(3, 1, items.clone(), Cell::new(0, 0), []).unwrap();
    assert_eq!(reset(&on_deco, TaskKind::Coffee).status, EpisodeStatus::DeadEnd);
    let on_office = GridLayout::new(3, 1, items, Cell::new(2, 0), []).unwrap();
    assert_eq!(reset(&on_office, TaskKind::Coffee).status, EpisodeStatus::Alive);
}

/// Shortest action sequence between two cells that avoids the given items.
fn path(l: &GridLayout, from: Cell, to: Cell, avoid: &[Item]) -> Vec<Action> {
    let mut prev = vec![None; l.num_cells()];
    let mut queue = VecDeque::from([from]);
    let mut seen = vec![false; l.num_cells()];
    seen[l.index(from)] = true;
    while let Some(c) = queue.pop_front() {
        if c == to {
            break;
        }
        for a in Action::ALL {
            let n = l.neighbor(c, a);
            let blocked = l.item_at(n).is_some_and(|i| avoid.contains(&i)) && n != to;
            if !seen[l.index(n)] && !blocked {
                seen[l.index(n)] = true;
                prev[l.index(n)] = Some((c, a));
                queue.push_back(n);
            }
        }
    }
    let mut out = Vec::new();
    let mut c = to;
    while c != from {
        let (p, a) = prev[l.index(c)].expect("target reachable");
        out.push(a);
        c = p;
    }
    out.reverse();
    out
}

#[test]
fn execution_trace_from_figure() {
    let l = layout();
    let task = TaskKind::Coffee;
    let alphabet = task.restricted_alphabet();
    let labeler = Labeler::new(&l, &alphabet);
    let mut s = reset(&l, task);
    let mut exec = ExecutionTrace::new(s);
    let mut rewards = Vec::new();
    for a in [Action::Left, Action::Right, Action::Down, Action::Down] {
        let (n, r) = env_step(&l, task, &s, a).unwrap();
        exec.push(a, r, n);
        rewards.push(r);
        s = n;
    }
    assert_eq!(rewards, vec![0.0, 0.0, 0.0, 1.0]);
    assert_eq!(s.status, EpisodeStatus::Goal);
    assert!(exec.rewards_well_formed(true));
    let trace = exec.observation_trace(|s| labeler.label(s), s.status);
    let c = alphabet.set_of(["coffee"]).unwrap();
    let o = alphabet.set_of(["office"]).unwrap();
    let e = ObservationSet::EMPTY;
    assert_eq!(trace.steps(), &[e, c, e, e, o]);
    assert_eq!(trace.label(), TraceLabel::Positive);
    assert_eq!(trace.compress().steps(), &[e, c, e, o]);
    assert_eq!(
        env_step(&l, task, &s, Action::Up),
        Err(EnvError::SteppingTerminal(EpisodeStatus::Goal))
    );
}

#[test]
fn labeling_examples() {
    let l = layout();
    let full = full_alphabet();
    let lab = Labeler::new(&l, &full);
    assert_eq!(lab.label_cell(Cell::new(3, 6)), full.set_of(["coffee"]).unwrap());
    assert_eq!(lab.label_cell(Cell::new(4, 4)), full.set_of(["office"]).unwrap());
    assert_eq!(lab.label_cell(Cell::new(5, 5)), ObservationSet::EMPTY);
    // mail is invisible to the coffee task's alphabet
    let restricted = Labeler::new(&l, &TaskKind::Coffee.restricted_alphabet());
    assert_eq!(restricted.label_cell(Cell::new(7, 4)), ObservationSet::EMPTY);
}

#[test]
fn out_of_order_landmark_does_not_advance() {
    let l = layout();
    let task = TaskKind::VisitAbcd;
    let mut s = reset(&l, task);
    let avoid = [Item::Decoration, Item::A, Item::C, Item::D];
    let steps = path(&l, s.cell, Cell::new(10, 1), &avoid);
    for a in steps {
        s = env_step(&l, task, &s, a).unwrap().0;
        assert_eq!(s.status, EpisodeStatus::Alive);
    }
    // now at (10,1) = B
    assert_eq!(s.cell, Cell::new(10, 1));
    assert_eq!(s.progress, 0);
}

#[test]
fn wall_move_keeps_position() {
    let l = layout();
    let s = reset(&l, TaskKind::Coffee);
    let (n, r) = env_step(&l, TaskKind::Coffee, &s, Action::Up).unwrap();
    assert_eq!(n.cell, Cell::new(4, 7));
    // (4,7) is a decoration
    assert_eq!(n.status, EpisodeStatus::DeadEnd);
    assert_eq!(r, 0.0);
    let coffee = Cell::new(3, 6);
    let s = EnvState { cell: coffee, ..s };
    let (n, _) = env_step(&l, TaskKind::Coffee, &s, Action::Left).unwrap();
    assert_eq!(n.cell, coffee);
}

/// Breadth-first sweep of the product of environment and ground-truth
/// automaton; every reachable observation must step deterministically and
/// the automaton must track goal and dead-end exactly.
fn sweep(l: &GridLayout, task: TaskKind) -> usize {
    let a = task.ground_truth();
    let lab = Labeler::new(l, &task.restricted_alphabet());
    let s0 = reset(l, task);
    let u0 = a.step(a.initial_state(), lab.label(&s0)).unwrap();
    let mut seen: HashSet<(EnvState, StateId)> = HashSet::from([(s0, u0)]);
    let mut queue = VecDeque::from([(s0, u0)]);
    while let Some((s, u)) = queue.pop_front() {
        assert_eq!(s.status == EpisodeStatus::Goal, u == a.accepting(), "{task} {s:?} {u:?}");
        assert_eq!(s.status == EpisodeStatus::DeadEnd, u == a.rejecting(), "{task} {s:?} {u:?}");
        if s.is_terminal() {
            continue;
        }
        for act in Action::ALL {
            let (n, _) = env_step(l, task, &s, act).unwrap();
            let v = a
                .step(u, lab.label(&n))
                .unwrap_or_else(|e| panic!("{task}: {e:?} at {n:?}"));
            if seen.insert((n, v)) {
                queue.push_back((n, v));
            }
        }
    }
    seen.len()
}

#[test]
fn ground_truths_are_deterministic_on_reachable_states() {
    let l = layout();
    for task in TaskKind::ALL {
        assert!(sweep(&l, task) > 100);
    }
    for seed in 0..20 {
        let g = random_grid(&l, seed);
        for task in TaskKind::ALL {
            sweep(&g, task);
        }
    }
}

#[test]
fn observation_trace_label_matches_outcome() {
    let l = layout();
    for task in TaskKind::ALL {
        let lab = Labeler::new(&l, &full_alphabet());
        let mut s = reset(&l, task);
        let mut exec = ExecutionTrace::new(s);
        let mut i = 0usize;
        while !s.is_terminal() && exec.transitions.len() < 60 {
            let act = Action::from_index((i * 7 + i / 3) % 4);
            let (n, r) = env_step(&l, task, &s, act).unwrap();
            exec.push(act, r, n);
            s = n;
            i += 1;
        }
        let t = exec.observation_trace(|s| lab.label(s), s.status);
        assert_eq!(t.label(), label_from_outcome(s.status));
        assert_eq!(t.len(), exec.transitions.len() + 1);
        assert!(exec.rewards_well_formed(s.status == EpisodeStatus::Goal));
    }
}

#[test]
fn random_grid_is_deterministic() {
    let l = layout();
    assert_eq!(random_grid(&l, 7), random_grid(&l, 7));
}

#[test]
fn random_grid_invariants() {
    let base = layout();
    let mut distinct = HashSet::new();
    for seed in 0..1000 {
        let g = random_grid(&base, seed);
        assert_eq!((g.width(), g.height()), (12, 9));
        assert!(g.walls().eq(base.walls()));
        for item in Item::ALL {
            assert_eq!(g.placements(item).len(), base.placements(item).len());
        }
        assert_eq!(g.item_at(g.start()), None);
        assert!(g.items_reachable());
        distinct.insert(g.to_map_text());
    }
    let collisions = 1000 - distinct.len();
    assert!(collisions < 5, "{collisions} collisions");
}

#[test]
fn ground_truth_alphabets() {
    for task in TaskKind::ALL {
        let a = task.ground_truth();
        assert_eq!(a.alphabet(), &task.restricted_alphabet());
        assert!(a.is_index_ordered());
        assert_eq!(task.name().parse::<TaskKind>().unwrap(), task);
    }
    assert_eq!(TaskKind::Coffee.ground_truth().num_states(), 4);
    assert_eq!(TaskKind::CoffeeMail.ground_truth().num_states(), 6);
    assert_eq!(TaskKind::VisitAbcd.ground_truth().num_states(), 6);
    assert!("tea".parse::<TaskKind>().is_err());
}

#[test]
fn map_parse_errors() {
    assert_eq!(GridLayout::parse(""), Err(LayoutError::Empty));
    assert_eq!(GridLayout::parse("..\n..\n"), Err(LayoutError::Start(0)));
    assert!(matches!(GridLayout::parse("S.\n.\n"), Err(LayoutError::Ragged { .. })));
    assert!(matches!(
        GridLayout::parse("S?\n"),
        Err(LayoutError::Parse { line: 1, .. })
    ));
    assert!(matches!(
        GridLayout::parse("S.\n..\nwall: (0,0)-(1,1)\n"),
        Err(LayoutError::BadWall(0, 0, 1, 1))
    ));
}
