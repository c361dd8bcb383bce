//! Exhaustive reference learner for tiny tasks.
//!
//! Enumerates every edge set of every state outright (all conjunctions over
//! the alphabet, all disjunctions of up to `max_edges_per_pair` of them),
//! simulates the examples and keeps the best consistent automaton under the
//! same objective as the main learner. Exponential in everything; meant for
//! alphabets of at most four observables and at most five states.

use std::collections::HashMap;

use super::{automaton_sort_key, check_consistency, expected_verdict, AutomatonLearningTask, EdgeKey};
use crate::automaton::{Condition, Edge, Literal, StateId, SubgoalAutomaton, VerdictKind};
use crate::traces::ObservationSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HypothesisSpace {
    /// Edges between non-terminal states go from lower to higher index.
    Ordered,
    /// Any edge between distinct non-terminal states, as long as the edge
    /// graph stays acyclic.
    AcyclicUnordered,
}

#[derive(Clone)]
struct RowOption {
    cost: usize,
    key: Vec<EdgeKey>,
    edges: Vec<(usize, Vec<Condition>)>,
}

struct Group {
    row: Vec<usize>,
    successors: u32,
    best: RowOption,
}

fn conjunctions(full: u32) -> Vec<Condition> {
    let mut out = Vec::new();
    let mut pos = full;
    loop {
        let rest = full & !pos;
        let mut neg = rest;
        loop {
            if let Ok(c) = Condition::new(ObservationSet(pos), ObservationSet(neg)) {
                out.push(c);
            }
            if neg == 0 {
                break;
            }
            neg = (neg - 1) & rest;
        }
        if pos == 0 {
            break;
        }
        pos = (pos - 1) & full;
    }
    out
}

fn dnfs(conjs: &[Condition], k: usize) -> Vec<Vec<Condition>> {
    fn rec(conjs: &[Condition], start: usize, k: usize, cur: &mut Vec<Condition>, out: &mut Vec<Vec<Condition>>) {
        if !cur.is_empty() {
            out.push(cur.clone());
        }
        if cur.len() == k {
            return;
        }
        for i in start..conjs.len() {
            cur.push(conjs[i]);
            rec(conjs, i + 1, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(conjs, 0, k, &mut Vec::new(), &mut out);
    out
}

fn dnf_mask(d: &[Condition], pool: &[ObservationSet]) -> u128 {
    pool.iter()
        .enumerate()
        .filter(|(_, o)| d.iter().any(|c| c.satisfied_by(**o)))
        .fold(0, |m, (i, _)| m | 1 << i)
}

fn dnf_key(d: &[Condition]) -> Vec<Vec<Literal>> {
    let mut k: Vec<Vec<Literal>> = d.iter().map(Condition::literals).collect();
    k.sort();
    k
}

fn rows_for_state(
    x: usize,
    n: usize,
    space: HypothesisSpace,
    options: &[(Vec<Condition>, u128, usize, Vec<Vec<Literal>>)],
    pool: &[ObservationSet],
) -> Vec<Group> {
    let nt = n - 2;
    let targets: Vec<usize> = match space {
        HypothesisSpace::Ordered => (x + 1..n).collect(),
        HypothesisSpace::AcyclicUnordered => (0..n).filter(|&t| t != x).collect(),
    };
    let mut groups: HashMap<(Vec<usize>, u32), RowOption> = HashMap::new();
    // choice[i] = 0 means no edge to targets[i], otherwise options[choice-1]
    let mut choice = vec![0usize; targets.len()];
    loop {
        let mut i = 0;
        while i < choice.len() {
            choice[i] += 1;
            if choice[i] <= options.len() {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
        if i == choice.len() {
            break;
        }
        let mut used = 0u128;
        let mut ok = true;
        for &c in choice.iter().filter(|&&c| c > 0) {
            let m = options[c - 1].1;
            if m & used != 0 {
                ok = false;
                break;
            }
            used |= m;
        }
        if !ok {
            continue;
        }
        let mut row = vec![x; pool.len()];
        let mut successors = 0u32;
        let mut cost = 0;
        let mut key = Vec::new();
        let mut edges = Vec::new();
        for (ti, &c) in choice.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let (d, m, dc, dk) = &options[c - 1];
            let t = targets[ti];
            for (p, slot) in row.iter_mut().enumerate() {
                if m >> p & 1 == 1 {
                    *slot = t;
                }
            }
            if t < nt {
                successors |= 1 << t;
            }
            cost += dc;
            key.push((StateId(t as u8), dk.clone()));
            edges.push((t, d.clone()));
        }
        let cand = RowOption { cost, key, edges };
        let entry = groups.entry((row, successors)).or_insert_with(|| cand.clone());
        if (cand.cost, &cand.key) < (entry.cost, &entry.key) {
            *entry = cand;
        }
    }
    let mut out: Vec<Group> = groups
        .into_iter()
        .map(|((row, successors), best)| Group {
            row,
            successors,
            best,
        })
        .collect();
    out.sort_by(|a, b| (a.best.cost, &a.best.key).cmp(&(b.best.cost, &b.best.key)));
    out
}

fn acyclic(succ: &[u32]) -> bool {
    let nt = succ.len();
    let mut reach: Vec<u32> = succ.to_vec();
    for _ in 0..nt {
        for x in 0..nt {
            let mut r = reach[x];
            for y in 0..nt {
                if reach[x] >> y & 1 == 1 {
                    r |= reach[y];
                }
            }
            reach[x] = r;
        }
    }
    (0..nt).all(|x| reach[x] >> x & 1 == 0)
}

/// Best automaton with exactly `n` states in the given space, if any.
pub fn solve_fixed_states(task: &AutomatonLearningTask, n: usize, space: HypothesisSpace) -> Option<SubgoalAutomaton> {
    assert!((3..=5).contains(&n), "reference learner supports 3 to 5 states");
    assert!(task.alphabet.len() <= 4, "reference learner supports at most 4 observables");
    let pool = task.pool();
    let index: HashMap<ObservationSet, usize> = pool.iter().enumerate().map(|(i, &o)| (o, i)).collect();
    let traces: Vec<(Vec<usize>, VerdictKind)> = task
        .examples()
        .iter()
        .map(|t| (t.steps().iter().map(|o| index[o]).collect(), expected_verdict(t.label())))
        .collect();
    let options: Vec<_> = dnfs(&conjunctions(task.alphabet.full_set().bits()), task.max_edges_per_pair)
        .into_iter()
        .map(|d| {
            let m = dnf_mask(&d, &pool);
            let c = d.iter().map(Condition::literal_count).sum();
            let k = dnf_key(&d);
            (d, m, c, k)
        })
        .collect();
    let nt = n - 2;
    let groups: Vec<Vec<Group>> = (0..nt).map(|x| rows_for_state(x, n, space, &options, &pool)).collect();

    if groups.iter().any(Vec::is_empty) {
        return None;
    }
    let mut best: Option<(usize, Vec<Vec<EdgeKey>>, Vec<usize>)> = None;
    let mut pick = vec![0usize; nt];
    loop {
        let chosen: Vec<&Group> = (0..nt).map(|x| &groups[x][pick[x]]).collect();
        let succ: Vec<u32> = chosen.iter().map(|g| g.successors).collect();
        if (space == HypothesisSpace::Ordered || acyclic(&succ))
            && traces.iter().all(|(t, want)| simulate(&chosen, t, n) == *want)
        {
            let cost: usize = chosen.iter().map(|g| g.best.cost).sum();
            let key: Vec<Vec<EdgeKey>> = chosen.iter().map(|g| g.best.key.clone()).collect();
            if best.as_ref().is_none_or(|(bc, bk, _)| (cost, &key) < (*bc, bk)) {
                best = Some((cost, key, pick.clone()));
            }
        }
        let mut i = 0;
        while i < nt {
            pick[i] += 1;
            if pick[i] < groups[i].len() {
                break;
            }
            pick[i] = 0;
            i += 1;
        }
        if i == nt {
            break;
        }
    }
    let (_, _, pick) = best?;
    let mut edges = Vec::new();
    for x in 0..nt {
        for (t, d) in &groups[x][pick[x]].best.edges {
            edges.push(Edge {
                from: StateId(x as u8),
                to: StateId(*t as u8),
                disjuncts: d.clone(),
            });
        }
    }
    let a = SubgoalAutomaton::new(task.alphabet.clone(), n, task.max_edges_per_pair, edges).ok()?;
    debug_assert!(check_consistency(&a, task.examples()).is_ok());
    debug_assert_eq!(automaton_sort_key(&a).0, a.literal_count());
    Some(a)
}

fn simulate(chosen: &[&Group], trace: &[usize], n: usize) -> VerdictKind {
    let nt = n - 2;
    let mut u = 0usize;
    for &p in trace {
        if u >= nt {
            break;
        }
        u = chosen[u].row[p];
    }
    match u {
        u if u == n - 2 => VerdictKind::Accepted,
        u if u == n - 1 => VerdictKind::Rejected,
        _ => VerdictKind::Neither,
    }
}

/// Iterates `n = 3..=max` and returns the first solution.
pub fn find_minimal(task: &AutomatonLearningTask, max: usize, space: HypothesisSpace) -> Option<SubgoalAutomaton> {
    (3..=max).find_map(|n| solve_fixed_states(task, n, space))
}
