//! Branch and bound over the transition function restricted to the pool.
//!
//! A hypothesis is first fixed as `delta(X, p)` for every non-terminal state
//! `X` and pool index `p` that some example actually reaches; the examples
//! are simulated through a prefix trie as slots get assigned. Edge
//! conditions are only chosen at the leaves, where each state is solved
//! exactly and independently.

use std::collections::HashMap;

use super::conditions::{ConjTable, Dnf, DnfKey, INF};
use crate::traces::{ExampleSet, ObservationSet, TraceLabel};

const POS: u8 = 1;
const NEG: u8 = 2;
const INC: u8 = 4;

pub(crate) struct Trie {
    obs: Vec<u16>,
    depth: Vec<u16>,
    children: Vec<Vec<u32>>,
    end: Vec<u8>,
    sub: Vec<u8>,
}

impl Trie {
    /// Builds the trie of compressed examples. Returns `None` when one trace
    /// carries two different labels.
    pub fn build(examples: &ExampleSet, index: &HashMap<ObservationSet, usize>) -> Option<Self> {
        let mut t = Trie {
            obs: vec![u16::MAX],
            depth: vec![0],
            children: vec![Vec::new()],
            end: vec![0],
            sub: vec![0],
        };
        let mut parent = vec![u32::MAX];
        for trace in examples.iter() {
            let mut cur = 0usize;
            for o in trace.steps() {
                let p = index[o] as u16;
                let next = t.children[cur].iter().copied().find(|&c| t.obs[c as usize] == p);
                cur = match next {
                    Some(c) => c as usize,
                    None => {
                        let id = t.obs.len();
                        t.obs.push(p);
                        t.depth.push(t.depth[cur] + 1);
                        t.children.push(Vec::new());
                        t.end.push(0);
                        t.sub.push(0);
                        parent.push(cur as u32);
                        t.children[cur].push(id as u32);
                        id
                    }
                };
            }
            t.end[cur] |= match trace.label() {
                TraceLabel::Positive => POS,
                TraceLabel::Negative => NEG,
                TraceLabel::Incomplete => INC,
            };
        }
        if t.end.iter().any(|e| e.count_ones() > 1) {
            return None;
        }
        // children always have larger ids than their parents
        for i in (0..t.obs.len()).rev() {
            t.sub[i] |= t.end[i];
            if i > 0 {
                let p = parent[i] as usize;
                t.sub[p] |= t.sub[i];
            }
        }
        Some(t)
    }

    pub fn len(&self) -> usize {
        self.obs.len()
    }
}

/// Outgoing edges of one state: `(target, condition)` sorted by target.
pub(crate) type Block = Vec<(u8, Dnf)>;

type BlockKey = Vec<(u8, DnfKey)>;

fn block_key(b: &Block) -> BlockKey {
    b.iter().map(|(t, d)| (*t, d.key.clone())).collect()
}

pub(crate) struct Best {
    pub cost: u32,
    key: Vec<BlockKey>,
    pub blocks: Vec<Block>,
}

#[derive(Debug)]
pub(crate) struct BudgetExhausted;

enum Undo {
    Node(u32),
    WaitPush(usize),
    WaitDrain(usize, Vec<u32>),
    Delta(usize),
    Req(usize, usize, u32),
    Lb(usize, u32),
}

pub(crate) struct Search<'a> {
    trie: &'a Trie,
    table: &'a mut ConjTable,
    p: usize,
    n: usize,
    nt: usize,
    delta: Vec<u8>,
    node_state: Vec<u8>,
    waiting: Vec<Vec<u32>>,
    req: Vec<u128>,
    assigned: Vec<u128>,
    lb: Vec<u32>,
    lb_total: u64,
    trail: Vec<Undo>,
    pub nodes: u64,
    pub leaves: u64,
    budget: u64,
    pub best: Option<Best>,
    leaf_memo: HashMap<(usize, Vec<u8>), Option<(u32, Block)>>,
}

const UNSET: u8 = u8::MAX;

impl<'a> Search<'a> {
    pub fn new(trie: &'a Trie, table: &'a mut ConjTable, pool_len: usize, n: usize, budget: u64) -> Self {
        let nt = n - 2;
        let mut s = Search {
            trie,
            table,
            p: pool_len,
            n,
            nt,
            delta: vec![UNSET; nt * pool_len],
            node_state: vec![UNSET; trie.len()],
            waiting: vec![Vec::new(); nt * pool_len],
            req: vec![0; nt * n],
            assigned: vec![0; nt],
            lb: vec![0; nt],
            lb_total: 0,
            trail: Vec::new(),
            nodes: 0,
            leaves: 0,
            budget,
            best: None,
            leaf_memo: HashMap::new(),
        };
        for x in 0..nt {
            let l = s.compute_lb(x);
            s.lb[x] = l;
            s.lb_total += l as u64;
        }
        s
    }

    fn ua(&self) -> u8 {
        (self.n - 2) as u8
    }

    fn ur(&self) -> u8 {
        (self.n - 1) as u8
    }

    fn best_cost(&self) -> u64 {
        self.best.as_ref().map_or(INF as u64 - 1, |b| b.cost as u64)
    }

    pub fn run(&mut self) -> Result<(), BudgetExhausted> {
        if self.lb_total >= INF as u64 {
            return Ok(());
        }
        if !self.set_node(0, 0) {
            return Ok(());
        }
        self.dfs()
    }

    fn dfs(&mut self) -> Result<(), BudgetExhausted> {
        self.nodes += 1;
        if self.nodes > self.budget {
            return Err(BudgetExhausted);
        }
        if self.lb_total > self.best_cost() {
            return Ok(());
        }
        let Some(slot) = self.pick_slot() else {
            self.leaf();
            return Ok(());
        };
        let x = slot / self.p;
        let mut values = vec![x as u8, self.ua(), self.ur()];
        values.extend((x + 1..self.nt).map(|v| v as u8));
        for v in values {
            let mark = self.trail.len();
            if self.assign_slot(slot, v) && self.lb_total <= self.best_cost() {
                self.dfs()?;
            }
            self.undo(mark);
        }
        Ok(())
    }

    fn pick_slot(&self) -> Option<usize> {
        let mut best: Option<(u16, usize, usize)> = None;
        for (slot, w) in self.waiting.iter().enumerate() {
            if w.is_empty() {
                continue;
            }
            let d = w.iter().map(|&c| self.trie.depth[c as usize]).min().unwrap();
            let better = match best {
                None => true,
                Some((bd, bc, _)) => d < bd || (d == bd && w.len() > bc),
            };
            if better {
                best = Some((d, w.len(), slot));
            }
        }
        best.map(|b| b.2)
    }

    fn assign_slot(&mut self, slot: usize, v: u8) -> bool {
        let x = slot / self.p;
        let bit = 1u128 << (slot % self.p);
        self.delta[slot] = v;
        self.trail.push(Undo::Delta(slot));
        self.req[x * self.n + v as usize] |= bit;
        self.assigned[x] |= bit;
        self.trail.push(Undo::Req(x, v as usize, (slot % self.p) as u32));
        let old = self.lb[x];
        let new = self.compute_lb(x);
        self.trail.push(Undo::Lb(x, old));
        self.lb[x] = new;
        self.lb_total = self.lb_total - old as u64 + new as u64;
        if new >= INF {
            return false;
        }
        let list = std::mem::take(&mut self.waiting[slot]);
        let mut ok = true;
        for &c in &list {
            if !self.set_node(c, v) {
                ok = false;
                break;
            }
        }
        self.trail.push(Undo::WaitDrain(slot, list));
        ok
    }

    fn set_node(&mut self, start: u32, state: u8) -> bool {
        let mut work = vec![(start, state)];
        while let Some((c, s)) = work.pop() {
            let ci = c as usize;
            self.node_state[ci] = s;
            self.trail.push(Undo::Node(c));
            let sub = self.trie.sub[ci];
            if s == self.ua() {
                if sub & (NEG | INC) != 0 {
                    return false;
                }
                continue;
            }
            if s == self.ur() {
                if sub & (POS | INC) != 0 {
                    return false;
                }
                continue;
            }
            if self.trie.end[ci] & (POS | NEG) != 0 {
                return false;
            }
            for &ch in &self.trie.children[ci] {
                let slot = s as usize * self.p + self.trie.obs[ch as usize] as usize;
                let d = self.delta[slot];
                if d != UNSET {
                    work.push((ch, d));
                } else {
                    self.waiting[slot].push(ch);
                    self.trail.push(Undo::WaitPush(slot));
                }
            }
        }
        true
    }

    fn undo(&mut self, mark: usize) {
        while self.trail.len() > mark {
            match self.trail.pop().unwrap() {
                Undo::Node(c) => self.node_state[c as usize] = UNSET,
                Undo::WaitPush(slot) => {
                    self.waiting[slot].pop();
                }
                Undo::WaitDrain(slot, list) => self.waiting[slot] = list,
                Undo::Delta(slot) => self.delta[slot] = UNSET,
                Undo::Req(x, v, p) => {
                    let bit = !(1u128 << p);
                    self.req[x * self.n + v] &= bit;
                    self.assigned[x] &= bit;
                }
                Undo::Lb(x, old) => {
                    self.lb_total = self.lb_total - self.lb[x] as u64 + old as u64;
                    self.lb[x] = old;
                }
            }
        }
    }

    fn compute_lb(&mut self, x: usize) -> u32 {
        let all = self.assigned[x];
        let mut total = 0u32;
        let mut any = false;
        for v in x + 1..self.n {
            let r = self.req[x * self.n + v];
            if r == 0 {
                continue;
            }
            any = true;
            let c = self.table.min_cost(r, all & !r);
            if c >= INF {
                return INF;
            }
            total += c;
        }
        if any {
            total
        } else {
            self.table.min_cost(0, all)
        }
    }

    fn leaf(&mut self) {
        self.leaves += 1;
        let bound = self.best_cost();
        let mut blocks = Vec::with_capacity(self.nt);
        let mut cost = 0u32;
        for x in 0..self.nt {
            let rest: u64 = self.lb[x + 1..].iter().map(|&l| l as u64).sum();
            let Some((c, b)) = self.solve_state(x) else {
                return;
            };
            cost += c;
            if cost as u64 + rest > bound {
                return;
            }
            blocks.push(b);
        }
        let key: Vec<BlockKey> = blocks.iter().map(block_key).collect();
        let better = match &self.best {
            None => true,
            Some(b) => cost < b.cost || (cost == b.cost && key < b.key),
        };
        if better {
            self.best = Some(Best { cost, key, blocks });
        }
    }

    fn solve_state(&mut self, x: usize) -> Option<(u32, Block)> {
        let row = self.delta[x * self.p..(x + 1) * self.p].to_vec();
        if let Some(r) = self.leaf_memo.get(&(x, row.clone())) {
            return r.clone();
        }
        let r = self.solve_state_uncached(x);
        self.leaf_memo.insert((x, row), r.clone());
        r
    }

    fn solve_state_uncached(&mut self, x: usize) -> Option<(u32, Block)> {
        let all = self.assigned[x];
        let targets: Vec<(u8, u128)> = (x + 1..self.n)
            .map(|v| (v as u8, self.req[x * self.n + v]))
            .filter(|&(_, r)| r != 0)
            .collect();
        if targets.is_empty() {
            let filler = self.table.candidates(0, all);
            let best = filler.into_iter().min_by(|a, b| (a.cost, &a.key).cmp(&(b.cost, &b.key)))?;
            return Some((best.cost, vec![((x + 1) as u8, best)]));
        }
        let lists: Vec<Vec<Dnf>> = targets
            .iter()
            .map(|&(_, r)| self.table.candidates(r, all & !r))
            .collect();
        if lists.iter().any(Vec::is_empty) {
            return None;
        }
        let mins: Vec<u32> = lists.iter().map(|l| l.iter().map(|d| d.cost).min().unwrap()).collect();
        let maxs: u32 = lists.iter().map(|l| l.iter().map(|d| d.cost).max().unwrap()).sum();
        let mut suffix = vec![0u32; lists.len() + 1];
        for i in (0..lists.len()).rev() {
            suffix[i] = suffix[i + 1] + mins[i];
        }
        let mut picked = Vec::with_capacity(lists.len());
        for budget in suffix[0]..=maxs {
            if pick(&lists, &suffix, 0, 0, 0, budget, &mut picked) {
                let block: Block = targets
                    .iter()
                    .zip(&lists)
                    .zip(&picked)
                    .map(|((&(t, _), l), &j)| (t, l[j].clone()))
                    .collect();
                return Some((budget, block));
            }
        }
        None
    }
}

/// Depth-first choice of one candidate per target in key order; the first
/// complete choice with cost within `budget` is the lexicographically
/// smallest one.
fn pick(
    lists: &[Vec<Dnf>],
    suffix: &[u32],
    i: usize,
    used: u128,
    cost: u32,
    budget: u32,
    picked: &mut Vec<usize>,
) -> bool {
    if i == lists.len() {
        return true;
    }
    for (j, d) in lists[i].iter().enumerate() {
        if d.mask & used != 0 || cost + d.cost + suffix[i + 1] > budget {
            continue;
        }
        picked.push(j);
        if pick(lists, suffix, i + 1, used | d.mask, cost + d.cost, budget, picked) {
            return true;
        }
        picked.pop();
    }
    false
}
