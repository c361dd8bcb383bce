//! Edge conditions seen through the example pool.
//!
//! Only the pool (the observation sets occurring in the examples plus the
//! empty set) matters to the learner, so every conjunction is reduced to the
//! bitmask of pool entries satisfying it. Conjunctions sharing a mask are
//! interchangeable except for cost and ordering, so the table keeps the
//! cheapest, lexicographically smallest one per mask.

use std::collections::HashMap;

use crate::automaton::Literal;
use crate::traces::{ObsId, ObservationSet};

pub(crate) const INF: u32 = u32::MAX / 4;

/// Largest number of observables allowed to occur in a pool.
pub(crate) const MAX_POOL_OBSERVABLES: usize = 12;

pub(crate) type ConjKey = Vec<Literal>;
pub(crate) type DnfKey = Vec<ConjKey>;

#[derive(Debug, Clone)]
pub(crate) struct Entry {
    pub mask: u128,
    pub cost: u32,
    pub key: ConjKey,
}

/// A disjunction of table entries used as one edge.
#[derive(Debug, Clone)]
pub(crate) struct Dnf {
    pub mask: u128,
    pub cost: u32,
    pub key: DnfKey,
}

pub(crate) struct ConjTable {
    /// Sorted by (cost, key).
    entries: Vec<Entry>,
    k: usize,
    min_cache: HashMap<(u128, u128), u32>,
}

fn pool_mask(pool: &[ObservationSet], pos: u32, neg: u32) -> u128 {
    let mut m = 0u128;
    for (i, o) in pool.iter().enumerate() {
        if o.bits() & pos == pos && o.bits() & neg == 0 {
            m |= 1 << i;
        }
    }
    m
}

fn key_of(pos: u32, neg: u32) -> ConjKey {
    let mut key = Vec::new();
    for b in 0..32u8 {
        if pos >> b & 1 == 1 {
            key.push(Literal {
                obs: ObsId(b),
                negated: false,
            });
        }
        if neg >> b & 1 == 1 {
            key.push(Literal {
                obs: ObsId(b),
                negated: true,
            });
        }
    }
    key
}

impl ConjTable {
    /// `alphabet_bits` is the full alphabet set; fails when too many
    /// observables occur in the pool for exhaustive enumeration.
    pub fn new(pool: &[ObservationSet], alphabet_bits: u32, k: usize) -> Result<Self, usize> {
        let used: u32 = pool.iter().fold(0, |acc, o| acc | o.bits());
        let used_ids: Vec<u32> = (0..32).filter(|b| used >> b & 1 == 1).collect();
        if used_ids.len() > MAX_POOL_OBSERVABLES {
            return Err(used_ids.len());
        }
        let mut best: HashMap<u128, Entry> = HashMap::new();
        let mut offer = |pos: u32, neg: u32| {
            let cost = pos.count_ones() + neg.count_ones();
            let mask = pool_mask(pool, pos, neg);
            let cand = Entry {
                mask,
                cost,
                key: key_of(pos, neg),
            };
            match best.get(&mask) {
                Some(e) if (e.cost, &e.key) <= (cand.cost, &cand.key) => {}
                _ => {
                    best.insert(mask, cand);
                }
            }
        };
        // single literals over the whole alphabet
        for b in 0..32 {
            if alphabet_bits >> b & 1 == 1 {
                offer(1 << b, 0);
                offer(0, 1 << b);
            }
        }
        // Longer conjunctions over observables that occur in the pool; any
        // literal on an absent observable is either constant-false (and a
        // single literal already does that) or redundant.
        let m = used_ids.len();
        let total = 3usize.pow(m as u32);
        for code in 1..total {
            let (mut pos, mut neg, mut c, mut lits) = (0u32, 0u32, code, 0);
            for &b in &used_ids {
                match c % 3 {
                    1 => {
                        pos |= 1 << b;
                        lits += 1;
                    }
                    2 => {
                        neg |= 1 << b;
                        lits += 1;
                    }
                    _ => {}
                }
                c /= 3;
            }
            if lits >= 2 {
                offer(pos, neg);
            }
        }
        let mut entries: Vec<Entry> = best.into_values().collect();
        entries.sort_by(|a, b| (a.cost, &a.key).cmp(&(b.cost, &b.key)));
        Ok(Self {
            entries,
            k,
            min_cache: HashMap::new(),
        })
    }

    #[cfg(test)]
    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    /// Cheapest edge (up to `k` disjuncts) whose pool mask covers `req` and
    /// avoids `forb`; `INF` if none exists.
    pub fn min_cost(&mut self, req: u128, forb: u128) -> u32 {
        if let Some(&c) = self.min_cache.get(&(req, forb)) {
            return c;
        }
        let c = if self.k == 1 || req == 0 {
            self.entries
                .iter()
                .find(|e| e.mask & req == req && e.mask & forb == 0)
                .map_or(INF, |e| e.cost)
        } else {
            let allowed: Vec<&Entry> = self
                .entries
                .iter()
                .filter(|e| e.mask & forb == 0 && e.mask & req != 0)
                .collect();
            let mut best = INF;
            min_cover(&allowed, req, self.k, 0, &mut best);
            best
        };
        self.min_cache.insert((req, forb), c);
        c
    }

    /// Every irredundant edge condition covering `req` and avoiding `forb`,
    /// one per distinct pool mask (the cheapest, then lexicographically
    /// smallest), sorted by key.
    pub fn candidates(&self, req: u128, forb: u128) -> Vec<Dnf> {
        let allowed: Vec<&Entry> = self
            .entries
            .iter()
            .filter(|e| e.mask & forb == 0 && (req == 0 || e.mask & req != 0))
            .collect();
        let k = if req == 0 { 1 } else { self.k };
        let mut best: HashMap<u128, Dnf> = HashMap::new();
        let mut keep = |d: Dnf| match best.get(&d.mask) {
            Some(e) if (e.cost, &e.key) <= (d.cost, &d.key) => {}
            _ => {
                best.insert(d.mask, d);
            }
        };
        let mut chosen: Vec<&Entry> = Vec::new();
        enumerate(&allowed, 0, k, req, &mut chosen, &mut keep);
        let mut out: Vec<Dnf> = best.into_values().collect();
        out.sort_by(|a, b| a.key.cmp(&b.key));
        out
    }
}

fn min_cover(allowed: &[&Entry], uncovered: u128, k: usize, acc: u32, best: &mut u32) {
    if uncovered == 0 {
        *best = (*best).min(acc);
        return;
    }
    if k == 0 || acc + 1 > *best {
        return;
    }
    let bit = uncovered & uncovered.wrapping_neg();
    for e in allowed {
        if e.mask & bit != 0 && acc + e.cost < *best {
            min_cover(allowed, uncovered & !e.mask, k - 1, acc + e.cost, best);
        }
    }
}

fn enumerate<'a, F: FnMut(Dnf)>(
    allowed: &[&'a Entry],
    start: usize,
    k: usize,
    req: u128,
    chosen: &mut Vec<&'a Entry>,
    keep: &mut F,
) {
    if !chosen.is_empty() {
        let mask = chosen.iter().fold(0u128, |m, e| m | e.mask);
        if mask & req == req && irredundant(chosen) {
            let mut key: DnfKey = chosen.iter().map(|e| e.key.clone()).collect();
            key.sort();
            keep(Dnf {
                mask,
                cost: chosen.iter().map(|e| e.cost).sum(),
                key,
            });
        }
    }
    if chosen.len() == k {
        return;
    }
    for i in start..allowed.len() {
        chosen.push(allowed[i]);
        enumerate(allowed, i + 1, k, req, chosen, keep);
        chosen.pop();
    }
}

fn irredundant(chosen: &[&Entry]) -> bool {
    if chosen.len() == 1 {
        return true;
    }
    (0..chosen.len()).all(|i| {
        let others = chosen
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .fold(0u128, |m, (_, e)| m | e.mask);
        chosen[i].mask & !others != 0
    })
}
