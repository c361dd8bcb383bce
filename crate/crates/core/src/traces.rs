//! Observables, observation sets and traces.
//!
//! Observables are interned: an [`Alphabet`] owns the symbol strings and an
//! [`ObservationSet`] is a bitmask over alphabet positions. Every text format
//! in the crate goes through the alphabet, so ids never leak into files.

use std::fmt;

use thiserror::Error;

/// Largest alphabet an [`ObservationSet`] bitmask can address.
pub const MAX_ALPHABET: usize = 32;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TraceError {
    #[error("observable symbols must be nonempty")]
    EmptySymbol,
    #[error("invalid observable symbol `{0}`")]
    InvalidSymbol(String),
    #[error("duplicate observable symbol `{0}`")]
    DuplicateSymbol(String),
    #[error("alphabet has {0} symbols, at most {MAX_ALPHABET} are supported")]
    AlphabetTooLarge(usize),
    #[error("unknown observable `{0}`")]
    UnknownSymbol(String),
    #[error("an observation trace needs at least one step")]
    EmptyTrace,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Position of an observable inside its [`Alphabet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ObsId(pub u8);

/// Ordered set of unique observable symbols.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Alphabet {
    symbols: Vec<String>,
}

fn valid_symbol(s: &str) -> bool {
    s.chars()
        .all(|c| c.is_alphanumeric() || c == '_' || c == '-' || c == '.')
        && !s.starts_with('-')
}

impl Alphabet {
    pub fn new<I, S>(symbols: I) -> Result<Self, TraceError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut out: Vec<String> = Vec::new();
        for s in symbols {
            let s = s.into();
            if s.is_empty() {
                return Err(TraceError::EmptySymbol);
            }
            if !valid_symbol(&s) {
                return Err(TraceError::InvalidSymbol(s));
            }
            if out.contains(&s) {
                return Err(TraceError::DuplicateSymbol(s));
            }
            out.push(s);
        }
        if out.len() > MAX_ALPHABET {
            return Err(TraceError::AlphabetTooLarge(out.len()));
        }
        Ok(Self { symbols: out })
    }

    /// Parses a comma separated symbol list such as `coffee,office,deco`.
    pub fn parse_list(list: &str) -> Result<Self, TraceError> {
        Self::new(list.split(',').map(str::trim).filter(|s| !s.is_empty()))
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> impl Iterator<Item = &str> {
        self.symbols.iter().map(String::as_str)
    }

    pub fn symbol(&self, id: ObsId) -> &str {
        &self.symbols[id.0 as usize]
    }

    pub fn id(&self, symbol: &str) -> Option<ObsId> {
        self.symbols
            .iter()
            .position(|s| s == symbol)
            .map(|i| ObsId(i as u8))
    }

    pub fn ids(&self) -> impl Iterator<Item = ObsId> {
        (0..self.symbols.len() as u8).map(ObsId)
    }

    /// The set containing every observable of the alphabet.
    pub fn full_set(&self) -> ObservationSet {
        if self.symbols.len() == MAX_ALPHABET {
            ObservationSet(u32::MAX)
        } else {
            ObservationSet((1u32 << self.symbols.len()) - 1)
        }
    }

    pub fn set_of<'a, I>(&self, symbols: I) -> Result<ObservationSet, TraceError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut set = ObservationSet::EMPTY;
        for s in symbols {
            let id = self
                .id(s)
                .ok_or_else(|| TraceError::UnknownSymbol(s.to_string()))?;
            set.insert(id);
        }
        Ok(set)
    }

    /// Every subset of the alphabet, in increasing bitmask order.
    pub fn all_sets(&self) -> Vec<ObservationSet> {
        (0..=self.full_set().0 as u64)
            .map(|m| ObservationSet(m as u32))
            .collect()
    }

    /// Formats a set as `{a,b}` with members in alphabet order.
    pub fn format_set(&self, set: ObservationSet) -> String {
        let names: Vec<&str> = set.iter().map(|id| self.symbol(id)).collect();
        format!("{{{}}}", names.join(","))
    }

    /// Parses `{a,b}` (whitespace tolerant); `{}` is the empty set.
    pub fn parse_set(&self, text: &str) -> Result<ObservationSet, String> {
        let t = text.trim();
        let inner = t
            .strip_prefix('{')
            .and_then(|r| r.strip_suffix('}'))
            .ok_or_else(|| format!("expected `{{...}}`, found `{t}`"))?;
        let mut set = ObservationSet::EMPTY;
        for sym in inner.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let id = self
                .id(sym)
                .ok_or_else(|| format!("unknown observable `{sym}`"))?;
            set.insert(id);
        }
        Ok(set)
    }
}

impl fmt::Display for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.symbols.join(","))
    }
}

/// A subset of an alphabet, stored as a bitmask over [`ObsId`]s.
///
/// Equality is set equality; the order observables were inserted in is
/// irrelevant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct ObservationSet(pub u32);

impl ObservationSet {
    pub const EMPTY: ObservationSet = ObservationSet(0);

    pub fn singleton(id: ObsId) -> Self {
        ObservationSet(1 << id.0)
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn contains(self, id: ObsId) -> bool {
        self.0 & (1 << id.0) != 0
    }

    pub fn insert(&mut self, id: ObsId) {
        self.0 |= 1 << id.0;
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_subset(self, other: ObservationSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_disjoint(self, other: ObservationSet) -> bool {
        self.0 & other.0 == 0
    }

    pub fn union(self, other: ObservationSet) -> Self {
        ObservationSet(self.0 | other.0)
    }

    pub fn intersection(self, other: ObservationSet) -> Self {
        ObservationSet(self.0 & other.0)
    }

    pub fn difference(self, other: ObservationSet) -> Self {
        ObservationSet(self.0 & !other.0)
    }

    pub fn iter(self) -> impl Iterator<Item = ObsId> {
        (0..32u8).filter(move |i| self.0 & (1 << i) != 0).map(ObsId)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TraceLabel {
    Positive,
    Negative,
    Incomplete,
}

impl TraceLabel {
    pub const ALL: [TraceLabel; 3] = [
        TraceLabel::Positive,
        TraceLabel::Negative,
        TraceLabel::Incomplete,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TraceLabel::Positive => "+",
            TraceLabel::Negative => "-",
            TraceLabel::Incomplete => "I",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "+" => Some(TraceLabel::Positive),
            "-" => Some(TraceLabel::Negative),
            "I" => Some(TraceLabel::Incomplete),
            _ => None,
        }
    }
}

impl fmt::Display for TraceLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Status of the MDP state an episode ended in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EpisodeStatus {
    Alive,
    Goal,
    DeadEnd,
}

impl EpisodeStatus {
    pub fn is_terminal(self) -> bool {
        self != EpisodeStatus::Alive
    }
}

pub fn label_from_outcome(status: EpisodeStatus) -> TraceLabel {
    match status {
        EpisodeStatus::Goal => TraceLabel::Positive,
        EpisodeStatus::DeadEnd => TraceLabel::Negative,
        EpisodeStatus::Alive => TraceLabel::Incomplete,
    }
}

/// A labeled sequence of observation sets, one per visited MDP state.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ObservationTrace {
    steps: Vec<ObservationSet>,
    label: TraceLabel,
}

impl ObservationTrace {
    pub fn new(steps: Vec<ObservationSet>, label: TraceLabel) -> Result<Self, TraceError> {
        if steps.is_empty() {
            return Err(TraceError::EmptyTrace);
        }
        Ok(Self { steps, label })
    }

    pub fn steps(&self) -> &[ObservationSet] {
        &self.steps
    }

    pub fn label(&self) -> TraceLabel {
        self.label
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn with_label(mut self, label: TraceLabel) -> Self {
        self.label = label;
        self
    }

    pub fn is_compressed(&self) -> bool {
        self.steps.windows(2).all(|w| w[0] != w[1])
    }

    /// Removes contiguous duplicated observation sets.
    pub fn compress(&self) -> ObservationTrace {
        let mut steps = self.steps.clone();
        steps.dedup();
        ObservationTrace {
            steps,
            label: self.label,
        }
    }

    pub fn format(&self, alphabet: &Alphabet) -> String {
        let mut out = String::from(self.label.as_str());
        for s in &self.steps {
            out.push_str("; ");
            out.push_str(&alphabet.format_set(*s));
        }
        out
    }

    /// Parses one line of the trace file format: `+; {a,b}; {}; {c}`.
    pub fn parse(line: &str, alphabet: &Alphabet) -> Result<Self, String> {
        let mut parts = line.split(';');
        let head = parts.next().unwrap_or("");
        let label = TraceLabel::parse(head)
            .ok_or_else(|| format!("expected label `+`, `-` or `I`, found `{}`", head.trim()))?;
        let steps = parts
            .map(|p| alphabet.parse_set(p))
            .collect::<Result<Vec<_>, _>>()?;
        ObservationTrace::new(steps, label).map_err(|e| e.to_string())
    }
}

/// Parses a whole trace file. Blank lines and `#` comments are skipped.
pub fn parse_traces(text: &str, alphabet: &Alphabet) -> Result<Vec<ObservationTrace>, TraceError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let trace = ObservationTrace::parse(line, alphabet).map_err(|message| TraceError::Parse {
            line: i + 1,
            message,
        })?;
        out.push(trace);
    }
    Ok(out)
}

pub fn format_traces<'a, I>(traces: I, alphabet: &Alphabet) -> String
where
    I: IntoIterator<Item = &'a ObservationTrace>,
{
    let mut out = String::new();
    for t in traces {
        out.push_str(&t.format(alphabet));
        out.push('\n');
    }
    out
}

/// `s_0, a_0, r_1, s_1, ..., a_{n-1}, r_n, s_n` for an arbitrary MDP.
#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionTrace<S, A> {
    pub transitions: Vec<(S, A, f64)>,
    pub last: S,
}

impl<S: Clone, A> ExecutionTrace<S, A> {
    pub fn new(initial: S) -> Self {
        Self {
            transitions: Vec::new(),
            last: initial,
        }
    }

    pub fn push(&mut self, action: A, reward: f64, next: S) {
        let prev = std::mem::replace(&mut self.last, next);
        self.transitions.push((prev, action, reward));
    }

    pub fn states(&self) -> impl Iterator<Item = &S> {
        self.transitions
            .iter()
            .map(|(s, _, _)| s)
            .chain(std::iter::once(&self.last))
    }

    /// True when every reward is 0 except possibly the last one, which is 1
    /// exactly when the final state is a goal.
    pub fn rewards_well_formed(&self, final_is_goal: bool) -> bool {
        let n = self.transitions.len();
        self.transitions.iter().enumerate().all(|(i, (_, _, r))| {
            if i + 1 == n {
                *r == if final_is_goal { 1.0 } else { 0.0 }
            } else {
                *r == 0.0
            }
        })
    }

    pub fn observation_trace<L>(&self, labeling: L, status: EpisodeStatus) -> ObservationTrace
    where
        L: Fn(&S) -> ObservationSet,
    {
        ObservationTrace {
            steps: self.states().map(labeling).collect(),
            label: label_from_outcome(status),
        }
    }
}

/// Positive, negative and incomplete example traces without duplicates
/// inside a label class.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExampleSet {
    positive: Vec<ObservationTrace>,
    negative: Vec<ObservationTrace>,
    incomplete: Vec<ObservationTrace>,
}

impl ExampleSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_traces<I: IntoIterator<Item = ObservationTrace>>(traces: I) -> Self {
        let mut set = Self::new();
        for t in traces {
            set.insert(t);
        }
        set
    }

    fn class_mut(&mut self, label: TraceLabel) -> &mut Vec<ObservationTrace> {
        match label {
            TraceLabel::Positive => &mut self.positive,
            TraceLabel::Negative => &mut self.negative,
            TraceLabel::Incomplete => &mut self.incomplete,
        }
    }

    pub fn class(&self, label: TraceLabel) -> &[ObservationTrace] {
        match label {
            TraceLabel::Positive => &self.positive,
            TraceLabel::Negative => &self.negative,
            TraceLabel::Incomplete => &self.incomplete,
        }
    }

    pub fn positive(&self) -> &[ObservationTrace] {
        &self.positive
    }

    pub fn negative(&self) -> &[ObservationTrace] {
        &self.negative
    }

    pub fn incomplete(&self) -> &[ObservationTrace] {
        &self.incomplete
    }

    /// Inserts the trace under its label. Returns false if it was present.
    pub fn insert(&mut self, trace: ObservationTrace) -> bool {
        let class = self.class_mut(trace.label);
        if class.contains(&trace) {
            return false;
        }
        class.push(trace);
        true
    }

    pub fn contains(&self, trace: &ObservationTrace) -> bool {
        self.class(trace.label).contains(trace)
    }

    pub fn len(&self) -> usize {
        self.positive.len() + self.negative.len() + self.incomplete.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(positive, negative, incomplete)` counts.
    pub fn counts(&self) -> (usize, usize, usize) {
        (self.positive.len(), self.negative.len(), self.incomplete.len())
    }

    pub fn iter(&self) -> impl Iterator<Item = &ObservationTrace> {
        self.positive
            .iter()
            .chain(&self.negative)
            .chain(&self.incomplete)
    }

    /// Step sequences stored under more than one label.
    pub fn conflicts(&self) -> Vec<Vec<ObservationSet>> {
        let mut out = Vec::new();
        for (i, a) in TraceLabel::ALL.iter().enumerate() {
            for b in &TraceLabel::ALL[i + 1..] {
                for t in self.class(*a) {
                    if self.class(*b).iter().any(|u| u.steps == t.steps)
                        && !out.contains(&t.steps)
                    {
                        out.push(t.steps.clone());
                    }
                }
            }
        }
        out
    }

    /// Union of all observation sets used by the examples.
    pub fn observed_symbols(&self) -> ObservationSet {
        self.iter()
            .flat_map(|t| t.steps.iter().copied())
            .fold(ObservationSet::EMPTY, ObservationSet::union)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn office() -> Alphabet {
        Alphabet::new(["coffee", "mail", "office", "A", "B", "C", "D", "deco"]).unwrap()
    }

    fn sets(a: &Alphabet, items: &[&[&str]]) -> Vec<ObservationSet> {
        items
            .iter()
            .map(|s| a.set_of(s.iter().copied()).unwrap())
            .collect()
    }

    #[test]
    fn compress_coffee_trace() {
        let a = office();
        let raw = sets(&a, &[&[], &["coffee"], &[], &[], &["office"]]);
        let t = ObservationTrace::new(raw, TraceLabel::Positive).unwrap();
        let c = t.compress();
        assert_eq!(
            c.steps(),
            sets(&a, &[&[], &["coffee"], &[], &["office"]]).as_slice()
        );
        assert_eq!(c.label(), TraceLabel::Positive);
    }

    #[test]
    fn compress_degenerate() {
        let a = office();
        let single = ObservationTrace::new(vec![ObservationSet::EMPTY], TraceLabel::Incomplete).unwrap();
        assert_eq!(single.compress(), single);
        let all = ObservationTrace::new(sets(&a, &[&["A"], &["A"], &["A"]]), TraceLabel::Negative).unwrap();
        assert_eq!(all.compress().steps(), sets(&a, &[&["A"]]).as_slice());
    }

    #[test]
    fn empty_trace_rejected() {
        assert_eq!(
            ObservationTrace::new(vec![], TraceLabel::Positive),
            Err(TraceError::EmptyTrace)
        );
    }

    #[test]
    fn labels_from_outcome() {
        assert_eq!(label_from_outcome(EpisodeStatus::Goal), TraceLabel::Positive);
        assert_eq!(label_from_outcome(EpisodeStatus::DeadEnd), TraceLabel::Negative);
        assert_eq!(label_from_outcome(EpisodeStatus::Alive), TraceLabel::Incomplete);
    }

    #[test]
    fn set_equality_ignores_insertion_order() {
        let a = office();
        assert_eq!(
            a.set_of(["mail", "coffee"]).unwrap(),
            a.set_of(["coffee", "mail"]).unwrap()
        );
    }

    #[test]
    fn alphabet_validation() {
        assert_eq!(Alphabet::new(["a", "a"]), Err(TraceError::DuplicateSymbol("a".into())));
        assert_eq!(Alphabet::new([""]), Err(TraceError::EmptySymbol));
        assert!(matches!(Alphabet::new(["a{"]), Err(TraceError::InvalidSymbol(_))));
        let many: Vec<String> = (0..33).map(|i| format!("o{i}")).collect();
        assert_eq!(Alphabet::new(many), Err(TraceError::AlphabetTooLarge(33)));
    }

    #[test]
    fn trace_line_format() {
        let a = office();
        let t = ObservationTrace::parse("+; {}; {coffee}; {} ; {office, deco}", &a).unwrap();
        assert_eq!(t.label(), TraceLabel::Positive);
        assert_eq!(t.len(), 4);
        assert_eq!(t.format(&a), "+; {}; {coffee}; {}; {office,deco}");
        assert!(ObservationTrace::parse("?; {}", &a).is_err());
        assert!(ObservationTrace::parse("+; {tea}", &a).is_err());
        assert!(ObservationTrace::parse("+", &a).is_err());
        let err = parse_traces("# header\n-; {deco}\nI; {x}\n", &a).unwrap_err();
        assert!(matches!(err, TraceError::Parse { line: 3, .. }));
    }

    #[test]
    fn example_set_dedup_and_conflicts() {
        let a = office();
        let mut ex = ExampleSet::new();
        let t = ObservationTrace::new(sets(&a, &[&["A"]]), TraceLabel::Positive).unwrap();
        assert!(ex.insert(t.clone()));
        assert!(!ex.insert(t.clone()));
        assert!(ex.conflicts().is_empty());
        ex.insert(t.with_label(TraceLabel::Negative));
        assert_eq!(ex.counts(), (1, 1, 0));
        assert_eq!(ex.conflicts().len(), 1);
    }

    #[test]
    fn execution_trace_projection() {
        let mut exec = ExecutionTrace::new(0u32);
        exec.push('l', 0.0, 1);
        exec.push('r', 1.0, 2);
        assert!(exec.rewards_well_formed(true));
        assert!(!exec.rewards_well_formed(false));
        let obs = exec.observation_trace(|s| ObservationSet(*s), EpisodeStatus::Goal);
        assert_eq!(obs.steps(), &[ObservationSet(0), ObservationSet(1), ObservationSet(2)]);
        assert_eq!(obs.label(), TraceLabel::Positive);
    }

    fn arb_trace() -> impl Strategy<Value = ObservationTrace> {
        proptest::collection::vec(0u32..4, 1..20).prop_map(|v| {
            ObservationTrace::new(v.into_iter().map(ObservationSet).collect(), TraceLabel::Incomplete)
                .unwrap()
        })
    }

    proptest! {
        #[test]
        fn compress_properties(t in arb_trace()) {
            let c = t.compress();
            prop_assert_eq!(c.compress(), c.clone());
            prop_assert!(c.len() <= t.len());
            prop_assert_eq!(c.steps()[0], t.steps()[0]);
            prop_assert!(c.is_compressed());
            // subsequence in the same relative order
            let mut it = t.steps().iter();
            for s in c.steps() {
                prop_assert!(it.any(|x| x == s));
            }
        }
    }
}
