//! The transition-system model and its basic operations.

use alloc::collections::{BTreeSet, VecDeque};
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use hashbrown::HashMap;

use crate::error::Error;
use crate::event::{is_reserved, EventAttr, EventId, EventTable, Label, EPSILON_NAME, TAU_NAME};
use crate::origin::Origin;

/// Reserved label for non-safe observer states.
pub const NON_SAFE: &str = "N";
/// Label carried by secret states in model files.
pub const SECRET: &str = "secret";
pub(crate) const STS_PREFIX: &str = "sts:";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateId(pub u32);

impl StateId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Sorted set of atomic propositions.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Labels(Vec<Arc<str>>);

impl Labels {
    pub fn new() -> Self {
        Labels(Vec::new())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.0.binary_search_by(|l| (**l).cmp(name)).is_ok()
    }

    pub fn insert(&mut self, name: &str) {
        if let Err(i) = self.0.binary_search_by(|l| (**l).cmp(name)) {
            self.0.insert(i, name.into());
        }
    }

    pub(crate) fn insert_arc(&mut self, name: Arc<str>) {
        if let Err(i) = self.0.binary_search(&name) {
            self.0.insert(i, name);
        }
    }

    pub fn remove(&mut self, name: &str) {
        if let Ok(i) = self.0.binary_search_by(|l| (**l).cmp(name)) {
            self.0.remove(i);
        }
    }

    pub fn retain(&mut self, mut f: impl FnMut(&str) -> bool) {
        self.0.retain(|l| f(l));
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> + '_ {
        self.0.iter().map(|l| &**l)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn union_with(&mut self, other: &Labels) {
        if other.0.is_empty() {
            return;
        }
        if self.0.is_empty() {
            self.0 = other.0.clone();
            return;
        }
        for l in &other.0 {
            self.insert_arc(l.clone());
        }
    }
}

impl<'a> FromIterator<&'a str> for Labels {
    fn from_iter<T: IntoIterator<Item = &'a str>>(iter: T) -> Self {
        let mut l = Labels::new();
        for s in iter {
            l.insert(s);
        }
        l
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct State {
    pub origin: Origin,
    pub labels: Labels,
    pub marked: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Transition {
    pub source: StateId,
    pub label: Label,
    pub target: StateId,
}

/// Whether the per-state `marked` flags mean anything. Without explicit
/// marking every state counts as marked.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Marking {
    Implicit,
    Explicit,
}

#[derive(Clone)]
pub struct TransitionSystem {
    name: Arc<str>,
    events: EventTable,
    states: Vec<State>,
    transitions: Vec<Transition>,
    offsets: Vec<u32>,
    initial: Vec<StateId>,
    marking: Marking,
}

/// Structural equality: same name, alphabet, initial states, transitions and
/// per-state origin, labels and effective marking.
impl PartialEq for TransitionSystem {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.events == other.events
            && self.marking == other.marking
            && self.initial == other.initial
            && self.transitions == other.transitions
            && self.states.len() == other.states.len()
            && self.state_ids().all(|x| {
                let (a, b) = (&self.states[x.index()], &other.states[x.index()]);
                a.origin == b.origin && a.labels == b.labels && self.is_marked(x) == other.is_marked(x)
            })
    }
}

impl Eq for TransitionSystem {}

impl fmt::Debug for TransitionSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "system {}", self.name)?;
        for (i, s) in self.states.iter().enumerate() {
            write!(f, "  {i}: {}", s.origin)?;
            if self.initial.contains(&StateId(i as u32)) {
                write!(f, " init")?;
            }
            if self.marking == Marking::Explicit && s.marked {
                write!(f, " marked")?;
            }
            for l in s.labels.iter() {
                write!(f, " {l}")?;
            }
            writeln!(f)?;
        }
        for t in &self.transitions {
            writeln!(f, "  {} -{}-> {}", t.source.0, self.label_name(t.label), t.target.0)?;
        }
        Ok(())
    }
}

impl TransitionSystem {
    /// Assembles a system, sorting and deduplicating transitions.
    pub fn from_parts(
        name: &str,
        events: EventTable,
        states: Vec<State>,
        transitions: Vec<Transition>,
        initial: Vec<StateId>,
        marking: Marking,
    ) -> Result<Self, Error> {
        Self::from_parts_arc(name.into(), events, states, transitions, initial, marking)
    }

    pub(crate) fn from_parts_arc(
        name: Arc<str>,
        events: EventTable,
        states: Vec<State>,
        mut transitions: Vec<Transition>,
        mut initial: Vec<StateId>,
        marking: Marking,
    ) -> Result<Self, Error> {
        let n = states.len() as u32;
        for t in &transitions {
            if t.source.0 >= n {
                return Err(Error::UnknownState(t.source.0));
            }
            if t.target.0 >= n {
                return Err(Error::UnknownState(t.target.0));
            }
            if let Label::Event(e) = t.label {
                if e.index() >= events.len() {
                    return Err(Error::UnknownEvent(alloc::format!("#{}", e.0)));
                }
            }
        }
        initial.sort_unstable();
        initial.dedup();
        if let Some(s) = initial.iter().find(|s| s.0 >= n) {
            return Err(Error::UnknownState(s.0));
        }
        if initial.is_empty() {
            return Err(Error::NoInitialState(String::from(&*name)));
        }
        transitions.sort_unstable();
        transitions.dedup();
        let mut offsets = vec![0u32; states.len() + 1];
        for t in &transitions {
            offsets[t.source.index() + 1] += 1;
        }
        for i in 0..states.len() {
            offsets[i + 1] += offsets[i];
        }
        Ok(TransitionSystem { name, events, states, transitions, offsets, initial, marking })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub(crate) fn name_arc(&self) -> &Arc<str> {
        &self.name
    }

    pub fn with_name(mut self, name: &str) -> Self {
        self.name = name.into();
        self
    }

    pub fn events(&self) -> &EventTable {
        &self.events
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn state(&self, id: StateId) -> &State {
        &self.states[id.index()]
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn state_ids(&self) -> impl Iterator<Item = StateId> {
        (0..self.states.len() as u32).map(StateId)
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn num_transitions(&self) -> usize {
        self.transitions.len()
    }

    pub fn initial(&self) -> &[StateId] {
        &self.initial
    }

    pub fn marking(&self) -> Marking {
        self.marking
    }

    pub fn is_marked(&self, id: StateId) -> bool {
        self.marking == Marking::Implicit || self.states[id.index()].marked
    }

    /// Outgoing transitions of `id`, sorted by label then target.
    pub fn outgoing(&self, id: StateId) -> &[Transition] {
        let i = id.index();
        &self.transitions[self.offsets[i] as usize..self.offsets[i + 1] as usize]
    }

    pub fn has_label(&self, id: StateId, label: &str) -> bool {
        self.states[id.index()].labels.contains(label)
    }

    pub fn label_name(&self, label: Label) -> &str {
        match label {
            Label::Event(e) => self.events.name(e),
            Label::Tau => TAU_NAME,
            Label::Epsilon => EPSILON_NAME,
        }
    }

    /// Finds a state by its printed name.
    pub fn state_by_name(&self, name: &str) -> Option<StateId> {
        self.states.iter().position(|s| s.origin.name() == name).map(|i| StateId(i as u32))
    }

    pub(crate) fn check_state(&self, id: StateId) -> Result<(), Error> {
        if id.index() < self.states.len() {
            Ok(())
        } else {
            Err(Error::UnknownState(id.0))
        }
    }

    pub(crate) fn into_parts(self) -> (Arc<str>, EventTable, Vec<State>, Vec<Transition>, Vec<StateId>, Marking) {
        (self.name, self.events, self.states, self.transitions, self.initial, self.marking)
    }

    /// Same system with each state's labels rewritten by `f`.
    pub fn map_labels(&self, mut f: impl FnMut(StateId, &mut Labels)) -> TransitionSystem {
        let mut ts = self.clone();
        for (i, s) in ts.states.iter_mut().enumerate() {
            f(StateId(i as u32), &mut s.labels);
        }
        ts
    }

    /// Targets of `label` transitions out of `from`, sorted and deduplicated.
    pub(crate) fn step(&self, from: &[StateId], label: Label) -> Vec<StateId> {
        let mut out = Vec::new();
        for &x in from {
            let out_x = self.outgoing(x);
            let start = out_x.partition_point(|t| t.label < label);
            for t in &out_x[start..] {
                if t.label != label {
                    break;
                }
                out.push(t.target);
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    pub(crate) fn closure_unchecked(&self, from: &[StateId]) -> Vec<StateId> {
        let mut seen = vec![false; self.states.len()];
        let mut stack: Vec<StateId> = Vec::new();
        for &x in from {
            if !seen[x.index()] {
                seen[x.index()] = true;
                stack.push(x);
            }
        }
        let mut out = stack.clone();
        while let Some(x) = stack.pop() {
            for t in self.outgoing(x) {
                if t.label == Label::Epsilon && !seen[t.target.index()] {
                    seen[t.target.index()] = true;
                    stack.push(t.target);
                    out.push(t.target);
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Sub-system on the states flagged in `keep`, restricted to the part
    /// reachable from the kept initial states. `None` if no initial state is kept.
    pub fn restrict(&self, keep: &[bool]) -> Option<TransitionSystem> {
        self.restrict_mapped(keep).map(|(ts, _)| ts)
    }

    /// As [`restrict`](Self::restrict), also returning the original id of
    /// every new state.
    pub fn restrict_mapped(&self, keep: &[bool]) -> Option<(TransitionSystem, Vec<StateId>)> {
        let init: Vec<StateId> = self.initial.iter().copied().filter(|s| keep[s.index()]).collect();
        if init.is_empty() {
            return None;
        }
        let mut map = vec![u32::MAX; self.states.len()];
        let mut order = Vec::new();
        let mut queue = VecDeque::new();
        for &s in &init {
            map[s.index()] = order.len() as u32;
            order.push(s);
            queue.push_back(s);
        }
        while let Some(x) = queue.pop_front() {
            for t in self.outgoing(x) {
                let y = t.target.index();
                if keep[y] && map[y] == u32::MAX {
                    map[y] = order.len() as u32;
                    order.push(t.target);
                    queue.push_back(t.target);
                }
            }
        }
        let states = order.iter().map(|s| self.states[s.index()].clone()).collect();
        let mut transitions = Vec::new();
        for &x in &order {
            for t in self.outgoing(x) {
                let y = map[t.target.index()];
                if y != u32::MAX {
                    transitions.push(Transition { source: StateId(map[x.index()]), label: t.label, target: StateId(y) });
                }
            }
        }
        let initial = init.iter().map(|s| StateId(map[s.index()])).collect();
        let ts = TransitionSystem::from_parts_arc(
            self.name.clone(),
            self.events.clone(),
            states,
            transitions,
            initial,
            self.marking,
        )
        .expect("restriction of a valid system is valid");
        Some((ts, order))
    }

    /// Part reachable from the initial states.
    pub fn reachable_part(&self) -> TransitionSystem {
        self.restrict(&vec![true; self.states.len()]).expect("initial states are kept")
    }

    /// Adds an event to the alphabet, failing if the name is taken.
    pub fn with_event(&self, name: &str, attr: EventAttr) -> Result<TransitionSystem, Error> {
        if self.events.contains(name) {
            return Err(Error::EventCollision(name.into()));
        }
        let mut events = self.events.clone();
        let new_id = events.insert(name, attr)?;
        let remap = |l: Label| match l {
            Label::Event(e) if e >= new_id => Label::Event(EventId(e.0 + 1)),
            other => other,
        };
        let transitions =
            self.transitions.iter().map(|t| Transition { label: remap(t.label), ..*t }).collect();
        TransitionSystem::from_parts_arc(
            self.name.clone(),
            events,
            self.states.clone(),
            transitions,
            self.initial.clone(),
            self.marking,
        )
    }

    /// Adds transitions labelled with an existing event.
    pub(crate) fn with_transitions(&self, extra: impl IntoIterator<Item = Transition>) -> TransitionSystem {
        let mut transitions = self.transitions.clone();
        transitions.extend(extra);
        TransitionSystem::from_parts_arc(
            self.name.clone(),
            self.events.clone(),
            self.states.clone(),
            transitions,
            self.initial.clone(),
            self.marking,
        )
        .expect("added transitions reference existing states")
    }

    /// Removes all transitions of the named events; the alphabet is unchanged.
    pub fn without_event_transitions(&self, events: &[impl AsRef<str>]) -> Result<TransitionSystem, Error> {
        let mut drop = vec![false; self.events.len()];
        for e in events {
            let id = self.events.id(e.as_ref()).ok_or_else(|| Error::UnknownEvent(e.as_ref().into()))?;
            drop[id.index()] = true;
        }
        let transitions = self
            .transitions
            .iter()
            .filter(|t| !matches!(t.label, Label::Event(e) if drop[e.index()]))
            .copied()
            .collect();
        TransitionSystem::from_parts_arc(
            self.name.clone(),
            self.events.clone(),
            self.states.clone(),
            transitions,
            self.initial.clone(),
            self.marking,
        )
    }

    /// Removes the named events together with their transitions.
    pub fn without_events(&self, events: &[impl AsRef<str>]) -> Result<TransitionSystem, Error> {
        let mut drop = vec![false; self.events.len()];
        for e in events {
            let id = self.events.id(e.as_ref()).ok_or_else(|| Error::UnknownEvent(e.as_ref().into()))?;
            drop[id.index()] = true;
        }
        let (events, map) = self.events.without(&drop);
        let transitions = self
            .transitions
            .iter()
            .filter_map(|t| match t.label {
                Label::Event(e) => map[e.index()].map(|e| Transition { label: Label::Event(e), ..*t }),
                _ => Some(*t),
            })
            .collect();
        TransitionSystem::from_parts_arc(
            self.name.clone(),
            events,
            self.states.clone(),
            transitions,
            self.initial.clone(),
            self.marking,
        )
    }

    /// Same system with every state marked.
    pub fn all_marked(&self) -> TransitionSystem {
        let mut ts = self.clone();
        ts.marking = Marking::Implicit;
        ts
    }

    /// Same system with each state's origin rewritten.
    pub(crate) fn map_origins(&self, mut f: impl FnMut(&Origin) -> Origin) -> TransitionSystem {
        let mut ts = self.clone();
        for s in &mut ts.states {
            s.origin = f(&s.origin);
        }
        ts
    }

    /// Overrides event attributes; unknown names are ignored.
    pub fn with_attrs(&self, mut f: impl FnMut(&str, EventAttr) -> EventAttr) -> TransitionSystem {
        let mut events = EventTable::new();
        for (_, n, a) in self.events.iter() {
            events.insert(n, f(n, a)).expect("names are unique");
        }
        let mut ts = self.clone();
        ts.events = events;
        ts
    }
}

/// Incremental construction of a [`TransitionSystem`] by state names.
pub struct Builder {
    name: Arc<str>,
    events: EventTable,
    states: Vec<State>,
    by_name: HashMap<String, StateId>,
    transitions: Vec<(StateId, String, StateId)>,
    initial: Vec<StateId>,
    explicit_marking: bool,
}

impl Builder {
    pub fn new(name: &str) -> Self {
        Builder {
            name: name.into(),
            events: EventTable::new(),
            states: Vec::new(),
            by_name: HashMap::new(),
            transitions: Vec::new(),
            initial: Vec::new(),
            explicit_marking: false,
        }
    }

    pub fn event(&mut self, name: &str, attr: EventAttr) -> Result<&mut Self, Error> {
        self.events.insert(name, attr)?;
        Ok(self)
    }

    /// Returns the state with this name, creating it on first use.
    pub fn state(&mut self, name: &str) -> StateId {
        if let Some(&id) = self.by_name.get(name) {
            return id;
        }
        let id = StateId(self.states.len() as u32);
        self.states.push(State {
            origin: Origin::atom_shared(&self.name, name),
            labels: Labels::new(),
            marked: false,
        });
        self.by_name.insert(name.into(), id);
        id
    }

    pub fn initial(&mut self, name: &str) -> &mut Self {
        let id = self.state(name);
        self.initial.push(id);
        self
    }

    pub fn mark(&mut self, name: &str) -> &mut Self {
        let id = self.state(name);
        self.states[id.index()].marked = true;
        self.explicit_marking = true;
        self
    }

    /// Declares explicit marking even if no state ends up marked.
    pub fn explicit_marking(&mut self) -> &mut Self {
        self.explicit_marking = true;
        self
    }

    pub fn label(&mut self, name: &str, label: &str) -> &mut Self {
        let id = self.state(name);
        self.states[id.index()].labels.insert(label);
        self
    }

    /// Adds `source -event-> target`; `event` may be `tau` or `eps`.
    pub fn trans(&mut self, source: &str, event: &str, target: &str) -> &mut Self {
        let s = self.state(source);
        let t = self.state(target);
        self.transitions.push((s, event.into(), t));
        self
    }

    pub fn build(self) -> Result<TransitionSystem, Error> {
        let mut transitions = Vec::with_capacity(self.transitions.len());
        for (s, e, t) in self.transitions {
            let label = match e.as_str() {
                TAU_NAME => Label::Tau,
                EPSILON_NAME => Label::Epsilon,
                name => Label::Event(self.events.id(name).ok_or(Error::UnknownEvent(e.clone()))?),
            };
            transitions.push(Transition { source: s, label, target: t });
        }
        let marking = if self.explicit_marking { Marking::Explicit } else { Marking::Implicit };
        TransitionSystem::from_parts_arc(self.name, self.events, self.states, transitions, self.initial, marking)
    }
}

/// R_ε(from): everything reachable through zero or more epsilon transitions.
pub fn epsilon_closure(ts: &TransitionSystem, from: &[StateId]) -> Result<Vec<StateId>, Error> {
    for &x in from {
        ts.check_state(x)?;
    }
    Ok(ts.closure_unchecked(from))
}

/// δ(from, word) with epsilon closure before and after every step.
pub fn extended_delta(ts: &TransitionSystem, from: &[StateId], word: &[impl AsRef<str>]) -> Result<Vec<StateId>, Error> {
    for &x in from {
        ts.check_state(x)?;
    }
    let mut ids = Vec::with_capacity(word.len());
    for w in word {
        let w = w.as_ref();
        if is_reserved(w) {
            return Err(Error::SilentInWord);
        }
        ids.push(ts.events().id(w));
    }
    let mut cur = ts.closure_unchecked(from);
    for id in ids {
        match id {
            Some(e) => cur = ts.closure_unchecked(&ts.step(&cur, Label::Event(e))),
            None => return Ok(Vec::new()),
        }
        if cur.is_empty() {
            break;
        }
    }
    Ok(cur)
}

pub type Word = Vec<Arc<str>>;

/// All words of length at most `k` accepted from the initial states.
pub fn language_upto(ts: &TransitionSystem, k: usize) -> BTreeSet<Word> {
    let mut out = BTreeSet::new();
    let mut frontier = vec![(Word::new(), ts.closure_unchecked(ts.initial()))];
    out.insert(Word::new());
    for _ in 0..k {
        let mut next = Vec::new();
        for (w, set) in &frontier {
            for e in ts.events().ids() {
                let y = ts.closure_unchecked(&ts.step(set, Label::Event(e)));
                if !y.is_empty() {
                    let mut w2 = w.clone();
                    w2.push(ts.events().name_arc(e).clone());
                    out.insert(w2.clone());
                    next.push((w2, y));
                }
            }
        }
        frontier = next;
    }
    out
}

fn relabel(ts: &TransitionSystem, events: &[impl AsRef<str>], to: Label) -> Result<TransitionSystem, Error> {
    let mut drop = vec![false; ts.events().len()];
    for e in events {
        let name = e.as_ref();
        let id = ts.events().id(name).ok_or_else(|| Error::UnknownEvent(name.into()))?;
        let observable = ts.events().attr(id).observable;
        match to {
            Label::Tau if !observable => return Err(Error::HideUnobservable(name.into())),
            Label::Epsilon if observable => return Err(Error::EpsilonObservable(name.into())),
            _ => {}
        }
        drop[id.index()] = true;
    }
    if !drop.iter().any(|&d| d) {
        return Ok(ts.clone());
    }
    let (events, map) = ts.events().without(&drop);
    let transitions = ts
        .transitions()
        .iter()
        .map(|t| {
            let label = match t.label {
                Label::Event(e) => map[e.index()].map(Label::Event).unwrap_or(to),
                other => other,
            };
            Transition { label, ..*t }
        })
        .collect();
    TransitionSystem::from_parts_arc(
        ts.name.clone(),
        events,
        ts.states.clone(),
        transitions,
        ts.initial.clone(),
        ts.marking,
    )
}

/// G^{Σh}: observable events relabelled τ and removed from the alphabet.
pub fn hide(ts: &TransitionSystem, events: &[impl AsRef<str>]) -> Result<TransitionSystem, Error> {
    relabel(ts, events, Label::Tau)
}

/// Unobservable events relabelled ε and removed from the alphabet.
pub fn replace_with_epsilon(ts: &TransitionSystem, events: &[impl AsRef<str>]) -> Result<TransitionSystem, Error> {
    relabel(ts, events, Label::Epsilon)
}
