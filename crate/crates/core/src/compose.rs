//! Synchronous composition.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use hashbrown::HashMap;

use crate::error::Error;
use crate::event::{EventId, EventTable, Label};
use crate::origin::Origin;
use crate::ts::{Labels, Marking, State, StateId, Transition, TransitionSystem, NON_SAFE};

/// How state labels of merged states combine.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum LabelMergePolicy {
    /// Union of all labels.
    #[default]
    Union,
    /// `N` only if every part carries it; all other labels are unioned.
    Intersection,
}

impl LabelMergePolicy {
    pub(crate) fn merge<'a>(self, parts: impl Iterator<Item = &'a Labels> + Clone) -> Labels {
        let mut out = Labels::new();
        for l in parts.clone() {
            out.union_with(l);
        }
        if self == LabelMergePolicy::Intersection && out.contains(NON_SAFE) {
            let mut all = true;
            for l in parts {
                all &= l.contains(NON_SAFE);
            }
            if !all {
                out.remove(NON_SAFE);
            }
        }
        out
    }
}

/// Per-component successor index keyed by (state, local label).
struct Component<'a> {
    ts: &'a TransitionSystem,
    width: usize,
    offsets: Vec<u32>,
}

impl<'a> Component<'a> {
    fn new(ts: &'a TransitionSystem) -> Self {
        let width = ts.events().len() + 2;
        let mut offsets = vec![0u32; ts.num_states() * width + 1];
        for t in ts.transitions() {
            offsets[Self::key(width, t.source, t.label) + 1] += 1;
        }
        for i in 1..offsets.len() {
            offsets[i] += offsets[i - 1];
        }
        Component { ts, width, offsets }
    }

    fn key(width: usize, s: StateId, l: Label) -> usize {
        let li = match l {
            Label::Event(e) => e.index(),
            Label::Tau => width - 2,
            Label::Epsilon => width - 1,
        };
        s.index() * width + li
    }

    fn succ(&self, s: u32, l: Label) -> &[Transition] {
        let k = Self::key(self.width, StateId(s), l);
        &self.ts.transitions()[self.offsets[k] as usize..self.offsets[k + 1] as usize]
    }
}

/// The reachable product of several systems, explored lazily.
pub(crate) struct Product<'a> {
    comps: Vec<Component<'a>>,
    pub(crate) events: EventTable,
    /// For each global event, the components that share it with their local id.
    participants: Vec<Vec<(usize, EventId)>>,
}

impl<'a> Product<'a> {
    pub(crate) fn new(systems: &[&'a TransitionSystem]) -> Result<Self, Error> {
        let mut events = EventTable::new();
        for ts in systems {
            for (_, n, a) in ts.events().iter() {
                events.insert(n, a)?;
            }
        }
        let mut participants = vec![Vec::new(); events.len()];
        for (c, ts) in systems.iter().enumerate() {
            for (local, n, _) in ts.events().iter() {
                let g = events.id(n).expect("inserted above");
                participants[g.index()].push((c, local));
            }
        }
        let comps = systems.iter().map(|ts| Component::new(ts)).collect();
        Ok(Product { comps, events, participants })
    }

    pub(crate) fn width(&self) -> usize {
        self.comps.len()
    }

    pub(crate) fn initial_tuples(&self) -> Vec<Vec<u32>> {
        let mut out: Vec<Vec<u32>> = vec![Vec::new()];
        for c in &self.comps {
            let mut next = Vec::new();
            for prefix in &out {
                for s in c.ts.initial() {
                    let mut t = prefix.clone();
                    t.push(s.0);
                    next.push(t);
                }
            }
            out = next;
        }
        out
    }

    /// Calls `f(label, successor)` for every product transition out of `t`,
    /// in label order.
    pub(crate) fn for_each_successor(&self, t: &[u32], scratch: &mut Vec<u32>, mut f: impl FnMut(Label, &[u32])) {
        let mut slices: Vec<(usize, &[Transition])> = Vec::with_capacity(4);
        let mut idx: Vec<usize> = Vec::with_capacity(4);
        'events: for (g, parts) in self.participants.iter().enumerate() {
            slices.clear();
            for &(c, local) in parts {
                let s = self.comps[c].succ(t[c], Label::Event(local));
                if s.is_empty() {
                    continue 'events;
                }
                slices.push((c, s));
            }
            idx.clear();
            idx.resize(slices.len(), 0);
            loop {
                scratch.clear();
                scratch.extend_from_slice(t);
                for (k, (c, s)) in slices.iter().enumerate() {
                    scratch[*c] = s[idx[k]].target.0;
                }
                f(Label::Event(EventId(g as u32)), scratch);
                let mut k = 0;
                loop {
                    if k == slices.len() {
                        continue 'events;
                    }
                    idx[k] += 1;
                    if idx[k] < slices[k].1.len() {
                        break;
                    }
                    idx[k] = 0;
                    k += 1;
                }
            }
        }
        for silent in [Label::Tau, Label::Epsilon] {
            for (c, comp) in self.comps.iter().enumerate() {
                for tr in comp.succ(t[c], silent) {
                    scratch.clear();
                    scratch.extend_from_slice(t);
                    scratch[c] = tr.target.0;
                    f(silent, scratch);
                }
            }
        }
    }

    pub(crate) fn state_of(&self, t: &[u32], policy: LabelMergePolicy) -> State {
        let states: Vec<&State> = self.comps.iter().zip(t).map(|(c, &s)| c.ts.state(StateId(s))).collect();
        State {
            origin: Origin::tuple(states.iter().map(|s| &s.origin)),
            labels: policy.merge(states.iter().map(|s| &s.labels)),
            marked: self.comps.iter().zip(t).all(|(c, &s)| c.ts.is_marked(StateId(s))),
        }
    }

    pub(crate) fn marking(&self) -> Marking {
        if self.comps.iter().any(|c| c.ts.marking() == Marking::Explicit) {
            Marking::Explicit
        } else {
            Marking::Implicit
        }
    }

    pub(crate) fn name(&self) -> String {
        let mut s = String::new();
        for (i, c) in self.comps.iter().enumerate() {
            if i > 0 {
                s.push_str("||");
            }
            s.push_str(c.ts.name());
        }
        s
    }
}

/// Interning table from state tuples to dense ids.
pub(crate) struct TupleIndex {
    width: usize,
    map: HashMap<Box<[u32]>, u32>,
    pub(crate) tuples: Vec<u32>,
}

impl TupleIndex {
    pub(crate) fn new(width: usize) -> Self {
        TupleIndex { width, map: HashMap::new(), tuples: Vec::new() }
    }

    pub(crate) fn len(&self) -> usize {
        self.map.len()
    }

    /// Returns the id of `t` and whether it was new.
    pub(crate) fn intern(&mut self, t: &[u32]) -> (u32, bool) {
        if let Some(&id) = self.map.get(t) {
            return (id, false);
        }
        let id = self.map.len() as u32;
        self.map.insert(t.into(), id);
        self.tuples.extend_from_slice(t);
        (id, true)
    }

    pub(crate) fn tuple(&self, id: u32) -> &[u32] {
        let i = id as usize * self.width;
        &self.tuples[i..i + self.width]
    }
}

/// Synchronous product of two systems (reachable part).
pub fn compose(a: &TransitionSystem, b: &TransitionSystem, labels: LabelMergePolicy) -> Result<TransitionSystem, Error> {
    compose_all(&[a, b], labels)
}

/// Synchronous product of any number of systems; states are flat n-tuples.
pub fn compose_all(systems: &[&TransitionSystem], labels: LabelMergePolicy) -> Result<TransitionSystem, Error> {
    assert!(!systems.is_empty(), "compose_all needs at least one operand");
    let product = Product::new(systems)?;
    let mut index = TupleIndex::new(product.width());
    let mut initial = Vec::new();
    for t in product.initial_tuples() {
        initial.push(StateId(index.intern(&t).0));
    }
    let mut transitions = Vec::new();
    let mut scratch = Vec::with_capacity(product.width());
    let mut current = Vec::with_capacity(product.width());
    let mut next = 0u32;
    while (next as usize) < index.len() {
        current.clear();
        current.extend_from_slice(index.tuple(next));
        product.for_each_successor(&current, &mut scratch, |label, succ| {
            let (target, _) = index.intern(succ);
            transitions.push(Transition { source: StateId(next), label, target: StateId(target) });
        });
        next += 1;
    }
    let states = (0..index.len() as u32).map(|i| product.state_of(index.tuple(i), labels)).collect();
    let name: Arc<str> = product.name().into();
    let marking = product.marking();
    drop(index);
    TransitionSystem::from_parts_arc(name, product.events, states, transitions, initial, marking)
}
