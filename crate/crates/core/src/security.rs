//! Current-state opacity and anonymity: non-safe labelling, detector
//! automata, the nonblocking check and the top-level `verify`.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use hashbrown::HashMap;

use crate::compose::{compose, compose_all, LabelMergePolicy, Product, TupleIndex};
use crate::error::Error;
use crate::event::{EventAttr, EventTable, Label};
use crate::incremental::{run_algorithm1, run_shared, StepStats, DEFAULT_CANDIDATES};
use crate::observer::observe;
use crate::origin::Origin;
use crate::project::Project;
use crate::ts::{Builder, Labels, StateId, Transition, TransitionSystem, Word, NON_SAFE};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Property {
    Cso,
    Csa,
}

impl Property {
    /// Policy for combining `N` when states are put side by side in a product.
    pub fn compose_policy(self) -> LabelMergePolicy {
        match self {
            Property::Cso => LabelMergePolicy::Union,
            Property::Csa => LabelMergePolicy::Intersection,
        }
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Property::Cso => "cso",
            Property::Csa => "csa",
        })
    }
}

/// Secret states per subsystem, by state name. Empty for anonymity.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SecuritySpec {
    pub property: Property,
    pub secrets: BTreeMap<String, BTreeSet<String>>,
}

impl SecuritySpec {
    pub fn cso(secrets: BTreeMap<String, BTreeSet<String>>) -> Self {
        SecuritySpec { property: Property::Cso, secrets }
    }

    pub fn csa() -> Self {
        SecuritySpec { property: Property::Csa, secrets: BTreeMap::new() }
    }

    pub fn validate(&self, members: &[TransitionSystem]) -> Result<(), Error> {
        for (system, states) in &self.secrets {
            let m = members
                .iter()
                .find(|m| m.name() == system)
                .ok_or_else(|| Error::UnknownSubsystem(system.clone()))?;
            for s in states {
                if m.state_by_name(s).is_none() {
                    return Err(Error::UnknownSecret { system: system.clone(), state: s.clone() });
                }
            }
        }
        Ok(())
    }

    /// The secrets of one subsystem only.
    pub fn restricted_to(&self, system: &str) -> BTreeMap<String, BTreeSet<String>> {
        self.secrets.iter().filter(|(k, v)| *k == system && !v.is_empty()).map(|(k, v)| (k.clone(), v.clone())).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Opaque,
    NotOpaque,
    Anonymous,
    NotAnonymous,
}

impl Verdict {
    pub fn new(property: Property, holds: bool) -> Verdict {
        match (property, holds) {
            (Property::Cso, true) => Verdict::Opaque,
            (Property::Cso, false) => Verdict::NotOpaque,
            (Property::Csa, true) => Verdict::Anonymous,
            (Property::Csa, false) => Verdict::NotAnonymous,
        }
    }

    pub fn holds(self) -> bool {
        matches!(self, Verdict::Opaque | Verdict::Anonymous)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Opaque => "OPAQUE",
            Verdict::NotOpaque => "NOT_OPAQUE",
            Verdict::Anonymous => "ANONYMOUS",
            Verdict::NotAnonymous => "NOT_ANONYMOUS",
        })
    }
}

/// Whether the base states behind `origin` are all secret. A tuple is secret
/// as soon as one component is.
pub fn is_secret(origin: &Origin, secrets: &BTreeMap<String, BTreeSet<String>>) -> bool {
    match origin {
        Origin::Atom(a) => secrets.get(&*a.system).is_some_and(|s| s.contains(&*a.state)),
        Origin::Tuple(parts) => parts.iter().any(|p| is_secret(p, secrets)),
        Origin::Block(ms) | Origin::Class(ms) => ms.iter().all(|m| is_secret(m, secrets)),
    }
}

/// Whether `origin` pins down exactly one state in every component.
pub fn is_singleton(origin: &Origin) -> bool {
    match origin {
        Origin::Atom(_) => true,
        Origin::Tuple(parts) => parts.iter().all(is_singleton),
        Origin::Block(ms) => ms.len() == 1 && is_singleton(&ms[0]),
        Origin::Class(ms) => ms.iter().all(is_singleton),
    }
}

fn systems_of(ts: &TransitionSystem) -> BTreeSet<Arc<str>> {
    let mut out = BTreeSet::new();
    if let Some(s) = ts.states().first() {
        s.origin.for_each_atom(&mut |a| {
            out.insert(a.system.clone());
        });
    }
    out
}

/// Sets `N` on exactly the observer states made only of secret states.
pub fn mark_non_safe_cso(
    obs: &TransitionSystem,
    secrets: &BTreeMap<String, BTreeSet<String>>,
) -> Result<TransitionSystem, Error> {
    let systems = systems_of(obs);
    for (system, states) in secrets {
        if !states.is_empty() && !systems.contains(system.as_str()) {
            return Err(Error::UnknownSubsystem(system.clone()));
        }
    }
    Ok(relabel_n(obs, |o| is_secret(o, secrets)))
}

/// Sets `N` on exactly the observer states whose blocks are singletons.
pub fn mark_non_safe_csa(obs: &TransitionSystem) -> TransitionSystem {
    relabel_n(obs, is_singleton)
}

pub fn mark_non_safe(obs: &TransitionSystem, spec: &SecuritySpec) -> Result<TransitionSystem, Error> {
    match spec.property {
        Property::Cso => mark_non_safe_cso(obs, &spec.secrets),
        Property::Csa => Ok(mark_non_safe_csa(obs)),
    }
}

fn relabel_n(obs: &TransitionSystem, pred: impl Fn(&Origin) -> bool) -> TransitionSystem {
    let flags: Vec<bool> = obs.states().iter().map(|s| pred(&s.origin)).collect();
    obs.map_labels(|x, l| {
        l.remove(NON_SAFE);
        if flags[x.index()] {
            l.insert(NON_SAFE);
        }
    })
}

/// Observer of one subsystem with `epsilon` silenced, carrying only `N`.
pub(crate) fn local_observer(
    member: &TransitionSystem,
    spec: &SecuritySpec,
    epsilon: &[impl AsRef<str>],
) -> Result<TransitionSystem, Error> {
    let o = observe(member, epsilon, LabelMergePolicy::Union)?.map_labels(|_, l| *l = Labels::new());
    match spec.property {
        Property::Cso => mark_non_safe_cso(&o, &spec.restricted_to(member.name())),
        Property::Csa => Ok(mark_non_safe_csa(&o)),
    }
}

fn has_non_safe(ts: &TransitionSystem) -> bool {
    ts.state_ids().any(|x| ts.has_label(x, NON_SAFE))
}

/// Decides the property from local observers alone when that is possible.
pub fn local_verdict_shortcut(local_obs: &[TransitionSystem], property: Property) -> Result<Option<Verdict>, Error> {
    let mut owners: BTreeMap<&str, usize> = BTreeMap::new();
    let mut shared = BTreeSet::new();
    for o in local_obs {
        for (_, n, a) in o.events().iter() {
            if !a.observable {
                let c = owners.entry(n).or_insert(0);
                *c += 1;
                if *c > 1 {
                    shared.insert(n.to_string());
                }
            }
        }
    }
    if !shared.is_empty() {
        return Err(Error::SharedUnobservable(shared.into_iter().collect()));
    }
    Ok(match property {
        Property::Cso if local_obs.iter().all(|o| !has_non_safe(o)) => Some(Verdict::Opaque),
        Property::Csa if local_obs.iter().any(|o| !has_non_safe(o)) => Some(Verdict::Anonymous),
        _ => None,
    })
}

/// Atoms of detector states use this system-name prefix.
pub const DETECTOR_PREFIX: &str = "detector:";

/// Two-state detector: marked state 0 with self-loops on `events`, and an
/// unmarked state 1 reached by `w`.
pub fn detector(events: &EventTable, w: &str) -> Result<TransitionSystem, Error> {
    detector_for(events, &[w])
}

/// Detector with one edge to the blocking state per event in `ws`.
pub fn detector_for(events: &EventTable, ws: &[impl AsRef<str>]) -> Result<TransitionSystem, Error> {
    let mut b = Builder::new(&alloc::format!("{DETECTOR_PREFIX}{}", ws.first().map_or("", |w| w.as_ref())));
    for (_, n, a) in events.iter() {
        b.event(n, a)?;
    }
    let mut seen = BTreeSet::new();
    for w in ws {
        let w = w.as_ref();
        if events.contains(w) {
            return Err(Error::EventCollision(w.into()));
        }
        if seen.insert(w) {
            b.event(w, EventAttr::OBS_UNCTRL)?;
        }
    }
    b.explicit_marking().initial("0").mark("0").state("1");
    for n in events.names() {
        b.trans("0", n, "0");
    }
    for w in ws {
        b.trans("0", w.as_ref(), "1");
    }
    b.build()
}

/// O_w: `obs` with a `w` self-loop at every `N` state.
pub fn with_w_loops(obs: &TransitionSystem, w: &str) -> Result<TransitionSystem, Error> {
    let with_w = obs.with_event(w, EventAttr::OBS_UNCTRL)?;
    let wid = with_w.events().id(w).expect("just added");
    let loops: Vec<Transition> = with_w
        .state_ids()
        .filter(|x| with_w.has_label(*x, NON_SAFE))
        .map(|x| Transition { source: x, label: Label::Event(wid), target: x })
        .collect();
    Ok(with_w.with_transitions(loops))
}

/// O_e: a `w` self-loop at every `N` state, composed with the detector.
pub fn extend_observer(obs: &TransitionSystem, w: &str) -> Result<TransitionSystem, Error> {
    let det = detector(obs.events(), w)?;
    compose(&with_w_loops(obs, w)?, &det, LabelMergePolicy::Union)
}

/// A `w`-style event name not used by any of `systems`.
pub(crate) fn fresh_event(base: &str, systems: &[&TransitionSystem]) -> String {
    let mut name = String::from(base);
    while systems.iter().any(|s| s.events().contains(&name)) {
        name.push('_');
    }
    name
}

/// States from which a marked state is reachable.
pub fn coreachable(ts: &TransitionSystem) -> Vec<bool> {
    let n = ts.num_states();
    let mut rev_off = vec![0u32; n + 1];
    for t in ts.transitions() {
        rev_off[t.target.index() + 1] += 1;
    }
    for i in 1..=n {
        rev_off[i] += rev_off[i - 1];
    }
    let mut fill = rev_off.clone();
    let mut rev = vec![0u32; ts.num_transitions()];
    for t in ts.transitions() {
        rev[fill[t.target.index()] as usize] = t.source.0;
        fill[t.target.index()] += 1;
    }
    let mut seen = vec![false; n];
    let mut stack: Vec<u32> = Vec::new();
    for x in ts.state_ids() {
        if ts.is_marked(x) {
            seen[x.index()] = true;
            stack.push(x.0);
        }
    }
    while let Some(x) = stack.pop() {
        for &p in &rev[rev_off[x as usize] as usize..rev_off[x as usize + 1] as usize] {
            if !seen[p as usize] {
                seen[p as usize] = true;
                stack.push(p);
            }
        }
    }
    seen
}

/// A shortest trace to a reachable blocking state, or `None` if `ts` is nonblocking.
pub fn blocking_trace(ts: &TransitionSystem) -> Option<Word> {
    let co = coreachable(ts);
    let mut parent: Vec<Option<(StateId, Label)>> = vec![None; ts.num_states()];
    let mut seen = vec![false; ts.num_states()];
    let mut queue = VecDeque::new();
    for &x in ts.initial() {
        if !seen[x.index()] {
            seen[x.index()] = true;
            queue.push_back(x);
        }
    }
    while let Some(x) = queue.pop_front() {
        if !co[x.index()] {
            let mut trace = Vec::new();
            let mut cur = x;
            while let Some((p, l)) = parent[cur.index()] {
                trace.push(Arc::from(ts.label_name(l)));
                cur = p;
            }
            trace.reverse();
            return Some(trace);
        }
        for t in ts.outgoing(x) {
            if !seen[t.target.index()] {
                seen[t.target.index()] = true;
                parent[t.target.index()] = Some((x, t.label));
                queue.push_back(t.target);
            }
        }
    }
    None
}

pub fn nonblocking(ts: &TransitionSystem) -> bool {
    blocking_trace(ts).is_none()
}

/// Shortest observation leading the monolithic observer of `members` into a
/// non-safe state. The observer is explored lazily and never built in full.
pub fn witness(members: &[&TransitionSystem], spec: &SecuritySpec) -> Result<Option<Word>, Error> {
    let product = Product::new(members)?;
    let secret: Vec<Vec<bool>> =
        members.iter().map(|m| m.states().iter().map(|s| is_secret(&s.origin, &spec.secrets)).collect()).collect();
    let silent = |l: Label| match l {
        Label::Event(e) => !product.events.attr(e).observable,
        _ => true,
    };
    let mut tuples = TupleIndex::new(product.width());
    let mut scratch = Vec::new();
    let mut current = Vec::new();
    let mut closure = |seed: Vec<u32>, tuples: &mut TupleIndex| -> Box<[u32]> {
        let mut seen: BTreeSet<u32> = seed.iter().copied().collect();
        let mut stack = seed;
        while let Some(t) = stack.pop() {
            current.clear();
            current.extend_from_slice(tuples.tuple(t));
            let mut found = Vec::new();
            product.for_each_successor(&current, &mut scratch, |l, succ| {
                if silent(l) {
                    found.push(succ.to_vec());
                }
            });
            for s in found {
                let (id, _) = tuples.intern(&s);
                if seen.insert(id) {
                    stack.push(id);
                }
            }
        }
        seen.into_iter().collect()
    };
    let non_safe = |block: &[u32], tuples: &TupleIndex| match spec.property {
        Property::Cso => block.iter().all(|&t| tuples.tuple(t).iter().enumerate().any(|(c, &s)| secret[c][s as usize])),
        Property::Csa => block.len() == 1,
    };
    let init: Vec<u32> = product.initial_tuples().iter().map(|t| tuples.intern(t).0).collect();
    let first = closure(init, &mut tuples);
    let mut index: HashMap<Box<[u32]>, u32> = HashMap::new();
    let mut blocks: Vec<Box<[u32]>> = Vec::new();
    let mut parent: Vec<Option<(u32, u32)>> = Vec::new();
    index.insert(first.clone(), 0);
    blocks.push(first);
    parent.push(None);
    let mut next = 0usize;
    let mut scratch2 = Vec::new();
    let mut cur = Vec::new();
    while next < blocks.len() {
        if non_safe(&blocks[next], &tuples) {
            let mut trace = Vec::new();
            let mut b = next as u32;
            while let Some((p, e)) = parent[b as usize] {
                trace.push(Arc::from(product.events.name(crate::event::EventId(e))));
                b = p;
            }
            trace.reverse();
            return Ok(Some(trace));
        }
        let mut by_event: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
        for &t in blocks[next].iter() {
            cur.clear();
            cur.extend_from_slice(tuples.tuple(t));
            let mut found = Vec::new();
            product.for_each_successor(&cur, &mut scratch2, |l, succ| {
                if let Label::Event(e) = l {
                    if product.events.attr(e).observable {
                        found.push((e.0, succ.to_vec()));
                    }
                }
            });
            for (e, s) in found {
                let id = tuples.intern(&s).0;
                by_event.entry(e).or_default().push(id);
            }
        }
        for (e, targets) in by_event {
            let block = closure(targets, &mut tuples);
            if !index.contains_key(&block) {
                index.insert(block.clone(), blocks.len() as u32);
                blocks.push(block);
                parent.push(Some((next as u32, e)));
            }
        }
        next += 1;
    }
    Ok(None)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Mode {
    Monolithic,
    Incremental,
    /// Incremental for modular projects, monolithic for a single subsystem.
    #[default]
    Auto,
}

/// Abstraction used by the incremental pipeline.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Method {
    /// Visible bisimulation on observers carrying `N` labels.
    #[default]
    Vb,
    /// Nonblocking-preserving abstraction of extended observers.
    Nb,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VerifyOptions {
    pub mode: Mode,
    pub method: Method,
    /// Candidate pool size for pair selection.
    pub candidates: usize,
    /// Detector layout of the monolithic check.
    pub detector: DetectorLayout,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { mode: Mode::Auto, method: Method::Vb, candidates: DEFAULT_CANDIDATES, detector: DetectorLayout::Global }
    }
}

/// Which computation produced a report.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pipeline {
    Monolithic,
    Incremental,
    Shared,
}

#[derive(Clone, Debug)]
pub struct Report {
    pub verdict: Verdict,
    /// Observable events leading to a non-safe state, when the property fails.
    pub witness: Option<Word>,
    pub pipeline: Pipeline,
    /// Size of the final system checked: the composed extended observer in
    /// monolithic mode, the final abstraction otherwise.
    pub states: usize,
    pub transitions: usize,
    pub steps: Vec<StepStats>,
}

/// How detectors are attached to the local observers of a modular system.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DetectorLayout {
    /// One detector per subsystem over that subsystem's events. A tripped
    /// detector blocks only its own subsystem.
    Local,
    /// A single detector over all events with every `w` leading to its one
    /// blocking state, which therefore stops the whole system.
    #[default]
    Global,
}

/// The `w` event of every member: one per member for opacity, one shared
/// event for anonymity.
pub(crate) fn w_events(members: &[TransitionSystem], property: Property) -> Vec<String> {
    let refs: Vec<&TransitionSystem> = members.iter().collect();
    let shared = fresh_event("w", &refs);
    members
        .iter()
        .map(|m| match property {
            Property::Cso => fresh_event(&alloc::format!("w_{}", m.name()), &refs),
            Property::Csa => shared.clone(),
        })
        .collect()
}

/// Extended observers for every member, each with its own detector.
pub(crate) fn extended_locals(
    members: &[TransitionSystem],
    locals: &[TransitionSystem],
    property: Property,
) -> Result<Vec<TransitionSystem>, Error> {
    let ws = w_events(members, property);
    locals.iter().zip(&ws).map(|(o, w)| extend_observer(o, w)).collect()
}

/// The composed extended observer of a modular system.
pub fn composed_extended_observer(
    members: &[TransitionSystem],
    locals: &[TransitionSystem],
    property: Property,
    layout: DetectorLayout,
) -> Result<TransitionSystem, Error> {
    let parts = match layout {
        DetectorLayout::Local => extended_locals(members, locals, property)?,
        DetectorLayout::Global => {
            let ws = w_events(members, property);
            let mut alphabet = EventTable::new();
            for o in locals {
                alphabet = alphabet.union(o.events())?;
            }
            let mut parts =
                locals.iter().zip(&ws).map(|(o, w)| with_w_loops(o, w)).collect::<Result<Vec<_>, _>>()?;
            parts.push(detector_for(&alphabet, &ws)?);
            parts
        }
    };
    let refs: Vec<&TransitionSystem> = parts.iter().collect();
    compose_all(&refs, LabelMergePolicy::Union)
}

/// Every unobservable event of `m` that no other member uses.
pub(crate) fn local_unobservable(project: &Project, i: usize) -> Vec<String> {
    let owners = project.event_owners();
    project.members[i].events().unobservable().filter(|e| owners[*e].len() == 1).map(String::from).collect()
}

pub fn verify(project: &Project, options: &VerifyOptions) -> Result<Report, Error> {
    let spec = &project.security;
    let property = spec.property;
    let shared = project.shared_unobservable();
    let mode = match options.mode {
        Mode::Auto if project.members.len() == 1 => Mode::Monolithic,
        Mode::Auto => Mode::Incremental,
        m => m,
    };
    let (holds, pipeline, states, transitions, steps) = match (mode, shared.is_empty()) {
        (Mode::Monolithic, true) => {
            let locals = (0..project.members.len())
                .map(|i| local_observer(&project.members[i], spec, &local_unobservable(project, i)))
                .collect::<Result<Vec<_>, _>>()?;
            let all = composed_extended_observer(&project.members, &locals, property, options.detector)?;
            (nonblocking(&all), Pipeline::Monolithic, all.num_states(), all.num_transitions(), Vec::new())
        }
        (Mode::Monolithic, false) => {
            let refs: Vec<&TransitionSystem> = project.members.iter().collect();
            let g = compose_all(&refs, LabelMergePolicy::Union)?;
            let unobs: Vec<&str> = g.events().unobservable().collect();
            let o = observe(&g, &unobs, LabelMergePolicy::Union)?.map_labels(|_, l| *l = Labels::new());
            let o = mark_non_safe(&o, spec)?;
            let w = fresh_event("w", &refs);
            let e = extend_observer(&o, &w)?;
            (nonblocking(&e), Pipeline::Monolithic, e.num_states(), e.num_transitions(), Vec::new())
        }
        (_, true) => {
            let out = run_algorithm1(project, options.method, options.candidates)?;
            let holds = match options.method {
                Method::Vb => !has_non_safe(&out.result),
                Method::Nb => nonblocking(&out.result),
            };
            (holds, Pipeline::Incremental, out.result.num_states(), out.result.num_transitions(), out.steps)
        }
        (_, false) => {
            let out = run_shared(project, options.candidates)?;
            (!has_non_safe(&out.result), Pipeline::Shared, out.result.num_states(), out.result.num_transitions(), out.steps)
        }
    };
    let witness = if holds {
        None
    } else {
        let refs: Vec<&TransitionSystem> = project.members.iter().collect();
        witness(&refs, spec)?
    };
    Ok(Report { verdict: Verdict::new(property, holds), witness, pipeline, states, transitions, steps })
}
