//! Observer-based supervisors enforcing opacity or anonymity.
//!
//! All unobservable events must be local and uncontrollable, so the composed
//! observer is the product of local observers and the supervisor only ever
//! disables observable events.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::compose::{compose, compose_all, LabelMergePolicy};
use crate::error::Error;
use crate::event::{EventId, Label};
use crate::origin::Origin;
use crate::project::Project;
use crate::security::{
    detector_for, local_observer, local_unobservable, w_events, with_w_loops, DETECTOR_PREFIX,
};
use crate::ts::{StateId, TransitionSystem, NON_SAFE};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SynthesisVerdict {
    /// No non-safe state is reachable; the supervisor disables nothing.
    AlreadySafe,
    /// A nonempty supervisor avoids every non-safe state.
    Enforced,
    /// Every initial state is forbidden.
    Unenforceable,
}

impl fmt::Display for SynthesisVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SynthesisVerdict::AlreadySafe => "ALREADY_SAFE",
            SynthesisVerdict::Enforced => "ENFORCED",
            SynthesisVerdict::Unenforceable => "UNENFORCEABLE",
        })
    }
}

#[derive(Clone, Debug)]
pub struct SupervisorResult {
    pub verdict: SynthesisVerdict,
    /// The system the supervisor restricts.
    pub plant: TransitionSystem,
    /// `None` when unenforceable.
    pub supervisor: Option<TransitionSystem>,
    /// Origins of the removed observer states.
    pub removed_states: BTreeSet<Origin>,
    /// Events disabled in each supervisor state.
    pub disabled: BTreeMap<StateId, BTreeSet<String>>,
}

/// States labelled non-safe.
pub fn forbidden_states(ts: &TransitionSystem) -> Vec<StateId> {
    ts.state_ids().filter(|x| ts.has_label(*x, NON_SAFE)).collect()
}

/// States from which `forbidden` is reachable by uncontrollable events only,
/// including `forbidden` itself.
pub fn extended_forbidden(
    obs: &TransitionSystem,
    forbidden: impl IntoIterator<Item = StateId>,
    uncontrollable: &[EventId],
) -> BTreeSet<StateId> {
    let unctrl: BTreeSet<EventId> = uncontrollable.iter().copied().collect();
    let seed: Vec<StateId> = forbidden.into_iter().collect();
    let mut bad = vec![false; obs.num_states()];
    backward_close(obs, &mut bad, seed, |l| matches!(l, Label::Event(e) if unctrl.contains(&e)));
    bad.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| StateId(i as u32)).collect()
}

/// Marks every state that reaches a state in `seed` (or already marked in
/// `set`) through transitions accepted by `follow`.
fn backward_close(
    ts: &TransitionSystem,
    set: &mut [bool],
    seed: impl IntoIterator<Item = StateId>,
    follow: impl Fn(Label) -> bool,
) {
    let n = ts.num_states();
    let mut preds: Vec<Vec<u32>> = vec![Vec::new(); n];
    for t in ts.transitions() {
        if follow(t.label) {
            preds[t.target.index()].push(t.source.0);
        }
    }
    let mut queue: VecDeque<u32> = VecDeque::new();
    for s in seed {
        set[s.index()] = true;
    }
    queue.extend((0..n as u32).filter(|&i| set[i as usize]));
    while let Some(y) = queue.pop_front() {
        for &x in &preds[y as usize] {
            if !set[x as usize] {
                set[x as usize] = true;
                queue.push_back(x);
            }
        }
    }
}

fn check_assumptions(project: &Project) -> Result<Vec<TransitionSystem>, Error> {
    let shared = project.shared_unobservable();
    if !shared.is_empty() {
        return Err(Error::SharedUnobservable(shared));
    }
    let members = project.effective_members();
    for m in &members {
        if let Some((_, n, _)) = m.events().iter().find(|(_, _, a)| !a.observable && a.controllable) {
            return Err(Error::ControllableUnobservable(n.to_string()));
        }
    }
    Ok(members)
}

fn local_observers(project: &Project, members: &[TransitionSystem]) -> Result<Vec<TransitionSystem>, Error> {
    members
        .iter()
        .enumerate()
        .map(|(i, m)| local_observer(m, &project.security, &local_unobservable(project, i)))
        .collect()
}

/// The composed observer with non-safe states labelled `N`.
pub fn composed_observer(project: &Project) -> Result<TransitionSystem, Error> {
    let members = check_assumptions(project)?;
    let locals = local_observers(project, &members)?;
    let refs: Vec<&TransitionSystem> = locals.iter().collect();
    compose_all(&refs, project.security.property.compose_policy())
}

/// Restricts `plant` to `keep` and collects the disabled events, skipping
/// those in `ignore`.
fn restrict_plant(
    plant: TransitionSystem,
    keep: &[bool],
    removed_states: BTreeSet<Origin>,
    already_safe: bool,
    ignore: &[String],
) -> SupervisorResult {
    let Some((sup, map)) = plant.restrict_mapped(keep) else {
        return SupervisorResult {
            verdict: SynthesisVerdict::Unenforceable,
            plant,
            supervisor: None,
            removed_states,
            disabled: BTreeMap::new(),
        };
    };
    let mut disabled = BTreeMap::new();
    for (i, x) in map.iter().enumerate() {
        let off: BTreeSet<String> = plant
            .outgoing(*x)
            .iter()
            .filter(|t| !keep[t.target.index()])
            .map(|t| plant.label_name(t.label).to_string())
            .filter(|n| !ignore.contains(n))
            .collect();
        if !off.is_empty() {
            disabled.insert(StateId(i as u32), off);
        }
    }
    let verdict = if already_safe { SynthesisVerdict::AlreadySafe } else { SynthesisVerdict::Enforced };
    SupervisorResult { verdict, plant, supervisor: Some(sup), removed_states, disabled }
}

fn uncontrollable_ids(ts: &TransitionSystem) -> Vec<EventId> {
    ts.events().iter().filter(|(_, _, a)| !a.controllable).map(|(id, _, _)| id).collect()
}

/// Maximally permissive supervisor: the composed observer without the
/// extended forbidden states.
pub fn synthesize(project: &Project) -> Result<SupervisorResult, Error> {
    let obs = composed_observer(project)?;
    let forbidden = forbidden_states(&obs);
    let ext = extended_forbidden(&obs, forbidden.iter().copied(), &uncontrollable_ids(&obs));
    let mut keep = vec![true; obs.num_states()];
    for x in &ext {
        keep[x.index()] = false;
    }
    let removed = ext.iter().map(|x| obs.state(*x).origin.clone()).collect();
    Ok(restrict_plant(obs, &keep, removed, forbidden.is_empty(), &[]))
}

fn is_detector(o: &Origin) -> bool {
    o.as_atom().is_some_and(|a| a.system.starts_with(DETECTOR_PREFIX))
}

fn strip_detector(o: &Origin) -> Origin {
    match o.components() {
        Some(parts) => Origin::Tuple(parts.iter().filter(|p| !is_detector(p)).cloned().collect()),
        None => o.clone(),
    }
}

/// Supervisor from nonblocking synthesis on the extended observer, where the
/// `w` events are uncontrollable. The detector and `w` events are removed
/// from the result.
pub fn synthesize_via_nonblocking(project: &Project) -> Result<SupervisorResult, Error> {
    let members = check_assumptions(project)?;
    let locals = local_observers(project, &members)?;
    let ws = w_events(&members, project.security.property);
    let mut alphabet = locals[0].events().clone();
    for o in &locals[1..] {
        alphabet = alphabet.union(o.events())?;
    }
    let looped = locals
        .iter()
        .zip(&ws)
        .map(|(o, w)| with_w_loops(&o.all_marked(), w))
        .collect::<Result<Vec<_>, _>>()?;
    let refs: Vec<&TransitionSystem> = looped.iter().collect();
    let obs = compose_all(&refs, project.security.property.compose_policy())?;
    let plant = compose(&obs, &detector_for(&alphabet, &ws)?, LabelMergePolicy::Union)?;

    let mut ws_sorted = ws.clone();
    ws_sorted.sort();
    ws_sorted.dedup();
    let w_ids: Vec<EventId> = ws_sorted.iter().filter_map(|w| plant.events().id(w)).collect();
    let already_safe = !plant.transitions().iter().any(|t| matches!(t.label, Label::Event(e) if w_ids.contains(&e)));

    let n = plant.num_states();
    let mut keep = vec![true; n];
    loop {
        let before = keep.iter().filter(|k| **k).count();
        let mut co = vec![false; n];
        let marked: Vec<StateId> = plant.state_ids().filter(|x| keep[x.index()] && plant.is_marked(*x)).collect();
        let kept = keep.clone();
        backward_close_within(&plant, &mut co, marked, &kept);
        for x in 0..n {
            keep[x] &= co[x];
        }
        let mut bad: Vec<bool> = keep.iter().map(|k| !k).collect();
        backward_close(&plant, &mut bad, [], |l| match l {
            Label::Event(e) => !plant.events().attr(e).controllable,
            _ => true,
        });
        for x in 0..n {
            keep[x] &= !bad[x];
        }
        if keep.iter().filter(|k| **k).count() == before {
            break;
        }
    }
    let removed = plant
        .state_ids()
        .filter(|x| !keep[x.index()] && plant.is_marked(*x))
        .map(|x| strip_detector(&plant.state(x).origin))
        .collect();
    let mut result = restrict_plant(plant, &keep, removed, already_safe, &ws_sorted);
    if let Some(sup) = result.supervisor.take() {
        result.supervisor = Some(sup.without_events(&ws_sorted)?.map_origins(strip_detector));
    }
    Ok(result)
}

/// Backward reachability restricted to transitions between states in `within`.
fn backward_close_within(ts: &TransitionSystem, set: &mut [bool], seed: Vec<StateId>, within: &[bool]) {
    let n = ts.num_states();
    let mut preds: Vec<Vec<u32>> = vec![Vec::new(); n];
    for t in ts.transitions() {
        if within[t.source.index()] && within[t.target.index()] {
            preds[t.target.index()].push(t.source.0);
        }
    }
    let mut queue: VecDeque<u32> = VecDeque::new();
    for s in seed {
        if !set[s.index()] {
            set[s.index()] = true;
            queue.push_back(s.0);
        }
    }
    while let Some(y) = queue.pop_front() {
        for &x in &preds[y as usize] {
            if !set[x as usize] {
                set[x as usize] = true;
                queue.push_back(x);
            }
        }
    }
}

const NONE: u32 = u32::MAX;

/// Union-find over supervisor states where every class keeps the union of
/// its enabled and disabled event sets and one successor per event.
struct Cover {
    words: usize,
    events: usize,
    parent: Vec<u32>,
    size: Vec<u32>,
    head: Vec<u32>,
    enabled: Vec<u64>,
    disabled: Vec<u64>,
    succ: Vec<u32>,
    log: Vec<Undo>,
}

struct Undo {
    child: u32,
    root: u32,
    size: u32,
    head: u32,
    enabled: Vec<u64>,
    disabled: Vec<u64>,
    succ: Vec<u32>,
}

impl Cover {
    fn new(sup: &TransitionSystem, disabled: &BTreeMap<StateId, BTreeSet<String>>) -> Cover {
        let n = sup.num_states();
        let events = sup.events().len();
        let words = events.div_ceil(64).max(1);
        let mut c = Cover {
            words,
            events,
            parent: (0..n as u32).collect(),
            size: vec![1; n],
            head: (0..n as u32).collect(),
            enabled: vec![0; n * words],
            disabled: vec![0; n * words],
            succ: vec![NONE; n * events],
            log: Vec::new(),
        };
        for t in sup.transitions() {
            if let Label::Event(e) = t.label {
                let x = t.source.index();
                c.enabled[x * words + e.index() / 64] |= 1 << (e.index() % 64);
                c.succ[x * events + e.index()] = t.target.0;
            }
        }
        for (x, names) in disabled {
            for name in names {
                if let Some(e) = sup.events().id(name) {
                    c.disabled[x.index() * words + e.index() / 64] |= 1 << (e.index() % 64);
                }
            }
        }
        c
    }

    fn find(&self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            x = self.parent[x as usize];
        }
        x
    }

    fn bits(v: &[u64], x: u32, words: usize) -> &[u64] {
        &v[x as usize * words..(x as usize + 1) * words]
    }

    fn consistent(&self, a: u32, b: u32) -> bool {
        let w = self.words;
        let (ea, da) = (Self::bits(&self.enabled, a, w), Self::bits(&self.disabled, a, w));
        let (eb, db) = (Self::bits(&self.enabled, b, w), Self::bits(&self.disabled, b, w));
        (0..w).all(|i| ea[i] & db[i] == 0 && eb[i] & da[i] == 0)
    }

    /// Merges the classes of `a` and `b` and every pair of successor classes
    /// this forces. On failure the cover is left unchanged.
    fn merge(&mut self, a: u32, b: u32) -> bool {
        let mut pending = vec![(a, b)];
        while let Some((x, y)) = pending.pop() {
            let (rx, ry) = (self.find(x), self.find(y));
            if rx == ry {
                continue;
            }
            if !self.consistent(rx, ry) {
                self.rollback();
                return false;
            }
            let (root, child) = if self.size[rx as usize] >= self.size[ry as usize] { (rx, ry) } else { (ry, rx) };
            let (w, k) = (self.words, self.events);
            let (r, c) = (root as usize, child as usize);
            self.log.push(Undo {
                child,
                root,
                size: self.size[r],
                head: self.head[r],
                enabled: self.enabled[r * w..(r + 1) * w].to_vec(),
                disabled: self.disabled[r * w..(r + 1) * w].to_vec(),
                succ: self.succ[r * k..(r + 1) * k].to_vec(),
            });
            self.parent[c] = root;
            self.size[r] += self.size[c];
            self.head[r] = self.head[r].min(self.head[c]);
            for i in 0..w {
                self.enabled[r * w + i] |= self.enabled[c * w + i];
                self.disabled[r * w + i] |= self.disabled[c * w + i];
            }
            for e in 0..k {
                let (sr, sc) = (self.succ[r * k + e], self.succ[c * k + e]);
                if sr == NONE {
                    self.succ[r * k + e] = sc;
                } else if sc != NONE {
                    pending.push((sr, sc));
                }
            }
        }
        self.log.clear();
        true
    }

    fn rollback(&mut self) {
        let (w, k) = (self.words, self.events);
        while let Some(u) = self.log.pop() {
            let r = u.root as usize;
            self.parent[u.child as usize] = u.child;
            self.size[r] = u.size;
            self.head[r] = u.head;
            self.enabled[r * w..(r + 1) * w].copy_from_slice(&u.enabled);
            self.disabled[r * w..(r + 1) * w].copy_from_slice(&u.disabled);
            self.succ[r * k..(r + 1) * k].copy_from_slice(&u.succ);
        }
    }

    fn is_head(&self, x: u32) -> bool {
        self.head[self.find(x) as usize] == x
    }
}

#[derive(Clone, Debug)]
pub struct ReducedSupervisor {
    pub supervisor: TransitionSystem,
    /// Events disabled in each reduced state.
    pub disabled: BTreeMap<StateId, BTreeSet<String>>,
}

/// Reduced supervisor: supervisor states with consistent control actions are
/// merged greedily in state order into a control cover, then events that are never disabled
/// and only label self-loops are dropped. The closed loop with the plant is
/// unchanged.
pub fn reduce_supervisor(result: &SupervisorResult) -> Option<ReducedSupervisor> {
    let sup = result.supervisor.as_ref()?;
    let n = sup.num_states() as u32;
    let mut cover = Cover::new(sup, &result.disabled);
    for i in 0..n {
        if !cover.is_head(i) {
            continue;
        }
        for j in i + 1..n {
            if cover.is_head(j) && cover.find(i) != cover.find(j) {
                cover.merge(i, j);
            }
        }
    }
    let mut class_of = vec![NONE; n as usize];
    let mut members: Vec<Vec<StateId>> = Vec::new();
    for x in 0..n {
        let r = cover.find(x) as usize;
        if class_of[r] == NONE {
            class_of[r] = members.len() as u32;
            members.push(Vec::new());
        }
        members[class_of[r] as usize].push(StateId(x));
    }
    let class = |x: u32| StateId(class_of[cover.find(x) as usize]);
    let states = members
        .iter()
        .map(|m| crate::ts::State {
            origin: Origin::class(m.iter().map(|x| &sup.state(*x).origin)),
            labels: crate::ts::Labels::new(),
            marked: true,
        })
        .collect();
    let transitions: Vec<crate::ts::Transition> = sup
        .transitions()
        .iter()
        .map(|t| crate::ts::Transition { source: class(t.source.0), label: t.label, target: class(t.target.0) })
        .collect();
    let initial = sup.initial().iter().map(|x| class(x.0)).collect();
    let reduced = TransitionSystem::from_parts(
        sup.name(),
        sup.events().clone(),
        states,
        transitions,
        initial,
        crate::ts::Marking::Implicit,
    )
    .expect("classes of a valid system");
    let ever_disabled: BTreeSet<&str> = result.disabled.values().flatten().map(String::as_str).collect();
    let drop: Vec<&str> = reduced
        .events()
        .iter()
        .filter(|(id, name, _)| {
            !ever_disabled.contains(name)
                && reduced.transitions().iter().all(|t| t.label != Label::Event(*id) || t.source == t.target)
        })
        .map(|(_, name, _)| name)
        .collect();
    let mut disabled: BTreeMap<StateId, BTreeSet<String>> = BTreeMap::new();
    for (x, names) in &result.disabled {
        disabled.entry(class(x.0)).or_default().extend(names.iter().cloned());
    }
    Some(ReducedSupervisor { supervisor: reduced.without_events(&drop).expect("known events"), disabled })
}
