//! Incremental observer generation with abstraction, with and without
//! shared unobservable events.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::abstraction::{nb_abstract, vb_abstract, vb_abstract_deterministic};
use crate::compose::{compose, LabelMergePolicy};
use crate::error::Error;
use crate::event::Label;
use crate::observer::observe_product;
use crate::origin::Origin;
use crate::project::Project;
use crate::security::{extended_locals, local_observer, local_unobservable, Method, Property};
use crate::ts::{StateId, Transition, TransitionSystem, NON_SAFE, STS_PREFIX};

/// Default number of smallest pool members considered by [`select_pair`].
pub const DEFAULT_CANDIDATES: usize = 4;

/// One abstraction step of a pipeline.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepStats {
    pub step: usize,
    /// Subsystems represented by the abstracted system.
    pub omega: Vec<usize>,
    pub states_before: usize,
    pub states_after: usize,
    pub transitions_before: usize,
    pub transitions_after: usize,
    /// Events hidden in this step.
    pub hidden: Vec<String>,
    /// Events replaced by ε in this step.
    pub epsilon: Vec<String>,
}

/// The pool of partially merged subsystems.
#[derive(Clone, Debug)]
pub struct PipelineState {
    /// Ω sets with their current systems. The Ω sets partition the subsystems.
    pub pool: Vec<(Vec<usize>, TransitionSystem)>,
    /// Shared unobservable events not yet replaced by ε.
    pub pending_eps: BTreeSet<String>,
    pub candidates: usize,
}

impl PipelineState {
    /// For every event, the pool positions using it.
    pub fn event_locality(&self) -> BTreeMap<String, Vec<usize>> {
        let mut out: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (k, (_, ts)) in self.pool.iter().enumerate() {
            for n in ts.events().names() {
                out.entry(n.to_string()).or_default().push(k);
            }
        }
        out
    }
}

fn ratio_gt(a: (usize, usize), b: (usize, usize)) -> bool {
    a.0 * b.1 > b.0 * a.1
}

/// Picks two pool positions to merge next.
///
/// Candidates are the `candidates` members with fewest transitions. Among
/// their pairs the one whose merge makes the largest share of its events
/// local wins; pairs that make a pending unobservable event local come first.
pub fn select_pair(state: &PipelineState) -> (usize, usize) {
    assert!(state.pool.len() >= 2, "select_pair needs two pool members");
    let mut order: Vec<usize> = (0..state.pool.len()).collect();
    order.sort_by(|&a, &b| {
        let (oa, ta) = &state.pool[a];
        let (ob, tb) = &state.pool[b];
        ta.num_transitions().cmp(&tb.num_transitions()).then_with(|| oa.cmp(ob))
    });
    order.truncate(state.candidates.max(2));
    order.sort_by(|&a, &b| state.pool[a].0.cmp(&state.pool[b].0));
    let locality = state.event_locality();
    type Score = ((usize, usize), bool, (usize, usize));
    let mut best: Option<Score> = None;
    for (x, &i) in order.iter().enumerate() {
        for &j in &order[x + 1..] {
            let mut union = 0;
            let mut local = 0;
            let mut clears_pending = false;
            for (e, owners) in &locality {
                let in_i = owners.contains(&i);
                let in_j = owners.contains(&j);
                if !(in_i || in_j) {
                    continue;
                }
                union += 1;
                let outside = owners.iter().any(|&k| k != i && k != j);
                if !outside {
                    local += 1;
                    if in_i && in_j && state.pending_eps.contains(e) {
                        clears_pending = true;
                    }
                }
            }
            let score = (local, union.max(1));
            let better = match best {
                None => true,
                Some((_, bp, bs)) => (clears_pending && !bp) || (clears_pending == bp && ratio_gt(score, bs)),
            };
            if better {
                best = Some(((i, j), clears_pending, score));
            }
        }
    }
    let (i, j) = best.expect("at least one pair").0;
    (i, j)
}

/// Removes the selected pair from the pool, in Ω order.
fn take_pair(state: &mut PipelineState) -> (Vec<usize>, TransitionSystem, Vec<usize>, TransitionSystem) {
    let (i, j) = select_pair(state);
    let (hi, lo) = if i > j { (i, j) } else { (j, i) };
    let (oh, th) = state.pool.remove(hi);
    let (ol, tl) = state.pool.remove(lo);
    if hi == i {
        (oh, th, ol, tl)
    } else {
        (ol, tl, oh, th)
    }
}

/// Output of a pipeline run.
#[derive(Clone, Debug)]
pub struct PipelineOutput {
    pub result: TransitionSystem,
    pub steps: Vec<StepStats>,
}

/// Observable events of `ts` that no other pool member uses.
fn local_observable(state: &PipelineState, k: usize) -> Vec<String> {
    let locality = state.event_locality();
    let ts = &state.pool[k].1;
    ts.events()
        .observable()
        .filter(|e| locality[*e].len() == 1)
        .map(String::from)
        .collect()
}

fn abstract_with(ts: &TransitionSystem, hide: &[String], method: Method) -> Result<TransitionSystem, Error> {
    match method {
        Method::Vb => vb_abstract(ts, hide),
        Method::Nb => nb_abstract(ts, hide),
    }
}

fn record(
    steps: &mut Vec<StepStats>,
    omega: &[usize],
    before: &TransitionSystem,
    after: &TransitionSystem,
    hidden: Vec<String>,
    epsilon: Vec<String>,
) {
    steps.push(StepStats {
        step: steps.len(),
        omega: omega.to_vec(),
        states_before: before.num_states(),
        states_after: after.num_states(),
        transitions_before: before.num_transitions(),
        transitions_after: after.num_transitions(),
        hidden,
        epsilon,
    });
}

/// Incremental observer generation with abstraction for projects without
/// shared unobservable events.
///
/// With [`Method::Vb`] the pool holds local observers labelled with `N`; with
/// [`Method::Nb`] it holds extended observers and the result is checked for
/// blocking. Every pool member is abstracted as soon as it is created, hiding
/// the observable events that have become local to it.
pub fn run_algorithm1(project: &Project, method: Method, candidates: usize) -> Result<PipelineOutput, Error> {
    let shared = project.shared_unobservable();
    if !shared.is_empty() {
        return Err(Error::SharedUnobservable(shared));
    }
    let spec = &project.security;
    let mut locals = Vec::with_capacity(project.members.len());
    let mut eps = Vec::with_capacity(project.members.len());
    for (i, m) in project.members.iter().enumerate() {
        let e = local_unobservable(project, i);
        locals.push(local_observer(m, spec, &e)?);
        eps.push(e);
    }
    if method == Method::Nb {
        locals = extended_locals(&project.members, &locals, spec.property)?;
    }
    let mut state = PipelineState {
        pool: locals.into_iter().enumerate().map(|(i, o)| (alloc::vec![i], o)).collect(),
        pending_eps: BTreeSet::new(),
        candidates,
    };
    let mut steps = Vec::new();
    let n = state.pool.len();
    for k in 0..n {
        let hide = local_observable(&state, k);
        let a = abstract_with(&state.pool[k].1, &hide, method)?;
        record(&mut steps, &state.pool[k].0, &state.pool[k].1, &a, hide, core::mem::take(&mut eps[k]));
        state.pool[k].1 = a;
    }
    let policy = match method {
        Method::Vb => spec.property.compose_policy(),
        Method::Nb => LabelMergePolicy::Union,
    };
    while state.pool.len() > 1 {
        let (oi, ti, oj, tj) = take_pair(&mut state);
        let g = compose(&ti, &tj, policy)?;
        let mut omega: Vec<usize> = oi.into_iter().chain(oj).collect();
        omega.sort_unstable();
        state.pool.push((omega, g));
        let k = state.pool.len() - 1;
        let hide = local_observable(&state, k);
        let a = abstract_with(&state.pool[k].1, &hide, method)?;
        record(&mut steps, &state.pool[k].0, &state.pool[k].1, &a, hide, Vec::new());
        state.pool[k].1 = a;
    }
    let (_, result) = state.pool.pop().expect("nonempty pool");
    Ok(PipelineOutput { result, steps })
}

/// Names of the two labels marking the source and target of transition `k`.
pub fn sts_labels(k: u64) -> (String, String) {
    (format!("{STS_PREFIX}{k}:s"), format!("{STS_PREFIX}{k}:t"))
}

/// Labels the source and target of every transition on a `retained` event
/// with a fresh pair, numbered from `*counter`.
pub fn attach_sts_labels(ts: &TransitionSystem, retained: &[impl AsRef<str>], counter: &mut u64) -> TransitionSystem {
    let ids: BTreeSet<u32> = retained.iter().filter_map(|e| ts.events().id(e.as_ref())).map(|e| e.0).collect();
    if ids.is_empty() {
        return ts.clone();
    }
    let mut extra: Vec<Vec<String>> = alloc::vec![Vec::new(); ts.num_states()];
    for t in ts.transitions() {
        if let Label::Event(e) = t.label {
            if ids.contains(&e.0) {
                let (s, d) = sts_labels(*counter);
                *counter += 1;
                extra[t.source.index()].push(s);
                extra[t.target.index()].push(d);
            }
        }
    }
    ts.map_labels(|x, l| {
        for n in &extra[x.index()] {
            l.insert(n);
        }
    })
}

fn strip_sts(ts: &TransitionSystem) -> TransitionSystem {
    ts.map_labels(|_, l| l.retain(|n| !n.starts_with(STS_PREFIX)))
}

/// Transitions `x -a-> x'` that become a nondeterministic choice once the
/// `retained` events are replaced by ε.
///
/// For every state and event `a`, the targets are all `a`-successors of
/// states reachable through retained events other than `a`. Two or more
/// targets make every transition into them a reported choice.
pub fn detect_fnc(ts: &TransitionSystem, retained: &[impl AsRef<str>]) -> Vec<Transition> {
    let ids: BTreeSet<u32> = retained.iter().filter_map(|e| ts.events().id(e.as_ref())).map(|e| e.0).collect();
    let mut out: BTreeSet<Transition> = BTreeSet::new();
    let mut seen = alloc::vec![false; ts.num_states()];
    for x in ts.state_ids() {
        for a in ts.events().ids() {
            let mut reach = Vec::new();
            let mut stack = alloc::vec![x];
            seen.iter_mut().for_each(|s| *s = false);
            seen[x.index()] = true;
            while let Some(y) = stack.pop() {
                reach.push(y);
                for t in ts.outgoing(y) {
                    if let Label::Event(e) = t.label {
                        if e != a && ids.contains(&e.0) && !seen[t.target.index()] {
                            seen[t.target.index()] = true;
                            stack.push(t.target);
                        }
                    }
                }
            }
            let mut hits: Vec<&Transition> = Vec::new();
            for &y in &reach {
                hits.extend(ts.outgoing(y).iter().filter(|t| t.label == Label::Event(a)));
            }
            let mut targets: Vec<StateId> = hits.iter().map(|t| t.target).collect();
            targets.sort_unstable();
            targets.dedup();
            if targets.len() >= 2 {
                out.extend(hits.into_iter().copied());
            }
        }
    }
    out.into_iter().collect()
}

/// Events that must stay visible while `retained` events are pending: those
/// enabled at both ends of a nonempty path of retained events. In a product
/// the path may move another member, so hiding such an event would merge
/// choices that observation later has to keep apart.
fn deferred_events(ts: &TransitionSystem, retained: &BTreeSet<String>) -> BTreeSet<String> {
    let ids: BTreeSet<u32> = retained.iter().filter_map(|e| ts.events().id(e)).map(|e| e.0).collect();
    let mut out = BTreeSet::new();
    if ids.is_empty() {
        return out;
    }
    let enabled = |x: StateId| ts.outgoing(x).iter().filter_map(|t| match t.label {
        Label::Event(e) => Some(e),
        _ => None,
    });
    let mut seen = alloc::vec![false; ts.num_states()];
    for x in ts.state_ids() {
        let here: BTreeSet<_> = enabled(x).filter(|e| !ids.contains(&e.0)).collect();
        if here.is_empty() {
            continue;
        }
        seen.iter_mut().for_each(|s| *s = false);
        let mut stack: Vec<StateId> = Vec::new();
        for t in ts.outgoing(x) {
            if matches!(t.label, Label::Event(e) if ids.contains(&e.0)) && !seen[t.target.index()] {
                seen[t.target.index()] = true;
                stack.push(t.target);
            }
        }
        while let Some(y) = stack.pop() {
            for e in enabled(y).filter(|e| here.contains(e)) {
                out.insert(ts.events().name(e).to_string());
            }
            for t in ts.outgoing(y) {
                if matches!(t.label, Label::Event(e) if ids.contains(&e.0)) && !seen[t.target.index()] {
                    seen[t.target.index()] = true;
                    stack.push(t.target);
                }
            }
        }
    }
    out
}

/// Local observable events of pool member `k` that can be hidden now.
fn hideable_shared(state: &PipelineState, k: usize) -> Vec<String> {
    let deferred = deferred_events(&state.pool[k].1, &state.pending_eps);
    local_observable(state, k).into_iter().filter(|e| !deferred.contains(e)).collect()
}

fn fnc_error(ts: &TransitionSystem, found: &[Transition]) -> Error {
    Error::FutureNondeterministicChoice(
        found
            .iter()
            .map(|t| (ts.state(t.source).origin.name(), ts.label_name(t.label).to_string(), ts.state(t.target).origin.name()))
            .collect(),
    )
}

/// Incremental pipeline for projects with shared unobservable events.
///
/// Shared unobservable events stay as ordinary events, and the states around
/// their transitions carry unique STS labels so abstraction cannot merge
/// them. Once such an event is used by a single pool member it is replaced by
/// ε in a partial observer of that member. Abstraction is visible
/// bisimulation that keeps visible choices deterministic, and events enabled
/// on both sides of a pending unobservable path are hidden only after that
/// path has been observed.
pub fn run_shared(project: &Project, candidates: usize) -> Result<PipelineOutput, Error> {
    let spec = &project.security;
    let property = spec.property;
    let shared: BTreeSet<String> = project.shared_unobservable().into_iter().collect();
    let mut counter = 0u64;
    let mut state = PipelineState { pool: Vec::new(), pending_eps: shared.clone(), candidates };
    let mut eps_log = Vec::new();
    for (i, m) in project.members.iter().enumerate() {
        let eps = local_unobservable(project, i);
        let retained: Vec<&str> = m.events().unobservable().filter(|e| shared.contains(*e)).collect();
        let o = attach_sts_labels(&local_observer(m, spec, &eps)?, &retained, &mut counter);
        let found = detect_fnc(&o, &retained);
        if !found.is_empty() {
            return Err(fnc_error(&o, &found));
        }
        state.pool.push((alloc::vec![i], o));
        eps_log.push(eps);
    }
    let mut steps = Vec::new();
    for k in 0..state.pool.len() {
        let hide = hideable_shared(&state, k);
        let a = vb_abstract_deterministic(&state.pool[k].1, &hide)?;
        record(&mut steps, &state.pool[k].0, &state.pool[k].1, &a, hide, core::mem::take(&mut eps_log[k]));
        state.pool[k].1 = a;
    }
    while state.pool.len() > 1 {
        let (oi, ti, oj, tj) = take_pair(&mut state);
        let g = compose(&ti, &tj, property.compose_policy())?;
        let mut omega: Vec<usize> = oi.into_iter().chain(oj).collect();
        omega.sort_unstable();
        let others: BTreeSet<&str> = state.pool.iter().flat_map(|(_, t)| t.events().names()).collect();
        let newly_local: Vec<String> =
            state.pending_eps.iter().filter(|e| g.events().contains(e) && !others.contains(e.as_str())).cloned().collect();
        for e in &newly_local {
            state.pending_eps.remove(e);
        }
        let g = if newly_local.is_empty() {
            g
        } else {
            let looped = |t: &TransitionSystem| -> BTreeSet<Origin> {
                t.transitions()
                    .iter()
                    .filter(|e| e.label == Label::Tau && e.source == e.target)
                    .map(|e| t.state(e.source).origin.clone())
                    .collect()
            };
            let loops = [looped(&ti), looped(&tj)];
            let owners = |c: &[Origin]| -> Vec<usize> {
                if c.len() != 2 {
                    return Vec::new();
                }
                (0..2).filter(|&i| loops[i].contains(&c[i])).collect()
            };
            let o = observe_product(&g, &newly_local, LabelMergePolicy::Intersection, Some(&owners))?;
            let o = if property == Property::Csa {
                let flags: Vec<bool> = o.states().iter().map(|s| s.origin.members().is_some_and(|m| m.len() == 1)).collect();
                o.map_labels(|x, l| {
                    if !flags[x.index()] {
                        l.remove(NON_SAFE);
                    }
                })
            } else {
                o
            };
            let retained: Vec<&str> =
                o.events().unobservable().filter(|e| state.pending_eps.contains(*e)).collect();
            attach_sts_labels(&strip_sts(&o), &retained, &mut counter)
        };
        state.pool.push((omega, g));
        let k = state.pool.len() - 1;
        let hide = hideable_shared(&state, k);
        let a = vb_abstract_deterministic(&state.pool[k].1, &hide)?;
        record(&mut steps, &state.pool[k].0, &state.pool[k].1, &a, hide, newly_local);
        state.pool[k].1 = a;
    }
    let (_, result) = state.pool.pop().expect("nonempty pool");
    Ok(PipelineOutput { result: strip_sts(&result), steps })
}
