//! Subset construction.

use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use hashbrown::HashMap;

use crate::compose::LabelMergePolicy;
use crate::error::Error;
use crate::event::Label;
use crate::origin::Origin;
use crate::ts::{replace_with_epsilon, State, StateId, Transition, TransitionSystem, STS_PREFIX};

/// Identity of a τ step: the tuple positions it changes with their old and
/// new components, a self-loop of one position, or the bare target otherwise.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Move {
    Part(Vec<(usize, Origin, Origin)>),
    Loop(usize, Origin),
    Target(StateId),
}

/// Positions of a product state whose component has a τ self-loop.
pub(crate) type LoopOwners<'a> = &'a dyn Fn(&[Origin]) -> Vec<usize>;

fn tau_moves(g: &TransitionSystem, x: StateId, y: StateId, owners: Option<LoopOwners>, out: &mut Vec<Move>) {
    if let (Some(a), Some(b)) = (g.state(x).origin.components(), g.state(y).origin.components()) {
        if a.len() == b.len() {
            let diff: Vec<(usize, Origin, Origin)> = a
                .iter()
                .zip(b)
                .enumerate()
                .filter(|(_, (p, q))| p != q)
                .map(|(i, (p, q))| (i, p.clone(), q.clone()))
                .collect();
            if !diff.is_empty() {
                out.push(Move::Part(diff));
                return;
            }
            if let Some(owners) = owners {
                let before = out.len();
                out.extend(owners(a).into_iter().map(|i| Move::Loop(i, a[i].clone())));
                if out.len() > before {
                    return;
                }
            }
        }
    }
    out.push(Move::Target(y));
}

/// Observer of `ts` after replacing `epsilon_events` by ε.
///
/// Unobservable events not listed stay as ordinary labels, giving a partial
/// observer. Observable choices are determinized. τ steps are kept apart:
/// every distinct τ move leads from `Y` to the ε-closure of its targets. In a
/// product the move is the component step, so a member's τ edge taken from
/// several tuples of `Y` gives one successor. A τ self-loop of a product state
/// does not say which member moved and is kept per state.
pub fn observe(
    ts: &TransitionSystem,
    epsilon_events: &[impl AsRef<str>],
    labels: LabelMergePolicy,
) -> Result<TransitionSystem, Error> {
    observe_product(ts, epsilon_events, labels, None)
}

/// [`observe`] where `owners` tells which members a τ self-loop can come from.
pub(crate) fn observe_product(
    ts: &TransitionSystem,
    epsilon_events: &[impl AsRef<str>],
    labels: LabelMergePolicy,
    owners: Option<LoopOwners>,
) -> Result<TransitionSystem, Error> {
    let g = replace_with_epsilon(ts, epsilon_events)?;
    let mut index: HashMap<Box<[StateId]>, u32> = HashMap::new();
    let mut blocks: Vec<Box<[StateId]>> = Vec::new();
    let mut intern = |b: Vec<StateId>, blocks: &mut Vec<Box<[StateId]>>| -> u32 {
        if let Some(&id) = index.get(&b[..]) {
            return id;
        }
        let id = blocks.len() as u32;
        let b: Box<[StateId]> = b.into();
        index.insert(b.clone(), id);
        blocks.push(b);
        id
    };
    let init = intern(g.closure_unchecked(g.initial()), &mut blocks);
    let mut transitions = Vec::new();
    let mut edges: Vec<(Label, Option<Move>, StateId)> = Vec::new();
    let mut moves: Vec<Move> = Vec::new();
    let mut next = 0usize;
    while next < blocks.len() {
        edges.clear();
        for &x in blocks[next].iter() {
            for t in g.outgoing(x) {
                match t.label {
                    Label::Epsilon => {}
                    Label::Tau => {
                        moves.clear();
                        tau_moves(&g, x, t.target, owners, &mut moves);
                        edges.extend(moves.drain(..).map(|m| (Label::Tau, Some(m), t.target)));
                    }
                    l => edges.push((l, None, t.target)),
                }
            }
        }
        edges.sort_unstable();
        edges.dedup();
        let mut i = 0;
        while i < edges.len() {
            let mut j = i;
            while j < edges.len() && edges[j].0 == edges[i].0 && edges[j].1 == edges[i].1 {
                j += 1;
            }
            let targets: Vec<StateId> = edges[i..j].iter().map(|p| p.2).collect();
            let target = intern(g.closure_unchecked(&targets), &mut blocks);
            transitions.push(Transition { source: StateId(next as u32), label: edges[i].0, target: StateId(target) });
            i = j;
        }
        next += 1;
    }
    let mut states: Vec<State> = blocks
        .iter()
        .map(|b| {
            let members = b.iter().map(|x| g.state(*x));
            State {
                origin: Origin::block(members.clone().map(|s| &s.origin)),
                labels: labels.merge(members.clone().map(|s| &s.labels)),
                marked: b.iter().any(|x| g.is_marked(*x)),
            }
        })
        .collect();
    strip_obsolete_sts(&mut states);
    let (name, events, _, _, _, marking) = g.into_parts();
    TransitionSystem::from_parts_arc(name, events, states, transitions, alloc::vec![StateId(init)], marking)
}

/// Drops every STS label pair whose source and target ended up in one block.
fn strip_obsolete_sts(states: &mut [State]) {
    let mut obsolete: BTreeSet<String> = BTreeSet::new();
    for s in states.iter() {
        for l in s.labels.iter() {
            if let Some(stem) = l.strip_prefix(STS_PREFIX).and_then(|r| r.strip_suffix(":s")) {
                let target = alloc::format!("{STS_PREFIX}{stem}:t");
                if s.labels.contains(&target) {
                    obsolete.insert(String::from(stem));
                }
            }
        }
    }
    if obsolete.is_empty() {
        return;
    }
    for s in states.iter_mut() {
        s.labels.retain(|l| match l.strip_prefix(STS_PREFIX) {
            Some(rest) => !obsolete.contains(&rest[..rest.len() - 2]),
            None => true,
        });
    }
}

/// One initial state, no ε, and no event with two different targets from a state.
pub fn is_deterministic(ts: &TransitionSystem) -> bool {
    if ts.initial().len() != 1 {
        return false;
    }
    for x in ts.state_ids() {
        let out = ts.outgoing(x);
        for w in out.windows(2) {
            if w[0].label == w[1].label && w[0].label != Label::Tau {
                return false;
            }
        }
        if out.iter().any(|t| t.label == Label::Epsilon) {
            return false;
        }
    }
    true
}
