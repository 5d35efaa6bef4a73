//! Visible-bisimulation partition refinement and quotients.

use alloc::vec;
use alloc::vec::Vec;

use hashbrown::HashMap;

use crate::error::Error;
use crate::event::Label;
use crate::origin::Origin;
use crate::ts::{hide, Labels, Marking, State, StateId, Transition, TransitionSystem};

/// Disjoint cover of a state set. Blocks are numbered by their minimum member.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    block_of: Vec<u32>,
    blocks: Vec<Vec<StateId>>,
}

impl Partition {
    /// Builds a partition from arbitrary block keys, renumbering blocks by
    /// minimum member.
    pub fn from_keys(keys: &[u32]) -> Partition {
        let mut renumber: HashMap<u32, u32> = HashMap::new();
        let mut block_of = Vec::with_capacity(keys.len());
        let mut blocks: Vec<Vec<StateId>> = Vec::new();
        for (x, k) in keys.iter().enumerate() {
            let b = *renumber.entry(*k).or_insert_with(|| {
                blocks.push(Vec::new());
                blocks.len() as u32 - 1
            });
            blocks[b as usize].push(StateId(x as u32));
            block_of.push(b);
        }
        Partition { block_of, blocks }
    }

    pub fn discrete(n: usize) -> Partition {
        let keys: Vec<u32> = (0..n as u32).collect();
        Partition::from_keys(&keys)
    }

    pub fn block_of(&self, x: StateId) -> u32 {
        self.block_of[x.index()]
    }

    pub fn blocks(&self) -> &[Vec<StateId>] {
        &self.blocks
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn len(&self) -> usize {
        self.block_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.block_of.is_empty()
    }
}

/// Visible moves of a state after inert τ steps, plus divergence.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct StutterSignature {
    pub entries: Vec<(Label, u32)>,
    pub divergent: bool,
}

fn merge_sorted(into: &mut Vec<(Label, u32)>, from: &[(Label, u32)]) {
    if from.is_empty() {
        return;
    }
    into.extend_from_slice(from);
    into.sort_unstable();
    into.dedup();
}

/// Signatures of all states against partition `p`.
pub fn signatures(ts: &TransitionSystem, p: &Partition) -> Vec<StutterSignature> {
    let n = ts.num_states();
    let inert = |t: &Transition| t.label == Label::Tau && p.block_of(t.source) == p.block_of(t.target);
    let mut own: Vec<Vec<(Label, u32)>> = vec![Vec::new(); n];
    for x in ts.state_ids() {
        let v = &mut own[x.index()];
        for t in ts.outgoing(x) {
            if !inert(t) {
                v.push((t.label, p.block_of(t.target)));
            }
        }
        v.sort_unstable();
        v.dedup();
    }

    // Tarjan over inert τ edges; components come out sinks first.
    const NONE: u32 = u32::MAX;
    let mut index = vec![NONE; n];
    let mut low = vec![0u32; n];
    let mut on_stack = vec![false; n];
    let mut comp = vec![NONE; n];
    let mut stack: Vec<u32> = Vec::new();
    let mut sigs: Vec<StutterSignature> = vec![StutterSignature::default(); n];
    let mut counter = 0u32;
    let mut ncomp = 0u32;
    let mut call: Vec<(u32, usize)> = Vec::new();
    for root in 0..n as u32 {
        if index[root as usize] != NONE {
            continue;
        }
        call.push((root, 0));
        index[root as usize] = counter;
        low[root as usize] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root as usize] = true;
        while let Some(&(v, start)) = call.last() {
            let out = ts.outgoing(StateId(v));
            let mut pos = start;
            let mut descend = None;
            while pos < out.len() {
                let t = &out[pos];
                pos += 1;
                if !inert(t) {
                    continue;
                }
                let w = t.target.0;
                if index[w as usize] == NONE {
                    descend = Some(w);
                    break;
                } else if on_stack[w as usize] {
                    low[v as usize] = low[v as usize].min(index[w as usize]);
                }
            }
            call.last_mut().expect("nonempty").1 = pos;
            if let Some(w) = descend {
                index[w as usize] = counter;
                low[w as usize] = counter;
                counter += 1;
                stack.push(w);
                on_stack[w as usize] = true;
                call.push((w, 0));
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent as usize] = low[parent as usize].min(low[v as usize]);
            }
            if low[v as usize] == index[v as usize] {
                let mut members = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack");
                    on_stack[w as usize] = false;
                    comp[w as usize] = ncomp;
                    members.push(w);
                    if w == v {
                        break;
                    }
                }
                let mut sig = StutterSignature::default();
                let mut cyclic = members.len() > 1;
                for &m in &members {
                    merge_sorted(&mut sig.entries, &own[m as usize]);
                    for t in ts.outgoing(StateId(m)) {
                        if !inert(t) {
                            continue;
                        }
                        let c = comp[t.target.index()];
                        if c == ncomp {
                            cyclic = true;
                        } else {
                            let other = &sigs[t.target.index()];
                            sig.divergent |= other.divergent;
                            merge_sorted(&mut sig.entries, &other.entries);
                        }
                    }
                }
                sig.divergent |= cyclic;
                for &m in &members {
                    sigs[m as usize] = sig.clone();
                }
                ncomp += 1;
            }
        }
    }
    sigs
}

/// One splitting pass: states stay together iff they share block and signature.
pub fn refine_once(ts: &TransitionSystem, p: &Partition) -> Partition {
    let sigs = signatures(ts, p);
    let mut ids: HashMap<(u32, &StutterSignature), u32> = HashMap::new();
    let keys: Vec<u32> = ts
        .state_ids()
        .map(|x| {
            let next = ids.len() as u32;
            *ids.entry((p.block_of(x), &sigs[x.index()])).or_insert(next)
        })
        .collect();
    Partition::from_keys(&keys)
}

fn refine_from(ts: &TransitionSystem, mut p: Partition) -> Partition {
    loop {
        let q = refine_once(ts, &p);
        if q.num_blocks() == p.num_blocks() {
            return q;
        }
        p = q;
    }
}

fn label_keys<'a>(ts: &'a TransitionSystem, key: impl Fn(StateId) -> (&'a Labels, bool)) -> Vec<u32> {
    let mut ids: HashMap<(&Labels, bool), u32> = HashMap::new();
    ts.state_ids()
        .map(|x| {
            let next = ids.len() as u32;
            *ids.entry(key(x)).or_insert(next)
        })
        .collect()
}

/// Coarsest divergence-sensitive visible bisimulation respecting state labels
/// and marking.
pub fn vb_partition(ts: &TransitionSystem) -> Partition {
    let keys = label_keys(ts, |x| (&ts.state(x).labels, ts.is_marked(x)));
    refine_from(ts, Partition::from_keys(&keys))
}

/// Visible bisimulation refined until the states of a block agree on their
/// direct visible edges, so the quotient of a deterministic system stays
/// deterministic outside τ.
pub fn vb_partition_deterministic(ts: &TransitionSystem) -> Partition {
    let mut p = vb_partition(ts);
    loop {
        let mut ids: HashMap<(u32, Vec<(Label, u32)>), u32> = HashMap::new();
        let keys: Vec<u32> = ts
            .state_ids()
            .map(|x| {
                let mut moves: Vec<(Label, u32)> = ts
                    .outgoing(x)
                    .iter()
                    .filter(|t| t.label != Label::Tau)
                    .map(|t| (t.label, p.block_of(t.target)))
                    .collect();
                moves.sort_unstable();
                moves.dedup();
                let next = ids.len() as u32;
                *ids.entry((p.block_of(x), moves)).or_insert(next)
            })
            .collect();
        let q = refine_from(ts, Partition::from_keys(&keys));
        if q.num_blocks() == p.num_blocks() {
            return q;
        }
        p = q;
    }
}

/// Blocks containing a cycle of τ edges between their own members.
fn divergent_blocks(ts: &TransitionSystem, p: &Partition) -> Vec<bool> {
    let inert = |t: &Transition| t.label == Label::Tau && p.block_of(t.source) == p.block_of(t.target);
    let mut indeg = vec![0usize; ts.num_states()];
    for t in ts.transitions().iter().filter(|t| inert(t)) {
        indeg[t.target.index()] += 1;
    }
    let mut queue: Vec<StateId> = ts.state_ids().filter(|x| indeg[x.index()] == 0).collect();
    while let Some(x) = queue.pop() {
        for t in ts.outgoing(x).iter().filter(|t| inert(t)) {
            indeg[t.target.index()] -= 1;
            if indeg[t.target.index()] == 0 {
                queue.push(t.target);
            }
        }
    }
    // States left over lie on or below an inert cycle, which stays in their block.
    let mut out = vec![false; p.num_blocks()];
    for x in ts.state_ids() {
        if indeg[x.index()] > 0 {
            out[p.block_of(x) as usize] = true;
        }
    }
    out
}

/// Quotient by a label-uniform partition. Divergent blocks keep a τ self-loop.
pub fn quotient(ts: &TransitionSystem, p: &Partition) -> Result<TransitionSystem, Error> {
    if p.len() != ts.num_states() {
        return Err(Error::InvalidPartition);
    }
    let mut states = Vec::with_capacity(p.num_blocks());
    for block in p.blocks() {
        let first = ts.state(block[0]);
        for &x in &block[1..] {
            if ts.state(x).labels != first.labels || ts.is_marked(x) != ts.is_marked(block[0]) {
                return Err(Error::NonUniformBlock(block[0].0));
            }
        }
        states.push(State {
            origin: Origin::class(block.iter().map(|x| &ts.state(*x).origin)),
            labels: first.labels.clone(),
            marked: ts.is_marked(block[0]),
        });
    }
    let divergent = divergent_blocks(ts, p);
    let mut transitions = Vec::new();
    for t in ts.transitions() {
        let (s, d) = (p.block_of(t.source), p.block_of(t.target));
        if t.label == Label::Tau && s == d && !divergent[s as usize] {
            continue;
        }
        transitions.push(Transition { source: StateId(s), label: t.label, target: StateId(d) });
    }
    let initial = ts.initial().iter().map(|x| StateId(p.block_of(*x))).collect();
    TransitionSystem::from_parts_arc(
        ts.name_arc().clone(),
        ts.events().clone(),
        states,
        transitions,
        initial,
        ts.marking(),
    )
}

/// G^{A^{Σh}}: hide, then quotient by visible bisimulation.
pub fn vb_abstract(ts: &TransitionSystem, hide_events: &[impl AsRef<str>]) -> Result<TransitionSystem, Error> {
    let h = hide(ts, hide_events)?;
    let p = vb_partition(&h);
    quotient(&h, &p)
}

/// [`vb_abstract`] with [`vb_partition_deterministic`], for systems that are
/// observed after abstraction.
pub fn vb_abstract_deterministic(
    ts: &TransitionSystem,
    hide_events: &[impl AsRef<str>],
) -> Result<TransitionSystem, Error> {
    let h = hide(ts, hide_events)?;
    let p = vb_partition_deterministic(&h);
    quotient(&h, &p)
}

/// Nonblocking-preserving abstraction: hide, forget all labels but marking,
/// and quotient by divergence-sensitive branching bisimulation.
pub fn nb_abstract(ts: &TransitionSystem, hide_events: &[impl AsRef<str>]) -> Result<TransitionSystem, Error> {
    let h = hide(ts, hide_events)?.map_labels(|_, l| *l = Labels::new());
    let p = vb_partition(&h);
    quotient(&h, &p)
}

/// Whether two systems are visibly bisimilar, judged on their disjoint union.
pub fn vb_equivalent(a: &TransitionSystem, b: &TransitionSystem) -> bool {
    let Ok(events) = a.events().union(b.events()) else {
        return false;
    };
    let remap = |ts: &TransitionSystem, l: Label| match l {
        Label::Event(e) => Label::Event(events.id(ts.events().name(e)).expect("union alphabet")),
        other => other,
    };
    let offset = a.num_states() as u32;
    let mut states = Vec::with_capacity(a.num_states() + b.num_states());
    let mut transitions = Vec::new();
    for (ts, off) in [(a, 0u32), (b, offset)] {
        for x in ts.state_ids() {
            let s = ts.state(x);
            states.push(State { origin: s.origin.clone(), labels: s.labels.clone(), marked: ts.is_marked(x) });
        }
        for t in ts.transitions() {
            transitions.push(Transition {
                source: StateId(t.source.0 + off),
                label: remap(ts, t.label),
                target: StateId(t.target.0 + off),
            });
        }
    }
    let initial: Vec<StateId> =
        a.initial().iter().copied().chain(b.initial().iter().map(|x| StateId(x.0 + offset))).collect();
    let union = TransitionSystem::from_parts("union", events, states, transitions, initial, Marking::Explicit)
        .expect("disjoint union of valid systems");
    let p = vb_partition(&union);
    let mut ba: Vec<u32> = a.initial().iter().map(|x| p.block_of(*x)).collect();
    let mut bb: Vec<u32> = b.initial().iter().map(|x| p.block_of(StateId(x.0 + offset))).collect();
    ba.sort_unstable();
    ba.dedup();
    bb.sort_unstable();
    bb.dedup();
    ba == bb
}
