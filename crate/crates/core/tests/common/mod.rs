//! Random systems and brute-force oracles shared by the integration tests.
//!
//! Every `check_*` function takes a seed, builds its own random input and
//! returns `Err` with a description on the first violated property. The
//! acceptance run and the proptest suites drive the same checks.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use opacity_core::abstraction::refine_once;
use opacity_core::incremental::{attach_sts_labels, detect_fnc};
use opacity_core::{
    compose, epsilon_closure, extended_delta, extended_forbidden, hide, is_deterministic, language_upto,
    nb_abstract, observe, quotient, Partition, reduce_supervisor, replace_with_epsilon, run_algorithm1, synthesize,
    synthesize_via_nonblocking, vb_abstract, vb_abstract_deterministic, vb_equivalent, vb_partition, Builder, Error, EventAttr, Label,
    LabelMergePolicy, Method, Mode, Origin, Project, Property, StateId, SynthesisVerdict, TransitionSystem,
    VerifyOptions, NON_SAFE, SECRET,
};
use opacity_core::{verify, DetectorLayout, Pipeline};
use proptest::test_runner::{Config as ProptestConfig, RngSeed};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type CheckResult = Result<(), String>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Proptest settings shared by the property suites: 500 cases from a fixed
/// seed and no regression files.
pub fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 500,
        max_global_rejects: 8192,
        rng_seed: RngSeed::Fixed(0x0bce_5eed),
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

// ---------------------------------------------------------------------------
// Generators

#[derive(Clone, Copy, Debug)]
pub struct Shape {
    pub max_states: usize,
    pub tau: bool,
    pub marking: bool,
    pub secrets: bool,
    pub labels: &'static [&'static str],
}

impl Shape {
    pub const PLAIN: Shape = Shape { max_states: 6, tau: false, marking: false, secrets: true, labels: &[] };
}

pub fn obs(names: &[&str]) -> Vec<(String, EventAttr)> {
    names.iter().map(|n| (n.to_string(), EventAttr::OBS_CTRL)).collect()
}

pub fn unobs(names: &[&str]) -> Vec<(String, EventAttr)> {
    names.iter().map(|n| (n.to_string(), EventAttr::UNOBS_UNCTRL)).collect()
}

/// A random system over `events` with states `0..n`, where `0` is initial and
/// every state gets an incoming edge from a smaller one.
pub fn random_system(rng: &mut impl Rng, name: &str, events: &[(String, EventAttr)], shape: Shape) -> TransitionSystem {
    let n = rng.gen_range(1..=shape.max_states);
    let mut b = Builder::new(name);
    for (e, a) in events {
        b.event(e, *a).unwrap();
    }
    let mut labels: Vec<&str> = events.iter().map(|(e, _)| e.as_str()).collect();
    if shape.tau {
        labels.push("tau");
    }
    for x in 0..n {
        b.state(&x.to_string());
    }
    b.initial("0");
    if n > 1 && rng.gen_bool(0.25) {
        b.initial(&rng.gen_range(1..n).to_string());
    }
    if !labels.is_empty() {
        for x in 1..n {
            let y = rng.gen_range(0..x);
            b.trans(&y.to_string(), labels.choose(rng).unwrap(), &x.to_string());
        }
        for _ in 0..rng.gen_range(0..=n + 2) {
            let (x, y) = (rng.gen_range(0..n), rng.gen_range(0..n));
            b.trans(&x.to_string(), labels.choose(rng).unwrap(), &y.to_string());
        }
    }
    if shape.marking && rng.gen_bool(0.8) {
        b.explicit_marking();
        for x in 0..n {
            if rng.gen_bool(0.4) {
                b.mark(&x.to_string());
            }
        }
    }
    for x in 0..n {
        if shape.secrets && rng.gen_bool(0.3) {
            b.label(&x.to_string(), SECRET);
        }
        for l in shape.labels {
            if rng.gen_bool(0.3) {
                b.label(&x.to_string(), l);
            }
        }
    }
    b.build().unwrap()
}

/// Members `G1..Gk` (k ≤ 3) sharing observable events `a`, `b`, `c`, each with
/// a local observable `l<i>` and possibly a local unobservable `u<i>`. With
/// `shared_v` the unobservable `v` is used by `G1` and `G2`. Observable
/// events are uncontrollable with probability 1/4.
pub fn random_members(rng: &mut impl Rng, shared_v: bool) -> Vec<TransitionSystem> {
    let k = if shared_v { rng.gen_range(2..=3) } else { rng.gen_range(1..=3) };
    let mut attrs = BTreeMap::new();
    for e in ["a", "b", "c"] {
        attrs.insert(e.to_string(), if rng.gen_bool(0.25) { EventAttr::OBS_UNCTRL } else { EventAttr::OBS_CTRL });
    }
    (1..=k)
        .map(|i| {
            let mut events: Vec<(String, EventAttr)> =
                attrs.iter().filter(|_| rng.gen_bool(0.6)).map(|(e, a)| (e.clone(), *a)).collect();
            let l = if rng.gen_bool(0.25) { EventAttr::OBS_UNCTRL } else { EventAttr::OBS_CTRL };
            events.push((format!("l{i}"), l));
            if rng.gen_bool(0.7) {
                events.push((format!("u{i}"), EventAttr::UNOBS_UNCTRL));
            }
            if shared_v && i <= 2 {
                events.push(("v".to_string(), EventAttr::UNOBS_UNCTRL));
            }
            random_system(rng, &format!("G{i}"), &events, Shape::PLAIN)
        })
        .collect()
}

pub fn random_property(rng: &mut impl Rng) -> Property {
    if rng.gen_bool(0.5) {
        Property::Cso
    } else {
        Property::Csa
    }
}

pub fn random_project(rng: &mut impl Rng, shared_v: bool) -> Project {
    let members = random_members(rng, shared_v);
    let property = random_property(rng);
    Project::from_labels("P", members, property).unwrap()
}

// ---------------------------------------------------------------------------
// Oracles

fn event_name(ts: &TransitionSystem, l: Label) -> Option<&str> {
    l.event().map(|e| ts.events().name(e))
}

/// Words of length ≤ k over the events outside `erase`, obtained by exploring
/// (state, projected word) configurations along every path.
pub fn projected_language(ts: &TransitionSystem, erase: &BTreeSet<String>, k: usize) -> BTreeSet<Vec<String>> {
    let mut seen: BTreeSet<(u32, Vec<String>)> = BTreeSet::new();
    let mut queue: VecDeque<(u32, Vec<String>)> = ts.initial().iter().map(|x| (x.0, Vec::new())).collect();
    while let Some(c) = queue.pop_front() {
        if !seen.insert(c.clone()) {
            continue;
        }
        let (x, w) = c;
        for t in ts.outgoing(StateId(x)) {
            let mut w2 = w.clone();
            let e = match t.label {
                Label::Event(e) => ts.events().name(e),
                Label::Epsilon => {
                    queue.push_back((t.target.0, w2));
                    continue;
                }
                Label::Tau => continue,
            };
            if !erase.contains(e) {
                if w.len() == k {
                    continue;
                }
                w2.push(e.to_string());
            }
            queue.push_back((t.target.0, w2));
        }
    }
    seen.into_iter().map(|(_, w)| w).collect()
}

fn words(lang: &BTreeSet<opacity_core::Word>) -> BTreeSet<Vec<String>> {
    lang.iter().map(|w| w.iter().map(|s| s.to_string()).collect()).collect()
}

/// States reachable over ε edges, by breadth-first search.
pub fn epsilon_bfs(ts: &TransitionSystem, from: &[StateId]) -> BTreeSet<StateId> {
    let mut seen: BTreeSet<StateId> = from.iter().copied().collect();
    let mut queue: VecDeque<StateId> = from.iter().copied().collect();
    while let Some(x) = queue.pop_front() {
        for t in ts.outgoing(x) {
            if t.label == Label::Epsilon && seen.insert(t.target) {
                queue.push_back(t.target);
            }
        }
    }
    seen
}

/// Every state that can reach a marked state; with implicit marking all states.
pub fn coreachable_oracle(ts: &TransitionSystem) -> BTreeSet<StateId> {
    let mut good: BTreeSet<StateId> = ts.state_ids().filter(|x| ts.is_marked(*x)).collect();
    loop {
        let before = good.len();
        for t in ts.transitions() {
            if good.contains(&t.target) {
                good.insert(t.source);
            }
        }
        if good.len() == before {
            return good;
        }
    }
}

pub fn reachable_oracle(ts: &TransitionSystem) -> BTreeSet<StateId> {
    let mut seen: BTreeSet<StateId> = ts.initial().iter().copied().collect();
    let mut queue: VecDeque<StateId> = seen.iter().copied().collect();
    while let Some(x) = queue.pop_front() {
        for t in ts.outgoing(x) {
            if seen.insert(t.target) {
                queue.push_back(t.target);
            }
        }
    }
    seen
}

pub fn nonblocking_oracle(ts: &TransitionSystem) -> bool {
    let co = coreachable_oracle(ts);
    reachable_oracle(ts).iter().all(|x| co.contains(x))
}

/// The observer of the synchronous product of `members` built directly on
/// tuples of local state ids, treating every unobservable event as silent.
pub struct MonoObserver {
    pub blocks: Vec<BTreeSet<Vec<u32>>>,
    pub delta: BTreeMap<(usize, String), usize>,
}

fn product_step(members: &[TransitionSystem], t: &[u32], e: &str) -> Vec<Vec<u32>> {
    let mut out: Vec<Vec<u32>> = vec![Vec::new()];
    for (i, m) in members.iter().enumerate() {
        let opts: Vec<u32> = match m.events().id(e) {
            None => vec![t[i]],
            Some(id) => m
                .outgoing(StateId(t[i]))
                .iter()
                .filter(|tr| tr.label == Label::Event(id))
                .map(|tr| tr.target.0)
                .collect(),
        };
        out = out
            .into_iter()
            .flat_map(|p| {
                opts.iter().map(move |&o| {
                    let mut q = p.clone();
                    q.push(o);
                    q
                })
            })
            .collect();
    }
    out
}

fn alphabet(members: &[TransitionSystem]) -> BTreeMap<String, bool> {
    let mut out = BTreeMap::new();
    for m in members {
        for (_, n, a) in m.events().iter() {
            out.insert(n.to_string(), a.observable);
        }
    }
    out
}

fn unobs_closure(members: &[TransitionSystem], unobs: &[String], set: BTreeSet<Vec<u32>>) -> BTreeSet<Vec<u32>> {
    let mut seen = set.clone();
    let mut queue: VecDeque<Vec<u32>> = set.into_iter().collect();
    while let Some(t) = queue.pop_front() {
        for e in unobs {
            for s in product_step(members, &t, e) {
                if seen.insert(s.clone()) {
                    queue.push_back(s);
                }
            }
        }
    }
    seen
}

pub fn mono_observer(members: &[TransitionSystem]) -> MonoObserver {
    let alpha = alphabet(members);
    let unobs: Vec<String> = alpha.iter().filter(|(_, o)| !**o).map(|(e, _)| e.clone()).collect();
    let obs: Vec<String> = alpha.iter().filter(|(_, o)| **o).map(|(e, _)| e.clone()).collect();
    let mut init: Vec<Vec<u32>> = vec![Vec::new()];
    for m in members {
        init = init
            .into_iter()
            .flat_map(|p| {
                m.initial().iter().map(move |x| {
                    let mut q = p.clone();
                    q.push(x.0);
                    q
                })
            })
            .collect();
    }
    let start = unobs_closure(members, &unobs, init.into_iter().collect());
    let mut blocks = vec![start.clone()];
    let mut index = BTreeMap::from([(start, 0usize)]);
    let mut delta = BTreeMap::new();
    let mut k = 0;
    while k < blocks.len() {
        for e in &obs {
            let next: BTreeSet<Vec<u32>> =
                blocks[k].iter().flat_map(|t| product_step(members, t, e)).collect();
            if next.is_empty() {
                continue;
            }
            let next = unobs_closure(members, &unobs, next);
            let id = *index.entry(next.clone()).or_insert_with(|| {
                blocks.push(next);
                blocks.len() - 1
            });
            delta.insert((k, e.clone()), id);
        }
        k += 1;
    }
    MonoObserver { blocks, delta }
}

/// Non-safe test on a block of product tuples, using the `secret`
/// labels of the members for CSO.
pub fn block_non_safe(members: &[TransitionSystem], block: &BTreeSet<Vec<u32>>, property: Property) -> bool {
    match property {
        Property::Cso => {
            block.iter().all(|t| t.iter().enumerate().any(|(i, x)| members[i].has_label(StateId(*x), SECRET)))
        }
        Property::Csa => block.len() == 1,
    }
}

impl MonoObserver {
    pub fn holds(&self, members: &[TransitionSystem], property: Property) -> bool {
        !self.blocks.iter().any(|b| block_non_safe(members, b, property))
    }

    pub fn replay(&self, word: &[impl AsRef<str>]) -> Option<usize> {
        let mut k = 0;
        for e in word {
            k = *self.delta.get(&(k, e.as_ref().to_string()))?;
        }
        Some(k)
    }
}

/// Matches two deterministic systems state by state from their initial
/// states. Returns the map from `a`'s states to `b`'s states.
pub fn det_iso(a: &TransitionSystem, b: &TransitionSystem) -> Result<Vec<StateId>, String> {
    ensure!(a.initial().len() == 1 && b.initial().len() == 1, "initial states {} / {}", a.initial().len(), b.initial().len());
    ensure!(a.num_states() == b.num_states(), "state counts {} vs {}", a.num_states(), b.num_states());
    ensure!(
        a.num_transitions() == b.num_transitions(),
        "transition counts {} vs {}",
        a.num_transitions(),
        b.num_transitions()
    );
    let mut map: Vec<Option<StateId>> = vec![None; a.num_states()];
    let mut used = vec![false; b.num_states()];
    let mut queue = VecDeque::from([(a.initial()[0], b.initial()[0])]);
    map[a.initial()[0].index()] = Some(b.initial()[0]);
    used[b.initial()[0].index()] = true;
    while let Some((x, y)) = queue.pop_front() {
        let out = |ts: &TransitionSystem, s: StateId| -> BTreeMap<String, Vec<StateId>> {
            let mut m: BTreeMap<String, Vec<StateId>> = BTreeMap::new();
            for t in ts.outgoing(s) {
                m.entry(ts.label_name(t.label).to_string()).or_default().push(t.target);
            }
            m
        };
        let (ox, oy) = (out(a, x), out(b, y));
        ensure!(
            ox.keys().eq(oy.keys()),
            "enabled events differ at {} / {}",
            a.state(x).origin.name(),
            b.state(y).origin.name()
        );
        for (e, tx) in &ox {
            let ty = &oy[e];
            ensure!(tx.len() == 1 && ty.len() == 1, "nondeterministic `{e}`");
            let (p, q) = (tx[0], ty[0]);
            match map[p.index()] {
                Some(q2) => ensure!(q2 == q, "`{e}` successors disagree"),
                None => {
                    ensure!(!used[q.index()], "two states map onto {}", b.state(q).origin.name());
                    used[q.index()] = true;
                    map[p.index()] = Some(q);
                    queue.push_back((p, q));
                }
            }
        }
    }
    map.into_iter().map(|m| m.ok_or_else(|| "unreachable state".to_string())).collect()
}

fn labels_of(ts: &TransitionSystem, x: StateId) -> BTreeSet<String> {
    ts.state(x).labels.iter().map(String::from).collect()
}

fn atom_names(o: &Origin) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    o.for_each_atom(&mut |a| {
        out.insert(format!("{}.{}", a.system, a.state));
    });
    out
}

/// The set of product tuples an origin stands for: a block of tuples or a
/// tuple of blocks.
fn tuple_set(o: &Origin) -> BTreeSet<Vec<String>> {
    match o {
        Origin::Block(ms) => ms.iter().flat_map(tuple_set).collect(),
        Origin::Tuple(cs) => {
            let mut out: BTreeSet<Vec<String>> = BTreeSet::from([Vec::new()]);
            for c in cs.iter() {
                let names = atom_names(c);
                out = out
                    .into_iter()
                    .flat_map(|p| {
                        names.iter().map(move |n| {
                            let mut q = p.clone();
                            q.push(n.clone());
                            q
                        })
                    })
                    .collect();
            }
            out
        }
        other => BTreeSet::from([vec![other.name()]]),
    }
}

/// Non-safety of a composed observer state (a tuple of local blocks) read off
/// its origin and the members' `secret` labels.
pub fn origin_non_safe(members: &[TransitionSystem], o: &Origin, property: Property) -> bool {
    let comps: Vec<&Origin> = match o.components() {
        Some(cs) => cs.iter().collect(),
        None => vec![o],
    };
    let blocks: Vec<Vec<(String, String)>> = comps
        .iter()
        .map(|c| {
            let mut v = Vec::new();
            c.for_each_atom(&mut |a| v.push((a.system.to_string(), a.state.to_string())));
            v
        })
        .collect();
    match property {
        Property::Cso => blocks.iter().any(|b| {
            b.iter().all(|(sys, st)| {
                let m = members.iter().find(|m| m.name() == sys).unwrap();
                m.has_label(m.state_by_name(st).unwrap(), SECRET)
            })
        }),
        Property::Csa => blocks.iter().all(|b| b.len() == 1),
    }
}

// ---------------------------------------------------------------------------
// ts-core and composition

pub fn check_epsilon_closure(seed: u64) -> CheckResult {
    let mut r = rng(seed);
    let events = [obs(&["a"]), unobs(&["u", "v"])].concat();
    let g = random_system(&mut r, "G", &events, Shape { max_states: 50, ..Shape::PLAIN });
    let g = replace_with_epsilon(&g, &["u", "v"]).unwrap();
    for x in g.state_ids() {
        let got: BTreeSet<StateId> = epsilon_closure(&g, &[x]).unwrap().into_iter().collect();
        ensure!(got == epsilon_bfs(&g, &[x]), "closure of {x:?}");
    }
    Ok(())
}

pub fn check_extended_delta(seed: u64) -> CheckResult {
    let mut r = rng(seed);
    let events = [obs(&["a", "b"]), unobs(&["u"])].concat();
    let g = random_system(&mut r, "G", &events, Shape::PLAIN);
    let g = replace_with_epsilon(&g, &["u"]).unwrap();
    let len = r.gen_range(0..=5);
    let word: Vec<&str> = (0..len).map(|_| *["a", "b"].choose(&mut r).unwrap()).collect();
    // Enumerate every path whose visible labels spell `word`.
    let mut configs: BTreeSet<(StateId, usize)> = g.initial().iter().map(|x| (*x, 0)).collect();
    let mut queue: VecDeque<(StateId, usize)> = configs.iter().copied().collect();
    while let Some((x, i)) = queue.pop_front() {
        for t in g.outgoing(x) {
            let next = match t.label {
                Label::Epsilon => Some((t.target, i)),
                Label::Event(e) if i < word.len() && g.events().name(e) == word[i] => Some((t.target, i + 1)),
                _ => None,
            };
            if let Some(c) = next {
                if configs.insert(c) {
                    queue.push_back(c);
                }
            }
        }
    }
    let want: BTreeSet<StateId> = configs.into_iter().filter(|(_, i)| *i == word.len()).map(|(x, _)| x).collect();
    let got: BTreeSet<StateId> = extended_delta(&g, g.initial(), &word).unwrap().into_iter().collect();
    ensure!(got == want, "word {word:?}: {got:?} vs {want:?}");
    Ok(())
}

pub fn check_language_upto(seed: u64) -> CheckResult {
    let mut r = rng(seed);
    let events = [obs(&["a", "b", "c"]), unobs(&["u"])].concat();
    let g = random_system(&mut r, "G", &events, Shape::PLAIN);
    let g = replace_with_epsilon(&g, &["u"]).unwrap();
    let want = projected_language(&g, &BTreeSet::new(), 4);
    ensure!(words(&language_upto(&g, 4)) == want, "language differs");
    Ok(())
}

pub fn check_hide(seed: u64) -> CheckResult {
    let mut r = rng(seed);
    let events = [obs(&["a", "b", "c"]), unobs(&["u", "v"])].concat();
    let g = random_system(&mut r, "G", &events, Shape { tau: true, ..Shape::PLAIN });
    let h: Vec<&str> = ["a", "b", "c"].into_iter().filter(|_| r.gen_bool(0.5)).collect();
    let e: Vec<&str> = ["u", "v"].into_iter().filter(|_| r.gen_bool(0.5)).collect();
    let hidden = hide(&g, &h).unwrap();
    ensure!(hidden.num_transitions() <= g.num_transitions(), "hiding added transitions");
    ensure!(hidden.num_states() == g.num_states(), "hiding changed the states");
    ensure!(hidden.events().len() + h.len() == g.events().len(), "alphabet bookkeeping");
    // Without parallel edges that collapse, the count is unchanged.
    let collapsed: BTreeSet<(StateId, StateId)> = g
        .transitions()
        .iter()
        .filter(|t| t.label == Label::Tau || event_name(&g, t.label).is_some_and(|n| h.contains(&n)))
        .map(|t| (t.source, t.target))
        .collect();
    let hidden_edges = g
        .transitions()
        .iter()
        .filter(|t| t.label == Label::Tau || event_name(&g, t.label).is_some_and(|n| h.contains(&n)))
        .count();
    ensure!(
        hidden.num_transitions() == g.num_transitions() - (hidden_edges - collapsed.len()),
        "|T| {} vs {}",
        hidden.num_transitions(),
        g.num_transitions()
    );
    let a = replace_with_epsilon(&hide(&g, &h).unwrap(), &e).unwrap();
    let b = hide(&replace_with_epsilon(&g, &e).unwrap(), &h).unwrap();
    ensure!(a == b, "hide and replace_with_epsilon do not commute");
    Ok(())
}

/// Transitions keyed by origin names with tuple components permuted by `perm`.
fn named_edges(ts: &TransitionSystem, perm: &[usize]) -> BTreeSet<(Vec<String>, String, Vec<String>)> {
    let key = |x: StateId| -> Vec<String> {
        let cs = ts.state(x).origin.components().unwrap().to_vec();
        perm.iter().map(|&i| cs[i].name()).collect()
    };
    ts.transitions().iter().map(|t| (key(t.source), ts.label_name(t.label).to_string(), key(t.target))).collect()
}

pub fn check_compose(seed: u64) -> CheckResult {
    let mut r = rng(seed);
    let shape = Shape { tau: true, ..Shape::PLAIN };
    let a = random_system(&mut r, "A", &obs(&["a", "b", "x"]), shape);
    let b = random_system(&mut r, "B", &obs(&["b", "c", "x"]), shape);
    let c = random_system(&mut r, "C", &obs(&["c", "a", "y"]), shape);
    let pol = LabelMergePolicy::Union;
    let left = compose(&compose(&a, &b, pol).unwrap(), &c, pol).unwrap();
    let right = compose(&a, &compose(&b, &c, pol).unwrap(), pol).unwrap();
    ensure!(named_edges(&left, &[0, 1, 2]) == named_edges(&right, &[0, 1, 2]), "not associative");
    ensure!(left.num_states() == right.num_states(), "associativity changes the state count");
    let ab = compose(&a, &b, pol).unwrap();
    let ba = compose(&b, &a, pol).unwrap();
    ensure!(named_edges(&ab, &[0, 1]) == named_edges(&ba, &[1, 0]), "not commutative");
    ensure!(ab.num_states() == ba.num_states(), "commutativity changes the state count");
    ensure!(reachable_oracle(&left).len() == left.num_states(), "unreachable product states");
    // Product semantics on τ-free operands against natural projections.
    let a = random_system(&mut r, "A", &obs(&["a", "b", "x"]), Shape::PLAIN);
    let b = random_system(&mut r, "B", &obs(&["b", "c", "x"]), Shape::PLAIN);
    let ab = compose(&a, &b, pol).unwrap();
    let (la, lb) = (projected_language(&a, &BTreeSet::new(), 4), projected_language(&b, &BTreeSet::new(), 4));
    let sigma = ["a", "b", "c", "x"];
    let mut want = BTreeSet::new();
    let mut frontier: Vec<Vec<String>> = vec![Vec::new()];
    for _ in 0..=4 {
        let mut next = Vec::new();
        for w in frontier {
            let pa: Vec<String> = w.iter().filter(|e| a.events().contains(e)).cloned().collect();
            let pb: Vec<String> = w.iter().filter(|e| b.events().contains(e)).cloned().collect();
            if la.contains(&pa) && lb.contains(&pb) {
                if w.len() < 4 {
                    for e in sigma {
                        let mut w2 = w.clone();
                        w2.push(e.to_string());
                        next.push(w2);
                    }
                }
                want.insert(w);
            }
        }
        frontier = next;
    }
    ensure!(words(&language_upto(&ab, 4)) == want, "product language differs from the projection oracle");
    Ok(())
}

// ---------------------------------------------------------------------------
// Observer

pub fn check_observer_language(seed: u64) -> CheckResult {
    let mut r = rng(seed);
    let events = [obs(&["a", "b"]), unobs(&["u", "v"])].concat();
    let g = random_system(&mut r, "G", &events, Shape::PLAIN);
    let eps: Vec<&str> = ["u", "v"].into_iter().filter(|_| r.gen_bool(0.7)).collect();
    let o = observe(&g, &eps, LabelMergePolicy::Union).unwrap();
    ensure!(is_deterministic(&o), "observer is not deterministic");
    let erase: BTreeSet<String> = eps.iter().map(|s| s.to_string()).collect();
    ensure!(words(&language_upto(&o, 6)) == projected_language(&g, &erase, 6), "L(O(G)) != P(L(G)) with eps {eps:?}");
    Ok(())
}

pub fn check_observer_distributes(seed: u64) -> CheckResult {
    let mut r = rng(seed);
    let shape = Shape { labels: &[NON_SAFE, "x"], secrets: false, ..Shape::PLAIN };
    let g1 = random_system(&mut r, "G1", &[obs(&["a", "b", "l1"]), unobs(&["u1"])].concat(), shape);
    let g2 = random_system(&mut r, "G2", &[obs(&["a", "b", "l2"]), unobs(&["u2"])].concat(), shape);
    for pol in [LabelMergePolicy::Union, LabelMergePolicy::Intersection] {
        let left = observe(&compose(&g1, &g2, pol).unwrap(), &["u1", "u2"], pol).unwrap();
        let o1 = observe(&g1, &["u1"], pol).unwrap();
        let o2 = observe(&g2, &["u2"], pol).unwrap();
        let right = compose(&o1, &o2, pol).unwrap();
        let map = det_iso(&left, &right).map_err(|e| format!("{pol:?}: {e}"))?;
        for x in left.state_ids() {
            let y = map[x.index()];
            ensure!(
                tuple_set(&left.state(x).origin) == tuple_set(&right.state(y).origin),
                "{pol:?}: {} is not {}",
                left.state(x).origin.name(),
                right.state(y).origin.name()
            );
            ensure!(labels_of(&left, x) == labels_of(&right, y), "{pol:?}: labels at {}", left.state(x).origin.name());
        }
    }
    Ok(())
}

/// Identifies states whose flattened blocks coincide. Their futures agree, so
/// the result is again deterministic.
pub fn merge_equal_blocks(ts: &TransitionSystem) -> TransitionSystem {
    let mut ids: BTreeMap<BTreeSet<String>, u32> = BTreeMap::new();
    let keys: Vec<u32> = ts
        .state_ids()
        .map(|x| {
            let next = ids.len() as u32;
            *ids.entry(atom_names(&ts.state(x).origin)).or_insert(next)
        })
        .collect();
    quotient(ts, &Partition::from_keys(&keys)).unwrap()
}

pub fn check_nested_observer(seed: u64) -> CheckResult {
    let mut r = rng(seed);
    let shape = Shape { labels: &[NON_SAFE, "x"], secrets: false, ..Shape::PLAIN };
    let g = random_system(&mut r, "G", &[obs(&["a", "b"]), unobs(&["u", "v"])].concat(), shape);
    for pol in [LabelMergePolicy::Union, LabelMergePolicy::Intersection] {
        let once = observe(&g, &["u", "v"], pol).unwrap();
        let twice = merge_equal_blocks(&observe(&observe(&g, &["u"], pol).unwrap(), &["v"], pol).unwrap());
        let map = det_iso(&once, &twice).map_err(|e| format!("{pol:?}: {e}"))?;
        for x in once.state_ids() {
            let y = map[x.index()];
            ensure!(atom_names(&once.state(x).origin) == atom_names(&twice.state(y).origin), "{pol:?}: blocks differ");
            ensure!(labels_of(&once, x) == labels_of(&twice, y), "{pol:?}: labels differ");
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Abstraction

pub fn check_vb_soundness(seed: u64) -> CheckResult {
    let mut r = rng(seed);
    let shape = Shape { tau: true, marking: true, labels: &[NON_SAFE], secrets: false, ..Shape::PLAIN };
    let g = random_system(&mut r, "G", &obs(&["a", "b"]), shape);
    let none: [&str; 0] = [];
    let q = vb_abstract(&g, &none).unwrap();
    ensure!(vb_equivalent(&g, &q), "G not equivalent to its quotient");
    ensure!(vb_equivalent(&g, &g), "not reflexive");
    ensure!(q.num_states() <= g.num_states(), "quotient grew");
    let p = vb_partition(&g);
    ensure!(refine_once(&g, &p).num_blocks() == p.num_blocks(), "partition is not a fixpoint");
    Ok(())
}

/// Every stable partition that respects labels and marking refines the VB
/// partition; checked over all set partitions of the state set.
pub fn check_vb_coarsest(seed: u64) -> CheckResult {
    let mut r = rng(seed);
    let shape = Shape { tau: true, marking: true, labels: &[NON_SAFE], secrets: false, ..Shape::PLAIN };
    let g = random_system(&mut r, "G", &obs(&["a", "b"]), shape);
    let vb = vb_partition(&g);
    let n = g.num_states();
    let mut keys = vec![0u32; n];
    loop {
        let p = Partition::from_keys(&keys);
        let uniform = p.blocks().iter().all(|b| {
            b.iter().all(|x| g.state(*x).labels == g.state(b[0]).labels && g.is_marked(*x) == g.is_marked(b[0]))
        });
        if uniform && refine_once(&g, &p).num_blocks() == p.num_blocks() {
            for b in p.blocks() {
                ensure!(
                    b.iter().all(|x| vb.block_of(*x) == vb.block_of(b[0])),
                    "stable partition {:?} is coarser than the VB partition {:?}",
                    p.blocks(),
                    vb.blocks()
                );
            }
        }
        // Next restricted growth string.
        let mut i = n;
        loop {
            if i <= 1 {
                return Ok(());
            }
            i -= 1;
            let max = keys[..i].iter().copied().max().unwrap_or(0);
            if keys[i] <= max {
                keys[i] += 1;
                keys[i + 1..].iter_mut().for_each(|k| *k = 0);
                break;
            }
        }
    }
}

pub fn check_vb_congruence(seed: u64) -> CheckResult {
    let mut r = rng(seed);
    let shape = Shape { tau: true, marking: true, labels: &[NON_SAFE], secrets: false, ..Shape::PLAIN };
    let g = random_system(&mut r, "G", &obs(&["a", "b", "c"]), shape);
    let none: [&str; 0] = [];
    let h = vb_abstract(&g, &none).unwrap();
    let rr = random_system(&mut r, "R", &obs(&["b", "c", "d"]), shape);
    let pol = LabelMergePolicy::Union;
    ensure!(
        vb_equivalent(&compose(&g, &rr, pol).unwrap(), &compose(&h, &rr, pol).unwrap()),
        "not a congruence for composition"
    );
    let e: Vec<&str> = ["a", "b", "c"].into_iter().filter(|_| r.gen_bool(0.5)).collect();
    ensure!(vb_equivalent(&hide(&g, &e).unwrap(), &hide(&h, &e).unwrap()), "not a congruence for hiding {e:?}");
    Ok(())
}

pub fn check_nb_blocking(seed: u64) -> CheckResult {
    let mut r = rng(seed);
    let shape = Shape { tau: true, marking: true, secrets: false, ..Shape::PLAIN };
    let g = random_system(&mut r, "G", &obs(&["a", "b", "c"]), shape);
    let e: Vec<&str> = ["a", "b", "c"].into_iter().filter(|_| r.gen_bool(0.5)).collect();
    let a = nb_abstract(&g, &e).unwrap();
    ensure!(nonblocking_oracle(&a) == nonblocking_oracle(&g), "nb_abstract flipped the nonblocking verdict");
    Ok(())
}

// ---------------------------------------------------------------------------
// Verification

fn verdict_with(project: &Project, mode: Mode, method: Method, detector: DetectorLayout) -> Result<opacity_core::Report, Error> {
    verify(project, &VerifyOptions { mode, method, detector, ..VerifyOptions::default() })
}

/// Monolithic, incremental VB and incremental NB against the product oracle.
pub fn check_verdicts(seed: u64) -> CheckResult {
    let mut r = rng(seed);
    let p = random_project(&mut r, false);
    let property = p.security.property;
    let mono = mono_observer(&p.members);
    let want = mono.holds(&p.members, property);
    let runs = [
        (Mode::Monolithic, Method::Vb, DetectorLayout::Global),
        (Mode::Monolithic, Method::Vb, DetectorLayout::Local),
        (Mode::Incremental, Method::Vb, DetectorLayout::Global),
        (Mode::Incremental, Method::Nb, DetectorLayout::Global),
    ];
    for (mode, method, det) in runs {
        let rep = verdict_with(&p, mode, method, det).map_err(|e| e.to_string())?;
        ensure!(rep.verdict.holds() == want, "{property:?} {mode:?}/{method:?}/{det:?}: got {:?}", rep.verdict);
        match &rep.witness {
            None => ensure!(want, "missing witness"),
            Some(w) => {
                let k = mono.replay(w).ok_or_else(|| format!("witness {w:?} is not observable"))?;
                ensure!(block_non_safe(&p.members, &mono.blocks[k], property), "witness {w:?} ends in a safe state");
            }
        }
    }
    Ok(())
}

/// `Ok(false)` when the project is rejected for a future nondeterministic choice.
pub fn check_shared_verdicts(seed: u64) -> Result<bool, String> {
    let mut r = rng(seed);
    let p = random_project(&mut r, true);
    let property = p.security.property;
    let want = mono_observer(&p.members).holds(&p.members, property);
    let rep = match verdict_with(&p, Mode::Incremental, Method::Vb, DetectorLayout::Global) {
        Err(Error::FutureNondeterministicChoice(_)) => return Ok(false),
        Err(e) => return Err(e.to_string()),
        Ok(rep) => rep,
    };
    ensure!(rep.pipeline == Pipeline::Shared, "wrong pipeline {:?}", rep.pipeline);
    ensure!(rep.verdict.holds() == want, "{property:?} run_shared: got {:?}", rep.verdict);
    let mono = verdict_with(&p, Mode::Monolithic, Method::Vb, DetectorLayout::Global).map_err(|e| e.to_string())?;
    ensure!(mono.verdict.holds() == want, "{property:?} monolithic: got {:?}", mono.verdict);
    Ok(true)
}

/// Pipeline bookkeeping of Algorithm 1 runs.
pub fn check_pipeline_steps(seed: u64) -> CheckResult {
    let mut r = rng(seed);
    let p = random_project(&mut r, false);
    let n = p.members.len();
    for method in [Method::Vb, Method::Nb] {
        let out = run_algorithm1(&p, method, 4).map_err(|e| e.to_string())?;
        let merges: Vec<_> = out.steps.iter().filter(|s| s.omega.len() > 1).collect();
        ensure!(merges.len() == n - 1, "{} merges for {n} members", merges.len());
        ensure!(merges.last().map_or(n == 1, |s| s.omega.len() == n), "last merge does not cover every member");
        let mut seen = BTreeSet::new();
        for s in &out.steps {
            ensure!(s.states_after <= s.states_before, "step {} grew", s.step);
            for e in s.hidden.iter().chain(&s.epsilon) {
                ensure!(seen.insert(e.clone()), "event {e} hidden or replaced twice");
            }
        }
    }
    Ok(())
}

/// Hiding after observation and observation after hiding plus abstraction
/// agree on a system whose retained unobservable `v` carries STS labels.
/// `Ok(false)` when the system is nondeterministic or has a future
/// nondeterministic choice.
pub fn check_abstraction_order(seed: u64) -> Result<bool, String> {
    let mut r = rng(seed);
    let g = random_system(&mut r, "G", &[obs(&["a", "b", "c"]), unobs(&["v"])].concat(), Shape::PLAIN);
    let h: Vec<&str> = ["a", "b", "c"].into_iter().filter(|_| r.gen_bool(0.5)).collect();
    if !is_deterministic(&g) {
        return Ok(false);
    }
    let mut counter = 0;
    let labelled = attach_sts_labels(&g, &["v"], &mut counter);
    if !detect_fnc(&labelled, &["v"]).is_empty() {
        return Ok(false);
    }
    let strip = |ts: &TransitionSystem| ts.map_labels(|_, l| l.retain(|n| !n.starts_with("sts")));
    let after = hide(&observe(&g, &["v"], LabelMergePolicy::Union).unwrap(), &h).unwrap();
    let before = observe(&vb_abstract_deterministic(&labelled, &h).unwrap(), &["v"], LabelMergePolicy::Union).unwrap();
    ensure!(vb_equivalent(&strip(&after), &strip(&before)), "hide {h:?}: observers differ");
    Ok(true)
}

// ---------------------------------------------------------------------------
// Synthesis

pub fn check_extended_forbidden(seed: u64) -> CheckResult {
    let mut r = rng(seed);
    let events = vec![
        ("a".to_string(), EventAttr::OBS_CTRL),
        ("b".to_string(), EventAttr::OBS_UNCTRL),
        ("c".to_string(), EventAttr::OBS_UNCTRL),
    ];
    let g = random_system(&mut r, "G", &events, Shape { max_states: 8, ..Shape::PLAIN });
    let forbidden: BTreeSet<StateId> = g.state_ids().filter(|_| r.gen_bool(0.2)).collect();
    let unctrl: Vec<_> = ["b", "c"].iter().filter(|_| r.gen_bool(0.7)).map(|e| g.events().id(e).unwrap()).collect();
    let got = extended_forbidden(&g, forbidden.iter().copied(), &unctrl);
    let mut want = forbidden.clone();
    let mut queue: VecDeque<StateId> = forbidden.into_iter().collect();
    while let Some(y) = queue.pop_front() {
        for t in g.transitions() {
            if t.target == y && t.label.event().is_some_and(|e| unctrl.contains(&e)) && want.insert(t.source) {
                queue.push_back(t.source);
            }
        }
    }
    ensure!(got == want, "{got:?} vs {want:?}");
    Ok(())
}

/// Reachable part of the plant restricted to `keep`.
fn reach_within(plant: &TransitionSystem, keep: &[bool]) -> BTreeSet<StateId> {
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::new();
    for &x in plant.initial() {
        if keep[x.index()] && seen.insert(x) {
            queue.push_back(x);
        }
    }
    while let Some(x) = queue.pop_front() {
        for t in plant.outgoing(x) {
            if keep[t.target.index()] && seen.insert(t.target) {
                queue.push_back(t.target);
            }
        }
    }
    seen
}

fn uncontrollable(ts: &TransitionSystem, l: Label) -> bool {
    l.event().is_none_or(|e| !ts.events().attr(e).controllable)
}

/// Safety, controllability, closed-loop identity, maximal permissiveness,
/// agreement of both synthesis paths and closed-loop preservation by the
/// reduced supervisor.
pub fn check_synthesis(seed: u64) -> CheckResult {
    let mut r = rng(seed);
    let p = random_project(&mut r, false);
    let property = p.security.property;
    let res = synthesize(&p).map_err(|e| e.to_string())?;
    let plant = &res.plant;
    let members = &p.members;
    let bad: Vec<bool> = plant.state_ids().map(|x| origin_non_safe(members, &plant.state(x).origin, property)).collect();
    let holds = mono_observer(members).holds(members, property);
    ensure!((res.verdict == SynthesisVerdict::AlreadySafe) == holds, "verdict {} but property holds={holds}", res.verdict);
    let by_name: BTreeMap<String, StateId> =
        plant.state_ids().map(|x| (plant.state(x).origin.name(), x)).collect();

    // Largest safe, uncontrollably closed state set, by exhaustive search.
    let mut best: Option<BTreeSet<StateId>> = None;
    let n = plant.num_states();
    if n <= 14 {
        for mask in 0u32..(1 << n) {
            let keep: Vec<bool> = (0..n).map(|i| mask & (1 << i) != 0).collect();
            if (0..n).any(|i| keep[i] && bad[i]) {
                continue;
            }
            let reach = reach_within(plant, &keep);
            if reach.is_empty() {
                continue;
            }
            let closed = reach.iter().all(|x| {
                plant.outgoing(*x).iter().all(|t| !uncontrollable(plant, t.label) || keep[t.target.index()])
            });
            // Unions of closed safe sets stay closed and safe.
            if closed {
                best.get_or_insert_with(BTreeSet::new).extend(reach);
            }
        }
    }

    let Some(sup) = &res.supervisor else {
        ensure!(res.verdict == SynthesisVerdict::Unenforceable, "no supervisor but verdict {}", res.verdict);
        ensure!(n > 14 || best.is_none(), "a safe controllable behaviour exists");
        return Ok(());
    };
    ensure!(res.verdict != SynthesisVerdict::Unenforceable, "supervisor for an unenforceable project");
    let mut kept = BTreeSet::new();
    for y in sup.state_ids() {
        let o = &sup.state(y).origin;
        ensure!(!origin_non_safe(members, o, property), "supervisor keeps non-safe {}", o.name());
        ensure!(!res.removed_states.contains(o), "supervisor keeps removed {}", o.name());
        let x = *by_name.get(&o.name()).ok_or_else(|| format!("{} is not a plant state", o.name()))?;
        kept.insert(x);
        let enabled = |ts: &TransitionSystem, s: StateId| -> BTreeSet<String> {
            ts.outgoing(s).iter().map(|t| ts.label_name(t.label).to_string()).collect()
        };
        let (pe, se) = (enabled(plant, x), enabled(sup, y));
        for t in plant.outgoing(x) {
            let e = plant.label_name(t.label);
            if uncontrollable(plant, t.label) {
                ensure!(se.contains(e), "uncontrollable {e} disabled at {}", o.name());
            }
        }
        let disabled: BTreeSet<String> = pe.difference(&se).cloned().collect();
        let listed = res.disabled.get(&y).cloned().unwrap_or_default();
        ensure!(disabled == listed, "disabled map at {}: {listed:?} vs {disabled:?}", o.name());
    }
    if let Some(best) = &best {
        ensure!(&kept == best, "not maximally permissive: {} states vs {} possible", kept.len(), best.len());
    } else {
        ensure!(n > 14, "supervisor exists but no safe controllable behaviour does");
    }
    let closed = compose(plant, sup, LabelMergePolicy::Union).map_err(|e| e.to_string())?;
    det_iso(&closed, sup).map_err(|e| format!("closed loop: {e}"))?;

    let nb = synthesize_via_nonblocking(&p).map_err(|e| e.to_string())?;
    ensure!(nb.verdict == res.verdict, "nonblocking path verdict {}", nb.verdict);
    let nb_sup = nb.supervisor.as_ref().ok_or("nonblocking path found no supervisor")?;
    let map = det_iso(sup, nb_sup).map_err(|e| format!("synthesis paths: {e}"))?;
    for y in sup.state_ids() {
        ensure!(sup.state(y).origin == nb_sup.state(map[y.index()]).origin, "synthesis paths name states differently");
    }

    if let Some(red) = reduce_supervisor(&res) {
        ensure!(red.supervisor.num_states() <= sup.num_states(), "reduction grew the supervisor");
        let loop_red = compose(plant, &red.supervisor, LabelMergePolicy::Union).map_err(|e| e.to_string())?;
        ensure!(language_upto(&loop_red, 5) == language_upto(sup, 5), "reduced supervisor changes the closed loop");
    }
    Ok(())
}

/// Human-readable dump for failure messages.
pub fn dump(ts: &TransitionSystem) -> String {
    let mut s = format!("{} init={:?}\n", ts.name(), ts.initial().iter().map(|x| ts.state(*x).origin.name()).collect::<Vec<_>>());
    for x in ts.state_ids() {
        let st = ts.state(x);
        s += &format!("  {} {:?} marked={}\n", st.origin.name(), st.labels.iter().collect::<Vec<_>>(), ts.is_marked(x));
    }
    for t in ts.transitions() {
        s += &format!("  {} -{}-> {}\n", ts.state(t.source).origin.name(), ts.label_name(t.label), ts.state(t.target).origin.name());
    }
    s
}

// ---------------------------------------------------------------------------

/// Runs `check` on seeds `0..cases` and returns the failing seeds with messages.
pub fn sweep(cases: u64, check: impl Fn(u64) -> CheckResult) -> Vec<(u64, String)> {
    (0..cases).filter_map(|s| check(s).err().map(|e| (s, e))).collect()
}
