//! Small hand-built systems used by tests, documentation and the CLI demos.
//!
//! Secret states carry the [`SECRET`] label.

use alloc::format;

use crate::event::EventAttr;
use crate::ts::{Builder, TransitionSystem, NON_SAFE, SECRET};

fn obs(b: &mut Builder, names: &[&str]) {
    for n in names {
        b.event(n, EventAttr::OBS_CTRL).unwrap();
    }
}

fn unobs(b: &mut Builder, names: &[&str]) {
    for n in names {
        b.event(n, EventAttr::UNOBS_UNCTRL).unwrap();
    }
}

/// `0 -a-> 1 -u-> 2 -b-> 3` with `u` unobservable and secrets {0,1,2}.
pub fn secret_chain() -> TransitionSystem {
    let mut b = Builder::new("G");
    obs(&mut b, &["a", "b"]);
    unobs(&mut b, &["u"]);
    b.initial("0").trans("0", "a", "1").trans("1", "u", "2").trans("2", "b", "3");
    for s in ["0", "1", "2"] {
        b.label(s, SECRET);
    }
    b.build().unwrap()
}

/// Subsystem `i` of the ring benchmark: local `a_i`, `c_i`, unobservable `v_i`,
/// and `b_i`, `b_{i+1}` shared with the neighbours. Secret state 2.
pub fn ring_counter(i: usize) -> TransitionSystem {
    let (a, bi, bj, c, v) =
        (format!("a{i}"), format!("b{i}"), format!("b{}", i + 1), format!("c{i}"), format!("v{i}"));
    let mut b = Builder::new(&format!("G{i}"));
    obs(&mut b, &[&a, &bi, &bj, &c]);
    unobs(&mut b, &[&v]);
    b.initial("0")
        .trans("0", &a, "1")
        .trans("1", &a, "2")
        .trans("2", &a, "3")
        .trans("3", &v, "2")
        .trans("2", &c, "1")
        .trans("1", &bi, "0")
        .trans("1", &bj, "0")
        .label("2", SECRET);
    b.build().unwrap()
}

/// Two subsystems sharing the unobservable event `v`; secrets {1,2} and {4}.
pub fn shared_unobservable_pair() -> (TransitionSystem, TransitionSystem) {
    let mut g1 = Builder::new("G1");
    obs(&mut g1, &["a", "b"]);
    unobs(&mut g1, &["v"]);
    g1.initial("0").trans("0", "a", "1").trans("1", "b", "2").trans("2", "v", "3");
    g1.label("1", SECRET).label("2", SECRET);
    let mut g2 = Builder::new("G2");
    obs(&mut g2, &["a", "b"]);
    unobs(&mut g2, &["u", "v"]);
    g2.initial("0").trans("0", "a", "1").trans("1", "u", "2").trans("2", "b", "3").trans("3", "v", "4");
    g2.label("4", SECRET);
    (g1.build().unwrap(), g2.build().unwrap())
}

/// The same pair with `v` of the second subsystem renamed to the local `w`.
pub fn local_unobservable_pair() -> (TransitionSystem, TransitionSystem) {
    let (g1, _) = shared_unobservable_pair();
    let mut g2 = Builder::new("G2");
    obs(&mut g2, &["a", "b"]);
    unobs(&mut g2, &["u", "w"]);
    g2.initial("0").trans("0", "a", "1").trans("1", "u", "2").trans("2", "b", "3").trans("3", "w", "4");
    g2.label("4", SECRET);
    (g1, g2.build().unwrap())
}

/// `0 -a-> 1 -b-> 2 -u-> 3` with `N` on 0, 1 and 2.
pub fn labelled_chain() -> TransitionSystem {
    let mut b = Builder::new("G");
    obs(&mut b, &["a", "b"]);
    unobs(&mut b, &["u"]);
    b.initial("0").trans("0", "a", "1").trans("1", "b", "2").trans("2", "u", "3");
    for s in ["0", "1", "2"] {
        b.label(s, NON_SAFE);
    }
    b.build().unwrap()
}

/// Ten-state chain alternating observable `a`, `b` with unobservable `u`, `v`, `w`;
/// `N` on 0, 1 and 3.
pub fn mixed_chain() -> TransitionSystem {
    let mut b = Builder::new("G");
    obs(&mut b, &["a", "b"]);
    unobs(&mut b, &["u", "v", "w"]);
    b.initial("0");
    let steps = ["a", "b", "u", "a", "b", "v", "w", "a", "b"];
    for (k, e) in steps.iter().enumerate() {
        b.trans(&format!("{k}"), e, &format!("{}", k + 1));
    }
    for s in ["0", "1", "3"] {
        b.label(s, NON_SAFE);
    }
    b.build().unwrap()
}

/// Deterministic system whose `a` choices become ambiguous once `u` is silent.
pub fn future_choice() -> TransitionSystem {
    let mut b = Builder::new("G");
    obs(&mut b, &["a", "b", "c"]);
    unobs(&mut b, &["u"]);
    b.initial("0")
        .trans("0", "a", "0")
        .trans("0", "u", "1")
        .trans("1", "b", "0")
        .trans("1", "a", "2")
        .trans("2", "c", "3")
        .trans("3", "c", "4");
    b.label("3", NON_SAFE).label("4", NON_SAFE);
    b.build().unwrap()
}

/// Nondeterministic plant with two initial states, silent moves and the
/// uncontrollable event `d`; secrets {2,5}.
pub fn enforcement_plant() -> TransitionSystem {
    let mut b = Builder::new("G");
    obs(&mut b, &["a", "b", "c"]);
    b.event("d", EventAttr::OBS_UNCTRL).unwrap();
    unobs(&mut b, &["u"]);
    b.initial("0")
        .initial("1")
        .trans("0", "a", "0")
        .trans("0", "a", "1")
        .trans("1", "u", "2")
        .trans("0", "c", "3")
        .trans("3", "u", "4")
        .trans("4", "d", "5")
        .trans("0", "b", "2");
    b.label("2", SECRET).label("5", SECRET);
    b.build().unwrap()
}
