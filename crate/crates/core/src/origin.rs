//! Structural identity of states across composition, observation and quotienting.

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

/// A state of some named base system.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub system: Arc<str>,
    pub state: Arc<str>,
}

/// Where a state came from.
///
/// Tuples and blocks are flattened on construction, so n-ary products are
/// n-tuples whatever the bracketing and observers of observers are plain sets.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Origin {
    Atom(Arc<Atom>),
    Tuple(Arc<[Origin]>),
    /// Observer state: sorted, duplicate-free, nonempty.
    Block(Arc<[Origin]>),
    /// Quotient state: sorted, duplicate-free, nonempty.
    Class(Arc<[Origin]>),
}

impl Origin {
    pub fn atom(system: &str, state: &str) -> Origin {
        Origin::Atom(Arc::new(Atom { system: system.into(), state: state.into() }))
    }

    pub(crate) fn atom_shared(system: &Arc<str>, state: &str) -> Origin {
        Origin::Atom(Arc::new(Atom { system: system.clone(), state: state.into() }))
    }

    pub fn tuple<'a>(parts: impl IntoIterator<Item = &'a Origin>) -> Origin {
        let mut v = Vec::new();
        for p in parts {
            match p {
                Origin::Tuple(inner) => v.extend(inner.iter().cloned()),
                other => v.push(other.clone()),
            }
        }
        Origin::Tuple(v.into())
    }

    pub fn block<'a>(members: impl IntoIterator<Item = &'a Origin>) -> Origin {
        let mut v = Vec::new();
        for m in members {
            match m {
                Origin::Block(inner) => v.extend(inner.iter().cloned()),
                other => v.push(other.clone()),
            }
        }
        v.sort();
        v.dedup();
        debug_assert!(!v.is_empty());
        Origin::Block(v.into())
    }

    pub fn class<'a>(members: impl IntoIterator<Item = &'a Origin>) -> Origin {
        let mut v = Vec::new();
        for m in members {
            match m {
                Origin::Class(inner) => v.extend(inner.iter().cloned()),
                other => v.push(other.clone()),
            }
        }
        v.sort();
        v.dedup();
        debug_assert!(!v.is_empty());
        Origin::Class(v.into())
    }

    /// Members of a block or class; `None` for atoms and tuples.
    pub fn members(&self) -> Option<&[Origin]> {
        match self {
            Origin::Block(m) | Origin::Class(m) => Some(m),
            _ => None,
        }
    }

    pub fn components(&self) -> Option<&[Origin]> {
        match self {
            Origin::Tuple(c) => Some(c),
            _ => None,
        }
    }

    pub fn as_atom(&self) -> Option<&Atom> {
        match self {
            Origin::Atom(a) => Some(a),
            _ => None,
        }
    }

    /// Calls `f` on every atom in this origin.
    pub fn for_each_atom(&self, f: &mut impl FnMut(&Atom)) {
        match self {
            Origin::Atom(a) => f(a),
            Origin::Tuple(v) | Origin::Block(v) | Origin::Class(v) => {
                v.iter().for_each(|o| o.for_each_atom(f))
            }
        }
    }

    pub fn name(&self) -> String {
        alloc::format!("{self}")
    }
}

fn write_list(f: &mut fmt::Formatter<'_>, open: &str, items: &[Origin], close: &str) -> fmt::Result {
    f.write_str(open)?;
    for (i, o) in items.iter().enumerate() {
        if i > 0 {
            f.write_str(",")?;
        }
        write!(f, "{o}")?;
    }
    f.write_str(close)
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Atom(a) => f.write_str(&a.state),
            Origin::Tuple(v) => write_list(f, "(", v, ")"),
            Origin::Block(v) => write_list(f, "{", v, "}"),
            Origin::Class(v) => write_list(f, "[", v, "]"),
        }
    }
}

impl fmt::Debug for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}
