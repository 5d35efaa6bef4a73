//! Event alphabets and transition labels.

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::error::Error;

/// Printed name of the silent label produced by hiding.
pub const TAU_NAME: &str = "tau";
/// Printed name of the empty-word label produced by epsilon replacement.
pub const EPSILON_NAME: &str = "eps";

/// Index into an [`EventTable`]. Ids follow the sorted order of event names.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EventId(pub u32);

impl EventId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EventAttr {
    pub observable: bool,
    pub controllable: bool,
}

impl EventAttr {
    pub const OBS_CTRL: EventAttr = EventAttr { observable: true, controllable: true };
    pub const OBS_UNCTRL: EventAttr = EventAttr { observable: true, controllable: false };
    pub const UNOBS_UNCTRL: EventAttr = EventAttr { observable: false, controllable: false };
    pub const UNOBS_CTRL: EventAttr = EventAttr { observable: false, controllable: true };
}

/// Transition label: an alphabet event, or one of the two structural pseudo-events.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Event(EventId),
    Tau,
    Epsilon,
}

impl Label {
    pub fn event(self) -> Option<EventId> {
        match self {
            Label::Event(e) => Some(e),
            _ => None,
        }
    }

    pub fn is_silent(self) -> bool {
        !matches!(self, Label::Event(_))
    }
}

/// Alphabet with per-event attributes, kept sorted by name.
#[derive(Clone, Default, PartialEq, Eq)]
pub struct EventTable {
    names: Vec<Arc<str>>,
    attrs: Vec<EventAttr>,
}

impl fmt::Debug for EventTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.names.iter().zip(self.attrs.iter())).finish()
    }
}

pub(crate) fn is_reserved(name: &str) -> bool {
    name == TAU_NAME || name == EPSILON_NAME
}

impl EventTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts an event, or checks that an existing entry agrees on attributes.
    pub fn insert(&mut self, name: &str, attr: EventAttr) -> Result<EventId, Error> {
        if is_reserved(name) || name.is_empty() {
            return Err(Error::ReservedEvent(name.into()));
        }
        match self.names.binary_search_by(|n| (**n).cmp(name)) {
            Ok(i) => {
                if self.attrs[i] != attr {
                    return Err(Error::AttributeConflict { event: name.into() });
                }
                Ok(EventId(i as u32))
            }
            Err(i) => {
                self.names.insert(i, name.into());
                self.attrs.insert(i, attr);
                Ok(EventId(i as u32))
            }
        }
    }

    pub fn id(&self, name: &str) -> Option<EventId> {
        self.names.binary_search_by(|n| (**n).cmp(name)).ok().map(|i| EventId(i as u32))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.id(name).is_some()
    }

    pub fn name(&self, id: EventId) -> &str {
        &self.names[id.index()]
    }

    pub(crate) fn name_arc(&self, id: EventId) -> &Arc<str> {
        &self.names[id.index()]
    }

    pub fn attr(&self, id: EventId) -> EventAttr {
        self.attrs[id.index()]
    }

    pub fn attr_of(&self, name: &str) -> Option<EventAttr> {
        self.id(name).map(|id| self.attr(id))
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = EventId> + '_ {
        (0..self.names.len() as u32).map(EventId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (EventId, &str, EventAttr)> + '_ {
        self.names
            .iter()
            .zip(self.attrs.iter())
            .enumerate()
            .map(|(i, (n, a))| (EventId(i as u32), &**n, *a))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> + '_ {
        self.names.iter().map(|n| &**n)
    }

    pub fn observable(&self) -> impl Iterator<Item = &str> + '_ {
        self.iter().filter(|(_, _, a)| a.observable).map(|(_, n, _)| n)
    }

    pub fn unobservable(&self) -> impl Iterator<Item = &str> + '_ {
        self.iter().filter(|(_, _, a)| !a.observable).map(|(_, n, _)| n)
    }

    /// Copy without the named events, plus the id remapping from old to new.
    pub(crate) fn without(&self, drop: &[bool]) -> (EventTable, Vec<Option<EventId>>) {
        let mut table = EventTable::new();
        let mut map = Vec::with_capacity(self.len());
        for (i, (n, a)) in self.names.iter().zip(self.attrs.iter()).enumerate() {
            if drop[i] {
                map.push(None);
            } else {
                map.push(Some(EventId(table.names.len() as u32)));
                table.names.push(n.clone());
                table.attrs.push(*a);
            }
        }
        (table, map)
    }

    /// Union of two tables. Shared names must agree on attributes.
    pub fn union(&self, other: &EventTable) -> Result<EventTable, Error> {
        let mut t = self.clone();
        for (_, n, a) in other.iter() {
            t.insert(n, a)?;
        }
        Ok(t)
    }
}
