//! A modular system with its security specification.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::Error;
use crate::event::EventAttr;
use crate::security::{Property, SecuritySpec};
use crate::ts::{TransitionSystem, SECRET};

#[derive(Clone, Debug)]
pub struct Project {
    pub name: String,
    pub members: Vec<TransitionSystem>,
    pub security: SecuritySpec,
    /// Events forced uncontrollable for synthesis.
    pub uncontrollable: BTreeSet<String>,
}

impl Project {
    pub fn new(name: &str, members: Vec<TransitionSystem>, security: SecuritySpec) -> Result<Project, Error> {
        if members.is_empty() {
            return Err(Error::EmptyProject);
        }
        let mut seen = BTreeSet::new();
        for m in &members {
            if !seen.insert(m.name()) {
                return Err(Error::DuplicateSubsystem(m.name().into()));
            }
        }
        let p = Project { name: name.into(), members, security, uncontrollable: BTreeSet::new() };
        p.security.validate(&p.members)?;
        Ok(p)
    }

    /// Project whose CSO secrets are read from the `secret` state labels.
    pub fn from_labels(name: &str, members: Vec<TransitionSystem>, property: Property) -> Result<Project, Error> {
        let security = match property {
            Property::Csa => SecuritySpec::csa(),
            Property::Cso => {
                let mut secrets = BTreeMap::new();
                for m in &members {
                    let set: BTreeSet<String> = m
                        .state_ids()
                        .filter(|x| m.has_label(*x, SECRET))
                        .map(|x| m.state(x).origin.name())
                        .collect();
                    if !set.is_empty() {
                        secrets.insert(m.name().to_string(), set);
                    }
                }
                SecuritySpec::cso(secrets)
            }
        };
        Project::new(name, members, security)
    }

    pub fn with_uncontrollable(mut self, events: impl IntoIterator<Item = impl Into<String>>) -> Result<Self, Error> {
        for e in events {
            let e = e.into();
            if !self.members.iter().any(|m| m.events().contains(&e)) {
                return Err(Error::UnknownEvent(e));
            }
            self.uncontrollable.insert(e);
        }
        Ok(self)
    }

    pub fn with_property(mut self, property: Property) -> Self {
        if property != self.security.property {
            self.security = match property {
                Property::Csa => SecuritySpec::csa(),
                Property::Cso => SecuritySpec::cso(BTreeMap::new()),
            };
        }
        self
    }

    /// Members with the uncontrollable overrides applied.
    pub fn effective_members(&self) -> Vec<TransitionSystem> {
        if self.uncontrollable.is_empty() {
            return self.members.clone();
        }
        self.members
            .iter()
            .map(|m| {
                m.with_attrs(|n, a| {
                    if self.uncontrollable.contains(n) {
                        EventAttr { controllable: false, ..a }
                    } else {
                        a
                    }
                })
            })
            .collect()
    }

    /// For every event, the indices of the members using it.
    pub fn event_owners(&self) -> BTreeMap<String, Vec<usize>> {
        let mut owners: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, m) in self.members.iter().enumerate() {
            for n in m.events().names() {
                owners.entry(n.to_string()).or_default().push(i);
            }
        }
        owners
    }

    /// Unobservable events used by more than one member.
    pub fn shared_unobservable(&self) -> Vec<String> {
        self.event_owners()
            .into_iter()
            .filter(|(e, owners)| {
                owners.len() > 1 && self.members[owners[0]].events().attr_of(e).is_some_and(|a| !a.observable)
            })
            .map(|(e, _)| e)
            .collect()
    }
}
