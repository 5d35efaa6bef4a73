//! Parametric building benchmark: `n` floors, `m` elevators, card readers.
//!
//! Floor `i` has corridor states `1..=2m` arranged in a ring and an inside
//! state `2j'` for elevator `j`. Corridor reader `c{i}_{j}` moves between
//! `2j-1`, `2j` and `2j+1`; elevator reader `e{i}_{j}` moves between `2j` and
//! `2j'` and synchronises with elevator `j`. Elevator `j` has a shaft state
//! `2k-1` and a cabin state `2k` per floor `k`. Elevators move with `u`/`d`,
//! which by default are shared by all elevators (see [`Movement`]).
//! Every state is initial.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::Error;
use crate::event::EventAttr;
use crate::project::Project;
use crate::security::SecuritySpec;
use crate::ts::{Builder, TransitionSystem};

pub fn corridor_event(floor: usize, elevator: usize) -> String {
    format!("c{floor}_{elevator}")
}

pub fn elevator_event(floor: usize, elevator: usize) -> String {
    format!("e{floor}_{elevator}")
}

pub fn floor_name(i: usize) -> String {
    format!("F{i}")
}

pub fn elevator_name(j: usize) -> String {
    format!("E{j}")
}

/// State name of floor state `id`: `1..=2m` are corridor states and
/// `2m+j` is the inside state `2j'`.
pub fn floor_state_name(id: usize, m: usize) -> Option<String> {
    match id {
        0 => None,
        _ if id <= 2 * m => Some(id.to_string()),
        _ if id <= 3 * m => Some(format!("{}'", 2 * (id - 2 * m))),
        _ => None,
    }
}

pub fn gen_floor(i: usize, m: usize) -> TransitionSystem {
    assert!(m >= 1, "a floor needs an elevator");
    let mut b = Builder::new(&floor_name(i));
    for j in 1..=m {
        b.event(&corridor_event(i, j), EventAttr::OBS_CTRL).expect("fresh event");
        b.event(&elevator_event(i, j), EventAttr::OBS_CTRL).expect("fresh event");
    }
    for id in 1..=3 * m {
        let s = floor_state_name(id, m).expect("in range");
        b.initial(&s);
    }
    for j in 1..=m {
        let (c, e) = (corridor_event(i, j), elevator_event(i, j));
        let lo = (2 * j - 1).to_string();
        let door = (2 * j).to_string();
        let hi = if j == m { "1".to_string() } else { (2 * j + 1).to_string() };
        let inside = format!("{}'", 2 * j);
        b.trans(&lo, &c, &door).trans(&door, &c, &lo).trans(&door, &c, &hi);
        b.trans(&door, &e, &inside).trans(&inside, &e, &door);
    }
    b.build().expect("well-formed floor")
}

/// Naming of the elevator movement events.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Movement {
    /// One `u` and one `d` for all elevators. This reproduces the published
    /// benchmark sizes.
    #[default]
    Shared,
    /// `u{j}` and `d{j}` local to elevator `j`.
    PerElevator,
}

pub fn gen_elevator(j: usize, n: usize, movement: Movement) -> TransitionSystem {
    assert!(n >= 1, "an elevator needs a floor");
    let mut b = Builder::new(&elevator_name(j));
    let (u, d) = match movement {
        Movement::Shared => ("u".to_string(), "d".to_string()),
        Movement::PerElevator => (format!("u{j}"), format!("d{j}")),
    };
    for k in 1..=n {
        b.event(&elevator_event(k, j), EventAttr::OBS_CTRL).expect("fresh event");
    }
    if n > 1 {
        b.event(&u, EventAttr::OBS_CTRL).expect("fresh event");
        b.event(&d, EventAttr::OBS_CTRL).expect("fresh event");
    }
    for s in 1..=2 * n {
        b.initial(&s.to_string());
    }
    for k in 1..=n {
        let shaft = (2 * k - 1).to_string();
        let cabin = (2 * k).to_string();
        let e = elevator_event(k, j);
        b.trans(&shaft, &e, &cabin).trans(&cabin, &e, &shaft);
        if k < n {
            let up = (2 * k + 1).to_string();
            b.trans(&shaft, &u, &up).trans(&up, &d, &shaft);
        }
    }
    b.build().expect("well-formed elevator")
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BuildingSpec {
    pub floors: usize,
    pub elevators: usize,
    /// Secret floor state ids per floor (1-based; see [`floor_state_name`]).
    pub secrets: BTreeMap<usize, BTreeSet<usize>>,
    /// Reader events whose transitions are removed.
    pub disabled: BTreeSet<String>,
    pub movement: Movement,
}

impl BuildingSpec {
    pub fn new(floors: usize, elevators: usize) -> Self {
        BuildingSpec { floors, elevators, ..Default::default() }
    }

    pub fn secret(mut self, floor: usize, ids: &[usize]) -> Self {
        self.secrets.entry(floor).or_default().extend(ids.iter().copied());
        self
    }

    pub fn disable(mut self, event: &str) -> Self {
        self.disabled.insert(event.into());
        self
    }
}

pub fn gen_building(spec: &BuildingSpec) -> Result<Project, Error> {
    let (n, m) = (spec.floors, spec.elevators);
    if n == 0 || m == 0 {
        return Err(Error::InvalidBuilding(format!("need at least one floor and one elevator, got ({n},{m})")));
    }
    let mut members: Vec<TransitionSystem> = (1..=n).map(|i| gen_floor(i, m)).collect();
    members.extend((1..=m).map(|j| gen_elevator(j, n, spec.movement)));
    for e in &spec.disabled {
        if !members.iter().any(|s| s.events().contains(e)) {
            return Err(Error::UnknownEvent(e.clone()));
        }
    }
    let disabled: Vec<&str> = spec.disabled.iter().map(String::as_str).collect();
    let members = members
        .into_iter()
        .map(|s| {
            let mine: Vec<&str> = disabled.iter().copied().filter(|e| s.events().contains(e)).collect();
            if mine.is_empty() {
                Ok(s)
            } else {
                s.without_event_transitions(&mine)
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut secrets = BTreeMap::new();
    for (&floor, ids) in &spec.secrets {
        if floor == 0 || floor > n {
            return Err(Error::InvalidBuilding(format!("no floor {floor}")));
        }
        let names = ids
            .iter()
            .map(|&id| {
                floor_state_name(id, m)
                    .ok_or_else(|| Error::InvalidBuilding(format!("floor {floor} has no state {id}")))
            })
            .collect::<Result<BTreeSet<_>, _>>()?;
        if !names.is_empty() {
            secrets.insert(floor_name(floor), names);
        }
    }
    Project::new(&format!("building_{n}x{m}"), members, SecuritySpec::cso(secrets))
}
