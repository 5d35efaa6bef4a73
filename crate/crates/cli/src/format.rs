//! Line-oriented automaton files.
//!
//! ```text
//! system F1
//! event c1_1 obs ctrl
//! event u1 unobs unctrl
//! state 1 init
//! state 2 init secret label:N
//! trans 1 c1_1 2
//! ```
//!
//! `#` starts a comment. Events default to `obs ctrl`. If no state is flagged
//! `marked`, every state counts as marked. `tau` and `eps` may label
//! transitions without being declared.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;

use opacity_core::{Builder, EventAttr, Marking, TransitionSystem, SECRET};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: {source}")]
    Model { line: usize, source: opacity_core::Error },
    #[error(transparent)]
    Build(#[from] opacity_core::Error),
}

fn syntax(line: usize, msg: impl Into<String>) -> FormatError {
    FormatError::Syntax { line, msg: msg.into() }
}

/// Marker for files that declare explicit marking without marking any state.
const EXPLICIT_MARKING: &str = "marking explicit";

pub fn parse_automaton(text: &str) -> Result<TransitionSystem, FormatError> {
    let mut builder: Option<Builder> = None;
    let mut states = HashSet::new();
    let mut events = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let toks: Vec<&str> = content.split_whitespace().collect();
        if toks[0] == "system" {
            if builder.is_some() {
                return Err(syntax(line, "second `system` line"));
            }
            let [_, name] = toks[..] else {
                return Err(syntax(line, "expected `system <name>`"));
            };
            builder = Some(Builder::new(name));
            continue;
        }
        let b = builder.as_mut().ok_or_else(|| syntax(line, "expected `system <name>` first"))?;
        match toks[0] {
            "marking" if content == EXPLICIT_MARKING => {
                b.explicit_marking();
            }
            "event" => {
                let (name, flags) = toks[1..].split_first().ok_or_else(|| syntax(line, "missing event name"))?;
                let mut attr = EventAttr::OBS_CTRL;
                for f in flags {
                    match *f {
                        "obs" => attr.observable = true,
                        "unobs" => attr.observable = false,
                        "ctrl" => attr.controllable = true,
                        "unctrl" => attr.controllable = false,
                        other => return Err(syntax(line, format!("unknown event flag `{other}`"))),
                    }
                }
                b.event(name, attr).map_err(|source| FormatError::Model { line, source })?;
                events.insert(name.to_string());
            }
            "state" => {
                let (name, flags) = toks[1..].split_first().ok_or_else(|| syntax(line, "missing state name"))?;
                if !states.insert(name.to_string()) {
                    return Err(syntax(line, format!("state `{name}` declared twice")));
                }
                b.state(name);
                for f in flags {
                    match *f {
                        "init" => {
                            b.initial(name);
                        }
                        "marked" => {
                            b.mark(name);
                        }
                        "secret" => {
                            b.label(name, SECRET);
                        }
                        other => match other.strip_prefix("label:") {
                            Some(l) if !l.is_empty() => {
                                b.label(name, l);
                            }
                            _ => return Err(syntax(line, format!("unknown state flag `{other}`"))),
                        },
                    }
                }
            }
            "trans" => {
                let [_, s, e, t] = toks[..] else {
                    return Err(syntax(line, "expected `trans <source> <event> <target>`"));
                };
                for x in [s, t] {
                    if !states.contains(x) {
                        return Err(syntax(line, format!("undeclared state `{x}`")));
                    }
                }
                if !events.contains(e) && e != "tau" && e != "eps" {
                    return Err(syntax(line, format!("undeclared event `{e}`")));
                }
                b.trans(s, e, t);
            }
            other => return Err(syntax(line, format!("unknown keyword `{other}`"))),
        }
    }
    let b = builder.ok_or_else(|| syntax(1, "empty file"))?;
    Ok(b.build()?)
}

/// Printable, whitespace-free and unique state names.
fn state_names(ts: &TransitionSystem) -> Vec<String> {
    let mut seen: HashMap<String, usize> = HashMap::new();
    ts.states()
        .iter()
        .map(|s| {
            let base: String = s.origin.name().chars().map(|c| if c.is_whitespace() || c == '#' { '_' } else { c }).collect();
            let n = seen.entry(base.clone()).or_insert(0);
            *n += 1;
            if *n == 1 {
                base
            } else {
                format!("{base}~{}", *n - 1)
            }
        })
        .collect()
}

pub fn write_automaton(ts: &TransitionSystem) -> String {
    let mut out = String::new();
    let names = state_names(ts);
    writeln!(out, "system {}", ts.name()).unwrap();
    for (_, name, a) in ts.events().iter() {
        let o = if a.observable { "obs" } else { "unobs" };
        let c = if a.controllable { "ctrl" } else { "unctrl" };
        writeln!(out, "event {name} {o} {c}").unwrap();
    }
    let explicit = ts.marking() == Marking::Explicit;
    if explicit && !ts.state_ids().any(|x| ts.is_marked(x)) {
        writeln!(out, "{EXPLICIT_MARKING}").unwrap();
    }
    let initial: HashSet<_> = ts.initial().iter().copied().collect();
    for x in ts.state_ids() {
        out.push_str("state ");
        out.push_str(&names[x.index()]);
        if initial.contains(&x) {
            out.push_str(" init");
        }
        if explicit && ts.is_marked(x) {
            out.push_str(" marked");
        }
        for l in ts.state(x).labels.iter() {
            if l == SECRET {
                out.push_str(" secret");
            } else {
                write!(out, " label:{l}").unwrap();
            }
        }
        out.push('\n');
    }
    for t in ts.transitions() {
        let e = ts.label_name(t.label);
        writeln!(out, "trans {} {e} {}", names[t.source.index()], names[t.target.index()]).unwrap();
    }
    out
}
