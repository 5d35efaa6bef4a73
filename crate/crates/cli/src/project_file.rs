//! Project files listing the modules of a modular system.
//!
//! ```text
//! project building_2x3
//! property cso
//! module F1.aut
//! module E1.aut
//! uncontrollable c1_1 e1_1
//! ```
//!
//! Module paths are relative to the project file. CSO secrets come from the
//! `secret` flags in the module files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use opacity_core::{Project, Property};

use crate::format::parse_automaton;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProjectFile {
    pub name: String,
    pub property: Property,
    pub modules: Vec<PathBuf>,
    pub uncontrollable: Vec<String>,
}

pub fn parse_property(s: &str) -> Result<Property> {
    match s {
        "cso" => Ok(Property::Cso),
        "csa" => Ok(Property::Csa),
        other => bail!("unknown property `{other}`; expected cso or csa"),
    }
}

pub fn parse_project_file(text: &str) -> Result<ProjectFile> {
    let mut name = None;
    let mut property = Property::Cso;
    let mut modules = Vec::new();
    let mut uncontrollable = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let content = raw.split('#').next().unwrap_or("").trim();
        let toks: Vec<&str> = content.split_whitespace().collect();
        let line = i + 1;
        match toks.as_slice() {
            [] => {}
            ["project", n] => name = Some(n.to_string()),
            ["property", p] => property = parse_property(p).with_context(|| format!("line {line}"))?,
            ["module", path] => modules.push(PathBuf::from(path)),
            ["uncontrollable", events @ ..] => uncontrollable.extend(events.iter().map(|e| e.to_string())),
            _ => bail!("line {line}: cannot parse `{content}`"),
        }
    }
    let Some(name) = name else { bail!("missing `project <name>` line") };
    if modules.is_empty() {
        bail!("project `{name}` lists no modules");
    }
    Ok(ProjectFile { name, property, modules, uncontrollable })
}

pub fn write_project_file(p: &ProjectFile) -> String {
    let mut out = String::new();
    writeln!(out, "project {}", p.name).unwrap();
    writeln!(out, "property {}", p.property).unwrap();
    for m in &p.modules {
        writeln!(out, "module {}", m.display()).unwrap();
    }
    if !p.uncontrollable.is_empty() {
        writeln!(out, "uncontrollable {}", p.uncontrollable.join(" ")).unwrap();
    }
    out
}

pub fn read_automaton(path: &Path) -> Result<opacity_core::TransitionSystem> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_automaton(&text).with_context(|| format!("in {}", path.display()))
}

/// Loads a project file and its modules; `property` overrides the file.
pub fn load_project(path: &Path, property: Option<Property>) -> Result<Project> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let pf = parse_project_file(&text).with_context(|| format!("in {}", path.display()))?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let members =
        pf.modules.iter().map(|m| read_automaton(&dir.join(m))).collect::<Result<Vec<_>>>()?;
    let project = Project::from_labels(&pf.name, members, property.unwrap_or(pf.property))?;
    Ok(project.with_uncontrollable(pf.uncontrollable)?)
}
