use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use opacity_core::building::{gen_building, BuildingSpec, Movement};
use opacity_core::security::mark_non_safe;
use opacity_core::{
    compose_all, nb_abstract, observe, reduce_supervisor, synthesize, synthesize_via_nonblocking, verify,
    DetectorLayout, LabelMergePolicy, Method, Mode, Project, Property, Report, StateId, SupervisorResult,
    SynthesisVerdict, TransitionSystem, VerifyOptions, SECRET,
};

use crate::format::write_automaton;
use crate::project_file::{load_project, read_automaton, write_project_file, ProjectFile};

#[derive(Parser, Debug)]
#[command(name = "opacity", version, about = "Opacity and anonymity of modular transition systems")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Verify opacity (cso) or anonymity (csa) of a project.
    Verify(VerifyArgs),
    /// Observer of an automaton.
    Observe {
        automaton: PathBuf,
        /// Unobservable events replaced by epsilon (default: all).
        #[arg(long, value_delimiter = ',')]
        epsilon: Option<Vec<String>>,
        /// Label non-safe observer states with N.
        #[arg(long)]
        property: Option<PropertyArg>,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Hide events and quotient by visible bisimulation.
    Abstract {
        automaton: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        hide: Vec<String>,
        #[arg(long, value_enum, default_value_t = MethodArg::Vb)]
        method: MethodArg,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Synchronous composition.
    Compose {
        #[arg(required = true)]
        automata: Vec<PathBuf>,
        /// How state labels of the components are combined.
        #[arg(long, value_enum, default_value_t = LabelsArg::Union)]
        labels: LabelsArg,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Maximally permissive supervisor enforcing the project's property.
    Synthesize {
        project: PathBuf,
        #[arg(long)]
        property: Option<PropertyArg>,
        /// Write the supervisor here and its disabled events to `<out>.disabled`.
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Reduce the supervisor before writing it.
        #[arg(long)]
        reduce: bool,
        /// Use nonblocking synthesis on the extended observer.
        #[arg(long)]
        nonblocking: bool,
    },
    /// Benchmark generators.
    #[command(subcommand)]
    Bench(Bench),
    /// Size and alphabet of an automaton.
    Stats { automaton: PathBuf },
}

#[derive(Args, Debug)]
struct VerifyArgs {
    project: PathBuf,
    #[arg(long)]
    property: Option<PropertyArg>,
    #[arg(long, value_enum, default_value_t = ModeArg::Auto)]
    mode: ModeArg,
    #[arg(long, value_enum, default_value_t = MethodArg::Vb)]
    abstraction: MethodArg,
    /// Detector layout of the monolithic check.
    #[arg(long, value_enum, default_value_t = DetectorArg::Global)]
    detector: DetectorArg,
    /// Candidate pool size for pair selection.
    #[arg(long, default_value_t = opacity_core::incremental::DEFAULT_CANDIDATES)]
    candidates: usize,
    /// Print the per-step size table.
    #[arg(long)]
    stats: bool,
}

#[derive(Subcommand, Debug)]
enum Bench {
    /// Floors and elevators with card readers.
    Building {
        #[arg(long)]
        floors: usize,
        #[arg(long)]
        elevators: usize,
        /// Secret floor states, e.g. `F2:1,5`.
        #[arg(long)]
        secret: Vec<String>,
        /// Card-reader events whose transitions are removed.
        #[arg(long, value_delimiter = ',')]
        disable: Vec<String>,
        #[arg(long, value_enum, default_value_t = MovementArg::Shared)]
        movement: MovementArg,
        /// Write automata and a project file into this directory.
        #[arg(long)]
        emit: Option<PathBuf>,
        /// Also verify opacity.
        #[arg(long)]
        verify: bool,
        #[arg(long, value_enum, default_value_t = ModeArg::Auto)]
        mode: ModeArg,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PropertyArg {
    Cso,
    Csa,
}

impl From<PropertyArg> for Property {
    fn from(p: PropertyArg) -> Property {
        match p {
            PropertyArg::Cso => Property::Cso,
            PropertyArg::Csa => Property::Csa,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Monolithic,
    Incremental,
    Auto,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Monolithic => Mode::Monolithic,
            ModeArg::Incremental => Mode::Incremental,
            ModeArg::Auto => Mode::Auto,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    Vb,
    Nb,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Method {
        match m {
            MethodArg::Vb => Method::Vb,
            MethodArg::Nb => Method::Nb,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DetectorArg {
    Local,
    Global,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum LabelsArg {
    Union,
    Intersection,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MovementArg {
    Shared,
    PerElevator,
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Verify(a) => {
            let project = load_project(&a.project, a.property.map(Into::into))?;
            let options = VerifyOptions {
                mode: a.mode.into(),
                method: a.abstraction.into(),
                candidates: a.candidates,
                detector: match a.detector {
                    DetectorArg::Local => DetectorLayout::Local,
                    DetectorArg::Global => DetectorLayout::Global,
                },
            };
            let report = verify(&project, &options)?;
            print!("{}", format_report(&project, &report, a.stats));
            Ok(if report.verdict.holds() { 0 } else { 1 })
        }
        Command::Observe { automaton, epsilon, property, out } => {
            let ts = read_automaton(&automaton)?;
            let eps: Vec<String> =
                epsilon.unwrap_or_else(|| ts.events().unobservable().map(String::from).collect());
            let mut obs = observe(&ts, &eps, LabelMergePolicy::Union)?;
            if let Some(p) = property {
                let project = Project::from_labels(ts.name(), vec![ts.clone()], p.into())?;
                obs = mark_non_safe(&obs, &project.security)?;
            }
            emit(&write_automaton(&obs), out.as_deref())?;
            Ok(0)
        }
        Command::Abstract { automaton, hide, method, out } => {
            let ts = read_automaton(&automaton)?;
            let abs = match method {
                MethodArg::Vb => opacity_core::vb_abstract(&ts, &hide)?,
                MethodArg::Nb => nb_abstract(&ts, &hide)?,
            };
            emit(&write_automaton(&abs), out.as_deref())?;
            Ok(0)
        }
        Command::Compose { automata, labels, out } => {
            let systems = automata.iter().map(|p| read_automaton(p)).collect::<Result<Vec<_>>>()?;
            let refs: Vec<&TransitionSystem> = systems.iter().collect();
            let policy = match labels {
                LabelsArg::Union => LabelMergePolicy::Union,
                LabelsArg::Intersection => LabelMergePolicy::Intersection,
            };
            emit(&write_automaton(&compose_all(&refs, policy)?), out.as_deref())?;
            Ok(0)
        }
        Command::Synthesize { project, property, out, reduce, nonblocking } => {
            let project = load_project(&project, property.map(Into::into))?;
            let result = if nonblocking { synthesize_via_nonblocking(&project)? } else { synthesize(&project)? };
            print!("{}", format_synthesis(&result, reduce));
            if let (Some(path), Some(sup)) = (out, result.supervisor.as_ref()) {
                let (sup, disabled) = if reduce {
                    let r = reduce_supervisor(&result).expect("supervisor exists");
                    (r.supervisor, r.disabled)
                } else {
                    (sup.clone(), result.disabled.clone())
                };
                fs::write(&path, write_automaton(&sup)).with_context(|| format!("writing {}", path.display()))?;
                let side = sidecar_path(&path);
                fs::write(&side, format_disabled(&sup, &disabled))
                    .with_context(|| format!("writing {}", side.display()))?;
            }
            Ok(if result.verdict == SynthesisVerdict::Unenforceable { 1 } else { 0 })
        }
        Command::Bench(Bench::Building { floors, elevators, secret, disable, movement, emit: dir, verify: check, mode }) => {
            let mut spec = BuildingSpec::new(floors, elevators);
            spec.movement = match movement {
                MovementArg::Shared => Movement::Shared,
                MovementArg::PerElevator => Movement::PerElevator,
            };
            for s in &secret {
                let (floor, ids) = parse_secret(s)?;
                spec = spec.secret(floor, &ids);
            }
            for d in disable {
                spec = spec.disable(&d);
            }
            let project = gen_building(&spec)?;
            let mut out = String::new();
            let (states, transitions) = project
                .members
                .iter()
                .fold((0, 0), |(s, t), m| (s + m.num_states(), t + m.num_transitions()));
            writeln!(
                out,
                "project: {}\nmodules: {}\nmodule states={states} transitions={transitions}",
                project.name,
                project.members.len()
            )?;
            if let Some(dir) = dir {
                let file = emit_project(&project, &dir)?;
                writeln!(out, "emitted: {}", file.display())?;
            }
            print!("{out}");
            if check {
                let report = verify(&project, &VerifyOptions { mode: mode.into(), ..Default::default() })?;
                print!("{}", format_report(&project, &report, false));
                return Ok(if report.verdict.holds() { 0 } else { 1 });
            }
            Ok(0)
        }
        Command::Stats { automaton } => {
            let ts = read_automaton(&automaton)?;
            print!("{}", format_stats(&ts));
            Ok(0)
        }
    }
}

/// `F2:1,5` or `2:1,5`.
fn parse_secret(s: &str) -> Result<(usize, Vec<usize>)> {
    let Some((floor, ids)) = s.split_once(':') else {
        bail!("secret `{s}` should look like F2:1,5");
    };
    let floor = floor.trim_start_matches(['F', 'f']).parse().with_context(|| format!("floor in `{s}`"))?;
    let ids = ids
        .split(',')
        .filter(|x| !x.is_empty())
        .map(|x| x.trim().parse().with_context(|| format!("state id in `{s}`")))
        .collect::<Result<Vec<usize>>>()?;
    Ok((floor, ids))
}

/// Members with their secret states flagged, as written by `--emit`.
fn labelled_members(project: &Project) -> Vec<TransitionSystem> {
    project
        .members
        .iter()
        .map(|m| match project.security.secrets.get(m.name()) {
            Some(set) => m.map_labels(|x, l| {
                if set.contains(&m.state(x).origin.name()) {
                    l.insert(SECRET);
                }
            }),
            None => m.clone(),
        })
        .collect()
}

fn emit_project(project: &Project, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut modules = Vec::new();
    for m in labelled_members(project) {
        let file = PathBuf::from(format!("{}.aut", m.name()));
        fs::write(dir.join(&file), write_automaton(&m))?;
        modules.push(file);
    }
    let pf = ProjectFile {
        name: project.name.clone(),
        property: project.security.property,
        modules,
        uncontrollable: project.uncontrollable.iter().cloned().collect(),
    };
    let path = dir.join(format!("{}.prj", project.name));
    fs::write(&path, write_project_file(&pf))?;
    Ok(path)
}

pub fn format_report(project: &Project, report: &Report, stats: bool) -> String {
    let mut out = String::new();
    let pipeline = match report.pipeline {
        opacity_core::Pipeline::Monolithic => "monolithic",
        opacity_core::Pipeline::Incremental => "incremental",
        opacity_core::Pipeline::Shared => "shared",
    };
    writeln!(out, "project: {}", project.name).unwrap();
    writeln!(out, "property: {}", project.security.property).unwrap();
    writeln!(out, "pipeline: {pipeline}").unwrap();
    writeln!(out, "verdict: {}", report.verdict).unwrap();
    writeln!(out, "states={} transitions={}", report.states, report.transitions).unwrap();
    if let Some(w) = &report.witness {
        let trace: Vec<&str> = w.iter().map(|e| &**e).collect();
        writeln!(out, "witness: {}", trace.join(" ")).unwrap();
    }
    if stats {
        out.push_str("step\tomega\tstates_before\tstates_after\ttrans_before\ttrans_after\n");
        for s in &report.steps {
            let omega: Vec<&str> = s.omega.iter().map(|i| project.members[*i].name()).collect();
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}",
                s.step,
                omega.join(","),
                s.states_before,
                s.states_after,
                s.transitions_before,
                s.transitions_after
            )
            .unwrap();
        }
    }
    out
}

fn format_synthesis(r: &SupervisorResult, reduce: bool) -> String {
    let mut out = String::new();
    writeln!(out, "verdict: {}", r.verdict).unwrap();
    writeln!(out, "plant: states={} transitions={}", r.plant.num_states(), r.plant.num_transitions()).unwrap();
    writeln!(out, "removed: {}", r.removed_states.len()).unwrap();
    if let Some(sup) = &r.supervisor {
        writeln!(out, "supervisor: states={} transitions={}", sup.num_states(), sup.num_transitions()).unwrap();
        let events: BTreeSet<&str> = r.disabled.values().flatten().map(String::as_str).collect();
        writeln!(out, "disabled: {}", events.into_iter().collect::<Vec<_>>().join(" ")).unwrap();
        if reduce {
            let red = reduce_supervisor(r).expect("supervisor exists").supervisor;
            writeln!(out, "reduced: states={} transitions={}", red.num_states(), red.num_transitions()).unwrap();
        }
    }
    out
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".disabled");
    PathBuf::from(s)
}

/// One line per state with disabled events: the state name, then the events.
fn format_disabled(sup: &TransitionSystem, disabled: &std::collections::BTreeMap<StateId, BTreeSet<String>>) -> String {
    let mut out = String::from("# state\tdisabled events\n");
    for (x, events) in disabled {
        let names: Vec<&str> = events.iter().map(String::as_str).collect();
        writeln!(out, "{}\t{}", sup.state(*x).origin.name(), names.join(" ")).unwrap();
    }
    out
}

pub fn format_stats(ts: &TransitionSystem) -> String {
    let ev = ts.events();
    let count = |f: &dyn Fn(opacity_core::EventAttr) -> bool| ev.iter().filter(|(_, _, a)| f(*a)).count();
    let marked = ts.state_ids().filter(|x| ts.is_marked(*x)).count();
    let mut out = String::new();
    writeln!(out, "system: {}", ts.name()).unwrap();
    writeln!(out, "states={} transitions={}", ts.num_states(), ts.num_transitions()).unwrap();
    writeln!(out, "initial={} marked={marked}", ts.initial().len()).unwrap();
    writeln!(
        out,
        "events={} observable={} unobservable={} controllable={} uncontrollable={}",
        ev.len(),
        count(&|a| a.observable),
        count(&|a| !a.observable),
        count(&|a| a.controllable),
        count(&|a| !a.controllable)
    )
    .unwrap();
    writeln!(out, "alphabet: {}", ev.names().collect::<Vec<_>>().join(" ")).unwrap();
    out
}
