use alloc::string::String;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("unknown state {0}")]
    UnknownState(u32),
    #[error("unknown state `{0}`")]
    UnknownStateName(String),
    #[error("unknown event `{0}`")]
    UnknownEvent(String),
    #[error("`{0}` is a reserved event name")]
    ReservedEvent(String),
    #[error("system `{0}` has no initial state")]
    NoInitialState(String),
    #[error("event `{event}` is declared with conflicting attributes")]
    AttributeConflict { event: String },
    #[error("cannot hide unobservable event `{0}`; replace it with epsilon instead")]
    HideUnobservable(String),
    #[error("cannot replace observable event `{0}` with epsilon")]
    EpsilonObservable(String),
    #[error("words may only contain alphabet events")]
    SilentInWord,
    #[error("block containing state {0} is not label-uniform")]
    NonUniformBlock(u32),
    #[error("partition does not cover the state set")]
    InvalidPartition,
    #[error("event `{0}` already belongs to the alphabet")]
    EventCollision(String),
    #[error("unknown subsystem `{0}`")]
    UnknownSubsystem(String),
    #[error("duplicate subsystem `{0}`")]
    DuplicateSubsystem(String),
    #[error("project has no subsystems")]
    EmptyProject,
    #[error("secret state `{state}` does not exist in subsystem `{system}`")]
    UnknownSecret { system: String, state: String },
    #[error("unobservable events shared between subsystems: {}", .0.join(", "))]
    SharedUnobservable(Vec<String>),
    #[error("unobservable event `{0}` must be uncontrollable")]
    ControllableUnobservable(String),
    #[error(
        "future nondeterministic choice on {}; rename the event at one of these transitions in every subsystem that shares it",
        fnc_list(.0)
    )]
    FutureNondeterministicChoice(Vec<(String, String, String)>),
    #[error("invalid building parameters: {0}")]
    InvalidBuilding(String),
}

fn fnc_list(v: &[(String, String, String)]) -> String {
    let mut s = String::new();
    for (i, (x, e, y)) in v.iter().enumerate() {
        if i > 0 {
            s.push_str(", ");
        }
        s.push_str(&alloc::format!("{x} -{e}-> {y}"));
    }
    s
}
