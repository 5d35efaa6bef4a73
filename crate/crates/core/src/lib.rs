//! Modular verification and enforcement of current-state opacity and
//! anonymity for finite transition systems.
//!
//! The crate is `no_std` and needs only `alloc`. File formats and the command
//! line live in the `opacity` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod abstraction;
pub mod building;
pub mod compose;
pub mod error;
pub mod event;
#[doc(hidden)]
pub mod fixtures;
pub mod incremental;
pub mod observer;
pub mod origin;
pub mod project;
pub mod security;
pub mod synthesis;
pub mod ts;

pub use abstraction::{
    nb_abstract, quotient, vb_abstract, vb_abstract_deterministic, vb_equivalent, vb_partition, vb_partition_deterministic,
    Partition,
};
pub use compose::{compose, compose_all, LabelMergePolicy};
pub use error::Error;
pub use event::{EventAttr, EventId, EventTable, Label};
pub use observer::{is_deterministic, observe};
pub use origin::{Atom, Origin};
pub use ts::{
    epsilon_closure, extended_delta, hide, language_upto, replace_with_epsilon, Builder, Labels, Marking, State,
    StateId, Transition, TransitionSystem, Word, NON_SAFE, SECRET,
};
pub use incremental::{run_algorithm1, run_shared, select_pair, PipelineOutput, PipelineState, StepStats};
pub use project::Project;
pub use synthesis::{extended_forbidden, reduce_supervisor, synthesize, synthesize_via_nonblocking, ReducedSupervisor, SupervisorResult, SynthesisVerdict};
pub use security::{verify, DetectorLayout, Method, Mode, Pipeline, Property, Report, SecuritySpec, Verdict, VerifyOptions};
