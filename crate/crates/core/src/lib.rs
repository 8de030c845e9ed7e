//! Toolkit and deterministic simulator for treating assumption failures in
//! fault-tolerant software.
//!
//! Three strategies are provided, each postponing the binding of a design
//! assumption until better knowledge is available:
//!
//! * [`probe`]: parse a memory-bank inventory, look the modules up in a
//!   knowledge base and select the cheapest memory access method that
//!   tolerates the assessed failure behavior (deploy/compile time).
//! * [`alpha`] + [`pattern`]: feed watchdog firings into an alpha-count
//!   filter and switch a reflective component DAG from a redoing pattern to
//!   a reconfiguration pattern once a fault is judged permanent (run time).
//! * [`voting`] + [`redundancy`]: compute the distance-to-failure of each
//!   voting round and autonomically raise or lower the replica count (run
//!   time).
//!
//! [`assumption`] holds the vocabulary every strategy reports into, [`fault`]
//! the deterministic fault-injection schedules, and [`sim`] ties everything
//! together into reproducible scenarios.

pub mod alpha;
pub mod assumption;
pub mod fault;
pub mod par;
pub mod pattern;
pub mod probe;
pub mod redundancy;
pub mod sim;
pub mod sweep;
pub mod voting;

pub use alpha::{AlphaConfig, AlphaCountState, Classification};
pub use assumption::{Assumption, AssumptionRegistry, BindingTime, ClashRecord, Syndrome, Value};
pub use fault::{BurstProfile, FaultClass, InjectionEntry, InjectionSchedule};
pub use pattern::{ComponentKind, ComponentNode, DagSnapshot, Reconfigurator, StepOutcome};
pub use probe::{AccessMethod, FailureAssumption, KnowledgeBase, MemoryModuleDescriptor};
pub use redundancy::{ControllerState, RedundancyPolicy};
pub use voting::VoteRound;
