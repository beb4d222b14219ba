//! Deterministic multi-client simulation against the real relay.
//!
//! Every run is driven by a virtual clock, so a scenario and transport
//! always yield the same [`VerificationReport`].

pub mod gen;
mod harness;
pub mod oracle;
mod report;
mod scenario;
mod transport;

pub use gen::{fuzz_scenario, token_scenario};
pub use harness::{run, SimError, CONVERGENCE_WINDOW_TICKS, HEARTBEAT_EVERY_TICKS};
pub use oracle::{GrantRecord, LockMonitor};
pub use report::{CheckTally, EvictionRecord, VerificationReport, Violation, MAX_RECORDED_VIOLATIONS};
pub use scenario::{Action, ClientScript, Scenario, TimedAction};
pub use transport::{Direction, TransportKind};

#[cfg(test)]
mod tests;
