use std::collections::BTreeMap;

use serde::Serialize;

use super::oracle::GrantRecord;
use super::transport::TransportKind;
use crate::scene::{AvatarId, BoardId};

/// At most this many violations are kept verbatim; the rest are counted.
pub const MAX_RECORDED_VIOLATIONS: usize = 200;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub tick: u64,
    pub check: String,
    /// Sequence number the counterexample was observed at, when known.
    pub seq: Option<u64>,
    pub client: Option<AvatarId>,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CheckTally {
    pub runs: u64,
    pub failures: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EvictionRecord {
    pub avatar: AvatarId,
    pub silent_at_ms: u64,
    pub evicted_at_ms: u64,
    /// Boards whose token the evicted avatar held.
    pub held: Vec<BoardId>,
    /// When the first of those tokens went to the next waiter, if anyone
    /// was waiting.
    pub regranted_at_ms: Option<u64>,
}

/// Outcome of one simulated session. Contains only virtual times, so equal
/// inputs give byte-identical reports.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerificationReport {
    pub seed: u64,
    pub transport: TransportKind,
    pub clients: usize,
    pub actions: usize,
    pub tick_ms: u64,
    pub ticks_run: u64,
    pub events_sequenced: u64,
    pub frames_up: u64,
    pub frames_down: u64,
    pub refusals: BTreeMap<AvatarId, u64>,
    /// Refused inputs by message kind (sketch ops by op name).
    pub refused_kinds: BTreeMap<String, u64>,
    /// Sequenced events by message kind (sketch ops by op name).
    pub sequenced_kinds: BTreeMap<String, u64>,
    /// First tick after the scripts at which the relay had nothing left to
    /// sequence.
    pub quiescent_tick: Option<u64>,
    /// First tick at or after quiescence at which every connected replica
    /// matched the relay.
    pub converged_tick: Option<u64>,
    pub convergence_lag_ticks: Option<u64>,
    /// Largest number of sequenced events any connected replica trailed the
    /// relay by at a check.
    pub max_replica_lag_events: u64,
    pub relay_hash: String,
    pub client_hashes: BTreeMap<AvatarId, String>,
    pub grants: Vec<GrantRecord>,
    pub evictions: Vec<EvictionRecord>,
    pub checks: BTreeMap<String, CheckTally>,
    pub violation_count: u64,
    pub violations: Vec<Violation>,
    pub passed: bool,
}

impl VerificationReport {
    pub fn to_json(&self) -> String {
        let value = serde_json::to_value(self).expect("report is serializable");
        serde_json::to_string_pretty(&value).expect("report is serializable")
    }

    pub(crate) fn tally(&mut self, check: &str, failed: bool) {
        let t = self.checks.entry(check.to_owned()).or_default();
        t.runs += 1;
        t.failures += u64::from(failed);
    }

    pub(crate) fn violate(&mut self, tick: u64, check: &str, detail: String) {
        self.violate_for(tick, check, None, None, detail);
    }

    pub(crate) fn violate_for(
        &mut self,
        tick: u64,
        check: &str,
        seq: Option<u64>,
        client: Option<&AvatarId>,
        detail: String,
    ) {
        self.violation_count += 1;
        if self.violations.len() < MAX_RECORDED_VIOLATIONS {
            let client = client.cloned();
            self.violations.push(Violation { tick, check: check.to_owned(), seq, client, detail });
        }
    }
}
