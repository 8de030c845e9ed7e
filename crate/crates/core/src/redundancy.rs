//! Autonomic redundancy controller.
//!
//! After every voting round the controller looks at the round's dtof. A
//! critically low value raises the replica count by `step`; `calm_window`
//! consecutive calm rounds lower it by `step`. At most one change happens per
//! round and the count always stays odd and inside `[n_min, n_max]`.

use std::collections::BTreeMap;
use std::fmt;
use std::io;

use thiserror::Error;

use crate::fault::{replica_id, InjectionSchedule};
use crate::voting::{self, max_dtof, VoteRound};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RedundancyError {
    #[error("invalid policy: {0}")]
    Policy(String),
    #[error("round has {round} replicas but the controller runs {state}")]
    Mismatch { round: usize, state: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RedundancyPolicy {
    pub n_min: usize,
    pub n_max: usize,
    /// A round with `dtof <= raise_threshold` requests more replicas.
    pub raise_threshold: usize,
    /// Consecutive calm rounds required before lowering.
    pub calm_window: u64,
    pub step: usize,
    /// A round is calm when `dtof >= ceil(n/2) - calm_margin`. Zero means
    /// only full consensus is calm.
    pub calm_margin: usize,
}

impl Default for RedundancyPolicy {
    fn default() -> Self {
        Self {
            n_min: 3,
            n_max: 9,
            raise_threshold: 1,
            calm_window: 1000,
            step: 2,
            calm_margin: 0,
        }
    }
}

impl RedundancyPolicy {
    pub fn validate(&self) -> Result<(), RedundancyError> {
        let bad = |msg: String| Err(RedundancyError::Policy(msg));
        if self.n_min.is_multiple_of(2) || self.n_max.is_multiple_of(2) {
            return bad(format!("n_min ({}) and n_max ({}) must be odd", self.n_min, self.n_max));
        }
        if self.n_min > self.n_max {
            return bad(format!("n_min ({}) exceeds n_max ({})", self.n_min, self.n_max));
        }
        if self.step == 0 || !self.step.is_multiple_of(2) {
            return bad(format!("step ({}) must be even and positive", self.step));
        }
        if !(self.n_max - self.n_min).is_multiple_of(self.step) {
            return bad(format!(
                "step ({}) does not divide n_max - n_min ({})",
                self.step,
                self.n_max - self.n_min
            ));
        }
        if self.calm_window == 0 {
            return bad("calm_window must be positive".into());
        }
        Ok(())
    }

    /// Every replica count the controller can adopt.
    pub fn levels(&self) -> impl Iterator<Item = usize> {
        (self.n_min..=self.n_max).step_by(self.step)
    }

    pub fn is_calm(&self, n: usize, dtof: usize) -> bool {
        dtof >= max_dtof(n).saturating_sub(self.calm_margin)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Reaction {
    #[default]
    Steady,
    Raised,
    Lowered,
    /// A raise was warranted but `n` is already `n_max`.
    Saturated,
}

impl Reaction {
    pub fn label(self) -> &'static str {
        match self {
            Reaction::Steady => "",
            Reaction::Raised => "raise",
            Reaction::Lowered => "lower",
            Reaction::Saturated => "saturated",
        }
    }
}

impl fmt::Display for Reaction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ControllerState {
    pub n: usize,
    pub calm_streak: u64,
    /// `(t, n)` after every transition.
    pub history: Vec<(u64, usize)>,
}

impl ControllerState {
    pub fn new(policy: &RedundancyPolicy) -> Self {
        Self::starting_at(policy.n_min)
    }

    pub fn starting_at(n: usize) -> Self {
        Self {
            n,
            calm_streak: 0,
            history: Vec::new(),
        }
    }

    pub fn react<T>(
        &mut self,
        policy: &RedundancyPolicy,
        round: &VoteRound<T>,
        t: u64,
    ) -> Result<Reaction, RedundancyError> {
        if round.n() != self.n {
            return Err(RedundancyError::Mismatch {
                round: round.n(),
                state: self.n,
            });
        }
        Ok(self.react_dtof(policy, round.dtof, t))
    }

    fn react_dtof(&mut self, policy: &RedundancyPolicy, dtof: usize, t: u64) -> Reaction {
        if dtof <= policy.raise_threshold && self.n < policy.n_max {
            self.n += policy.step;
            self.calm_streak = 0;
            self.history.push((t, self.n));
            return Reaction::Raised;
        }
        if policy.is_calm(self.n, dtof) {
            self.calm_streak += 1;
            if self.calm_streak >= policy.calm_window && self.n > policy.n_min {
                self.n -= policy.step;
                self.calm_streak = 0;
                self.history.push((t, self.n));
                return Reaction::Lowered;
            }
            return Reaction::Steady;
        }
        self.calm_streak = 0;
        if dtof <= policy.raise_threshold {
            Reaction::Saturated
        } else {
            Reaction::Steady
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceRow {
    pub t: u64,
    pub n: u32,
    pub m: u32,
    pub dtof: u32,
    pub majority: bool,
    pub event: Reaction,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExperimentSummary {
    /// Rounds spent at each replica count. Holds every level of the policy.
    pub histogram: BTreeMap<usize, u64>,
    pub no_majority_rounds: u64,
    pub transitions: Vec<(u64, usize)>,
    pub length: u64,
}

impl ExperimentSummary {
    pub fn fraction_at(&self, r: usize) -> f64 {
        self.histogram.get(&r).copied().unwrap_or(0) as f64 / self.length as f64
    }

    pub fn write_histogram_csv<W: io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["r", "steps"])?;
        for (r, steps) in &self.histogram {
            w.write_record([r.to_string(), steps.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Experiment {
    pub trace: Vec<TraceRow>,
    pub summary: ExperimentSummary,
}

impl Experiment {
    pub fn write_trace_csv<W: io::Write>(&self, out: W) -> csv::Result<()> {
        write_trace_csv(&self.trace, out)
    }
}

pub fn write_trace_csv<W: io::Write>(trace: &[TraceRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "n", "m", "dtof", "event"])?;
    for row in trace {
        w.write_record([
            row.t.to_string(),
            row.n.to_string(),
            row.m.to_string(),
            row.dtof.to_string(),
            row.event.label().to_owned(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Output of replica `slot` at one round: 0 when healthy, a value unique to
/// the replica when corrupted, so faulty replicas never agree with each other.
fn replica_output(slot: usize, faulty: bool) -> u32 {
    if faulty {
        slot as u32 + 1
    } else {
        0
    }
}

/// Runs `length` voting rounds starting at `n_min`, calling `observe` with
/// each round's trace row.
///
/// Replica `r{i}` votes wrongly in every round where the schedule has a fault
/// active on it. Replicas are never repaired, so a permanent fault corrupts
/// the replica for the rest of the run.
pub fn run_experiment_with<F: FnMut(&TraceRow)>(
    schedule: &InjectionSchedule,
    policy: &RedundancyPolicy,
    length: u64,
    mut observe: F,
) -> Result<ExperimentSummary, RedundancyError> {
    policy.validate()?;
    let mut histogram: BTreeMap<usize, u64> = policy.levels().map(|r| (r, 0)).collect();
    let mut state = ControllerState::new(policy);
    let mut timeline = schedule.timeline();
    let ids: Vec<String> = (0..policy.n_max).map(replica_id).collect();
    let mut no_majority_rounds = 0;
    let mut votes = Vec::with_capacity(policy.n_max);
    for t in 0..length {
        let active = timeline.at(t);
        votes.clear();
        votes.extend((0..state.n).map(|slot| {
            let faulty = !active.is_empty() && active.iter().any(|(target, _)| *target == ids[slot]);
            replica_output(slot, faulty)
        }));
        let round = voting::vote(std::mem::take(&mut votes)).expect("replica count is odd");
        *histogram.entry(state.n).or_default() += 1;
        if !round.has_majority() {
            no_majority_rounds += 1;
        }
        let n = state.n;
        let event = state.react(policy, &round, t)?;
        observe(&TraceRow {
            t,
            n: n as u32,
            m: round.m as u32,
            dtof: round.dtof as u32,
            majority: round.has_majority(),
            event,
        });
        votes = round.votes;
    }
    Ok(ExperimentSummary {
        histogram,
        no_majority_rounds,
        transitions: state.history,
        length,
    })
}

pub fn run_experiment(
    schedule: &InjectionSchedule,
    policy: &RedundancyPolicy,
    length: u64,
) -> Result<Experiment, RedundancyError> {
    let mut trace = Vec::with_capacity(length.min(1 << 24) as usize);
    let summary = run_experiment_with(schedule, policy, length, |row| trace.push(*row))?;
    Ok(Experiment { trace, summary })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fault::InjectionEntry;
    use crate::voting::vote;
    use proptest::prelude::*;

    fn round(n: usize, dissent: usize) -> VoteRound<u32> {
        let votes = (0..n).map(|i| if i < dissent { i as u32 + 1 } else { 0 }).collect();
        vote(votes).unwrap()
    }

    #[test]
    fn no_majority_raises() {
        let p = RedundancyPolicy::default();
        let mut s = ControllerState::starting_at(3);
        let r = round(3, 2);
        assert_eq!(r.dtof, 0);
        assert_eq!(s.react(&p, &r, 7).unwrap(), Reaction::Raised);
        assert_eq!(s.n, 5);
        assert_eq!(s.history, [(7, 5)]);
    }

    #[test]
    fn calm_window_lowers_on_last_round() {
        let p = RedundancyPolicy::default();
        let mut s = ControllerState::starting_at(5);
        for t in 0..999 {
            assert_eq!(s.react(&p, &round(5, 0), t).unwrap(), Reaction::Steady);
        }
        assert_eq!(s.n, 5);
        assert_eq!(s.react(&p, &round(5, 0), 999).unwrap(), Reaction::Lowered);
        assert_eq!(s.n, 3);
        assert_eq!(s.calm_streak, 0);
    }

    #[test]
    fn raise_clamped_at_max() {
        let p = RedundancyPolicy::default();
        let mut s = ControllerState::starting_at(9);
        let r = vote(vec![0u32, 1, 2, 3, 4, 5, 6, 7, 8]).unwrap();
        assert_eq!(s.react(&p, &r, 0).unwrap(), Reaction::Saturated);
        assert_eq!(s.n, 9);
        assert!(s.history.is_empty());
    }

    #[test]
    fn dissent_resets_streak() {
        let p = RedundancyPolicy::default();
        let mut s = ControllerState::starting_at(7);
        for t in 0..500 {
            s.react(&p, &round(7, 0), t).unwrap();
        }
        s.react(&p, &round(7, 1), 500).unwrap();
        assert_eq!(s.calm_streak, 0);
        assert_eq!(s.n, 7);
    }

    #[test]
    fn mismatch_rejected() {
        let p = RedundancyPolicy::default();
        let mut s = ControllerState::starting_at(3);
        assert_eq!(
            s.react(&p, &round(5, 0), 0),
            Err(RedundancyError::Mismatch { round: 5, state: 3 })
        );
    }

    #[test]
    fn policy_validation() {
        let ok = RedundancyPolicy::default();
        assert!(ok.validate().is_ok());
        for bad in [
            RedundancyPolicy { n_min: 4, ..ok.clone() },
            RedundancyPolicy { n_min: 11, ..ok.clone() },
            RedundancyPolicy { step: 3, ..ok.clone() },
            RedundancyPolicy { step: 4, ..ok.clone() },
            RedundancyPolicy { calm_window: 0, ..ok.clone() },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }

    #[test]
    fn quiet_run_stays_minimal() {
        let p = RedundancyPolicy::default();
        let e = run_experiment(&InjectionSchedule::empty(), &p, 5_000).unwrap();
        assert_eq!(e.summary.histogram[&3], 5_000);
        assert_eq!(e.summary.histogram.values().sum::<u64>(), 5_000);
        assert_eq!(e.summary.no_majority_rounds, 0);
        assert!(e.summary.transitions.is_empty());
    }

    #[test]
    fn single_burst_rises_and_returns() {
        // r0 and r1 corrupted for rounds 100..103.
        let entries = (100..103)
            .flat_map(|t| [InjectionEntry::transient(t, "r0"), InjectionEntry::transient(t, "r1")])
            .collect();
        let s = InjectionSchedule::new(entries, 0);
        let p = RedundancyPolicy::default();
        let e = run_experiment(&s, &p, 5_000).unwrap();
        // Hand trace: t=100 at n=3 has no majority -> 5; t=101 at n=5 has
        // m=2, dtof=1 -> 7; t=102 at n=7 has dtof=2, streak reset; t=103..1102
        // calm at 7 -> 5 at t=1102; t=1103..2102 calm at 5 -> 3 at t=2102.
        assert_eq!(e.summary.transitions, [(100, 5), (101, 7), (1102, 5), (2102, 3)]);
        assert_eq!(e.summary.no_majority_rounds, 1);
        assert_eq!(e.summary.histogram[&3], 101 + (5_000 - 2103));
        assert_eq!(e.summary.histogram[&5], 1 + 1000);
        assert_eq!(e.summary.histogram[&7], 1001);
        assert_eq!(e.summary.histogram[&9], 0);
    }

    #[test]
    fn permanent_fault_holds_redundancy() {
        let s = InjectionSchedule::new(vec![InjectionEntry::permanent(10, "r0")], 0);
        let e = run_experiment(&s, &RedundancyPolicy::default(), 3_000).unwrap();
        assert_eq!(e.summary.transitions, [(10, 5)]);
        assert_eq!(e.summary.histogram[&5], 3_000 - 11);
    }

    #[test]
    fn trace_csv_header_and_rows() {
        let e = run_experiment(&InjectionSchedule::empty(), &RedundancyPolicy::default(), 2).unwrap();
        let mut buf = Vec::new();
        e.write_trace_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,n,m,dtof,event\n0,3,0,2,\n1,3,0,2,\n");
        let mut buf = Vec::new();
        e.summary.write_histogram_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "r,steps\n3,2\n5,0\n7,0\n9,0\n");
    }

    proptest! {
        #[test]
        fn n_stays_odd_and_bounded(dtofs in prop::collection::vec(0usize..=5, 0..3000), window in 1u64..50) {
            let p = RedundancyPolicy { calm_window: window, ..Default::default() };
            let mut s = ControllerState::new(&p);
            for (t, d) in dtofs.into_iter().enumerate() {
                let before = s.n;
                let d = d.min(max_dtof(s.n));
                let ev = s.react_dtof(&p, d, t as u64);
                prop_assert!(s.n % 2 == 1 && (p.n_min..=p.n_max).contains(&s.n));
                match ev {
                    Reaction::Raised => prop_assert_eq!(s.n, before + 2),
                    Reaction::Lowered => prop_assert_eq!(s.n + 2, before),
                    _ => prop_assert_eq!(s.n, before),
                }
            }
        }
    }
}
