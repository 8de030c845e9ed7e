//! Fault classes and deterministic injection schedules.
//!
//! Schedules are immutable lists of [`InjectionEntry`] sorted by onset time.
//! Stochastic profiles are generated from a ChaCha8 stream seeded with a
//! single 64-bit seed, so a `(profile, seed)` pair always replays the same
//! schedule.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FaultError {
    #[error("invalid {name}: {value} (expected a probability in [0, 1])")]
    InvalidRate { name: &'static str, value: f64 },
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("line {line}: {msg}: `{text}`")]
    Parse { line: usize, msg: String, text: String },
    #[error("reading schedule: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FaultClass {
    Transient,
    Intermittent,
    Permanent,
}

impl fmt::Display for FaultClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FaultClass::Transient => "transient",
            FaultClass::Intermittent => "intermittent",
            FaultClass::Permanent => "permanent",
        })
    }
}

impl FromStr for FaultClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "transient" => Ok(FaultClass::Transient),
            "intermittent" => Ok(FaultClass::Intermittent),
            "permanent" => Ok(FaultClass::Permanent),
            other => Err(format!("unknown fault class `{other}`")),
        }
    }
}

pub const DEFAULT_PERIOD: u64 = 2;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct InjectionEntry {
    pub t: u64,
    pub target: String,
    pub class: FaultClass,
    /// Length of the activity window for intermittent faults.
    pub duration: u64,
    /// Recurrence period inside the window for intermittent faults.
    pub period: u64,
}

impl InjectionEntry {
    pub fn transient(t: u64, target: impl Into<String>) -> Self {
        Self::new(t, target, FaultClass::Transient)
    }

    pub fn permanent(t: u64, target: impl Into<String>) -> Self {
        Self::new(t, target, FaultClass::Permanent)
    }

    pub fn intermittent(t: u64, target: impl Into<String>, duration: u64, period: u64) -> Self {
        Self {
            t,
            target: target.into(),
            class: FaultClass::Intermittent,
            duration,
            period: period.max(1),
        }
    }

    fn new(t: u64, target: impl Into<String>, class: FaultClass) -> Self {
        Self {
            t,
            target: target.into(),
            class,
            duration: 1,
            period: DEFAULT_PERIOD,
        }
    }

    pub fn is_active_at(&self, t: u64) -> bool {
        match self.class {
            FaultClass::Permanent => t >= self.t,
            FaultClass::Transient => t == self.t,
            FaultClass::Intermittent => {
                t >= self.t && t - self.t < self.duration && (t - self.t).is_multiple_of(self.period)
            }
        }
    }

    /// First step at which the entry can no longer become active.
    fn end(&self) -> u64 {
        match self.class {
            FaultClass::Permanent => u64::MAX,
            FaultClass::Transient => self.t + 1,
            FaultClass::Intermittent => self.t.saturating_add(self.duration),
        }
    }
}

pub type ActiveFaults = BTreeSet<(String, FaultClass)>;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InjectionSchedule {
    entries: Vec<InjectionEntry>,
    pub seed: u64,
}

impl InjectionSchedule {
    pub fn new(mut entries: Vec<InjectionEntry>, seed: u64) -> Self {
        entries.sort();
        entries.dedup();
        Self { entries, seed }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[InjectionEntry] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Every fault active at step `t`.
    pub fn faults_at(&self, t: u64) -> ActiveFaults {
        let started = self.entries.partition_point(|e| e.t <= t);
        self.entries[..started]
            .iter()
            .filter(|e| e.is_active_at(t))
            .map(|e| (e.target.clone(), e.class))
            .collect()
    }

    /// Sequential cursor for stepping through the schedule in time order.
    pub fn timeline(&self) -> Timeline<'_> {
        Timeline {
            entries: &self.entries,
            next: 0,
            live: Vec::new(),
            last: None,
        }
    }

    /// Parses the `t,target,class[,duration[,period]]` line format.
    pub fn parse(text: &str, seed: u64) -> Result<Self, FaultError> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| FaultError::Parse {
                line: i + 1,
                msg,
                text: raw.to_owned(),
            };
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if !(3..=5).contains(&fields.len()) {
                return Err(err("expected 3 to 5 comma-separated fields".into()));
            }
            let t: u64 = fields[0].parse().map_err(|_| err("bad time".into()))?;
            if fields[1].is_empty() {
                return Err(err("empty target".into()));
            }
            let class: FaultClass = fields[2].parse().map_err(err)?;
            let duration = match fields.get(3) {
                Some(d) => d.parse().map_err(|_| err("bad duration".into()))?,
                None => 1,
            };
            let period: u64 = match fields.get(4) {
                Some(p) => p.parse().map_err(|_| err("bad period".into()))?,
                None => DEFAULT_PERIOD,
            };
            if period == 0 {
                return Err(err("period must be positive".into()));
            }
            let mut entry = InjectionEntry::new(t, fields[1], class);
            if class == FaultClass::Intermittent {
                entry.duration = duration;
                entry.period = period;
            }
            entries.push(entry);
        }
        Ok(Self::new(entries, seed))
    }

    pub fn load(path: &Path, seed: u64) -> Result<Self, FaultError> {
        Self::parse(&fs::read_to_string(path)?, seed)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            match e.class {
                FaultClass::Intermittent => out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    e.t, e.target, e.class, e.duration, e.period
                )),
                _ => out.push_str(&format!("{},{},{}\n", e.t, e.target, e.class)),
            }
        }
        out
    }
}

/// Forward-only view of a schedule. Querying steps in increasing order costs
/// time proportional to the entries that are live, not to the whole schedule.
pub struct Timeline<'a> {
    entries: &'a [InjectionEntry],
    next: usize,
    live: Vec<&'a InjectionEntry>,
    last: Option<u64>,
}

impl<'a> Timeline<'a> {
    /// Active faults at `t`. Panics if `t` is smaller than a previous query.
    pub fn at(&mut self, t: u64) -> ActiveFaults {
        assert!(self.last.is_none_or(|l| t >= l), "timeline queried backwards");
        self.last = Some(t);
        while self.next < self.entries.len() && self.entries[self.next].t <= t {
            self.live.push(&self.entries[self.next]);
            self.next += 1;
        }
        self.live.retain(|e| e.end() > t);
        self.live
            .iter()
            .filter(|e| e.is_active_at(t))
            .map(|e| (e.target.clone(), e.class))
            .collect()
    }
}

fn check_rate(name: &'static str, value: f64) -> Result<(), FaultError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(FaultError::InvalidRate { name, value })
    }
}

/// Bursts of transient faults hitting replica slots `r0..r{slots-1}`.
///
/// At every step a burst starts with probability `burst_rate`. A burst picks
/// between 1 and `max_width` distinct slots and corrupts them for
/// `burst_len` consecutive steps.
#[derive(Debug, Clone, PartialEq)]
pub struct BurstProfile {
    pub length: u64,
    pub burst_rate: f64,
    pub burst_len: u64,
    pub max_width: usize,
    pub slots: usize,
}

impl BurstProfile {
    pub fn new(length: u64, burst_rate: f64, burst_len: u64) -> Self {
        Self {
            length,
            burst_rate,
            burst_len,
            max_width: 2,
            slots: 3,
        }
    }

    pub fn generate(&self, seed: u64) -> Result<InjectionSchedule, FaultError> {
        check_rate("burst_rate", self.burst_rate)?;
        if self.length == 0 {
            return Err(FaultError::InvalidProfile("length must be positive".into()));
        }
        if self.burst_len == 0 || self.max_width == 0 || self.max_width > self.slots {
            return Err(FaultError::InvalidProfile(format!(
                "need burst_len > 0 and 0 < max_width <= slots, got {self:?}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut entries = Vec::new();
        for t in 0..self.length {
            if !rng.gen_bool(self.burst_rate) {
                continue;
            }
            let width = rng.gen_range(1..=self.max_width);
            let hit = index::sample(&mut rng, self.slots, width);
            let end = (t + self.burst_len).min(self.length);
            for s in t..end {
                for slot in hit.iter() {
                    entries.push(InjectionEntry::transient(s, replica_id(slot)));
                }
            }
        }
        Ok(InjectionSchedule::new(entries, seed))
    }
}

/// Shorthand for [`BurstProfile::new`] with default width and slots.
pub fn burst_profile(
    seed: u64,
    length: u64,
    burst_rate: f64,
    burst_len: u64,
) -> Result<InjectionSchedule, FaultError> {
    BurstProfile::new(length, burst_rate, burst_len).generate(seed)
}

/// Isolated transient faults on one target: each step starts a fault with
/// probability `rate`, and consecutive onsets are at least `min_gap` apart.
#[derive(Debug, Clone, PartialEq)]
pub struct TransientProfile {
    pub length: u64,
    pub rate: f64,
    pub min_gap: u64,
    pub target: String,
}

impl TransientProfile {
    pub fn generate(&self, seed: u64) -> Result<InjectionSchedule, FaultError> {
        check_rate("rate", self.rate)?;
        if self.min_gap == 0 {
            return Err(FaultError::InvalidProfile("min_gap must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut entries = Vec::new();
        let mut t = 0;
        while t < self.length {
            if rng.gen_bool(self.rate) {
                entries.push(InjectionEntry::transient(t, self.target.clone()));
                t += self.min_gap;
            } else {
                t += 1;
            }
        }
        Ok(InjectionSchedule::new(entries, seed))
    }
}

pub fn replica_id(slot: usize) -> String {
    format!("r{slot}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_schedule_has_no_faults() {
        let s = InjectionSchedule::empty();
        assert!(s.faults_at(0).is_empty());
        assert!(s.faults_at(1_000_000).is_empty());
    }

    #[test]
    fn permanent_stays_active() {
        let s = InjectionSchedule::new(vec![InjectionEntry::permanent(10, "c3")], 0);
        assert!(s.faults_at(9).is_empty());
        let want: ActiveFaults = [("c3".to_string(), FaultClass::Permanent)].into();
        assert_eq!(s.faults_at(10), want);
        assert_eq!(s.faults_at(10_000), want);
    }

    #[test]
    fn transient_lasts_one_step() {
        let s = InjectionSchedule::new(vec![InjectionEntry::transient(10, "c3")], 0);
        assert_eq!(s.faults_at(10).len(), 1);
        assert!(s.faults_at(11).is_empty());
    }

    #[test]
    fn intermittent_recurs_periodically() {
        let s = InjectionSchedule::new(vec![InjectionEntry::intermittent(4, "c3", 7, 3)], 0);
        let active: Vec<u64> = (0..20).filter(|&t| !s.faults_at(t).is_empty()).collect();
        assert_eq!(active, [4, 7, 10]);
    }

    #[test]
    fn zero_rate_is_empty() {
        assert!(burst_profile(7, 1000, 0.0, 5).unwrap().is_empty());
    }

    #[test]
    fn full_rate_bursts_every_step() {
        let s = burst_profile(1, 3, 1.0, 1).unwrap();
        let steps: BTreeSet<u64> = s.entries().iter().map(|e| e.t).collect();
        assert_eq!(steps, [0, 1, 2].into());
        assert!(s.entries().iter().all(|e| e.class == FaultClass::Transient));
    }

    #[test]
    fn invalid_rate_rejected() {
        assert!(matches!(
            burst_profile(0, 10, 1.5, 1),
            Err(FaultError::InvalidRate { .. })
        ));
        assert!(burst_profile(0, 10, f64::NAN, 1).is_err());
        assert!(burst_profile(0, 0, 0.5, 1).is_err());
    }

    #[test]
    fn generation_is_deterministic() {
        let a = burst_profile(42, 50_000, 1e-3, 5).unwrap();
        let b = burst_profile(42, 50_000, 1e-3, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_text(), b.to_text());
        assert_ne!(a, burst_profile(43, 50_000, 1e-3, 5).unwrap());
    }

    #[test]
    fn parse_file_format() {
        let text = "# header\n10,c3,permanent\n2, r0, transient # note\n5,c3,intermittent,6,3\n\n";
        let s = InjectionSchedule::parse(text, 0).unwrap();
        assert_eq!(s.entries().len(), 3);
        assert_eq!(s.entries()[0].t, 2);
        assert_eq!(s.entries()[1], InjectionEntry::intermittent(5, "c3", 6, 3));
        let back = InjectionSchedule::parse(&s.to_text(), 0).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn parse_errors_name_the_line() {
        let err = InjectionSchedule::parse("1,c3,transient\n2,c3,flaky\n", 0).unwrap_err();
        assert!(err.to_string().starts_with("line 2"), "{err}");
        assert!(InjectionSchedule::parse("x,c3,transient", 0).is_err());
        assert!(InjectionSchedule::parse("1,c3,intermittent,4,0", 0).is_err());
    }

    #[test]
    fn transient_profile_respects_gap() {
        let p = TransientProfile {
            length: 10_000,
            rate: 0.5,
            min_gap: 4,
            target: "c3".into(),
        };
        let s = p.generate(3).unwrap();
        assert!(s.entries().len() > 100);
        for w in s.entries().windows(2) {
            assert!(w[1].t - w[0].t >= 4);
        }
    }

    fn arb_entry() -> impl Strategy<Value = InjectionEntry> {
        (0u64..60, 0usize..3, 0u8..3, 1u64..10, 1u64..4).prop_map(|(t, tg, c, d, p)| match c {
            0 => InjectionEntry::transient(t, replica_id(tg)),
            1 => InjectionEntry::permanent(t, replica_id(tg)),
            _ => InjectionEntry::intermittent(t, replica_id(tg), d, p),
        })
    }

    proptest! {
        #[test]
        fn timeline_matches_random_access(entries in prop::collection::vec(arb_entry(), 0..20)) {
            let s = InjectionSchedule::new(entries, 0);
            let mut tl = s.timeline();
            for t in 0..100 {
                prop_assert_eq!(tl.at(t), s.faults_at(t));
            }
        }

        #[test]
        fn class_semantics_hold(entries in prop::collection::vec(arb_entry(), 0..20)) {
            let s = InjectionSchedule::new(entries, 0);
            for e in s.entries() {
                for t in 0..100 {
                    let on = s.faults_at(t).contains(&(e.target.clone(), e.class));
                    if e.is_active_at(t) {
                        prop_assert!(on);
                    }
                    if e.class == FaultClass::Permanent && t >= e.t {
                        prop_assert!(on);
                    }
                }
            }
        }

        #[test]
        fn bursts_are_replayable(seed in any::<u64>(), rate in 0.0f64..0.2) {
            let p = BurstProfile::new(500, rate, 3);
            prop_assert_eq!(p.generate(seed).unwrap(), p.generate(seed).unwrap());
        }
    }
}
