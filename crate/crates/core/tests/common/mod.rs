//! Oracles and trace validators shared by the integration tests. Nothing in
//! here calls into the code paths it is used to check.

#![allow(dead_code)]

use aft::probe::{AccessMethod, FailureAssumption};
use aft::redundancy::{Reaction, TraceRow};

/// Vote vector number `index` over the alphabet `0..base`, least significant
/// digit first.
pub fn decode(mut index: u64, n: usize, base: u64) -> Vec<u8> {
    (0..n)
        .map(|_| {
            let d = (index % base) as u8;
            index /= base;
            d
        })
        .collect()
}

/// Tally-based majority: (verdict, dissent, dtof).
pub fn vote_oracle(votes: &[u8]) -> (Option<u8>, usize, usize) {
    let n = votes.len();
    let mut tally = [0usize; 256];
    for &v in votes {
        tally[v as usize] += 1;
    }
    let half_up = n.div_ceil(2);
    for (symbol, &count) in tally.iter().enumerate() {
        if count * 2 > n {
            let m = n - count;
            return (Some(symbol as u8), m, half_up - m);
        }
    }
    (None, 0, 0)
}

/// Method with no cheaper (or equally cheap, smaller-id) tolerating rival.
pub fn select_oracle(methods: &[AccessMethod], behavior: FailureAssumption) -> Option<String> {
    let tolerating: Vec<&AccessMethod> = methods.iter().filter(|m| m.tolerates.contains(&behavior)).collect();
    let winners: Vec<&&AccessMethod> = tolerating
        .iter()
        .filter(|m| {
            !tolerating
                .iter()
                .any(|o| o.cost < m.cost || (o.cost == m.cost && o.id < m.id))
        })
        .collect();
    assert!(winners.len() <= 1, "ids must be unique");
    winners.first().map(|m| m.id.clone())
}

pub struct HysteresisRules {
    pub n_min: u32,
    pub n_max: u32,
    pub step: u32,
    pub raise_threshold: u32,
    pub calm_window: u64,
}

impl Default for HysteresisRules {
    fn default() -> Self {
        Self {
            n_min: 3,
            n_max: 9,
            step: 2,
            raise_threshold: 1,
            calm_window: 1000,
        }
    }
}

/// Scans a redundancy trace and returns every rule violation found.
///
/// * each decrease closes a streak of exactly `calm_window` consensus rounds
///   counted since the previous transition or dissenting round;
/// * each increase happens on a round with `dtof <= raise_threshold`;
/// * the next round runs at `n -+ step` after a transition and at `n`
///   otherwise, and `n` stays on the allowed odd levels.
pub fn hysteresis_violations(trace: &[TraceRow], rules: &HysteresisRules) -> Vec<String> {
    let mut out = Vec::new();
    let mut streak = 0u64;
    for (i, row) in trace.iter().enumerate() {
        if row.n < rules.n_min || row.n > rules.n_max || !(row.n - rules.n_min).is_multiple_of(rules.step) {
            out.push(format!("t={} n={} outside allowed levels", row.t, row.n));
        }
        let consensus = row.majority && row.m == 0;
        streak = if consensus { streak + 1 } else { 0 };
        let expected_next = match row.event {
            Reaction::Lowered => {
                if streak != rules.calm_window {
                    out.push(format!("t={} lowered after {} consensus rounds", row.t, streak));
                }
                streak = 0;
                row.n - rules.step
            }
            Reaction::Raised => {
                if row.dtof > rules.raise_threshold {
                    out.push(format!("t={} raised at dtof={}", row.t, row.dtof));
                }
                streak = 0;
                row.n + rules.step
            }
            _ => {
                if streak > rules.calm_window && row.n > rules.n_min {
                    out.push(format!("t={} stayed at n={} after {} calm rounds", row.t, row.n, streak));
                }
                row.n
            }
        };
        if let Some(next) = trace.get(i + 1) {
            if next.n != expected_next {
                out.push(format!("t={} n jumps {} -> {}", next.t, row.n, next.n));
            }
        }
    }
    out
}

/// Rounds without a majority that occur after the controller already raised
/// redundancy within the same disturbance episode (a maximal run of
/// non-consensus rounds).
pub fn failures_after_adaptation(trace: &[TraceRow]) -> Vec<u64> {
    let mut out = Vec::new();
    let mut adapted = false;
    for row in trace {
        let consensus = row.majority && row.m == 0;
        if consensus {
            adapted = false;
            continue;
        }
        if !row.majority && adapted {
            out.push(row.t);
        }
        if row.event == Reaction::Raised {
            adapted = true;
        }
    }
    out
}

pub fn catalog() -> Vec<AccessMethod> {
    use FailureAssumption::*;
    vec![
        AccessMethod::new("M0", 0.0, [F0]),
        AccessMethod::new("M1", 2.0, [F0, F1]),
        AccessMethod::new("M3", 5.0, [F0, F1, F3]),
        AccessMethod::new("M4", 8.0, [F0, F1, F3, F4]),
    ]
}

pub fn data_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data")
}

/// Prints one line per checked criterion and turns the verdict into a
/// test result.
pub fn report(id: &str, name: &str, checks: &[(&str, bool, String)]) {
    let ok = checks.iter().all(|(_, pass, _)| *pass);
    println!("criterion {id} [{}] {name}", if ok { "PASS" } else { "FAIL" });
    for (label, pass, detail) in checks {
        println!("    {} {label}: {detail}", if *pass { "ok  " } else { "FAIL" });
    }
    assert!(ok, "criterion {id} failed: {checks:?}");
}
