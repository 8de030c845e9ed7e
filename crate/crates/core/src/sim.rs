//! Scenario files, experiment runners and replay checking.
//!
//! A scenario is a flat `key = value` file with optional `[section]`
//! headers:
//!
//! ```text
//! [scenario]
//! kind = redundancy_experiment
//! seed = 42
//! length = 1000000
//!
//! [redundancy]
//! burst_rate = 0.0001
//! burst_len = 5
//! ```
//!
//! Keys may also appear before any header; they are then matched by name.
//! Every output is a pure function of the scenario, so re-running it must
//! reproduce the files byte for byte.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::alpha::{AlphaConfig, AlphaError};
use crate::assumption::{Assumption, AssumptionRegistry, BindingTime, Syndrome};
use crate::fault::{BurstProfile, FaultError, InjectionEntry, InjectionSchedule, TransientProfile};
use crate::pattern::{self, DagError, DagSnapshot, ExecutionOptions, Reconfigurator, DEFAULT_MAX_RETRIES};
use crate::probe::{self, FailureAssumption, KnowledgeBase, ProbeError};
use crate::redundancy::{self, Reaction, RedundancyError, RedundancyPolicy};

pub const TRACE: &str = "trace.csv";
pub const HISTOGRAM: &str = "histogram.csv";
pub const EVENTS: &str = "events.log";
pub const CLASHES: &str = "clashes.csv";
pub const REPORT: &str = "report.csv";
pub const DAG: &str = "dag.txt";

/// Exit status of a probe whose behavior no method tolerates.
pub const EXIT_NO_METHOD: i32 = 2;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("config line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("config key `{key}`: {msg}")]
    Config { key: String, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("missing output {0}")]
    MissingOutput(PathBuf),
    #[error(transparent)]
    Fault(#[from] FaultError),
    #[error(transparent)]
    Probe(#[from] ProbeError),
    #[error(transparent)]
    Redundancy(#[from] RedundancyError),
    #[error(transparent)]
    Alpha(#[from] AlphaError),
    #[error(transparent)]
    Dag(#[from] DagError),
    #[error("writing csv: {0}")]
    Csv(#[from] csv::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SimError + '_ {
    move |source| SimError::Io {
        path: path.to_owned(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    RedundancyExperiment,
    PatternExperiment,
    ProbeRun,
}

impl FromStr for ScenarioKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "redundancy_experiment" => Ok(Self::RedundancyExperiment),
            "pattern_experiment" => Ok(Self::PatternExperiment),
            "probe_run" => Ok(Self::ProbeRun),
            other => Err(format!(
                "unknown kind `{other}` (expected redundancy_experiment, pattern_experiment or probe_run)"
            )),
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::RedundancyExperiment => "redundancy_experiment",
            Self::PatternExperiment => "pattern_experiment",
            Self::ProbeRun => "probe_run",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RedundancyParams {
    pub policy: RedundancyPolicy,
    pub profile: BurstProfile,
    /// Explicit schedule; replaces the generated burst profile when set.
    pub schedule: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatternParams {
    pub alpha: AlphaConfig,
    pub max_retries: u32,
    pub options: ExecutionOptions,
    pub dag: Option<PathBuf>,
    pub schedule: Option<PathBuf>,
    pub target: String,
    /// Permanent fault on `target` from this step on.
    pub permanent_at: Option<u64>,
    /// Isolated transient faults on `target`.
    pub transient_rate: f64,
    pub min_gap: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeParams {
    pub inventory: PathBuf,
    pub kb: PathBuf,
    pub methods: PathBuf,
    pub default: FailureAssumption,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Params {
    Redundancy(RedundancyParams),
    Pattern(PatternParams),
    Probe(ProbeParams),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub seed: u64,
    pub length: u64,
    pub params: Params,
}

const SCENARIO_KEYS: &[&str] = &["kind", "seed", "length"];
const REDUNDANCY_KEYS: &[&str] = &[
    "burst_rate",
    "burst_len",
    "burst_width",
    "burst_slots",
    "n_min",
    "n_max",
    "raise_threshold",
    "calm_window",
    "calm_margin",
    "step",
    "schedule",
];
const PATTERN_KEYS: &[&str] = &[
    "decay",
    "threshold",
    "strict",
    "max_retries",
    "secondary_shares_faults",
    "dag",
    "schedule",
    "target",
    "permanent_at",
    "transient_rate",
    "min_gap",
];
const PROBE_KEYS: &[&str] = &["inventory", "kb", "methods", "default"];

fn section_keys(section: &str) -> Option<&'static [&'static str]> {
    match section {
        "scenario" => Some(SCENARIO_KEYS),
        "redundancy" => Some(REDUNDANCY_KEYS),
        "pattern" => Some(PATTERN_KEYS),
        "probe" => Some(PROBE_KEYS),
        _ => None,
    }
}

struct Config {
    values: HashMap<(String, String), String>,
    base: PathBuf,
}

impl Config {
    fn parse(text: &str, base: &Path) -> Result<Self, SimError> {
        let mut values = HashMap::new();
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let syntax = |msg: String| SimError::Syntax { line: i + 1, msg };
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let name = name.trim();
                if section_keys(name).is_none() {
                    return Err(syntax(format!("unknown section `[{name}]`")));
                }
                section = name.to_owned();
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| syntax(format!("expected `key = value`, got `{line}`")))?;
            let key = key.trim().to_owned();
            let known = if section.is_empty() {
                ["scenario", "redundancy", "pattern", "probe"]
                    .iter()
                    .any(|s| section_keys(s).unwrap().contains(&key.as_str()))
            } else {
                section_keys(&section).unwrap().contains(&key.as_str())
            };
            if !known {
                return Err(SimError::Config {
                    key,
                    msg: format!("unknown key in {}", if section.is_empty() { "scenario file" } else { &section }),
                });
            }
            values.insert((section.clone(), key), value.trim().to_owned());
        }
        Ok(Self {
            values,
            base: base.to_owned(),
        })
    }

    fn raw(&self, section: &str, key: &str) -> Option<&str> {
        self.values
            .get(&(section.to_owned(), key.to_owned()))
            .or_else(|| self.values.get(&(String::new(), key.to_owned())))
            .map(String::as_str)
    }

    fn get<T: FromStr>(&self, section: &str, key: &str, default: T) -> Result<T, SimError> {
        match self.raw(section, key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| SimError::Config {
                key: key.to_owned(),
                msg: format!("invalid value `{v}`"),
            }),
        }
    }

    fn require<T: FromStr>(&self, section: &str, key: &str) -> Result<T, SimError> {
        let v = self.raw(section, key).ok_or_else(|| SimError::Config {
            key: key.to_owned(),
            msg: "required".into(),
        })?;
        v.parse().map_err(|_| SimError::Config {
            key: key.to_owned(),
            msg: format!("invalid value `{v}`"),
        })
    }

    fn path(&self, section: &str, key: &str) -> Option<PathBuf> {
        self.raw(section, key).map(|p| self.base.join(p))
    }

    fn require_path(&self, section: &str, key: &str) -> Result<PathBuf, SimError> {
        self.path(section, key).ok_or_else(|| SimError::Config {
            key: key.to_owned(),
            msg: "required".into(),
        })
    }
}

fn config_err(key: &str, e: impl fmt::Display) -> SimError {
    SimError::Config {
        key: key.to_owned(),
        msg: e.to_string(),
    }
}

impl Scenario {
    /// Parses scenario text; relative paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, SimError> {
        let c = Config::parse(text, base)?;
        let kind_raw: String = c.require("scenario", "kind")?;
        let kind: ScenarioKind = kind_raw.parse().map_err(|e| config_err("kind", e))?;
        let seed = c.get("scenario", "seed", 0u64)?;
        let length = c.get("scenario", "length", 0u64)?;
        if kind != ScenarioKind::ProbeRun && length == 0 {
            return Err(config_err("length", "must be positive"));
        }
        let params = match kind {
            ScenarioKind::RedundancyExperiment => {
                let s = "redundancy";
                let defaults = RedundancyPolicy::default();
                let policy = RedundancyPolicy {
                    n_min: c.get(s, "n_min", defaults.n_min)?,
                    n_max: c.get(s, "n_max", defaults.n_max)?,
                    raise_threshold: c.get(s, "raise_threshold", defaults.raise_threshold)?,
                    calm_window: c.get(s, "calm_window", defaults.calm_window)?,
                    step: c.get(s, "step", defaults.step)?,
                    calm_margin: c.get(s, "calm_margin", defaults.calm_margin)?,
                };
                policy.validate().map_err(|e| config_err("policy", e))?;
                let mut profile = BurstProfile::new(length, c.get(s, "burst_rate", 0.0)?, c.get(s, "burst_len", 1)?);
                profile.max_width = c.get(s, "burst_width", profile.max_width)?;
                profile.slots = c.get(s, "burst_slots", profile.slots)?;
                if !(0.0..=1.0).contains(&profile.burst_rate) {
                    return Err(config_err("burst_rate", "must lie in [0, 1]"));
                }
                Params::Redundancy(RedundancyParams {
                    policy,
                    profile,
                    schedule: c.path(s, "schedule"),
                })
            }
            ScenarioKind::PatternExperiment => {
                let s = "pattern";
                let alpha = AlphaConfig {
                    decay: c.get(s, "decay", AlphaConfig::default().decay)?,
                    threshold: c.get(s, "threshold", AlphaConfig::default().threshold)?,
                    strict: c.get(s, "strict", true)?,
                };
                alpha.validate().map_err(|e| config_err("decay/threshold", e))?;
                let transient_rate = c.get(s, "transient_rate", 0.0)?;
                if !(0.0..=1.0).contains(&transient_rate) {
                    return Err(config_err("transient_rate", "must lie in [0, 1]"));
                }
                Params::Pattern(PatternParams {
                    alpha,
                    max_retries: c.get(s, "max_retries", DEFAULT_MAX_RETRIES)?,
                    options: ExecutionOptions {
                        secondary_shares_faults: c.get(s, "secondary_shares_faults", false)?,
                    },
                    dag: c.path(s, "dag"),
                    schedule: c.path(s, "schedule"),
                    target: c.get(s, "target", "c3".to_owned())?,
                    permanent_at: c.raw(s, "permanent_at").map(|_| c.require(s, "permanent_at")).transpose()?,
                    transient_rate,
                    min_gap: c.get(s, "min_gap", 1)?,
                })
            }
            ScenarioKind::ProbeRun => {
                let s = "probe";
                let default: String = c.get(s, "default", "f4".to_owned())?;
                Params::Probe(ProbeParams {
                    inventory: c.require_path(s, "inventory")?,
                    kb: c.require_path(s, "kb")?,
                    methods: c.require_path(s, "methods")?,
                    default: default.parse().map_err(|e| config_err("default", e))?,
                })
            }
        };
        Ok(Self {
            kind,
            seed,
            length,
            params,
        })
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }
}

/// In-memory result of a scenario run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outputs {
    pub files: BTreeMap<&'static str, Vec<u8>>,
    pub exit: i32,
}

impl Outputs {
    pub fn write_to(&self, dir: &Path) -> Result<(), SimError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        for (name, bytes) in &self.files {
            let path = dir.join(name);
            fs::write(&path, bytes).map_err(io_err(&path))?;
        }
        Ok(())
    }

    pub fn text(&self, name: &str) -> Option<&str> {
        self.files.get(name).and_then(|b| std::str::from_utf8(b).ok())
    }
}

fn read(path: &Path) -> Result<String, SimError> {
    fs::read_to_string(path).map_err(io_err(path))
}

fn csv_bytes<F>(write: F) -> Result<Vec<u8>, SimError>
where
    F: FnOnce(&mut Vec<u8>) -> csv::Result<()>,
{
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(buf)
}

fn clash_bytes(registry: &AssumptionRegistry) -> Result<Vec<u8>, SimError> {
    csv_bytes(|b| registry.write_clash_csv(b))
}

pub fn run(scenario: &Scenario) -> Result<Outputs, SimError> {
    match &scenario.params {
        Params::Redundancy(p) => run_redundancy(scenario, p),
        Params::Pattern(p) => run_pattern(scenario, p),
        Params::Probe(p) => run_probe(p),
    }
}

pub fn redundancy_schedule(scenario: &Scenario, p: &RedundancyParams) -> Result<InjectionSchedule, SimError> {
    match &p.schedule {
        Some(path) => Ok(InjectionSchedule::load(path, scenario.seed)?),
        None => {
            let profile = BurstProfile {
                length: scenario.length,
                ..p.profile.clone()
            };
            Ok(profile.generate(scenario.seed)?)
        }
    }
}

fn run_redundancy(scenario: &Scenario, p: &RedundancyParams) -> Result<Outputs, SimError> {
    let schedule = redundancy_schedule(scenario, p)?;
    let mut registry = AssumptionRegistry::new();
    registry
        .register(
            Assumption::new(
                "a(r)",
                "Degree of employed redundancy is r",
                BindingTime::Run,
                p.policy.n_min as i64,
            )
            .with_syndrome(Syndrome::Boulding),
        )
        .expect("fresh registry");
    registry
        .register(
            Assumption::new("majority", "A majority of replicas agrees", BindingTime::Run, "majority")
                .with_syndrome(Syndrome::Horning),
        )
        .expect("fresh registry");
    let mut trace = Vec::with_capacity(scenario.length.min(1 << 24) as usize);
    let mut events = String::new();
    let summary = redundancy::run_experiment_with(&schedule, &p.policy, scenario.length, |row| {
        trace.push(*row);
        if !row.majority {
            events.push_str(&format!("{} no-majority n={}\n", row.t, row.n));
            registry.observe("majority", "no_majority", row.t).expect("registered");
        }
        let to = match row.event {
            Reaction::Raised => row.n as usize + p.policy.step,
            Reaction::Lowered => row.n as usize - p.policy.step,
            Reaction::Saturated => {
                events.push_str(&format!("{} saturated n={} dtof={}\n", row.t, row.n, row.dtof));
                return;
            }
            Reaction::Steady => return,
        };
        events.push_str(&format!("{} {} {}->{} dtof={}\n", row.t, row.event, row.n, to, row.dtof));
        if registry.observe("a(r)", to as i64, row.t).expect("registered").is_some() {
            registry.mark_handled("a(r)").expect("registered");
        }
    })?;
    let mut files = BTreeMap::new();
    files.insert(TRACE, csv_bytes(|b| redundancy::write_trace_csv(&trace, b))?);
    files.insert(HISTOGRAM, csv_bytes(|b| summary.write_histogram_csv(b))?);
    files.insert(EVENTS, events.into_bytes());
    files.insert(CLASHES, clash_bytes(&registry)?);
    Ok(Outputs { files, exit: 0 })
}

pub fn pattern_schedule(scenario: &Scenario, p: &PatternParams) -> Result<InjectionSchedule, SimError> {
    let mut entries = match &p.schedule {
        Some(path) => InjectionSchedule::load(path, scenario.seed)?.entries().to_vec(),
        None => Vec::new(),
    };
    if let Some(t) = p.permanent_at {
        entries.push(InjectionEntry::permanent(t, p.target.clone()));
    }
    if p.transient_rate > 0.0 {
        let profile = TransientProfile {
            length: scenario.length,
            rate: p.transient_rate,
            min_gap: p.min_gap,
            target: p.target.clone(),
        };
        entries.extend(profile.generate(scenario.seed)?.entries().iter().cloned());
    }
    Ok(InjectionSchedule::new(entries, scenario.seed))
}

pub fn pattern_dag(p: &PatternParams) -> Result<DagSnapshot, SimError> {
    match &p.dag {
        Some(path) => Ok(DagSnapshot::parse(&read(path)?)?),
        None => Ok(DagSnapshot::redoing_pipeline(p.max_retries)),
    }
}

fn run_pattern(scenario: &Scenario, p: &PatternParams) -> Result<Outputs, SimError> {
    let schedule = pattern_schedule(scenario, p)?;
    let mut rc = Reconfigurator::new(pattern_dag(p)?, p.alpha, p.options);
    pattern::run_pattern_experiment(&mut rc, &schedule, scenario.length);
    let events: String = rc.events().iter().map(|e| format!("{e}\n")).collect();
    let mut files = BTreeMap::new();
    files.insert(TRACE, csv_bytes(|b| pattern::write_pattern_trace_csv(rc.trace(), b))?);
    files.insert(EVENTS, events.into_bytes());
    files.insert(CLASHES, clash_bytes(rc.registry())?);
    files.insert(DAG, rc.dag().to_text().into_bytes());
    Ok(Outputs { files, exit: 0 })
}

/// Runs the probe pipeline on files. Exit status is [`EXIT_NO_METHOD`] when
/// some module's behavior has no tolerating method.
pub fn run_probe(p: &ProbeParams) -> Result<Outputs, SimError> {
    let modules = probe::parse_inventory(&read(&p.inventory)?)?;
    let kb = KnowledgeBase::parse(&read(&p.kb)?)?.with_default(p.default);
    let methods = probe::parse_methods(&read(&p.methods)?)?;
    let rows = probe::probe(&modules, &kb, &methods)?;
    let mut registry = AssumptionRegistry::new();
    for row in &rows {
        let id = format!("mem:{}", row.slot);
        registry
            .register(
                Assumption::new(&id, FailureAssumption::F0.text(), BindingTime::Compile, FailureAssumption::F0.id())
                    .with_syndrome(Syndrome::HiddenIntelligence),
            )
            .map_err(|e| config_err("inventory", e))?;
        let clash = registry.observe(&id, row.behavior.id(), 0).expect("registered");
        if clash.is_some() && row.selected() {
            registry.mark_handled(&id).expect("registered");
        }
    }
    let exit = if rows.iter().all(probe::ProbeRow::selected) { 0 } else { EXIT_NO_METHOD };
    let mut files = BTreeMap::new();
    files.insert(REPORT, csv_bytes(|b| probe::write_report_csv(&rows, b))?);
    files.insert(CLASHES, clash_bytes(&registry)?);
    Ok(Outputs { files, exit })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplayReport {
    pub identical: bool,
    pub differing: Vec<&'static str>,
}

/// Re-runs `scenario` and compares every output byte-wise with the files in
/// `dir`. A missing file is an error, a differing one a negative result.
pub fn replay_check(scenario: &Scenario, dir: &Path) -> Result<ReplayReport, SimError> {
    let fresh = run(scenario)?;
    let mut differing = Vec::new();
    for (name, bytes) in &fresh.files {
        let path = dir.join(name);
        if !path.exists() {
            return Err(SimError::MissingOutput(path));
        }
        let stored = fs::read(&path).map_err(io_err(&path))?;
        if stored != *bytes {
            differing.push(*name);
        }
    }
    Ok(ReplayReport {
        identical: differing.is_empty(),
        differing,
    })
}
