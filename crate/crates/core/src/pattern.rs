//! Reflective component DAG and run-time switching between fault-tolerance
//! patterns.
//!
//! A [`DagSnapshot`] describes the component architecture. A protected
//! component is either a redoing wrapper (repeat on failure, pattern D1) or a
//! primary/secondary pair (replace on failure, pattern D2). Failed attempts
//! make the watchdog fire into the component's alpha-count channel; when the
//! channel latches, the [`Reconfigurator`] injects the D2 fragment in place
//! of the redoing wrapper.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io;
use std::str::FromStr;

use petgraph::algo::toposort;
use petgraph::graphmap::DiGraphMap;
use thiserror::Error;

use crate::alpha::{AlphaConfig, AlphaCountState};
use crate::assumption::{Assumption, AssumptionRegistry, BindingTime, Syndrome};
use crate::fault::{ActiveFaults, FaultClass};

pub const DEFAULT_MAX_RETRIES: u32 = 10;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DagError {
    #[error("unknown component `{0}`")]
    UnknownComponent(String),
    #[error("duplicate component `{0}`")]
    DuplicateComponent(String),
    #[error("edge {0} -> {1} references a missing component")]
    DanglingEdge(String, String),
    #[error("graph contains a cycle through `{0}`")]
    Cycle(String),
    #[error("injection would create a cycle through `{0}`")]
    WouldCreateCycle(String),
    #[error("replacement redefines existing component `{0}` with a different kind")]
    ConflictingComponent(String),
    #[error("replacement pattern is empty")]
    EmptyReplacement,
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ComponentKind {
    Plain,
    RedoingWrapper,
    PrimaryReplica,
    SecondaryReplica,
    Voter,
    Watchdog,
}

impl ComponentKind {
    fn name(self) -> &'static str {
        match self {
            ComponentKind::Plain => "plain",
            ComponentKind::RedoingWrapper => "redoing_wrapper",
            ComponentKind::PrimaryReplica => "primary_replica",
            ComponentKind::SecondaryReplica => "secondary_replica",
            ComponentKind::Voter => "voter",
            ComponentKind::Watchdog => "watchdog",
        }
    }
}

impl FromStr for ComponentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "plain" => ComponentKind::Plain,
            "redoing_wrapper" => ComponentKind::RedoingWrapper,
            "primary_replica" => ComponentKind::PrimaryReplica,
            "secondary_replica" => ComponentKind::SecondaryReplica,
            "voter" => ComponentKind::Voter,
            "watchdog" => ComponentKind::Watchdog,
            other => return Err(format!("unknown component kind `{other}`")),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ComponentNode {
    pub id: String,
    pub kind: ComponentKind,
    /// Only meaningful for redoing wrappers.
    pub max_retries: Option<u32>,
}

impl ComponentNode {
    pub fn new(id: impl Into<String>, kind: ComponentKind) -> Self {
        Self {
            id: id.into(),
            kind,
            max_retries: None,
        }
    }

    pub fn redoing(id: impl Into<String>, max_retries: u32) -> Self {
        Self {
            id: id.into(),
            kind: ComponentKind::RedoingWrapper,
            max_retries: Some(max_retries.max(1)),
        }
    }

    /// Alpha-count channel this node reports into, if it is a protected part.
    ///
    /// Replicas are named `<component>.<k>` and report into `<component>`.
    pub fn channel(&self) -> Option<&str> {
        match self.kind {
            ComponentKind::RedoingWrapper => Some(&self.id),
            ComponentKind::PrimaryReplica | ComponentKind::SecondaryReplica => {
                Some(self.id.rsplit_once('.').map_or(self.id.as_str(), |(base, _)| base))
            }
            _ => None,
        }
    }
}

/// Pattern applied to one protected component.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pattern {
    Redoing,
    Reconfiguration,
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pattern::Redoing => "D1",
            Pattern::Reconfiguration => "D2",
        })
    }
}

/// Environment hypotheses that motivate each pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvironmentAssumption {
    NoFaults,
    Transient,
    Permanent,
}

impl EnvironmentAssumption {
    pub fn id(self) -> &'static str {
        match self {
            EnvironmentAssumption::NoFaults => "e0",
            EnvironmentAssumption::Transient => "e1",
            EnvironmentAssumption::Permanent => "e2",
        }
    }

    pub fn text(self) -> &'static str {
        match self {
            EnvironmentAssumption::NoFaults => "No faults shall be experienced",
            EnvironmentAssumption::Transient => "The physical environment shall exhibit transient faults",
            EnvironmentAssumption::Permanent => "The physical environment shall exhibit permanent faults",
        }
    }

    /// Label stored as the assumed/observed value in the registry.
    pub fn value(self) -> &'static str {
        match self {
            EnvironmentAssumption::NoFaults => "none",
            EnvironmentAssumption::Transient => "transient",
            EnvironmentAssumption::Permanent => "permanent",
        }
    }

    /// `None` for e0, which runs without any fault-tolerance pattern.
    pub fn pattern(self) -> Option<Pattern> {
        match self {
            EnvironmentAssumption::NoFaults => None,
            EnvironmentAssumption::Transient => Some(Pattern::Redoing),
            EnvironmentAssumption::Permanent => Some(Pattern::Reconfiguration),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DagSnapshot {
    nodes: BTreeMap<String, ComponentNode>,
    edges: BTreeSet<(String, String)>,
}

impl DagSnapshot {
    pub fn new(
        nodes: impl IntoIterator<Item = ComponentNode>,
        edges: impl IntoIterator<Item = (String, String)>,
    ) -> Result<Self, DagError> {
        let mut map = BTreeMap::new();
        for node in nodes {
            if map.contains_key(&node.id) {
                return Err(DagError::DuplicateComponent(node.id));
            }
            map.insert(node.id.clone(), node);
        }
        let edges: BTreeSet<_> = edges.into_iter().collect();
        for (a, b) in &edges {
            if !map.contains_key(a) || !map.contains_key(b) {
                return Err(DagError::DanglingEdge(a.clone(), b.clone()));
            }
        }
        let dag = Self { nodes: map, edges };
        dag.topological_order().map_err(|e| match e {
            DagError::WouldCreateCycle(id) => DagError::Cycle(id),
            other => other,
        })?;
        Ok(dag)
    }

    /// Redoing architecture `c1 -> c2 -> c3 -> c4` with a
    /// watchdog on `c3`, which redoes its computation on failure.
    pub fn redoing_pipeline(max_retries: u32) -> Self {
        let nodes = [
            ComponentNode::new("c1", ComponentKind::Plain),
            ComponentNode::new("c2", ComponentKind::Plain),
            ComponentNode::redoing("c3", max_retries),
            ComponentNode::new("c4", ComponentKind::Plain),
            ComponentNode::new("wd", ComponentKind::Watchdog),
        ];
        let edges = [("c1", "c2"), ("c2", "c3"), ("c3", "c4"), ("wd", "c3")]
            .map(|(a, b)| (a.to_owned(), b.to_owned()));
        Self::new(nodes, edges).expect("static pipeline is a DAG")
    }

    /// Single redoing wrapper `id`.
    pub fn redoing_fragment(id: &str, max_retries: u32) -> Self {
        Self::new([ComponentNode::redoing(id, max_retries)], []).expect("single node")
    }

    /// 2-version scheme for `id`: primary `id.1` backed by secondary `id.2`.
    pub fn reconfiguration_fragment(id: &str) -> Self {
        Self::new(
            [
                ComponentNode::new(format!("{id}.1"), ComponentKind::PrimaryReplica),
                ComponentNode::new(format!("{id}.2"), ComponentKind::SecondaryReplica),
            ],
            [],
        )
        .expect("two isolated nodes")
    }

    pub fn nodes(&self) -> impl Iterator<Item = &ComponentNode> {
        self.nodes.values()
    }

    pub fn node(&self, id: &str) -> Option<&ComponentNode> {
        self.nodes.get(id)
    }

    pub fn edges(&self) -> &BTreeSet<(String, String)> {
        &self.edges
    }

    pub fn contains(&self, id: &str) -> bool {
        self.nodes.contains_key(id)
    }

    fn graph(&self) -> DiGraphMap<&str, ()> {
        let mut g = DiGraphMap::new();
        for id in self.nodes.keys() {
            g.add_node(id.as_str());
        }
        for (a, b) in &self.edges {
            g.add_edge(a.as_str(), b.as_str(), ());
        }
        g
    }

    pub fn topological_order(&self) -> Result<Vec<&str>, DagError> {
        toposort(&self.graph(), None)
            .map_err(|cycle| DagError::WouldCreateCycle(cycle.node_id().to_owned()))
    }

    /// Protected components (alpha channels) with the pattern applied to each.
    pub fn protected(&self) -> BTreeMap<String, Pattern> {
        let mut out = BTreeMap::new();
        for node in self.nodes.values() {
            if let Some(ch) = node.channel() {
                let pattern = match node.kind {
                    ComponentKind::RedoingWrapper => Pattern::Redoing,
                    _ => Pattern::Reconfiguration,
                };
                out.insert(ch.to_owned(), pattern);
            }
        }
        out
    }

    fn sources(&self) -> Vec<&str> {
        self.nodes
            .keys()
            .filter(|id| !self.edges.iter().any(|(_, b)| b == *id))
            .map(String::as_str)
            .collect()
    }

    fn sinks(&self) -> Vec<&str> {
        self.nodes
            .keys()
            .filter(|id| !self.edges.iter().any(|(a, _)| a == *id))
            .map(String::as_str)
            .collect()
    }

    /// Replaces component `at` with the `replacement` pattern.
    ///
    /// Edges that entered `at` are redirected to every source of the
    /// replacement, edges that left `at` now leave every sink of it. Nodes
    /// of the replacement that already exist elsewhere in the graph are
    /// merged when identical.
    pub fn inject(&self, replacement: &DagSnapshot, at: &str) -> Result<DagSnapshot, DagError> {
        if !self.contains(at) {
            return Err(DagError::UnknownComponent(at.to_owned()));
        }
        if replacement.nodes.is_empty() {
            return Err(DagError::EmptyReplacement);
        }
        replacement.topological_order()?;
        let mut nodes = self.nodes.clone();
        nodes.remove(at);
        for (id, node) in &replacement.nodes {
            match nodes.get(id) {
                Some(existing) if existing != node => {
                    return Err(DagError::ConflictingComponent(id.clone()))
                }
                _ => {
                    nodes.insert(id.clone(), node.clone());
                }
            }
        }
        let sources = replacement.sources();
        let sinks = replacement.sinks();
        let mut edges = BTreeSet::new();
        for (a, b) in &self.edges {
            match (a.as_str() == at, b.as_str() == at) {
                (false, false) => {
                    edges.insert((a.clone(), b.clone()));
                }
                (false, true) => edges.extend(sources.iter().map(|s| (a.clone(), s.to_string()))),
                (true, false) => edges.extend(sinks.iter().map(|s| (s.to_string(), b.clone()))),
                (true, true) => {}
            }
        }
        edges.extend(replacement.edges.iter().cloned());
        let dag = DagSnapshot { nodes, edges };
        dag.topological_order()?;
        Ok(dag)
    }

    /// Edge-list text: `id: kind` annotations followed by `from -> to` lines.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for node in self.nodes.values() {
            match node.max_retries {
                Some(r) => out.push_str(&format!("{}: {}({r})\n", node.id, node.kind.name())),
                None => out.push_str(&format!("{}: {}\n", node.id, node.kind.name())),
            }
        }
        for (a, b) in &self.edges {
            out.push_str(&format!("{a} -> {b}\n"));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, DagError> {
        let mut nodes = Vec::new();
        let mut edges = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| DagError::Parse { line: i + 1, msg };
            if let Some((a, b)) = line.split_once("->") {
                edges.push((a.trim().to_owned(), b.trim().to_owned()));
            } else if let Some((id, kind)) = line.split_once(':') {
                let kind = kind.trim();
                let (kind, retries) = match kind.split_once('(') {
                    Some((k, r)) => {
                        let r = r.trim_end_matches(')').trim();
                        (k.trim(), Some(r.parse::<u32>().map_err(|_| err(format!("bad retry count `{r}`")))?))
                    }
                    None => (kind, None),
                };
                let kind: ComponentKind = kind.parse().map_err(err)?;
                let mut node = ComponentNode::new(id.trim(), kind);
                if kind == ComponentKind::RedoingWrapper {
                    node.max_retries = Some(retries.unwrap_or(DEFAULT_MAX_RETRIES).max(1));
                }
                nodes.push(node);
            } else {
                return Err(err(format!("expected `id: kind` or `from -> to`, got `{line}`")));
            }
        }
        Self::new(nodes, edges)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    /// The protected task succeeded after `attempts` attempts.
    Success { attempts: u32 },
    /// The primary failed and the secondary delivered the result.
    TakenOver,
    /// The channel latched while redoing; retries were abandoned and a
    /// pattern switch was requested.
    Escalated { attempts: u32 },
    /// Every available attempt failed.
    Failed { attempts: u32 },
}

impl StepOutcome {
    pub fn delivered(self) -> bool {
        matches!(self, StepOutcome::Success { .. } | StepOutcome::TakenOver)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwitchRequest {
    pub channel: String,
    pub from: Pattern,
    pub to: Pattern,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelStep {
    pub channel: String,
    pub pattern: Pattern,
    pub outcome: StepOutcome,
    /// State after every attempt, in order. `true` marks a watchdog firing.
    pub updates: Vec<(AlphaCountState, bool)>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepReport {
    pub channels: Vec<ChannelStep>,
    pub switch_requests: Vec<SwitchRequest>,
}

impl StepReport {
    pub fn all_delivered(&self) -> bool {
        self.channels.iter().all(|c| c.outcome.delivered())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ExecutionOptions {
    /// The secondary replica shares faults aimed at the logical component.
    pub secondary_shares_faults: bool,
}

fn faults_on<'f>(faults: &'f ActiveFaults, id: &'f str) -> impl Iterator<Item = FaultClass> + 'f {
    faults.iter().filter(move |(t, _)| t == id).map(|(_, c)| *c)
}

/// Runs one step of every protected component in `dag`.
///
/// Transient faults corrupt a single attempt. Permanent and intermittent
/// faults corrupt every attempt made while they are active. Each failed
/// attempt fires the watchdog, i.e. one error observation on the channel;
/// each successful attempt is a clean observation.
pub fn execute_step(
    dag: &DagSnapshot,
    faults: &ActiveFaults,
    alpha: &mut BTreeMap<String, AlphaCountState>,
    config: &AlphaConfig,
    options: ExecutionOptions,
) -> StepReport {
    let mut report = StepReport::default();
    let mut seen = BTreeSet::new();
    // Channels are independent, so id order is as good as topological order.
    for node in dag.nodes.values() {
        let Some(channel) = node.channel() else { continue };
        if !seen.insert(channel.to_owned()) {
            continue;
        }
        let state = alpha.entry(channel.to_owned()).or_default();
        let step = match node.kind {
            ComponentKind::RedoingWrapper => {
                let retries = node.max_retries.unwrap_or(DEFAULT_MAX_RETRIES);
                run_redoing(channel, retries, faults, state, config, &mut report.switch_requests)
            }
            _ => run_reconfiguration(dag, channel, faults, state, config, options),
        };
        report.channels.push(step);
    }
    report
}

fn run_redoing(
    channel: &str,
    max_retries: u32,
    faults: &ActiveFaults,
    state: &mut AlphaCountState,
    config: &AlphaConfig,
    requests: &mut Vec<SwitchRequest>,
) -> ChannelStep {
    let mut persistent = false;
    let mut transient = false;
    for class in faults_on(faults, channel) {
        match class {
            FaultClass::Transient => transient = true,
            FaultClass::Intermittent | FaultClass::Permanent => persistent = true,
        }
    }
    let mut updates = Vec::new();
    let mut outcome = None;
    for attempt in 0..=max_retries {
        let failed = persistent || (transient && attempt == 0);
        *state = state.step(config, failed);
        updates.push((*state, failed));
        if !failed {
            outcome = Some(StepOutcome::Success { attempts: attempt + 1 });
            break;
        }
        if state.latched {
            requests.push(SwitchRequest {
                channel: channel.to_owned(),
                from: Pattern::Redoing,
                to: Pattern::Reconfiguration,
            });
            outcome = Some(StepOutcome::Escalated { attempts: attempt + 1 });
            break;
        }
    }
    ChannelStep {
        channel: channel.to_owned(),
        pattern: Pattern::Redoing,
        outcome: outcome.unwrap_or(StepOutcome::Failed {
            attempts: max_retries + 1,
        }),
        updates,
    }
}

fn run_reconfiguration(
    dag: &DagSnapshot,
    channel: &str,
    faults: &ActiveFaults,
    state: &mut AlphaCountState,
    config: &AlphaConfig,
    options: ExecutionOptions,
) -> ChannelStep {
    let replica = |kind| {
        dag.nodes
            .values()
            .find(|n| n.kind == kind && n.channel() == Some(channel))
            .map(|n| n.id.as_str())
    };
    let hit = |id: Option<&str>, shares: bool| match id {
        None => true,
        Some(id) => faults_on(faults, id).next().is_some() || (shares && faults_on(faults, channel).next().is_some()),
    };
    let primary_fails = hit(replica(ComponentKind::PrimaryReplica), true);
    let mut updates = Vec::new();
    *state = state.step(config, primary_fails);
    updates.push((*state, primary_fails));
    let outcome = if !primary_fails {
        StepOutcome::Success { attempts: 1 }
    } else {
        let secondary_fails = hit(
            replica(ComponentKind::SecondaryReplica),
            options.secondary_shares_faults,
        );
        *state = state.step(config, secondary_fails);
        updates.push((*state, secondary_fails));
        if secondary_fails {
            StepOutcome::Failed { attempts: 2 }
        } else {
            StepOutcome::TakenOver
        }
    };
    ChannelStep {
        channel: channel.to_owned(),
        pattern: Pattern::Reconfiguration,
        outcome,
        updates,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternEvent {
    pub t: u64,
    pub text: String,
}

impl fmt::Display for PatternEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.t, self.text)
    }
}

/// One row of the pattern trace: `t,channel,alpha,latched,event`.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternTraceRow {
    pub t: u64,
    pub channel: String,
    pub alpha: f64,
    pub latched: bool,
    pub event: String,
}

pub fn write_pattern_trace_csv<W: io::Write>(rows: &[PatternTraceRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "channel", "alpha", "latched", "event"])?;
    for r in rows {
        w.write_record([
            r.t.to_string(),
            r.channel.clone(),
            format!("{:.6}", r.alpha),
            u8::from(r.latched).to_string(),
            r.event.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn environment_id(channel: &str) -> String {
    format!("e1:{channel}")
}

/// The reconfiguration agent: owns the live DAG, the alpha channels and the
/// environment assumptions, and applies pattern switches between steps.
#[derive(Debug, Clone)]
pub struct Reconfigurator {
    dag: DagSnapshot,
    pub config: AlphaConfig,
    pub options: ExecutionOptions,
    alpha: BTreeMap<String, AlphaCountState>,
    switched: BTreeSet<String>,
    registry: AssumptionRegistry,
    events: Vec<PatternEvent>,
    trace: Vec<PatternTraceRow>,
    record_trace: bool,
}

impl Reconfigurator {
    pub fn new(dag: DagSnapshot, config: AlphaConfig, options: ExecutionOptions) -> Self {
        let mut registry = AssumptionRegistry::new();
        for (channel, pattern) in dag.protected() {
            let env = match pattern {
                Pattern::Redoing => EnvironmentAssumption::Transient,
                Pattern::Reconfiguration => EnvironmentAssumption::Permanent,
            };
            registry
                .register(
                    Assumption::new(
                        environment_id(&channel),
                        format!("{}: {}", env.id(), env.text()),
                        BindingTime::Run,
                        env.value(),
                    )
                    .with_syndrome(Syndrome::Horning),
                )
                .expect("one channel per protected component");
        }
        Self {
            dag,
            config,
            options,
            alpha: BTreeMap::new(),
            switched: BTreeSet::new(),
            registry,
            events: Vec::new(),
            trace: Vec::new(),
            record_trace: true,
        }
    }

    /// Keeps events and clashes but drops the per-attempt alpha trace.
    pub fn without_trace(mut self) -> Self {
        self.record_trace = false;
        self
    }

    pub fn dag(&self) -> &DagSnapshot {
        &self.dag
    }

    pub fn alpha(&self, channel: &str) -> AlphaCountState {
        self.alpha.get(channel).copied().unwrap_or_default()
    }

    pub fn registry(&self) -> &AssumptionRegistry {
        &self.registry
    }

    pub fn events(&self) -> &[PatternEvent] {
        &self.events
    }

    pub fn trace(&self) -> &[PatternTraceRow] {
        &self.trace
    }

    fn log(&mut self, t: u64, channel: &str, event: String) {
        let state = self.alpha(channel);
        if self.record_trace {
            self.trace.push(PatternTraceRow {
            t,
            channel: channel.to_owned(),
            alpha: state.alpha,
            latched: state.latched,
                event: event.clone(),
            });
        }
        self.events.push(PatternEvent { t, text: event });
    }

    /// Executes step `t` and then applies any switch it requested.
    pub fn step(&mut self, t: u64, faults: &ActiveFaults) -> StepReport {
        let report = execute_step(&self.dag, faults, &mut self.alpha, &self.config, self.options);
        for ch in &report.channels {
            for (state, fired) in ch.updates.iter().filter(|_| self.record_trace) {
                self.trace.push(PatternTraceRow {
                    t,
                    channel: ch.channel.clone(),
                    alpha: state.alpha,
                    latched: state.latched,
                    event: if *fired { "fire".into() } else { String::new() },
                });
            }
            match ch.outcome {
                StepOutcome::Failed { attempts } => {
                    self.log(t, &ch.channel, format!("failure {} after {attempts} attempts", ch.channel))
                }
                StepOutcome::TakenOver => self.log(t, &ch.channel, format!("takeover {}", ch.channel)),
                _ => {}
            }
        }
        for request in &report.switch_requests {
            self.assess_and_switch(Some(request), t);
        }
        report
    }

    /// Applies a pending D1 -> D2 switch. Repeated requests for a channel
    /// that has already switched only log an event.
    pub fn assess_and_switch(&mut self, request: Option<&SwitchRequest>, t: u64) -> &DagSnapshot {
        let Some(request) = request else {
            return &self.dag;
        };
        let channel = request.channel.as_str();
        if self.switched.contains(channel)
            || self.dag.protected().get(channel) != Some(&Pattern::Redoing)
        {
            self.log(t, channel, format!("already switched {channel}"));
            return &self.dag;
        }
        let fragment = DagSnapshot::reconfiguration_fragment(channel);
        match self.dag.inject(&fragment, channel) {
            Ok(next) => {
                self.dag = next;
                self.switched.insert(channel.to_owned());
                self.log(t, channel, format!("switch D1->D2 {channel}"));
                let id = environment_id(channel);
                if self
                    .registry
                    .observe(&id, EnvironmentAssumption::Permanent.value(), t)
                    .ok()
                    .flatten()
                    .is_some()
                {
                    let _ = self.registry.mark_handled(&id);
                }
            }
            Err(e) => self.log(t, channel, format!("switch rejected {channel}: {e}")),
        }
        &self.dag
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PatternSummary {
    pub steps: u64,
    pub delivered_steps: u64,
    pub failed_steps: u64,
    pub escalated_steps: u64,
    pub switches: u64,
    pub latched_channels: usize,
}

/// Drives `rc` through steps `0..length` of `schedule`.
pub fn run_pattern_experiment(
    rc: &mut Reconfigurator,
    schedule: &crate::fault::InjectionSchedule,
    length: u64,
) -> PatternSummary {
    let mut summary = PatternSummary {
        steps: length,
        ..Default::default()
    };
    let mut timeline = schedule.timeline();
    for t in 0..length {
        let report = rc.step(t, &timeline.at(t));
        if report.all_delivered() {
            summary.delivered_steps += 1;
        }
        for ch in &report.channels {
            match ch.outcome {
                StepOutcome::Failed { .. } => summary.failed_steps += 1,
                StepOutcome::Escalated { .. } => summary.escalated_steps += 1,
                _ => {}
            }
        }
    }
    summary.switches = rc.switched.len() as u64;
    summary.latched_channels = rc.alpha.values().filter(|s| s.latched).count();
    summary
}
