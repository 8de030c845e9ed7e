//! Memory-module probing and access-method selection.
//!
//! The probe reads an `lshw`-style inventory, asks a [`KnowledgeBase`] which
//! failure behavior the installed modules are known to exhibit, and selects
//! the cheapest [`AccessMethod`] able to tolerate it.

use std::collections::BTreeSet;
use std::fmt;
use std::io;
use std::str::FromStr;

use regex::Regex;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProbeError {
    #[error("inventory line {line}: {msg}: `{text}`")]
    Inventory { line: usize, msg: String, text: String },
    #[error("bank block at line {line} ({header}) lacks `{field}`")]
    MissingField {
        line: usize,
        header: String,
        field: &'static str,
    },
    #[error("knowledge base line {line}: {msg}")]
    KnowledgeBase { line: usize, msg: String },
    #[error("method catalog line {line}: {msg}")]
    Catalog { line: usize, msg: String },
    #[error("no access method tolerates {0}")]
    NoToleratingMethod(FailureAssumption),
    #[error("empty method catalog")]
    EmptyCatalog,
}

/// Memory failure-semantics hypotheses, from benign to most demanding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FailureAssumption {
    F0,
    F1,
    F2,
    F3,
    F4,
}

impl FailureAssumption {
    pub const ALL: [FailureAssumption; 5] = [Self::F0, Self::F1, Self::F2, Self::F3, Self::F4];

    pub fn id(self) -> &'static str {
        match self {
            Self::F0 => "f0",
            Self::F1 => "f1",
            Self::F2 => "f2",
            Self::F3 => "f3",
            Self::F4 => "f4",
        }
    }

    pub fn text(self) -> &'static str {
        match self {
            Self::F0 => "Memory is stable and unaffected by failures",
            Self::F1 => "Memory is affected by transient faults and CMOS-like failure behaviors",
            Self::F2 => "Memory is affected by permanent stuck-at faults and CMOS-like failure behaviors",
            Self::F3 => "Memory is affected by transient faults and SDRAM-like failure behaviors, including SEL",
            Self::F4 => {
                "Memory is affected by transient faults and SDRAM-like failure behaviors, including SEL and SEU"
            }
        }
    }

    pub fn severity(self) -> u8 {
        self as u8
    }
}

impl fmt::Display for FailureAssumption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for FailureAssumption {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|f| f.id().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown failure assumption `{}`", s.trim()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemoryModuleDescriptor {
    pub slot: String,
    pub description: String,
    pub vendor: String,
    pub serial: String,
    /// Bytes.
    pub size: u64,
    /// Bits.
    pub width: u32,
    /// Hz.
    pub clock: u64,
}

fn parse_size(v: &str) -> Option<u64> {
    let v = v.trim();
    let split = v.find(|c: char| !c.is_ascii_digit()).unwrap_or(v.len());
    let (num, unit) = v.split_at(split);
    let num: u64 = num.parse().ok()?;
    let mult: u64 = match unit.trim() {
        "" | "B" => 1,
        "KiB" => 1 << 10,
        "MiB" => 1 << 20,
        "GiB" => 1 << 30,
        "TiB" => 1 << 40,
        "KB" | "kB" => 1_000,
        "MB" => 1_000_000,
        "GB" => 1_000_000_000,
        "TB" => 1_000_000_000_000,
        _ => return None,
    };
    num.checked_mul(mult)
}

fn format_size(bytes: u64) -> String {
    for (unit, mult) in [("TiB", 1u64 << 40), ("GiB", 1 << 30), ("MiB", 1 << 20), ("KiB", 1 << 10)] {
        if bytes.is_multiple_of(mult) {
            return format!("{}{unit}", bytes / mult);
        }
    }
    format!("{bytes}B")
}

/// `533MHz (1.9ns)` -> 533_000_000. The parenthetical period is ignored.
fn parse_clock(v: &str) -> Option<u64> {
    let head = v.split('(').next()?.trim();
    let split = head.find(|c: char| !c.is_ascii_digit() && c != '.').unwrap_or(head.len());
    let (num, unit) = head.split_at(split);
    let mult = match unit.trim() {
        "Hz" => 1.0,
        "KHz" | "kHz" => 1e3,
        "MHz" => 1e6,
        "GHz" => 1e9,
        _ => return None,
    };
    let hz = num.parse::<f64>().ok()? * mult;
    (hz.is_finite() && hz >= 0.0).then(|| hz.round() as u64)
}

fn format_clock(hz: u64) -> String {
    if hz.is_multiple_of(1_000_000) {
        format!("{}MHz", hz / 1_000_000)
    } else {
        format!("{hz}Hz")
    }
}

fn parse_width(v: &str) -> Option<u32> {
    let v = v.trim();
    v.strip_suffix("bits").unwrap_or(v).trim().parse().ok()
}

#[derive(Default)]
struct BankBlock {
    line: usize,
    header: String,
    slot: Option<String>,
    description: String,
    vendor: String,
    serial: String,
    size: Option<u64>,
    width: Option<u32>,
    clock: Option<u64>,
}

impl BankBlock {
    fn finish(self) -> Result<MemoryModuleDescriptor, ProbeError> {
        let missing = |field| ProbeError::MissingField {
            line: self.line,
            header: self.header.clone(),
            field,
        };
        Ok(MemoryModuleDescriptor {
            slot: self.slot.clone().ok_or_else(|| missing("slot"))?,
            size: self.size.ok_or_else(|| missing("size"))?,
            width: self.width.ok_or_else(|| missing("width"))?,
            clock: self.clock.ok_or_else(|| missing("clock"))?,
            description: self.description,
            vendor: self.vendor,
            serial: self.serial,
        })
    }
}

/// Parses every `*-bank` block of an `lshw` memory listing.
///
/// Lines outside bank blocks (the `*-memory` header and its own attributes,
/// other device classes) are skipped, as are unrecognized keys inside a bank.
pub fn parse_inventory(text: &str) -> Result<Vec<MemoryModuleDescriptor>, ProbeError> {
    let mut out = Vec::new();
    let mut current: Option<BankBlock> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix("*-") {
            if let Some(block) = current.take() {
                out.push(block.finish()?);
            }
            if header.starts_with("bank") {
                current = Some(BankBlock {
                    line: i + 1,
                    header: line.to_owned(),
                    ..Default::default()
                });
            }
            continue;
        }
        let Some(block) = current.as_mut() else { continue };
        let err = |msg: &str| ProbeError::Inventory {
            line: i + 1,
            msg: msg.to_owned(),
            text: raw.to_owned(),
        };
        let (key, value) = line.split_once(':').ok_or_else(|| err("expected `key: value`"))?;
        let value = value.trim();
        match key.trim() {
            "slot" => block.slot = Some(value.to_owned()),
            "description" => block.description = value.to_owned(),
            "vendor" => block.vendor = value.to_owned(),
            "serial" => block.serial = value.to_owned(),
            "size" => {
                let size = parse_size(value).filter(|&s| s > 0).ok_or_else(|| err("bad size"))?;
                block.size = Some(size);
            }
            "width" => {
                let width = parse_width(value).filter(|&w| w > 0).ok_or_else(|| err("bad width"))?;
                block.width = Some(width);
            }
            "clock" => {
                let clock = parse_clock(value).filter(|&c| c > 0).ok_or_else(|| err("bad clock"))?;
                block.clock = Some(clock);
            }
            _ => {}
        }
    }
    if let Some(block) = current {
        out.push(block.finish()?);
    }
    Ok(out)
}

/// Renders descriptors in the same `lshw` subset [`parse_inventory`] reads.
pub fn serialize_inventory(modules: &[MemoryModuleDescriptor]) -> String {
    let mut out = String::from("     *-memory\n          description: System Memory\n");
    for (i, m) in modules.iter().enumerate() {
        out.push_str(&format!("        *-bank:{i}\n"));
        for (key, value) in [
            ("description", m.description.clone()),
            ("vendor", m.vendor.clone()),
            ("physical id", i.to_string()),
            ("serial", m.serial.clone()),
            ("slot", m.slot.clone()),
            ("size", format_size(m.size)),
            ("width", format!("{} bits", m.width)),
            ("clock", format_clock(m.clock)),
        ] {
            out.push_str(&format!("             {key}: {value}\n"));
        }
    }
    out
}

/// Glob pattern where `*` matches any run of characters.
#[derive(Debug, Clone)]
pub struct Glob {
    source: String,
    regex: Regex,
}

impl Glob {
    pub fn new(pattern: &str) -> Self {
        let body = pattern.split('*').map(regex::escape).collect::<Vec<_>>().join(".*");
        Self {
            source: pattern.to_owned(),
            regex: Regex::new(&format!("^{body}$")).expect("escaped pattern is valid"),
        }
    }

    pub fn matches(&self, text: &str) -> bool {
        self.regex.is_match(text)
    }

    pub fn as_str(&self) -> &str {
        &self.source
    }
}

impl PartialEq for Glob {
    fn eq(&self, other: &Self) -> bool {
        self.source == other.source
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KbRecord {
    pub vendor: Option<Glob>,
    pub description: Option<Glob>,
    /// Serial number or lot (serial prefix with `*`).
    pub serial: Option<Glob>,
    pub behavior: FailureAssumption,
}

impl KbRecord {
    /// serial > vendor+description > description or vendor alone.
    pub fn specificity(&self) -> u8 {
        if self.serial.is_some() {
            3
        } else if self.vendor.is_some() && self.description.is_some() {
            2
        } else {
            1
        }
    }

    pub fn matches(&self, m: &MemoryModuleDescriptor) -> bool {
        let ok = |g: &Option<Glob>, v: &str| g.as_ref().is_none_or(|g| g.matches(v));
        ok(&self.serial, &m.serial) && ok(&self.vendor, &m.vendor) && ok(&self.description, &m.description)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeBase {
    pub records: Vec<KbRecord>,
    /// Behavior assumed for modules no record matches.
    pub default: FailureAssumption,
}

impl Default for KnowledgeBase {
    fn default() -> Self {
        Self {
            records: Vec::new(),
            default: FailureAssumption::F4,
        }
    }
}

impl KnowledgeBase {
    /// Parses `key=pattern[; key=pattern...] -> fN` lines. Keys are `serial`
    /// (alias `lot`), `vendor` and `description`.
    pub fn parse(text: &str) -> Result<Self, ProbeError> {
        let mut records = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| ProbeError::KnowledgeBase { line: i + 1, msg };
            let (lhs, rhs) = line
                .split_once("->")
                .or_else(|| line.split_once('→'))
                .ok_or_else(|| err("expected `key=value -> fN`".into()))?;
            let behavior: FailureAssumption = rhs.parse().map_err(err)?;
            let mut record = KbRecord {
                vendor: None,
                description: None,
                serial: None,
                behavior,
            };
            for clause in lhs.split(';') {
                let (key, value) = clause
                    .split_once('=')
                    .ok_or_else(|| err(format!("expected `key=value`, got `{}`", clause.trim())))?;
                let glob = Some(Glob::new(value.trim()));
                match key.trim() {
                    "serial" | "lot" => record.serial = glob,
                    "vendor" => record.vendor = glob,
                    "description" => record.description = glob,
                    other => return Err(err(format!("unknown key `{other}`"))),
                }
            }
            records.push(record);
        }
        Ok(Self {
            records,
            ..Default::default()
        })
    }

    pub fn with_default(mut self, default: FailureAssumption) -> Self {
        self.default = default;
        self
    }

    /// Most specific matching record's behavior; earlier records win ties.
    pub fn assess(&self, module: &MemoryModuleDescriptor) -> FailureAssumption {
        let mut best: Option<&KbRecord> = None;
        for r in self.records.iter().filter(|r| r.matches(module)) {
            if best.is_none_or(|b| r.specificity() > b.specificity()) {
                best = Some(r);
            }
        }
        best.map_or(self.default, |r| r.behavior)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccessMethod {
    pub id: String,
    pub tolerates: BTreeSet<FailureAssumption>,
    pub cost: f64,
}

impl AccessMethod {
    pub fn new(id: impl Into<String>, cost: f64, tolerates: impl IntoIterator<Item = FailureAssumption>) -> Self {
        Self {
            id: id.into(),
            cost,
            tolerates: tolerates.into_iter().collect(),
        }
    }
}

/// Parses a method catalog: `id,cost,f0;f1;...` per line, `#` comments.
pub fn parse_methods(text: &str) -> Result<Vec<AccessMethod>, ProbeError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| ProbeError::Catalog { line: i + 1, msg };
        let fields: Vec<&str> = line.splitn(3, ',').map(str::trim).collect();
        let [id, cost, tolerates] = fields[..] else {
            return Err(err("expected `id,cost,f0;f1;...`".into()));
        };
        let cost: f64 = cost.parse().map_err(|_| err(format!("bad cost `{cost}`")))?;
        if !cost.is_finite() || cost < 0.0 {
            return Err(err(format!("cost must be finite and non-negative, got {cost}")));
        }
        let tolerates = tolerates
            .split(';')
            .filter(|s| !s.trim().is_empty())
            .map(str::parse)
            .collect::<Result<BTreeSet<_>, _>>()
            .map_err(err)?;
        out.push(AccessMethod {
            id: id.to_owned(),
            cost,
            tolerates,
        });
    }
    Ok(out)
}

/// Cheapest method tolerating `behavior`; ties go to the smallest id.
pub fn select_method(methods: &[AccessMethod], behavior: FailureAssumption) -> Result<&AccessMethod, ProbeError> {
    if methods.is_empty() {
        return Err(ProbeError::EmptyCatalog);
    }
    methods
        .iter()
        .filter(|m| m.tolerates.contains(&behavior))
        .min_by(|a, b| a.cost.total_cmp(&b.cost).then_with(|| a.id.cmp(&b.id)))
        .ok_or(ProbeError::NoToleratingMethod(behavior))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeRow {
    pub slot: String,
    pub behavior: FailureAssumption,
    pub method: Option<AccessMethod>,
}

impl ProbeRow {
    pub fn selected(&self) -> bool {
        self.method.is_some()
    }
}

/// Assesses and selects for every module.
pub fn probe(modules: &[MemoryModuleDescriptor], kb: &KnowledgeBase, methods: &[AccessMethod]) -> Result<Vec<ProbeRow>, ProbeError> {
    modules
        .iter()
        .map(|m| {
            let behavior = kb.assess(m);
            let method = match select_method(methods, behavior) {
                Ok(method) => Some(method.clone()),
                Err(ProbeError::NoToleratingMethod(_)) => None,
                Err(e) => return Err(e),
            };
            Ok(ProbeRow {
                slot: m.slot.clone(),
                behavior,
                method,
            })
        })
        .collect()
}

/// `slot,assumed_behavior,selected_method,cost`; the last two are empty when
/// nothing tolerates the behavior.
pub fn write_report_csv<W: io::Write>(rows: &[ProbeRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["slot", "assumed_behavior", "selected_method", "cost"])?;
    for r in rows {
        let (id, cost) = match &r.method {
            Some(m) => (m.id.clone(), m.cost.to_string()),
            None => (String::new(), String::new()),
        };
        w.write_record([r.slot.clone(), r.behavior.to_string(), id, cost])?;
    }
    w.flush()?;
    Ok(())
}
