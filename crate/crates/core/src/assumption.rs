//! Assumption variables, binding times and clash detection.
//!
//! An [`Assumption`] is a design-time hypothesis with an assumed value. When
//! the true value is observed and differs from the assumed one, the
//! [`AssumptionRegistry`] appends a [`ClashRecord`] to its log.

use std::collections::HashMap;
use std::fmt;
use std::io;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AssumptionError {
    #[error("assumption `{0}` is already registered")]
    Duplicate(String),
    #[error("unknown assumption `{0}`")]
    Unknown(String),
    #[error("observation of `{id}` at t={sim_time} precedes the last logged clash at t={last}")]
    OutOfOrder { id: String, sim_time: u64, last: u64 },
}

/// Stage at which an assumption is bound to a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BindingTime {
    Design,
    Compile,
    Deploy,
    Run,
}

/// Failure syndrome an assumption is associated with. Metadata only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Syndrome {
    Horning,
    HiddenIntelligence,
    Boulding,
}

/// Tagged scalar. Comparison is exact; `Int(3)` and `Decimal(3.0)` differ.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Text(String),
    Int(i64),
    Decimal(f64),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Text(s) => f.write_str(s),
            Value::Int(i) => write!(f, "{i}"),
            Value::Decimal(d) => write!(f, "{d}"),
        }
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Text(s.to_owned())
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::Text(s)
    }
}

impl From<i64> for Value {
    fn from(i: i64) -> Self {
        Value::Int(i)
    }
}

impl From<f64> for Value {
    fn from(d: f64) -> Self {
        Value::Decimal(d)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assumption {
    pub id: String,
    pub description: String,
    pub binding: BindingTime,
    pub assumed: Value,
    pub observed: Option<Value>,
    pub syndrome: Option<Syndrome>,
}

impl Assumption {
    pub fn new(
        id: impl Into<String>,
        description: impl Into<String>,
        binding: BindingTime,
        assumed: impl Into<Value>,
    ) -> Self {
        Self {
            id: id.into(),
            description: description.into(),
            binding,
            assumed: assumed.into(),
            observed: None,
            syndrome: None,
        }
    }

    pub fn with_syndrome(mut self, syndrome: Syndrome) -> Self {
        self.syndrome = Some(syndrome);
        self
    }

    /// True iff a value has been observed and it differs from the assumed one.
    pub fn clashes(&self) -> bool {
        self.observed.as_ref().is_some_and(|o| *o != self.assumed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClashRecord {
    pub assumption_id: String,
    pub assumed: Value,
    pub observed: Value,
    pub sim_time: u64,
    pub handled: bool,
}

/// Opaque index of a registered assumption.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Handle(usize);

#[derive(Debug, Default, Clone)]
pub struct AssumptionRegistry {
    assumptions: Vec<Assumption>,
    index: HashMap<String, usize>,
    log: Vec<ClashRecord>,
}

impl AssumptionRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, assumption: Assumption) -> Result<Handle, AssumptionError> {
        if self.index.contains_key(&assumption.id) {
            return Err(AssumptionError::Duplicate(assumption.id));
        }
        let slot = self.assumptions.len();
        self.index.insert(assumption.id.clone(), slot);
        self.assumptions.push(assumption);
        Ok(Handle(slot))
    }

    pub fn lookup(&self, id: &str) -> Option<&Assumption> {
        self.index.get(id).map(|&i| &self.assumptions[i])
    }

    pub fn get(&self, handle: Handle) -> &Assumption {
        &self.assumptions[handle.0]
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn assumptions(&self) -> &[Assumption] {
        &self.assumptions
    }

    /// Stores `value` as the observed truth of `id` and logs a clash when it
    /// differs from the assumed value.
    ///
    /// Observing the same value for the same assumption at the same time as
    /// the last logged clash does not log it a second time.
    pub fn observe(
        &mut self,
        id: &str,
        value: impl Into<Value>,
        sim_time: u64,
    ) -> Result<Option<ClashRecord>, AssumptionError> {
        let value = value.into();
        let &slot = self
            .index
            .get(id)
            .ok_or_else(|| AssumptionError::Unknown(id.to_owned()))?;
        let last = self.log.last().map(|c| c.sim_time);
        let assumption = &mut self.assumptions[slot];
        if value == assumption.assumed {
            assumption.observed = Some(value);
            return Ok(None);
        }
        if let Some(last) = last {
            if sim_time < last {
                return Err(AssumptionError::OutOfOrder {
                    id: id.to_owned(),
                    sim_time,
                    last,
                });
            }
        }
        let duplicate = self.log.iter().rev().take_while(|c| c.sim_time == sim_time).any(|c| {
            c.assumption_id == assumption.id && c.observed == value
        });
        assumption.observed = Some(value.clone());
        if duplicate {
            return Ok(None);
        }
        let record = ClashRecord {
            assumption_id: assumption.id.clone(),
            assumed: assumption.assumed.clone(),
            observed: value,
            sim_time,
            handled: false,
        };
        self.log.push(record.clone());
        Ok(Some(record))
    }

    /// Marks every unhandled clash of `id` as handled. The observed value is
    /// kept. Returns the number of records touched.
    pub fn mark_handled(&mut self, id: &str) -> Result<usize, AssumptionError> {
        if !self.contains(id) {
            return Err(AssumptionError::Unknown(id.to_owned()));
        }
        let mut touched = 0;
        for record in self.log.iter_mut().filter(|c| c.assumption_id == id && !c.handled) {
            record.handled = true;
            touched += 1;
        }
        Ok(touched)
    }

    /// All clashes, in `sim_time` order.
    pub fn clash_log(&self) -> &[ClashRecord] {
        &self.log
    }

    /// Writes the clash log as `sim_time,assumption_id,assumed,observed`.
    pub fn write_clash_csv<W: io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["sim_time", "assumption_id", "assumed", "observed"])?;
        for c in &self.log {
            w.write_record([
                c.sim_time.to_string(),
                c.assumption_id.clone(),
                c.assumed.to_string(),
                c.observed.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
