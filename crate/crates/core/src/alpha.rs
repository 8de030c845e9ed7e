//! Alpha-count filter.
//!
//! Each monitored channel carries a score `alpha`. An observed error adds 1,
//! a clean observation multiplies it by the decay factor `K`. Once the score
//! crosses the threshold the channel is labeled permanent-or-intermittent and
//! stays latched until explicitly reset.

use thiserror::Error;

pub const DEFAULT_DECAY: f64 = 0.5;
pub const DEFAULT_THRESHOLD: f64 = 3.0;

#[derive(Debug, Error, PartialEq)]
pub enum AlphaError {
    #[error("decay must lie in [0, 1], got {0}")]
    Decay(f64),
    #[error("threshold must be positive, got {0}")]
    Threshold(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaConfig {
    pub decay: f64,
    pub threshold: f64,
    /// Latch on `alpha > threshold` when set, on `alpha >= threshold` otherwise.
    pub strict: bool,
}

impl Default for AlphaConfig {
    fn default() -> Self {
        Self {
            decay: DEFAULT_DECAY,
            threshold: DEFAULT_THRESHOLD,
            strict: true,
        }
    }
}

impl AlphaConfig {
    pub fn new(decay: f64, threshold: f64) -> Result<Self, AlphaError> {
        let cfg = Self {
            decay,
            threshold,
            strict: true,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), AlphaError> {
        if !(0.0..=1.0).contains(&self.decay) {
            return Err(AlphaError::Decay(self.decay));
        }
        if self.threshold.is_nan() || self.threshold <= 0.0 {
            return Err(AlphaError::Threshold(self.threshold));
        }
        Ok(())
    }

    fn crossed(&self, alpha: f64) -> bool {
        if self.strict {
            alpha > self.threshold
        } else {
            alpha >= self.threshold
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Classification {
    #[default]
    Benign,
    PermanentOrIntermittent,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AlphaCountState {
    pub alpha: f64,
    pub classification: Classification,
    pub latched: bool,
}

impl AlphaCountState {
    pub fn new() -> Self {
        Self::default()
    }

    #[must_use]
    pub fn step(self, config: &AlphaConfig, error_observed: bool) -> Self {
        let alpha = if error_observed {
            self.alpha + 1.0
        } else {
            self.alpha * config.decay
        };
        let latched = self.latched || config.crossed(alpha);
        Self {
            alpha,
            classification: if latched {
                Classification::PermanentOrIntermittent
            } else {
                Classification::Benign
            },
            latched,
        }
    }

    #[must_use]
    pub fn reset(self) -> Self {
        Self::default()
    }

    /// Folds a whole observation sequence into the state.
    #[must_use]
    pub fn run<I: IntoIterator<Item = bool>>(self, config: &AlphaConfig, errors: I) -> Self {
        errors.into_iter().fold(self, |s, e| s.step(config, e))
    }
}
