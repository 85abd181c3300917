//! Early-stopping rules over a minimized objective history.
//!
//! *Strict* stopping halts once the last `patience` successive changes are
//! all stalls (no decrease, or a decrease smaller than `tolerance`). *Fuzzy*
//! stopping halts once `patience` epochs have passed without beating the
//! best value seen so far, however small the improvements are.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum StoppingPolicy {
    Strict { patience: usize, tolerance: f64 },
    Fuzzy { patience: usize },
}

impl StoppingPolicy {
    pub fn strict(patience: usize, tolerance: f64) -> Result<Self> {
        if patience == 0 || !(tolerance > 0.0) {
            return Err(Error::Config(format!(
                "strict stopping needs patience >= 1 and tolerance > 0, got {patience}, {tolerance}"
            )));
        }
        Ok(Self::Strict { patience, tolerance })
    }

    pub fn fuzzy(patience: usize) -> Result<Self> {
        if patience == 0 {
            return Err(Error::Config("fuzzy stopping needs patience >= 1".into()));
        }
        Ok(Self::Fuzzy { patience })
    }

    pub fn patience(&self) -> usize {
        match *self {
            Self::Strict { patience, .. } | Self::Fuzzy { patience } => patience,
        }
    }

    /// Whether training should halt after the last entry of `history`.
    pub fn should_stop(&self, history: &[f64]) -> bool {
        match *self {
            Self::Strict { patience, tolerance } => {
                history.len() > patience
                    && history[history.len() - patience - 1..]
                        .windows(2)
                        .all(|w| is_stall(w[1] - w[0], tolerance))
            }
            Self::Fuzzy { patience } => {
                let Some(best) = first_argmin(history) else { return false };
                history.len() - 1 - best >= patience
            }
        }
    }

    pub fn monitor(&self) -> StopMonitor {
        StopMonitor { policy: *self, last: None, best: None, since_best: 0, stalls: 0 }
    }
}

fn is_stall(delta: f64, tolerance: f64) -> bool {
    delta >= 0.0 || delta.abs() < tolerance
}

fn first_argmin(history: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in history.iter().enumerate() {
        if best.map_or(true, |b| v < history[b]) {
            best = Some(i);
        }
    }
    best
}

/// Streaming form of [`StoppingPolicy::should_stop`], O(1) per epoch.
#[derive(Debug, Clone)]
pub struct StopMonitor {
    policy: StoppingPolicy,
    last: Option<f64>,
    best: Option<f64>,
    since_best: usize,
    stalls: usize,
}

impl StopMonitor {
    /// Records one epoch's objective; returns `true` if it is a new best.
    pub fn record(&mut self, value: f64) -> bool {
        if let (Some(prev), StoppingPolicy::Strict { tolerance, .. }) = (self.last, self.policy) {
            if is_stall(value - prev, tolerance) {
                self.stalls += 1;
            } else {
                self.stalls = 0;
            }
        }
        self.last = Some(value);
        let improved = self.best.map_or(true, |b| value < b);
        if improved {
            self.best = Some(value);
            self.since_best = 0;
        } else {
            self.since_best += 1;
        }
        improved
    }

    pub fn should_stop(&self) -> bool {
        match self.policy {
            StoppingPolicy::Strict { patience, .. } => self.stalls >= patience,
            StoppingPolicy::Fuzzy { patience } => self.best.is_some() && self.since_best >= patience,
        }
    }

    pub fn best(&self) -> Option<f64> {
        self.best
    }
}
