//! Per-epoch training records and their CSV exports.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::Result;

/// What a solver observed while training.
///
/// `loss` holds the minimized objective per epoch (relaxed energy, policy
/// loss, or rollout loss); `best_loss` and `best_epoch` refer to it.
/// `episode_cut` is the cut observed at each epoch or iteration and
/// `best_cut` its running maximum.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainTrace {
    pub loss: Vec<f64>,
    pub episode_cut: Vec<usize>,
    pub best_cut: Vec<usize>,
    pub best_loss: f64,
    pub best_epoch: usize,
    /// Probabilities at the best-loss epoch, where the solver has them.
    pub snapshot: Vec<f64>,
    pub epochs: usize,
    pub wall_time: f64,
}

impl TrainTrace {
    pub(crate) fn new() -> Self {
        Self { best_loss: f64::INFINITY, ..Self::default() }
    }

    pub(crate) fn push_cut(&mut self, cut: usize) {
        let best = self.best_cut.last().copied().unwrap_or(0).max(cut);
        self.episode_cut.push(cut);
        self.best_cut.push(best);
    }

    pub fn final_best_cut(&self) -> usize {
        self.best_cut.last().copied().unwrap_or(0)
    }

    /// `epoch,loss` rows.
    pub fn loss_csv(&self) -> String {
        let mut out = String::from("epoch,loss\n");
        for (e, l) in self.loss.iter().enumerate() {
            let _ = writeln!(out, "{},{}", e + 1, l);
        }
        out
    }

    /// `epoch,best_cut,episode_cut` rows.
    pub fn reward_csv(&self) -> String {
        let mut out = String::from("epoch,best_cut,episode_cut\n");
        for (e, (b, c)) in self.best_cut.iter().zip(&self.episode_cut).enumerate() {
            let _ = writeln!(out, "{},{},{}", e + 1, b, c);
        }
        out
    }

    /// `iteration,best_cut` rows.
    pub fn search_csv(&self) -> String {
        let mut out = String::from("iteration,best_cut\n");
        for (i, b) in self.best_cut.iter().enumerate() {
            let _ = writeln!(out, "{},{}", i + 1, b);
        }
        out
    }
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layouts() {
        let mut t = TrainTrace::new();
        t.loss = vec![1.5, -0.5];
        t.push_cut(3);
        t.push_cut(2);
        assert_eq!(t.loss_csv(), "epoch,loss\n1,1.5\n2,-0.5\n");
        assert_eq!(t.reward_csv(), "epoch,best_cut,episode_cut\n1,3,3\n2,3,2\n");
        assert_eq!(t.search_csv(), "iteration,best_cut\n1,3\n2,3\n");
        assert_eq!(t.final_best_cut(), 3);
    }
}
