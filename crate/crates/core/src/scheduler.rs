//! Per-packet combination assignment.
//!
//! The LP hands back fractions of traffic per path combination; an actual
//! sender deals in whole packets. The discretizer below keeps integer
//! assignment counts as close as possible to the target fractions by always
//! picking the combination whose realized share lags its target the most,
//! so the running counts never drift more than O(1) packets from `N * x`.

use crate::model::{Combination, Network};

/// What the sender should do with one attempt of a packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    /// Hand the packet to the given path.
    Send(usize),
    /// Discard the packet (the attempt maps to the virtual blackhole path).
    Drop,
}

/// Resolve attempt `attempt` (0-based) of a combination into a concrete
/// action. Returns `None` when the combination has no such attempt or when an
/// earlier attempt already discarded the packet — a dropped packet is gone
/// and is never retransmitted.
pub fn next_action(net: &Network, combo: &Combination, attempt: usize) -> Option<Action> {
    let path = combo.path(attempt)?;
    for earlier in 0..attempt {
        let p = combo.path(earlier)?;
        if net.paths()[p].is_blackhole() {
            return None;
        }
    }
    if net.paths()[path].is_blackhole() {
        Some(Action::Drop)
    } else {
        Some(Action::Send(path))
    }
}

/// Running deficit-rounding state over combination targets.
#[derive(Debug, Clone)]
pub struct AssignmentState {
    targets: Vec<f64>,
    counts: Vec<u64>,
    total: u64,
}

impl AssignmentState {
    /// Targets must be non-negative and finite with positive total mass; they
    /// are normalized internally, so a raw LP solution vector works as-is.
    pub fn new(targets: &[f64]) -> Self {
        assert!(!targets.is_empty(), "no combinations to assign");
        assert!(
            targets.iter().all(|t| t.is_finite() && *t >= 0.0),
            "targets must be finite and non-negative"
        );
        let mass: f64 = targets.iter().sum();
        assert!(mass > 0.0, "targets must have positive mass");
        AssignmentState {
            targets: targets.iter().map(|t| t / mass).collect(),
            counts: vec![0; targets.len()],
            total: 0,
        }
    }

    /// Picks the combination for the next packet and records it: the winner
    /// is the combination whose counter, *after* this assignment, would lag
    /// its target the most. Scoring the post-assignment state keeps
    /// zero-target combinations from ever winning a tie (their score is
    /// always >= 1) and makes the first packet go to the largest target.
    /// Remaining ties (within 1e-12) go to the lowest index.
    pub fn select(&mut self) -> usize {
        let total = self.total as f64;
        let mut best = 0;
        let mut best_score = f64::INFINITY;
        for (l, &t) in self.targets.iter().enumerate() {
            let score = (self.counts[l] as f64 + 1.0) - (total + 1.0) * t;
            if score < best_score - 1e-12 {
                best = l;
                best_score = score;
            }
        }
        self.counts[best] += 1;
        self.total += 1;
        best
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }
}
