//! Apportioning deliberators to stances.

use serde::{Deserialize, Serialize};

use crate::ensemble::{AgentProfile, Stance};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub agent_id: String,
    pub stance_id: usize,
}

/// Largest-remainder apportionment of `seats` by `weights`. Leftover seats go
/// to the largest fractional remainders, then the larger quota, then input
/// order. Exact integer arithmetic.
pub fn largest_remainder(weights: &[usize], seats: usize) -> Vec<usize> {
    let total: usize = weights.iter().sum();
    if total == 0 || weights.is_empty() {
        return vec![0; weights.len()];
    }
    let mut counts: Vec<usize> = weights.iter().map(|w| w * seats / total).collect();
    let remainders: Vec<usize> = weights.iter().map(|w| w * seats % total).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        remainders[b]
            .cmp(&remainders[a])
            .then(weights[b].cmp(&weights[a]))
            .then(a.cmp(&b))
    });
    let left = seats - counts.iter().sum::<usize>();
    for &i in order.iter().take(left) {
        counts[i] += 1;
    }
    counts
}

/// Hands deliberators to stances in proportion to stage-1 frequency. The
/// first deliberators go to the first stance, and so on, so the result only
/// depends on input order.
pub fn assign_stances(stances: &[Stance], deliberators: &[AgentProfile]) -> Vec<Assignment> {
    let freqs: Vec<usize> = stances.iter().map(|s| s.frequency).collect();
    let counts = largest_remainder(&freqs, deliberators.len());
    debug_assert!(stances.is_empty() || deliberators.is_empty() || counts[0] >= 1);
    let mut agents = deliberators.iter();
    stances
        .iter()
        .zip(counts)
        .flat_map(|(stance, count)| {
            agents
                .by_ref()
                .take(count)
                .map(|a| Assignment { agent_id: a.agent_id.clone(), stance_id: stance.stance_id })
                .collect::<Vec<_>>()
        })
        .collect()
}
