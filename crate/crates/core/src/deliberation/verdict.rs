use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::DeliberationRecord;
use crate::ensemble::{group_answers, Equivalence};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalVerdict {
    pub final_answer: String,
    pub final_confidence: f64,
    /// Representative answer of each re-vote cluster and its size.
    pub vote_counts: BTreeMap<String, usize>,
    pub supporting_records: Vec<String>,
    /// Mean posterior over every record, kept for comparison.
    pub mean_confidence_all: f64,
}

struct Cluster {
    representative: String,
    members: Vec<usize>,
    mean: f64,
}

/// Majority vote over revised answers. Ties go to the higher mean posterior,
/// then the smaller representative. Returns `None` for no records.
pub fn final_verdict(records: &[DeliberationRecord], equiv: &dyn Equivalence) -> Option<FinalVerdict> {
    if records.is_empty() {
        return None;
    }
    let answers: Vec<&str> = records.iter().map(|r| r.revised_answer.as_str()).collect();
    let clusters: Vec<Cluster> = group_answers(&answers, equiv)
        .into_iter()
        .map(|g| {
            let representative = crate::ensemble::representative(
                g.members.iter().map(|&i| (answers[i], records[i].posterior_confidence)),
            )
            .to_string();
            let mean = crate::ensemble::stable_mean(g.members.iter().map(|&i| records[i].posterior_confidence));
            Cluster { representative, members: g.members, mean }
        })
        .collect();
    let winner = clusters
        .iter()
        .min_by(|a, b| {
            b.members
                .len()
                .cmp(&a.members.len())
                .then(b.mean.total_cmp(&a.mean))
                .then_with(|| a.representative.cmp(&b.representative))
        })
        .expect("at least one cluster");
    let mut vote_counts = BTreeMap::new();
    for c in &clusters {
        *vote_counts.entry(c.representative.clone()).or_insert(0) += c.members.len();
    }
    let mut supporting_records: Vec<String> = winner.members.iter().map(|&i| records[i].agent_id.clone()).collect();
    supporting_records.sort();
    Some(FinalVerdict {
        final_answer: winner.representative.clone(),
        final_confidence: winner.mean,
        vote_counts,
        supporting_records,
        mean_confidence_all: crate::ensemble::stable_mean(records.iter().map(|r| r.posterior_confidence)),
    })
}

