//! Task-level expert selection on a validation split.
//!
//! One candidate agent per (skill, backbone) answers `m` sampled validation
//! questions. Each skill's mean uncertainty-aware calibration score decides
//! whether it survives the threshold and how many of the backbone's slots it
//! gets. Selection runs separately per backbone; the `n` slots are split
//! evenly across backbones first.

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tracing::warn;

use super::{run_skill, AgentProfile, EnsembleError, EquivalenceJudge, Skill};
use crate::confidence::{
    aggregate_and_filter, allocate_slots, mean_calibration_score, ValidationAnswer, ValidationCell,
};
use crate::dataset::DatasetRecord;
use crate::runtime::Runtime;
use crate::seed::rng_for;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillScore {
    pub skill: Skill,
    pub mean_score: f64,
    pub survived: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillSlots {
    pub skill: Skill,
    pub slots: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub backbone: String,
    pub scores: Vec<SkillScore>,
    /// Slots per skill in registration order, summing to `n`.
    pub slots: Vec<SkillSlots>,
    pub tau: f64,
    pub m: usize,
    pub n: usize,
    /// Set when no skill reached `tau` and the best mean score took every slot.
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub per_backbone: Vec<SelectionResult>,
}

/// Evenly splits `n` over `parts`, earlier parts taking the remainder.
fn shares(n: usize, parts: usize) -> Vec<usize> {
    (0..parts).map(|i| n / parts + usize::from(i < n % parts)).collect()
}

impl Selection {
    /// Equal scores for every skill on every backbone; used when selection is
    /// disabled.
    pub fn uniform(skills: &[Skill], backbones: &[String], n: usize) -> Result<Self, EnsembleError> {
        check_setup(skills, backbones, n)?;
        let per_backbone = backbones
            .iter()
            .zip(shares(n, backbones.len()))
            .map(|(bb, share)| {
                let slots = if share == 0 {
                    skills.iter().map(|&skill| SkillSlots { skill, slots: 0 }).collect()
                } else {
                    let flat: Vec<(Skill, f64)> = skills.iter().map(|&s| (s, 0.0)).collect();
                    allocate_slots(&flat, share)
                        .expect("non-empty skills and positive share")
                        .into_iter()
                        .map(|(skill, slots)| SkillSlots { skill, slots })
                        .collect()
                };
                SelectionResult {
                    backbone: bb.clone(),
                    scores: Vec::new(),
                    slots,
                    tau: 0.0,
                    m: 0,
                    n: share,
                    fallback: false,
                }
            })
            .collect();
        Ok(Self { per_backbone })
    }

    pub fn total_slots(&self) -> usize {
        self.per_backbone.iter().flat_map(|r| &r.slots).map(|s| s.slots).sum()
    }

    /// Expert agents realizing the allocation, `<backbone>/<skill>/<k>`.
    pub fn expert_profiles(&self) -> Vec<AgentProfile> {
        self.per_backbone
            .iter()
            .flat_map(|r| {
                r.slots
                    .iter()
                    .flat_map(move |s| (0..s.slots).map(move |k| AgentProfile::expert(&r.backbone, s.skill, k)))
            })
            .collect()
    }
}

fn check_setup(skills: &[Skill], backbones: &[String], n: usize) -> Result<(), EnsembleError> {
    if n == 0 {
        return Err(EnsembleError::InvalidSelection("ensemble size must be at least 1".into()));
    }
    if skills.is_empty() || backbones.is_empty() {
        return Err(EnsembleError::InvalidSelection("need at least one skill and one backbone".into()));
    }
    if let Some(s) = skills.iter().find(|s| **s == Skill::General) {
        return Err(EnsembleError::InvalidSelection(format!("`{s}` is not an expert skill")));
    }
    Ok(())
}

/// Samples `m` validation examples and allocates `n` expert slots.
pub fn select_agents(
    rt: &Runtime,
    validation: &[DatasetRecord],
    skills: &[Skill],
    backbones: &[String],
    m: usize,
    tau: f64,
    n: usize,
    judge: &EquivalenceJudge,
) -> Result<Selection, EnsembleError> {
    check_setup(skills, backbones, n)?;
    if m == 0 || m > validation.len() {
        return Err(EnsembleError::InvalidSelection(format!(
            "need 1 <= m <= {} validation examples, got m = {m}",
            validation.len()
        )));
    }
    let mut rng = rng_for(rt.seed, &["validation-sample"]);
    let mut picked = sample(&mut rng, validation.len(), m).into_vec();
    picked.sort_unstable();
    let examples: Vec<&DatasetRecord> = picked.iter().map(|&i| &validation[i]).collect();

    let mut per_backbone = Vec::with_capacity(backbones.len());
    for (bb, share) in backbones.iter().zip(shares(n, backbones.len())) {
        let candidates: Vec<AgentProfile> = skills
            .iter()
            .map(|&skill| {
                let mut p = AgentProfile::expert(bb, skill, 0);
                p.agent_id = format!("{bb}/{skill}/candidate");
                p
            })
            .collect();
        let jobs: Vec<(usize, usize)> =
            (0..candidates.len()).flat_map(|a| (0..examples.len()).map(move |e| (a, e))).collect();
        let cells: Vec<ValidationCell> = jobs
            .par_iter()
            .map(|&(a, e)| {
                let record = examples[e];
                let question = record.question();
                match run_skill(rt, &candidates[a], &question) {
                    Ok((stance, Some(confidence))) if !stance.abstained => {
                        let is_correct = judge.matches_any(rt, &question, &stance.answer, &record.references());
                        ValidationCell {
                            agent_index: a,
                            example_index: e,
                            answer: ValidationAnswer::Answer(stance.answer),
                            confidence,
                            is_correct,
                        }
                    }
                    Ok(_) => ValidationCell::abstain(a, e),
                    Err(err) => {
                        warn!(agent = %candidates[a].agent_id, question = %record.id, error = %err, "validation call failed; abstaining");
                        ValidationCell::abstain(a, e)
                    }
                }
            })
            .collect();

        let mut scores = Vec::with_capacity(skills.len());
        let mut surviving = Vec::new();
        for (a, &skill) in skills.iter().enumerate() {
            let own: Vec<ValidationCell> = cells.iter().filter(|c| c.agent_index == a).cloned().collect();
            let kept = aggregate_and_filter(&own, tau);
            if let Some(score) = kept {
                surviving.push((skill, score));
            }
            scores.push(SkillScore { skill, mean_score: mean_calibration_score(&own), survived: kept.is_some() });
        }

        let mut fallback = false;
        let allocation: Vec<(Skill, usize)> = if share == 0 {
            skills.iter().map(|&s| (s, 0)).collect()
        } else if surviving.is_empty() {
            fallback = true;
            let best = scores
                .iter()
                .reduce(|best, s| if s.mean_score > best.mean_score { s } else { best })
                .map(|s| s.skill)
                .expect("at least one skill");
            warn!(backbone = %bb, tau, best = %best, "no skill reached the threshold; giving all slots to the best");
            skills.iter().map(|&s| (s, if s == best { share } else { 0 })).collect()
        } else {
            let allocated = allocate_slots(&surviving, share).expect("survivors and positive share");
            skills
                .iter()
                .map(|&s| (s, allocated.iter().find(|(k, _)| *k == s).map_or(0, |(_, n)| *n)))
                .collect()
        };

        per_backbone.push(SelectionResult {
            backbone: bb.clone(),
            scores,
            slots: allocation.into_iter().map(|(skill, slots)| SkillSlots { skill, slots }).collect(),
            tau,
            m,
            n: share,
            fallback,
        });
    }
    Ok(Selection { per_backbone })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shares_split_evenly() {
        assert_eq!(shares(6, 3), vec![2, 2, 2]);
        assert_eq!(shares(7, 3), vec![3, 2, 2]);
        assert_eq!(shares(1, 2), vec![1, 0]);
    }

    #[test]
    fn uniform_selection_over_two_backbones() {
        let sel = Selection::uniform(&[Skill::Cot, Skill::Pot], &["a".into(), "b".into()], 6).unwrap();
        assert_eq!(sel.total_slots(), 6);
        let ids: Vec<String> = sel.expert_profiles().into_iter().map(|p| p.agent_id).collect();
        assert_eq!(ids, vec!["a/cot/0", "a/cot/1", "a/pot/0", "b/cot/0", "b/cot/1", "b/pot/0"]);
    }

    #[test]
    fn general_is_not_selectable() {
        assert!(Selection::uniform(&[Skill::General], &["a".into()], 6).is_err());
    }
}
