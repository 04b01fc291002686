//! Grouping stage-1 votes into stances.

use serde::{Deserialize, Serialize};

use super::judge::{group_answers, Equivalence};
use super::{EnsembleError, Stage1Record};

/// A semantically unique answer with its supporters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stance {
    pub stance_id: usize,
    pub representative_answer: String,
    /// Supporters' answers, sorted.
    pub member_answers: Vec<String>,
    /// Supporting agent ids, sorted.
    pub supporters: Vec<String>,
    pub frequency: usize,
    pub mean_confidence: f64,
}

/// Answer of the most confident member; ties go to the lexicographically
/// smallest answer.
pub(crate) fn representative<'a>(members: impl IntoIterator<Item = (&'a str, f64)>) -> &'a str {
    members
        .into_iter()
        .reduce(|best, cur| match cur.1.total_cmp(&best.1) {
            std::cmp::Ordering::Greater => cur,
            std::cmp::Ordering::Equal if cur.0 < best.0 => cur,
            _ => best,
        })
        .map_or("", |(a, _)| a)
}

/// Order-independent mean: sums in sorted order.
pub(crate) fn stable_mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.into_iter().collect();
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    v.iter().sum::<f64>() / v.len() as f64
}

/// Clusters answered records into stances ordered by frequency, then mean
/// confidence, then representative answer.
pub fn cluster_stances(records: &[Stage1Record], equiv: &dyn Equivalence) -> Result<Vec<Stance>, EnsembleError> {
    let answered: Vec<&Stage1Record> = records.iter().filter(|r| r.answered()).collect();
    if answered.is_empty() {
        return Err(EnsembleError::AllAbstained);
    }
    let answers: Vec<&str> = answered.iter().map(|r| r.stance.answer.as_str()).collect();
    let mut stances: Vec<Stance> = group_answers(&answers, equiv)
        .into_iter()
        .map(|group| {
            let members: Vec<&Stage1Record> = group.members.iter().map(|&i| answered[i]).collect();
            let mut member_answers: Vec<String> = members.iter().map(|r| r.stance.answer.clone()).collect();
            member_answers.sort();
            let mut supporters: Vec<String> = members.iter().map(|r| r.agent_id.clone()).collect();
            supporters.sort();
            Stance {
                stance_id: 0,
                representative_answer: representative(
                    members.iter().map(|r| (r.stance.answer.as_str(), r.confidence_value())),
                )
                .to_string(),
                member_answers,
                supporters,
                frequency: members.len(),
                mean_confidence: stable_mean(members.iter().map(|r| r.confidence_value())),
            }
        })
        .collect();
    stances.sort_by(|a, b| {
        b.frequency
            .cmp(&a.frequency)
            .then(b.mean_confidence.total_cmp(&a.mean_confidence))
            .then_with(|| a.representative_answer.cmp(&b.representative_answer))
    });
    for (i, s) in stances.iter_mut().enumerate() {
        s.stance_id = i;
    }
    Ok(stances)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::confidence::RawConfidence;
    use crate::ensemble::Skill;
    use crate::prompts::ParsedStance;
    use crate::text::normalize_answer;

    fn rec(id: &str, answer: Option<&str>, c: f64) -> Stage1Record {
        Stage1Record {
            agent_id: id.into(),
            backbone: "b".into(),
            skill: Skill::Cot,
            stance: ParsedStance {
                answer: answer.unwrap_or("").into(),
                confidence: Some(c),
                abstained: answer.is_none(),
                aux_ratings: None,
            },
            confidence: answer.map(|_| RawConfidence::verbalized(c)),
            error: None,
        }
    }

    fn exact(a: &str, b: &str) -> bool {
        normalize_answer(a) == normalize_answer(b)
    }

    #[test]
    fn exact_duplicates() {
        let s = cluster_stances(&[rec("a", Some("42"), 0.5), rec("b", Some("42"), 0.5), rec("c", Some("41"), 0.5)], &exact).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!((s[0].representative_answer.as_str(), s[0].frequency), ("42", 2));
        assert_eq!((s[1].representative_answer.as_str(), s[1].frequency), ("41", 1));
    }

    #[test]
    fn mocked_judge_merges_pair() {
        let judge = |a: &str, b: &str| {
            let mut p = [a, b];
            p.sort();
            p == ["Neon (Ne)", "neon"] || a == b
        };
        let s = cluster_stances(
            &[rec("a", Some("neon"), 0.9), rec("b", Some("Neon (Ne)"), 0.7), rec("c", Some("argon"), 0.8)],
            &judge,
        )
        .unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].frequency, 2);
        assert_eq!(s[0].representative_answer, "neon");
        assert_eq!(s[0].member_answers, vec!["Neon (Ne)".to_string(), "neon".to_string()]);
    }

    #[test]
    fn mean_confidence_within_stance() {
        let s = cluster_stances(&[rec("a", Some("x"), 0.6), rec("b", Some("x"), 0.8)], &exact).unwrap();
        assert!((s[0].mean_confidence - 0.7).abs() < 1e-12);
    }

    #[test]
    fn representative_ties_prefer_smallest() {
        let s = cluster_stances(&[rec("a", Some("Neon"), 0.8), rec("b", Some("neon"), 0.8)], &exact).unwrap();
        assert_eq!(s[0].representative_answer, "Neon");
    }

    #[test]
    fn abstentions_excluded_and_conserved() {
        let recs = [rec("a", Some("x"), 0.6), rec("b", None, 0.0), rec("c", Some("y"), 0.8)];
        let s = cluster_stances(&recs, &exact).unwrap();
        let abstained = recs.iter().filter(|r| !r.answered()).count();
        assert_eq!(s.iter().map(|s| s.frequency).sum::<usize>() + abstained, recs.len());
        assert_eq!(s[0].representative_answer, "y");
    }

    #[test]
    fn all_abstained_is_error() {
        assert_eq!(cluster_stances(&[rec("a", None, 0.0)], &exact), Err(EnsembleError::AllAbstained));
    }
}
