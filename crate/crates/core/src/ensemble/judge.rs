//! Answer equivalence and union-find grouping.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use tracing::warn;

use crate::backend::CallKind;
use crate::dataset::{Question, ReferenceAnswerSet};
use crate::prompts::{names, parse_yes_no};
use crate::runtime::{Call, Runtime};
use crate::text::normalize_answer;

/// A symmetric yes/no relation over answer strings.
pub trait Equivalence {
    fn equivalent(&self, a: &str, b: &str) -> bool;
}

impl<F: Fn(&str, &str) -> bool> Equivalence for F {
    fn equivalent(&self, a: &str, b: &str) -> bool {
        self(a, b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JudgeMode {
    Llm,
    NormalizedExactMatch,
}

/// Decides whether two answers mean the same thing. Identical normalized
/// strings short-circuit without a model call.
#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceJudge {
    pub mode: JudgeMode,
    /// Backbone answering judge prompts; required in [`JudgeMode::Llm`].
    pub backbone: Option<String>,
}

impl EquivalenceJudge {
    pub fn exact() -> Self {
        Self { mode: JudgeMode::NormalizedExactMatch, backbone: None }
    }

    pub fn llm(backbone: impl Into<String>) -> Self {
        Self { mode: JudgeMode::Llm, backbone: Some(backbone.into()) }
    }

    pub fn bind<'a>(&'a self, rt: &'a Runtime, question: &'a Question) -> BoundJudge<'a> {
        BoundJudge { judge: self, rt, question }
    }

    /// True when `answer` is equivalent to any reference answer.
    pub fn matches_any(&self, rt: &Runtime, question: &Question, answer: &str, references: &ReferenceAnswerSet) -> bool {
        if references.matches_normalized(answer) {
            return true;
        }
        let bound = self.bind(rt, question);
        references.answers().iter().any(|r| bound.equivalent(answer, r))
    }
}

pub struct BoundJudge<'a> {
    judge: &'a EquivalenceJudge,
    rt: &'a Runtime,
    question: &'a Question,
}

impl BoundJudge<'_> {
    fn ask(&self, backbone: &str, a: &str, b: &str) -> Option<bool> {
        // One retry on an unparseable reply, then give up.
        for _ in 0..2 {
            let call = Call::new(backbone, &self.question.id, "judge", CallKind::Judge, names::JUDGE_EQUIVALENCE)
                .var("QUERY", self.question.text.as_str())
                .var("ANSWER-A", a)
                .var("ANSWER-B", b)
                .temperature(self.rt.decoding.judge_temperature);
            match self.rt.invoke(call) {
                Ok(resp) => {
                    if let Some(v) = parse_yes_no(&resp.text) {
                        return Some(v);
                    }
                }
                Err(e) => {
                    warn!(question = %self.question.id, error = %e, "judge call failed");
                    return None;
                }
            }
        }
        None
    }
}

impl Equivalence for BoundJudge<'_> {
    fn equivalent(&self, a: &str, b: &str) -> bool {
        let (na, nb) = (normalize_answer(a), normalize_answer(b));
        if na == nb {
            return true;
        }
        match (self.judge.mode, self.judge.backbone.as_deref()) {
            (JudgeMode::Llm, Some(backbone)) => self.ask(backbone, a, b).unwrap_or_else(|| {
                warn!(question = %self.question.id, a, b, "judge reply unusable; using normalized match");
                false
            }),
            _ => false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), rank: vec![0; n] }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

/// A class of equivalent answers: indices into the input slice.
#[derive(Debug, Clone, PartialEq)]
pub struct AnswerGroup {
    pub members: Vec<usize>,
}

/// Partitions items by answer equivalence, closing the relation transitively.
/// The judge sees unique answers in sorted order, so the result does not
/// depend on input order. Groups come back ordered by their smallest answer.
pub fn group_answers(answers: &[&str], equiv: &dyn Equivalence) -> Vec<AnswerGroup> {
    let mut unique: Vec<&str> = answers.to_vec();
    unique.sort_unstable();
    unique.dedup();

    let mut uf = UnionFind::new(unique.len());
    for i in 0..unique.len() {
        for j in (i + 1)..unique.len() {
            if uf.find(i) != uf.find(j) && equiv.equivalent(unique[i], unique[j]) {
                uf.union(i, j);
            }
        }
    }

    let mut by_root: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut first_unique: BTreeMap<usize, usize> = BTreeMap::new();
    for (item, answer) in answers.iter().enumerate() {
        let u = unique.binary_search(answer).expect("answer is in the unique list");
        let root = uf.find(u);
        let entry = first_unique.entry(root).or_insert(u);
        *entry = (*entry).min(u);
        by_root.entry(root).or_default().push(item);
    }
    let mut groups: Vec<(usize, AnswerGroup)> = by_root
        .into_iter()
        .map(|(root, members)| (first_unique[&root], AnswerGroup { members }))
        .collect();
    groups.sort_by_key(|(first, _)| *first);
    groups.into_iter().map(|(_, g)| g).collect()
}
