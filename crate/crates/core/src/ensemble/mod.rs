//! Stage 1: expert-agent selection, independent voting and stance clustering.

mod agents;
mod cluster;
mod judge;
mod selection;
mod stage1;

use thiserror::Error;

pub use agents::{AgentProfile, AgentRole, Skill};
pub use cluster::{cluster_stances, Stance};
pub(crate) use cluster::{representative, stable_mean};
pub use judge::{group_answers, AnswerGroup, Equivalence, EquivalenceJudge, JudgeMode, UnionFind};
pub use selection::{select_agents, Selection, SelectionResult, SkillScore, SkillSlots};
pub use stage1::{collect_stage1, run_skill, Stage1Record};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnsembleError {
    #[error("every agent abstained")]
    AllAbstained,
    #[error("no expert agents configured")]
    NoAgents,
    #[error("invalid selection setup: {0}")]
    InvalidSelection(String),
}
