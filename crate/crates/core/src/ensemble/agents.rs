use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Prompting strategy an agent runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Skill {
    Cot,
    Pot,
    SelfAsk,
    #[serde(rename = "genread")]
    GenRead,
    General,
}

impl Skill {
    /// The expert skills, in registration order.
    pub const EXPERTS: [Skill; 4] = [Skill::Cot, Skill::Pot, Skill::SelfAsk, Skill::GenRead];

    pub fn as_str(self) -> &'static str {
        match self {
            Skill::Cot => "cot",
            Skill::Pot => "pot",
            Skill::SelfAsk => "self_ask",
            Skill::GenRead => "genread",
            Skill::General => "general",
        }
    }
}

impl fmt::Display for Skill {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Skill {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cot" => Ok(Skill::Cot),
            "pot" => Ok(Skill::Pot),
            "self_ask" => Ok(Skill::SelfAsk),
            "genread" => Ok(Skill::GenRead),
            "general" => Ok(Skill::General),
            other => Err(format!("unknown skill `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentRole {
    Expert,
    Deliberator,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentProfile {
    pub agent_id: String,
    /// Name of the backbone in the run's [`crate::Runtime`].
    pub backbone: String,
    pub skill: Skill,
    pub role: AgentRole,
}

impl AgentProfile {
    /// Expert `index` of `skill` on `backbone`, id `<backbone>/<skill>/<index>`.
    pub fn expert(backbone: &str, skill: Skill, index: usize) -> Self {
        assert!(skill != Skill::General, "expert agents need a specialized skill");
        Self {
            agent_id: format!("{backbone}/{}/{index}", skill.as_str()),
            backbone: backbone.to_string(),
            skill,
            role: AgentRole::Expert,
        }
    }

    pub fn deliberator(backbone: &str, index: usize) -> Self {
        Self {
            agent_id: format!("{backbone}/general/{index}"),
            backbone: backbone.to_string(),
            skill: Skill::General,
            role: AgentRole::Deliberator,
        }
    }
}
