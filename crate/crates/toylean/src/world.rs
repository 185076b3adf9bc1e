use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

/// What a matched rule does to the goal it fires on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Effect {
    /// The tactic closes the goal.
    Close,
    /// The tactic succeeds and leaves the goal untouched.
    Noop,
    /// The tactic replaces the goal by these targets (same hypotheses).
    Goals(Vec<String>),
    /// The tactic fails with this message.
    Error(String),
}

/// A scripted tactic outcome. `goal` is the target text (whitespace
/// normalized) or `*`; `tactic` is the tactic text, or a prefix when it
/// ends with `*`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule {
    pub goal: String,
    pub tactic: String,
    /// Hypothesis names that must be in scope for the rule to fire.
    #[serde(default)]
    pub requires: Vec<String>,
    pub effect: Effect,
}

/// One `hint` suggestion. A suggestion with `remaining` goals only makes
/// progress and is printed with a `Remaining subgoals:` trailer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HintEntry {
    Closes(String),
    Progress { tactic: String, remaining: Vec<String> },
}

/// The emulator's knowledge base.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct World {
    #[serde(default)]
    pub rules: Vec<Rule>,
    /// `hint` output keyed by target text.
    #[serde(default)]
    pub hints: BTreeMap<String, Vec<HintEntry>>,
    #[serde(default = "default_modules")]
    pub modules: Vec<String>,
    /// Extra library lemma names that `exact`/`rw` arguments may mention.
    #[serde(default)]
    pub lemmas: Vec<String>,
}

fn default_modules() -> Vec<String> {
    vec!["Mathlib".into(), "Aesop".into(), "Init".into()]
}

impl Default for World {
    fn default() -> Self {
        World { rules: Vec::new(), hints: BTreeMap::new(), modules: default_modules(), lemmas: Vec::new() }
    }
}

impl World {
    pub fn load(path: &Path) -> std::io::Result<World> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    /// Merge another world into this one; its rules are consulted after ours.
    pub fn extend(&mut self, other: World) {
        self.rules.extend(other.rules);
        for (k, v) in other.hints {
            self.hints.entry(k).or_default().extend(v);
        }
        for m in other.modules {
            if !self.modules.contains(&m) {
                self.modules.push(m);
            }
        }
        self.lemmas.extend(other.lemmas);
    }

    pub(crate) fn lookup(&self, target: &str, tactic: &str, hyps: &[&str]) -> Option<&Effect> {
        self.rules
            .iter()
            .find(|r| {
                (r.goal == "*" || r.goal == target)
                    && match r.tactic.strip_suffix('*') {
                        Some(prefix) => tactic.starts_with(prefix),
                        None => r.tactic == tactic,
                    }
                    && r.requires.iter().all(|h| hyps.contains(&h.as_str()))
            })
            .map(|r| &r.effect)
    }
}
