use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::dataset::registry::{Registries, Task};
use crate::error::{Error, Result};
use crate::text::normalize;

/// Citation of a section in a source work, e.g. `Alexander 51.5`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SourceRef {
    pub work_id: String,
    pub chapter: u32,
    pub section: u32,
}

impl SourceRef {
    pub fn new(work_id: impl Into<String>, chapter: u32, section: u32) -> Result<Self> {
        let r = Self {
            work_id: work_id.into(),
            chapter,
            section,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if self.work_id.is_empty() || self.work_id.chars().any(char::is_whitespace) {
            return Err(Error::Validation(format!(
                "work id {:?} must be non-empty and contain no whitespace",
                self.work_id
            )));
        }
        if self.chapter == 0 || self.section == 0 {
            return Err(Error::Validation(format!(
                "{self}: chapter and section must be >= 1"
            )));
        }
        Ok(())
    }

    /// Default passage id derived from the citation.
    pub fn passage_id(&self) -> String {
        format!("{}:{}.{}", self.work_id, self.chapter, self.section)
    }
}

impl fmt::Display for SourceRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}.{}", self.work_id, self.chapter, self.section)
    }
}

pub const DEFAULT_LANG: &str = "en";

fn default_lang() -> String {
    DEFAULT_LANG.to_string()
}

/// One section of a source work. Serialized flat, matching the passages
/// JSONL schema `{id, work_id, chapter, section, text, lang}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Passage {
    pub id: String,
    #[serde(flatten)]
    pub source: SourceRef,
    pub text: String,
    #[serde(default = "default_lang")]
    pub lang: String,
}

impl Passage {
    /// Builds a passage with normalized text and the citation-derived id.
    pub fn new(source: SourceRef, text: &str) -> Result<Self> {
        let p = Self {
            id: source.passage_id(),
            source,
            text: normalize(text),
            lang: default_lang(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.source.validate()?;
        if self.id.trim().is_empty() {
            return Err(Error::Validation("passage id is empty".into()));
        }
        if normalize(&self.text).is_empty() {
            return Err(Error::Validation(format!(
                "passage {} has empty text",
                self.id
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Interpersonal,
    Intrapersonal,
    Intersocial,
    Intrasocial,
}

impl Level {
    pub const ALL: [Level; 4] = [
        Level::Interpersonal,
        Level::Intrapersonal,
        Level::Intersocial,
        Level::Intrasocial,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Level::Interpersonal => "interpersonal",
            Level::Intrapersonal => "intrapersonal",
            Level::Intersocial => "intersocial",
            Level::Intrasocial => "intrasocial",
        }
    }
}

impl FromStr for Level {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let canon = s.trim().to_lowercase();
        Level::ALL
            .into_iter()
            .find(|l| l.as_str() == canon)
            .ok_or_else(|| Error::Validation(format!("unknown level {s:?}")))
    }
}

/// A curated database entry. The three free-vocabulary dimensions are
/// plain strings checked against [`Registries`]; everything not modelled
/// (perpetrator, victim, weapon, year...) lives in `extras`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CuratedEvent {
    pub id: String,
    pub title: String,
    #[serde(flatten)]
    pub source: SourceRef,
    pub translation_text: String,
    pub level: Level,
    pub context: String,
    pub motive: String,
    pub consequence: String,
    #[serde(default)]
    pub extras: BTreeMap<String, serde_json::Value>,
}

impl CuratedEvent {
    pub fn validate(&self, registries: &Registries) -> Result<()> {
        self.source.validate()?;
        if self.id.trim().is_empty() {
            return Err(Error::Validation("event id is empty".into()));
        }
        if normalize(&self.translation_text).is_empty() {
            return Err(Error::Validation(format!(
                "event {} has empty translation text",
                self.id
            )));
        }
        for task in Task::CATEGORIZATION {
            let label = self.label(task).unwrap_or_default();
            if !registries.get(task).contains(label) {
                return Err(Error::Validation(format!(
                    "event {}: {task} label {label:?} not in registry",
                    self.id
                )));
            }
        }
        Ok(())
    }

    /// Lowercases the label fields and normalizes the translation text.
    pub fn canonicalize(mut self) -> Self {
        self.translation_text = normalize(&self.translation_text);
        self.context = self.context.trim().to_lowercase();
        self.motive = self.motive.trim().to_lowercase();
        self.consequence = self.consequence.trim().to_lowercase();
        self
    }

    /// Gold label for a categorization task; `None` for detection.
    pub fn label(&self, task: Task) -> Option<&str> {
        match task {
            Task::Detect => None,
            Task::Level => Some(self.level.as_str()),
            Task::Context => Some(&self.context),
            Task::Motive => Some(&self.motive),
            Task::Consequence => Some(&self.consequence),
        }
    }
}

/// A model output awaiting review.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub passage_id: String,
    pub task: Task,
    pub label: String,
    pub score: f64,
    /// Class probabilities in registry order of the producing model.
    #[serde(default)]
    pub probabilities: Vec<f64>,
    #[serde(default)]
    pub truncated: bool,
    pub model_id: String,
    pub created_at: DateTime<Utc>,
}

impl Prediction {
    pub fn validate(&self, registries: &Registries) -> Result<()> {
        if !(0.0..=1.0).contains(&self.score) || self.score.is_nan() {
            return Err(Error::Validation(format!(
                "prediction score {} outside [0, 1]",
                self.score
            )));
        }
        if !registries.get(self.task).contains(&self.label) {
            return Err(Error::Validation(format!(
                "prediction label {:?} not in the {} registry",
                self.label, self.task
            )));
        }
        Ok(())
    }

    /// Shannon entropy (nats) of the probability vector.
    pub fn entropy(&self) -> f64 {
        self.probabilities
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| -p * p.ln())
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Accept,
    Reject,
    Relabel,
}

impl Decision {
    pub fn as_str(self) -> &'static str {
        match self {
            Decision::Accept => "accept",
            Decision::Reject => "reject",
            Decision::Relabel => "relabel",
        }
    }
}

impl FromStr for Decision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "accept" => Ok(Decision::Accept),
            "reject" => Ok(Decision::Reject),
            "relabel" => Ok(Decision::Relabel),
            other => Err(Error::Validation(format!("unknown decision {other:?}"))),
        }
    }
}

/// Verdict as submitted: the verdicts JSONL schema and the HTTP body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictInput {
    pub prediction_id: String,
    pub decision: Decision,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corrected_label: Option<String>,
    pub reviewer: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewVerdict {
    pub id: String,
    pub prediction_id: String,
    pub decision: Decision,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corrected_label: Option<String>,
    pub reviewer: String,
    pub created_at: DateTime<Utc>,
}
