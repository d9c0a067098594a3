use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::registry::{Registries, Task};
use crate::error::{Error, Result};

/// Where an example's text came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Provenance {
    Original,
    /// The k-th paraphrase of the parent, k counted from 1.
    Paraphrase(u8),
}

impl Provenance {
    pub fn is_original(self) -> bool {
        matches!(self, Provenance::Original)
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Original => f.write_str("original"),
            Provenance::Paraphrase(k) => write!(f, "paraphrase:{k}"),
        }
    }
}

impl FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "original" {
            return Ok(Provenance::Original);
        }
        s.strip_prefix("paraphrase:")
            .and_then(|k| k.parse::<u8>().ok())
            .filter(|&k| k >= 1)
            .map(Provenance::Paraphrase)
            .ok_or_else(|| Error::Validation(format!("bad provenance {s:?}")))
    }
}

impl Serialize for Provenance {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Provenance {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A text bound to a task label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledExample {
    /// Unique example id. Originals reuse `source_id`; paraphrases append `#p<k>`.
    pub id: String,
    /// Passage id or event id the example derives from.
    pub source_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub work_id: Option<String>,
    pub text: String,
    pub task: Task,
    pub label: String,
    pub provenance: Provenance,
}

impl LabeledExample {
    pub fn original(
        source_id: impl Into<String>,
        work_id: Option<String>,
        text: impl Into<String>,
        task: Task,
        label: impl Into<String>,
    ) -> Self {
        let source_id = source_id.into();
        Self {
            id: source_id.clone(),
            source_id,
            work_id,
            text: text.into(),
            task,
            label: label.into(),
            provenance: Provenance::Original,
        }
    }

    /// Derives the `k`-th paraphrase of `self`, inheriting label and source.
    pub fn paraphrase(&self, k: u8, text: impl Into<String>) -> Self {
        Self {
            id: format!("{}#p{k}", self.source_id),
            source_id: self.source_id.clone(),
            work_id: self.work_id.clone(),
            text: text.into(),
            task: self.task,
            label: self.label.clone(),
            provenance: Provenance::Paraphrase(k),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Train,
    Test,
}

/// Per-split class counts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitStats {
    pub train: BTreeMap<String, usize>,
    pub test: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub task: Task,
    pub seed: u64,
    pub train: Vec<LabeledExample>,
    pub test: Vec<LabeledExample>,
}

fn class_counts(examples: &[LabeledExample]) -> BTreeMap<String, usize> {
    let mut m = BTreeMap::new();
    for e in examples {
        *m.entry(e.label.clone()).or_default() += 1;
    }
    m
}

impl DatasetSplit {
    pub fn stats(&self) -> SplitStats {
        SplitStats {
            train: class_counts(&self.train),
            test: class_counts(&self.test),
        }
    }

    /// Checks every split invariant: disjoint sources, no paraphrases in
    /// test, every paraphrase next to its parent with the same label, and
    /// registry closure.
    pub fn check_invariants(&self, registries: &Registries) -> Result<()> {
        let registry = registries.get(self.task);
        let train_sources: HashSet<&str> =
            self.train.iter().map(|e| e.source_id.as_str()).collect();
        for e in self.train.iter().chain(&self.test) {
            if e.task != self.task {
                return Err(Error::Validation(format!(
                    "example {} has task {} in a {} split",
                    e.id, e.task, self.task
                )));
            }
            if !registry.contains(&e.label) {
                return Err(Error::Validation(format!(
                    "example {} label {:?} not in registry",
                    e.id, e.label
                )));
            }
        }
        for e in &self.test {
            if !e.provenance.is_original() {
                return Err(Error::Validation(format!("paraphrase {} in test split", e.id)));
            }
            if train_sources.contains(e.source_id.as_str()) {
                return Err(Error::Validation(format!(
                    "source {} appears in both train and test",
                    e.source_id
                )));
            }
        }
        let parents: BTreeMap<&str, &str> = self
            .train
            .iter()
            .filter(|e| e.provenance.is_original())
            .map(|e| (e.source_id.as_str(), e.label.as_str()))
            .collect();
        for e in self.train.iter().filter(|e| !e.provenance.is_original()) {
            match parents.get(e.source_id.as_str()) {
                Some(&label) if label == e.label => {}
                Some(_) => {
                    return Err(Error::Validation(format!(
                        "paraphrase {} label differs from parent",
                        e.id
                    )))
                }
                None => {
                    return Err(Error::Validation(format!(
                        "paraphrase {} has no parent in the same split",
                        e.id
                    )))
                }
            }
        }
        Ok(())
    }

    /// Writes the dataset JSONL: one record per example with split and seed.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for (split, examples) in [(SplitName::Train, &self.train), (SplitName::Test, &self.test)] {
            for e in examples {
                let rec = DatasetRecord {
                    example: e.clone(),
                    split,
                    seed: self.seed,
                };
                serde_json::to_writer(&mut w, &rec)?;
                w.write_all(b"\n").map_err(|e| Error::io("<dataset>", e))?;
            }
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut train = Vec::new();
        let mut test = Vec::new();
        let mut meta: Option<(Task, u64)> = None;
        for (i, line) in r.lines().enumerate() {
            let line = line.map_err(|e| Error::io("<dataset>", e))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: DatasetRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
                file: "<dataset>".into(),
                line: i + 1,
                message: e.to_string(),
            })?;
            match meta {
                None => meta = Some((rec.example.task, rec.seed)),
                Some((task, _)) if task != rec.example.task => {
                    return Err(Error::Validation(format!(
                        "line {}: mixed tasks {task} and {}",
                        i + 1,
                        rec.example.task
                    )))
                }
                _ => {}
            }
            match rec.split {
                SplitName::Train => train.push(rec.example),
                SplitName::Test => test.push(rec.example),
            }
        }
        let (task, seed) =
            meta.ok_or_else(|| Error::Validation("dataset file is empty".into()))?;
        Ok(Self {
            task,
            seed,
            train,
            test,
        })
    }
}

/// One line of a dataset JSONL file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRecord {
    #[serde(flatten)]
    pub example: LabeledExample,
    pub split: SplitName,
    pub seed: u64,
}
