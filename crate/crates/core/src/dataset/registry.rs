//! Closed label sets, one per classification task.
//!
//! Registries ship as tab-separated resource files (`label`, `description`,
//! `status`) and can be replaced by editing a copy on disk and loading it
//! with [`Registries::load_dir`]. Labels are compared in their canonical
//! lowercase form.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The five classification tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Detect,
    Level,
    Context,
    Motive,
    Consequence,
}

impl Task {
    pub const ALL: [Task; 5] = [
        Task::Detect,
        Task::Level,
        Task::Context,
        Task::Motive,
        Task::Consequence,
    ];

    pub const CATEGORIZATION: [Task; 4] =
        [Task::Level, Task::Context, Task::Motive, Task::Consequence];

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Detect => "detect",
            Task::Level => "level",
            Task::Context => "context",
            Task::Motive => "motive",
            Task::Consequence => "consequence",
        }
    }

    pub fn is_categorization(self) -> bool {
        !matches!(self, Task::Detect)
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "detect" => Ok(Task::Detect),
            "level" => Ok(Task::Level),
            "context" => Ok(Task::Context),
            "motive" => Ok(Task::Motive),
            "consequence" => Ok(Task::Consequence),
            other => Err(Error::Validation(format!(
                "unsupported task dimension {other:?}"
            ))),
        }
    }
}

pub const VIOLENT: &str = "violent";
pub const NONVIOLENT: &str = "nonviolent";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelInfo {
    pub name: String,
    pub description: String,
    /// False for labels whose name is not attested in published label lists.
    pub verified: bool,
}

/// Ordered label list for one task. Order matters: ties in argmax and in
/// majority baselines resolve to the earlier label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRegistry {
    pub task: Task,
    labels: Vec<LabelInfo>,
}

impl LabelRegistry {
    pub fn new(task: Task, labels: Vec<LabelInfo>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Validation(format!("registry for {task} is empty")));
        }
        let mut seen = std::collections::HashSet::new();
        for l in &labels {
            if l.name.is_empty() || l.name != l.name.to_lowercase() || l.name.trim() != l.name {
                return Err(Error::Validation(format!(
                    "label {:?} in {task} registry is not canonical lowercase",
                    l.name
                )));
            }
            if !seen.insert(l.name.clone()) {
                return Err(Error::Validation(format!(
                    "duplicate label {:?} in {task} registry",
                    l.name
                )));
            }
        }
        Ok(Self { task, labels })
    }

    /// Builds a registry from bare names (all marked verified).
    pub fn from_names<S: AsRef<str>>(task: Task, names: &[S]) -> Result<Self> {
        let labels = names
            .iter()
            .map(|n| LabelInfo {
                name: n.as_ref().to_string(),
                description: String::new(),
                verified: true,
            })
            .collect();
        Self::new(task, labels)
    }

    pub fn parse_tsv(task: Task, src: &str) -> Result<Self> {
        let mut labels = Vec::new();
        for line in src.lines() {
            let line = line.trim_end();
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split('\t');
            let name = cols.next().unwrap_or_default().trim().to_string();
            let description = cols.next().unwrap_or_default().trim().to_string();
            let verified = !matches!(cols.next().map(str::trim), Some("unverified"));
            labels.push(LabelInfo {
                name,
                description,
                verified,
            });
        }
        Self::new(task, labels)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("# label\tdescription\tstatus\n");
        for l in &self.labels {
            let status = if l.verified { "verified" } else { "unverified" };
            out.push_str(&format!("{}\t{}\t{status}\n", l.name, l.description));
        }
        out
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> + '_ {
        self.labels.iter().map(|l| l.name.as_str())
    }

    pub fn infos(&self) -> &[LabelInfo] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l.name == label)
    }

    pub fn contains(&self, label: &str) -> bool {
        self.index_of(label).is_some()
    }

    pub fn name(&self, idx: usize) -> &str {
        &self.labels[idx].name
    }

    /// Canonicalizes `label` (trim + lowercase) and checks membership.
    pub fn resolve(&self, label: &str) -> Result<String> {
        let canon = label.trim().to_lowercase();
        if self.contains(&canon) {
            Ok(canon)
        } else {
            Err(Error::Validation(format!(
                "label {label:?} is not in the {} registry",
                self.task
            )))
        }
    }
}

const DETECT_TSV: &str = include_str!("../../resources/registries/detect.tsv");
const LEVEL_TSV: &str = include_str!("../../resources/registries/level.tsv");
const CONTEXT_TSV: &str = include_str!("../../resources/registries/context.tsv");
const MOTIVE_TSV: &str = include_str!("../../resources/registries/motive.tsv");
const CONSEQUENCE_TSV: &str = include_str!("../../resources/registries/consequence.tsv");

/// One registry per task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Registries {
    by_task: BTreeMap<Task, LabelRegistry>,
}

impl Default for Registries {
    fn default() -> Self {
        Self::builtin()
    }
}

impl Registries {
    pub fn builtin() -> Self {
        let mut by_task = BTreeMap::new();
        for (task, src) in [
            (Task::Detect, DETECT_TSV),
            (Task::Level, LEVEL_TSV),
            (Task::Context, CONTEXT_TSV),
            (Task::Motive, MOTIVE_TSV),
            (Task::Consequence, CONSEQUENCE_TSV),
        ] {
            let reg = LabelRegistry::parse_tsv(task, src).expect("bundled registry is well-formed");
            by_task.insert(task, reg);
        }
        Self { by_task }
    }

    /// Loads `<task>.tsv` files from `dir`; tasks without a file keep the
    /// bundled registry.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let mut regs = Self::builtin();
        for task in Task::ALL {
            let path = dir.join(format!("{task}.tsv"));
            if path.exists() {
                let src = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                regs.by_task.insert(task, LabelRegistry::parse_tsv(task, &src)?);
            }
        }
        regs.check_detect()?;
        Ok(regs)
    }

    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for reg in self.by_task.values() {
            let path = dir.join(format!("{}.tsv", reg.task));
            std::fs::write(&path, reg.to_tsv()).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }

    fn check_detect(&self) -> Result<()> {
        let detect: Vec<&str> = self.get(Task::Detect).labels().collect();
        if detect != [VIOLENT, NONVIOLENT] {
            return Err(Error::Validation(format!(
                "detect registry must be [violent, nonviolent], got {detect:?}"
            )));
        }
        Ok(())
    }

    pub fn get(&self, task: Task) -> &LabelRegistry {
        &self.by_task[&task]
    }
}
