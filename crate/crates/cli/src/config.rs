//! Run configuration file.
//!
//! A TOML file with optional top-level paths and one table per stage.
//! Every key is optional; command-line flags override file values, which
//! override built-in defaults. Unknown keys are rejected so typos surface.
//!
//! ```toml
//! db = "polemos.sqlite"
//! models_dir = "models"
//! artifacts_dir = "artifacts"
//! runs_dir = "runs"
//! registries_dir = "registries"   # <task>.tsv overrides
//! seed = 13
//!
//! [dataset]
//! test_size = 500
//! train_frac = 0.8
//!
//! [augment]
//! k = 3
//! parallelism = 4
//! paraphraser = "stub"            # or "llm"
//! cache_dir = ".cache/paraphrases"
//!
//! [llm]
//! model_name = "gpt-4o-mini"
//! base_url = "https://api.openai.com/v1"
//! api_key_env = "POLEMOS_LLM_API_KEY"
//! requests_per_minute = 500
//!
//! [train]                         # any training setting
//! epochs = 20
//! learning_rate = 4.0
//! ```

use std::path::{Path, PathBuf};

use polemos_core::llm::HttpConfig;
use polemos_core::models::TrainConfig;
use polemos_core::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub db: Option<PathBuf>,
    pub models_dir: Option<PathBuf>,
    pub artifacts_dir: Option<PathBuf>,
    pub runs_dir: Option<PathBuf>,
    pub registries_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub dataset: DatasetSection,
    pub augment: AugmentSection,
    pub llm: LlmSection,
    pub train: Option<TrainConfig>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    pub test_size: Option<usize>,
    pub train_frac: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentSection {
    pub k: Option<usize>,
    pub parallelism: Option<usize>,
    pub paraphraser: Option<String>,
    pub cache_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmSection {
    pub model_name: Option<String>,
    pub base_url: Option<String>,
    pub api_key_env: Option<String>,
    pub requests_per_minute: Option<f64>,
    pub burst: Option<u32>,
    pub timeout_secs: Option<u64>,
}

impl LlmSection {
    pub fn http_config(&self) -> HttpConfig {
        let d = HttpConfig::default();
        HttpConfig {
            base_url: self.base_url.clone().unwrap_or(d.base_url),
            api_key_env: self.api_key_env.clone().unwrap_or(d.api_key_env),
            requests_per_minute: self.requests_per_minute.unwrap_or(d.requests_per_minute),
            burst: self.burst.unwrap_or(d.burst),
            timeout_secs: self.timeout_secs.unwrap_or(d.timeout_secs),
            ..d
        }
    }
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let src = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::parse(&src, path)
    }

    pub fn parse(src: &str, origin: &Path) -> Result<Self> {
        toml::from_str(src).map_err(|e| Error::Parse {
            file: origin.to_path_buf(),
            line: e
                .span()
                .map(|s| src[..s.start].matches('\n').count() + 1)
                .unwrap_or(0),
            message: e.message().to_string(),
        })
    }
}

/// Flag value if given, else file value, else the default.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn documented_example_parses() {
        let doc: String = include_str!("config.rs")
            .lines()
            .skip_while(|l| !l.starts_with("//! ```toml"))
            .skip(1)
            .take_while(|l| !l.starts_with("//! ```"))
            .map(|l| l.trim_start_matches("//!").trim_start())
            .map(|l| format!("{l}\n"))
            .collect();
        let c = FileConfig::parse(&doc, Path::new("doc.toml")).unwrap();
        assert_eq!(c.augment.k, Some(3));
        assert_eq!(c.train.as_ref().unwrap().epochs, 20);
        assert_eq!(c.llm.http_config().requests_per_minute, 500.0);
    }

    #[test]
    fn unknown_keys_are_rejected_with_line() {
        let err = FileConfig::parse("seed = 1\n[augment]\nkk = 3\n", Path::new("c.toml")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
        assert!(FileConfig::parse("[train]\nepoch = 3\n", Path::new("c.toml")).is_err());
    }

    #[test]
    fn flags_win() {
        assert_eq!(pick(Some(1), Some(2), 3), 1);
        assert_eq!(pick(None, Some(2), 3), 2);
        assert_eq!(pick(None, None, 3), 3);
    }
}
