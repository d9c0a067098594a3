use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::store::jsonl::write_atomic;
use crate::text::sha256_hex;

/// One cached model response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheRecord {
    pub prompt_checksum: String,
    pub input_hash: String,
    /// Variant index for multi-output prompts (paraphrase k-index), 0 otherwise.
    #[serde(default)]
    pub variant: u32,
    pub response: String,
}

/// Directory of JSON records keyed by (prompt checksum, input hash, variant).
#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

impl ResponseCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, prompt_checksum: &str, input_hash: &str, variant: u32) -> PathBuf {
        let key = sha256_hex(format!("{prompt_checksum}\0{input_hash}\0{variant}"));
        self.dir.join(format!("{key}.json"))
    }

    pub fn get(&self, prompt_checksum: &str, text: &str, variant: u32) -> Result<Option<String>> {
        let input_hash = sha256_hex(text);
        let path = self.path(prompt_checksum, &input_hash, variant);
        if !path.exists() {
            return Ok(None);
        }
        let raw = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let rec: CacheRecord = serde_json::from_str(&raw)?;
        if rec.prompt_checksum != prompt_checksum || rec.input_hash != input_hash {
            return Ok(None);
        }
        Ok(Some(rec.response))
    }

    pub fn put(&self, prompt_checksum: &str, text: &str, variant: u32, response: &str) -> Result<()> {
        let rec = CacheRecord {
            prompt_checksum: prompt_checksum.to_string(),
            input_hash: sha256_hex(text),
            variant,
            response: response.to_string(),
        };
        let path = self.path(prompt_checksum, &rec.input_hash, variant);
        write_atomic(&path, |w| {
            serde_json::to_writer_pretty(&mut *w, &rec)?;
            Ok(())
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_key_separation() {
        let dir = tempfile::tempdir().unwrap();
        let c = ResponseCache::new(dir.path()).unwrap();
        assert_eq!(c.get("p", "t", 1).unwrap(), None);
        c.put("p", "t", 1, "one").unwrap();
        c.put("p", "t", 2, "two").unwrap();
        c.put("q", "t", 1, "other prompt").unwrap();
        assert_eq!(c.get("p", "t", 1).unwrap().as_deref(), Some("one"));
        assert_eq!(c.get("p", "t", 2).unwrap().as_deref(), Some("two"));
        assert_eq!(c.get("q", "t", 1).unwrap().as_deref(), Some("other prompt"));
        assert_eq!(c.get("p", "u", 1).unwrap(), None);

        let any = std::fs::read_dir(dir.path()).unwrap().next().unwrap().unwrap();
        let rec: CacheRecord =
            serde_json::from_str(&std::fs::read_to_string(any.path()).unwrap()).unwrap();
        assert_eq!(rec.input_hash.len(), 64);
    }
}
