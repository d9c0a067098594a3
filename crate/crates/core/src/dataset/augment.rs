//! Paraphrase augmentation of training examples.

use serde::{Deserialize, Serialize};
use tracing::warn;

use super::example::LabeledExample;
use crate::error::{Error, Result};
use crate::llm::{Paraphraser, ResponseCache};
use crate::text::normalize;

#[derive(Debug, Clone)]
pub struct AugmentOptions {
    pub k: usize,
    /// Maximum concurrent paraphrase requests.
    pub parallelism: usize,
    pub cache: Option<ResponseCache>,
}

impl Default for AugmentOptions {
    fn default() -> Self {
        Self {
            k: 3,
            parallelism: 4,
            cache: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentFailure {
    pub source_id: String,
    /// 1-based variant index, or `None` when the whole request failed.
    pub variant: Option<u8>,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct AugmentOutcome {
    /// Each original followed by its accepted paraphrases, in input order.
    pub examples: Vec<LabeledExample>,
    pub failures: Vec<AugmentFailure>,
}

impl AugmentOutcome {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn failure_summary(&self) -> Option<String> {
        if self.failures.is_empty() {
            return None;
        }
        let whole = self.failures.iter().filter(|f| f.variant.is_none()).count();
        Some(format!(
            "{} paraphrase failures ({} whole requests, {} single variants)",
            self.failures.len(),
            whole,
            self.failures.len() - whole
        ))
    }
}

fn expand_one(
    ex: &LabeledExample,
    paraphraser: &dyn Paraphraser,
    k: usize,
    cache: Option<&ResponseCache>,
) -> (Vec<LabeledExample>, Vec<AugmentFailure>) {
    let mut out = vec![ex.clone()];
    let mut failures = Vec::new();
    if !ex.provenance.is_original() {
        return (out, failures);
    }
    let checksum = paraphraser.prompt_checksum();
    let original = normalize(&ex.text);
    let fail = |variant: Option<u8>, reason: String| {
        warn!(source = %ex.source_id, ?variant, "augmentation skipped: {reason}");
        AugmentFailure {
            source_id: ex.source_id.clone(),
            variant,
            reason,
        }
    };

    let mut slots: Vec<Option<String>> = vec![None; k];
    if let Some(c) = cache {
        for (i, slot) in slots.iter_mut().enumerate() {
            match c.get(&checksum, &ex.text, i as u32 + 1) {
                Ok(hit) => *slot = hit,
                Err(e) => warn!("cache read failed: {e}"),
            }
        }
    }
    let mut fresh = vec![false; k];
    if slots.iter().any(Option::is_none) {
        match paraphraser.paraphrase(&ex.text, k) {
            Ok(variants) if variants.len() >= k => {
                for (i, v) in variants.into_iter().take(k).enumerate() {
                    if slots[i].is_none() {
                        slots[i] = Some(v);
                        fresh[i] = true;
                    }
                }
            }
            Ok(variants) => {
                failures.push(fail(
                    None,
                    format!("paraphraser returned {} of {k} variants", variants.len()),
                ));
                return (out, failures);
            }
            Err(e) => {
                failures.push(fail(None, e.to_string()));
                return (out, failures);
            }
        }
    }

    // A rewrite identical to its source is retried once, then dropped.
    for i in 0..k {
        let is_degenerate = |s: &Option<String>| {
            s.as_deref().map_or(true, |t| {
                let n = normalize(t);
                n.is_empty() || n == original
            })
        };
        if is_degenerate(&slots[i]) {
            slots[i] = match paraphraser.paraphrase(&ex.text, k) {
                Ok(mut v) if v.len() > i => Some(v.swap_remove(i)),
                _ => None,
            };
            fresh[i] = true;
            if is_degenerate(&slots[i]) {
                failures.push(fail(Some(i as u8 + 1), "paraphrase identical to original".into()));
                slots[i] = None;
            }
        }
    }

    for (i, slot) in slots.into_iter().enumerate() {
        let Some(text) = slot else { continue };
        let text = normalize(&text);
        if fresh[i] {
            if let Some(c) = cache {
                if let Err(e) = c.put(&checksum, &ex.text, i as u32 + 1, &text) {
                    warn!("cache write failed: {e}");
                }
            }
        }
        out.push(ex.paraphrase(i as u8 + 1, text));
    }
    (out, failures)
}

/// Adds `k` paraphrases per original example.
///
/// Paraphrases inherit their parent's label and record their variant index.
/// Failed or degenerate paraphrases are skipped and reported in
/// [`AugmentOutcome::failures`]; nothing is substituted for them.
pub fn augment(
    train: &[LabeledExample],
    paraphraser: &dyn Paraphraser,
    options: &AugmentOptions,
) -> Result<AugmentOutcome> {
    if options.k == 0 {
        return Ok(AugmentOutcome {
            examples: train.to_vec(),
            failures: Vec::new(),
        });
    }
    if options.k > u8::MAX as usize {
        return Err(Error::Config(format!("k = {} is too large", options.k)));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.parallelism.max(1))
        .build()
        .map_err(|e| Error::Config(format!("augmentation thread pool: {e}")))?;
    let parts: Vec<(Vec<LabeledExample>, Vec<AugmentFailure>)> = pool.install(|| {
        use rayon::prelude::*;
        train
            .par_iter()
            .map(|ex| expand_one(ex, paraphraser, options.k, options.cache.as_ref()))
            .collect()
    });
    let mut outcome = AugmentOutcome::default();
    for (examples, failures) in parts {
        outcome.examples.extend(examples);
        outcome.failures.extend(failures);
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::example::Provenance;
    use crate::dataset::registry::Task;
    use crate::llm::StubParaphraser;
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn originals(n: usize, label: &str) -> Vec<LabeledExample> {
        (0..n)
            .map(|i| {
                LabeledExample::original(
                    format!("W:1.{i}"),
                    Some("W".into()),
                    format!("The soldiers attacked the town, and passage {i} ends."),
                    Task::Detect,
                    label,
                )
            })
            .collect()
    }

    fn opts(k: usize) -> AugmentOptions {
        AugmentOptions {
            k,
            parallelism: 3,
            cache: None,
        }
    }

    #[test]
    fn quadruples_with_stub() {
        let train = originals(25, "violent");
        let out = augment(&train, &StubParaphraser, &opts(3)).unwrap();
        assert!(out.is_complete());
        assert_eq!(out.examples.len(), 100);
        for chunk in out.examples.chunks(4) {
            assert_eq!(chunk[0].provenance, Provenance::Original);
            for (i, p) in chunk[1..].iter().enumerate() {
                assert_eq!(p.provenance, Provenance::Paraphrase(i as u8 + 1));
                assert_eq!(p.label, chunk[0].label);
                assert_eq!(p.source_id, chunk[0].source_id);
            }
        }
    }

    #[test]
    fn k_zero_is_identity() {
        let train = originals(5, "nonviolent");
        assert_eq!(augment(&train, &StubParaphraser, &opts(0)).unwrap().examples, train);
    }

    struct Echo(AtomicUsize);

    impl Paraphraser for Echo {
        fn paraphrase(&self, text: &str, k: usize) -> Result<Vec<String>> {
            self.0.fetch_add(1, Ordering::SeqCst);
            let mut v: Vec<String> = (1..=k).map(|i| format!("variant {i} of {text}")).collect();
            v[1] = format!("  {text} ");
            Ok(v)
        }
        fn prompt_checksum(&self) -> String {
            "echo".into()
        }
    }

    #[test]
    fn identical_paraphrase_retried_once_then_skipped() {
        let p = Echo(AtomicUsize::new(0));
        let out = augment(&originals(1, "violent"), &p, &opts(3)).unwrap();
        assert_eq!(out.examples.len(), 3);
        assert_eq!(out.failures.len(), 1);
        assert_eq!(out.failures[0].variant, Some(2));
        assert_eq!(p.0.load(Ordering::SeqCst), 2);
    }

    struct Broken;

    impl Paraphraser for Broken {
        fn paraphrase(&self, text: &str, _k: usize) -> Result<Vec<String>> {
            if text.contains("1.3") || text.contains("passage 3") {
                Err(Error::Client("HTTP 500".into()))
            } else {
                StubParaphraser.paraphrase(text, 3)
            }
        }
        fn prompt_checksum(&self) -> String {
            "broken".into()
        }
    }

    #[test]
    fn hard_failure_gives_partial_result() {
        let out = augment(&originals(5, "violent"), &Broken, &opts(3)).unwrap();
        assert_eq!(out.examples.len(), 5 + 4 * 3);
        assert_eq!(out.failures.len(), 1);
        assert!(out.failure_summary().unwrap().contains("1 whole"));
    }

    #[test]
    fn cache_makes_second_run_call_free() {
        let dir = tempfile::tempdir().unwrap();
        let cache = ResponseCache::new(dir.path()).unwrap();
        struct Counting(AtomicUsize);
        impl Paraphraser for Counting {
            fn paraphrase(&self, text: &str, k: usize) -> Result<Vec<String>> {
                self.0.fetch_add(1, Ordering::SeqCst);
                StubParaphraser.paraphrase(text, k)
            }
            fn prompt_checksum(&self) -> String {
                "counting".into()
            }
        }
        let p = Counting(AtomicUsize::new(0));
        let o = AugmentOptions {
            k: 3,
            parallelism: 2,
            cache: Some(cache),
        };
        let train = originals(4, "violent");
        let a = augment(&train, &p, &o).unwrap();
        assert_eq!(p.0.load(Ordering::SeqCst), 4);
        let b = augment(&train, &p, &o).unwrap();
        assert_eq!(p.0.load(Ordering::SeqCst), 4);
        assert_eq!(a.examples, b.examples);
    }
}
