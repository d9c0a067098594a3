//! Source-corpus parsing, event alignment and negative extraction.

mod align;
mod corpus;

pub use align::{align_events, extract_negatives, Alignment, AlignmentReport, UnmatchedEvent};
pub use corpus::{parse_corpus, parse_corpus_str, ParsedCorpus};

use crate::store::Passage;

/// Violent and non-violent passage pools for the detection task.
#[derive(Debug, Clone)]
pub struct DetectionPool {
    pub violent: Vec<Passage>,
    pub nonviolent: Vec<Passage>,
}

/// Splits passages into the detection pools.
///
/// Negatives are only drawn from works with at least one curated event:
/// an unannotated work says nothing about which of its sections are
/// violent.
pub fn detection_pool(passages: &[Passage], alignment: &Alignment) -> DetectionPool {
    let violent = passages
        .iter()
        .filter(|p| alignment.violent_refs.contains(&p.source))
        .cloned()
        .collect();
    let nonviolent = extract_negatives(passages, &alignment.violent_refs)
        .into_iter()
        .filter(|p| alignment.annotated_works.contains(&p.source.work_id))
        .collect();
    DetectionPool {
        violent,
        nonviolent,
    }
}
