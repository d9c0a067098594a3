use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::store::{CuratedEvent, Passage, SourceRef};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnmatchedEvent {
    pub event_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub matched: usize,
    pub unmatched: Vec<UnmatchedEvent>,
    /// Distinct passages hit by at least one event.
    pub violent_passages: usize,
    /// Remaining passages of works that carry at least one event.
    pub nonviolent_passages: usize,
}

#[derive(Debug, Clone)]
pub struct Alignment {
    pub report: AlignmentReport,
    pub violent_refs: BTreeSet<SourceRef>,
    /// Works with at least one matched event.
    pub annotated_works: BTreeSet<String>,
    /// Event id to the id of the passage it was aligned to.
    pub event_passage: BTreeMap<String, String>,
}

/// Resolves every event's citation against the corpus.
///
/// An event marks exactly the passage named by its own citation; events
/// whose work or section is missing are reported, never guessed.
pub fn align_events(events: &[CuratedEvent], passages: &[Passage]) -> Alignment {
    let by_ref: BTreeMap<&SourceRef, &Passage> = passages.iter().map(|p| (&p.source, p)).collect();
    let works: HashSet<&str> = passages.iter().map(|p| p.source.work_id.as_str()).collect();

    let mut sorted: Vec<&CuratedEvent> = events.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));

    let mut violent_refs = BTreeSet::new();
    let mut annotated_works = BTreeSet::new();
    let mut event_passage = BTreeMap::new();
    let mut unmatched = Vec::new();
    for ev in sorted {
        match by_ref.get(&ev.source) {
            Some(p) => {
                violent_refs.insert(p.source.clone());
                annotated_works.insert(p.source.work_id.clone());
                event_passage.insert(ev.id.clone(), p.id.clone());
            }
            None => {
                let reason = if works.contains(ev.source.work_id.as_str()) {
                    format!("section absent: {}", ev.source)
                } else {
                    format!("work absent: {}", ev.source.work_id)
                };
                unmatched.push(UnmatchedEvent {
                    event_id: ev.id.clone(),
                    reason,
                });
            }
        }
    }
    let nonviolent_passages = passages
        .iter()
        .filter(|p| {
            annotated_works.contains(&p.source.work_id) && !violent_refs.contains(&p.source)
        })
        .count();
    Alignment {
        report: AlignmentReport {
            matched: event_passage.len(),
            unmatched,
            violent_passages: violent_refs.len(),
            nonviolent_passages,
        },
        violent_refs,
        annotated_works,
        event_passage,
    }
}

/// Passages whose citation is not among `violent_refs`, in input order.
pub fn extract_negatives(passages: &[Passage], violent_refs: &BTreeSet<SourceRef>) -> Vec<Passage> {
    passages
        .iter()
        .filter(|p| !violent_refs.contains(&p.source))
        .cloned()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::detection_pool;
    use crate::store::Level;

    fn passage(work: &str, ch: u32, sec: u32) -> Passage {
        Passage::new(SourceRef::new(work, ch, sec).unwrap(), &format!("{work} {ch}.{sec}")).unwrap()
    }

    fn event(id: &str, work: &str, ch: u32, sec: u32) -> CuratedEvent {
        CuratedEvent {
            id: id.into(),
            title: id.into(),
            source: SourceRef::new(work, ch, sec).unwrap(),
            translation_text: "ran him through".into(),
            level: Level::Interpersonal,
            context: "entertaining".into(),
            motive: "emotional".into(),
            consequence: "death".into(),
            extras: Default::default(),
        }
    }

    #[test]
    fn cleitus_event_matches() {
        let ps = vec![passage("Alexander", 51, 4), passage("Alexander", 51, 5)];
        let a = align_events(&[event("e1", "Alexander", 51, 5)], &ps);
        assert_eq!(a.report.matched, 1);
        assert_eq!(a.event_passage["e1"], "Alexander:51.5");
        assert_eq!(a.report.violent_passages, 1);
        assert_eq!(a.report.nonviolent_passages, 1);
    }

    #[test]
    fn absent_work_and_section_reported() {
        let ps = vec![passage("Alexander", 1, 1)];
        let a = align_events(
            &[event("e1", "Tacitus", 1, 1), event("e2", "Alexander", 9, 9)],
            &ps,
        );
        assert_eq!(a.report.matched, 0);
        assert_eq!(a.report.unmatched.len(), 2);
        assert!(a.report.unmatched[0].reason.starts_with("work absent"));
        assert!(a.report.unmatched[1].reason.starts_with("section absent"));
    }

    #[test]
    fn two_events_one_section_dedup() {
        let ps: Vec<_> = (1..=4).map(|s| passage("Caesar", 1, s)).collect();
        let evs = [event("a", "Caesar", 1, 2), event("b", "Caesar", 1, 2)];
        let a = align_events(&evs, &ps);
        // independent count: distinct citations among matched events
        let distinct: BTreeSet<_> = evs.iter().map(|e| e.source.clone()).collect();
        assert_eq!(a.report.matched, 2);
        assert_eq!(a.report.violent_passages, distinct.len());
        assert_eq!(a.report.violent_passages, 1);
    }

    #[test]
    fn negatives_counts() {
        let ps: Vec<_> = (1..=10).map(|s| passage("Numa", 1, s)).collect();
        let refs: BTreeSet<_> = [2, 5, 7].iter().map(|&s| SourceRef::new("Numa", 1, s).unwrap()).collect();
        assert_eq!(extract_negatives(&ps, &refs).len(), 7);
        assert_eq!(extract_negatives(&ps, &BTreeSet::new()), ps);
    }

    #[test]
    fn unannotated_work_excluded_from_pool() {
        let mut ps: Vec<_> = (1..=3).map(|s| passage("Caesar", 1, s)).collect();
        ps.extend((1..=5).map(|s| passage("Numa", 1, s)));
        let a = align_events(&[event("a", "Caesar", 1, 1)], &ps);
        let pool = detection_pool(&ps, &a);
        assert_eq!(pool.violent.len(), 1);
        assert_eq!(pool.nonviolent.len(), 2);
        assert_eq!(a.report.nonviolent_passages, 2);
    }

    #[test]
    fn alignment_is_order_independent() {
        let ps: Vec<_> = (1..=5).map(|s| passage("Caesar", 1, s)).collect();
        let mut evs = vec![event("x", "Caesar", 1, 3), event("a", "Caesar", 1, 1), event("m", "Nope", 1, 1)];
        let a1 = align_events(&evs, &ps);
        evs.reverse();
        let a2 = align_events(&evs, &ps);
        assert_eq!(a1.report, a2.report);
        assert_eq!(a1.event_passage, a2.event_passage);
    }
}
