//! A deterministic synthetic stand-in for the curated database and the
//! Plutarch source texts.
//!
//! The generated corpus has the published shape: thirteen annotated works
//! with 461 violent and 2103 non-violent sections, a fourteenth work without
//! any events, and 2780 curated events whose dimension labels follow the
//! published class supports. Some events cite works that are not in the
//! corpus and a few cite sections that do not exist, as in the real
//! database.
//!
//! Texts are assembled from templates. Class cues are present but noisy:
//! some violent sections are worded obliquely or not at all, some quiet
//! sections recall violence, and some events carry a level cue of another
//! level. The data exercise the pipeline; they are not the historical
//! record, and model scores on them say nothing about scores on it.

mod templates;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::dataset::{Registries, Task};
use crate::error::{Error, Result};
use crate::ingest::parse_corpus_str;
use crate::store::jsonl::write_jsonl;
use crate::store::{CuratedEvent, Level, Passage, SourceRef};
use templates::*;

pub const FIXTURE_SEED: u64 = 1928;

/// (work, violent sections, non-violent sections).
pub const ANNOTATED_WORKS: &[(&str, usize, usize)] = &[
    ("Alexander", 52, 230),
    ("Agesilaus", 30, 130),
    ("Caesar", 48, 220),
    ("Pompey", 45, 240),
    ("Pericles", 20, 150),
    ("Themistocles", 22, 110),
    ("Lysander", 28, 100),
    ("Sulla", 44, 160),
    ("Marius", 42, 170),
    ("Antony", 40, 220),
    ("Cicero", 30, 190),
    ("Brutus", 30, 110),
    ("Crassus", 30, 73),
];

/// In the corpus, but without curated events.
pub const UNANNOTATED_WORK: (&str, usize) = ("Numa", 60);

/// Cited by events, absent from the corpus.
pub const EXTERNAL_WORKS: &[&str] = &[
    "Thucydides", "Herodotus", "Xenophon", "Polybius", "Livy", "Tacitus", "Diodorus", "Appian",
    "Arrian", "Suetonius",
];

pub const VIOLENT_SECTIONS: usize = 461;
pub const NONVIOLENT_SECTIONS: usize = 2103;
pub const TOTAL_EVENTS: usize = 2780;
/// Extra events on already-violent sections.
pub const DUPLICATE_EVENTS: usize = 159;
pub const SECTION_ABSENT_EVENTS: usize = 12;
pub const WORK_ABSENT_EVENTS: usize =
    TOTAL_EVENTS - VIOLENT_SECTIONS - DUPLICATE_EVENTS - SECTION_ABSENT_EVENTS;

/// Published per-class test supports; the full event set has five times
/// as many.
pub const LEVEL_TEST_SUPPORT: &[(&str, usize)] =
    &[("interpersonal", 96), ("intrasocial", 72), ("intersocial", 371), ("intrapersonal", 17)];
pub const CONTEXT_TEST_SUPPORT: &[(&str, usize)] = &[
    ("civilian", 29), ("jurisdictional", 30), ("war/military campaign", 181), ("battle", 69),
    ("plunder", 17), ("ambush", 15), ("conspiracy", 11), ("revolt", 21), ("conquest", 7),
    ("naval battle", 2), ("religious", 6), ("institutional", 4), ("sack", 1), ("single combat", 4),
    ("siege", 31), ("unknown", 5), ("regicide", 11), ("military", 93), ("entertaining", 7),
    ("mutiny", 8), ("familicide", 2), ("fratricide", 1), ("paramilitary", 1),
];
pub const MOTIVE_TEST_SUPPORT: &[(&str, usize)] = &[
    ("unknown", 20), ("political", 122), ("tactical/strategical", 197), ("economical", 28),
    ("following orders", 77), ("self-defence", 13), ("emotional", 43), ("ambition", 35),
    ("social", 5), ("religious", 6), ("other", 6), ("none/accident", 4),
];
pub const CONSEQUENCE_TEST_SUPPORT: &[(&str, usize)] = &[
    ("unknown", 199), ("campaign", 28), ("conquest", 24), ("coronation/inauguration", 12),
    ("exile", 6), ("death", 32), ("other", 32), ("victory", 16), ("bestowing of honors", 6),
    ("issuing of law/decrees", 3), ("injury", 5), ("battle", 15), ("declaration of war", 2),
    ("retreat", 10), ("mutiny", 2), ("sending of envoys", 13), ("civil conflict/civil war", 1),
    ("tyranny", 2), ("capture", 14), ("destruction/devastation", 26), ("repopulation", 2),
    ("declaration of peace/truce", 9), ("release of prisoners", 2), ("garrisoning of troops", 6),
    ("famine", 1), ("siege", 30), ("deportation", 4), ("treaty/agreement/pact", 3), ("surrender", 2),
    ("financial reward", 3), ("seclusion", 2), ("plunder", 6), ("mutilation", 1), ("revenge", 6),
    ("execution", 4), ("torture", 3), ("applause", 2),
];

pub const CLEITUS_TEXT: &str = "And so, at last, Alexander seized a spear from one of his guards, met Cleitus as he was drawing aside the curtain before the door, and ran him through.";
pub const TISAPHERNES_TEXT: &str = "As a result of this battle, the Greeks could not only harry the country of the King without fear, but had the satisfaction of seeing due punishment inflicted upon Tisaphernes, an abominable man, and most hateful to the Greek race.";

/// Share of events whose level sentence comes from another level.
const LEVEL_CUE_NOISE: f64 = 0.12;
/// Share of events that state each of context, motive and consequence.
const DIMENSION_CUE_RATE: f64 = 0.8;

pub struct Fixture {
    /// Corpus file name to contents, one work per file.
    pub corpus_files: BTreeMap<String, String>,
    pub passages: Vec<Passage>,
    pub events: Vec<CuratedEvent>,
}

pub struct FixturePaths {
    pub corpus_dir: PathBuf,
    pub corpus_files: Vec<PathBuf>,
    pub events: PathBuf,
}

impl Fixture {
    /// Writes `corpus/<Work>.txt` files and `events.jsonl` under `dir`.
    pub fn write(&self, dir: &Path) -> Result<FixturePaths> {
        let corpus_dir = dir.join("corpus");
        std::fs::create_dir_all(&corpus_dir).map_err(|e| Error::io(&corpus_dir, e))?;
        let mut corpus_files = Vec::new();
        for (name, body) in &self.corpus_files {
            let p = corpus_dir.join(name);
            std::fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
            corpus_files.push(p);
        }
        let events = dir.join("events.jsonl");
        write_jsonl(&events, &self.events)?;
        Ok(FixturePaths {
            corpus_dir,
            corpus_files,
            events,
        })
    }

    pub fn passage(&self, work: &str, chapter: u32, section: u32) -> Option<&Passage> {
        let r = SourceRef::new(work, chapter, section).ok()?;
        self.passages.iter().find(|p| p.source == r)
    }
}

/// Label list with the published supports scaled by five. Labels that have
/// no published support get one event each, taken from the largest class.
/// Where the published rows fall short of the stated total (the consequence
/// rows sum to 534 of 556), the gap goes to "unknown".
fn scaled_labels(task: Task, supports: &[(&str, usize)], registries: &Registries) -> Vec<String> {
    let mut counts: BTreeMap<&str, usize> = supports.iter().map(|&(l, n)| (l, 5 * n)).collect();
    let sum: usize = counts.values().sum();
    *counts.entry("unknown").or_default() += TOTAL_EVENTS.saturating_sub(sum);
    for l in registries.get(task).labels() {
        if !counts.contains_key(l) {
            let (&big, _) = counts.iter().max_by_key(|(_, &n)| n).expect("non-empty supports");
            *counts.get_mut(big).unwrap() -= 1;
            counts.insert(l, 1);
        }
    }
    let mut out = Vec::with_capacity(TOTAL_EVENTS);
    for (l, n) in counts {
        out.extend(std::iter::repeat(l.to_owned()).take(n));
    }
    out
}

struct Filler<'r> {
    rng: &'r mut ChaCha8Rng,
    protagonist: &'r str,
}

impl Filler<'_> {
    fn pick<'a>(&mut self, xs: &[&'a str]) -> &'a str {
        xs.choose(self.rng).copied().unwrap_or("")
    }

    fn fill(&mut self, template: &str) -> String {
        let a = if self.rng.gen_bool(0.5) { self.protagonist } else { self.pick(PERSONS) };
        let mut b = self.pick(PERSONS);
        while b == a {
            b = self.pick(PERSONS);
        }
        let p = self.pick(PEOPLES);
        let mut q = self.pick(PEOPLES);
        while q == p {
            q = self.pick(PEOPLES);
        }
        let mut s = template.to_owned();
        for (slot, value) in [
            ("{A}", a),
            ("{B}", b),
            ("{P}", p),
            ("{Q}", q),
            ("{C}", self.pick(PLACES)),
            ("{W}", self.pick(WEAPONS)),
            ("{G}", self.pick(GODS)),
            ("{O}", self.pick(OFFICES)),
            ("{T}", self.pick(TRIFLES)),
        ] {
            s = s.replace(slot, value);
        }
        s
    }

    fn sentences(&mut self, pool: &[&str], n: usize) -> Vec<String> {
        (0..n).map(|_| {
            let t = self.pick(pool);
            self.fill(t)
        }).collect()
    }

    fn framed(&mut self, frames: &[&str], phrase: &str) -> String {
        self.pick(frames).replace("{}", phrase)
    }
}

fn event_text(f: &mut Filler<'_>, level: Level, context: &str, motive: &str, consequence: &str) -> String {
    let cue_level = if f.rng.gen_bool(LEVEL_CUE_NOISE) {
        let others: Vec<Level> = Level::ALL.into_iter().filter(|&l| l != level).collect();
        *others.choose(f.rng).unwrap()
    } else {
        level
    };
    let mut parts = f.sentences(level_templates(cue_level), 1);
    let mut extra = Vec::new();
    if let Some(p) = context_phrase(context).filter(|_| f.rng.gen_bool(DIMENSION_CUE_RATE)) {
        extra.push(f.framed(CONTEXT_FRAMES, p));
    }
    if let Some(p) = motive_phrase(motive).filter(|_| f.rng.gen_bool(DIMENSION_CUE_RATE)) {
        extra.push(f.framed(MOTIVE_FRAMES, p));
    }
    if let Some(p) = consequence_phrase(consequence).filter(|_| f.rng.gen_bool(DIMENSION_CUE_RATE)) {
        extra.push(f.framed(CONSEQUENCE_FRAMES, p));
    }
    extra.shuffle(f.rng);
    parts.extend(extra);
    if f.rng.gen_bool(0.3) {
        parts.extend(f.sentences(FILLER, 1));
    }
    parts.join(" ")
}

fn violent_section_text(f: &mut Filler<'_>, event_text: &str) -> String {
    let roll: f64 = f.rng.gen();
    let mut parts = if roll < 0.8 {
        vec![event_text.to_owned()]
    } else if roll < 0.9 {
        f.sentences(SUBTLE, 1)
    } else {
        // Annotated as violent, but nothing in the wording says so.
        f.sentences(FILLER, 1)
    };
    let n = f.rng.gen_range(0..=2);
    let mut filler = f.sentences(FILLER, n);
    let at = f.rng.gen_range(0..=filler.len());
    filler.splice(at..at, parts.drain(..));
    filler.join(" ")
}

fn quiet_section_text(f: &mut Filler<'_>) -> String {
    let roll: f64 = f.rng.gen();
    let n = f.rng.gen_range(1..=3);
    let mut parts = f.sentences(FILLER, n);
    if roll < 0.08 {
        parts.extend(f.sentences(CONFOUNDERS, 1));
    } else if roll < 0.12 {
        let lead = f.pick(RECOLLECTION);
        let lead = f.fill(lead);
        let level = *Level::ALL.choose(f.rng).unwrap();
        let s = f.sentences(level_templates(level), 1).remove(0);
        let mut cs = s.chars();
        let lowered: String = match cs.next() {
            Some(c) if !s.starts_with("{A}") && c.is_uppercase() && s.starts_with("The ") => {
                c.to_lowercase().chain(cs).collect()
            }
            _ => s.clone(),
        };
        parts.push(format!("{lead}{lowered}"));
    }
    parts.shuffle(f.rng);
    parts.join(" ")
}

/// Chapter sizes summing to `total`, with `min_sizes` forcing chapters to
/// be at least as long as a fixed citation requires.
fn chapter_sizes(rng: &mut ChaCha8Rng, total: usize, min_sizes: &BTreeMap<u32, u32>) -> Vec<u32> {
    let mut sizes = Vec::new();
    let mut left = total;
    while left > 0 {
        let ch = sizes.len() as u32 + 1;
        let mut s = rng.gen_range(3..=7u32);
        if let Some(&m) = min_sizes.get(&ch) {
            s = s.max(m);
        }
        let s = (s as usize).min(left);
        sizes.push(s as u32);
        left -= s;
    }
    sizes
}

/// Generates the corpus and events. Same seed, same bytes.
pub fn generate(seed: u64) -> Result<Fixture> {
    let registries = Registries::builtin();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Dimension labels for all events, shuffled independently; the two
    // named passages take their labels out of the pools first.
    let mut pools: BTreeMap<Task, Vec<String>> = BTreeMap::new();
    let mut levels = Vec::new();
    for &(l, n) in LEVEL_TEST_SUPPORT {
        levels.extend(std::iter::repeat(l.to_owned()).take(5 * n));
    }
    pools.insert(Task::Level, levels);
    pools.insert(Task::Context, scaled_labels(Task::Context, CONTEXT_TEST_SUPPORT, &registries));
    pools.insert(Task::Motive, scaled_labels(Task::Motive, MOTIVE_TEST_SUPPORT, &registries));
    pools.insert(Task::Consequence, scaled_labels(Task::Consequence, CONSEQUENCE_TEST_SUPPORT, &registries));
    let fixed = [
        ("Alexander", 51u32, 5u32, CLEITUS_TEXT, ["interpersonal", "entertaining", "emotional", "death"]),
        ("Agesilaus", 10, 3, TISAPHERNES_TEXT, ["intersocial", "battle", "political", "plunder"]),
    ];
    for (_, _, _, _, labels) in &fixed {
        for (task, label) in Task::CATEGORIZATION.iter().zip(labels) {
            let pool = pools.get_mut(task).unwrap();
            let i = pool.iter().position(|l| l == label).expect("fixed label in pool");
            pool.remove(i);
        }
    }
    for pool in pools.values_mut() {
        assert_eq!(pool.len(), TOTAL_EVENTS - fixed.len());
        pool.shuffle(&mut rng);
    }

    let mut corpus_files = BTreeMap::new();
    let mut drafts: Vec<(SourceRef, [String; 4], String)> = Vec::new();
    let mut violent_refs: Vec<SourceRef> = Vec::new();
    let mut next_label = 0usize;
    let take_labels = |next: &mut usize| -> [String; 4] {
        let i = *next;
        *next += 1;
        [
            pools[&Task::Level][i].clone(),
            pools[&Task::Context][i].clone(),
            pools[&Task::Motive][i].clone(),
            pools[&Task::Consequence][i].clone(),
        ]
    };

    let mut works: Vec<(&str, usize, usize)> = ANNOTATED_WORKS.to_vec();
    works.push((UNANNOTATED_WORK.0, 0, UNANNOTATED_WORK.1));
    for &(work, n_violent, n_quiet) in &works {
        let min_sizes: BTreeMap<u32, u32> = fixed
            .iter()
            .filter(|f| f.0 == work)
            .map(|f| (f.1, f.2))
            .collect();
        let sizes = chapter_sizes(&mut rng, n_violent + n_quiet, &min_sizes);
        let refs: Vec<SourceRef> = sizes
            .iter()
            .enumerate()
            .flat_map(|(ci, &s)| (1..=s).map(move |sec| (ci as u32 + 1, sec)))
            .map(|(ch, sec)| SourceRef::new(work, ch, sec).expect("valid ref"))
            .collect();
        let forced: BTreeSet<SourceRef> = fixed
            .iter()
            .filter(|f| f.0 == work)
            .map(|f| SourceRef::new(f.0, f.1, f.2).unwrap())
            .collect();
        let mut others: Vec<&SourceRef> = refs.iter().filter(|r| !forced.contains(r)).collect();
        others.shuffle(&mut rng);
        let mut violent: BTreeSet<SourceRef> = forced.clone();
        violent.extend(others.into_iter().take(n_violent - forced.len()).cloned());

        let mut body = String::new();
        let mut f = Filler {
            rng: &mut rng,
            protagonist: work,
        };
        for r in &refs {
            body.push_str(&format!("@@ {} {}.{}\n", r.work_id, r.chapter, r.section));
            let text = if let Some(fx) = fixed.iter().find(|fx| SourceRef::new(fx.0, fx.1, fx.2).ok().as_ref() == Some(r)) {
                let labels = fx.4.map(str::to_owned);
                drafts.push((r.clone(), labels, fx.3.to_owned()));
                fx.3.to_owned()
            } else if violent.contains(r) {
                let labels = take_labels(&mut next_label);
                let level: Level = labels[0].parse()?;
                let ev = event_text(&mut f, level, &labels[1], &labels[2], &labels[3]);
                let section = violent_section_text(&mut f, &ev);
                drafts.push((r.clone(), labels, ev));
                section
            } else {
                quiet_section_text(&mut f)
            };
            body.push_str(&text);
            body.push('\n');
        }
        if work == UNANNOTATED_WORK.0 {
            // Two headers without text: parsed, warned about, skipped.
            let last = sizes.len() as u32 + 1;
            body.push_str(&format!("@@ {work} {last}.1\n\n@@ {work} {last}.2\n   \n"));
        }
        violent_refs.extend(violent);
        corpus_files.insert(format!("{work}.txt"), body);
    }
    assert_eq!(drafts.len(), VIOLENT_SECTIONS);

    // Further events on sections that already carry one.
    let mut f = Filler {
        rng: &mut rng,
        protagonist: "Plutarch",
    };
    for _ in 0..DUPLICATE_EVENTS {
        let r = violent_refs.choose(f.rng).unwrap().clone();
        let labels = take_labels(&mut next_label);
        let level: Level = labels[0].parse()?;
        let text = event_text(&mut f, level, &labels[1], &labels[2], &labels[3]);
        drafts.push((r, labels, text));
    }
    // Events citing sections past the end of their work.
    for i in 0..SECTION_ABSENT_EVENTS {
        let (work, _, _) = ANNOTATED_WORKS[i % ANNOTATED_WORKS.len()];
        let r = SourceRef::new(work, 500 + i as u32, 1).unwrap();
        let labels = take_labels(&mut next_label);
        let level: Level = labels[0].parse()?;
        let text = event_text(&mut f, level, &labels[1], &labels[2], &labels[3]);
        drafts.push((r, labels, text));
    }
    // Events from other authors.
    for _ in 0..WORK_ABSENT_EVENTS {
        let work = *EXTERNAL_WORKS.choose(f.rng).unwrap();
        let r = SourceRef::new(work, f.rng.gen_range(1..=120), f.rng.gen_range(1..=12)).unwrap();
        let labels = take_labels(&mut next_label);
        let level: Level = labels[0].parse()?;
        let text = event_text(&mut f, level, &labels[1], &labels[2], &labels[3]);
        drafts.push((r, labels, text));
    }
    assert_eq!(drafts.len(), TOTAL_EVENTS);

    drafts.shuffle(&mut rng);
    let events: Vec<CuratedEvent> = drafts
        .into_iter()
        .enumerate()
        .map(|(i, (source, labels, text))| {
            let mut extras = BTreeMap::new();
            if text == CLEITUS_TEXT {
                extras.insert("year".to_owned(), json!("328 B.C."));
                extras.insert("location".to_owned(), json!("Maracanda (Samarkand)"));
                extras.insert("time_period".to_owned(), json!("Hellenistic Greece"));
                extras.insert("weapon".to_owned(), json!("Spear"));
            }
            let [level, context, motive, consequence] = labels;
            Ok(CuratedEvent {
                id: format!("ev{:05}", i + 1),
                title: format!("{} {}", source, level),
                source,
                translation_text: text,
                level: level.parse()?,
                context,
                motive,
                consequence,
                extras,
            })
        })
        .collect::<Result<_>>()?;

    let mut passages = Vec::new();
    for (name, body) in &corpus_files {
        passages.extend(parse_corpus_str(body, Path::new(name))?.passages);
    }
    passages.sort_by(|a, b| a.source.cmp(&b.source));
    Ok(Fixture {
        corpus_files,
        passages,
        events,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{align_events, detection_pool};

    #[test]
    fn counts_and_determinism() {
        let fx = generate(FIXTURE_SEED).unwrap();
        assert_eq!(fx.events.len(), TOTAL_EVENTS);
        let a = align_events(&fx.events, &fx.passages);
        assert_eq!(a.report.violent_passages, VIOLENT_SECTIONS);
        assert_eq!(a.report.nonviolent_passages, NONVIOLENT_SECTIONS);
        assert_eq!(a.report.matched, VIOLENT_SECTIONS + DUPLICATE_EVENTS);
        let pool = detection_pool(&fx.passages, &a);
        assert_eq!(pool.violent.len(), VIOLENT_SECTIONS);
        assert_eq!(pool.nonviolent.len(), NONVIOLENT_SECTIONS);
        let again = generate(FIXTURE_SEED).unwrap();
        assert_eq!(fx.corpus_files, again.corpus_files);
        assert_eq!(fx.events, again.events);
    }

    #[test]
    fn named_passages_present() {
        let fx = generate(FIXTURE_SEED).unwrap();
        assert_eq!(fx.passage("Alexander", 51, 5).unwrap().text, CLEITUS_TEXT);
        assert_eq!(fx.passage("Agesilaus", 10, 3).unwrap().text, TISAPHERNES_TEXT);
        let cleitus = fx.events.iter().find(|e| e.translation_text == CLEITUS_TEXT).unwrap();
        assert_eq!(cleitus.level, Level::Interpersonal);
        assert_eq!((cleitus.context.as_str(), cleitus.motive.as_str(), cleitus.consequence.as_str()), ("entertaining", "emotional", "death"));
    }

    #[test]
    fn label_distributions() {
        let fx = generate(FIXTURE_SEED).unwrap();
        let regs = Registries::builtin();
        for e in &fx.events {
            e.validate(&regs).unwrap();
        }
        for &(l, n) in LEVEL_TEST_SUPPORT {
            assert_eq!(fx.events.iter().filter(|e| e.level.as_str() == l).count(), 5 * n);
        }
        let ctx: BTreeSet<&str> = fx.events.iter().map(|e| e.context.as_str()).collect();
        assert_eq!(ctx.len(), regs.get(Task::Context).len());
        let cons: BTreeSet<&str> = fx.events.iter().map(|e| e.consequence.as_str()).collect();
        assert_eq!(cons.len(), regs.get(Task::Consequence).len());
    }
}
