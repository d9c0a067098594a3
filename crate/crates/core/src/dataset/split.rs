//! Deterministic train/test splits.
//!
//! Both splits allocate integer quotas with the largest-remainder method
//! (exact integer arithmetic, ties to the earlier stratum) and then draw
//! members from each stratum with a seeded ChaCha shuffle over items sorted
//! by id, so the same inputs and seed always yield the same split.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::example::{DatasetSplit, LabeledExample};
use super::registry::{Task, NONVIOLENT, VIOLENT};
use crate::error::{Error, Result};
use crate::store::{CuratedEvent, Passage};

pub const DEFAULT_SEED: u64 = 13;

/// Held-out test composition for detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionSplitConfig {
    pub test_violent: usize,
    pub test_nonviolent: usize,
    pub seed: u64,
}

impl Default for DetectionSplitConfig {
    fn default() -> Self {
        Self {
            test_violent: 129,
            test_nonviolent: 371,
            seed: DEFAULT_SEED,
        }
    }
}

impl DetectionSplitConfig {
    /// Scales the default 129/371 test composition to `test_size` items.
    pub fn with_test_size(test_size: usize, seed: u64) -> Self {
        let d = Self::default();
        let q = largest_remainder(test_size, &[d.test_violent, d.test_nonviolent]);
        Self {
            test_violent: q[0],
            test_nonviolent: q[1],
            seed,
        }
    }

    pub fn test_size(&self) -> usize {
        self.test_violent + self.test_nonviolent
    }
}

/// Splits `total` units across strata proportionally to `weights`.
///
/// Every stratum gets the floor of its exact share; the leftover units go
/// to the largest fractional parts, earlier strata first on ties. The
/// result sums to `total` whenever some weight is positive, and no stratum
/// deviates from its exact share by one unit or more.
pub fn largest_remainder(total: usize, weights: &[usize]) -> Vec<usize> {
    let sum: usize = weights.iter().sum();
    if sum == 0 {
        return vec![0; weights.len()];
    }
    let (total, sum) = (total as u128, sum as u128);
    let mut alloc: Vec<usize> = Vec::with_capacity(weights.len());
    let mut rema: Vec<(u128, usize)> = Vec::with_capacity(weights.len());
    for (i, &w) in weights.iter().enumerate() {
        let num = total * w as u128;
        alloc.push((num / sum) as usize);
        rema.push((num % sum, i));
    }
    let assigned: usize = alloc.iter().sum();
    let left = total as usize - assigned;
    rema.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, i) in rema.iter().take(left) {
        alloc[i] += 1;
    }
    alloc
}

/// Rounds real-valued shares to integers summing to the rounded total,
/// each within one unit of its share (largest remainder on the fractions).
fn round_shares(shares: &[f64]) -> Vec<usize> {
    let total = shares.iter().sum::<f64>().round() as usize;
    let mut alloc: Vec<usize> = shares.iter().map(|s| (s + 1e-9).floor() as usize).collect();
    let mut fracs: Vec<(f64, usize)> = shares
        .iter()
        .zip(&alloc)
        .enumerate()
        .map(|(i, (s, &a))| (s - a as f64, i))
        .collect();
    fracs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let left = total.saturating_sub(alloc.iter().sum());
    for &(_, i) in fracs.iter().take(left) {
        alloc[i] += 1;
    }
    alloc
}

fn stratified_pick<T, K: Ord + Clone>(
    items: Vec<T>,
    quota: usize,
    key: impl Fn(&T) -> K,
    id: impl Fn(&T) -> &str,
    rng: &mut ChaCha8Rng,
) -> (Vec<T>, Vec<T>) {
    let mut strata: BTreeMap<K, Vec<T>> = BTreeMap::new();
    for it in items {
        strata.entry(key(&it)).or_default().push(it);
    }
    let weights: Vec<usize> = strata.values().map(Vec::len).collect();
    let quotas = largest_remainder(quota, &weights);
    let mut picked = Vec::new();
    let mut rest = Vec::new();
    for (mut group, q) in strata.into_values().zip(quotas) {
        group.sort_by(|a, b| id(a).cmp(id(b)));
        let mut order: Vec<usize> = (0..group.len()).collect();
        order.shuffle(rng);
        let chosen: std::collections::HashSet<usize> = order.into_iter().take(q).collect();
        for (i, it) in group.into_iter().enumerate() {
            if chosen.contains(&i) {
                picked.push(it);
            } else {
                rest.push(it);
            }
        }
    }
    (picked, rest)
}

/// Builds the held-out detection test set and the remaining training pool.
///
/// Within each class the test quota is spread over works in proportion to
/// that class's per-work counts.
pub fn make_detection_split(
    violent: &[Passage],
    nonviolent: &[Passage],
    config: &DetectionSplitConfig,
) -> Result<DatasetSplit> {
    if violent.len() < config.test_violent || nonviolent.len() < config.test_nonviolent {
        return Err(Error::Config(format!(
            "detection split needs at least {} violent and {} non-violent passages, got {} and {}",
            config.test_violent,
            config.test_nonviolent,
            violent.len(),
            nonviolent.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut test = Vec::new();
    let mut train = Vec::new();
    for (pool, quota, label) in [
        (violent, config.test_violent, VIOLENT),
        (nonviolent, config.test_nonviolent, NONVIOLENT),
    ] {
        let (picked, rest) = stratified_pick(
            pool.to_vec(),
            quota,
            |p: &Passage| p.source.work_id.clone(),
            |p: &Passage| p.id.as_str(),
            &mut rng,
        );
        let to_example = |p: Passage| {
            LabeledExample::original(p.id, Some(p.source.work_id), p.text, Task::Detect, label)
        };
        test.extend(picked.into_iter().map(to_example));
        train.extend(rest.into_iter().map(to_example));
    }
    test.sort_by(|a, b| a.id.cmp(&b.id));
    train.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(DatasetSplit {
        task: Task::Detect,
        seed: config.seed,
        train,
        test,
    })
}

/// Stratified-by-label split of curated events for one categorization task.
///
/// Labels with fewer than two events go entirely to train. The overall test
/// size is the rounded test share of the remaining events, spread over
/// labels by largest remainder.
pub fn make_categorization_split(
    events: &[CuratedEvent],
    task: Task,
    train_frac: f64,
    seed: u64,
) -> Result<DatasetSplit> {
    if !task.is_categorization() {
        return Err(Error::Config(format!("{task} is not a categorization task")));
    }
    if events.is_empty() {
        return Err(Error::Config("no events to split".into()));
    }
    if !(0.0..=1.0).contains(&train_frac) {
        return Err(Error::Config(format!("train_frac {train_frac} outside [0, 1]")));
    }
    let mut by_label: BTreeMap<&str, Vec<&CuratedEvent>> = BTreeMap::new();
    for ev in events {
        let label = ev
            .label(task)
            .filter(|l| !l.is_empty())
            .ok_or_else(|| Error::Config(format!("event {} has no {task} label", ev.id)))?;
        by_label.entry(label).or_default().push(ev);
    }
    let shares: Vec<f64> = by_label
        .values()
        .map(|v| if v.len() >= 2 { v.len() as f64 * (1.0 - train_frac) } else { 0.0 })
        .collect();
    let quotas = round_shares(&shares);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for ((label, mut group), q) in by_label.into_iter().zip(quotas) {
        group.sort_by(|a, b| a.id.cmp(&b.id));
        let mut order: Vec<usize> = (0..group.len()).collect();
        order.shuffle(&mut rng);
        let chosen: std::collections::HashSet<usize> = order.into_iter().take(q).collect();
        for (i, ev) in group.into_iter().enumerate() {
            let ex = LabeledExample::original(
                ev.id.clone(),
                Some(ev.source.work_id.clone()),
                ev.translation_text.clone(),
                task,
                label,
            );
            if chosen.contains(&i) {
                test.push(ex);
            } else {
                train.push(ex);
            }
        }
    }
    test.sort_by(|a, b| a.id.cmp(&b.id));
    train.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(DatasetSplit {
        task,
        seed,
        train,
        test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::registry::Registries;
    use crate::store::{Level, SourceRef};
    use proptest::prelude::*;

    fn passages(work: &str, n: u32, tag: &str) -> Vec<Passage> {
        (1..=n)
            .map(|s| {
                Passage::new(SourceRef::new(work, 1, s).unwrap(), &format!("{tag} {work} {s}"))
                    .unwrap()
            })
            .collect()
    }

    fn event(id: usize, context: &str) -> CuratedEvent {
        CuratedEvent {
            id: format!("ev{id:05}"),
            title: String::new(),
            source: SourceRef::new("Thucydides", 1, id as u32 + 1).unwrap(),
            translation_text: format!("event {id}"),
            level: Level::Intersocial,
            context: context.into(),
            motive: "political".into(),
            consequence: "death".into(),
            extras: Default::default(),
        }
    }

    #[test]
    fn largest_remainder_examples() {
        assert_eq!(largest_remainder(500, &[129, 371]), vec![129, 371]);
        assert_eq!(largest_remainder(10, &[1, 1, 1]), vec![4, 3, 3]);
        assert_eq!(largest_remainder(0, &[5, 5]), vec![0, 0]);
        assert_eq!(largest_remainder(3, &[0, 0]), vec![0, 0]);
    }

    #[test]
    fn work_without_violence_contributes_nothing() {
        let mut violent = passages("Caesar", 20, "v");
        violent.extend(passages("Pompey", 10, "v"));
        let mut nonviolent = passages("Caesar", 30, "n");
        nonviolent.extend(passages("Numa", 30, "n"));
        for p in nonviolent.iter_mut() {
            p.source.section += 100;
            p.id = p.source.passage_id();
        }
        let cfg = DetectionSplitConfig {
            test_violent: 6,
            test_nonviolent: 10,
            seed: 1,
        };
        let split = make_detection_split(&violent, &nonviolent, &cfg).unwrap();
        let v_test: Vec<_> = split.test.iter().filter(|e| e.label == VIOLENT).collect();
        assert_eq!(v_test.len(), 6);
        assert_eq!(v_test.iter().filter(|e| e.work_id.as_deref() == Some("Caesar")).count(), 4);
        assert_eq!(v_test.iter().filter(|e| e.work_id.as_deref() == Some("Pompey")).count(), 2);
        assert!(split.test.iter().all(|e| e.work_id.as_deref() != Some("Numa") || e.label == NONVIOLENT));
        split.check_invariants(&Registries::builtin()).unwrap();
    }

    #[test]
    fn insufficient_counts_is_config_error() {
        let v = passages("Caesar", 3, "v");
        let n = passages("Numa", 3, "n");
        assert!(matches!(
            make_detection_split(&v, &n, &DetectionSplitConfig::default()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn detection_split_is_deterministic() {
        let v = passages("Caesar", 40, "v");
        let n: Vec<_> = passages("Pompey", 80, "n");
        let cfg = DetectionSplitConfig {
            test_violent: 7,
            test_nonviolent: 13,
            seed: 99,
        };
        let a = make_detection_split(&v, &n, &cfg).unwrap();
        let b = make_detection_split(&v, &n, &cfg).unwrap();
        assert_eq!(a, b);
        let c = make_detection_split(&v, &n, &DetectionSplitConfig { seed: 100, ..cfg }).unwrap();
        assert_ne!(a.test, c.test);
    }

    #[test]
    fn with_test_size_keeps_ratio() {
        let c = DetectionSplitConfig::with_test_size(500, 13);
        assert_eq!((c.test_violent, c.test_nonviolent), (129, 371));
        let c = DetectionSplitConfig::with_test_size(100, 13);
        assert_eq!(c.test_size(), 100);
    }

    #[test]
    fn singleton_class_stays_in_train() {
        let mut evs: Vec<_> = (0..50).map(|i| event(i, "battle")).collect();
        evs.push(event(50, "fratricide"));
        let s = make_categorization_split(&evs, Task::Context, 0.8, 13).unwrap();
        assert!(s.test.iter().all(|e| e.label != "fratricide"));
        assert!(s.train.iter().any(|e| e.label == "fratricide"));
        assert_eq!(s.test.len(), 10);
    }

    #[test]
    fn full_train_frac_empties_test() {
        let evs: Vec<_> = (0..20).map(|i| event(i, "battle")).collect();
        let s = make_categorization_split(&evs, Task::Context, 1.0, 13).unwrap();
        assert!(s.test.is_empty());
        assert_eq!(s.train.len(), 20);
    }

    #[test]
    fn categorization_errors() {
        assert!(matches!(
            make_categorization_split(&[], Task::Level, 0.8, 1),
            Err(Error::Config(_))
        ));
        assert!(make_categorization_split(&[event(1, "battle")], Task::Detect, 0.8, 1).is_err());
    }

    proptest! {
        #[test]
        fn largest_remainder_within_one(total in 0usize..2000, weights in proptest::collection::vec(0usize..300, 1..12)) {
            let sum: usize = weights.iter().sum();
            let alloc = largest_remainder(total, &weights);
            if sum > 0 {
                prop_assert_eq!(alloc.iter().sum::<usize>(), total);
                for (a, w) in alloc.iter().zip(&weights) {
                    let exact = total as f64 * *w as f64 / sum as f64;
                    prop_assert!((*a as f64 - exact).abs() < 1.0 + 1e-9);
                }
            }
        }

        #[test]
        fn categorization_strata_within_one(
            counts in proptest::collection::vec(1usize..40, 1..6),
            frac in 0.5f64..1.0,
            seed in 0u64..1000,
        ) {
            let names = ["battle", "siege", "ambush", "revolt", "plunder", "sack"];
            let mut evs = Vec::new();
            for (c, &n) in counts.iter().enumerate() {
                for _ in 0..n { evs.push(event(evs.len(), names[c])); }
            }
            let s = make_categorization_split(&evs, Task::Context, frac, seed).unwrap();
            s.check_invariants(&Registries::builtin()).unwrap();
            prop_assert_eq!(s.train.len() + s.test.len(), evs.len());
            let stats = s.stats();
            for (c, &n) in counts.iter().enumerate() {
                let got = stats.test.get(names[c]).copied().unwrap_or(0);
                if n < 2 {
                    prop_assert_eq!(got, 0);
                } else {
                    let exact = n as f64 * (1.0 - frac);
                    prop_assert!((got as f64 - exact).abs() <= 1.0 + 1e-9, "{} vs {}", got, exact);
                }
            }
        }
    }
}
