//! One-vs-rest counts, precision/recall/F1 and the trivial baselines.

use serde::{Deserialize, Serialize};

use crate::dataset::LabelRegistry;
use crate::error::{Error, Result};

/// One-vs-rest counts for a single class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ClassCounts {
    pub fn support(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn predicted(&self) -> u64 {
        self.tp + self.fp
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        f1(self.precision(), self.recall())
    }
}

/// `num / den`, with 0/0 taken as 0.
fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Per-class one-vs-rest counts over a fixed label registry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    /// Registry labels, in registry order.
    pub labels: Vec<String>,
    /// Parallel to `labels`.
    pub classes: Vec<ClassCounts>,
    pub n: u64,
}

impl ConfusionCounts {
    pub fn get(&self, label: &str) -> Option<&ClassCounts> {
        self.labels.iter().position(|l| l == label).map(|i| &self.classes[i])
    }

    /// Correct predictions over all predictions.
    pub fn accuracy(&self) -> f64 {
        ratio(self.classes.iter().map(|c| c.tp).sum(), self.n)
    }
}

fn resolve_all<S: AsRef<str>>(labels: &[S], registry: &LabelRegistry, what: &str) -> Result<Vec<usize>> {
    labels
        .iter()
        .map(|l| {
            registry.index_of(l.as_ref()).ok_or_else(|| {
                Error::Validation(format!(
                    "{what} label {:?} is not in the {} registry",
                    l.as_ref(),
                    registry.task
                ))
            })
        })
        .collect()
}

/// Counts TP/FP/FN/TN for every registry class.
pub fn confusion<P: AsRef<str>, G: AsRef<str>>(
    preds: &[P],
    golds: &[G],
    registry: &LabelRegistry,
) -> Result<ConfusionCounts> {
    if preds.len() != golds.len() {
        return Err(Error::Validation(format!(
            "{} predictions for {} gold labels",
            preds.len(),
            golds.len()
        )));
    }
    if golds.is_empty() {
        return Err(Error::Validation("no labels to evaluate".into()));
    }
    let p = resolve_all(preds, registry, "predicted")?;
    let g = resolve_all(golds, registry, "gold")?;
    let n = g.len() as u64;
    let mut classes = vec![ClassCounts::default(); registry.len()];
    for (&pi, &gi) in p.iter().zip(&g) {
        if pi == gi {
            classes[pi].tp += 1;
        } else {
            classes[pi].fp += 1;
            classes[gi].fn_ += 1;
        }
    }
    for c in &mut classes {
        c.tn = n - c.tp - c.fp - c.fn_;
    }
    Ok(ConfusionCounts {
        labels: registry.labels().map(str::to_owned).collect(),
        classes,
        n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

impl ClassMetrics {
    pub fn from_counts(label: &str, c: &ClassCounts) -> Self {
        Self {
            label: label.to_owned(),
            precision: c.precision(),
            recall: c.recall(),
            f1: c.f1(),
            support: c.support(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Overall {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Support-weighted mean of each metric: Σ_c (support_c / N) · metric_c.
pub fn weighted_overall(classes: &[ClassMetrics]) -> Overall {
    let n: u64 = classes.iter().map(|c| c.support).sum();
    if n == 0 {
        return Overall::default();
    }
    let w = |f: fn(&ClassMetrics) -> f64| {
        classes.iter().map(|c| c.support as f64 * f(c)).sum::<f64>() / n as f64
    };
    Overall {
        precision: w(|c| c.precision),
        recall: w(|c| c.recall),
        f1: w(|c| c.f1),
    }
}

/// Unweighted mean over classes with non-zero support.
pub fn macro_overall(classes: &[ClassMetrics]) -> Overall {
    let present: Vec<&ClassMetrics> = classes.iter().filter(|c| c.support > 0).collect();
    if present.is_empty() {
        return Overall::default();
    }
    let k = present.len() as f64;
    Overall {
        precision: present.iter().map(|c| c.precision).sum::<f64>() / k,
        recall: present.iter().map(|c| c.recall).sum::<f64>() / k,
        f1: present.iter().map(|c| c.f1).sum::<f64>() / k,
    }
}

fn class_counts<S: AsRef<str>>(golds: &[S]) -> Result<Vec<u64>> {
    if golds.is_empty() {
        return Err(Error::Validation("baseline needs at least one gold label".into()));
    }
    let mut counts: std::collections::BTreeMap<&str, u64> = Default::default();
    for g in golds {
        *counts.entry(g.as_ref()).or_default() += 1;
    }
    Ok(counts.into_values().collect())
}

/// Accuracy of always predicting the most frequent gold class.
pub fn majority_baseline<S: AsRef<str>>(golds: &[S]) -> Result<f64> {
    let counts = class_counts(golds)?;
    let max = counts.iter().copied().max().unwrap_or(0);
    Ok(max as f64 / golds.len() as f64)
}

/// The class a majority classifier would predict; ties go to the earlier
/// registry label.
pub fn majority_label<S: AsRef<str>>(golds: &[S], registry: &LabelRegistry) -> Option<String> {
    let mut counts = vec![0u64; registry.len()];
    for g in golds {
        counts[registry.index_of(g.as_ref())?] += 1;
    }
    let max = *counts.iter().max()?;
    counts.iter().position(|&c| c == max).map(|i| registry.name(i).to_owned())
}

/// Expected accuracy of sampling labels from the gold class distribution:
/// Σ_i p_i².
pub fn random_baseline<S: AsRef<str>>(golds: &[S]) -> Result<f64> {
    let counts = class_counts(golds)?;
    let n = golds.len() as f64;
    Ok(counts.iter().map(|&c| (c as f64 / n).powi(2)).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Registries, Task};

    fn reg(names: &[&str]) -> LabelRegistry {
        LabelRegistry::from_names(Task::Level, names).unwrap()
    }

    #[test]
    fn identity_has_no_errors() {
        let r = reg(&["a", "b", "c"]);
        let y = ["a", "c", "c", "b", "a"];
        let c = confusion(&y, &y, &r).unwrap();
        for k in &c.classes {
            assert_eq!((k.fp, k.fn_), (0, 0));
        }
        assert_eq!(c.accuracy(), 1.0);
    }

    #[test]
    fn all_wrong_binary() {
        let r = reg(&["a", "b"]);
        let c = confusion(&["b"; 7], &["a"; 7], &r).unwrap();
        assert_eq!(c.get("a").unwrap().tp, 0);
        assert_eq!(c.get("a").unwrap().fn_, 7);
        assert_eq!(c.get("b").unwrap().fp, 7);
    }

    #[test]
    fn six_item_hand_table() {
        // gold: a a b b c c ; pred: a b b c c a
        // a: TP1 FP1 (item6) FN1 (item2) TN3
        // b: TP1 FP1 (item2) FN1 (item4) TN3
        // c: TP1 FP1 (item4) FN1 (item6) TN3
        let r = reg(&["a", "b", "c"]);
        let c = confusion(
            &["a", "b", "b", "c", "c", "a"],
            &["a", "a", "b", "b", "c", "c"],
            &r,
        )
        .unwrap();
        for k in &c.classes {
            assert_eq!(*k, ClassCounts { tp: 1, fp: 1, fn_: 1, tn: 3 });
        }
        // gold: a a a b ; pred: a a b a
        let c = confusion(&["a", "a", "b", "a"], &["a", "a", "a", "b"], &reg(&["a", "b"])).unwrap();
        assert_eq!(c.classes[0], ClassCounts { tp: 2, fp: 1, fn_: 1, tn: 0 });
        assert_eq!(c.classes[1], ClassCounts { tp: 0, fp: 1, fn_: 1, tn: 2 });
    }

    #[test]
    fn errors() {
        let r = reg(&["a", "b"]);
        assert!(confusion(&["a"], &["a", "b"], &r).is_err());
        assert!(confusion(&["a", "z"], &["a", "b"], &r).is_err());
        assert!(confusion::<&str, &str>(&[], &[], &r).is_err());
    }

    #[test]
    fn table_one_f1() {
        assert!((f1(0.87, 0.99) - 0.9261).abs() < 1e-4);
        assert!((f1(0.89, 0.86) - 0.8748).abs() < 1e-4);
        assert!((f1(0.4, 0.4) - 0.4).abs() < 1e-15);
        let z = ClassCounts::default();
        assert_eq!((z.precision(), z.recall(), z.f1()), (0.0, 0.0, 0.0));
    }

    fn cm(label: &str, p: f64, r: f64, f: f64, s: u64) -> ClassMetrics {
        ClassMetrics {
            label: label.into(),
            precision: p,
            recall: r,
            f1: f,
            support: s,
        }
    }

    #[test]
    fn weighted_overall_examples() {
        let o = weighted_overall(&[cm("a", 0.8, 0.8, 0.8, 5), cm("b", 0.6, 0.6, 0.6, 5)]);
        assert!((o.f1 - 0.7).abs() < 1e-12);
        let single = [cm("a", 0.3, 0.9, 0.45, 4)];
        assert_eq!(weighted_overall(&single), Overall { precision: 0.3, recall: 0.9, f1: 0.45 });
    }

    #[test]
    fn level_table_weighted_overall() {
        let rows = [
            cm("interpersonal", 0.92, 0.91, 0.91, 96),
            cm("intrasocial", 0.95, 0.83, 0.89, 72),
            cm("intersocial", 0.96, 0.98, 0.97, 371),
            cm("intrapersonal", 0.84, 0.94, 0.89, 17),
        ];
        let o = weighted_overall(&rows);
        for v in [o.precision, o.recall, o.f1] {
            assert!((v - 0.95).abs() <= 0.01, "{v}");
        }
    }

    #[test]
    fn baselines() {
        let mut golds = vec!["nonviolent"; 371];
        golds.extend(vec!["violent"; 129]);
        assert!((majority_baseline(&golds).unwrap() - 0.742).abs() < 1e-9);
        assert!((random_baseline(&golds).unwrap() - 0.617_128).abs() < 1e-6);
        assert_eq!(majority_baseline(&["x"; 3]).unwrap(), 1.0);
        assert_eq!(random_baseline(&["x"; 3]).unwrap(), 1.0);
        assert_eq!(majority_baseline(&["a", "b"]).unwrap(), 0.5);
        assert!((random_baseline(&["a", "b", "c"]).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert!(majority_baseline::<&str>(&[]).is_err());

        let regs = Registries::builtin();
        let det = regs.get(Task::Detect);
        assert_eq!(majority_label(&["violent", "nonviolent"], det).unwrap(), "violent");
        assert_eq!(majority_label(&golds, det).unwrap(), "nonviolent");
    }

    #[test]
    fn level_baselines_match_published_supports() {
        let mut golds = Vec::new();
        for (l, n) in [("interpersonal", 96), ("intrasocial", 72), ("intersocial", 371), ("intrapersonal", 17)] {
            golds.extend(std::iter::repeat(l).take(n));
        }
        assert!((majority_baseline(&golds).unwrap() - 0.667).abs() < 0.001);
        assert!((random_baseline(&golds).unwrap() - 0.49).abs() < 0.005);
    }
}
