//! Evaluation reports and their tabular rendering.

use serde::{Deserialize, Serialize};

use super::metrics::{
    confusion, macro_overall, majority_baseline, majority_label, random_baseline, weighted_overall,
    ClassMetrics, ConfusionCounts, Overall,
};
use crate::dataset::{LabelRegistry, Task, NONVIOLENT, VIOLENT};
use crate::error::{Error, Result};

/// One scored item: the input format of `evaluate`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub passage_id: String,
    pub task: Task,
    pub gold: String,
    pub pred: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baselines {
    pub majority: f64,
    /// The class the majority classifier predicts.
    pub majority_label: String,
    pub random: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: Task,
    pub model_id: String,
    /// Classes that occur in the gold labels or the predictions, in
    /// registry order.
    pub per_class: Vec<ClassMetrics>,
    /// Support-weighted over all classes.
    pub overall: Overall,
    pub accuracy: f64,
    pub baselines: Baselines,
    pub n: u64,
    pub confusion: ConfusionCounts,
}

impl EvalReport {
    pub fn compute<P: AsRef<str>, G: AsRef<str>>(
        model_id: &str,
        preds: &[P],
        golds: &[G],
        registry: &LabelRegistry,
    ) -> Result<Self> {
        let counts = confusion(preds, golds, registry)?;
        let per_class: Vec<ClassMetrics> = counts
            .labels
            .iter()
            .zip(&counts.classes)
            .filter(|(_, c)| c.support() > 0 || c.predicted() > 0)
            .map(|(l, c)| ClassMetrics::from_counts(l, c))
            .collect();
        let baselines = Baselines {
            majority: majority_baseline(golds)?,
            majority_label: majority_label(golds, registry).unwrap_or_default(),
            random: random_baseline(golds)?,
        };
        Ok(Self {
            task: registry.task,
            model_id: model_id.to_owned(),
            overall: weighted_overall(&per_class),
            accuracy: counts.accuracy(),
            per_class,
            baselines,
            n: counts.n,
            confusion: counts,
        })
    }

    /// Builds one report from scored records that must all share a task.
    pub fn from_records(model_id: &str, records: &[EvalRecord], registry: &LabelRegistry) -> Result<Self> {
        if let Some(r) = records.iter().find(|r| r.task != registry.task) {
            return Err(Error::Validation(format!(
                "record {} is for task {}, expected {}",
                r.passage_id, r.task, registry.task
            )));
        }
        let preds: Vec<&str> = records.iter().map(|r| r.pred.as_str()).collect();
        let golds: Vec<&str> = records.iter().map(|r| r.gold.as_str()).collect();
        Self::compute(model_id, &preds, &golds, registry)
    }

    pub fn class(&self, label: &str) -> Option<&ClassMetrics> {
        self.per_class.iter().find(|c| c.label == label)
    }

    /// Unweighted mean over present classes; reported only on request.
    pub fn macro_overall(&self) -> Overall {
        macro_overall(&self.per_class)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Text,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(Self::Text),
            "csv" => Ok(Self::Csv),
            other => Err(Error::Validation(format!("unknown report format {other:?}, expected text or csv"))),
        }
    }
}

/// Human-facing class name: "Violent", "Non-Violent", or the label with its
/// first letter capitalized.
pub fn display_label(label: &str) -> String {
    match label {
        VIOLENT => "Violent".into(),
        NONVIOLENT => "Non-Violent".into(),
        other => {
            let mut cs = other.chars();
            match cs.next() {
                Some(c) => c.to_uppercase().chain(cs).collect(),
                None => String::new(),
            }
        }
    }
}

/// Half-up rounding to two decimals. The tolerance absorbs binary
/// representation error, so 0.925 renders as 0.93.
pub fn round2(x: f64) -> String {
    let scaled = (x * 100.0 + 0.5 + 1e-9).floor();
    format!("{:.2}", scaled / 100.0)
}

struct Row {
    task: Task,
    section: &'static str,
    class: String,
    model: String,
    cells: [f64; 3],
    support: u64,
}

fn rows(reports: &[EvalReport]) -> Vec<Row> {
    let mut tasks: Vec<Task> = reports.iter().map(|r| r.task).collect();
    tasks.sort();
    tasks.dedup();
    let mut out = Vec::new();
    for task in tasks {
        let group: Vec<&EvalReport> = reports.iter().filter(|r| r.task == task).collect();
        // Class order: registry order as realized across the group.
        let mut labels: Vec<(usize, &str)> = Vec::new();
        for r in &group {
            for c in &r.per_class {
                let pos = r.confusion.labels.iter().position(|l| *l == c.label).unwrap_or(usize::MAX);
                if !labels.iter().any(|(_, l)| *l == c.label) {
                    labels.push((pos, &c.label));
                }
            }
        }
        labels.sort();
        for (_, label) in &labels {
            for r in &group {
                let (cells, support) = match r.class(label) {
                    Some(c) => ([c.precision, c.recall, c.f1], c.support),
                    None => ([0.0; 3], 0),
                };
                out.push(Row {
                    task,
                    section: "class",
                    class: display_label(label),
                    model: r.model_id.clone(),
                    cells,
                    support,
                });
            }
        }
        for r in &group {
            let o = r.overall;
            out.push(Row {
                task,
                section: "overall",
                class: "Overall".into(),
                model: r.model_id.clone(),
                cells: [o.precision, o.recall, o.f1],
                support: r.n,
            });
        }
        let mut seen: Vec<(u64, u64, u64)> = Vec::new();
        for r in &group {
            let b = &r.baselines;
            let key = (b.majority.to_bits(), b.random.to_bits(), r.n);
            if seen.contains(&key) {
                continue;
            }
            seen.push(key);
            let majority_name = if task == Task::Detect && b.majority_label == NONVIOLENT {
                "Majority (all non-violent)".to_owned()
            } else {
                format!("Majority (all {})", b.majority_label)
            };
            for (model, v) in [(majority_name, b.majority), ("Random".to_owned(), b.random)] {
                out.push(Row {
                    task,
                    section: "baseline",
                    class: "Baselines".into(),
                    model,
                    cells: [v; 3],
                    support: r.n,
                });
            }
        }
    }
    out
}

const HEADER: [&str; 6] = ["Class", "Model", "Precision", "Recall", "F1", "Support"];

/// Renders reports as results tables: per-class rows, then Overall,
/// then Baselines, one block per task. Overall rows are support-weighted
/// averages across all classes, not copies of the positive-class row.
pub fn render_report(reports: &[EvalReport], format: ReportFormat) -> String {
    let rows = rows(reports);
    match format {
        ReportFormat::Csv => {
            let mut out = String::from("task,section,class,model,precision,recall,f1,support\n");
            for r in &rows {
                let fields = [
                    r.task.to_string(),
                    r.section.to_string(),
                    csv_field(&r.class),
                    csv_field(&r.model),
                    round2(r.cells[0]),
                    round2(r.cells[1]),
                    round2(r.cells[2]),
                    r.support.to_string(),
                ];
                out.push_str(&fields.join(","));
                out.push('\n');
            }
            out
        }
        ReportFormat::Text => {
            let table: Vec<[String; 6]> = rows
                .iter()
                .map(|r| {
                    [
                        r.class.clone(),
                        r.model.clone(),
                        round2(r.cells[0]),
                        round2(r.cells[1]),
                        round2(r.cells[2]),
                        r.support.to_string(),
                    ]
                })
                .collect();
            let mut widths = HEADER.map(str::len);
            for row in &table {
                for (w, cell) in widths.iter_mut().zip(row) {
                    *w = (*w).max(cell.chars().count());
                }
            }
            let line = |cells: &[&str]| {
                let mut s = String::new();
                for (i, (cell, w)) in cells.iter().zip(widths).enumerate() {
                    if i > 0 {
                        s.push_str("  ");
                    }
                    if i >= 2 {
                        s.push_str(&format!("{cell:>w$}"));
                    } else {
                        s.push_str(&format!("{cell:<w$}"));
                    }
                }
                s.trim_end().to_owned() + "\n"
            };
            let mut out = line(&HEADER);
            let mut prev: Option<(Task, &str)> = None;
            for (row, cells) in rows.iter().zip(&table) {
                let key = (row.task, row.section);
                if prev.map_or(true, |(t, s)| t != row.task || (s != row.section)) {
                    if prev.map_or(true, |(t, _)| t != row.task) {
                        out.push_str(&format!("# task: {}\n", row.task));
                    } else {
                        out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 10));
                        out.push('\n');
                    }
                }
                prev = Some(key);
                let refs: Vec<&str> = cells.iter().map(String::as_str).collect();
                out.push_str(&line(&refs));
            }
            out
        }
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Registries;

    fn detect_report(model: &str, tp: usize, fn_: usize, fp: usize, tn: usize) -> EvalReport {
        let mut preds = Vec::new();
        let mut golds = Vec::new();
        for (p, g, n) in [
            (VIOLENT, VIOLENT, tp),
            (NONVIOLENT, VIOLENT, fn_),
            (VIOLENT, NONVIOLENT, fp),
            (NONVIOLENT, NONVIOLENT, tn),
        ] {
            preds.extend(std::iter::repeat(p).take(n));
            golds.extend(std::iter::repeat(g).take(n));
        }
        EvalReport::compute(model, &preds, &golds, Registries::builtin().get(Task::Detect)).unwrap()
    }

    #[test]
    fn rounding_half_up() {
        assert_eq!(round2(0.925), "0.93");
        assert_eq!(round2(0.9261), "0.93");
        assert_eq!(round2(0.615), "0.62");
        assert_eq!(round2(0.6172), "0.62");
        assert_eq!(round2(0.0), "0.00");
        assert_eq!(round2(1.0), "1.00");
        assert_eq!(round2(0.7449), "0.74");
    }

    #[test]
    fn detect_table_layout() {
        let r = detect_report("bert", 120, 9, 18, 353);
        assert_eq!(r.n, 500);
        let text = render_report(&[r], ReportFormat::Text);
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("Class"));
        let order: Vec<usize> = ["Violent", "Non-Violent", "Overall", "Majority (all non-violent)", "Random"]
            .iter()
            .map(|k| lines.iter().position(|l| l.contains(k)).unwrap())
            .collect();
        assert!(order.windows(2).all(|w| w[0] < w[1]), "{text}");
        assert!(text.contains("0.74"));
        assert!(text.contains("0.62"));
    }

    #[test]
    fn empty_list_is_header_only() {
        assert_eq!(render_report(&[], ReportFormat::Text).lines().count(), 1);
        assert_eq!(
            render_report(&[], ReportFormat::Csv),
            "task,section,class,model,precision,recall,f1,support\n"
        );
    }

    #[test]
    fn two_models_share_baselines() {
        let a = detect_report("a", 100, 29, 10, 361);
        let b = detect_report("b", 110, 19, 30, 341);
        let csv = render_report(&[a, b], ReportFormat::Csv);
        assert_eq!(csv.lines().filter(|l| l.contains(",baseline,")).count(), 2);
        assert_eq!(csv.lines().filter(|l| l.contains(",overall,")).count(), 2);
        assert_eq!(csv.lines().count(), 1 + 4 + 2 + 2);
    }

    #[test]
    fn overall_is_weighted_not_violent_row() {
        let r = detect_report("m", 120, 9, 18, 353);
        assert!((r.overall.f1 - r.class(VIOLENT).unwrap().f1).abs() > 0.01);
    }

    #[test]
    fn categorization_breakdown() {
        let regs = Registries::builtin();
        let golds = ["interpersonal", "intersocial", "intersocial", "intrapersonal"];
        let preds = ["interpersonal", "intersocial", "intrasocial", "intersocial"];
        let r = EvalReport::compute("lvl", &preds, &golds, regs.get(Task::Level)).unwrap();
        assert_eq!(r.per_class.len(), 4);
        let csv = render_report(&[r], ReportFormat::Csv);
        assert!(csv.contains("level,class,Interpersonal,lvl,1.00,1.00,1.00,1"));
        assert!(csv.contains("Majority (all intersocial)"));
    }

    #[test]
    fn display_names() {
        assert_eq!(display_label("war/military campaign"), "War/military campaign");
        assert_eq!(display_label(NONVIOLENT), "Non-Violent");
    }

    #[test]
    fn records_task_checked() {
        let regs = Registries::builtin();
        let rec = EvalRecord {
            passage_id: "p".into(),
            task: Task::Level,
            gold: "violent".into(),
            pred: "violent".into(),
        };
        assert!(EvalReport::from_records("m", &[rec], regs.get(Task::Detect)).is_err());
    }
}
