//! Embedded SQLite persistence for passages, curated events, predictions,
//! review verdicts and annotation jobs.
//!
//! A [`Store`] is `Send + Sync`; every public operation runs inside its own
//! transaction on a single connection, so callers can share one handle
//! (behind an `Arc`) across threads.

pub mod jsonl;
pub mod types;

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::{Mutex, MutexGuard};

use chrono::{DateTime, Utc};
use rusqlite::{params, Connection, OptionalExtension, Row, TransactionBehavior};
use serde::{Deserialize, Serialize};

pub use types::{
    CuratedEvent, Decision, Level, Passage, Prediction, ReviewVerdict, SourceRef, VerdictInput,
};

use crate::dataset::example::LabeledExample;
use crate::dataset::registry::{Registries, Task, NONVIOLENT, VIOLENT};
use crate::error::{Error, Result};
use crate::text::normalize;

const SCHEMA: &str = r"
CREATE TABLE IF NOT EXISTS passages (
  id TEXT PRIMARY KEY,
  work_id TEXT NOT NULL,
  chapter INTEGER NOT NULL CHECK (chapter >= 1),
  section INTEGER NOT NULL CHECK (section >= 1),
  text TEXT NOT NULL CHECK (length(text) > 0),
  lang TEXT NOT NULL,
  UNIQUE (work_id, chapter, section)
);

CREATE TABLE IF NOT EXISTS events (
  id TEXT PRIMARY KEY,
  body_json TEXT NOT NULL
);

CREATE TABLE IF NOT EXISTS predictions (
  seq INTEGER PRIMARY KEY AUTOINCREMENT,
  id TEXT NOT NULL UNIQUE,
  passage_id TEXT NOT NULL REFERENCES passages(id) ON DELETE RESTRICT,
  task TEXT NOT NULL,
  label TEXT NOT NULL,
  score REAL NOT NULL CHECK (score BETWEEN 0.0 AND 1.0),
  probabilities_json TEXT NOT NULL,
  truncated INTEGER NOT NULL CHECK (truncated IN (0, 1)),
  model_id TEXT NOT NULL,
  created_at TEXT NOT NULL
);
CREATE INDEX IF NOT EXISTS idx_predictions_task ON predictions(task, seq);

CREATE TABLE IF NOT EXISTS verdicts (
  seq INTEGER PRIMARY KEY AUTOINCREMENT,
  id TEXT NOT NULL UNIQUE,
  prediction_id TEXT NOT NULL REFERENCES predictions(id) ON DELETE RESTRICT,
  decision TEXT NOT NULL CHECK (decision IN ('accept', 'reject', 'relabel')),
  corrected_label TEXT,
  reviewer TEXT NOT NULL,
  created_at TEXT NOT NULL,
  UNIQUE (prediction_id, reviewer)
);

CREATE TABLE IF NOT EXISTS jobs (
  id TEXT PRIMARY KEY,
  job_key TEXT NOT NULL,
  body_json TEXT NOT NULL,
  created_seq INTEGER NOT NULL
);
CREATE INDEX IF NOT EXISTS idx_jobs_key ON jobs(job_key, created_seq);
";

/// Lifecycle of an annotation job. Transitions only move forward:
/// queued, running, then done or failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Failed,
}

impl JobStatus {
    fn rank(self) -> u8 {
        match self {
            JobStatus::Queued => 0,
            JobStatus::Running => 1,
            JobStatus::Done | JobStatus::Failed => 2,
        }
    }

    pub fn can_move_to(self, next: JobStatus) -> bool {
        next.rank() > self.rank()
    }

    pub fn is_terminal(self) -> bool {
        self.rank() == 2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationJob {
    pub id: String,
    pub task: Task,
    pub model_id: String,
    /// Work ids the job covers; empty means every work in the store.
    pub works: Vec<String>,
    pub status: JobStatus,
    /// Passages matching the filter when the job was created.
    pub total: usize,
    pub processed: usize,
    /// Predicted-label histogram (`violent`/`nonviolent` for detection).
    pub counts: BTreeMap<String, usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub created_at: DateTime<Utc>,
}

impl AnnotationJob {
    /// Idempotence key over (task, model, filter).
    pub fn key(task: Task, model_id: &str, works: &[String]) -> String {
        let mut w = works.to_vec();
        w.sort();
        w.dedup();
        format!("{task}|{model_id}|{}", w.join(","))
    }
}

/// Prediction joined with its passage: what a reviewer sees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewItem {
    pub prediction: Prediction,
    pub passage: Passage,
    /// Citation display string, `Work chapter.section`.
    pub citation: String,
}

pub struct Store {
    conn: Mutex<Connection>,
    registries: Registries,
}

fn ts(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(chrono::SecondsFormat::Micros, true)
}

fn parse_ts(s: &str) -> rusqlite::Result<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(s)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| {
            rusqlite::Error::FromSqlConversionFailure(0, rusqlite::types::Type::Text, Box::new(e))
        })
}

fn bad_column(e: impl std::error::Error + Send + Sync + 'static) -> rusqlite::Error {
    rusqlite::Error::FromSqlConversionFailure(0, rusqlite::types::Type::Text, Box::new(e))
}

fn passage_from_row(row: &Row<'_>) -> rusqlite::Result<Passage> {
    Ok(Passage {
        id: row.get(0)?,
        source: SourceRef {
            work_id: row.get(1)?,
            chapter: row.get(2)?,
            section: row.get(3)?,
        },
        text: row.get(4)?,
        lang: row.get(5)?,
    })
}

const PASSAGE_COLS: &str = "id, work_id, chapter, section, text, lang";
const PREDICTION_COLS: &str =
    "id, passage_id, task, label, score, probabilities_json, truncated, model_id, created_at";
const VERDICT_COLS: &str = "id, prediction_id, decision, corrected_label, reviewer, created_at";

fn prediction_from_row(row: &Row<'_>) -> rusqlite::Result<Prediction> {
    let task: String = row.get(2)?;
    let probs: String = row.get(5)?;
    let created: String = row.get(8)?;
    Ok(Prediction {
        id: row.get(0)?,
        passage_id: row.get(1)?,
        task: task.parse().map_err(bad_column)?,
        label: row.get(3)?,
        score: row.get(4)?,
        probabilities: serde_json::from_str(&probs).map_err(bad_column)?,
        truncated: row.get(6)?,
        model_id: row.get(7)?,
        created_at: parse_ts(&created)?,
    })
}

fn verdict_from_row(row: &Row<'_>) -> rusqlite::Result<ReviewVerdict> {
    let decision: String = row.get(2)?;
    let created: String = row.get(5)?;
    Ok(ReviewVerdict {
        id: row.get(0)?,
        prediction_id: row.get(1)?,
        decision: decision.parse().map_err(bad_column)?,
        corrected_label: row.get(3)?,
        reviewer: row.get(4)?,
        created_at: parse_ts(&created)?,
    })
}

fn is_constraint(e: &rusqlite::Error) -> bool {
    matches!(
        e,
        rusqlite::Error::SqliteFailure(f, _) if f.code == rusqlite::ErrorCode::ConstraintViolation
    )
}

impl Store {
    pub fn open(path: &Path, registries: Registries) -> Result<Self> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let conn = Connection::open(path)?;
        conn.pragma_update(None, "journal_mode", "WAL")?;
        Self::init(conn, registries)
    }

    pub fn open_in_memory(registries: Registries) -> Result<Self> {
        Self::init(Connection::open_in_memory()?, registries)
    }

    fn init(conn: Connection, registries: Registries) -> Result<Self> {
        conn.pragma_update(None, "foreign_keys", "ON")?;
        conn.busy_timeout(std::time::Duration::from_secs(5))?;
        conn.execute_batch(SCHEMA)?;
        Ok(Self {
            conn: Mutex::new(conn),
            registries,
        })
    }

    pub fn registries(&self) -> &Registries {
        &self.registries
    }

    fn conn(&self) -> MutexGuard<'_, Connection> {
        // A panic while holding the lock cannot leave a half-applied
        // transaction behind (rusqlite rolls back on drop).
        self.conn.lock().unwrap_or_else(|p| p.into_inner())
    }

    // ---- passages ----------------------------------------------------

    /// Stores passages atomically and returns how many were new.
    ///
    /// Re-ingesting a passage with identical text is a no-op. A known
    /// citation (or id) carrying different text aborts the whole batch with
    /// [`Error::Conflict`].
    pub fn put_passages(&self, passages: &[Passage]) -> Result<usize> {
        let mut conn = self.conn();
        let tx = conn.transaction_with_behavior(TransactionBehavior::Immediate)?;
        let mut stored = 0;
        for p in passages {
            p.validate()?;
            let text = normalize(&p.text);
            let existing: Option<(String, String)> = tx
                .query_row(
                    "SELECT id, text FROM passages
                     WHERE (work_id = ?1 AND chapter = ?2 AND section = ?3) OR id = ?4",
                    params![p.source.work_id, p.source.chapter, p.source.section, p.id],
                    |r| Ok((r.get(0)?, r.get(1)?)),
                )
                .optional()?;
            match existing {
                Some((id, old)) if id == p.id && old == text => continue,
                Some((id, _)) => {
                    return Err(Error::Conflict(format!(
                        "passage {} ({}) conflicts with stored passage {id}",
                        p.id, p.source
                    )))
                }
                None => {
                    tx.execute(
                        "INSERT INTO passages (id, work_id, chapter, section, text, lang)
                         VALUES (?1, ?2, ?3, ?4, ?5, ?6)",
                        params![
                            p.id,
                            p.source.work_id,
                            p.source.chapter,
                            p.source.section,
                            text,
                            p.lang
                        ],
                    )?;
                    stored += 1;
                }
            }
        }
        tx.commit()?;
        Ok(stored)
    }

    pub fn get_passage(&self, id: &str) -> Result<Passage> {
        self.conn()
            .query_row(
                &format!("SELECT {PASSAGE_COLS} FROM passages WHERE id = ?1"),
                [id],
                passage_from_row,
            )
            .optional()?
            .ok_or_else(|| Error::NotFound(format!("passage {id}")))
    }

    /// Passages ordered by citation, optionally restricted to some works.
    pub fn passages(&self, works: Option<&[String]>) -> Result<Vec<Passage>> {
        let conn = self.conn();
        let mut stmt = conn.prepare(&format!(
            "SELECT {PASSAGE_COLS} FROM passages ORDER BY work_id, chapter, section"
        ))?;
        let rows = stmt.query_map([], passage_from_row)?;
        let mut out = Vec::new();
        for row in rows {
            let p = row?;
            if works.map_or(true, |w| w.iter().any(|x| *x == p.source.work_id)) {
                out.push(p);
            }
        }
        Ok(out)
    }

    /// Deletes an unreferenced passage. Passages with predictions are kept
    /// and the call fails with [`Error::Conflict`].
    pub fn delete_passage(&self, id: &str) -> Result<()> {
        let conn = self.conn();
        match conn.execute("DELETE FROM passages WHERE id = ?1", [id]) {
            Ok(0) => Err(Error::NotFound(format!("passage {id}"))),
            Ok(_) => Ok(()),
            Err(e) if is_constraint(&e) => Err(Error::Conflict(format!(
                "passage {id} is referenced by predictions"
            ))),
            Err(e) => Err(e.into()),
        }
    }

    // ---- events ------------------------------------------------------

    /// Stores curated events, idempotent by id; returns how many were new.
    pub fn put_events(&self, events: &[CuratedEvent]) -> Result<usize> {
        let mut conn = self.conn();
        let tx = conn.transaction_with_behavior(TransactionBehavior::Immediate)?;
        let mut stored = 0;
        for ev in events {
            let ev = ev.clone().canonicalize();
            ev.validate(&self.registries)?;
            let body = serde_json::to_string(&ev)?;
            let existing: Option<String> = tx
                .query_row("SELECT body_json FROM events WHERE id = ?1", [&ev.id], |r| {
                    r.get(0)
                })
                .optional()?;
            match existing {
                Some(old) if old == body => {}
                Some(_) => {
                    return Err(Error::Conflict(format!(
                        "event {} differs from the stored entry",
                        ev.id
                    )))
                }
                None => {
                    tx.execute(
                        "INSERT INTO events (id, body_json) VALUES (?1, ?2)",
                        params![ev.id, body],
                    )?;
                    stored += 1;
                }
            }
        }
        tx.commit()?;
        Ok(stored)
    }

    pub fn events(&self) -> Result<Vec<CuratedEvent>> {
        let conn = self.conn();
        let mut stmt = conn.prepare("SELECT body_json FROM events ORDER BY id")?;
        let rows = stmt.query_map([], |r| r.get::<_, String>(0))?;
        let mut out = Vec::new();
        for body in rows {
            out.push(serde_json::from_str(&body?)?);
        }
        Ok(out)
    }

    // ---- predictions -------------------------------------------------

    pub fn put_predictions(&self, preds: &[Prediction]) -> Result<()> {
        let mut conn = self.conn();
        let tx = conn.transaction_with_behavior(TransactionBehavior::Immediate)?;
        for p in preds {
            p.validate(&self.registries)?;
            let known: bool = tx
                .query_row("SELECT 1 FROM passages WHERE id = ?1", [&p.passage_id], |_| {
                    Ok(true)
                })
                .optional()?
                .unwrap_or(false);
            if !known {
                return Err(Error::NotFound(format!("passage {}", p.passage_id)));
            }
            tx.execute(
                &format!("INSERT INTO predictions ({PREDICTION_COLS}) VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9)"),
                params![
                    p.id,
                    p.passage_id,
                    p.task.as_str(),
                    p.label,
                    p.score,
                    serde_json::to_string(&p.probabilities)?,
                    p.truncated,
                    p.model_id,
                    ts(&p.created_at)
                ],
            )
            .map_err(|e| {
                if is_constraint(&e) {
                    Error::Conflict(format!("prediction {} already stored", p.id))
                } else {
                    e.into()
                }
            })?;
        }
        tx.commit()?;
        Ok(())
    }

    pub fn get_prediction(&self, id: &str) -> Result<Prediction> {
        self.conn()
            .query_row(
                &format!("SELECT {PREDICTION_COLS} FROM predictions WHERE id = ?1"),
                [id],
                prediction_from_row,
            )
            .optional()?
            .ok_or_else(|| Error::NotFound(format!("prediction {id}")))
    }

    /// Predictions for a task in insertion order, optionally only those
    /// without any verdict yet.
    pub fn predictions(&self, task: Option<Task>, pending_only: bool) -> Result<Vec<Prediction>> {
        let conn = self.conn();
        let mut sql = format!(
            "SELECT {} FROM predictions p WHERE (?1 IS NULL OR p.task = ?1)",
            PREDICTION_COLS
                .split(", ")
                .map(|c| format!("p.{c}"))
                .collect::<Vec<_>>()
                .join(", ")
        );
        if pending_only {
            sql.push_str(" AND NOT EXISTS (SELECT 1 FROM verdicts v WHERE v.prediction_id = p.id)");
        }
        sql.push_str(" ORDER BY p.seq");
        let mut stmt = conn.prepare(&sql)?;
        let rows = stmt.query_map([task.map(Task::as_str)], prediction_from_row)?;
        Ok(rows.collect::<rusqlite::Result<_>>()?)
    }

    pub fn delete_prediction(&self, id: &str) -> Result<()> {
        let conn = self.conn();
        match conn.execute("DELETE FROM predictions WHERE id = ?1", [id]) {
            Ok(0) => Err(Error::NotFound(format!("prediction {id}"))),
            Ok(_) => Ok(()),
            Err(e) if is_constraint(&e) => Err(Error::Conflict(format!(
                "prediction {id} is referenced by verdicts"
            ))),
            Err(e) => Err(e.into()),
        }
    }

    // ---- review ------------------------------------------------------

    /// Pending predictions joined with their passages. Detection items are
    /// ordered by closeness of the score to 0.5, categorization items by
    /// descending entropy; ties keep insertion order.
    pub fn review_queue(&self, task: Option<Task>) -> Result<Vec<ReviewItem>> {
        let preds = self.predictions(task, true)?;
        let mut passages: HashMap<String, Passage> = HashMap::new();
        let mut items = Vec::with_capacity(preds.len());
        for p in preds {
            let passage = match passages.get(&p.passage_id) {
                Some(x) => x.clone(),
                None => {
                    let x = self.get_passage(&p.passage_id)?;
                    passages.insert(p.passage_id.clone(), x.clone());
                    x
                }
            };
            items.push(ReviewItem {
                citation: passage.source.to_string(),
                prediction: p,
                passage,
            });
        }
        items.sort_by(|a, b| {
            let ka = uncertainty_key(&a.prediction);
            let kb = uncertainty_key(&b.prediction);
            ka.total_cmp(&kb)
        });
        Ok(items)
    }

    /// Validates and persists a verdict.
    ///
    /// Fails with `NotFound` for an unknown prediction, `Validation` for a
    /// relabel lacking a registry label, and `Conflict` when the reviewer
    /// already judged this prediction.
    pub fn record_verdict(&self, input: &VerdictInput) -> Result<ReviewVerdict> {
        if input.reviewer.trim().is_empty() {
            return Err(Error::Validation("reviewer name is empty".into()));
        }
        let mut conn = self.conn();
        let tx = conn.transaction_with_behavior(TransactionBehavior::Immediate)?;
        let task: String = tx
            .query_row(
                "SELECT task FROM predictions WHERE id = ?1",
                [&input.prediction_id],
                |r| r.get(0),
            )
            .optional()?
            .ok_or_else(|| Error::NotFound(format!("prediction {}", input.prediction_id)))?;
        let task: Task = task.parse()?;
        let corrected = match (input.decision, &input.corrected_label) {
            (Decision::Relabel, None) => {
                return Err(Error::Validation("relabel requires corrected_label".into()))
            }
            (Decision::Relabel, Some(l)) => Some(self.registries.get(task).resolve(l)?),
            (_, Some(_)) => {
                return Err(Error::Validation(
                    "corrected_label is only allowed with relabel".into(),
                ))
            }
            (_, None) => None,
        };
        let verdict = ReviewVerdict {
            id: uuid::Uuid::new_v4().to_string(),
            prediction_id: input.prediction_id.clone(),
            decision: input.decision,
            corrected_label: corrected,
            reviewer: input.reviewer.trim().to_string(),
            created_at: Utc::now(),
        };
        tx.execute(
            &format!("INSERT INTO verdicts ({VERDICT_COLS}) VALUES (?1, ?2, ?3, ?4, ?5, ?6)"),
            params![
                verdict.id,
                verdict.prediction_id,
                verdict.decision.as_str(),
                verdict.corrected_label,
                verdict.reviewer,
                ts(&verdict.created_at)
            ],
        )
        .map_err(|e| {
            if is_constraint(&e) {
                Error::Conflict(format!(
                    "{} already reviewed prediction {}",
                    verdict.reviewer, verdict.prediction_id
                ))
            } else {
                e.into()
            }
        })?;
        tx.commit()?;
        Ok(verdict)
    }

    /// Verdicts on predictions of `task`, in the order they were recorded.
    pub fn verdicts(&self, task: Option<Task>) -> Result<Vec<(ReviewVerdict, Prediction)>> {
        let conn = self.conn();
        let vcols = VERDICT_COLS
            .split(", ")
            .map(|c| format!("v.{c}"))
            .collect::<Vec<_>>()
            .join(", ");
        let pcols = PREDICTION_COLS
            .split(", ")
            .map(|c| format!("p.{c}"))
            .collect::<Vec<_>>()
            .join(", ");
        let mut stmt = conn.prepare(&format!(
            "SELECT {vcols}, {pcols} FROM verdicts v JOIN predictions p ON p.id = v.prediction_id
             WHERE (?1 IS NULL OR p.task = ?1) ORDER BY v.seq"
        ))?;
        let rows = stmt.query_map([task.map(Task::as_str)], |row| {
            let v = verdict_from_row(row)?;
            let task: String = row.get(8)?;
            let probs: String = row.get(11)?;
            let created: String = row.get(14)?;
            let p = Prediction {
                id: row.get(6)?,
                passage_id: row.get(7)?,
                task: task.parse().map_err(bad_column)?,
                label: row.get(9)?,
                score: row.get(10)?,
                probabilities: serde_json::from_str(&probs).map_err(bad_column)?,
                truncated: row.get(12)?,
                model_id: row.get(13)?,
                created_at: parse_ts(&created)?,
            };
            Ok((v, p))
        })?;
        Ok(rows.collect::<rusqlite::Result<_>>()?)
    }

    /// Turns verdicts into training examples, in verdict order.
    ///
    /// Accepts keep the predicted label, relabels carry the corrected
    /// label, a rejected detection `violent` becomes `nonviolent`. Other
    /// rejects carry no usable label and produce nothing.
    pub fn export_feedback(&self, task: Option<Task>) -> Result<Vec<LabeledExample>> {
        let mut out = Vec::new();
        for (v, p) in self.verdicts(task)? {
            let label = match v.decision {
                Decision::Accept => Some(p.label.clone()),
                Decision::Relabel => v.corrected_label.clone(),
                Decision::Reject if p.task == Task::Detect && p.label == VIOLENT => {
                    Some(NONVIOLENT.to_string())
                }
                Decision::Reject => None,
            };
            let Some(label) = label else { continue };
            let passage = self.get_passage(&p.passage_id)?;
            let mut ex = LabeledExample::original(
                passage.id.clone(),
                Some(passage.source.work_id.clone()),
                passage.text,
                p.task,
                label,
            );
            // Several reviewers may judge the same passage; keep ids unique.
            ex.id = format!("{}@{}", passage.id, v.id);
            out.push(ex);
        }
        Ok(out)
    }

    // ---- jobs --------------------------------------------------------

    pub fn put_job(&self, job: &AnnotationJob) -> Result<()> {
        let conn = self.conn();
        let key = AnnotationJob::key(job.task, &job.model_id, &job.works);
        let body = serde_json::to_string(job)?;
        let prior: Option<String> = conn
            .query_row("SELECT body_json FROM jobs WHERE id = ?1", [&job.id], |r| r.get(0))
            .optional()?;
        match prior {
            Some(old) => {
                let old: AnnotationJob = serde_json::from_str(&old)?;
                if old.status != job.status && !old.status.can_move_to(job.status) {
                    return Err(Error::Validation(format!(
                        "job {}: illegal transition {:?} -> {:?}",
                        job.id, old.status, job.status
                    )));
                }
                conn.execute(
                    "UPDATE jobs SET body_json = ?2 WHERE id = ?1",
                    params![job.id, body],
                )?;
            }
            None => {
                conn.execute(
                    "INSERT INTO jobs (id, job_key, body_json, created_seq)
                     VALUES (?1, ?2, ?3, (SELECT COALESCE(MAX(created_seq), 0) + 1 FROM jobs))",
                    params![job.id, key, body],
                )?;
            }
        }
        Ok(())
    }

    pub fn get_job(&self, id: &str) -> Result<AnnotationJob> {
        let body: String = self
            .conn()
            .query_row("SELECT body_json FROM jobs WHERE id = ?1", [id], |r| r.get(0))
            .optional()?
            .ok_or_else(|| Error::NotFound(format!("job {id}")))?;
        Ok(serde_json::from_str(&body)?)
    }

    /// Most recent job with the same (task, model, filter), if any.
    pub fn find_job(&self, task: Task, model_id: &str, works: &[String]) -> Result<Option<AnnotationJob>> {
        let key = AnnotationJob::key(task, model_id, works);
        let body: Option<String> = self
            .conn()
            .query_row(
                "SELECT body_json FROM jobs WHERE job_key = ?1 ORDER BY created_seq DESC LIMIT 1",
                [key],
                |r| r.get(0),
            )
            .optional()?;
        body.map(|b| serde_json::from_str(&b).map_err(Error::from))
            .transpose()
    }
}

fn uncertainty_key(p: &Prediction) -> f64 {
    if p.task == Task::Detect {
        (p.score - 0.5).abs()
    } else {
        -p.entropy()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store() -> Store {
        Store::open_in_memory(Registries::builtin()).unwrap()
    }

    fn passages(n: u32) -> Vec<Passage> {
        (1..=n)
            .map(|i| {
                Passage::new(
                    SourceRef::new("Alexander", 1, i).unwrap(),
                    &format!("Section number {i}.  Text  here."),
                )
                .unwrap()
            })
            .collect()
    }

    fn pred(id: &str, passage: &str, task: Task, label: &str, score: f64) -> Prediction {
        Prediction {
            id: id.into(),
            passage_id: passage.into(),
            task,
            label: label.into(),
            score,
            probabilities: vec![score, 1.0 - score],
            truncated: false,
            model_id: "m".into(),
            created_at: Utc::now(),
        }
    }

    fn verdict(pid: &str, d: Decision, label: Option<&str>, who: &str) -> VerdictInput {
        VerdictInput {
            prediction_id: pid.into(),
            decision: d,
            corrected_label: label.map(str::to_string),
            reviewer: who.into(),
        }
    }

    #[test]
    fn put_passages_is_idempotent() {
        let s = store();
        assert_eq!(s.put_passages(&passages(10)).unwrap(), 10);
        assert_eq!(s.put_passages(&passages(10)).unwrap(), 0);
        assert_eq!(s.passages(None).unwrap().len(), 10);
    }

    #[test]
    fn conflicting_text_rejected_atomically() {
        let s = store();
        s.put_passages(&passages(2)).unwrap();
        let mut batch = passages(3);
        batch[1].text = "something else".into();
        assert!(matches!(s.put_passages(&batch), Err(Error::Conflict(_))));
        assert_eq!(s.passages(None).unwrap().len(), 2, "batch must roll back");
    }

    #[test]
    fn empty_text_is_validation_error() {
        let s = store();
        let mut p = passages(1);
        p[0].text = "   ".into();
        assert!(matches!(s.put_passages(&p), Err(Error::Validation(_))));
    }

    #[test]
    fn passage_roundtrip_preserves_text_and_ref() {
        let s = store();
        let p = Passage::new(
            SourceRef::new("Alexander", 51, 5).unwrap(),
            "“οὕτω δὴ λαβὼν” and so, at last",
        )
        .unwrap();
        s.put_passages(&[p.clone()]).unwrap();
        assert_eq!(s.get_passage(&p.id).unwrap(), p);
    }

    #[test]
    fn verdict_rules() {
        let s = store();
        s.put_passages(&passages(1)).unwrap();
        s.put_predictions(&[pred("p1", "Alexander:1.1", Task::Level, "intersocial", 0.6)])
            .unwrap();

        let v = s
            .record_verdict(&verdict("p1", Decision::Relabel, Some("Interpersonal"), "ann"))
            .unwrap();
        assert_eq!(v.corrected_label.as_deref(), Some("interpersonal"));

        assert!(matches!(
            s.record_verdict(&verdict("p1", Decision::Accept, None, "ann")),
            Err(Error::Conflict(_))
        ));
        assert!(matches!(
            s.record_verdict(&verdict("p1", Decision::Relabel, None, "bob")),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            s.record_verdict(&verdict("p1", Decision::Relabel, Some("battle"), "bob")),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            s.record_verdict(&verdict("nope", Decision::Accept, None, "bob")),
            Err(Error::NotFound(_))
        ));
        s.record_verdict(&verdict("p1", Decision::Accept, None, "bob")).unwrap();
    }

    #[test]
    fn export_feedback_mapping() {
        let s = store();
        s.put_passages(&passages(6)).unwrap();
        s.put_predictions(&[
            pred("a", "Alexander:1.1", Task::Detect, "violent", 0.9),
            pred("b", "Alexander:1.2", Task::Detect, "violent", 0.8),
            pred("c", "Alexander:1.3", Task::Detect, "nonviolent", 0.2),
            pred("d", "Alexander:1.4", Task::Detect, "nonviolent", 0.1),
            pred("e", "Alexander:1.5", Task::Context, "siege", 0.5),
            pred("f", "Alexander:1.6", Task::Context, "siege", 0.5),
        ])
        .unwrap();
        assert!(s.export_feedback(Some(Task::Detect)).unwrap().is_empty());

        s.record_verdict(&verdict("a", Decision::Accept, None, "r")).unwrap();
        s.record_verdict(&verdict("b", Decision::Reject, None, "r")).unwrap();
        s.record_verdict(&verdict("c", Decision::Reject, None, "r")).unwrap();
        s.record_verdict(&verdict("d", Decision::Accept, None, "r")).unwrap();
        s.record_verdict(&verdict("e", Decision::Relabel, Some("battle"), "r")).unwrap();
        s.record_verdict(&verdict("f", Decision::Reject, None, "r")).unwrap();

        let detect = s.export_feedback(Some(Task::Detect)).unwrap();
        let labels: Vec<&str> = detect.iter().map(|e| e.label.as_str()).collect();
        assert_eq!(labels, ["violent", "nonviolent", "nonviolent"]);
        assert_eq!(detect[1].source_id, "Alexander:1.2");

        let ctx = s.export_feedback(Some(Task::Context)).unwrap();
        assert_eq!(ctx.len(), 1);
        assert_eq!(ctx[0].label, "battle");
    }

    #[test]
    fn referenced_rows_cannot_be_deleted() {
        let s = store();
        s.put_passages(&passages(2)).unwrap();
        s.put_predictions(&[pred("a", "Alexander:1.1", Task::Detect, "violent", 0.9)])
            .unwrap();
        s.record_verdict(&verdict("a", Decision::Accept, None, "r")).unwrap();
        assert!(matches!(s.delete_passage("Alexander:1.1"), Err(Error::Conflict(_))));
        assert!(matches!(s.delete_prediction("a"), Err(Error::Conflict(_))));
        s.delete_passage("Alexander:1.2").unwrap();
    }

    #[test]
    fn prediction_must_reference_passage() {
        let s = store();
        assert!(matches!(
            s.put_predictions(&[pred("a", "ghost", Task::Detect, "violent", 0.9)]),
            Err(Error::NotFound(_))
        ));
        s.put_passages(&passages(1)).unwrap();
        assert!(matches!(
            s.put_predictions(&[pred("a", "Alexander:1.1", Task::Detect, "maybe", 0.9)]),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn queue_is_uncertainty_first() {
        let s = store();
        assert!(s.review_queue(Some(Task::Detect)).unwrap().is_empty());
        s.put_passages(&passages(3)).unwrap();
        s.put_predictions(&[
            pred("sure", "Alexander:1.1", Task::Detect, "violent", 0.97),
            pred("edge", "Alexander:1.2", Task::Detect, "violent", 0.51),
            pred("low", "Alexander:1.3", Task::Detect, "nonviolent", 0.2),
        ])
        .unwrap();
        let q = s.review_queue(Some(Task::Detect)).unwrap();
        let ids: Vec<&str> = q.iter().map(|i| i.prediction.id.as_str()).collect();
        assert_eq!(ids, ["edge", "low", "sure"]);
        assert_eq!(q[0].citation, "Alexander 1.2");

        s.record_verdict(&verdict("edge", Decision::Accept, None, "r")).unwrap();
        let q = s.review_queue(Some(Task::Detect)).unwrap();
        assert!(q.iter().all(|i| i.prediction.id != "edge"));
    }

    #[test]
    fn categorization_queue_by_entropy() {
        let s = store();
        s.put_passages(&passages(2)).unwrap();
        let mut sharp = pred("sharp", "Alexander:1.1", Task::Level, "intersocial", 0.97);
        sharp.probabilities = vec![0.01, 0.01, 0.97, 0.01];
        let mut flat = pred("flat", "Alexander:1.2", Task::Level, "intersocial", 0.3);
        flat.probabilities = vec![0.25, 0.2, 0.3, 0.25];
        s.put_predictions(&[sharp, flat]).unwrap();
        let q = s.review_queue(Some(Task::Level)).unwrap();
        assert_eq!(q[0].prediction.id, "flat");
    }

    #[test]
    fn job_transitions_are_monotone() {
        let s = store();
        let mut job = AnnotationJob {
            id: "j".into(),
            task: Task::Detect,
            model_id: "m".into(),
            works: vec!["B".into(), "A".into()],
            status: JobStatus::Queued,
            total: 1,
            processed: 0,
            counts: BTreeMap::new(),
            error: None,
            created_at: Utc::now(),
        };
        s.put_job(&job).unwrap();
        job.status = JobStatus::Running;
        s.put_job(&job).unwrap();
        job.status = JobStatus::Done;
        s.put_job(&job).unwrap();
        job.status = JobStatus::Running;
        assert!(s.put_job(&job).is_err());
        let found = s
            .find_job(Task::Detect, "m", &["A".into(), "B".into()])
            .unwrap()
            .unwrap();
        assert_eq!(found.status, JobStatus::Done);
    }

    #[test]
    fn concurrent_duplicate_verdicts_resolve_to_one() {
        let s = std::sync::Arc::new(store());
        s.put_passages(&passages(1)).unwrap();
        s.put_predictions(&[pred("a", "Alexander:1.1", Task::Detect, "violent", 0.9)])
            .unwrap();
        let handles: Vec<_> = (0..8)
            .map(|_| {
                let s = s.clone();
                std::thread::spawn(move || {
                    s.record_verdict(&verdict("a", Decision::Accept, None, "same")).is_ok()
                })
            })
            .collect();
        let ok = handles.into_iter().map(|h| h.join().unwrap()).filter(|&x| x).count();
        assert_eq!(ok, 1);
    }
}
