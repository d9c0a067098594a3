//! Section-structured corpus files.
//!
//! One work per UTF-8 file. Sections start with a header line
//! `@@ <work_id> <chapter>.<section>`; every following line up to the next
//! header is section text. Files ending in `.jsonl` are read as passage
//! records instead.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use tracing::warn;

use crate::error::{Error, Result};
use crate::store::jsonl::read_jsonl;
use crate::store::{Passage, SourceRef};
use crate::text::normalize;

#[derive(Debug, Clone, Default)]
pub struct ParsedCorpus {
    /// Ordered by (work_id, chapter, section).
    pub passages: Vec<Passage>,
    pub warnings: Vec<String>,
}

/// Parses every file and merges the result. A citation that appears twice,
/// in one file or across files, is an error.
pub fn parse_corpus(files: &[PathBuf]) -> Result<ParsedCorpus> {
    let mut by_ref: BTreeMap<SourceRef, (Passage, PathBuf)> = BTreeMap::new();
    let mut warnings = Vec::new();
    for file in files {
        let passages = if file.extension().is_some_and(|e| e == "jsonl") {
            let mut ps: Vec<Passage> = read_jsonl(file)?;
            for p in &mut ps {
                p.text = normalize(&p.text);
                p.validate()?;
            }
            ps
        } else {
            let src = std::fs::read_to_string(file).map_err(|e| Error::io(file, e))?;
            let parsed = parse_corpus_str(&src, file)?;
            warnings.extend(parsed.warnings);
            parsed.passages
        };
        for p in passages {
            if let Some((_, prev)) = by_ref.get(&p.source) {
                return Err(Error::Conflict(format!(
                    "{} is defined in both {} and {}",
                    p.source,
                    prev.display(),
                    file.display()
                )));
            }
            by_ref.insert(p.source.clone(), (p, file.clone()));
        }
    }
    Ok(ParsedCorpus {
        passages: by_ref.into_values().map(|(p, _)| p).collect(),
        warnings,
    })
}

fn parse_header(rest: &str) -> Option<SourceRef> {
    let mut parts = rest.split_whitespace();
    let work = parts.next()?;
    let cite = parts.next()?;
    if parts.next().is_some() {
        return None;
    }
    let (ch, sec) = cite.split_once('.')?;
    SourceRef::new(work, ch.parse().ok()?, sec.parse().ok()?).ok()
}

/// Parses one corpus file held in memory; `origin` only labels errors.
pub fn parse_corpus_str(src: &str, origin: &Path) -> Result<ParsedCorpus> {
    let err = |line: usize, message: String| Error::Parse {
        file: origin.to_path_buf(),
        line,
        message,
    };
    let mut sections: Vec<(SourceRef, usize, String)> = Vec::new();
    let mut seen: BTreeMap<SourceRef, usize> = BTreeMap::new();
    let mut work: Option<String> = None;

    for (i, line) in src.lines().enumerate() {
        let lineno = i + 1;
        if let Some(rest) = line.strip_prefix("@@") {
            let source = parse_header(rest).ok_or_else(|| {
                err(
                    lineno,
                    format!("malformed section header {line:?}, expected `@@ <work_id> <chapter>.<section>`"),
                )
            })?;
            match &work {
                Some(w) if *w != source.work_id => {
                    return Err(err(
                        lineno,
                        format!("file mixes works {w} and {}", source.work_id),
                    ))
                }
                None => work = Some(source.work_id.clone()),
                _ => {}
            }
            if let Some(first) = seen.insert(source.clone(), lineno) {
                return Err(err(
                    lineno,
                    format!("duplicate section {source} (first at line {first})"),
                ));
            }
            sections.push((source, lineno, String::new()));
        } else if let Some((_, _, text)) = sections.last_mut() {
            text.push_str(line);
            text.push('\n');
        } else if !line.trim().is_empty() {
            return Err(err(lineno, "text before the first section header".into()));
        }
    }

    let mut out = ParsedCorpus::default();
    for (source, lineno, text) in sections {
        let text = normalize(&text);
        if text.is_empty() {
            let msg = format!("{}:{lineno}: empty section {source} skipped", origin.display());
            warn!("{msg}");
            out.warnings.push(msg);
            continue;
        }
        out.passages.push(Passage::new(source, &text)?);
    }
    out.passages.sort_by(|a, b| a.source.cmp(&b.source));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(src: &str) -> Result<ParsedCorpus> {
        parse_corpus_str(src, Path::new("t.txt"))
    }

    #[test]
    fn three_sections_in_order() {
        let src = "@@ Numa 1.2\nsecond\n@@ Numa 1.1\nfirst\n  line\n@@ Numa 2.1\nthird\n";
        let c = parse(src).unwrap();
        let refs: Vec<String> = c.passages.iter().map(|p| p.source.to_string()).collect();
        assert_eq!(refs, ["Numa 1.1", "Numa 1.2", "Numa 2.1"]);
        assert_eq!(c.passages[0].text, "first line");
        assert_eq!(c.passages[0].id, "Numa:1.1");
    }

    #[test]
    fn duplicate_header_is_error() {
        let err = parse("@@ Numa 1.1\na\n@@ Numa 1.1\nb\n").unwrap_err();
        match err {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 3);
                assert!(message.contains("duplicate"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_header_reports_line() {
        for bad in ["@@ Numa 1\nx\n", "@@ Numa a.b\nx\n", "@@ Numa 0.1\nx\n", "@@\nx\n"] {
            let err = parse(&format!("@@ Numa 1.1\nok\n{bad}")).unwrap_err();
            assert!(matches!(err, Error::Parse { line: 3, .. }), "{bad:?}: {err:?}");
        }
    }

    #[test]
    fn empty_section_skipped_with_warning() {
        let c = parse("@@ Numa 1.1\n\n  \n@@ Numa 1.2\ntext\n").unwrap();
        assert_eq!(c.passages.len(), 1);
        assert_eq!(c.warnings.len(), 1);
    }

    #[test]
    fn mixed_works_rejected() {
        assert!(parse("@@ Numa 1.1\na\n@@ Solon 1.1\nb\n").is_err());
    }

    #[test]
    fn leading_text_rejected() {
        assert!(parse("preface\n@@ Numa 1.1\na\n").is_err());
    }

    #[test]
    fn files_and_jsonl_merge() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("numa.txt");
        std::fs::write(&a, "@@ Numa 1.1\nalpha\n").unwrap();
        let b = dir.path().join("solon.jsonl");
        std::fs::write(
            &b,
            r#"{"id":"s1","work_id":"Solon","chapter":1,"section":1,"text":" beta ","lang":"en"}"#,
        )
        .unwrap();
        let c = parse_corpus(&[b.clone(), a.clone()]).unwrap();
        assert_eq!(c.passages.len(), 2);
        assert_eq!(c.passages[0].source.work_id, "Numa");
        assert_eq!(c.passages[1].text, "beta");

        let dup = dir.path().join("numa2.txt");
        std::fs::write(&dup, "@@ Numa 1.1\nalpha again\n").unwrap();
        assert!(matches!(parse_corpus(&[a, dup]), Err(Error::Conflict(_))));
    }
}
