//! Line-delimited corpus parsing, validation and deduplication.
//!
//! One JSON object per line with the fields `id`, `title`, `abstract`,
//! `source` and an optional `label`. Bad lines are reported and skipped;
//! parsing only fails on an I/O error from the underlying reader.

use std::collections::HashSet;
use std::fmt;
use std::io::{self, BufRead};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::class::DocClass;

/// Bibliographic database a record was exported from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Pubmed,
    Embase,
    Medrxiv,
    Biorxiv,
    #[default]
    Other,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Pubmed => "pubmed",
            Source::Embase => "embase",
            Source::Medrxiv => "medrxiv",
            Source::Biorxiv => "biorxiv",
            Source::Other => "other",
        }
    }

    fn parse(raw: &str) -> Option<Source> {
        match raw.trim().to_lowercase().as_str() {
            "pubmed" => Some(Source::Pubmed),
            "embase" => Some(Source::Embase),
            "medrxiv" => Some(Source::Medrxiv),
            "biorxiv" => Some(Source::Biorxiv),
            "other" | "" => Some(Source::Other),
            _ => None,
        }
    }
}

/// One article.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub id: String,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    pub source: Source,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<DocClass>,
}

impl DocumentRecord {
    /// Text fed to the classifiers: title and abstract joined by a space.
    pub fn text(&self) -> String {
        classification_text(&self.title, &self.abstract_text)
    }

    /// Serialize as one canonical corpus line (no trailing newline).
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("record serialization is infallible")
    }
}

pub fn classification_text(title: &str, abstract_text: &str) -> String {
    let mut text = String::with_capacity(title.len() + abstract_text.len() + 1);
    text.push_str(title);
    text.push(' ');
    text.push_str(abstract_text);
    text
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordErrorKind {
    MalformedLine,
    MissingId,
    EmptyText,
    UnknownLabel,
    UnknownSource,
}

impl fmt::Display for RecordErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RecordErrorKind::MalformedLine => "malformed-line",
            RecordErrorKind::MissingId => "missing-id",
            RecordErrorKind::EmptyText => "empty-text",
            RecordErrorKind::UnknownLabel => "unknown-label",
            RecordErrorKind::UnknownSource => "unknown-source",
        })
    }
}

/// A problem with a single corpus line. `line` is 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {kind}: {reason}")]
pub struct RecordError {
    pub line: usize,
    pub kind: RecordErrorKind,
    pub reason: String,
}

#[derive(Debug, Default)]
pub struct ParsedCorpus {
    pub records: Vec<DocumentRecord>,
    pub errors: Vec<RecordError>,
    /// Non-fatal issues; the record was still accepted.
    pub warnings: Vec<RecordError>,
}

#[derive(Deserialize)]
struct RawRecord {
    id: Option<String>,
    #[serde(default)]
    title: Option<String>,
    #[serde(default, rename = "abstract")]
    abstract_text: Option<String>,
    #[serde(default)]
    source: Option<String>,
    #[serde(default)]
    label: Option<String>,
}

/// Parse a line-delimited corpus. Blank lines are skipped; every other line
/// yields exactly one record or one error.
pub fn parse_corpus<R: BufRead>(mut reader: R) -> io::Result<ParsedCorpus> {
    let mut out = ParsedCorpus::default();
    let mut buf = Vec::new();
    let mut line_no = 0;
    loop {
        buf.clear();
        if reader.read_until(b'\n', &mut buf)? == 0 {
            break;
        }
        line_no += 1;
        let line = match std::str::from_utf8(&buf) {
            Ok(s) => s,
            Err(e) => {
                out.errors.push(RecordError {
                    line: line_no,
                    kind: RecordErrorKind::MalformedLine,
                    reason: format!("invalid UTF-8: {e}"),
                });
                continue;
            }
        };
        if line.trim().is_empty() {
            continue;
        }
        match parse_record(line, line_no) {
            Ok((record, warning)) => {
                out.records.push(record);
                out.warnings.extend(warning);
            }
            Err(err) => out.errors.push(err),
        }
    }
    Ok(out)
}

/// Convenience wrapper over [`parse_corpus`] for in-memory text.
pub fn parse_corpus_str(text: &str) -> ParsedCorpus {
    parse_corpus(text.as_bytes()).expect("reading from memory cannot fail")
}

/// Parse one non-blank corpus line. The optional second value is a
/// non-fatal warning.
pub fn parse_record(
    line: &str,
    line_no: usize,
) -> Result<(DocumentRecord, Option<RecordError>), RecordError> {
    let err = |kind, reason: String| RecordError {
        line: line_no,
        kind,
        reason,
    };
    let raw: RawRecord = serde_json::from_str(line.trim())
        .map_err(|e| err(RecordErrorKind::MalformedLine, e.to_string()))?;

    let id = match raw.id {
        Some(id) if !id.trim().is_empty() => id,
        _ => return Err(err(RecordErrorKind::MissingId, "record has no id".into())),
    };
    let title = raw.title.unwrap_or_default();
    let abstract_text = raw.abstract_text.unwrap_or_default();
    if title.trim().is_empty() && abstract_text.trim().is_empty() {
        return Err(err(
            RecordErrorKind::EmptyText,
            format!("record {id:?} has neither title nor abstract"),
        ));
    }
    let label = match raw.label.as_deref().map(str::trim) {
        None | Some("") => None,
        Some(l) => Some(l.parse::<DocClass>().map_err(|e| {
            err(RecordErrorKind::UnknownLabel, e.to_string())
        })?),
    };
    let raw_source = raw.source.unwrap_or_default();
    let (source, warning) = match Source::parse(&raw_source) {
        Some(s) => (s, None),
        None => {
            log::warn!("line {line_no}: unknown source {raw_source:?}, using \"other\"");
            (
                Source::Other,
                Some(err(
                    RecordErrorKind::UnknownSource,
                    format!("unknown source {raw_source:?}, using \"other\""),
                )),
            )
        }
    };
    Ok((
        DocumentRecord {
            id,
            title,
            abstract_text,
            source,
            label,
        },
        warning,
    ))
}

/// Keep the first record for each id. Returns the survivors and how many
/// were dropped.
pub fn dedup(records: Vec<DocumentRecord>) -> (Vec<DocumentRecord>, usize) {
    let before = records.len();
    let mut seen = HashSet::with_capacity(before);
    let kept: Vec<_> = records
        .into_iter()
        .filter(|r| seen.insert(r.id.clone()))
        .collect();
    let removed = before - kept.len();
    (kept, removed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(id: &str) -> DocumentRecord {
        DocumentRecord {
            id: id.into(),
            title: format!("title {id}"),
            abstract_text: String::new(),
            source: Source::Pubmed,
            label: None,
        }
    }

    #[test]
    fn empty_stream() {
        let parsed = parse_corpus_str("");
        assert!(parsed.records.is_empty());
        assert!(parsed.errors.is_empty());
    }

    #[test]
    fn well_formed_lines_pass_through() {
        let text = r#"{"id":"a","title":"T1","abstract":"A1","source":"pubmed"}
{"id":"b","title":"T2","abstract":"A2","source":"embase","label":"excluded"}
{"id":"c","title":"","abstract":"A3","source":"medrxiv"}
"#;
        let parsed = parse_corpus_str(text);
        assert_eq!(parsed.errors, vec![]);
        let ids: Vec<_> = parsed.records.iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
        assert_eq!(parsed.records[1].label, Some(DocClass::Excluded));
        assert_eq!(parsed.records[2].source, Source::Medrxiv);
    }

    #[test]
    fn label_matching_is_case_and_space_insensitive() {
        let parsed =
            parse_corpus_str(r#"{"id":"x","title":"t","abstract":"","label":"Systematic  Review"}"#);
        assert_eq!(parsed.records[0].label, Some(DocClass::SystematicReview));
    }

    #[test]
    fn each_bad_line_reports_its_kind_and_line() {
        let text = "not json\n\n{\"title\":\"t\"}\n{\"id\":\"\",\"title\":\"t\"}\n{\"id\":\"e\",\"title\":\" \",\"abstract\":\"\"}\n{\"id\":\"l\",\"title\":\"t\",\"label\":\"meta-analysis\"}\n{\"id\":\"ok\",\"title\":\"t\"}\n";
        let parsed = parse_corpus_str(text);
        let kinds: Vec<_> = parsed.errors.iter().map(|e| (e.line, e.kind)).collect();
        assert_eq!(
            kinds,
            vec![
                (1, RecordErrorKind::MalformedLine),
                (3, RecordErrorKind::MissingId),
                (4, RecordErrorKind::MissingId),
                (5, RecordErrorKind::EmptyText),
                (6, RecordErrorKind::UnknownLabel),
            ]
        );
        assert_eq!(parsed.records.len(), 1);
        assert_eq!(parsed.records[0].id, "ok");
    }

    #[test]
    fn invalid_utf8_line_does_not_abort() {
        let mut bytes = b"{\"id\":\"a\",\"title\":\"t\"}\n".to_vec();
        bytes.extend_from_slice(&[0xff, 0xfe, b'\n']);
        bytes.extend_from_slice(b"{\"id\":\"b\",\"title\":\"t\"}");
        let parsed = parse_corpus(&bytes[..]).unwrap();
        assert_eq!(parsed.records.len(), 2);
        assert_eq!(parsed.errors.len(), 1);
        assert_eq!(parsed.errors[0].line, 2);
    }

    #[test]
    fn unknown_source_downgrades_to_other() {
        let parsed = parse_corpus_str(r#"{"id":"a","title":"t","source":"Scopus"}"#);
        assert!(parsed.errors.is_empty());
        assert_eq!(parsed.records[0].source, Source::Other);
        assert_eq!(parsed.warnings.len(), 1);
        assert_eq!(parsed.warnings[0].kind, RecordErrorKind::UnknownSource);
    }

    #[test]
    fn dedup_examples() {
        assert_eq!(dedup(vec![]), (vec![], 0));
        let (kept, removed) = dedup(vec![rec("A"), rec("B"), rec("A")]);
        assert_eq!(kept, vec![rec("A"), rec("B")]);
        assert_eq!(removed, 1);
        let ids = ["a", "a", "b", "b", "b"];
        let (kept, removed) = dedup(ids.iter().map(|i| rec(i)).collect());
        assert_eq!(kept.len(), 2);
        assert_eq!(removed, 3);
    }

    #[test]
    fn dedup_keeps_first_occurrence() {
        let mut second = rec("a");
        second.title = "other".into();
        let (kept, _) = dedup(vec![rec("a"), second]);
        assert_eq!(kept[0].title, "title a");
    }

    fn arb_record() -> impl Strategy<Value = DocumentRecord> {
        (
            "[a-z0-9]{1,8}",
            "\\PC{1,40}",
            "\\PC{0,80}",
            prop::sample::select(vec![
                Source::Pubmed,
                Source::Embase,
                Source::Medrxiv,
                Source::Biorxiv,
                Source::Other,
            ]),
            prop::option::of(prop::sample::select(DocClass::ALL.to_vec())),
        )
            .prop_filter("needs text", |(_, t, _, _, _)| !t.trim().is_empty())
            .prop_map(|(id, title, abstract_text, source, label)| DocumentRecord {
                id,
                title,
                abstract_text,
                source,
                label,
            })
    }

    proptest! {
        #[test]
        fn serialize_then_parse_is_identity(records in prop::collection::vec(arb_record(), 0..8)) {
            let text: String = records.iter().map(|r| r.to_line() + "\n").collect();
            let parsed = parse_corpus_str(&text);
            prop_assert!(parsed.errors.is_empty());
            prop_assert_eq!(parsed.records, records);
        }

        #[test]
        fn dedup_is_idempotent(ids in prop::collection::vec("[abc]", 0..20)) {
            let records: Vec<_> = ids.iter().map(|i| rec(i)).collect();
            let n = records.len();
            let (once, removed) = dedup(records);
            prop_assert_eq!(once.len() + removed, n);
            let (twice, removed_again) = dedup(once.clone());
            prop_assert_eq!(removed_again, 0);
            prop_assert_eq!(twice, once);
        }
    }
}
