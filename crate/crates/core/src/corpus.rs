//! Corpus ingestion: line-delimited paper records, topic filtering and
//! introduction extraction.
//!
//! Each line of a corpus file is one JSON object:
//!
//! ```text
//! {"paper_id": "p1", "title": "...", "sections": [{"heading": "1. Introduction", "text": "..."}]}
//! ```

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read corpus {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("topic keyword must be non-empty")]
    EmptyKeyword,
    #[error("topic keyword {0:?} has leading or trailing whitespace")]
    UntrimmedKeyword(String),
}

impl CorpusError {
    /// Malformed lines are skipped with a warning rather than aborting the load.
    pub fn is_recoverable(&self) -> bool {
        matches!(self, CorpusError::Malformed { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub heading: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaperRecord {
    pub paper_id: String,
    pub title: String,
    pub sections: Vec<Section>,
    #[serde(skip)]
    pub source_path: String,
}

impl PaperRecord {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("paper record serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopicFilter {
    keyword: String,
    case_sensitive: bool,
}

impl TopicFilter {
    pub fn new(keyword: impl Into<String>) -> Result<Self, CorpusError> {
        let keyword = keyword.into();
        if keyword.is_empty() {
            return Err(CorpusError::EmptyKeyword);
        }
        if keyword.trim() != keyword {
            return Err(CorpusError::UntrimmedKeyword(keyword));
        }
        Ok(Self {
            keyword,
            case_sensitive: false,
        })
    }

    pub fn case_sensitive(mut self, yes: bool) -> Self {
        self.case_sensitive = yes;
        self
    }

    pub fn keyword(&self) -> &str {
        &self.keyword
    }

    pub fn matches(&self, record: &PaperRecord) -> bool {
        let texts = std::iter::once(record.title.as_str()).chain(record.sections.iter().map(|s| s.text.as_str()));
        if self.case_sensitive {
            texts.into_iter().any(|t| t.contains(&self.keyword))
        } else {
            let needle = self.keyword.to_lowercase();
            texts.into_iter().any(|t| t.to_lowercase().contains(&needle))
        }
    }
}

/// Streaming reader over a corpus file.
///
/// Yields `Err(CorpusError::Malformed)` for lines that fail to parse or that
/// repeat an earlier `paper_id`; callers decide whether to skip them.
pub struct CorpusReader<R> {
    lines: std::io::Lines<R>,
    line_no: usize,
    seen: HashSet<String>,
    source: String,
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<CorpusReader<BufReader<File>>, CorpusError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(CorpusReader::new(BufReader::new(file), path.display().to_string()))
}

impl<R: BufRead> CorpusReader<R> {
    pub fn new(reader: R, source: impl Into<String>) -> Self {
        Self {
            lines: reader.lines(),
            line_no: 0,
            seen: HashSet::new(),
            source: source.into(),
        }
    }

    fn parse_line(&mut self, line: &str) -> Result<PaperRecord, CorpusError> {
        let malformed = |reason: String| CorpusError::Malformed {
            line: self.line_no,
            reason,
        };
        let mut record: PaperRecord = serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
        if record.paper_id.trim().is_empty() {
            return Err(malformed("empty paper_id".into()));
        }
        if !self.seen.insert(record.paper_id.clone()) {
            return Err(malformed(format!("duplicate paper_id {:?}", record.paper_id)));
        }
        record.source_path = self.source.clone();
        Ok(record)
    }
}

impl<R: BufRead> Iterator for CorpusReader<R> {
    type Item = Result<PaperRecord, CorpusError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = self.lines.next()?;
            self.line_no += 1;
            let line = match line {
                Ok(l) => l,
                Err(source) => {
                    return Some(Err(CorpusError::Io {
                        path: PathBuf::from(&self.source),
                        source,
                    }))
                }
            };
            if line.trim().is_empty() {
                continue;
            }
            return Some(self.parse_line(&line));
        }
    }
}

/// Records plus the warnings produced for skipped lines.
#[derive(Debug, Default)]
pub struct LoadedCorpus {
    pub records: Vec<PaperRecord>,
    pub warnings: Vec<String>,
}

/// Drain a reader, skipping malformed lines. I/O errors are fatal.
pub fn collect_corpus<I>(reader: I) -> Result<LoadedCorpus, CorpusError>
where
    I: Iterator<Item = Result<PaperRecord, CorpusError>>,
{
    let mut out = LoadedCorpus::default();
    for item in reader {
        match item {
            Ok(r) => out.records.push(r),
            Err(e) if e.is_recoverable() => {
                log::warn!("skipping corpus record: {e}");
                out.warnings.push(format!("skipped malformed record: {e}"));
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

pub fn read_corpus(path: impl AsRef<Path>) -> Result<LoadedCorpus, CorpusError> {
    collect_corpus(load_corpus(path)?)
}

pub fn filter_by_topic<'a, I>(records: I, filter: &'a TopicFilter) -> impl Iterator<Item = PaperRecord> + 'a
where
    I: IntoIterator<Item = PaperRecord>,
    I::IntoIter: 'a,
{
    records.into_iter().filter(move |r| filter.matches(r))
}

pub fn write_corpus<'a, W: Write>(
    mut out: W,
    records: impl IntoIterator<Item = &'a PaperRecord>,
) -> std::io::Result<()> {
    for r in records {
        writeln!(out, "{}", r.to_json_line())?;
    }
    Ok(())
}

fn normalize_heading(heading: &str) -> String {
    let lower = heading.trim().to_lowercase();
    let mut rest = lower.as_str();
    // Strip numbering like "1.", "1.2", "I.", "iv)", "A." before the title word.
    loop {
        let trimmed = rest.trim_start_matches(|c: char| c.is_whitespace() || ".):-–".contains(c));
        let token_end = trimmed
            .find(|c: char| c.is_whitespace() || ".)".contains(c))
            .unwrap_or(trimmed.len());
        let token = &trimmed[..token_end];
        let after = &trimmed[token_end..];
        let is_number = !token.is_empty() && token.chars().all(|c| c.is_ascii_digit());
        let is_roman = !token.is_empty()
            && token.len() <= 6
            && token.chars().all(|c| "ivxlc".contains(c))
            && (after.starts_with('.') || after.starts_with(')'));
        let is_letter = token.len() == 1
            && token.chars().all(|c| c.is_ascii_alphabetic())
            && (after.starts_with('.') || after.starts_with(')'));
        if (is_number || is_roman || is_letter) && token_end < trimmed.len() {
            rest = after;
        } else {
            return trimmed
                .trim_end_matches(|c: char| c.is_whitespace() || c == '.' || c == ':')
                .to_string();
        }
    }
}

/// Text of the first section whose normalized heading is "introduction".
pub fn extract_introduction(record: &PaperRecord) -> Option<&str> {
    record
        .sections
        .iter()
        .find(|s| normalize_heading(&s.heading) == "introduction")
        .map(|s| s.text.as_str())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn rec(id: &str, title: &str, sections: &[(&str, &str)]) -> PaperRecord {
        PaperRecord {
            paper_id: id.into(),
            title: title.into(),
            sections: sections
                .iter()
                .map(|(h, t)| Section {
                    heading: (*h).into(),
                    text: (*t).into(),
                })
                .collect(),
            source_path: String::new(),
        }
    }

    fn read(text: &str) -> LoadedCorpus {
        collect_corpus(CorpusReader::new(Cursor::new(text), "mem")).unwrap()
    }

    #[test]
    fn three_good_lines_in_order() {
        let text = (1..=3)
            .map(|i| rec(&format!("p{i}"), "t", &[]).to_json_line())
            .collect::<Vec<_>>()
            .join("\n");
        let c = read(&text);
        let ids: Vec<_> = c.records.iter().map(|r| r.paper_id.as_str()).collect();
        assert_eq!(ids, ["p1", "p2", "p3"]);
        assert!(c.warnings.is_empty());
    }

    #[test]
    fn empty_file_is_empty_stream() {
        let c = read("");
        assert!(c.records.is_empty() && c.warnings.is_empty());
    }

    #[test]
    fn malformed_line_skipped_with_line_number() {
        let text = format!(
            "{}\n{{not json\n{}\n",
            rec("a", "t", &[]).to_json_line(),
            rec("b", "t", &[]).to_json_line()
        );
        let c = read(&text);
        assert_eq!(c.records.len(), 2);
        assert_eq!(c.warnings.len(), 1);
        assert!(c.warnings[0].contains("line 2"), "{}", c.warnings[0]);
    }

    #[test]
    fn duplicate_id_is_malformed() {
        let line = rec("a", "t", &[]).to_json_line();
        let c = read(&format!("{line}\n{line}\n"));
        assert_eq!(c.records.len(), 1);
        assert_eq!(c.warnings.len(), 1);
    }

    #[test]
    fn missing_file_is_fatal() {
        assert!(matches!(
            load_corpus("/definitely/not/here.jsonl"),
            Err(CorpusError::Io { .. })
        ));
    }

    #[test]
    fn topic_filter_keeps_matching_records() {
        let records = vec![
            rec("1", "A", &[("Intro", "We use HotpotQA here.")]),
            rec("2", "B", &[("Intro", "Nothing relevant.")]),
            rec("3", "C", &[("Intro", "SQuAD only.")]),
            rec("4", "D", &[("Method", "Evaluated on HotpotQA and others.")]),
            rec("5", "E", &[]),
        ];
        let f = TopicFilter::new("HotpotQA").unwrap();
        let kept: Vec<_> = filter_by_topic(records, &f).map(|r| r.paper_id).collect();
        assert_eq!(kept, ["1", "4"]);
    }

    #[test]
    fn topic_filter_case_folding() {
        let r = rec("1", "Multi-hop on HotpotQA", &[]);
        assert!(TopicFilter::new("hotpotqa").unwrap().matches(&r));
        assert!(!TopicFilter::new("hotpotqa").unwrap().case_sensitive(true).matches(&r));
    }

    #[test]
    fn topic_filter_rejects_bad_keywords() {
        assert!(matches!(TopicFilter::new(""), Err(CorpusError::EmptyKeyword)));
        assert!(matches!(TopicFilter::new(" qa"), Err(CorpusError::UntrimmedKeyword(_))));
    }

    #[test]
    fn introduction_after_numbering_strip() {
        let r = rec("p", "t", &[("1. Introduction", "A. B."), ("2. Method", "C.")]);
        assert_eq!(extract_introduction(&r), Some("A. B."));
        let r = rec("p", "t", &[("I. INTRODUCTION", "x")]);
        assert_eq!(extract_introduction(&r), Some("x"));
        let r = rec("p", "t", &[("1.1 Introduction", "y")]);
        assert_eq!(extract_introduction(&r), Some("y"));
    }

    #[test]
    fn introduction_absent() {
        let r = rec("p", "t", &[("Background", "x"), ("Introduction to QA", "y")]);
        assert_eq!(extract_introduction(&r), None);
    }

    #[test]
    fn introduction_first_match_wins() {
        let r = rec("p", "t", &[("INTRODUCTION", "first"), ("Introduction", "second")]);
        assert_eq!(extract_introduction(&r), Some("first"));
    }

    #[test]
    fn roman_numeral_words_are_not_stripped_blindly() {
        assert_eq!(normalize_heading("Introduction"), "introduction");
        assert_eq!(normalize_heading("IV. Introduction"), "introduction");
        assert_eq!(normalize_heading("A) Introduction:"), "introduction");
    }
}
