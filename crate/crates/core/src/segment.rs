//! Rule-based sentence segmentation tuned for scientific prose, plus
//! manual overrides and prelude selection.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SegmentError {
    #[error("more than one override for paper {0:?}")]
    DuplicateOverride(String),
    #[error("override for paper {0:?} has no sentences")]
    EmptyOverride(String),
    #[error("override for paper {paper_id:?} contains a blank sentence at position {position}")]
    BlankOverrideSentence { paper_id: String, position: usize },
    #[error("prelude size must be at least 1")]
    ZeroPrelude,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Sentence {
    pub paper_id: String,
    pub index: usize,
    pub text: String,
}

/// All sentences of one paper, indices contiguous from 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentedPaper {
    pub paper_id: String,
    pub sentences: Vec<Sentence>,
}

impl SegmentedPaper {
    pub fn from_texts(paper_id: &str, texts: impl IntoIterator<Item = String>) -> Self {
        let sentences = texts
            .into_iter()
            .enumerate()
            .map(|(index, text)| Sentence {
                paper_id: paper_id.to_string(),
                index,
                text,
            })
            .collect();
        Self {
            paper_id: paper_id.to_string(),
            sentences,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentationOverride {
    pub paper_id: String,
    pub sentences: Vec<String>,
}

const ABBREVIATIONS: &[&str] = &[
    "al", "e.g", "i.e", "fig", "figs", "eq", "eqs", "vs", "cf", "etc", "sec", "secs", "tab", "no", "nos", "vol", "pp",
    "ref", "refs", "approx", "resp", "dr", "mr", "mrs", "ms", "prof", "ch", "chap", "viz", "ca", "incl", "eds", "ed",
    "st", "jr", "sr", "def", "thm", "lem", "prop", "alg", "appx", "app",
];

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '?' | '!')
}

fn is_closer(c: char) -> bool {
    matches!(c, ')' | ']' | '}' | '"' | '\'' | '”' | '’')
}

fn is_opener(c: char) -> bool {
    matches!(c, '(' | '[' | '{' | '"' | '\'' | '“' | '‘')
}

/// True when the token ending right before a period is an abbreviation or initial.
fn is_abbreviation(token: &str) -> bool {
    let token = token.trim_start_matches(is_opener).to_lowercase();
    if token.is_empty() {
        return false;
    }
    if ABBREVIATIONS.contains(&token.as_str()) {
        return true;
    }
    // Initials and dotted acronyms: "J", "U.S", "a.k.a"
    token
        .split('.')
        .all(|part| part.chars().count() == 1 && part.chars().all(char::is_alphabetic))
}

#[derive(Default)]
struct Nesting {
    brackets: usize,
    straight_quote: bool,
    curly_quotes: usize,
}

impl Nesting {
    fn update(&mut self, c: char) {
        match c {
            '(' | '[' | '{' => self.brackets += 1,
            ')' | ']' | '}' => self.brackets = self.brackets.saturating_sub(1),
            '"' => self.straight_quote = !self.straight_quote,
            '“' => self.curly_quotes += 1,
            '”' => self.curly_quotes = self.curly_quotes.saturating_sub(1),
            _ => {}
        }
    }

    fn is_open(&self) -> bool {
        self.brackets > 0 || self.straight_quote || self.curly_quotes > 0
    }
}

/// Split text into sentences. Every split happens at whitespace, so joining
/// the output with single spaces reproduces the input up to whitespace.
pub fn segment(text: &str) -> Vec<String> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut sentences = Vec::new();
    let mut nesting = Nesting::default();
    let mut start = 0usize;
    let mut i = 0usize;

    while i < chars.len() {
        let (_, c) = chars[i];
        if !is_terminator(c) {
            nesting.update(c);
            i += 1;
            continue;
        }

        let run_start = i;
        while i < chars.len() && is_terminator(chars[i].1) {
            i += 1;
        }
        let single_period = i - run_start == 1 && c == '.';
        while i < chars.len() && is_closer(chars[i].1) {
            nesting.update(chars[i].1);
            i += 1;
        }
        let span_end = chars.get(i).map_or(text.len(), |&(b, _)| b);

        if i >= chars.len() || !chars[i].1.is_whitespace() || nesting.is_open() {
            continue;
        }
        let next = chars[i..].iter().find(|(_, ch)| !ch.is_whitespace());
        let Some(&(_, next)) = next else { continue };
        if !(next.is_uppercase() || next.is_ascii_digit() || is_opener(next)) {
            continue;
        }
        if single_period {
            let before = &text[..chars[run_start].0];
            let token_start = before
                .rfind(char::is_whitespace)
                .map_or(0, |p| p + before[p..].chars().next().map_or(1, char::len_utf8));
            if is_abbreviation(&before[token_start..]) {
                continue;
            }
        }

        let sentence = text[start..span_end].trim();
        if !sentence.is_empty() {
            sentences.push(sentence.to_string());
        }
        start = span_end;
    }

    let tail = text[start..].trim();
    if !tail.is_empty() {
        sentences.push(tail.to_string());
    }
    sentences
}

pub fn segment_paper(paper_id: &str, text: &str) -> SegmentedPaper {
    SegmentedPaper::from_texts(paper_id, segment(text))
}

fn validate_override(o: &SegmentationOverride) -> Result<(), SegmentError> {
    if o.sentences.is_empty() {
        return Err(SegmentError::EmptyOverride(o.paper_id.clone()));
    }
    if let Some(position) = o.sentences.iter().position(|s| s.trim().is_empty()) {
        return Err(SegmentError::BlankOverrideSentence {
            paper_id: o.paper_id.clone(),
            position,
        });
    }
    Ok(())
}

/// Replace the segmentation of overridden papers verbatim.
///
/// Returns the updated papers and a warning for every override naming a
/// paper that is not present.
pub fn apply_overrides(
    papers: Vec<SegmentedPaper>,
    overrides: &[SegmentationOverride],
) -> Result<(Vec<SegmentedPaper>, Vec<String>), SegmentError> {
    let mut by_id: HashMap<&str, &SegmentationOverride> = HashMap::new();
    for o in overrides {
        validate_override(o)?;
        if by_id.insert(o.paper_id.as_str(), o).is_some() {
            return Err(SegmentError::DuplicateOverride(o.paper_id.clone()));
        }
    }

    let present: HashSet<&str> = papers.iter().map(|p| p.paper_id.as_str()).collect();
    let mut warnings: Vec<String> = overrides
        .iter()
        .filter(|o| !present.contains(o.paper_id.as_str()))
        .map(|o| format!("override for unknown paper {:?} ignored", o.paper_id))
        .collect();
    warnings.iter().for_each(|w| log::warn!("{w}"));
    drop(present);

    let papers = papers
        .into_iter()
        .map(|p| match by_id.get(p.paper_id.as_str()) {
            Some(o) => SegmentedPaper::from_texts(&p.paper_id, o.sentences.iter().map(|s| s.trim().to_string())),
            None => p,
        })
        .collect();
    warnings.shrink_to_fit();
    Ok((papers, warnings))
}

/// Leading sentences of one paper, used as its background-task statement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prelude {
    pub paper_id: String,
    pub sentences: Vec<Sentence>,
}

/// First `k` sentences per paper. Papers without sentences are dropped
/// with a warning.
pub fn prelude_sentences(papers: &[SegmentedPaper], k: usize) -> Result<(Vec<Prelude>, Vec<String>), SegmentError> {
    if k == 0 {
        return Err(SegmentError::ZeroPrelude);
    }
    let mut warnings = Vec::new();
    let mut preludes = Vec::new();
    for p in papers {
        if p.sentences.is_empty() {
            let w = format!("paper {:?} has no sentences; excluded from preludes", p.paper_id);
            log::warn!("{w}");
            warnings.push(w);
            continue;
        }
        preludes.push(Prelude {
            paper_id: p.paper_id.clone(),
            sentences: p.sentences.iter().take(k).cloned().collect(),
        });
    }
    Ok((preludes, warnings))
}
