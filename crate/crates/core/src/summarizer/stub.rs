//! Offline stand-in for the chat model: term-frequency keyword picking.

use std::collections::HashMap;

use super::{enforce_word_limit, SUMMARY_WORD_LIMIT, THEME_WORD_LIMIT};
use crate::embedding::tokenize;

const STOP_WORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "all", "also", "am", "an", "and", "any", "are", "as", "at",
    "be", "because", "been", "before", "being", "below", "between", "both", "but", "by", "can", "could", "did", "do",
    "does", "doing", "down", "during", "each", "et", "al", "etc", "few", "for", "from", "further", "had", "has",
    "have", "having", "he", "her", "here", "hers", "him", "his", "how", "however", "i", "if", "in", "into", "is", "it",
    "its", "itself", "just", "many", "may", "me", "might", "more", "most", "much", "must", "my", "no", "nor", "not",
    "now", "of", "off", "on", "once", "one", "only", "or", "other", "our", "ours", "out", "over", "own", "paper",
    "same", "she", "should", "so", "some", "such", "than", "that", "the", "their", "theirs", "them", "then", "there",
    "these", "they", "this", "those", "through", "thus", "to", "too", "under", "until", "up", "us", "use", "used",
    "using", "very", "via", "was", "we", "were", "what", "when", "where", "whether", "which", "while", "who", "whom",
    "why", "will", "with", "within", "work", "would", "yet", "you", "your", "e", "g", "ie",
];

fn is_content_word(token: &str) -> bool {
    token.chars().count() >= 2 && !token.chars().all(|c| c.is_ascii_digit()) && !STOP_WORDS.contains(&token)
}

/// Content words ranked by frequency, ties alphabetical.
pub fn ranked_terms<S: AsRef<str>>(sentences: &[S]) -> Vec<String> {
    let mut counts: HashMap<String, usize> = HashMap::new();
    for s in sentences {
        for t in tokenize(s.as_ref()).filter(|t| is_content_word(t)) {
            *counts.entry(t).or_default() += 1;
        }
    }
    let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.into_iter().map(|(w, _)| w).collect()
}

pub fn task_name<S: AsRef<str>>(sentences: &[S]) -> String {
    let words = ranked_terms(sentences);
    if words.is_empty() {
        return "untitled task".into();
    }
    words.into_iter().take(THEME_WORD_LIMIT).collect::<Vec<_>>().join(" ")
}

/// `n` distinct themes; theme `i` takes ranked words `i, i+n, i+2n, …`.
pub fn themes<S: AsRef<str>>(sentences: &[S], n: usize) -> Vec<String> {
    let words = ranked_terms(sentences);
    (0..n)
        .map(|i| {
            let picked: Vec<&str> = words
                .iter()
                .skip(i)
                .step_by(n.max(1))
                .take(THEME_WORD_LIMIT)
                .map(String::as_str)
                .collect();
            if picked.is_empty() {
                format!("theme {}", i + 1)
            } else {
                picked.join(" ")
            }
        })
        .collect()
}

/// One sentence: that sentence, word-limited. Several: the first sentence
/// shortened to leave room for the top three key terms.
pub fn group_summary<S: AsRef<str>>(sentences: &[S]) -> String {
    let first = sentences.first().map_or("", |s| s.as_ref());
    if sentences.len() <= 1 {
        return enforce_word_limit(first, SUMMARY_WORD_LIMIT);
    }
    let keywords: Vec<String> = ranked_terms(sentences).into_iter().take(3).collect();
    if keywords.is_empty() {
        return enforce_word_limit(first, SUMMARY_WORD_LIMIT);
    }
    let budget = SUMMARY_WORD_LIMIT - 2 - keywords.len();
    let lead = enforce_word_limit(first, budget);
    enforce_word_limit(
        &format!("{lead}; key terms: {}", keywords.join(", ")),
        SUMMARY_WORD_LIMIT,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    const QA: [&str; 3] = [
        "Question answering datasets are popular.",
        "Many question answering datasets exist.",
        "Datasets for question answering vary.",
    ];

    #[test]
    fn ranking_by_frequency_then_alphabet() {
        assert_eq!(
            ranked_terms(&QA),
            ["answering", "datasets", "question", "exist", "popular", "vary"]
        );
    }

    #[test]
    fn task_name_takes_top_five() {
        assert_eq!(task_name(&QA), "answering datasets question exist popular");
    }

    #[test]
    fn themes_round_robin() {
        assert_eq!(themes(&QA, 3), ["answering exist", "datasets popular", "question vary"]);
        assert_eq!(themes(&QA, 1), ["answering datasets question exist popular"]);
        assert_eq!(themes(&["the of"], 2), ["theme 1", "theme 2"]);
    }

    #[test]
    fn summary_of_one_and_many() {
        assert_eq!(group_summary(&["We study QA."]), "We study QA");
        assert_eq!(
            group_summary(&QA),
            "Question answering datasets are popular; key terms: answering, datasets, question"
        );
    }
}
