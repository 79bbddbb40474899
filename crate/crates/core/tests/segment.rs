use fishbone_core::segment::segment;
use proptest::prelude::*;
use serde::Deserialize;

#[derive(Deserialize)]
struct Case {
    name: String,
    text: String,
    sentences: Vec<String>,
}

fn collapse(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[test]
fn hand_built_cases_match_exactly() {
    let cases: Vec<Case> = serde_json::from_str(include_str!("fixtures/segmenter_cases.json")).unwrap();
    assert_eq!(cases.len(), 20);
    for c in &cases {
        assert_eq!(segment(&c.text), c.sentences, "case {:?}", c.name);
    }
}

const PIECES: &[&str] = &[
    "We propose a model.",
    "Smith et al. disagree",
    "(see Fig. 2.",
    "accuracy is 93.5",
    "Why?",
    "[3].",
    "\"Quoted. Text.\"",
    "e.g.",
    "U.S.",
    "However, it fails!",
    "\n\n",
    "   ",
    "3.",
    "x",
    "…",
    "]).",
];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn cover_is_lossless(parts in proptest::collection::vec((0..PIECES.len(), 0usize..3), 0..12)) {
        let seps = [" ", "  ", "\n"];
        let text: String = parts.iter().map(|&(p, s)| format!("{}{}", PIECES[p], seps[s])).collect();
        let out = segment(&text);
        prop_assert_eq!(collapse(&out.join(" ")), collapse(&text));
        for s in &out {
            prop_assert!(!s.is_empty());
            prop_assert_eq!(s.trim(), s.as_str());
        }
    }
}
