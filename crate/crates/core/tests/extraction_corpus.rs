use chemreason::extraction::{extract_answer, Expected, SourcePattern};
use chemreason::pipeline::parse_jsonl;
use serde::Deserialize;

#[derive(Deserialize)]
struct Case {
    name: String,
    expected: Expected,
    text: String,
    answer: Option<String>,
    source: Option<SourcePattern>,
}

fn corpus() -> Vec<Case> {
    parse_jsonl(include_str!("fixtures/extraction.jsonl")).unwrap()
}

#[test]
fn corpus_extracts_exactly() {
    let cases = corpus();
    assert!(cases.len() >= 20);
    for c in &cases {
        let got = extract_answer(&c.text, c.expected);
        match &c.answer {
            Some(a) => {
                assert_eq!(&got.value, a, "{}", c.name);
                let span = got.span.clone().unwrap();
                assert_eq!(&c.text[span], a, "{}", c.name);
            }
            None => assert!(!got.is_found(), "{}: found {:?}", c.name, got.value),
        }
        assert_eq!(got.source, c.source, "{}", c.name);
    }
}

#[test]
fn corpus_covers_every_family() {
    let cases = corpus();
    for family in [
        SourcePattern::Tagged,
        SourcePattern::FencedJson,
        SourcePattern::Bbox,
        SourcePattern::Bold,
        SourcePattern::BareFallback,
    ] {
        assert!(cases.iter().any(|c| c.source == Some(family)), "{family:?}");
    }
}
