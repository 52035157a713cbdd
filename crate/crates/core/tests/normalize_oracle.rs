//! Mention normalization checked against expected values produced by
//! Python's `unicodedata` (see scripts/gen_fixtures.py).

use serde::Deserialize;
use uie_core::normalize_mention;

#[derive(Deserialize)]
struct Case {
    input: String,
    expected: String,
}

#[test]
fn matches_unicodedata_oracle() {
    let text = include_str!("fixtures/normalize_cases.json");
    let cases: Vec<Case> = serde_json::from_str(text).unwrap();
    assert_eq!(cases.len(), 50);
    for c in &cases {
        assert_eq!(normalize_mention(&c.input), c.expected, "input {:?}", c.input);
        // idempotent
        assert_eq!(normalize_mention(&c.expected), c.expected);
    }
}
