use chartalk_core::chart::ElementId;
use chartalk_core::markup::{
    flatten, parse, parse_bytes, parse_citations, parse_query_tags, render_interactive, stream_parse, validate,
    Segment, SourceRole, SpanKind,
};
use proptest::prelude::*;
use regex::Regex;

/// Strings built from marker fragments so that well-formed, broken and
/// nested markers all show up often.
fn markup_text() -> impl Strategy<Value = String> {
    let piece = prop_oneof![
        Just("[".to_string()),
        Just("]".to_string()),
        Just("[cite:".to_string()),
        Just("[cite: g1.box1]".to_string()),
        Just("[cite:g2]".to_string()),
        Just("[tag: [id: g1.median1, data: {\"v\": [1, \"]\"]}]]".to_string()),
        Just("[tag: [id: g3]]".to_string()),
        Just("[tag: [id:".to_string()),
        Just(", data: ".to_string()),
        Just("{\"a\":".to_string()),
        Just(" ".to_string()),
        Just("\t".to_string()),
        Just("\"".to_string()),
        Just("\\".to_string()),
        Just("é€".to_string()),
        "[a-z0-9._-]{0,6}",
        any::<char>().prop_map(|c| c.to_string()),
    ];
    prop::collection::vec(piece, 0..24).prop_map(|v| v.concat())
}

fn chunked(s: &str, cuts: &[usize]) -> Vec<String> {
    let mut bounds: Vec<usize> = cuts
        .iter()
        .map(|c| c % (s.len() + 1))
        .filter(|&c| s.is_char_boundary(c))
        .collect();
    bounds.push(0);
    bounds.push(s.len());
    bounds.sort_unstable();
    bounds.dedup();
    bounds.windows(2).map(|w| s[w[0]..w[1]].to_string()).collect()
}

proptest! {
    #[test]
    fn round_trip_is_byte_exact(s in markup_text()) {
        prop_assert_eq!(parse_citations(&s).source(), s.clone());
        prop_assert_eq!(parse_query_tags(&s).source(), s);
    }

    #[test]
    fn byte_spans_cover_input(bytes in prop::collection::vec(any::<u8>(), 0..200)) {
        for role in [SourceRole::User, SourceRole::Assistant] {
            let spans = parse_bytes(&bytes, role);
            let mut end = 0;
            let mut joined = Vec::new();
            for s in &spans {
                prop_assert_eq!(s.range.start, end);
                end = s.range.end;
                joined.extend_from_slice(&bytes[s.range.clone()]);
            }
            prop_assert_eq!(joined, bytes.clone());
        }
    }

    #[test]
    fn streaming_equals_batch(s in markup_text(), cuts in prop::collection::vec(any::<usize>(), 0..12)) {
        for role in [SourceRole::User, SourceRole::Assistant] {
            let events = stream_parse(chunked(&s, &cuts), role);
            prop_assert_eq!(flatten(&events, role), parse(&s, role));
        }
    }

    #[test]
    fn ordinals_are_dense(s in markup_text()) {
        let m = parse_citations(&s);
        let ordinals: Vec<usize> = m.citations().map(|c| c.ordinal).collect();
        prop_assert_eq!(ordinals, (1..=m.citations().count()).collect::<Vec<_>>());
    }

    #[test]
    fn citations_match_regex_oracle(s in markup_text()) {
        let re = Regex::new(r"\[cite:[ \t]*([A-Za-z0-9._-]+)[ \t]*\]").unwrap();
        let expected: Vec<&str> = re.captures_iter(&s).map(|c| c.get(1).unwrap().as_str()).collect();
        let m = parse_citations(&s);
        let got: Vec<&str> = m.citations().map(|c| c.id.as_str()).collect();
        prop_assert_eq!(got, expected);
    }

    #[test]
    fn validation_never_exceeds_parse(s in markup_text()) {
        let m = parse_citations(&s);
        let r = validate(&m, &["g1.box1".into(), "g2".into()]);
        prop_assert_eq!(r.valid.len() + r.unknown.len(), m.citations().count());
        for c in r.valid.iter().chain(&r.unknown) {
            prop_assert!(s[c.offset..].starts_with("[cite:"));
        }
    }

    #[test]
    fn html_text_is_escaped(s in markup_text()) {
        let span = Regex::new(r#"<span class="viz-(cite|tag)( unresolved)?" data-element-id="[^"<>]*"( data-ordinal="\d+"| data-payload="[^"<>]*")?>[^<>]*</span>"#).unwrap();
        for m in [parse_citations(&s), parse_query_tags(&s)] {
            let html = render_interactive(&m, &validate(&m, &[]));
            let stripped = span.replace_all(&html, "");
            prop_assert!(!stripped.contains('<') && !stripped.contains('>'), "{}", html);
        }
    }
}

#[test]
fn tag_payload_may_contain_brackets_inside_strings() {
    let m = parse_query_tags(r#"x [tag: [id: g1, data: {"label": "a]]b", "v": [1, 2]}]] y"#);
    let tags: Vec<_> = m.tags().collect();
    assert_eq!(tags.len(), 1);
    assert_eq!(tags[0].data.as_deref(), Some(r#"{"label": "a]]b", "v": [1, 2]}"#));
}

#[test]
fn malformed_payload_stays_text() {
    let m = parse_query_tags("[tag: [id: g1, data: {nope}]]");
    assert_eq!(m.segments.len(), 1);
    assert!(matches!(&m.segments[0], Segment::Text { .. }));
}

#[test]
fn single_chunk_stream_matches_batch() {
    let s = "Median [cite: g1.median1], box [cite: g1.box1] and [cite: g9]";
    assert_eq!(flatten(&stream_parse([s], SourceRole::Assistant), SourceRole::Assistant), parse_citations(s));
}

#[test]
fn every_prefix_split_of_a_citation_streams_identically() {
    let s = "The box [cite: g1.box1] is wide, see [cite:g1]";
    let whole = parse_citations(s);
    for i in 0..=s.len() {
        let events = stream_parse([&s[..i], &s[i..]], SourceRole::Assistant);
        assert_eq!(flatten(&events, SourceRole::Assistant), whole, "split at {i}");
    }
}

#[test]
fn invalid_utf8_spans_still_recognized() {
    let mut bytes = vec![0xff, 0xfe];
    bytes.extend_from_slice(b"[cite: g1]");
    bytes.push(0x80);
    let spans = parse_bytes(&bytes, SourceRole::Assistant);
    assert_eq!(spans.len(), 3);
    assert_eq!(spans[1].kind, SpanKind::Citation { id: "g1".into() });
}

#[test]
fn unknown_ids_are_reported_in_order() {
    let m = parse_citations("[cite: a] [cite: g1] [cite: b]");
    let r = validate(&m, &[ElementId::from("g1")]);
    let unknown: Vec<_> = r.unknown.iter().map(|c| (c.id.as_str(), c.ordinal)).collect();
    assert_eq!(unknown, vec![("a", Some(1)), ("b", Some(3))]);
}
