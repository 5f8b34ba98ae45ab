//! Marker recognition at a single `[`.
//!
//! Grammar (whitespace is space or tab):
//!
//! ```text
//! citation = "[cite:" *WS id *WS "]"
//! tag      = "[tag:" *WS "[" *WS "id:" *WS id *WS [ "," *WS "data:" *WS json *WS ] "]" *WS "]"
//! id       = 1*( ALPHA / DIGIT / "." / "_" / "-" )
//! json     = object / array / string / scalar   ; must parse as JSON
//! ```
//!
//! The scanner answers from a prefix of the input: `Incomplete` means more
//! input could still turn the candidate into a marker. Once it returns
//! `Match` or `NoMatch` for a prefix, no extension changes the answer.

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Marker {
    Citation { id: String },
    Tag { id: String, data: Option<String> },
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Scan {
    Match { len: usize, marker: Marker },
    Incomplete,
    NoMatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Markers {
    pub citations: bool,
    pub tags: bool,
}

enum Stop {
    Incomplete,
    NoMatch,
}

type R<T> = Result<T, Stop>;

struct Cursor<'a> {
    b: &'a [u8],
    i: usize,
    is_final: bool,
}

pub(crate) fn is_id_byte(c: u8) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, b'.' | b'_' | b'-')
}

impl Cursor<'_> {
    fn peek(&self) -> R<u8> {
        match self.b.get(self.i) {
            Some(&c) => Ok(c),
            None if self.is_final => Err(Stop::NoMatch),
            None => Err(Stop::Incomplete),
        }
    }

    fn lit(&mut self, s: &[u8]) -> R<()> {
        for &c in s {
            if self.peek()? != c {
                return Err(Stop::NoMatch);
            }
            self.i += 1;
        }
        Ok(())
    }

    fn ws(&mut self) -> R<()> {
        while matches!(self.peek()?, b' ' | b'\t') {
            self.i += 1;
        }
        Ok(())
    }

    fn id(&mut self) -> R<String> {
        let start = self.i;
        while is_id_byte(self.peek()?) {
            self.i += 1;
        }
        if self.i == start {
            return Err(Stop::NoMatch);
        }
        Ok(String::from_utf8(self.b[start..self.i].to_vec()).expect("ascii id"))
    }

    fn json(&mut self) -> R<String> {
        let start = self.i;
        match self.peek()? {
            b'{' | b'[' => {
                let mut depth = 0usize;
                loop {
                    match self.peek()? {
                        b'{' | b'[' => depth += 1,
                        b'}' | b']' => {
                            depth -= 1;
                            if depth == 0 {
                                self.i += 1;
                                break;
                            }
                        }
                        b'"' => {
                            self.string()?;
                            continue;
                        }
                        _ => {}
                    }
                    self.i += 1;
                }
            }
            b'"' => self.string()?,
            _ => {
                while !matches!(self.peek()?, b' ' | b'\t' | b']' | b',') {
                    self.i += 1;
                }
            }
        }
        let raw = &self.b[start..self.i];
        if raw.is_empty() || serde_json::from_slice::<serde::de::IgnoredAny>(raw).is_err() {
            return Err(Stop::NoMatch);
        }
        Ok(String::from_utf8(raw.to_vec()).expect("valid json is utf-8"))
    }

    /// Consumes a JSON string literal including both quotes.
    fn string(&mut self) -> R<()> {
        self.lit(b"\"")?;
        loop {
            match self.peek()? {
                b'"' => {
                    self.i += 1;
                    return Ok(());
                }
                b'\\' => {
                    self.i += 1;
                    self.peek()?;
                    self.i += 1;
                }
                _ => self.i += 1,
            }
        }
    }

    fn citation(&mut self) -> R<Marker> {
        self.lit(b"[cite:")?;
        self.ws()?;
        let id = self.id()?;
        self.ws()?;
        self.lit(b"]")?;
        Ok(Marker::Citation { id })
    }

    fn tag(&mut self) -> R<Marker> {
        self.lit(b"[tag:")?;
        self.ws()?;
        self.lit(b"[")?;
        self.ws()?;
        self.lit(b"id:")?;
        self.ws()?;
        let id = self.id()?;
        self.ws()?;
        let data = if self.peek()? == b',' {
            self.i += 1;
            self.ws()?;
            self.lit(b"data:")?;
            self.ws()?;
            let d = self.json()?;
            self.ws()?;
            Some(d)
        } else {
            None
        };
        self.lit(b"]")?;
        self.ws()?;
        self.lit(b"]")?;
        Ok(Marker::Tag { id, data })
    }
}

/// Tries to read a marker at the start of `buf`, which must begin with `[`.
pub(crate) fn scan(buf: &[u8], markers: Markers, is_final: bool) -> Scan {
    debug_assert_eq!(buf.first(), Some(&b'['));
    let mut pending = false;
    for (enabled, is_tag) in [(markers.citations, false), (markers.tags, true)] {
        if !enabled {
            continue;
        }
        let mut c = Cursor { b: buf, i: 0, is_final };
        let result = if is_tag { c.tag() } else { c.citation() };
        match result {
            Ok(marker) => return Scan::Match { len: c.i, marker },
            Err(Stop::Incomplete) => pending = true,
            Err(Stop::NoMatch) => {}
        }
    }
    if pending {
        Scan::Incomplete
    } else {
        Scan::NoMatch
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BOTH: Markers = Markers {
        citations: true,
        tags: true,
    };

    fn at(s: &str, fin: bool) -> Scan {
        scan(s.as_bytes(), BOTH, fin)
    }

    #[test]
    fn citation_forms() {
        assert_eq!(
            at("[cite: g1.box1] tail", true),
            Scan::Match {
                len: 15,
                marker: Marker::Citation { id: "g1.box1".into() }
            }
        );
        assert!(matches!(at("[cite:g1]", true), Scan::Match { len: 9, .. }));
        assert!(matches!(at("[cite:  g1 \t]", true), Scan::Match { .. }));
        assert_eq!(at("[cite: ]", true), Scan::NoMatch);
        assert_eq!(at("[cite: a b]", true), Scan::NoMatch);
        assert_eq!(at("[Cite: a]", true), Scan::NoMatch);
    }

    #[test]
    fn prefixes_are_incomplete_until_final() {
        for p in ["[", "[c", "[cite", "[cite:", "[cite: g1", "[cite: g1 ", "[t", "[tag: [id: g1, data: {\"a\": ["] {
            assert_eq!(at(p, false), Scan::Incomplete, "{p}");
            assert_eq!(at(p, true), Scan::NoMatch, "{p}");
        }
        assert_eq!(at("[x", false), Scan::NoMatch);
        assert_eq!(at("[cite: g1 x", false), Scan::NoMatch);
    }

    #[test]
    fn tag_forms() {
        let s = r#"[tag: [id: g1.box1, data: {"q1":3,"q3":7}]] please"#;
        match at(s, true) {
            Scan::Match {
                len,
                marker: Marker::Tag { id, data },
            } => {
                assert_eq!(&s[..len], r#"[tag: [id: g1.box1, data: {"q1":3,"q3":7}]]"#);
                assert_eq!(id, "g1.box1");
                assert_eq!(data.as_deref(), Some(r#"{"q1":3,"q3":7}"#));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(at("[tag: [id: g2]]", true), Scan::Match { .. }));
        assert!(matches!(at(r#"[tag: [id: g2, data: "a]b"]]"#, true), Scan::Match { .. }));
        assert!(matches!(at("[tag: [id: g2, data: 12.5]]", true), Scan::Match { .. }));
        assert!(matches!(at("[tag: [id: g2, data: [1, [2]]] ]", true), Scan::Match { .. }));
        assert_eq!(at("[tag: [id: g2, data: {bad}]]", true), Scan::NoMatch);
        assert_eq!(at("[tag: [id: g2, data: ]]", true), Scan::NoMatch);
        assert_eq!(at("[tag: [id: g1", true), Scan::NoMatch);
    }

    #[test]
    fn markers_can_be_disabled() {
        let tags_only = Markers {
            citations: false,
            tags: true,
        };
        assert_eq!(scan(b"[cite: g1]", tags_only, true), Scan::NoMatch);
    }
}
