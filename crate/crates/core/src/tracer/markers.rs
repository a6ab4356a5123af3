//! Trailing `#k` comment markers that tag element-creating source lines.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::TraceError;

/// A line marker `#k` with `k ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MarkerId(u32);

impl MarkerId {
    pub fn new(k: u32) -> Option<Self> {
        (k > 0).then_some(Self(k))
    }

    pub fn number(self) -> u32 {
        self.0
    }
}

impl fmt::Display for MarkerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

impl FromStr for MarkerId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let digits = s
            .strip_prefix('#')
            .ok_or_else(|| format!("marker {s:?} must start with '#'"))?;
        if digits.is_empty()
            || !digits.bytes().all(|b| b.is_ascii_digit())
            || digits.starts_with('0')
        {
            return Err(format!(
                "marker {s:?} must be '#' followed by a positive integer"
            ));
        }
        digits
            .parse::<u32>()
            .ok()
            .and_then(MarkerId::new)
            .ok_or_else(|| format!("marker {s:?} out of range"))
    }
}

impl Serialize for MarkerId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MarkerId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Marker id → 1-based source line.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MarkerMap {
    entries: BTreeMap<MarkerId, usize>,
}

impl MarkerMap {
    pub fn line_of(&self, marker: MarkerId) -> Option<usize> {
        self.entries.get(&marker).copied()
    }

    pub fn marker_at(&self, line: usize) -> Option<MarkerId> {
        self.entries
            .iter()
            .find_map(|(&m, &l)| (l == line).then_some(m))
    }

    pub fn contains(&self, marker: MarkerId) -> bool {
        self.entries.contains_key(&marker)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (MarkerId, usize)> + '_ {
        self.entries.iter().map(|(&m, &l)| (m, l))
    }
}

/// Finds every trailing `#k` comment in a script.
///
/// Only comments whose body starts with a digit are marker candidates, so
/// ordinary comments (`# title`, `#fixme`) are ignored. String literals,
/// including triple-quoted ones, are skipped.
pub fn parse_markers(script_text: &str) -> Result<MarkerMap, TraceError> {
    let mut entries: BTreeMap<MarkerId, usize> = BTreeMap::new();
    for (line, comment) in trailing_comments(script_text) {
        let token = comment.trim_end();
        let body = &token[1..];
        if !body.starts_with(|c: char| c.is_ascii_digit()) {
            continue;
        }
        let marker: MarkerId = token.parse().map_err(|_| TraceError::MalformedMarker {
            line,
            token: token.to_string(),
        })?;
        if let Some(&first) = entries.get(&marker) {
            return Err(TraceError::DuplicateMarker {
                marker,
                first_line: first,
                second_line: line,
            });
        }
        entries.insert(marker, line);
    }
    Ok(MarkerMap { entries })
}

/// `(line, "#...")` for each comment, 1-based lines.
fn trailing_comments(text: &str) -> Vec<(usize, &str)> {
    #[derive(Clone, Copy)]
    enum State {
        Code,
        Str { quote: u8, triple: bool },
    }
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut state = State::Code;
    let mut line = 1usize;
    let mut i = 0usize;
    while i < bytes.len() {
        let b = bytes[i];
        match state {
            State::Code => match b {
                b'#' => {
                    let end = text[i..].find('\n').map_or(text.len(), |off| i + off);
                    out.push((line, text[i..end].trim_end_matches('\r')));
                    i = end;
                    continue;
                }
                b'\'' | b'"' => {
                    let triple = bytes.get(i + 1) == Some(&b) && bytes.get(i + 2) == Some(&b);
                    state = State::Str { quote: b, triple };
                    i += if triple { 3 } else { 1 };
                    continue;
                }
                b'\n' => line += 1,
                _ => {}
            },
            State::Str { quote, triple } => match b {
                b'\\' => {
                    if bytes.get(i + 1) == Some(&b'\n') {
                        line += 1;
                    }
                    i += 2;
                    continue;
                }
                b'\n' => {
                    line += 1;
                    if !triple {
                        state = State::Code;
                    }
                }
                _ if b == quote => {
                    if !triple {
                        state = State::Code;
                    } else if bytes.get(i + 1) == Some(&quote) && bytes.get(i + 2) == Some(&quote) {
                        state = State::Code;
                        i += 3;
                        continue;
                    }
                }
                _ => {}
            },
        }
        i += 1;
    }
    out
}
