//! Cited engine answers: sentence segmentation and `[k]` citation markers.
//!
//! A sentence ends at `.`, `!` or `?` followed by whitespace or end of text.
//! A run of markers directly after the terminal punctuation (or directly
//! before it, as in `purr [1].`) becomes the sentence's citation set. The
//! comma form `[1, 2]` is accepted on input; output always uses `[1][2]`.
//! Markers anywhere else are ordinary prose.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub text: String,
    pub word_count: usize,
    /// 1-based candidate indices cited by this sentence.
    pub citations: BTreeSet<usize>,
}

impl Sentence {
    pub fn new(text: &str, citations: impl IntoIterator<Item = usize>) -> Self {
        let text = normalize_ws(text);
        Sentence {
            word_count: text.split_whitespace().count(),
            text,
            citations: citations.into_iter().collect(),
        }
    }

    /// Sentence with an explicit word count, for answers built without text.
    pub fn with_word_count(word_count: usize, citations: impl IntoIterator<Item = usize>) -> Self {
        Sentence {
            text: vec!["w"; word_count].join(" ") + ".",
            word_count,
            citations: citations.into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CitedAnswer {
    pub sentences: Vec<Sentence>,
}

impl CitedAnswer {
    pub fn new(sentences: Vec<Sentence>) -> Self {
        CitedAnswer { sentences }
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }
}

impl fmt::Display for CitedAnswer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_cited_answer(self))
    }
}

/// Something the parser dropped or reinterpreted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseWarning {
    CitationOutOfRange { sentence: usize, index: usize, n: usize },
    OrphanCitations { indices: Vec<usize> },
}

pub fn parse_cited_answer(raw: &str, n: usize) -> CitedAnswer {
    let (answer, warnings) = parse_cited_answer_detailed(raw, n);
    for w in &warnings {
        log::warn!("cited answer: {w:?}");
    }
    answer
}

pub fn parse_cited_answer_detailed(raw: &str, n: usize) -> (CitedAnswer, Vec<ParseWarning>) {
    let mut sentences: Vec<Sentence> = Vec::new();
    let mut warnings = Vec::new();

    for chunk in split_chunks(raw) {
        let (body, raw_cites) = strip_citations(chunk);
        let mut cites = BTreeSet::new();
        for idx in raw_cites {
            if idx >= 1 && idx <= n {
                cites.insert(idx);
            } else {
                warnings.push(ParseWarning::CitationOutOfRange {
                    sentence: sentences.len(),
                    index: idx,
                    n,
                });
            }
        }
        let body = normalize_ws(&body);
        if body.is_empty() {
            if cites.is_empty() {
                continue;
            }
            match sentences.last_mut() {
                Some(prev) => prev.citations.extend(cites),
                None => warnings.push(ParseWarning::OrphanCitations {
                    indices: cites.into_iter().collect(),
                }),
            }
            continue;
        }
        sentences.push(Sentence::new(&body, cites));
    }
    (CitedAnswer { sentences }, warnings)
}

pub fn render_cited_answer(answer: &CitedAnswer) -> String {
    let mut out = String::new();
    for (i, s) in answer.sentences.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&s.text);
        for c in &s.citations {
            out.push_str(&format!("[{c}]"));
        }
    }
    out
}

fn normalize_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn is_terminal(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | '\u{201d}' | '\u{2019}')
}

/// Parses one `[..]` marker starting at `chars[start] == '['`.
/// Returns the indices and the position just past `]`.
fn marker_at(chars: &[char], start: usize) -> Option<(Vec<usize>, usize)> {
    if chars.get(start) != Some(&'[') {
        return None;
    }
    let close = chars[start..].iter().position(|&c| c == ']')? + start;
    let inner: String = chars[start + 1..close].iter().collect();
    parse_marker_body(&inner).map(|v| (v, close + 1))
}

fn parse_marker_body(inner: &str) -> Option<Vec<usize>> {
    let mut out = Vec::new();
    for part in inner.split(',') {
        let part = part.trim();
        if part.is_empty() || !part.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        out.push(part.parse().ok()?);
    }
    (!out.is_empty()).then_some(out)
}

/// End position of a run of markers (optionally space-separated) starting at `pos`.
fn marker_run_end(chars: &[char], pos: usize) -> Option<usize> {
    let mut k = pos;
    let mut end = None;
    loop {
        let mut j = k;
        while j < chars.len() && chars[j].is_whitespace() && end.is_some() {
            j += 1;
        }
        match marker_at(chars, j) {
            Some((_, next)) => {
                end = Some(next);
                k = next;
            }
            None => return end,
        }
    }
}

/// Splits raw text into sentence chunks, each still carrying its markers.
fn split_chunks(raw: &str) -> Vec<String> {
    let chars: Vec<char> = raw.chars().collect();
    let mut chunks = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < chars.len() {
        if !is_terminal(chars[i]) {
            i += 1;
            continue;
        }
        let mut j = i + 1;
        while j < chars.len() && (is_terminal(chars[j]) || is_closer(chars[j])) {
            j += 1;
        }
        let boundary = if j == chars.len() {
            Some(j)
        } else if chars[j].is_whitespace() {
            let mut k = j;
            while k < chars.len() && chars[k].is_whitespace() {
                k += 1;
            }
            match marker_run_end(&chars, k) {
                Some(end) if end == chars.len() || chars[end].is_whitespace() => Some(end),
                _ => Some(j),
            }
        } else if chars[j] == '[' {
            match marker_run_end(&chars, j) {
                Some(end) if end == chars.len() || chars[end].is_whitespace() => Some(end),
                _ => None,
            }
        } else {
            None
        };
        match boundary {
            Some(end) => {
                chunks.push(chars[start..end].iter().collect());
                start = end;
                i = end;
            }
            None => i = j,
        }
    }
    if start < chars.len() {
        chunks.push(chars[start..].iter().collect());
    }
    chunks
}

/// Removes the trailing marker run and any run directly before the final
/// terminal punctuation.
fn strip_citations(chunk: String) -> (String, Vec<usize>) {
    let (mut body, mut cites) = strip_trailing_markers(chunk.trim());

    let trimmed = body.trim_end().to_string();
    let punct_start = trimmed
        .char_indices()
        .rev()
        .take_while(|&(_, c)| is_terminal(c) || is_closer(c))
        .last()
        .map(|(i, _)| i);
    if let Some(p) = punct_start.filter(|&p| p > 0) {
        let (head, before) = strip_trailing_markers(&trimmed[..p]);
        if !before.is_empty() && !head.trim().is_empty() {
            let mut merged = before;
            merged.extend(cites);
            cites = merged;
            body = format!("{}{}", head.trim_end(), &trimmed[p..]);
        }
    }
    (body, cites)
}

fn strip_trailing_markers(s: &str) -> (String, Vec<usize>) {
    let mut rest = s.trim_end();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    while rest.ends_with(']') {
        let Some(open) = rest.rfind('[') else { break };
        match parse_marker_body(&rest[open + 1..rest.len() - 1]) {
            Some(v) => {
                groups.push(v);
                rest = rest[..open].trim_end();
            }
            None => break,
        }
    }
    groups.reverse();
    (rest.to_string(), groups.into_iter().flatten().collect())
}
