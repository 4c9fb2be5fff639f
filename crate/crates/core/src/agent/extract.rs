//! Tolerant extraction of rules from `kb-rules` HTML tables.
//!
//! Source pages publish rules as
//!
//! ```html
//! <table class="kb-rules">
//!   <tr><th>IF</th><th>AND</th><th>THEN</th><th>Solution</th></tr>
//!   <tr><td>Audio</td><td>Scratchy Sound</td><td>Signal Interference</td><td>...</td></tr>
//! </table>
//! ```
//!
//! The first row of every marked table is a header and is skipped. Closing
//! `</tr>`/`</td>` tags are optional and a missing `</table>` runs to the end
//! of the input.

use std::sync::LazyLock;

use regex::Regex;

use crate::rule_model::{normalize, RuleDraft};

/// Class token that marks a rule table.
pub const RULE_TABLE_CLASS: &str = "kb-rules";

static TABLE_OPEN: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?is)<table\b([^>]*)>").unwrap());
static TABLE_CLOSE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)</table\s*>").unwrap());
static CLASS_ATTR: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r#"(?is)(?:^|\s)class\s*=\s*(?:"([^"]*)"|'([^']*)'|([^\s"'>]+))"#).unwrap()
});
static ROW_OPEN: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?is)<tr\b[^>]*>").unwrap());
static ROW_CLOSE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)</tr\s*>").unwrap());
static CELL_OPEN: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?is)<t[dh]\b[^>]*>").unwrap());
static CELL_CLOSE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)</t[dh]\s*>").unwrap());
static TAG: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?s)<[^>]*>").unwrap());
static COMMENT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?s)<!--.*?-->").unwrap());

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Extraction {
    pub candidates: Vec<RuleDraft>,
    pub malformed: usize,
}

fn has_rule_class(attrs: &str) -> bool {
    CLASS_ATTR.captures_iter(attrs).any(|c| {
        let value = c
            .get(1)
            .or(c.get(2))
            .or(c.get(3))
            .map_or("", |m| m.as_str());
        value
            .split_whitespace()
            .any(|token| token.eq_ignore_ascii_case(RULE_TABLE_CLASS))
    })
}

/// Splits `body` into the segments that follow each `open` match, each cut at
/// the first `close` match (if any).
fn segments<'a>(body: &'a str, open: &Regex, close: &Regex) -> Vec<&'a str> {
    let starts: Vec<(usize, usize)> = open.find_iter(body).map(|m| (m.start(), m.end())).collect();
    starts
        .iter()
        .enumerate()
        .map(|(i, &(_, content_start))| {
            let end = starts.get(i + 1).map_or(body.len(), |next| next.0);
            let segment = &body[content_start..end];
            close
                .find(segment)
                .map_or(segment, |m| &segment[..m.start()])
        })
        .collect()
}

fn cell_text(raw: &str) -> String {
    let stripped = TAG.replace_all(raw, " ");
    normalize(&html_escape::decode_html_entities(&stripped))
}

/// Finds every `kb-rules` table and turns its data rows into candidates.
pub fn extract_rules(html: &str) -> Extraction {
    let html = COMMENT.replace_all(html, "");
    let mut out = Extraction::default();
    let mut search_from = 0;
    while let Some(open) = TABLE_OPEN.captures_at(&html, search_from) {
        let whole = open.get(0).unwrap();
        let body_start = whole.end();
        let body_end = TABLE_CLOSE
            .find_at(&html, body_start)
            .map_or(html.len(), |m| m.start());
        search_from = body_end.max(body_start);
        if !has_rule_class(&open[1]) {
            continue;
        }
        let body = &html[body_start..body_end];
        for row in segments(body, &ROW_OPEN, &ROW_CLOSE).into_iter().skip(1) {
            let cells: Vec<String> = segments(row, &CELL_OPEN, &CELL_CLOSE)
                .into_iter()
                .map(cell_text)
                .collect();
            if cells.len() < 4 {
                out.malformed += 1;
                continue;
            }
            match RuleDraft::new(&*cells[0], &*cells[1], &*cells[2], &*cells[3]).normalized() {
                Ok(draft) => out.candidates.push(draft),
                Err(_) => out.malformed += 1,
            }
        }
    }
    out
}
