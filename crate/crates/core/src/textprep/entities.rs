//! Pattern-based entity tagger.
//!
//! Each recognizer is a regular expression (card numbers additionally pass a
//! Luhn check). Overlapping matches are resolved by recognizer precedence,
//! then by position. Replacement is repeated until no recognizer fires, so
//! tagging an already tagged text is a no-op.

use std::sync::LazyLock;

use regex::Regex;

/// Structured entity classes, in overlap precedence order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EntityKind {
    Url,
    Email,
    Cve,
    Ip,
    Btc,
    Hash,
    Card,
}

impl EntityKind {
    pub const PRECEDENCE: [EntityKind; 7] = [
        EntityKind::Url,
        EntityKind::Email,
        EntityKind::Cve,
        EntityKind::Ip,
        EntityKind::Btc,
        EntityKind::Hash,
        EntityKind::Card,
    ];

    pub fn sentinel(self) -> &'static str {
        match self {
            EntityKind::Url => "<URL>",
            EntityKind::Email => "<EMAIL>",
            EntityKind::Cve => "<CVE>",
            EntityKind::Ip => "<IP>",
            EntityKind::Btc => "<BTC>",
            EntityKind::Hash => "<HASH>",
            EntityKind::Card => "<CARD>",
        }
    }

    fn pattern(self) -> &'static Regex {
        match self {
            EntityKind::Url => &URL,
            EntityKind::Email => &EMAIL,
            EntityKind::Cve => &CVE,
            EntityKind::Ip => &IP,
            EntityKind::Btc => &BTC,
            EntityKind::Hash => &HASH,
            EntityKind::Card => &CARD,
        }
    }
}

static URL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r#"(?i)(?:\b(?:https?|ftp)://|\bwww\.)[^\s<>"']*[^\s<>"'.,;:!?)\]]|\b[a-z2-7]{16}(?:[a-z2-7]{40})?\.onion\b(?:/[^\s<>"']*[^\s<>"'.,;:!?)\]])?"#,
    )
    .unwrap()
});
static EMAIL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"\b[A-Za-z0-9._%+-]+@[A-Za-z0-9-]+(?:\.[A-Za-z0-9-]+)*\.[A-Za-z]{2,}\b").unwrap()
});
static CVE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\bCVE-\d{4}-\d{4,7}\b").unwrap());
static IP: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"\b(?:(?:25[0-5]|2[0-4]\d|1\d\d|[1-9]?\d)\.){3}(?:25[0-5]|2[0-4]\d|1\d\d|[1-9]?\d)\b",
    )
    .unwrap()
});
static BTC: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"\b(?:[13][1-9A-HJ-NP-Za-km-z]{25,34}|bc1[02-9ac-hj-np-z]{11,71})\b").unwrap()
});
static HASH: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"\b(?:[A-Fa-f0-9]{64}|[A-Fa-f0-9]{40}|[A-Fa-f0-9]{32})\b").unwrap()
});
static CARD: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b\d(?:[ -]?\d){12,18}\b").unwrap());

/// Sentinel surface forms recognized by the tokenizer.
pub static SENTINEL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"<(?:URL|EMAIL|CVE|IP|BTC|HASH|CARD)>").unwrap());

/// A recognized entity span in the input text (byte offsets).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntitySpan {
    pub kind: EntityKind,
    pub start: usize,
    pub end: usize,
}

fn luhn_valid(candidate: &str) -> bool {
    let digits: Vec<u32> = candidate.chars().filter_map(|c| c.to_digit(10)).collect();
    if !(13..=19).contains(&digits.len()) {
        return false;
    }
    let sum: u32 = digits
        .iter()
        .rev()
        .enumerate()
        .map(|(i, &d)| match (i % 2, d * 2) {
            (0, _) => d,
            (_, x) if x > 9 => x - 9,
            (_, x) => x,
        })
        .sum();
    sum.is_multiple_of(10)
}

/// Non-overlapping entity spans, sorted by start offset.
pub fn find_entities(text: &str) -> Vec<EntitySpan> {
    let mut accepted: Vec<EntitySpan> = Vec::new();
    for kind in EntityKind::PRECEDENCE {
        for m in kind.pattern().find_iter(text) {
            if kind == EntityKind::Card && !luhn_valid(m.as_str()) {
                continue;
            }
            let overlaps = accepted
                .iter()
                .any(|s| m.start() < s.end && s.start < m.end());
            if !overlaps {
                accepted.push(EntitySpan {
                    kind,
                    start: m.start(),
                    end: m.end(),
                });
            }
        }
    }
    accepted.sort_by_key(|s| s.start);
    accepted
}

fn replace_once(text: &str) -> Option<String> {
    let spans = find_entities(text);
    if spans.is_empty() {
        return None;
    }
    let mut out = String::with_capacity(text.len());
    let mut cursor = 0;
    for span in spans {
        out.push_str(&text[cursor..span.start]);
        out.push_str(span.kind.sentinel());
        cursor = span.end;
    }
    out.push_str(&text[cursor..]);
    Some(out)
}

/// Replaces every recognized entity with its sentinel token.
pub fn tag_entities(text: &str) -> String {
    let mut current = text.to_string();
    // each pass removes at least one non-sentinel character, so this ends
    while let Some(next) = replace_once(&current) {
        current = next;
    }
    current
}
