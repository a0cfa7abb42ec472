use super::entities::SENTINEL;

/// Lowercases and splits on whitespace and any non-alphanumeric character.
///
/// Sentinel tokens such as `<CVE>` are emitted intact.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut cursor = 0;
    for m in SENTINEL.find_iter(text) {
        split_plain(&text[cursor..m.start()], &mut tokens);
        tokens.push(m.as_str().to_string());
        cursor = m.end();
    }
    split_plain(&text[cursor..], &mut tokens);
    tokens
}

fn split_plain(segment: &str, tokens: &mut Vec<String>) {
    for piece in segment.split(|c: char| !c.is_alphanumeric()) {
        if !piece.is_empty() {
            tokens.push(piece.to_lowercase());
        }
    }
}

/// Whether `token` is one of the entity sentinels.
pub fn is_sentinel(token: &str) -> bool {
    SENTINEL
        .find(token)
        .is_some_and(|m| m.start() == 0 && m.end() == token.len())
}
