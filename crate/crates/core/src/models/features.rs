//! Tokenization and hashed n-gram features.

/// Lowercased alphanumeric word tokens. Apostrophes inside words are kept
/// so "Caesar's" stays one token.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() || (ch == '\'' && !cur.is_empty()) {
            cur.extend(ch.to_lowercase());
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur).trim_end_matches('\'').to_owned());
        }
    }
    if !cur.is_empty() {
        out.push(cur.trim_end_matches('\'').to_owned());
    }
    out
}

/// 64-bit FNV-1a. Stable across platforms and releases, unlike the std
/// hasher, so saved models keep their meaning.
fn fnv1a(bytes: &[u8], seed: u64) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64 ^ seed;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[derive(Debug, Clone, PartialEq)]
pub struct Featurized {
    /// Bucket ids of unigrams and bigrams, in text order.
    pub ids: Vec<u32>,
    /// The token count exceeded the sequence limit.
    pub truncated: bool,
}

/// Truncates to `max_tokens` word tokens, then hashes unigrams and bigrams
/// into `buckets`.
pub fn featurize(text: &str, max_tokens: usize, buckets: u32) -> Featurized {
    let mut tokens = tokenize(text);
    let truncated = tokens.len() > max_tokens;
    tokens.truncate(max_tokens);
    let mut ids = Vec::with_capacity(tokens.len() * 2);
    for (i, t) in tokens.iter().enumerate() {
        ids.push((fnv1a(t.as_bytes(), 0) % buckets as u64) as u32);
        if let Some(next) = tokens.get(i + 1) {
            let bigram = format!("{t} {next}");
            ids.push((fnv1a(bigram.as_bytes(), 0x9e37) % buckets as u64) as u32);
        }
    }
    Featurized { ids, truncated }
}
