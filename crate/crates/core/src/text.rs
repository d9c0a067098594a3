//! Whitespace normalization shared by every text-bearing type.

use sha2::{Digest, Sha256};

/// Collapses runs of Unicode whitespace to a single ASCII space and trims
/// both ends. Everything else, including typographic quotes and Greek, is
/// preserved byte for byte.
pub fn normalize(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for word in text.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// Hex-encoded SHA-256 of the given bytes.
pub fn sha256_hex(bytes: impl AsRef<[u8]>) -> String {
    let digest = Sha256::digest(bytes.as_ref());
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collapses_and_trims() {
        assert_eq!(normalize("  a\t\tb \n c  "), "a b c");
        assert_eq!(normalize("\u{00a0}x\u{2003}y"), "x y");
        assert_eq!(normalize("   "), "");
    }

    #[test]
    fn keeps_greek_and_quotes() {
        let s = "“οὕτω δὴ λαβὼν”  παρά";
        assert_eq!(normalize(s), "“οὕτω δὴ λαβὼν” παρά");
    }

    #[test]
    fn sha_is_stable() {
        assert_eq!(
            sha256_hex("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
