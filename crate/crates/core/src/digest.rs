// SPDX-License-Identifier: Apache-2.0

//! Stable content digests used for ids and fixture keys.

use sha2::{Digest, Sha256};

/// Hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Short identifier-safe id: `prefix` followed by the first 12 hex digits of
/// the digest of `parts` joined with a unit separator.
pub fn short_id(prefix: &str, parts: &[&str]) -> String {
    let joined = parts.join("\u{1f}");
    let hex = sha256_hex(joined.as_bytes());
    format!("{prefix}_{}", &hex[..12])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_is_stable() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        assert_eq!(short_id("x", &["a", "b"]), short_id("x", &["a", "b"]));
        assert_ne!(short_id("x", &["a", "b"]), short_id("x", &["ab"]));
    }
}
