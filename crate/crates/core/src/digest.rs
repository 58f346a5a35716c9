//! Content hashing for audit payload digests.

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Lowercase hex SHA-256 of raw bytes.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// SHA-256 of the canonical JSON serialization of `value`.
///
/// Canonical here means serde_json's output for types whose maps are
/// ordered (`BTreeMap`) and whose floats are finite.
pub fn digest_json<T: Serialize + ?Sized>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("payload serializes to JSON");
    sha256_hex(&bytes)
}
