//! Content hashing. SHA-256, rendered as lowercase hex.

use sha2::{Digest, Sha256};

pub fn content_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
