//! Machine-readable experiment reports and content hashes.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;

/// Hex SHA-256 of the concatenated parts.
pub fn content_id(parts: &[&[u8]]) -> String {
    let mut hasher = Sha256::new();
    for p in parts {
        hasher.update((p.len() as u64).to_le_bytes());
        hasher.update(p);
    }
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Hash of any serializable configuration.
pub fn config_hash<C: Serialize>(cfg: &C) -> Result<String> {
    let s = serde_json::to_string(cfg)?;
    Ok(content_id(&[s.as_bytes()])[..16].to_string())
}

/// Envelope shared by every emitted report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report<B> {
    pub experiment: String,
    /// Section or statement of the underlying mathematics the experiment realizes.
    pub paper_ref: String,
    pub config_hash: String,
    pub calibration_id: String,
    pub seed: u64,
    pub body: B,
}

impl<B: Serialize> Report<B> {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_are_stable_and_separating() {
        let a = content_id(&[b"ab", b"c"]);
        assert_eq!(a, content_id(&[b"ab", b"c"]));
        assert_ne!(a, content_id(&[b"a", b"bc"]));
        assert_eq!(a.len(), 64);
    }
}
