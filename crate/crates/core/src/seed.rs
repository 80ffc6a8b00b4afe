//! Deterministic seed fan-out from one master seed.

use sha2::{Digest, Sha256};

/// Seed for `component`, the first eight bytes (little endian) of
/// `SHA-256(master_le || component)`.
pub fn derive_seed(master: u64, component: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(component.as_bytes());
    let digest = h.finalize();
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(head)
}
