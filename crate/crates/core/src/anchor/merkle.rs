use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::decode_hash;
use crate::error::AnchorError;

/// Which side of the running hash the sibling sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    L,
    R,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProofStep {
    pub sibling: String,
    pub side: Side,
}

fn parent(left: &[u8], right: &[u8]) -> Vec<u8> {
    let mut h = Sha256::new();
    h.update(left);
    h.update(right);
    h.finalize().to_vec()
}

/// Root of the tree over `hashes` (in the given order) and one inclusion
/// proof per leaf. A node without a partner is promoted to the next level
/// unchanged.
pub fn merkle_tree(hashes: &[String]) -> Result<(String, Vec<Vec<ProofStep>>), AnchorError> {
    if hashes.is_empty() {
        return Err(AnchorError::EmptyBatch);
    }
    let mut level: Vec<Vec<u8>> = hashes.iter().map(|h| decode_hash(h)).collect::<Result<_, _>>()?;
    let mut proofs: Vec<Vec<ProofStep>> = vec![Vec::new(); hashes.len()];
    // position of each leaf in the current level
    let mut position: Vec<usize> = (0..hashes.len()).collect();

    while level.len() > 1 {
        for (leaf, pos) in position.iter_mut().enumerate() {
            let sibling = *pos ^ 1;
            if sibling < level.len() {
                let side = if sibling > *pos { Side::R } else { Side::L };
                proofs[leaf].push(ProofStep {
                    sibling: hex::encode(&level[sibling]),
                    side,
                });
            }
            *pos /= 2;
        }
        level = level
            .chunks(2)
            .map(|pair| match pair {
                [l, r] => parent(l, r),
                [only] => only.clone(),
                _ => unreachable!(),
            })
            .collect();
    }
    Ok((hex::encode(&level[0]), proofs))
}

/// Folds `hash` through `proof` and compares with `root`. Malformed input
/// never verifies.
pub fn verify_merkle_proof(hash: &str, proof: &[ProofStep], root: &str) -> bool {
    let Ok(mut acc) = decode_hash(hash) else {
        return false;
    };
    for step in proof {
        let Ok(sibling) = decode_hash(&step.sibling) else {
            return false;
        };
        acc = match step.side {
            Side::L => parent(&sibling, &acc),
            Side::R => parent(&acc, &sibling),
        };
    }
    hex::encode(acc) == root
}
