use std::collections::BTreeMap;

use super::SparseVector;
use crate::error::{Error, Result};

pub const DEFAULT_HASH_DIM: usize = 1 << 18;

const FNV_OFFSET: u32 = 0x811c_9dc5;
const FNV_PRIME: u32 = 0x0100_0193;

pub fn fnv1a_32(bytes: &[u8]) -> u32 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ u32::from(b)).wrapping_mul(FNV_PRIME))
}

/// Stateless count vector: token `t` lands in bucket `fnv1a_32(t) mod dim`
/// and colliding tokens add up. `dim` must be `2^k` with `8 <= k <= 24`.
pub fn transform_hashing<S: AsRef<str>>(doc: &[S], dim: usize) -> Result<SparseVector> {
    if !dim.is_power_of_two() || !((1 << 8)..=(1 << 24)).contains(&dim) {
        return Err(Error::InvalidArgument(format!(
            "hashing dimension must be a power of two between 2^8 and 2^24, got {dim}"
        )));
    }
    let mut buckets: BTreeMap<usize, f64> = BTreeMap::new();
    for tok in doc {
        let idx = fnv1a_32(tok.as_ref().as_bytes()) as usize & (dim - 1);
        *buckets.entry(idx).or_insert(0.0) += 1.0;
    }
    Ok(SparseVector {
        dim,
        entries: buckets.into_iter().collect(),
    })
}
