//! Deterministic sub-seed derivation.
//!
//! Every randomized stage derives its own seed from the master seed, a
//! purpose tag, and an index. Work items can then run in any order (or in
//! parallel) and still draw identical random streams.

/// Derives a child seed from `master`, a purpose `tag`, and an `index`.
///
/// Mixes with the splitmix64 finalizer, which diffuses single-bit input
/// differences across the whole output word.
pub fn derive_seed(master: u64, tag: &str, index: u64) -> u64 {
    let mut h = master;
    for &b in tag.as_bytes() {
        h = mix(h ^ u64::from(b));
    }
    mix(h ^ index)
}

fn mix(v: u64) -> u64 {
    let mut z = v.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
