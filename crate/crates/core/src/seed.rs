//! Seed derivation for independent deterministic streams.

/// One round of the splitmix64 finalizer.
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `base` and a stream tag.
pub fn derive(base: u64, tag: u64) -> u64 {
    splitmix(splitmix(base) ^ tag.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}
