//! Deterministic 64-bit mixing used for seed splitting and fingerprints.

/// SplitMix64 finalizer. Bijective on `u64`.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a sequence of words into one seed: `s ← mix64(s ^ w)` for each word.
pub(crate) fn fold(words: &[u64]) -> u64 {
    words.iter().fold(0u64, |s, &w| mix64(s ^ w))
}

/// Order-sensitive fingerprint of a list of floats (bit patterns).
pub fn fingerprint_f64s<I: IntoIterator<Item = f64>>(values: I) -> u64 {
    values
        .into_iter()
        .fold(0x5252_4953_u64, |s, v| mix64(s ^ v.to_bits()))
}
