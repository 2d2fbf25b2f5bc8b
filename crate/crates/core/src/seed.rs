//! Derivation of independent, reproducible RNG streams.
//!
//! Every stochastic component takes a `u64` seed; substreams are derived
//! by mixing the parent seed with structural coordinates (topology mask,
//! run index, iteration) so that results are independent of evaluation
//! order.

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mix an ordered list of parts into one well-scrambled seed.
pub fn mix(parts: &[u64]) -> u64 {
    let mut state = 0x6A09_E667_F3BC_C909;
    for &part in parts {
        state = splitmix64(state ^ splitmix64(part));
    }
    state
}
