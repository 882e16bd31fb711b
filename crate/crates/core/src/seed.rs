//! Per-stage seed derivation from one pipeline seed.

/// Deterministic child seed for a named stage (FNV-1a of the name mixed with splitmix64).
pub fn derive(seed: u64, stage: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in stage.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix(seed ^ h)
}

pub fn splitmix(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stages_differ_and_repeat() {
        assert_eq!(derive(7, "cluster"), derive(7, "cluster"));
        assert_ne!(derive(7, "cluster"), derive(7, "ranker"));
        assert_ne!(derive(7, "cluster"), derive(8, "cluster"));
    }
}
