//! Counter-based random streams. Every random quantity in a trial is keyed by
//! (seed, trial, tag, ids), so results never depend on evaluation order.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub(crate) const BS: u64 = 0x1;
pub(crate) const BASE_USERS: u64 = 0x2;
pub(crate) const LAYER_USERS: u64 = 0x3;
pub(crate) const ASSOC: u64 = 0x4;
pub(crate) const PRIORITY: u64 = 0x5;
pub(crate) const MARKS: u64 = 0x6;

// splitmix64 finalizer
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub(crate) fn key(parts: &[u64]) -> u64 {
    let mut h = 0x9e37_79b9_7f4a_7c15u64;
    for &p in parts {
        h = mix(h ^ mix(p.wrapping_add(0x9e37_79b9_7f4a_7c15)));
    }
    h
}

pub(crate) fn rng(parts: &[u64]) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(key(parts))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_differ_by_position() {
        assert_ne!(key(&[1, 2]), key(&[2, 1]));
        assert_ne!(key(&[0]), key(&[0, 0]));
        assert_eq!(key(&[7, 8, 9]), key(&[7, 8, 9]));
    }
}
