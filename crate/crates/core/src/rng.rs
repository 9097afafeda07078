//! Stable seed derivation so every random draw depends only on
//! (base seed, scene, patch, purpose) and never on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags for independent random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Ransac = 1,
    MaskKind = 2,
    LineMask = 3,
    Donor = 4,
    TargetFraction = 5,
    PseudoStatic = 6,
    FreeMoving = 7,
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

pub fn derive_seed(base: u64, scene_id: &str, index: u64, stream: Stream) -> u64 {
    let mut h = splitmix64(base);
    h = splitmix64(h ^ fnv1a(scene_id.as_bytes()));
    h = splitmix64(h ^ index);
    splitmix64(h ^ stream as u64)
}

pub fn rng_for(base: u64, scene_id: &str, index: u64, stream: Stream) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, scene_id, index, stream))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_are_stable_and_distinct() {
        let a = derive_seed(7, "scene", 3, Stream::Donor);
        assert_eq!(a, derive_seed(7, "scene", 3, Stream::Donor));
        assert_ne!(a, derive_seed(7, "scene", 3, Stream::LineMask));
        assert_ne!(a, derive_seed(7, "scene", 4, Stream::Donor));
        assert_ne!(a, derive_seed(8, "scene", 3, Stream::Donor));
        assert_ne!(a, derive_seed(7, "scene2", 3, Stream::Donor));
    }
}
