use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Mixes a base seed with a stream tag and an index into an independent seed
/// (splitmix64 finalizer).
pub fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn stream_rng(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, stream, index))
}

/// Stream tags keep the different consumers of one seed apart.
pub mod streams {
    pub const INIT: u64 = 1;
    pub const DATA_TRAIN: u64 = 2;
    pub const DATA_TEST: u64 = 3;
    pub const SHUFFLE: u64 = 4;
    pub const AUGMENT: u64 = 5;
    pub const TEMPLATES: u64 = 6;
    pub const AGES: u64 = 7;
}
