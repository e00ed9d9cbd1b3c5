//! Group-relative policy optimization on a tokenized 2D driving micro-world.

pub mod analysis;
pub mod corpus;
pub mod experiment;
pub mod geometry;
pub mod optim;
pub mod policy;
pub mod rewards;
pub mod sim;
pub mod tokenizer;

/// Mixes `tags` into `base` with splitmix64 rounds, giving independent
/// seeds for nested loops.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    tags.iter().fold(mix(base), |acc, &t| mix(acc ^ mix(t)))
}
