//! Deterministic per-task seeds derived from one master seed.

/// One step of the splitmix64 generator.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Seed for task `index` of a run seeded with `master`.
pub fn task_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index))
}
