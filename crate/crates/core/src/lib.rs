//! Heterogeneous VLC-RF vehicular fog computing: scenario generation,
//! channel and rate modeling, delay accounting, and minimization of the
//! average task processing delay by majorization-minimization over an
//! embedded conic interior-point solver, with reference baselines and a
//! brute-force oracle.

pub mod channel;
pub mod conic;
pub mod delay;
pub mod phy;
pub mod scenario;
pub mod surrogate;

pub(crate) mod util {
    /// splitmix64 step, used to derive independent RNG streams from
    /// (seed, index) pairs so draws are reproducible regardless of
    /// evaluation order.
    pub fn mix_seed(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e3779b97f4a7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    pub fn combine_seeds(parts: &[u64]) -> u64 {
        let mut acc = 0x51_7c_c1_b7_27_22_0a_95u64;
        for &p in parts {
            acc = mix_seed(acc ^ p);
        }
        acc
    }
}
