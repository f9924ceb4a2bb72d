//! Counter-based seed derivation.
//!
//! Every derived stream seed is `splitmix64(base ^ splitmix64(stream))`. The
//! mapping is fixed: changing it changes every artifact produced from a given
//! configuration seed.

/// One round of the SplitMix64 finaliser.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for sub-stream `stream` of the generator seeded with `base`.
pub fn derive(base: u64, stream: u64) -> u64 {
    splitmix64(base ^ splitmix64(stream))
}

/// Fixed stream identifiers shared by the scenario runners.
pub mod stream {
    pub const LASER: u64 = 0x4C_4153_4552; // "LASER"
    pub const FIBRE: u64 = 0x46_4942_5245; // "FIBRE"
    pub const DETECTOR: u64 = 0x44_4554_4543; // "DETEC"
    pub const DRIFT: u64 = 0x44_5249_4654; // "DRIFT"
    pub const CLICKS: u64 = 0x43_4C49_434B; // "CLICK"
    pub const KEY_DRIFT: u64 = 0x4B44_5249_4654; // "KDRIFT"
    pub const KEY_CLICKS: u64 = 0x4B43_4C49_434B; // "KCLICK"
    pub const SAMPLING_SET: u64 = 0x5341_4D50_4C45; // "SAMPLE"
}
