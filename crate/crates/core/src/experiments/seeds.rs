//! Deterministic seed derivation. Every seed is a SplitMix64 hash chain over
//! the master seed and the record's indices.
//!
//! * scenario seed = `mix(master, placement, trial)`; drives user positions and
//!   fading, so both architectures, every orientation and every altitude at
//!   one placement and trial see the same users and NLoS draws.
//! * solver seed = `mix(scenario, altitude, architecture, eta)`; drives the
//!   solver's random start and is distinct per record.

/// Human-readable form of the derivation, stored in run manifests.
pub const SEED_RULE: &str = "mix(a, b) = splitmix64(a ^ splitmix64(b)); \
scenario_seed = mix(mix(master_seed, placement_index), trial); \
users_seed = mix(scenario_seed, 0x5553455253) or mix(master_seed, 0x5553455253) when users are frozen; \
solver_seed = mix(mix(mix(scenario_seed, altitude_index), architecture_code), eta_index + 1) \
with architecture_code ris = 1, star = 2 and eta_index = 0 for ris";

const USERS_TAG: u64 = 0x5553_4552_53;

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn mix(a: u64, b: u64) -> u64 {
    splitmix64(a ^ splitmix64(b))
}

pub fn scenario_seed(master: u64, placement: usize, trial: usize) -> u64 {
    mix(mix(master, placement as u64), trial as u64)
}

pub fn users_seed(master: u64, scenario: u64, frozen: bool) -> u64 {
    if frozen {
        mix(master, USERS_TAG)
    } else {
        mix(scenario, USERS_TAG)
    }
}

pub fn solver_seed(scenario: u64, altitude: usize, architecture_code: u64, eta: usize) -> u64 {
    mix(mix(mix(scenario, altitude as u64), architecture_code), eta as u64 + 1)
}
