//! Seeded preset environments: eight meta (training) loops and three test
//! loops that differ from them in texture overlap and turn sharpness.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::floorplan::FloorPlan;
use super::generate::{generate_floorplan, texture_subset, GenParams};
use super::EnvError;

pub const META_COUNT: usize = 8;
const MAX_ATTEMPTS: u64 = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    Meta(usize),
    /// Smooth turns, every texture seen during meta training.
    CloudLike,
    /// Meta-like turns, 75% of textures from the meta pool.
    CondoLike,
    /// Sharp turns, narrower hallways, 50% texture overlap.
    TwistyLike,
}

impl Preset {
    pub const TEST: [Preset; 3] = [Preset::CloudLike, Preset::CondoLike, Preset::TwistyLike];

    pub fn name(&self) -> String {
        match self {
            Preset::Meta(k) => format!("meta-{k}"),
            Preset::CloudLike => "cloud-like".into(),
            Preset::CondoLike => "condo-like".into(),
            Preset::TwistyLike => "twisty-like".into(),
        }
    }

    /// Meta-pool fraction of the preset's textures.
    pub fn texture_overlap(&self) -> f64 {
        match self {
            Preset::Meta(_) | Preset::CloudLike => 1.0,
            Preset::CondoLike => 0.75,
            Preset::TwistyLike => 0.5,
        }
    }

    fn tag(&self) -> u64 {
        match self {
            Preset::Meta(k) => *k as u64,
            Preset::CloudLike => 100,
            Preset::CondoLike => 101,
            Preset::TwistyLike => 102,
        }
    }

    fn params(&self, rng: &mut ChaCha8Rng) -> Result<GenParams, EnvError> {
        let base = GenParams { name: self.name(), closed_loop: true, panel_length: Some(2.0), ..GenParams::default() };
        Ok(match *self {
            Preset::Meta(k) => GenParams {
                corridor_width: rng.gen_range(2.4..3.2),
                segment_count: 5 + k % 4,
                loop_jitter: 0.25,
                segment_length: (6.0, 10.0),
                textures: texture_subset(12, 1.0, rng)?,
                ..base
            },
            Preset::CloudLike => GenParams {
                corridor_width: 3.0,
                segment_count: 10,
                loop_jitter: 0.08,
                segment_length: (6.0, 9.0),
                textures: texture_subset(20, 1.0, rng)?,
                ..base
            },
            Preset::CondoLike => GenParams {
                corridor_width: 2.8,
                segment_count: 7,
                loop_jitter: 0.25,
                segment_length: (6.0, 10.0),
                textures: texture_subset(20, 0.75, rng)?,
                ..base
            },
            Preset::TwistyLike => GenParams {
                corridor_width: 2.0,
                segment_count: 9,
                loop_jitter: 0.45,
                segment_length: (4.0, 7.0),
                textures: texture_subset(20, 0.5, rng)?,
                ..base
            },
        })
    }

    /// Generate the preset; geometry rejections are retried with derived
    /// seeds, so the result is a pure function of `seed`.
    pub fn generate(&self, seed: u64) -> Result<FloorPlan, EnvError> {
        let mut last = None;
        for attempt in 0..MAX_ATTEMPTS {
            let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, self.tag(), attempt));
            let params = self.params(&mut rng)?;
            match generate_floorplan(rng.gen(), &params) {
                Ok(plan) => return Ok(plan),
                Err(e) => last = Some(e),
            }
        }
        Err(last.unwrap_or_else(|| EnvError::Geometry("no attempts".into())))
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for Preset {
    type Err = EnvError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cloud" | "cloud-like" => Ok(Preset::CloudLike),
            "condo" | "condo-like" => Ok(Preset::CondoLike),
            "twisty" | "twisty-like" => Ok(Preset::TwistyLike),
            _ => s
                .strip_prefix("meta-")
                .and_then(|k| k.parse::<usize>().ok())
                .filter(|&k| k < META_COUNT)
                .map(Preset::Meta)
                .ok_or_else(|| EnvError::UnknownPreset(s.to_string())),
        }
    }
}

/// The meta library `meta-0 .. meta-(count-1)`.
pub fn meta_library(seed: u64, count: usize) -> Result<Vec<FloorPlan>, EnvError> {
    if count == 0 || count > META_COUNT {
        return Err(EnvError::UnknownPreset(format!("meta count {count} (1..={META_COUNT})")));
    }
    (0..count).map(|k| Preset::Meta(k).generate(seed)).collect()
}

/// SplitMix64-style mixing of a seed with two stream tags.
pub fn mix(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
