//! Peak scoring and gating.
//!
//! A candidate survives when its width and prominence (normalized CIR), its
//! SNR score (raw magnitudes, delay-weighted) and its phase difference of
//! arrival all pass their thresholds. The strongest survivor after the first
//! path is the frame's target.

use crate::capture::Channel;
use crate::peaks::RawPeak;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

/// Delay weighting of the SNR score, in score units per sample.
pub const DEFAULT_K: f64 = 0.20;
/// Symmetric PDoA validity bound, the image of +-45 degrees of AoA.
pub const PDOA_GATE_RAD: f64 = 2.1325;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterParams {
    /// Minimum width at half prominence, samples.
    pub width_min: f64,
    /// Minimum prominence on the normalized CIR.
    pub prominence_min: f64,
    pub snr_min: f64,
    pub k: f64,
    pub pdoa_gate: f64,
}

impl FilterParams {
    pub fn validate(&self) -> Result<(), String> {
        let fields = [
            ("width", self.width_min),
            ("prominence", self.prominence_min),
            ("snr_score", self.snr_min),
            ("k", self.k),
            ("pdoa_gate", self.pdoa_gate),
        ];
        for (name, v) in fields {
            if !(v >= 0.0) {
                return Err(format!("filter parameter `{name}` must be >= 0 (got {v})"));
            }
        }
        if self.pdoa_gate > PI {
            return Err(format!("pdoa_gate {} exceeds pi", self.pdoa_gate));
        }
        Ok(())
    }
}

impl Default for FilterParams {
    fn default() -> Self {
        table3_preset(Channel::Ch9, Material::Overall)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Material {
    Metal,
    Concrete,
    Plywood,
    Overall,
}

impl FromStr for Material {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "metal" => Ok(Material::Metal),
            "concrete" => Ok(Material::Concrete),
            "plywood" => Ok(Material::Plywood),
            "overall" => Ok(Material::Overall),
            other => Err(format!("unknown material `{other}`")),
        }
    }
}

impl fmt::Display for Material {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Material::Metal => "Metal",
            Material::Concrete => "Concrete",
            Material::Plywood => "Plywood",
            Material::Overall => "Overall",
        })
    }
}

/// Tuned thresholds per channel and obstacle material.
pub fn table3_preset(channel: Channel, material: Material) -> FilterParams {
    let (width_min, prominence_min, snr_min) = match (channel, material) {
        (Channel::Ch5, Material::Metal) => (1.0, 0.04, 25.0),
        (Channel::Ch5, Material::Concrete) => (1.0, 0.05, 20.0),
        (Channel::Ch5, Material::Plywood) => (1.0, 0.02, 15.0),
        (Channel::Ch5, Material::Overall) => (1.0, 0.05, 20.0),
        (Channel::Ch9, Material::Metal) => (1.0, 0.05, 20.0),
        (Channel::Ch9, Material::Concrete) => (2.0, 0.03, 10.0),
        (Channel::Ch9, Material::Plywood) => (0.10, 0.01, 10.0),
        (Channel::Ch9, Material::Overall) => (0.20, 0.03, 10.0),
    };
    FilterParams {
        width_min,
        prominence_min,
        snr_min,
        k: DEFAULT_K,
        pdoa_gate: PDOA_GATE_RAD,
    }
}

/// `20 log10(A / A_noise) + k * delay`.
///
/// A zero amplitude scores `-inf`; otherwise a zero noise floor scores
/// `+inf`.
pub fn snr_score(amplitude_raw: f64, noise_rms: f64, delay_samples: usize, k: f64) -> f64 {
    if amplitude_raw == 0.0 {
        return f64::NEG_INFINITY;
    }
    if noise_rms == 0.0 {
        return f64::INFINITY;
    }
    20.0 * (amplitude_raw / noise_rms).log10() + k * delay_samples as f64
}

/// Wrapped phase difference `((phi_b - phi_a + pi) mod 2pi) - pi`, in [-pi, pi).
pub fn pdoa(phase_a: f64, phase_b: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut r = (-phase_a + phase_b + PI).rem_euclid(two_pi);
    if r >= two_pi {
        r -= two_pi;
    }
    r - PI
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredPeak {
    pub raw: RawPeak,
    #[serde(with = "crate::json_f64")]
    pub snr_score: f64,
    pub delay_samples: usize,
    pub pdoa: f64,
}

impl ScoredPeak {
    pub fn passes_properties(&self, p: &FilterParams) -> bool {
        self.raw.width >= p.width_min
            && self.raw.prominence >= p.prominence_min
            && self.snr_score >= p.snr_min
    }

    pub fn passes_pdoa(&self, p: &FilterParams) -> bool {
        self.pdoa.abs() <= p.pdoa_gate
    }

    pub fn passes(&self, p: &FilterParams) -> bool {
        self.passes_properties(p) && self.passes_pdoa(p)
    }
}

/// Scores peaks after the first path. `sts1`/`sts2` are the trimmed STS
/// phase arrays, index-aligned with the preamble.
pub fn score_peaks(
    peaks: &[RawPeak],
    first_path_index: usize,
    noise_rms: f64,
    sts1: &[f64],
    sts2: &[f64],
    k: f64,
) -> Vec<ScoredPeak> {
    peaks
        .iter()
        .filter(|p| p.index > first_path_index)
        .map(|p| {
            let delay_samples = p.index - first_path_index;
            ScoredPeak {
                raw: *p,
                snr_score: snr_score(p.amplitude_raw, noise_rms, delay_samples, k),
                delay_samples,
                pdoa: pdoa(sts1[p.index], sts2[p.index]),
            }
        })
        .collect()
}

/// Stable filter on all four criteria.
pub fn apply_filters(peaks: &[ScoredPeak], params: &FilterParams) -> Vec<ScoredPeak> {
    peaks.iter().filter(|p| p.passes(params)).copied().collect()
}

/// Strongest survivor by raw amplitude; ties go to the smaller index.
pub fn select_target_peak(filtered: &[ScoredPeak]) -> Option<ScoredPeak> {
    filtered.iter().copied().reduce(|best, p| {
        if p.raw.amplitude_raw > best.raw.amplitude_raw
            || (p.raw.amplitude_raw == best.raw.amplitude_raw && p.raw.index < best.raw.index)
        {
            p
        } else {
            best
        }
    })
}
