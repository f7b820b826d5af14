//! Magnitude/phase extraction, noise-floor isolation and min-max scaling.

use crate::capture::ComplexSample;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CirError {
    #[error("CIR is empty")]
    Empty,
    #[error("CIR has {len} samples, needs more than {n_noise} noise-floor samples")]
    TooShort { len: usize, n_noise: usize },
}

/// `sqrt(i^2 + q^2)` per sample.
pub fn magnitude(cir: &[ComplexSample]) -> Result<Vec<f64>, CirError> {
    if cir.is_empty() {
        return Err(CirError::Empty);
    }
    Ok(cir.iter().map(|s| s.i.hypot(s.q)).collect())
}

/// Per-sample phase in (-pi, pi].
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseCir {
    pub samples: Vec<f64>,
    /// Set for (0, 0) samples, whose phase is undefined and reported as 0.
    pub low_quality: Vec<bool>,
}

impl PhaseCir {
    /// Drops the leading `n` samples so indices line up with a trimmed
    /// magnitude CIR.
    pub fn trimmed(&self, n: usize) -> PhaseCir {
        PhaseCir {
            samples: self.samples[n.min(self.samples.len())..].to_vec(),
            low_quality: self.low_quality[n.min(self.low_quality.len())..].to_vec(),
        }
    }
}

/// Full-quadrant phase of one sample, in (-pi, pi]. The origin maps to 0.
pub fn sample_phase(s: ComplexSample) -> f64 {
    if s.i == 0.0 && s.q == 0.0 {
        return 0.0;
    }
    let p = s.q.atan2(s.i);
    // atan2 returns -pi for (negative i, -0.0 q); fold it onto the closed end.
    if p <= -PI {
        PI
    } else {
        p
    }
}

pub fn phase(cir: &[ComplexSample]) -> Result<PhaseCir, CirError> {
    if cir.is_empty() {
        return Err(CirError::Empty);
    }
    Ok(PhaseCir {
        samples: cir.iter().map(|&s| sample_phase(s)).collect(),
        low_quality: cir.iter().map(|s| s.i == 0.0 && s.q == 0.0).collect(),
    })
}

/// Magnitude CIR with the noise floor stripped off.
#[derive(Debug, Clone, PartialEq)]
pub struct MagnitudeCir {
    pub samples: Vec<f64>,
    /// RMS of the stripped noise-floor magnitudes (raw units).
    pub noise_rms: f64,
    /// First-path index in the trimmed array's coordinates.
    pub first_path_index: usize,
}

/// Removes the first `n_noise` samples and measures their RMS.
///
/// `first_path_index` is given in raw coordinates and re-based onto the
/// trimmed array; a first path inside the noise region clamps to 0.
pub fn split_noise_floor(
    mag: &[f64],
    first_path_index: usize,
    n_noise: usize,
) -> Result<MagnitudeCir, CirError> {
    if mag.len() <= n_noise {
        return Err(CirError::TooShort {
            len: mag.len(),
            n_noise,
        });
    }
    let noise_rms = if n_noise == 0 {
        0.0
    } else {
        (mag[..n_noise].iter().map(|m| m * m).sum::<f64>() / n_noise as f64).sqrt()
    };
    Ok(MagnitudeCir {
        samples: mag[n_noise..].to_vec(),
        noise_rms,
        first_path_index: first_path_index.saturating_sub(n_noise),
    })
}

/// Min-max scaled CIR in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedCir {
    pub samples: Vec<f64>,
    pub scale_min: f64,
    pub scale_max: f64,
    /// True when every input sample was equal; samples are then all zero.
    pub degenerate: bool,
}

impl NormalizedCir {
    /// Wraps samples that are already on a [0, 1] scale.
    pub fn from_normalized(samples: Vec<f64>) -> Self {
        Self {
            samples,
            scale_min: 0.0,
            scale_max: 1.0,
            degenerate: false,
        }
    }
}

pub fn minmax_normalize(samples: &[f64]) -> Result<NormalizedCir, CirError> {
    if samples.is_empty() {
        return Err(CirError::Empty);
    }
    let (lo, hi) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if hi > lo {
        let span = hi - lo;
        Ok(NormalizedCir {
            samples: samples.iter().map(|&v| (v - lo) / span).collect(),
            scale_min: lo,
            scale_max: hi,
            degenerate: false,
        })
    } else {
        Ok(NormalizedCir {
            samples: vec![0.0; samples.len()],
            scale_min: lo,
            scale_max: hi,
            degenerate: true,
        })
    }
}
