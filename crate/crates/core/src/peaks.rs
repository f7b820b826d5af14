//! Local-maximum detection with prominence and width at half prominence.
//!
//! Conventions:
//! * a peak needs a strictly lower sample on its left and, after any run of
//!   equal samples, a strictly lower sample on its right; a flat top reports
//!   its left-midpoint index `(first + last) / 2`;
//! * array endpoints are never peaks;
//! * prominence is measured against the higher of the two side minima, each
//!   side scanned outward until a strictly higher sample or the array end;
//! * width is taken at `peak - prominence / 2`, with crossings linearly
//!   interpolated between the bracketing samples.

use crate::cir::{MagnitudeCir, NormalizedCir};
use serde::{Deserialize, Serialize};

/// Indices of local maxima, in increasing order.
pub fn find_local_maxima(x: &[f64]) -> Vec<usize> {
    let n = x.len();
    let mut peaks = Vec::new();
    if n < 3 {
        return peaks;
    }
    let mut i = 1;
    while i < n - 1 {
        if x[i - 1] < x[i] {
            let mut ahead = i + 1;
            while ahead < n - 1 && x[ahead] == x[i] {
                ahead += 1;
            }
            if x[ahead] < x[i] {
                peaks.push((i + ahead - 1) / 2);
                i = ahead;
                continue;
            }
        }
        i += 1;
    }
    peaks
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prominence {
    pub value: f64,
    pub left_base: usize,
    pub right_base: usize,
}

/// Prominence of the sample at `peak`.
///
/// At an array end only the interior side contributes.
pub fn prominence(x: &[f64], peak: usize) -> Prominence {
    let top = x[peak];

    let (mut left_min, mut left_base) = (top, peak);
    let mut i = peak;
    while i > 0 {
        i -= 1;
        if x[i] > top {
            break;
        }
        if x[i] < left_min {
            left_min = x[i];
            left_base = i;
        }
    }

    let (mut right_min, mut right_base) = (top, peak);
    let mut i = peak;
    while i + 1 < x.len() {
        i += 1;
        if x[i] > top {
            break;
        }
        if x[i] < right_min {
            right_min = x[i];
            right_base = i;
        }
    }

    let base = match (peak > 0, peak + 1 < x.len()) {
        (true, true) => left_min.max(right_min),
        (true, false) => left_min,
        (false, true) => right_min,
        (false, false) => top,
    };
    Prominence {
        value: top - base,
        left_base,
        right_base,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Width {
    /// `right_ip - left_ip`, in samples.
    pub width: f64,
    pub left_ip: f64,
    pub right_ip: f64,
    pub height: f64,
    /// A side reached the array end without crossing the reference height.
    pub truncated: bool,
}

/// Peak width at half the given prominence.
pub fn width_at_half_prominence(x: &[f64], peak: usize, prominence: f64) -> Width {
    let height = x[peak] - prominence / 2.0;
    let mut truncated = false;

    let mut i = peak;
    while i > 0 && x[i] > height {
        i -= 1;
    }
    let left_ip = if x[i] > height {
        truncated = true;
        i as f64
    } else if x[i] < height {
        i as f64 + (height - x[i]) / (x[i + 1] - x[i])
    } else {
        i as f64
    };

    let mut i = peak;
    while i + 1 < x.len() && x[i] > height {
        i += 1;
    }
    let right_ip = if x[i] > height {
        truncated = true;
        i as f64
    } else if x[i] < height {
        i as f64 - (height - x[i]) / (x[i - 1] - x[i])
    } else {
        i as f64
    };

    Width {
        width: right_ip - left_ip,
        left_ip,
        right_ip,
        height,
        truncated,
    }
}

/// Three-point parabolic vertex offset around `k`, clamped to +-0.5.
pub fn parabolic_offset(x: &[f64], k: usize) -> f64 {
    if k == 0 || k + 1 >= x.len() {
        return 0.0;
    }
    let (y0, y1, y2) = (x[k - 1], x[k], x[k + 1]);
    let denom = y0 - 2.0 * y1 + y2;
    if !(denom < 0.0) {
        return 0.0;
    }
    (0.5 * (y0 - y2) / denom).clamp(-0.5, 0.5)
}

/// A candidate reflection found on the preamble CIR (trimmed coordinates).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawPeak {
    pub index: usize,
    pub refined_index: f64,
    pub amplitude_norm: f64,
    pub amplitude_raw: f64,
    pub prominence: f64,
    pub width: f64,
    pub truncated: bool,
}

/// Every local maximum of the normalized CIR, with its properties.
pub fn detect_peaks(norm: &NormalizedCir, mag: &MagnitudeCir, refine: bool) -> Vec<RawPeak> {
    if norm.degenerate {
        return Vec::new();
    }
    let x = &norm.samples;
    find_local_maxima(x)
        .into_iter()
        .map(|k| {
            let prom = prominence(x, k);
            let w = width_at_half_prominence(x, k, prom.value);
            let refined_index = if refine {
                k as f64 + parabolic_offset(&mag.samples, k)
            } else {
                k as f64
            };
            RawPeak {
                index: k,
                refined_index,
                amplitude_norm: x[k],
                amplitude_raw: mag.samples[k],
                prominence: prom.value,
                width: w.width,
                truncated: w.truncated,
            }
        })
        .collect()
}
