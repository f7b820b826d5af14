//! Bistatic localisation of a selected peak.
//!
//! Receiver frame: `x` along the boresight, `y` to the left, angles positive
//! counter-clockwise. The transmitter sits at `(0, -d_tx_rx)`, i.e. the angle
//! at the receiver between the transmitter and a target at boresight angle
//! `theta` is `theta + 90deg`. Under that convention the cosine law
//! `d_tx_p^2 = d_rx_p^2 + b^2 - 2 d_rx_p b cos(theta + 90deg)` together with
//! `d = d_tx_p + d_rx_p` solves to
//! `d_rx_p = (d^2 - b^2) / (2 (d + b sin(theta)))`.

use crate::capture::{Channel, Pose};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

/// Speed of light in cm per ns.
pub const SPEED_OF_LIGHT_CM_PER_NS: f64 = 29.979_245_8;
pub const DEFAULT_AOA_COEFF: f64 = 0.95;
/// Transmitter-receiver separation used when no calibration is supplied.
pub const DEFAULT_BASELINE_CM: f64 = 20.0;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("PDoA {0} rad outside [-pi, pi]")]
    PdoaDomain(f64),
    #[error("non-physical path length {d:.3} cm (must exceed baseline {baseline:.3} cm)")]
    NonPhysical { d: f64, baseline: f64 },
    #[error("degenerate range denominator {0:.3e}")]
    Degenerate(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryParams {
    /// Transmitter-receiver baseline, cm.
    pub d_tx_rx: f64,
    pub aoa_coeff: f64,
    /// Distance calibration offset subtracted from the path length, cm.
    pub bias_cm: f64,
    /// Angular calibration offset subtracted from the AoA, rad.
    pub bias_aoa_rad: f64,
    pub c_cm_per_ns: f64,
    pub sample_interval_ns: f64,
    /// The first path already travelled the baseline, so delays measured from
    /// it are added on top of `d_tx_rx`.
    pub baseline_in_delay: bool,
}

impl GeometryParams {
    /// Calibrated offsets for the given channel.
    pub fn for_channel(channel: Channel) -> Self {
        let (bias_cm, bias_aoa_rad) = match channel {
            Channel::Ch5 => (15.0, 0.0522),
            Channel::Ch9 => (13.0, 0.0209),
        };
        Self {
            bias_cm,
            bias_aoa_rad,
            ..Self::uncalibrated()
        }
    }

    /// Zero calibration offsets.
    pub fn uncalibrated() -> Self {
        Self {
            d_tx_rx: DEFAULT_BASELINE_CM,
            aoa_coeff: DEFAULT_AOA_COEFF,
            bias_cm: 0.0,
            bias_aoa_rad: 0.0,
            c_cm_per_ns: SPEED_OF_LIGHT_CM_PER_NS,
            sample_interval_ns: 1.0,
            baseline_in_delay: true,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.d_tx_rx >= 0.0) {
            return Err(format!("d_tx_rx must be >= 0 (got {})", self.d_tx_rx));
        }
        if !(self.aoa_coeff > 0.0) {
            return Err(format!("aoa_coeff must be > 0 (got {})", self.aoa_coeff));
        }
        if !(self.c_cm_per_ns > 0.0 && self.sample_interval_ns > 0.0) {
            return Err("speed of light and sample interval must be positive".into());
        }
        if !(self.bias_cm.is_finite() && self.bias_aoa_rad.is_finite()) {
            return Err("calibration offsets must be finite".into());
        }
        Ok(())
    }

    /// Path length covered by one sample of delay, cm.
    pub fn cm_per_sample(&self) -> f64 {
        self.sample_interval_ns * self.c_cm_per_ns
    }
}

/// `theta = asin(alpha / pi) / aoa_coeff - bias_aoa`.
pub fn aoa_from_pdoa(alpha: f64, params: &GeometryParams) -> Result<f64, GeometryError> {
    if !(alpha.abs() <= PI) {
        return Err(GeometryError::PdoaDomain(alpha));
    }
    Ok((alpha / PI).asin() / params.aoa_coeff - params.bias_aoa_rad)
}

/// PDoA that an arrival at boresight angle `theta` produces; inverse of
/// [`aoa_from_pdoa`] without the calibration offset.
pub fn pdoa_from_aoa(theta: f64, aoa_coeff: f64) -> f64 {
    PI * (aoa_coeff * theta).sin()
}

/// Total transmitter-target-receiver path length from a peak position.
pub fn total_path_length(
    refined_index: f64,
    first_path_index: f64,
    params: &GeometryParams,
) -> Result<f64, GeometryError> {
    let delay = refined_index - first_path_index;
    let base = if params.baseline_in_delay {
        params.d_tx_rx
    } else {
        0.0
    };
    let d = base + delay * params.cm_per_sample() - params.bias_cm;
    if !(d > params.d_tx_rx) || delay <= 0.0 {
        return Err(GeometryError::NonPhysical {
            d,
            baseline: params.d_tx_rx,
        });
    }
    Ok(d)
}

/// Receiver-to-target range from total path length `d` and AoA `theta`.
pub fn range_from_rx(d: f64, theta: f64, params: &GeometryParams) -> Result<f64, GeometryError> {
    let b = params.d_tx_rx;
    if !(d > b) {
        return Err(GeometryError::NonPhysical { d, baseline: b });
    }
    let denom = 2.0 * (d + b * theta.sin());
    if !(denom > 0.0) {
        return Err(GeometryError::Degenerate(denom));
    }
    Ok((d * d - b * b) / denom)
}

/// World position of a target at `range_rx` along boresight angle `theta`
/// from a receiver mounted at `mount` on a robot at `pose`.
pub fn to_world_frame(range_rx: f64, theta: f64, pose: &Pose, mount: &Pose) -> (f64, f64) {
    let rx = pose.compose(mount);
    let heading = rx.yaw + theta;
    (
        rx.x + range_rx * heading.cos(),
        rx.y + range_rx * heading.sin(),
    )
}

/// A filtered peak placed in the world frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectedPoint {
    pub x: f64,
    pub y: f64,
    #[serde(with = "crate::json_f64")]
    pub snr_score: f64,
    pub timestamp_ms: i64,
    pub receiver_id: String,
    pub aoa: f64,
    pub range_rx: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn aoa_examples() {
        let p = GeometryParams::uncalibrated();
        assert_eq!(aoa_from_pdoa(0.0, &p).unwrap(), 0.0);
        let t = aoa_from_pdoa(2.1325, &p).unwrap();
        assert!((t.to_degrees() - 45.0).abs() < 0.1);
        assert_eq!(aoa_from_pdoa(-2.1325, &p).unwrap(), -t);
        assert!(aoa_from_pdoa(3.2, &p).is_err());
        let cal = GeometryParams::for_channel(Channel::Ch9);
        assert!(close(aoa_from_pdoa(0.0, &cal).unwrap(), -0.0209, 1e-12));
    }

    #[test]
    fn path_length_examples() {
        let mut p = GeometryParams::uncalibrated();
        p.d_tx_rx = 0.0;
        assert!(close(total_path_length(14.0, 4.0, &p).unwrap(), 299.792_458, 1e-12));
        let mut p = GeometryParams::for_channel(Channel::Ch9);
        p.d_tx_rx = 20.0;
        assert!(close(total_path_length(14.0, 4.0, &p).unwrap(), 306.792_458, 1e-12));
        assert!(matches!(
            total_path_length(4.0, 4.0, &p),
            Err(GeometryError::NonPhysical { .. })
        ));
        let mut p = GeometryParams::uncalibrated();
        p.baseline_in_delay = false;
        assert!(close(total_path_length(14.0, 4.0, &p).unwrap(), 299.792_458, 1e-12));
    }

    #[test]
    fn range_examples() {
        let mut p = GeometryParams::uncalibrated();
        p.d_tx_rx = 0.0;
        for theta in [-0.7, 0.0, 0.3] {
            assert_eq!(range_from_rx(500.0, theta, &p).unwrap(), 250.0);
        }
        p.d_tx_rx = 20.0;
        let r = range_from_rx(700.0, 0.0, &p).unwrap();
        assert!(close(r, 489_600.0 / 1400.0, 1e-12));
        assert!(close(r, 349.714_285_714_285_7, 1e-12));
        assert!(range_from_rx(20.0, 0.0, &p).is_err());
    }

    #[test]
    fn degenerate_denominator() {
        let mut p = GeometryParams::uncalibrated();
        p.d_tx_rx = 100.0;
        // b sin(theta) <= -d can only happen for d <= b, which is caught first
        assert!(matches!(
            range_from_rx(90.0, -PI / 2.0, &p),
            Err(GeometryError::NonPhysical { .. })
        ));
    }

    #[test]
    fn world_frame_examples() {
        let zero = Pose::default();
        let (x, y) = to_world_frame(100.0, 0.0, &zero, &zero);
        assert!(close(x, 100.0, 1e-12) && y.abs() < 1e-12);
        let (x, y) = to_world_frame(100.0, 0.0, &Pose::new(0.0, 0.0, PI / 2.0), &zero);
        assert!(x.abs() < 1e-12 && close(y, 100.0, 1e-12));
        let (x, y) = to_world_frame(
            2f64.sqrt() * 100.0,
            PI / 4.0,
            &Pose::new(50.0, 50.0, 0.0),
            &zero,
        );
        assert!(close(x, 150.0, 1e-12) && close(y, 150.0, 1e-12));
        // mounting offset: side receiver 10 cm left, looking left
        let mount = Pose::new(0.0, 10.0, PI / 2.0);
        let (x, y) = to_world_frame(50.0, 0.0, &Pose::default(), &mount);
        assert!(x.abs() < 1e-12 && close(y, 60.0, 1e-12));
    }

    /// Places a target at `(r, theta)` in the receiver frame, with the
    /// transmitter at `(0, -b)`, and measures both legs directly.
    fn forward_path(r: f64, theta: f64, b: f64) -> f64 {
        let (px, py) = (r * theta.cos(), r * theta.sin());
        let d_tx = px.hypot(py + b);
        let d_rx = px.hypot(py);
        d_tx + d_rx
    }

    #[test]
    fn forward_geometry_round_trip() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut p = GeometryParams::uncalibrated();
        for _ in 0..10_000 {
            let r = rng.random_range(30.0..600.0);
            let theta = rng.random_range(-PI / 4.0..=PI / 4.0);
            p.d_tx_rx = rng.random_range(0.0..=50.0);
            let d = forward_path(r, theta, p.d_tx_rx);
            let got = range_from_rx(d, theta, &p).unwrap();
            assert!((got - r).abs() < 1e-9, "r={r} theta={theta} b={}", p.d_tx_rx);
        }
    }

    proptest! {
        #[test]
        fn path_length_strictly_increasing(a in 0.1f64..40.0, step in 1e-6f64..5.0) {
            let p = GeometryParams::uncalibrated();
            let d1 = total_path_length(a, 0.0, &p).unwrap();
            let d2 = total_path_length(a + step, 0.0, &p).unwrap();
            prop_assert!(d2 > d1);
        }

        #[test]
        fn aoa_odd_and_increasing(a in 0.0f64..2.1325, step in 1e-6f64..0.5) {
            let p = GeometryParams::uncalibrated();
            prop_assert_eq!(aoa_from_pdoa(-a, &p).unwrap(), -aoa_from_pdoa(a, &p).unwrap());
            let b = (a + step).min(2.1325);
            if b > a {
                prop_assert!(aoa_from_pdoa(b, &p).unwrap() > aoa_from_pdoa(a, &p).unwrap());
            }
        }

        #[test]
        fn pdoa_inverse_identity(theta in -0.8f64..0.8) {
            let p = GeometryParams::uncalibrated();
            let back = aoa_from_pdoa(pdoa_from_aoa(theta, DEFAULT_AOA_COEFF), &p).unwrap();
            prop_assert!((back - theta).abs() < 1e-6);
        }

        #[test]
        fn rigid_motion_preserves_error(
            r in 50.0f64..400.0, theta in -0.78f64..0.78,
            px in -300.0f64..300.0, py in -300.0f64..300.0, yaw in -PI..PI,
            tx in -500.0f64..500.0, ty in -500.0f64..500.0, rot in -PI..PI,
            gx in -500.0f64..500.0, gy in -500.0f64..500.0,
        ) {
            let zero = Pose::default();
            let (x, y) = to_world_frame(r, theta, &Pose::new(px, py, yaw), &zero);
            let err = (x - gx).hypot(y - gy);
            let motion = Pose::new(tx, ty, rot);
            let moved_pose = motion.compose(&Pose::new(px, py, yaw));
            let moved_truth = motion.compose(&Pose::new(gx, gy, 0.0));
            let (mx, my) = to_world_frame(r, theta, &moved_pose, &zero);
            let moved_err = (mx - moved_truth.x).hypot(my - moved_truth.y);
            prop_assert!((err - moved_err).abs() < 1e-8);
        }
    }
}
