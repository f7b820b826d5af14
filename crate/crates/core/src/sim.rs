//! Synthetic CIR captures from declared scenes.
//!
//! Each obstacle is a point reflector. Its echo is a raised-cosine pulse at
//! the bistatic excess delay `(d_tx_p + d_rx_p - d_tx_rx) / c` after the
//! first path, scaled by `reflect_amp / (d_tx_p * d_rx_p)`. The STS CIRs
//! carry the echo with a phase difference `pi * sin(aoa_coeff * theta)`.
//! Amplitudes are qualitative; they only need to order materials and fall
//! with distance.

use crate::capture::{normalize_angle, Channel, CirCapture, ComplexSample, Pose, RadioConfig};
use crate::eval::{FrameTruth, GroundTruth, TruthObject};
use crate::exec::Execution;
use crate::filtering::{Material, PDOA_GATE_RAD};
use crate::geometry::{pdoa_from_aoa, GeometryParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("scene schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("invalid scene: {0}")]
    Invalid(String),
}

/// Reflection amplitude factor used when an obstacle names a material.
pub fn material_reflect_amp(material: Material) -> f64 {
    match material {
        Material::Metal => 2.0e4,
        Material::Concrete => 1.0e4,
        Material::Plywood => 0.5e4,
        Material::Overall => 1.0e4,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneObstacle {
    pub x: f64,
    pub y: f64,
    /// Explicit amplitude factor; overrides `material`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reflect_amp: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub material: Option<Material>,
    #[serde(default)]
    pub label: String,
}

impl SceneObstacle {
    pub fn amplitude_factor(&self) -> f64 {
        self.reflect_amp
            .or(self.material.map(material_reflect_amp))
            .unwrap_or(material_reflect_amp(Material::Overall))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimedPose {
    pub t_ms: i64,
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub yaw: f64,
}

/// Constant-speed drive along the start heading, one pose per frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StraightApproach {
    pub start: Pose,
    pub distance_cm: f64,
    pub speed_cm_per_s: f64,
    #[serde(default)]
    pub t0_ms: i64,
}

fn default_receiver() -> String {
    "front".into()
}
fn default_n_samples() -> usize {
    50
}
fn default_first_path_index() -> usize {
    8
}
fn default_first_path_amp() -> f64 {
    1.0
}
fn default_pulse_width() -> f64 {
    2.0
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    pub seed: u64,
    pub channel: Channel,
    #[serde(default = "default_receiver")]
    pub receiver_id: String,
    pub obstacles: Vec<SceneObstacle>,
    #[serde(default)]
    pub trajectory: Vec<TimedPose>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub approach: Option<StraightApproach>,
    /// AWGN standard deviation per I and Q component.
    #[serde(default)]
    pub noise_sigma: f64,
    /// Half-support of the raised-cosine pulse, ns.
    #[serde(default = "default_pulse_width")]
    pub pulse_width_ns: f64,
    #[serde(default = "default_n_samples")]
    pub n_samples: usize,
    /// Raw index of the direct path.
    #[serde(default = "default_first_path_index")]
    pub first_path_index: usize,
    #[serde(default = "default_first_path_amp")]
    pub first_path_amp: f64,
    /// Receiver pose in the robot body frame.
    #[serde(default)]
    pub mount: Pose,
    /// Add the channel's calibration offsets to the synthetic delay and
    /// angle, so that a calibrated pipeline recovers the true geometry.
    #[serde(default = "default_true")]
    pub emulate_bias: bool,
    /// Obstacles closer than this to the receiver are not rendered.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blind_zone_cm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radio: Option<RadioConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<GeometryParams>,
}

impl Scene {
    /// Parses and validates a JSON scene; schema errors carry the field path.
    pub fn from_json_str(s: &str) -> Result<Self, SimError> {
        let de = &mut serde_json::Deserializer::from_str(s);
        let scene: Scene = serde_path_to_error::deserialize(de).map_err(|e| SimError::Schema {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn radio(&self) -> RadioConfig {
        self.radio
            .unwrap_or_else(|| RadioConfig::for_channel(self.channel))
    }

    pub fn geometry(&self) -> GeometryParams {
        self.geometry
            .unwrap_or_else(|| GeometryParams::for_channel(self.channel))
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Invalid(m));
        for (i, o) in self.obstacles.iter().enumerate() {
            let a = o.amplitude_factor();
            if !(a > 0.0 && a.is_finite()) || !(o.x.is_finite() && o.y.is_finite()) {
                return bad(format!("obstacle {i}: reflect_amp must be > 0 and coordinates finite"));
            }
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!("noise_sigma must be >= 0 (got {})", self.noise_sigma));
        }
        if !(self.pulse_width_ns > 0.0) {
            return bad("pulse_width_ns must be > 0".into());
        }
        if self.n_samples < crate::capture::MIN_CIR_LEN {
            return bad(format!("n_samples must be >= {}", crate::capture::MIN_CIR_LEN));
        }
        if self.first_path_index >= self.n_samples - crate::capture::DEFAULT_NOISE_SAMPLES {
            return bad("first_path_index out of range".into());
        }
        if !self.trajectory.is_empty() && self.approach.is_some() {
            return bad("give either `trajectory` or `approach`, not both".into());
        }
        if let Some(a) = &self.approach {
            if !(a.speed_cm_per_s > 0.0 && a.distance_cm >= 0.0) {
                return bad("approach needs speed > 0 and distance >= 0".into());
            }
        }
        if self.trajectory.windows(2).any(|w| w[1].t_ms <= w[0].t_ms) {
            return bad("trajectory timestamps must be strictly increasing".into());
        }
        self.radio()
            .validate()
            .map_err(|e| SimError::Invalid(e.to_string()))?;
        self.geometry().validate().map_err(SimError::Invalid)?;
        Ok(())
    }

    /// Robot poses with timestamps, expanded from `approach` if given.
    pub fn poses(&self) -> Vec<(i64, Pose)> {
        if let Some(a) = &self.approach {
            let rate = self.radio().update_rate_hz;
            let step = a.speed_cm_per_s / rate;
            let n = (a.distance_cm / step + 1e-9).floor() as usize + 1;
            let (s, c) = a.start.yaw.sin_cos();
            return (0..n)
                .map(|k| {
                    let t = a.t0_ms + (k as f64 * 1000.0 / rate).round() as i64;
                    let travelled = k as f64 * step;
                    (
                        t,
                        Pose::new(a.start.x + c * travelled, a.start.y + s * travelled, a.start.yaw),
                    )
                })
                .collect();
        }
        self.trajectory
            .iter()
            .map(|p| (p.t_ms, Pose::new(p.x, p.y, p.yaw)))
            .collect()
    }
}

/// Where an obstacle appears from one receiver pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Echo {
    /// Boresight angle at the receiver, rad.
    pub theta: f64,
    pub d_tx_p: f64,
    pub d_rx_p: f64,
    /// Raw-index position of the echo centre.
    pub position: f64,
    pub amplitude: f64,
    pub visible: bool,
    pub in_window: bool,
}

/// Forward geometry from robot pose to one obstacle.
pub fn echo(scene: &Scene, pose: &Pose, obstacle: &SceneObstacle) -> Echo {
    let g = scene.geometry();
    let rx = pose.compose(&scene.mount);
    let tx = rx.compose(&Pose::new(0.0, -g.d_tx_rx, 0.0));
    let (dx, dy) = (obstacle.x - rx.x, obstacle.y - rx.y);
    let (s, c) = rx.yaw.sin_cos();
    let (lx, ly) = (c * dx + s * dy, -s * dx + c * dy);
    let theta = ly.atan2(lx);
    let d_rx_p = dx.hypot(dy);
    let d_tx_p = (obstacle.x - tx.x).hypot(obstacle.y - tx.y);
    let bias_cm = if scene.emulate_bias { g.bias_cm } else { 0.0 };
    let excess = d_tx_p + d_rx_p - g.d_tx_rx + bias_cm;
    let position = scene.first_path_index as f64 + excess / g.cm_per_sample();
    let blind = scene.blind_zone_cm.is_some_and(|b| d_rx_p < b);
    Echo {
        theta,
        d_tx_p,
        d_rx_p,
        position,
        amplitude: obstacle.amplitude_factor() / (d_tx_p * d_rx_p),
        visible: theta.abs() <= PI / 2.0 && !blind && d_rx_p > 0.0,
        in_window: position <= (scene.n_samples - 2) as f64,
    }
}

/// Encoded phase difference for an echo arriving at `theta`.
fn encoded_pdoa(scene: &Scene, theta: f64) -> f64 {
    let g = scene.geometry();
    let bias = if scene.emulate_bias { g.bias_aoa_rad } else { 0.0 };
    pdoa_from_aoa(theta + bias, g.aoa_coeff)
}

/// Raised-cosine pulse `0.5 (1 + cos(pi t / w))` on `|t| < w`.
pub fn pulse(t_ns: f64, width_ns: f64) -> f64 {
    if t_ns.abs() < width_ns {
        0.5 * (1.0 + (PI * t_ns / width_ns).cos())
    } else {
        0.0
    }
}

struct Path {
    position: f64,
    amplitude: f64,
    phase: f64,
    pdoa: f64,
}

/// One capture at `pose`; `frame` selects the noise stream.
pub fn synth_capture(scene: &Scene, frame: u64, t_ms: i64, pose: &Pose) -> CirCapture {
    let g = scene.geometry();
    let radio = scene.radio();
    let carrier = |position: f64| {
        let tau_ns = (position - scene.first_path_index as f64) * g.sample_interval_ns;
        normalize_angle(-2.0 * PI * radio.center_frequency_hz * 1e-9 * tau_ns)
    };
    let mut paths = vec![Path {
        position: scene.first_path_index as f64,
        amplitude: scene.first_path_amp,
        phase: 0.0,
        // direct path arrives from the transmitter side
        pdoa: pdoa_from_aoa(-PI / 2.0, g.aoa_coeff),
    }];
    for o in &scene.obstacles {
        let e = echo(scene, pose, o);
        if e.visible && e.in_window {
            paths.push(Path {
                position: e.position,
                amplitude: e.amplitude,
                phase: carrier(e.position),
                pdoa: encoded_pdoa(scene, e.theta),
            });
        }
    }

    let n = scene.n_samples;
    let width_samples = scene.pulse_width_ns / g.sample_interval_ns;
    let mut pre = vec![ComplexSample::default(); n];
    let mut sts2 = vec![ComplexSample::default(); n];
    for p in &paths {
        for (k, (a, b)) in pre.iter_mut().zip(sts2.iter_mut()).enumerate() {
            let v = p.amplitude * pulse(k as f64 - p.position, width_samples);
            if v != 0.0 {
                *a = *a + ComplexSample::from_polar(v, p.phase);
                *b = *b + ComplexSample::from_polar(v, p.phase + p.pdoa);
            }
        }
    }
    let mut sts1 = pre.clone();

    if scene.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(scene.seed);
        rng.set_stream(frame);
        let normal = Normal::new(0.0, scene.noise_sigma).expect("validated sigma");
        for cir in [&mut pre, &mut sts1, &mut sts2] {
            for s in cir.iter_mut() {
                s.i += normal.sample(&mut rng);
                s.q += normal.sample(&mut rng);
            }
        }
    }

    CirCapture {
        timestamp_ms: t_ms,
        channel: scene.channel,
        receiver_id: scene.receiver_id.clone(),
        preamble_cir: pre,
        sts1_cir: sts1,
        sts2_cir: sts2,
        first_path_index: scene.first_path_index,
        pose: *pose,
    }
}

/// One capture per trajectory pose, in order.
pub fn synth_scene_stream(scene: &Scene, exec: Execution) -> Vec<CirCapture> {
    let poses = scene.poses();
    exec.map_range(poses.len(), |k| {
        let (t, pose) = poses[k];
        synth_capture(scene, k as u64, t, &pose)
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutOfRange {
    pub label: String,
    pub obstacle_index: usize,
    /// Frames in which the obstacle is visible but past the CIR window.
    pub frames: usize,
}

/// Obstacles whose echo falls beyond the CIR window in at least one frame.
pub fn out_of_range(scene: &Scene) -> Vec<OutOfRange> {
    let poses = scene.poses();
    scene
        .obstacles
        .iter()
        .enumerate()
        .filter_map(|(i, o)| {
            let frames = poses
                .iter()
                .filter(|(_, p)| {
                    let e = echo(scene, p, o);
                    e.visible && !e.in_window
                })
                .count();
            (frames > 0).then(|| OutOfRange {
                label: o.label.clone(),
                obstacle_index: i,
                frames,
            })
        })
        .collect()
}

/// Obstacle positions plus, per frame, the receiver ranges of every echo
/// that a perfect pipeline would report (rendered and inside the PDoA gate).
pub fn ground_truth(scene: &Scene) -> GroundTruth {
    let objects = scene
        .obstacles
        .iter()
        .map(|o| TruthObject {
            x: o.x,
            y: o.y,
            label: o.label.clone(),
        })
        .collect();
    let frames = scene
        .poses()
        .iter()
        .map(|(t, pose)| {
            let ranges = scene
                .obstacles
                .iter()
                .map(|o| (o, echo(scene, pose, o)))
                .filter(|(_, e)| {
                    e.visible && e.in_window && encoded_pdoa(scene, e.theta).abs() <= PDOA_GATE_RAD
                })
                .map(|(_, e)| e.d_rx_p)
                .collect();
            FrameTruth {
                t_ms: *t,
                rx: Some(scene.receiver_id.clone()),
                ranges,
            }
        })
        .collect();
    GroundTruth { objects, frames }
}

/// Single obstacle dead ahead, approached in a straight line from
/// `start_distance_cm` down to `stop_distance_cm`.
pub fn straight_approach_scene(
    channel: Channel,
    material: Material,
    start_distance_cm: f64,
    stop_distance_cm: f64,
    seed: u64,
) -> Scene {
    Scene {
        seed,
        channel,
        receiver_id: default_receiver(),
        obstacles: vec![SceneObstacle {
            x: start_distance_cm,
            y: 0.0,
            reflect_amp: None,
            material: Some(material),
            label: material.to_string().to_lowercase(),
        }],
        trajectory: Vec::new(),
        approach: Some(StraightApproach {
            start: Pose::default(),
            distance_cm: start_distance_cm - stop_distance_cm,
            speed_cm_per_s: 30.0,
            t0_ms: 0,
        }),
        noise_sigma: 0.0,
        pulse_width_ns: default_pulse_width(),
        n_samples: default_n_samples(),
        first_path_index: default_first_path_index(),
        first_path_amp: default_first_path_amp(),
        mount: Pose::default(),
        emulate_bias: true,
        blind_zone_cm: None,
        radio: None,
        geometry: None,
    }
}

/// Smallest echo amplitude over all rendered frames, for setting the noise
/// level relative to the weakest target.
pub fn weakest_echo_amplitude(scene: &Scene) -> Option<f64> {
    scene
        .poses()
        .iter()
        .flat_map(|(_, p)| scene.obstacles.iter().map(move |o| echo(scene, p, o)))
        .filter(|e| e.visible && e.in_window)
        .map(|e| e.amplitude)
        .reduce(f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cir::magnitude;
    use crate::filtering::pdoa;
    use crate::geometry::aoa_from_pdoa;

    fn empty_scene() -> Scene {
        let mut s = straight_approach_scene(Channel::Ch9, Material::Metal, 300.0, 300.0, 1);
        s.obstacles.clear();
        s
    }

    fn argmax(v: &[f64]) -> usize {
        (0..v.len()).fold(0, |b, i| if v[i] > v[b] { i } else { b })
    }

    #[test]
    fn empty_scene_has_only_first_path() {
        let s = empty_scene();
        let c = synth_capture(&s, 0, 0, &Pose::default());
        let m = magnitude(&c.preamble_cir).unwrap();
        assert_eq!(m[8], 1.0);
        assert_eq!(m[7], 0.5);
        assert_eq!(m[9], 0.5);
        let nonzero: Vec<_> = (0..m.len()).filter(|&k| m[k] > 0.0).collect();
        assert_eq!(nonzero, vec![7, 8, 9]);
        assert_eq!(c.preamble_cir.len(), 50);
    }

    #[test]
    fn dead_ahead_echo() {
        let mut s = empty_scene();
        s.emulate_bias = false;
        let mut g = GeometryParams::uncalibrated();
        g.d_tx_rx = 0.0;
        s.geometry = Some(g);
        // monostatic: 10 samples of delay is a 2-way path of 10 * c cm
        let r = 5.0 * g.cm_per_sample();
        s.obstacles.push(SceneObstacle {
            x: r,
            y: 0.0,
            reflect_amp: Some(1e5),
            material: None,
            label: "plate".into(),
        });
        let c = synth_capture(&s, 0, 0, &Pose::default());
        let m = magnitude(&c.preamble_cir).unwrap();
        assert_eq!(argmax(&m[10..]) + 10, 18);
        let a = crate::cir::sample_phase(c.sts1_cir[18]);
        let b = crate::cir::sample_phase(c.sts2_cir[18]);
        assert!(pdoa(a, b).abs() < 1e-12);
    }

    #[test]
    fn forty_five_degrees_encodes_gate() {
        let mut s = empty_scene();
        s.emulate_bias = false;
        let theta = PI / 4.0;
        assert!((encoded_pdoa(&s, theta) - 2.1325).abs() < 1e-4);
        s.obstacles.push(SceneObstacle {
            x: 200.0 * theta.cos(),
            y: 200.0 * theta.sin(),
            reflect_amp: Some(1e5),
            material: None,
            label: String::new(),
        });
        let e = echo(&s, &Pose::default(), &s.obstacles[0]);
        assert!((e.theta - theta).abs() < 1e-12);
        let g = GeometryParams::uncalibrated();
        let back = aoa_from_pdoa(encoded_pdoa(&s, e.theta), &g).unwrap();
        assert!((back - theta).abs() < 1e-6);
    }

    #[test]
    fn amplitude_falls_with_distance() {
        let s = straight_approach_scene(Channel::Ch9, Material::Concrete, 400.0, 60.0, 1);
        let poses = s.poses();
        let amps: Vec<f64> = poses
            .iter()
            .map(|(_, p)| echo(&s, p, &s.obstacles[0]).amplitude)
            .collect();
        // the robot approaches, so amplitudes rise frame over frame
        assert!(amps.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn stream_length_and_determinism() {
        let mut s = straight_approach_scene(Channel::Ch9, Material::Metal, 340.0, 100.0, 42);
        s.noise_sigma = 0.01;
        let a = synth_scene_stream(&s, Execution::Parallel);
        let b = synth_scene_stream(&s, Execution::Sequential);
        assert_eq!(a.len(), s.poses().len());
        assert_eq!(a, b);
        assert!(a.windows(2).all(|w| w[1].timestamp_ms > w[0].timestamp_ms));
        s.seed = 43;
        assert_ne!(synth_scene_stream(&s, Execution::Sequential), a);
    }

    #[test]
    fn out_of_window_obstacle_reported() {
        let mut s = empty_scene();
        s.obstacles.push(SceneObstacle {
            x: 2000.0,
            y: 0.0,
            reflect_amp: None,
            material: Some(Material::Metal),
            label: "far".into(),
        });
        let oor = out_of_range(&s);
        assert_eq!(oor.len(), 1);
        assert_eq!(oor[0].label, "far");
        let c = synth_capture(&s, 0, 0, &Pose::default());
        let m = magnitude(&c.preamble_cir).unwrap();
        assert!(m[11..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn schema_errors_name_the_field() {
        let err = Scene::from_json_str(r#"{"seed":1,"channel":9,"obstacles":[{"x":"a","y":0}]}"#)
            .unwrap_err();
        match err {
            SimError::Schema { path, .. } => assert_eq!(path, "obstacles[0].x"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(Scene::from_json_str(r#"{"seed":1,"channel":7,"obstacles":[]}"#).is_err());
    }

    #[test]
    fn approach_poses() {
        let s = straight_approach_scene(Channel::Ch9, Material::Metal, 340.0, 100.0, 1);
        let p = s.poses();
        assert_eq!(p[0].0, 0);
        assert_eq!(p[1].0, 10);
        assert_eq!(p[96].0, 1000);
        let last = p.last().unwrap().1;
        assert!((last.x - 240.0).abs() < 0.5);
    }
}
