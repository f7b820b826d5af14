//! Frame processing and map building.
//!
//! Frames are independent up to localisation and are processed with the
//! configured [`Execution`] mode. Accumulation and clustering then run
//! sequentially in timestamp order.

use crate::capture::{Channel, CirCapture, Pose, RadioConfig, DEFAULT_NOISE_SAMPLES};
use crate::cir::{magnitude, minmax_normalize, phase, split_noise_floor};
use crate::clustering::{ClusterParams, MapAccumulator, MapSnapshot};
use crate::exec::Execution;
use crate::filtering::{score_peaks, select_target_peak, table3_preset, FilterParams, Material, ScoredPeak};
use crate::geometry::{aoa_from_pdoa, range_from_rx, to_world_frame, total_path_length, DetectedPoint, GeometryParams};
use crate::peaks::detect_peaks;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("parameter file: {0}")]
    Parse(String),
    #[error("invalid parameters: {0}")]
    Invalid(String),
}

/// Partial filter thresholds; unset fields keep the preset value.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterOverrides {
    pub width_min: Option<f64>,
    pub prominence_min: Option<f64>,
    pub snr_min: Option<f64>,
    pub k: Option<f64>,
    pub pdoa_gate: Option<f64>,
}

impl FilterOverrides {
    pub fn apply(&self, mut p: FilterParams) -> FilterParams {
        p.width_min = self.width_min.unwrap_or(p.width_min);
        p.prominence_min = self.prominence_min.unwrap_or(p.prominence_min);
        p.snr_min = self.snr_min.unwrap_or(p.snr_min);
        p.k = self.k.unwrap_or(p.k);
        p.pdoa_gate = self.pdoa_gate.unwrap_or(p.pdoa_gate);
        p
    }

    fn merge(&mut self, other: &FilterOverrides) {
        self.width_min = other.width_min.or(self.width_min);
        self.prominence_min = other.prominence_min.or(self.prominence_min);
        self.snr_min = other.snr_min.or(self.snr_min);
        self.k = other.k.or(self.k);
        self.pdoa_gate = other.pdoa_gate.or(self.pdoa_gate);
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryOverrides {
    pub d_tx_rx: Option<f64>,
    pub aoa_coeff: Option<f64>,
    pub bias_cm: Option<f64>,
    pub bias_aoa_rad: Option<f64>,
    pub c_cm_per_ns: Option<f64>,
    pub sample_interval_ns: Option<f64>,
    pub baseline_in_delay: Option<bool>,
}

impl GeometryOverrides {
    pub fn apply(&self, mut g: GeometryParams) -> GeometryParams {
        g.d_tx_rx = self.d_tx_rx.unwrap_or(g.d_tx_rx);
        g.aoa_coeff = self.aoa_coeff.unwrap_or(g.aoa_coeff);
        g.bias_cm = self.bias_cm.unwrap_or(g.bias_cm);
        g.bias_aoa_rad = self.bias_aoa_rad.unwrap_or(g.bias_aoa_rad);
        g.c_cm_per_ns = self.c_cm_per_ns.unwrap_or(g.c_cm_per_ns);
        g.sample_interval_ns = self.sample_interval_ns.unwrap_or(g.sample_interval_ns);
        g.baseline_in_delay = self.baseline_in_delay.unwrap_or(g.baseline_in_delay);
        g
    }

    fn merge(&mut self, other: &GeometryOverrides) {
        self.d_tx_rx = other.d_tx_rx.or(self.d_tx_rx);
        self.aoa_coeff = other.aoa_coeff.or(self.aoa_coeff);
        self.bias_cm = other.bias_cm.or(self.bias_cm);
        self.bias_aoa_rad = other.bias_aoa_rad.or(self.bias_aoa_rad);
        self.c_cm_per_ns = other.c_cm_per_ns.or(self.c_cm_per_ns);
        self.sample_interval_ns = other.sample_interval_ns.or(self.sample_interval_ns);
        self.baseline_in_delay = other.baseline_in_delay.or(self.baseline_in_delay);
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterOverrides {
    pub eps: Option<f64>,
    pub min_samples: Option<usize>,
    pub min_peaks: Option<usize>,
}

/// Contents of a `--params` TOML file. Every key is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsFile {
    pub channel: Option<u8>,
    pub material: Option<Material>,
    pub refine: Option<bool>,
    pub all_survivors: Option<bool>,
    pub noise_samples: Option<usize>,
    #[serde(default)]
    pub filter: FilterOverrides,
    #[serde(default)]
    pub geometry: GeometryOverrides,
    #[serde(default)]
    pub cluster: ClusterOverrides,
    /// Receiver poses in the robot body frame, keyed by receiver id.
    #[serde(default)]
    pub mounts: BTreeMap<String, Pose>,
}

impl ParamsFile {
    pub fn from_toml_str(s: &str) -> Result<Self, ConfigError> {
        toml::from_str(s).map_err(|e| ConfigError::Parse(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineConfig {
    /// Process only this channel; `None` processes every capture with its
    /// own channel's settings.
    pub channel: Option<Channel>,
    pub material: Material,
    pub refine: bool,
    /// Localise every filtered survivor instead of only the strongest.
    pub all_survivors: bool,
    pub noise_samples: usize,
    pub filter: FilterOverrides,
    pub geometry: GeometryOverrides,
    pub cluster: ClusterParams,
    pub mounts: BTreeMap<String, Pose>,
    #[serde(skip)]
    pub exec: Execution,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            channel: None,
            material: Material::Overall,
            refine: true,
            all_survivors: false,
            noise_samples: DEFAULT_NOISE_SAMPLES,
            filter: FilterOverrides::default(),
            geometry: GeometryOverrides::default(),
            cluster: ClusterParams::default(),
            mounts: BTreeMap::new(),
            exec: Execution::default(),
        }
    }
}

impl PipelineConfig {
    /// Layers a parameter file over the current settings.
    pub fn apply_params(&mut self, p: &ParamsFile) -> Result<(), ConfigError> {
        if let Some(ch) = p.channel {
            self.channel = Some(Channel::try_from(ch).map_err(|e| ConfigError::Invalid(e.to_string()))?);
        }
        self.material = p.material.unwrap_or(self.material);
        self.refine = p.refine.unwrap_or(self.refine);
        self.all_survivors = p.all_survivors.unwrap_or(self.all_survivors);
        self.noise_samples = p.noise_samples.unwrap_or(self.noise_samples);
        self.filter.merge(&p.filter);
        self.geometry.merge(&p.geometry);
        self.cluster.eps = p.cluster.eps.unwrap_or(self.cluster.eps);
        self.cluster.min_samples = p.cluster.min_samples.unwrap_or(self.cluster.min_samples);
        self.cluster.min_peaks = p.cluster.min_peaks.unwrap_or(self.cluster.min_peaks);
        for (k, v) in &p.mounts {
            self.mounts.insert(k.clone(), Pose::new(v.x, v.y, v.yaw));
        }
        Ok(())
    }

    pub fn filter_params(&self, channel: Channel) -> FilterParams {
        self.filter.apply(table3_preset(channel, self.material))
    }

    pub fn geometry_params(&self, channel: Channel) -> GeometryParams {
        self.geometry.apply(GeometryParams::for_channel(channel))
    }

    pub fn mount(&self, receiver_id: &str) -> Pose {
        self.mounts.get(receiver_id).copied().unwrap_or_default()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for ch in [Channel::Ch5, Channel::Ch9] {
            self.filter_params(ch).validate().map_err(ConfigError::Invalid)?;
            self.geometry_params(ch).validate().map_err(ConfigError::Invalid)?;
        }
        self.cluster.validate().map_err(ConfigError::Invalid)?;
        if self.noise_samples == 0 {
            return Err(ConfigError::Invalid("noise_samples must be >= 1".into()));
        }
        Ok(())
    }
}

/// One candidate peak with its filter outcome and, when localisable, its
/// world position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakRecord {
    pub peak: ScoredPeak,
    pub passes_properties: bool,
    pub passes_pdoa: bool,
    pub selected: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub world: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameResult {
    pub t_ms: i64,
    pub rx: String,
    pub ch: Channel,
    pub pose: Pose,
    /// First-path index after the noise floor is stripped.
    pub first_path_index: usize,
    pub noise_rms: f64,
    pub peaks: Vec<PeakRecord>,
    pub detections: Vec<DetectedPoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dropped: Option<String>,
}

fn localise(
    peak: &ScoredPeak,
    fp: usize,
    g: &GeometryParams,
    capture: &CirCapture,
    mount: &Pose,
) -> Result<DetectedPoint, crate::geometry::GeometryError> {
    let theta = aoa_from_pdoa(peak.pdoa, g)?;
    let d = total_path_length(peak.raw.refined_index, fp as f64, g)?;
    let range = range_from_rx(d, theta, g)?;
    let (x, y) = to_world_frame(range, theta, &capture.pose, mount);
    Ok(DetectedPoint {
        x,
        y,
        snr_score: peak.snr_score,
        timestamp_ms: capture.timestamp_ms,
        receiver_id: capture.receiver_id.clone(),
        aoa: theta,
        range_rx: range,
    })
}

/// Steps 1 and 2 plus localisation for one validated capture.
pub fn process_capture(capture: &CirCapture, config: &PipelineConfig) -> FrameResult {
    let fparams = config.filter_params(capture.channel);
    let gparams = config.geometry_params(capture.channel);
    let mount = config.mount(&capture.receiver_id);
    let mut out = FrameResult {
        t_ms: capture.timestamp_ms,
        rx: capture.receiver_id.clone(),
        ch: capture.channel,
        pose: capture.pose,
        first_path_index: 0,
        noise_rms: 0.0,
        peaks: Vec::new(),
        detections: Vec::new(),
        dropped: None,
    };

    let prepared = magnitude(&capture.preamble_cir)
        .and_then(|m| split_noise_floor(&m, capture.first_path_index, config.noise_samples))
        .and_then(|mag| {
            let norm = minmax_normalize(&mag.samples)?;
            let p1 = phase(&capture.sts1_cir)?.trimmed(config.noise_samples);
            let p2 = phase(&capture.sts2_cir)?.trimmed(config.noise_samples);
            Ok((mag, norm, p1, p2))
        });
    let (mag, norm, p1, p2) = match prepared {
        Ok(v) => v,
        Err(e) => {
            out.dropped = Some(e.to_string());
            return out;
        }
    };
    out.first_path_index = mag.first_path_index;
    out.noise_rms = mag.noise_rms;

    let raw = detect_peaks(&norm, &mag, config.refine);
    let scored = score_peaks(&raw, mag.first_path_index, mag.noise_rms, &p1.samples, &p2.samples, fparams.k);
    let survivors: Vec<ScoredPeak> = scored.iter().filter(|p| p.passes(&fparams)).copied().collect();
    let targets: Vec<ScoredPeak> = if config.all_survivors {
        survivors
    } else {
        select_target_peak(&survivors).into_iter().collect()
    };

    for p in &scored {
        let selected = targets.iter().any(|t| t.raw.index == p.raw.index);
        let located = localise(p, mag.first_path_index, &gparams, capture, &mount);
        if selected {
            match &located {
                Ok(pt) => out.detections.push(pt.clone()),
                Err(e) => {
                    out.dropped.get_or_insert_with(|| e.to_string());
                }
            }
        }
        out.peaks.push(PeakRecord {
            peak: *p,
            passes_properties: p.passes_properties(&fparams),
            passes_pdoa: p.passes_pdoa(&fparams),
            selected,
            world: located.ok().map(|pt| [pt.x, pt.y]),
        });
    }
    out
}

/// Deterministic run counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub frames_in: usize,
    pub frames_processed: usize,
    pub frames_skipped_channel: usize,
    pub frames_with_detection: usize,
    pub frames_dropped: usize,
    pub detections: usize,
    pub snapshots: usize,
    pub final_clusters: usize,
    pub final_noise: usize,
}

/// Wall-clock timings; these vary run to run and are kept apart from the
/// deterministic outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub execution: Execution,
    pub frames: usize,
    pub mean_frame_ms: f64,
    pub max_frame_ms: f64,
    pub frame_budget_ms: f64,
    pub within_budget: bool,
    pub clustering_runs: usize,
    pub mean_clustering_ms: f64,
    pub max_clustering_ms: f64,
    pub max_buffered_points: usize,
    pub total_ms: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub frames: Vec<FrameResult>,
    pub snapshots: Vec<MapSnapshot>,
    pub summary: RunSummary,
    pub latency: LatencyReport,
}

fn ms(d: std::time::Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

pub fn run_pipeline(captures: &[CirCapture], config: &PipelineConfig) -> RunOutput {
    let start = Instant::now();
    let selected: Vec<&CirCapture> = captures
        .iter()
        .filter(|c| config.channel.is_none_or(|ch| c.channel == ch))
        .collect();
    let timed: Vec<(FrameResult, f64)> = config.exec.map(&selected, |c| {
        let t0 = Instant::now();
        let r = process_capture(c, config);
        (r, ms(t0.elapsed()))
    });
    let frame_ms: Vec<f64> = timed.iter().map(|(_, t)| *t).collect();
    let frames: Vec<FrameResult> = timed.into_iter().map(|(r, _)| r).collect();

    let mut acc = MapAccumulator::new(config.cluster, config.exec);
    let mut snapshots = Vec::new();
    let mut cluster_ms = Vec::new();
    let mut max_buffered = 0;
    for f in &frames {
        for d in &f.detections {
            let t0 = Instant::now();
            if let Some(s) = acc.push(d.clone()) {
                cluster_ms.push(ms(t0.elapsed()));
                max_buffered = acc.buffered();
                snapshots.push(s);
            }
        }
    }
    let t0 = Instant::now();
    if let Some(s) = acc.finish() {
        cluster_ms.push(ms(t0.elapsed()));
        max_buffered = acc.buffered();
        snapshots.push(s);
    }

    let last = snapshots.last();
    let summary = RunSummary {
        frames_in: captures.len(),
        frames_processed: frames.len(),
        frames_skipped_channel: captures.len() - frames.len(),
        frames_with_detection: frames.iter().filter(|f| !f.detections.is_empty()).count(),
        frames_dropped: frames.iter().filter(|f| f.dropped.is_some()).count(),
        detections: frames.iter().map(|f| f.detections.len()).sum(),
        snapshots: snapshots.len(),
        final_clusters: last.map_or(0, |s| s.clusters.len()),
        final_noise: last.map_or(0, |s| s.noise_count),
    };
    let mean = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
    let budget = selected
        .first()
        .map_or(RadioConfig::for_channel(Channel::Ch9), |c| RadioConfig::for_channel(c.channel))
        .frame_interval_ms();
    let mean_frame_ms = mean(&frame_ms);
    let latency = LatencyReport {
        execution: config.exec,
        frames: frames.len(),
        mean_frame_ms,
        max_frame_ms: frame_ms.iter().copied().fold(0.0, f64::max),
        frame_budget_ms: budget,
        within_budget: mean_frame_ms < budget,
        clustering_runs: cluster_ms.len(),
        mean_clustering_ms: mean(&cluster_ms),
        max_clustering_ms: cluster_ms.iter().copied().fold(0.0, f64::max),
        max_buffered_points: max_buffered,
        total_ms: ms(start.elapsed()),
    };
    RunOutput {
        frames,
        snapshots,
        summary,
        latency,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{straight_approach_scene, synth_scene_stream};

    #[test]
    fn params_layering() {
        let p = ParamsFile::from_toml_str(
            r#"
            material = "metal"
            [filter]
            snr_min = 33.0
            [geometry]
            d_tx_rx = 25.0
            baseline_in_delay = false
            [cluster]
            min_peaks = 80
            [mounts.side]
            x = 0.0
            y = 10.0
            yaw = 1.5707963267948966
            "#,
        )
        .unwrap();
        let mut cfg = PipelineConfig::default();
        cfg.apply_params(&p).unwrap();
        let f = cfg.filter_params(Channel::Ch9);
        assert_eq!((f.width_min, f.prominence_min, f.snr_min), (1.0, 0.05, 33.0));
        let g = cfg.geometry_params(Channel::Ch5);
        assert_eq!((g.d_tx_rx, g.bias_cm, g.baseline_in_delay), (25.0, 15.0, false));
        assert_eq!(cfg.cluster.min_peaks, 80);
        assert_eq!(cfg.mount("side").y, 10.0);
        assert_eq!(cfg.mount("front"), Pose::default());
        assert!(ParamsFile::from_toml_str("bogus = 1").is_err());
    }

    #[test]
    fn noiseless_approach_is_recovered() {
        let scene = straight_approach_scene(Channel::Ch9, Material::Metal, 340.0, 100.0, 3);
        let caps = synth_scene_stream(&scene, Execution::Sequential);
        let out = run_pipeline(&caps, &PipelineConfig::default());
        assert_eq!(out.summary.frames_with_detection, caps.len());
        for f in &out.frames {
            let d = &f.detections[0];
            let err = (d.x - 340.0).hypot(d.y);
            assert!(err < 3.0, "t={} err={err}", f.t_ms);
        }
        assert!(out.snapshots.len() >= caps.len() / 50);
        let last = out.snapshots.last().unwrap();
        assert_eq!(last.clusters.len(), 1);
    }

    #[test]
    fn execution_modes_agree() {
        let mut scene = straight_approach_scene(Channel::Ch9, Material::Plywood, 300.0, 120.0, 9);
        scene.noise_sigma = 0.002;
        let caps = synth_scene_stream(&scene, Execution::Parallel);
        let mut cfg = PipelineConfig {
            exec: Execution::Sequential,
            ..PipelineConfig::default()
        };
        let a = run_pipeline(&caps, &cfg);
        cfg.exec = Execution::Parallel;
        let b = run_pipeline(&caps, &cfg);
        assert_eq!(a.frames, b.frames);
        assert_eq!(a.snapshots, b.snapshots);
        assert_eq!(a.summary, b.summary);
    }

    #[test]
    fn channel_filter_skips_other_captures() {
        let scene = straight_approach_scene(Channel::Ch5, Material::Metal, 300.0, 290.0, 1);
        let caps = synth_scene_stream(&scene, Execution::Sequential);
        let cfg = PipelineConfig {
            channel: Some(Channel::Ch9),
            ..PipelineConfig::default()
        };
        let out = run_pipeline(&caps, &cfg);
        assert_eq!(out.summary.frames_processed, 0);
        assert_eq!(out.summary.frames_skipped_channel, caps.len());
        assert!(out.snapshots.is_empty());
    }
}
