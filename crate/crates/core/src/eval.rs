//! Detection and distance-accuracy scoring against ground truth.
//!
//! Two protocols are supported. Per-frame (`step2`) compares every emitted
//! detection with the receiver ranges expected in that frame. Map (`step3`)
//! compares the clustered map against object coordinates.

use crate::clustering::MapSnapshot;
use crate::geometry::DetectedPoint;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt::Write as _;
use std::str::FromStr;
use thiserror::Error;

pub const DEFAULT_MARGIN_CM: f64 = 20.0;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("ground truth has no objects")]
    EmptyTruth,
    #[error("no errors to summarise")]
    EmptyErrors,
    #[error("margin must be positive (got {0})")]
    Margin(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthObject {
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub label: String,
}

/// Ranges from the receiver to every target expected in one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameTruth {
    pub t_ms: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rx: Option<String>,
    pub ranges: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GroundTruth {
    pub objects: Vec<TruthObject>,
    #[serde(default)]
    pub frames: Vec<FrameTruth>,
}

impl GroundTruth {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.objects.is_empty() {
            Err(EvalError::EmptyTruth)
        } else {
            Ok(())
        }
    }

    fn nearest_object_distance(&self, x: f64, y: f64) -> f64 {
        self.objects
            .iter()
            .map(|o| (o.x - x).hypot(o.y - y))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Precision, recall and F1; `None` where the denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionMetrics {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

pub fn detection_metrics(tp: usize, fp: usize, fn_: usize) -> DetectionMetrics {
    let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        (Some(_), Some(_)) => Some(0.0),
        _ => None,
    };
    DetectionMetrics {
        precision,
        recall,
        f1,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceStats {
    pub mae: f64,
    /// Population standard deviation of the absolute errors.
    pub sd: f64,
    pub p90: f64,
    pub p95: f64,
    /// Absolute errors, ascending.
    pub cdf: Vec<f64>,
}

/// Linear interpolation between closest ranks at `q/100 * (n - 1)`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn distance_stats(errors: &[f64]) -> Result<DistanceStats, EvalError> {
    if errors.is_empty() {
        return Err(EvalError::EmptyErrors);
    }
    let mut cdf: Vec<f64> = errors.iter().map(|e| e.abs()).collect();
    cdf.sort_by(f64::total_cmp);
    let n = cdf.len() as f64;
    let mae = cdf.iter().sum::<f64>() / n;
    let sd = (cdf.iter().map(|e| (e - mae).powi(2)).sum::<f64>() / n).sqrt();
    Ok(DistanceStats {
        mae,
        sd,
        p90: percentile(&cdf, 90.0),
        p95: percentile(&cdf, 95.0),
        cdf,
    })
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MatchResult {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub errors: Vec<f64>,
}

/// Matches world points against object coordinates. A point is a TP when
/// its nearest object is within `margin`; an object no point comes within
/// `margin` of is a FN.
pub fn match_points(
    points: &[(f64, f64)],
    truth: &GroundTruth,
    margin: f64,
) -> Result<MatchResult, EvalError> {
    truth.validate()?;
    check_margin(margin)?;
    let mut r = MatchResult::default();
    for &(x, y) in points {
        let d = truth.nearest_object_distance(x, y);
        if d <= margin {
            r.tp += 1;
        } else {
            r.fp += 1;
        }
        r.errors.push(d);
    }
    r.fn_ = truth
        .objects
        .iter()
        .filter(|o| !points.iter().any(|&(x, y)| (o.x - x).hypot(o.y - y) <= margin))
        .count();
    Ok(r)
}

fn check_margin(margin: f64) -> Result<(), EvalError> {
    if margin > 0.0 && margin.is_finite() {
        Ok(())
    } else {
        Err(EvalError::Margin(margin))
    }
}

/// Detections emitted for one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameDetections {
    pub t_ms: i64,
    pub rx: String,
    pub detections: Vec<DetectedPoint>,
}

/// Per-frame matching.
///
/// Frames listed in the truth compare each detection's receiver range with
/// the expected ranges; a frame expecting a target but yielding no TP adds
/// one FN. Frames missing from the truth fall back to world-distance
/// matching against the objects and contribute no FN.
pub fn match_frames(
    frames: &[FrameDetections],
    truth: &GroundTruth,
    margin: f64,
) -> Result<MatchResult, EvalError> {
    truth.validate()?;
    check_margin(margin)?;
    let mut expected: HashMap<(i64, Option<&str>), &FrameTruth> = HashMap::new();
    for f in &truth.frames {
        expected.insert((f.t_ms, f.rx.as_deref()), f);
    }
    let lookup = |t: i64, rx: &str| {
        expected
            .get(&(t, Some(rx)))
            .or_else(|| expected.get(&(t, None)))
            .copied()
    };

    let mut r = MatchResult::default();
    let mut hit: HashMap<(i64, Option<&str>), bool> = HashMap::new();
    for f in frames {
        let ft = lookup(f.t_ms, &f.rx);
        for d in &f.detections {
            let err = match ft {
                Some(ft) if !ft.ranges.is_empty() => ft
                    .ranges
                    .iter()
                    .map(|r| (d.range_rx - r).abs())
                    .fold(f64::INFINITY, f64::min),
                Some(_) => truth.nearest_object_distance(d.x, d.y),
                None => truth.nearest_object_distance(d.x, d.y),
            };
            let is_tp = err <= margin && ft.is_none_or(|ft| !ft.ranges.is_empty());
            if is_tp {
                r.tp += 1;
                if let Some(ft) = ft {
                    hit.insert((ft.t_ms, ft.rx.as_deref()), true);
                }
            } else {
                r.fp += 1;
            }
            r.errors.push(err);
        }
    }
    r.fn_ = truth
        .frames
        .iter()
        .filter(|f| !f.ranges.is_empty() && !hit.contains_key(&(f.t_ms, f.rx.as_deref())))
        .count();
    Ok(r)
}

/// Map matching on one snapshot: member points are scored against object
/// coordinates, and an object with no cluster centroid within `margin` is
/// a FN. The evaluation window is the whole run.
pub fn match_snapshot(
    snapshot: &MapSnapshot,
    truth: &GroundTruth,
    margin: f64,
) -> Result<MatchResult, EvalError> {
    let points: Vec<(f64, f64)> = snapshot
        .clusters
        .iter()
        .flat_map(|c| c.points.iter().map(|p| (p.0, p.1)))
        .collect();
    let mut r = match_points(&points, truth, margin)?;
    let centroids: Vec<(f64, f64)> = snapshot
        .clusters
        .iter()
        .map(|c| (c.centroid[0], c.centroid[1]))
        .collect();
    r.fn_ = truth
        .objects
        .iter()
        .filter(|o| !centroids.iter().any(|&(x, y)| (o.x - x).hypot(o.y - y) <= margin))
        .count();
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalMode {
    Step2,
    Step3,
}

impl FromStr for EvalMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "step2" => Ok(EvalMode::Step2),
            "step3" => Ok(EvalMode::Step3),
            other => Err(format!("unknown mode `{other}` (expected step2 or step3)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: EvalMode,
    pub margin_cm: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub mae: Option<f64>,
    pub sd: Option<f64>,
    pub p90: Option<f64>,
    pub p95: Option<f64>,
    pub cdf: Vec<f64>,
    pub notes: Vec<String>,
}

impl EvalReport {
    pub fn new(mode: EvalMode, margin: f64, m: &MatchResult) -> Self {
        let dm = detection_metrics(m.tp, m.fp, m.fn_);
        let stats = distance_stats(&m.errors).ok();
        let mut notes = vec![
            "sd: population standard deviation of absolute errors".to_string(),
            "percentiles: linear interpolation at q/100*(n-1) on sorted absolute errors"
                .to_string(),
            "distance statistics cover every detection, matched or not".to_string(),
        ];
        notes.push(match mode {
            EvalMode::Step2 => "step2: detections scored by receiver-range error against per-frame truth; FN = frames expecting a target with no TP".into(),
            EvalMode::Step3 => "step3: cluster member points scored by distance to the nearest object; FN = objects without a cluster centroid within margin; window = whole run".into(),
        });
        Self {
            mode,
            margin_cm: margin,
            tp: m.tp,
            fp: m.fp,
            fn_: m.fn_,
            precision: dm.precision,
            recall: dm.recall,
            f1: dm.f1,
            mae: stats.as_ref().map(|s| s.mae),
            sd: stats.as_ref().map(|s| s.sd),
            p90: stats.as_ref().map(|s| s.p90),
            p95: stats.as_ref().map(|s| s.p95),
            cdf: stats.map(|s| s.cdf).unwrap_or_default(),
            notes,
        }
    }

    /// One-row table in the precision/recall/F1/MAE/SD/P90/P95 layout.
    pub fn table(&self, label: &str, channel: &str) -> String {
        let pct = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{:.2}", v * 100.0));
        let cm = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.2}"));
        let mut s = String::new();
        let _ = writeln!(
            s,
            "| Material | Channel | Precision (%) | Recall (%) | F1 (%) | MAE (cm) | SD (cm) | P90 (cm) | P95 (cm) |"
        );
        let _ = writeln!(s, "|---|---|---|---|---|---|---|---|---|");
        let _ = writeln!(
            s,
            "| {label} | {channel} | {} | {} | {} | {} | {} | {} | {} |",
            pct(self.precision),
            pct(self.recall),
            pct(self.f1),
            cm(self.mae),
            cm(self.sd),
            cm(self.p90),
            cm(self.p95)
        );
        s
    }

    /// `error_cm,fraction` rows of the empirical CDF.
    pub fn cdf_csv(&self) -> String {
        let n = self.cdf.len();
        let mut s = String::from("error_cm,fraction\n");
        for (i, e) in self.cdf.iter().enumerate() {
            let _ = writeln!(s, "{e},{}", (i + 1) as f64 / n as f64);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::{SnapshotCluster, SnapshotPoint};
    use proptest::prelude::*;

    fn truth_at_origin() -> GroundTruth {
        GroundTruth {
            objects: vec![TruthObject {
                x: 0.0,
                y: 0.0,
                label: "plate".into(),
            }],
            frames: Vec::new(),
        }
    }

    fn det(t: i64, range: f64) -> DetectedPoint {
        DetectedPoint {
            x: range,
            y: 0.0,
            snr_score: 30.0,
            timestamp_ms: t,
            receiver_id: "front".into(),
            aoa: 0.0,
            range_rx: range,
        }
    }

    #[test]
    fn margin_examples() {
        let t = truth_at_origin();
        let r = match_points(&[(19.0, 0.0)], &t, 20.0).unwrap();
        assert_eq!((r.tp, r.fp, r.fn_), (1, 0, 0));
        let r = match_points(&[(21.0, 0.0)], &t, 20.0).unwrap();
        assert_eq!((r.tp, r.fp, r.fn_), (0, 1, 1));
        assert_eq!(
            match_points(&[], &GroundTruth::default(), 20.0),
            Err(EvalError::EmptyTruth)
        );
    }

    #[test]
    fn metric_examples() {
        assert_eq!(detection_metrics(3, 1, 0).precision, Some(0.75));
        let m = detection_metrics(5, 0, 0);
        assert_eq!((m.precision, m.recall, m.f1), (Some(1.0), Some(1.0), Some(1.0)));
        let m = detection_metrics(0, 0, 4);
        assert_eq!(m.precision, None);
        assert_eq!(m.f1, None);
        assert_eq!(detection_metrics(0, 2, 2).f1, Some(0.0));
    }

    #[test]
    fn stats_examples() {
        let s = distance_stats(&[10.0, 10.0, 10.0]).unwrap();
        assert_eq!((s.mae, s.sd), (10.0, 0.0));
        assert_eq!(distance_stats(&[0.0, 20.0]).unwrap().mae, 10.0);
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        let s = distance_stats(&v).unwrap();
        assert!((s.p90 - 90.1).abs() < 1e-9);
        assert!((s.p95 - 95.05).abs() < 1e-9);
        assert_eq!(distance_stats(&[]), Err(EvalError::EmptyErrors));
        assert_eq!(distance_stats(&[-3.0]).unwrap().cdf, vec![3.0]);
    }

    #[test]
    fn frame_matching() {
        let truth = GroundTruth {
            objects: vec![TruthObject {
                x: 300.0,
                y: 0.0,
                label: String::new(),
            }],
            frames: vec![
                FrameTruth { t_ms: 0, rx: Some("front".into()), ranges: vec![300.0] },
                FrameTruth { t_ms: 10, rx: Some("front".into()), ranges: vec![290.0] },
                FrameTruth { t_ms: 20, rx: None, ranges: vec![280.0] },
                FrameTruth { t_ms: 30, rx: Some("front".into()), ranges: vec![] },
            ],
        };
        let frames = vec![
            FrameDetections { t_ms: 0, rx: "front".into(), detections: vec![det(0, 305.0)] },
            FrameDetections { t_ms: 10, rx: "front".into(), detections: vec![det(10, 250.0)] },
            FrameDetections { t_ms: 20, rx: "front".into(), detections: vec![det(20, 281.0)] },
            FrameDetections { t_ms: 30, rx: "front".into(), detections: vec![det(30, 300.0)] },
        ];
        let r = match_frames(&frames, &truth, 20.0).unwrap();
        assert_eq!((r.tp, r.fp, r.fn_), (2, 2, 1));
        assert_eq!(r.errors, vec![5.0, 40.0, 1.0, 0.0]);
    }

    #[test]
    fn snapshot_matching() {
        let snap = MapSnapshot {
            t_ms: 0,
            clusters: vec![SnapshotCluster {
                id: 0,
                centroid: [5.0, 0.0],
                n: 2,
                mean_snr: 10.0,
                points: vec![SnapshotPoint(0.0, 0.0, 10.0), SnapshotPoint(30.0, 0.0, 10.0)],
            }],
            noise_count: 0,
        };
        let mut t = truth_at_origin();
        t.objects.push(TruthObject { x: 500.0, y: 0.0, label: String::new() });
        let r = match_snapshot(&snap, &t, 20.0).unwrap();
        assert_eq!((r.tp, r.fp, r.fn_), (1, 1, 1));
    }

    #[test]
    fn report_outputs() {
        let m = MatchResult { tp: 3, fp: 1, fn_: 0, errors: vec![1.0, 2.0, 3.0, 30.0] };
        let rep = EvalReport::new(EvalMode::Step3, 20.0, &m);
        assert_eq!(rep.precision, Some(0.75));
        let json = serde_json::to_value(&rep).unwrap();
        assert_eq!(json["fn"], 0);
        assert_eq!(json["mode"], "step3");
        let table = rep.table("metal", "9");
        assert!(table.contains("| metal | 9 | 75.00 | 100.00 | 85.71 | 9.00 |"));
        assert!(rep.cdf_csv().ends_with("30,1\n"));
    }

    proptest! {
        #[test]
        fn metrics_consistent(tp in 0usize..500, fp in 0usize..500, fn_ in 0usize..500) {
            let m = detection_metrics(tp, fp, fn_);
            if let (Some(p), Some(r), Some(f)) = (m.precision, m.recall, m.f1) {
                prop_assert!((0.0..=1.0).contains(&p) && (0.0..=1.0).contains(&r));
                if p + r > 0.0 {
                    prop_assert!((f - 2.0 * p * r / (p + r)).abs() < 1e-12);
                    prop_assert!(f <= 2.0 * p.min(r) + 1e-12);
                }
            }
            // an extra exact TP never hurts either side
            let m2 = detection_metrics(tp + 1, fp, fn_);
            if let (Some(a), Some(b)) = (m.precision, m2.precision) { prop_assert!(b >= a); }
            if let (Some(a), Some(b)) = (m.recall, m2.recall) { prop_assert!(b >= a); }
        }

        #[test]
        fn stats_scale(errs in prop::collection::vec(-100.0f64..100.0, 1..200), c in 0.01f64..100.0) {
            let a = distance_stats(&errs).unwrap();
            let scaled: Vec<f64> = errs.iter().map(|e| e * c).collect();
            let b = distance_stats(&scaled).unwrap();
            let tol = |x: f64| 1e-9 * x.abs().max(1.0);
            prop_assert!((b.mae - c * a.mae).abs() < tol(b.mae));
            prop_assert!((b.sd - c * a.sd).abs() < tol(b.mae));
            prop_assert!((b.p90 - c * a.p90).abs() < tol(b.p90));
            prop_assert!((b.p95 - c * a.p95).abs() < tol(b.p95));
            prop_assert!(a.p90 <= a.p95);
            prop_assert!(a.cdf.windows(2).all(|w| w[0] <= w[1]));
        }

        #[test]
        fn matching_rigid_invariant(
            pts in prop::collection::vec((-300.0f64..300.0, -300.0f64..300.0), 0..30),
            objs in prop::collection::vec((-300.0f64..300.0, -300.0f64..300.0), 1..4),
            rot in -3.1f64..3.1, tx in -100.0f64..100.0, ty in -100.0f64..100.0,
        ) {
            let (s, c) = rot.sin_cos();
            let m = |(x, y): (f64, f64)| (c * x - s * y + tx, s * x + c * y + ty);
            let truth = |f: &dyn Fn((f64, f64)) -> (f64, f64)| GroundTruth {
                objects: objs.iter().map(|&o| { let (x, y) = f(o); TruthObject { x, y, label: String::new() } }).collect(),
                frames: Vec::new(),
            };
            let a = match_points(&pts, &truth(&|p| p), 20.0).unwrap();
            let moved: Vec<_> = pts.iter().map(|&p| m(p)).collect();
            let b = match_points(&moved, &truth(&m), 20.0).unwrap();
            // skip instances sitting on the margin where rounding could flip a decision
            prop_assume!(a.errors.iter().all(|e| (e - 20.0).abs() > 1e-6));
            prop_assert_eq!((a.tp, a.fp), (b.tp, b.fp));
            for (x, y) in a.errors.iter().zip(&b.errors) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }
}
