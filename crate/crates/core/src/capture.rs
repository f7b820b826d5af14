//! Canonical radar capture records and their interchange formats.
//!
//! One [`CirCapture`] holds a single radar frame: the preamble CIR measured on
//! the first antenna plus the two STS CIRs (one per antenna) that carry the
//! phase information for angle estimation. All three arrays are sampled on
//! the same 1 ns fast-time grid and are index-aligned.
//!
//! Two on-disk formats are supported:
//!
//! * JSONL, one capture per line:
//!   `{"t_ms":int,"ch":5|9,"rx":"front","fp_idx":int,"pose":{"x":..,"y":..,"yaw":..},"pre":[[i,q],..],"sts1":[[i,q],..],"sts2":[[i,q],..]}`
//! * CSV with a header row: `t_ms,ch,rx,fp_idx,pose_x,pose_y,pose_yaw,pre_i0,pre_q0,..,sts1_i0,sts1_q0,..,sts2_i0,sts2_q0,..`
//!
//! `fp_idx` may be omitted (JSONL) or left empty (CSV); the first path is
//! then estimated from the preamble magnitude.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::io::{BufRead, Write};
use thiserror::Error;

/// Number of leading samples treated as the noise floor.
pub const DEFAULT_NOISE_SAMPLES: usize = 4;
/// Minimum CIR length accepted at ingest.
pub const MIN_CIR_LEN: usize = 8;
/// Fast-time sampling interval of the radar, in nanoseconds.
pub const SAMPLE_INTERVAL_NS: f64 = 1.0;
/// Threshold multiple of the noise RMS used when estimating the first path.
pub const FIRST_PATH_NOISE_FACTOR: f64 = 6.0;

#[derive(Debug, Error)]
pub enum CaptureError {
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("line {line} (t_ms {t_ms}): CIR length mismatch: pre={pre}, sts1={sts1}, sts2={sts2} (all must be equal and >= {MIN_CIR_LEN})")]
    Length {
        line: usize,
        t_ms: i64,
        pre: usize,
        sts1: usize,
        sts2: usize,
    },
    #[error("line {line} (t_ms {t_ms}): first_path_index {index} out of range for CIR length {len}")]
    Range {
        line: usize,
        t_ms: i64,
        index: usize,
        len: usize,
    },
    #[error("line {line} (t_ms {t_ms}): non-finite sample in {cir}[{index}]")]
    NonFinite {
        line: usize,
        t_ms: i64,
        cir: &'static str,
        index: usize,
    },
    #[error("line {line}: timestamp {t_ms} precedes previous timestamp {previous}")]
    Order { line: usize, t_ms: i64, previous: i64 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One I/Q sample in ADC units.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ComplexSample {
    pub i: f64,
    pub q: f64,
}

impl ComplexSample {
    pub const fn new(i: f64, q: f64) -> Self {
        Self { i, q }
    }

    pub fn from_polar(magnitude: f64, phase: f64) -> Self {
        Self::new(magnitude * phase.cos(), magnitude * phase.sin())
    }

    pub fn conj(self) -> Self {
        Self::new(self.i, -self.q)
    }

    pub fn is_finite(self) -> bool {
        self.i.is_finite() && self.q.is_finite()
    }
}

impl std::ops::Add for ComplexSample {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.i + rhs.i, self.q + rhs.q)
    }
}

impl Serialize for ComplexSample {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        [self.i, self.q].serialize(s)
    }
}

impl<'de> Deserialize<'de> for ComplexSample {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let [i, q] = <[f64; 2]>::deserialize(d)?;
        Ok(Self { i, q })
    }
}

/// IEEE 802.15.4 UWB channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Channel {
    Ch5,
    Ch9,
}

impl Channel {
    pub fn number(self) -> u8 {
        match self {
            Channel::Ch5 => 5,
            Channel::Ch9 => 9,
        }
    }
}

impl TryFrom<u8> for Channel {
    type Error = String;
    fn try_from(v: u8) -> Result<Self, String> {
        match v {
            5 => Ok(Channel::Ch5),
            9 => Ok(Channel::Ch9),
            other => Err(format!("unsupported channel {other} (expected 5 or 9)")),
        }
    }
}

impl From<Channel> for u8 {
    fn from(c: Channel) -> u8 {
        c.number()
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

/// Wraps an angle into (-pi, pi].
pub fn normalize_angle(a: f64) -> f64 {
    let r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// Planar pose in the world frame: position in cm, heading in radians.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, yaw: f64) -> Self {
        Self {
            x,
            y,
            yaw: normalize_angle(yaw),
        }
    }

    /// Composes `self` with a transform expressed in `self`'s body frame.
    pub fn compose(&self, local: &Pose) -> Pose {
        let (s, c) = self.yaw.sin_cos();
        Pose::new(
            self.x + c * local.x - s * local.y,
            self.y + s * local.x + c * local.y,
            self.yaw + local.yaw,
        )
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.yaw.is_finite()
    }
}

/// Radio front-end configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioConfig {
    pub center_frequency_hz: f64,
    pub bandwidth_hz: f64,
    pub update_rate_hz: f64,
    pub sample_interval_ns: f64,
}

impl RadioConfig {
    /// Kit defaults: 6.5 GHz (ch5) or 8.0 GHz (ch9), 500 MHz, 96 Hz, 1 ns.
    pub fn for_channel(channel: Channel) -> Self {
        let center_frequency_hz = match channel {
            Channel::Ch5 => 6.5e9,
            Channel::Ch9 => 8.0e9,
        };
        Self {
            center_frequency_hz,
            bandwidth_hz: 500e6,
            update_rate_hz: 96.0,
            sample_interval_ns: SAMPLE_INTERVAL_NS,
        }
    }

    /// Interval between frames in milliseconds (10.42 ms at 96 Hz).
    pub fn frame_interval_ms(&self) -> f64 {
        1000.0 / self.update_rate_hz
    }

    pub fn validate(&self) -> Result<(), CaptureError> {
        if !(self.bandwidth_hz >= 499e6) {
            return Err(CaptureError::Domain(format!(
                "bandwidth {} Hz below the 499 MHz UWB minimum",
                self.bandwidth_hz
            )));
        }
        if !(self.sample_interval_ns > 0.0) {
            return Err(CaptureError::Domain(
                "sample interval must be positive".into(),
            ));
        }
        if !(self.update_rate_hz > 0.0) {
            return Err(CaptureError::Domain("update rate must be positive".into()));
        }
        Ok(())
    }
}

/// Fractional bandwidth `(f_h - f_l) / ((f_h + f_l) / 2)`.
pub fn fractional_bandwidth(f_h: f64, f_l: f64) -> Result<f64, CaptureError> {
    if !(f_l > 0.0 && f_h > f_l) || !f_h.is_finite() {
        return Err(CaptureError::Domain(format!(
            "fractional bandwidth needs f_h > f_l > 0 (got f_h={f_h}, f_l={f_l})"
        )));
    }
    Ok((f_h - f_l) / ((f_h + f_l) / 2.0))
}

/// One timestamped radar frame.
#[derive(Debug, Clone, PartialEq)]
pub struct CirCapture {
    pub timestamp_ms: i64,
    pub channel: Channel,
    pub receiver_id: String,
    pub preamble_cir: Vec<ComplexSample>,
    pub sts1_cir: Vec<ComplexSample>,
    pub sts2_cir: Vec<ComplexSample>,
    /// Index of the direct-path sample in the raw (untrimmed) CIR.
    pub first_path_index: usize,
    pub pose: Pose,
}

impl CirCapture {
    pub fn len(&self) -> usize {
        self.preamble_cir.len()
    }

    pub fn is_empty(&self) -> bool {
        self.preamble_cir.is_empty()
    }

    /// Checks every record invariant; `line` is only used for messages.
    pub fn validate(&self, line: usize) -> Result<(), CaptureError> {
        let (pre, sts1, sts2) = (
            self.preamble_cir.len(),
            self.sts1_cir.len(),
            self.sts2_cir.len(),
        );
        if pre != sts1 || pre != sts2 || pre < MIN_CIR_LEN {
            return Err(CaptureError::Length {
                line,
                t_ms: self.timestamp_ms,
                pre,
                sts1,
                sts2,
            });
        }
        for (name, cir) in [
            ("pre", &self.preamble_cir),
            ("sts1", &self.sts1_cir),
            ("sts2", &self.sts2_cir),
        ] {
            if let Some(index) = cir.iter().position(|s| !s.is_finite()) {
                return Err(CaptureError::NonFinite {
                    line,
                    t_ms: self.timestamp_ms,
                    cir: name,
                    index,
                });
            }
        }
        if self.first_path_index >= pre - DEFAULT_NOISE_SAMPLES {
            return Err(CaptureError::Range {
                line,
                t_ms: self.timestamp_ms,
                index: self.first_path_index,
                len: pre,
            });
        }
        if !self.pose.is_finite() {
            return Err(CaptureError::Format {
                line,
                message: format!("t_ms {}: non-finite pose", self.timestamp_ms),
            });
        }
        Ok(())
    }
}

/// Estimates the direct-path index when the record does not carry one: the
/// first sample after the noise floor whose magnitude exceeds
/// [`FIRST_PATH_NOISE_FACTOR`] times the noise RMS, else the strongest sample.
pub fn estimate_first_path(preamble: &[ComplexSample], n_noise: usize) -> usize {
    let mags: Vec<f64> = preamble.iter().map(|s| s.i.hypot(s.q)).collect();
    if mags.len() <= n_noise {
        return 0;
    }
    let noise_rms =
        (mags[..n_noise].iter().map(|m| m * m).sum::<f64>() / n_noise.max(1) as f64).sqrt();
    let threshold = FIRST_PATH_NOISE_FACTOR * noise_rms;
    mags.iter()
        .enumerate()
        .skip(n_noise)
        .find(|(_, &m)| m > threshold)
        .map(|(k, _)| k)
        .unwrap_or_else(|| {
            mags.iter()
                .enumerate()
                .skip(n_noise)
                .fold((n_noise, f64::NEG_INFINITY), |best, (k, &m)| {
                    if m > best.1 {
                        (k, m)
                    } else {
                        best
                    }
                })
                .0
        })
}

#[derive(Serialize, Deserialize)]
struct CaptureRecord {
    t_ms: i64,
    ch: Channel,
    rx: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fp_idx: Option<usize>,
    pose: Pose,
    pre: Vec<ComplexSample>,
    sts1: Vec<ComplexSample>,
    sts2: Vec<ComplexSample>,
}

impl CaptureRecord {
    fn into_capture(self) -> CirCapture {
        let first_path_index = self
            .fp_idx
            .unwrap_or_else(|| estimate_first_path(&self.pre, DEFAULT_NOISE_SAMPLES));
        CirCapture {
            timestamp_ms: self.t_ms,
            channel: self.ch,
            receiver_id: self.rx,
            preamble_cir: self.pre,
            sts1_cir: self.sts1,
            sts2_cir: self.sts2,
            first_path_index,
            pose: Pose::new(self.pose.x, self.pose.y, self.pose.yaw),
        }
    }
}

/// Supported capture file formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaptureFormat {
    Jsonl,
    Csv,
}

impl CaptureFormat {
    /// Guesses the format from a file extension, defaulting to JSONL.
    pub fn from_path(path: &std::path::Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => CaptureFormat::Csv,
            _ => CaptureFormat::Jsonl,
        }
    }
}

/// Streaming JSONL reader yielding validated captures in timestamp order.
pub struct JsonlCaptureReader<R> {
    lines: std::io::Lines<R>,
    line_no: usize,
    last_t: Option<i64>,
    done: bool,
}

impl<R: BufRead> JsonlCaptureReader<R> {
    pub fn new(reader: R) -> Self {
        Self {
            lines: reader.lines(),
            line_no: 0,
            last_t: None,
            done: false,
        }
    }
}

impl<R: BufRead> Iterator for JsonlCaptureReader<R> {
    type Item = Result<CirCapture, CaptureError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => {
                    self.done = true;
                    return Some(Err(e.into()));
                }
            };
            self.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            let result = parse_json_line(&line, self.line_no).and_then(|c| {
                check_order(self.last_t, &c, self.line_no)?;
                Ok(c)
            });
            match &result {
                Ok(c) => self.last_t = Some(c.timestamp_ms),
                Err(_) => self.done = true,
            }
            return Some(result);
        }
    }
}

fn check_order(last: Option<i64>, c: &CirCapture, line: usize) -> Result<(), CaptureError> {
    match last {
        Some(previous) if c.timestamp_ms < previous => Err(CaptureError::Order {
            line,
            t_ms: c.timestamp_ms,
            previous,
        }),
        _ => Ok(()),
    }
}

fn parse_json_line(line: &str, line_no: usize) -> Result<CirCapture, CaptureError> {
    let record: CaptureRecord =
        serde_json::from_str(line).map_err(|e| CaptureError::Format {
            line: line_no,
            message: e.to_string(),
        })?;
    let capture = record.into_capture();
    capture.validate(line_no)?;
    Ok(capture)
}

/// Parses a whole capture stream. Captures come back in file order, which
/// must be non-decreasing in timestamp.
pub fn parse_capture_stream<R: BufRead>(
    source: R,
    format: CaptureFormat,
) -> Result<Vec<CirCapture>, CaptureError> {
    match format {
        CaptureFormat::Jsonl => JsonlCaptureReader::new(source).collect(),
        CaptureFormat::Csv => parse_csv(source),
    }
}

/// Serializes one capture as a single JSONL line (without the newline).
pub fn capture_to_json(capture: &CirCapture) -> String {
    let record = CaptureRecord {
        t_ms: capture.timestamp_ms,
        ch: capture.channel,
        rx: capture.receiver_id.clone(),
        fp_idx: Some(capture.first_path_index),
        pose: capture.pose,
        pre: capture.preamble_cir.clone(),
        sts1: capture.sts1_cir.clone(),
        sts2: capture.sts2_cir.clone(),
    };
    serde_json::to_string(&record).expect("capture records always serialize")
}

pub fn write_jsonl<W: Write>(captures: &[CirCapture], mut out: W) -> std::io::Result<()> {
    for c in captures {
        writeln!(out, "{}", capture_to_json(c))?;
    }
    Ok(())
}

const CIR_NAMES: [&str; 3] = ["pre", "sts1", "sts2"];

/// Writes captures as CSV. Every capture must share the same CIR length.
pub fn write_csv<W: Write>(captures: &[CirCapture], out: W) -> Result<(), CaptureError> {
    let n = captures.first().map_or(0, CirCapture::len);
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ["t_ms", "ch", "rx", "fp_idx", "pose_x", "pose_y", "pose_yaw"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for name in CIR_NAMES {
        for k in 0..n {
            header.push(format!("{name}_i{k}"));
            header.push(format!("{name}_q{k}"));
        }
    }
    w.write_record(&header).map_err(csv_io)?;
    for c in captures {
        if c.len() != n {
            return Err(CaptureError::Domain(format!(
                "CSV output needs a uniform CIR length ({} vs {n})",
                c.len()
            )));
        }
        let mut row = vec![
            c.timestamp_ms.to_string(),
            c.channel.to_string(),
            c.receiver_id.clone(),
            c.first_path_index.to_string(),
            c.pose.x.to_string(),
            c.pose.y.to_string(),
            c.pose.yaw.to_string(),
        ];
        for cir in [&c.preamble_cir, &c.sts1_cir, &c.sts2_cir] {
            for s in cir {
                row.push(s.i.to_string());
                row.push(s.q.to_string());
            }
        }
        w.write_record(&row).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> CaptureError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CaptureError::Io(io),
        other => CaptureError::Format {
            line: 0,
            message: format!("{other:?}"),
        },
    }
}

struct CsvLayout {
    t_ms: usize,
    ch: usize,
    rx: usize,
    fp_idx: Option<usize>,
    pose: [usize; 3],
    /// Per CIR, column pairs (i, q) in sample order.
    cirs: [Vec<(usize, usize)>; 3],
}

impl CsvLayout {
    fn from_header(header: &csv::StringRecord) -> Result<Self, CaptureError> {
        let find = |name: &str| header.iter().position(|h| h.trim() == name);
        let need = |name: &str| {
            find(name).ok_or_else(|| CaptureError::Format {
                line: 1,
                message: format!("missing column `{name}`"),
            })
        };
        let mut cirs: [Vec<(usize, usize)>; 3] = Default::default();
        for (slot, name) in cirs.iter_mut().zip(CIR_NAMES) {
            let mut k = 0;
            while let Some(i) = find(&format!("{name}_i{k}")) {
                let q = need(&format!("{name}_q{k}"))?;
                slot.push((i, q));
                k += 1;
            }
        }
        Ok(Self {
            t_ms: need("t_ms")?,
            ch: need("ch")?,
            rx: need("rx")?,
            fp_idx: find("fp_idx"),
            pose: [need("pose_x")?, need("pose_y")?, need("pose_yaw")?],
            cirs,
        })
    }
}

fn parse_csv<R: BufRead>(source: R) -> Result<Vec<CirCapture>, CaptureError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(source);
    let mut records = reader.records();
    let header = match records.next() {
        None => return Ok(Vec::new()),
        Some(h) => h.map_err(csv_io)?,
    };
    let layout = CsvLayout::from_header(&header)?;
    let mut out = Vec::new();
    let mut last_t = None;
    for (row_idx, rec) in records.enumerate() {
        let line = row_idx + 2;
        let rec = rec.map_err(|e| CaptureError::Format {
            line,
            message: e.to_string(),
        })?;
        if rec.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        let capture = csv_row(&rec, &layout, line)?;
        capture.validate(line)?;
        check_order(last_t, &capture, line)?;
        last_t = Some(capture.timestamp_ms);
        out.push(capture);
    }
    Ok(out)
}

fn csv_row(
    rec: &csv::StringRecord,
    layout: &CsvLayout,
    line: usize,
) -> Result<CirCapture, CaptureError> {
    let field = |idx: usize| rec.get(idx).map(str::trim).unwrap_or("");
    let bad = |col: &str, v: &str| CaptureError::Format {
        line,
        message: format!("column `{col}`: cannot parse `{v}`"),
    };
    let num = |idx: usize, col: &str| -> Result<f64, CaptureError> {
        let v = field(idx);
        v.parse::<f64>().map_err(|_| bad(col, v))
    };
    let t_ms: i64 = field(layout.t_ms)
        .parse()
        .map_err(|_| bad("t_ms", field(layout.t_ms)))?;
    let ch_raw: u8 = field(layout.ch)
        .parse()
        .map_err(|_| bad("ch", field(layout.ch)))?;
    let channel = Channel::try_from(ch_raw).map_err(|m| CaptureError::Format { line, message: m })?;
    let fp_idx = match layout.fp_idx.map(field) {
        None | Some("") => None,
        Some(v) => Some(v.parse::<usize>().map_err(|_| bad("fp_idx", v))?),
    };
    let pose = Pose::new(
        num(layout.pose[0], "pose_x")?,
        num(layout.pose[1], "pose_y")?,
        num(layout.pose[2], "pose_yaw")?,
    );
    let mut cirs: [Vec<ComplexSample>; 3] = Default::default();
    for ((slot, cols), name) in cirs.iter_mut().zip(&layout.cirs).zip(CIR_NAMES) {
        let mut ended = false;
        for (k, &(ci, cq)) in cols.iter().enumerate() {
            let (vi, vq) = (field(ci), field(cq));
            if vi.is_empty() && vq.is_empty() {
                ended = true;
                continue;
            }
            if ended {
                return Err(CaptureError::Format {
                    line,
                    message: format!("{name}: sample {k} follows an empty sample"),
                });
            }
            let i = vi.parse().map_err(|_| bad(&format!("{name}_i{k}"), vi))?;
            let q = vq.parse().map_err(|_| bad(&format!("{name}_q{k}"), vq))?;
            slot.push(ComplexSample::new(i, q));
        }
    }
    let [pre, sts1, sts2] = cirs;
    let first_path_index =
        fp_idx.unwrap_or_else(|| estimate_first_path(&pre, DEFAULT_NOISE_SAMPLES));
    Ok(CirCapture {
        timestamp_ms: t_ms,
        channel,
        receiver_id: field(layout.rx).to_string(),
        preamble_cir: pre,
        sts1_cir: sts1,
        sts2_cir: sts2,
        first_path_index,
        pose,
    })
}

/// Timestamped robot poses, e.g. exported from a motion-capture system.
#[derive(Debug, Clone, Default)]
pub struct PoseTrack {
    samples: Vec<(i64, Pose)>,
}

impl PoseTrack {
    pub fn new(mut samples: Vec<(i64, Pose)>) -> Self {
        samples.sort_by_key(|(t, _)| *t);
        Self { samples }
    }

    /// Reads a `t_ms,x,y,yaw` CSV with a header row.
    pub fn from_csv<R: std::io::Read>(source: R) -> Result<Self, CaptureError> {
        let mut reader = csv::Reader::from_reader(source);
        let mut samples = Vec::new();
        for (row, rec) in reader.records().enumerate() {
            let line = row + 2;
            let rec = rec.map_err(|e| CaptureError::Format {
                line,
                message: e.to_string(),
            })?;
            let get = |k: usize| -> Result<f64, CaptureError> {
                rec.get(k)
                    .and_then(|v| v.trim().parse().ok())
                    .ok_or_else(|| CaptureError::Format {
                        line,
                        message: format!("pose track column {k} missing or not numeric"),
                    })
            };
            samples.push((get(0)? as i64, Pose::new(get(1)?, get(2)?, get(3)?)));
        }
        Ok(Self::new(samples))
    }

    /// Pose with the nearest timestamp; ties resolve to the earlier sample.
    pub fn nearest(&self, t_ms: i64) -> Option<Pose> {
        let idx = self.samples.partition_point(|(t, _)| *t < t_ms);
        let after = self.samples.get(idx);
        let before = idx.checked_sub(1).and_then(|i| self.samples.get(i));
        match (before, after) {
            (Some(b), Some(a)) => Some(if t_ms - b.0 <= a.0 - t_ms { b.1 } else { a.1 }),
            (Some(b), None) => Some(b.1),
            (None, Some(a)) => Some(a.1),
            (None, None) => None,
        }
    }

    /// Overwrites each capture's pose with the nearest tracked pose.
    pub fn attach(&self, captures: &mut [CirCapture]) {
        for c in captures {
            if let Some(p) = self.nearest(c.timestamp_ms) {
                c.pose = p;
            }
        }
    }
}
