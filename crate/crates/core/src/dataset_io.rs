//! Readers and writers for KITTI-style sequences and the run configuration.
//!
//! * scans: `.bin`, little-endian `f32 x, y, z, intensity` per point
//! * poses: text, 12 numbers per line (row-major 3x4, camera frame)
//! * calibration: text with a `Tr:` line of 12 numbers (LiDAR to camera)
//! * labels: `.label`, little-endian `u32` per point, class in the low 16 bits

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{HifError, Result};
use crate::evaluation::GroundTruth;
use crate::model::{
    mat_mul, orthonormality_residual, HifConfig, IngestDiagnostics, Mat3, Point3, RigidPose,
    ScanFrame,
};
use crate::scalar::Real;
use crate::synthetic::SceneSpec;

/// Rotation residual above which a pose line is rejected.
pub const POSE_RESIDUAL_LIMIT: f64 = 1e-4;

const POINT_STRIDE: usize = 16;

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| HifError::io(path, e))
}

/// Reads a KITTI velodyne scan. Intensity is dropped, as are non-finite
/// points (counted in the returned diagnostics).
pub fn read_scan_bin<S: Real>(path: &Path) -> Result<(Vec<Point3<S>>, IngestDiagnostics)> {
    let bytes = read_bytes(path)?;
    decode_scan(&bytes, path)
}

fn decode_scan<S: Real>(bytes: &[u8], path: &Path) -> Result<(Vec<Point3<S>>, IngestDiagnostics)> {
    if !bytes.len().is_multiple_of(POINT_STRIDE) {
        return Err(HifError::Truncated {
            path: path.to_owned(),
            offset: (bytes.len() - bytes.len() % POINT_STRIDE) as u64,
        });
    }
    let mut diag = IngestDiagnostics::default();
    let mut points = Vec::with_capacity(bytes.len() / POINT_STRIDE);
    for rec in bytes.chunks_exact(POINT_STRIDE) {
        let f = |i: usize| f32::from_le_bytes(rec[i * 4..i * 4 + 4].try_into().expect("4 bytes"));
        let (x, y, z) = (f(0), f(1), f(2));
        if !(x.is_finite() && y.is_finite() && z.is_finite()) {
            diag.non_finite += 1;
            continue;
        }
        points.push(Point3::sensor(
            S::lit(f64::from(x)),
            S::lit(f64::from(y)),
            S::lit(f64::from(z)),
        ));
    }
    Ok((points, diag))
}

/// Appends points in the velodyne layout with zero intensity.
pub fn encode_scan<S: Real>(points: &[Point3<S>], buf: &mut Vec<u8>) {
    buf.reserve(points.len() * POINT_STRIDE);
    for p in points {
        for v in [
            p.x.as_f64() as f32,
            p.y.as_f64() as f32,
            p.z.as_f64() as f32,
            0.0,
        ] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
}

pub fn write_scan_bin<S: Real>(path: &Path, points: &[Point3<S>]) -> Result<()> {
    let mut buf = Vec::new();
    encode_scan(points, &mut buf);
    fs::write(path, buf).map_err(|e| HifError::io(path, e))
}

fn parse_row12(text: &str, path: &Path, line: usize) -> Result<[f64; 12]> {
    let values: Vec<f64> = text
        .split_whitespace()
        .map(|tok| {
            tok.parse::<f64>().map_err(|_| HifError::Parse {
                path: path.to_owned(),
                line,
                message: format!("not a number: `{tok}`"),
            })
        })
        .collect::<Result<_>>()?;
    values.try_into().map_err(|v: Vec<f64>| HifError::Parse {
        path: path.to_owned(),
        line,
        message: format!("expected 12 numbers, found {}", v.len()),
    })
}

fn raw_pose(row: &[f64; 12]) -> (Mat3<f64>, [f64; 3]) {
    (
        [
            [row[0], row[1], row[2]],
            [row[4], row[5], row[6]],
            [row[8], row[9], row[10]],
        ],
        [row[3], row[7], row[11]],
    )
}

/// Gram-Schmidt on the rows, completing the third row with a cross product
/// so the determinant is +1.
pub fn orthonormalize(r: &Mat3<f64>) -> Mat3<f64> {
    let norm = |v: [f64; 3]| {
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        [v[0] / n, v[1] / n, v[2] / n]
    };
    let r0 = norm(r[0]);
    let d = r[1][0] * r0[0] + r[1][1] * r0[1] + r[1][2] * r0[2];
    let r1 = norm([
        r[1][0] - d * r0[0],
        r[1][1] - d * r0[1],
        r[1][2] - d * r0[2],
    ]);
    let r2 = [
        r0[1] * r1[2] - r0[2] * r1[1],
        r0[2] * r1[0] - r0[0] * r1[2],
        r0[0] * r1[1] - r0[1] * r1[0],
    ];
    [r0, r1, r2]
}

fn rigid_from_row(row: &[f64; 12], path: &Path, line: usize) -> Result<RigidPose<f64>> {
    let (r, t) = raw_pose(row);
    let residual = orthonormality_residual(&r);
    if residual > POSE_RESIDUAL_LIMIT {
        return Err(HifError::Validation(format!(
            "{}:{line}: rotation is not rigid (residual {residual:.3e})",
            path.display()
        )));
    }
    RigidPose::new(orthonormalize(&r), t)
}

/// Reads the `Tr:` LiDAR-to-camera transform from a KITTI calibration file.
pub fn read_calibration(path: &Path) -> Result<RigidPose<f64>> {
    let text = fs::read_to_string(path).map_err(|e| HifError::io(path, e))?;
    for (i, line) in text.lines().enumerate() {
        if let Some(rest) = line.trim_start().strip_prefix("Tr:") {
            return rigid_from_row(&parse_row12(rest, path, i + 1)?, path, i + 1);
        }
    }
    Err(HifError::Parse {
        path: path.to_owned(),
        line: 0,
        message: "no `Tr:` entry".into(),
    })
}

/// Reads one pose per line. With a calibration `Tr` the LiDAR pose is
/// `Tr⁻¹ · P · Tr`; without one the pose is used as-is.
pub fn read_poses(pose_file: &Path, calib_file: Option<&Path>) -> Result<Vec<RigidPose<f64>>> {
    let calib = calib_file.map(read_calibration).transpose()?;
    let text = fs::read_to_string(pose_file).map_err(|e| HifError::io(pose_file, e))?;
    let mut poses = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = parse_row12(line, pose_file, i + 1)?;
        let pose = match &calib {
            None => rigid_from_row(&row, pose_file, i + 1)?,
            Some(tr) => {
                let (r, t) = raw_pose(&row);
                let raw = RigidPoseParts { r, t };
                let composed = raw.conjugate(tr);
                let residual = orthonormality_residual(&composed.r);
                if residual > POSE_RESIDUAL_LIMIT {
                    return Err(HifError::Validation(format!(
                        "{}:{}: calibrated pose is not rigid (residual {residual:.3e})",
                        pose_file.display(),
                        i + 1
                    )));
                }
                RigidPose::new(orthonormalize(&composed.r), composed.t)?
            }
        };
        poses.push(pose);
    }
    Ok(poses)
}

/// Unvalidated rotation and translation, so composition can happen before
/// the rigidity check.
struct RigidPoseParts {
    r: Mat3<f64>,
    t: [f64; 3],
}

impl RigidPoseParts {
    fn from_pose(p: &RigidPose<f64>) -> Self {
        Self {
            r: *p.rotation(),
            t: *p.translation(),
        }
    }

    fn then(&self, inner: &Self) -> Self {
        let r = mat_mul(&self.r, &inner.r);
        let mut t = self.t;
        for (i, ti) in t.iter_mut().enumerate() {
            *ti +=
                self.r[i][0] * inner.t[0] + self.r[i][1] * inner.t[1] + self.r[i][2] * inner.t[2];
        }
        Self { r, t }
    }

    fn conjugate(&self, tr: &RigidPose<f64>) -> Self {
        let tr_inv = Self::from_pose(&tr.inverse());
        tr_inv.then(self).then(&Self::from_pose(tr))
    }
}

/// Writes poses in the KITTI text layout.
pub fn write_poses<S: Real>(path: &Path, poses: &[RigidPose<S>]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| HifError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for pose in poses {
        let r = pose.rotation();
        let t = pose.translation();
        let row: Vec<String> = (0..3)
            .flat_map(|i| [r[i][0], r[i][1], r[i][2], t[i]])
            .map(|v| format!("{:e}", v.as_f64()))
            .collect();
        writeln!(w, "{}", row.join(" ")).map_err(|e| HifError::io(path, e))?;
    }
    w.flush().map_err(|e| HifError::io(path, e))
}

/// Reads raw SemanticKITTI label words.
pub fn read_labels(path: &Path) -> Result<Vec<u32>> {
    let bytes = read_bytes(path)?;
    if bytes.len() % 4 != 0 {
        return Err(HifError::Truncated {
            path: path.to_owned(),
            offset: (bytes.len() - bytes.len() % 4) as u64,
        });
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect())
}

pub fn write_labels(path: &Path, labels: &[u32]) -> Result<()> {
    let buf: Vec<u8> = labels.iter().flat_map(|l| l.to_le_bytes()).collect();
    fs::write(path, buf).map_err(|e| HifError::io(path, e))
}

/// Semantic class of a label word (low 16 bits; the high bits are the
/// instance id).
pub fn semantic_class(label: u32) -> u32 {
    label & 0xFFFF
}

/// Ground truth for a label: classes 0 (unknown) and 1 (unlabeled) are
/// excluded, the moving classes 252..=259 are dynamic, everything else is
/// static.
pub fn ground_truth(label: u32) -> GroundTruth {
    match semantic_class(label) {
        0 | 1 => GroundTruth::Excluded,
        252..=259 => GroundTruth::Dynamic,
        _ => GroundTruth::Static,
    }
}

/// Checks that a label file pairs with its scan.
pub fn check_label_pairing(points: usize, labels: &[u32]) -> Result<()> {
    if labels.len() != points {
        return Err(HifError::LabelMismatch {
            labels: labels.len(),
            points,
        });
    }
    Ok(())
}

/// Where a KITTI-style sequence lives on disk and which frames to use.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSpec {
    pub scan_dir: PathBuf,
    pub pose_file: PathBuf,
    pub calib_file: Option<PathBuf>,
    pub label_dir: Option<PathBuf>,
    /// Inclusive frame range.
    pub frame_range: (u64, u64),
}

impl SequenceSpec {
    pub fn scan_path(&self, frame: u64) -> PathBuf {
        self.scan_dir.join(format!("{frame:06}.bin"))
    }

    pub fn label_path(&self, frame: u64) -> Option<PathBuf> {
        self.label_dir
            .as_ref()
            .map(|d| d.join(format!("{frame:06}.label")))
    }

    pub fn frames(&self) -> std::ops::RangeInclusive<u64> {
        self.frame_range.0..=self.frame_range.1
    }

    /// Verifies every referenced file exists.
    pub fn check_files(&self) -> Result<()> {
        let missing =
            |p: &Path| HifError::io(p, std::io::Error::from(std::io::ErrorKind::NotFound));
        for p in [Some(&self.pose_file), self.calib_file.as_ref()]
            .into_iter()
            .flatten()
        {
            if !p.is_file() {
                return Err(missing(p));
            }
        }
        for frame in self.frames() {
            let scan = self.scan_path(frame);
            if !scan.is_file() {
                return Err(missing(&scan));
            }
            if let Some(label) = self.label_path(frame) {
                if !label.is_file() {
                    return Err(missing(&label));
                }
            }
        }
        Ok(())
    }
}

/// Loads a sequence lazily, one frame at a time, in frame order.
#[derive(Debug, Clone)]
pub struct SequenceReader {
    spec: SequenceSpec,
    poses: Vec<RigidPose<f64>>,
}

impl SequenceReader {
    pub fn open(spec: SequenceSpec) -> Result<Self> {
        spec.check_files()?;
        let poses = read_poses(&spec.pose_file, spec.calib_file.as_deref())?;
        if spec.frame_range.1 as usize >= poses.len() {
            return Err(HifError::Validation(format!(
                "{} holds {} poses but frame {} was requested",
                spec.pose_file.display(),
                poses.len(),
                spec.frame_range.1
            )));
        }
        Ok(Self { spec, poses })
    }

    pub fn spec(&self) -> &SequenceSpec {
        &self.spec
    }

    pub fn has_labels(&self) -> bool {
        self.spec.label_dir.is_some()
    }

    pub fn load_frame<S: Real>(&self, frame: u64) -> Result<(ScanFrame<S>, IngestDiagnostics)> {
        let (points, diag) = read_scan_bin::<S>(&self.spec.scan_path(frame))?;
        let labels = match self.spec.label_path(frame) {
            Some(path) => {
                let labels = read_labels(&path)?;
                // Drop the labels of points the scan reader rejected.
                let labels = if diag.non_finite > 0 {
                    let bytes = read_bytes(&self.spec.scan_path(frame))?;
                    bytes
                        .chunks_exact(POINT_STRIDE)
                        .zip(&labels)
                        .filter(|(rec, _)| {
                            rec[..12].chunks_exact(4).all(|c| {
                                f32::from_le_bytes(c.try_into().expect("4 bytes")).is_finite()
                            })
                        })
                        .map(|(_, l)| *l)
                        .collect()
                } else {
                    labels
                };
                check_label_pairing(points.len(), &labels)?;
                Some(labels)
            }
            None => None,
        };
        let p = &self.poses[frame as usize];
        let pose = cast_pose(p);
        Ok((ScanFrame::new(frame, points, pose, labels)?, diag))
    }
}

pub fn cast_pose<S: Real, T: Real>(p: &RigidPose<S>) -> RigidPose<T> {
    let r = p.rotation();
    let t = p.translation();
    let c = |v: S| T::lit(v.as_f64());
    let rotation = [
        [c(r[0][0]), c(r[0][1]), c(r[0][2])],
        [c(r[1][0]), c(r[1][1]), c(r[1][2])],
        [c(r[2][0]), c(r[2][1]), c(r[2][2])],
    ];
    RigidPose::new(rotation, [c(t[0]), c(t[1]), c(t[2])]).unwrap_or_else(|_| {
        // f32 rounding can exceed the f64 rigidity tolerance
        let fixed = orthonormalize(&[
            [r[0][0].as_f64(), r[0][1].as_f64(), r[0][2].as_f64()],
            [r[1][0].as_f64(), r[1][1].as_f64(), r[1][2].as_f64()],
            [r[2][0].as_f64(), r[2][1].as_f64(), r[2][2].as_f64()],
        ]);
        let rot = fixed.map(|row| row.map(T::lit));
        RigidPose::new(rot, [c(t[0]), c(t[1]), c(t[2])]).unwrap_or_else(|_| RigidPose::identity())
    })
}

/// Optional range gate applied in the sensor frame before integration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeFilter {
    pub min_range: Option<f64>,
    pub max_range: Option<f64>,
}

impl RangeFilter {
    pub fn is_active(&self) -> bool {
        self.min_range.is_some() || self.max_range.is_some()
    }

    /// Removes points outside the gate, keeping labels aligned.
    pub fn apply<S: Real>(&self, scan: &mut ScanFrame<S>) -> IngestDiagnostics {
        let mut diag = IngestDiagnostics::default();
        if !self.is_active() {
            return diag;
        }
        let lo = self.min_range.unwrap_or(0.0);
        let hi = self.max_range.unwrap_or(f64::INFINITY);
        let keep: Vec<bool> = scan
            .points
            .iter()
            .map(|p| {
                let r = p.norm().as_f64();
                lo <= r && r <= hi
            })
            .collect();
        let mut it = keep.iter();
        scan.points.retain(|_| *it.next().expect("aligned"));
        if let Some(labels) = scan.labels.as_mut() {
            let mut it = keep.iter();
            labels.retain(|_| *it.next().expect("aligned"));
        }
        diag.out_of_range = keep.iter().filter(|k| !**k).count();
        diag
    }
}

/// Everything a run needs: filter parameters, an optional range gate, and
/// either a dataset sequence or a synthetic scene.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub hif: HifConfig<f64>,
    pub range: RangeFilter,
    pub parallel: bool,
    /// Classify each scan against the map as it stands right after that scan
    /// is integrated, instead of against the final map.
    pub online: bool,
    pub sequence: Option<SequenceSpec>,
    pub scene: Option<SceneSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ConfigFile {
    origin_x: f64,
    origin_y: f64,
    dx: f64,
    dy: f64,
    alpha: f64,
    beta: f64,
    gap_threshold: f64,
    containment_tolerance: f64,
    static_threshold: f64,
    p_init: f64,
    clip_lo: f64,
    clip_hi: f64,
    lhp_enabled: bool,
    compaction_epsilon: f64,
    min_range: Option<f64>,
    max_range: Option<f64>,
    parallel: bool,
    online: bool,
    sequence: Option<SequenceFile>,
    scene: Option<SceneSpec>,
}

impl Default for ConfigFile {
    fn default() -> Self {
        let d = HifConfig::<f64>::default();
        Self {
            origin_x: d.origin_x,
            origin_y: d.origin_y,
            dx: d.dx,
            dy: d.dy,
            alpha: d.alpha,
            beta: d.beta,
            gap_threshold: d.gap_threshold,
            containment_tolerance: d.containment_tolerance,
            static_threshold: d.static_threshold,
            p_init: d.p_init,
            clip_lo: d.clip_lo,
            clip_hi: d.clip_hi,
            lhp_enabled: d.lhp_enabled,
            compaction_epsilon: d.compaction_epsilon,
            min_range: None,
            max_range: None,
            parallel: false,
            online: false,
            sequence: None,
            scene: None,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SequenceFile {
    scan_dir: PathBuf,
    pose_file: PathBuf,
    calib_file: Option<PathBuf>,
    label_dir: Option<PathBuf>,
    frame_start: u64,
    frame_end: u64,
}

/// Parses configuration text. Relative paths resolve against `base_dir`.
pub fn parse_config(text: &str, base_dir: &Path, origin: &Path) -> Result<RunConfig> {
    let raw: ConfigFile = toml::from_str(text).map_err(|e| HifError::ConfigSyntax {
        path: origin.to_owned(),
        message: e.to_string(),
    })?;
    let hif = HifConfig {
        origin_x: raw.origin_x,
        origin_y: raw.origin_y,
        dx: raw.dx,
        dy: raw.dy,
        alpha: raw.alpha,
        beta: raw.beta,
        gap_threshold: raw.gap_threshold,
        containment_tolerance: raw.containment_tolerance,
        static_threshold: raw.static_threshold,
        p_init: raw.p_init,
        clip_lo: raw.clip_lo,
        clip_hi: raw.clip_hi,
        lhp_enabled: raw.lhp_enabled,
        compaction_epsilon: raw.compaction_epsilon,
    };
    hif.validate()?;
    let range = RangeFilter {
        min_range: raw.min_range,
        max_range: raw.max_range,
    };
    if let (Some(lo), Some(hi)) = (range.min_range, range.max_range) {
        if lo > hi {
            return Err(HifError::config("min_range", "must not exceed max_range"));
        }
    }
    let resolve = |p: PathBuf| if p.is_absolute() { p } else { base_dir.join(p) };
    let sequence = raw
        .sequence
        .map(|s| {
            if s.frame_start > s.frame_end {
                return Err(HifError::config(
                    "sequence.frame_start",
                    "must not exceed sequence.frame_end",
                ));
            }
            Ok(SequenceSpec {
                scan_dir: resolve(s.scan_dir),
                pose_file: resolve(s.pose_file),
                calib_file: s.calib_file.map(resolve),
                label_dir: s.label_dir.map(resolve),
                frame_range: (s.frame_start, s.frame_end),
            })
        })
        .transpose()?;
    if sequence.is_some() && raw.scene.is_some() {
        return Err(HifError::config(
            "scene",
            "a configuration names either a sequence or a scene, not both",
        ));
    }
    if let Some(scene) = &raw.scene {
        scene.validate()?;
    }
    Ok(RunConfig {
        hif,
        range,
        parallel: raw.parallel,
        online: raw.online,
        sequence,
        scene: raw.scene,
    })
}

/// Loads a configuration file; omitted keys take their defaults and unknown
/// keys are rejected.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| HifError::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_config(&text, base, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig> {
        parse_config(text, Path::new("/data"), Path::new("test.toml"))
    }

    fn encode(points: &[[f32; 4]]) -> Vec<u8> {
        points
            .iter()
            .flatten()
            .flat_map(|v| v.to_le_bytes())
            .collect()
    }

    #[test]
    fn decode_single_point() {
        let bytes = encode(&[[1.0, 2.0, 3.0, 0.5]]);
        let (pts, diag) = decode_scan::<f64>(&bytes, Path::new("x.bin")).unwrap();
        assert_eq!(pts, vec![Point3::sensor(1.0, 2.0, 3.0)]);
        assert_eq!(diag.total(), 0);
    }

    #[test]
    fn decode_empty_and_truncated() {
        let (pts, _) = decode_scan::<f64>(&[], Path::new("x.bin")).unwrap();
        assert!(pts.is_empty());
        let mut bytes = encode(&[[1.0, 2.0, 3.0, 0.5]]);
        bytes.push(0);
        match decode_scan::<f64>(&bytes, Path::new("x.bin")) {
            Err(HifError::Truncated { offset, .. }) => assert_eq!(offset, 16),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn decode_drops_non_finite() {
        let bytes = encode(&[[f32::NAN, 0.0, 0.0, 0.0], [1.0, 1.0, 1.0, 0.0]]);
        let (pts, diag) = decode_scan::<f32>(&bytes, Path::new("x.bin")).unwrap();
        assert_eq!(pts.len(), 1);
        assert_eq!(diag.non_finite, 1);
    }

    #[test]
    fn label_classes() {
        assert_eq!(ground_truth(252), GroundTruth::Dynamic);
        assert_eq!(ground_truth(259), GroundTruth::Dynamic);
        assert_eq!(ground_truth(0), GroundTruth::Excluded);
        assert_eq!(ground_truth(1), GroundTruth::Excluded);
        assert_eq!(ground_truth(40), GroundTruth::Static);
        // instance id in the high half is ignored
        assert_eq!(ground_truth((7 << 16) | 252), GroundTruth::Dynamic);
        assert_eq!(ground_truth((7 << 16) | 10), GroundTruth::Static);
    }

    #[test]
    fn label_pairing_mismatch_names_both_counts() {
        let err = check_label_pairing(3, &[1, 2]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains('2') && msg.contains('3'), "{msg}");
    }

    #[test]
    fn config_defaults_and_overrides() {
        let cfg = parse("").unwrap();
        assert_eq!(cfg.hif, HifConfig::default());
        assert!(cfg.sequence.is_none() && cfg.scene.is_none());

        let cfg = parse("dx = 1.5").unwrap();
        assert_eq!(cfg.hif.dx, 1.5);
        assert_eq!(cfg.hif.dy, 1.0);
    }

    #[test]
    fn config_rejects_bad_values_and_unknown_keys() {
        match parse("alpha = 0.4") {
            Err(HifError::Config { key, .. }) => assert_eq!(key, "alpha"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse("beta = 0.6"), Err(HifError::Config { .. })));
        assert!(matches!(
            parse("alhpa = 0.8"),
            Err(HifError::ConfigSyntax { .. })
        ));
    }

    #[test]
    fn config_sequence_paths_resolve() {
        let cfg = parse(
            "[sequence]\nscan_dir = \"velodyne\"\npose_file = \"/abs/poses.txt\"\nframe_start = 4390\nframe_end = 4530\n",
        )
        .unwrap();
        let seq = cfg.sequence.unwrap();
        assert_eq!(seq.scan_dir, PathBuf::from("/data/velodyne"));
        assert_eq!(seq.pose_file, PathBuf::from("/abs/poses.txt"));
        assert_eq!(seq.frame_range, (4390, 4530));
        assert_eq!(
            seq.scan_path(4390),
            PathBuf::from("/data/velodyne/004390.bin")
        );
        assert!(parse(
            "[sequence]\nscan_dir = \"v\"\npose_file = \"p\"\nframe_start = 5\nframe_end = 4\n"
        )
        .is_err());
    }

    #[test]
    fn poses_with_and_without_calibration() {
        let dir = tempfile::tempdir().unwrap();
        let poses = dir.path().join("poses.txt");
        fs::write(&poses, "1 0 0 0 0 1 0 0 0 0 1 0\n1 0 0 5 0 1 0 0 0 0 1 0\n").unwrap();
        let read = read_poses(&poses, None).unwrap();
        assert_eq!(read[0], RigidPose::identity());
        assert_eq!(read[1].translation(), &[5.0, 0.0, 0.0]);

        let calib = dir.path().join("calib.txt");
        fs::write(
            &calib,
            "P0: 1 0 0 0 0 1 0 0 0 0 1 0\nTr: 1 0 0 0 0 1 0 0 0 0 1 1\n",
        )
        .unwrap();
        let read = read_poses(&poses, Some(&calib)).unwrap();
        assert_eq!(read[0], RigidPose::identity());

        fs::write(&poses, "1 0 0 0 0 1 0\n").unwrap();
        match read_poses(&poses, None) {
            Err(HifError::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("unexpected {other:?}"),
        }
        fs::write(&poses, "1 0.5 0 0 0 1 0 0 0 0 1 0\n").unwrap();
        assert!(matches!(
            read_poses(&poses, None),
            Err(HifError::Validation(_))
        ));
    }

    #[test]
    fn calibrated_pose_is_conjugated() {
        // KITTI camera axes: x right, y down, z forward. With Tr mapping
        // LiDAR (x fwd, y left, z up) to camera, a camera move of 5 m along
        // z is a LiDAR move of 5 m along x.
        let dir = tempfile::tempdir().unwrap();
        let poses = dir.path().join("poses.txt");
        let calib = dir.path().join("calib.txt");
        fs::write(&poses, "1 0 0 0 0 1 0 0 0 0 1 5\n").unwrap();
        fs::write(&calib, "Tr: 0 -1 0 0 0 0 -1 0 1 0 0 0\n").unwrap();
        let read = read_poses(&poses, Some(&calib)).unwrap();
        let t = read[0].translation();
        assert!((t[0] - 5.0).abs() < 1e-12 && t[1].abs() < 1e-12 && t[2].abs() < 1e-12);
    }

    #[test]
    fn scan_and_labels_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let pts = vec![
            Point3::sensor(1.5f64, -2.25, 0.125),
            Point3::sensor(0.0, 0.0, 0.0),
        ];
        let path = dir.path().join("000000.bin");
        write_scan_bin(&path, &pts).unwrap();
        assert_eq!(read_scan_bin::<f64>(&path).unwrap().0, pts);
        let lpath = dir.path().join("000000.label");
        write_labels(&lpath, &[40, 252]).unwrap();
        assert_eq!(read_labels(&lpath).unwrap(), vec![40, 252]);
        assert!(read_scan_bin::<f64>(&dir.path().join("missing.bin")).is_err());
    }

    #[test]
    fn range_filter_keeps_labels_aligned() {
        let mut scan = ScanFrame::new(
            0,
            vec![
                Point3::sensor(0.5f64, 0.0, 0.0),
                Point3::sensor(5.0, 0.0, 0.0),
                Point3::sensor(200.0, 0.0, 0.0),
            ],
            RigidPose::identity(),
            Some(vec![1, 2, 3]),
        )
        .unwrap();
        let diag = RangeFilter {
            min_range: Some(1.0),
            max_range: Some(100.0),
        }
        .apply(&mut scan);
        assert_eq!(diag.out_of_range, 2);
        assert_eq!(scan.labels, Some(vec![2]));
        assert_eq!(scan.points.len(), 1);
    }
}
