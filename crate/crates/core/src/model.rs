//! Domain types shared by the pillar index, the interval filter and the
//! dataset readers.

use std::hash::{Hash, Hasher};

use crate::error::{HifError, Result};
use crate::pillar_index::mix_hash;
use crate::scalar::Real;

/// Coordinate frame a point is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Frame {
    Sensor,
    World,
}

/// One LiDAR return, in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point3<S> {
    pub x: S,
    pub y: S,
    pub z: S,
    pub frame: Frame,
}

impl<S: Real> Point3<S> {
    pub fn new(x: S, y: S, z: S, frame: Frame) -> Self {
        Self { x, y, z, frame }
    }

    pub fn sensor(x: S, y: S, z: S) -> Self {
        Self::new(x, y, z, Frame::Sensor)
    }

    pub fn world(x: S, y: S, z: S) -> Self {
        Self::new(x, y, z, Frame::World)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn distance(&self, other: &Self) -> S {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    pub fn norm(&self) -> S {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }
}

/// Row-major 3x3 matrix.
pub type Mat3<S> = [[S; 3]; 3];

/// Rigid transform mapping sensor coordinates into the world frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidPose<S> {
    rotation: Mat3<S>,
    translation: [S; 3],
}

/// Maximum deviation of `R^T R` from identity (and of `det R` from 1)
/// accepted for a rotation.
pub const ROTATION_TOLERANCE: f64 = 1e-6;

impl<S: Real> RigidPose<S> {
    pub fn identity() -> Self {
        let (o, z) = (S::one(), S::zero());
        Self {
            rotation: [[o, z, z], [z, o, z], [z, z, o]],
            translation: [z; 3],
        }
    }

    pub fn new(rotation: Mat3<S>, translation: [S; 3]) -> Result<Self> {
        let residual = orthonormality_residual(&rotation);
        if residual > ROTATION_TOLERANCE || !translation.iter().all(|t| t.is_finite()) {
            return Err(HifError::Validation(format!(
                "rotation is not orthonormal (residual {residual:.3e})"
            )));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn from_translation(translation: [S; 3]) -> Self {
        Self {
            translation,
            ..Self::identity()
        }
    }

    /// Rotation of `angle` radians about the world z axis.
    pub fn from_yaw(angle: S, translation: [S; 3]) -> Self {
        let (s, c) = angle.sin_cos();
        let (o, z) = (S::one(), S::zero());
        Self {
            rotation: [[c, -s, z], [s, c, z], [z, z, o]],
            translation,
        }
    }

    pub fn rotation(&self) -> &Mat3<S> {
        &self.rotation
    }

    pub fn translation(&self) -> &[S; 3] {
        &self.translation
    }

    pub fn apply(&self, p: [S; 3]) -> [S; 3] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            r[0][0] * p[0] + r[0][1] * p[1] + r[0][2] * p[2] + t[0],
            r[1][0] * p[0] + r[1][1] * p[1] + r[1][2] * p[2] + t[1],
            r[2][0] * p[0] + r[2][1] * p[1] + r[2][2] * p[2] + t[2],
        ]
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Self) -> Self {
        let rotation = mat_mul(&self.rotation, &other.rotation);
        let moved = self.apply(other.translation);
        Self {
            rotation,
            translation: moved,
        }
    }

    pub fn inverse(&self) -> Self {
        let rt = transpose(&self.rotation);
        let t = &self.translation;
        let mut translation = [S::zero(); 3];
        for (i, out) in translation.iter_mut().enumerate() {
            *out = -(rt[i][0] * t[0] + rt[i][1] * t[1] + rt[i][2] * t[2]);
        }
        Self {
            rotation: rt,
            translation,
        }
    }
}

pub(crate) fn mat_mul<S: Real>(a: &Mat3<S>, b: &Mat3<S>) -> Mat3<S> {
    let mut out = [[S::zero(); 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    out
}

pub(crate) fn transpose<S: Real>(a: &Mat3<S>) -> Mat3<S> {
    let mut out = *a;
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = a[j][i];
        }
    }
    out
}

pub(crate) fn determinant<S: Real>(a: &Mat3<S>) -> S {
    a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
        - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
}

/// Largest absolute deviation of `R^T R` from identity and of `det R` from 1.
pub fn orthonormality_residual<S: Real>(r: &Mat3<S>) -> f64 {
    if !r.iter().flatten().all(|v| v.is_finite()) {
        return f64::INFINITY;
    }
    let rtr = mat_mul(&transpose(r), r);
    let mut worst = 0.0f64;
    for (i, row) in rtr.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            let expect = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((v.as_f64() - expect).abs());
        }
    }
    worst.max((determinant(r).as_f64() - 1.0).abs())
}

/// One LiDAR sweep with its pose and optional per-point class identifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanFrame<S> {
    pub index: u64,
    pub points: Vec<Point3<S>>,
    pub pose: RigidPose<S>,
    pub labels: Option<Vec<u32>>,
}

impl<S: Real> ScanFrame<S> {
    pub fn new(
        index: u64,
        points: Vec<Point3<S>>,
        pose: RigidPose<S>,
        labels: Option<Vec<u32>>,
    ) -> Result<Self> {
        if let Some(labels) = &labels {
            if labels.len() != points.len() {
                return Err(HifError::LabelMismatch {
                    labels: labels.len(),
                    points: points.len(),
                });
            }
        }
        Ok(Self {
            index,
            points,
            pose,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Counters for points dropped while bringing data into the pipeline.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IngestDiagnostics {
    pub non_finite: usize,
    pub out_of_range: usize,
}

impl IngestDiagnostics {
    pub fn total(&self) -> usize {
        self.non_finite + self.out_of_range
    }

    pub fn absorb(&mut self, other: IngestDiagnostics) {
        self.non_finite += other.non_finite;
        self.out_of_range += other.out_of_range;
    }
}

/// Maps every sensor-frame point through the scan pose. Points that become
/// non-finite are dropped (together with their label) and counted.
pub fn transform_to_world<S: Real>(scan: &ScanFrame<S>) -> (ScanFrame<S>, IngestDiagnostics) {
    let mut diag = IngestDiagnostics::default();
    let mut points = Vec::with_capacity(scan.points.len());
    let mut labels = scan.labels.as_ref().map(|l| Vec::with_capacity(l.len()));
    for (i, p) in scan.points.iter().enumerate() {
        let [x, y, z] = if p.frame == Frame::World {
            [p.x, p.y, p.z]
        } else {
            scan.pose.apply([p.x, p.y, p.z])
        };
        let moved = Point3::world(x, y, z);
        if !moved.is_finite() {
            diag.non_finite += 1;
            continue;
        }
        points.push(moved);
        if let (Some(out), Some(src)) = (labels.as_mut(), scan.labels.as_ref()) {
            out.push(src[i]);
        }
    }
    (
        ScanFrame {
            index: scan.index,
            points,
            pose: scan.pose,
            labels,
        },
        diag,
    )
}

/// Vertical extent `[b, t]` with the probability that it is statically occupied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeightInterval<S> {
    pub b: S,
    pub t: S,
    pub p: S,
}

impl<S: Real> HeightInterval<S> {
    pub fn new(b: S, t: S, p: S) -> Self {
        debug_assert!(b <= t, "interval bounds out of order");
        Self { b, t, p }
    }

    pub fn len(&self) -> S {
        self.t - self.b
    }

    pub fn is_degenerate(&self) -> bool {
        self.b == self.t
    }

    /// Closed containment widened by `tol` on both sides.
    pub fn contains(&self, z: S, tol: S) -> bool {
        self.b - tol <= z && z <= self.t + tol
    }
}

/// Per-pillar state: the occupancy probability of unobserved vertical space
/// plus a sorted list of height intervals with disjoint interiors.
#[derive(Debug, Clone, PartialEq)]
pub struct Pillar<S> {
    pub p_empty: S,
    pub intervals: Vec<HeightInterval<S>>,
}

impl<S: Real> Pillar<S> {
    pub fn new(p_empty: S, intervals: Vec<HeightInterval<S>>) -> Self {
        Self { p_empty, intervals }
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Checks sortedness, bound order, interior disjointness and the
    /// probability range of every interval.
    pub fn check_invariants(&self) -> Result<()> {
        for (i, h) in self.intervals.iter().enumerate() {
            if !(h.b.is_finite() && h.t.is_finite()) || h.b > h.t {
                return Err(HifError::Invariant(format!(
                    "interval {i} has bounds [{}, {}]",
                    h.b, h.t
                )));
            }
            if !(h.p >= S::zero() && h.p <= S::one()) {
                return Err(HifError::Invariant(format!(
                    "interval {i} has probability {}",
                    h.p
                )));
            }
        }
        for (i, pair) in self.intervals.windows(2).enumerate() {
            if pair[0].t > pair[1].b {
                return Err(HifError::Invariant(format!(
                    "intervals {i} and {} overlap or are unsorted: [{}, {}] then [{}, {}]",
                    i + 1,
                    pair[0].b,
                    pair[0].t,
                    pair[1].b,
                    pair[1].t
                )));
            }
        }
        Ok(())
    }
}

/// Integer pillar offsets together with their mixed hash. Equality and
/// ordering use `(m, n)` only; the hash just feeds the table.
#[derive(Debug, Clone, Copy)]
pub struct PillarKey {
    pub m: i64,
    pub n: i64,
    hash: u64,
}

impl PillarKey {
    pub fn new(m: i64, n: i64) -> Self {
        Self {
            m,
            n,
            hash: mix_hash(m, n),
        }
    }

    /// Builds a key with an arbitrary hash value. Lookups stay correct for
    /// any hash; this exists to exercise collision handling.
    pub fn with_hash(m: i64, n: i64, hash: u64) -> Self {
        Self { m, n, hash }
    }

    pub fn hash_value(&self) -> u64 {
        self.hash
    }
}

impl PartialEq for PillarKey {
    fn eq(&self, other: &Self) -> bool {
        self.m == other.m && self.n == other.n
    }
}

impl Eq for PillarKey {}

impl Hash for PillarKey {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u64(self.hash);
    }
}

impl PartialOrd for PillarKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for PillarKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.m, self.n).cmp(&(other.m, other.n))
    }
}

/// Parameters of the height interval filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HifConfig<S> {
    pub origin_x: S,
    pub origin_y: S,
    /// Pillar side length along x, meters.
    pub dx: S,
    /// Pillar side length along y, meters.
    pub dy: S,
    /// Evidence weight for the static hypothesis when an interval is seen.
    pub alpha: S,
    /// Evidence weight for the dynamic hypothesis when an interval is seen.
    pub beta: S,
    /// Vertical gap above which consecutive heights start a new interval.
    pub gap_threshold: S,
    /// Slack applied to interval containment and overlap tests, meters.
    pub containment_tolerance: S,
    /// Minimum probability for a point to be kept as static.
    pub static_threshold: S,
    /// Prior for new pillars and intervals.
    pub p_init: S,
    pub clip_lo: S,
    pub clip_hi: S,
    /// Low-height preservation toggle.
    pub lhp_enabled: bool,
    /// Touching intervals whose probabilities differ by at most this are merged.
    pub compaction_epsilon: S,
}

impl<S: Real> Default for HifConfig<S> {
    fn default() -> Self {
        Self {
            origin_x: S::zero(),
            origin_y: S::zero(),
            dx: S::one(),
            dy: S::one(),
            alpha: S::lit(0.7),
            beta: S::lit(0.3),
            gap_threshold: S::lit(0.5),
            containment_tolerance: S::lit(0.1),
            static_threshold: S::lit(0.5),
            p_init: S::lit(0.5),
            clip_lo: S::lit(0.1),
            clip_hi: S::lit(0.9),
            lhp_enabled: true,
            compaction_epsilon: S::lit(0.01),
        }
    }
}

impl<S: Real> HifConfig<S> {
    pub fn validate(&self) -> Result<()> {
        let (zero, one, half) = (S::zero(), S::one(), S::lit(0.5));
        let finite = [
            ("origin_x", self.origin_x),
            ("origin_y", self.origin_y),
            ("dx", self.dx),
            ("dy", self.dy),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gap_threshold", self.gap_threshold),
            ("containment_tolerance", self.containment_tolerance),
            ("static_threshold", self.static_threshold),
            ("p_init", self.p_init),
            ("clip_lo", self.clip_lo),
            ("clip_hi", self.clip_hi),
            ("compaction_epsilon", self.compaction_epsilon),
        ];
        for (key, v) in finite {
            if !v.is_finite() {
                return Err(HifError::config(key, "must be finite"));
            }
        }
        if self.dx <= zero {
            return Err(HifError::config("dx", "must be > 0"));
        }
        if self.dy <= zero {
            return Err(HifError::config("dy", "must be > 0"));
        }
        if !(self.alpha > half && self.alpha < one) {
            return Err(HifError::config("alpha", "must lie in (0.5, 1)"));
        }
        if !(self.beta > zero && self.beta < half) {
            return Err(HifError::config("beta", "must lie in (0, 0.5)"));
        }
        if self.gap_threshold <= zero {
            return Err(HifError::config("gap_threshold", "must be > 0"));
        }
        if self.containment_tolerance < zero {
            return Err(HifError::config("containment_tolerance", "must be >= 0"));
        }
        if !(self.static_threshold > zero && self.static_threshold < one) {
            return Err(HifError::config("static_threshold", "must lie in (0, 1)"));
        }
        if !(self.p_init >= zero && self.p_init <= one) {
            return Err(HifError::config("p_init", "must lie in [0, 1]"));
        }
        if !(self.clip_lo > zero && self.clip_lo < self.clip_hi) {
            return Err(HifError::config(
                "clip_lo",
                "must satisfy 0 < clip_lo < clip_hi",
            ));
        }
        if self.clip_hi >= one {
            return Err(HifError::config("clip_hi", "must be < 1"));
        }
        if self.compaction_epsilon < zero {
            return Err(HifError::config("compaction_epsilon", "must be >= 0"));
        }
        Ok(())
    }

    /// Converts every field to another scalar type.
    pub fn cast<T: Real>(&self) -> HifConfig<T> {
        let c = |v: S| T::lit(v.as_f64());
        HifConfig {
            origin_x: c(self.origin_x),
            origin_y: c(self.origin_y),
            dx: c(self.dx),
            dy: c(self.dy),
            alpha: c(self.alpha),
            beta: c(self.beta),
            gap_threshold: c(self.gap_threshold),
            containment_tolerance: c(self.containment_tolerance),
            static_threshold: c(self.static_threshold),
            p_init: c(self.p_init),
            clip_lo: c(self.clip_lo),
            clip_hi: c(self.clip_hi),
            lhp_enabled: self.lhp_enabled,
            compaction_epsilon: c(self.compaction_epsilon),
        }
    }

    pub fn clip(&self, p: S) -> S {
        self.clip_lo.max(self.clip_hi.min(p))
    }
}
