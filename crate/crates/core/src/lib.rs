//! Online removal of dynamic objects from LiDAR point-cloud maps.
//!
//! The XY plane is cut into fixed pillars anchored at a global origin. Inside
//! each pillar the heights observed by a scan are grouped into intervals, and
//! every interval of the global map carries the probability that it is
//! statically occupied. New scans refine and re-weight those intervals with a
//! binary Bayes filter; points that end up inside likely-static intervals are
//! kept, everything else is treated as dynamic.
//!
//! All numeric code is generic over [`Real`] (`f32` or `f64`); the `*F64`
//! and `*F32` aliases below name the common instantiations.

pub mod bayes;
pub mod dataset_io;
pub mod error;
pub mod evaluation;
pub mod global_map;
pub mod interval_builder;
pub mod model;
pub mod pillar_index;
pub mod scalar;
pub mod synthetic;

pub use bayes::{bayes_filter, fuse_pillar, OverlapCase};
pub use dataset_io::{load_config, RunConfig, SequenceSpec};
pub use error::{HifError, Result};
pub use evaluation::{
    emit_report, runtime_stats, score, AccuracyReport, GroundTruth, ReportFormat, RuntimeReport,
};
pub use global_map::{GlobalHeightMap, IntegrationRecord, PointClass};
pub use model::{
    transform_to_world, Frame, HeightInterval, HifConfig, IngestDiagnostics, Pillar, PillarKey,
    Point3, RigidPose, ScanFrame,
};
pub use scalar::Real;
pub use synthetic::{gen_scene, grid_oracle, SceneSpec};

pub type Point3F64 = Point3<f64>;
pub type Point3F32 = Point3<f32>;
pub type RigidPoseF64 = RigidPose<f64>;
pub type RigidPoseF32 = RigidPose<f32>;
pub type ScanFrameF64 = ScanFrame<f64>;
pub type ScanFrameF32 = ScanFrame<f32>;
pub type HeightIntervalF64 = HeightInterval<f64>;
pub type HeightIntervalF32 = HeightInterval<f32>;
pub type PillarF64 = Pillar<f64>;
pub type PillarF32 = Pillar<f32>;
pub type HifConfigF64 = HifConfig<f64>;
pub type HifConfigF32 = HifConfig<f32>;
pub type GlobalHeightMapF64 = GlobalHeightMap<f64>;
pub type GlobalHeightMapF32 = GlobalHeightMap<f32>;
