//! Deterministic synthetic scenes with perfect labels, and a dense-grid
//! reference implementation of the interval update used to check
//! [`fuse_pillar`](crate::bayes::fuse_pillar).

mod oracle;
mod rng;
mod scene;

pub use oracle::{
    compare_with_oracle, grid_oracle, random_scenario, GridOracle, OracleComparison,
    PillarScenario, ORACLE_RESOLUTION, SCENARIO_Z_RANGE,
};
pub use rng::{scan_stream, JitterRng};
pub use scene::{
    gen_scene, BoxSpec, GroundSpec, MovingBoxSpec, SceneSpec, SensorSpec, GROUND_LABEL,
    MOVING_LABEL, STRUCTURE_LABEL,
};
