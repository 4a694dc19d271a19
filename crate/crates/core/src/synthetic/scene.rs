use serde::Deserialize;

use super::rng::scan_stream;
use crate::dataset_io::ground_truth;
use crate::error::{HifError, Result};
use crate::evaluation::GroundTruth;
use crate::model::{Point3, RigidPose, ScanFrame};
use crate::scalar::Real;

/// SemanticKITTI "road".
pub const GROUND_LABEL: u32 = 40;
/// SemanticKITTI "building".
pub const STRUCTURE_LABEL: u32 = 50;
/// SemanticKITTI "moving-car".
pub const MOVING_LABEL: u32 = 252;

fn ground_label() -> u32 {
    GROUND_LABEL
}
fn structure_label() -> u32 {
    STRUCTURE_LABEL
}
fn moving_label() -> u32 {
    MOVING_LABEL
}
fn default_min_range() -> f64 {
    1.0
}
fn default_max_range() -> f64 {
    60.0
}
fn default_azimuth_max() -> f64 {
    360.0
}

/// A spinning multi-beam sensor on a linear trajectory.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorSpec {
    /// Position at scan 0.
    pub start: [f64; 3],
    /// Displacement per scan.
    #[serde(default)]
    pub velocity: [f64; 3],
    /// Heading in radians (rotation about +z).
    #[serde(default)]
    pub yaw: f64,
    pub beams: usize,
    pub elevation_min_deg: f64,
    pub elevation_max_deg: f64,
    pub azimuth_step_deg: f64,
    /// Horizontal field of view `[azimuth_min_deg, azimuth_max_deg)`,
    /// measured counter-clockwise from the heading.
    #[serde(default)]
    pub azimuth_min_deg: f64,
    #[serde(default = "default_azimuth_max")]
    pub azimuth_max_deg: f64,
    #[serde(default = "default_min_range")]
    pub min_range: f64,
    #[serde(default = "default_max_range")]
    pub max_range: f64,
}

/// Horizontal plane `z` bounded by `[x_min, x_max] x [y_min, y_max]`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundSpec {
    pub z: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    #[serde(default = "ground_label")]
    pub label: u32,
}

/// Axis-aligned static box (walls, buildings, parked objects).
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub min: [f64; 3],
    pub max: [f64; 3],
    #[serde(default = "structure_label")]
    pub label: u32,
}

/// Axis-aligned box translating by `velocity` every scan.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MovingBoxSpec {
    /// Corners at scan 0.
    pub min: [f64; 3],
    pub max: [f64; 3],
    pub velocity: [f64; 3],
    #[serde(default = "moving_label")]
    pub label: u32,
}

/// A synthetic scene: geometry, sensor, scan count and range jitter.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub scans: usize,
    #[serde(default)]
    pub seed: u64,
    /// Standard deviation of the Gaussian range noise, in metres.
    #[serde(default)]
    pub jitter_sigma: f64,
    pub sensor: SensorSpec,
    pub ground: Option<GroundSpec>,
    #[serde(default)]
    pub static_boxes: Vec<BoxSpec>,
    #[serde(default)]
    pub moving_boxes: Vec<MovingBoxSpec>,
}

fn scene_err(key: &str, reason: &str) -> HifError {
    HifError::config(&format!("scene.{key}"), reason)
}

fn check_box(key: &str, min: &[f64; 3], max: &[f64; 3]) -> Result<()> {
    if min.iter().chain(max).any(|v| !v.is_finite()) {
        return Err(scene_err(key, "corners must be finite"));
    }
    if (0..3).any(|i| min[i] >= max[i]) {
        return Err(scene_err(key, "min must be below max on every axis"));
    }
    Ok(())
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let s = &self.sensor;
        if self.scans == 0 {
            return Err(scene_err("scans", "must be at least 1"));
        }
        if s.beams == 0 {
            return Err(scene_err("sensor.beams", "must be at least 1"));
        }
        if !(s.azimuth_step_deg > 0.0 && s.azimuth_step_deg <= 360.0) {
            return Err(scene_err("sensor.azimuth_step_deg", "must be in (0, 360]"));
        }
        if !(s.azimuth_min_deg.is_finite()
            && s.azimuth_max_deg.is_finite()
            && s.azimuth_min_deg < s.azimuth_max_deg
            && s.azimuth_max_deg - s.azimuth_min_deg <= 360.0)
        {
            return Err(scene_err(
                "sensor.azimuth_max_deg",
                "field of view must satisfy min < max <= min + 360",
            ));
        }
        if !(s.elevation_min_deg.is_finite()
            && s.elevation_max_deg.is_finite()
            && s.elevation_min_deg <= s.elevation_max_deg
            && s.elevation_min_deg > -90.0
            && s.elevation_max_deg < 90.0)
        {
            return Err(scene_err(
                "sensor.elevation_min_deg",
                "elevations must satisfy -90 < min <= max < 90",
            ));
        }
        if !(s.min_range >= 0.0 && s.min_range < s.max_range && s.max_range.is_finite()) {
            return Err(scene_err(
                "sensor.max_range",
                "need 0 <= min_range < max_range",
            ));
        }
        if s.start
            .iter()
            .chain(&s.velocity)
            .chain([&s.yaw])
            .any(|v| !v.is_finite())
        {
            return Err(scene_err("sensor.start", "pose values must be finite"));
        }
        if !(self.jitter_sigma >= 0.0 && self.jitter_sigma.is_finite()) {
            return Err(scene_err("jitter_sigma", "must be finite and non-negative"));
        }
        if self.ground.is_none() && self.static_boxes.is_empty() && self.moving_boxes.is_empty() {
            return Err(scene_err("ground", "scene has no geometry"));
        }
        if let Some(g) = &self.ground {
            if !(g.z.is_finite() && g.x_min < g.x_max && g.y_min < g.y_max) {
                return Err(scene_err("ground", "needs finite z and a non-empty extent"));
            }
            if ground_truth(g.label) != GroundTruth::Static {
                return Err(scene_err("ground.label", "must be a static class"));
            }
        }
        for b in &self.static_boxes {
            check_box("static_boxes", &b.min, &b.max)?;
            if ground_truth(b.label) != GroundTruth::Static {
                return Err(scene_err("static_boxes.label", "must be a static class"));
            }
        }
        for b in &self.moving_boxes {
            check_box("moving_boxes", &b.min, &b.max)?;
            if b.velocity.iter().any(|v| !v.is_finite()) {
                return Err(scene_err("moving_boxes.velocity", "must be finite"));
            }
            if ground_truth(b.label) != GroundTruth::Dynamic {
                return Err(scene_err("moving_boxes.label", "must be a moving class"));
            }
        }
        Ok(())
    }

    /// Sensor position at scan `k`.
    pub fn sensor_position(&self, k: usize) -> [f64; 3] {
        let s = &self.sensor;
        std::array::from_fn(|i| s.start[i] + k as f64 * s.velocity[i])
    }

    /// Street scene: ground between two 2.5 m walls at y = ±8, a slowly
    /// moving sensor and a 2 x 2 x 1.5 m box passing it at 1 m per scan.
    pub fn street() -> Self {
        Self {
            scans: 50,
            seed: 0,
            jitter_sigma: 0.01,
            sensor: SensorSpec {
                start: [-5.0, 0.0, 1.73],
                velocity: [0.2, 0.0, 0.0],
                yaw: 0.0,
                beams: 64,
                elevation_min_deg: -25.0,
                elevation_max_deg: 15.0,
                azimuth_step_deg: 0.5,
                azimuth_min_deg: 0.0,
                azimuth_max_deg: 360.0,
                min_range: 1.0,
                max_range: 40.0,
            },
            ground: Some(GroundSpec {
                z: 0.0,
                x_min: -45.0,
                x_max: 45.0,
                y_min: -8.0,
                y_max: 8.0,
                label: GROUND_LABEL,
            }),
            static_boxes: vec![
                BoxSpec {
                    min: [-45.0, 7.5, 0.0],
                    max: [45.0, 7.8, 2.5],
                    label: STRUCTURE_LABEL,
                },
                BoxSpec {
                    min: [-45.0, -7.8, 0.0],
                    max: [45.0, -7.5, 2.5],
                    label: STRUCTURE_LABEL,
                },
            ],
            moving_boxes: vec![MovingBoxSpec {
                min: [-26.0, 2.5, 0.0],
                max: [-24.0, 4.5, 1.5],
                velocity: [1.0, 0.0, 0.0],
                label: MOVING_LABEL,
            }],
        }
    }

    /// Occlusion scene: a parked sensor with a 90 degree field of view looks
    /// at a wall 15 m ahead while a box crawls across 4 m in front of it,
    /// shadowing the wall base and the ground behind it.
    pub fn occlusion() -> Self {
        Self {
            scans: 50,
            seed: 0,
            jitter_sigma: 0.01,
            sensor: SensorSpec {
                start: [0.0, 0.0, 1.73],
                velocity: [0.0, 0.0, 0.0],
                yaw: 0.0,
                beams: 64,
                elevation_min_deg: -25.0,
                elevation_max_deg: 15.0,
                azimuth_step_deg: 0.5,
                azimuth_min_deg: -45.0,
                azimuth_max_deg: 45.0,
                min_range: 1.0,
                max_range: 40.0,
            },
            ground: Some(GroundSpec {
                z: 0.0,
                x_min: -20.0,
                x_max: 15.0,
                y_min: -12.0,
                y_max: 12.0,
                label: GROUND_LABEL,
            }),
            static_boxes: vec![BoxSpec {
                min: [15.0, -12.0, 0.0],
                max: [15.5, 12.0, 3.0],
                label: STRUCTURE_LABEL,
            }],
            moving_boxes: vec![MovingBoxSpec {
                min: [4.0, -4.0, 0.0],
                max: [6.0, -2.0, 1.5],
                velocity: [0.0, 0.1, 0.0],
                label: MOVING_LABEL,
            }],
        }
    }
}

#[derive(Clone, Copy)]
struct Aabb {
    min: [f64; 3],
    max: [f64; 3],
    label: u32,
}

impl Aabb {
    /// Entry distance of a ray starting outside the box.
    fn hit(&self, o: &[f64; 3], d: &[f64; 3]) -> Option<f64> {
        let mut t0 = 0.0f64;
        let mut t1 = f64::INFINITY;
        for i in 0..3 {
            if d[i] == 0.0 {
                if o[i] < self.min[i] || o[i] > self.max[i] {
                    return None;
                }
                continue;
            }
            let inv = 1.0 / d[i];
            let (a, b) = {
                let a = (self.min[i] - o[i]) * inv;
                let b = (self.max[i] - o[i]) * inv;
                if a <= b {
                    (a, b)
                } else {
                    (b, a)
                }
            };
            t0 = t0.max(a);
            t1 = t1.min(b);
            if t0 > t1 {
                return None;
            }
        }
        (t0 > 0.0).then_some(t0)
    }
}

fn beam_directions(s: &SensorSpec) -> Vec<[f64; 3]> {
    let span = s.azimuth_max_deg - s.azimuth_min_deg;
    let azimuths = (span / s.azimuth_step_deg - 1e-9).ceil().max(1.0) as usize;
    let mut dirs = Vec::with_capacity(s.beams * azimuths);
    for b in 0..s.beams {
        let e = if s.beams == 1 {
            s.elevation_min_deg
        } else {
            s.elevation_min_deg
                + (s.elevation_max_deg - s.elevation_min_deg) * b as f64 / (s.beams - 1) as f64
        }
        .to_radians();
        for a in 0..azimuths {
            let az = (s.azimuth_min_deg + a as f64 * s.azimuth_step_deg).to_radians();
            dirs.push([e.cos() * az.cos(), e.cos() * az.sin(), e.sin()]);
        }
    }
    dirs
}

/// Ray-casts every scan of `spec`. Each ray keeps its nearest hit within
/// the sensor's range window, so moving boxes shadow whatever lies behind
/// them. Points are returned in the sensor frame with the true pose and
/// per-point labels; range noise is drawn from the scan's own substream of
/// `seed`, one normal per hit in beam-major order.
pub fn gen_scene<S: Real>(spec: &SceneSpec, seed: u64) -> Result<Vec<ScanFrame<S>>> {
    spec.validate()?;
    let s = &spec.sensor;
    let dirs = beam_directions(s);
    let (sin_y, cos_y) = s.yaw.sin_cos();
    let rotate = |d: &[f64; 3]| {
        [
            cos_y * d[0] - sin_y * d[1],
            sin_y * d[0] + cos_y * d[1],
            d[2],
        ]
    };
    let world_dirs: Vec<[f64; 3]> = dirs.iter().map(rotate).collect();

    let mut frames = Vec::with_capacity(spec.scans);
    for k in 0..spec.scans {
        let origin = spec.sensor_position(k);
        let mut boxes: Vec<Aabb> = spec
            .static_boxes
            .iter()
            .map(|b| Aabb {
                min: b.min,
                max: b.max,
                label: b.label,
            })
            .collect();
        boxes.extend(spec.moving_boxes.iter().map(|b| {
            let shift = |c: &[f64; 3]| std::array::from_fn(|i| c[i] + k as f64 * b.velocity[i]);
            Aabb {
                min: shift(&b.min),
                max: shift(&b.max),
                label: b.label,
            }
        }));

        let mut rng = scan_stream(seed, k as u64);
        let mut points = Vec::new();
        let mut labels = Vec::new();
        for (d_s, d_w) in dirs.iter().zip(&world_dirs) {
            let mut best: Option<(f64, u32)> = None;
            if let Some(g) = &spec.ground {
                if d_w[2] < 0.0 {
                    let t = (g.z - origin[2]) / d_w[2];
                    let x = origin[0] + t * d_w[0];
                    let y = origin[1] + t * d_w[1];
                    if t > 0.0 && g.x_min <= x && x <= g.x_max && g.y_min <= y && y <= g.y_max {
                        best = Some((t, g.label));
                    }
                }
            }
            for b in &boxes {
                if let Some(t) = b.hit(&origin, d_w) {
                    if best.is_none_or(|(bt, _)| t < bt) {
                        best = Some((t, b.label));
                    }
                }
            }
            let Some((t, label)) = best else { continue };
            if t < s.min_range || t > s.max_range {
                continue;
            }
            let r = t + spec.jitter_sigma * rng.normal();
            points.push(Point3::sensor(
                S::lit(d_s[0] * r),
                S::lit(d_s[1] * r),
                S::lit(d_s[2] * r),
            ));
            labels.push(label);
        }
        let pose = RigidPose::from_yaw(
            S::lit(s.yaw),
            [S::lit(origin[0]), S::lit(origin[1]), S::lit(origin[2])],
        );
        frames.push(ScanFrame::new(k as u64, points, pose, Some(labels))?);
    }
    Ok(frames)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::transform_to_world;

    fn ground_only() -> SceneSpec {
        SceneSpec {
            scans: 1,
            moving_boxes: vec![],
            static_boxes: vec![],
            ..SceneSpec::street()
        }
    }

    #[test]
    fn ground_only_scan_is_flat_and_static() {
        let frames = gen_scene::<f64>(&ground_only(), 3).unwrap();
        assert_eq!(frames.len(), 1);
        let (world, _) = transform_to_world(&frames[0]);
        assert!(!world.points.is_empty());
        assert!(
            world.points.iter().all(|p| p.z.abs() < 0.1),
            "ground jitter too large"
        );
        assert!(world.labels.unwrap().iter().all(|l| *l == GROUND_LABEL));
    }

    #[test]
    fn deterministic_for_seed() {
        let spec = SceneSpec {
            scans: 3,
            ..SceneSpec::street()
        };
        let a = gen_scene::<f64>(&spec, 11).unwrap();
        let b = gen_scene::<f64>(&spec, 11).unwrap();
        let c = gen_scene::<f64>(&spec, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let f32_frames = gen_scene::<f32>(&spec, 11).unwrap();
        assert_eq!(f32_frames[0].points.len(), a[0].points.len());
    }

    #[test]
    fn moving_box_shadows_ground() {
        // Sensor at the origin, box crossing a 20 m ground patch.
        let spec = SceneSpec {
            scans: 50,
            seed: 0,
            jitter_sigma: 0.0,
            sensor: SensorSpec {
                start: [0.0, 0.0, 1.73],
                ..SceneSpec::occlusion().sensor
            },
            ground: Some(GroundSpec {
                z: 0.0,
                x_min: -10.0,
                x_max: 10.0,
                y_min: -10.0,
                y_max: 10.0,
                label: GROUND_LABEL,
            }),
            static_boxes: vec![],
            moving_boxes: vec![MovingBoxSpec {
                min: [4.0, -10.0, 0.0],
                max: [6.0, -8.0, 1.5],
                velocity: [0.0, 0.4, 0.0],
                label: MOVING_LABEL,
            }],
        };
        let frames = gen_scene::<f64>(&spec, 0).unwrap();
        for (k, frame) in frames.iter().enumerate() {
            let (world, _) = transform_to_world(frame);
            let labels = world.labels.as_ref().unwrap();
            let y0 = -10.0 + 0.4 * k as f64;
            for (p, l) in world.points.iter().zip(labels) {
                let in_box = (4.0 - 1e-6..=6.0 + 1e-6).contains(&p.x)
                    && (y0 - 1e-6..=y0 + 2.0 + 1e-6).contains(&p.y)
                    && p.z <= 1.5 + 1e-6;
                assert_eq!(*l == MOVING_LABEL, in_box, "scan {k} point {p:?}");
                if *l == GROUND_LABEL {
                    // Nothing directly behind the box from the sensor's view.
                    let behind = p.x > 6.0 + 1e-6 && {
                        let ang = p.y.atan2(p.x);
                        let lo = (y0 + 0.05).atan2(6.0).min((y0 + 0.05).atan2(4.0));
                        let hi = (y0 + 1.95).atan2(6.0).max((y0 + 1.95).atan2(4.0));
                        lo < ang && ang < hi
                    };
                    assert!(!behind, "scan {k}: ground visible through box at {p:?}");
                }
            }
        }
        let box_hits: usize = frames
            .iter()
            .map(|f| {
                f.labels
                    .as_ref()
                    .unwrap()
                    .iter()
                    .filter(|l| **l == MOVING_LABEL)
                    .count()
            })
            .sum();
        assert!(box_hits > 0);
    }

    #[test]
    fn degenerate_specs_are_rejected() {
        let mut spec = SceneSpec::street();
        spec.scans = 0;
        assert!(gen_scene::<f64>(&spec, 0).is_err());

        let spec = SceneSpec {
            ground: None,
            static_boxes: vec![],
            moving_boxes: vec![],
            ..SceneSpec::street()
        };
        assert!(gen_scene::<f64>(&spec, 0).is_err());

        let mut spec = SceneSpec::street();
        spec.moving_boxes[0].label = STRUCTURE_LABEL;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn presets_are_valid() {
        SceneSpec::street().validate().unwrap();
        SceneSpec::occlusion().validate().unwrap();
    }
}
