//! Globally consistent pillar partitioning of the XY plane and the mixed
//! hash used to key pillars.

use std::collections::HashMap;
use std::hash::{BuildHasherDefault, Hasher};

use crate::model::{HifConfig, PillarKey, Point3};
use crate::scalar::Real;

/// 64-bit golden-ratio constant used when combining the per-axis hashes.
pub const GOLDEN_64: u64 = 0x9E37_79B9_7F4A_7C15;

/// Avalanche mix of one sign-extended integer (SplitMix64 finalizer).
pub fn int_hash(v: i64) -> u64 {
    let mut z = v as u64;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `h(m) ^ (h(n) + C + (h(m) << 6) + (h(m) >> 2))` in wrapping 64-bit arithmetic.
pub fn mix_hash(m: i64, n: i64) -> u64 {
    let hm = int_hash(m);
    let hn = int_hash(n);
    hm ^ hn
        .wrapping_add(GOLDEN_64)
        .wrapping_add(hm << 6)
        .wrapping_add(hm >> 2)
}

/// Hasher that forwards the precomputed pillar hash unchanged.
#[derive(Debug, Default, Clone, Copy)]
pub struct PillarHasher(u64);

impl Hasher for PillarHasher {
    fn finish(&self) -> u64 {
        self.0
    }

    fn write(&mut self, bytes: &[u8]) {
        // only reached if something other than a PillarKey is hashed
        for &b in bytes {
            self.0 = self.0.rotate_left(8) ^ u64::from(b);
        }
    }

    fn write_u64(&mut self, v: u64) {
        self.0 = v;
    }
}

pub type BuildPillarHasher = BuildHasherDefault<PillarHasher>;

/// Hash table keyed by pillar; lookups confirm `(m, n)` exactly.
pub type PillarTable<V> = HashMap<PillarKey, V, BuildPillarHasher>;

/// Lower pillar bound `o + k·d` along one axis.
fn lower_edge<S: Real>(origin: S, step: S, k: i64) -> S {
    origin + S::lit(k as f64) * step
}

fn axis_offset<S: Real>(v: S, origin: S, step: S) -> i64 {
    let mut k = ((v - origin) / step).floor().to_i64().unwrap_or(0);
    // Keep the result consistent with the half-open membership test when
    // the division rounds across a boundary.
    if v < lower_edge(origin, step, k) {
        k -= 1;
    } else if v >= lower_edge(origin, step, k + 1) {
        k += 1;
    }
    k
}

/// Pillar offsets `(m, n)` of a world point: `floor((x - x_o)/dx)`, `floor((y - y_o)/dy)`.
pub fn pillar_offset<S: Real>(point: &Point3<S>, cfg: &HifConfig<S>) -> (i64, i64) {
    (
        axis_offset(point.x, cfg.origin_x, cfg.dx),
        axis_offset(point.y, cfg.origin_y, cfg.dy),
    )
}

/// Half-open membership of a point in pillar `(m, n)`.
pub fn pillar_contains<S: Real>(point: &Point3<S>, m: i64, n: i64, cfg: &HifConfig<S>) -> bool {
    lower_edge(cfg.origin_x, cfg.dx, m) <= point.x
        && point.x < lower_edge(cfg.origin_x, cfg.dx, m + 1)
        && lower_edge(cfg.origin_y, cfg.dy, n) <= point.y
        && point.y < lower_edge(cfg.origin_y, cfg.dy, n + 1)
}

pub fn pillar_key<S: Real>(point: &Point3<S>, cfg: &HifConfig<S>) -> PillarKey {
    let (m, n) = pillar_offset(point, cfg);
    PillarKey::new(m, n)
}

/// Buckets the z coordinates of world-frame points by pillar.
pub fn assign_points<S: Real>(points: &[Point3<S>], cfg: &HifConfig<S>) -> PillarTable<Vec<S>> {
    let mut buckets: PillarTable<Vec<S>> = PillarTable::default();
    for p in points {
        buckets.entry(pillar_key(p, cfg)).or_default().push(p.z);
    }
    buckets
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_cfg() -> HifConfig<f64> {
        HifConfig::default()
    }

    #[test]
    fn floor_semantics() {
        let cfg = unit_cfg();
        assert_eq!(pillar_offset(&Point3::world(2.3, -0.7, 5.0), &cfg), (2, -1));
        assert_eq!(pillar_offset(&Point3::world(0.0, 0.0, 1.0), &cfg), (0, 0));
    }

    #[test]
    fn shifted_origin_and_wide_pillars() {
        let cfg = HifConfig {
            origin_x: 0.5,
            origin_y: 0.5,
            dx: 2.0,
            dy: 2.0,
            ..unit_cfg()
        };
        // (2.5 - 0.5) / 2 = 1, (0.4 - 0.5) / 2 = -0.05
        assert_eq!(pillar_offset(&Point3::world(2.5, 0.4, 0.0), &cfg), (1, -1));
    }

    #[test]
    fn boundary_is_left_closed() {
        let cfg = unit_cfg();
        let below = Point3::world(1.0 - 1e-9, 0.5, 0.0);
        let above = Point3::world(1.0 + 1e-9, 0.5, 0.0);
        let on = Point3::world(1.0, 0.5, 0.0);
        let buckets = assign_points(&[below, above, on], &cfg);
        assert_eq!(buckets.len(), 2);
        assert_eq!(buckets[&PillarKey::new(0, 0)].len(), 1);
        assert_eq!(buckets[&PillarKey::new(1, 0)].len(), 2);
        for p in [below, above, on] {
            let (m, n) = pillar_offset(&p, &cfg);
            assert!(pillar_contains(&p, m, n, &cfg));
        }
    }

    #[test]
    fn empty_and_single_pillar_buckets() {
        let cfg = unit_cfg();
        assert!(assign_points::<f64>(&[], &cfg).is_empty());
        let pts = [
            Point3::world(0.1, 0.1, 0.0),
            Point3::world(0.5, 0.9, 1.0),
            Point3::world(0.99, 0.0, 2.0),
        ];
        let buckets = assign_points(&pts, &cfg);
        assert_eq!(buckets.len(), 1);
        assert_eq!(buckets[&PillarKey::new(0, 0)], vec![0.0, 1.0, 2.0]);
    }

    #[test]
    fn hash_is_deterministic_and_frozen() {
        assert_eq!(mix_hash(3, -7), mix_hash(3, -7));
        // h(0) = 0 for the finalizer, so the combined value is C itself.
        assert_eq!(mix_hash(0, 0), 0x9E37_79B9_7F4A_7C15);
        assert_eq!(int_hash(1), 0x5692_161D_100B_05E5);
        assert_eq!(mix_hash(1, 0), 0x0EF3_9099_D605_B32B);
        assert_eq!(mix_hash(-1, 2), 0x6F83_12F0_5BDC_63C6);
    }

    #[test]
    fn f32_offsets_match_f64() {
        let cfg32 = HifConfig::<f32>::default();
        assert_eq!(
            pillar_offset(&Point3::world(2.3f32, -0.7, 0.0), &cfg32),
            (2, -1)
        );
    }

    proptest::proptest! {
        #[test]
        fn offset_satisfies_membership(
            x in -1.0e4f64..1.0e4, y in -1.0e4f64..1.0e4,
            ox in -5.0f64..5.0, oy in -5.0f64..5.0,
            dx in 0.05f64..4.0, dy in 0.05f64..4.0,
        ) {
            let cfg = HifConfig { origin_x: ox, origin_y: oy, dx, dy, ..HifConfig::default() };
            let p = Point3::world(x, y, 0.0);
            let (m, n) = pillar_offset(&p, &cfg);
            proptest::prop_assert!(pillar_contains(&p, m, n, &cfg));
            proptest::prop_assert!(!pillar_contains(&p, m + 1, n, &cfg));
            proptest::prop_assert!(!pillar_contains(&p, m, n - 1, &cfg));
        }

        #[test]
        fn partition_preserves_point_count(
            pts in proptest::collection::vec(
                (-20.0f64..20.0, -20.0f64..20.0, -2.0f64..5.0), 0..300)
        ) {
            let cfg = unit_cfg();
            let points: Vec<_> = pts.iter().map(|&(x, y, z)| Point3::world(x, y, z)).collect();
            let buckets = assign_points(&points, &cfg);
            let total: usize = buckets.values().map(Vec::len).sum();
            proptest::prop_assert_eq!(total, points.len());
        }
    }
}
