//! The global pillar dictionary: scan integration, point classification and
//! binary persistence.

use std::io::{Read, Write};
use std::time::Instant;

use rayon::prelude::*;

use crate::bayes::{fuse_pillar, new_global_pillar};
use crate::error::{HifError, Result};
use crate::interval_builder::build_local_pillars;
use crate::model::{
    transform_to_world, HeightInterval, HifConfig, IngestDiagnostics, Pillar, PillarKey, Point3,
    ScanFrame,
};
use crate::pillar_index::{pillar_key, PillarTable};
use crate::scalar::Real;

/// Per-point decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PointClass {
    Static,
    Dynamic,
}

/// What happened while integrating one scan.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegrationRecord {
    pub index: u64,
    /// Wall-clock time of the whole call, milliseconds.
    pub millis: f64,
    pub points: usize,
    pub local_pillars: usize,
    pub fused: usize,
    pub inserted: usize,
    pub diagnostics: IngestDiagnostics,
    /// Pillars whose fusion was aborted because an input broke the
    /// interval invariants; the previous global pillar is kept.
    pub invariant_violations: Vec<(PillarKey, String)>,
}

/// Global height interval map.
#[derive(Debug, Clone)]
pub struct GlobalHeightMap<S> {
    table: PillarTable<Pillar<S>>,
    cfg: HifConfig<S>,
    scan_count: u64,
    last_index: Option<u64>,
    parallel: bool,
}

impl<S: Real> GlobalHeightMap<S> {
    pub fn new(cfg: HifConfig<S>) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            table: PillarTable::default(),
            cfg,
            scan_count: 0,
            last_index: None,
            parallel: false,
        })
    }

    /// Fuse matched pillars on the rayon pool. Results are identical to the
    /// sequential path.
    pub fn with_parallel(mut self, parallel: bool) -> Self {
        self.parallel = parallel;
        self
    }

    pub fn set_parallel(&mut self, parallel: bool) {
        self.parallel = parallel;
    }

    pub fn config(&self) -> &HifConfig<S> {
        &self.cfg
    }

    pub fn scan_count(&self) -> u64 {
        self.scan_count
    }

    pub fn last_index(&self) -> Option<u64> {
        self.last_index
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn get(&self, key: &PillarKey) -> Option<&Pillar<S>> {
        self.table.get(key)
    }

    pub fn interval_count(&self) -> usize {
        self.table.values().map(|p| p.intervals.len()).sum()
    }

    pub fn max_intervals_per_pillar(&self) -> usize {
        self.table
            .values()
            .map(|p| p.intervals.len())
            .max()
            .unwrap_or(0)
    }

    /// Pillars in ascending `(m, n)` order.
    pub fn sorted_pillars(&self) -> Vec<(&PillarKey, &Pillar<S>)> {
        let mut all: Vec<_> = self.table.iter().collect();
        all.sort_by(|a, b| a.0.cmp(b.0));
        all
    }

    /// Inserts or replaces a pillar directly. Empty pillars are refused.
    pub fn insert_pillar(&mut self, key: PillarKey, pillar: Pillar<S>) -> Result<()> {
        pillar.check_invariants()?;
        if pillar.is_empty() {
            return Err(HifError::Misuse("empty pillars are not stored"));
        }
        self.table.insert(key, pillar);
        Ok(())
    }

    /// Integrates one scan: builds its local pillars, fuses every matched
    /// pillar and inserts the unmatched ones. Sensor-frame points are moved
    /// to the world frame first.
    pub fn integrate_scan(&mut self, scan: &ScanFrame<S>) -> Result<IntegrationRecord> {
        let start = Instant::now();
        if let Some(last) = self.last_index {
            if scan.index <= last {
                return Err(HifError::OutOfOrderScan {
                    got: scan.index,
                    last,
                });
            }
        }
        let (world, diagnostics) = transform_to_world(scan);
        let local = build_local_pillars(&world, &self.cfg)?;

        let mut keys: Vec<PillarKey> = local.keys().copied().collect();
        keys.sort();
        let (matched, fresh): (Vec<PillarKey>, Vec<PillarKey>) =
            keys.into_iter().partition(|k| self.table.contains_key(k));

        let cfg = self.cfg;
        let table = &self.table;
        let fuse_one = |key: &PillarKey| (*key, fuse_pillar(&local[key], &table[key], &cfg));
        let updates: Vec<(PillarKey, Result<Pillar<S>>)> = if self.parallel {
            matched.par_iter().map(fuse_one).collect()
        } else {
            matched.iter().map(fuse_one).collect()
        };

        let mut record = IntegrationRecord {
            index: scan.index,
            millis: 0.0,
            points: world.points.len(),
            local_pillars: local.len(),
            fused: 0,
            inserted: 0,
            diagnostics,
            invariant_violations: Vec::new(),
        };
        for (key, update) in updates {
            match update {
                Ok(pillar) if !pillar.is_empty() => {
                    self.table.insert(key, pillar);
                    record.fused += 1;
                }
                Ok(_) => record
                    .invariant_violations
                    .push((key, "fusion produced an empty pillar".to_owned())),
                Err(e) => record.invariant_violations.push((key, e.to_string())),
            }
        }
        for key in fresh {
            match new_global_pillar(&local[&key], &self.cfg) {
                Ok(pillar) => {
                    self.table.insert(key, pillar);
                    record.inserted += 1;
                }
                Err(e) => record.invariant_violations.push((key, e.to_string())),
            }
        }

        self.scan_count += 1;
        self.last_index = Some(scan.index);
        record.millis = start.elapsed().as_secs_f64() * 1e3;
        Ok(record)
    }

    /// Static iff the point lies in (or within `containment_tolerance` of) an
    /// interval of its pillar whose probability reaches `static_threshold`.
    /// Points in pillars the map has never seen are dynamic.
    pub fn classify_point(&self, point: &Point3<S>) -> PointClass {
        let key = pillar_key(point, &self.cfg);
        let Some(pillar) = self.table.get(&key) else {
            return PointClass::Dynamic;
        };
        let tol = self.cfg.containment_tolerance;
        let keep = pillar
            .intervals
            .iter()
            .any(|h| h.p >= self.cfg.static_threshold && h.contains(point.z, tol));
        if keep {
            PointClass::Static
        } else {
            PointClass::Dynamic
        }
    }

    pub fn classify_cloud(&self, points: &[Point3<S>]) -> Vec<PointClass> {
        if self.parallel {
            points.par_iter().map(|p| self.classify_point(p)).collect()
        } else {
            points.iter().map(|p| self.classify_point(p)).collect()
        }
    }

    /// Serializes the map. Pillars are written in `(m, n)` order so equal
    /// maps produce equal bytes.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let io = |e| HifError::io("<map stream>", e);
        let mut buf = Vec::with_capacity(64 + self.table.len() * 64);
        buf.extend_from_slice(MAP_MAGIC);
        buf.extend_from_slice(&MAP_VERSION.to_le_bytes());
        let c = &self.cfg;
        for v in [
            c.origin_x,
            c.origin_y,
            c.dx,
            c.dy,
            c.alpha,
            c.beta,
            c.gap_threshold,
            c.containment_tolerance,
            c.static_threshold,
            c.p_init,
            c.clip_lo,
            c.clip_hi,
            c.compaction_epsilon,
        ] {
            buf.extend_from_slice(&v.as_f64().to_le_bytes());
        }
        buf.push(u8::from(c.lhp_enabled));
        buf.extend_from_slice(&self.scan_count.to_le_bytes());
        let last = self.last_index.map_or(-1i64, |i| i as i64);
        buf.extend_from_slice(&last.to_le_bytes());
        buf.extend_from_slice(&(self.table.len() as u64).to_le_bytes());
        for (key, pillar) in self.sorted_pillars() {
            buf.extend_from_slice(&key.m.to_le_bytes());
            buf.extend_from_slice(&key.n.to_le_bytes());
            buf.extend_from_slice(&pillar.p_empty.as_f64().to_le_bytes());
            buf.extend_from_slice(&(pillar.intervals.len() as u32).to_le_bytes());
            for h in &pillar.intervals {
                for v in [h.b, h.t, h.p] {
                    buf.extend_from_slice(&v.as_f64().to_le_bytes());
                }
            }
        }
        w.write_all(&buf).map_err(io)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out)
            .expect("writing to a Vec cannot fail");
        out
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)
            .map_err(|e| HifError::io("<map stream>", e))?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(4)? != MAP_MAGIC {
            return Err(HifError::MapFormat("bad magic".into()));
        }
        let version = u32::from_le_bytes(cur.array()?);
        if version != MAP_VERSION {
            return Err(HifError::MapFormat(format!(
                "unsupported version {version}"
            )));
        }
        let mut f = || cur.f64().map(S::lit);
        let cfg = HifConfig {
            origin_x: f()?,
            origin_y: f()?,
            dx: f()?,
            dy: f()?,
            alpha: f()?,
            beta: f()?,
            gap_threshold: f()?,
            containment_tolerance: f()?,
            static_threshold: f()?,
            p_init: f()?,
            clip_lo: f()?,
            clip_hi: f()?,
            compaction_epsilon: f()?,
            lhp_enabled: cur.take(1)?[0] != 0,
        };
        let mut map = Self::new(cfg)?;
        map.scan_count = u64::from_le_bytes(cur.array()?);
        let last = i64::from_le_bytes(cur.array()?);
        map.last_index = (last >= 0).then_some(last as u64);
        let pillars = u64::from_le_bytes(cur.array()?);
        for _ in 0..pillars {
            let m = i64::from_le_bytes(cur.array()?);
            let n = i64::from_le_bytes(cur.array()?);
            let p_empty = S::lit(cur.f64()?);
            let count = u32::from_le_bytes(cur.array()?) as usize;
            let mut intervals = Vec::with_capacity(count.min(1 << 16));
            for _ in 0..count {
                let (b, t, p) = (cur.f64()?, cur.f64()?, cur.f64()?);
                if b > t {
                    return Err(HifError::MapFormat(format!("pillar ({m}, {n}) has b > t")));
                }
                intervals.push(HeightInterval::new(S::lit(b), S::lit(t), S::lit(p)));
            }
            map.insert_pillar(PillarKey::new(m, n), Pillar::new(p_empty, intervals))
                .map_err(|e| HifError::MapFormat(format!("pillar ({m}, {n}): {e}")))?;
        }
        if cur.pos != bytes.len() {
            return Err(HifError::MapFormat("trailing bytes".into()));
        }
        Ok(map)
    }
}

pub const MAP_MAGIC: &[u8; 4] = b"HIFM";
pub const MAP_VERSION: u32 = 1;

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(HifError::MapFormat(format!(
                "unexpected end of data at byte {}",
                self.pos
            )));
        }
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RigidPose;

    fn scan(index: u64, pts: &[(f64, f64, f64)]) -> ScanFrame<f64> {
        ScanFrame::new(
            index,
            pts.iter()
                .map(|&(x, y, z)| Point3::world(x, y, z))
                .collect(),
            RigidPose::identity(),
            None,
        )
        .unwrap()
    }

    fn map() -> GlobalHeightMap<f64> {
        GlobalHeightMap::new(HifConfig::default()).unwrap()
    }

    #[test]
    fn empty_scan_leaves_map_unchanged() {
        let mut m = map();
        let rec = m.integrate_scan(&scan(0, &[])).unwrap();
        assert!(m.is_empty());
        assert!(rec.millis >= 0.0);
        assert_eq!(m.scan_count(), 1);
    }

    #[test]
    fn rejects_out_of_order_scans() {
        let mut m = map();
        m.integrate_scan(&scan(5, &[(0.5, 0.5, 0.0)])).unwrap();
        assert!(matches!(
            m.integrate_scan(&scan(5, &[])),
            Err(HifError::OutOfOrderScan { got: 5, last: 5 })
        ));
        assert!(m.integrate_scan(&scan(6, &[])).is_ok());
    }

    #[test]
    fn repeated_scan_keeps_geometry_and_raises_probability() {
        let pts = [
            (0.5, 0.5, 0.0),
            (0.6, 0.4, 0.05),
            (0.5, 0.5, 2.0),
            (3.2, 1.1, 1.0),
        ];
        let mut m = map();
        m.integrate_scan(&scan(0, &pts)).unwrap();
        let before: Vec<_> = m
            .sorted_pillars()
            .into_iter()
            .map(|(k, p)| (*k, p.clone()))
            .collect();
        m.integrate_scan(&scan(1, &pts)).unwrap();
        for (key, old) in before {
            let new = m.get(&key).unwrap();
            assert_eq!(new.intervals.len(), old.intervals.len());
            for (a, b) in new.intervals.iter().zip(&old.intervals) {
                assert_eq!((a.b, a.t), (b.b, b.t));
                assert!(a.p > b.p);
            }
        }
    }

    #[test]
    fn classification_rules() {
        let mut m = map();
        m.insert_pillar(
            PillarKey::new(0, 0),
            Pillar::new(0.5, vec![HeightInterval::new(0.0, 1.0, 0.9)]),
        )
        .unwrap();
        m.insert_pillar(
            PillarKey::new(1, 0),
            Pillar::new(0.5, vec![HeightInterval::new(0.0, 1.0, 0.7)]),
        )
        .unwrap();
        assert_eq!(
            m.classify_point(&Point3::world(0.5, 0.5, 0.5)),
            PointClass::Static
        );
        assert_eq!(
            m.classify_point(&Point3::world(9.5, 0.5, 0.5)),
            PointClass::Dynamic
        );
        assert_eq!(
            m.classify_point(&Point3::world(1.5, 0.5, 1.05)),
            PointClass::Static
        );
        assert_eq!(
            m.classify_point(&Point3::world(1.5, 0.5, 1.2)),
            PointClass::Dynamic
        );
        assert!(m.classify_cloud(&[]).is_empty());
        assert_eq!(
            m.classify_cloud(&[Point3::world(0.5, 0.5, 0.5), Point3::world(9.5, 0.5, 0.5)]),
            vec![PointClass::Static, PointClass::Dynamic]
        );
    }

    #[test]
    fn forced_collisions_do_not_alias() {
        let mut m = map();
        let probs = [0.2, 0.3, 0.4, 0.5];
        for ((a, b), p) in [(0, 0), (1, 0), (0, 1), (-5, 7)].into_iter().zip(probs) {
            m.insert_pillar(
                PillarKey::with_hash(a, b, 42),
                Pillar::new(0.5, vec![HeightInterval::new(0.0, 1.0, p)]),
            )
            .unwrap();
        }
        assert_eq!(m.len(), 4);
        assert_eq!(
            m.get(&PillarKey::with_hash(-5, 7, 42)).unwrap().intervals[0].p,
            0.5
        );
        assert_eq!(
            m.get(&PillarKey::with_hash(1, 0, 42)).unwrap().intervals[0].p,
            0.3
        );
        assert!(m.get(&PillarKey::with_hash(2, 2, 42)).is_none());
    }

    #[test]
    fn serialization_round_trip() {
        let mut m = map();
        m.integrate_scan(&scan(
            3,
            &[(0.5, 0.5, 0.0), (-2.5, 4.5, 1.0), (-2.5, 4.5, 3.0)],
        ))
        .unwrap();
        let bytes = m.to_bytes();
        let back = GlobalHeightMap::<f64>::from_bytes(&bytes).unwrap();
        assert_eq!(back.to_bytes(), bytes);
        assert_eq!(back.last_index(), Some(3));
        assert_eq!(back.config(), m.config());
        assert!(GlobalHeightMap::<f64>::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(GlobalHeightMap::<f64>::from_bytes(b"nope").is_err());
    }

    #[test]
    fn empty_pillars_are_refused() {
        let mut m = map();
        assert!(m
            .insert_pillar(PillarKey::new(0, 0), Pillar::new(0.5, vec![]))
            .is_err());
    }
}
