use super::rng::JitterRng;
use crate::bayes::{bayes_filter, fuse_pillar, new_global_pillar, refine_pillar, OverlapCase};
use crate::model::{HeightInterval, HifConfig, Pillar};

/// Cell height of the grid oracle, in metres.
pub const ORACLE_RESOLUTION: f64 = 1e-3;

/// One pillar as a column of 1 mm cells, each carrying its own static
/// probability (or nothing, for space never observed as occupied).
///
/// Every scan updates each cell on its own: observed cells take the
/// positive update (from the empty-space probability if they were empty),
/// unobserved occupied cells take the negative one unless they sit at or
/// below the lowest observation with low-height preservation on.
#[derive(Debug, Clone)]
pub struct GridOracle {
    lo: f64,
    cells: Vec<Option<f64>>,
    p_empty: Option<f64>,
    cfg: HifConfig<f64>,
}

impl GridOracle {
    /// Column over `[z_lo, z_hi)` for a pillar the map does not hold yet.
    pub fn new(z_lo: f64, z_hi: f64, cfg: &HifConfig<f64>) -> Self {
        let n = ((z_hi - z_lo) / ORACLE_RESOLUTION).ceil().max(0.0) as usize;
        Self {
            lo: z_lo,
            cells: vec![None; n],
            p_empty: None,
            cfg: *cfg,
        }
    }

    /// Column initialized from an existing map pillar.
    pub fn from_pillar(pillar: &Pillar<f64>, z_lo: f64, z_hi: f64, cfg: &HifConfig<f64>) -> Self {
        let mut g = Self::new(z_lo, z_hi, cfg);
        g.p_empty = Some(pillar.p_empty);
        for i in 0..g.cells.len() {
            let z = g.cell_center(i);
            g.cells[i] = pillar
                .intervals
                .iter()
                .find(|h| h.b <= z && z <= h.t)
                .map(|h| h.p);
        }
        g
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cell_center(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * ORACLE_RESOLUTION
    }

    pub fn cell(&self, i: usize) -> Option<f64> {
        self.cells[i]
    }

    /// Probability of the cell containing `z`, if inside the column.
    pub fn probability_at(&self, z: f64) -> Option<f64> {
        let i = ((z - self.lo) / ORACLE_RESOLUTION).floor();
        if i < 0.0 || i as usize >= self.cells.len() {
            return None;
        }
        self.cells[i as usize]
    }

    /// `None` until the pillar enters the map.
    pub fn p_empty(&self) -> Option<f64> {
        self.p_empty
    }

    /// Applies one scan whose occupied heights in this pillar are the closed
    /// intervals `local`. A scan without returns here leaves the pillar as
    /// it is.
    pub fn observe(&mut self, local: &[(f64, f64)]) {
        if local.is_empty() {
            return;
        }
        let c = self.cfg;
        let clip = |p: f64| p.max(c.clip_lo).min(c.clip_hi);
        let seen = |z: f64| local.iter().any(|&(b, t)| b <= z && z <= t);

        let Some(p_empty) = self.p_empty else {
            let p = clip(bayes_filter(c.p_init, c.alpha, c.beta));
            for i in 0..self.cells.len() {
                let z = self.cell_center(i);
                if seen(z) {
                    self.cells[i] = Some(p);
                }
            }
            self.p_empty = Some(c.p_init);
            return;
        };

        let p_empty = bayes_filter(p_empty, 1.0 - c.alpha, 1.0 - c.beta);
        self.p_empty = Some(p_empty);
        let base = local.iter().map(|&(b, _)| b).fold(f64::INFINITY, f64::min);
        for i in 0..self.cells.len() {
            let z = self.cell_center(i);
            let next = match (seen(z), self.cells[i]) {
                (true, Some(p)) => Some(bayes_filter(p, c.alpha, c.beta)),
                (true, None) => Some(bayes_filter(p_empty, c.alpha, c.beta)),
                (false, Some(p)) if c.lhp_enabled && z <= base => Some(p),
                (false, Some(p)) => Some(bayes_filter(p, 1.0 - c.alpha, 1.0 - c.beta)),
                (false, None) => None,
            };
            self.cells[i] = next.map(clip);
        }
    }
}

/// Replays `pattern` (one list of local intervals per scan) on a 1 mm
/// column over `z_range`, starting from `initial` or from an absent pillar.
pub fn grid_oracle(
    initial: Option<&Pillar<f64>>,
    pattern: &[Vec<(f64, f64)>],
    z_range: (f64, f64),
    cfg: &HifConfig<f64>,
) -> GridOracle {
    let mut g = match initial {
        Some(p) => GridOracle::from_pillar(p, z_range.0, z_range.1, cfg),
        None => GridOracle::new(z_range.0, z_range.1, cfg),
    };
    for local in pattern {
        g.observe(local);
    }
    g
}

/// A randomized single-pillar history: an optional starting global pillar
/// and the local intervals of each following scan (empty = no returns).
#[derive(Debug, Clone, PartialEq)]
pub struct PillarScenario {
    pub initial: Option<Pillar<f64>>,
    pub pattern: Vec<Vec<(f64, f64)>>,
}

/// Column extent used by [`random_scenario`].
pub const SCENARIO_Z_RANGE: (f64, f64) = (0.0, 5.0);

fn random_spans(rng: &mut JitterRng, max: usize) -> Vec<(f64, f64)> {
    let k = (rng.uniform() * (max + 1) as f64) as usize;
    // Endpoints on a 1 cm grid; repeated draws give touching or zero-width
    // intervals.
    let mut ends: Vec<u32> = (0..2 * k).map(|_| (rng.uniform() * 501.0) as u32).collect();
    ends.sort_unstable();
    ends.chunks_exact(2)
        .map(|c| (f64::from(c[0]) / 100.0, f64::from(c[1]) / 100.0))
        .collect()
}

/// Draws a scenario with up to three intervals per set and `scans` scans.
pub fn random_scenario(rng: &mut JitterRng, scans: usize) -> PillarScenario {
    let initial = (rng.uniform() < 0.8).then(|| {
        let spans = random_spans(rng, 3);
        let intervals = spans
            .into_iter()
            .map(|(b, t)| HeightInterval::new(b, t, 0.1 + 0.8 * rng.uniform()))
            .collect();
        Pillar::new(0.05 + 0.9 * rng.uniform(), intervals)
    });
    let pattern = (0..scans).map(|_| random_spans(rng, 3)).collect();
    PillarScenario { initial, pattern }
}

/// Outcome of replaying one scenario through both implementations.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OracleComparison {
    pub fuses: usize,
    pub compared_cells: usize,
    pub max_abs_diff: f64,
    /// Cells where one side holds a probability and the other does not, or
    /// the two differ by more than the tolerance.
    pub mismatches: usize,
    /// Fused pillars that were unsorted, overlapping or outside the clip
    /// bounds.
    pub invariant_violations: usize,
    /// Points covered by local or global intervals but not by exactly one
    /// kept candidate (checked only at zero containment tolerance).
    pub coverage_violations: usize,
}

fn probability_in(pillar: &Pillar<f64>, z: f64) -> Option<f64> {
    pillar
        .intervals
        .iter()
        .find(|h| h.b <= z && z <= h.t)
        .map(|h| h.p)
}

fn well_formed(pillar: &Pillar<f64>, cfg: &HifConfig<f64>) -> bool {
    pillar.check_invariants().is_ok()
        && pillar
            .intervals
            .iter()
            .all(|h| cfg.clip_lo <= h.p && h.p <= cfg.clip_hi)
}

/// Replays `scenario` through [`fuse_pillar`] and through the 1 mm grid,
/// comparing after every scan at all cells farther than
/// `max(containment_tolerance, 1 mm)` from any endpoint seen so far.
pub fn compare_with_oracle(
    scenario: &PillarScenario,
    cfg: &HifConfig<f64>,
    tolerance: f64,
) -> OracleComparison {
    let (lo, hi) = SCENARIO_Z_RANGE;
    let mut report = OracleComparison::default();
    let mut grid = match &scenario.initial {
        Some(p) => GridOracle::from_pillar(p, lo, hi, cfg),
        None => GridOracle::new(lo, hi, cfg),
    };
    let mut pillar = scenario.initial.clone();
    let band = cfg.containment_tolerance.max(ORACLE_RESOLUTION);
    let mut excluded = vec![false; grid.len()];
    let exclude = |excluded: &mut [bool], ends: &mut dyn Iterator<Item = f64>| {
        for e in ends {
            let first = ((e - band - lo) / ORACLE_RESOLUTION).floor().max(0.0) as usize;
            let last = (((e + band - lo) / ORACLE_RESOLUTION).ceil() as usize).min(excluded.len());
            for (i, x) in excluded.iter_mut().enumerate().take(last).skip(first) {
                let z = lo + (i as f64 + 0.5) * ORACLE_RESOLUTION;
                *x |= (z - e).abs() <= band;
            }
        }
    };
    if let Some(p) = &pillar {
        exclude(
            &mut excluded,
            &mut p.intervals.iter().flat_map(|h| [h.b, h.t]),
        );
    }

    for spans in &scenario.pattern {
        grid.observe(spans);
        if spans.is_empty() {
            continue;
        }
        exclude(&mut excluded, &mut spans.iter().flat_map(|&(b, t)| [b, t]));
        let local = Pillar::new(
            cfg.p_init,
            spans
                .iter()
                .map(|&(b, t)| HeightInterval::new(b, t, cfg.p_init))
                .collect(),
        );
        let fused = match &pillar {
            None => new_global_pillar(&local, cfg),
            Some(global) => {
                if cfg.containment_tolerance == 0.0 {
                    report.coverage_violations += coverage_violations(&local, global, cfg, &grid);
                }
                fuse_pillar(&local, global, cfg)
            }
        };
        let fused = match fused {
            Ok(p) => p,
            Err(_) => {
                report.invariant_violations += 1;
                continue;
            }
        };
        report.fuses += 1;
        if !well_formed(&fused, cfg) {
            report.invariant_violations += 1;
        }
        for (i, _) in excluded.iter().enumerate().filter(|(_, x)| !**x) {
            let z = grid.cell_center(i);
            report.compared_cells += 1;
            match (probability_in(&fused, z), grid.cell(i)) {
                (None, None) => {}
                (Some(a), Some(b)) => {
                    let d = (a - b).abs();
                    report.max_abs_diff = report.max_abs_diff.max(d);
                    if d > tolerance {
                        report.mismatches += 1;
                    }
                }
                _ => report.mismatches += 1,
            }
        }
        pillar = Some(fused);
    }
    report
}

fn coverage_violations(
    local: &Pillar<f64>,
    global: &Pillar<f64>,
    cfg: &HifConfig<f64>,
    grid: &GridOracle,
) -> usize {
    let Ok(refined) = refine_pillar(local, global, cfg) else {
        return 1;
    };
    let covered = |z: f64| {
        local
            .intervals
            .iter()
            .chain(&global.intervals)
            .any(|h| h.b <= z && z <= h.t)
    };
    (0..grid.len())
        .map(|i| grid.cell_center(i))
        .filter(|&z| {
            let hits = refined
                .candidates
                .iter()
                .filter(|c| c.case != OverlapCase::Discard && c.b <= z && z <= c.t)
                .count();
            hits != usize::from(covered(z))
        })
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::HeightInterval;

    fn cfg() -> HifConfig<f64> {
        HifConfig::default()
    }

    #[test]
    fn repeated_observation_saturates() {
        let g = grid_oracle(None, &vec![vec![(1.0, 2.0)]; 3], (0.0, 3.0), &cfg());
        // 0.7, then 0.845, then 0.927 clipped
        assert_eq!(g.probability_at(1.5), Some(0.9));
        assert_eq!(g.probability_at(0.5), None);
        assert_eq!(g.probability_at(2.5), None);
        let g = grid_oracle(None, &vec![vec![(1.0, 2.0)]; 2], (0.0, 3.0), &cfg());
        assert!(
            (g.probability_at(1.5).unwrap() - 0.7 * 0.7 / (0.7 * 0.7 + 0.3 * 0.3)).abs() < 1e-12
        );
    }

    #[test]
    fn observe_then_miss_returns_to_prior() {
        let start = Pillar::new(0.5, vec![HeightInterval::new(1.0, 2.0, 0.5)]);
        let c = HifConfig {
            lhp_enabled: false,
            ..cfg()
        };
        let g = grid_oracle(
            Some(&start),
            &[vec![(1.0, 2.0)], vec![(0.0, 0.1)]],
            (0.0, 3.0),
            &c,
        );
        assert!((g.probability_at(1.5).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn low_cells_are_preserved_with_lhp() {
        let start = Pillar::new(0.5, vec![HeightInterval::new(0.0, 0.2, 0.8)]);
        let on = grid_oracle(Some(&start), &[vec![(1.0, 1.8)]], (0.0, 3.0), &cfg());
        assert_eq!(on.probability_at(0.1), Some(0.8));
        let off_cfg = HifConfig {
            lhp_enabled: false,
            ..cfg()
        };
        let off = grid_oracle(Some(&start), &[vec![(1.0, 1.8)]], (0.0, 3.0), &off_cfg);
        assert!(off.probability_at(0.1).unwrap() < 0.8);
    }

    #[test]
    fn random_scenarios_agree() {
        let mut rng = JitterRng::new(5);
        for _ in 0..10 {
            let sc = random_scenario(&mut rng, 4);
            let c = HifConfig {
                compaction_epsilon: 0.0,
                containment_tolerance: 0.0,
                ..cfg()
            };
            let r = compare_with_oracle(&sc, &c, 1e-9);
            assert_eq!(r.mismatches, 0, "{sc:?} {r:?}");
            assert_eq!(r.invariant_violations, 0);
            assert_eq!(r.coverage_violations, 0);
        }
    }

    #[test]
    fn empty_scan_changes_nothing() {
        let start = Pillar::new(0.5, vec![HeightInterval::new(1.0, 2.0, 0.6)]);
        let g = grid_oracle(Some(&start), &[vec![]], (0.0, 3.0), &cfg());
        assert_eq!(g.probability_at(1.5), Some(0.6));
        assert_eq!(g.p_empty(), Some(0.5));
        assert_eq!(g.len(), 3000);
    }
}
