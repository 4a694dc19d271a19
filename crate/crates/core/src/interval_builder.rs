//! Turns the heights that fall into one pillar during a single scan into
//! adaptive height intervals.

use crate::error::{HifError, Result};
use crate::model::{HeightInterval, HifConfig, Pillar, ScanFrame};
use crate::pillar_index::{assign_points, PillarTable};
use crate::scalar::Real;

/// Single-linkage clustering of heights: sorted values are split wherever
/// two neighbours are more than `cfg.gap_threshold` apart, and every
/// cluster becomes `(min, max)`.
pub fn build_intervals<S: Real>(z_values: &[S], cfg: &HifConfig<S>) -> Result<Vec<(S, S)>> {
    if z_values.is_empty() {
        return Err(HifError::Misuse(
            "cannot build intervals from an empty pillar",
        ));
    }
    if z_values.iter().any(|z| !z.is_finite()) {
        return Err(HifError::Misuse(
            "non-finite height passed to interval builder",
        ));
    }
    let mut sorted = z_values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite heights"));

    let mut out = Vec::new();
    let mut lo = sorted[0];
    let mut hi = sorted[0];
    for &z in &sorted[1..] {
        if z - hi > cfg.gap_threshold {
            out.push((lo, hi));
            lo = z;
        }
        hi = z;
    }
    out.push((lo, hi));
    Ok(out)
}

/// Builds the local pillar set of one world-frame scan. Probabilities are
/// placeholders at `cfg.p_init`; evidence is applied when fusing.
pub fn build_local_pillars<S: Real>(
    scan: &ScanFrame<S>,
    cfg: &HifConfig<S>,
) -> Result<PillarTable<Pillar<S>>> {
    let buckets = assign_points(&scan.points, cfg);
    let mut out = PillarTable::with_capacity_and_hasher(buckets.len(), Default::default());
    for (key, zs) in buckets {
        let intervals = build_intervals(&zs, cfg)?
            .into_iter()
            .map(|(b, t)| HeightInterval::new(b, t, cfg.p_init))
            .collect();
        out.insert(key, Pillar::new(cfg.p_init, intervals));
    }
    Ok(out)
}
