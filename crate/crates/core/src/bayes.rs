//! Probabilistic fusion of a local pillar into its global counterpart.
//!
//! The global and local interval endpoints are merged into one sorted
//! sequence, each consecutive pair becomes a candidate interval, and each
//! candidate is classified by whether it lies inside a local interval, a
//! global interval, both or neither:
//!
//! | local | global | case          | new probability                 |
//! |-------|--------|---------------|---------------------------------|
//! | no    | no     | `Discard`     | dropped                         |
//! | yes   | yes    | `Confirmed`   | `bf(p_g, α, β)`                 |
//! | no    | yes    | `Negative`    | `bf(p_g, 1-α, 1-β)`             |
//! | no    | yes    | `LhpRetained` | `p_g` (candidate below the base) |
//! | yes   | no     | `Novel`       | `bf(p_empty', α, β)`            |
//!
//! where `p_empty'` is the pillar's empty-space probability after the
//! negative update that every matched pillar receives. Probabilities are
//! clipped to `[clip_lo, clip_hi]` and touching candidates with nearly equal
//! probability are merged back together.

use crate::error::{HifError, Result};
use crate::model::{HeightInterval, HifConfig, Pillar};
use crate::scalar::Real;

/// How a refined candidate interval relates to the current scan and the map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OverlapCase {
    Discard,
    Confirmed,
    Negative,
    Novel,
    LhpRetained,
}

/// Binary Bayes filter: `P_S·p / (P_S·p + P_D·(1 - p))`.
pub fn bayes_filter<S: Real>(p: S, p_static: S, p_dynamic: S) -> S {
    let s = p_static * p;
    s / (s + p_dynamic * (S::one() - p))
}

/// Negative update applied to the empty-space probability of a matched pillar.
pub fn update_empty<S: Real>(p_empty: S, cfg: &HifConfig<S>) -> S {
    bayes_filter(p_empty, S::one() - cfg.alpha, S::one() - cfg.beta)
}

/// Sorted, deduplicated union of every interval bound of both pillars.
pub fn refine_endpoints<S: Real>(local: &Pillar<S>, global: &Pillar<S>) -> Vec<S> {
    let mut ends: Vec<S> = local
        .intervals
        .iter()
        .chain(&global.intervals)
        .flat_map(|h| [h.b, h.t])
        .collect();
    ends.sort_by(|a, b| a.partial_cmp(b).expect("finite endpoints"));
    ends.dedup();
    ends
}

/// Candidate intervals between consecutive refined endpoints. A degenerate
/// interval in either pillar also yields a zero-width candidate at its
/// height so single-height observations survive the refinement.
pub fn candidate_intervals<S: Real>(local: &Pillar<S>, global: &Pillar<S>) -> Vec<(S, S)> {
    let ends = refine_endpoints(local, global);
    let mut out: Vec<(S, S)> = ends
        .windows(2)
        .filter(|w| w[0] < w[1])
        .map(|w| (w[0], w[1]))
        .collect();
    let mut points: Vec<S> = local
        .intervals
        .iter()
        .chain(&global.intervals)
        .filter(|h| h.is_degenerate())
        .map(|h| h.b)
        .collect();
    if !points.is_empty() {
        points.sort_by(|a, b| a.partial_cmp(b).expect("finite endpoints"));
        points.dedup();
        out.extend(points.into_iter().map(|e| (e, e)));
        out.sort_by(|a, b| {
            (a.0, a.1)
                .partial_cmp(&(b.0, b.1))
                .expect("finite endpoints")
        });
    }
    out
}

/// Lowest interval bound of the local pillar; heights below it were not
/// visible in the current scan.
pub fn extract_base<S: Real>(local: &Pillar<S>) -> Result<S> {
    local
        .intervals
        .iter()
        .map(|h| h.b)
        .reduce(S::min)
        .ok_or(HifError::Misuse("base height of an empty local pillar"))
}

/// Index of the interval that best explains `candidate`, if any.
///
/// A candidate belongs to an interval when it lies inside the interval
/// widened by `tol` on both sides. Ties go to the larger overlap, then the
/// closer interval, then the lower one.
fn best_match<S: Real>(
    candidate: (S, S),
    intervals: &[HeightInterval<S>],
    tol: S,
) -> Option<usize> {
    let (cb, ct) = candidate;
    let mut best: Option<(usize, S, S)> = None;
    for (i, h) in intervals.iter().enumerate() {
        if !(h.b - tol <= cb && ct <= h.t + tol) {
            continue;
        }
        let overlap = (ct.min(h.t) - cb.max(h.b)).max(S::zero());
        let distance = (h.b - ct).max(cb - h.t).max(S::zero());
        let better = match best {
            None => true,
            Some((_, o, d)) => overlap > o || (overlap == o && distance < d),
        };
        if better {
            best = Some((i, overlap, distance));
        }
    }
    best.map(|(i, _, _)| i)
}

fn classify_with_match<S: Real>(
    candidate: (S, S),
    local: &Pillar<S>,
    global: &Pillar<S>,
    b_base: S,
    cfg: &HifConfig<S>,
) -> (OverlapCase, Option<usize>) {
    let tol = cfg.containment_tolerance;
    let in_local = best_match(candidate, &local.intervals, tol).is_some();
    let in_global = best_match(candidate, &global.intervals, tol);
    let case = match (in_local, in_global) {
        (false, None) => OverlapCase::Discard,
        (true, Some(_)) => OverlapCase::Confirmed,
        (true, None) => OverlapCase::Novel,
        (false, Some(_)) if cfg.lhp_enabled && candidate.1 <= b_base => OverlapCase::LhpRetained,
        (false, Some(_)) => OverlapCase::Negative,
    };
    (case, in_global)
}

/// Decides the update case of one refined candidate.
pub fn classify_candidate<S: Real>(
    candidate: (S, S),
    local: &Pillar<S>,
    global: &Pillar<S>,
    b_base: S,
    cfg: &HifConfig<S>,
) -> OverlapCase {
    classify_with_match(candidate, local, global, b_base, cfg).0
}

/// One refined candidate with its case and unclipped updated probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifiedCandidate<S> {
    pub b: S,
    pub t: S,
    pub case: OverlapCase,
    /// `None` for discarded candidates.
    pub p: Option<S>,
}

/// Intermediate result of fusing one pillar, before clipping and compaction.
#[derive(Debug, Clone, PartialEq)]
pub struct Refinement<S> {
    pub p_empty: S,
    pub b_base: S,
    pub candidates: Vec<ClassifiedCandidate<S>>,
}

/// Refines and classifies all candidates of a matched pillar pair.
pub fn refine_pillar<S: Real>(
    local: &Pillar<S>,
    global: &Pillar<S>,
    cfg: &HifConfig<S>,
) -> Result<Refinement<S>> {
    local.check_invariants()?;
    global.check_invariants()?;
    let b_base = extract_base(local)?;
    let p_empty = update_empty(global.p_empty, cfg);
    let one = S::one();

    let candidates = candidate_intervals(local, global)
        .into_iter()
        .map(|(b, t)| {
            let (case, matched) = classify_with_match((b, t), local, global, b_base, cfg);
            let p_g = matched.map(|j| global.intervals[j].p);
            let p = match case {
                OverlapCase::Discard => None,
                OverlapCase::Confirmed => p_g.map(|p| bayes_filter(p, cfg.alpha, cfg.beta)),
                OverlapCase::Negative => {
                    p_g.map(|p| bayes_filter(p, one - cfg.alpha, one - cfg.beta))
                }
                OverlapCase::LhpRetained => p_g,
                OverlapCase::Novel => Some(bayes_filter(p_empty, cfg.alpha, cfg.beta)),
            };
            ClassifiedCandidate { b, t, case, p }
        })
        .collect();

    Ok(Refinement {
        p_empty,
        b_base,
        candidates,
    })
}

/// Merges touching neighbours whose probabilities differ by at most `epsilon`.
/// The merged probability is the length-weighted mean of the pair.
pub fn compact<S: Real>(intervals: Vec<HeightInterval<S>>, epsilon: S) -> Vec<HeightInterval<S>> {
    let mut out: Vec<HeightInterval<S>> = Vec::with_capacity(intervals.len());
    for h in intervals {
        if let Some(last) = out.last_mut() {
            if last.t == h.b && (last.p - h.p).abs() <= epsilon {
                let (la, lb) = (last.len(), h.len());
                let total = la + lb;
                if total > S::zero() {
                    let (lo, hi) = (last.p.min(h.p), last.p.max(h.p));
                    last.p = ((last.p * la + h.p * lb) / total).max(lo).min(hi);
                }
                last.t = h.t;
                continue;
            }
        }
        out.push(h);
    }
    out
}

/// Fuses `local` (from the current scan) into `global`, returning the
/// replacement global pillar.
pub fn fuse_pillar<S: Real>(
    local: &Pillar<S>,
    global: &Pillar<S>,
    cfg: &HifConfig<S>,
) -> Result<Pillar<S>> {
    let refined = refine_pillar(local, global, cfg)?;
    let kept = refined
        .candidates
        .iter()
        .filter_map(|c| c.p.map(|p| HeightInterval::new(c.b, c.t, cfg.clip(p))))
        .collect();
    let out = Pillar::new(refined.p_empty, compact(kept, cfg.compaction_epsilon));
    debug_assert!(out.check_invariants().is_ok());
    Ok(out)
}

/// Global pillar created from a local pillar with no counterpart in the map:
/// each interval receives one positive update from the prior.
pub fn new_global_pillar<S: Real>(local: &Pillar<S>, cfg: &HifConfig<S>) -> Result<Pillar<S>> {
    local.check_invariants()?;
    if local.is_empty() {
        return Err(HifError::Misuse("inserting an empty pillar"));
    }
    let p = cfg.clip(bayes_filter(cfg.p_init, cfg.alpha, cfg.beta));
    Ok(Pillar::new(
        cfg.p_init,
        local
            .intervals
            .iter()
            .map(|h| HeightInterval::new(h.b, h.t, p))
            .collect(),
    ))
}
