//! Frame sources and the two-pass integrate/classify loop shared by the
//! commands.

use hif_core::dataset_io::{RangeFilter, SequenceReader};
use hif_core::evaluation::GroundTruth;
use hif_core::{
    dataset_io, gen_scene, transform_to_world, GlobalHeightMap, HifError, IngestDiagnostics,
    IntegrationRecord, PointClass, Result, RunConfig, ScanFrame,
};

/// Where scans come from: a sequence on disk (read lazily) or a generated
/// scene held in memory.
pub enum FrameSource {
    Sequence(SequenceReader),
    Synthetic(Vec<ScanFrame<f64>>),
}

impl FrameSource {
    /// Opens the sequence or generates the scene named by `cfg`. `seed`
    /// replaces the scene's own seed.
    pub fn open(cfg: &RunConfig, seed: Option<u64>) -> Result<Self> {
        match (&cfg.sequence, &cfg.scene) {
            (Some(seq), _) => Ok(Self::Sequence(SequenceReader::open(seq.clone())?)),
            (None, Some(scene)) => Ok(Self::Synthetic(gen_scene(
                scene,
                seed.unwrap_or(scene.seed),
            )?)),
            (None, None) => Err(HifError::Config {
                key: "sequence".into(),
                reason: "the configuration names neither a [sequence] nor a [scene]".into(),
            }),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Self::Sequence(r) => {
                let (a, b) = r.spec().frame_range;
                (b - a + 1) as usize
            }
            Self::Synthetic(frames) => frames.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn has_labels(&self) -> bool {
        match self {
            Self::Sequence(r) => r.has_labels(),
            Self::Synthetic(frames) => frames.iter().all(|f| f.labels.is_some()),
        }
    }

    /// The `i`-th frame of the range, sensor frame.
    pub fn frame(&self, i: usize) -> Result<(ScanFrame<f64>, IngestDiagnostics)> {
        match self {
            Self::Sequence(r) => r.load_frame(r.spec().frame_range.0 + i as u64),
            Self::Synthetic(frames) => Ok((frames[i].clone(), IngestDiagnostics::default())),
        }
    }

    /// Loads a frame and applies the range gate.
    pub fn ingest(
        &self,
        i: usize,
        range: &RangeFilter,
    ) -> Result<(ScanFrame<f64>, IngestDiagnostics)> {
        let (mut scan, mut diag) = self.frame(i)?;
        diag.absorb(range.apply(&mut scan));
        Ok((scan, diag))
    }
}

/// Result of the integration pass.
pub struct Integration {
    pub map: GlobalHeightMap<f64>,
    pub records: Vec<IntegrationRecord>,
}

impl Integration {
    pub fn timings_ms(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.millis).collect()
    }

    pub fn violations(&self) -> usize {
        self.records
            .iter()
            .map(|r| r.invariant_violations.len())
            .sum()
    }
}

/// Integrates every frame of `source` into a fresh map.
pub fn integrate(source: &FrameSource, cfg: &RunConfig, parallel: bool) -> Result<Integration> {
    let mut map = GlobalHeightMap::new(cfg.hif)?.with_parallel(parallel);
    let mut records = Vec::with_capacity(source.len());
    for i in 0..source.len() {
        let (scan, diag) = source.ingest(i, &cfg.range)?;
        let mut record = map.integrate_scan(&scan)?;
        record.diagnostics.absorb(diag);
        records.push(record);
    }
    Ok(Integration { map, records })
}

/// Integrates every frame and classifies it immediately against the map as
/// it stands after that frame.
pub fn integrate_online(
    source: &FrameSource,
    cfg: &RunConfig,
    parallel: bool,
    mut visit: impl FnMut(&ScanFrame<f64>, &[PointClass]) -> Result<()>,
) -> Result<Integration> {
    let mut map = GlobalHeightMap::new(cfg.hif)?.with_parallel(parallel);
    let mut records = Vec::with_capacity(source.len());
    for i in 0..source.len() {
        let (scan, diag) = source.ingest(i, &cfg.range)?;
        let mut record = map.integrate_scan(&scan)?;
        record.diagnostics.absorb(diag);
        records.push(record);
        let (world, _) = transform_to_world(&scan);
        let classes = map.classify_cloud(&world.points);
        visit(&world, &classes)?;
    }
    Ok(Integration { map, records })
}

/// Classifies every ingested point of every frame against the final map,
/// calling `visit` with the world-frame scan and its classes.
pub fn classify_frames(
    source: &FrameSource,
    cfg: &RunConfig,
    map: &GlobalHeightMap<f64>,
    mut visit: impl FnMut(&ScanFrame<f64>, &[PointClass]) -> Result<()>,
) -> Result<()> {
    for i in 0..source.len() {
        let (scan, _) = source.ingest(i, &cfg.range)?;
        let (world, _) = transform_to_world(&scan);
        let classes = map.classify_cloud(&world.points);
        visit(&world, &classes)?;
    }
    Ok(())
}

/// Ground truth of a labelled frame.
pub fn frame_truth(scan: &ScanFrame<f64>) -> Result<Vec<GroundTruth>> {
    let labels = scan.labels.as_ref().ok_or(HifError::Validation(format!(
        "frame {} has no labels",
        scan.index
    )))?;
    Ok(labels
        .iter()
        .map(|l| dataset_io::ground_truth(*l))
        .collect())
}
