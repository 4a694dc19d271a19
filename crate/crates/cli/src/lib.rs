//! Commands behind the `hif` binary: run, eval, bench and generate.
//!
//! Every command is a plain function returning a summary, so tests can call
//! them without spawning a process. The binary maps errors to exit codes
//! with [`exit_code`].

pub mod pipeline;

use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use hif_core::dataset_io::{self, encode_scan, write_labels, write_poses, write_scan_bin};
use hif_core::evaluation::{
    emit_report, runtime_stats, score, AccuracyReport, ReportFormat, RuntimeReport,
};
use hif_core::{load_config, HifError, PointClass, RunConfig, ScanFrame};

use pipeline::{classify_frames, frame_truth, integrate, integrate_online, FrameSource};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_INVARIANT: i32 = 3;

pub const MAP_FILE: &str = "map.hifm";
pub const CLOUD_FILE: &str = "cleaned_map.bin";
pub const TIMING_FILE: &str = "timing.csv";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(HifError),
    /// Some pillars could not be fused during the run.
    Invariant(usize),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "usage error: {msg}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Invariant(n) => write!(f, "{n} pillar fusions violated interval invariants"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<HifError> for CliError {
    fn from(e: HifError) -> Self {
        CliError::Core(e)
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn exit_code(e: &CliError) -> i32 {
    match e {
        CliError::Usage(_) => EXIT_USAGE,
        CliError::Invariant(_) => EXIT_INVARIANT,
        CliError::Core(e) => match e {
            HifError::Config { .. } | HifError::ConfigSyntax { .. } => EXIT_USAGE,
            HifError::Invariant(_) | HifError::Misuse(_) => EXIT_INVARIANT,
            _ => EXIT_DATA,
        },
    }
}

/// Command-line overrides applied on top of the configuration file.
#[derive(Debug, Clone)]
pub struct Options {
    pub no_lhp: bool,
    pub seed: Option<u64>,
    pub format: ReportFormat,
    pub parallel: Option<bool>,
    pub online: Option<bool>,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            no_lhp: false,
            seed: None,
            format: ReportFormat::Csv,
            parallel: None,
            online: None,
        }
    }
}

fn load(config: &Path, opts: &Options) -> CliResult<RunConfig> {
    let mut cfg = load_config(config)?;
    if opts.no_lhp {
        cfg.hif.lhp_enabled = false;
    }
    if let Some(p) = opts.parallel {
        cfg.parallel = p;
    }
    if let Some(o) = opts.online {
        cfg.online = o;
    }
    Ok(cfg)
}

/// Files written so far; removed on drop unless the command succeeded.
struct Outputs {
    files: Vec<PathBuf>,
    committed: bool,
}

impl Outputs {
    fn new() -> Self {
        Self {
            files: Vec::new(),
            committed: false,
        }
    }

    fn create(&mut self, path: PathBuf) -> CliResult<BufWriter<fs::File>> {
        let file = fs::File::create(&path).map_err(|e| HifError::io(&path, e))?;
        self.files.push(path);
        Ok(BufWriter::new(file))
    }

    fn write(&mut self, path: PathBuf, bytes: &[u8]) -> CliResult<()> {
        let mut w = self.create(path.clone())?;
        w.write_all(bytes).map_err(|e| HifError::io(&path, e))?;
        w.flush().map_err(|e| HifError::io(&path, e))?;
        Ok(())
    }

    fn commit(mut self) -> Vec<PathBuf> {
        self.committed = true;
        std::mem::take(&mut self.files)
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if !self.committed {
            for f in &self.files {
                let _ = fs::remove_file(f);
            }
        }
    }
}

fn make_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| HifError::io(dir, e).into())
}

fn report_name(stem: &str, format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => format!("{stem}.csv"),
        ReportFormat::Json => format!("{stem}.json"),
    }
}

/// What a run or eval produced.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub runtime: RuntimeReport,
    pub accuracy: Option<AccuracyReport>,
    pub frames: usize,
    pub pillars: usize,
    pub intervals: usize,
    pub static_points: u64,
    pub dynamic_points: u64,
    pub outputs: Vec<PathBuf>,
}

impl fmt::Display for RunSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = &self.runtime;
        writeln!(
            f,
            "{} frames, {} pillars, {} intervals",
            self.frames, self.pillars, self.intervals
        )?;
        writeln!(
            f,
            "kept {} static points, removed {} dynamic points",
            self.static_points, self.dynamic_points
        )?;
        write!(
            f,
            "integration: {:.3} ms/frame (std {:.3}), {:.2} fps",
            r.mean_ms, r.std_ms, r.fps
        )?;
        if let Some(mb) = r.peak_memory_mb {
            write!(f, ", peak memory {mb:.1} MB")?;
        }
        if let Some(a) = &self.accuracy {
            let pct = |v: Option<f64>| v.map_or("n/a".to_owned(), |x| format!("{x:.2}"));
            write!(f, "\nSA {}  DA {}  AA {}", pct(a.sa), pct(a.da), pct(a.aa))?;
        }
        Ok(())
    }
}

fn run_pipeline(
    config: &Path,
    out: &Path,
    opts: &Options,
    evaluate: bool,
) -> CliResult<RunSummary> {
    let cfg = load(config, opts)?;
    let source = FrameSource::open(&cfg, opts.seed)?;
    if evaluate && !source.has_labels() {
        return Err(HifError::config("sequence.label_dir", "is required for evaluation").into());
    }
    make_dir(out)?;
    let mut outputs = Outputs::new();

    let cloud_path = out.join(CLOUD_FILE);
    let mut cloud = outputs.create(cloud_path.clone())?;
    let mut accuracy = evaluate.then(AccuracyReport::default);
    let (mut kept, mut removed) = (0u64, 0u64);
    let mut buf = Vec::new();
    let mut visit = |world: &ScanFrame<f64>, classes: &[PointClass]| {
        let statics: Vec<_> = world
            .points
            .iter()
            .zip(classes)
            .filter(|(_, c)| **c == PointClass::Static)
            .map(|(p, _)| *p)
            .collect();
        kept += statics.len() as u64;
        removed += (classes.len() - statics.len()) as u64;
        buf.clear();
        encode_scan(&statics, &mut buf);
        cloud
            .write_all(&buf)
            .map_err(|e| HifError::io(&cloud_path, e))?;
        if let Some(acc) = accuracy.as_mut() {
            *acc = acc.merge(&score(classes, &frame_truth(world)?)?);
        }
        Ok(())
    };

    let run = if cfg.online {
        integrate_online(&source, &cfg, cfg.parallel, &mut visit)?
    } else {
        integrate(&source, &cfg, cfg.parallel)?
    };
    let violations = run.violations();
    if violations > 0 {
        for r in &run.records {
            for (key, msg) in &r.invariant_violations {
                eprintln!("frame {}: pillar ({}, {}): {msg}", r.index, key.m, key.n);
            }
        }
        return Err(CliError::Invariant(violations));
    }
    if !cfg.online {
        classify_frames(&source, &cfg, &run.map, &mut visit)?;
    }
    cloud.flush().map_err(|e| HifError::io(&cloud_path, e))?;
    drop(cloud);
    let runtime = runtime_stats(&run.timings_ms())?;

    outputs.write(out.join(MAP_FILE), &run.map.to_bytes())?;

    let mut timing =
        String::from("frame,millis,points,local_pillars,fused,inserted,non_finite,out_of_range\n");
    for r in &run.records {
        timing.push_str(&format!(
            "{},{:.3},{},{},{},{},{},{}\n",
            r.index,
            r.millis,
            r.points,
            r.local_pillars,
            r.fused,
            r.inserted,
            r.diagnostics.non_finite,
            r.diagnostics.out_of_range
        ));
    }
    outputs.write(out.join(TIMING_FILE), timing.as_bytes())?;

    outputs.write(
        out.join(report_name("runtime", opts.format)),
        emit_report(None, Some(&runtime), opts.format).as_bytes(),
    )?;
    if let Some(acc) = &accuracy {
        for format in [ReportFormat::Csv, ReportFormat::Json] {
            outputs.write(
                out.join(report_name("accuracy", format)),
                emit_report(Some(acc), Some(&runtime), format).as_bytes(),
            )?;
        }
    }

    Ok(RunSummary {
        runtime,
        accuracy,
        frames: source.len(),
        pillars: run.map.len(),
        intervals: run.map.interval_count(),
        static_points: kept,
        dynamic_points: removed,
        outputs: outputs.commit(),
    })
}

/// Integrates every frame, then writes the static points of all frames
/// (world frame, scan layout), the serialized map, per-frame timings and a
/// runtime report into `out`.
pub fn cmd_run(config: &Path, out: &Path, opts: &Options) -> CliResult<RunSummary> {
    run_pipeline(config, out, opts, false)
}

/// [`cmd_run`] plus point-level scoring of the accumulated labelled cloud,
/// written as `accuracy.csv` and `accuracy.json`.
pub fn cmd_eval(config: &Path, out: &Path, opts: &Options) -> CliResult<RunSummary> {
    run_pipeline(config, out, opts, true)
}

/// Per-repetition and pooled integration timings.
#[derive(Debug, Clone)]
pub struct BenchSummary {
    pub warmup: usize,
    pub repetitions: Vec<RuntimeReport>,
    pub pooled: RuntimeReport,
}

impl BenchSummary {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("repetition,scans,mean_ms,std_ms,fps\n");
        let rows = self
            .repetitions
            .iter()
            .enumerate()
            .map(|(i, r)| ((i + 1).to_string(), r))
            .chain(std::iter::once(("pooled".to_owned(), &self.pooled)));
        for (name, r) in rows {
            s.push_str(&format!(
                "{name},{},{:.3},{:.3},{:.2}\n",
                r.scans, r.mean_ms, r.std_ms, r.fps
            ));
        }
        s
    }
}

/// Repeats the integration `reps` times after `warmup` discarded passes.
/// The pooled report is computed from all kept timings, so its fps is the
/// inverse of the pooled mean.
pub fn cmd_bench(
    config: &Path,
    reps: usize,
    warmup: usize,
    opts: &Options,
) -> CliResult<BenchSummary> {
    if reps < 1 {
        return Err(CliError::Usage("--reps must be at least 1".into()));
    }
    let cfg = load(config, opts)?;
    let source = FrameSource::open(&cfg, opts.seed)?;
    let mut repetitions = Vec::with_capacity(reps);
    let mut pooled = Vec::new();
    for pass in 0..warmup + reps {
        let run = integrate(&source, &cfg, cfg.parallel)?;
        if run.violations() > 0 {
            return Err(CliError::Invariant(run.violations()));
        }
        if pass >= warmup {
            let t = run.timings_ms();
            repetitions.push(runtime_stats(&t)?);
            pooled.extend(t);
        }
    }
    Ok(BenchSummary {
        warmup,
        repetitions,
        pooled: runtime_stats(&pooled)?,
    })
}

/// Writes the configured synthetic scene as a KITTI-style sequence
/// (`velodyne/`, `labels/`, `poses.txt`) plus a `sequence.toml` that runs
/// it with the same filter parameters. Returns the path of that file.
pub fn cmd_generate(config: &Path, out: &Path, opts: &Options) -> CliResult<PathBuf> {
    let cfg = load(config, opts)?;
    let scene = cfg
        .scene
        .as_ref()
        .ok_or_else(|| HifError::config("scene", "generate needs a [scene] section"))?;
    let frames = hif_core::gen_scene::<f64>(scene, opts.seed.unwrap_or(scene.seed))?;
    let scans = out.join("velodyne");
    let labels = out.join("labels");
    make_dir(&scans)?;
    make_dir(&labels)?;
    for f in &frames {
        write_scan_bin(&scans.join(format!("{:06}.bin", f.index)), &f.points)?;
        let l = f.labels.as_deref().unwrap_or(&[]);
        write_labels(&labels.join(format!("{:06}.label", f.index)), l)?;
    }
    let poses: Vec<_> = frames.iter().map(|f| f.pose).collect();
    write_poses(&out.join("poses.txt"), &poses)?;

    let h = &cfg.hif;
    let mut toml = format!(
        "origin_x = {:?}\norigin_y = {:?}\ndx = {:?}\ndy = {:?}\nalpha = {:?}\nbeta = {:?}\n\
         gap_threshold = {:?}\ncontainment_tolerance = {:?}\nstatic_threshold = {:?}\n\
         p_init = {:?}\nclip_lo = {:?}\nclip_hi = {:?}\nlhp_enabled = {}\n\
         compaction_epsilon = {:?}\nparallel = {}\nonline = {}\n",
        h.origin_x,
        h.origin_y,
        h.dx,
        h.dy,
        h.alpha,
        h.beta,
        h.gap_threshold,
        h.containment_tolerance,
        h.static_threshold,
        h.p_init,
        h.clip_lo,
        h.clip_hi,
        h.lhp_enabled,
        h.compaction_epsilon,
        cfg.parallel,
        cfg.online
    );
    if let Some(v) = cfg.range.min_range {
        toml.push_str(&format!("min_range = {v:?}\n"));
    }
    if let Some(v) = cfg.range.max_range {
        toml.push_str(&format!("max_range = {v:?}\n"));
    }
    toml.push_str(&format!(
        "\n[sequence]\nscan_dir = \"velodyne\"\nlabel_dir = \"labels\"\npose_file = \"poses.txt\"\n\
         frame_start = 0\nframe_end = {}\n",
        frames.len() - 1
    ));
    let path = out.join("sequence.toml");
    fs::write(&path, toml).map_err(|e| HifError::io(&path, e))?;
    // Reject anything the reader would not accept.
    dataset_io::load_config(&path)?;
    Ok(path)
}
