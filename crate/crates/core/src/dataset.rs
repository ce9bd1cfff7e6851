//! Rasterised frames, 10-frame clips and the labelled image/video datasets built from them.
//!
//! A dataset directory holds raw little-endian `u8` tensors, a `params.csv` with one row per
//! sample and `manifest.json`, written last. The manifest embeds the generating spec, so a
//! dataset can be rebuilt from it and compared byte for byte.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::{run_trajectory, SeededRun, Trajectory, DEFAULT_ITERATIONS, DEFAULT_RECORD_STRIDE};
use crate::error::{Error, Result};
use crate::order::{classify_phase, measure, LabelThresholds, OrderParams, Phase, DEFAULT_WARMUP};
use crate::params::ModelParams;
use crate::report::ReportConstants;
use crate::sweep::Axis;
use crate::vec2::Vec2;

pub const FRAME_SIDE: usize = 36;
pub const FRAME_PIXELS: usize = FRAME_SIDE * FRAME_SIDE;
pub const CLIP_FRAMES: usize = 10;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;
pub const PARAMS_HEADER: &str = "index,seed,f_p,f_d,xi_s,xi_d,start_iteration,s,v_bar,label,split";

/// Class order of the uneven video mix, with its fractions.
pub const UNEVEN_MIX: [(Phase, f64); 4] = [(Phase::PG, 0.40), (Phase::MC, 0.35), (Phase::PC, 0.20), (Phase::ML, 0.05)];

/// Runs launched together; fixed so results never depend on the worker count.
const CHUNK: usize = 8;

const STREAM_MAIN: u64 = 1;
const STREAM_TEST: u64 = 2;
const STREAM_SHUFFLE: u64 = 3;
const STREAM_PROBE: u64 = 4;
const STREAM_IMAGE_DRAW: u64 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Splat {
    /// The pixel under each skyrmion is 255.
    #[default]
    Binary,
    /// 3x3 kernel: 255 centre, 128 edges, 64 corners, combined by maximum.
    Gaussian,
}

/// One 36x36 frame, row-major with rows along y.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub pixels: Vec<u8>,
}

impl Frame {
    pub fn at(&self, ix: usize, iy: usize) -> u8 {
        self.pixels[iy * FRAME_SIDE + ix]
    }

    pub fn lit(&self) -> usize {
        self.pixels.iter().filter(|&&p| p > 0).count()
    }
}

/// Rasterise wrapped positions; one pixel spans `box_l / 36` length units.
pub fn render_frame(positions: &[Vec2], box_l: f64, splat: Splat) -> Frame {
    let mut pixels = vec![0u8; FRAME_PIXELS];
    let scale = FRAME_SIDE as f64 / box_l;
    let cell = |v: f64| ((v * scale).floor().max(0.0) as usize).min(FRAME_SIDE - 1);
    for p in positions {
        let (ix, iy) = (cell(p.x), cell(p.y));
        match splat {
            Splat::Binary => pixels[iy * FRAME_SIDE + ix] = 255,
            Splat::Gaussian => {
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        let value = match dx.abs() + dy.abs() {
                            0 => 255,
                            1 => 128,
                            _ => 64,
                        };
                        let x = (ix as i64 + dx).rem_euclid(FRAME_SIDE as i64) as usize;
                        let y = (iy as i64 + dy).rem_euclid(FRAME_SIDE as i64) as usize;
                        let px = &mut pixels[y * FRAME_SIDE + x];
                        *px = (*px).max(value);
                    }
                }
            }
        }
    }
    Frame { pixels }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipProvenance {
    pub seed: u64,
    pub f_p: f64,
    pub f_d: f64,
    pub start_iteration: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VideoClip {
    pub frames: Vec<Frame>,
    pub label: Phase,
    pub provenance: ClipProvenance,
}

impl VideoClip {
    pub fn one_hot(&self) -> [u8; 4] {
        self.label.one_hot()
    }
}

/// Ten consecutive snapshots from index `start`, labelled with the run's order parameters.
pub fn make_clip(
    trajectory: &Trajectory,
    start: usize,
    run: &SeededRun,
    order: &OrderParams,
    splat: Splat,
) -> Result<VideoClip> {
    let end = start
        .checked_add(CLIP_FRAMES)
        .filter(|&e| e <= trajectory.snapshots.len())
        .ok_or_else(|| {
            Error::InvalidRange(format!(
                "clip at snapshot {start} needs {CLIP_FRAMES} frames, trajectory has {}",
                trajectory.snapshots.len()
            ))
        })?;
    let frames = trajectory.snapshots[start..end]
        .iter()
        .map(|s| render_frame(&s.positions, trajectory.box_l, splat))
        .collect();
    Ok(VideoClip {
        frames,
        label: order.label,
        provenance: ClipProvenance {
            seed: run.seed,
            f_p: run.params.f_p,
            f_d: run.params.f_d,
            start_iteration: trajectory.snapshots[start].iteration,
        },
    })
}

/// Start indices of the non-overlapping clips that begin at or after `warmup`.
pub fn clip_starts(trajectory: &Trajectory, warmup: u64, max_clips: usize) -> Vec<usize> {
    let first = trajectory.snapshots.len() - trajectory.after_warmup(warmup).len();
    (first..)
        .step_by(CLIP_FRAMES)
        .take_while(|s| s + CLIP_FRAMES <= trajectory.snapshots.len())
        .take(max_clips)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Proportions {
    #[default]
    Balanced,
    /// PG 40%, MC 35%, PC 20%, ML 5%.
    Uneven,
}

/// Largest-remainder apportionment of `total` over `weights`; ties go to the earlier entry.
pub fn apportion(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| (e + 1e-9).floor() as usize).collect();
    let mut left = total.saturating_sub(counts.iter().sum());
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (exact[a] - counts[a] as f64, exact[b] - counts[b] as f64);
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for &k in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[k] += 1;
        left -= 1;
    }
    counts
}

/// Per-class clip counts indexed by [`Phase::index`].
pub fn class_quotas(total: usize, proportions: Proportions) -> [usize; 4] {
    let mut out = [0; 4];
    match proportions {
        Proportions::Balanced => {
            let counts = apportion(total, &[1.0; 4]);
            for p in Phase::ALL {
                out[p.index()] = counts[p.index()];
            }
        }
        Proportions::Uneven => {
            let counts = apportion(total, &UNEVEN_MIX.map(|(_, w)| w));
            for (k, (p, _)) in UNEVEN_MIX.iter().enumerate() {
                out[p.index()] = counts[k];
            }
        }
    }
    out
}

/// Per-run simulation settings shared by every sample of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSettings {
    pub n_iter: u64,
    pub record_stride: u64,
    pub warmup: u64,
    pub params: ModelParams,
    pub thresholds: LabelThresholds,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            n_iter: DEFAULT_ITERATIONS,
            record_stride: DEFAULT_RECORD_STRIDE,
            warmup: DEFAULT_WARMUP,
            params: ModelParams::default(),
            thresholds: LabelThresholds::default(),
        }
    }
}

impl RunSettings {
    fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.thresholds.validate()?;
        if self.record_stride == 0 || self.n_iter < self.warmup + CLIP_FRAMES as u64 * self.record_stride {
            return Err(Error::InvalidParameter(
                "n_iter must leave at least one clip of snapshots after warmup".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Span {
    pub min: f64,
    pub max: f64,
}

impl Span {
    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.max > self.min {
            rng.gen_range(self.min..self.max)
        } else {
            self.min
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageDatasetSpec {
    pub total: usize,
    pub seed: u64,
    /// Skyrmion sizes cycled over runs.
    pub xi_s: Vec<f64>,
    /// Trap radii cycled over runs.
    pub xi_d: Vec<f64>,
    pub f_p: Span,
    pub f_d: Span,
    /// Frames taken per run, evenly spaced after warmup.
    pub frames_per_run: usize,
    pub train_fraction: f64,
    #[serde(default)]
    pub splat: Splat,
    pub max_runs: usize,
    pub run: RunSettings,
}

impl ImageDatasetSpec {
    pub fn desk() -> Self {
        ImageDatasetSpec {
            total: 1000,
            seed: 1,
            xi_s: vec![2.0, 2.5, 3.0, 3.5],
            xi_d: vec![0.2, 0.3, 0.4],
            f_p: Span { min: 0.0, max: 0.3 },
            f_d: Span { min: 0.0, max: 0.065 },
            frames_per_run: 20,
            train_fraction: 0.8,
            splat: Splat::Binary,
            max_runs: 400,
            run: RunSettings::default(),
        }
    }

    pub fn full() -> Self {
        ImageDatasetSpec {
            total: 16_800,
            max_runs: 4_000,
            ..ImageDatasetSpec::desk()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.run.validate()?;
        validate_common(self.total, self.train_fraction, self.max_runs)?;
        if self.xi_s.is_empty() || self.xi_d.is_empty() || self.frames_per_run == 0 {
            return Err(Error::InvalidParameter(
                "image spec needs xi_s, xi_d values and frames_per_run >= 1".into(),
            ));
        }
        for &(a, b) in &[(self.f_p.min, self.f_p.max), (self.f_d.min, self.f_d.max)] {
            if !(a >= 0.0 && b >= a && b.is_finite()) {
                return Err(Error::InvalidParameter(format!("bad force span [{a}, {b}]")));
            }
        }
        for &s in &self.xi_s {
            for &d in &self.xi_d {
                self.run.params.clone().sized(s, d).validate()?;
            }
        }
        Ok(())
    }
}

/// An evenly spaced grid with one clip per point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestGrid {
    pub f_p: Axis,
    pub f_d: Axis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VideoDatasetSpec {
    pub total: usize,
    pub seed: u64,
    #[serde(default)]
    pub proportions: Proportions,
    /// Sampling plane; explored cell by cell, then revisited where unfilled classes appear.
    pub f_p: Axis,
    pub f_d: Axis,
    pub clips_per_run: usize,
    pub train_fraction: f64,
    #[serde(default)]
    pub splat: Splat,
    pub max_runs: usize,
    pub test_grid: Option<TestGrid>,
    /// Samples drawn from the main set into the probe set.
    pub probe_count: usize,
    pub run: RunSettings,
}

impl VideoDatasetSpec {
    pub fn desk() -> Self {
        VideoDatasetSpec {
            total: 1600,
            seed: 1,
            proportions: Proportions::Balanced,
            f_p: Axis::new(0.0, 0.3, 6),
            f_d: Axis::new(0.0, 0.065, 7),
            clips_per_run: 20,
            train_fraction: 0.8,
            splat: Splat::Binary,
            max_runs: 400,
            test_grid: Some(TestGrid {
                f_p: Axis::new(0.0, 0.3, 6),
                f_d: Axis::new(0.0, 0.065, 4),
            }),
            probe_count: 80,
            run: RunSettings::default(),
        }
    }

    pub fn full() -> Self {
        VideoDatasetSpec {
            total: 15_960,
            f_p: Axis::new(0.0, 0.6, 30),
            f_d: Axis::new(0.0, 0.06, 28),
            max_runs: 6_000,
            test_grid: Some(TestGrid {
                f_p: Axis::new(0.0, 0.6, 30),
                f_d: Axis::new(0.0, 0.06, 28),
            }),
            probe_count: 2520,
            ..VideoDatasetSpec::desk()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.run.validate()?;
        validate_common(self.total, self.train_fraction, self.max_runs)?;
        for axis in [&self.f_p, &self.f_d] {
            if axis.count == 0 || !(axis.min >= 0.0 && axis.max >= axis.min) {
                return Err(Error::InvalidParameter(format!("bad sampling axis {axis:?}")));
            }
        }
        if let Some(g) = &self.test_grid {
            if g.f_p.count == 0 || g.f_d.count == 0 {
                return Err(Error::InvalidParameter("test grid axes need count >= 1".into()));
            }
        }
        if self.clips_per_run == 0 {
            return Err(Error::InvalidParameter("clips_per_run must be >= 1".into()));
        }
        if self.probe_count > self.total {
            return Err(Error::InvalidParameter(format!(
                "probe_count {} exceeds total {}",
                self.probe_count, self.total
            )));
        }
        Ok(())
    }
}

fn validate_common(total: usize, train_fraction: f64, max_runs: usize) -> Result<()> {
    if total == 0 || max_runs == 0 {
        return Err(Error::InvalidParameter("total and max_runs must be >= 1".into()));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "train_fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DatasetSpec {
    Images(ImageDatasetSpec),
    Videos(VideoDatasetSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorInfo {
    pub name: String,
    pub path: String,
    pub dtype: String,
    pub shape: Vec<usize>,
    /// Row-major; the last two image axes are (y, x).
    pub order: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitInfo {
    pub train_fraction: f64,
    pub validation_fraction: f64,
    /// Samples are stored shuffled; the first `n_train` are for training.
    pub n_train: usize,
    pub n_validation: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub code_version: String,
    pub seed: u64,
    pub class_names: Vec<String>,
    pub proportion_mode: String,
    pub counts_per_class: BTreeMap<String, usize>,
    pub split: SplitInfo,
    pub splat: Splat,
    pub labeling: ReportConstants,
    pub runs: usize,
    pub failed_runs: usize,
    pub tensors: Vec<TensorInfo>,
    pub files: Vec<FileEntry>,
    pub spec: DatasetSpec,
    /// Configuration that produced this output, when run from a config.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

/// A dataset held in memory, ready to be written.
#[derive(Debug, Clone, PartialEq)]
pub struct BuiltDataset {
    pub manifest: DatasetManifest,
    /// Relative path and contents, in write order.
    pub files: Vec<(String, Vec<u8>)>,
}

/// Optional execution knobs; they never change the output.
#[derive(Default)]
pub struct GenControl<'a> {
    /// Worker threads; 0 lets the pool decide.
    pub workers: usize,
    /// Called after each batch with (runs so far, samples so far).
    pub progress: Option<&'a (dyn Fn(usize, usize) + Sync)>,
}

/// Seed of run `k` in `stream`, decorrelated from the global seed by a SplitMix64 finaliser.
pub fn derive_seed(global: u64, stream: u64, k: u64) -> u64 {
    let mut z = global
        .wrapping_add(stream.wrapping_mul(0xD1B5_4A32_D192_ED03))
        .wrapping_add(k.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq)]
struct SampleRow {
    seed: u64,
    f_p: f64,
    f_d: f64,
    xi_s: f64,
    xi_d: f64,
    start_iteration: u64,
    s: f64,
    v_bar: f64,
    label: String,
}

#[derive(Debug, Clone)]
struct Sample {
    pixels: Vec<u8>,
    one_hot: Vec<u8>,
    class: usize,
    row: SampleRow,
}

struct RunOutcome {
    run: SeededRun,
    order: OrderParams,
    trajectory: Trajectory,
}

fn simulate(run: SeededRun, settings: &RunSettings) -> Option<RunOutcome> {
    let trajectory = run_trajectory(&run, settings.n_iter, settings.record_stride).ok()?;
    let order = measure(&trajectory, &settings.thresholds, settings.warmup).ok()?;
    Some(RunOutcome { run, order, trajectory })
}

fn simulate_batch(runs: Vec<SeededRun>, settings: &RunSettings) -> Vec<Option<RunOutcome>> {
    runs.into_par_iter().map(|r| simulate(r, settings)).collect()
}

fn in_pool<T: Send>(workers: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    if workers == 0 {
        return f();
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))?
        .install(f)
}

fn clip_sample(outcome: &RunOutcome, start: usize, splat: Splat) -> Result<Sample> {
    let clip = make_clip(&outcome.trajectory, start, &outcome.run, &outcome.order, splat)?;
    let p = &outcome.run.params;
    Ok(Sample {
        pixels: clip.frames.iter().flat_map(|f| f.pixels.iter().copied()).collect(),
        one_hot: clip.one_hot().to_vec(),
        class: clip.label.index(),
        row: SampleRow {
            seed: clip.provenance.seed,
            f_p: p.f_p,
            f_d: p.f_d,
            xi_s: p.xi_s,
            xi_d: p.pin_radius,
            start_iteration: clip.provenance.start_iteration,
            s: outcome.order.s,
            v_bar: outcome.order.v_bar,
            label: clip.label.to_string(),
        },
    })
}

fn class_names(quota_len: usize) -> Vec<String> {
    if quota_len == 2 {
        vec!["amorphous".into(), "crystal".into()]
    } else {
        Phase::ALL.iter().map(|p| p.to_string()).collect()
    }
}

fn shortfall(names: &[String], quotas: &[usize], taken: &[usize], runs: usize) -> Error {
    let missing: Vec<String> = (0..quotas.len())
        .filter(|&k| taken[k] < quotas[k])
        .map(|k| format!("{} ({} of {})", names[k], taken[k], quotas[k]))
        .collect();
    Error::Generation(format!(
        "class shortfall after {runs} runs: {}",
        missing.join(", ")
    ))
}

pub fn build_video_dataset(spec: &VideoDatasetSpec, control: &GenControl<'_>) -> Result<BuiltDataset> {
    spec.validate()?;
    in_pool(control.workers, || video_samples(spec, control))
}

fn video_samples(spec: &VideoDatasetSpec, control: &GenControl<'_>) -> Result<BuiltDataset> {
    let quotas = class_quotas(spec.total, spec.proportions);
    let names = class_names(4);
    let (fps, fds) = (spec.f_p.values(), spec.f_d.values());
    let cells: Vec<(f64, f64)> = fps.iter().flat_map(|&p| fds.iter().map(move |&d| (p, d))).collect();
    let mut seen = vec![[false; 4]; cells.len()];
    let mut taken = [0usize; 4];
    let mut samples: Vec<Sample> = Vec::new();
    let (mut runs, mut failed) = (0usize, 0usize);
    let full = |taken: &[usize; 4]| (0..4).all(|k| taken[k] >= quotas[k]);

    let mut first_pass = true;
    while !full(&taken) {
        let queue: Vec<usize> = if first_pass {
            (0..cells.len()).collect()
        } else {
            (0..cells.len())
                .filter(|&c| (0..4).any(|k| seen[c][k] && taken[k] < quotas[k]))
                .collect()
        };
        if queue.is_empty() {
            return Err(shortfall(&names, &quotas, &taken, runs));
        }
        for chunk in queue.chunks(CHUNK) {
            if full(&taken) {
                break;
            }
            let room = spec.max_runs - runs;
            if room == 0 {
                return Err(shortfall(&names, &quotas, &taken, runs));
            }
            let chunk = &chunk[..chunk.len().min(room)];
            let batch: Vec<SeededRun> = chunk
                .iter()
                .enumerate()
                .map(|(k, &c)| {
                    let seed = derive_seed(spec.seed, STREAM_MAIN, (runs + k) as u64);
                    SeededRun::new(seed, spec.run.params.clone().with_forces(cells[c].0, cells[c].1))
                })
                .collect();
            runs += batch.len();
            for (&c, outcome) in chunk.iter().zip(simulate_batch(batch, &spec.run)) {
                let Some(outcome) = outcome else {
                    failed += 1;
                    continue;
                };
                let class = outcome.order.label.index();
                seen[c][class] = true;
                for start in clip_starts(&outcome.trajectory, spec.run.warmup, spec.clips_per_run) {
                    if taken[class] >= quotas[class] {
                        break;
                    }
                    samples.push(clip_sample(&outcome, start, spec.splat)?);
                    taken[class] += 1;
                }
            }
            if let Some(progress) = control.progress {
                progress(runs, samples.len());
            }
        }
        first_pass = false;
    }

    let mut test = Vec::new();
    if let Some(grid) = &spec.test_grid {
        let points: Vec<(f64, f64)> = grid
            .f_p
            .values()
            .into_iter()
            .flat_map(|p| grid.f_d.values().into_iter().map(move |d| (p, d)))
            .collect();
        for (n, chunk) in points.chunks(CHUNK).enumerate() {
            let batch: Vec<SeededRun> = chunk
                .iter()
                .enumerate()
                .map(|(k, &(p, d))| {
                    let seed = derive_seed(spec.seed, STREAM_TEST, (n * CHUNK + k) as u64);
                    SeededRun::new(seed, spec.run.params.clone().with_forces(p, d))
                })
                .collect();
            for outcome in simulate_batch(batch, &spec.run) {
                let outcome = outcome.ok_or_else(|| {
                    Error::Generation("a test-grid run failed; the grid would have a hole".into())
                })?;
                let start = clip_starts(&outcome.trajectory, spec.run.warmup, 1)[0];
                test.push(clip_sample(&outcome, start, spec.splat)?);
            }
            if let Some(progress) = control.progress {
                progress(runs, samples.len() + test.len());
            }
        }
    }

    let probe_pick = spec.probe_count;
    assemble(
        DatasetSpec::Videos(spec.clone()),
        spec.seed,
        spec.train_fraction,
        spec.splat,
        &spec.run,
        format!("{:?}", spec.proportions).to_lowercase(),
        names,
        samples,
        test,
        probe_pick,
        (runs, failed),
        &[CLIP_FRAMES, FRAME_SIDE, FRAME_SIDE],
        "videos",
    )
}

pub fn build_image_dataset(spec: &ImageDatasetSpec, control: &GenControl<'_>) -> Result<BuiltDataset> {
    spec.validate()?;
    in_pool(control.workers, || image_samples(spec, control))
}

fn image_samples(spec: &ImageDatasetSpec, control: &GenControl<'_>) -> Result<BuiltDataset> {
    let quotas = apportion(spec.total, &[1.0, 1.0]);
    let names = class_names(2);
    let combos: Vec<(f64, f64)> = spec
        .xi_s
        .iter()
        .flat_map(|&s| spec.xi_d.iter().map(move |&d| (s, d)))
        .collect();
    let mut taken = [0usize; 2];
    let mut samples = Vec::new();
    let (mut runs, mut failed) = (0usize, 0usize);
    let mid = 0.5 * (spec.f_p.min + spec.f_p.max);
    while taken[0] < quotas[0] || taken[1] < quotas[1] {
        let room = spec.max_runs - runs;
        if room == 0 {
            return Err(shortfall(&names, &quotas, &taken, runs));
        }
        // once one class is full, draw pinning strengths from the half that favours the other
        let f_p_span = match (taken[0] >= quotas[0], taken[1] >= quotas[1]) {
            (true, false) => Span { min: spec.f_p.min, max: mid },
            (false, true) => Span { min: mid, max: spec.f_p.max },
            _ => spec.f_p,
        };
        let batch: Vec<SeededRun> = (runs..runs + CHUNK.min(room))
            .map(|k| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, STREAM_IMAGE_DRAW, k as u64));
                let (xi_s, xi_d) = combos[k % combos.len()];
                let params = spec
                    .run
                    .params
                    .clone()
                    .sized(xi_s, xi_d)
                    .with_forces(f_p_span.draw(&mut rng), spec.f_d.draw(&mut rng));
                SeededRun::new(derive_seed(spec.seed, STREAM_MAIN, k as u64), params)
            })
            .collect();
        runs += batch.len();
        for outcome in simulate_batch(batch, &spec.run) {
            let Some(outcome) = outcome else {
                failed += 1;
                continue;
            };
            let crystal = outcome.order.s > spec.run.thresholds.s0;
            let class = crystal as usize;
            let window = outcome.trajectory.after_warmup(spec.run.warmup);
            let step = (window.len() / spec.frames_per_run).max(1);
            let p = &outcome.run.params;
            for snap in window.iter().step_by(step).take(spec.frames_per_run) {
                if taken[class] >= quotas[class] {
                    break;
                }
                let frame = render_frame(&snap.positions, outcome.trajectory.box_l, spec.splat);
                samples.push(Sample {
                    pixels: frame.pixels,
                    one_hot: Phase::crystal_one_hot(crystal).to_vec(),
                    class,
                    row: SampleRow {
                        seed: outcome.run.seed,
                        f_p: p.f_p,
                        f_d: p.f_d,
                        xi_s: p.xi_s,
                        xi_d: p.pin_radius,
                        start_iteration: snap.iteration,
                        s: outcome.order.s,
                        v_bar: outcome.order.v_bar,
                        label: names[class].clone(),
                    },
                });
                taken[class] += 1;
            }
        }
        if let Some(progress) = control.progress {
            progress(runs, samples.len());
        }
    }
    assemble(
        DatasetSpec::Images(spec.clone()),
        spec.seed,
        spec.train_fraction,
        spec.splat,
        &spec.run,
        "balanced".into(),
        names,
        samples,
        Vec::new(),
        0,
        (runs, failed),
        &[FRAME_SIDE, FRAME_SIDE],
        "images",
    )
}

fn params_csv(samples: &[Sample], n_train: Option<usize>) -> String {
    let mut out = String::from(PARAMS_HEADER);
    out.push('\n');
    for (i, s) in samples.iter().enumerate() {
        let r = &s.row;
        let split = match n_train {
            Some(n) if i < n => "train",
            Some(_) => "validation",
            None => "test",
        };
        let _ = writeln!(
            out,
            "{i},{},{},{},{},{},{},{},{},{},{split}",
            r.seed, r.f_p, r.f_d, r.xi_s, r.xi_d, r.start_iteration, r.s, r.v_bar, r.label
        );
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    spec: DatasetSpec,
    seed: u64,
    train_fraction: f64,
    splat: Splat,
    run: &RunSettings,
    proportion_mode: String,
    names: Vec<String>,
    mut samples: Vec<Sample>,
    test: Vec<Sample>,
    probe_count: usize,
    (runs, failed_runs): (usize, usize),
    item_shape: &[usize],
    stem: &str,
) -> Result<BuiltDataset> {
    let mut counts_per_class = BTreeMap::new();
    for (k, name) in names.iter().enumerate() {
        counts_per_class.insert(name.clone(), samples.iter().filter(|s| s.class == k).count());
    }
    samples.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_SHUFFLE, 0)));
    let n = samples.len();
    let n_train = ((n as f64) * train_fraction).round() as usize;

    let mut files: Vec<(String, Vec<u8>)> = Vec::new();
    let mut tensors = Vec::new();
    let mut add_set = |prefix: &str, set: &[Sample], n_train: Option<usize>| {
        let shape = |lead: usize, rest: &[usize]| -> Vec<usize> {
            std::iter::once(lead).chain(rest.iter().copied()).collect()
        };
        let data_path = format!("{prefix}{stem}.bin");
        let label_path = format!("{prefix}labels.bin");
        tensors.push(TensorInfo {
            name: format!("{prefix}{stem}").replace('/', "_"),
            path: data_path.clone(),
            dtype: "u8".into(),
            shape: shape(set.len(), item_shape),
            order: "C".into(),
        });
        tensors.push(TensorInfo {
            name: format!("{prefix}labels").replace('/', "_"),
            path: label_path.clone(),
            dtype: "u8".into(),
            shape: vec![set.len(), names.len()],
            order: "C".into(),
        });
        files.push((data_path, set.iter().flat_map(|s| s.pixels.iter().copied()).collect()));
        files.push((label_path, set.iter().flat_map(|s| s.one_hot.iter().copied()).collect()));
        files.push((format!("{prefix}params.csv"), params_csv(set, n_train).into_bytes()));
    };
    add_set("", &samples, Some(n_train));
    if !test.is_empty() {
        add_set("test/", &test, None);
    }
    if probe_count > 0 {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_PROBE, 0)));
        let probe: Vec<Sample> = idx[..probe_count].iter().map(|&i| samples[i].clone()).collect();
        add_set("probe/", &probe, None);
    }
    let file_entries = files
        .iter()
        .map(|(path, bytes)| FileEntry {
            path: path.clone(),
            bytes: bytes.len(),
            sha256: hex::encode(Sha256::digest(bytes)),
        })
        .collect();
    let manifest = DatasetManifest {
        format_version: MANIFEST_VERSION,
        code_version: crate::CODE_VERSION.to_string(),
        seed,
        class_names: names,
        proportion_mode,
        counts_per_class,
        split: SplitInfo {
            train_fraction,
            validation_fraction: 1.0 - train_fraction,
            n_train,
            n_validation: n - n_train,
        },
        splat,
        labeling: ReportConstants::new(&run.thresholds, run.warmup),
        runs,
        failed_runs,
        tensors,
        files: file_entries,
        spec,
        config: None,
    };
    Ok(BuiltDataset { manifest, files })
}

pub fn manifest_json(manifest: &DatasetManifest) -> Result<String> {
    let mut s = serde_json::to_string_pretty(manifest)?;
    s.push('\n');
    Ok(s)
}

/// Write all files, then the manifest.
pub fn write_dataset(dir: &Path, built: &BuiltDataset) -> Result<()> {
    for (rel, bytes) in &built.files {
        let path = dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    }
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, manifest_json(&built.manifest)?).map_err(|e| Error::io(&path, e))
}

pub fn read_manifest(dir: &Path) -> Result<DatasetManifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format {
        path,
        message: e.to_string(),
    })
}

pub fn build(spec: &DatasetSpec, control: &GenControl<'_>) -> Result<BuiltDataset> {
    match spec {
        DatasetSpec::Images(s) => build_image_dataset(s, control),
        DatasetSpec::Videos(s) => build_video_dataset(s, control),
    }
}

/// Rebuild a dataset from its manifest and list every file that differs on disk.
pub fn verify_dataset(dir: &Path, control: &GenControl<'_>) -> Result<Vec<String>> {
    let manifest = read_manifest(dir)?;
    let mut rebuilt = build(&manifest.spec, control)?;
    rebuilt.manifest.config = manifest.config.clone();
    let mut differing = Vec::new();
    for (rel, bytes) in &rebuilt.files {
        let path = dir.join(rel);
        if fs::read(&path).ok().as_ref() != Some(bytes) {
            differing.push(rel.clone());
        }
    }
    let on_disk = fs::read(dir.join(MANIFEST_FILE)).map_err(|e| Error::io(dir.join(MANIFEST_FILE), e))?;
    if on_disk != manifest_json(&rebuilt.manifest)?.into_bytes() {
        differing.push(MANIFEST_FILE.into());
    }
    Ok(differing)
}

/// One parsed `params.csv` row.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamsRow {
    pub index: usize,
    pub seed: u64,
    pub f_p: f64,
    pub f_d: f64,
    pub xi_s: f64,
    pub xi_d: f64,
    pub start_iteration: u64,
    pub s: f64,
    pub v_bar: f64,
    pub label: String,
    pub split: String,
}

pub fn parse_params_csv(text: &str) -> std::result::Result<Vec<ParamsRow>, String> {
    let mut lines = text.lines();
    if lines.next() != Some(PARAMS_HEADER) {
        return Err("missing params header".into());
    }
    lines
        .enumerate()
        .map(|(k, line)| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 11 {
                return Err(format!("row {}: expected 11 fields", k + 1));
            }
            let err = |e: &dyn std::fmt::Display| format!("row {}: {e}", k + 1);
            let float = |i: usize| f[i].parse::<f64>().map_err(|e| err(&e));
            let int = |i: usize| f[i].parse::<u64>().map_err(|e| err(&e));
            Ok(ParamsRow {
                index: int(0)? as usize,
                seed: int(1)?,
                f_p: float(2)?,
                f_d: float(3)?,
                xi_s: float(4)?,
                xi_d: float(5)?,
                start_iteration: int(6)?,
                s: float(7)?,
                v_bar: float(8)?,
                label: f[9].to_string(),
                split: f[10].to_string(),
            })
        })
        .collect()
}

/// Recompute a row's order parameters from its provenance and the dataset's run settings.
pub fn recompute_row(row: &ParamsRow, run: &RunSettings) -> Result<OrderParams> {
    let params = run.params.clone().sized(row.xi_s, row.xi_d).with_forces(row.f_p, row.f_d);
    let trajectory = run_trajectory(&SeededRun::new(row.seed, params), run.n_iter, run.record_stride)?;
    let order = measure(&trajectory, &run.thresholds, run.warmup)?;
    classify_phase(order.s, order.v_bar, &run.thresholds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_examples() {
        assert_eq!(render_frame(&[], 36.0, Splat::Binary).lit(), 0);
        let f = render_frame(&[Vec2::new(0.5, 0.5)], 36.0, Splat::Binary);
        assert_eq!(f.lit(), 1);
        assert_eq!(f.at(0, 0), 255);
        let f = render_frame(&[Vec2::new(3.2, 7.9)], 36.0, Splat::Binary);
        assert_eq!(f.at(3, 7), 255);
        let g = render_frame(&[Vec2::new(0.5, 0.5)], 36.0, Splat::Gaussian);
        assert_eq!(g.lit(), 9);
        assert_eq!((g.at(0, 0), g.at(1, 0), g.at(35, 35)), (255, 128, 64));
    }

    #[test]
    fn quotas() {
        assert_eq!(class_quotas(15_960, Proportions::Uneven), [3192, 5586, 6384, 798]);
        assert_eq!(class_quotas(1600, Proportions::Balanced), [400; 4]);
        assert_eq!(class_quotas(1602, Proportions::Balanced), [401, 401, 400, 400]);
        let u = class_quotas(101, Proportions::Uneven);
        assert_eq!(u.iter().sum::<usize>(), 101);
        assert_eq!(apportion(10, &[1.0, 1.0, 1.0]), vec![4, 3, 3]);
    }

    #[test]
    fn derived_seeds_differ() {
        let a: Vec<u64> = (0..100).map(|k| derive_seed(1, STREAM_MAIN, k)).collect();
        let mut b = a.clone();
        b.sort();
        b.dedup();
        assert_eq!(b.len(), 100);
        assert_ne!(derive_seed(1, STREAM_MAIN, 0), derive_seed(1, STREAM_TEST, 0));
    }

    #[test]
    fn presets_validate() {
        VideoDatasetSpec::desk().validate().unwrap();
        VideoDatasetSpec::full().validate().unwrap();
        ImageDatasetSpec::desk().validate().unwrap();
        ImageDatasetSpec::full().validate().unwrap();
        let mut s = VideoDatasetSpec::desk();
        s.probe_count = s.total + 1;
        assert!(s.validate().is_err());
    }
}
