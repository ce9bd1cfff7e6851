//! Phase-diagram sweeps over the (pinning strength, drive) plane.
//!
//! Every (cell, seed) run is independent. Results land in per-run slots and are
//! aggregated in grid order, so worker count and scheduling never change the output.
//! Completed runs are appended to an optional JSON-lines checkpoint; a restarted sweep
//! skips them.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contour::{extract_contour, Polyline};
use crate::dynamics::{run_trajectory, SeededRun, DEFAULT_ITERATIONS, DEFAULT_RECORD_STRIDE};
use crate::error::{Error, Result};
use crate::order::{measure, LabelThresholds, Phase, DEFAULT_WARMUP};
use crate::params::ModelParams;
use crate::report::ReportRow;

/// Evenly spaced axis including both ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Axis {
    pub fn new(min: f64, max: f64, count: usize) -> Self {
        Axis { min, max, count }
    }

    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min];
        }
        (0..self.count)
            .map(|k| {
                if k + 1 == self.count {
                    self.max
                } else {
                    self.min + (self.max - self.min) * k as f64 / (self.count - 1) as f64
                }
            })
            .collect()
    }

    fn validate(&self, name: &str) -> Result<()> {
        if self.count < 2 || !self.min.is_finite() || !self.max.is_finite() || self.min >= self.max || self.min < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "{name} axis needs 0 <= min < max and count >= 2, got {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub f_p: Axis,
    pub f_d: Axis,
    pub seeds: usize,
    /// Seed `k` of every cell is `base_seed + k`, so cells share initial conditions.
    pub base_seed: u64,
    pub n_iter: u64,
    pub record_stride: u64,
    pub warmup: u64,
    /// Upper bound on cells x seeds.
    pub max_runs: usize,
    pub params: ModelParams,
    pub thresholds: LabelThresholds,
}

impl SweepSpec {
    /// Reduced grid: 6 pinning strengths by 14 drives, 3 seeds.
    pub fn desk() -> Self {
        SweepSpec {
            f_p: Axis::new(0.0, 0.25, 6),
            f_d: Axis::new(0.0, 0.065, 14),
            seeds: 3,
            base_seed: 1,
            n_iter: DEFAULT_ITERATIONS,
            record_stride: DEFAULT_RECORD_STRIDE,
            warmup: DEFAULT_WARMUP,
            max_runs: 5_000,
            params: ModelParams::default(),
            thresholds: LabelThresholds::default(),
        }
    }

    /// 840-point grid (30 pinning strengths by 28 drives), 10 seeds.
    pub fn full() -> Self {
        SweepSpec {
            f_p: Axis::new(0.0, 0.6, 30),
            f_d: Axis::new(0.0, 0.06, 28),
            seeds: 10,
            max_runs: 10_000,
            ..SweepSpec::desk()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.f_p.validate("f_p")?;
        self.f_d.validate("f_d")?;
        self.params.validate()?;
        self.thresholds.validate()?;
        if self.seeds == 0 {
            return Err(Error::InvalidParameter("seeds must be >= 1".into()));
        }
        if self.n_runs() > self.max_runs {
            return Err(Error::InvalidParameter(format!(
                "{} runs exceed the budget of {}",
                self.n_runs(),
                self.max_runs
            )));
        }
        if self.record_stride == 0 || self.n_iter < self.warmup + 2 * self.record_stride {
            return Err(Error::InvalidParameter(
                "n_iter must leave at least two snapshots after warmup".into(),
            ));
        }
        Ok(())
    }

    pub fn n_runs(&self) -> usize {
        self.f_p.count * self.f_d.count * self.seeds
    }

    pub fn seed(&self, k: usize) -> u64 {
        self.base_seed.wrapping_add(k as u64)
    }

    /// Parameters of cell `(i_p, i_d)`.
    pub fn cell_params(&self, i_p: usize, i_d: usize) -> ModelParams {
        let (fp, fd) = (self.f_p.values()[i_p], self.f_d.values()[i_d]);
        self.params.clone().with_forces(fp, fd)
    }
}

/// Outcome of one (cell, seed) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRecord {
    pub i_p: usize,
    pub i_d: usize,
    pub seed: u64,
    pub s: Option<f64>,
    pub v_bar: Option<f64>,
    pub label: Option<Phase>,
    pub error: Option<String>,
}

impl RunRecord {
    fn ok(&self) -> Option<(f64, f64, Phase)> {
        Some((self.s?, self.v_bar?, self.label?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub i_p: usize,
    pub i_d: usize,
    pub f_p: f64,
    pub f_d: f64,
    pub mean_s: f64,
    pub mean_v_bar: f64,
    pub label: Phase,
    pub runs: Vec<RunRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseDiagram {
    pub code_version: String,
    pub spec: SweepSpec,
    pub f_p: Vec<f64>,
    pub f_d: Vec<f64>,
    /// Indexed `i_p * f_d.len() + i_d`.
    pub cells: Vec<Cell>,
    /// Crystal/amorphous boundary: contour of mean `s` at `s0`.
    pub crystal_boundary: Vec<Polyline>,
    /// Moving/pinned boundary: contour of mean `v_bar` at `v0`.
    pub motion_boundary: Vec<Polyline>,
}

impl PhaseDiagram {
    pub fn cell(&self, i_p: usize, i_d: usize) -> &Cell {
        &self.cells[i_p * self.f_d.len() + i_d]
    }

    pub fn label_grid(&self) -> Vec<Vec<Phase>> {
        (0..self.f_p.len())
            .map(|i| (0..self.f_d.len()).map(|j| self.cell(i, j).label).collect())
            .collect()
    }

    /// Per-seed rows in grid order.
    pub fn report_rows(&self) -> Vec<ReportRow> {
        let mut rows = Vec::new();
        for c in &self.cells {
            for r in &c.runs {
                if let Some((s, v_bar, label)) = r.ok() {
                    rows.push(ReportRow {
                        run_id: format!("p{}_d{}", c.i_p, c.i_d),
                        seed: r.seed,
                        f_p: c.f_p,
                        f_d: c.f_d,
                        s,
                        v_bar,
                        label,
                    });
                }
            }
        }
        rows
    }
}

/// Most frequent label; ties go to the pinned, then amorphous side (PG, PC, ML, MC).
pub fn majority_label(labels: &[Phase]) -> Option<Phase> {
    const PREFERENCE: [Phase; 4] = [Phase::PG, Phase::PC, Phase::ML, Phase::MC];
    let count = |p: Phase| labels.iter().filter(|&&l| l == p).count();
    let best = PREFERENCE.iter().map(|&p| count(p)).max()?;
    if best == 0 {
        return None;
    }
    PREFERENCE.into_iter().find(|&p| count(p) == best)
}

/// Simulate and measure one run.
pub fn run_one(spec: &SweepSpec, i_p: usize, i_d: usize, k: usize) -> RunRecord {
    let seed = spec.seed(k);
    let run = SeededRun::new(seed, spec.cell_params(i_p, i_d));
    let result = run_trajectory(&run, spec.n_iter, spec.record_stride)
        .and_then(|t| measure(&t, &spec.thresholds, spec.warmup));
    match result {
        Ok(o) => RunRecord {
            i_p,
            i_d,
            seed,
            s: Some(o.s),
            v_bar: Some(o.v_bar),
            label: Some(o.label),
            error: None,
        },
        Err(e) => RunRecord {
            i_p,
            i_d,
            seed,
            s: None,
            v_bar: None,
            label: None,
            error: Some(e.to_string()),
        },
    }
}

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    spec: SweepSpec,
}

fn read_checkpoint(path: &Path, spec: &SweepSpec) -> Result<Vec<RunRecord>> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::io(path, e)),
    };
    let bad = |message: String| Error::Format {
        path: path.to_path_buf(),
        message,
    };
    let mut lines = BufReader::new(file).lines();
    let Some(first) = lines.next() else {
        return Ok(Vec::new());
    };
    let header: CheckpointHeader =
        serde_json::from_str(&first.map_err(|e| Error::io(path, e))?).map_err(|e| bad(e.to_string()))?;
    if header.spec != *spec {
        return Err(bad("checkpoint belongs to a different sweep spec".into()));
    }
    let mut records = Vec::new();
    for line in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        // a torn final line from an interrupted write is dropped
        match serde_json::from_str::<RunRecord>(&line) {
            Ok(r) => records.push(r),
            Err(_) => break,
        }
    }
    Ok(records)
}

/// Knobs for how a sweep executes; none of them affect its results.
#[derive(Default)]
pub struct SweepControl<'a> {
    /// Worker threads; 0 lets the pool decide.
    pub workers: usize,
    pub checkpoint: Option<&'a Path>,
    /// Checked before each run; when set, finished runs are kept and the sweep stops.
    pub cancel: Option<&'a AtomicBool>,
    /// Called after each completed run with (done, total).
    pub progress: Option<&'a (dyn Fn(usize, usize) + Sync)>,
}

pub fn run_sweep(spec: &SweepSpec, control: &SweepControl<'_>) -> Result<PhaseDiagram> {
    spec.validate()?;
    let (n_p, n_d) = (spec.f_p.count, spec.f_d.count);
    let mut done: HashMap<(usize, usize, u64), RunRecord> = HashMap::new();
    let mut sink: Option<Mutex<File>> = None;
    if let Some(path) = control.checkpoint {
        for r in read_checkpoint(path, spec)? {
            done.insert((r.i_p, r.i_d, r.seed), r);
        }
        let fresh = !path.exists() || fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        if fresh {
            let header = serde_json::to_string(&CheckpointHeader { spec: spec.clone() })?;
            writeln!(f, "{header}").map_err(|e| Error::io(path, e))?;
        }
        sink = Some(Mutex::new(f));
    }

    let mut todo: Vec<(usize, usize, usize)> = Vec::new();
    for i_p in 0..n_p {
        for i_d in 0..n_d {
            for k in 0..spec.seeds {
                if !done.contains_key(&(i_p, i_d, spec.seed(k))) {
                    todo.push((i_p, i_d, k));
                }
            }
        }
    }
    let total = spec.n_runs();
    let finished = std::sync::atomic::AtomicUsize::new(total - todo.len());
    let write_error: Mutex<Option<Error>> = Mutex::new(None);
    let cancelled = || control.cancel.is_some_and(|c| c.load(Ordering::SeqCst));

    let work = || -> Vec<RunRecord> {
        todo.par_iter()
            .filter_map(|&(i_p, i_d, k)| {
                if cancelled() {
                    return None;
                }
                let rec = run_one(spec, i_p, i_d, k);
                if let (Some(sink), Some(path)) = (&sink, control.checkpoint) {
                    let line = serde_json::to_string(&rec).expect("record serializes");
                    let mut f = sink.lock().unwrap();
                    if let Err(e) = writeln!(f, "{line}").and_then(|_| f.flush()) {
                        write_error.lock().unwrap().get_or_insert(Error::io(path, e));
                    }
                }
                let n = finished.fetch_add(1, Ordering::SeqCst) + 1;
                if let Some(progress) = control.progress {
                    progress(n, total);
                }
                Some(rec)
            })
            .collect()
    };
    let fresh_records = if control.workers == 0 {
        work()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(control.workers)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))?
            .install(work)
    };
    if let Some(e) = write_error.into_inner().unwrap() {
        return Err(e);
    }
    for r in fresh_records {
        done.insert((r.i_p, r.i_d, r.seed), r);
    }
    if cancelled() && done.len() < total {
        return Err(Error::Interrupted);
    }
    assemble(spec, done)
}

fn assemble(spec: &SweepSpec, mut done: HashMap<(usize, usize, u64), RunRecord>) -> Result<PhaseDiagram> {
    let (fps, fds) = (spec.f_p.values(), spec.f_d.values());
    let mut cells = Vec::with_capacity(fps.len() * fds.len());
    let mut failed = Vec::new();
    for (i_p, &f_p) in fps.iter().enumerate() {
        for (i_d, &f_d) in fds.iter().enumerate() {
            let runs: Vec<RunRecord> = (0..spec.seeds)
                .map(|k| done.remove(&(i_p, i_d, spec.seed(k))).expect("every run recorded"))
                .collect();
            let good: Vec<(f64, f64, Phase)> = runs.iter().filter_map(RunRecord::ok).collect();
            let Some(label) = majority_label(&good.iter().map(|g| g.2).collect::<Vec<_>>()) else {
                failed.push((i_p, i_d));
                continue;
            };
            let n = good.len() as f64;
            cells.push(Cell {
                i_p,
                i_d,
                f_p,
                f_d,
                mean_s: good.iter().map(|g| g.0).sum::<f64>() / n,
                mean_v_bar: good.iter().map(|g| g.1).sum::<f64>() / n,
                label,
                runs,
            });
        }
    }
    if !failed.is_empty() {
        return Err(Error::Sweep(failed));
    }
    let field = |f: &dyn Fn(&Cell) -> f64| -> Vec<Vec<f64>> {
        (0..fps.len())
            .map(|i| (0..fds.len()).map(|j| f(&cells[i * fds.len() + j])).collect())
            .collect()
    };
    let crystal_boundary = extract_contour(&fps, &fds, &field(&|c| c.mean_s), spec.thresholds.s0)?;
    let motion_boundary = extract_contour(&fps, &fds, &field(&|c| c.mean_v_bar), spec.thresholds.v0)?;
    Ok(PhaseDiagram {
        code_version: crate::CODE_VERSION.to_string(),
        spec: spec.clone(),
        f_p: fps,
        f_d: fds,
        cells,
        crystal_boundary,
        motion_boundary,
    })
}

/// Cells labeled pinned although a lower drive in the same pinning row already moves.
pub fn depinning_violations(diagram: &PhaseDiagram) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i_p in 0..diagram.f_p.len() {
        let mut moving = false;
        for i_d in 0..diagram.f_d.len() {
            let m = diagram.cell(i_p, i_d).label.is_moving();
            if moving && !m {
                out.push((i_p, i_d));
            }
            moving |= m;
        }
    }
    out
}

/// 4-connected components of each label on the grid.
pub fn label_components(labels: &[Vec<Phase>]) -> BTreeMap<Phase, usize> {
    let (n_p, n_d) = (labels.len(), labels.first().map_or(0, Vec::len));
    let mut seen = vec![vec![false; n_d]; n_p];
    let mut counts = BTreeMap::new();
    for i in 0..n_p {
        for j in 0..n_d {
            if seen[i][j] {
                continue;
            }
            let label = labels[i][j];
            *counts.entry(label).or_insert(0) += 1;
            let mut queue = VecDeque::from([(i, j)]);
            seen[i][j] = true;
            while let Some((a, b)) = queue.pop_front() {
                let mut visit = |x: usize, y: usize| {
                    if !seen[x][y] && labels[x][y] == label {
                        seen[x][y] = true;
                        queue.push_back((x, y));
                    }
                };
                if a > 0 {
                    visit(a - 1, b);
                }
                if a + 1 < n_p {
                    visit(a + 1, b);
                }
                if b > 0 {
                    visit(a, b - 1);
                }
                if b + 1 < n_d {
                    visit(a, b + 1);
                }
            }
        }
    }
    counts
}

/// Where the crystal/amorphous boundary meets the lowest-drive edge: the first
/// pinning strength at which the lowest-drive mean `s` falls to `s0`, linearly interpolated.
pub fn zero_drive_crossing(diagram: &PhaseDiagram) -> Option<f64> {
    let s0 = diagram.spec.thresholds.s0;
    let row: Vec<f64> = (0..diagram.f_p.len()).map(|i| diagram.cell(i, 0).mean_s).collect();
    for i in 0..row.len().saturating_sub(1) {
        let (a, b) = (row[i], row[i + 1]);
        if a > s0 && b <= s0 {
            let t = (a - s0) / (a - b);
            return Some(diagram.f_p[i] + t * (diagram.f_p[i + 1] - diagram.f_p[i]));
        }
    }
    None
}

/// Checks of the four-region arrangement: pinned crystal at weak pinning and drive, pinned
/// glass at strong pinning and weak drive, moving crystal at the strongest drive of the
/// weakest pinning, moving liquid only between glass and moving crystal along each row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyReport {
    pub components: BTreeMap<Phase, usize>,
    pub four_single_regions: bool,
    pub pc_at_weak_corner: bool,
    pub pg_at_strong_low_drive_corner: bool,
    pub mc_at_weak_high_drive_corner: bool,
    pub ml_between_pg_and_mc: bool,
}

impl TopologyReport {
    pub fn passes(&self) -> bool {
        self.four_single_regions
            && self.pc_at_weak_corner
            && self.pg_at_strong_low_drive_corner
            && self.mc_at_weak_high_drive_corner
            && self.ml_between_pg_and_mc
    }
}

pub fn topology(diagram: &PhaseDiagram) -> TopologyReport {
    let labels = diagram.label_grid();
    let components = label_components(&labels);
    let (n_p, n_d) = (diagram.f_p.len(), diagram.f_d.len());
    let four_single_regions = components.len() == 4 && components.values().all(|&c| c == 1);
    let mut ml_between = true;
    for row in &labels {
        for (j, &l) in row.iter().enumerate() {
            if l == Phase::ML
                && (row[j + 1..].contains(&Phase::PG) || row[..j].contains(&Phase::MC))
            {
                ml_between = false;
            }
        }
    }
    TopologyReport {
        components,
        four_single_regions,
        pc_at_weak_corner: labels[0][0] == Phase::PC,
        pg_at_strong_low_drive_corner: labels[n_p - 1][0] == Phase::PG,
        mc_at_weak_high_drive_corner: labels[0][n_d - 1] == Phase::MC,
        ml_between_pg_and_mc: ml_between,
    }
}
