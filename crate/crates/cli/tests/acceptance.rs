//! One PASS/FAIL line per acceptance criterion. Criteria listed in `KNOWN_RED` are reported
//! but do not fail the target; anything else failing does.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use skyrmion_core::bessel::bessel_k1;
use skyrmion_core::dataset::{self, class_quotas, GenControl, Proportions, TestGrid, VideoDatasetSpec};
use skyrmion_core::dynamics::Snapshot;
use skyrmion_core::forces::solve_velocity;
use skyrmion_core::order::{compute_rdf, LabelThresholds};
use skyrmion_core::params::ModelParams;
use skyrmion_core::sweep::{self, Axis, SweepControl, SweepSpec};
use skyrmion_core::vec2::{wrap, Vec2};

const KNOWN_RED: &[&str] = &["phase-diagram"];

type Check = fn() -> Outcome;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn ulps(a: f64, b: f64) -> u64 {
    (a.to_bits() as i64 - b.to_bits() as i64).unsigned_abs()
}

fn analytic_response() -> Outcome {
    let p = ModelParams::default();
    let hall = -(9.962f64).atan();
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let (mut worst_ulps, mut worst_angle) = (0u64, 0f64);
    for _ in 0..10_000 {
        let f = Vec2::new(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0));
        let v = solve_velocity(f, &p);
        worst_ulps = worst_ulps.max(ulps(v.norm(), f.norm()));
        if f.norm() > 1e-12 {
            worst_angle = worst_angle.max((f.signed_angle_to(v) - hall).abs());
        }
    }
    outcome(
        worst_ulps <= 4 && worst_angle < 1e-9,
        format!("max |v|-|F| {worst_ulps} ulps, max angle error {worst_angle:.2e}"),
    )
}

fn series_k1(x: f64) -> f64 {
    const GAMMA: f64 = 0.577_215_664_901_532_9;
    let q = x * x / 4.0;
    let (mut i1, mut tail, mut term, mut h) = (0.0, 0.0, 1.0, 0.0);
    for k in 0..200 {
        let kf = k as f64;
        if k > 0 {
            term *= q / (kf * (kf + 1.0));
            h += 1.0 / kf;
        }
        i1 += term;
        tail += (2.0 * (h - GAMMA) + 1.0 / (kf + 1.0)) * term;
        if term < 1e-22 * i1 {
            break;
        }
    }
    1.0 / x + (x / 2.0).ln() * (x / 2.0) * i1 - x / 4.0 * tail
}

fn quadrature_k1(x: f64) -> f64 {
    let h = 0.005;
    let mut sum = 0.5;
    for k in 1.. {
        let c = (k as f64 * h).cosh();
        let e = -x * (c - 1.0);
        if e < -60.0 {
            break;
        }
        sum += e.exp() * c;
    }
    sum * h * (-x).exp()
}

fn bessel_oracle() -> Outcome {
    let mut worst: f64 = 0.0;
    for i in 0..1000 {
        let x = 1e-3 * (30.0f64 / 1e-3).powf(i as f64 / 999.0);
        let exact = if x <= 3.0 { series_k1(x) } else { quadrature_k1(x) };
        worst = worst.max(((bessel_k1(x).unwrap() - exact) / exact).abs());
    }
    outcome(worst < 1e-8, format!("max relative error {worst:.2e} over 1000 points in [1e-3, 30]"))
}

fn snap(positions: Vec<Vec2>) -> Snapshot {
    Snapshot { iteration: 0, unwrapped: positions.clone(), positions }
}

fn rdf_oracles() -> Outcome {
    let l = 36.0;
    let bins = LabelThresholds::default().bins();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let uniform: Vec<Snapshot> = (0..20)
        .map(|_| snap((0..129).map(|_| Vec2::new(rng.gen::<f64>() * l, rng.gen::<f64>() * l)).collect()))
        .collect();
    let rdf = compute_rdf(&uniform, l, bins).unwrap();
    let outer: Vec<f64> = (0..rdf.g.len()).filter(|&k| rdf.bin_center(k) >= bins.r_max / 2.0).map(|k| rdf.g[k]).collect();
    let mean = outer.iter().sum::<f64>() / outer.len() as f64;

    let (nx, ny) = (26, 30);
    let a = l / nx as f64;
    let mut pts = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let shift = if j % 2 == 1 { 0.5 * a } else { 0.0 };
            pts.push(wrap(Vec2::new(i as f64 * a + shift, j as f64 * l / ny as f64), l));
        }
    }
    let lattice = compute_rdf(&[snap(pts)], l, bins).unwrap();
    let w = lattice.bin_width;
    let mut misses = Vec::new();
    for target in [a, 3f64.sqrt() * a, 2.0 * a] {
        let c = (target / w) as usize;
        let peak = (c.saturating_sub(3)..c + 4).max_by(|&x, &y| lattice.g[x].total_cmp(&lattice.g[y])).unwrap();
        if (lattice.bin_center(peak) - target).abs() > w {
            misses.push(format!("{target:.3}->{:.3}", lattice.bin_center(peak)));
        }
    }
    outcome(
        (0.9..=1.1).contains(&mean) && misses.is_empty(),
        format!("uniform outer mean g {mean:.4}; lattice peaks off by more than one bin: {misses:?}"),
    )
}

fn sha(path: &Path) -> String {
    use sha2::Digest;
    hex::encode(sha2::Sha256::digest(std::fs::read(path).unwrap()))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut hashes = Vec::new();
    for (k, workers) in ["1", "1", "4"].iter().enumerate() {
        let name = format!("t{k}.bin");
        let status = Command::new(env!("CARGO_BIN_EXE_skyrmion"))
            .current_dir(dir.path())
            .args(["simulate", "--seed", "7", "--fp", "0.1", "--fd", "0.01", "--workers", workers, "--out", &name])
            .stderr(std::process::Stdio::null())
            .status()
            .unwrap();
        if !status.success() {
            return outcome(false, format!("simulate exited with {status}"));
        }
        hashes.push(sha(&dir.path().join(&name)) + &sha(&dir.path().join(format!("{name}.json"))));
    }
    let same = hashes.windows(2).all(|w| w[0] == w[1]);
    outcome(same, format!("3 runs (workers 1, 1, 4), identical dump and sidecar: {same}"))
}

fn phase_diagram() -> Outcome {
    let spec = SweepSpec::desk();
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let d = sweep::run_sweep(&spec, &SweepControl { workers, ..Default::default() }).unwrap();
    for (i, f_p) in d.f_p.iter().enumerate() {
        let row: Vec<String> = (0..d.f_d.len()).map(|j| d.cell(i, j).label.to_string()).collect();
        println!("    f_p={f_p:.3} {}", row.join(" "));
    }
    let topo = sweep::topology(&d);
    let crossing = sweep::zero_drive_crossing(&d);
    let crossing_ok = crossing.is_some_and(|c| (c - 0.055).abs() <= 0.02);
    let violations = sweep::depinning_violations(&d);
    outcome(
        topo.passes() && crossing_ok,
        format!(
            "components {:?}, corners ok {}, zero-drive crossing {:?} (target 0.055 +/- 0.02), depinning violations {}",
            topo.components,
            topo.pc_at_weak_corner
                && topo.pg_at_strong_low_drive_corner
                && topo.mc_at_weak_high_drive_corner
                && topo.ml_between_pg_and_mc,
            crossing,
            violations.len()
        ),
    )
}

fn dataset_round_trip() -> Outcome {
    let quotas = class_quotas(15_960, Proportions::Uneven);
    // class order PC, MC, PG, ML
    let quotas_ok = quotas == [3192, 5586, 6384, 798];
    let spec = VideoDatasetSpec {
        total: 400,
        proportions: Proportions::Uneven,
        test_grid: Some(TestGrid { f_p: Axis::new(0.0, 0.3, 3), f_d: Axis::new(0.0, 0.065, 2) }),
        probe_count: 20,
        ..VideoDatasetSpec::desk()
    };
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let control = GenControl { workers, progress: None };
    let dir = tempfile::tempdir().unwrap();
    let built = match dataset::build_video_dataset(&spec, &control) {
        Ok(b) => b,
        Err(e) => return outcome(false, format!("build failed: {e}")),
    };
    dataset::write_dataset(dir.path(), &built).unwrap();
    let differing = dataset::verify_dataset(dir.path(), &control).unwrap();
    outcome(
        quotas_ok && differing.is_empty(),
        format!(
            "uneven quotas at 15960 {quotas:?}; {} clips from {} runs regenerated, differing files {differing:?}",
            spec.total, built.manifest.runs
        ),
    )
}

fn main() {
    let criteria: [(&str, Check); 6] = [
        ("analytic-response", analytic_response),
        ("bessel-oracle", bessel_oracle),
        ("rdf-oracles", rdf_oracles),
        ("determinism", determinism),
        ("phase-diagram", phase_diagram),
        ("dataset-round-trip", dataset_round_trip),
    ];
    let mut unexpected = Vec::new();
    for (name, check) in criteria {
        let t = Instant::now();
        let o = check();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("{verdict} {name} ({:.1}s): {}", t.elapsed().as_secs_f64(), o.detail);
        if !o.pass && !KNOWN_RED.contains(&name) {
            unexpected.push(name);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
