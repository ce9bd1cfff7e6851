use skyrmion_core::dataset::*;
use skyrmion_core::dynamics::{run_trajectory, SeededRun, Snapshot, Trajectory};
use skyrmion_core::order::{classify_phase, measure, LabelThresholds, OrderParams, Phase};
use skyrmion_core::params::ModelParams;
use skyrmion_core::sweep::Axis;
use skyrmion_core::vec2::Vec2;
use skyrmion_core::Error;

fn short_run() -> RunSettings {
    RunSettings {
        n_iter: 400,
        record_stride: 15,
        warmup: 100,
        ..RunSettings::default()
    }
}

fn small_images() -> ImageDatasetSpec {
    ImageDatasetSpec {
        total: 20,
        frames_per_run: 4,
        max_runs: 40,
        run: short_run(),
        ..ImageDatasetSpec::desk()
    }
}

fn brute_force_lit(positions: &[Vec2]) -> usize {
    let mut cells: Vec<(i64, i64)> = positions.iter().map(|p| (p.x as i64, p.y as i64)).collect();
    cells.sort();
    cells.dedup();
    cells.len()
}

#[test]
fn frame_of_random_positions_counts_distinct_cells() {
    let run = SeededRun::new(9, ModelParams::default());
    let (state, _) = skyrmion_core::dynamics::init_system(&run).unwrap();
    let frame = render_frame(&state.positions, 36.0, Splat::Binary);
    let lit = frame.lit();
    assert!((1..=129).contains(&lit));
    assert_eq!(lit, brute_force_lit(&state.positions));
    assert_eq!(frame, render_frame(&state.positions, 36.0, Splat::Binary));
}

fn fake_trajectory(n_snaps: usize) -> Trajectory {
    Trajectory {
        box_l: 36.0,
        dt: 1.0,
        record_stride: 15,
        snapshots: (0..n_snaps)
            .map(|k| Snapshot {
                iteration: 15 * (k as u64 + 1),
                positions: vec![Vec2::new(1.5, 2.5)],
                unwrapped: vec![Vec2::new(1.5, 2.5)],
            })
            .collect(),
    }
}

#[test]
fn clip_examples() {
    let traj = fake_trajectory(266);
    assert_eq!(clip_starts(&traj, 0, usize::MAX).len(), 26);
    let run = SeededRun::new(1, ModelParams::default());
    let pc = classify_phase(0.9, 0.0, &LabelThresholds::default()).unwrap();
    let clip = make_clip(&traj, 0, &run, &pc, Splat::Binary).unwrap();
    assert_eq!(clip.frames.len(), 10);
    assert_eq!(clip.one_hot(), [1, 0, 0, 0]);
    assert_eq!(clip.provenance.start_iteration, 15);
    assert_eq!(clip.frames[3].at(1, 2), 255);
    assert!(matches!(make_clip(&traj, 257, &run, &pc, Splat::Binary), Err(Error::InvalidRange(_))));
    let order = OrderParams { s: 0.1, v_bar: 1.0, label: Phase::ML };
    assert_eq!(make_clip(&traj, 256, &run, &order, Splat::Binary).unwrap().one_hot(), [0, 0, 0, 1]);
}

#[test]
fn image_dataset_round_trips() {
    let spec = small_images();
    let built = build_image_dataset(&spec, &GenControl::default()).unwrap();
    let m = &built.manifest;
    assert_eq!(m.counts_per_class["amorphous"], 10);
    assert_eq!(m.counts_per_class["crystal"], 10);
    assert_eq!((m.split.n_train, m.split.n_validation), (16, 4));
    assert!((m.split.train_fraction + m.split.validation_fraction - 1.0).abs() < 1e-15);

    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), &built).unwrap();
    let images = std::fs::read(dir.path().join("images.bin")).unwrap();
    let labels = std::fs::read(dir.path().join("labels.bin")).unwrap();
    let shape = &m.tensors.iter().find(|t| t.path == "images.bin").unwrap().shape;
    assert_eq!(shape, &vec![20, 36, 36]);
    assert_eq!(images.len(), 20 * 36 * 36);
    assert_eq!(labels.len(), 20 * 2);

    let rows = parse_params_csv(&std::fs::read_to_string(dir.path().join("params.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 20);
    assert_eq!(rows.iter().filter(|r| r.split == "train").count(), 16);
    for (k, r) in rows.iter().enumerate() {
        let crystal = r.s > spec.run.thresholds.s0;
        assert_eq!(r.label, if crystal { "crystal" } else { "amorphous" });
        assert_eq!(&labels[2 * k..2 * k + 2], &Phase::crystal_one_hot(crystal));
    }

    // different worker count, same bytes
    assert!(verify_dataset(dir.path(), &GenControl { workers: 2, progress: None }).unwrap().is_empty());
    std::fs::write(dir.path().join("labels.bin"), vec![0u8; labels.len()]).unwrap();
    assert_eq!(verify_dataset(dir.path(), &GenControl::default()).unwrap(), vec!["labels.bin".to_string()]);
}

#[test]
fn stored_order_parameters_recompute_from_provenance() {
    let spec = small_images();
    let built = build_image_dataset(&spec, &GenControl::default()).unwrap();
    let csv = String::from_utf8(built.files.iter().find(|(p, _)| p == "params.csv").unwrap().1.clone()).unwrap();
    let rows = parse_params_csv(&csv).unwrap();
    for r in rows.iter().take(3) {
        let order = recompute_row(r, &spec.run).unwrap();
        assert!((order.s - r.s).abs() < 1e-9 && (order.v_bar - r.v_bar).abs() < 1e-9);
    }
}

#[test]
fn video_quota_shortfall_names_the_class() {
    // a plane with no pinning at all cannot yield pinned clips
    let spec = VideoDatasetSpec {
        total: 8,
        f_p: Axis::new(0.0, 0.0, 1),
        f_d: Axis::new(0.03, 0.05, 2),
        clips_per_run: 1,
        max_runs: 6,
        test_grid: None,
        probe_count: 0,
        run: short_run(),
        ..VideoDatasetSpec::desk()
    };
    match build_video_dataset(&spec, &GenControl::default()) {
        Err(Error::Generation(msg)) => assert!(msg.contains("PG") && msg.contains("PC"), "{msg}"),
        other => panic!("expected a shortfall, got {other:?}"),
    }
}

#[test]
fn short_run_labels_match_measurement() {
    let run = SeededRun::new(2, ModelParams::default().with_forces(0.0, 0.05));
    let s = short_run();
    let traj = run_trajectory(&run, s.n_iter, s.record_stride).unwrap();
    let order = measure(&traj, &s.thresholds, s.warmup).unwrap();
    assert_eq!(order.label, classify_phase(order.s, order.v_bar, &s.thresholds).unwrap().label);
    assert!(order.label.is_moving());
}
