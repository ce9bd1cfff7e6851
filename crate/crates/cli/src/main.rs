mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use skyrmion_core::dataset::{self, BuiltDataset, GenControl};
use skyrmion_core::dynamics::{run_trajectory, SeededRun};
use skyrmion_core::order::measure;
use skyrmion_core::render::{diagram_svg, scatter_svg, write_svg};
use skyrmion_core::report::{parse_report_csv, write_report, ReportConstants, ReportRow};
use skyrmion_core::sweep::{
    depinning_violations, run_sweep, topology, zero_drive_crossing, PhaseDiagram, SweepControl, TopologyReport,
};
use skyrmion_core::{trajio, Error};

use config::{ConfigError, Preset, RunConfig};

#[derive(Parser)]
#[command(name = "skyrmion", version, about = "Driven skyrmion dynamics: simulate, sweep, build datasets")]
struct Cli {
    /// TOML file laid over the preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "desk")]
    preset: Preset,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores). Results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output file or directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one run and dump its trajectory.
    Simulate {
        #[arg(long)]
        fp: Option<f64>,
        #[arg(long)]
        fd: Option<f64>,
        #[arg(long)]
        n_iter: Option<u64>,
    },
    /// Order parameters and phase label of a trajectory dump.
    Analyze { trajectory: PathBuf },
    /// Phase diagram over the (f_p, f_d) grid; resumes from the checkpoint in the output directory.
    Sweep {
        /// Discard an existing checkpoint.
        #[arg(long)]
        fresh: bool,
    },
    /// Build or verify a dataset directory.
    Dataset {
        #[command(subcommand)]
        kind: DatasetCommand,
    },
    /// Draw a sweep diagram or an order-parameter scatter as SVG.
    Render {
        /// `sweep.json` written by `sweep`.
        #[arg(long, conflicts_with = "scatter", required_unless_present = "scatter")]
        diagram: Option<PathBuf>,
        /// Report CSV written by `sweep` or `analyze`.
        #[arg(long)]
        scatter: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum DatasetCommand {
    /// Two-class crystal/amorphous frames.
    Images,
    /// Four-class 10-frame clips plus test grid and probe set.
    Videos,
    /// Rebuild a dataset from its manifest and compare every file.
    Verify { dir: PathBuf },
}

/// Everything `sweep` writes to `sweep.json`.
#[derive(Serialize, Deserialize)]
struct SweepOutput {
    code_version: String,
    config: serde_json::Value,
    topology: TopologyReport,
    zero_drive_crossing: Option<f64>,
    depinning_violations: Vec<(usize, usize)>,
    diagram: PhaseDiagram,
}

enum Failure {
    Config(String),
    Run(String),
    Interrupted(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Interrupted => Failure::Interrupted(e.to_string()),
            e => Failure::Run(e.to_string()),
        }
    }
}

fn quote(v: &str) -> String {
    if v.is_empty() || v.contains([' ', '"', '=']) {
        format!("{v:?}")
    } else {
        v.to_string()
    }
}

fn log(level: &str, event: &str, fields: &[(&str, String)]) {
    let ts = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0);
    let mut line = format!("ts={ts:.3} level={level} event={event}");
    for (k, v) in fields {
        line.push_str(&format!(" {k}={}", quote(v)));
    }
    eprintln!("{line}");
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            log("error", "config", &[("message", m)]);
            ExitCode::from(2)
        }
        Err(Failure::Run(m)) => {
            log("error", "runtime", &[("message", m)]);
            ExitCode::from(1)
        }
        Err(Failure::Interrupted(m)) => {
            log("error", "interrupted", &[("message", m)]);
            ExitCode::from(130)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut cfg = RunConfig::load(cli.preset, cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    if let Some(out) = &cli.out {
        cfg.out = Some(out.clone());
    }
    if let Command::Simulate { fp, fd, n_iter } = &cli.command {
        if let Some(fp) = fp {
            cfg.params.f_p = *fp;
        }
        if let Some(fd) = fd {
            cfg.params.f_d = *fd;
        }
        if let Some(n) = n_iter {
            cfg.run.n_iter = *n;
        }
    }
    cfg.validate()?;
    let out = |default: &str| cfg.out.clone().unwrap_or_else(|| PathBuf::from(default));

    match &cli.command {
        Command::Simulate { .. } => simulate(&cfg, &out("trajectory.bin")),
        Command::Analyze { trajectory } => analyze(&cfg, trajectory, cfg.out.as_deref()),
        Command::Sweep { fresh } => sweep(&cfg, &out("sweep"), *fresh),
        Command::Dataset { kind } => match kind {
            DatasetCommand::Images => {
                let spec = dataset::DatasetSpec::Images(cfg.image_spec());
                build_dataset(&cfg, &spec, &out("dataset-images"))
            }
            DatasetCommand::Videos => {
                let spec = dataset::DatasetSpec::Videos(cfg.video_spec());
                build_dataset(&cfg, &spec, &out("dataset-videos"))
            }
            DatasetCommand::Verify { dir } => verify(&cfg, dir),
        },
        Command::Render { diagram, scatter } => render(&cfg, diagram.as_deref(), scatter.as_deref(), &out("plot.svg")),
    }
}

fn simulate(cfg: &RunConfig, path: &Path) -> Result<(), Failure> {
    let run = SeededRun::new(cfg.seed, cfg.params.clone());
    log(
        "info",
        "simulate.start",
        &[
            ("seed", cfg.seed.to_string()),
            ("f_p", cfg.params.f_p.to_string()),
            ("f_d", cfg.params.f_d.to_string()),
            ("n_iter", cfg.run.n_iter.to_string()),
        ],
    );
    let traj = run_trajectory(&run, cfg.run.n_iter, cfg.run.record_stride)?;
    let mut meta = trajio::TrajectoryMeta::new(cfg.seed, cfg.run.n_iter, &cfg.params, &traj);
    meta.config = Some(cfg.provenance());
    trajio::write(path, &traj, &meta)?;
    log(
        "info",
        "simulate.done",
        &[("out", path.display().to_string()), ("snapshots", traj.snapshots.len().to_string())],
    );
    Ok(())
}

fn analyze(cfg: &RunConfig, path: &Path, report: Option<&Path>) -> Result<(), Failure> {
    let (traj, meta) = trajio::read(path)?;
    let order = measure(&traj, &cfg.labeling, cfg.run.warmup)?;
    println!("s={} v_bar={} label={}", order.s, order.v_bar, order.label);
    if let Some(report) = report {
        let row = ReportRow {
            run_id: path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
            seed: meta.seed,
            f_p: meta.params.f_p,
            f_d: meta.params.f_d,
            s: order.s,
            v_bar: order.v_bar,
            label: order.label,
        };
        let mut constants = ReportConstants::new(&cfg.labeling, cfg.run.warmup);
        constants.config = Some(cfg.provenance());
        write_report(report, &[row], &constants)?;
        log("info", "analyze.report", &[("out", report.display().to_string())]);
    }
    Ok(())
}

fn sweep(cfg: &RunConfig, dir: &Path, fresh: bool) -> Result<(), Failure> {
    let spec = cfg.sweep_spec();
    let checkpoint = dir.join("checkpoint.jsonl");
    if fresh && checkpoint.exists() {
        std::fs::remove_file(&checkpoint).map_err(|e| Failure::Run(format!("{}: {e}", checkpoint.display())))?;
    }
    let cancel = Arc::new(AtomicBool::new(false));
    let flag = cancel.clone();
    if let Err(e) = ctrlc::set_handler(move || flag.store(true, Ordering::SeqCst)) {
        log("warn", "sweep.no_interrupt_handler", &[("message", e.to_string())]);
    }
    log(
        "info",
        "sweep.start",
        &[
            ("cells", (spec.f_p.count * spec.f_d.count).to_string()),
            ("runs", spec.n_runs().to_string()),
            ("checkpoint", checkpoint.display().to_string()),
        ],
    );
    let progress = |done: usize, total: usize| {
        log("info", "sweep.progress", &[("done", done.to_string()), ("total", total.to_string())]);
    };
    let control = SweepControl {
        workers: cfg.workers,
        checkpoint: Some(&checkpoint),
        cancel: Some(&cancel),
        progress: Some(&progress),
    };
    let diagram = match run_sweep(&spec, &control) {
        Err(Error::Interrupted) => {
            return Err(Failure::Interrupted(format!(
                "sweep stopped; finished runs are kept in {}",
                checkpoint.display()
            )))
        }
        other => other?,
    };
    let mut constants = ReportConstants::new(&spec.thresholds, spec.warmup);
    constants.config = Some(cfg.provenance());
    write_report(&dir.join("sweep.csv"), &diagram.report_rows(), &constants)?;
    let output = SweepOutput {
        code_version: skyrmion_core::CODE_VERSION.to_string(),
        config: cfg.provenance(),
        topology: topology(&diagram),
        zero_drive_crossing: zero_drive_crossing(&diagram),
        depinning_violations: depinning_violations(&diagram),
        diagram,
    };
    let json_path = dir.join("sweep.json");
    let mut json = serde_json::to_string_pretty(&output).map_err(Error::from)?;
    json.push('\n');
    std::fs::write(&json_path, json).map_err(|e| Failure::Run(format!("{}: {e}", json_path.display())))?;
    write_svg(&dir.join("diagram.svg"), &diagram_svg(&output.diagram)?)?;
    for (i_p, i_d) in &output.depinning_violations {
        log("warn", "sweep.depinning_violation", &[("i_p", i_p.to_string()), ("i_d", i_d.to_string())]);
    }
    log(
        "info",
        "sweep.done",
        &[
            ("out", dir.display().to_string()),
            ("topology_ok", output.topology.passes().to_string()),
            (
                "zero_drive_crossing",
                output.zero_drive_crossing.map_or("none".into(), |c| c.to_string()),
            ),
        ],
    );
    Ok(())
}

fn build_dataset(cfg: &RunConfig, spec: &dataset::DatasetSpec, dir: &Path) -> Result<(), Failure> {
    let progress = |runs: usize, samples: usize| {
        log("info", "dataset.progress", &[("runs", runs.to_string()), ("samples", samples.to_string())]);
    };
    let control = GenControl {
        workers: cfg.workers,
        progress: Some(&progress),
    };
    let mut built: BuiltDataset = dataset::build(spec, &control)?;
    built.manifest.config = Some(cfg.provenance());
    dataset::write_dataset(dir, &built)?;
    let counts: Vec<String> = built.manifest.counts_per_class.iter().map(|(k, v)| format!("{k}:{v}")).collect();
    log(
        "info",
        "dataset.done",
        &[
            ("out", dir.display().to_string()),
            ("runs", built.manifest.runs.to_string()),
            ("counts", counts.join(",")),
        ],
    );
    Ok(())
}

fn verify(cfg: &RunConfig, dir: &Path) -> Result<(), Failure> {
    let control = GenControl {
        workers: cfg.workers,
        progress: None,
    };
    let differing = dataset::verify_dataset(dir, &control)?;
    if differing.is_empty() {
        println!("identical=true");
        Ok(())
    } else {
        println!("identical=false differing={}", differing.join(","));
        Err(Failure::Run(format!("{} file(s) differ from regeneration", differing.len())))
    }
}

fn render(cfg: &RunConfig, diagram: Option<&Path>, scatter: Option<&Path>, out: &Path) -> Result<(), Failure> {
    let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| Failure::Run(format!("{}: {e}", p.display())));
    let svg = if let Some(p) = diagram {
        let output: SweepOutput =
            serde_json::from_str(&read(p)?).map_err(|e| Failure::Run(format!("{}: {e}", p.display())))?;
        diagram_svg(&output.diagram)?
    } else {
        let p = scatter.expect("clap requires one input");
        let rows = parse_report_csv(&read(p)?).map_err(|e| Failure::Run(format!("{}: {e}", p.display())))?;
        scatter_svg(&rows, &cfg.labeling)?
    };
    write_svg(out, &svg)?;
    log("info", "render.done", &[("out", out.display().to_string())]);
    Ok(())
}
