//! Command-line front end.
//!
//! Exit codes: 0 success, 1 error, 2 finished without convergence. Errors
//! are reported as one line on stderr: `error[<kind>]: <message>`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kernreg_core::eval::{self, SweepAxis};
use kernreg_core::innerprod;
use kernreg_core::registration::{register, register_sequence, RegistrationResult};
use kernreg_core::{Isometry, PointCloud, Vector3};
use serde_json::json;

use crate::bench::{self, FeatureMode, Scenario, SynthSpec};
use crate::error::{Error, Result};
use crate::ingest::{self, trajectory, RunConfig, Trajectory, TrajectoryFormat};
use crate::manifest::RunManifest;
use crate::report::{self, format_number, Table, NUMBER_DIGITS, TRANSFORM_DIGITS};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "kernreg", version, about = "Kernel-based rigid point-cloud registration")]
pub struct Cli {
    /// Worker threads (default: all cores). Output does not depend on this.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Register a source cloud onto a target cloud.
    Register(RegisterArgs),
    /// Frame-to-frame registration over a directory of clouds.
    Sequence(SequenceArgs),
    /// Print the alignment indicator of two clouds.
    Indicator(IndicatorArgs),
    /// Indicator of a cloud against perturbed copies of itself.
    Sweep(SweepArgs),
    /// Seeded synthetic recovery benchmark.
    Bench(BenchArgs),
    /// Drift or relative pose error of a trajectory against ground truth.
    Eval(EvalArgs),
    /// Back-project an RGB-D frame into a colored cloud.
    RgbdToCloud(RgbdArgs),
}

#[derive(Debug, Args)]
pub struct RegisterArgs {
    /// Cloud to be moved (`Z`).
    #[arg(long)]
    pub source: PathBuf,
    /// Reference cloud (`X`).
    #[arg(long)]
    pub target: PathBuf,
    #[arg(long)]
    pub config: PathBuf,
    /// Initial transform, one KITTI line.
    #[arg(long)]
    pub initial: Option<PathBuf>,
    #[arg(long)]
    pub output: PathBuf,
    /// Per-iteration CSV trace.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SequenceArgs {
    #[arg(long)]
    pub dir: PathBuf,
    /// File-name pattern inside `--dir`, e.g. `*.ply`; frames are taken in name order.
    #[arg(long)]
    pub pattern: String,
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, value_enum)]
    pub traj_format: TrajFormatArg,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct IndicatorArgs {
    #[arg(long)]
    pub source: PathBuf,
    #[arg(long)]
    pub target: PathBuf,
    #[arg(long)]
    pub config: PathBuf,
    /// Transform applied to the source, one KITTI line (default identity).
    #[arg(long)]
    pub transform: Option<PathBuf>,
    /// Lengthscale (default: the configured initial lengthscale).
    #[arg(long)]
    pub lengthscale: Option<f64>,
    /// Also print the exact cosine from the full double sums.
    #[arg(long)]
    pub exact: bool,
    /// Also write the values as JSON here.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AxisArg {
    Rotation,
    Translation,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub cloud: PathBuf,
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, value_enum)]
    pub axis: AxisArg,
    /// Rotation axis or translation direction as `x,y,z` (default `0,0,1` / `1,0,0`).
    #[arg(long, allow_hyphen_values = true)]
    pub direction: Option<String>,
    /// Largest perturbation: degrees for rotation, meters for translation.
    #[arg(long)]
    pub range: f64,
    #[arg(long, default_value_t = 11)]
    pub steps: usize,
    #[arg(long)]
    pub lengthscale: Option<f64>,
    /// CSV output.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScenarioArg {
    Box,
    Ring,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Geometric,
    Color,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long)]
    pub points: Option<usize>,
    /// Position noise as a fraction of the cloud diameter.
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub rotation_max: Option<f64>,
    /// Translation bound as a fraction of the cloud diameter.
    #[arg(long)]
    pub translation_max: Option<f64>,
    #[arg(long, value_enum, default_value = "box")]
    pub scenario: ScenarioArg,
    #[arg(long, value_enum, default_value = "geometric")]
    pub mode: ModeArg,
    /// Kernel and solver settings (default: built-in settings for the scenario).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// JSON report.
    #[arg(long)]
    pub output: PathBuf,
    /// Per-trial CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Kitti,
    Tum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TrajFormatArg {
    Tum,
    Kitti,
}

impl From<TrajFormatArg> for TrajectoryFormat {
    fn from(f: TrajFormatArg) -> Self {
        match f {
            TrajFormatArg::Tum => TrajectoryFormat::Tum,
            TrajFormatArg::Kitti => TrajectoryFormat::Kitti,
        }
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub est: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long, value_enum)]
    pub metric: MetricArg,
    /// Trajectory file format (default: the metric's native format).
    #[arg(long, value_enum)]
    pub format: Option<TrajFormatArg>,
    /// RPE interval in seconds.
    #[arg(long, default_value_t = 1.0)]
    pub delta: f64,
    /// Frames per second used for the drift speed bins.
    #[arg(long, default_value_t = eval::DEFAULT_FRAME_RATE)]
    pub frame_rate: f64,
    /// JSON report.
    #[arg(long)]
    pub output: PathBuf,
    /// Per-length (drift) or per-pair (RPE) CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RgbdArgs {
    /// 16-bit PGM depth image.
    #[arg(long)]
    pub depth: PathBuf,
    /// PPM color image.
    #[arg(long)]
    pub rgb: PathBuf,
    /// PGM label image for one-hot semantic features.
    #[arg(long, requires = "classes")]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub classes: Option<usize>,
    /// Configuration with a `camera` section.
    #[arg(long)]
    pub config: PathBuf,
    /// `.ply` or `.pcd`.
    #[arg(long)]
    pub output: PathBuf,
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run(args: Vec<String>) -> i32 {
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return EXIT_OK;
            }
            let text = e.to_string();
            let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
            eprintln!("error[usage]: {}", first.trim_start_matches("error: "));
            return EXIT_ERROR;
        }
    };
    match execute(&cli, args) {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_NOT_CONVERGED,
        Err(e) => {
            eprintln!("error[{}]: {}", e.kind(), single_line(&e.to_string()));
            EXIT_ERROR
        }
    }
}

fn single_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Runs a parsed command; `Ok(false)` means it finished without convergence.
pub fn execute(cli: &Cli, args: Vec<String>) -> Result<bool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let mut manifest = RunManifest::new(args);
    let start = Instant::now();
    pool.install(|| match &cli.command {
        Command::Register(a) => cmd_register(a, &mut manifest, start),
        Command::Sequence(a) => cmd_sequence(a, &mut manifest, start),
        Command::Indicator(a) => cmd_indicator(a, &mut manifest, start),
        Command::Sweep(a) => cmd_sweep(a, &mut manifest, start),
        Command::Bench(a) => cmd_bench(a, &mut manifest, start),
        Command::Eval(a) => cmd_eval(a, &mut manifest, start),
        Command::RgbdToCloud(a) => cmd_rgbd(a, &mut manifest, start),
    })
}

fn finish(manifest: &mut RunManifest, start: Instant, output: &Path, summary: serde_json::Value) -> Result<()> {
    manifest.wall_time_seconds = start.elapsed().as_secs_f64();
    manifest.result_summary = summary;
    manifest.write_beside(output)
}

fn load_config(path: &Path, manifest: &mut RunManifest) -> Result<RunConfig> {
    manifest.set_config(path)?;
    ingest::load_config(path)
}

fn read_cloud(path: &Path, manifest: &mut RunManifest) -> Result<PointCloud> {
    manifest.add_input(path)?;
    ingest::read_cloud(path)
}

/// Reads a single KITTI-format transform.
fn read_transform(path: &Path, manifest: &mut RunManifest) -> Result<Isometry> {
    manifest.add_input(path)?;
    let traj = ingest::read_trajectory(path, TrajectoryFormat::Kitti)?;
    match traj.poses.as_slice() {
        [pose] => Ok(*pose),
        poses => Err(Error::parse(path.display().to_string(), 0, format!("expected one transform, found {}", poses.len()))),
    }
}

fn transform_strings(t: &Isometry) -> Vec<String> {
    t.to_row_major_3x4().iter().map(|&v| format_number(v, Some(TRANSFORM_DIGITS))).collect()
}

fn num(v: f64) -> String {
    format_number(v, Some(NUMBER_DIGITS))
}

fn trace_table(result: &RegistrationResult) -> Table {
    let mut t = Table::new(&["iteration", "lengthscale", "F", "indicator", "step", "twist_norm"]);
    for (k, d) in result.diagnostics.iter().enumerate() {
        t.push(vec![(k + 1).to_string(), num(d.lengthscale), num(d.value_f), num(d.indicator), num(d.step), num(d.twist_norm)]);
    }
    t
}

fn cmd_register(a: &RegisterArgs, manifest: &mut RunManifest, start: Instant) -> Result<bool> {
    let config = load_config(&a.config, manifest)?;
    let target = read_cloud(&a.target, manifest)?;
    let source = read_cloud(&a.source, manifest)?;
    let initial = match &a.initial {
        Some(p) => read_transform(p, manifest)?,
        None => Isometry::identity(),
    };
    let (x, z) = config.prepare_pair(&target, &source)?;
    let params = config.kernel_params(config.registration.init_lengthscale);
    let result = register(&x, &z, &initial, &params, &config.registration)?;

    report::write_text(&a.output, &format!("{}\n", trajectory::kitti_line(&result.transform, Some(TRANSFORM_DIGITS))))?;
    if let Some(trace) = &a.trace {
        report::write_text(trace, &trace_table(&result).to_csv())?;
    }
    let summary = json!({
        "converged": result.converged,
        "iterations": result.iterations,
        "final_indicator": num(result.final_indicator),
        "final_lengthscale": result.lengthscale_trace.last().map(|&l| num(l)),
        "transform": transform_strings(&result.transform),
    });
    finish(manifest, start, &a.output, summary)?;
    Ok(result.converged)
}

/// Leading, numeric and trailing parts of a file name whose last digit run is the frame index.
fn split_index(name: &str) -> Option<(&str, &str, &str)> {
    let end = name.rfind(|c: char| c.is_ascii_digit())? + 1;
    let begin = name[..end].rfind(|c: char| !c.is_ascii_digit()).map_or(0, |k| k + 1);
    Some((&name[..begin], &name[begin..end], &name[end..]))
}

/// Frame files in name order; a gap in consistently numbered names is an error naming the missing file.
fn sequence_files(dir: &Path, pattern: &str) -> Result<Vec<PathBuf>> {
    let full = dir.join(pattern);
    let full = full.to_str().ok_or_else(|| Error::Config(format!("non-UTF-8 path {}", full.display())))?;
    let paths = glob::glob(full).map_err(|e| Error::Config(format!("bad pattern '{pattern}': {e}")))?;
    let mut files: Vec<PathBuf> = paths.filter_map(|p| p.ok()).filter(|p| p.is_file()).collect();
    files.sort();
    if files.len() < 2 {
        return Err(Error::Config(format!("pattern {full} matched {} frame file(s), need at least 2", files.len())));
    }
    let names: Vec<String> = files.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
    let parts: Vec<_> = names.iter().map(|n| split_index(n)).collect();
    if let Some((pre, digits, post)) = parts[0] {
        let uniform = parts
            .iter()
            .all(|p| matches!(p, Some((a, d, b)) if *a == pre && *b == post && d.len() == digits.len()));
        if uniform {
            let indices: Vec<u64> = parts.iter().map(|p| p.unwrap().1.parse().unwrap_or(0)).collect();
            for w in indices.windows(2) {
                if w[1] > w[0] + 1 {
                    let missing = format!("{pre}{:0width$}{post}", w[0] + 1, width = digits.len());
                    return Err(Error::io(
                        dir.join(missing),
                        std::io::Error::new(std::io::ErrorKind::NotFound, "missing frame file"),
                    ));
                }
            }
        }
    }
    Ok(files)
}

fn cmd_sequence(a: &SequenceArgs, manifest: &mut RunManifest, start: Instant) -> Result<bool> {
    let config = load_config(&a.config, manifest)?;
    let files = sequence_files(&a.dir, &a.pattern)?;
    let mut frames = Vec::with_capacity(files.len());
    for f in &files {
        let cloud = read_cloud(f, manifest)?;
        frames.push(config.prepare_cloud(&cloud)?);
    }
    let params = config.kernel_params(config.registration.first_frame_lengthscale);
    let result = register_sequence(&frames, &params, &config.registration)?;

    let timestamps = (0..result.trajectory.len()).map(|k| k as f64).collect();
    let traj = Trajectory::timed(timestamps, result.trajectory.clone());
    ingest::write_trajectory(&a.output, &traj, a.traj_format.into(), Some(TRANSFORM_DIGITS))?;
    let converged = result.frames.iter().all(|f| f.converged);
    let fallback: Vec<_> = result
        .frames
        .iter()
        .enumerate()
        .filter_map(|(k, f)| f.fallback.as_ref().map(|why| json!({"frame": k + 1, "file": files[k + 1].display().to_string(), "reason": why})))
        .collect();
    let summary = json!({
        "frames": files.len(),
        "converged": converged,
        "unconverged_frames": result.frames.iter().enumerate().filter(|(_, f)| !f.converged).map(|(k, _)| k + 1).collect::<Vec<_>>(),
        "fallback_frames": fallback,
        "iterations": result.frames.iter().map(|f| f.iterations).collect::<Vec<_>>(),
        "final_pose": transform_strings(result.trajectory.last().unwrap()),
    });
    finish(manifest, start, &a.output, summary)?;
    Ok(converged)
}

fn cmd_indicator(a: &IndicatorArgs, manifest: &mut RunManifest, start: Instant) -> Result<bool> {
    let config = load_config(&a.config, manifest)?;
    let target = read_cloud(&a.target, manifest)?;
    let source = read_cloud(&a.source, manifest)?;
    let t = match &a.transform {
        Some(p) => read_transform(p, manifest)?,
        None => Isometry::identity(),
    };
    let (x, z) = config.prepare_pair(&target, &source)?;
    let lengthscale = a.lengthscale.unwrap_or(config.registration.init_lengthscale);
    let params = config.kernel_params(lengthscale);
    let reg = &config.registration;
    let value = innerprod::indicator(&x, &z, &t, &params, reg.cutoff_multiplier, reg.c_min)?;
    println!("indicator {}", num(value));
    let mut summary = json!({"lengthscale": num(lengthscale), "indicator": num(value)});
    if a.exact {
        let cosine = innerprod::exact_cosine(&x, &z, &t, &params)?;
        println!("exact_cosine {}", num(cosine));
        summary["exact_cosine"] = json!(num(cosine));
    }
    if let Some(out) = &a.output {
        report::write_json(out, &summary)?;
        finish(manifest, start, out, summary)?;
    }
    Ok(true)
}

fn parse_vector(s: &str) -> Result<Vector3<f64>> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad vector component '{p}' in '{s}'"))))
        .collect::<Result<_>>()?;
    match parts.as_slice() {
        [x, y, z] => Ok(Vector3::new(*x, *y, *z)),
        _ => Err(Error::Config(format!("expected x,y,z, got '{s}'"))),
    }
}

fn cmd_sweep(a: &SweepArgs, manifest: &mut RunManifest, start: Instant) -> Result<bool> {
    let config = load_config(&a.config, manifest)?;
    let cloud = config.prepare_cloud(&read_cloud(&a.cloud, manifest)?)?;
    let lengthscale = a.lengthscale.unwrap_or(config.registration.init_lengthscale);
    let params = config.kernel_params(lengthscale);
    let (axis, range, header) = match a.axis {
        AxisArg::Rotation => {
            let d = a.direction.as_deref().map(parse_vector).transpose()?.unwrap_or_else(Vector3::z);
            (SweepAxis::Rotation(d), a.range.to_radians(), "rotation_deg")
        }
        AxisArg::Translation => {
            let d = a.direction.as_deref().map(parse_vector).transpose()?.unwrap_or_else(Vector3::x);
            (SweepAxis::Translation(d), a.range, "translation_m")
        }
    };
    let reg = &config.registration;
    let rows = eval::indicator_sweep(&cloud, &params, axis, range, a.steps, reg.cutoff_multiplier, reg.c_min)?;
    let mut table = Table::new(&[header, "indicator"]);
    for r in &rows {
        let m = if a.axis == AxisArg::Rotation { r.magnitude.to_degrees() } else { r.magnitude };
        table.push_numbers(&[m, r.indicator]);
    }
    report::write_text(&a.output, &table.to_csv())?;
    let peak = rows.iter().map(|r| r.indicator).fold(f64::NEG_INFINITY, f64::max);
    let summary = json!({
        "rows": rows.len(),
        "lengthscale": num(lengthscale),
        "zero_row_is_max": rows.first().is_some_and(|r| r.indicator >= peak),
    });
    finish(manifest, start, &a.output, summary)?;
    Ok(true)
}

fn cmd_bench(a: &BenchArgs, manifest: &mut RunManifest, start: Instant) -> Result<bool> {
    let scenario = match a.scenario {
        ScenarioArg::Box => Scenario::Box,
        ScenarioArg::Ring => Scenario::Ring,
    };
    let mode = match a.mode {
        ModeArg::Geometric => FeatureMode::Geometric,
        ModeArg::Color => FeatureMode::Color,
    };
    let mut spec = match scenario {
        Scenario::Box => SynthSpec { seed: a.seed, trials: a.trials, mode, ..SynthSpec::default() },
        Scenario::Ring => SynthSpec::ring(a.seed, a.trials, mode),
    };
    if let Some(v) = a.points {
        spec.n_points = v;
    }
    if let Some(v) = a.noise {
        spec.noise_sigma = v;
    }
    if let Some(v) = a.rotation_max {
        spec.rotation_max_deg = v;
    }
    if let Some(v) = a.translation_max {
        spec.translation_max_frac = v;
    }
    let (params, reg) = match &a.config {
        Some(path) => {
            let config = load_config(path, manifest)?;
            (config.kernel_params(config.registration.init_lengthscale), config.registration)
        }
        None => bench::default_setup(scenario, mode),
    };
    let report = bench::synth_bench(&spec, &params, &reg)?;
    report::write_json(&a.output, &report)?;
    if let Some(csv) = &a.csv {
        let mut t = Table::new(&[
            "trial",
            "seed",
            "truth_rotation_deg",
            "truth_translation",
            "rotation_error_deg",
            "translation_error",
            "converged",
            "iterations",
            "success",
        ]);
        for r in &report.trials {
            t.push(vec![
                r.trial.to_string(),
                r.seed.to_string(),
                num(r.truth_rotation_deg),
                num(r.truth_translation),
                num(r.rotation_error_deg),
                num(r.translation_error),
                r.converged.to_string(),
                r.iterations.to_string(),
                r.success.to_string(),
            ]);
        }
        report::write_text(csv, &t.to_csv())?;
    }
    println!("success_rate {}", num(report.success_rate));
    let summary = json!({
        "success_rate": num(report.success_rate),
        "converged_rate": num(report.converged_rate),
        "rotation_error_deg_p95": num(report.rotation_error_deg.p95),
        "translation_error_frac_p95": num(report.translation_error_frac.p95),
    });
    finish(manifest, start, &a.output, summary)?;
    Ok(true)
}

fn cmd_eval(a: &EvalArgs, manifest: &mut RunManifest, start: Instant) -> Result<bool> {
    let format = a.format.map(TrajectoryFormat::from).unwrap_or(match a.metric {
        MetricArg::Kitti => TrajectoryFormat::Kitti,
        MetricArg::Tum => TrajectoryFormat::Tum,
    });
    manifest.add_input(&a.est)?;
    manifest.add_input(&a.gt)?;
    let est = ingest::read_trajectory(&a.est, format)?;
    let gt = ingest::read_trajectory(&a.gt, format)?;
    let summary = match a.metric {
        MetricArg::Kitti => {
            let r = eval::kitti_drift_with_rate(&est.poses, &gt.poses, a.frame_rate)?;
            report::write_json(&a.output, &r)?;
            if let Some(csv) = &a.csv {
                let mut t = Table::new(&["length_m", "translation_percent", "rotation_deg_per_m", "count"]);
                for l in &r.per_length {
                    if let Some(d) = &l.drift {
                        t.push(vec![num(l.length), num(d.translation_percent), num(d.rotation_deg_per_m), d.count.to_string()]);
                    }
                }
                report::write_text(csv, &t.to_csv())?;
            }
            let (tp, rd) = (r.translation_percent(), r.rotation_deg_per_m());
            match (tp, rd) {
                (Some(tp), Some(rd)) => println!("translation_percent {} rotation_deg_per_m {}", num(tp), num(rd)),
                _ => println!("trajectory shorter than {} m; no drift available", eval::DRIFT_LENGTHS[0]),
            }
            json!({"translation_percent": tp.map(num), "rotation_deg_per_m": rd.map(num)})
        }
        MetricArg::Tum => {
            let r = eval::tum_rpe(&est.to_timed(), &gt.to_timed(), a.delta)?;
            report::write_json(&a.output, &r)?;
            if let Some(csv) = &a.csv {
                let mut t = Table::new(&["t_start", "t_end", "translation_m_per_s", "rotation_deg_per_s"]);
                for x in &r.residuals {
                    t.push_numbers(&[x.t_start, x.t_end, x.translation, x.rotation]);
                }
                report::write_text(csv, &t.to_csv())?;
            }
            println!("trans_rmse {} rot_rmse {}", num(r.trans_rmse), num(r.rot_rmse));
            json!({"trans_rmse": num(r.trans_rmse), "rot_rmse": num(r.rot_rmse), "pairs": r.residuals.len()})
        }
    };
    finish(manifest, start, &a.output, summary)?;
    Ok(true)
}

fn cmd_rgbd(a: &RgbdArgs, manifest: &mut RunManifest, start: Instant) -> Result<bool> {
    let config = load_config(&a.config, manifest)?;
    let camera = config.camera.ok_or_else(|| Error::Config("missing key camera".into()))?;
    manifest.add_input(&a.depth)?;
    manifest.add_input(&a.rgb)?;
    let depth = ingest::read_pgm(&a.depth)?;
    let rgb = ingest::read_ppm(&a.rgb)?;
    let semantics = match (&a.labels, a.classes) {
        (Some(path), Some(classes)) => {
            manifest.add_input(path)?;
            Some(ingest::SemanticImage::from_labels(&ingest::read_pgm(path)?, classes)?)
        }
        _ => None,
    };
    let (cloud, selection) = ingest::depth_rgb_to_cloud(&depth, &rgb, semantics.as_ref(), &camera, &config.selector)?;
    ingest::write_cloud(&cloud, &a.output)?;
    println!("points {}", cloud.len());
    let summary = json!({
        "points": cloud.len(),
        "threshold": num(selection.threshold),
        "rounds": selection.rounds,
        "selection": format!("{:?}", selection.outcome),
    });
    finish(manifest, start, &a.output, summary)?;
    Ok(true)
}
