//! `procam-calib`: single-pose procam calibration toolkit.
//!
//! Exit codes: 0 success (warnings go to stderr), 2 usage error, 3 I/O
//! error, 4 schema or invariant violation.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use procam_calib::calibrate::{calibrate_procam, CalibrateError, CalibrateOptions};
use procam_calib::formats::{self, FormatError};
use procam_calib::geometry::EulerAnglesXYZ;
use procam_calib::lm::LmConfig;
use procam_calib::metrics::{reprojection_error, translation_precision, MetricsError};
use procam_calib::simulator::{
    rotate_board, rotation_sweep, synthesize_graycode_stack, synthesize_observations,
    SimulatorError, SweepDevice,
};
use procam_calib::structured_light::{
    decode, generate_patterns, lift_corners, CorrespondenceSet, DecodeConfig, DEFAULT_WINDOW_RADIUS,
};

#[derive(Parser)]
#[command(
    name = "procam-calib",
    version,
    about = "Projector-camera calibration from a single pose of a planar chessboard"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a correspondence file (and optionally a Gray-code stack)
    /// from a scene configuration.
    Simulate(SimulateArgs),
    /// Calibrate camera, projector and procam extrinsics from one
    /// correspondence file.
    Calibrate(CalibrateArgs),
    /// Decode a captured Gray-code stack and lift chessboard corners into
    /// projector coordinates.
    Decode(DecodeArgs),
    /// Evaluate a calibration's translation stability across several poses.
    Evaluate(EvaluateArgs),
    /// Sweep a device's orientation and record focal-length recovery error.
    Sweep(SweepArgs),
    /// Write the Gray-code pattern sequence as PGM files plus a manifest.
    Patterns(PatternsArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Scene configuration (JSON; `{}` selects the reference rig).
    #[arg(long)]
    config: PathBuf,
    /// Output correspondence file.
    #[arg(long)]
    out: PathBuf,
    /// Override the configured RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the configured observation noise (px, per axis).
    #[arg(long)]
    noise: Option<f64>,
    /// Re-pose the board by rotating it about its center: "psi,nu" or
    /// "psi,nu,phi" in degrees.
    #[arg(long, allow_hyphen_values = true)]
    rotate_board: Option<String>,
    /// Also render the Gray-code stack into this directory (PGM frames,
    /// manifest.json, corners.json).
    #[arg(long)]
    stack_dir: Option<PathBuf>,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Input correspondence file.
    #[arg(long)]
    input: PathBuf,
    /// Output calibration file.
    #[arg(long)]
    out: PathBuf,
    /// Cap on Levenberg-Marquardt iterations.
    #[arg(long)]
    lm_max_iters: Option<usize>,
    /// Also append a one-line CSV report (creates the file with a header if
    /// missing).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct DecodeArgs {
    /// Stack manifest (JSON listing PGM frames in layout order).
    #[arg(long)]
    manifest: PathBuf,
    /// Camera-frame chessboard corners (JSON).
    #[arg(long)]
    corners: PathBuf,
    /// Output correspondence file.
    #[arg(long)]
    out: PathBuf,
    /// Minimum |direct - inverse| intensity difference per bit.
    #[arg(long, default_value_t = DecodeConfig::default().contrast_threshold)]
    contrast_threshold: u8,
    /// Minimum white-minus-black span for a pixel to count as lit.
    #[arg(long, default_value_t = DecodeConfig::default().span_threshold)]
    span_threshold: u8,
    /// Half-size of the local-homography window (px).
    #[arg(long, default_value_t = DEFAULT_WINDOW_RADIUS)]
    window_radius: u32,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Calibration file with the intrinsics under evaluation.
    #[arg(long)]
    calib: PathBuf,
    /// Output JSON report.
    #[arg(long)]
    out_json: PathBuf,
    /// Output CSV report.
    #[arg(long)]
    out_csv: PathBuf,
    /// Correspondence files, one per pose (at least two).
    #[arg(required = true)]
    poses: Vec<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Scene configuration (JSON; `{}` selects the reference rig).
    #[arg(long)]
    config: PathBuf,
    /// Which device to rotate.
    #[arg(long, value_enum)]
    device: DeviceArg,
    /// Output CSV.
    #[arg(long)]
    out: PathBuf,
    /// Grid step in degrees.
    #[arg(long, default_value_t = 5.0)]
    step: f64,
    /// Psi range as "lo:hi" degrees.
    #[arg(long, default_value = "-45:45", allow_hyphen_values = true)]
    psi: String,
    /// Nu range as "lo:hi" degrees.
    #[arg(long, default_value = "-45:45", allow_hyphen_values = true)]
    nu: String,
    /// Seeded noise trials per grid cell.
    #[arg(long, default_value_t = 1)]
    trials: u32,
    /// Override the configured observation noise (px, per axis).
    #[arg(long)]
    noise: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum DeviceArg {
    Camera,
    Projector,
}

#[derive(Args)]
struct PatternsArgs {
    /// Projector width in pixels.
    #[arg(long)]
    width: u32,
    /// Projector height in pixels.
    #[arg(long)]
    height: u32,
    /// Output directory for PGM frames and manifest.json.
    #[arg(long)]
    out_dir: PathBuf,
}

enum CliError {
    Usage(String),
    Io(String),
    Schema(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
            CliError::Schema(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Io(m) | CliError::Schema(m) => m,
        }
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        match e {
            FormatError::Io { .. } => CliError::Io(e.to_string()),
            FormatError::Json { .. } | FormatError::Schema { .. } => {
                CliError::Schema(e.to_string())
            }
        }
    }
}

impl From<SimulatorError> for CliError {
    fn from(e: SimulatorError) -> Self {
        CliError::Schema(e.to_string())
    }
}

impl From<CalibrateError> for CliError {
    fn from(e: CalibrateError) -> Self {
        CliError::Schema(format!("calibration failed: {e}"))
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        CliError::Schema(format!("evaluation failed: {e}"))
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("i/o error in {}: {e}", path.display()))
}

fn main() -> ExitCode {
    configure_thread_pool();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Calibrate(args) => cmd_calibrate(args),
        Command::Decode(args) => cmd_decode(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Patterns(args) => cmd_patterns(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

/// PROCAM_CALIB_THREADS caps worker parallelism; 0 or unset means automatic.
fn configure_thread_pool() {
    if let Ok(value) = std::env::var("PROCAM_CALIB_THREADS") {
        if let Ok(n) = value.trim().parse::<usize>() {
            if n > 0 {
                // Ignore failure: the pool can only be configured once.
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
        }
    }
}

fn parse_euler(spec: &str) -> Result<EulerAnglesXYZ, CliError> {
    let parts: Vec<&str> = spec.split(',').collect();
    if parts.len() != 2 && parts.len() != 3 {
        return Err(CliError::Usage(format!(
            "expected \"psi,nu[,phi]\" degrees, got {spec:?}"
        )));
    }
    let mut values = [0.0; 3];
    for (i, p) in parts.iter().enumerate() {
        values[i] = p
            .trim()
            .parse::<f64>()
            .map_err(|_| CliError::Usage(format!("invalid angle {p:?} in {spec:?}")))?;
    }
    Ok(EulerAnglesXYZ::new(values[0], values[1], values[2]))
}

fn parse_range(spec: &str, what: &str) -> Result<(f64, f64), CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 2 {
        return Err(CliError::Usage(format!(
            "{what} range must be \"lo:hi\" degrees, got {spec:?}"
        )));
    }
    let lo: f64 = parts[0]
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("invalid {what} bound {:?}", parts[0])))?;
    let hi: f64 = parts[1]
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("invalid {what} bound {:?}", parts[1])))?;
    if lo > hi {
        return Err(CliError::Usage(format!(
            "{what} range lower bound {lo} exceeds upper bound {hi}"
        )));
    }
    if lo <= -60.0 || hi >= 60.0 {
        return Err(CliError::Usage(format!(
            "{what} range must stay within (-60, 60) degrees"
        )));
    }
    Ok((lo, hi))
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let mut cfg = formats::load_scene_config(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.rng_seed = seed;
    }
    if let Some(noise) = args.noise {
        if !(noise.is_finite() && noise >= 0.0) {
            return Err(CliError::Usage(format!(
                "--noise must be non-negative, got {noise}"
            )));
        }
        cfg.noise_sigma_px = noise;
    }
    if let Some(spec) = &args.rotate_board {
        cfg = rotate_board(&cfg, parse_euler(spec)?)?;
    }

    let (corr, gt) = synthesize_observations(&cfg)?;
    formats::save_correspondences(&args.out, &corr, Some(&gt))?;
    eprintln!(
        "wrote {} correspondences to {}",
        corr.len(),
        args.out.display()
    );

    if let Some(dir) = &args.stack_dir {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let (stack, layout, _) = synthesize_graycode_stack(&cfg)?;
        let mut files = Vec::with_capacity(stack.len());
        for (i, frame) in stack.iter().enumerate() {
            let name = format!("stack_{i:02}.pgm");
            formats::write_pgm_file(dir.join(&name), frame)?;
            files.push(name);
        }
        let manifest = formats::StackManifest::new(&layout, files);
        formats::save_manifest(dir.join("manifest.json"), &manifest)?;
        let corners = formats::CornersFile::new(&corr.board, &corr.camera_distorted);
        formats::save_corners(dir.join("corners.json"), &corners)?;
        eprintln!(
            "wrote {}-frame stack, manifest.json and corners.json to {}",
            stack.len(),
            dir.display()
        );
    }
    Ok(())
}

fn cmd_calibrate(args: CalibrateArgs) -> Result<(), CliError> {
    let (corr, _) = formats::load_correspondences(&args.input)?;
    let mut opts = CalibrateOptions::default();
    if let Some(n) = args.lm_max_iters {
        if n == 0 {
            return Err(CliError::Usage("--lm-max-iters must be at least 1".into()));
        }
        opts.lm.max_iters = n;
    }
    let result = calibrate_procam(&corr, &opts)?;
    for w in &result.camera.diagnostics.warnings {
        eprintln!("warning (camera): {w}");
    }
    for w in &result.projector.diagnostics.warnings {
        eprintln!("warning (projector): {w}");
    }
    formats::save_calibration(&args.out, &result, corr.camera_dims, corr.projector_dims)?;
    eprintln!(
        "f_c = {:.2} px, f_p = {:.2} px, baseline |T| = {:.2} mm, \
         camera rms = {:.4} px, projector rms = {:.4} px",
        result.camera.intrinsics.f,
        result.projector.intrinsics.f,
        result.baseline_mm(),
        result.camera.reprojection.rms_px,
        result.projector.reprojection.rms_px,
    );

    if let Some(report) = &args.report {
        let new_file = !report.exists();
        let mut line = String::new();
        if new_file {
            line.push_str(
                "input,f_c,alpha_c,u0_c,v0_c,k1,k2,f_p,u0_p,v0_p,baseline_mm,\
                 cam_rms_px,pro_rms_px,stereo_mean_px,cam_converged,pro_converged\n",
            );
        }
        use std::fmt::Write as _;
        let k = &result.camera.intrinsics;
        let d = &result.camera.distortion;
        let p = &result.projector.intrinsics;
        writeln!(
            line,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            args.input.display(),
            k.f,
            k.alpha,
            k.u0,
            k.v0,
            d.k1(),
            d.k2(),
            p.f,
            p.u0,
            p.v0,
            result.baseline_mm(),
            result.camera.reprojection.rms_px,
            result.projector.reprojection.rms_px,
            result.stereo_mean_px,
            result.camera.diagnostics.converged,
            result.projector.diagnostics.converged,
        )
        .expect("writing to a String cannot fail");
        use std::io::Write as _;
        let mut file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(report)
            .map_err(|e| io_err(report, e))?;
        file.write_all(line.as_bytes())
            .map_err(|e| io_err(report, e))?;
    }
    Ok(())
}

fn cmd_decode(args: DecodeArgs) -> Result<(), CliError> {
    let manifest = formats::load_manifest(&args.manifest)?;
    let layout = manifest.layout()?;
    let base = args
        .manifest
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();
    let mut stack = Vec::with_capacity(manifest.files.len());
    for name in &manifest.files {
        let path = base.join(name);
        if !path.exists() {
            return Err(CliError::Io(format!(
                "stack frame {} listed in the manifest is missing",
                path.display()
            )));
        }
        stack.push(formats::read_pgm_file(&path)?);
    }

    let corners_file = formats::load_corners(&args.corners)?;
    let (board, corners) = corners_file.to_domain()?;

    let config = DecodeConfig {
        contrast_threshold: args.contrast_threshold,
        span_threshold: args.span_threshold,
    };
    let map = decode(&stack, &layout, &config).map_err(|e| CliError::Schema(e.to_string()))?;
    eprintln!(
        "decoded {} of {} camera pixels",
        map.decoded_count(),
        (map.width() as usize) * (map.height() as usize)
    );

    let board_points =
        procam_calib::simulator::generate_board(board.rows, board.cols, board.spacing_mm);
    let mut triples = Vec::with_capacity(corners.len());
    let mut dropped = Vec::new();
    for (i, corner) in corners.iter().enumerate() {
        match lift_corners(&map, std::slice::from_ref(corner), args.window_radius) {
            Ok(lifted) => triples.push((board_points[i], *corner, lifted[0])),
            Err(e) => {
                eprintln!("warning: corner {i} dropped: {e}");
                dropped.push(i);
            }
        }
    }
    if !dropped.is_empty() {
        eprintln!(
            "warning: {} corner(s) dropped (indices {:?}); the output file will not satisfy \
             the complete-grid invariant required by `calibrate`",
            dropped.len(),
            dropped
        );
    }

    let camera_dims = procam_calib::structured_light::ImageDims::new(map.width(), map.height());
    let projector_dims = procam_calib::structured_light::ImageDims::new(
        layout.projector_width,
        layout.projector_height,
    );
    let bytes =
        formats::correspondence_parts_to_json(&board, camera_dims, projector_dims, &triples);
    std::fs::write(&args.out, bytes).map_err(|e| io_err(&args.out, e))?;
    eprintln!(
        "wrote {} correspondences to {}",
        triples.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<(), CliError> {
    if args.poses.len() < 2 {
        return Err(CliError::Usage(format!(
            "evaluate needs at least 2 pose files, got {}",
            args.poses.len()
        )));
    }
    let calib = formats::load_calibration(&args.calib)?;
    let mut poses: Vec<CorrespondenceSet> = Vec::with_capacity(args.poses.len());
    for path in &args.poses {
        let (corr, _) = formats::load_correspondences(path)?;
        poses.push(corr);
    }

    let lm = LmConfig::default();
    let precision = translation_precision(
        &calib.camera,
        Some(&calib.distortion),
        &calib.projector,
        &poses,
        &lm,
    )?;
    for idx in &precision.skipped {
        eprintln!("warning: pose {idx} skipped (PnP failed)");
    }

    let mut reports = Vec::with_capacity(precision.per_pose.len());
    for pt in &precision.per_pose {
        let pose = &poses[pt.pose_index];
        let cam = reprojection_error(
            &calib.camera,
            Some(&calib.distortion),
            &pt.rt_camera,
            &pose.board_points,
            &pose.camera_distorted,
        )?;
        let pro = reprojection_error(
            &calib.projector,
            None,
            &pt.rt_projector,
            &pose.board_points,
            &pose.projector_points,
        )?;
        reports.push(formats::PoseReport {
            pose_id: pt.pose_index,
            translation_mm: [pt.translation.x, pt.translation.y, pt.translation.z],
            magnitude_mm: pt.magnitude,
            reproj_cam_px: cam.mean_px,
            reproj_pro_px: pro.mean_px,
            reproj_stereo_px: 0.5 * (cam.mean_px + pro.mean_px),
        });
    }

    let report = formats::EvaluationReport::new(&precision, reports);
    std::fs::write(&args.out_json, report.to_json()).map_err(|e| io_err(&args.out_json, e))?;
    let mut csv = Vec::new();
    formats::write_evaluation_csv(&mut csv, &report).expect("writing to a Vec cannot fail");
    std::fs::write(&args.out_csv, csv).map_err(|e| io_err(&args.out_csv, e))?;
    eprintln!(
        "sigma_T = {:.6} mm, sigma_|T| = {:.6} mm over {} poses",
        report.sigma_t_mm,
        report.sigma_abs_t_mm,
        report.poses.len()
    );
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    let mut cfg = formats::load_scene_config(&args.config)?;
    if let Some(noise) = args.noise {
        if !(noise.is_finite() && noise >= 0.0) {
            return Err(CliError::Usage(format!(
                "--noise must be non-negative, got {noise}"
            )));
        }
        cfg.noise_sigma_px = noise;
    }
    if !(args.step.is_finite() && args.step > 0.0) {
        return Err(CliError::Usage(format!(
            "--step must be positive, got {}",
            args.step
        )));
    }
    if args.trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    let psi = parse_range(&args.psi, "psi")?;
    let nu = parse_range(&args.nu, "nu")?;
    let device = match args.device {
        DeviceArg::Camera => SweepDevice::Camera,
        DeviceArg::Projector => SweepDevice::Projector,
    };

    let sweep = rotation_sweep(&cfg, device, psi, nu, args.step, args.trials);
    let mut csv = Vec::new();
    formats::write_sweep_csv(&mut csv, &sweep).expect("writing to a Vec cannot fail");
    std::fs::write(&args.out, csv).map_err(|e| io_err(&args.out, e))?;
    let failed = sweep
        .cells
        .iter()
        .filter(|c| !c.delta_f_px.is_finite())
        .count();
    eprintln!(
        "swept {} cells ({} failed) -> {}",
        sweep.cells.len(),
        failed,
        args.out.display()
    );
    Ok(())
}

fn cmd_patterns(args: PatternsArgs) -> Result<(), CliError> {
    if args.width < 2 || args.height < 2 {
        return Err(CliError::Usage(format!(
            "projector dimensions must be at least 2x2, got {}x{}",
            args.width, args.height
        )));
    }
    std::fs::create_dir_all(&args.out_dir).map_err(|e| io_err(&args.out_dir, e))?;
    let set = generate_patterns(args.width, args.height);
    let mut files = Vec::with_capacity(set.patterns.len());
    for (i, frame) in set.patterns.iter().enumerate() {
        let name = format!("pattern_{i:02}.pgm");
        formats::write_pgm_file(args.out_dir.join(&name), frame)?;
        files.push(name);
    }
    let manifest = formats::StackManifest::new(&set.layout, files);
    formats::save_manifest(args.out_dir.join("manifest.json"), &manifest)?;
    eprintln!(
        "wrote {} patterns and manifest.json to {}",
        set.patterns.len(),
        args.out_dir.display()
    );
    Ok(())
}
