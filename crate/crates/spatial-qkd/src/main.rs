//! Command-line front end: simulation, sweeps, mutual-information analysis
//! and synthetic frame handling. Every run writes a manifest that is
//! sufficient to reproduce it bit-exactly.

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::Serialize;
use spatial_qkd::config::{Config, ConfigError};
use spatial_qkd::detector::{
    extract_events, symbol_center, synthesize_frame, Frame, FRAME_HEIGHT, FRAME_WIDTH,
};
use spatial_qkd::infotheory::{effective_fidelity, mi_neighbor, JointCounts};
use spatial_qkd::protocol::{derive_seed, run_full_session};
use spatial_qkd::security::{eve_info_finite, info_distance, secret_key_rate, FiniteKeyParams};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write as IoWrite};
use std::path::{Path, PathBuf};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(
    name = "spatial-qkd",
    version,
    about = "Simulator for 1024-symbol spatially encoded QKD"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; all randomness derives from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory (reports, manifests) or file (sweeps).
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Run a full protocol session and write the session report.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Override the number of rounds from the config.
        #[arg(long)]
        rounds: Option<u64>,
    },
    /// Sweep the finite-key secret-rate bound over total key lengths.
    RateSweep {
        #[command(flatten)]
        common: Common,
        /// Key-length grid min:max:points, log-spaced.
        #[arg(long, default_value = "100:10000000:41")]
        grid: String,
    },
    /// Sweep the intercept-resend information distance over basis-guess
    /// fidelities and detection thresholds.
    AttackSweep {
        #[command(flatten)]
        common: Common,
        /// Basis-guess-fidelity grid min:max:points, linearly spaced.
        #[arg(long, default_value = "0:1:101")]
        grid: String,
        /// Detection thresholds; defaults to the configured list.
        #[arg(long, value_delimiter = ',')]
        sigma: Option<Vec<f64>>,
    },
    /// Analyze a joint-counts CSV: sampled mutual information, fitted
    /// crosstalk profile, refined estimate and effective fidelity.
    MiAnalyze {
        #[command(flatten)]
        common: Common,
        /// Joint-counts CSV (d rows of d comma-separated counts).
        #[arg(long)]
        input: PathBuf,
    },
    /// Generate or process synthetic camera frames.
    Frames {
        #[command(subcommand)]
        action: FramesAction,
    },
}

#[derive(Subcommand)]
enum FramesAction {
    /// Render frames with known symbols and readout noise.
    Generate {
        #[command(flatten)]
        common: Common,
        /// Number of frames.
        #[arg(long, default_value_t = 10)]
        count: usize,
        /// Photon events per frame.
        #[arg(long, default_value_t = 1)]
        events_per_frame: usize,
    },
    /// Extract events from frames and map them onto symbols.
    Extract {
        #[command(flatten)]
        common: Common,
        /// Directory of .pgm frames.
        #[arg(long)]
        input: PathBuf,
        /// Override the per-pixel noise threshold.
        #[arg(long)]
        threshold: Option<u16>,
        /// Override the cluster size window as min,max.
        #[arg(long, value_delimiter = ',')]
        size: Option<Vec<usize>>,
        /// Override the cluster intensity window as min,max.
        #[arg(long, value_delimiter = ',')]
        intensity: Option<Vec<u32>>,
    },
}

/// Why a command failed, mapped onto the process exit code.
enum CmdError {
    Config(String),
    Abort(String),
    Io(String),
}

impl CmdError {
    fn code(&self) -> i32 {
        match self {
            CmdError::Config(_) => 2,
            CmdError::Abort(_) => 3,
            CmdError::Io(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CmdError::Config(m) | CmdError::Abort(m) | CmdError::Io(m) => m,
        }
    }
}

impl From<ConfigError> for CmdError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Read { .. } => CmdError::Io(e.to_string()),
            other => CmdError::Config(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CmdError {
    fn from(e: std::io::Error) -> Self {
        CmdError::Io(e.to_string())
    }
}

/// Reproducibility record emitted next to every output.
#[derive(Serialize)]
struct RunManifest {
    command: String,
    config: Option<String>,
    master_seed: u64,
    outputs: Vec<String>,
    tool_version: String,
    /// Per-command knobs that affect the outputs (grids, cuts, overrides).
    parameters: serde_json::Value,
}

fn main() {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {}", e.message());
            std::process::exit(e.code());
        }
    }
}

fn run(command: Command) -> Result<(), CmdError> {
    match command {
        Command::Simulate { common, rounds } => cmd_simulate(common, rounds),
        Command::RateSweep { common, grid } => cmd_rate_sweep(common, &grid),
        Command::AttackSweep {
            common,
            grid,
            sigma,
        } => cmd_attack_sweep(common, &grid, sigma),
        Command::MiAnalyze { common, input } => cmd_mi_analyze(common, &input),
        Command::Frames { action } => match action {
            FramesAction::Generate {
                common,
                count,
                events_per_frame,
            } => cmd_frames_generate(common, count, events_per_frame),
            FramesAction::Extract {
                common,
                input,
                threshold,
                size,
                intensity,
            } => cmd_frames_extract(common, &input, threshold, size, intensity),
        },
    }
}

fn load_config(path: &Option<PathBuf>) -> Result<Config, CmdError> {
    match path {
        Some(p) => Ok(Config::load(p)?),
        None => Ok(Config::default()),
    }
}

fn write_manifest(
    dir: &Path,
    command: &str,
    common: &Common,
    outputs: &[&Path],
    parameters: serde_json::Value,
) -> Result<(), CmdError> {
    let manifest = RunManifest {
        command: command.to_string(),
        config: common.config.as_ref().map(|p| p.display().to_string()),
        master_seed: common.seed,
        outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
        tool_version: VERSION.to_string(),
        parameters,
    };
    let path = dir.join("manifest.json");
    let f = File::create(&path)?;
    serde_json::to_writer_pretty(BufWriter::new(f), &manifest)
        .map_err(|e| CmdError::Io(e.to_string()))?;
    Ok(())
}

fn csv_preamble<W: IoWrite>(w: &mut W, seed: u64, header: &str) -> Result<(), CmdError> {
    writeln!(w, "# spatial-qkd v{VERSION} seed={seed}")?;
    writeln!(w, "{header}")?;
    Ok(())
}

/// Parse "min:max:points" into a grid; log-spaced for u64 key lengths.
fn parse_log_grid(spec: &str) -> Result<Vec<u64>, CmdError> {
    let parts: Vec<&str> = spec.split(':').collect();
    let err = || CmdError::Config(format!("bad grid {spec:?}; expected min:max:points"));
    if parts.len() != 3 {
        return Err(err());
    }
    let lo: f64 = parts[0].parse().map_err(|_| err())?;
    let hi: f64 = parts[1].parse().map_err(|_| err())?;
    let n: usize = parts[2].parse().map_err(|_| err())?;
    if lo <= 0.0 || hi < lo || n < 1 {
        return Err(err());
    }
    let mut grid: Vec<u64> = (0..n)
        .map(|i| {
            let t = if n == 1 {
                0.0
            } else {
                i as f64 / (n - 1) as f64
            };
            (lo.ln() + t * (hi.ln() - lo.ln())).exp().round() as u64
        })
        .collect();
    grid.dedup();
    Ok(grid)
}

/// Parse "min:max:points" into a linearly spaced f64 grid.
fn parse_lin_grid(spec: &str) -> Result<Vec<f64>, CmdError> {
    let parts: Vec<&str> = spec.split(':').collect();
    let err = || CmdError::Config(format!("bad grid {spec:?}; expected min:max:points"));
    if parts.len() != 3 {
        return Err(err());
    }
    let lo: f64 = parts[0].parse().map_err(|_| err())?;
    let hi: f64 = parts[1].parse().map_err(|_| err())?;
    let n: usize = parts[2].parse().map_err(|_| err())?;
    if hi < lo || n < 1 {
        return Err(err());
    }
    Ok((0..n)
        .map(|i| {
            let t = if n == 1 {
                0.0
            } else {
                i as f64 / (n - 1) as f64
            };
            lo + t * (hi - lo)
        })
        .collect())
}

fn cmd_simulate(common: Common, rounds: Option<u64>) -> Result<(), CmdError> {
    let mut config = load_config(&common.config)?;
    if let Some(r) = rounds {
        config.session.rounds = r;
    }
    let session = config.session_config(common.seed)?;
    let report = run_full_session(&session)
        .map_err(|e| CmdError::Config(format!("session setup failed: {e}")))?;

    std::fs::create_dir_all(&common.out)?;
    let report_path = common.out.join("report.json");
    let f = File::create(&report_path)?;
    serde_json::to_writer_pretty(BufWriter::new(f), &report)
        .map_err(|e| CmdError::Io(e.to_string()))?;
    write_manifest(
        &common.out,
        "simulate",
        &common,
        &[&report_path],
        serde_json::json!({ "rounds": session.rounds }),
    )?;

    println!(
        "rounds={} detected={} sifted={} final_key_bits={}",
        report.rounds, report.detected, report.sifted, report.final_key_bits
    );
    if let Some(abort) = &report.abort {
        return Err(CmdError::Abort(format!(
            "session aborted: {abort:?} (report written)"
        )));
    }
    println!("keys_match={}", report.keys_match == Some(true));
    Ok(())
}

fn cmd_rate_sweep(common: Common, grid_spec: &str) -> Result<(), CmdError> {
    let config = load_config(&common.config)?;
    let n_grid = parse_log_grid(grid_spec)?;
    let grid = config.grid()?;
    let d = grid.dimension();
    let profile = config.channel.profile_ii.resolve()?;
    let i_ab = mi_neighbor(&profile, d);
    let f = effective_fidelity(i_ab, d)
        .map_err(|e| CmdError::Config(format!("channel inconsistent: {e}")))?;
    let template = config.finite_key_params(0);

    // asymptotic limit: no statistical penalty, no failure-term corrections
    let i_eve_inf =
        eve_info_finite(f, 0.0, f64::INFINITY, d).map_err(|e| CmdError::Config(e.to_string()))?;
    let asymptote = template.sifting_fraction * (1.0 - template.pe_fraction) * (i_ab - i_eve_inf);

    if let Some(parent) = common.out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut w = BufWriter::new(File::create(&common.out)?);
    csv_preamble(
        &mut w,
        common.seed,
        "total_rounds,rate,rate_unclamped,asymptote",
    )?;
    let mut onset: Option<u64> = None;
    for &total in &n_grid {
        let fk = FiniteKeyParams {
            total_rounds: total,
            ..template
        };
        let point =
            secret_key_rate(&fk, i_ab, f, d).map_err(|e| CmdError::Config(e.to_string()))?;
        if onset.is_none() && point.rate > 0.0 {
            onset = Some(total);
        }
        writeln!(
            w,
            "{},{:.9},{:.9},{:.9}",
            point.total_rounds, point.rate, point.rate_unclamped, asymptote
        )?;
    }
    match onset {
        Some(n) => writeln!(w, "# positive-rate onset N* = {n}")?,
        None => writeln!(w, "# no positive rate on this grid")?,
    }
    drop(w);

    let dir = common.out.parent().unwrap_or(Path::new(".")).to_path_buf();
    write_manifest(
        &dir,
        "rate-sweep",
        &common,
        &[&common.out],
        serde_json::json!({ "grid": grid_spec, "i_ab": i_ab, "fidelity": f.value() }),
    )?;
    println!("wrote {} points to {}", n_grid.len(), common.out.display());
    Ok(())
}

fn cmd_attack_sweep(
    common: Common,
    grid_spec: &str,
    sigma_override: Option<Vec<f64>>,
) -> Result<(), CmdError> {
    let config = load_config(&common.config)?;
    let eps_grid = parse_lin_grid(grid_spec)?;
    if eps_grid.iter().any(|&e| !(0.0..=1.0).contains(&e)) {
        return Err(CmdError::Config(
            "epsilon grid must stay inside [0, 1]".into(),
        ));
    }
    let sigmas = sigma_override.unwrap_or_else(|| config.attack.sigma.clone());
    if sigmas.iter().any(|&s| s <= 0.0) {
        return Err(CmdError::Config("sigma thresholds must be positive".into()));
    }
    let d = config.grid()?.dimension();
    let q = config.attack.qber;
    let i_alice = config.attack.i_alice;

    if let Some(parent) = common.out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut w = BufWriter::new(File::create(&common.out)?);
    csv_preamble(&mut w, common.seed, "epsilon,sigma,delta")?;
    let mut rows = 0usize;
    for &sigma in &sigmas {
        for &eps in &eps_grid {
            if eps >= 1.0 {
                // Eve guesses every basis: interception is unbounded
                writeln!(w, "{eps:.6},{sigma},unbounded")?;
                continue;
            }
            let delta = info_distance(q, sigma, eps, d, i_alice)
                .map_err(|e| CmdError::Config(e.to_string()))?;
            writeln!(w, "{eps:.6},{sigma},{delta:.9}")?;
            rows += 1;
        }
    }
    drop(w);

    let dir = common.out.parent().unwrap_or(Path::new(".")).to_path_buf();
    write_manifest(
        &dir,
        "attack-sweep",
        &common,
        &[&common.out],
        serde_json::json!({ "grid": grid_spec, "sigma": sigmas, "qber": q, "i_alice": i_alice }),
    )?;
    println!("wrote {rows} numeric rows to {}", common.out.display());
    Ok(())
}

#[derive(Serialize)]
struct MiReport {
    total_counts: u64,
    sampled_mi: f64,
    p0: f64,
    p1: f64,
    p2: f64,
    p_rest: f64,
    mi_neighbor: f64,
    effective_fidelity: f64,
}

fn cmd_mi_analyze(common: Common, input: &Path) -> Result<(), CmdError> {
    let config = load_config(&common.config)?;
    let grid = config.grid()?;
    let f = File::open(input)?;
    let counts = JointCounts::read_csv(BufReader::new(f))
        .map_err(|e| CmdError::Config(format!("{}: {e}", input.display())))?;
    if counts.dimension() != grid.dimension() {
        return Err(CmdError::Config(format!(
            "counts are {0}x{0} but the configured grid has {1} symbols",
            counts.dimension(),
            grid.dimension()
        )));
    }
    let sampled = counts
        .mutual_information()
        .map_err(|e| CmdError::Config(e.to_string()))?;
    let profile = counts
        .fit_profile(&grid)
        .map_err(|e| CmdError::Config(e.to_string()))?;
    let refined = mi_neighbor(&profile, grid.dimension());
    let f_eff = effective_fidelity(refined, grid.dimension())
        .map_err(|e| CmdError::Config(e.to_string()))?;

    let report = MiReport {
        total_counts: counts.total(),
        sampled_mi: sampled,
        p0: profile.p0(),
        p1: profile.p1(),
        p2: profile.p2(),
        p_rest: profile.p_rest(),
        mi_neighbor: refined,
        effective_fidelity: f_eff.value(),
    };
    println!("total counts        {}", report.total_counts);
    println!("sampled MI          {:.4} bit", report.sampled_mi);
    println!(
        "fitted profile      P0={:.4} P1={:.4} P2={:.4} Prest={:.4}",
        report.p0, report.p1, report.p2, report.p_rest
    );
    println!("neighbor-refined MI {:.4} bit", report.mi_neighbor);
    println!("effective fidelity  {:.4}", report.effective_fidelity);

    std::fs::create_dir_all(&common.out)?;
    let report_path = common.out.join("mi-report.json");
    let f = File::create(&report_path)?;
    serde_json::to_writer_pretty(BufWriter::new(f), &report)
        .map_err(|e| CmdError::Io(e.to_string()))?;
    write_manifest(
        &common.out,
        "mi-analyze",
        &common,
        &[&report_path],
        serde_json::json!({ "input": input.display().to_string() }),
    )?;
    Ok(())
}

fn cmd_frames_generate(
    common: Common,
    count: usize,
    events_per_frame: usize,
) -> Result<(), CmdError> {
    let config = load_config(&common.config)?;
    let grid = config.grid()?;
    let origin = config.detector_origin(&grid);
    let amplitude = config.detector.blob_amplitude;
    let noise = config.detector.noise_variance;
    std::fs::create_dir_all(&common.out)?;

    let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(common.seed, "frames"));
    let truth_path = common.out.join("truth.csv");
    let mut truth = BufWriter::new(File::create(&truth_path)?);
    csv_preamble(&mut truth, common.seed, "frame,symbol,row,col")?;
    let mut outputs: Vec<PathBuf> = vec![truth_path.clone()];
    for i in 0..count {
        let mut events = Vec::with_capacity(events_per_frame);
        for _ in 0..events_per_frame {
            let s = grid
                .symbol_from_index(rng.gen_range(0..grid.dimension()))
                .unwrap();
            let (r, c) = symbol_center(&grid, s, origin);
            events.push((r, c, amplitude));
            let (row, col) = grid.row_col(s);
            writeln!(truth, "{i},{},{row},{col}", s.index())?;
        }
        let frame = synthesize_frame(&events, noise, &mut rng)
            .map_err(|e| CmdError::Config(e.to_string()))?;
        let path = common.out.join(format!("frame_{i:05}.pgm"));
        let f = File::create(&path)?;
        frame
            .write_pgm(BufWriter::new(f))
            .map_err(|e| CmdError::Io(e.to_string()))?;
        outputs.push(path);
    }
    drop(truth);

    let refs: Vec<&Path> = outputs.iter().map(|p| p.as_path()).collect();
    write_manifest(
        &common.out,
        "frames generate",
        &common,
        &refs,
        serde_json::json!({
            "count": count,
            "events_per_frame": events_per_frame,
            "blob_amplitude": amplitude,
            "noise_variance": noise,
            "origin": origin,
        }),
    )?;
    println!("wrote {count} frames to {}", common.out.display());
    Ok(())
}

fn cmd_frames_extract(
    common: Common,
    input: &Path,
    threshold: Option<u16>,
    size: Option<Vec<usize>>,
    intensity: Option<Vec<u32>>,
) -> Result<(), CmdError> {
    let config = load_config(&common.config)?;
    let grid = config.grid()?;
    let origin = config.detector_origin(&grid);
    let mut cuts = config.event_cuts()?;
    if let Some(t) = threshold {
        cuts.pixel_threshold = t;
    }
    if let Some(s) = &size {
        if s.len() != 2 {
            return Err(CmdError::Config("--size expects min,max".into()));
        }
        cuts.cluster_size_min = s[0];
        cuts.cluster_size_max = s[1];
    }
    if let Some(v) = &intensity {
        if v.len() != 2 {
            return Err(CmdError::Config("--intensity expects min,max".into()));
        }
        cuts.cluster_intensity_min = v[0];
        cuts.cluster_intensity_max = v[1];
    }
    cuts.validate()
        .map_err(|e| CmdError::Config(e.to_string()))?;

    let mut frame_paths: Vec<PathBuf> = std::fs::read_dir(input)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "pgm"))
        .collect();
    frame_paths.sort();
    if frame_paths.is_empty() {
        return Err(CmdError::Io(format!(
            "no .pgm frames in {}",
            input.display()
        )));
    }

    std::fs::create_dir_all(&common.out)?;
    let events_path = common.out.join("events.csv");
    let mut w = BufWriter::new(File::create(&events_path)?);
    csv_preamble(
        &mut w,
        common.seed,
        "frame,centroid_row,centroid_col,size,intensity,symbol",
    )?;
    let mut total = 0usize;
    for path in &frame_paths {
        let f = File::open(path)?;
        let frame = Frame::read_pgm(BufReader::new(f))
            .map_err(|e| CmdError::Io(format!("{}: {e}", path.display())))?;
        let extraction =
            extract_events(&frame, &cuts).map_err(|e| CmdError::Config(e.to_string()))?;
        let name = path.file_name().unwrap().to_string_lossy();
        for e in &extraction.accepted {
            let mapped = spatial_qkd::detector::events_to_symbols(
                std::slice::from_ref(e),
                &grid,
                origin,
                frame.height.max(FRAME_HEIGHT),
                frame.width.max(FRAME_WIDTH),
            )
            .map_err(|err| CmdError::Config(err.to_string()))?;
            let symbol = mapped
                .symbols
                .first()
                .map(|s| s.index().to_string())
                .unwrap_or_else(|| "-".to_string());
            writeln!(
                w,
                "{name},{:.3},{:.3},{},{},{symbol}",
                e.centroid_row, e.centroid_col, e.size, e.intensity
            )?;
            total += 1;
        }
    }
    drop(w);

    write_manifest(
        &common.out,
        "frames extract",
        &common,
        &[&events_path],
        serde_json::json!({
            "input": input.display().to_string(),
            "frames": frame_paths.len(),
            "cuts": cuts,
            "origin": origin,
        }),
    )?;
    println!("extracted {total} events from {} frames", frame_paths.len());
    Ok(())
}
