//! The `poleloc` command line: simulate, extract, build-map, localize,
//! evaluate, bench.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error
//! (missing or malformed input).

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::eval::{match_poles, match_scan, trajectory_errors, MatchReport, TrajectoryErrors};
use crate::extractor::{extract_poles, PoleDetection};
use crate::geometry::{project_scan, RangeImage};
use crate::io::{self, SessionDir};
use crate::map::PoleMap;
use crate::mapping::MapBuilder;
use crate::mcl::Localizer;
use crate::sim::generate_session;
use crate::textfmt::sig9;

#[derive(Debug, Parser)]
#[command(name = "poleloc", version, about = "Pole-based LiDAR mapping and localization")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Particle count (overrides the configuration).
    #[arg(long, global = true)]
    pub particles: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out", value_name = "DIR")]
    pub out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ray-cast a synthetic session (scans, poses, odometry, truth poles).
    Simulate,
    /// Extract poles from every scan of a session.
    Extract {
        #[arg(long, value_name = "DIR")]
        session: PathBuf,
    },
    /// Build a global pole map from one or more sessions.
    BuildMap {
        /// First session is mapped segment by segment; later ones only
        /// contribute scans from unvisited places.
        #[arg(long = "session", value_name = "DIR", required = true)]
        sessions: Vec<PathBuf>,
    },
    /// Run the particle filter on a session against a map.
    Localize {
        #[arg(long, value_name = "DIR")]
        session: PathBuf,
        #[arg(long, value_name = "PATH")]
        map: PathBuf,
    },
    /// Score a map, a trajectory or per-scan detections.
    Evaluate {
        /// Map to score against `--truth`.
        #[arg(long, value_name = "PATH", requires = "truth")]
        map: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        truth: Option<PathBuf>,
        /// Trajectory to score against `--reference`.
        #[arg(long, value_name = "PATH", requires = "reference")]
        trajectory: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        reference: Option<PathBuf>,
        /// Per-scan detections to score against the truth poles of `--session`.
        #[arg(long, value_name = "PATH", requires = "session")]
        detections: Option<PathBuf>,
        #[arg(long, value_name = "DIR")]
        session: Option<PathBuf>,
        /// Association bound, meters.
        #[arg(long, default_value_t = 1.0)]
        max_dist: f64,
        /// Per-scan mode: only score truth poles within this range.
        #[arg(long, default_value_t = f64::INFINITY)]
        range: f64,
    },
    /// Per-scan extraction and filter-step latency over a session.
    Bench {
        #[arg(long, value_name = "DIR")]
        session: PathBuf,
        /// Map for the filter steps; defaults to the session's truth poles.
        #[arg(long, value_name = "PATH")]
        map: Option<PathBuf>,
        /// Number of scans to time.
        #[arg(long, default_value_t = 100)]
        scans: usize,
    },
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_data_error() {
                2
            } else {
                1
            }
        }
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    let g = &cli.global;
    if let Some(n) = g.threads {
        // Fails only if a pool already exists (e.g. repeated in-process runs).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let mut cfg = Config::load_or_default(g.config.as_deref())?;
    if let Some(n) = g.particles {
        cfg.mcl.particles = n;
    }
    cfg.validate()?;
    let header = format!("{}# seed {}\n", cfg.header(), g.seed);
    let out = g.out.as_path();
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    match &cli.command {
        Command::Simulate => simulate(&cfg, g.seed, out, &header),
        Command::Extract { session } => extract(&cfg, session, out, &header),
        Command::BuildMap { sessions } => build_map(&cfg, sessions, out),
        Command::Localize { session, map } => localize(&cfg, g.seed, session, map, out, &header),
        Command::Evaluate {
            map,
            truth,
            trajectory,
            reference,
            detections,
            session,
            max_dist,
            range,
        } => {
            let mut report = header.clone();
            let mut csv = String::new();
            if let (Some(m), Some(t)) = (map, truth) {
                let r = match_poles(&PoleMap::read(m)?, &io::read_truth_poles(t)?, *max_dist);
                push_match("map", &r, &mut report, &mut csv);
            }
            if let (Some(tr), Some(rf)) = (trajectory, reference) {
                let e = trajectory_errors(&io::read_poses(tr)?, &io::read_poses(rf)?)?;
                push_trajectory(&e, &mut report, &mut csv);
            }
            if let (Some(d), Some(s)) = (detections, session) {
                let r = evaluate_detections(d, s, *max_dist, *range)?;
                push_match("per_scan", &r, &mut report, &mut csv);
            }
            if csv.is_empty() {
                return Err(Error::InvalidConfig(
                    "evaluate needs --map/--truth, --trajectory/--reference or --detections/--session".into(),
                ));
            }
            print!("{}", strip_comments(&report));
            write(&out.join("report.txt"), &report)?;
            write(&out.join("metrics.csv"), &csv)?;
            io::write_manifest(out, &cfg.hash(), &["report.txt", "metrics.csv"])
        }
        Command::Bench { session, map, scans } => bench(&cfg, g.seed, session, map.as_deref(), *scans, out, &header),
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn strip_comments(text: &str) -> String {
    text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect()
}

fn simulate(cfg: &Config, seed: u64, out: &Path, header: &str) -> Result<()> {
    let world = cfg.simulator.world()?;
    let traj = cfg.simulator.trajectory()?;
    let session = generate_session(
        &world,
        &traj,
        &cfg.sensor,
        &cfg.simulator.odometry_noise,
        cfg.simulator.range_noise,
        seed,
    )?;
    SessionDir::create(out, &session.truth, &session.odometry, Some(&world.truth_poles()))?;
    write(&out.join("poses.txt"), &io::poses_to_text(&session.truth, &format!("{header}# timestamp x y theta\n")))?;
    let world_toml = toml::to_string(&world).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    write(&out.join("world.toml"), &world_toml)?;
    (0..session.len())
        .into_par_iter()
        .try_for_each(|i| SessionDir::write_scan(out, i, &session.scan(i)))?;
    log::info!("simulated {} scans into {}", session.len(), out.display());
    io::write_manifest(
        out,
        &cfg.hash(),
        &["scans/", "poses.txt", "odometry.txt", "truth_poles.txt", "world.toml"],
    )
}

fn load_image(session: &SessionDir, i: usize, cfg: &Config) -> Result<RangeImage> {
    Ok(project_scan(&session.scan(i)?.points, &cfg.sensor))
}

fn extract_session(cfg: &Config, session: &SessionDir) -> Result<Vec<Vec<PoleDetection>>> {
    (0..session.len())
        .into_par_iter()
        .map(|i| Ok(extract_poles(&load_image(session, i, cfg)?, &cfg.extractor)))
        .collect()
}

fn extract(cfg: &Config, dir: &Path, out: &Path, header: &str) -> Result<()> {
    let session = SessionDir::open(dir)?;
    let dets = extract_session(cfg, &session)?;
    let text = io::detections_to_text(&dets, &format!("{header}# scan x y radius support\n"));
    write(&out.join("detections.txt"), &text)?;
    io::write_manifest(out, &cfg.hash(), &["detections.txt"])
}

fn build_map(cfg: &Config, dirs: &[PathBuf], out: &Path) -> Result<()> {
    let mut builder = MapBuilder::new(cfg.map, cfg.extractor);
    for (k, dir) in dirs.iter().enumerate() {
        let session = SessionDir::open(dir)?;
        let scan = |i: usize| load_image(&session, i, cfg);
        if k == 0 {
            builder.add_session(&session.poses, scan)?;
        } else {
            builder.add_unseen(&session.poses, scan, cfg.map.unseen_min_dist)?;
        }
    }
    let mut map = builder.finish();
    for (k, v) in cfg.pairs() {
        map.set_meta(&format!("config.{k}"), v);
    }
    map.set_meta("config_hash", cfg.hash());
    map.write(&out.join("map.txt"))?;
    io::write_manifest(out, &cfg.hash(), &["map.txt"])
}

fn localize(cfg: &Config, seed: u64, dir: &Path, map_path: &Path, out: &Path, header: &str) -> Result<()> {
    let map = PoleMap::read(map_path)?;
    let session = SessionDir::open(dir)?;
    let Some(first) = session.poses.first() else {
        return Err(Error::EmptyInput("session has no scans"));
    };
    let mut loc = Localizer::new(&map, cfg.mcl, cfg.extractor, &first.pose, seed)?;
    let mut text = format!("{header}# timestamp x y theta ess_fraction\n");
    let _ = writeln!(
        text,
        "{} {} {} {} 1",
        sig9(first.t),
        sig9(loc.estimate().x),
        sig9(loc.estimate().y),
        sig9(loc.estimate().theta)
    );
    let mut starved = 0;
    for i in 1..session.len() {
        let step = loc.step(&session.odometry[i - 1], &load_image(&session, i, cfg)?);
        starved += step.starved as usize;
        let p = step.pose;
        let _ = writeln!(
            text,
            "{} {} {} {} {}",
            sig9(session.poses[i].t),
            sig9(p.x),
            sig9(p.y),
            sig9(p.theta),
            sig9(step.ess_fraction)
        );
    }
    if starved > 0 {
        log::warn!("particle weights collapsed on {starved} steps");
    }
    write(&out.join("trajectory.txt"), &text)?;
    io::write_manifest(out, &cfg.hash(), &["trajectory.txt"])
}

fn push_match(label: &str, r: &MatchReport, report: &mut String, csv: &mut String) {
    let _ = writeln!(report, "[{label}]");
    report.push_str(&r.to_kv());
    let _ = writeln!(csv, "kind,{}", MatchReport::CSV_HEADER);
    let _ = writeln!(csv, "{label},{}", r.csv_row());
}

fn push_trajectory(e: &TrajectoryErrors, report: &mut String, csv: &mut String) {
    report.push_str("[trajectory]\n");
    report.push_str(&e.to_kv());
    let _ = writeln!(csv, "kind,{}", TrajectoryErrors::CSV_HEADER);
    let _ = writeln!(csv, "trajectory,{}", e.csv_row());
}

/// Sensor-frame detections of every scan against the session's truth poles
/// seen from the reference pose, micro-averaged.
fn evaluate_detections(path: &Path, dir: &Path, max_dist: f64, range: f64) -> Result<MatchReport> {
    let session = SessionDir::open(dir)?;
    let truth = session
        .truth_poles
        .as_ref()
        .ok_or(Error::EmptyInput("session has no truth_poles.txt"))?;
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let dets = io::parse_detections(&text, session.len(), path)?;
    let mut total = MatchReport::default();
    for (i, scan) in dets.iter().enumerate() {
        let pose = session.poses[i].pose;
        let local: Vec<[f64; 2]> = truth
            .poles
            .iter()
            .map(|p| {
                let (x, y) = pose.inverse_transform_point(p.x, p.y);
                [x, y]
            })
            .collect();
        let det: Vec<[f64; 2]> = scan.iter().map(|d| [d.x, d.y]).collect();
        let r = match_scan(&det, &local, max_dist, range);
        total.absorb(&r);
        total.matches.extend(r.matches);
    }
    Ok(total)
}

/// Mean and 95th percentile of a latency sample, milliseconds.
pub fn latency_stats(ms: &[f64]) -> (f64, f64) {
    if ms.is_empty() {
        return (0.0, 0.0);
    }
    let mut sorted = ms.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mean = ms.iter().sum::<f64>() / ms.len() as f64;
    let k = ((0.95 * ms.len() as f64).ceil() as usize).clamp(1, ms.len()) - 1;
    (mean, sorted[k])
}

fn bench(
    cfg: &Config,
    seed: u64,
    dir: &Path,
    map: Option<&Path>,
    scans: usize,
    out: &Path,
    header: &str,
) -> Result<()> {
    let session = SessionDir::open(dir)?;
    let n = scans.min(session.len());
    if n < 2 {
        return Err(Error::EmptyInput("bench needs a session with at least two scans"));
    }
    let map = match map {
        Some(p) => PoleMap::read(p)?,
        None => session
            .truth_poles
            .clone()
            .ok_or(Error::EmptyInput("no --map and the session has no truth_poles.txt"))?,
    };
    let images: Vec<RangeImage> = (0..n).map(|i| load_image(&session, i, cfg)).collect::<Result<_>>()?;
    let mut extract_ms = Vec::with_capacity(n);
    for img in &images {
        let t0 = Instant::now();
        std::hint::black_box(extract_poles(img, &cfg.extractor));
        extract_ms.push(t0.elapsed().as_secs_f64() * 1e3);
    }
    let mut loc = Localizer::new(&map, cfg.mcl, cfg.extractor, &session.poses[0].pose, seed)?;
    let mut step_ms = Vec::with_capacity(n - 1);
    for (odo, img) in session.odometry.iter().zip(&images[1..]) {
        let t0 = Instant::now();
        std::hint::black_box(loc.step(odo, img));
        step_ms.push(t0.elapsed().as_secs_f64() * 1e3);
    }
    let (em, ep) = latency_stats(&extract_ms);
    let (sm, sp) = latency_stats(&step_ms);
    let body = format!(
        "scans {n}\nparticles {}\nthreads {}\nextract_mean_ms {}\nextract_p95_ms {}\nmcl_step_mean_ms {}\nmcl_step_p95_ms {}\n",
        cfg.mcl.particles,
        rayon::current_num_threads(),
        sig9(em),
        sig9(ep),
        sig9(sm),
        sig9(sp)
    );
    print!("{body}");
    write(&out.join("bench.txt"), &format!("{header}{body}"))?;
    io::write_manifest(out, &cfg.hash(), &["bench.txt"])
}
