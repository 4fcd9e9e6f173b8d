//! Readers and writers for scans, trajectories, detections and session
//! directories, plus adapters for KITTI and NCLT files.
//!
//! Text formats are UTF-8, one record per line, space separated, `#` starts
//! a comment or header line. Every reader is total: malformed input yields
//! [`Error::Format`], never a panic.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::extractor::{Frame, PoleDetection};
use crate::geometry::Point3;
use crate::map::PoleMap;
use crate::motion::OdometryDelta;
use crate::pose::{Pose2D, TimedPose};
use crate::textfmt::{data_fields, header_pair, sig9};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScanRecord {
    pub timestamp: f64,
    pub points: Vec<Point3>,
    /// Non-finite points skipped while reading.
    pub dropped: usize,
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    String::from_utf8(read_bytes(path)?).map_err(|_| Error::format(path, 0, "file is not UTF-8"))
}

fn write_file(path: &Path, data: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, data).map_err(|e| Error::io(path, e))
}

/// Little-endian `f32` quadruples `(x, y, z, intensity)`; intensity is
/// discarded.
pub fn parse_scan_bin(bytes: &[u8], origin: &Path) -> Result<ScanRecord> {
    if !bytes.len().is_multiple_of(16) {
        return Err(Error::format(
            origin,
            0,
            format!("size {} is not a multiple of 16 bytes", bytes.len()),
        ));
    }
    let f = |c: &[u8]| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64;
    let mut rec = ScanRecord::default();
    for q in bytes.chunks_exact(16) {
        let p = Point3::new(f(&q[0..4]), f(&q[4..8]), f(&q[8..12]));
        if p.is_finite() {
            rec.points.push(p);
        } else {
            rec.dropped += 1;
        }
    }
    if rec.dropped > 0 {
        log::warn!("{}: dropped {} non-finite points", origin.display(), rec.dropped);
    }
    Ok(rec)
}

pub fn read_scan_bin(path: &Path) -> Result<ScanRecord> {
    parse_scan_bin(&read_bytes(path)?, path)
}

pub fn encode_scan_bin(points: &[Point3]) -> Vec<u8> {
    let mut out = Vec::with_capacity(points.len() * 16);
    for p in points {
        for v in [p.x as f32, p.y as f32, p.z as f32, 0.0] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn write_scan_bin(path: &Path, points: &[Point3]) -> Result<()> {
    write_file(path, encode_scan_bin(points))
}

fn parse_f64(s: &str, origin: &Path, line: usize, what: &str) -> Result<f64> {
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::format(origin, line, format!("invalid {what} {s:?}")))
}

fn expect_fields(fields: &[&str], n: usize, layout: &str, origin: &Path, line: usize) -> Result<()> {
    if fields.len() != n {
        return Err(Error::format(
            origin,
            line,
            format!("expected `{layout}`, found {} fields", fields.len()),
        ));
    }
    Ok(())
}

/// `timestamp x y theta` per line, timestamps strictly increasing.
pub fn parse_poses(text: &str, origin: &Path) -> Result<Vec<TimedPose>> {
    let mut out: Vec<TimedPose> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let Some(f) = data_fields(line) else { continue };
        // Extra columns (e.g. the ESS of localizer output) are ignored.
        if f.len() < 4 {
            return Err(Error::format(
                origin,
                lineno,
                format!("expected `timestamp x y theta`, found {} fields", f.len()),
            ));
        }
        let t = parse_f64(f[0], origin, lineno, "timestamp")?;
        let pose = Pose2D::new(
            parse_f64(f[1], origin, lineno, "x")?,
            parse_f64(f[2], origin, lineno, "y")?,
            parse_f64(f[3], origin, lineno, "theta")?,
        );
        if let Some(prev) = out.last() {
            if t <= prev.t {
                return Err(Error::format(origin, lineno, "timestamps must be strictly increasing"));
            }
        }
        out.push(TimedPose::new(t, pose));
    }
    Ok(out)
}

pub fn read_poses(path: &Path) -> Result<Vec<TimedPose>> {
    parse_poses(&read_text(path)?, path)
}

pub fn poses_to_text(poses: &[TimedPose], header: &str) -> String {
    let mut out = header.to_string();
    for p in poses {
        let _ = writeln!(out, "{} {} {} {}", sig9(p.t), sig9(p.pose.x), sig9(p.pose.y), sig9(p.pose.theta));
    }
    out
}

pub fn write_poses(path: &Path, poses: &[TimedPose]) -> Result<()> {
    write_file(path, poses_to_text(poses, "# timestamp x y theta\n"))
}

pub fn read_truth_poles(path: &Path) -> Result<PoleMap> {
    PoleMap::read(path)
}

/// `timestamp rot1 trans rot2`; the timestamp is that of the scan the
/// increment leads to.
pub fn parse_odometry(text: &str, origin: &Path) -> Result<Vec<(f64, OdometryDelta)>> {
    let mut out: Vec<(f64, OdometryDelta)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let Some(f) = data_fields(line) else { continue };
        expect_fields(&f, 4, "timestamp rot1 trans rot2", origin, lineno)?;
        let t = parse_f64(f[0], origin, lineno, "timestamp")?;
        if out.last().is_some_and(|(prev, _)| t <= *prev) {
            return Err(Error::format(origin, lineno, "timestamps must be strictly increasing"));
        }
        out.push((
            t,
            OdometryDelta::new(
                parse_f64(f[1], origin, lineno, "rot1")?,
                parse_f64(f[2], origin, lineno, "trans")?,
                parse_f64(f[3], origin, lineno, "rot2")?,
            ),
        ));
    }
    Ok(out)
}

pub fn read_odometry(path: &Path) -> Result<Vec<(f64, OdometryDelta)>> {
    parse_odometry(&read_text(path)?, path)
}

pub fn write_odometry(path: &Path, odom: &[(f64, OdometryDelta)]) -> Result<()> {
    let mut out = String::from("# timestamp rot1 trans rot2\n");
    for (t, d) in odom {
        let _ = writeln!(out, "{} {} {} {}", sig9(*t), sig9(d.rot1), sig9(d.trans), sig9(d.rot2));
    }
    write_file(path, out)
}

/// Per-scan detections in the sensor frame: `scan x y radius support`.
pub fn detections_to_text(per_scan: &[Vec<PoleDetection>], header: &str) -> String {
    let mut out = header.to_string();
    for (i, dets) in per_scan.iter().enumerate() {
        for d in dets {
            let _ = writeln!(out, "{i} {} {} {} {}", sig9(d.x), sig9(d.y), sig9(d.radius), d.support);
        }
    }
    out
}

/// Inverse of [`detections_to_text`]; `scans` sizes the output so scans
/// without detections are kept.
pub fn parse_detections(text: &str, scans: usize, origin: &Path) -> Result<Vec<Vec<PoleDetection>>> {
    let mut out = vec![Vec::new(); scans];
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let Some(f) = data_fields(line) else { continue };
        expect_fields(&f, 5, "scan x y radius support", origin, lineno)?;
        let scan: usize = f[0]
            .parse()
            .ok()
            .filter(|&s| s < scans)
            .ok_or_else(|| Error::format(origin, lineno, format!("invalid scan index {:?}", f[0])))?;
        let support = f[4]
            .parse()
            .map_err(|_| Error::format(origin, lineno, format!("invalid support {:?}", f[4])))?;
        out[scan].push(PoleDetection {
            x: parse_f64(f[1], origin, lineno, "x")?,
            y: parse_f64(f[2], origin, lineno, "y")?,
            radius: parse_f64(f[3], origin, lineno, "radius")?,
            support,
            frame: Frame::Sensor,
        });
    }
    Ok(out)
}

/// On-disk session layout: `scans/NNNNNN.bin`, `poses.txt` (ground truth or
/// reference poses, one per scan), optional `odometry.txt` and
/// `truth_poles.txt`.
#[derive(Debug, Clone)]
pub struct SessionDir {
    pub root: PathBuf,
    pub poses: Vec<TimedPose>,
    /// `odometry[i]` leads from scan `i` to scan `i + 1`.
    pub odometry: Vec<OdometryDelta>,
    pub truth_poles: Option<PoleMap>,
}

impl SessionDir {
    pub fn scan_path(root: &Path, i: usize) -> PathBuf {
        root.join("scans").join(format!("{i:06}.bin"))
    }

    pub fn open(root: &Path) -> Result<Self> {
        if !root.is_dir() {
            return Err(Error::io(
                root,
                std::io::Error::new(std::io::ErrorKind::NotFound, "session directory not found"),
            ));
        }
        let poses = read_poses(&root.join("poses.txt"))?;
        let odo_path = root.join("odometry.txt");
        let odometry = if odo_path.exists() {
            let odo = read_odometry(&odo_path)?;
            if odo.len() + 1 != poses.len().max(1) {
                return Err(Error::format(
                    &odo_path,
                    0,
                    format!("{} increments for {} poses", odo.len(), poses.len()),
                ));
            }
            odo.into_iter().map(|(_, d)| d).collect()
        } else {
            // Without recorded odometry, fall back to increments of the poses.
            poses.windows(2).map(|w| OdometryDelta::between(&w[0].pose, &w[1].pose)).collect()
        };
        let truth_path = root.join("truth_poles.txt");
        let truth_poles = truth_path.exists().then(|| PoleMap::read(&truth_path)).transpose()?;
        Ok(Self {
            root: root.to_path_buf(),
            poses,
            odometry,
            truth_poles,
        })
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn scan(&self, i: usize) -> Result<ScanRecord> {
        let mut rec = read_scan_bin(&Self::scan_path(&self.root, i))?;
        rec.timestamp = self.poses[i].t;
        Ok(rec)
    }

    /// Writes poses, odometry and truth; scans are written separately with
    /// [`SessionDir::write_scan`] so they can be streamed.
    pub fn create(
        root: &Path,
        poses: &[TimedPose],
        odometry: &[OdometryDelta],
        truth_poles: Option<&PoleMap>,
    ) -> Result<()> {
        let scans = root.join("scans");
        fs::create_dir_all(&scans).map_err(|e| Error::io(&scans, e))?;
        write_poses(&root.join("poses.txt"), poses)?;
        let odo: Vec<(f64, OdometryDelta)> = poses.iter().skip(1).map(|p| p.t).zip(odometry.iter().copied()).collect();
        write_odometry(&root.join("odometry.txt"), &odo)?;
        if let Some(m) = truth_poles {
            m.write(&root.join("truth_poles.txt"))?;
        }
        Ok(())
    }

    pub fn write_scan(root: &Path, i: usize, points: &[Point3]) -> Result<()> {
        write_scan_bin(&Self::scan_path(root, i), points)
    }
}

/// Artifact list plus the effective configuration hash.
pub fn write_manifest(dir: &Path, config_hash: &str, artifacts: &[&str]) -> Result<()> {
    let mut out = String::from("# format poleloc-manifest/1\n");
    let _ = writeln!(out, "config_hash {config_hash}");
    for a in artifacts {
        let _ = writeln!(out, "artifact {a}");
    }
    write_file(&dir.join("manifest.txt"), out)
}

/// KITTI odometry ground truth: 12 numbers per line, a row-major 3x4
/// camera-to-world transform in the camera frame (x right, y down,
/// z forward). Flattened to the ground plane as forward = `z`, left = `-x`,
/// heading from the camera's forward axis. Timestamps come from `times`
/// (KITTI `times.txt`) or default to the line index.
pub fn parse_kitti_poses(text: &str, times: Option<&[f64]>, origin: &Path) -> Result<Vec<TimedPose>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let Some(f) = data_fields(line) else { continue };
        expect_fields(&f, 12, "3x4 row-major transform", origin, lineno)?;
        let m: Vec<f64> = f
            .iter()
            .map(|s| parse_f64(s, origin, lineno, "matrix entry"))
            .collect::<Result<_>>()?;
        let k = out.len();
        let t = match times {
            Some(ts) => *ts
                .get(k)
                .ok_or_else(|| Error::format(origin, lineno, "more poses than timestamps"))?,
            None => k as f64,
        };
        let yaw = (-m[2]).atan2(m[10]);
        out.push(TimedPose::new(t, Pose2D::new(m[11], -m[3], yaw)));
    }
    Ok(out)
}

pub fn read_kitti_times(path: &Path) -> Result<Vec<f64>> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let Some(f) = data_fields(line) else { continue };
        expect_fields(&f, 1, "timestamp", path, i + 1)?;
        out.push(parse_f64(f[0], path, i + 1, "timestamp")?);
    }
    Ok(out)
}

/// NCLT `velodyne_sync` scan: 8-byte records of `u16` x, y, z (scaled by
/// 0.005 m, offset -100 m), intensity and laser id. NCLT's body frame is
/// x forward, y right, z down; points are returned z-up (y and z negated).
pub fn parse_nclt_scan(bytes: &[u8], origin: &Path) -> Result<ScanRecord> {
    if !bytes.len().is_multiple_of(8) {
        return Err(Error::format(
            origin,
            0,
            format!("size {} is not a multiple of 8 bytes", bytes.len()),
        ));
    }
    let c = |b: &[u8]| u16::from_le_bytes([b[0], b[1]]) as f64 * 0.005 - 100.0;
    let points = bytes
        .chunks_exact(8)
        .map(|r| Point3::new(c(&r[0..2]), -c(&r[2..4]), -c(&r[4..6])))
        .collect();
    Ok(ScanRecord {
        timestamp: 0.0,
        points,
        dropped: 0,
    })
}

pub fn read_nclt_scan(path: &Path) -> Result<ScanRecord> {
    parse_nclt_scan(&read_bytes(path)?, path)
}

/// Pairs every `velodyne_sync/<utime>.bin` in `scan_dir` with the ground
/// truth interpolated at its timestamp, in time order. Scans outside the
/// ground-truth span are skipped.
pub fn nclt_session(scan_dir: &Path, ground_truth: &Path) -> Result<Vec<(TimedPose, PathBuf)>> {
    let gt = parse_nclt_ground_truth(&read_text(ground_truth)?, ground_truth)?;
    let mut scans = Vec::new();
    for entry in fs::read_dir(scan_dir).map_err(|e| Error::io(scan_dir, e))? {
        let path = entry.map_err(|e| Error::io(scan_dir, e))?.path();
        if path.extension().is_none_or(|e| e != "bin") {
            continue;
        }
        let Some(utime) = path.file_stem().and_then(|s| s.to_str()).and_then(|s| s.parse::<u64>().ok()) else {
            continue;
        };
        scans.push((utime, path));
    }
    scans.sort();
    let out: Vec<_> = scans
        .into_iter()
        .filter_map(|(utime, path)| {
            let t = utime as f64 * 1e-6;
            crate::eval::interpolate_pose(&gt, t).map(|p| (TimedPose::new(t, p), path))
        })
        .collect();
    if out.is_empty() {
        return Err(Error::NoTemporalOverlap);
    }
    Ok(out)
}

/// NCLT ground truth CSV: `utime, x, y, z, roll, pitch, yaw` in a
/// north-east-down frame. Rows with NaN are skipped; output is z-up
/// (y and yaw negated), timestamps in seconds.
pub fn parse_nclt_ground_truth(text: &str, origin: &Path) -> Result<Vec<TimedPose>> {
    let mut out: Vec<TimedPose> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        expect_fields(&f, 7, "utime,x,y,z,roll,pitch,yaw", origin, lineno)?;
        let vals: Vec<f64> = f
            .iter()
            .map(|s| s.parse::<f64>().map_err(|_| Error::format(origin, lineno, format!("invalid number {s:?}"))))
            .collect::<Result<_>>()?;
        if vals.iter().any(|v| !v.is_finite()) {
            continue;
        }
        let t = vals[0] * 1e-6;
        if out.last().is_some_and(|p| t <= p.t) {
            continue;
        }
        out.push(TimedPose::new(t, Pose2D::new(vals[1], -vals[2], -vals[6])));
    }
    Ok(out)
}

/// Reads a `key value` manifest or report into pairs.
pub fn parse_key_values(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter_map(|l| {
            if l.trim_start().starts_with('#') {
                return header_pair(l);
            }
            let (k, v) = l.trim().split_once(char::is_whitespace)?;
            Some((k.to_string(), v.trim().to_string()))
        })
        .collect()
}
