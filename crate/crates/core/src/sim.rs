//! Synthetic worlds and ray-cast LiDAR scans used as ground truth.
//!
//! A world is a flat ground plane at `z = 0` with vertical cylinders (static
//! poles and moving cylinders) and vertical wall rectangles. The simulated
//! scanner casts one ray through the center of every range-image pixel, so a
//! noise-free scan projects back onto the same pixel grid exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point3, SensorConfig};
use crate::map::{MapPole, PoleMap};
use crate::motion::{MotionNoise, OdometryDelta};
use crate::pose::{normalize_angle, Pose2D, TimedPose};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaticPole {
    pub x: f64,
    pub y: f64,
    pub radius: f64,
    pub height: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wall {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
    pub height: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

/// Cylinder moving piecewise-linearly between timed waypoints; it rests at
/// the first and last waypoint outside their time span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicCylinder {
    pub radius: f64,
    pub height: f64,
    pub path: Vec<PathPoint>,
}

impl DynamicCylinder {
    pub fn position(&self, t: f64) -> (f64, f64) {
        let path = &self.path;
        match path.len() {
            0 => (f64::NAN, f64::NAN),
            1 => (path[0].x, path[0].y),
            _ => {
                if t <= path[0].t {
                    return (path[0].x, path[0].y);
                }
                for w in path.windows(2) {
                    if t <= w[1].t {
                        let s = (t - w[0].t) / (w[1].t - w[0].t);
                        return (w[0].x + s * (w[1].x - w[0].x), w[0].y + s * (w[1].y - w[0].y));
                    }
                }
                let last = path[path.len() - 1];
                (last.x, last.y)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct WorldSpec {
    #[serde(default, rename = "pole")]
    pub poles: Vec<StaticPole>,
    #[serde(default, rename = "wall")]
    pub walls: Vec<Wall>,
    #[serde(default, rename = "dynamic")]
    pub dynamic: Vec<DynamicCylinder>,
    #[serde(default)]
    pub seed: u64,
}

impl WorldSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(format!("world: {m}")));
        for (i, p) in self.poles.iter().enumerate() {
            if !(p.radius > 0.0 && p.height > 0.0) {
                return bad(format!("pole {i} needs positive radius and height"));
            }
            for q in &self.poles[..i] {
                if p.x == q.x && p.y == q.y {
                    return bad(format!("pole {i} duplicates another pole center"));
                }
            }
        }
        for (i, w) in self.walls.iter().enumerate() {
            if !(w.height > 0.0) || (w.x0 == w.x1 && w.y0 == w.y1) {
                return bad(format!("wall {i} is degenerate"));
            }
        }
        for (i, d) in self.dynamic.iter().enumerate() {
            if !(d.radius > 0.0 && d.height > 0.0) || d.path.is_empty() {
                return bad(format!("dynamic cylinder {i} is degenerate"));
            }
            if d.path.windows(2).any(|w| w[1].t <= w[0].t) {
                return bad(format!("dynamic cylinder {i} path times must increase"));
            }
        }
        Ok(())
    }

    /// Static poles as a ground-truth map with unbounded observation counts.
    pub fn truth_poles(&self) -> PoleMap {
        PoleMap::new(
            self.poles
                .iter()
                .map(|p| MapPole::new(p.x, p.y, p.radius, MapPole::UNBOUNDED))
                .collect(),
        )
        .with_meta("source", "world-truth")
    }
}

/// Free function form of [`WorldSpec::truth_poles`].
pub fn world_truth_poles(world: &WorldSpec) -> PoleMap {
    world.truth_poles()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    #[serde(rename = "waypoint")]
    pub waypoints: Vec<Waypoint>,
    pub scan_period: f64,
    pub mount_height: f64,
}

impl TrajectorySpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("trajectory: {m}")));
        if self.waypoints.is_empty() {
            return bad("needs at least one waypoint");
        }
        if self.waypoints.windows(2).any(|w| w[1].t <= w[0].t) {
            return bad("waypoint times must strictly increase");
        }
        if !(self.scan_period > 0.0) {
            return bad("scan_period must be > 0");
        }
        if !(self.mount_height > 0.0) {
            return bad("mount_height must be > 0");
        }
        Ok(())
    }

    /// Ground-truth poses at every scan time from the first to the last
    /// waypoint, interpolated linearly (heading along the shorter arc).
    pub fn scan_poses(&self) -> Vec<TimedPose> {
        let wps = &self.waypoints;
        let Some(first) = wps.first() else {
            return Vec::new();
        };
        let last_t = wps[wps.len() - 1].t;
        let mut out = Vec::new();
        let mut seg = 0;
        let mut k = 0usize;
        loop {
            let t = first.t + k as f64 * self.scan_period;
            if t > last_t + 1e-9 * self.scan_period.max(1.0) {
                break;
            }
            while seg + 1 < wps.len() - 1 && t > wps[seg + 1].t {
                seg += 1;
            }
            let pose = if wps.len() == 1 {
                Pose2D::new(first.x, first.y, first.theta)
            } else {
                let (a, b) = (wps[seg], wps[seg + 1]);
                let s = ((t - a.t) / (b.t - a.t)).clamp(0.0, 1.0);
                let dth = normalize_angle(b.theta - a.theta);
                Pose2D::new(a.x + s * (b.x - a.x), a.y + s * (b.y - a.y), a.theta + s * dth)
            };
            out.push(TimedPose::new(t, pose));
            k += 1;
            if wps.len() == 1 {
                break;
            }
        }
        out
    }

    /// Counter-clockwise circle starting at `(radius, 0)` heading `+y`, one
    /// waypoint every `spacing` meters of arc, traversed at `speed` m/s.
    pub fn circle_loop(circumference: f64, spacing: f64, speed: f64, mount_height: f64) -> Self {
        let radius = circumference / (2.0 * std::f64::consts::PI);
        let steps = (circumference / spacing).round() as usize;
        let waypoints = (0..=steps)
            .map(|k| {
                let s = k as f64 * spacing;
                let a = s / radius;
                Waypoint {
                    t: s / speed,
                    x: radius * a.cos(),
                    y: radius * a.sin(),
                    theta: normalize_angle(a + std::f64::consts::FRAC_PI_2),
                }
            })
            .collect();
        Self {
            waypoints,
            scan_period: spacing / speed,
            mount_height,
        }
    }
}

/// What a ray hit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Surface {
    Ground,
    /// Side of static pole `i`.
    PoleSide(usize),
    /// Top disk of static pole `i`.
    PoleTop(usize),
    Wall(usize),
    DynamicSide(usize),
    DynamicTop(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    /// Distance along the (unit) ray.
    pub range: f64,
    pub surface: Surface,
}

/// One simulated return with the pixel whose ray produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Return {
    pub u: usize,
    pub v: usize,
    pub point: Point3,
    /// Noise-free hit along the ray.
    pub hit: Hit,
}

const RAY_EPS: f64 = 1e-9;

fn closer(best: &mut Option<Hit>, range: f64, surface: Surface) {
    if range > RAY_EPS && best.is_none_or(|b| range < b.range) {
        *best = Some(Hit { range, surface });
    }
}

#[allow(clippy::too_many_arguments)]
fn cast_cylinder(
    best: &mut Option<Hit>,
    origin: [f64; 3],
    dir: [f64; 3],
    center: (f64, f64),
    radius: f64,
    height: f64,
    side: Surface,
    top: Surface,
) {
    let ox = origin[0] - center.0;
    let oy = origin[1] - center.1;
    let a = dir[0] * dir[0] + dir[1] * dir[1];
    if a > 0.0 {
        let b = ox * dir[0] + oy * dir[1];
        let c = ox * ox + oy * oy - radius * radius;
        let disc = b * b - a * c;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            for t in [(-b - sq) / a, (-b + sq) / a] {
                let z = origin[2] + t * dir[2];
                if t > RAY_EPS && (0.0..=height).contains(&z) {
                    closer(best, t, side);
                    break;
                }
            }
        }
    }
    if dir[2] != 0.0 {
        let t = (height - origin[2]) / dir[2];
        if t > RAY_EPS {
            let px = ox + t * dir[0];
            let py = oy + t * dir[1];
            if px * px + py * py <= radius * radius {
                closer(best, t, top);
            }
        }
    }
}

/// Nearest intersection of a unit-direction world-frame ray with the world at
/// time `t`.
pub fn cast_ray(world: &WorldSpec, time: f64, origin: [f64; 3], dir: [f64; 3]) -> Option<Hit> {
    let mut best = None;
    if dir[2] < 0.0 && origin[2] > 0.0 {
        closer(&mut best, -origin[2] / dir[2], Surface::Ground);
    }
    for (i, p) in world.poles.iter().enumerate() {
        cast_cylinder(
            &mut best,
            origin,
            dir,
            (p.x, p.y),
            p.radius,
            p.height,
            Surface::PoleSide(i),
            Surface::PoleTop(i),
        );
    }
    for (i, d) in world.dynamic.iter().enumerate() {
        cast_cylinder(
            &mut best,
            origin,
            dir,
            d.position(time),
            d.radius,
            d.height,
            Surface::DynamicSide(i),
            Surface::DynamicTop(i),
        );
    }
    for (i, w) in world.walls.iter().enumerate() {
        // Solve origin + t*dir = p0 + s*(p1 - p0) in the ground plane.
        let ex = w.x1 - w.x0;
        let ey = w.y1 - w.y0;
        let denom = dir[0] * ey - dir[1] * ex;
        if denom.abs() < 1e-15 {
            continue;
        }
        let qx = w.x0 - origin[0];
        let qy = w.y0 - origin[1];
        let t = (qx * ey - qy * ex) / denom;
        let s = (qx * dir[1] - qy * dir[0]) / denom;
        let z = origin[2] + t * dir[2];
        if (0.0..=1.0).contains(&s) && (0.0..=w.height).contains(&z) {
            closer(&mut best, t, Surface::Wall(i));
        }
    }
    best
}

/// A scanner mounted at a fixed height above the vehicle origin.
#[derive(Debug, Clone)]
pub struct Lidar {
    pub cfg: SensorConfig,
    pub mount_height: f64,
    /// Sensor-frame unit ray per pixel, row-major.
    rays: Vec<[f64; 3]>,
}

impl Lidar {
    pub fn new(cfg: SensorConfig, mount_height: f64) -> Self {
        let mut rays = Vec::with_capacity(cfg.width * cfg.height);
        for v in 0..cfg.height {
            for u in 0..cfg.width {
                let (az, el) = cfg.pixel_ray(u, v);
                rays.push([el.cos() * az.cos(), el.cos() * az.sin(), el.sin()]);
            }
        }
        Self {
            cfg,
            mount_height,
            rays,
        }
    }

    /// Casts every pixel ray from `pose` at time `t`. Returns outside the
    /// sensor range window are dropped; Gaussian noise with std
    /// `range_noise` is added along the ray.
    pub fn scan<R: Rng + ?Sized>(
        &self,
        world: &WorldSpec,
        pose: &Pose2D,
        t: f64,
        range_noise: f64,
        rng: &mut R,
    ) -> Vec<Return> {
        let (s, c) = pose.theta.sin_cos();
        let origin = [pose.x, pose.y, self.mount_height];
        let w = self.cfg.width;
        let mut out = Vec::new();
        for (k, ray) in self.rays.iter().enumerate() {
            let dir = [c * ray[0] - s * ray[1], s * ray[0] + c * ray[1], ray[2]];
            let Some(hit) = cast_ray(world, t, origin, dir) else {
                continue;
            };
            if hit.range < self.cfg.min_range || hit.range > self.cfg.max_range {
                continue;
            }
            let mut r = hit.range;
            if range_noise > 0.0 {
                let z: f64 = StandardNormal.sample(rng);
                r += range_noise * z;
                if r < self.cfg.min_range || r > self.cfg.max_range {
                    continue;
                }
            }
            out.push(Return {
                u: k % w,
                v: k / w,
                point: Point3::new(ray[0] * r, ray[1] * r, ray[2] * r),
                hit,
            });
        }
        out
    }
}

/// Ray-cast scan as a plain point list in the sensor frame.
pub fn raycast_scan<R: Rng + ?Sized>(
    world: &WorldSpec,
    pose: &Pose2D,
    t: f64,
    cfg: &SensorConfig,
    mount_height: f64,
    range_noise: f64,
    rng: &mut R,
) -> Vec<Point3> {
    Lidar::new(*cfg, mount_height)
        .scan(world, pose, t, range_noise, rng)
        .into_iter()
        .map(|r| r.point)
        .collect()
}

/// A simulated drive: ground-truth poses, noisy odometry, and scans that are
/// ray-cast on demand. Each scan draws its noise from its own seeded stream,
/// so scans can be produced in any order or in parallel.
#[derive(Debug, Clone)]
pub struct Session {
    pub world: WorldSpec,
    pub lidar: Lidar,
    pub truth: Vec<TimedPose>,
    /// `odometry[i]` moves from scan `i` to scan `i + 1`.
    pub odometry: Vec<OdometryDelta>,
    pub range_noise: f64,
    pub seed: u64,
}

impl Session {
    pub fn len(&self) -> usize {
        self.truth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.truth.is_empty()
    }

    fn scan_rng(&self, index: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64 + 1);
        rng
    }

    pub fn returns(&self, index: usize) -> Vec<Return> {
        let tp = &self.truth[index];
        let mut rng = self.scan_rng(index);
        self.lidar
            .scan(&self.world, &tp.pose, tp.t, self.range_noise, &mut rng)
    }

    pub fn scan(&self, index: usize) -> Vec<Point3> {
        self.returns(index).into_iter().map(|r| r.point).collect()
    }
}

/// Builds a session: truth poses along the trajectory and odometry deltas
/// equal to the true increments perturbed by `odom_noise`.
pub fn generate_session(
    world: &WorldSpec,
    traj: &TrajectorySpec,
    cfg: &SensorConfig,
    odom_noise: &MotionNoise,
    range_noise: f64,
    seed: u64,
) -> Result<Session> {
    world.validate()?;
    traj.validate()?;
    cfg.validate()?;
    let truth = traj.scan_poses();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let odometry = truth
        .windows(2)
        .map(|w| odom_noise.sample(&OdometryDelta::between(&w[0].pose, &w[1].pose), &mut rng))
        .collect();
    Ok(Session {
        world: world.clone(),
        lidar: Lidar::new(*cfg, traj.mount_height),
        truth,
        odometry,
        range_noise,
        seed,
    })
}

/// Ready-made worlds used by tests, examples and the CLI.
pub mod scenarios {
    use super::*;
    use std::f64::consts::PI;

    pub const MOUNT_HEIGHT: f64 = 1.73;

    /// One 0.15 m pole, 4 m tall, at `(8, 2)`.
    pub fn single_pole() -> WorldSpec {
        WorldSpec {
            poles: vec![StaticPole {
                x: 8.0,
                y: 2.0,
                radius: 0.15,
                height: 4.0,
            }],
            ..WorldSpec::default()
        }
    }

    /// Short straight drive past the single pole.
    pub fn single_pole_drive() -> TrajectorySpec {
        TrajectorySpec {
            waypoints: vec![
                Waypoint {
                    t: 0.0,
                    x: -4.0,
                    y: 0.0,
                    theta: 0.0,
                },
                Waypoint {
                    t: 4.0,
                    x: 4.0,
                    y: 0.0,
                    theta: 0.0,
                },
            ],
            scan_period: 0.5,
            mount_height: MOUNT_HEIGHT,
        }
    }

    pub const LOOP_LENGTH: f64 = 240.0;

    pub fn loop_radius() -> f64 {
        LOOP_LENGTH / (2.0 * PI)
    }

    /// Ring road of 240 m with 20 roadside poles (radii 0.1-0.3 m, heights
    /// 3-6 m), four walls outside the ring and two pedestrians crossing.
    pub fn loop_world(seed: u64) -> WorldSpec {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r0 = loop_radius();
        let mut poles = Vec::with_capacity(20);
        for k in 0..20 {
            let a = 2.0 * PI * (k as f64 + rng.random_range(-0.25..0.25)) / 20.0;
            let side = if k % 2 == 0 { 1.0 } else { -1.0 };
            let dist = r0 + side * rng.random_range(3.0..7.0);
            poles.push(StaticPole {
                x: dist * a.cos(),
                y: dist * a.sin(),
                radius: rng.random_range(0.1..0.3),
                height: rng.random_range(3.0..6.0),
            });
        }
        let walls = (0..4)
            .map(|k| {
                let a = PI / 4.0 + k as f64 * PI / 2.0;
                let d = r0 + 14.0;
                let (c, s) = (a.cos(), a.sin());
                let half = 6.0;
                Wall {
                    x0: d * c - half * s,
                    y0: d * s + half * c,
                    x1: d * c + half * s,
                    y1: d * s - half * c,
                    height: 3.0,
                }
            })
            .collect();
        let crossing = |a: f64, period: f64| {
            let (c, s) = (a.cos(), a.sin());
            let inner = r0 - 6.0;
            let outer = r0 + 6.0;
            let path = (0..40)
                .map(|k| {
                    let d = if k % 2 == 0 { inner } else { outer };
                    PathPoint {
                        t: k as f64 * period,
                        x: d * c,
                        y: d * s,
                    }
                })
                .collect();
            DynamicCylinder {
                radius: 0.3,
                height: 1.8,
                path,
            }
        };
        WorldSpec {
            poles,
            walls,
            dynamic: vec![crossing(1.7, 9.0), crossing(4.4, 11.0)],
            seed,
        }
    }

    /// The ring road driven once, counter-clockwise, at 10 m/s.
    pub fn loop_drive(spacing: f64) -> TrajectorySpec {
        TrajectorySpec::circle_loop(LOOP_LENGTH, spacing, 10.0, MOUNT_HEIGHT)
    }
}
