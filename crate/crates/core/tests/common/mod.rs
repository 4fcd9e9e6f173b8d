//! Checks shared by the oracle, invariant and acceptance targets. Each
//! returns a one-line summary on success and a description of the first
//! violation on failure.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};
use std::f64::consts::{PI, TAU};

use poleloc::circle::fit_circle;
use poleloc::extractor::{cluster_range_image, ExtractorParams, Frame, PoleDetection};
use poleloc::geometry::{project_scan, Point3, RangeImage, SensorConfig};
use poleloc::kdtree::KdTree2;
use poleloc::map::{MapPole, PoleMap};
use poleloc::mcl::{
    apply_likelihoods, observation_likelihood, pose_estimate, resample, Localizer, MclParams, ObservationModelParams,
    Particle,
};
use poleloc::motion::{MotionNoise, OdometryDelta};
use poleloc::pose::{angle_diff, Pose2D};
use poleloc::sim::{cast_ray, DynamicCylinder, PathPoint, StaticPole, Surface, Wall, WorldSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<String, String>;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

// ---------------------------------------------------------------- oracles

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

fn brute_nearest(pts: &[[f64; 2]], q: [f64; 2], max: f64) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, p) in pts.iter().enumerate() {
        let d2 = dist2(*p, q);
        if d2 <= max * max && best.is_none_or(|b| d2 < b.1) {
            best = Some((i, d2));
        }
    }
    best.map(|(i, d2)| (i, d2.sqrt()))
}

/// Tree queries against linear scans over random instances, including
/// duplicated points.
pub fn kdtree_matches_brute_force(instances: usize) -> Check {
    let mut r = rng(1);
    let mut queries = 0;
    for inst in 0..instances {
        let n = r.random_range(0..60);
        let mut pts: Vec<[f64; 2]> = (0..n).map(|_| [r.random_range(-50.0..50.0), r.random_range(-50.0..50.0)]).collect();
        if n > 2 && inst % 5 == 0 {
            pts[n - 1] = pts[0];
        }
        let tree = KdTree2::build(pts.clone());
        for _ in 0..20 {
            let q = [r.random_range(-60.0..60.0), r.random_range(-60.0..60.0)];
            let max = r.random_range(0.0..15.0);
            queries += 1;
            let got = tree.nearest(q);
            let want = brute_nearest(&pts, q, f64::INFINITY);
            ensure(got == want, || format!("instance {inst}: nearest {got:?} vs {want:?}"))?;
            let got = tree.nearest_within(q, max);
            let want = brute_nearest(&pts, q, max);
            ensure(got == want, || format!("instance {inst}: nearest_within {got:?} vs {want:?}"))?;
            let got = tree.within_radius(q, max);
            let want: Vec<usize> = (0..n).filter(|&i| dist2(pts[i], q) <= max * max).collect();
            ensure(got == want, || format!("instance {inst}: within_radius {got:?} vs {want:?}"))?;
        }
    }
    Ok(format!("{instances} instances, {queries} queries identical"))
}

/// Noise-free arcs are recovered to 1e-6 and three points give the
/// circumcircle.
pub fn circle_fit_oracles(cases: usize) -> Check {
    let mut r = rng(2);
    let mut worst: f64 = 0.0;
    for k in 0..cases {
        let (cx, cy) = (r.random_range(-50.0..50.0), r.random_range(-50.0..50.0));
        let rad = r.random_range(0.05..5.0);
        let start = r.random_range(0.0..TAU);
        let span = r.random_range(0.5..TAU);
        let n = r.random_range(3..40);
        let pts: Vec<[f64; 2]> = (0..n)
            .map(|i| {
                let a = start + span * i as f64 / (n - 1) as f64;
                [cx + rad * a.cos(), cy + rad * a.sin()]
            })
            .collect();
        let c = fit_circle(&pts).map_err(|e| format!("case {k}: {e}"))?;
        let err = (c.x - cx).abs().max((c.y - cy).abs()).max((c.radius - rad).abs());
        worst = worst.max(err);
        ensure(err <= 1e-6, || format!("case {k}: error {err:e}"))?;
    }
    for k in 0..cases {
        let p: Vec<[f64; 2]> = (0..3).map(|_| [r.random_range(-10.0..10.0), r.random_range(-10.0..10.0)]).collect();
        let (a, b, c) = (p[0], p[1], p[2]);
        let d = 2.0 * (a[0] * (b[1] - c[1]) + b[0] * (c[1] - a[1]) + c[0] * (a[1] - b[1]));
        if d.abs() < 1.0 {
            continue;
        }
        let sq = |q: [f64; 2]| q[0] * q[0] + q[1] * q[1];
        let ux = (sq(a) * (b[1] - c[1]) + sq(b) * (c[1] - a[1]) + sq(c) * (a[1] - b[1])) / d;
        let uy = (sq(a) * (c[0] - b[0]) + sq(b) * (a[0] - c[0]) + sq(c) * (b[0] - a[0])) / d;
        let fit = fit_circle(&p).map_err(|e| format!("triple {k}: {e}"))?;
        let err = (fit.x - ux).abs().max((fit.y - uy).abs()).max((fit.radius - dist(a, [ux, uy])).abs());
        ensure(err <= 1e-6, || format!("triple {k}: circumcircle error {err:e}"))?;
    }
    Ok(format!("{cases} arcs and {cases} triples, worst arc error {worst:.1e}"))
}

fn det(x: f64, y: f64) -> PoleDetection {
    PoleDetection {
        x,
        y,
        radius: 0.1,
        support: 10,
        frame: Frame::Sensor,
    }
}

/// The filter's likelihood against a product over nearest poles found by
/// exhaustive search.
pub fn likelihood_matches_exhaustive(scenes: usize) -> Check {
    let mut r = rng(3);
    for s in 0..scenes {
        let poles: Vec<[f64; 2]> = (0..r.random_range(1..8))
            .map(|_| [r.random_range(-10.0..10.0), r.random_range(-10.0..10.0)])
            .collect();
        let dets: Vec<PoleDetection> = (0..r.random_range(0..6))
            .map(|_| det(r.random_range(-12.0..12.0), r.random_range(-12.0..12.0)))
            .collect();
        let pose = Pose2D::new(r.random_range(-2.0..2.0), r.random_range(-2.0..2.0), r.random_range(-PI..PI));
        let params = ObservationModelParams {
            sigma_d: r.random_range(0.2..2.0),
            max_match_dist: r.random_range(0.5..4.0),
            no_match_penalty: r.random_range(0.01..1.0),
        };
        let mut want = 1.0;
        for d in &dets {
            let (wx, wy) = pose.transform_point(d.x, d.y);
            let best = poles.iter().map(|p| dist(*p, [wx, wy])).fold(f64::INFINITY, f64::min);
            want *= if best <= params.max_match_dist {
                (-best * best / (2.0 * params.sigma_d * params.sigma_d)).exp()
            } else {
                params.no_match_penalty
            };
        }
        let got = observation_likelihood(&dets, &KdTree2::build(poles.clone()), &pose, &params);
        ensure((got - want).abs() <= 1e-12 * want.max(1e-300), || format!("scene {s}: {got:e} vs {want:e}"))?;
    }
    Ok(format!("{scenes} scenes agree to 1e-12 relative"))
}

/// Weights stay normalized through long chains of random updates,
/// including all-zero likelihoods.
pub fn weights_stay_normalized(updates: usize) -> Check {
    let mut r = rng(4);
    let n = 200;
    let mut particles: Vec<Particle> = (0..n)
        .map(|_| Particle {
            pose: Pose2D::default(),
            weight: 1.0 / n as f64,
        })
        .collect();
    let mut worst: f64 = 0.0;
    let mut starved = 0;
    for k in 0..updates {
        let l: Vec<f64> = (0..n)
            .map(|_| match k % 7 {
                0 => 0.0,
                1 => r.random_range(0.0..1.0) * 1e-200,
                _ if r.random_bool(0.3) => 0.0,
                _ => r.random_range(0.0..1.0f64).powi(5),
            })
            .collect();
        if apply_likelihoods(&mut particles, &l).starved {
            starved += 1;
        }
        let sum: f64 = particles.iter().map(|p| p.weight).sum();
        worst = worst.max((sum - 1.0).abs());
        ensure((sum - 1.0).abs() < 1e-12, || format!("update {k}: sum {sum}"))?;
        ensure(particles.iter().all(|p| p.weight >= 0.0 && p.weight.is_finite()), || format!("update {k}: bad weight"))?;
        if k % 50 == 0 {
            particles = resample(&particles, &mut r);
        }
    }
    Ok(format!("{updates} updates ({starved} starved), max |sum-1| {worst:.1e}"))
}

fn surface_residual(world: &WorldSpec, t: f64, p: [f64; 3], s: Surface) -> f64 {
    let side = |c: (f64, f64), r: f64| ((p[0] - c.0).hypot(p[1] - c.1) - r).abs();
    match s {
        Surface::Ground => p[2].abs(),
        Surface::PoleSide(i) => side((world.poles[i].x, world.poles[i].y), world.poles[i].radius),
        Surface::PoleTop(i) => (p[2] - world.poles[i].height).abs(),
        Surface::DynamicSide(i) => side(world.dynamic[i].position(t), world.dynamic[i].radius),
        Surface::DynamicTop(i) => (p[2] - world.dynamic[i].height).abs(),
        Surface::Wall(i) => {
            let w = &world.walls[i];
            let (ex, ey) = (w.x1 - w.x0, w.y1 - w.y0);
            ((p[0] - w.x0) * ey - (p[1] - w.y0) * ex).abs() / ex.hypot(ey)
        }
    }
}

pub fn random_world<R: Rng>(r: &mut R) -> WorldSpec {
    let poles = (0..r.random_range(0..6))
        .map(|i| StaticPole {
            x: r.random_range(-20.0..20.0) + i as f64 * 1e-3,
            y: r.random_range(-20.0..20.0),
            radius: r.random_range(0.05..0.5),
            height: r.random_range(1.0..6.0),
        })
        .collect();
    let walls = (0..r.random_range(0..3))
        .map(|_| Wall {
            x0: r.random_range(-25.0..25.0),
            y0: r.random_range(-25.0..25.0),
            x1: r.random_range(-25.0..25.0),
            y1: r.random_range(-25.0..25.0),
            height: r.random_range(1.0..5.0),
        })
        .collect();
    let dynamic = (0..r.random_range(0..2))
        .map(|_| DynamicCylinder {
            radius: 0.3,
            height: 1.8,
            path: vec![
                PathPoint {
                    t: 0.0,
                    x: r.random_range(-10.0..10.0),
                    y: r.random_range(-10.0..10.0),
                },
                PathPoint {
                    t: 10.0,
                    x: r.random_range(-10.0..10.0),
                    y: r.random_range(-10.0..10.0),
                },
            ],
        })
        .collect();
    WorldSpec {
        poles,
        walls,
        dynamic,
        seed: 0,
    }
}

/// Substituting every hit back into its surface equation.
pub fn raycast_back_substitution(rays: usize) -> Check {
    let mut r = rng(5);
    let mut hits = 0;
    let mut worst: f64 = 0.0;
    let mut world = random_world(&mut r);
    for k in 0..rays {
        if k % 200 == 0 {
            world = random_world(&mut r);
        }
        let t = r.random_range(0.0..10.0);
        let origin = [r.random_range(-5.0..5.0), r.random_range(-5.0..5.0), r.random_range(0.5..3.0)];
        let az = r.random_range(-PI..PI);
        let el = r.random_range(-0.6..0.3f64);
        let dir = [el.cos() * az.cos(), el.cos() * az.sin(), el.sin()];
        let Some(hit) = cast_ray(&world, t, origin, dir) else {
            continue;
        };
        hits += 1;
        let p = [0, 1, 2].map(|i| origin[i] + hit.range * dir[i]);
        let res = surface_residual(&world, t, p, hit.surface);
        worst = worst.max(res);
        ensure(res < 1e-9, || format!("ray {k}: {:?} residual {res:e}", hit.surface))?;
    }
    Ok(format!("{hits} hits, worst residual {worst:.1e}"))
}

/// Sample variances of the perturbed increment against the model's
/// closed-form variances.
pub fn motion_variance_matches_model(samples: usize) -> Check {
    let mut r = rng(6);
    let noise = MotionNoise::default();
    for d in [
        OdometryDelta::new(0.3, 1.0, -0.2),
        OdometryDelta::new(0.0, 2.0, 0.0),
        OdometryDelta::new(1.0, 0.0, 0.5),
    ] {
        let want = noise.variances(&d);
        let mut acc = [0.0; 3];
        for _ in 0..samples {
            let s = noise.sample(&d, &mut r);
            acc[0] += (s.rot1 - d.rot1).powi(2);
            acc[1] += (s.trans - d.trans).powi(2);
            acc[2] += (s.rot2 - d.rot2).powi(2);
        }
        for i in 0..3 {
            let got = acc[i] / samples as f64;
            ensure((got - want[i]).abs() <= 0.05 * want[i].max(1e-300) || want[i] == 0.0 && got == 0.0, || {
                format!("{d:?} component {i}: variance {got} vs {}", want[i])
            })?;
        }
    }
    Ok(format!("3 increments x {samples} samples within 5%"))
}

/// Accumulated drift over a straight drive against closed forms: with only
/// translation noise the along-track variance is `k·α3·s²`; with only
/// translation-induced turn noise the heading variance is `2k·α2·s²`.
pub fn odometry_drift_covariance(runs: usize) -> Check {
    let (steps, s) = (10, 1.0);
    let d = OdometryDelta::new(0.0, s, 0.0);
    let run = |noise: MotionNoise, seed: u64| -> Vec<Pose2D> {
        let mut r = rng(seed);
        (0..runs)
            .map(|_| (0..steps).fold(Pose2D::default(), |p, _| p.compose_odometry(&noise.sample(&d, &mut r))))
            .collect()
    };
    let var = |v: &[f64], mean: f64| v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64;

    let a3 = 0.05;
    let ends = run(MotionNoise { alpha: [0.0, 0.0, a3, 0.0] }, 7);
    let xs: Vec<f64> = ends.iter().map(|p| p.x).collect();
    let got = var(&xs, steps as f64 * s);
    let want = steps as f64 * a3 * s * s;
    ensure((got / want - 1.0).abs() <= 0.10, || format!("along-track variance {got} vs {want}"))?;

    let a2 = 0.01;
    let ends = run(MotionNoise { alpha: [0.0, a2, 0.0, 0.0] }, 8);
    let th: Vec<f64> = ends.iter().map(|p| p.theta).collect();
    let got_th = var(&th, 0.0);
    let want_th = 2.0 * steps as f64 * a2 * s * s;
    ensure((got_th / want_th - 1.0).abs() <= 0.10, || format!("heading variance {got_th} vs {want_th}"))?;
    Ok(format!(
        "{runs} runs: along-track {:.3}x, heading {:.3}x of closed form",
        got / want,
        got_th / want_th
    ))
}

// ------------------------------------------------------------- invariants

fn random_points<R: Rng>(r: &mut R, cfg: &SensorConfig, n: usize) -> Vec<Point3> {
    (0..n)
        .map(|_| {
            let az = r.random_range(-PI..PI);
            let el = r.random_range(-cfg.fov_down..cfg.fov_up);
            let range = r.random_range(cfg.min_range..cfg.max_range);
            Point3::new(range * el.cos() * az.cos(), range * el.cos() * az.sin(), range * el.sin())
        })
        .collect()
}

fn image_points(img: &RangeImage) -> Vec<Point3> {
    let mut out = Vec::new();
    for v in 0..img.height() {
        for u in 0..img.width() {
            if img.is_valid(u, v) {
                out.push(img.point(u, v));
            }
        }
    }
    out
}

/// Re-projecting the points kept in an image reproduces the image, and
/// turning the scene by whole columns shifts the image by as many columns.
pub fn projection_invariants(trials: usize) -> Check {
    let mut r = rng(9);
    let cfg = SensorConfig::os1_64();
    let w = cfg.width;
    for k in 0..trials {
        let pts = random_points(&mut r, &cfg, 3000);
        let img = project_scan(&pts, &cfg);
        let again = project_scan(&image_points(&img), &cfg);
        ensure(again == img, || format!("trial {k}: re-projection differs"))?;

        // Pixel-center rays keep the rotated points away from column edges.
        let shift = r.random_range(1..w);
        let mut centered = Vec::new();
        let mut rotated = Vec::new();
        for _ in 0..2000 {
            let (u, v) = (r.random_range(0..w), r.random_range(0..cfg.height));
            let (az, el) = cfg.pixel_ray(u, v);
            let range = r.random_range(1.0..50.0);
            let at = |a: f64| Point3::new(range * el.cos() * a.cos(), range * el.cos() * a.sin(), range * el.sin());
            centered.push(at(az));
            rotated.push(at(az + shift as f64 * cfg.column_angle()));
        }
        let a = project_scan(&centered, &cfg);
        let b = project_scan(&rotated, &cfg);
        for v in 0..cfg.height {
            for u in 0..w {
                // Counter-clockwise turns move returns toward lower columns.
                let ub = (u + w - shift) % w;
                let (ra, rb) = (a.range(u, v), b.range(ub, v));
                let same = match (ra, rb) {
                    (None, None) => true,
                    (Some(x), Some(y)) => (x - y).abs() < 1e-9,
                    _ => false,
                };
                ensure(same, || format!("trial {k}: shift {shift} pixel ({u},{v}) {ra:?} vs {rb:?}"))?;
            }
        }
    }
    Ok(format!("{trials} scans: idempotent, column shifts exact"))
}

/// Random blocky range image with ground pixels, holes and range ties.
pub fn random_image<R: Rng>(r: &mut R, w: usize, h: usize) -> RangeImage {
    let mut img = RangeImage::empty(w, h);
    let levels = [2.0, 2.3, 2.6, 5.0, 5.4, 9.0];
    for v in 0..h {
        for u in 0..w {
            if r.random_bool(0.15) {
                continue;
            }
            let range = levels[r.random_range(0..levels.len())] + r.random_range(0.0..0.1);
            let z = if r.random_bool(0.1) { -1.5 } else { r.random_range(-0.9..2.0) };
            img.insert_closest(u, v, Point3::new(range, 0.0, z), range);
        }
    }
    img
}

type Partition = BTreeSet<Vec<(usize, usize)>>;

fn partition(img: &RangeImage, params: &ExtractorParams) -> Partition {
    cluster_range_image(img, params)
        .into_iter()
        .map(|c| {
            let mut p = c.pixels;
            p.sort();
            p
        })
        .collect()
}

fn eligible(img: &RangeImage, u: usize, v: usize, p: &ExtractorParams) -> bool {
    img.is_valid(u, v) && img.point(u, v).z > p.ground_z_cutoff
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Connected components by union-find over every undirected edge.
fn union_find_partition(img: &RangeImage, p: &ExtractorParams) -> Partition {
    let (w, h) = (img.width(), img.height());
    let mut parent: Vec<usize> = (0..w * h).collect();
    let edge_ok = |a: (usize, usize), b: (usize, usize)| {
        eligible(img, a.0, a.1, p)
            && eligible(img, b.0, b.1, p)
            && (img.range(a.0, a.1).unwrap() - img.range(b.0, b.1).unwrap()).abs() < p.range_gap
    };
    for v in 0..h {
        for u in 0..w {
            let mut nb = vec![((u + 1) % w, v)];
            if v + 1 < h {
                nb.push((u, v + 1));
            }
            for (nu, nv) in nb {
                if edge_ok((u, v), (nu, nv)) {
                    let (a, b) = (find(&mut parent, v * w + u), find(&mut parent, nv * w + nu));
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: HashMap<usize, Vec<(usize, usize)>> = HashMap::new();
    for v in 0..h {
        for u in 0..w {
            if eligible(img, u, v, p) {
                let root = find(&mut parent, v * w + u);
                groups.entry(root).or_default().push((u, v));
            }
        }
    }
    groups
        .into_values()
        .filter(|g| g.len() >= p.min_cluster_pixels)
        .map(|mut g| {
            g.sort();
            g
        })
        .collect()
}

fn shifted(img: &RangeImage, s: usize) -> RangeImage {
    let w = img.width();
    let mut out = RangeImage::empty(w, img.height());
    for v in 0..img.height() {
        for u in 0..w {
            if let Some(r) = img.range(u, v) {
                out.insert_closest((u + s) % w, v, img.point(u, v), r);
            }
        }
    }
    out
}

/// Clusters partition the eligible pixels into exactly the connected
/// components, whatever pixel the traversal starts from.
pub fn cluster_invariants(trials: usize) -> Check {
    let mut r = rng(10);
    let params = ExtractorParams {
        min_cluster_pixels: 1,
        ..ExtractorParams::default()
    };
    let mut clusters = 0;
    for k in 0..trials {
        let (w, h) = (r.random_range(3..40), r.random_range(1..12));
        let img = random_image(&mut r, w, h);
        let got = partition(&img, &params);
        clusters += got.len();

        let covered: usize = got.iter().map(Vec::len).sum();
        let distinct: BTreeSet<_> = got.iter().flatten().collect();
        let eligible_count = (0..h).flat_map(|v| (0..w).map(move |u| (u, v))).filter(|&(u, v)| eligible(&img, u, v, &params)).count();
        ensure(covered == distinct.len() && covered == eligible_count, || {
            format!("trial {k}: {covered} memberships, {} distinct, {eligible_count} eligible", distinct.len())
        })?;
        ensure(got == union_find_partition(&img, &params), || format!("trial {k}: differs from union-find"))?;

        let s = r.random_range(1..w);
        let back: Partition = partition(&shifted(&img, s), &params)
            .into_iter()
            .map(|c| {
                let mut c: Vec<_> = c.into_iter().map(|(u, v)| ((u + w - s) % w, v)).collect();
                c.sort();
                c
            })
            .collect();
        ensure(back == got, || format!("trial {k}: partition depends on traversal start (shift {s})"))?;
    }
    Ok(format!("{trials} images, {clusters} clusters, partition = components"))
}

/// A larger range gap only merges clusters, never splits them.
pub fn gap_monotonicity(trials: usize) -> Check {
    let mut r = rng(11);
    for k in 0..trials {
        let (w, h) = (r.random_range(3..40), r.random_range(1..12));
        let img = random_image(&mut r, w, h);
        let small = ExtractorParams {
            min_cluster_pixels: 1,
            range_gap: r.random_range(0.05..0.6),
            ..ExtractorParams::default()
        };
        let large = ExtractorParams {
            range_gap: small.range_gap + r.random_range(0.0..3.0),
            ..small
        };
        let coarse = partition(&img, &large);
        for c in partition(&img, &small) {
            ensure(coarse.iter().any(|big| c.iter().all(|p| big.binary_search(p).is_ok())), || {
                format!("trial {k}: cluster split at larger gap")
            })?;
        }
    }
    Ok(format!("{trials} images nested"))
}

/// Systematic resampling copies each particle `n·w` times up to one.
pub fn resample_copy_counts(trials: usize) -> Check {
    let mut r = rng(12);
    for k in 0..trials {
        let n = r.random_range(1..300);
        let raw: Vec<f64> = (0..n).map(|_| if r.random_bool(0.3) { 0.0 } else { r.random_range(0.0..1.0f64).powi(3) }).collect();
        let total: f64 = raw.iter().sum();
        if total == 0.0 {
            continue;
        }
        let particles: Vec<Particle> = raw
            .iter()
            .enumerate()
            .map(|(i, w)| Particle {
                pose: Pose2D::new(i as f64, 0.0, 0.0),
                weight: w / total,
            })
            .collect();
        let out = resample(&particles, &mut r);
        ensure(out.len() == n, || format!("trial {k}: {} particles out", out.len()))?;
        let mut counts = vec![0usize; n];
        for p in &out {
            counts[p.pose.x as usize] += 1;
        }
        for (i, p) in particles.iter().enumerate() {
            let expect = p.weight * n as f64;
            ensure((counts[i] as f64 - expect).abs() < 1.0 + 1e-9, || {
                format!("trial {k}: particle {i} copied {} times, expected {expect:.3}", counts[i])
            })?;
            ensure(p.weight > 0.0 || counts[i] == 0, || format!("trial {k}: zero-weight particle {i} copied"))?;
        }
    }
    Ok(format!("{trials} resamplings within one copy"))
}

/// Headings straddling ±π average to π, not 0.
pub fn circular_mean_wraps() -> Check {
    let particles: Vec<Particle> = [PI - 0.02, -PI + 0.02, PI - 0.01, -PI + 0.01]
        .iter()
        .map(|&t| Particle {
            pose: Pose2D::new(1.0, 2.0, t),
            weight: 0.25,
        })
        .collect();
    let est = pose_estimate(&particles, 1.0);
    let err = angle_diff(est.theta, PI).abs();
    ensure(err < 1e-12, || format!("estimate heading {} is {err:e} from pi", est.theta))?;
    Ok(format!("heading {:.12}", est.theta))
}

/// One particle, no noise, no detections: the filter replays odometry
/// exactly.
pub fn single_particle_replay() -> Check {
    let mut r = rng(13);
    let map = PoleMap::new(vec![MapPole::new(100.0, 100.0, 0.2, 5)]);
    let start = Pose2D::new(3.0, -2.0, 0.7);
    let params = MclParams {
        particles: 1,
        motion: MotionNoise::ZERO,
        init_radius: 0.0,
        init_yaw_halfwidth: 0.0,
        ..MclParams::default()
    };
    let mut loc = Localizer::new(&map, params, ExtractorParams::default(), &start, 99).map_err(|e| e.to_string())?;
    ensure(loc.estimate() == start, || format!("initial estimate {:?}", loc.estimate()))?;
    let mut chain = start;
    let mut truth = start;
    let mut worst: f64 = 0.0;
    for k in 0..500 {
        let next = truth.compose(&Pose2D::new(r.random_range(0.0..2.0), r.random_range(-0.3..0.3), r.random_range(-0.3..0.3)));
        let d = OdometryDelta::between(&truth, &next);
        truth = next;
        chain = chain.compose_odometry(&d);
        let out = loc.step_detections(&d, &[]);
        ensure(out.pose == chain, || format!("step {k}: {:?} vs {:?}", out.pose, chain))?;
        worst = worst.max(out.pose.distance(&truth)).max(angle_diff(out.pose.theta, truth.theta).abs());
    }
    ensure(worst < 1e-9, || format!("drift from composed truth {worst:e}"))?;
    Ok(format!("500 steps bit-identical to odometry, {worst:.1e} from truth"))
}
