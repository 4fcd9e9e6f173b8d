//! Monte Carlo localization against a pole map.
//!
//! Each particle is a pose hypothesis. Odometry moves the particles through
//! the noisy motion model; pole detections reweight them by a Gaussian in the
//! distance between each detection (placed in the world by the particle's
//! pose) and its nearest map pole. Resampling is low-variance and only runs
//! when the effective sample size drops below a fraction of the particle
//! count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::extractor::{extract_poles, ExtractorParams, PoleDetection};
use crate::geometry::RangeImage;
use crate::kdtree::KdTree2;
use crate::map::PoleMap;
use crate::motion::{MotionNoise, OdometryDelta};
use crate::pose::{normalize_angle, Pose2D};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    pub pose: Pose2D,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationModelParams {
    /// Standard deviation of the match distance, meters.
    pub sigma_d: f64,
    /// Detections farther than this from every map pole are unmatched.
    pub max_match_dist: f64,
    /// Likelihood factor applied per unmatched detection; 1 ignores them.
    pub no_match_penalty: f64,
}

impl ObservationModelParams {
    /// Factor of a match right at the association bound. Using it as the
    /// unmatched penalty keeps the likelihood non-increasing in every
    /// detection's distance, across the bound included; anything larger
    /// rewards particles for matching nothing.
    pub fn boundary_factor(sigma_d: f64, max_match_dist: f64) -> f64 {
        (-max_match_dist * max_match_dist / (2.0 * sigma_d * sigma_d)).exp()
    }
}

impl Default for ObservationModelParams {
    fn default() -> Self {
        Self {
            sigma_d: 0.5,
            max_match_dist: 1.0,
            no_match_penalty: Self::boundary_factor(0.5, 1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MclParams {
    pub particles: usize,
    pub observation: ObservationModelParams,
    pub motion: MotionNoise,
    /// Resample when `ESS / n` falls below this.
    pub resample_threshold: f64,
    /// Fraction of highest-weight particles averaged into the estimate.
    pub top_fraction: f64,
    pub init_radius: f64,
    pub init_yaw_halfwidth: f64,
}

impl Default for MclParams {
    fn default() -> Self {
        Self {
            particles: 1000,
            observation: ObservationModelParams::default(),
            motion: MotionNoise::default(),
            resample_threshold: 0.5,
            top_fraction: 0.1,
            init_radius: 2.5,
            init_yaw_halfwidth: 5f64.to_radians(),
        }
    }
}

impl MclParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("mcl: {m}")));
        let o = &self.observation;
        if self.particles == 0 {
            return bad("particles must be >= 1");
        }
        if !(o.sigma_d > 0.0) || !(o.max_match_dist > 0.0) {
            return bad("sigma_d and max_match_dist must be > 0");
        }
        if !(o.no_match_penalty > 0.0 && o.no_match_penalty <= 1.0) {
            return bad("no_match_penalty must be in (0, 1]");
        }
        if !self.motion.is_valid() {
            return bad("motion noise coefficients must be >= 0");
        }
        if !(self.top_fraction > 0.0 && self.top_fraction <= 1.0) {
            return bad("top_fraction must be in (0, 1]");
        }
        if !(self.init_radius >= 0.0 && self.init_yaw_halfwidth >= 0.0) {
            return bad("initialization spread must be >= 0");
        }
        Ok(())
    }
}

/// Particles uniform on a disk of `pos_radius` around `center` with heading
/// uniform within `yaw_halfwidth` of the center heading.
pub fn init_particles<R: Rng + ?Sized>(
    center: &Pose2D,
    n: usize,
    pos_radius: f64,
    yaw_halfwidth: f64,
    rng: &mut R,
) -> Vec<Particle> {
    let w = 1.0 / n as f64;
    (0..n)
        .map(|_| {
            let r = pos_radius * rng.random::<f64>().sqrt();
            let a = std::f64::consts::TAU * rng.random::<f64>();
            let dyaw = yaw_halfwidth * (2.0 * rng.random::<f64>() - 1.0);
            Particle {
                pose: Pose2D::new(center.x + r * a.cos(), center.y + r * a.sin(), center.theta + dyaw),
                weight: w,
            }
        })
        .collect()
}

/// Moves every particle by an independently perturbed copy of `delta`.
pub fn motion_update<R: Rng + ?Sized>(
    particles: &mut [Particle],
    delta: &OdometryDelta,
    noise: &MotionNoise,
    rng: &mut R,
) {
    for p in particles {
        p.pose = p.pose.compose_odometry(&noise.sample(delta, rng));
    }
}

/// Unnormalized likelihood of sensor-frame detections seen from `pose`.
pub fn observation_likelihood(
    dets: &[PoleDetection],
    map: &KdTree2,
    pose: &Pose2D,
    params: &ObservationModelParams,
) -> f64 {
    let inv_two_var = 1.0 / (2.0 * params.sigma_d * params.sigma_d);
    let mut l = 1.0;
    for d in dets {
        let (wx, wy) = pose.transform_point(d.x, d.y);
        match map.nearest_within([wx, wy], params.max_match_dist) {
            Some((_, dist)) => l *= (-dist * dist * inv_two_var).exp(),
            None => l *= params.no_match_penalty,
        }
    }
    l
}

/// Outcome of a weight update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct WeightUpdate {
    /// All particles received zero likelihood; weights were reset to uniform.
    pub starved: bool,
}

/// Multiplies weights by per-particle likelihoods and renormalizes.
pub fn apply_likelihoods(particles: &mut [Particle], likelihoods: &[f64]) -> WeightUpdate {
    let mut total = 0.0;
    for (p, l) in particles.iter_mut().zip(likelihoods) {
        p.weight *= l;
        total += p.weight;
    }
    if !(total > 0.0) || !total.is_finite() {
        let w = 1.0 / particles.len() as f64;
        particles.iter_mut().for_each(|p| p.weight = w);
        return WeightUpdate { starved: true };
    }
    particles.iter_mut().for_each(|p| p.weight /= total);
    WeightUpdate { starved: false }
}

pub fn weight_update(
    particles: &mut [Particle],
    dets: &[PoleDetection],
    map: &KdTree2,
    params: &ObservationModelParams,
) -> WeightUpdate {
    let likelihoods: Vec<f64> = particles
        .par_iter()
        .map(|p| observation_likelihood(dets, map, &p.pose, params))
        .collect();
    apply_likelihoods(particles, &likelihoods)
}

/// Effective sample size `1 / Σw²` as a fraction of the particle count.
pub fn effective_particle_fraction(particles: &[Particle]) -> f64 {
    let sq: f64 = particles.iter().map(|p| p.weight * p.weight).sum();
    (1.0 / sq) / particles.len() as f64
}

/// Low-variance (systematic) resampling; output weights are uniform.
pub fn resample<R: Rng + ?Sized>(particles: &[Particle], rng: &mut R) -> Vec<Particle> {
    let n = particles.len();
    if n == 0 {
        return Vec::new();
    }
    let step = 1.0 / n as f64;
    let mut target = rng.random::<f64>() * step;
    let mut cumulative = particles[0].weight;
    let mut i = 0;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        while target > cumulative && i + 1 < n {
            i += 1;
            cumulative += particles[i].weight;
        }
        out.push(Particle {
            pose: particles[i].pose,
            weight: step,
        });
        target += step;
    }
    out
}

/// Weighted mean of the `⌈top_fraction·n⌉` highest-weight particles, with a
/// circular mean for the heading.
pub fn pose_estimate(particles: &[Particle], top_fraction: f64) -> Pose2D {
    let n = particles.len();
    let k = ((top_fraction * n as f64 - 1e-9).ceil() as usize).clamp(1, n.max(1));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| particles[b].weight.total_cmp(&particles[a].weight).then(a.cmp(&b)));
    let top = &order[..k.min(n)];
    // A single particle is its own mean; skip the rounding of sin/cos.
    if let [i] = top {
        return particles[*i].pose;
    }
    let mut wsum: f64 = top.iter().map(|&i| particles[i].weight).sum();
    let uniform = !(wsum > 0.0);
    if uniform {
        wsum = top.len() as f64;
    }
    let (mut x, mut y, mut s, mut c) = (0.0, 0.0, 0.0, 0.0);
    for &i in top {
        let p = &particles[i];
        let w = if uniform { 1.0 } else { p.weight } / wsum;
        x += w * p.pose.x;
        y += w * p.pose.y;
        s += w * p.pose.theta.sin();
        c += w * p.pose.theta.cos();
    }
    Pose2D::new(x, y, normalize_angle(s.atan2(c)))
}

/// Per-step output of the filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutput {
    pub pose: Pose2D,
    /// Effective sample fraction after the weight update.
    pub ess_fraction: f64,
    pub resampled: bool,
    pub starved: bool,
    pub detections: usize,
}

/// Particle filter bound to one map. All randomness comes from a single
/// seeded generator, so identical inputs replay bit for bit.
#[derive(Debug, Clone)]
pub struct Localizer {
    pub params: MclParams,
    pub extractor: ExtractorParams,
    map: KdTree2,
    particles: Vec<Particle>,
    rng: ChaCha8Rng,
}

impl Localizer {
    pub fn new(
        map: &PoleMap,
        params: MclParams,
        extractor: ExtractorParams,
        initial: &Pose2D,
        seed: u64,
    ) -> Result<Self> {
        params.validate()?;
        if map.is_empty() {
            return Err(Error::EmptyInput("pole map has no poles"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let particles = init_particles(
            initial,
            params.particles,
            params.init_radius,
            params.init_yaw_halfwidth,
            &mut rng,
        );
        Ok(Self {
            params,
            extractor,
            map: map.index(),
            particles,
            rng,
        })
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn set_particles(&mut self, particles: Vec<Particle>) {
        self.particles = particles;
    }

    pub fn map_index(&self) -> &KdTree2 {
        &self.map
    }

    /// Full step: motion, pole extraction, reweighting, estimate, resampling.
    pub fn step(&mut self, odometry: &OdometryDelta, scan: &RangeImage) -> StepOutput {
        let dets = extract_poles(scan, &self.extractor);
        self.step_detections(odometry, &dets)
    }

    /// Step with detections that were extracted elsewhere.
    pub fn step_detections(&mut self, odometry: &OdometryDelta, dets: &[PoleDetection]) -> StepOutput {
        motion_update(&mut self.particles, odometry, &self.params.motion, &mut self.rng);
        let update = weight_update(&mut self.particles, dets, &self.map, &self.params.observation);
        let ess_fraction = effective_particle_fraction(&self.particles);
        let pose = pose_estimate(&self.particles, self.params.top_fraction);
        let resampled = ess_fraction < self.params.resample_threshold;
        if resampled {
            self.particles = resample(&self.particles, &mut self.rng);
        }
        StepOutput {
            pose,
            ess_fraction,
            resampled,
            starved: update.starved,
            detections: dets.len(),
        }
    }

    pub fn estimate(&self) -> Pose2D {
        pose_estimate(&self.particles, self.params.top_fraction)
    }
}
