//! Extraction and localization metrics.

use crate::error::{Error, Result};
use crate::kdtree::KdTree2;
use crate::map::PoleMap;
use crate::pose::{angle_diff, normalize_angle, Pose2D, TimedPose};
use crate::textfmt::sig9;

/// One-to-one association between detected and true poles.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MatchReport {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    /// `(detected index, truth index, distance)` in matching order.
    pub matches: Vec<(usize, usize, f64)>,
}

impl MatchReport {
    /// Accumulates counts of another report (micro-averaging).
    pub fn absorb(&mut self, other: &MatchReport) {
        self.true_positives += other.true_positives;
        self.false_positives += other.false_positives;
        self.false_negatives += other.false_negatives;
    }

    pub fn mean_match_distance(&self) -> f64 {
        if self.matches.is_empty() {
            return 0.0;
        }
        self.matches.iter().map(|m| m.2).sum::<f64>() / self.matches.len() as f64
    }

    pub fn to_kv(&self) -> String {
        let (p, r, f) = prf1(self);
        format!(
            "true_positives {}\nfalse_positives {}\nfalse_negatives {}\nprecision {}\nrecall {}\nf1 {}\nmean_match_distance {}\n",
            self.true_positives,
            self.false_positives,
            self.false_negatives,
            sig9(p),
            sig9(r),
            sig9(f),
            sig9(self.mean_match_distance())
        )
    }

    pub const CSV_HEADER: &'static str = "tp,fp,fn,precision,recall,f1,mean_match_distance";

    pub fn csv_row(&self) -> String {
        let (p, r, f) = prf1(self);
        format!(
            "{},{},{},{},{},{},{}",
            self.true_positives,
            self.false_positives,
            self.false_negatives,
            sig9(p),
            sig9(r),
            sig9(f),
            sig9(self.mean_match_distance())
        )
    }
}

/// Greedy one-to-one matching: candidate pairs within `max_dist` are taken in
/// ascending distance order (ties by detected, then truth index) while both
/// ends are still free.
pub fn match_points(detected: &[[f64; 2]], truth: &[[f64; 2]], max_dist: f64) -> MatchReport {
    let tree = KdTree2::build(truth.to_vec());
    let mut pairs = Vec::new();
    for (i, d) in detected.iter().enumerate() {
        for j in tree.within_radius(*d, max_dist) {
            let t = truth[j];
            pairs.push((((d[0] - t[0]).powi(2) + (d[1] - t[1]).powi(2)).sqrt(), i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut det_used = vec![false; detected.len()];
    let mut truth_used = vec![false; truth.len()];
    let mut matches = Vec::new();
    for (dist, i, j) in pairs {
        if !det_used[i] && !truth_used[j] {
            det_used[i] = true;
            truth_used[j] = true;
            matches.push((i, j, dist));
        }
    }
    MatchReport {
        true_positives: matches.len(),
        false_positives: detected.len() - matches.len(),
        false_negatives: truth.len() - matches.len(),
        matches,
    }
}

/// Sensor-frame matching for one scan, scored only within `range` of the
/// sensor: truth poles farther away are neither required (no false
/// negative) nor credited (a detection matched to one is ignored).
/// Detections matching nothing are false positives at any range.
pub fn match_scan(detected: &[[f64; 2]], truth: &[[f64; 2]], max_dist: f64, range: f64) -> MatchReport {
    let all = match_points(detected, truth, max_dist);
    let near = |j: usize| truth[j][0].hypot(truth[j][1]) <= range;
    let matches: Vec<_> = all.matches.iter().copied().filter(|m| near(m.1)).collect();
    let matched_truth: Vec<usize> = all.matches.iter().map(|m| m.1).collect();
    MatchReport {
        true_positives: matches.len(),
        false_positives: all.false_positives,
        false_negatives: (0..truth.len()).filter(|&j| near(j) && !matched_truth.contains(&j)).count(),
        matches,
    }
}

pub fn match_poles(detected: &PoleMap, truth: &PoleMap, max_dist: f64) -> MatchReport {
    match_points(&detected.centers(), &truth.centers(), max_dist)
}

/// Precision, recall and F1; each is 0 when its denominator vanishes.
pub fn prf1(r: &MatchReport) -> (f64, f64, f64) {
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let tp = r.true_positives;
    let p = ratio(tp, tp + r.false_positives);
    let rec = ratio(tp, tp + r.false_negatives);
    let f = if p + rec > 0.0 { 2.0 * p * rec / (p + rec) } else { 0.0 };
    (p, rec, f)
}

/// Mean absolute and RMS errors; angles in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrajectoryErrors {
    pub mean_pos: f64,
    pub rmse_pos: f64,
    pub mean_ang: f64,
    pub rmse_ang: f64,
    pub samples: usize,
}

impl TrajectoryErrors {
    pub fn from_samples(samples: &[PoseError]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::NoTemporalOverlap);
        }
        let n = samples.len() as f64;
        let mean = |f: &dyn Fn(&PoseError) -> f64| samples.iter().map(f).sum::<f64>() / n;
        Ok(Self {
            mean_pos: mean(&|e| e.pos),
            rmse_pos: mean(&|e| e.pos * e.pos).sqrt(),
            mean_ang: mean(&|e| e.ang_deg),
            rmse_ang: mean(&|e| e.ang_deg * e.ang_deg).sqrt(),
            samples: samples.len(),
        })
    }

    pub fn to_kv(&self) -> String {
        format!(
            "samples {}\nmean_pos_m {}\nrmse_pos_m {}\nmean_ang_deg {}\nrmse_ang_deg {}\n",
            self.samples,
            sig9(self.mean_pos),
            sig9(self.rmse_pos),
            sig9(self.mean_ang),
            sig9(self.rmse_ang)
        )
    }

    pub const CSV_HEADER: &'static str = "samples,mean_pos_m,rmse_pos_m,mean_ang_deg,rmse_ang_deg";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.samples,
            sig9(self.mean_pos),
            sig9(self.rmse_pos),
            sig9(self.mean_ang),
            sig9(self.rmse_ang)
        )
    }
}

/// Error of one estimate against interpolated truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseError {
    pub t: f64,
    pub pos: f64,
    pub ang_deg: f64,
}

/// Truth at time `t`, linear in position and along the shorter arc in
/// heading. `None` outside the truth time span. `truth` must be sorted.
pub fn interpolate_pose(truth: &[TimedPose], t: f64) -> Option<Pose2D> {
    let first = truth.first()?;
    let last = truth.last()?;
    if t < first.t || t > last.t {
        return None;
    }
    let k = truth.partition_point(|p| p.t <= t);
    if k == 0 {
        return Some(first.pose);
    }
    let a = &truth[k - 1];
    if a.t == t || k == truth.len() {
        return Some(a.pose);
    }
    let b = &truth[k];
    let s = (t - a.t) / (b.t - a.t);
    let dtheta = normalize_angle(b.pose.theta - a.pose.theta);
    Some(Pose2D::new(
        a.pose.x + s * (b.pose.x - a.pose.x),
        a.pose.y + s * (b.pose.y - a.pose.y),
        a.pose.theta + s * dtheta,
    ))
}

/// Per-sample errors for every estimate inside the truth time span.
pub fn pose_errors(estimate: &[TimedPose], truth: &[TimedPose]) -> Vec<PoseError> {
    estimate
        .iter()
        .filter_map(|e| {
            let g = interpolate_pose(truth, e.t)?;
            Some(PoseError {
                t: e.t,
                pos: e.pose.distance(&g),
                ang_deg: angle_diff(e.pose.theta, g.theta).to_degrees(),
            })
        })
        .collect()
}

pub fn trajectory_errors(estimate: &[TimedPose], truth: &[TimedPose]) -> Result<TrajectoryErrors> {
    TrajectoryErrors::from_samples(&pose_errors(estimate, truth))
}
