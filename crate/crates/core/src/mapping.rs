//! Global pole map construction from posed scans.
//!
//! The trajectory is cut into equal-length segments and only the middle scan
//! of each segment is processed. Detections from all segments are merged by
//! proximity, and a pole survives only if it was seen in enough consecutive
//! segments that could have observed it, which removes moving objects.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extractor::{extract_poles, ExtractorParams, PoleDetection};
use crate::geometry::RangeImage;
use crate::kdtree::KdTree2;
use crate::map::{MapPole, PoleMap};
use crate::pose::{Pose2D, TimedPose};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapParams {
    pub segment_length: f64,
    pub merge_radius: f64,
    pub min_count: u32,
    /// Segments whose middle pose is within this distance of a pole are the
    /// ones expected to observe it.
    pub observe_range: f64,
    /// Scans of later sessions are used only this far from visited poses.
    pub unseen_min_dist: f64,
}

impl Default for MapParams {
    fn default() -> Self {
        Self {
            segment_length: 20.0,
            merge_radius: 1.0,
            min_count: 3,
            observe_range: 80.0,
            unseen_min_dist: 10.0,
        }
    }
}

impl MapParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("map: {m}")));
        if !(self.segment_length > 0.0) {
            return bad("segment_length must be > 0");
        }
        if !(self.merge_radius > 0.0) {
            return bad("merge_radius must be > 0");
        }
        if self.min_count < 1 {
            return bad("min_count must be >= 1");
        }
        if !(self.observe_range > 0.0) {
            return bad("observe_range must be > 0");
        }
        if !(self.unseen_min_dist >= 0.0) {
            return bad("unseen_min_dist must be >= 0");
        }
        Ok(())
    }
}

/// A contiguous run of scans `start..end` with its designated middle scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
    pub middle: usize,
}

/// Cumulative path length at every pose.
pub fn arc_lengths(poses: &[TimedPose]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(poses.len());
    for (i, p) in poses.iter().enumerate() {
        if i > 0 {
            acc += p.pose.distance(&poses[i - 1].pose);
        }
        out.push(acc);
    }
    out
}

/// Splits a trajectory into segments of `segment_length` meters of path.
///
/// Segment `k` holds the scans with arc length in `[k·L, (k+1)·L)`; the final
/// segment also takes the scan that ends exactly on its boundary and may be
/// shorter than `L`. The middle scan is the member whose arc length is
/// closest to the midpoint of the segment's nominal span.
pub fn split_trajectory(poses: &[TimedPose], segment_length: f64) -> Result<Vec<Segment>> {
    if poses.is_empty() {
        return Err(Error::EmptyInput("trajectory has no scans"));
    }
    if !(segment_length > 0.0) {
        return Err(Error::InvalidConfig("segment_length must be > 0".into()));
    }
    let arc = arc_lengths(poses);
    let total = arc[arc.len() - 1];
    let n_seg = ((total / segment_length).ceil() as usize).max(1);
    let seg_of = |s: f64| ((s / segment_length).floor() as usize).min(n_seg - 1);

    let mut segments = Vec::new();
    let mut start = 0;
    while start < poses.len() {
        let k = seg_of(arc[start]);
        let mut end = start + 1;
        while end < poses.len() && seg_of(arc[end]) == k {
            end += 1;
        }
        let lo = k as f64 * segment_length;
        let hi = ((k + 1) as f64 * segment_length).min(total);
        let mid = 0.5 * (lo + hi);
        let middle = (start..end)
            .min_by(|&a, &b| (arc[a] - mid).abs().total_cmp(&(arc[b] - mid).abs()))
            .unwrap_or(start);
        segments.push(Segment { start, end, middle });
        start = end;
    }
    Ok(segments)
}

/// Maps sensor-frame detections into the world frame.
pub fn detections_to_world(dets: &[PoleDetection], pose: &Pose2D) -> Vec<PoleDetection> {
    dets.iter().map(|d| d.to_world(pose)).collect()
}

/// World-frame detections from one segment's middle scan.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentObservation {
    pub segment: usize,
    pub pose: Pose2D,
    pub detections: Vec<PoleDetection>,
}

/// A pole aggregated from detections in several segments.
#[derive(Debug, Clone, PartialEq)]
pub struct MergedPole {
    pub sum_x: f64,
    pub sum_y: f64,
    pub sum_radius: f64,
    /// Number of merged detections.
    pub detections: u32,
    /// Distinct segments that contributed, ascending.
    pub segments: Vec<usize>,
}

impl MergedPole {
    fn new(d: &PoleDetection, segment: usize) -> Self {
        Self {
            sum_x: d.x,
            sum_y: d.y,
            sum_radius: d.radius,
            detections: 1,
            segments: vec![segment],
        }
    }

    pub fn x(&self) -> f64 {
        self.sum_x / self.detections as f64
    }

    pub fn y(&self) -> f64 {
        self.sum_y / self.detections as f64
    }

    pub fn radius(&self) -> f64 {
        self.sum_radius / self.detections as f64
    }

    /// Observation count: each segment counts once.
    pub fn count(&self) -> u32 {
        self.segments.len() as u32
    }

    fn absorb(&mut self, d: &PoleDetection, segment: usize) {
        self.sum_x += d.x;
        self.sum_y += d.y;
        self.sum_radius += d.radius;
        self.detections += 1;
        if let Err(pos) = self.segments.binary_search(&segment) {
            self.segments.insert(pos, segment);
        }
    }
}

/// Greedy agglomeration: each detection joins the nearest existing pole whose
/// running mean center is within `merge_radius`, otherwise starts a new one.
pub fn merge_detections(observations: &[SegmentObservation], merge_radius: f64) -> Vec<MergedPole> {
    let mut merged: Vec<MergedPole> = Vec::new();
    for obs in observations {
        for d in &obs.detections {
            let nearest = merged
                .iter()
                .enumerate()
                .map(|(i, m)| (i, (m.x() - d.x).hypot(m.y() - d.y)))
                .filter(|(_, dist)| *dist <= merge_radius)
                .min_by(|a, b| a.1.total_cmp(&b.1));
            match nearest {
                Some((i, _)) => merged[i].absorb(d, obs.segment),
                None => merged.push(MergedPole::new(d, obs.segment)),
            }
        }
    }
    merged
}

/// Longest run of observed segments among the segments able to see the pole.
fn longest_observed_run(pole: &MergedPole, observations: &[SegmentObservation], range: f64) -> u32 {
    let (px, py) = (pole.x(), pole.y());
    let mut best = 0;
    let mut run = 0;
    for obs in observations {
        let seen = pole.segments.binary_search(&obs.segment).is_ok();
        let visible = (obs.pose.x - px).hypot(obs.pose.y - py) <= range;
        if seen {
            run += 1;
            best = best.max(run);
        } else if visible {
            run = 0;
        }
    }
    best
}

/// Keeps poles seen in at least `min_count` segments, `min_count` of them in
/// an unbroken run over the segments within `observe_range` of the pole.
pub fn filter_by_count(
    merged: &[MergedPole],
    observations: &[SegmentObservation],
    min_count: u32,
    observe_range: f64,
) -> PoleMap {
    let poles = merged
        .iter()
        .filter(|m| m.count() >= min_count)
        .filter(|m| longest_observed_run(m, observations, observe_range) >= min_count)
        .map(|m| MapPole::new(m.x(), m.y(), m.radius(), m.count()))
        .collect();
    PoleMap::new(poles)
}

/// Indices of `candidates` lying at least `min_dist` from every pose in
/// `visited` and from every candidate selected before them.
pub fn select_unseen(visited: &[Pose2D], candidates: &[TimedPose], min_dist: f64) -> Vec<usize> {
    let tree = KdTree2::build(visited.iter().map(|p| [p.x, p.y]).collect());
    let mut picked: Vec<usize> = Vec::new();
    for (i, c) in candidates.iter().enumerate() {
        let q = [c.pose.x, c.pose.y];
        if tree.nearest_within(q, min_dist).is_some_and(|(_, d)| d < min_dist) {
            continue;
        }
        if picked
            .iter()
            .any(|&j| candidates[j].pose.distance(&c.pose) < min_dist)
        {
            continue;
        }
        picked.push(i);
    }
    picked
}

/// End-to-end map construction over one or more sessions.
#[derive(Debug, Clone, Default)]
pub struct MapBuilder {
    pub params: MapParams,
    pub extractor: ExtractorParams,
    observations: Vec<SegmentObservation>,
    visited: Vec<Pose2D>,
}

impl MapBuilder {
    pub fn new(params: MapParams, extractor: ExtractorParams) -> Self {
        Self {
            params,
            extractor,
            observations: Vec::new(),
            visited: Vec::new(),
        }
    }

    pub fn observations(&self) -> &[SegmentObservation] {
        &self.observations
    }

    /// Processes the mapping session: one extraction per segment middle scan.
    /// `scan` produces the range image of scan `i`; calls run in parallel.
    pub fn add_session<F>(&mut self, poses: &[TimedPose], scan: F) -> Result<Vec<Segment>>
    where
        F: Fn(usize) -> Result<RangeImage> + Sync,
    {
        let segments = split_trajectory(poses, self.params.segment_length)?;
        let middles: Vec<usize> = segments.iter().map(|s| s.middle).collect();
        self.observe(poses, &middles, &scan)?;
        self.visited.extend(poses.iter().map(|p| p.pose));
        Ok(segments)
    }

    /// Adds scans of a later session that lie `min_dist` away from every pose
    /// processed so far, each treated as its own segment.
    pub fn add_unseen<F>(&mut self, poses: &[TimedPose], scan: F, min_dist: f64) -> Result<Vec<usize>>
    where
        F: Fn(usize) -> Result<RangeImage> + Sync,
    {
        let picked = select_unseen(&self.visited, poses, min_dist);
        self.observe(poses, &picked, &scan)?;
        self.visited.extend(picked.iter().map(|&i| poses[i].pose));
        Ok(picked)
    }

    fn observe<F>(&mut self, poses: &[TimedPose], scans: &[usize], scan: &F) -> Result<()>
    where
        F: Fn(usize) -> Result<RangeImage> + Sync,
    {
        let first = self.observations.len();
        let extractor = self.extractor;
        let found: Vec<Result<SegmentObservation>> = scans
            .par_iter()
            .enumerate()
            .map(|(k, &i)| {
                let img = scan(i)?;
                let pose = poses[i].pose;
                let dets = extract_poles(&img, &extractor);
                Ok(SegmentObservation {
                    segment: first + k,
                    pose,
                    detections: detections_to_world(&dets, &pose),
                })
            })
            .collect();
        for obs in found {
            self.observations.push(obs?);
        }
        Ok(())
    }

    pub fn finish(&self) -> PoleMap {
        let merged = merge_detections(&self.observations, self.params.merge_radius);
        filter_by_count(
            &merged,
            &self.observations,
            self.params.min_count,
            self.params.observe_range,
        )
        .with_meta("segments", self.observations.len().to_string())
    }
}
