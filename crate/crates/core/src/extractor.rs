//! Pole extraction on range images.
//!
//! The pipeline clusters above-ground pixels by range continuity, keeps tall
//! clusters that stand in front of their background, gates them on height,
//! fits a circle to their horizontal footprint and finally rejects candidates
//! that touch other structures.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::circle::{fit_circle, Circle};
use crate::error::{Error, Result};
use crate::geometry::{Point3, RangeImage};
use crate::pose::Pose2D;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractorParams {
    /// Maximum range difference between neighboring pixels of one cluster.
    pub range_gap: f64,
    /// Clusters with fewer pixels are discarded.
    pub min_cluster_pixels: usize,
    /// Required fraction of member pixels closer than the background.
    pub smaller_range_fraction: f64,
    /// Required vertical extent `max z - min z`.
    pub min_z_extent: f64,
    /// The highest point must be above this z (sensor frame).
    pub min_top_z: f64,
    /// The lowest point must be below this z (sensor frame).
    pub max_bottom_z: f64,
    pub min_radius: f64,
    pub max_radius: f64,
    /// Occupied pixels around the pole, as a fraction of cluster size.
    pub free_space_fraction: f64,
    /// Pixels at or below this z (sensor frame) are treated as ground.
    pub ground_z_cutoff: f64,
    /// Width of the ring outside the fitted radius that must be free.
    pub free_space_margin: f64,
    /// Clusters spanning fewer columns are too thin for a least-squares fit
    /// and get their circle from the angular footprint instead.
    pub min_fit_columns: usize,
}

impl Default for ExtractorParams {
    fn default() -> Self {
        Self {
            range_gap: 0.5,
            min_cluster_pixels: 4,
            smaller_range_fraction: 0.5,
            min_z_extent: 1.0,
            min_top_z: 1.0,
            max_bottom_z: 1.5,
            min_radius: 0.02,
            max_radius: 0.4,
            free_space_fraction: 0.3,
            ground_z_cutoff: -1.0,
            free_space_margin: 0.2,
            min_fit_columns: 3,
        }
    }
}

impl ExtractorParams {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("extractor: {msg}")))
            }
        };
        check(self.range_gap > 0.0, "range_gap must be > 0")?;
        check(self.min_cluster_pixels >= 1, "min_cluster_pixels must be >= 1")?;
        check(
            (0.0..=1.0).contains(&self.smaller_range_fraction),
            "smaller_range_fraction must be in [0, 1]",
        )?;
        check(self.min_z_extent > 0.0, "min_z_extent must be > 0")?;
        check(self.min_radius < self.max_radius, "min_radius must be < max_radius")?;
        check(
            (0.0..=1.0).contains(&self.free_space_fraction),
            "free_space_fraction must be in [0, 1]",
        )?;
        check(self.free_space_margin >= 0.0, "free_space_margin must be >= 0")?;
        check(self.min_fit_columns >= 1, "min_fit_columns must be >= 1")
    }
}

/// Connected set of range-image pixels.
///
/// Columns wrap around the panorama seam, so `u_max` may exceed the image
/// width; the column of an unwrapped index `u` is `u % width`.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelCluster {
    pub pixels: Vec<(usize, usize)>,
    pub ranges: Vec<f64>,
    pub points: Vec<Point3>,
    pub u_min: usize,
    pub u_max: usize,
    pub v_min: usize,
    pub v_max: usize,
}

impl PixelCluster {
    fn from_pixels(img: &RangeImage, mut pixels: Vec<(usize, usize)>) -> Self {
        pixels.sort_unstable_by_key(|&(u, v)| (v, u));
        let ranges = pixels.iter().map(|&(u, v)| img.range(u, v).unwrap_or(-1.0)).collect();
        let points = pixels.iter().map(|&(u, v)| img.point(u, v)).collect();
        let v_min = pixels.iter().map(|p| p.1).min().unwrap_or(0);
        let v_max = pixels.iter().map(|p| p.1).max().unwrap_or(0);
        let (u_min, u_max) = column_arc(img.width(), pixels.iter().map(|p| p.0));
        Self {
            pixels,
            ranges,
            points,
            u_min,
            u_max,
            v_min,
            v_max,
        }
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    /// Number of columns spanned, counting gaps.
    pub fn width(&self) -> usize {
        self.u_max - self.u_min + 1
    }

    pub fn height(&self) -> usize {
        self.v_max - self.v_min + 1
    }

    pub fn z_bounds(&self) -> (f64, f64) {
        self.points
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.z), hi.max(p.z)))
    }
}

/// Smallest circular arc of columns covering all occupied columns, returned as
/// unwrapped `(start, end)` with `end` possibly >= `width`.
fn column_arc(width: usize, cols: impl Iterator<Item = usize>) -> (usize, usize) {
    let mut occupied = vec![false; width];
    for u in cols {
        occupied[u] = true;
    }
    let used: Vec<usize> = (0..width).filter(|&u| occupied[u]).collect();
    if used.is_empty() {
        return (0, 0);
    }
    // The largest circular gap between consecutive occupied columns is the
    // part of the panorama the cluster does not cover.
    let mut best_gap = 0;
    let mut start = used[0];
    for (i, &u) in used.iter().enumerate() {
        let next = used[(i + 1) % used.len()];
        let gap = (next + width - u) % width;
        let gap = if gap == 0 { width } else { gap };
        if gap > best_gap {
            best_gap = gap;
            start = next;
        }
    }
    let span = width - best_gap;
    (start, start + span)
}

/// A pole as a circle in the ground plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoleDetection {
    pub x: f64,
    pub y: f64,
    pub radius: f64,
    /// Number of range-image pixels supporting the detection.
    pub support: usize,
    pub frame: Frame,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    Sensor,
    World,
}

impl PoleDetection {
    /// Maps a sensor-frame detection into the world frame through `pose`.
    pub fn to_world(&self, pose: &Pose2D) -> PoleDetection {
        let (x, y) = pose.transform_point(self.x, self.y);
        PoleDetection {
            x,
            y,
            frame: Frame::World,
            ..*self
        }
    }
}

fn eligible(img: &RangeImage, u: usize, v: usize, params: &ExtractorParams) -> bool {
    img.range(u, v).is_some() && img.point(u, v).z > params.ground_z_cutoff
}

/// Horizontal neighbors wrap around the seam; vertical edges are undirected,
/// so a pixel reaches both the pixel below it and the one it lies below.
fn neighbors(img: &RangeImage, u: usize, v: usize) -> impl Iterator<Item = (usize, usize)> {
    let w = img.width();
    let h = img.height();
    let left = (w > 1).then(|| (img.wrap_u(u, -1), v));
    let right = (w > 2).then(|| (img.wrap_u(u, 1), v));
    let below = (v + 1 < h).then(|| (u, v + 1));
    let above = (v > 0).then(|| (u, v - 1));
    [left, right, below, above].into_iter().flatten()
}

/// Groups eligible pixels into range-continuous 4-connected components and
/// discards components smaller than `min_cluster_pixels`.
///
/// Seeds are visited top to bottom, left to right and grown breadth first.
pub fn cluster_range_image(img: &RangeImage, params: &ExtractorParams) -> Vec<PixelCluster> {
    let (w, h) = (img.width(), img.height());
    let mut visited = vec![false; w * h];
    let mut clusters = Vec::new();
    let mut frontier = VecDeque::new();
    for v in 0..h {
        for u in 0..w {
            if visited[v * w + u] || !eligible(img, u, v, params) {
                continue;
            }
            visited[v * w + u] = true;
            frontier.push_back((u, v));
            let mut members = Vec::new();
            while let Some((pu, pv)) = frontier.pop_front() {
                members.push((pu, pv));
                let r = img.range(pu, pv).unwrap_or(-1.0);
                for (nu, nv) in neighbors(img, pu, pv) {
                    let k = nv * w + nu;
                    if visited[k] || !eligible(img, nu, nv, params) {
                        continue;
                    }
                    let nr = img.range(nu, nv).unwrap_or(-1.0);
                    if (nr - r).abs() < params.range_gap {
                        visited[k] = true;
                        frontier.push_back((nu, nv));
                    }
                }
            }
            if members.len() >= params.min_cluster_pixels {
                clusters.push(PixelCluster::from_pixels(img, members));
            }
        }
    }
    clusters
}

fn membership(img: &RangeImage, cluster: &PixelCluster) -> Vec<bool> {
    let mut m = vec![false; img.width() * img.height()];
    for &(u, v) in &cluster.pixels {
        m[v * img.width() + u] = true;
    }
    m
}

/// Counts member pixels that are closer than the background on both sides.
///
/// For each member pixel the comparison partner on either side is the first
/// non-member pixel of the same row, so interior pixels of wide poles are
/// judged against the background just outside the pole. Empty pixels count as
/// background farther away.
pub fn count_smaller_range(img: &RangeImage, cluster: &PixelCluster) -> usize {
    let w = img.width();
    let member = membership(img, cluster);
    let is_member = |u: usize, v: usize| member[v * w + u];
    let outside = |u: usize, v: usize, step: isize| -> Option<(usize, usize)> {
        let mut cu = u;
        for _ in 0..w {
            cu = img.wrap_u(cu, step);
            if !is_member(cu, v) {
                return Some((cu, v));
            }
        }
        None
    };
    let farther = |q: Option<(usize, usize)>, r: f64| match q {
        None => true,
        Some((qu, qv)) => img.range(qu, qv).is_none_or(|qr| qr > r),
    };
    cluster
        .pixels
        .iter()
        .zip(&cluster.ranges)
        .filter(|(&(u, v), &r)| farther(outside(u, v, -1), r) && farther(outside(u, v, 1), r))
        .count()
}

/// Keeps clusters that are at least as tall as wide and mostly in front of
/// their background.
pub fn filter_clusters(
    clusters: Vec<PixelCluster>,
    img: &RangeImage,
    params: &ExtractorParams,
) -> Vec<PixelCluster> {
    clusters
        .into_iter()
        .filter(|c| passes_shape_filters(c, img, params))
        .collect()
}

fn passes_shape_filters(c: &PixelCluster, img: &RangeImage, params: &ExtractorParams) -> bool {
    if c.height() < c.width() {
        return false;
    }
    let small = count_smaller_range(img, c) as f64;
    small >= params.smaller_range_fraction * c.len() as f64
}

fn passes_z_gate(c: &PixelCluster, params: &ExtractorParams) -> bool {
    let (lo, hi) = c.z_bounds();
    hi > params.min_top_z && lo < params.max_bottom_z && hi - lo > params.min_z_extent
}

/// Circle estimate for a cluster. Wide clusters get a least-squares fit; thin
/// ones, whose points collapse onto one or two bearings, are modeled from the
/// angular footprint: the front surface distance plus the radius implied by
/// the covered columns.
pub fn estimate_circle(
    c: &PixelCluster,
    column_angle: f64,
    params: &ExtractorParams,
) -> Result<Circle> {
    if c.width() >= params.min_fit_columns {
        let xy: Vec<[f64; 2]> = c.points.iter().map(|p| [p.x, p.y]).collect();
        return fit_circle(&xy);
    }
    footprint_circle(c, column_angle)
}

fn footprint_circle(c: &PixelCluster, column_angle: f64) -> Result<Circle> {
    if c.is_empty() {
        return Err(Error::FitFailure("empty cluster"));
    }
    let (mut sx, mut sy) = (0.0, 0.0);
    let mut front = f64::INFINITY;
    for p in &c.points {
        let rho = p.x.hypot(p.y);
        if rho > 0.0 {
            sx += p.x / rho;
            sy += p.y / rho;
            front = front.min(rho);
        }
    }
    if !front.is_finite() || (sx == 0.0 && sy == 0.0) {
        return Err(Error::FitFailure("no horizontal extent"));
    }
    let bearing = sy.atan2(sx);
    let s = (0.5 * c.width() as f64 * column_angle).sin();
    if s >= 1.0 {
        return Err(Error::FitFailure("footprint too wide"));
    }
    let radius = front * s / (1.0 - s);
    let dist = front + radius;
    Ok(Circle {
        x: dist * bearing.cos(),
        y: dist * bearing.sin(),
        radius,
    })
}

/// Counts occupied non-member pixels within `radius + margin` of the circle
/// center, looking only at the rows the cluster spans.
pub fn count_free_space_violations(
    img: &RangeImage,
    c: &PixelCluster,
    circle: &Circle,
    params: &ExtractorParams,
) -> usize {
    let w = img.width();
    let member = membership(img, c);
    let outer = circle.radius + params.free_space_margin;
    let dist = circle.x.hypot(circle.y);
    // Columns whose rays can pass through the outer disk, plus one of slack.
    let half_cols = if dist <= outer {
        w / 2
    } else {
        let half_angle = (outer / dist).asin();
        (half_angle / (2.0 * std::f64::consts::PI / w as f64)).ceil() as usize + 1
    };
    let span = (c.width() + 2 * half_cols).min(w);
    let first = c.u_min as isize - half_cols as isize;
    let mut count = 0;
    for k in 0..span {
        let u = img.wrap_u(0, first + k as isize);
        for v in c.v_min..=c.v_max {
            if member[v * w + u] || !eligible(img, u, v, params) {
                continue;
            }
            let p = img.point(u, v);
            if (p.x - circle.x).hypot(p.y - circle.y) <= outer {
                count += 1;
            }
        }
    }
    count
}

/// Runs the full extraction pipeline and returns sensor-frame detections.
pub fn extract_poles(img: &RangeImage, params: &ExtractorParams) -> Vec<PoleDetection> {
    let column_angle = 2.0 * std::f64::consts::PI / img.width() as f64;
    let clusters = filter_clusters(cluster_range_image(img, params), img, params);
    clusters
        .iter()
        .filter(|c| passes_z_gate(c, params))
        .filter_map(|c| {
            let circle = estimate_circle(c, column_angle, params).ok()?;
            if circle.radius < params.min_radius || circle.radius > params.max_radius {
                return None;
            }
            let occupied = count_free_space_violations(img, c, &circle, params) as f64;
            if occupied >= params.free_space_fraction * c.len() as f64 {
                return None;
            }
            Some(PoleDetection {
                x: circle.x,
                y: circle.y,
                radius: circle.radius,
                support: c.len(),
                frame: Frame::Sensor,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Image with explicit per-pixel ranges; points are placed straight ahead
    /// of the sensor at a height that keeps them above the ground cutoff.
    fn image(w: usize, h: usize, cells: &[(usize, usize, f64)]) -> RangeImage {
        let mut img = RangeImage::empty(w, h);
        for &(u, v, r) in cells {
            let z = 2.0 - v as f64 * 0.5;
            img.insert_closest(u, v, Point3::new(r, 0.0, z), r);
        }
        img
    }

    fn params() -> ExtractorParams {
        ExtractorParams {
            min_cluster_pixels: 3,
            ..ExtractorParams::default()
        }
    }

    #[test]
    fn empty_image_has_no_clusters() {
        let img = RangeImage::empty(16, 8);
        assert!(cluster_range_image(&img, &params()).is_empty());
        assert!(extract_poles(&img, &params()).is_empty());
    }

    #[test]
    fn vertical_run_is_one_cluster() {
        let cells: Vec<_> = (0..5).map(|v| (4, v, 10.0)).collect();
        let img = image(16, 8, &cells);
        let c = cluster_range_image(&img, &params());
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].len(), 5);
        assert_eq!((c[0].width(), c[0].height()), (1, 5));
    }

    #[test]
    fn range_jump_splits_runs() {
        let mut cells: Vec<_> = (0..5).map(|v| (4, v, 10.0)).collect();
        cells.extend((0..5).map(|v| (5, v, 11.0)));
        let img = image(16, 8, &cells);
        let c = cluster_range_image(&img, &params());
        assert_eq!(c.len(), 2);

        let mut short = cells.clone();
        short.truncate(5);
        short.extend((0..2).map(|v| (5, v, 11.0)));
        let img = image(16, 8, &short);
        assert_eq!(cluster_range_image(&img, &params()).len(), 1);
    }

    #[test]
    fn clusters_wrap_the_seam() {
        let mut cells: Vec<_> = (0..4).map(|v| (0, v, 10.0)).collect();
        cells.extend((0..4).map(|v| (15, v, 10.2)));
        let img = image(16, 8, &cells);
        let c = cluster_range_image(&img, &params());
        assert_eq!(c.len(), 1);
        assert_eq!((c[0].u_min, c[0].u_max), (15, 16));
        assert_eq!(c[0].width(), 2);
    }

    #[test]
    fn ground_pixels_are_ignored() {
        let mut img = RangeImage::empty(8, 8);
        for v in 0..6 {
            img.insert_closest(2, v, Point3::new(5.0, 0.0, -1.5), 5.0);
        }
        assert!(cluster_range_image(&img, &params()).is_empty());
    }

    #[test]
    fn wide_flat_cluster_fails_aspect_ratio() {
        let cells: Vec<_> = (3..6)
            .flat_map(|u| (0..2).map(move |v| (u, v, 10.0)))
            .collect();
        let img = image(16, 8, &cells);
        let c = cluster_range_image(&img, &params());
        assert_eq!(c.len(), 1);
        assert!(filter_clusters(c, &img, &params()).is_empty());
    }

    #[test]
    fn isolated_pole_passes_background_test() {
        let cells: Vec<_> = (0..6).map(|v| (7, v, 10.0)).collect();
        let img = image(16, 8, &cells);
        let p = ExtractorParams {
            smaller_range_fraction: 0.6,
            ..params()
        };
        let c = cluster_range_image(&img, &p);
        assert_eq!(count_smaller_range(&img, &c[0]), 6);
        assert_eq!(filter_clusters(c, &img, &p).len(), 1);
    }

    #[test]
    fn background_closer_on_one_side_rejects() {
        // Pole column at 10 m, left neighbor column at 8 m (closer, separate
        // cluster), right neighbor empty.
        let mut cells: Vec<_> = (0..6).map(|v| (7, v, 10.0)).collect();
        cells.extend((0..6).map(|v| (6, v, 8.0)));
        let img = image(16, 8, &cells);
        let c = cluster_range_image(&img, &params());
        let pole = c.iter().find(|c| c.u_min == 7).unwrap();
        assert_eq!(count_smaller_range(&img, pole), 0);
    }

    #[test]
    fn wide_pole_interior_counts_against_row_background() {
        // Five columns of pole in front of a wall 5 m behind.
        let mut cells: Vec<_> = (5..10)
            .flat_map(|u| (0..8).map(move |v| (u, v, 10.0)))
            .collect();
        for v in 0..8 {
            cells.push((4, v, 15.0));
            cells.push((10, v, 15.0));
        }
        let img = image(16, 8, &cells);
        let c = cluster_range_image(&img, &params());
        let pole = c.iter().find(|c| c.u_min == 5).unwrap();
        assert_eq!(count_smaller_range(&img, pole), pole.len());
    }

    #[test]
    fn z_gate() {
        let p = params();
        let mk = |lo: f64, hi: f64| PixelCluster {
            pixels: vec![(0, 0), (0, 1)],
            ranges: vec![5.0, 5.0],
            points: vec![Point3::new(5.0, 0.0, hi), Point3::new(5.0, 0.0, lo)],
            u_min: 0,
            u_max: 0,
            v_min: 0,
            v_max: 1,
        };
        assert!(passes_z_gate(&mk(-0.9, 1.2), &p));
        // Too short.
        assert!(!passes_z_gate(&mk(0.5, 1.2), &p));
        // Top too low.
        assert!(!passes_z_gate(&mk(-0.9, 0.9), &p));
        // Bottom too high.
        assert!(!passes_z_gate(&mk(1.6, 3.0), &p));
    }

    #[test]
    fn column_arc_handles_wrap() {
        assert_eq!(column_arc(10, [3, 4, 5].into_iter()), (3, 5));
        assert_eq!(column_arc(10, [9, 0, 1].into_iter()), (9, 11));
        assert_eq!(column_arc(10, [7].into_iter()), (7, 7));
    }

    #[test]
    fn footprint_circle_of_thin_cluster() {
        let colw = 2.0 * std::f64::consts::PI / 1024.0;
        let c = PixelCluster {
            pixels: vec![(10, 0), (10, 1)],
            ranges: vec![20.0, 20.0],
            points: vec![Point3::new(0.0, 20.0, 1.0), Point3::new(0.0, 20.0, 0.0)],
            u_min: 10,
            u_max: 10,
            v_min: 0,
            v_max: 1,
        };
        let circle = footprint_circle(&c, colw).unwrap();
        let s = (0.5 * colw).sin();
        let r = 20.0 * s / (1.0 - s);
        assert!(circle.x.abs() < 1e-12);
        assert!((circle.y - (20.0 + r)).abs() < 1e-12);
        assert!((circle.radius - r).abs() < 1e-12);
    }
}
