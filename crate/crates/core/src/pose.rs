use std::f64::consts::PI;

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    // rem_euclid can return exactly 2*pi for tiny negative inputs.
    if r <= -PI {
        r += 2.0 * PI;
    }
    r
}

/// Smallest absolute difference between two angles, in `[0, pi]`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    normalize_angle(a - b).abs()
}

/// Planar robot pose in the world frame. Heading is kept in `(-pi, pi]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: normalize_angle(theta),
        }
    }

    /// Maps a point from this pose's local frame into the parent frame.
    #[inline]
    pub fn transform_point(&self, px: f64, py: f64) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        (self.x + c * px - s * py, self.y + s * px + c * py)
    }

    /// Maps a parent-frame point into this pose's local frame.
    #[inline]
    pub fn inverse_transform_point(&self, wx: f64, wy: f64) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        let dx = wx - self.x;
        let dy = wy - self.y;
        (c * dx + s * dy, -s * dx + c * dy)
    }

    /// `self ⊕ delta`: applies a motion expressed in this pose's frame.
    pub fn compose(&self, delta: &Pose2D) -> Pose2D {
        let (x, y) = self.transform_point(delta.x, delta.y);
        Pose2D::new(x, y, self.theta + delta.theta)
    }

    /// `self ⊖ from`: the motion that takes `from` to `self`, in `from`'s frame.
    pub fn relative_to(&self, from: &Pose2D) -> Pose2D {
        let (x, y) = from.inverse_transform_point(self.x, self.y);
        Pose2D::new(x, y, self.theta - from.theta)
    }

    pub fn distance(&self, other: &Pose2D) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// A pose with a timestamp in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TimedPose {
    pub t: f64,
    pub pose: Pose2D,
}

impl TimedPose {
    pub fn new(t: f64, pose: Pose2D) -> Self {
        Self { t, pose }
    }
}
