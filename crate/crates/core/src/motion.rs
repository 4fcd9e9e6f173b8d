//! Odometry motion model: rotate, translate, rotate.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::pose::{normalize_angle, Pose2D};

/// Relative motion between two poses, decomposed into an initial turn, a
/// straight translation and a final turn.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OdometryDelta {
    pub rot1: f64,
    pub trans: f64,
    pub rot2: f64,
}

impl OdometryDelta {
    pub fn new(rot1: f64, trans: f64, rot2: f64) -> Self {
        Self { rot1, trans, rot2 }
    }

    /// Decomposition of the motion from `from` to `to`.
    pub fn between(from: &Pose2D, to: &Pose2D) -> Self {
        let dx = to.x - from.x;
        let dy = to.y - from.y;
        let trans = dx.hypot(dy);
        let rot1 = if trans < 1e-12 {
            0.0
        } else {
            normalize_angle(dy.atan2(dx) - from.theta)
        };
        let rot2 = normalize_angle(to.theta - from.theta - rot1);
        Self { rot1, trans, rot2 }
    }

    /// Equivalent relative transform expressed in the starting frame.
    pub fn from_relative(rel: &Pose2D) -> Self {
        Self::between(&Pose2D::default(), rel)
    }

    pub fn as_relative(&self) -> Pose2D {
        Pose2D::default().compose_odometry(self)
    }

    pub fn is_finite(&self) -> bool {
        self.rot1.is_finite() && self.trans.is_finite() && self.rot2.is_finite()
    }
}

impl Pose2D {
    /// Applies an odometry increment to this pose.
    pub fn compose_odometry(&self, d: &OdometryDelta) -> Pose2D {
        let heading = self.theta + d.rot1;
        Pose2D::new(
            self.x + d.trans * heading.cos(),
            self.y + d.trans * heading.sin(),
            heading + d.rot2,
        )
    }
}

/// Noise coefficients of the odometry model.
///
/// `alpha[0]`: turn noise from turning, `alpha[1]`: turn noise from
/// translating, `alpha[2]`: translation noise from translating, `alpha[3]`:
/// translation noise from turning. Each enters as a variance contribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionNoise {
    pub alpha: [f64; 4],
}

impl Default for MotionNoise {
    fn default() -> Self {
        Self {
            alpha: [0.1, 0.1, 0.05, 0.05],
        }
    }
}

impl MotionNoise {
    pub const ZERO: MotionNoise = MotionNoise { alpha: [0.0; 4] };

    pub fn is_valid(&self) -> bool {
        self.alpha.iter().all(|a| a.is_finite() && *a >= 0.0)
    }

    /// Variances of `(rot1, trans, rot2)` for a given increment.
    pub fn variances(&self, d: &OdometryDelta) -> [f64; 3] {
        let [a1, a2, a3, a4] = self.alpha;
        let (r1, t, r2) = (d.rot1 * d.rot1, d.trans * d.trans, d.rot2 * d.rot2);
        [a1 * r1 + a2 * t, a3 * t + a4 * (r1 + r2), a1 * r2 + a2 * t]
    }

    /// Draws a perturbed copy of `d`.
    pub fn sample<R: Rng + ?Sized>(&self, d: &OdometryDelta, rng: &mut R) -> OdometryDelta {
        let [v1, vt, v2] = self.variances(d);
        let mut draw = |var: f64| {
            if var > 0.0 {
                let z: f64 = StandardNormal.sample(rng);
                z * var.sqrt()
            } else {
                0.0
            }
        };
        OdometryDelta {
            rot1: d.rot1 + draw(v1),
            trans: d.trans + draw(vt),
            rot2: d.rot2 + draw(v2),
        }
    }
}
