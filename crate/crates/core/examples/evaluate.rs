//! Matching and trajectory metrics on hand-made data.

use poleloc::eval::{match_points, match_scan, prf1, trajectory_errors};
use poleloc::pose::{Pose2D, TimedPose};

fn main() -> poleloc::Result<()> {
    let truth = [[0.0, 0.0], [5.0, 0.0], [10.0, 0.0], [40.0, 0.0]];
    let detected = [[0.1, 0.0], [5.0, 0.3], [20.0, 0.0]];
    let r = match_points(&detected, &truth, 1.0);
    let (p, rec, f) = prf1(&r);
    println!("all poles:     tp {} fp {} fn {}  p {p:.3} r {rec:.3} f1 {f:.3}", r.true_positives, r.false_positives, r.false_negatives);
    let r = match_scan(&detected, &truth, 1.0, 30.0);
    let (p, rec, f) = prf1(&r);
    println!("within 30 m:   tp {} fp {} fn {}  p {p:.3} r {rec:.3} f1 {f:.3}", r.true_positives, r.false_positives, r.false_negatives);

    let truth: Vec<TimedPose> = (0..=10).map(|i| TimedPose::new(i as f64, Pose2D::new(i as f64, 0.0, 0.0))).collect();
    // Estimates at half-second offsets are compared with interpolated truth.
    let estimate: Vec<TimedPose> = (0..10)
        .map(|i| TimedPose::new(i as f64 + 0.5, Pose2D::new(i as f64 + 0.5, 0.2, 0.01)))
        .collect();
    print!("{}", trajectory_errors(&estimate, &truth)?.to_kv());
    Ok(())
}
