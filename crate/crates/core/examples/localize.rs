//! Localizes a noisy-odometry drive against a map built from an earlier
//! drive and reports the trajectory error.

use poleloc::eval::trajectory_errors;
use poleloc::extractor::ExtractorParams;
use poleloc::geometry::{project_scan, SensorConfig};
use poleloc::mapping::{MapBuilder, MapParams};
use poleloc::mcl::{Localizer, MclParams};
use poleloc::motion::MotionNoise;
use poleloc::pose::TimedPose;
use poleloc::sim::{generate_session, scenarios};

fn main() -> poleloc::Result<()> {
    let cfg = SensorConfig::os1_64();
    let world = scenarios::loop_world(7);

    let mapping = generate_session(&world, &scenarios::loop_drive(1.0), &cfg, &MotionNoise::ZERO, 0.02, 1000)?;
    let mut builder = MapBuilder::new(MapParams::default(), ExtractorParams::default());
    builder.add_session(&mapping.truth, |i| Ok(project_scan(&mapping.scan(i), &cfg)))?;
    let map = builder.finish();

    let drive = generate_session(&world, &scenarios::loop_drive(0.5), &cfg, &MotionNoise::default(), 0.02, 100)?;
    let mut loc = Localizer::new(&map, MclParams::default(), ExtractorParams::default(), &drive.truth[0].pose, 0)?;
    let mut estimate = vec![TimedPose::new(drive.truth[0].t, loc.estimate())];
    for i in 1..drive.len() {
        let out = loc.step(&drive.odometry[i - 1], &project_scan(&drive.scan(i), &cfg));
        estimate.push(TimedPose::new(drive.truth[i].t, out.pose));
        if i % 60 == 0 {
            let err = out.pose.distance(&drive.truth[i].pose);
            println!("scan {i:3}: {} poles seen, ess {:.2}, error {err:.3} m", out.detections, out.ess_fraction);
        }
    }
    let e = trajectory_errors(&estimate, &drive.truth)?;
    println!("rmse {:.3} m / {:.2} deg over {} scans", e.rmse_pos, e.rmse_ang, e.samples);
    Ok(())
}
