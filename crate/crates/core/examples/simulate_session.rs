//! Simulates a lap of the ring road and writes it as a session directory
//! that the `poleloc` binary can read.
//!
//!     cargo run --release --example simulate_session -- /tmp/lap

use poleloc::geometry::SensorConfig;
use poleloc::io::SessionDir;
use poleloc::motion::MotionNoise;
use poleloc::sim::{generate_session, scenarios};
use rayon::prelude::*;
use std::path::PathBuf;

fn main() -> poleloc::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "lap".into()));
    let world = scenarios::loop_world(7);
    let session = generate_session(&world, &scenarios::loop_drive(2.0), &SensorConfig::os1_64(), &MotionNoise::default(), 0.02, 11)?;

    SessionDir::create(&out, &session.truth, &session.odometry, Some(&world.truth_poles()))?;
    (0..session.len())
        .into_par_iter()
        .try_for_each(|i| SessionDir::write_scan(&out, i, &session.scan(i)))?;

    let dir = SessionDir::open(&out)?;
    let first = dir.scan(0)?;
    println!("{} scans in {}, first has {} points", dir.len(), out.display(), first.points.len());
    Ok(())
}
