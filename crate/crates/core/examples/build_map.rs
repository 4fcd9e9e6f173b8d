//! Builds a pole map from two simulated drives and scores it against the
//! world's true poles.

use poleloc::eval::{match_poles, prf1};
use poleloc::extractor::ExtractorParams;
use poleloc::geometry::{project_scan, SensorConfig};
use poleloc::mapping::{MapBuilder, MapParams};
use poleloc::motion::MotionNoise;
use poleloc::sim::{generate_session, scenarios};

fn main() -> poleloc::Result<()> {
    let cfg = SensorConfig::os1_64();
    let world = scenarios::loop_world(7);
    let params = MapParams::default();
    let mut builder = MapBuilder::new(params, ExtractorParams::default());

    let first = generate_session(&world, &scenarios::loop_drive(2.0), &cfg, &MotionNoise::ZERO, 0.02, 1)?;
    let segments = builder.add_session(&first.truth, |i| Ok(project_scan(&first.scan(i), &cfg)))?;
    println!("first drive: {} segments", segments.len());

    // A second lap only contributes places the first one never came near.
    let second = generate_session(&world, &scenarios::loop_drive(2.0), &cfg, &MotionNoise::ZERO, 0.02, 2)?;
    let added = builder.add_unseen(&second.truth, |i| Ok(project_scan(&second.scan(i), &cfg)), params.unseen_min_dist)?;
    println!("second drive: {} unseen scans added", added.len());

    let map = builder.finish();
    let report = match_poles(&map, &world.truth_poles(), 1.0);
    let (p, r, f) = prf1(&report);
    println!("{} poles; precision {p:.3} recall {r:.3} f1 {f:.3}, mean offset {:.3} m", map.len(), report.mean_match_distance());
    print!("{}", map.to_text());
    Ok(())
}
