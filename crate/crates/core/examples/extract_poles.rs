//! Extracts poles from one simulated scan of a single-pole street and
//! prints the intermediate cluster counts.

use poleloc::extractor::{cluster_range_image, extract_poles, filter_clusters, ExtractorParams};
use poleloc::geometry::{project_scan, SensorConfig};
use poleloc::motion::MotionNoise;
use poleloc::sim::{generate_session, scenarios};

fn main() -> poleloc::Result<()> {
    let cfg = SensorConfig::os1_64();
    let world = scenarios::single_pole();
    let session = generate_session(&world, &scenarios::single_pole_drive(), &cfg, &MotionNoise::ZERO, 0.02, 1)?;
    let params = ExtractorParams::default();

    let img = project_scan(&session.scan(0), &cfg);
    let clusters = cluster_range_image(&img, &params);
    let kept = filter_clusters(clusters.clone(), &img, &params);
    println!("{} valid pixels, {} clusters, {} pass the shape filters", img.valid_count(), clusters.len(), kept.len());

    let pose = session.truth[0].pose;
    for d in extract_poles(&img, &params) {
        let w = d.to_world(&pose);
        println!("pole at ({:.3}, {:.3}) r {:.3} from {} pixels", w.x, w.y, w.radius, d.support);
    }
    let truth = &world.poles[0];
    println!("truth   ({:.3}, {:.3}) r {:.3}", truth.x, truth.y, truth.radius);
    Ok(())
}
