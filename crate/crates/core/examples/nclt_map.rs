//! Builds an aggregated pole map from an NCLT session and scores it against
//! labeled poles.
//!
//!     cargo run --release --example nclt_map -- \
//!         <velodyne_sync dir> <groundtruth_DATE.csv> <truth_poles.txt> [out_map.txt]
//!
//! The labeled poles must be in the map text format (`x y radius count`,
//! radius and count may be dummies), in the ground-truth frame with y
//! flipped to point left.

use poleloc::config::Config;
use poleloc::eval::{match_poles, prf1};
use poleloc::geometry::project_scan;
use poleloc::io::{nclt_session, read_nclt_scan};
use poleloc::map::PoleMap;
use poleloc::mapping::MapBuilder;
use poleloc::pose::TimedPose;
use std::path::PathBuf;
use std::time::Instant;

fn main() -> poleloc::Result<()> {
    let args: Vec<PathBuf> = std::env::args_os().skip(1).map(PathBuf::from).collect();
    if args.len() < 3 {
        eprintln!("usage: nclt_map <velodyne_sync dir> <groundtruth.csv> <truth_poles.txt> [out_map.txt]");
        std::process::exit(1);
    }
    let cfg = Config::preset("hdl32")?;
    let session = nclt_session(&args[0], &args[1])?;
    let truth = PoleMap::read(&args[2])?;
    println!("{} scans with ground truth", session.len());

    let t0 = Instant::now();
    let poses: Vec<TimedPose> = session.iter().map(|(p, _)| *p).collect();
    let mut builder = MapBuilder::new(cfg.map, cfg.extractor);
    builder.add_session(&poses, |i| Ok(project_scan(&read_nclt_scan(&session[i].1)?.points, &cfg.sensor)))?;
    let map = builder.finish();
    println!("{} poles in {:.1} s", map.len(), t0.elapsed().as_secs_f64());

    let report = match_poles(&map, &truth, 1.0);
    let (p, r, f) = prf1(&report);
    println!("precision {p:.3} recall {r:.3} f1 {f:.3}");
    if let Some(out) = args.get(3) {
        map.write(out)?;
    }
    Ok(())
}
