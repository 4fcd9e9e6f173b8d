//! Reads KITTI-style poses and a binary scan, converting them to the
//! planar conventions used everywhere else.

use poleloc::geometry::Point3;
use poleloc::io::{encode_scan_bin, parse_kitti_poses, parse_scan_bin, poses_to_text};
use std::path::Path;

fn main() -> poleloc::Result<()> {
    // Camera frame: x right, y down, z forward. Second pose: 2 m ahead,
    // turned 90 degrees to the left.
    let text = "1 0 0 0 0 1 0 0 0 0 1 0\n0 0 -1 0 0 1 0 0 1 0 0 2\n";
    let poses = parse_kitti_poses(text, Some(&[0.0, 0.1]), Path::new("poses.txt"))?;
    print!("{}", poses_to_text(&poses, "# t x y theta\n"));

    let points = vec![Point3::new(1.0, 2.0, 0.5), Point3::new(-3.0, 0.25, -1.0)];
    let bytes = encode_scan_bin(&points);
    let scan = parse_scan_bin(&bytes, Path::new("000000.bin"))?;
    println!("{} bytes -> {} points {:?}", bytes.len(), scan.points.len(), scan.points);
    Ok(())
}
