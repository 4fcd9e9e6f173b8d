//! Projects a handful of points into a range image and shows where they land.

use poleloc::geometry::{project_scan, Point3, SensorConfig};

fn main() {
    let cfg = SensorConfig::os1_64();
    let points = [
        Point3::new(10.0, 0.0, 0.0),
        Point3::new(0.0, 10.0, -1.0),
        Point3::new(-5.0, -5.0, -1.5),
        // Same ray, farther: the closer return wins the pixel.
        Point3::new(20.0, 0.0, 0.0),
        // Above the field of view, dropped.
        Point3::new(3.0, 0.0, 3.0),
    ];
    for p in &points {
        match cfg.pixel_of(p) {
            Some((u, v)) => println!("({:6.2} {:6.2} {:6.2}) -> u {u:4} v {v:2}", p.x, p.y, p.z),
            None => println!("({:6.2} {:6.2} {:6.2}) -> outside", p.x, p.y, p.z),
        }
    }
    let img = project_scan(&points, &cfg);
    println!("{}x{} image, {} valid pixels", img.width(), img.height(), img.valid_count());
    let (u, v) = cfg.pixel_of(&points[0]).unwrap();
    println!("range at ({u}, {v}) = {:?}", img.range(u, v));
}
