//! Algebraic (Kåsa) least-squares circle fitting.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Circle {
    pub x: f64,
    pub y: f64,
    pub radius: f64,
}

/// Fits `x² + y² + D·x + E·y + F = 0` in the least-squares sense.
///
/// Coordinates are centered on their mean first, which decouples `F` and
/// leaves a 2x2 system for `D`, `E`. The result is exact for points that lie
/// on a circle.
pub fn fit_circle(points: &[[f64; 2]]) -> Result<Circle> {
    if points.len() < 3 {
        return Err(Error::FitFailure("need at least three points"));
    }
    let n = points.len() as f64;
    let (mx, my) = points
        .iter()
        .fold((0.0, 0.0), |(sx, sy), p| (sx + p[0], sy + p[1]));
    let (mx, my) = (mx / n, my / n);

    let (mut suu, mut suv, mut svv, mut suz, mut svz, mut sz) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for p in points {
        let u = p[0] - mx;
        let v = p[1] - my;
        let z = u * u + v * v;
        suu += u * u;
        suv += u * v;
        svv += v * v;
        suz += u * z;
        svz += v * z;
        sz += z;
    }

    let det = suu * svv - suv * suv;
    let scale = (suu + svv) * (suu + svv);
    if !(scale > 0.0) || det <= 1e-12 * scale {
        return Err(Error::FitFailure("points are collinear or coincident"));
    }
    let d = -(svv * suz - suv * svz) / det;
    let e = -(suu * svz - suv * suz) / det;
    let f = -sz / n;

    let cu = -0.5 * d;
    let cv = -0.5 * e;
    let r2 = cu * cu + cv * cv - f;
    if !(r2 > 0.0) || !r2.is_finite() {
        return Err(Error::FitFailure("degenerate radius"));
    }
    Ok(Circle {
        x: cu + mx,
        y: cv + my,
        radius: r2.sqrt(),
    })
}
