use crate::geom::{cross, Point};

use super::hull::signed_area2;
use super::BlendMask;

/// Fills a convex polygon into a `width` x `height` binary mask.
///
/// Pixel `(i, j)` is sampled at its center `(i + 0.5, j + 0.5)`. A center
/// strictly inside is 1; a center exactly on an edge is 1 only for top
/// edges (horizontal, interior below) and left edges (interior toward +x).
/// Polygons partly or entirely outside the frame are clipped.
pub fn rasterize_hull(polygon: &[Point], width: usize, height: usize) -> BlendMask {
    let mut mask = BlendMask::zeros(width, height);
    if polygon.len() < 3 || width == 0 || height == 0 {
        return mask;
    }
    let mut poly = polygon.to_vec();
    if signed_area2(&poly) < 0.0 {
        poly.reverse();
    }

    let (min_x, max_x, min_y, max_y) = poly.iter().fold(
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
        |(a, b, c, d), p| (a.min(p.x), b.max(p.x), c.min(p.y), d.max(p.y)),
    );
    let lo = |v: f64, n: usize| ((v - 0.5).floor().max(0.0) as usize).min(n);
    let hi = |v: f64, n: usize| ((v - 0.5).ceil().max(-1.0) + 1.0).clamp(0.0, n as f64) as usize;
    let (x0, x1) = (lo(min_x, width), hi(max_x, width));
    let (y0, y1) = (lo(min_y, height), hi(max_y, height));

    let edges: Vec<(Point, Point, bool)> = (0..poly.len())
        .map(|i| {
            let a = poly[i];
            let b = poly[(i + 1) % poly.len()];
            let (dx, dy) = (b.x - a.x, b.y - a.y);
            let top_left = (dy == 0.0 && dx > 0.0) || dy < 0.0;
            (a, b, top_left)
        })
        .collect();

    for y in y0..y1 {
        for x in x0..x1 {
            let c = Point::new(x as f64 + 0.5, y as f64 + 0.5);
            let inside = edges.iter().all(|&(a, b, top_left)| {
                let e = cross(a, b, c);
                e > 0.0 || (e == 0.0 && top_left)
            });
            if inside {
                mask.set(x, y, 1.0);
            }
        }
    }
    mask
}
