use image::{Rgb, RgbImage};

/// Signed shoelace area; positive for counter-clockwise vertices in a y-up frame.
pub fn polygon_area(vertices: &[[f64; 2]]) -> f64 {
    let n = vertices.len();
    if n < 3 {
        return 0.0;
    }
    let mut twice = 0.0;
    for i in 0..n {
        let [x0, y0] = vertices[i];
        let [x1, y1] = vertices[(i + 1) % n];
        twice += x0 * y1 - x1 * y0;
    }
    0.5 * twice
}

/// Even-odd (crossing number) point-in-polygon test.
pub fn point_in_polygon(point: [f64; 2], vertices: &[[f64; 2]]) -> bool {
    let [px, py] = point;
    let n = vertices.len();
    let mut inside = false;
    let mut j = n.wrapping_sub(1);
    for i in 0..n {
        let [xi, yi] = vertices[i];
        let [xj, yj] = vertices[j];
        if (yi > py) != (yj > py) {
            let x = xi + (py - yi) * (xj - xi) / (yj - yi);
            if px < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Calls `visit(px, py)` for every pixel whose center lies inside the polygon
/// under the even-odd rule. Pixels outside the `width x height` frame are skipped.
fn scanline<F: FnMut(u32, u32)>(vertices: &[[f64; 2]], width: u32, height: u32, mut visit: F) {
    if vertices.len() < 3 || width == 0 || height == 0 {
        return;
    }
    let (ymin, ymax) = vertices
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v[1]), hi.max(v[1])));
    let row_start = (ymin - 0.5).ceil().max(0.0) as u32;
    let row_end = ((ymax - 0.5).floor() + 1.0).clamp(0.0, height as f64) as u32;
    let mut xs = Vec::with_capacity(vertices.len());
    for py in row_start..row_end {
        let yc = py as f64 + 0.5;
        xs.clear();
        for (i, a) in vertices.iter().enumerate() {
            let b = vertices[(i + 1) % vertices.len()];
            if (a[1] > yc) != (b[1] > yc) {
                xs.push(a[0] + (yc - a[1]) * (b[0] - a[0]) / (b[1] - a[1]));
            }
        }
        xs.sort_by(f64::total_cmp);
        for span in xs.chunks_exact(2) {
            // pixel centers in [span[0], span[1])
            let first = (span[0] - 0.5).ceil().max(0.0);
            let last = ((span[1] - 0.5).ceil()).min(width as f64);
            let mut px = first;
            while px < last {
                visit(px as u32, py);
                px += 1.0;
            }
        }
    }
}

/// Boolean coverage mask (row-major, `width * height`) of the scanline fill.
pub fn polygon_pixel_mask(vertices: &[[f64; 2]], width: u32, height: u32) -> Vec<bool> {
    let mut mask = vec![false; width as usize * height as usize];
    scanline(vertices, width, height, |x, y| mask[y as usize * width as usize + x as usize] = true);
    mask
}

/// Fills the polygon interior in place; returns the number of pixels written.
pub fn fill_polygon(image: &mut RgbImage, vertices: &[[f64; 2]], color: [u8; 3]) -> usize {
    let (w, h) = image.dimensions();
    let mut count = 0;
    scanline(vertices, w, h, |x, y| {
        image.put_pixel(x, y, Rgb(color));
        count += 1;
    });
    count
}
