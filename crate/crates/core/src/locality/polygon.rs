//! Convex polygon area and intersection.

pub type Point = [f64; 2];

/// Signed shoelace area; positive for counterclockwise vertex order.
pub fn signed_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..n {
        let [x0, y0] = poly[i];
        let [x1, y1] = poly[(i + 1) % n];
        s += x0 * y1 - x1 * y0;
    }
    0.5 * s
}

pub fn area(poly: &[Point]) -> f64 {
    signed_area(poly).abs()
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Clips `subject` against every edge of the convex, counterclockwise `clip`
/// polygon (Sutherland-Hodgman). Both inputs must be convex.
pub fn clip_convex(subject: &[Point], clip: &[Point]) -> Vec<Point> {
    let mut out: Vec<Point> = subject.to_vec();
    let m = clip.len();
    for e in 0..m {
        if out.is_empty() {
            break;
        }
        let (a, b) = (clip[e], clip[(e + 1) % m]);
        let input = std::mem::take(&mut out);
        let n = input.len();
        for i in 0..n {
            let cur = input[i];
            let prev = input[(i + n - 1) % n];
            let cin = cross(a, b, cur) >= 0.0;
            let pin = cross(a, b, prev) >= 0.0;
            if cin {
                if !pin {
                    out.push(intersect(prev, cur, a, b));
                }
                out.push(cur);
            } else if pin {
                out.push(intersect(prev, cur, a, b));
            }
        }
    }
    out
}

fn intersect(p: Point, q: Point, a: Point, b: Point) -> Point {
    let dp = cross(a, b, p);
    let dq = cross(a, b, q);
    let t = dp / (dp - dq);
    [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]
}

/// Area of the intersection of two convex counterclockwise polygons.
/// Degenerate overlaps (a shared edge or a single point) count as zero.
pub fn intersection_area(a: &[Point], b: &[Point]) -> f64 {
    let c = clip_convex(a, b);
    let s = area(&c);
    let scale = area(a).min(area(b)).max(f64::MIN_POSITIVE);
    if s <= 1e-12 * scale {
        0.0
    } else {
        s
    }
}

pub fn contains_convex(poly: &[Point], p: Point) -> bool {
    let n = poly.len();
    (0..n).all(|i| cross(poly[i], poly[(i + 1) % n], p) >= 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(x0: f64, y0: f64, s: f64) -> Vec<Point> {
        vec![[x0, y0], [x0 + s, y0], [x0 + s, y0 + s], [x0, y0 + s]]
    }

    #[test]
    fn overlapping_squares() {
        let a = square(0.0, 0.0, 2.0);
        let b = square(1.0, 1.0, 2.0);
        assert!((intersection_area(&a, &b) - 1.0).abs() < 1e-12);
        assert!((intersection_area(&b, &a) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn contained_and_disjoint() {
        let a = square(0.0, 0.0, 4.0);
        let b = square(1.0, 1.0, 1.0);
        assert!((intersection_area(&a, &b) - 1.0).abs() < 1e-12);
        assert_eq!(intersection_area(&a, &square(10.0, 0.0, 1.0)), 0.0);
    }

    #[test]
    fn shared_edge_and_corner_are_zero() {
        let a = square(0.0, 0.0, 1.0);
        assert_eq!(intersection_area(&a, &square(1.0, 0.0, 1.0)), 0.0);
        assert_eq!(intersection_area(&a, &square(1.0, 1.0, 1.0)), 0.0);
    }

    #[test]
    fn triangle_area() {
        let t = [[0.0, 0.0], [4.0, -4.0], [4.0, 4.0]];
        assert!((signed_area(&t) - 16.0).abs() < 1e-12);
        assert!(contains_convex(&t, [3.0, 0.0]));
        assert!(!contains_convex(&t, [-0.1, 0.0]));
    }
}
