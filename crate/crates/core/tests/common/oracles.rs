//! Slow reference implementations used as test oracles.

use num_bigint::BigInt;
use num_rational::BigRational;
use vlp_core::Point2;

/// Otsu by exhaustive sweep in exact rational arithmetic, written from the
/// textbook definition `w0 w1 (mu0 - mu1)^2` with class probabilities.
/// Ties: floor of the midpoint of the first run of maximizers. A histogram
/// with a single occupied level returns that level.
pub fn otsu_brute(counts: &[u64; 256]) -> u8 {
    let occupied: Vec<usize> = (0..256).filter(|&k| counts[k] > 0).collect();
    if occupied.len() == 1 {
        return occupied[0] as u8;
    }
    let total: u64 = counts.iter().sum();
    let big = |v: u64| BigRational::from_integer(BigInt::from(v));
    let n = big(total);
    let p: Vec<BigRational> = counts.iter().map(|&c| big(c) / n.clone()).collect();
    let zero = big(0);
    let mean_all: BigRational = (0..256).map(|k| big(k as u64) * p[k].clone()).sum();
    let (mut w0, mut s0) = (zero.clone(), zero.clone());
    let mut scores = Vec::with_capacity(255);
    for t in 0..255usize {
        w0 += p[t].clone();
        s0 += big(t as u64) * p[t].clone();
        let w1 = big(1) - w0.clone();
        if w0 == zero || w1 == zero {
            scores.push(zero.clone());
            continue;
        }
        let m0 = s0.clone() / w0.clone();
        let m1 = (mean_all.clone() - s0.clone()) / w1.clone();
        let d = m0 - m1;
        scores.push(w0.clone() * w1 * d.clone() * d);
    }
    let best = scores.iter().max().unwrap().clone();
    let first = scores.iter().position(|s| *s == best).unwrap();
    let mut last = first;
    while last + 1 < scores.len() && scores[last + 1] == best {
        last += 1;
    }
    ((first + last) / 2) as u8
}

fn circumcircle(a: Point2, b: Point2, c: Point2) -> Option<(Point2, f64)> {
    let d = 2.0 * (a.x * (b.y - c.y) + b.x * (c.y - a.y) + c.x * (a.y - b.y));
    if d.abs() < 1e-12 {
        return None;
    }
    let sq = |p: Point2| p.x * p.x + p.y * p.y;
    let ux = (sq(a) * (b.y - c.y) + sq(b) * (c.y - a.y) + sq(c) * (a.y - b.y)) / d;
    let uy = (sq(a) * (c.x - b.x) + sq(b) * (a.x - c.x) + sq(c) * (b.x - a.x)) / d;
    let center = Point2::new(ux, uy);
    Some((center, center.distance(&a)))
}

/// Minimum enclosing circle by trying every circle through two or three of
/// the points: O(n^4).
pub fn enclosing_brute(points: &[Point2]) -> (Point2, f64) {
    let scale = points.iter().fold(1.0f64, |m, p| m.max(p.x.abs()).max(p.y.abs()));
    let eps = 1e-9 * scale;
    let covers = |c: &Point2, r: f64| points.iter().all(|p| c.distance(p) <= r + eps);
    let mut best: Option<(Point2, f64)> = None;
    let mut offer = |c: Point2, r: f64| {
        if covers(&c, r) && best.is_none_or(|(_, br)| r < br) {
            best = Some((c, r));
        }
    };
    offer(points[0], 0.0);
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let c = points[i].midpoint(&points[j]);
            offer(c, c.distance(&points[i]));
            for k in j + 1..points.len() {
                if let Some((c, r)) = circumcircle(points[i], points[j], points[k]) {
                    offer(c, r);
                }
            }
        }
    }
    best.expect("some candidate covers all points")
}
