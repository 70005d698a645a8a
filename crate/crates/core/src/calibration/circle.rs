//! Circle estimators: algebraic least-squares fit and minimum enclosing circle.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::CalibrationError;
use crate::geometry::Point2;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Circle<T> {
    pub center: Point2<T>,
    pub radius: T,
}

impl<T: Scalar> Circle<T> {
    pub fn new(center: Point2<T>, radius: T) -> Self {
        Self { center, radius }
    }

    fn point(p: Point2<T>) -> Self {
        Self::new(p, T::zero())
    }

    fn diameter(a: Point2<T>, b: Point2<T>) -> Self {
        let c = a.midpoint(&b);
        Self::new(c, c.distance(&a).max(c.distance(&b)))
    }

    /// Circumcircle, or `None` for (near-)collinear points.
    fn circumcircle(a: Point2<T>, b: Point2<T>, c: Point2<T>) -> Option<Self> {
        let (bx, by) = (b.x - a.x, b.y - a.y);
        let (cx, cy) = (c.x - a.x, c.y - a.y);
        let d = T::two() * (bx * cy - by * cx);
        let scale = (bx * bx + by * by).max(cx * cx + cy * cy);
        if d.abs() <= T::epsilon() * scale {
            return None;
        }
        let b2 = bx * bx + by * by;
        let c2 = cx * cx + cy * cy;
        let ux = (cy * b2 - by * c2) / d;
        let uy = (bx * c2 - cx * b2) / d;
        let center = Point2::new(a.x + ux, a.y + uy);
        let r = center
            .distance(&a)
            .max(center.distance(&b))
            .max(center.distance(&c));
        Some(Self::new(center, r))
    }

    /// Smallest circle through `a`, `b` and `c` that contains all three.
    fn through_three(a: Point2<T>, b: Point2<T>, c: Point2<T>) -> Self {
        Self::circumcircle(a, b, c).unwrap_or_else(|| {
            let ab = Self::diameter(a, b);
            let ac = Self::diameter(a, c);
            let bc = Self::diameter(b, c);
            [ab, ac, bc]
                .into_iter()
                .fold(ab, |m, x| if x.radius > m.radius { x } else { m })
        })
    }

    /// Containment with an absolute slack `eps`.
    pub fn contains(&self, p: &Point2<T>, eps: T) -> bool {
        self.center.distance(p) <= self.radius + eps
    }
}

fn containment_slack<T: Scalar>(points: &[Point2<T>]) -> T {
    let scale = points
        .iter()
        .fold(T::one(), |m, p| m.max(p.x.abs()).max(p.y.abs()));
    T::epsilon().sqrt() * T::lit(1e-2) * scale
}

/// Minimum-radius circle containing every point (Welzl, iterative form).
///
/// Input order is shuffled with a fixed seed, which gives expected linear time
/// while keeping the result reproducible.
pub fn smallest_enclosing_circle<T: Scalar>(
    points: &[Point2<T>],
) -> Result<Circle<T>, CalibrationError> {
    if points.is_empty() {
        return Err(CalibrationError::EmptyInput);
    }
    let eps = containment_slack(points);
    let mut pts = points.to_vec();
    pts.shuffle(&mut ChaCha8Rng::seed_from_u64(0x5EC));

    let mut c = Circle::point(pts[0]);
    for i in 1..pts.len() {
        if c.contains(&pts[i], eps) {
            continue;
        }
        c = Circle::point(pts[i]);
        for j in 0..i {
            if c.contains(&pts[j], eps) {
                continue;
            }
            c = Circle::diameter(pts[i], pts[j]);
            for k in 0..j {
                if !c.contains(&pts[k], eps) {
                    c = Circle::through_three(pts[i], pts[j], pts[k]);
                }
            }
        }
    }
    Ok(c)
}

/// Algebraic (Kasa) least-squares circle fit.
///
/// Minimizes `sum (x^2 + y^2 + D x + E y + F)^2` on mean-centred data.
/// Exact for points lying on a circle, including the three-point case.
pub fn fit_circle_kasa<T: Scalar>(points: &[Point2<T>]) -> Result<Circle<T>, CalibrationError> {
    let n = points.len();
    if n < 3 {
        return Err(CalibrationError::InsufficientSamples { needed: 3, got: n });
    }
    let nf = T::from_usize(n).expect("sample count fits scalar");
    let (sx, sy) = points
        .iter()
        .fold((T::zero(), T::zero()), |(a, b), p| (a + p.x, b + p.y));
    let mean = Point2::new(sx / nf, sy / nf);

    let (mut sxx, mut sxy, mut syy) = (T::zero(), T::zero(), T::zero());
    let (mut sxz, mut syz, mut sz) = (T::zero(), T::zero(), T::zero());
    for p in points {
        let x = p.x - mean.x;
        let y = p.y - mean.y;
        let z = x * x + y * y;
        sxx = sxx + x * x;
        sxy = sxy + x * y;
        syy = syy + y * y;
        sxz = sxz + x * z;
        syz = syz + y * z;
        sz = sz + z;
    }
    let det = sxx * syy - sxy * sxy;
    let tr = sxx + syy;
    if !(det > T::epsilon() * T::lit(1e3) * tr * tr) {
        return Err(CalibrationError::DegenerateFit);
    }
    let d = -(syy * sxz - sxy * syz) / det;
    let e = -(sxx * syz - sxy * sxz) / det;
    let f = -sz / nf;
    let center = Point2::new(mean.x - d * T::half(), mean.y - e * T::half());
    let r2 = (d * d + e * e) / T::lit(4.0) - f;
    Ok(Circle::new(center, r2.max(T::zero()).sqrt()))
}
