//! Fits the low-dimensional similarity curve `1 / (1 + a·d^(2b))`.

use crate::error::{Error, Result};

pub const CURVE_SAMPLES: usize = 300;
pub const CURVE_MAX_ITER: usize = 500;
pub const CURVE_GRAD_TOL: f64 = 1e-8;

/// Target membership: flat at 1 up to `min_dist`, exponential decay beyond.
pub fn target_curve(d: f64, min_dist: f64, spread: f64) -> f64 {
    if d <= min_dist {
        1.0
    } else {
        (-(d - min_dist) / spread).exp()
    }
}

#[inline]
pub fn curve(d: f64, a: f64, b: f64) -> f64 {
    1.0 / (1.0 + a * d.powf(2.0 * b))
}

pub fn sample_grid(spread: f64) -> Vec<f64> {
    let hi = 3.0 * spread;
    (0..CURVE_SAMPLES)
        .map(|i| hi * i as f64 / (CURVE_SAMPLES - 1) as f64)
        .collect()
}

struct Eval {
    sse: f64,
    grad: [f64; 2],
    jtj: [[f64; 2]; 2],
}

fn evaluate(xs: &[f64], ys: &[f64], a: f64, b: f64) -> Eval {
    let mut sse = 0.0;
    let mut grad = [0.0; 2];
    let mut jtj = [[0.0; 2]; 2];
    for (&x, &y) in xs.iter().zip(ys) {
        let (p, ja, jb) = if x > 0.0 {
            let p = x.powf(2.0 * b);
            let den = 1.0 + a * p;
            let f = 1.0 / den;
            let ja = -p / (den * den);
            let jb = -2.0 * a * p * x.ln() / (den * den);
            (f, ja, jb)
        } else {
            (1.0, 0.0, 0.0)
        };
        let r = p - y;
        sse += r * r;
        grad[0] += ja * r;
        grad[1] += jb * r;
        jtj[0][0] += ja * ja;
        jtj[0][1] += ja * jb;
        jtj[1][1] += jb * jb;
    }
    jtj[1][0] = jtj[0][1];
    Eval { sse, grad, jtj }
}

/// Least-squares `(a, b)` on `CURVE_SAMPLES` points over `[0, 3·spread]`,
/// by Levenberg–Marquardt from `(1, 1)`.
pub fn fit_curve(min_dist: f64, spread: f64) -> Result<(f64, f64)> {
    if !(min_dist >= 0.0 && min_dist.is_finite()) || !(spread > 0.0 && spread.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "curve parameters min_dist={min_dist}, spread={spread}"
        )));
    }
    let xs = sample_grid(spread);
    let ys: Vec<f64> = xs.iter().map(|&x| target_curve(x, min_dist, spread)).collect();

    let (mut a, mut b) = (1.0f64, 1.0f64);
    let mut lambda = 1e-3;
    let mut cur = evaluate(&xs, &ys, a, b);
    for _ in 0..CURVE_MAX_ITER {
        let gnorm = cur.grad[0].hypot(cur.grad[1]);
        if gnorm <= CURVE_GRAD_TOL {
            return Ok((a, b));
        }
        loop {
            let m00 = cur.jtj[0][0] * (1.0 + lambda);
            let m11 = cur.jtj[1][1] * (1.0 + lambda);
            let m01 = cur.jtj[0][1];
            let det = m00 * m11 - m01 * m01;
            let step = if det.abs() > 0.0 {
                [
                    -(m11 * cur.grad[0] - m01 * cur.grad[1]) / det,
                    -(m00 * cur.grad[1] - m01 * cur.grad[0]) / det,
                ]
            } else {
                [f64::NAN, f64::NAN]
            };
            let (na, nb) = (a + step[0], b + step[1]);
            if na > 0.0 && nb > 0.0 && na.is_finite() && nb.is_finite() {
                let next = evaluate(&xs, &ys, na, nb);
                if next.sse <= cur.sse {
                    a = na;
                    b = nb;
                    cur = next;
                    lambda = (lambda / 10.0).max(1e-12);
                    break;
                }
            }
            lambda *= 10.0;
            if lambda > 1e16 {
                // no descent direction left: stationary up to round-off
                let gnorm = cur.grad[0].hypot(cur.grad[1]);
                return if gnorm <= CURVE_GRAD_TOL {
                    Ok((a, b))
                } else {
                    Err(Error::CurveFitDiverged(CURVE_MAX_ITER))
                };
            }
        }
    }
    Err(Error::CurveFitDiverged(CURVE_MAX_ITER))
}
