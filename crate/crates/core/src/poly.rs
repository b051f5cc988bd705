//! Real roots of low-degree polynomials.

/// Real roots of `c2 x² + c1 x + c0`, ascending. Degenerates to the linear
/// case when `c2` is zero; an identically zero polynomial has no roots.
pub(crate) fn quadratic_roots(c2: f64, c1: f64, c0: f64) -> Vec<f64> {
    if c2 == 0.0 {
        if c1 == 0.0 {
            return Vec::new();
        }
        return vec![-c0 / c1];
    }
    let disc = c1 * c1 - 4.0 * c2 * c0;
    if disc < 0.0 {
        return Vec::new();
    }
    if disc == 0.0 {
        return vec![-c1 / (2.0 * c2)];
    }
    // Avoids cancellation between -c1 and sqrt(disc).
    let q = -0.5 * (c1 + c1.signum_nonzero() * disc.sqrt());
    let mut r = [q / c2, if q != 0.0 { c0 / q } else { 0.0 }];
    r.sort_by(f64::total_cmp);
    r.to_vec()
}

/// Real roots of `c3 x³ + c2 x² + c1 x + c0`, ascending, each polished with a
/// couple of Newton steps.
pub(crate) fn cubic_roots(c3: f64, c2: f64, c1: f64, c0: f64) -> Vec<f64> {
    let scale = c3.abs().max(c2.abs()).max(c1.abs()).max(c0.abs());
    if scale == 0.0 {
        return Vec::new();
    }
    if c3.abs() <= 1e-14 * scale {
        return quadratic_roots(c2, c1, c0);
    }
    let (a, b, c) = (c2 / c3, c1 / c3, c0 / c3);
    // Depressed cubic t³ + pt + q with x = t - a/3.
    let shift = a / 3.0;
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
    let mut roots = if p == 0.0 && q == 0.0 {
        vec![-shift]
    } else if disc > 0.0 {
        let s = disc.sqrt();
        let u = (-q / 2.0 + s).cbrt();
        let v = (-q / 2.0 - s).cbrt();
        vec![u + v - shift]
    } else if disc == 0.0 {
        let u = (-q / 2.0).cbrt();
        vec![2.0 * u - shift, -u - shift]
    } else {
        let r = (-p / 3.0).sqrt();
        let phi = (-q / (2.0 * r * r * r)).clamp(-1.0, 1.0).acos();
        (0..3)
            .map(|k| 2.0 * r * ((phi + 2.0 * std::f64::consts::PI * k as f64) / 3.0).cos() - shift)
            .collect()
    };
    for x in roots.iter_mut() {
        for _ in 0..3 {
            let f = ((c3 * *x + c2) * *x + c1) * *x + c0;
            let df = (3.0 * c3 * *x + 2.0 * c2) * *x + c1;
            if df == 0.0 {
                break;
            }
            let next = *x - f / df;
            if !next.is_finite() {
                break;
            }
            *x = next;
        }
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * a.abs().max(1.0));
    roots
}

trait SignumNonzero {
    fn signum_nonzero(self) -> f64;
}

impl SignumNonzero for f64 {
    fn signum_nonzero(self) -> f64 {
        if self < 0.0 {
            -1.0
        } else {
            1.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-9)
    }

    #[test]
    fn quadratic_cases() {
        assert!(close(&quadratic_roots(1.0, -3.0, 2.0), &[1.0, 2.0]));
        assert!(close(&quadratic_roots(0.0, 2.0, -4.0), &[2.0]));
        assert!(quadratic_roots(1.0, 0.0, 1.0).is_empty());
        assert!(quadratic_roots(0.0, 0.0, 1.0).is_empty());
        // Large dynamic range: roots 1e-8 and 1e8.
        let r = quadratic_roots(1.0, -(1e8 + 1e-8), 1.0);
        assert!((r[0] - 1e-8).abs() < 1e-20 && (r[1] - 1e8).abs() < 1e-6);
    }

    #[test]
    fn cubic_cases() {
        // (x-1)(x-2)(x-3)
        assert!(close(&cubic_roots(1.0, -6.0, 11.0, -6.0), &[1.0, 2.0, 3.0]));
        // x³ - 1: single real root.
        assert!(close(&cubic_roots(1.0, 0.0, 0.0, -1.0), &[1.0]));
        // Degenerates to quadratic.
        assert!(close(&cubic_roots(0.0, 1.0, -3.0, 2.0), &[1.0, 2.0]));
        // Double root at 2: (x-2)²(x+1) = x³ - 3x² + 4
        let r = cubic_roots(1.0, -3.0, 0.0, 4.0);
        assert!((r[0] + 1.0).abs() < 1e-9);
        assert!(r.iter().any(|x| (x - 2.0).abs() < 1e-6));
    }
}
