//! Cubic Hermite interpolation on uniformly sampled (value, derivative) data.

/// Cubic Hermite interpolant on a single interval `[t0, t0 + h]`.
///
/// `s` is the normalized abscissa `(t - t0) / h` in `[0, 1]`.
pub fn hermite(s: f64, h: f64, y0: f64, d0: f64, y1: f64, d1: f64) -> f64 {
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
}

/// Derivative of [`hermite`] with respect to `t` (not `s`).
pub fn hermite_deriv(s: f64, h: f64, y0: f64, d0: f64, y1: f64, d1: f64) -> f64 {
    let s2 = s * s;
    let dh00 = 6.0 * s2 - 6.0 * s;
    let dh10 = 3.0 * s2 - 4.0 * s + 1.0;
    let dh01 = -6.0 * s2 + 6.0 * s;
    let dh11 = 3.0 * s2 - 2.0 * s;
    (dh00 * y0 + dh01 * y1) / h + dh10 * d0 + dh11 * d1
}

/// Uniformly sampled curve with stored derivatives, evaluable anywhere on
/// `[t0, t0 + n*h]` by cubic Hermite interpolation. Exact at the nodes.
#[derive(Debug, Clone)]
pub struct SampledCurve<'a> {
    pub t0: f64,
    pub h: f64,
    pub values: &'a [f64],
    pub derivs: &'a [f64],
}

impl<'a> SampledCurve<'a> {
    pub fn t_end(&self) -> f64 {
        self.t0 + (self.values.len() - 1) as f64 * self.h
    }

    /// Locate the interval containing `t` and return `(index, s)`.
    fn locate(&self, t: f64) -> (usize, f64) {
        let n = self.values.len() - 1;
        let u = (t - self.t0) / self.h;
        let mut i = u.floor() as isize;
        if i < 0 {
            i = 0;
        }
        let mut i = i as usize;
        if i >= n {
            i = n - 1;
        }
        (i, u - i as f64)
    }

    pub fn eval(&self, t: f64) -> f64 {
        let (i, s) = self.locate(t);
        // Exact node values avoid O(eps) wiggle when t sits on the grid.
        if s == 0.0 {
            return self.values[i];
        }
        hermite(
            s,
            self.h,
            self.values[i],
            self.derivs[i],
            self.values[i + 1],
            self.derivs[i + 1],
        )
    }

    pub fn eval_deriv(&self, t: f64) -> f64 {
        let (i, s) = self.locate(t);
        if s == 0.0 {
            return self.derivs[i];
        }
        hermite_deriv(
            s,
            self.h,
            self.values[i],
            self.derivs[i],
            self.values[i + 1],
            self.derivs[i + 1],
        )
    }
}

/// Second-order finite-difference derivative estimates on a uniform grid:
/// centered in the interior, one-sided three-point at the ends.
pub fn finite_difference_derivs(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    assert!(n >= 3, "need at least three samples");
    let mut d = vec![0.0; n];
    d[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * h);
    for i in 1..n - 1 {
        d[i] = (values[i + 1] - values[i - 1]) / (2.0 * h);
    }
    d[n - 1] = (3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) / (2.0 * h);
    d
}
