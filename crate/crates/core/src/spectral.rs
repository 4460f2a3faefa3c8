//! Spectra of the quasi-polynomial characteristic equation of the delayed
//! system, certified by an argument-principle winding count, plus the
//! delayed-Malthusian growth rate and the determinant reduction of the
//! age-structured eigenproblem.

use crate::error::{Error, Result};
use crate::model::{coexistence_equilibrium, thresholds, ModelParams};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Certification bound: a refined root must satisfy
/// `|chi(lambda)| <= RESIDUAL_CERT * (1 + |lambda|^2)`.
pub const RESIDUAL_CERT: f64 = 1e-10;
/// Minimum admissible `|chi|` along the search boundary.
pub const BOUNDARY_MIN_RESIDUAL: f64 = 1e-8;
/// Boundary points per rectangle side for the winding count.
pub const BOUNDARY_POINTS: usize = 4096;

/// Coefficients of the characteristic function
/// `chi(lambda) = kappa1(lambda) + kappa2(lambda) e^{-lambda tau}` with
/// `kappa1 = lambda^2 + lambda beta0 e^{-mu0 tau} + delta gamma0 y*` and
/// `kappa2 = -lambda beta0 e^{-mu0 tau}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuasiPolynomial {
    /// `beta0 e^{-mu0 tau}`, the shared linear coefficient.
    pub birth: f64,
    /// `delta gamma0 y*`, the constant term.
    pub constant: f64,
    pub tau: f64,
}

impl QuasiPolynomial {
    pub fn from_model(params: &ModelParams) -> Result<Self> {
        let (_, y_star) = coexistence_equilibrium(params)?;
        Ok(Self {
            birth: params.delayed_birth_rate(),
            constant: params.delta * params.gamma0 * y_star,
            tau: params.tau,
        })
    }

    /// `chi(lambda)`.
    pub fn char_value(&self, lambda: Complex64) -> Complex64 {
        let b = Complex64::new(self.birth, 0.0);
        lambda * lambda + b * lambda + self.constant - b * lambda * (-lambda * self.tau).exp()
    }

    /// `chi'(lambda)`.
    pub fn char_deriv(&self, lambda: Complex64) -> Complex64 {
        let b = Complex64::new(self.birth, 0.0);
        2.0 * lambda + b - b * (-lambda * self.tau).exp() * (1.0 - self.tau * lambda)
    }
}

/// A certified root of the characteristic function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootEntry {
    pub re: f64,
    pub im: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rectangle {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Rectangle {
    fn contains(&self, z: Complex64) -> bool {
        z.re >= self.re_min && z.re <= self.re_max && z.im >= self.im_min && z.im <= self.im_max
    }

    fn dilated(&self, pad: f64) -> Self {
        Self {
            re_min: self.re_min - pad,
            re_max: self.re_max + pad,
            im_min: self.im_min - pad,
            im_max: self.im_max + pad,
        }
    }
}

/// Roots of the characteristic function inside a complex rectangle, with the
/// winding-number certificate that the count is complete.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub rectangle: Rectangle,
    /// Argument-principle zero count along the rectangle boundary.
    pub count: usize,
    pub roots: Vec<RootEntry>,
    /// Largest real part among the refined roots; absent when none exist.
    pub max_real_part: Option<f64>,
}

/// Winding number of `chi` along the rectangle boundary, sampled with
/// `m` points per side and doubled adaptively while consecutive phase jumps
/// exceed `pi/2`. Also returns the smallest boundary magnitude seen.
fn winding_number(qp: &QuasiPolynomial, rect: &Rectangle, mut m: usize) -> Result<(i64, f64)> {
    let corners = [
        Complex64::new(rect.re_min, rect.im_min),
        Complex64::new(rect.re_max, rect.im_min),
        Complex64::new(rect.re_max, rect.im_max),
        Complex64::new(rect.re_min, rect.im_max),
    ];
    loop {
        let mut total_phase = 0.0f64;
        let mut max_jump = 0.0f64;
        let mut min_mag = f64::INFINITY;
        let mut prev = qp.char_value(corners[0]);
        min_mag = min_mag.min(prev.norm());
        for side in 0..4 {
            let from = corners[side];
            let to = corners[(side + 1) % 4];
            for j in 1..=m {
                let z = from + (to - from) * (j as f64 / m as f64);
                let value = qp.char_value(z);
                min_mag = min_mag.min(value.norm());
                let jump = (value / prev).arg();
                max_jump = max_jump.max(jump.abs());
                total_phase += jump;
                prev = value;
            }
        }
        let winding = total_phase / (2.0 * std::f64::consts::PI);
        if max_jump <= std::f64::consts::FRAC_PI_2 && (winding - winding.round()).abs() <= 0.25 {
            return Ok((winding.round() as i64, min_mag));
        }
        m *= 2;
        if m > 1 << 17 {
            return Err(Error::Spectral(format!(
                "winding count failed to stabilize (last estimate {winding})"
            )));
        }
    }
}

/// Counts roots inside the rectangle by the argument principle and refines
/// them by Newton iterations seeded on a `grid x grid` lattice.
///
/// The boundary must stay at magnitude `>= 1e-8`; otherwise the rectangle is
/// dilated by `1e-6` and retried, up to three times.
pub fn roots_in_rectangle(
    qp: &QuasiPolynomial,
    re_range: (f64, f64),
    im_range: (f64, f64),
    grid: usize,
) -> Result<SpectrumReport> {
    if re_range.0 >= re_range.1 || im_range.0 >= im_range.1 {
        return Err(Error::InvalidParameter(
            "rectangle ranges must be nonempty".into(),
        ));
    }
    if grid < 2 {
        return Err(Error::InvalidParameter("seed grid must be at least 2".into()));
    }
    let mut rect = Rectangle {
        re_min: re_range.0,
        re_max: re_range.1,
        im_min: im_range.0,
        im_max: im_range.1,
    };

    let mut count = None;
    for attempt in 0..=3 {
        let (w, min_mag) = winding_number(qp, &rect, BOUNDARY_POINTS)?;
        if min_mag >= BOUNDARY_MIN_RESIDUAL {
            if w < 0 {
                return Err(Error::Spectral(format!(
                    "negative winding number {w}; chi is analytic so the boundary sampling failed"
                )));
            }
            count = Some(w as usize);
            break;
        }
        if attempt == 3 {
            return Err(Error::Spectral(
                "rectangle boundary passes through a near-root after three dilations".into(),
            ));
        }
        rect = rect.dilated(1e-6);
    }
    let count = count.unwrap();

    if count == 0 {
        return Ok(SpectrumReport {
            rectangle: rect,
            count,
            roots: Vec::new(),
            max_real_part: None,
        });
    }

    let mut g = grid;
    for _ in 0..=3 {
        let roots = refine_roots(qp, &rect, g);
        if roots.len() == count {
            let max_real_part = roots.iter().map(|r| r.re).fold(f64::NEG_INFINITY, f64::max);
            return Ok(SpectrumReport {
                rectangle: rect,
                count,
                roots,
                max_real_part: Some(max_real_part),
            });
        }
        g *= 2;
    }
    Err(Error::Spectral(format!(
        "winding count {count} but Newton refinement disagrees after grid doubling"
    )))
}

fn refine_roots(qp: &QuasiPolynomial, rect: &Rectangle, grid: usize) -> Vec<RootEntry> {
    let mut found: Vec<Complex64> = Vec::new();
    let dre = (rect.re_max - rect.re_min) / grid as f64;
    let dim = (rect.im_max - rect.im_min) / grid as f64;
    for i in 0..grid {
        for j in 0..grid {
            let seed = Complex64::new(
                rect.re_min + (i as f64 + 0.5) * dre,
                rect.im_min + (j as f64 + 0.5) * dim,
            );
            if let Some(root) = newton(qp, seed) {
                if !rect.contains(root) {
                    continue;
                }
                let near = found
                    .iter()
                    .any(|r| (r - root).norm() <= 1e-8 * (1.0 + root.norm()));
                if !near {
                    found.push(root);
                }
            }
        }
    }
    found.sort_by(|p, q| {
        (p.im, p.re)
            .partial_cmp(&(q.im, q.re))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    found
        .into_iter()
        .filter_map(|z| {
            let residual = qp.char_value(z).norm();
            (residual <= RESIDUAL_CERT * (1.0 + z.norm_sqr())).then_some(RootEntry {
                re: z.re,
                im: z.im,
                residual,
            })
        })
        .collect()
}

fn newton(qp: &QuasiPolynomial, mut z: Complex64) -> Option<Complex64> {
    for _ in 0..80 {
        let f = qp.char_value(z);
        let df = qp.char_deriv(z);
        if df.norm() == 0.0 {
            return None;
        }
        let step = f / df;
        z -= step;
        if !z.re.is_finite() || !z.im.is_finite() || z.norm() > 1e12 {
            return None;
        }
        if step.norm() <= 1e-13 * (1.0 + z.norm()) {
            return Some(z);
        }
    }
    None
}

/// The positive real root of `lambda + mu0 = beta0 e^{-mu0 tau} e^{-lambda tau}`,
/// governing prey growth on predator-free histories. Exists iff `R0 > 1`.
pub fn malthusian_rate(params: &ModelParams) -> Result<f64> {
    if thresholds(params).r0 <= 1.0 {
        return Err(Error::Domain(format!(
            "no positive Malthusian rate: R0 = {} <= 1",
            thresholds(params).r0
        )));
    }
    let b = params.delayed_birth_rate();
    let f = |lam: f64| b * (-lam * params.tau).exp() - lam - params.mu0;
    let mut hi = 1.0;
    while f(hi) > 0.0 {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::RootFinding("Malthusian bracket failed".into()));
        }
    }
    let mut lo = 0.0;
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Determinant of the age-structured eigenproblem at `lambda`, in the reduced
/// closed form valid for the juvenile-class rates. Vanishes exactly where the
/// characteristic function does (away from the pole at
/// `lambda = -(mu0 + gamma0 y*)`).
pub fn pde_det_b(params: &ModelParams, lambda: Complex64) -> Result<Complex64> {
    let (_, y_star) = coexistence_equilibrium(params)?;
    let denom = lambda + (params.mu0 + params.gamma0 * y_star);
    if denom.norm() <= 1e-12 * (1.0 + lambda.norm()) {
        return Err(Error::Domain(format!(
            "lambda = {lambda} sits at the pole of the entries"
        )));
    }
    let hatb = params.beta0 * (-(lambda + params.mu0) * params.tau).exp();
    let b1 = 1.0 - hatb / denom;
    let b2 = params.delta * params.beta0 / (params.alpha * denom);
    let b3 = params.alpha * y_star * params.gamma0 * hatb / (params.beta0 * denom);
    let b4 = -lambda - params.delta * y_star * params.gamma0 / denom;
    Ok(b1 * b4 - b2 * b3)
}

/// Slow validation path: the same determinant from the original integral
/// entries, each evaluated by adaptive Simpson quadrature over `[0, a_max]`
/// (the integrands vanish below `tau`). Requires `lambda != 0` because two
/// entries carry a removable `1/lambda` factor.
pub fn pde_det_b_quadrature(
    params: &ModelParams,
    lambda: Complex64,
    a_max: f64,
) -> Result<Complex64> {
    let (_, y_star) = coexistence_equilibrium(params)?;
    if lambda.norm() < 1e-8 {
        return Err(Error::Domain(
            "the integral entries carry a removable 1/lambda; use lambda != 0".into(),
        ));
    }
    if a_max < 2.0 * params.tau {
        return Err(Error::InvalidParameter(format!(
            "truncation age {a_max} below 2 tau"
        )));
    }
    let (mu0, g0, tau) = (params.mu0, params.gamma0, params.tau);
    let survival = move |a: f64| (-mu0 * a - y_star * g0 * (a - tau)).exp();

    // Gamma = int gamma(a) exp(-int mu + y* gamma) da, by quadrature too.
    let gamma_big = g0 * adaptive_simpson(&|a| Complex64::new(survival(a), 0.0), tau, a_max)?;
    let i1 = adaptive_simpson(
        &|a| Complex64::new(survival(a), 0.0) * (-lambda * a).exp(),
        tau,
        a_max,
    )?;
    let i2 = adaptive_simpson(
        &|a| Complex64::new(survival(a), 0.0) * (1.0 - (-lambda * (a - tau)).exp()),
        tau,
        a_max,
    )?;

    let b1 = 1.0 - params.beta0 * i1;
    let b3 = params.alpha * y_star * g0 * i1;
    let b2 = params.delta * params.beta0 * g0 / (params.alpha * gamma_big * lambda) * i2;
    let b4 = -lambda - params.delta * y_star * g0 * g0 / (gamma_big * lambda) * i2;
    Ok(b1 * b4 - b2 * b3)
}

fn adaptive_simpson(f: &dyn Fn(f64) -> Complex64, a: f64, b: f64) -> Result<Complex64> {
    fn simpson(fa: Complex64, fm: Complex64, fb: Complex64, h: f64) -> Complex64 {
        h / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> Complex64,
        a: f64,
        b: f64,
        fa: Complex64,
        fb: Complex64,
        fm: Complex64,
        whole: Complex64,
        eps: f64,
        depth: usize,
    ) -> Result<Complex64> {
        let m = 0.5 * (a + b);
        let flm = f(0.5 * (a + m));
        let frm = f(0.5 * (m + b));
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let delta = left + right - whole;
        if delta.norm() <= 15.0 * eps || depth >= 40 {
            return Ok(left + right + delta / 15.0);
        }
        Ok(recurse(f, a, m, fa, fm, flm, left, eps / 2.0, depth + 1)?
            + recurse(f, m, b, fm, fb, frm, right, eps / 2.0, depth + 1)?)
    }

    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = simpson(fa, fm, fb, b - a);
    let eps = 1e-13 * (1.0 + whole.norm());
    recurse(f, a, b, fa, fb, fm, whole, eps, 0)
}
