//! Adaptive one-dimensional quadrature over complex-valued integrands.
//!
//! The archimedean modules build two- and three-dimensional integrals by
//! nesting one-dimensional passes, so the error budget is absolute per call:
//! a caller integrating over a box splits its tolerance across the nesting
//! levels itself.
//!
//! The rule is the classic adaptive Simpson scheme with Richardson
//! extrapolation acceptance (`|S_fine - S_coarse| <= 15 tol`).  A forced
//! minimum bisection depth guards against aliasing on oscillatory
//! integrands, where a coarse Simpson estimate can spuriously agree with its
//! refinement.

use num_complex::Complex64;

/// Controls for one adaptive pass.
#[derive(Clone, Copy, Debug)]
pub struct SimpsonConfig {
    /// Absolute tolerance for the whole interval.
    pub tol: f64,
    /// Bisection depth that must be reached before acceptance is allowed.
    pub min_depth: u32,
    /// Hard recursion cap; the current estimate is returned when reached.
    pub max_depth: u32,
}

impl SimpsonConfig {
    /// Defaults suitable for smooth integrands.
    pub fn new(tol: f64) -> Self {
        SimpsonConfig { tol, min_depth: 4, max_depth: 32 }
    }

    /// Defaults for integrands oscillating up to roughly `periods` full
    /// periods over the interval: forces enough initial bisection that each
    /// accepted cell sees less than one period.
    pub fn oscillatory(tol: f64, periods: f64) -> Self {
        let depth = periods.max(1.0).log2().ceil() as u32 + 2;
        SimpsonConfig { tol, min_depth: depth.clamp(4, 20), max_depth: 36 }
    }
}

#[inline]
fn simpson(fa: Complex64, fm: Complex64, fb: Complex64, h: f64) -> Complex64 {
    (fa + fm * 4.0 + fb) * (h / 6.0)
}

fn recurse<F: Fn(f64) -> Complex64>(
    f: &F,
    a: f64,
    b: f64,
    fa: Complex64,
    fm: Complex64,
    fb: Complex64,
    whole: Complex64,
    tol: f64,
    depth: u32,
    cfg: &SimpsonConfig,
) -> Complex64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(fa, flm, fm, m - a);
    let right = simpson(fm, frm, fb, b - m);
    let refined = left + right;
    let err = refined - whole;
    if depth >= cfg.max_depth
        || (depth >= cfg.min_depth && err.norm() <= 15.0 * tol)
    {
        // Accept with Richardson correction.
        return refined + err / 15.0;
    }
    let half_tol = 0.5 * tol;
    recurse(f, a, m, fa, flm, fm, left, half_tol, depth + 1, cfg)
        + recurse(f, m, b, fm, frm, fb, right, half_tol, depth + 1, cfg)
}

/// Integrates `f` over `[a, b]` to the absolute tolerance in `cfg`.
pub fn adaptive_simpson<F: Fn(f64) -> Complex64>(
    f: &F,
    a: f64,
    b: f64,
    cfg: &SimpsonConfig,
) -> Complex64 {
    if a == b {
        return Complex64::new(0.0, 0.0);
    }
    let fa = f(a);
    let fm = f(0.5 * (a + b));
    let fb = f(b);
    let whole = simpson(fa, fm, fb, b - a);
    recurse(f, a, b, fa, fm, fb, whole, cfg.tol, 0, cfg)
}

/// Real-valued convenience wrapper.
pub fn adaptive_simpson_real<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    cfg: &SimpsonConfig,
) -> f64 {
    adaptive_simpson(&|x| Complex64::new(f(x), 0.0), a, b, cfg).re
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_exact() {
        let cfg = SimpsonConfig::new(1e-12);
        let v = adaptive_simpson_real(&|x| x * x, 0.0, 1.0, &cfg);
        assert!((v - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian() {
        let cfg = SimpsonConfig::new(1e-12);
        let v = adaptive_simpson_real(&|x| (-x * x).exp(), -8.0, 8.0, &cfg);
        assert!((v - PI.sqrt()).abs() < 1e-10, "got {v}");
    }

    #[test]
    fn oscillatory_cancellation() {
        // 20 full periods integrate to zero; the coarse Simpson estimate is
        // also near zero, so this exercises the min-depth guard.
        let cfg = SimpsonConfig::oscillatory(1e-10, 20.0);
        let v = adaptive_simpson(
            &|x| Complex64::new(0.0, 2.0 * PI * 20.0 * x).exp(),
            0.0,
            1.0,
            &cfg,
        );
        assert!(v.norm() < 1e-9, "got {v}");
    }

    #[test]
    fn oscillatory_with_envelope() {
        // int_R e^{i w x} / (1 + x^2) dx = pi e^{-|w|}.  Truncation at
        // |x| = 200 costs at most (2/w) / (1 + 200^2) by parts, well under
        // the 1e-4 assertion.
        let w = 6.0;
        let half = 200.0;
        let cfg = SimpsonConfig::oscillatory(1e-8, 2.0 * w * half / (2.0 * PI));
        let v = adaptive_simpson(
            &|x| Complex64::new(0.0, w * x).exp() / (1.0 + x * x),
            -half,
            half,
            &cfg,
        );
        let expect = PI * (-w).exp();
        assert!((v.re - expect).abs() < 1e-4, "got {} want {}", v.re, expect);
        assert!(v.im.abs() < 1e-6);
    }
}
