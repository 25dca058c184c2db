//! Adaptive Simpson quadrature.

const MAX_DEPTH: u32 = 48;

/// Integral of `f` over `[a, b]` to absolute tolerance `tol`.
pub(crate) fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    // Split first so that integrands with narrow features are not missed.
    const PIECES: usize = 8;
    let h = (b - a) / PIECES as f64;
    (0..PIECES)
        .map(|i| {
            let lo = a + i as f64 * h;
            let hi = if i + 1 == PIECES { b } else { lo + h };
            let (fa, fm, fb) = (f(lo), f(0.5 * (lo + hi)), f(hi));
            let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
            recurse(f, lo, hi, fa, fm, fb, whole, tol / PIECES as f64, MAX_DEPTH)
        })
        .sum()
}

#[allow(clippy::too_many_arguments)]
fn recurse<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Integral of `f` over `[a, inf)` for integrands with an exponential tail.
///
/// The range is extended in doubling steps until a step contributes less than
/// `tol` and the integrand at its end is below `1e-14`.
pub(crate) fn simpson_to_infinity<F: Fn(f64) -> f64>(f: &F, a: f64, tol: f64) -> f64 {
    let mut lo = a;
    let mut width = 1.0;
    let mut total = 0.0;
    for _ in 0..64 {
        let hi = lo + width;
        let part = simpson(f, lo, hi, tol * 0.1);
        total += part;
        if part.abs() < tol && f(hi).abs() < 1e-14 {
            break;
        }
        lo = hi;
        width *= 2.0;
    }
    total
}

/// Composite Simpson rule on equally spaced samples; a 3/8 panel closes an
/// odd number of intervals.
pub(crate) fn simpson_samples(y: &[f64], h: f64) -> f64 {
    let n = y.len().saturating_sub(1);
    match n {
        0 => 0.0,
        1 => 0.5 * h * (y[0] + y[1]),
        2 => h / 3.0 * (y[0] + 4.0 * y[1] + y[2]),
        3 => 3.0 * h / 8.0 * (y[0] + 3.0 * y[1] + 3.0 * y[2] + y[3]),
        _ => {
            let even = if n % 2 == 0 { n } else { n - 3 };
            let mut s = y[0] + y[even];
            for (i, v) in y.iter().enumerate().take(even).skip(1) {
                s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
            }
            let mut total = h / 3.0 * s;
            if even != n {
                let t = &y[even..];
                total += 3.0 * h / 8.0 * (t[0] + 3.0 * t[1] + 3.0 * t[2] + t[3]);
            }
            total
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let v = simpson(&|x: f64| x * x * x - 2.0 * x, 0.0, 2.0, 1e-12);
        assert!((v - 0.0).abs() < 1e-12);
    }

    #[test]
    fn exponential_tail() {
        let v = simpson_to_infinity(&|x: f64| (-x).exp(), 1.0, 1e-12);
        assert!((v - (-1.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn samples_odd_and_even() {
        for n in 1..12 {
            let h = 1.0 / n as f64;
            let y: Vec<f64> = (0..=n).map(|i| (i as f64 * h).powi(2)).collect();
            let v = simpson_samples(&y, h);
            let tol = if n == 1 { 0.2 } else { 1e-12 };
            assert!((v - 1.0 / 3.0).abs() < tol, "n = {n}: {v}");
        }
    }
}
