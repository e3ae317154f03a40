//! One-dimensional search helpers and a parallel map.

/// Maximum of `f` on `[a, b]`: dense grid followed by golden-section refinement
/// around the best grid node.
pub fn grid_max<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> (f64, f64) {
    let h = (b - a) / n as f64;
    let mut best = (a, f(a));
    for i in 1..=n {
        let x = a + h * i as f64;
        let v = f(x);
        if v > best.1 {
            best = (x, v);
        }
    }
    let lo = (best.0 - h).max(a);
    let hi = (best.0 + h).min(b);
    let refined = golden_max(&f, lo, hi, 1e-14 * (b - a).abs().max(1.0));
    if refined.1 > best.1 {
        refined
    } else {
        best
    }
}

/// Minimum of `f` on `[a, b]`, same strategy as [`grid_max`].
pub fn grid_min<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> (f64, f64) {
    let (x, v) = grid_max(|t| -f(t), a, b, n);
    (x, -v)
}

/// Golden-section search for a maximum of a unimodal function.
pub fn golden_max<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    if fc > fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Largest `x` in `[lo, hi]` with `ok(x)`, assuming `ok(lo)` and monotone failure.
pub fn bisect_threshold<F: Fn(f64) -> bool>(ok: F, mut lo: f64, mut hi: f64, iters: usize) -> f64 {
    for _ in 0..iters {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// `items.map(f)` in order, across threads when the `parallel` feature is on.
pub fn par_map<T: Sync, U: Send, F: Fn(&T) -> U + Sync + Send>(items: &[T], f: F) -> Vec<U> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Sets the number of worker threads; a no-op without the `parallel` feature.
pub fn set_workers(n: usize) -> crate::error::Result<()> {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| crate::error::Error::Parameter(format!("cannot configure {n} workers: {e}")))
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = n;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_parabola_peak() {
        let (x, v) = grid_max(|t| 1.0 - (t - 0.3137).powi(2), 0.0, 1.0, 50);
        assert!((x - 0.3137).abs() < 1e-7);
        assert!((v - 1.0).abs() < 1e-14);
    }

    #[test]
    fn bisection_threshold() {
        let t = bisect_threshold(|x| x * x <= 2.0, 0.0, 4.0, 80);
        assert!((t - 2f64.sqrt()).abs() < 1e-14);
    }
}
