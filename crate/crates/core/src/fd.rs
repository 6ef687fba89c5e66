//! Central finite differences for gradient checks.

/// Step used for coordinate `x`: `eps^(1/3) * max(1, |x|)`.
pub fn step(x: f64) -> f64 {
    f64::EPSILON.cbrt() * x.abs().max(1.0)
}

/// Central difference of `f` along coordinate `i` at `x`.
pub fn partial<F: FnMut(&[f64]) -> f64>(mut f: F, x: &[f64], i: usize) -> f64 {
    let h = step(x[i]);
    let mut p = x.to_vec();
    p[i] = x[i] + h;
    let fp = f(&p);
    p[i] = x[i] - h;
    let fm = f(&p);
    // the actual distance between the two perturbed points
    let dx = (x[i] + h) - (x[i] - h);
    (fp - fm) / dx
}

pub fn gradient<F: FnMut(&[f64]) -> f64>(mut f: F, x: &[f64]) -> Vec<f64> {
    (0..x.len()).map(|i| partial(&mut f, x, i)).collect()
}

/// `|ad - fd| / max(|fd|, 1)`.
pub fn rel_err(ad: f64, fd: f64) -> f64 {
    (ad - fd).abs() / fd.abs().max(1.0)
}

/// Largest [`rel_err`] over paired entries and the index where it occurs.
pub fn max_rel_err(ad: &[f64], fd: &[f64]) -> (f64, usize) {
    assert_eq!(ad.len(), fd.len(), "gradient lengths differ");
    ad.iter()
        .zip(fd)
        .map(|(&a, &f)| rel_err(a, f))
        .enumerate()
        .fold((0.0, 0), |best, (i, e)| if e > best.0 || e.is_nan() { (e, i) } else { best })
}
