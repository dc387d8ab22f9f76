//! Central finite-difference oracle for gradient checks.

/// Compares an analytic gradient against central differences of `f` at
/// `p0`, coordinate by coordinate, and returns the worst relative error
/// with denominator `max(|analytic|, |fd|, 1e-12)`.
pub fn fd_check<F>(mut f: F, p0: &[f64], step: f64, analytic: &[f64]) -> f64
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(p0.len(), analytic.len(), "gradient length mismatch");
    assert!(step > 0.0, "step must be positive");
    let mut worst = 0.0f64;
    let mut point = p0.to_vec();
    for i in 0..p0.len() {
        point[i] = p0[i] + step;
        let plus = f(&point);
        point[i] = p0[i] - step;
        let minus = f(&point);
        point[i] = p0[i];
        let fd = (plus - minus) / (2.0 * step);
        let denom = analytic[i].abs().max(fd.abs()).max(1e-12);
        worst = worst.max((fd - analytic[i]).abs() / denom);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_gradient_checks_out() {
        let f = |p: &[f64]| p.iter().map(|v| v * v).sum::<f64>();
        let p0 = [1.0, 2.0];
        let analytic = [2.0, 4.0];
        assert!(fd_check(f, &p0, 1e-5, &analytic) <= 1e-10);
    }

    #[test]
    fn detects_a_wrong_gradient() {
        let f = |p: &[f64]| p[0] * p[0];
        assert!(fd_check(f, &[1.0], 1e-5, &[1.0]) > 0.4);
    }
}
