//! Least-squares line fits used for scaling exponents and extrapolation.

/// Least-squares `y ≈ slope·x + intercept`. Returns `(slope, intercept)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    assert_eq!(x.len(), y.len());
    assert!(x.len() >= 2, "a line fit needs two points");
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Residual standard error of the intercept of [`linear_fit`].
pub fn intercept_std_error(x: &[f64], y: &[f64]) -> f64 {
    let (s, c) = linear_fit(x, y);
    let n = x.len() as f64;
    if x.len() < 3 {
        return 0.0;
    }
    let mx = x.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - s * a - c).powi(2)).sum();
    let sigma2 = rss / (n - 2.0);
    (sigma2 * (1.0 / n + mx * mx / sxx)).sqrt()
}
