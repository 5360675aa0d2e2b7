/// Central finite-difference gradient of `f` at `x`, one coordinate at a time.
pub fn finite_diff_grad(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = probe[i];
        probe[i] = orig + h;
        let up = f(&probe);
        probe[i] = orig - h;
        let down = f(&probe);
        probe[i] = orig;
        grad.push((up - down) / (2.0 * h));
    }
    grad
}

/// Central difference of a vector-valued map along direction `v`.
pub fn finite_diff_directional(mut f: impl FnMut(&[f64]) -> Vec<f64>, x: &[f64], v: &[f64], h: f64) -> Vec<f64> {
    let up: Vec<f64> = x.iter().zip(v).map(|(a, b)| a + h * b).collect();
    let down: Vec<f64> = x.iter().zip(v).map(|(a, b)| a - h * b).collect();
    let fu = f(&up);
    let fd = f(&down);
    fu.iter().zip(&fd).map(|(a, b)| (a - b) / (2.0 * h)).collect()
}

/// `‖a - b‖ / max(‖a‖, ‖b‖)`, zero when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = na.max(nb);
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}
