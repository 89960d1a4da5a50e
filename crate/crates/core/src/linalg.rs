//! Small dense vector helpers used throughout the crate.

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Euclidean norm.
pub fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// `x - y`.
pub fn sub(x: &[f64], y: &[f64]) -> Vec<f64> {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}

/// `x + alpha * y`, in place.
pub fn axpy(x: &mut [f64], alpha: f64, y: &[f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (xi, yi) in x.iter_mut().zip(y) {
        *xi += alpha * yi;
    }
}

/// Relative Euclidean error `|x - truth| / |truth|`.
pub fn rel_error(x: &[f64], truth: &[f64]) -> f64 {
    norm(&sub(x, truth)) / norm(truth)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basics() {
        let x = [1.0, 2.0, 3.0];
        let y = [4.0, -5.0, 6.0];
        assert_eq!(dot(&x, &y), 12.0);
        assert_eq!(norm(&[3.0, 4.0]), 5.0);
        assert_eq!(sub(&x, &y), vec![-3.0, 7.0, -3.0]);
        let mut z = x;
        axpy(&mut z, 2.0, &y);
        assert_eq!(z, [9.0, -8.0, 15.0]);
    }
}
