use rand::seq::index::sample;
use rand::Rng;

/// Denominator floor of the relative error, so that coordinates with
/// vanishing gradients are compared absolutely.
pub const RELATIVE_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Coordinate with the largest error.
    pub worst: usize,
    pub checked: usize,
    pub passed: bool,
}

/// `|a − n| / max(|a|, |n|, RELATIVE_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

/// Up to `count` distinct coordinates out of `n`, sorted.
pub fn sample_coordinates(n: usize, count: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut c = sample(rng, n, count.min(n)).into_vec();
    c.sort_unstable();
    c
}

/// Compare the analytic gradient of `loss` at `x` against central
/// differences with the given step on the chosen coordinates. `loss`
/// returns the value and the full gradient.
pub fn grad_check(
    mut loss: impl FnMut(&[f64]) -> (f64, Vec<f64>),
    x: &[f64],
    coords: &[usize],
    step: f64,
    tolerance: f64,
) -> GradCheckReport {
    let (_, analytic) = loss(x);
    assert_eq!(analytic.len(), x.len(), "gradient length");
    let mut probe = x.to_vec();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: coords.first().copied().unwrap_or(0),
        checked: 0,
        passed: true,
    };
    for &i in coords {
        probe[i] = x[i] + step;
        let up = loss(&probe).0;
        probe[i] = x[i] - step;
        let down = loss(&probe).0;
        probe[i] = x[i];
        let numeric = (up - down) / (2.0 * step);
        let err = relative_error(analytic[i], numeric);
        if err > report.max_rel_error || err.is_nan() {
            report.max_rel_error = err;
            report.worst = i;
        }
        report.checked += 1;
    }
    report.passed = report.max_rel_error < tolerance;
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn quadratic_is_exact() {
        // f(x) = Σ c_i x_i² + x_0 x_1
        let c = [3.0, -1.5, 0.25, 8.0];
        let f = |x: &[f64]| {
            let v = c.iter().zip(x).map(|(c, x)| c * x * x).sum::<f64>() + x[0] * x[1];
            let mut g: Vec<f64> = c.iter().zip(x).map(|(c, x)| 2.0 * c * x).collect();
            g[0] += x[1];
            g[1] += x[0];
            (v, g)
        };
        let x = [0.7, -1.1, 2.0, 0.3];
        let r = grad_check(f, &x, &[0, 1, 2, 3], 1e-4, 1e-8);
        assert!(r.passed, "{r:?}");
        assert_eq!(r.checked, 4);
    }

    #[test]
    fn wrong_gradients_fail() {
        let f = |x: &[f64]| (x[0] * x[0], vec![x[0]]);
        let r = grad_check(f, &[1.0], &[0], 1e-6, 1e-5);
        assert!(!r.passed);
        assert!((r.max_rel_error - 0.5).abs() < 1e-6);
    }

    #[test]
    fn coordinate_sampling() {
        let c = sample_coordinates(10, 20, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(c, (0..10).collect::<Vec<_>>());
        let c = sample_coordinates(1000, 100, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(c.len(), 100);
        assert!(c.windows(2).all(|w| w[0] < w[1]));
    }
}
