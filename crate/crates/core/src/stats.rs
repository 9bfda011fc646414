//! Small statistical helpers: Monte Carlo error bars, batch means for
//! correlated series, chi-square uniformity tests and weighted linear fits.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Sample mean and standard error for i.i.d. values.
pub fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    assert!(n >= 2, "need at least two samples");
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Mean and standard error via batch means: robust for serially correlated
/// series as long as batches are longer than the correlation time.
pub fn batch_means_stderr(xs: &[f64], n_batches: usize) -> (f64, f64) {
    let n = xs.len();
    let b = n_batches.clamp(2, n / 2);
    let len = n / b;
    let mut means = Vec::with_capacity(b);
    for i in 0..b {
        let chunk = &xs[i * len..(i + 1) * len];
        means.push(chunk.iter().sum::<f64>() / len as f64);
    }
    mean_and_stderr(&means)
}

/// Pearson chi-square p-value for observed counts against uniform expected
/// counts. Counts must hold at least two cells.
pub fn chi_square_uniform_pvalue(counts: &[usize]) -> f64 {
    let k = counts.len();
    assert!(k >= 2);
    let total: usize = counts.iter().sum();
    let expected = total as f64 / k as f64;
    let stat: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    let dist = ChiSquared::new((k - 1) as f64).expect("positive dof");
    1.0 - dist.cdf(stat)
}

/// Weighted least-squares line y = intercept + slope·x.
///
/// Returns (slope, intercept, r²) with r² computed on the weighted sums of
/// squares.
pub fn weighted_linear_fit(x: &[f64], y: &[f64], w: &[f64]) -> (f64, f64, f64) {
    assert_eq!(x.len(), y.len());
    assert_eq!(x.len(), w.len());
    assert!(x.len() >= 2);
    let sw: f64 = w.iter().sum();
    let mx = x.iter().zip(w).map(|(x, w)| x * w).sum::<f64>() / sw;
    let my = y.iter().zip(w).map(|(y, w)| y * w).sum::<f64>() / sw;
    let sxx: f64 = x.iter().zip(w).map(|(x, w)| w * (x - mx).powi(2)).sum();
    let sxy: f64 = x
        .iter()
        .zip(y)
        .zip(w)
        .map(|((x, y), w)| w * (x - mx) * (y - my))
        .sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .zip(w)
        .map(|((x, y), w)| w * (y - intercept - slope * x).powi(2))
        .sum();
    let ss_tot: f64 = y.iter().zip(w).map(|(y, w)| w * (y - my).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    (slope, intercept, r2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn mean_and_stderr_of_constant_series() {
        let (m, se) = mean_and_stderr(&[2.0; 16]);
        assert_eq!(m, 2.0);
        assert_eq!(se, 0.0);
    }

    #[test]
    fn batch_means_match_iid_for_uncorrelated_data() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 2654435761_usize) % 1000) as f64).collect();
        let (m1, _) = mean_and_stderr(&xs);
        let (m2, _) = batch_means_stderr(&xs, 10);
        assert_relative_eq!(m1, m2, epsilon = 1e-9);
    }

    #[test]
    fn chi_square_detects_uniform_and_nonuniform() {
        let uniform = vec![100usize; 16];
        assert!(chi_square_uniform_pvalue(&uniform) > 0.99);
        let mut skewed = vec![100usize; 16];
        skewed[0] = 400;
        assert!(chi_square_uniform_pvalue(&skewed) < 1e-6);
    }

    #[test]
    fn weighted_fit_recovers_exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 0.3, -0.4, -1.1];
        let w = [1.0, 2.0, 1.0, 0.5];
        let (slope, intercept, r2) = weighted_linear_fit(&x, &y, &w);
        assert_relative_eq!(slope, -0.7, epsilon = 1e-12);
        assert_relative_eq!(intercept, 1.0, epsilon = 1e-12);
        assert_relative_eq!(r2, 1.0, epsilon = 1e-12);
    }
}
