//! One-sample Kolmogorov–Smirnov test against a reference CDF.

/// Two-sided KS statistic D_n = sup_x |F_n(x) - F(x)| for `data` against
/// the CDF `cdf`. The sample is sorted internally.
pub fn ks_statistic<F: Fn(f64) -> f64>(data: &[f64], cdf: F) -> f64 {
    let mut sorted: Vec<f64> = data.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("sample contains NaN"));
    let n = sorted.len() as f64;
    let mut d = 0.0_f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max((f - i as f64 / n).abs());
        d = d.max(((i + 1) as f64 / n - f).abs());
    }
    d
}

/// Asymptotic two-sided p-value for the KS statistic `d` at sample size `n`,
/// via the Kolmogorov distribution with Stephens' finite-sample correction.
pub fn ks_pvalue(d: f64, n: usize) -> f64 {
    if d <= 0.0 {
        return 1.0;
    }
    let sqrt_n = (n as f64).sqrt();
    let t = d * (sqrt_n + 0.12 + 0.11 / sqrt_n);
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = 2.0 * (-1.0_f64).powi(k as i32 + 1) * (-2.0 * k * k * t * t).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;

    #[test]
    fn uniform_sample_passes_against_uniform_cdf() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let data: Vec<f64> = (0..50_000).map(|_| rng.random::<f64>()).collect();
        let d = ks_statistic(&data, |x| x.clamp(0.0, 1.0));
        let p = ks_pvalue(d, data.len());
        assert!(p > 0.01, "d = {d}, p = {p}");
    }

    #[test]
    fn shifted_sample_fails() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        let data: Vec<f64> = (0..50_000).map(|_| rng.random::<f64>() * 0.95).collect();
        let d = ks_statistic(&data, |x| x.clamp(0.0, 1.0));
        assert!(ks_pvalue(d, data.len()) < 1e-6);
    }

    #[test]
    fn known_statistic_value() {
        // Empirical CDF of {0.1, 0.5, 0.9} vs U(0,1): D = max gap.
        let d = ks_statistic(&[0.1, 0.5, 0.9], |x| x);
        assert!((d - 0.233_333_333_333_333_3).abs() < 1e-12, "d = {d}");
    }
}
