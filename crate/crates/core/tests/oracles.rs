//! Closed forms checked against numerical integration and Monte-Carlo.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use strokeseg::mdn::{bivariate_pdf, split_params, transform_params};
use strokeseg::vae::{kl_loss, sample_latent};

#[test]
fn bivariate_pdf_integrates_to_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let m = 3;
    for _ in 0..10 {
        let raw: Vec<f64> = (0..6 * m + 3).map(|_| rng.random_range(-3.0..3.0)).collect();
        let p = transform_params(&split_params(&raw, m).unwrap()).unwrap();
        for i in 0..m {
            let (sx, sy) = (p.sigma_x[i], p.sigma_y[i]);
            let n = 400;
            let (hx, hy) = (12.0 * sx / n as f64, 12.0 * sy / n as f64);
            let mut total = 0.0;
            for a in 0..n {
                let x = p.mu_x[i] - 6.0 * sx + (a as f64 + 0.5) * hx;
                for b in 0..n {
                    let y = p.mu_y[i] - 6.0 * sy + (b as f64 + 0.5) * hy;
                    total += bivariate_pdf(p.mu_x[i], p.mu_y[i], sx, sy, p.rho[i], x, y).unwrap();
                }
            }
            total *= hx * hy;
            assert!((total - 1.0).abs() < 1e-2, "component {i} (rho {}) integrates to {total}", p.rho[i]);
        }
    }
}

/// Per-dimension mean of `ln q(z) − ln p(z)` over `n` draws of `q = N(μ, e^σ̂)`.
fn monte_carlo_kl(mu: &[f64], sigma_hat: &[f64], n: usize, rng: &mut ChaCha8Rng) -> f64 {
    let mut acc = 0.0;
    for _ in 0..n {
        let z = sample_latent(mu, sigma_hat, rng);
        for ((&z, &m), &s) in z.iter().zip(mu).zip(sigma_hat) {
            let var = s.exp();
            acc += -0.5 * s - (z - m) * (z - m) / (2.0 * var) + 0.5 * z * z;
        }
    }
    acc / (n * mu.len()) as f64
}

#[test]
fn kl_matches_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        // keep |μ| away from zero so the divergence is not vanishingly small
        let mu: Vec<f64> = (0..2)
            .map(|_| rng.random_range(0.5..2.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 })
            .collect();
        let sh: Vec<f64> = (0..2).map(|_| rng.random_range(-2.0..2.0)).collect();
        let closed = kl_loss(&mu, &sh);
        let mc = monte_carlo_kl(&mu, &sh, 1_000_000, &mut rng);
        assert!((closed - mc).abs() / closed < 0.02, "mu {mu:?} sigma_hat {sh:?}: {closed} vs {mc}");
    }
    assert_eq!(kl_loss(&[0.0f64, 0.0], &[0.0, 0.0]), 0.0);
}

#[test]
fn standard_latent_draws_have_unit_variance() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 100_000;
    let draws: Vec<Vec<f64>> = (0..n).map(|_| sample_latent(&[0.0, 0.0], &[0.0, 0.0], &mut rng)).collect();
    for d in 0..2 {
        let mean = draws.iter().map(|z| z[d]).sum::<f64>() / n as f64;
        let var = draws.iter().map(|z| (z[d] - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((var - 1.0).abs() < 0.03, "coordinate {d}: variance {var}");
    }
}
