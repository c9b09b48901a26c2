//! Bivariate Gaussian mixture output layer.
//!
//! The decoder emits a `6M + 3` vector per step laid out as
//! `[π̂(M), μx(M), μy(M), σ̂x(M), σ̂y(M), ρ̂(M), q̂(3)]`. This module splits and
//! constrains that vector, evaluates densities and losses, applies sampling
//! temperature and draws points.

use crate::scalar::{log_softmax, log_sum_exp, softmax, Scalar};
use crate::{Error, Result};
use rand::Rng;
use rand_distr::StandardNormal;

/// Unconstrained mixture parameters for one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct RawMixture<T> {
    pub pi_hat: Vec<T>,
    pub mu_x: Vec<T>,
    pub mu_y: Vec<T>,
    pub sigma_x_hat: Vec<T>,
    pub sigma_y_hat: Vec<T>,
    pub rho_hat: Vec<T>,
    pub q_hat: [T; 3],
}

impl<T: Scalar> RawMixture<T> {
    pub fn num_components(&self) -> usize {
        self.pi_hat.len()
    }

    /// Flattens back into the output-vector layout.
    pub fn to_vec(&self) -> Vec<T> {
        let mut v = Vec::with_capacity(6 * self.num_components() + 3);
        for part in [
            &self.pi_hat,
            &self.mu_x,
            &self.mu_y,
            &self.sigma_x_hat,
            &self.sigma_y_hat,
            &self.rho_hat,
        ] {
            v.extend_from_slice(part);
        }
        v.extend_from_slice(&self.q_hat);
        v
    }
}

/// Constrained mixture: weights and pen probabilities sum to one, standard
/// deviations are positive and correlations lie in (-1, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureParams<T> {
    pub pi: Vec<T>,
    pub mu_x: Vec<T>,
    pub mu_y: Vec<T>,
    pub sigma_x: Vec<T>,
    pub sigma_y: Vec<T>,
    pub rho: Vec<T>,
    pub q: [T; 3],
}

impl<T: Scalar> MixtureParams<T> {
    pub fn num_components(&self) -> usize {
        self.pi.len()
    }
}

pub fn output_size(m: usize) -> usize {
    6 * m + 3
}

pub fn split_params<T: Scalar>(y: &[T], m: usize) -> Result<RawMixture<T>> {
    if m == 0 || y.len() != output_size(m) {
        return Err(Error::ShapeMismatch {
            what: "mixture output",
            expected: output_size(m),
            got: y.len(),
        });
    }
    let part = |k: usize| y[k * m..(k + 1) * m].to_vec();
    Ok(RawMixture {
        pi_hat: part(0),
        mu_x: part(1),
        mu_y: part(2),
        sigma_x_hat: part(3),
        sigma_y_hat: part(4),
        rho_hat: part(5),
        q_hat: [y[6 * m], y[6 * m + 1], y[6 * m + 2]],
    })
}

/// `tanh` kept strictly inside (-1, 1); it rounds to ±1 for |ρ̂| ≳ 19.
#[inline]
pub(crate) fn squash_rho<T: Scalar>(rho_hat: T) -> T {
    let bound = T::one() - T::epsilon();
    rho_hat.tanh().max(-bound).min(bound)
}

/// `σ = exp(σ̂)`, `ρ = tanh(ρ̂)`, softmax over mixture weights and pen logits.
pub fn transform_params<T: Scalar>(r: &RawMixture<T>) -> Result<MixtureParams<T>> {
    if !r.to_vec().iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("raw mixture parameter".into()));
    }
    let q = softmax(&r.q_hat);
    Ok(MixtureParams {
        pi: softmax(&r.pi_hat),
        mu_x: r.mu_x.clone(),
        mu_y: r.mu_y.clone(),
        sigma_x: r.sigma_x_hat.iter().map(|s| s.exp().max(T::min_positive_value())).collect(),
        sigma_y: r.sigma_y_hat.iter().map(|s| s.exp().max(T::min_positive_value())).collect(),
        rho: r.rho_hat.iter().map(|&p| squash_rho(p)).collect(),
        q: [q[0], q[1], q[2]],
    })
}

/// Standardized residuals, `1 - ρ²` and the quadratic form `u`.
#[inline]
fn quad_form<T: Scalar>(mx: T, my: T, sx: T, sy: T, rho: T, dx: T, dy: T) -> (T, T, T, T) {
    let zx = (dx - mx) / sx;
    let zy = (dy - my) / sy;
    let one_m = T::one() - rho * rho;
    let u = zx * zx + zy * zy - T::lit(2.0) * rho * zx * zy;
    (zx, zy, one_m, u)
}

#[inline]
fn log_pdf_unchecked<T: Scalar>(mx: T, my: T, sx: T, sy: T, rho: T, dx: T, dy: T) -> T {
    let (_, _, one_m, u) = quad_form(mx, my, sx, sy, rho, dx, dy);
    -(T::TAU() * sx * sy * one_m.sqrt()).ln() - u / (T::lit(2.0) * one_m)
}

/// Log density of one bivariate normal component.
pub fn log_bivariate_pdf<T: Scalar>(
    mu_x: T,
    mu_y: T,
    sigma_x: T,
    sigma_y: T,
    rho: T,
    dx: T,
    dy: T,
) -> Result<T> {
    if !(rho.abs() < T::one()) {
        return Err(Error::invalid(format!("|rho| must be < 1, got {rho}")));
    }
    if !(sigma_x > T::zero() && sigma_y > T::zero()) {
        return Err(Error::invalid("standard deviations must be positive"));
    }
    Ok(log_pdf_unchecked(mu_x, mu_y, sigma_x, sigma_y, rho, dx, dy))
}

pub fn bivariate_pdf<T: Scalar>(
    mu_x: T,
    mu_y: T,
    sigma_x: T,
    sigma_y: T,
    rho: T,
    dx: T,
    dy: T,
) -> Result<T> {
    log_bivariate_pdf(mu_x, mu_y, sigma_x, sigma_y, rho, dx, dy).map(T::exp)
}

/// `-ln Σ πᵢ N(dx, dy)ᵢ`, evaluated with log-sum-exp. The density is floored
/// at the smallest positive normal number.
pub fn mixture_nll<T: Scalar>(m: &MixtureParams<T>, dx: T, dy: T) -> T {
    let terms: Vec<T> = (0..m.num_components())
        .map(|i| {
            m.pi[i].ln()
                + log_pdf_unchecked(m.mu_x[i], m.mu_y[i], m.sigma_x[i], m.sigma_y[i], m.rho[i], dx, dy)
        })
        .collect();
    -log_sum_exp(&terms).max(T::log_floor())
}

/// `-Σ pᵢ ln qᵢ` with `ln q` floored.
pub fn pen_cross_entropy<T: Scalar>(q: &[T; 3], p: &[T; 3]) -> T {
    -q.iter()
        .zip(p)
        .filter(|(_, &pi)| pi != T::zero())
        .map(|(&qi, &pi)| pi * qi.ln().max(T::log_floor()))
        .sum::<T>()
}

/// Sampling temperature: mixture and pen logits are divided by `tau` before
/// the softmax and variances are multiplied by `tau`.
pub fn apply_temperature<T: Scalar>(
    r: &RawMixture<T>,
    m: &MixtureParams<T>,
    tau: T,
) -> Result<MixtureParams<T>> {
    if !(tau > T::zero() && tau <= T::one()) {
        return Err(Error::invalid(format!("temperature must be in (0, 1], got {tau}")));
    }
    let scaled = |v: &[T]| softmax(&v.iter().map(|&x| x / tau).collect::<Vec<_>>());
    let q = scaled(&r.q_hat);
    let sd = tau.sqrt();
    Ok(MixtureParams {
        pi: scaled(&r.pi_hat),
        mu_x: m.mu_x.clone(),
        mu_y: m.mu_y.clone(),
        sigma_x: m.sigma_x.iter().map(|&s| s * sd).collect(),
        sigma_y: m.sigma_y.iter().map(|&s| s * sd).collect(),
        rho: m.rho.clone(),
        q: [q[0], q[1], q[2]],
    })
}

fn categorical<T: Scalar, R: Rng + ?Sized>(p: &[T], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &w) in p.iter().enumerate() {
        acc += w.as_f64();
        if u < acc {
            return i;
        }
    }
    // rounding left u above the cumulative sum: take the last non-zero entry
    p.iter().rposition(|&w| w > T::zero()).unwrap_or(p.len() - 1)
}

/// Draws `(dx, dy, pen index)`: a component from `π`, a correlated normal
/// pair from that component and a pen state from `q`.
pub fn sample_point<T: Scalar, R: Rng + ?Sized>(m: &MixtureParams<T>, rng: &mut R) -> (T, T, usize) {
    let i = categorical(&m.pi, rng);
    let n1 = T::lit(rng.sample::<f64, _>(StandardNormal));
    let n2 = T::lit(rng.sample::<f64, _>(StandardNormal));
    let rho = m.rho[i];
    let dx = m.mu_x[i] + m.sigma_x[i] * n1;
    let dy = m.mu_y[i] + m.sigma_y[i] * (rho * n1 + (T::one() - rho * rho).sqrt() * n2);
    let pen = categorical(&m.q, rng);
    (dx, dy, pen)
}

/// Loss terms of one decoder step and their gradient with respect to the raw
/// output vector `y`.
#[derive(Debug, Clone)]
pub struct StepLoss<T> {
    /// Mixture negative log-likelihood (zero when not requested).
    pub nll: T,
    /// Pen-state cross entropy.
    pub pen_ce: T,
    /// `∂(nll_weight·nll + pen_weight·pen_ce)/∂y`.
    pub grad: Vec<T>,
}

/// Evaluates the per-step losses directly from the raw output `y` and
/// back-propagates them to `y`. `nll_weight` of zero skips the mixture term
/// (used for padded steps).
pub fn step_loss<T: Scalar>(
    y: &[T],
    m: usize,
    dx: T,
    dy: T,
    pen: usize,
    nll_weight: T,
    pen_weight: T,
) -> StepLoss<T> {
    debug_assert_eq!(y.len(), output_size(m));
    let mut grad = vec![T::zero(); y.len()];
    let two = T::lit(2.0);

    // pen states
    let q_hat = &y[6 * m..];
    let log_q = log_softmax(q_hat);
    let pen_ce = -log_q[pen].max(T::log_floor());
    if pen_weight != T::zero() {
        for k in 0..3 {
            let target = if k == pen { T::one() } else { T::zero() };
            grad[6 * m + k] = pen_weight * (log_q[k].exp() - target);
        }
    }

    let mut nll = T::zero();
    if nll_weight != T::zero() {
        let log_pi = log_softmax(&y[..m]);
        let mut comp = Vec::with_capacity(m);
        let mut terms = Vec::with_capacity(m);
        for i in 0..m {
            let (mx, my) = (y[m + i], y[2 * m + i]);
            let (sx, sy) = (y[3 * m + i].exp(), y[4 * m + i].exp());
            let rho = squash_rho(y[5 * m + i]);
            let (zx, zy, one_m, u) = quad_form(mx, my, sx, sy, rho, dx, dy);
            let log_n = -(T::TAU() * sx * sy * one_m.sqrt()).ln() - u / (two * one_m);
            comp.push((zx, zy, one_m, u, sx, sy, rho));
            terms.push(log_pi[i] + log_n);
        }
        let lse = log_sum_exp(&terms);
        if lse > T::log_floor() {
            nll = -lse;
            for i in 0..m {
                let (zx, zy, one_m, u, sx, sy, rho) = comp[i];
                let gamma = (terms[i] - lse).exp();
                let w = nll_weight;
                grad[i] = w * (log_pi[i].exp() - gamma);
                grad[m + i] = -w * gamma * (zx - rho * zy) / (one_m * sx);
                grad[2 * m + i] = -w * gamma * (zy - rho * zx) / (one_m * sy);
                grad[3 * m + i] = -w * gamma * (-T::one() + (zx * zx - rho * zx * zy) / one_m);
                grad[4 * m + i] = -w * gamma * (-T::one() + (zy * zy - rho * zx * zy) / one_m);
                grad[5 * m + i] = -w * gamma * (rho + zx * zy - u * rho / one_m);
            }
        } else {
            // floored density: constant loss, zero gradient
            nll = -T::log_floor();
        }
    }
    StepLoss { nll, pen_ce, grad }
}
