//! Gaussian kernel with a normal-inverse-gamma base measure, stick-breaking
//! draws, CRP cluster-count combinatorics, and closed-form mixture integrals.
//!
//! All marginal likelihoods are computed in log space; natural-scale values
//! are exponentiated only at the public boundary.

use crate::error::{Error, Result};
use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, Normal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

pub const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Mean/variance pair of a univariate Gaussian kernel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianParam {
    pub mu: f64,
    pub sigma2: f64,
}

impl GaussianParam {
    pub fn new(mu: f64, sigma2: f64) -> Result<Self> {
        if !mu.is_finite() || !sigma2.is_finite() || sigma2 <= 0.0 {
            return Err(Error::Numerical(format!(
                "invalid Gaussian parameter (mu={mu}, sigma2={sigma2})"
            )));
        }
        Ok(Self { mu, sigma2 })
    }

    pub fn log_density(&self, y: f64) -> f64 {
        let z = y - self.mu;
        -0.5 * (LN_2PI + self.sigma2.ln()) - z * z / (2.0 * self.sigma2)
    }

    pub fn density(&self, y: f64) -> f64 {
        self.log_density(y).exp()
    }

    pub fn cdf(&self, y: f64) -> f64 {
        let z = (y - self.mu) / (2.0 * self.sigma2).sqrt();
        0.5 * statrs::function::erf::erfc(-z)
    }
}

/// Normal-inverse-gamma base measure: `mu | s2 ~ N(mu0, lambda * s2)`,
/// `s2 ~ InvGamma(shape, rate)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NigBase {
    pub mu0: f64,
    pub lambda: f64,
    pub shape: f64,
    pub rate: f64,
}

impl NigBase {
    pub fn new(mu0: f64, lambda: f64, shape: f64, rate: f64) -> Result<Self> {
        if !mu0.is_finite()
            || !(lambda > 0.0 && lambda.is_finite())
            || !(shape > 0.0 && shape.is_finite())
            || !(rate > 0.0 && rate.is_finite())
        {
            return Err(Error::Config(format!(
                "invalid NIG base (mu0={mu0}, lambda={lambda}, shape={shape}, rate={rate})"
            )));
        }
        Ok(Self { mu0, lambda, shape, rate })
    }

    /// Prior precision pseudo-count `kappa0 = 1 / lambda`.
    pub fn kappa0(&self) -> f64 {
        1.0 / self.lambda
    }

    /// Log density of `(mu, s2)` under the base measure.
    pub fn log_density(&self, p: &GaussianParam) -> f64 {
        let var_mu = self.lambda * p.sigma2;
        let z = p.mu - self.mu0;
        let ln_normal = -0.5 * (LN_2PI + var_mu.ln()) - z * z / (2.0 * var_mu);
        let ln_ig = self.shape * self.rate.ln() - ln_gamma(self.shape)
            - (self.shape + 1.0) * p.sigma2.ln()
            - self.rate / p.sigma2;
        ln_normal + ln_ig
    }
}

impl Default for NigBase {
    /// `N(mu | 0, 10 s2) x InvGamma(s2 | 1, 1)`.
    fn default() -> Self {
        Self { mu0: 0.0, lambda: 10.0, shape: 1.0, rate: 1.0 }
    }
}

/// Zero/first/second-moment sufficient statistics of a set of observations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GaussStats {
    pub n: f64,
    pub sum: f64,
    pub sumsq: f64,
}

impl GaussStats {
    pub fn from_values(values: &[f64]) -> Self {
        let mut s = Self::default();
        for &y in values {
            s.push(y);
        }
        s
    }

    pub fn push(&mut self, y: f64) {
        self.n += 1.0;
        self.sum += y;
        self.sumsq += y * y;
    }

    pub fn remove(&mut self, y: f64) {
        self.n -= 1.0;
        self.sum -= y;
        self.sumsq -= y * y;
    }

    pub fn merge(&mut self, other: &GaussStats) {
        self.n += other.n;
        self.sum += other.sum;
        self.sumsq += other.sumsq;
    }

    pub fn subtract(&mut self, other: &GaussStats) {
        self.n -= other.n;
        self.sum -= other.sum;
        self.sumsq -= other.sumsq;
    }

    /// Centered sum of squares, clamped against rounding.
    pub fn css(&self) -> f64 {
        if self.n <= 0.0 {
            return 0.0;
        }
        (self.sumsq - self.sum * self.sum / self.n).max(0.0)
    }

    /// Joint Gaussian log likelihood of the summarized observations.
    pub fn log_likelihood(&self, p: &GaussianParam) -> f64 {
        if self.n == 0.0 {
            return 0.0;
        }
        let quad = self.sumsq - 2.0 * p.mu * self.sum + self.n * p.mu * p.mu;
        -0.5 * self.n * (LN_2PI + p.sigma2.ln()) - quad / (2.0 * p.sigma2)
    }
}

/// Posterior NIG parameters given summarized observations.
fn nig_posterior(stats: &GaussStats, base: &NigBase) -> (f64, f64, f64, f64) {
    let k0 = base.kappa0();
    if stats.n == 0.0 {
        return (base.mu0, k0, base.shape, base.rate);
    }
    let kn = k0 + stats.n;
    let ybar = stats.sum / stats.n;
    let mu_n = (k0 * base.mu0 + stats.sum) / kn;
    let shape_n = base.shape + 0.5 * stats.n;
    let d = ybar - base.mu0;
    let rate_n = base.rate + 0.5 * stats.css() + 0.5 * k0 * stats.n * d * d / kn;
    (mu_n, kn, shape_n, rate_n)
}

/// Log of the joint marginal density of the summarized observations under
/// the NIG base, `log integral prod_j N(y_j | mu, s2) dNIG(mu, s2)`.
pub fn nig_log_marginal(stats: &GaussStats, base: &NigBase) -> f64 {
    if stats.n == 0.0 {
        return 0.0;
    }
    let k0 = base.kappa0();
    let (_, kn, shape_n, rate_n) = nig_posterior(stats, base);
    -0.5 * stats.n * LN_2PI + 0.5 * (k0.ln() - kn.ln()) + base.shape * base.rate.ln()
        - shape_n * rate_n.ln()
        + ln_gamma(shape_n)
        - ln_gamma(base.shape)
}

/// Joint marginal density of a point set under the NIG base. For a single
/// point this is the Student-t predictive of the conjugate family.
pub fn nig_marginal_density(points: &[f64], base: &NigBase) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::Data("nig_marginal_density: empty point set".into()));
    }
    if points.iter().any(|y| !y.is_finite()) {
        return Err(Error::Data("nig_marginal_density: non-finite input".into()));
    }
    Ok(nig_log_marginal(&GaussStats::from_values(points), base).exp())
}

/// Single-point log marginal (Student-t predictive), the hot path of the
/// seating updates.
pub fn nig_log_marginal1(y: f64, base: &NigBase) -> f64 {
    let stats = GaussStats { n: 1.0, sum: y, sumsq: y * y };
    nig_log_marginal(&stats, base)
}

/// Draw `(mu, s2)` from the NIG posterior given summarized observations;
/// with empty stats this is a prior draw.
pub fn nig_posterior_draw_stats<R: Rng + ?Sized>(
    stats: &GaussStats,
    base: &NigBase,
    rng: &mut R,
) -> GaussianParam {
    let (mu_n, kn, shape_n, rate_n) = nig_posterior(stats, base);
    // s2 ~ InvGamma(shape_n, rate_n) via the reciprocal of a Gamma draw.
    let g = Gamma::new(shape_n, 1.0 / rate_n).expect("valid gamma").sample(rng);
    let sigma2 = (1.0 / g).max(f64::MIN_POSITIVE);
    let mu = Normal::new(mu_n, (sigma2 / kn).sqrt()).expect("valid normal").sample(rng);
    GaussianParam { mu, sigma2 }
}

pub fn nig_posterior_draw<R: Rng + ?Sized>(
    points: &[f64],
    base: &NigBase,
    rng: &mut R,
) -> GaussianParam {
    nig_posterior_draw_stats(&GaussStats::from_values(points), base, rng)
}

/// First `count` stick-breaking weights of SB(concentration) plus the
/// residual mass `eps = 1 - sum(weights)`.
pub fn stick_breaking_weights<R: Rng + ?Sized>(
    concentration: f64,
    count: usize,
    rng: &mut R,
) -> Result<(Vec<f64>, f64)> {
    if !(concentration > 0.0 && concentration.is_finite()) {
        return Err(Error::Config(format!(
            "stick-breaking concentration must be positive, got {concentration}"
        )));
    }
    if count == 0 {
        return Err(Error::Config("stick-breaking count must be >= 1".into()));
    }
    let beta = Beta::new(1.0, concentration)
        .map_err(|e| Error::Config(format!("invalid Beta(1, {concentration}): {e}")))?;
    let mut weights = Vec::with_capacity(count);
    let mut remaining = 1.0f64;
    for _ in 0..count {
        let v: f64 = beta.sample(rng);
        weights.push(v * remaining);
        remaining *= 1.0 - v;
    }
    Ok((weights, remaining))
}

/// `P(K_n = t)` for t = 1..n, the table-count law of a CRP with the given
/// concentration, via the one-customer-at-a-time recursion.
pub fn crp_cluster_count_pmf(n: usize, concentration: f64) -> Vec<f64> {
    assert!(n >= 1, "crp_cluster_count_pmf requires n >= 1");
    assert!(concentration > 0.0, "concentration must be positive");
    let mut pmf = vec![1.0f64];
    for m in 1..n {
        let m = m as f64;
        let denom = m + concentration;
        let mut next = vec![0.0; pmf.len() + 1];
        for (t, &p) in pmf.iter().enumerate() {
            // existing table
            next[t] += p * m / denom;
            // new table
            next[t + 1] += p * concentration / denom;
        }
        pmf = next;
    }
    pmf
}

/// `integral N(y; mu_p, s2_p) N(y; mu_q, s2_q) dy = N(mu_p; mu_q, s2_p + s2_q)`.
pub fn normal_product_integral(p: &GaussianParam, q: &GaussianParam) -> f64 {
    GaussianParam { mu: q.mu, sigma2: p.sigma2 + q.sigma2 }.density(p.mu)
}

/// Weighted finite Gaussian mixture; weights sum to one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteMixture {
    weights: Vec<f64>,
    components: Vec<GaussianParam>,
}

impl FiniteMixture {
    pub fn new(weights: Vec<f64>, components: Vec<GaussianParam>) -> Result<Self> {
        if weights.len() != components.len() || weights.is_empty() {
            return Err(Error::Numerical(
                "mixture weights/components length mismatch or empty".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Numerical(format!(
                "mixture weights sum to {total}, expected 1 within 1e-12"
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Numerical("mixture weights must be finite and >= 0".into()));
        }
        if components.iter().any(|c| c.sigma2 <= 0.0 || !c.sigma2.is_finite()) {
            return Err(Error::Numerical("mixture variances must be positive".into()));
        }
        Ok(Self { weights, components })
    }

    /// Normalizes the weights before constructing.
    pub fn from_unnormalized(weights: Vec<f64>, components: Vec<GaussianParam>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::Numerical(format!("mixture weight total {total} not positive")));
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Self::new(weights, components)
    }

    pub fn single(component: GaussianParam) -> Self {
        Self { weights: vec![1.0], components: vec![component] }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[GaussianParam] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn log_density(&self, y: f64) -> f64 {
        let mut best = f64::NEG_INFINITY;
        let mut terms = Vec::with_capacity(self.len());
        for (w, c) in self.weights.iter().zip(&self.components) {
            if *w == 0.0 {
                continue;
            }
            let t = w.ln() + c.log_density(y);
            if t > best {
                best = t;
            }
            terms.push(t);
        }
        if !best.is_finite() {
            return f64::NEG_INFINITY;
        }
        best + terms.iter().map(|t| (t - best).exp()).sum::<f64>().ln()
    }

    pub fn density(&self, y: f64) -> f64 {
        self.log_density(y).exp()
    }

    pub fn cdf(&self, y: f64) -> f64 {
        self.weights
            .iter()
            .zip(&self.components)
            .map(|(w, c)| w * c.cdf(y))
            .sum()
    }

    pub fn mean(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.components)
            .map(|(w, c)| w * c.mu)
            .sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.weights
            .iter()
            .zip(&self.components)
            .map(|(w, c)| w * (c.sigma2 + (c.mu - m) * (c.mu - m)))
            .sum()
    }

    /// Exact third central moment (Gaussian components have zero third
    /// central moment, so only location offsets contribute).
    pub fn third_central_moment(&self) -> f64 {
        let m = self.mean();
        self.weights
            .iter()
            .zip(&self.components)
            .map(|(w, c)| {
                let d = c.mu - m;
                w * (d * d * d + 3.0 * d * c.sigma2)
            })
            .sum()
    }
}

/// Squared L2 distance between the densities of two finite Gaussian
/// mixtures, via the closed-form product integrals. Clamped at zero.
pub fn mixture_l2_distance_sq(a: &FiniteMixture, b: &FiniteMixture) -> f64 {
    let self_term = |m: &FiniteMixture| -> f64 {
        let mut acc = 0.0;
        for (wi, ci) in m.weights.iter().zip(&m.components) {
            for (wj, cj) in m.weights.iter().zip(&m.components) {
                acc += wi * wj * normal_product_integral(ci, cj);
            }
        }
        acc
    };
    let mut cross = 0.0;
    for (wi, ci) in a.weights.iter().zip(&a.components) {
        for (wj, cj) in b.weights.iter().zip(&b.components) {
            cross += wi * wj * normal_product_integral(ci, cj);
        }
    }
    (self_term(a) + self_term(b) - 2.0 * cross).max(0.0)
}

/// `log sum_i exp(x_i)` with the usual max shift.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let best = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !best.is_finite() {
        return best;
    }
    best + xs.iter().map(|x| (x - best).exp()).sum::<f64>().ln()
}

/// Draws an index proportionally to `exp(logw)`, by inverse CDF over the
/// max-shifted weights. Invariant under adding a constant to all entries.
pub fn sample_categorical_log<R: Rng + ?Sized>(rng: &mut R, logw: &[f64]) -> Result<usize> {
    let best = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !best.is_finite() {
        return Err(Error::Numerical(
            "categorical draw: all log weights are -inf (no admissible option)".into(),
        ));
    }
    let probs: Vec<f64> = logw.iter().map(|x| (x - best).exp()).collect();
    let total: f64 = probs.iter().sum();
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (idx, p) in probs.iter().enumerate() {
        if *p > 0.0 {
            last_positive = idx;
        }
        acc += p;
        if u < acc {
            return Ok(idx);
        }
    }
    Ok(last_positive)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn rng(seed: u64) -> ChaCha12Rng {
        ChaCha12Rng::seed_from_u64(seed)
    }

    /// Trapezoid quadrature of `f` on [lo, hi] with `n` nodes.
    fn trapezoid<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, n: usize) -> f64 {
        let h = (hi - lo) / (n - 1) as f64;
        let mut acc = 0.5 * (f(lo) + f(hi));
        for k in 1..n - 1 {
            acc += f(lo + h * k as f64);
        }
        acc * h
    }

    /// Brute 2D quadrature of the NIG marginal of a single point: integrate
    /// N(y; mu, s2) N(mu; mu0, lambda s2) InvGamma(s2; a, b) over (mu, s2).
    fn nig_marginal_quadrature(y: f64, base: &NigBase) -> f64 {
        let n_s2 = 4000;
        let n_mu = 2000;
        let (s2_lo, s2_hi) = (1e-4, 120.0);
        let h_s2 = (s2_hi - s2_lo) / (n_s2 - 1) as f64;
        let mut total = 0.0;
        for is in 0..n_s2 {
            let s2 = s2_lo + h_s2 * is as f64;
            let ig = (base.shape * base.rate.ln() - ln_gamma(base.shape)
                - (base.shape + 1.0) * s2.ln()
                - base.rate / s2)
                .exp();
            let sd_mu = (base.lambda * s2).sqrt();
            let (mu_lo, mu_hi) = (base.mu0 - 12.0 * sd_mu, base.mu0 + 12.0 * sd_mu);
            let kernel = GaussianParam { mu: base.mu0, sigma2: base.lambda * s2 };
            let inner = trapezoid(
                |mu| GaussianParam { mu, sigma2: s2 }.density(y) * kernel.density(mu),
                mu_lo,
                mu_hi,
                n_mu,
            );
            let w = if is == 0 || is == n_s2 - 1 { 0.5 } else { 1.0 };
            total += w * ig * inner;
        }
        total * h_s2
    }

    #[test]
    fn nig_marginal_singleton_matches_student_t() {
        let base = NigBase::default();
        // Student-t(df = 2a, loc = mu0, scale^2 = b (1 + lambda) / a) at zero.
        let expected = 1.0 / (2.0 * 22.0f64.sqrt());
        let got = nig_marginal_density(&[0.0], &base).unwrap();
        assert_abs_diff_eq!(got, expected, epsilon = 1e-12);
        assert_abs_diff_eq!(got, 0.1066, epsilon = 5e-5);
    }

    #[test]
    fn nig_marginal_singleton_matches_quadrature() {
        let base = NigBase::default();
        let got = nig_marginal_density(&[0.0], &base).unwrap();
        let quad = nig_marginal_quadrature(0.0, &base);
        assert_abs_diff_eq!(got, quad, epsilon = 2e-4);

        let base2 = NigBase::new(0.5, 2.0, 2.0, 1.5).unwrap();
        let got2 = nig_marginal_density(&[-0.7], &base2).unwrap();
        let quad2 = nig_marginal_quadrature(-0.7, &base2);
        assert_abs_diff_eq!(got2, quad2, epsilon = 2e-4);
    }

    #[test]
    fn nig_marginal_singleton_integrates_to_one() {
        let base = NigBase::default();
        let integral = trapezoid(
            |y| nig_marginal_density(&[y], &base).unwrap(),
            -60.0,
            60.0,
            240_001,
        );
        // Heavy-tailed predictive (df 2): the finite window carries the
        // truncation error, so the tolerance is looser than the grid error.
        assert_abs_diff_eq!(integral, 1.0, epsilon = 1e-2);
        let tighter = NigBase::new(0.0, 1.0, 5.0, 5.0).unwrap();
        let integral2 = trapezoid(
            |y| nig_marginal_density(&[y], &tighter).unwrap(),
            -60.0,
            60.0,
            240_001,
        );
        assert_abs_diff_eq!(integral2, 1.0, epsilon = 1e-4);
    }

    #[test]
    fn nig_marginal_pair_positively_correlated() {
        let base = NigBase::default();
        let joint = nig_marginal_density(&[0.0, 0.0], &base).unwrap();
        let single = nig_marginal_density(&[0.0], &base).unwrap();
        assert!(joint > single * single, "joint {joint} <= product {}", single * single);
    }

    #[test]
    fn nig_marginal_rejects_bad_input() {
        let base = NigBase::default();
        assert!(nig_marginal_density(&[], &base).is_err());
        assert!(nig_marginal_density(&[f64::NAN], &base).is_err());
        assert!(nig_marginal_density(&[f64::INFINITY], &base).is_err());
    }

    #[test]
    fn nig_prior_draw_sigma2_median() {
        // InvGamma(1, 1) median is 1 / ln 2.
        let base = NigBase::default();
        let mut r = rng(7);
        let mut draws: Vec<f64> = (0..100_000)
            .map(|_| nig_posterior_draw(&[], &base, &mut r).sigma2)
            .collect();
        draws.sort_by(f64::total_cmp);
        let median = draws[draws.len() / 2];
        assert_abs_diff_eq!(median, 1.0 / std::f64::consts::LN_2, epsilon = 0.02);
    }

    #[test]
    fn nig_posterior_concentrates_at_sample_mean() {
        let base = NigBase::default();
        let points = vec![0.0; 1_000_000];
        let mut r = rng(8);
        let draw = nig_posterior_draw(&points, &base, &mut r);
        assert!(draw.mu.abs() < 0.01, "mu = {}", draw.mu);
    }

    #[test]
    fn nig_posterior_mean_matches_conjugate_formula() {
        let base = NigBase::default();
        let points = vec![5.0; 100];
        let k0 = base.kappa0();
        let mu_n = 100.0 * 5.0 / (k0 + 100.0);
        let mut r = rng(9);
        let m = 20_000;
        let draws: Vec<f64> = (0..m)
            .map(|_| nig_posterior_draw(&points, &base, &mut r).mu)
            .collect();
        let mean = draws.iter().sum::<f64>() / m as f64;
        let sd = (draws.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / m as f64).sqrt();
        let se = sd / (m as f64).sqrt();
        assert!(
            (mean - mu_n).abs() < 3.0 * se,
            "posterior mu mean {mean} vs conjugate {mu_n} (3se = {})",
            3.0 * se
        );
    }

    #[test]
    fn stick_breaking_telescopes() {
        let mut r = rng(10);
        let (w, eps) = stick_breaking_weights(1.0, 10, &mut r).unwrap();
        assert_eq!(w.len(), 10);
        assert_abs_diff_eq!(w.iter().sum::<f64>() + eps, 1.0, epsilon = 1e-12);
        assert!(w.iter().all(|x| *x > 0.0 && *x < 1.0));
        assert!(eps > 0.0 && eps < 1.0);
    }

    #[test]
    fn stick_breaking_residual_mean() {
        // E[eps_M] = (alpha / (1 + alpha))^M.
        let alpha = 1.0;
        let m = 12;
        let reps = 10_000;
        let mut r = rng(11);
        let draws: Vec<f64> = (0..reps)
            .map(|_| stick_breaking_weights(alpha, m, &mut r).unwrap().1)
            .collect();
        let mean = draws.iter().sum::<f64>() / reps as f64;
        let expected = (alpha / (1.0 + alpha)).powi(m as i32);
        let sd = (draws.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / reps as f64).sqrt();
        let se = sd / (reps as f64).sqrt();
        assert!(
            (mean - expected).abs() < 3.0 * se,
            "residual mean {mean} vs {expected} (3se = {})",
            3.0 * se
        );
    }

    #[test]
    fn stick_breaking_degenerate_first_weight() {
        let mut r = rng(12);
        let mut below = 0;
        for _ in 0..1000 {
            let (w, _) = stick_breaking_weights(1e-9, 1, &mut r).unwrap();
            if w[0] < 0.999 {
                below += 1;
            }
        }
        assert!(below <= 2, "Beta(1, ~0) should put the first stick near one");
    }

    /// Exhaustive CRP seating enumeration: distribution of the table count
    /// after n sequential customers.
    fn crp_count_by_enumeration(n: usize, alpha: f64) -> Vec<f64> {
        fn recurse(counts: &mut Vec<usize>, left: usize, alpha: f64, prob: f64, out: &mut Vec<f64>) {
            if left == 0 {
                out[counts.len() - 1] += prob;
                return;
            }
            let total: usize = counts.iter().sum();
            let denom = total as f64 + alpha;
            for i in 0..counts.len() {
                counts[i] += 1;
                recurse(counts, left - 1, alpha, prob * counts[i].saturating_sub(1) as f64 / denom, out);
                counts[i] -= 1;
            }
            counts.push(1);
            recurse(counts, left - 1, alpha, prob * alpha / denom, out);
            counts.pop();
        }
        let mut out = vec![0.0; n];
        let mut counts = vec![1usize];
        recurse(&mut counts, n - 1, alpha, 1.0, &mut out);
        out
    }

    #[test]
    fn crp_pmf_small_cases() {
        let pmf2 = crp_cluster_count_pmf(2, 1.0);
        assert_abs_diff_eq!(pmf2[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(pmf2[1], 0.5, epsilon = 1e-15);

        let pmf3 = crp_cluster_count_pmf(3, 1.0);
        assert_abs_diff_eq!(pmf3[0], 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(pmf3[1], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(pmf3[2], 1.0 / 6.0, epsilon = 1e-15);
    }

    #[test]
    fn crp_pmf_matches_enumeration_and_sums_to_one() {
        for &alpha in &[0.3, 1.0, 5.0] {
            for n in 1..=6 {
                let pmf = crp_cluster_count_pmf(n, alpha);
                assert_abs_diff_eq!(pmf.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
                let enumerated = crp_count_by_enumeration(n, alpha);
                for (t, (&a, &b)) in pmf.iter().zip(&enumerated).enumerate() {
                    assert_abs_diff_eq!(a, b, epsilon = 1e-12);
                    let _ = t;
                }
            }
        }
    }

    #[test]
    fn normal_product_integral_known_values() {
        let std = GaussianParam { mu: 0.0, sigma2: 1.0 };
        let shifted = GaussianParam { mu: 2.0, sigma2: 1.0 };
        assert_abs_diff_eq!(
            normal_product_integral(&std, &std),
            1.0 / (4.0 * std::f64::consts::PI).sqrt(),
            epsilon = 1e-12
        );
        let expected = trapezoid(|y| std.density(y) * shifted.density(y), -30.0, 30.0, 100_000);
        assert_abs_diff_eq!(normal_product_integral(&shifted, &std), expected, epsilon = 1e-9);
        assert_abs_diff_eq!(normal_product_integral(&shifted, &std), 0.10378, epsilon = 5e-6);
    }

    #[test]
    fn normal_product_integral_symmetric() {
        let mut r = rng(13);
        for _ in 0..50 {
            let p = GaussianParam { mu: r.random::<f64>() * 8.0 - 4.0, sigma2: 0.1 + r.random::<f64>() * 3.0 };
            let q = GaussianParam { mu: r.random::<f64>() * 8.0 - 4.0, sigma2: 0.1 + r.random::<f64>() * 3.0 };
            assert_abs_diff_eq!(
                normal_product_integral(&p, &q),
                normal_product_integral(&q, &p),
                epsilon = 1e-14
            );
        }
    }

    fn random_mixture(r: &mut ChaCha12Rng, max_comps: usize) -> FiniteMixture {
        let k = 1 + (r.random::<f64>() * max_comps as f64) as usize;
        let mut w: Vec<f64> = (0..k).map(|_| r.random::<f64>() + 0.05).collect();
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= total);
        let comps = (0..k)
            .map(|_| GaussianParam {
                mu: r.random::<f64>() * 10.0 - 5.0,
                sigma2: 0.1 + r.random::<f64>() * 3.9,
            })
            .collect();
        FiniteMixture::new(w, comps).unwrap()
    }

    fn l2_sq_quadrature(a: &FiniteMixture, b: &FiniteMixture) -> f64 {
        trapezoid(
            |y| {
                let d = a.density(y) - b.density(y);
                d * d
            },
            -30.0,
            30.0,
            100_000,
        )
    }

    #[test]
    fn l2_distance_identical_is_zero() {
        let mut r = rng(14);
        let m = random_mixture(&mut r, 4);
        assert_abs_diff_eq!(mixture_l2_distance_sq(&m, &m), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn l2_distance_point_mixtures() {
        let a = FiniteMixture::single(GaussianParam { mu: 0.0, sigma2: 1.0 });
        let b = FiniteMixture::single(GaussianParam { mu: 2.0, sigma2: 1.0 });
        let expected = 2.0 * (1.0 - (-1.0f64).exp()) / (4.0 * std::f64::consts::PI).sqrt();
        assert_abs_diff_eq!(mixture_l2_distance_sq(&a, &b), expected, epsilon = 1e-12);
        assert_abs_diff_eq!(expected, 0.35664, epsilon = 5e-5);
        assert_abs_diff_eq!(mixture_l2_distance_sq(&a, &b), l2_sq_quadrature(&a, &b), epsilon = 1e-9);
    }

    #[test]
    fn l2_distance_matches_quadrature_random() {
        let mut r = rng(15);
        for _ in 0..25 {
            let a = random_mixture(&mut r, 4);
            let b = random_mixture(&mut r, 4);
            let closed = mixture_l2_distance_sq(&a, &b);
            let quad = l2_sq_quadrature(&a, &b);
            assert_abs_diff_eq!(closed, quad, epsilon = 1e-6);
        }
    }

    #[test]
    fn l2_sqrt_triangle_inequality() {
        let mut r = rng(16);
        for _ in 0..200 {
            let a = random_mixture(&mut r, 3);
            let b = random_mixture(&mut r, 3);
            let c = random_mixture(&mut r, 3);
            let dab = mixture_l2_distance_sq(&a, &b).sqrt();
            let dbc = mixture_l2_distance_sq(&b, &c).sqrt();
            let dac = mixture_l2_distance_sq(&a, &c).sqrt();
            assert!(dac <= dab + dbc + 1e-9, "triangle violated: {dac} > {dab} + {dbc}");
        }
    }

    #[test]
    fn mixture_moments_match_quadrature() {
        let mut r = rng(17);
        for _ in 0..10 {
            let m = random_mixture(&mut r, 4);
            let mean_q = trapezoid(|y| y * m.density(y), -30.0, 30.0, 100_000);
            let var_q = trapezoid(
                |y| (y - m.mean()) * (y - m.mean()) * m.density(y),
                -30.0,
                30.0,
                100_000,
            );
            assert_abs_diff_eq!(m.mean(), mean_q, epsilon = 1e-8);
            assert_abs_diff_eq!(m.variance(), var_q, epsilon = 1e-8);
        }
    }

    #[test]
    fn mixture_rejects_bad_weights() {
        let comp = vec![GaussianParam { mu: 0.0, sigma2: 1.0 }; 2];
        assert!(FiniteMixture::new(vec![0.6, 0.6], comp.clone()).is_err());
        assert!(FiniteMixture::new(vec![0.5], comp).is_err());
    }

    #[test]
    fn categorical_log_shift_invariant() {
        let logw = vec![-3.0, -1.0, -2.5, -0.5];
        let shifted: Vec<f64> = logw.iter().map(|x| x + 123.456).collect();
        let mut r1 = rng(18);
        let mut r2 = rng(18);
        for _ in 0..2000 {
            let a = sample_categorical_log(&mut r1, &logw).unwrap();
            let b = sample_categorical_log(&mut r2, &shifted).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn categorical_log_all_neg_inf_errors() {
        let mut r = rng(19);
        assert!(sample_categorical_log(&mut r, &[f64::NEG_INFINITY; 3]).is_err());
    }

    #[test]
    fn categorical_log_frequencies() {
        let logw = vec![0.0f64.ln(), 0.2f64.ln(), 0.8f64.ln()];
        let mut r = rng(20);
        let mut counts = [0usize; 3];
        let n = 100_000;
        for _ in 0..n {
            counts[sample_categorical_log(&mut r, &logw).unwrap()] += 1;
        }
        assert_eq!(counts[0], 0);
        let p1 = counts[1] as f64 / n as f64;
        let se = (0.2f64 * 0.8 / n as f64).sqrt();
        assert!((p1 - 0.2).abs() < 4.0 * se, "p1 = {p1}");
    }
}
