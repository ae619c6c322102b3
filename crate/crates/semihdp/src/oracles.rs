//! Closed-form prior quantities used as ground truth when validating the
//! sampler: Dirichlet-process EPPFs, the degenerate-regime partially
//! exchangeable partition probability, prior moments and covariances of the
//! random measures, and the two-customer tie probability.

use crate::dist::crp_cluster_count_pmf;
use crate::error::{Error, Result};
use statrs::function::gamma::ln_gamma;

/// EPPF of a Dirichlet process with the given concentration, evaluated at a
/// block-size configuration: `alpha^k Gamma(alpha) / Gamma(alpha + N) *
/// prod_j Gamma(n_j)`, computed in log space.
pub fn eppf_dp(frequencies: &[usize], alpha: f64) -> f64 {
    assert!(!frequencies.is_empty(), "eppf_dp needs at least one block");
    assert!(frequencies.iter().all(|n| *n >= 1), "block sizes must be >= 1");
    assert!(alpha > 0.0);
    let k = frequencies.len() as f64;
    let n: usize = frequencies.iter().sum();
    let mut log = k * alpha.ln() + ln_gamma(alpha) - ln_gamma(alpha + n as f64);
    for &nj in frequencies {
        log += ln_gamma(nj as f64);
    }
    log.exp()
}

/// Partition configuration of two samples: per-group exclusive block sizes
/// and aligned shared block sizes, with the prior co-assignment probability.
#[derive(Clone, Debug)]
pub struct PeppfInput {
    pub n1: Vec<usize>,
    pub n2: Vec<usize>,
    pub q1: Vec<usize>,
    pub q2: Vec<usize>,
    pub alpha: f64,
    pub pi1: f64,
}

impl PeppfInput {
    pub fn validate(&self) -> Result<()> {
        if self.q1.len() != self.q2.len() {
            return Err(Error::Config("shared frequency vectors differ in length".into()));
        }
        if self
            .n1
            .iter()
            .chain(&self.n2)
            .chain(&self.q1)
            .chain(&self.q2)
            .any(|n| *n == 0)
        {
            return Err(Error::Config("all frequencies must be >= 1".into()));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::Config("alpha must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.pi1) {
            return Err(Error::Config("pi1 must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Joint partition probability of two samples in the degenerate regime where
/// the centering measure carries no shared atoms: a co-assignment mixture of
/// the fully exchangeable EPPF and the independent per-group EPPFs, the
/// latter vanishing whenever a shared block exists.
pub fn peppf_degenerate(input: &PeppfInput) -> Result<f64> {
    input.validate()?;
    let k0 = input.q1.len();
    let mut pooled: Vec<usize> = input.n1.clone();
    pooled.extend(&input.n2);
    pooled.extend(input.q1.iter().zip(&input.q2).map(|(a, b)| a + b));
    let together = eppf_dp(&pooled, input.alpha);
    let apart = if k0 == 0 {
        let mut g1 = input.n1.clone();
        g1.extend(&input.q1);
        let mut g2 = input.n2.clone();
        g2.extend(&input.q2);
        eppf_dp(&g1, input.alpha) * eppf_dp(&g2, input.alpha)
    } else {
        0.0
    };
    Ok(input.pi1 * together + (1.0 - input.pi1) * apart)
}

/// Prior covariance `cov(F_1(A), F_2(B))` when both base measures coincide:
/// `(1 - kappa)^2 / (1 + gamma) * (G0(A and B) - G0(A) G0(B))`.
pub fn semihdp_covariance(
    kappa: f64,
    gamma: f64,
    g0_a: f64,
    g0_b: f64,
    g0_ab: f64,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&kappa) || !(gamma > 0.0) {
        return Err(Error::Config(format!("invalid (kappa={kappa}, gamma={gamma})")));
    }
    for (name, v) in [("G0(A)", g0_a), ("G0(B)", g0_b), ("G0(A and B)", g0_ab)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Config(format!("{name} = {v} outside [0, 1]")));
        }
    }
    if g0_ab > g0_a.min(g0_b) + 1e-15 {
        return Err(Error::Config(
            "G0(A and B) exceeds min(G0(A), G0(B))".into(),
        ));
    }
    Ok((1.0 - kappa).powi(2) / (1.0 + gamma) * (g0_ab - g0_a * g0_b))
}

/// Prior n-th moment `E[F_1(A)^n]` when both base measures coincide, via the
/// two-level table-count mixture: outer CRP at `alpha`, inner CRP at `gamma`
/// over the shared-area draws.
pub fn semihdp_moment(n: usize, kappa: f64, alpha: f64, gamma: f64, g0_a: f64) -> f64 {
    assert!(n >= 1);
    assert!((0.0..=1.0).contains(&kappa));
    assert!(alpha > 0.0 && gamma > 0.0);
    assert!((0.0..=1.0).contains(&g0_a));
    let outer = crp_cluster_count_pmf(n, alpha);
    let mut total = 0.0;
    for (t_idx, &p_t) in outer.iter().enumerate() {
        let t = t_idx + 1;
        let mut sum_h = 0.0;
        for h in 0..=t {
            let choose = binomial(t, h);
            let weight = choose * kappa.powi((t - h) as i32) * (1.0 - kappa).powi(h as i32);
            if weight == 0.0 {
                continue;
            }
            // E[G-tilde(A)^h]; the empty product is one, giving G0(A)^t.
            let inner = if h == 0 {
                g0_a.powi(t as i32)
            } else {
                crp_cluster_count_pmf(h, gamma)
                    .iter()
                    .enumerate()
                    .map(|(m_idx, &p_m)| g0_a.powi((t - h + m_idx + 1) as i32) * p_m)
                    .sum()
            };
            sum_h += weight * inner;
        }
        total += p_t * sum_h;
    }
    total
}

fn binomial(n: usize, k: usize) -> f64 {
    (ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)).exp()
}

/// Probability that the first customers of two groups assigned to distinct
/// restaurants share a dish: `(1 - kappa)^2 / (1 + gamma)`.
pub fn tie_probability(kappa: f64, gamma: f64) -> f64 {
    assert!((0.0..=1.0).contains(&kappa));
    assert!(gamma > 0.0);
    (1.0 - kappa).powi(2) / (1.0 + gamma)
}

/// All set partitions of `{0, .., n-1}` as block-label vectors in canonical
/// (restricted growth) form. Enumeration oracle for the EPPF identities.
pub fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    fn recurse(labels: &mut Vec<usize>, max_used: usize, n: usize, out: &mut Vec<Vec<usize>>) {
        if labels.len() == n {
            out.push(labels.clone());
            return;
        }
        for l in 0..=max_used + 1 {
            labels.push(l);
            recurse(labels, max_used.max(l), n, out);
            labels.pop();
        }
    }
    let mut out = Vec::new();
    if n == 0 {
        return out;
    }
    let mut labels = vec![0usize];
    recurse(&mut labels, 0, n, &mut out);
    out
}

/// Block sizes of a label vector.
pub fn block_sizes(labels: &[usize]) -> Vec<usize> {
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; k];
    for &l in labels {
        sizes[l] += 1;
    }
    sizes
}
