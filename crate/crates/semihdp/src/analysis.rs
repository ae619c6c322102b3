//! Chain post-processing: homogeneity Bayes factors, partition posteriors
//! and loss-based point estimates, similarity matrices, density estimates
//! with credible bands, density functionals, and an autocorrelation-based
//! effective sample size.

use crate::dist::FiniteMixture;
use crate::error::{Error, Result};
use crate::records::ChainRecord;
use crate::state::Partition;

/// Empirical distribution over canonical partitions.
#[derive(Clone, Debug)]
pub struct PartitionPosterior {
    /// `(partition, probability)` in first-visit order.
    pub probs: Vec<(Partition, f64)>,
    pub sample_count: usize,
}

impl PartitionPosterior {
    pub fn probability_of(&self, p: &Partition) -> f64 {
        self.probs
            .iter()
            .find(|(q, _)| q == p)
            .map_or(0.0, |(_, prob)| *prob)
    }

    pub fn mode(&self) -> &Partition {
        &self
            .probs
            .iter()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("nonempty posterior")
            .0
    }
}

/// Pointwise posterior density summary on a grid.
#[derive(Clone, Debug)]
pub struct DensitySummary {
    pub grid: Vec<f64>,
    pub mean: Vec<f64>,
    pub lower95: Vec<f64>,
    pub upper95: Vec<f64>,
}

/// Density functionals of one mixture draw.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Functionals {
    pub mean: f64,
    pub variance: f64,
    pub pearson_skew: f64,
    pub mode_skew: f64,
    pub pass_prob: f64,
}

/// Posterior odds of `c_i = c_j` against the supplied prior odds. Returns
/// infinity when the event holds in every record and zero when it never
/// does.
pub fn bayes_factor_pair(
    records: &[ChainRecord],
    i: usize,
    j: usize,
    prior_odds: f64,
) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::Data("bayes_factor_pair: no records".into()));
    }
    if i == j {
        return Err(Error::Config("bayes_factor_pair: i and j must differ".into()));
    }
    if !(prior_odds > 0.0) {
        return Err(Error::Config("prior odds must be positive".into()));
    }
    let hits = records.iter().filter(|r| r.c[i] == r.c[j]).count();
    let p = hits as f64 / records.len() as f64;
    if p >= 1.0 {
        return Ok(f64::INFINITY);
    }
    if p <= 0.0 {
        return Ok(0.0);
    }
    Ok(p / (1.0 - p) / prior_odds)
}

/// Posterior co-assignment probability estimate for one pair.
pub fn coassignment_probability(records: &[ChainRecord], i: usize, j: usize) -> f64 {
    let hits = records.iter().filter(|r| r.c[i] == r.c[j]).count();
    hits as f64 / records.len() as f64
}

/// Tally of canonical partitions across records.
pub fn partition_posterior(records: &[ChainRecord]) -> Result<PartitionPosterior> {
    if records.is_empty() {
        return Err(Error::Data("partition_posterior: no records".into()));
    }
    let mut order: Vec<Partition> = Vec::new();
    let mut counts: std::collections::HashMap<Partition, usize> = Default::default();
    for rec in records {
        let p = rec.canonical();
        if !counts.contains_key(&p) {
            order.push(p.clone());
        }
        *counts.entry(p).or_insert(0) += 1;
    }
    let n = records.len() as f64;
    Ok(PartitionPosterior {
        probs: order
            .into_iter()
            .map(|p| {
                let c = counts[&p];
                (p, c as f64 / n)
            })
            .collect(),
        sample_count: records.len(),
    })
}

/// Posterior similarity matrix `[P(c_i = c_j | data)]`: symmetric with a
/// unit diagonal.
pub fn similarity_matrix(records: &[ChainRecord]) -> Result<Vec<Vec<f64>>> {
    if records.is_empty() {
        return Err(Error::Data("similarity_matrix: no records".into()));
    }
    let n_groups = records[0].c.len();
    let mut matrix = vec![vec![0.0f64; n_groups]; n_groups];
    for rec in records {
        for i in 0..n_groups {
            for j in i..n_groups {
                if rec.c[i] == rec.c[j] {
                    matrix[i][j] += 1.0;
                }
            }
        }
    }
    let n = records.len() as f64;
    for i in 0..n_groups {
        for j in i..n_groups {
            matrix[i][j] /= n;
            matrix[j][i] = matrix[i][j];
        }
    }
    Ok(matrix)
}

/// Loss functions for the partition point estimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PartitionLoss {
    Binder,
    VariationOfInformation,
}

fn binder_expected_loss(candidate: &Partition, similarity: &[Vec<f64>]) -> f64 {
    let n = similarity.len();
    let mut loss = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let p = similarity[i][j];
            loss += if candidate.same_block(i, j) { 1.0 - p } else { p };
        }
    }
    loss
}

fn vi_distance(a: &Partition, b: &Partition) -> f64 {
    let n = a.labels().len() as f64;
    let ka = a.n_blocks();
    let kb = b.n_blocks();
    let mut joint = vec![vec![0.0f64; kb]; ka];
    for (&la, &lb) in a.labels().iter().zip(b.labels()) {
        joint[la][lb] += 1.0;
    }
    let mut ha = 0.0;
    let mut hb = 0.0;
    let mut mutual = 0.0;
    let row: Vec<f64> = joint.iter().map(|r| r.iter().sum()).collect();
    let col: Vec<f64> = (0..kb).map(|j| joint.iter().map(|r| r[j]).sum()).collect();
    for &x in &row {
        if x > 0.0 {
            ha -= x / n * (x / n).ln();
        }
    }
    for &x in &col {
        if x > 0.0 {
            hb -= x / n * (x / n).ln();
        }
    }
    for (ia, r) in joint.iter().enumerate() {
        for (ib, &x) in r.iter().enumerate() {
            if x > 0.0 {
                mutual += x / n * ((x / n) / (row[ia] / n * col[ib] / n)).ln();
            }
        }
    }
    ha + hb - 2.0 * mutual
}

/// Partition minimizing the Monte Carlo posterior expected loss, searched
/// over the partitions visited by the chain; ties break toward the first
/// visited.
pub fn point_partition(records: &[ChainRecord], loss: PartitionLoss) -> Result<Partition> {
    let posterior = partition_posterior(records)?;
    let best = match loss {
        PartitionLoss::Binder => {
            let sim = similarity_matrix(records)?;
            argmin_by(&posterior.probs, |candidate| binder_expected_loss(candidate, &sim))
        }
        PartitionLoss::VariationOfInformation => argmin_by(&posterior.probs, |candidate| {
            posterior
                .probs
                .iter()
                .map(|(p, prob)| prob * vi_distance(candidate, p))
                .sum()
        }),
    };
    Ok(best)
}

fn argmin_by<F: Fn(&Partition) -> f64>(probs: &[(Partition, f64)], f: F) -> Partition {
    let mut best = &probs[0].0;
    let mut best_loss = f(best);
    for (candidate, _) in &probs[1..] {
        let loss = f(candidate);
        if loss < best_loss {
            best = candidate;
            best_loss = loss;
        }
    }
    best.clone()
}

/// Expected Binder loss of a candidate partition under the records.
pub fn binder_loss_of(records: &[ChainRecord], candidate: &Partition) -> Result<f64> {
    Ok(binder_expected_loss(candidate, &similarity_matrix(records)?))
}

/// Pointwise posterior mean and central 95% band of the density of `group`
/// (0-based) over the stored mixture snapshots.
pub fn density_summary(
    records: &[ChainRecord],
    group: usize,
    grid: &[f64],
) -> Result<DensitySummary> {
    if records.is_empty() {
        return Err(Error::Data("density_summary: no records".into()));
    }
    let mixtures: Vec<FiniteMixture> = records
        .iter()
        .map(|rec| rec.group_mixture(group))
        .collect::<Result<_>>()?;
    let mut mean = Vec::with_capacity(grid.len());
    let mut lower = Vec::with_capacity(grid.len());
    let mut upper = Vec::with_capacity(grid.len());
    let mut column = vec![0.0f64; mixtures.len()];
    for &x in grid {
        for (slot, mix) in column.iter_mut().zip(&mixtures) {
            *slot = mix.density(x);
        }
        mean.push(column.iter().sum::<f64>() / column.len() as f64);
        let mut sorted = column.clone();
        sorted.sort_by(f64::total_cmp);
        lower.push(quantile_sorted(&sorted, 0.025));
        upper.push(quantile_sorted(&sorted, 0.975));
    }
    Ok(DensitySummary { grid: grid.to_vec(), mean, lower95: lower, upper95: upper })
}

/// Linear-interpolation quantile of an ascending slice.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if lo + 1 >= n {
        sorted[n - 1]
    } else {
        sorted[lo] + (sorted[lo + 1] - sorted[lo]) * frac
    }
}

/// Mode of the mixture density: coarse grid over the mean plus/minus eight
/// standard deviations, refined by golden-section search.
pub fn mixture_mode(mix: &FiniteMixture) -> f64 {
    let sd = mix.variance().sqrt().max(1e-9);
    let lo = mix.mean() - 8.0 * sd;
    let hi = mix.mean() + 8.0 * sd;
    let n = 4001;
    let step = (hi - lo) / (n - 1) as f64;
    let mut best_idx = 0usize;
    let mut best = f64::NEG_INFINITY;
    for k in 0..n {
        let x = lo + step * k as f64;
        let d = mix.log_density(x);
        if d > best {
            best = d;
            best_idx = k;
        }
    }
    let mut a = lo + step * best_idx.saturating_sub(1) as f64;
    let mut b = lo + step * (best_idx + 1).min(n - 1) as f64;
    let phi = (5.0f64.sqrt() - 1.0) / 2.0;
    while b - a > 1e-10 {
        let x1 = b - phi * (b - a);
        let x2 = a + phi * (b - a);
        if mix.log_density(x1) < mix.log_density(x2) {
            a = x1;
        } else {
            b = x2;
        }
    }
    0.5 * (a + b)
}

/// Mean, variance, moment skewness, mode skewness `1 - 2 F(mode)`, and the
/// upper-tail probability past `pass_threshold`, all in closed form except
/// the mode search.
pub fn density_functionals(mix: &FiniteMixture, pass_threshold: f64) -> Functionals {
    let mean = mix.mean();
    let variance = mix.variance();
    let third = mix.third_central_moment();
    let pearson_skew = third / variance.powf(1.5);
    let mode = mixture_mode(mix);
    let mode_skew = 1.0 - 2.0 * mix.cdf(mode);
    let pass_prob = 1.0 - mix.cdf(pass_threshold);
    Functionals { mean, variance, pearson_skew, mode_skew, pass_prob }
}

/// Posterior means of the functionals of `group`'s density across records.
pub fn functional_means(
    records: &[ChainRecord],
    group: usize,
    pass_threshold: f64,
) -> Result<Functionals> {
    if records.is_empty() {
        return Err(Error::Data("functional_means: no records".into()));
    }
    let mut acc = Functionals {
        mean: 0.0,
        variance: 0.0,
        pearson_skew: 0.0,
        mode_skew: 0.0,
        pass_prob: 0.0,
    };
    for rec in records {
        let f = density_functionals(&rec.group_mixture(group)?, pass_threshold);
        acc.mean += f.mean;
        acc.variance += f.variance;
        acc.pearson_skew += f.pearson_skew;
        acc.mode_skew += f.mode_skew;
        acc.pass_prob += f.pass_prob;
    }
    let n = records.len() as f64;
    acc.mean /= n;
    acc.variance /= n;
    acc.pearson_skew /= n;
    acc.mode_skew /= n;
    acc.pass_prob /= n;
    Ok(acc)
}

/// Effective sample size of the population-cluster-count series, by Geyer's
/// initial positive sequence; a constant series returns the record count.
pub fn ess_population_clusters(records: &[ChainRecord]) -> Result<f64> {
    if records.len() < 10 {
        return Err(Error::Data("ess needs at least 10 records".into()));
    }
    let series: Vec<f64> = records.iter().map(|r| r.n_population_clusters() as f64).collect();
    Ok(ess_series(&series))
}

/// Initial-positive-sequence ESS of a scalar series.
pub fn ess_series(series: &[f64]) -> f64 {
    let n = series.len();
    let nf = n as f64;
    let mean = series.iter().sum::<f64>() / nf;
    let gamma0 = series.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / nf;
    if gamma0 <= 0.0 {
        return nf;
    }
    let acov = |lag: usize| -> f64 {
        series[..n - lag]
            .iter()
            .zip(&series[lag..])
            .map(|(a, b)| (a - mean) * (b - mean))
            .sum::<f64>()
            / nf
    };
    // sigma^2 = -gamma0 + 2 * sum of positive consecutive pair sums.
    let mut sigma2 = -gamma0;
    let mut lag = 0;
    while lag + 1 < n {
        let pair = acov(lag) + acov(lag + 1);
        if pair <= 0.0 {
            break;
        }
        sigma2 += 2.0 * pair;
        lag += 2;
    }
    let floor = gamma0 / nf;
    (nf * gamma0 / sigma2.max(floor)).max(1.0)
}
