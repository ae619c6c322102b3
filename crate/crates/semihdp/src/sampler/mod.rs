//! The marginal sampler: systematic sweeps over seating, shared-table
//! allocation, dish values, area flags, kappa, the assignment simplex, then
//! fresh conditional mixture draws feeding the restaurant-assignment update,
//! followed by relabeling and pseudoprior injection.

pub mod fdraw;
pub mod pseudoprior;
pub mod relabel;
pub mod updates;

use crate::dist::FiniteMixture;
use crate::error::{Error, Result};
use crate::records::{unique_value_counts, ChainRecord, RestaurantMixture};
use crate::state::{canonical_partition, init_state, ChainState, Dataset, HyperParams};
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use fdraw::{draw_f, draw_f_with, DrawnMixture, SharedBaseDraw};
pub use pseudoprior::{pseudoprior_collect, pseudoprior_inject, PseudopriorPool};
pub use relabel::relabel;
pub use updates::{
    update_c_gibbs, update_c_metropolised, update_h, update_kappa, update_omega, update_s,
    update_t, update_values, ProposalKind,
};

/// Which kernel drives the restaurant-assignment update.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CUpdateMode {
    Gibbs,
    MetropolisedUniform,
    MetropolisedL2,
}

impl CUpdateMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            CUpdateMode::Gibbs => "gibbs",
            CUpdateMode::MetropolisedUniform => "metropolised-uniform",
            CUpdateMode::MetropolisedL2 => "metropolised-l2",
        }
    }
}

impl std::str::FromStr for CUpdateMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gibbs" => Ok(CUpdateMode::Gibbs),
            "metropolised-uniform" => Ok(CUpdateMode::MetropolisedUniform),
            "metropolised-l2" => Ok(CUpdateMode::MetropolisedL2),
            other => Err(Error::Config(format!(
                "unknown c-update mode '{other}' (expected gibbs, metropolised-uniform, or \
                 metropolised-l2)"
            ))),
        }
    }
}

/// Chain schedule and sampler switches.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub n_burnin: usize,
    pub n_iter: usize,
    pub thin: usize,
    pub c_update_mode: CUpdateMode,
    pub pseudoprior_pool_size: usize,
    pub seed: u64,
}

impl Default for SamplerConfig {
    /// Desk-scale schedule: 2,000 burn-in plus 10,000 kept-phase sweeps at
    /// thinning 5.
    fn default() -> Self {
        Self {
            n_burnin: 2000,
            n_iter: 10_000,
            thin: 5,
            c_update_mode: CUpdateMode::Gibbs,
            pseudoprior_pool_size: 500,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 {
            return Err(Error::Config("thin must be >= 1".into()));
        }
        Ok(())
    }
}

/// Aggregate counters of one chain run.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct RunStats {
    pub sweeps: usize,
    pub mixture_draws: usize,
    pub max_trunc_error: f64,
    pub trunc_violations: usize,
    pub assignment_moves: usize,
    pub assignment_proposals: usize,
    pub h_merges: usize,
}

fn build_record(
    sweep: usize,
    state: &ChainState,
    restaurants: Vec<RestaurantMixture>,
    trunc_error: f64,
) -> ChainRecord {
    let (group_unique, shared_unique) = unique_value_counts(state);
    let partition = canonical_partition(&state.c);
    ChainRecord {
        iter: sweep as u64,
        c: state.c.iter().map(|r| r + 1).collect(),
        kappa: state.kappa,
        h0: state.h0(),
        h_r: (0..state.n_restaurants()).map(|r| state.restaurants[r].live_table_count()).collect(),
        partition: partition.labels().iter().map(|l| l + 1).collect(),
        shared_unique,
        group_unique,
        trunc_error,
        restaurants,
    }
}

/// One full sweep; returns the sweep's materialized mixtures for the record.
#[allow(clippy::too_many_arguments)]
fn full_sweep<R: Rng + ?Sized>(
    state: &mut ChainState,
    data: &Dataset,
    hyper: &HyperParams,
    config: &SamplerConfig,
    stats: &mut RunStats,
    rng: &mut R,
) -> Result<(Vec<FiniteMixture>, Vec<RestaurantMixture>, f64)> {
    updates::update_s(state, data, hyper, rng)?;
    updates::update_t(state, hyper, rng)?;
    updates::update_values(state, hyper, rng);
    stats.h_merges += updates::update_h(state, hyper, rng)?;
    updates::update_kappa(state, hyper, rng);
    updates::update_omega(state, hyper, rng);

    let mut shared = SharedBaseDraw::materialize(state, hyper, rng);
    let n_rest = state.n_restaurants();
    let mut mixtures = Vec::with_capacity(n_rest);
    let mut record_mixtures = Vec::with_capacity(n_rest);
    let mut sweep_trunc = 0.0f64;
    for r in 0..n_rest {
        let drawn = draw_f_with(state, r, hyper, &mut shared, rng)?;
        stats.mixture_draws += 1;
        stats.max_trunc_error = stats.max_trunc_error.max(drawn.trunc_error);
        if drawn.trunc_error > hyper.trunc_eps {
            stats.trunc_violations += 1;
        }
        sweep_trunc = sweep_trunc.max(drawn.trunc_error);
        mixtures.push(drawn.mixture);
        record_mixtures.push(drawn.record);
    }

    match config.c_update_mode {
        CUpdateMode::Gibbs => {
            stats.assignment_moves += updates::update_c_gibbs(state, data, hyper, &mixtures, rng)?;
        }
        CUpdateMode::MetropolisedUniform => {
            let (accepted, proposed) = updates::update_c_metropolised(
                state,
                data,
                hyper,
                &mixtures,
                ProposalKind::Uniform,
                rng,
            )?;
            stats.assignment_moves += accepted;
            stats.assignment_proposals += proposed;
        }
        CUpdateMode::MetropolisedL2 => {
            let (accepted, proposed) = updates::update_c_metropolised(
                state,
                data,
                hyper,
                &mixtures,
                ProposalKind::L2,
                rng,
            )?;
            stats.assignment_moves += accepted;
            stats.assignment_proposals += proposed;
        }
    }
    Ok((mixtures, record_mixtures, sweep_trunc))
}

/// Run one chain: deterministic given the RNG, emitting one record per
/// `thin` sweeps after burn-in. Every intermediate state is validated in
/// debug builds.
pub fn run_chain<R: Rng + ?Sized>(
    data: &Dataset,
    hyper: &HyperParams,
    config: &SamplerConfig,
    pool: Option<&PseudopriorPool>,
    rng: &mut R,
) -> Result<(Vec<ChainRecord>, RunStats)> {
    config.validate()?;
    hyper.validate(data.n_groups())?;
    let mut state = init_state(data, hyper, rng)?;
    let mut stats = RunStats::default();
    let total = config.n_burnin + config.n_iter;
    let mut records = Vec::with_capacity(config.n_iter / config.thin + 1);
    for sweep in 0..total {
        let (_, record_mixtures, sweep_trunc) = full_sweep(
            &mut state,
            data,
            hyper,
            config,
            &mut stats,
            rng,
        )
        .map_err(|e| Error::Numerical(format!("sweep {sweep}: {e}")))?;
        relabel(&mut state);
        stats.sweeps += 1;
        #[cfg(debug_assertions)]
        {
            let violations = crate::state::validate_state(&state, data);
            assert!(violations.is_empty(), "sweep {sweep} left an inconsistent state: {violations:?}");
        }
        if sweep >= config.n_burnin && (sweep - config.n_burnin) % config.thin == 0 {
            records.push(build_record(sweep, &state, record_mixtures, sweep_trunc));
        }
        if let Some(pool) = pool {
            pseudoprior_inject(&mut state, pool, rng)?;
        }
    }
    Ok((records, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn rng(seed: u64) -> ChaCha12Rng {
        ChaCha12Rng::seed_from_u64(seed)
    }

    fn data() -> Dataset {
        Dataset::from_groups(vec![vec![0.0, 0.2, -0.1, 5.0, 5.2], vec![0.1, -0.2, 4.9, 5.1]])
            .unwrap()
    }

    fn quick_config() -> SamplerConfig {
        SamplerConfig {
            n_burnin: 30,
            n_iter: 60,
            thin: 3,
            pseudoprior_pool_size: 10,
            ..SamplerConfig::default()
        }
    }

    #[test]
    fn same_seed_same_records() {
        let data = data();
        let hyper = HyperParams::defaults(2);
        let config = quick_config();
        let run = |seed: u64| {
            let mut r = rng(seed);
            let pool = pseudoprior_collect(&data, &hyper, &config, &mut r).unwrap();
            run_chain(&data, &hyper, &config, Some(&pool), &mut r).unwrap().0
        };
        let a = run(77);
        let b = run(77);
        assert_eq!(a, b);
        let c = run(78);
        assert_ne!(a, c, "different seeds should diverge");
    }

    #[test]
    fn record_count_and_schedule() {
        let data = data();
        let hyper = HyperParams::defaults(2);
        let config = quick_config();
        let mut r = rng(5);
        let (records, stats) = run_chain(&data, &hyper, &config, None, &mut r).unwrap();
        assert_eq!(records.len(), config.n_iter / config.thin);
        assert_eq!(stats.sweeps, config.n_burnin + config.n_iter);
        assert_eq!(records[0].iter, config.n_burnin as u64);
        assert!(records.iter().all(|rec| rec.trunc_error <= hyper.trunc_eps));
        assert_eq!(stats.trunc_violations, 0);
    }

    #[test]
    fn zero_iterations_empty_stream() {
        let data = data();
        let hyper = HyperParams::defaults(2);
        let config = SamplerConfig { n_burnin: 10, n_iter: 0, ..quick_config() };
        let mut r = rng(6);
        let (records, _) = run_chain(&data, &hyper, &config, None, &mut r).unwrap();
        assert!(records.is_empty());
    }

    #[test]
    fn fixed_kappa_one_never_shares() {
        let data = data();
        let mut hyper = HyperParams::defaults(2);
        hyper.fixed_kappa = Some(1.0);
        let config = quick_config();
        let mut r = rng(7);
        let pool = pseudoprior_collect(&data, &hyper, &config, &mut r).unwrap();
        let (records, _) = run_chain(&data, &hyper, &config, Some(&pool), &mut r).unwrap();
        assert!(records.iter().all(|rec| rec.h0 == 0), "degenerate regime keeps H0 = 0");
        assert!(records.iter().all(|rec| rec.kappa == 1.0));
    }

    #[test]
    fn metropolised_modes_run_and_record() {
        let data = data();
        let hyper = HyperParams::defaults(2);
        for mode in [CUpdateMode::MetropolisedUniform, CUpdateMode::MetropolisedL2] {
            let config = SamplerConfig { c_update_mode: mode, ..quick_config() };
            let mut r = rng(8);
            let pool = pseudoprior_collect(&data, &hyper, &config, &mut r).unwrap();
            let (records, stats) =
                run_chain(&data, &hyper, &config, Some(&pool), &mut r).unwrap();
            assert_eq!(records.len(), config.n_iter / config.thin);
            assert!(stats.assignment_proposals > 0);
        }
    }

    /// Prior-only two-level composition: with kappa forced to zero and one
    /// group, the number of distinct shared dishes after seating n customers
    /// follows the table-count law composed over both urn levels.
    #[test]
    fn prior_two_level_cluster_counts() {
        use crate::dist::crp_cluster_count_pmf;
        let alpha = 1.0;
        let gamma = 1.0;
        for n in 1..=4usize {
            let data = Dataset::from_groups(vec![vec![0.0; n]]).unwrap();
            let mut hyper = HyperParams::defaults(1);
            hyper.fixed_kappa = Some(0.0);
            let outer = crp_cluster_count_pmf(n, alpha);
            let mut composed = vec![0.0; n];
            for (t_idx, &pt) in outer.iter().enumerate() {
                let inner = crp_cluster_count_pmf(t_idx + 1, gamma);
                for (v_idx, &pv) in inner.iter().enumerate() {
                    composed[v_idx] += pt * pv;
                }
            }
            let mut r = rng(100 + n as u64);
            let reps = 40_000;
            let mut counts = vec![0usize; n];
            for _ in 0..reps {
                let mut state =
                    crate::state::ChainState::unseated(&data, vec![0], vec![1.0], 0.0);
                crate::state::seat_group_prior(&mut state, &data, &hyper, 0, &mut r);
                counts[state.h0() - 1] += 1;
            }
            for v in 0..n {
                let freq = counts[v] as f64 / reps as f64;
                let p = composed[v];
                let se = (p * (1.0 - p) / reps as f64).sqrt().max(1e-9);
                assert!(
                    (freq - p).abs() < 4.0 * se,
                    "n={n}, v={}: freq {freq} vs composed {p}",
                    v + 1
                );
            }
        }
    }
}
