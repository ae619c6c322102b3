//! Shared fixtures for the integration suites: scenario chains are run once
//! per configuration and reused across criteria.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use semihdp::data::{preprocess, Transform};
use semihdp::records::ChainRecord;
use semihdp::sampler::{
    pseudoprior_collect, run_chain, CUpdateMode, PseudopriorPool, RunStats, SamplerConfig,
};
use semihdp::scenarios::{generate_scenario, ScenarioId, ScenarioSpec};
use semihdp::state::{Dataset, HyperParams};

// Not every test binary touches every field.
#[allow(dead_code)]
pub struct ScenarioRun {
    pub data: Dataset,
    pub transform: Transform,
    pub records: Vec<ChainRecord>,
    pub stats: RunStats,
    pub wall_time_s: f64,
}

pub struct ScenarioSetup {
    pub id: ScenarioId,
    pub n_per_group: usize,
    pub data_seed: u64,
    pub chain_seed: u64,
    pub mode: CUpdateMode,
    pub fixed_kappa: Option<f64>,
}

impl ScenarioSetup {
    pub fn new(id: ScenarioId, data_seed: u64, chain_seed: u64) -> Self {
        Self {
            id,
            n_per_group: 100,
            data_seed,
            chain_seed,
            mode: CUpdateMode::Gibbs,
            fixed_kappa: None,
        }
    }

    pub fn with_mode(mut self, mode: CUpdateMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_fixed_kappa(mut self, kappa: f64) -> Self {
        self.fixed_kappa = Some(kappa);
        self
    }
}

/// Desk-scale schedule used throughout the acceptance runs: 2,000 burn-in
/// plus 10,000 sweeps at thinning 5.
pub fn desk_config(mode: CUpdateMode, seed: u64) -> SamplerConfig {
    SamplerConfig {
        n_burnin: 2000,
        n_iter: 10_000,
        thin: 5,
        c_update_mode: mode,
        pseudoprior_pool_size: 500,
        seed,
    }
}

/// Generate, standardize, collect pseudopriors, and run one chain.
pub fn run_scenario(setup: &ScenarioSetup) -> ScenarioRun {
    let spec = ScenarioSpec::new(setup.id, setup.n_per_group, setup.data_seed);
    let mut data_rng = ChaCha12Rng::seed_from_u64(setup.data_seed);
    let raw = generate_scenario(&spec, &mut data_rng).unwrap();
    let (data, transform) = preprocess(&raw, 0.0, true, &mut data_rng).unwrap();

    let mut hyper = HyperParams::defaults(data.n_groups());
    hyper.fixed_kappa = setup.fixed_kappa;
    let config = desk_config(setup.mode, setup.chain_seed);

    let started = std::time::Instant::now();
    let mut pool_rng = ChaCha12Rng::seed_from_u64(setup.chain_seed);
    pool_rng.set_stream(u64::MAX - 1);
    let pool: PseudopriorPool = pseudoprior_collect(&data, &hyper, &config, &mut pool_rng).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(setup.chain_seed);
    rng.set_stream(1);
    let (records, stats) = run_chain(&data, &hyper, &config, Some(&pool), &mut rng).unwrap();
    ScenarioRun { data, transform, records, stats, wall_time_s: started.elapsed().as_secs_f64() }
}
