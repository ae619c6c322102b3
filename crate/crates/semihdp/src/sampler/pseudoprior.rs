//! Pseudoprior machinery: a preliminary fixed-assignment chain collects
//! plausible restaurant sub-states; the main chain injects one into every
//! empty restaurant so assignment moves into it stay viable.

use crate::error::{Error, Result};
use crate::sampler::relabel::relabel;
use crate::sampler::updates;
use crate::sampler::SamplerConfig;
use crate::state::{init_state, ChainState, Dataset, Dish, HyperParams, RestaurantSnapshot};
use rand::Rng;


/// Stored restaurant-local sub-states, one list per restaurant, collected
/// from the preliminary chain of that restaurant's own group.
#[derive(Clone, Debug)]
pub struct PseudopriorPool {
    pub entries: Vec<Vec<RestaurantSnapshot>>,
}

impl PseudopriorPool {
    pub fn n_restaurants(&self) -> usize {
        self.entries.len()
    }
}

/// Extract restaurant `r`'s live tables as a self-contained sub-state with
/// locally reindexed atoms.
pub(crate) fn snapshot_restaurant(state: &ChainState, r: usize) -> RestaurantSnapshot {
    let rest = &state.restaurants[r];
    let mut psi = Vec::new();
    let mut psi_map = vec![usize::MAX; rest.psi.len()];
    let mut local_tau = Vec::new();
    let mut tau_map = vec![usize::MAX; state.tau.len()];
    let mut tables = Vec::new();
    for (_, t) in rest.live_tables() {
        let dish = match t.dish {
            Dish::Private(p) => {
                if psi_map[p] == usize::MAX {
                    psi_map[p] = psi.len();
                    psi.push(rest.psi[p]);
                }
                Dish::Private(psi_map[p])
            }
            Dish::Shared(k) => {
                if tau_map[k] == usize::MAX {
                    tau_map[k] = local_tau.len();
                    local_tau.push(state.tau[k]);
                }
                Dish::Shared(tau_map[k])
            }
        };
        tables.push(crate::state::Table { dish, n: t.n, stats: t.stats });
    }
    RestaurantSnapshot { tables, psi, local_tau }
}

/// Run the preliminary chain with assignments frozen at identity and collect
/// `pool_size` sub-states per restaurant at thinning 10 after burn-in.
pub fn pseudoprior_collect<R: Rng + ?Sized>(
    data: &Dataset,
    hyper: &HyperParams,
    config: &SamplerConfig,
    rng: &mut R,
) -> Result<PseudopriorPool> {
    if config.pseudoprior_pool_size == 0 {
        return Err(Error::Config("pseudoprior pool size must be >= 1".into()));
    }
    const POOL_THIN: usize = 10;
    let n_groups = data.n_groups();
    let mut state = init_state(data, hyper, rng)?;
    let mut entries: Vec<Vec<RestaurantSnapshot>> =
        (0..n_groups).map(|_| Vec::with_capacity(config.pseudoprior_pool_size)).collect();
    let total = config.n_burnin + POOL_THIN * config.pseudoprior_pool_size;
    for sweep in 0..total {
        updates::update_s(&mut state, data, hyper, rng)?;
        updates::update_t(&mut state, hyper, rng)?;
        updates::update_values(&mut state, hyper, rng);
        updates::update_h(&mut state, hyper, rng)?;
        updates::update_kappa(&mut state, hyper, rng);
        updates::update_omega(&mut state, hyper, rng);
        relabel(&mut state);
        if sweep >= config.n_burnin && (sweep - config.n_burnin) % POOL_THIN == 0 {
            for (r, list) in entries.iter_mut().enumerate() {
                list.push(snapshot_restaurant(&state, r));
            }
        }
    }
    Ok(PseudopriorPool { entries })
}

/// Relative location offset of injected atoms, in units of each atom's own
/// standard deviation; the sign is random, the magnitude fixed so the
/// held-out score of an injected fit is displaced by a controlled amount.
const INJECT_MEAN_OFFSET: f64 = 0.3;
/// Fixed-magnitude log-variance offset of injected atoms.
const INJECT_LOG_VAR_OFFSET: f64 = 0.35;

/// Smooth a stored sub-state into a fresh placeholder draw: the pool plus
/// atom displacement forms the pseudoprior, so an injected mixture scores a
/// group's data like a held-out fit rather than an in-sample one. The signs
/// are drawn once per snapshot; per-atom signs would cancel between
/// redundant atoms covering the same data region.
fn smoothed_entry<R: Rng + ?Sized>(entry: &RestaurantSnapshot, rng: &mut R) -> RestaurantSnapshot {
    let mut snap = entry.clone();
    let sign = |u: f64| if u < 0.5 { -1.0 } else { 1.0 };
    let loc_sign = sign(rng.random());
    let var_sign = sign(rng.random());
    let jitter = |atom: &mut crate::dist::GaussianParam| {
        let sd = atom.sigma2.sqrt();
        atom.mu += loc_sign * INJECT_MEAN_OFFSET * sd;
        atom.sigma2 *= (var_sign * INJECT_LOG_VAR_OFFSET).exp();
    };
    snap.psi.iter_mut().for_each(jitter);
    snap.local_tau.iter_mut().for_each(jitter);
    snap
}

/// Give every empty restaurant a placeholder sub-state drawn uniformly from
/// its pool and smoothed by atom jitter; occupied restaurants are untouched.
pub fn pseudoprior_inject<R: Rng + ?Sized>(
    state: &mut ChainState,
    pool: &PseudopriorPool,
    rng: &mut R,
) -> Result<()> {
    for r in 0..state.n_restaurants() {
        if state.is_occupied(r) {
            continue;
        }
        let list = pool
            .entries
            .get(r)
            .ok_or_else(|| Error::Config(format!("no pseudoprior pool for restaurant {}", r + 1)))?;
        if list.is_empty() {
            return Err(Error::Config(format!(
                "pseudoprior pool for empty restaurant {} is empty",
                r + 1
            )));
        }
        let idx = ((rng.random::<f64>() * list.len() as f64) as usize).min(list.len() - 1);
        state.pseudo[r] = Some(smoothed_entry(&list[idx], rng));
    }
    Ok(())
}
