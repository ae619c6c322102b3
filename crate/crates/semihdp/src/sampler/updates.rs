//! Conditional updates of the marginal sampler: seating, shared-table
//! allocation, dish values, area flags, kappa, the assignment simplex, and
//! the restaurant assignments (full-conditional or Metropolised).

use crate::dist::{
    log_sum_exp, nig_log_marginal, nig_log_marginal1, nig_posterior_draw_stats,
    sample_categorical_log, FiniteMixture, GaussStats,
};
use crate::error::{Error, Result};
use crate::state::{dirichlet_draw, ChainState, Dataset, Dish, HyperParams, Table};
use rand::Rng;
use rand_distr::{Beta, Distribution};
use rayon::prelude::*;
use std::collections::HashSet;

/// Remove observation `(i, j)` from its table; a table left empty releases
/// its shared-dish attachment.
pub fn detach_customer(state: &mut ChainState, data: &Dataset, i: usize, j: usize) {
    let r = state.c[i];
    let l = state.s[i][j];
    let table = &mut state.restaurants[r].tables[l];
    table.n -= 1;
    table.stats.remove(data.group(i)[j]);
    if table.n == 0 {
        table.stats = GaussStats::default();
        if let Dish::Shared(k) = table.dish {
            state.tau_mult[k] -= 1;
        }
    }
}

/// Options for the dish of a freshly created table.
enum NewDish {
    Private,
    ExistingShared(usize),
    FreshShared,
}

/// Seat observation `(i, j)` in its group's restaurant: existing table with
/// weight `n * k(y | dish)`, new table with weight `alpha * p(y | rest)`,
/// where the predictive mixes the private base, the occupied shared dishes,
/// and a fresh shared draw. A new table's dish is drawn from the same
/// components conditionally on the observation, with atom values from the
/// matching posterior.
pub fn seat_customer_data<R: Rng + ?Sized>(
    state: &mut ChainState,
    data: &Dataset,
    hyper: &HyperParams,
    i: usize,
    j: usize,
    rng: &mut R,
) -> Result<()> {
    let r = state.c[i];
    let y = data.group(i)[j];
    let n_slots = state.restaurants[r].tables.len();
    let mut logw = Vec::with_capacity(n_slots + 1);
    for t in &state.restaurants[r].tables {
        if t.n == 0 {
            logw.push(f64::NEG_INFINITY);
            continue;
        }
        let value = state.dish_value(r, t);
        logw.push((t.n as f64).ln() + value.log_density(y));
    }

    let ln_kappa = state.kappa.ln();
    let ln_not_kappa = (1.0 - state.kappa).ln();
    let m_total = state.total_shared_mult() as f64;
    let ln_denom = (m_total + hyper.gamma).ln();
    let mut comp = Vec::with_capacity(state.tau.len() + 2);
    let mut comp_dish = Vec::with_capacity(state.tau.len() + 2);
    comp.push(ln_kappa + nig_log_marginal1(y, &hyper.base0));
    comp_dish.push(NewDish::Private);
    for (k, &m) in state.tau_mult.iter().enumerate() {
        if m == 0 {
            continue;
        }
        comp.push(ln_not_kappa + (m as f64).ln() - ln_denom + state.tau[k].log_density(y));
        comp_dish.push(NewDish::ExistingShared(k));
    }
    comp.push(ln_not_kappa + hyper.gamma.ln() - ln_denom + nig_log_marginal1(y, &hyper.base00));
    comp_dish.push(NewDish::FreshShared);
    logw.push(hyper.alpha.ln() + log_sum_exp(&comp));

    let pick = sample_categorical_log(rng, &logw)?;
    let seat = if pick < n_slots {
        let table = &mut state.restaurants[r].tables[pick];
        table.n += 1;
        table.stats.push(y);
        pick
    } else {
        let mut stats = GaussStats::default();
        stats.push(y);
        let which = sample_categorical_log(rng, &comp)?;
        let dish = match comp_dish[which] {
            NewDish::Private => {
                let atom = nig_posterior_draw_stats(&stats, &hyper.base0, rng);
                state.restaurants[r].psi.push(atom);
                Dish::Private(state.restaurants[r].psi.len() - 1)
            }
            NewDish::ExistingShared(k) => {
                state.tau_mult[k] += 1;
                Dish::Shared(k)
            }
            NewDish::FreshShared => {
                let atom = nig_posterior_draw_stats(&stats, &hyper.base00, rng);
                state.tau.push(atom);
                state.tau_mult.push(1);
                Dish::Shared(state.tau.len() - 1)
            }
        };
        state.restaurants[r].tables.push(Table { dish, n: 1, stats });
        n_slots
    };
    state.s[i][j] = seat;
    Ok(())
}

/// Resample every observation's table assignment.
pub fn update_s<R: Rng + ?Sized>(
    state: &mut ChainState,
    data: &Dataset,
    hyper: &HyperParams,
    rng: &mut R,
) -> Result<()> {
    for i in 0..data.n_groups() {
        for j in 0..data.group(i).len() {
            detach_customer(state, data, i, j);
            seat_customer_data(state, data, hyper, i, j, rng)?;
        }
    }
    Ok(())
}

/// Reassign each shared table's dish: existing shared dish with weight
/// `m * prod k(y | tau)`, fresh dish with weight `gamma * marginal`; seating
/// indicators stay untouched.
pub fn update_t<R: Rng + ?Sized>(
    state: &mut ChainState,
    hyper: &HyperParams,
    rng: &mut R,
) -> Result<()> {
    for r in 0..state.n_restaurants() {
        for l in 0..state.restaurants[r].tables.len() {
            let (stats, k_current) = {
                let t = &state.restaurants[r].tables[l];
                match (t.n, t.dish) {
                    (0, _) | (_, Dish::Private(_)) => continue,
                    (_, Dish::Shared(k)) => (t.stats, k),
                }
            };
            state.tau_mult[k_current] -= 1;
            let m_minus = state.total_shared_mult() as f64;
            let _ = m_minus; // weights below are unnormalized in m
            let mut logw = Vec::with_capacity(state.tau.len() + 1);
            let mut target = Vec::with_capacity(state.tau.len() + 1);
            for (k, &m) in state.tau_mult.iter().enumerate() {
                if m == 0 {
                    continue;
                }
                logw.push((m as f64).ln() + stats.log_likelihood(&state.tau[k]));
                target.push(Some(k));
            }
            logw.push(hyper.gamma.ln() + nig_log_marginal(&stats, &hyper.base00));
            target.push(None);
            let pick = sample_categorical_log(rng, &logw)?;
            let dish = match target[pick] {
                Some(k) => {
                    state.tau_mult[k] += 1;
                    Dish::Shared(k)
                }
                None => {
                    let atom = nig_posterior_draw_stats(&stats, &hyper.base00, rng);
                    state.tau.push(atom);
                    state.tau_mult.push(1);
                    Dish::Shared(state.tau.len() - 1)
                }
            };
            state.restaurants[r].tables[l].dish = dish;
        }
    }
    Ok(())
}

/// Redraw every dish value from its conditional: private dishes from the
/// private-base posterior of their table, shared dishes from the shared-base
/// posterior pooling all attached tables across restaurants. Unattached
/// shared dishes are transient and refreshed from the prior.
pub fn update_values<R: Rng + ?Sized>(state: &mut ChainState, hyper: &HyperParams, rng: &mut R) {
    for r in 0..state.n_restaurants() {
        for l in 0..state.restaurants[r].tables.len() {
            let (stats, p) = match &state.restaurants[r].tables[l] {
                t if t.n == 0 => continue,
                t => match t.dish {
                    Dish::Private(p) => (t.stats, p),
                    Dish::Shared(_) => continue,
                },
            };
            state.restaurants[r].psi[p] = nig_posterior_draw_stats(&stats, &hyper.base0, rng);
        }
    }
    let mut pooled = vec![GaussStats::default(); state.tau.len()];
    for rest in &state.restaurants {
        for (_, t) in rest.live_tables() {
            if let Dish::Shared(k) = t.dish {
                pooled[k].merge(&t.stats);
            }
        }
    }
    for (k, stats) in pooled.iter().enumerate() {
        let stats = if state.tau_mult[k] > 0 { stats } else { &GaussStats::default() };
        state.tau[k] = nig_posterior_draw_stats(stats, &hyper.base00, rng);
    }
}

/// Resample each live table's area flag, holding its dish value fixed:
/// private with weight `kappa g0(v)`, an occupied shared dish with weight
/// `(1-kappa) m / (m + gamma)` only under exact atom equality, a fresh
/// shared dish carrying the same value with weight
/// `(1-kappa) gamma / (m + gamma) g00(v)`. Tables move one at a time.
///
/// Returns the number of private tables that merged onto an existing shared
/// dish (exact value ties are measure zero for continuous draws; shared
/// tables relocating between equal-valued shared dishes are label shuffles,
/// not merges).
pub fn update_h<R: Rng + ?Sized>(
    state: &mut ChainState,
    hyper: &HyperParams,
    rng: &mut R,
) -> Result<usize> {
    let mut merges = 0;
    let ln_kappa = state.kappa.ln();
    let ln_not_kappa = (1.0 - state.kappa).ln();
    for r in 0..state.n_restaurants() {
        for l in 0..state.restaurants[r].tables.len() {
            let dish = {
                let t = &state.restaurants[r].tables[l];
                if t.n == 0 {
                    continue;
                }
                t.dish
            };
            let value = state.dish_value(r, &state.restaurants[r].tables[l]);
            if let Dish::Shared(k) = dish {
                state.tau_mult[k] -= 1;
            }
            let m_minus = state.total_shared_mult() as f64;
            let ln_denom = (m_minus + hyper.gamma).ln();

            let mut logw = vec![ln_kappa + hyper.base0.log_density(&value)];
            let mut target: Vec<Option<usize>> = vec![None];
            for (k, &m) in state.tau_mult.iter().enumerate() {
                if m == 0 {
                    continue;
                }
                let atom = state.tau[k];
                if atom.mu == value.mu && atom.sigma2 == value.sigma2 {
                    logw.push(ln_not_kappa + (m as f64).ln() - ln_denom);
                    target.push(Some(k));
                }
            }
            logw.push(ln_not_kappa + hyper.gamma.ln() - ln_denom + hyper.base00.log_density(&value));
            target.push(Some(usize::MAX)); // sentinel: fresh shared dish
            let pick = sample_categorical_log(rng, &logw)?;

            let new_dish = match target[pick] {
                None => match dish {
                    Dish::Private(p) => Dish::Private(p),
                    Dish::Shared(_) => {
                        state.restaurants[r].psi.push(value);
                        Dish::Private(state.restaurants[r].psi.len() - 1)
                    }
                },
                Some(usize::MAX) => {
                    state.tau.push(value);
                    state.tau_mult.push(1);
                    Dish::Shared(state.tau.len() - 1)
                }
                Some(k) => {
                    if dish.is_private() {
                        merges += 1;
                    }
                    state.tau_mult[k] += 1;
                    Dish::Shared(k)
                }
            };
            state.restaurants[r].tables[l].dish = new_dish;
        }
    }
    Ok(merges)
}

/// Beta draw of kappa from the live private/shared table counts; a no-op in
/// fixed-kappa mode.
pub fn update_kappa<R: Rng + ?Sized>(state: &mut ChainState, hyper: &HyperParams, rng: &mut R) {
    if hyper.fixed_kappa.is_some() {
        return;
    }
    let (private, shared) = state.live_area_counts();
    let beta = Beta::new(hyper.a_kappa + private as f64, hyper.b_kappa + shared as f64)
        .expect("valid beta");
    state.kappa = beta.sample(rng);
}

/// Dirichlet draw of the assignment simplex from the prior weights plus the
/// current assignment counts.
pub fn update_omega<R: Rng + ?Sized>(state: &mut ChainState, hyper: &HyperParams, rng: &mut R) {
    let mut weights = hyper.eta.clone();
    for &ci in &state.c {
        weights[ci] += 1.0;
    }
    state.omega = dirichlet_draw(&weights, rng);
}

/// Bookkeeping for restaurants whose injected placeholder was turned into
/// live tables during an assignment update; phantom counts are subtracted
/// once all moves are done.
struct Materialized {
    restaurant: usize,
    baselines: Vec<(usize, usize, GaussStats)>,
}

fn materialize_if_needed(
    state: &mut ChainState,
    r: usize,
    done: &mut HashSet<usize>,
    out: &mut Vec<Materialized>,
) {
    if done.contains(&r) || state.restaurants[r].live_table_count() > 0 {
        return;
    }
    let Some(snap) = state.pseudo[r].take() else {
        return;
    };
    done.insert(r);
    let psi_offset = state.restaurants[r].psi.len();
    state.restaurants[r].psi.extend(snap.psi.iter().copied());
    let tau_offset = state.tau.len();
    state.tau.extend(snap.local_tau.iter().copied());
    state.tau_mult.extend(std::iter::repeat(0).take(snap.local_tau.len()));
    let mut baselines = Vec::with_capacity(snap.tables.len());
    for t in &snap.tables {
        let dish = match t.dish {
            Dish::Private(p) => Dish::Private(psi_offset + p),
            Dish::Shared(k) => {
                state.tau_mult[tau_offset + k] += 1;
                Dish::Shared(tau_offset + k)
            }
        };
        let idx = state.restaurants[r].tables.len();
        state.restaurants[r].tables.push(Table { dish, n: t.n, stats: t.stats });
        baselines.push((idx, t.n, t.stats));
    }
    out.push(Materialized { restaurant: r, baselines });
}

fn drop_phantom_counts(state: &mut ChainState, materialized: &[Materialized]) {
    for m in materialized {
        for &(idx, base_n, base_stats) in &m.baselines {
            let table = &mut state.restaurants[m.restaurant].tables[idx];
            table.n -= base_n;
            table.stats.subtract(&base_stats);
            if table.n == 0 {
                table.stats = GaussStats::default();
                if let Dish::Shared(k) = table.dish {
                    state.tau_mult[k] -= 1;
                }
            }
        }
    }
}

/// Move group `i` to restaurant `new_r`: detach all its customers, turn an
/// injected placeholder into live tables when entering an empty restaurant,
/// and reseat sequentially by the data-weighted scheme.
fn move_group<R: Rng + ?Sized>(
    state: &mut ChainState,
    data: &Dataset,
    hyper: &HyperParams,
    i: usize,
    new_r: usize,
    done: &mut HashSet<usize>,
    materialized: &mut Vec<Materialized>,
    rng: &mut R,
) -> Result<()> {
    for j in 0..data.group(i).len() {
        detach_customer(state, data, i, j);
    }
    state.c[i] = new_r;
    materialize_if_needed(state, new_r, done, materialized);
    for j in 0..data.group(i).len() {
        seat_customer_data(state, data, hyper, i, j, rng)?;
    }
    Ok(())
}

fn group_log_likelihood(data: &Dataset, i: usize, mixture: &FiniteMixture) -> f64 {
    data.group(i).iter().map(|&y| mixture.log_density(y)).sum()
}

/// Full-conditional assignment update: each group's restaurant drawn with
/// weight `omega_r * prod_j f_r(y_ij)` against the materialized mixtures.
/// Returns the number of groups that changed restaurant.
pub fn update_c_gibbs<R: Rng + ?Sized>(
    state: &mut ChainState,
    data: &Dataset,
    hyper: &HyperParams,
    mixtures: &[FiniteMixture],
    rng: &mut R,
) -> Result<usize> {
    let n_groups = data.n_groups();
    let n_rest = state.n_restaurants();
    let loglik: Vec<Vec<f64>> = (0..n_groups)
        .into_par_iter()
        .map(|i| (0..n_rest).map(|r| group_log_likelihood(data, i, &mixtures[r])).collect())
        .collect();
    let mut moves = 0;
    let mut done = HashSet::new();
    let mut materialized = Vec::new();
    for i in 0..n_groups {
        let logw: Vec<f64> = (0..n_rest).map(|r| state.omega[r].ln() + loglik[i][r]).collect();
        let pick = sample_categorical_log(rng, &logw).map_err(|_| {
            Error::Numerical(format!(
                "assignment update: all restaurant log likelihoods for group {} are -inf \
                 (kernel/scale mismatch)",
                i + 1
            ))
        })?;
        if pick != state.c[i] {
            move_group(state, data, hyper, i, pick, &mut done, &mut materialized, rng)?;
            moves += 1;
        }
    }
    drop_phantom_counts(state, &materialized);
    Ok(moves)
}

/// Proposal family for the Metropolised assignment update.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProposalKind {
    /// Discrete uniform over restaurants.
    Uniform,
    /// Affinity-weighted: `p(r | m) proportional to 1 + (1 + d2(F_r, F_m))^-1`
    /// with the squared L2 distance between the mixture densities.
    L2,
}

/// One proposed move per group, accepted by the Metropolis-Hastings ratio
/// with the proposal correction. Returns `(accepted, proposed_differing)`.
pub fn update_c_metropolised<R: Rng + ?Sized>(
    state: &mut ChainState,
    data: &Dataset,
    hyper: &HyperParams,
    mixtures: &[FiniteMixture],
    kind: ProposalKind,
    rng: &mut R,
) -> Result<(usize, usize)> {
    let n_groups = data.n_groups();
    let n_rest = state.n_restaurants();

    // Proposal weights w[m][r] = w(r | from m); symmetric in (r, m) but the
    // normalizers differ, so both directions enter the acceptance ratio.
    let weights: Vec<Vec<f64>> = match kind {
        ProposalKind::Uniform => vec![vec![1.0; n_rest]; n_rest],
        ProposalKind::L2 => {
            let pairs: Vec<(usize, usize)> = (0..n_rest)
                .flat_map(|a| (a + 1..n_rest).map(move |b| (a, b)))
                .collect();
            let dists: Vec<f64> = pairs
                .par_iter()
                .map(|&(a, b)| crate::dist::mixture_l2_distance_sq(&mixtures[a], &mixtures[b]))
                .collect();
            let mut w = vec![vec![2.0; n_rest]; n_rest];
            for (&(a, b), &d) in pairs.iter().zip(&dists) {
                let affinity = 1.0 + 1.0 / (1.0 + d);
                w[a][b] = affinity;
                w[b][a] = affinity;
            }
            w
        }
    };
    let normalizer: Vec<f64> = weights.iter().map(|row| row.iter().sum()).collect();

    struct Proposal {
        group: usize,
        from: usize,
        to: usize,
        log_u: f64,
    }
    let mut proposals = Vec::with_capacity(n_groups);
    for i in 0..n_groups {
        let from = state.c[i];
        let logw: Vec<f64> = weights[from].iter().map(|w| w.ln()).collect();
        let to = sample_categorical_log(rng, &logw)?;
        let log_u = rng.random::<f64>().ln();
        proposals.push(Proposal { group: i, from, to, log_u });
    }

    let logliks: Vec<(f64, f64)> = proposals
        .par_iter()
        .map(|p| {
            if p.to == p.from {
                (0.0, 0.0)
            } else {
                (
                    group_log_likelihood(data, p.group, &mixtures[p.from]),
                    group_log_likelihood(data, p.group, &mixtures[p.to]),
                )
            }
        })
        .collect();

    let mut accepted = 0;
    let mut proposed = 0;
    let mut done = HashSet::new();
    let mut materialized = Vec::new();
    for (p, &(ll_from, ll_to)) in proposals.iter().zip(&logliks) {
        if p.to == p.from {
            continue;
        }
        proposed += 1;
        if ll_from == f64::NEG_INFINITY && ll_to == f64::NEG_INFINITY {
            return Err(Error::Numerical(format!(
                "assignment update: group {} has -inf likelihood in both current and proposed \
                 restaurants (kernel/scale mismatch)",
                p.group + 1
            )));
        }
        let log_ratio = state.omega[p.to].ln() + ll_to + weights[p.to][p.from].ln()
            - normalizer[p.to].ln()
            - (state.omega[p.from].ln() + ll_from + weights[p.from][p.to].ln()
                - normalizer[p.from].ln());
        if p.log_u < log_ratio {
            move_group(state, data, hyper, p.group, p.to, &mut done, &mut materialized, rng)?;
            accepted += 1;
        }
    }
    drop_phantom_counts(state, &materialized);
    Ok((accepted, proposed))
}
