//! Latent configuration of the food-court process: per-restaurant tables
//! holding private or shared dishes, seating indicators, and the consistency
//! rules that every sampler sweep must preserve.

use crate::dist::{GaussStats, GaussianParam, NigBase};
use crate::error::{Error, Result};
use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Grouped real-valued observations.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    groups: Vec<Vec<f64>>,
    group_ids: Vec<String>,
}

impl Dataset {
    pub fn new(groups: Vec<Vec<f64>>, group_ids: Vec<String>) -> Result<Self> {
        if groups.is_empty() {
            return Err(Error::Data("dataset needs at least one group".into()));
        }
        if groups.len() != group_ids.len() {
            return Err(Error::Data("group_ids length mismatch".into()));
        }
        for (i, g) in groups.iter().enumerate() {
            if g.is_empty() {
                return Err(Error::Data(format!("group {} is empty", group_ids[i])));
            }
            if let Some(v) = g.iter().find(|v| !v.is_finite()) {
                return Err(Error::Data(format!(
                    "group {} contains non-finite value {v}",
                    group_ids[i]
                )));
            }
        }
        Ok(Self { groups, group_ids })
    }

    /// Groups labeled "1", "2", ... in order.
    pub fn from_groups(groups: Vec<Vec<f64>>) -> Result<Self> {
        let ids = (1..=groups.len()).map(|i| i.to_string()).collect();
        Self::new(groups, ids)
    }

    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn group(&self, i: usize) -> &[f64] {
        &self.groups[i]
    }

    pub fn groups(&self) -> &[Vec<f64>] {
        &self.groups
    }

    pub fn group_ids(&self) -> &[String] {
        &self.group_ids
    }

    pub fn total_len(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }

    pub fn iter_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.groups.iter().flatten().copied()
    }
}

/// Model hyperparameters.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HyperParams {
    /// Concentration of each population-level Dirichlet process.
    pub alpha: f64,
    /// Concentration of the shared-area Dirichlet process.
    pub gamma: f64,
    pub a_kappa: f64,
    pub b_kappa: f64,
    /// Dirichlet prior weights for the population assignment simplex.
    pub eta: Vec<f64>,
    /// Base measure for private (restaurant-area) dishes.
    pub base0: NigBase,
    /// Base measure for shared-area dishes.
    pub base00: NigBase,
    /// Truncation error threshold for conditional mixture draws.
    pub trunc_eps: f64,
    /// Degenerate-kappa switch; when set, kappa is held at this value.
    pub fixed_kappa: Option<f64>,
}

impl HyperParams {
    /// Reference defaults: alpha = gamma = 1, Beta(2, 2) on kappa,
    /// eta = (1/I, ..., 1/I), identical weak NIG bases, threshold 1e-4.
    pub fn defaults(n_groups: usize) -> Self {
        Self {
            alpha: 1.0,
            gamma: 1.0,
            a_kappa: 2.0,
            b_kappa: 2.0,
            eta: vec![1.0 / n_groups as f64; n_groups],
            base0: NigBase::default(),
            base00: NigBase::default(),
            trunc_eps: 1e-4,
            fixed_kappa: None,
        }
    }

    pub fn validate(&self, n_groups: usize) -> Result<()> {
        let pos = |v: f64, name: &str| -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        pos(self.alpha, "alpha")?;
        pos(self.gamma, "gamma")?;
        pos(self.a_kappa, "a_kappa")?;
        pos(self.b_kappa, "b_kappa")?;
        pos(self.trunc_eps, "trunc_eps")?;
        if self.eta.len() != n_groups {
            return Err(Error::Config(format!(
                "eta has length {}, expected one entry per group ({n_groups})",
                self.eta.len()
            )));
        }
        for &e in &self.eta {
            pos(e, "eta entries")?;
        }
        if let Some(k) = self.fixed_kappa {
            if !(0.0..=1.0).contains(&k) {
                return Err(Error::Config(format!("fixed_kappa must lie in [0,1], got {k}")));
            }
        }
        Ok(())
    }
}

/// A table's dish: either a private atom of its restaurant or a shared atom.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dish {
    /// Index into the owning restaurant's private atom list.
    Private(usize),
    /// Index into the shared atom list (global for live tables, local for
    /// snapshots).
    Shared(usize),
}

impl Dish {
    pub fn is_private(&self) -> bool {
        matches!(self, Dish::Private(_))
    }
}

/// One table: its dish reference, customer count, and sufficient statistics
/// of the seated observations.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Table {
    pub dish: Dish,
    pub n: usize,
    pub stats: GaussStats,
}

impl Table {
    pub fn is_live(&self) -> bool {
        self.n > 0
    }
}

/// One restaurant: its tables and private atoms.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Restaurant {
    pub tables: Vec<Table>,
    pub psi: Vec<GaussianParam>,
}

impl Restaurant {
    pub fn live_tables(&self) -> impl Iterator<Item = (usize, &Table)> {
        self.tables.iter().enumerate().filter(|(_, t)| t.is_live())
    }

    pub fn live_table_count(&self) -> usize {
        self.tables.iter().filter(|t| t.is_live()).count()
    }
}

/// Self-contained restaurant sub-state used for pseudoprior pools and
/// injected placeholders: shared dishes are resolved against a local list.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RestaurantSnapshot {
    pub tables: Vec<Table>,
    pub psi: Vec<GaussianParam>,
    pub local_tau: Vec<GaussianParam>,
}

impl RestaurantSnapshot {
    pub fn dish_value(&self, table: &Table) -> GaussianParam {
        match table.dish {
            Dish::Private(p) => self.psi[p],
            Dish::Shared(k) => self.local_tau[k],
        }
    }

    /// Internal consistency of a stored sub-state.
    pub fn violations(&self, label: &str) -> Vec<String> {
        let mut out = Vec::new();
        for (l, t) in self.tables.iter().enumerate() {
            if t.n == 0 {
                out.push(format!("{label}: snapshot table {l} has no customers"));
            }
            match t.dish {
                Dish::Private(p) if p >= self.psi.len() => {
                    out.push(format!("{label}: snapshot table {l} has dangling private atom {p}"))
                }
                Dish::Shared(k) if k >= self.local_tau.len() => {
                    out.push(format!("{label}: snapshot table {l} has dangling shared atom {k}"))
                }
                _ => {}
            }
        }
        for (idx, atom) in self.psi.iter().chain(self.local_tau.iter()).enumerate() {
            if !(atom.sigma2 > 0.0 && atom.sigma2.is_finite() && atom.mu.is_finite()) {
                out.push(format!("{label}: snapshot atom {idx} invalid"));
            }
        }
        out
    }
}

/// Full latent configuration of the sampler.
#[derive(Clone, Debug)]
pub struct ChainState {
    /// Restaurant assignment per group (0-based).
    pub c: Vec<usize>,
    /// Assignment simplex over restaurants.
    pub omega: Vec<f64>,
    /// Weight of the non-atomic part of the centering measure.
    pub kappa: f64,
    pub restaurants: Vec<Restaurant>,
    /// Shared-area dishes.
    pub tau: Vec<GaussianParam>,
    /// Per shared dish: number of live tables attached across restaurants.
    pub tau_mult: Vec<usize>,
    /// Table index per observation, within the group's restaurant.
    pub s: Vec<Vec<usize>>,
    /// Injected pseudoprior sub-states for empty restaurants; never consulted
    /// by the within-restaurant updates.
    pub pseudo: Vec<Option<RestaurantSnapshot>>,
}

impl ChainState {
    /// A state with assignments and weights set but nobody seated yet.
    pub fn unseated(data: &Dataset, c: Vec<usize>, omega: Vec<f64>, kappa: f64) -> Self {
        let n_groups = data.n_groups();
        assert_eq!(c.len(), n_groups);
        ChainState {
            c,
            omega,
            kappa,
            restaurants: (0..n_groups).map(|_| Restaurant::default()).collect(),
            tau: Vec::new(),
            tau_mult: Vec::new(),
            s: data.groups().iter().map(|g| vec![usize::MAX; g.len()]).collect(),
            pseudo: vec![None; n_groups],
        }
    }

    pub fn n_groups(&self) -> usize {
        self.c.len()
    }

    pub fn n_restaurants(&self) -> usize {
        self.restaurants.len()
    }

    /// A restaurant is occupied when some group is assigned to it.
    pub fn is_occupied(&self, r: usize) -> bool {
        self.c.iter().any(|&ci| ci == r)
    }

    /// Table count visible for a restaurant: live tables, or the injected
    /// sub-state's tables when the restaurant is empty.
    pub fn h_r(&self, r: usize) -> usize {
        let live = self.restaurants[r].live_table_count();
        if live > 0 {
            live
        } else {
            self.pseudo[r].as_ref().map_or(0, |snap| snap.tables.len())
        }
    }

    /// Number of shared dishes attached to at least one live table.
    pub fn h0(&self) -> usize {
        self.tau_mult.iter().filter(|m| **m > 0).count()
    }

    /// Total live shared multiplicity `m_..`.
    pub fn total_shared_mult(&self) -> usize {
        self.tau_mult.iter().sum()
    }

    /// Live private/shared table counts across restaurants.
    pub fn live_area_counts(&self) -> (usize, usize) {
        let mut private = 0;
        let mut shared = 0;
        for rest in &self.restaurants {
            for (_, t) in rest.live_tables() {
                match t.dish {
                    Dish::Private(_) => private += 1,
                    Dish::Shared(_) => shared += 1,
                }
            }
        }
        (private, shared)
    }

    /// Dish value of a table in restaurant `r`.
    pub fn dish_value(&self, r: usize, table: &Table) -> GaussianParam {
        match table.dish {
            Dish::Private(p) => self.restaurants[r].psi[p],
            Dish::Shared(k) => self.tau[k],
        }
    }
}

/// Draw the assignment simplex from Dirichlet(weights) via gamma draws.
pub fn dirichlet_draw<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Vec<f64> {
    loop {
        let draws: Vec<f64> = weights
            .iter()
            .map(|&a| Gamma::new(a, 1.0).expect("valid gamma").sample(rng))
            .collect();
        let total: f64 = draws.iter().sum();
        if total > 0.0 && total.is_finite() {
            return draws.into_iter().map(|g| g / total).collect();
        }
    }
}

/// Seat every customer of group `i` by the prior seating scheme: existing
/// table with weight `n`, new table with weight `alpha`; a new table is
/// private with probability `kappa` (dish from the private base) and
/// otherwise joins the shared area by its own urn (existing shared dish with
/// weight `m`, fresh dish with weight `gamma`).
pub fn seat_group_prior<R: Rng + ?Sized>(
    state: &mut ChainState,
    data: &Dataset,
    hyper: &HyperParams,
    i: usize,
    rng: &mut R,
) {
    let r = state.c[i];
    for j in 0..data.group(i).len() {
        let y = data.group(i)[j];
        let n_total: usize = state.restaurants[r].tables.iter().map(|t| t.n).sum();
        let denom = n_total as f64 + hyper.alpha;
        let u: f64 = rng.random::<f64>() * denom;
        let mut acc = 0.0;
        let mut chosen = None;
        for (l, t) in state.restaurants[r].tables.iter().enumerate() {
            acc += t.n as f64;
            if u < acc {
                chosen = Some(l);
                break;
            }
        }
        let l = match chosen {
            Some(l) => {
                let t = &mut state.restaurants[r].tables[l];
                t.n += 1;
                t.stats.push(y);
                l
            }
            None => {
                let dish = if rng.random::<f64>() < state.kappa {
                    let atom = crate::dist::nig_posterior_draw_stats(
                        &GaussStats::default(),
                        &hyper.base0,
                        rng,
                    );
                    state.restaurants[r].psi.push(atom);
                    Dish::Private(state.restaurants[r].psi.len() - 1)
                } else {
                    let m_total = state.total_shared_mult() as f64;
                    let v: f64 = rng.random::<f64>() * (m_total + hyper.gamma);
                    let mut macc = 0.0;
                    let mut pick = None;
                    for (k, &m) in state.tau_mult.iter().enumerate() {
                        macc += m as f64;
                        if v < macc {
                            pick = Some(k);
                            break;
                        }
                    }
                    match pick {
                        Some(k) => {
                            state.tau_mult[k] += 1;
                            Dish::Shared(k)
                        }
                        None => {
                            let atom = crate::dist::nig_posterior_draw_stats(
                                &GaussStats::default(),
                                &hyper.base00,
                                rng,
                            );
                            state.tau.push(atom);
                            state.tau_mult.push(1);
                            Dish::Shared(state.tau.len() - 1)
                        }
                    }
                };
                let mut stats = GaussStats::default();
                stats.push(y);
                state.restaurants[r].tables.push(Table { dish, n: 1, stats });
                state.restaurants[r].tables.len() - 1
            }
        };
        state.s[i][j] = l;
    }
}

/// Initial state: group `i` enters restaurant `i`, customers seated by the
/// prior seating scheme with fresh dish values; `kappa` and the assignment
/// simplex start at prior draws (or the fixed-kappa value).
pub fn init_state<R: Rng + ?Sized>(
    data: &Dataset,
    hyper: &HyperParams,
    rng: &mut R,
) -> Result<ChainState> {
    hyper.validate(data.n_groups())?;
    let kappa = match hyper.fixed_kappa {
        Some(k) => k,
        None => Beta::new(hyper.a_kappa, hyper.b_kappa)
            .map_err(|e| Error::Config(format!("invalid Beta prior on kappa: {e}")))?
            .sample(rng),
    };
    let omega = dirichlet_draw(&hyper.eta, rng);
    let c: Vec<usize> = (0..data.n_groups()).collect();
    let mut state = ChainState::unseated(data, c, omega, kappa);
    for i in 0..data.n_groups() {
        seat_group_prior(&mut state, data, hyper, i, rng);
    }
    Ok(state)
}

/// Diagnostic check of every structural invariant; returns one message per
/// violation, empty when the state is consistent.
pub fn validate_state(state: &ChainState, data: &Dataset) -> Vec<String> {
    let mut out = Vec::new();
    let n_groups = data.n_groups();
    if state.c.len() != n_groups || state.s.len() != n_groups {
        out.push("state group count differs from dataset".into());
        return out;
    }
    for (i, &ci) in state.c.iter().enumerate() {
        if ci >= state.restaurants.len() {
            out.push(format!("group {i} assigned to restaurant {ci} out of range"));
            return out;
        }
    }
    let omega_sum: f64 = state.omega.iter().sum();
    if state.omega.len() != state.restaurants.len() || (omega_sum - 1.0).abs() > 1e-12 {
        out.push(format!("omega not on the simplex (sum {omega_sum})"));
    }
    if !(0.0..=1.0).contains(&state.kappa) {
        out.push(format!("kappa {} outside [0, 1]", state.kappa));
    }

    // Recount customers and stats per table from the seating indicators.
    let mut counts: Vec<Vec<usize>> = state
        .restaurants
        .iter()
        .map(|rest| vec![0; rest.tables.len()])
        .collect();
    let mut stats: Vec<Vec<GaussStats>> = state
        .restaurants
        .iter()
        .map(|rest| vec![GaussStats::default(); rest.tables.len()])
        .collect();
    for i in 0..n_groups {
        let r = state.c[i];
        if state.s[i].len() != data.group(i).len() {
            out.push(format!("group {i}: seating vector length mismatch"));
            continue;
        }
        for (j, &l) in state.s[i].iter().enumerate() {
            if l >= state.restaurants[r].tables.len() {
                out.push(format!("group {i} obs {j}: dangling table index {l}"));
                continue;
            }
            counts[r][l] += 1;
            stats[r][l].push(data.group(i)[j]);
        }
    }
    let mut tau_refs = vec![0usize; state.tau.len()];
    for (r, rest) in state.restaurants.iter().enumerate() {
        for (l, t) in rest.tables.iter().enumerate() {
            if t.n != counts[r][l] {
                out.push(format!(
                    "restaurant {r} table {l}: count {} but {} customers seated",
                    t.n, counts[r][l]
                ));
            }
            if t.n > 0 {
                let expect = &stats[r][l];
                let scale = 1.0 + expect.sumsq.abs();
                if (t.stats.n - expect.n).abs() > 1e-9
                    || (t.stats.sum - expect.sum).abs() > 1e-8 * scale
                    || (t.stats.sumsq - expect.sumsq).abs() > 1e-8 * scale
                {
                    out.push(format!("restaurant {r} table {l}: stale sufficient statistics"));
                }
            }
            match t.dish {
                Dish::Private(p) => {
                    if p >= rest.psi.len() {
                        out.push(format!(
                            "restaurant {r} table {l}: dangling private atom reference {p}"
                        ));
                    }
                }
                Dish::Shared(k) => {
                    if k >= state.tau.len() {
                        out.push(format!(
                            "restaurant {r} table {l}: dangling shared atom reference {k}"
                        ));
                    } else if t.n > 0 {
                        tau_refs[k] += 1;
                    }
                }
            }
        }
        // No two live tables may own the same private atom.
        let mut seen = std::collections::HashSet::new();
        for (_, t) in rest.live_tables() {
            if let Dish::Private(p) = t.dish {
                if !seen.insert(p) {
                    out.push(format!("restaurant {r}: private atom {p} owned by two live tables"));
                }
            }
        }
    }
    if state.tau_mult.len() != state.tau.len() {
        out.push("tau multiplicity vector length mismatch".into());
    } else {
        for (k, (&cached, &counted)) in state.tau_mult.iter().zip(&tau_refs).enumerate() {
            if cached != counted {
                out.push(format!(
                    "shared dish {k}: cached multiplicity {cached} but {counted} live tables attached"
                ));
            }
        }
    }
    let total_seated: usize = state
        .restaurants
        .iter()
        .flat_map(|rest| rest.tables.iter().map(|t| t.n))
        .sum();
    if total_seated != data.total_len() {
        out.push(format!(
            "total customers {total_seated} differ from dataset size {}",
            data.total_len()
        ));
    }
    for (r, snap) in state.pseudo.iter().enumerate() {
        if let Some(snap) = snap {
            out.extend(snap.violations(&format!("restaurant {r} pseudoprior")));
        }
    }
    out
}

/// Set partition of groups induced by label equality, in order-of-first-
/// appearance canonical form; invariant under any relabeling bijection.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Partition {
    labels: Vec<usize>,
}

impl Partition {
    pub fn from_assignments(c: &[usize]) -> Self {
        let mut map = std::collections::HashMap::new();
        let mut labels = Vec::with_capacity(c.len());
        for &ci in c {
            let next = map.len();
            labels.push(*map.entry(ci).or_insert(next));
        }
        Partition { labels }
    }

    /// Canonical block labels (0-based ranks of first appearance).
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_blocks(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    /// Blocks as 1-based group indices, ordered by first appearance.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut blocks = vec![Vec::new(); self.n_blocks()];
        for (i, &l) in self.labels.iter().enumerate() {
            blocks[l].push(i + 1);
        }
        blocks
    }

    pub fn same_block(&self, i: usize, j: usize) -> bool {
        self.labels[i] == self.labels[j]
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let blocks = self.blocks();
        let rendered: Vec<String> = blocks
            .iter()
            .map(|b| {
                let inner: Vec<String> = b.iter().map(usize::to_string).collect();
                format!("{{{}}}", inner.join(","))
            })
            .collect();
        write!(f, "{{{}}}", rendered.join(","))
    }
}

/// Canonical partition of the assignment vector.
pub fn canonical_partition(c: &[usize]) -> Partition {
    Partition::from_assignments(c)
}
