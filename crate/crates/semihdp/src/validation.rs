//! Monte-Carlo cross-checks of the closed-form prior quantities: simulation
//! routes that are independent of the formulas they test. Driven by the
//! `oracle-check` command and by the acceptance suite.

use crate::dist::{mixture_l2_distance_sq, FiniteMixture, GaussianParam};
use crate::oracles::{
    peppf_degenerate, semihdp_covariance, semihdp_moment, set_partitions, tie_probability,
    PeppfInput,
};
use crate::state::{seat_group_prior, ChainState, Dataset, Dish, HyperParams};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Beta, Distribution};

/// Outcome of one named check.
#[derive(Clone, Debug)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckReport {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }
}

/// The (kappa, gamma) grid shared by the prior checks.
pub const KAPPA_GRID: [f64; 3] = [0.0, 0.5, 0.9];
pub const GAMMA_GRID: [f64; 3] = [0.5, 1.0, 2.0];

/// Two-customer tie frequencies under fixed assignments to two restaurants,
/// against `(1 - kappa)^2 / (1 + gamma)`, within three binomial standard
/// errors.
pub fn check_tie_probability(reps: usize, seed: u64) -> Vec<CheckReport> {
    let data = Dataset::from_groups(vec![vec![0.0], vec![0.0]]).unwrap();
    let mut out = Vec::new();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    for &kappa in &KAPPA_GRID {
        for &gamma in &GAMMA_GRID {
            let mut hyper = HyperParams::defaults(2);
            hyper.gamma = gamma;
            hyper.fixed_kappa = Some(kappa);
            let mut ties = 0usize;
            for _ in 0..reps {
                let mut state = ChainState::unseated(&data, vec![0, 1], vec![0.5, 0.5], kappa);
                seat_group_prior(&mut state, &data, &hyper, 0, &mut rng);
                seat_group_prior(&mut state, &data, &hyper, 1, &mut rng);
                let d0 = state.restaurants[0].tables[state.s[0][0]].dish;
                let d1 = state.restaurants[1].tables[state.s[1][0]].dish;
                if let (Dish::Shared(a), Dish::Shared(b)) = (d0, d1) {
                    if a == b {
                        ties += 1;
                    }
                }
            }
            let freq = ties as f64 / reps as f64;
            let expected = tie_probability(kappa, gamma);
            let se = (expected * (1.0 - expected) / reps as f64).sqrt().max(1.0 / reps as f64);
            let passed = (freq - expected).abs() <= 3.0 * se;
            out.push(CheckReport::new(
                format!("tie-probability kappa={kappa} gamma={gamma}"),
                passed,
                format!("empirical {freq:.5} vs closed form {expected:.5} (3se {:.5})", 3.0 * se),
            ));
        }
    }
    out
}

/// Base probabilities of the three-atom stand-in induced by a standard
/// normal over the events `(-inf, 0], (0, 1], (1, inf)`.
pub fn three_atom_base() -> [f64; 3] {
    let std = GaussianParam { mu: 0.0, sigma2: 1.0 };
    let phi0 = std.cdf(0.0);
    let phi1 = std.cdf(1.0);
    [phi0, phi1 - phi0, 1.0 - phi1]
}

/// Truncated stick-breaking draw of a Dirichlet process over a three-atom
/// base; the unassigned residual is below `trunc`.
fn dp_three_atoms<R: Rng + ?Sized>(
    concentration: f64,
    base: &[f64; 3],
    trunc: f64,
    rng: &mut R,
) -> [f64; 3] {
    let beta = Beta::new(1.0, concentration).expect("valid beta");
    let mut out = [0.0f64; 3];
    let mut remaining = 1.0f64;
    while remaining > trunc {
        let v: f64 = beta.sample(rng);
        let w = v * remaining;
        remaining *= 1.0 - v;
        let u: f64 = rng.random();
        let idx = if u < base[0] {
            0
        } else if u < base[0] + base[1] {
            1
        } else {
            2
        };
        out[idx] += w;
    }
    out
}

/// One truncated prior draw of a pair `(F_1, F_2)` sharing the same
/// centering draw.
fn prior_pair_draw<R: Rng + ?Sized>(
    kappa: f64,
    alpha: f64,
    gamma: f64,
    base: &[f64; 3],
    rng: &mut R,
) -> ([f64; 3], [f64; 3]) {
    let gt = dp_three_atoms(gamma, base, 1e-8, rng);
    let pt = [
        kappa * base[0] + (1.0 - kappa) * gt[0],
        kappa * base[1] + (1.0 - kappa) * gt[1],
        kappa * base[2] + (1.0 - kappa) * gt[2],
    ];
    let f1 = dp_three_atoms(alpha, &pt, 1e-8, rng);
    let f2 = dp_three_atoms(alpha, &pt, 1e-8, rng);
    (f1, f2)
}

/// Monte-Carlo covariance of `(F_1(A), F_2(B))` over truncated prior draws
/// against the closed form, for every event pair on the three-atom base.
pub fn check_covariance(reps: usize, seed: u64) -> Vec<CheckReport> {
    let base = three_atom_base();
    let alpha = 1.0;
    let mut out = Vec::new();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    for &kappa in &KAPPA_GRID {
        for &gamma in &GAMMA_GRID {
            let draws: Vec<([f64; 3], [f64; 3])> =
                (0..reps).map(|_| prior_pair_draw(kappa, alpha, gamma, &base, &mut rng)).collect();
            for a in 0..3 {
                for b in 0..3 {
                    let xs: Vec<f64> = draws.iter().map(|d| d.0[a]).collect();
                    let ys: Vec<f64> = draws.iter().map(|d| d.1[b]).collect();
                    let mx = xs.iter().sum::<f64>() / reps as f64;
                    let my = ys.iter().sum::<f64>() / reps as f64;
                    let prods: Vec<f64> =
                        xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).collect();
                    let est = prods.iter().sum::<f64>() / reps as f64;
                    let var =
                        prods.iter().map(|z| (z - est) * (z - est)).sum::<f64>() / reps as f64;
                    let se = (var / reps as f64).sqrt();
                    let g0_ab = if a == b { base[a] } else { 0.0 };
                    let expected =
                        semihdp_covariance(kappa, gamma, base[a], base[b], g0_ab).unwrap();
                    let passed = (est - expected).abs() <= 3.0 * se;
                    out.push(CheckReport::new(
                        format!("covariance kappa={kappa} gamma={gamma} events=({a},{b})"),
                        passed,
                        format!("mc {est:.5} vs closed form {expected:.5} (3se {:.5})", 3.0 * se),
                    ));
                }
            }
        }
    }
    out
}

/// Monte-Carlo prior moments `E[F_1(A)^n]`, n = 2, 3, against the two-level
/// closed form; n = 1 must coincide with the base probability exactly. One
/// set of truncated draws per grid point serves every event.
pub fn check_moments(reps: usize, seed: u64) -> Vec<CheckReport> {
    let base = three_atom_base();
    let alpha = 1.0;
    let mut out = Vec::new();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    for &kappa in &KAPPA_GRID {
        for &gamma in &GAMMA_GRID {
            let draws: Vec<[f64; 3]> = (0..reps)
                .map(|_| {
                    let gt = dp_three_atoms(gamma, &base, 1e-8, &mut rng);
                    let pt = [
                        kappa * base[0] + (1.0 - kappa) * gt[0],
                        kappa * base[1] + (1.0 - kappa) * gt[1],
                        kappa * base[2] + (1.0 - kappa) * gt[2],
                    ];
                    dp_three_atoms(alpha, &pt, 1e-8, &mut rng)
                })
                .collect();
            for a in 0..3 {
                let exact_first = semihdp_moment(1, kappa, alpha, gamma, base[a]);
                out.push(CheckReport::new(
                    format!("moment n=1 kappa={kappa} gamma={gamma} event={a}"),
                    (exact_first - base[a]).abs() < 1e-14,
                    format!("closed form {exact_first} vs base {}", base[a]),
                ));
                for n in [2usize, 3] {
                    let powered: Vec<f64> = draws.iter().map(|f| f[a].powi(n as i32)).collect();
                    let est = powered.iter().sum::<f64>() / reps as f64;
                    let var =
                        powered.iter().map(|z| (z - est) * (z - est)).sum::<f64>() / reps as f64;
                    let se = (var / reps as f64).sqrt();
                    let expected = semihdp_moment(n, kappa, alpha, gamma, base[a]);
                    let passed = (est - expected).abs() <= 3.0 * se;
                    out.push(CheckReport::new(
                        format!("moment n={n} kappa={kappa} gamma={gamma} event={a}"),
                        passed,
                        format!("mc {est:.5} vs closed form {expected:.5} (3se {:.5})", 3.0 * se),
                    ));
                }
            }
        }
    }
    out
}

/// Joint two-sample partition configuration of a prior seating draw,
/// expressed against the first group's size.
fn partition_to_config(labels: &[usize], n1: usize, alpha: f64, pi1: f64) -> PeppfInput {
    let k = labels.iter().max().unwrap() + 1;
    let mut cfg = PeppfInput { n1: vec![], n2: vec![], q1: vec![], q2: vec![], alpha, pi1 };
    for block in 0..k {
        let in1 = labels[..n1].iter().filter(|l| **l == block).count();
        let in2 = labels[n1..].iter().filter(|l| **l == block).count();
        match (in1, in2) {
            (0, 0) => {}
            (a, 0) => cfg.n1.push(a),
            (0, b) => cfg.n2.push(b),
            (a, b) => {
                cfg.q1.push(a);
                cfg.q2.push(b);
            }
        }
    }
    cfg
}

/// Degenerate-regime joint partition law: exhaustive tallies of prior
/// seatings at kappa = 1 against the closed form, for one and two customers
/// per group, plus the normalization identity.
pub fn check_peppf(reps: usize, seed: u64) -> Vec<CheckReport> {
    let alpha = 1.0;
    let pi1 = 0.5;
    let mut out = Vec::new();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    for n_per_group in [1usize, 2] {
        let n_total = 2 * n_per_group;
        let partitions = set_partitions(n_total);
        let closed: Vec<f64> = partitions
            .iter()
            .map(|labels| {
                peppf_degenerate(&partition_to_config(labels, n_per_group, alpha, pi1)).unwrap()
            })
            .collect();
        let total: f64 = closed.iter().sum();
        out.push(CheckReport::new(
            format!("peppf normalization n={n_per_group}+{n_per_group}"),
            (total - 1.0).abs() < 1e-10,
            format!("closed-form mass {total}"),
        ));

        let data =
            Dataset::from_groups(vec![vec![0.0; n_per_group], vec![0.0; n_per_group]]).unwrap();
        let mut hyper = HyperParams::defaults(2);
        hyper.alpha = alpha;
        hyper.fixed_kappa = Some(1.0);
        let mut counts = vec![0usize; partitions.len()];
        for _ in 0..reps {
            let together = rng.random::<f64>() < pi1;
            let c = if together { vec![0usize, 0] } else { vec![0usize, 1] };
            let mut state = ChainState::unseated(&data, c, vec![0.5, 0.5], 1.0);
            seat_group_prior(&mut state, &data, &hyper, 0, &mut rng);
            seat_group_prior(&mut state, &data, &hyper, 1, &mut rng);
            // Dish identity per customer; kappa = 1 makes every dish private.
            let mut ids = Vec::with_capacity(n_total);
            for i in 0..2 {
                let r = state.c[i];
                for &l in &state.s[i] {
                    ids.push(match state.restaurants[r].tables[l].dish {
                        Dish::Private(p) => (r, p),
                        Dish::Shared(k) => (usize::MAX, k),
                    });
                }
            }
            let labels = canonical_labels(&ids);
            let slot = partitions.iter().position(|p| *p == labels).expect("canonical form");
            counts[slot] += 1;
        }
        for (slot, labels) in partitions.iter().enumerate() {
            let expected = closed[slot];
            let freq = counts[slot] as f64 / reps as f64;
            let se = (expected * (1.0 - expected) / reps as f64).sqrt().max(1.0 / reps as f64);
            let passed = (freq - expected).abs() <= 3.0 * se;
            out.push(CheckReport::new(
                format!("peppf n={n_per_group}+{n_per_group} partition={labels:?}"),
                passed,
                format!("empirical {freq:.5} vs closed form {expected:.5} (3se {:.5})", 3.0 * se),
            ));
        }
    }
    out
}

fn canonical_labels<T: PartialEq>(ids: &[T]) -> Vec<usize> {
    let mut seen: Vec<&T> = Vec::new();
    ids.iter()
        .map(|id| {
            if let Some(pos) = seen.iter().position(|s| *s == id) {
                pos
            } else {
                seen.push(id);
                seen.len() - 1
            }
        })
        .collect()
}

/// Closed-form squared L2 distance against trapezoid quadrature on
/// [-30, 30] with 1e5 nodes, for random mixture pairs, within 1e-6.
pub fn check_l2_quadrature(pairs: usize, seed: u64) -> Vec<CheckReport> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut passed = true;
    for _ in 0..pairs {
        let a = random_mixture(&mut rng);
        let b = random_mixture(&mut rng);
        let closed = mixture_l2_distance_sq(&a, &b);
        let quad = l2_sq_quadrature(&a, &b);
        let err = (closed - quad).abs();
        worst = worst.max(err);
        if err > 1e-6 {
            passed = false;
        }
    }
    vec![CheckReport::new(
        format!("l2-closed-form vs quadrature ({pairs} pairs)"),
        passed,
        format!("worst absolute error {worst:.3e} (tolerance 1e-6)"),
    )]
}

fn random_mixture(rng: &mut ChaCha12Rng) -> FiniteMixture {
    let k = 1 + (rng.random::<f64>() * 4.0) as usize;
    let mut w: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 0.05).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    let comps = (0..k)
        .map(|_| GaussianParam {
            mu: rng.random::<f64>() * 10.0 - 5.0,
            sigma2: 0.1 + rng.random::<f64>() * 3.9,
        })
        .collect();
    FiniteMixture::new(w, comps).unwrap()
}

fn l2_sq_quadrature(a: &FiniteMixture, b: &FiniteMixture) -> f64 {
    let n = 100_000;
    let (lo, hi) = (-30.0, 30.0);
    let h = (hi - lo) / (n - 1) as f64;
    let mut acc = 0.0;
    for k in 0..n {
        let x = lo + h * k as f64;
        let d = a.density(x) - b.density(x);
        let w = if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
        acc += w * d * d;
    }
    acc * h
}

/// Scaled repetition counts for the full suite.
#[derive(Clone, Copy, Debug)]
pub struct CheckBudget {
    pub tie_reps: usize,
    pub covariance_reps: usize,
    pub moment_reps: usize,
    pub peppf_reps: usize,
    pub l2_pairs: usize,
}

impl CheckBudget {
    pub fn reference() -> Self {
        Self {
            tie_reps: 100_000,
            covariance_reps: 10_000,
            moment_reps: 100_000,
            peppf_reps: 1_000_000,
            l2_pairs: 100,
        }
    }

    pub fn fast() -> Self {
        Self {
            tie_reps: 20_000,
            covariance_reps: 4_000,
            moment_reps: 20_000,
            peppf_reps: 100_000,
            l2_pairs: 20,
        }
    }
}

/// The full oracle suite.
pub fn run_all_checks(budget: &CheckBudget, seed: u64) -> Vec<CheckReport> {
    let mut out = Vec::new();
    out.extend(check_tie_probability(budget.tie_reps, seed));
    out.extend(check_covariance(budget.covariance_reps, seed.wrapping_add(1)));
    out.extend(check_moments(budget.moment_reps, seed.wrapping_add(2)));
    out.extend(check_peppf(budget.peppf_reps, seed.wrapping_add(3)));
    out.extend(check_l2_quadrature(budget.l2_pairs, seed.wrapping_add(4)));
    out
}
