//! Synthetic benchmark datasets: seven scenarios covering homogeneous pairs,
//! weight and location shifts, four-population cluster structures (with one
//! skew-normal population), and a hundred-population five-block layout.

use crate::error::{Error, Result};
use crate::state::Dataset;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Scenario identifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScenarioId {
    I,
    II,
    III,
    IV,
    V,
    VI,
    VII,
}

impl std::str::FromStr for ScenarioId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_uppercase().as_str() {
            "I" | "1" => Ok(ScenarioId::I),
            "II" | "2" => Ok(ScenarioId::II),
            "III" | "3" => Ok(ScenarioId::III),
            "IV" | "4" => Ok(ScenarioId::IV),
            "V" | "5" => Ok(ScenarioId::V),
            "VI" | "6" => Ok(ScenarioId::VI),
            "VII" | "7" => Ok(ScenarioId::VII),
            other => Err(Error::Config(format!("unknown scenario '{other}' (expected I..VII)"))),
        }
    }
}

impl std::fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ScenarioId::I => "I",
            ScenarioId::II => "II",
            ScenarioId::III => "III",
            ScenarioId::IV => "IV",
            ScenarioId::V => "V",
            ScenarioId::VI => "VI",
            ScenarioId::VII => "VII",
        };
        write!(f, "{s}")
    }
}

/// One mixture component of a generating population.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Component {
    /// Mean and variance.
    Normal { mu: f64, var: f64 },
    /// Location, scale, shape.
    SkewNormal { xi: f64, omega: f64, alpha: f64 },
}

/// Weighted mixture describing one population's generating law.
pub type PopulationModel = Vec<(f64, Component)>;

/// Scenario request: which benchmark, group sizes, and the generation seed.
#[derive(Clone, Debug)]
pub struct ScenarioSpec {
    pub id: ScenarioId,
    pub n_per_group: usize,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn new(id: ScenarioId, n_per_group: usize, seed: u64) -> Self {
        Self { id, n_per_group, seed }
    }

    /// Generating mixtures per population.
    pub fn populations(&self) -> Vec<PopulationModel> {
        fn normal(mu: f64, sd: f64) -> Component {
            Component::Normal { mu, var: sd * sd }
        }
        fn normal_var(mu: f64, var: f64) -> Component {
            Component::Normal { mu, var }
        }
        match self.id {
            ScenarioId::I => {
                let pop = vec![(0.5, normal(0.0, 1.0)), (0.5, normal(5.0, 1.0))];
                vec![pop.clone(), pop]
            }
            ScenarioId::II => vec![
                vec![(0.9, normal(5.0, 0.6)), (0.1, normal(10.0, 0.6))],
                vec![(0.1, normal(5.0, 0.6)), (0.9, normal(0.0, 0.6))],
            ],
            ScenarioId::III => vec![
                vec![(0.8, normal(0.0, 1.0)), (0.2, normal(5.0, 1.0))],
                vec![(0.2, normal(0.0, 1.0)), (0.8, normal(5.0, 1.0))],
            ],
            ScenarioId::IV => vec![
                vec![(1.0, normal_var(0.0, 1.0))],
                vec![(1.0, normal_var(0.0, 1.0))],
                vec![(1.0, normal_var(0.0, 1.0))],
                vec![(1.0, Component::SkewNormal { xi: 0.0, omega: 1.0, alpha: 1.0 })],
            ],
            ScenarioId::V => vec![
                vec![(1.0, normal_var(0.0, 1.0))],
                vec![(1.0, normal_var(0.0, 2.25))],
                vec![(1.0, normal_var(0.0, 0.25))],
                vec![(1.0, normal_var(0.0, 1.0))],
            ],
            ScenarioId::VI => vec![
                vec![(0.5, normal_var(0.0, 1.0)), (0.5, normal_var(5.0, 1.0))],
                vec![(0.5, normal_var(0.0, 1.0)), (0.5, normal_var(5.0, 1.0))],
                vec![(0.5, normal_var(0.0, 1.0)), (0.5, normal_var(-5.0, 1.0))],
                vec![(0.5, normal_var(-5.0, 1.0)), (0.5, normal_var(5.0, 1.0))],
            ],
            ScenarioId::VII => {
                let blocks: [PopulationModel; 5] = [
                    vec![(0.5, normal_var(-5.0, 1.0)), (0.5, normal_var(5.0, 1.0))],
                    vec![(0.5, normal_var(-5.0, 1.0)), (0.5, normal_var(0.0, 1.0))],
                    vec![(0.5, normal_var(0.0, 1.0)), (0.5, normal_var(5.0, 0.1))],
                    vec![(0.5, normal_var(-10.0, 1.0)), (0.5, normal_var(0.0, 1.0))],
                    vec![(0.1, normal_var(-10.0, 1.0)), (0.9, normal_var(0.0, 1.0))],
                ];
                let mut pops = Vec::with_capacity(100);
                for block in &blocks {
                    for _ in 0..20 {
                        pops.push(block.clone());
                    }
                }
                pops
            }
        }
    }

    /// Ground-truth partition of the populations (canonical labels).
    pub fn true_partition(&self) -> crate::state::Partition {
        let labels: Vec<usize> = match self.id {
            ScenarioId::I => vec![0, 0],
            ScenarioId::II | ScenarioId::III => vec![0, 1],
            ScenarioId::IV => vec![0, 0, 0, 1],
            ScenarioId::V => vec![0, 1, 2, 0],
            ScenarioId::VI => vec![0, 0, 1, 2],
            ScenarioId::VII => (0..100).map(|i| i / 20).collect(),
        };
        crate::state::canonical_partition(&labels)
    }
}

/// Skew-normal draw via the two-normal representation
/// `xi + omega (delta |z1| + sqrt(1 - delta^2) z2)`, `delta = alpha / sqrt(1 + alpha^2)`.
pub fn skew_normal_draw<R: Rng + ?Sized>(xi: f64, omega: f64, alpha: f64, rng: &mut R) -> f64 {
    let delta = alpha / (1.0 + alpha * alpha).sqrt();
    let std = Normal::new(0.0, 1.0).expect("valid normal");
    let z1: f64 = std.sample(rng);
    let z2: f64 = std.sample(rng);
    xi + omega * (delta * z1.abs() + (1.0 - delta * delta).sqrt() * z2)
}

fn component_draw<R: Rng + ?Sized>(component: &Component, rng: &mut R) -> f64 {
    match *component {
        Component::Normal { mu, var } => {
            Normal::new(mu, var.sqrt()).expect("valid normal").sample(rng)
        }
        Component::SkewNormal { xi, omega, alpha } => skew_normal_draw(xi, omega, alpha, rng),
    }
}

fn mixture_draw<R: Rng + ?Sized>(model: &PopulationModel, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (w, comp) in model {
        acc += w;
        if u < acc {
            return component_draw(comp, rng);
        }
    }
    component_draw(&model.last().expect("nonempty model").1, rng)
}

/// Generate the scenario's dataset; deterministic for a given RNG stream.
pub fn generate_scenario<R: Rng + ?Sized>(spec: &ScenarioSpec, rng: &mut R) -> Result<Dataset> {
    if spec.n_per_group == 0 {
        return Err(Error::Config("n_per_group must be >= 1".into()));
    }
    let groups: Vec<Vec<f64>> = spec
        .populations()
        .iter()
        .map(|model| (0..spec.n_per_group).map(|_| mixture_draw(model, rng)).collect())
        .collect();
    Dataset::from_groups(groups)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn rng(seed: u64) -> ChaCha12Rng {
        ChaCha12Rng::seed_from_u64(seed)
    }

    #[test]
    fn scenario_shapes() {
        for (id, groups) in [
            (ScenarioId::I, 2),
            (ScenarioId::II, 2),
            (ScenarioId::III, 2),
            (ScenarioId::IV, 4),
            (ScenarioId::V, 4),
            (ScenarioId::VI, 4),
            (ScenarioId::VII, 100),
        ] {
            let spec = ScenarioSpec::new(id, 10, 1);
            let data = generate_scenario(&spec, &mut rng(1)).unwrap();
            assert_eq!(data.n_groups(), groups);
            assert!(data.groups().iter().all(|g| g.len() == 10));
        }
    }

    #[test]
    fn scenario_one_is_bimodal_around_zero_and_five() {
        let spec = ScenarioSpec::new(ScenarioId::I, 4000, 2);
        let data = generate_scenario(&spec, &mut rng(2)).unwrap();
        for g in data.groups() {
            let near0 = g.iter().filter(|y| y.abs() < 2.0).count() as f64 / g.len() as f64;
            let near5 = g.iter().filter(|y| (**y - 5.0).abs() < 2.0).count() as f64 / g.len() as f64;
            assert!(near0 > 0.4 && near5 > 0.4, "modes {near0} / {near5}");
        }
    }

    #[test]
    fn generation_deterministic_per_seed() {
        let spec = ScenarioSpec::new(ScenarioId::IV, 50, 9);
        let a = generate_scenario(&spec, &mut rng(9)).unwrap();
        let b = generate_scenario(&spec, &mut rng(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn skew_normal_mean_matches_closed_form() {
        // SN(0, 1, 1) has mean delta sqrt(2/pi) = 1/sqrt(pi).
        let mut r = rng(3);
        let n = 1_000_000;
        let draws: Vec<f64> = (0..n).map(|_| skew_normal_draw(0.0, 1.0, 1.0, &mut r)).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let expected = 1.0 / std::f64::consts::PI.sqrt();
        let var = draws.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        let se = (var / n as f64).sqrt();
        assert!(
            (mean - expected).abs() < 3.0 * se,
            "skew-normal mean {mean} vs {expected} (3se = {})",
            3.0 * se
        );
    }

    #[test]
    fn scenario_seven_block_structure() {
        let spec = ScenarioSpec::new(ScenarioId::VII, 5, 4);
        let truth = spec.true_partition();
        assert_eq!(truth.n_blocks(), 5);
        assert!(truth.same_block(0, 19));
        assert!(!truth.same_block(19, 20));
    }
}
