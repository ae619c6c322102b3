//! End-of-sweep cleanup: drop tables nobody sits at, drop unreferenced
//! atoms, and compact every label in order of the sorted surviving indices.

use crate::state::{ChainState, Dish};

/// Remove dead tables and orphaned atoms, compacting seat indices, private
/// atom labels (per restaurant), and shared atom labels (globally); stale
/// injected placeholders are discarded.
pub fn relabel(state: &mut ChainState) {
    let n_rest = state.n_restaurants();
    for r in 0..n_rest {
        let old_tables = std::mem::take(&mut state.restaurants[r].tables);
        let mut table_map = vec![usize::MAX; old_tables.len()];
        let mut tables = Vec::with_capacity(old_tables.len());
        for (l, t) in old_tables.into_iter().enumerate() {
            if t.n > 0 {
                table_map[l] = tables.len();
                tables.push(t);
            }
        }
        state.restaurants[r].tables = tables;
        for i in 0..state.n_groups() {
            if state.c[i] == r {
                for seat in &mut state.s[i] {
                    debug_assert_ne!(table_map[*seat], usize::MAX);
                    *seat = table_map[*seat];
                }
            }
        }

        // Compact private atoms by sorted surviving label.
        let mut used: Vec<usize> = state.restaurants[r]
            .tables
            .iter()
            .filter_map(|t| match t.dish {
                Dish::Private(p) => Some(p),
                Dish::Shared(_) => None,
            })
            .collect();
        used.sort_unstable();
        used.dedup();
        let mut psi_map = vec![usize::MAX; state.restaurants[r].psi.len()];
        for (new, &old) in used.iter().enumerate() {
            psi_map[old] = new;
        }
        state.restaurants[r].psi = used.iter().map(|&p| state.restaurants[r].psi[p]).collect();
        for t in &mut state.restaurants[r].tables {
            if let Dish::Private(p) = t.dish {
                t.dish = Dish::Private(psi_map[p]);
            }
        }
    }

    // Compact shared atoms by sorted surviving label (attached multiplicity
    // positive).
    let keep: Vec<usize> = state
        .tau_mult
        .iter()
        .enumerate()
        .filter(|(_, m)| **m > 0)
        .map(|(k, _)| k)
        .collect();
    let mut tau_map = vec![usize::MAX; state.tau.len()];
    for (new, &old) in keep.iter().enumerate() {
        tau_map[old] = new;
    }
    state.tau = keep.iter().map(|&k| state.tau[k]).collect();
    state.tau_mult = keep.iter().map(|&k| state.tau_mult[k]).collect();
    for rest in &mut state.restaurants {
        for t in &mut rest.tables {
            if let Dish::Shared(k) = t.dish {
                debug_assert_ne!(tau_map[k], usize::MAX);
                t.dish = Dish::Shared(tau_map[k]);
            }
        }
    }

    state.pseudo = vec![None; n_rest];
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{GaussStats, GaussianParam};
    use crate::state::{ChainState, Dataset, Restaurant, Table};

    fn atom(tag: f64) -> GaussianParam {
        GaussianParam { mu: tag, sigma2: 1.0 }
    }

    /// Builds a raw state from paper-style 1-based (s, h, t) vectors; table
    /// counts derive from the seat assignments.
    fn build_state(
        data: &Dataset,
        seats: Vec<Vec<usize>>,
        areas: Vec<Vec<u8>>,
        sources: Vec<Vec<usize>>,
        psi_count: Vec<usize>,
        tau_count: usize,
    ) -> ChainState {
        let n_groups = data.n_groups();
        let mut state = ChainState::unseated(
            data,
            (0..n_groups).collect(),
            vec![1.0 / n_groups as f64; n_groups],
            0.5,
        );
        state.tau = (0..tau_count).map(|k| atom(100.0 + k as f64)).collect();
        state.tau_mult = vec![0; tau_count];
        for r in 0..n_groups {
            let mut rest = Restaurant {
                tables: Vec::new(),
                psi: (0..psi_count[r]).map(|p| atom(10.0 * (r + 1) as f64 + p as f64)).collect(),
            };
            for (h, t) in areas[r].iter().zip(&sources[r]) {
                let dish = if *h == 1 { Dish::Private(t - 1) } else { Dish::Shared(t - 1) };
                rest.tables.push(Table { dish, n: 0, stats: GaussStats::default() });
            }
            for (j, &seat) in seats[r].iter().enumerate() {
                let table = &mut rest.tables[seat - 1];
                table.n += 1;
                table.stats.push(data.group(r)[j]);
            }
            for t in &rest.tables {
                if t.n > 0 {
                    if let Dish::Shared(k) = t.dish {
                        state.tau_mult[k] += 1;
                    }
                }
            }
            state.restaurants[r] = rest;
            state.s[r] = seats[r].iter().map(|x| x - 1).collect();
        }
        state
    }

    fn seats_1based(state: &ChainState, r: usize) -> Vec<usize> {
        state.s[r].iter().map(|x| x + 1).collect()
    }

    fn areas_and_sources(state: &ChainState, r: usize) -> (Vec<u8>, Vec<usize>) {
        let mut h = Vec::new();
        let mut t = Vec::new();
        for table in &state.restaurants[r].tables {
            match table.dish {
                Dish::Private(p) => {
                    h.push(1);
                    t.push(p + 1);
                }
                Dish::Shared(k) => {
                    h.push(0);
                    t.push(k + 1);
                }
            }
        }
        (h, t)
    }

    /// Two-restaurant worked case: dead tables 2, 4, 6 in the first room and
    /// 2, 5, 6 in the second; only the second shared atom survives, and the
    /// first room keeps its first and third private atoms.
    #[test]
    fn worked_two_restaurant_example() {
        let data = Dataset::from_groups(vec![
            vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6],
            vec![1.0, 1.1, 1.2, 1.3, 1.4],
        ])
        .unwrap();
        let mut state = build_state(
            &data,
            vec![vec![5, 3, 1, 1, 3, 5, 5], vec![1, 3, 4, 1, 3]],
            vec![vec![0, 0, 1, 1, 1, 0], vec![1, 0, 1, 1, 0, 0]],
            vec![vec![2, 1, 1, 3, 3, 3], vec![1, 1, 3, 2, 2, 3]],
            vec![3, 3],
            3,
        );
        let tau_before = state.tau.clone();
        let psi1_before = state.restaurants[0].psi.clone();

        relabel(&mut state);

        assert_eq!(seats_1based(&state, 0), vec![3, 2, 1, 1, 2, 3, 3]);
        let (h1, t1) = areas_and_sources(&state, 0);
        assert_eq!(h1, vec![0, 1, 1]);
        assert_eq!(t1, vec![1, 1, 2]);

        assert_eq!(seats_1based(&state, 1), vec![1, 2, 3, 1, 2]);
        let (h2, t2) = areas_and_sources(&state, 1);
        assert_eq!(h2, vec![1, 1, 1]);
        assert_eq!(t2, vec![1, 3, 2]);

        // Shared atoms: only the old second one survives, relabeled first.
        assert_eq!(state.tau, vec![tau_before[1]]);
        assert_eq!(state.tau_mult, vec![1]);
        // First room's private atoms: old first and third survive in order.
        assert_eq!(state.restaurants[0].psi, vec![psi1_before[0], psi1_before[2]]);
        // Second room's private atoms all survive untouched.
        assert_eq!(state.restaurants[1].psi.len(), 3);
    }

    #[test]
    fn no_dead_tables_is_identity() {
        let data = Dataset::from_groups(vec![vec![0.0, 0.1, 0.2]]).unwrap();
        let mut state = build_state(
            &data,
            vec![vec![1, 2, 1]],
            vec![vec![1, 0]],
            vec![vec![1, 1]],
            vec![1],
            1,
        );
        let before = state.clone();
        relabel(&mut state);
        assert_eq!(seats_1based(&state, 0), vec![1, 2, 1]);
        let (h, t) = areas_and_sources(&state, 0);
        assert_eq!(h, vec![1, 0]);
        assert_eq!(t, vec![1, 1]);
        assert_eq!(state.tau, before.tau);
        assert_eq!(state.restaurants[0].psi, before.restaurants[0].psi);
    }
}
