//! Cross-module properties on random inputs.

mod common;

use std::collections::BTreeSet;

use common::*;
use dx::chase::canonical_solution;
use dx::corelib::core_solution;
use dx::gcwa::answers_for_mapping;
use dx::model::{find_homomorphism, Instance, Value, ValueMap};
use dx::oracle::{budget_is_stable, minimal_possible_worlds, Budget, Oracle, Semantics};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const MAPPINGS: [&str; 6] = ["copy.dx", "leq1.dx", "leq2.dx", "lcf.dx", "ef.dx", "eff.dx"];

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Smallest renaming of `fresh` applied to `t`.
fn canonical(t: &Instance, fresh: &[Value]) -> Instance {
    fn perms(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        perms(n - 1)
            .into_iter()
            .flat_map(|p| (0..n).map(move |k| {
                let mut q = p.clone();
                q.insert(k, n - 1);
                q
            }))
            .collect()
    }
    perms(fresh.len())
        .into_iter()
        .map(|p| {
            let f: ValueMap = fresh.iter().cloned().zip(p.iter().map(|&k| fresh[k].clone())).collect();
            t.rename(&f)
        })
        .min()
        .expect("one permutation")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn canonical_solution_maps_into_every_enumerated_solution(seed in any::<u64>(), k in 0..MAPPINGS.len()) {
        let m = mapping(MAPPINGS[k]);
        let mut r = rng(seed);
        let s = random_source(&m, &mut r, 2);
        let can = canonical_solution(&m, &s).unwrap();
        let o = Oracle::new(&m, &s, Budget { fresh_constants: 1, max_atoms: can.len() + 1, max_fixpoint_rounds: 3 }, &BTreeSet::new()).force_general();
        for t in o.gcwa_star_solutions().unwrap().members {
            prop_assert!(find_homomorphism(&can, &t, &ValueMap::new()).is_some(), "{can} into {t}");
        }
    }

    #[test]
    fn minimal_solutions_are_minimal_worlds_of_the_core(seed in any::<u64>(), k in 0..MAPPINGS.len()) {
        let m = mapping(MAPPINGS[k]);
        let s = random_source(&m, &mut rng(seed), 2);
        let core = core_solution(&m, &s).unwrap();
        let n = core.nulls().len();
        let o = Oracle::new(&m, &s, Budget { fresh_constants: n, max_atoms: core.len(), max_fixpoint_rounds: 3 }, &BTreeSet::new());
        let fresh: Vec<Value> = o.universe().into_iter().filter(|v| !s.consts().contains(v) && !m.consts().contains(v)).collect();
        let by_oracle: BTreeSet<Instance> = o.minimal_ground_solutions().unwrap().members.iter().map(|t| canonical(t, &fresh)).collect();
        let mut known = s.consts();
        known.extend(m.consts());
        let by_worlds: BTreeSet<Instance> = minimal_possible_worlds(&core, &known).unwrap().iter().map(|t| canonical(t, &fresh)).collect();
        prop_assert_eq!(by_oracle, by_worlds);
    }

    #[test]
    fn equivalent_mappings_agree_under_gcwa_star(seed in any::<u64>()) {
        let (m1, m2) = (mapping("leq1.dx"), mapping("leq2.dx"));
        let mut r = rng(seed);
        let s = random_source(&m1, &mut r, 3);
        let q = random_universal(&m1, &mut r);
        prop_assert_eq!(answers_for_mapping(&m1, &s, &q).unwrap(), answers_for_mapping(&m2, &s, &q).unwrap(), "{}", q);
    }

    #[test]
    fn one_more_fresh_constant_changes_nothing(seed in any::<u64>(), k in 0..MAPPINGS.len(), sem in 0..3usize) {
        let m = mapping(MAPPINGS[k]);
        let mut r = rng(seed);
        let s = random_source(&m, &mut r, 2);
        let q = random_universal(&m, &mut r);
        let core = core_solution(&m, &s).unwrap();
        let sem = [Semantics::GcwaStar, Semantics::Egcwa, Semantics::Gcwa][sem];
        // the oracle is exponential in the core's nulls
        prop_assume!(core.nulls().len() <= 3);
        let mut b = Budget { fresh_constants: core.nulls().len().max(1), max_atoms: core.len() + 2, max_fixpoint_rounds: 3 };
        if sem == Semantics::Gcwa {
            // GCWA enumerates subsets of every atom of every minimal solution
            prop_assume!(core.nulls().len() <= 2);
            b.max_atoms = core.len().max(1);
        }
        prop_assert!(budget_is_stable(&m, &s, &q, sem, b).unwrap(), "{} under {}", q, sem);
    }
}

#[test]
fn fixture_answers_are_budget_stable() {
    for (mf, sf) in ST_SETTINGS {
        let m = mapping(mf);
        let s = source(&m, sf);
        let core = core_solution(&m, &s).unwrap();
        if core.nulls().len() > 3 {
            continue;
        }
        let qf = mf.replace(".dx", ".q").replace("leq1", "leq").replace("leq2", "leq");
        if !fixture(&qf).exists() {
            continue;
        }
        for q in queries(&m, &qf) {
            let b = Budget { fresh_constants: core.nulls().len().max(1), max_atoms: core.len() + 2, max_fixpoint_rounds: 3 };
            assert!(budget_is_stable(&m, &s, &q, Semantics::GcwaStar, b).unwrap(), "{mf}: {q}");
        }
    }
}
