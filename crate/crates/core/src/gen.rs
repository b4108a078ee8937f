//! Seeded random corpus of small exchange settings.
//!
//! Source schema P/1, R/2 and target schema E/2, F/2 over the constants
//! a, b, c. Mappings consist of packed st-tgds, sources have at most six
//! atoms, and queries have at most three literals.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corelib::core_solution;
use crate::logic::{FOQuery, Formula};
use crate::model::{atom, Instance, PAtom, Schema, SchemaMapping, StTgd, Term};

/// Seed used when none is given.
pub const DEFAULT_SEED: u64 = 0x5eed;

const CONSTS: [&str; 3] = ["a", "b", "c"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CorpusConfig {
    pub max_source_atoms: usize,
    pub max_head_atoms: usize,
    pub max_core_nulls: usize,
    pub max_literals: usize,
}

impl Default for CorpusConfig {
    fn default() -> CorpusConfig {
        CorpusConfig { max_source_atoms: 6, max_head_atoms: 3, max_core_nulls: 3, max_literals: 3 }
    }
}

/// One generated setting.
#[derive(Clone, Debug, PartialEq)]
pub struct Triple {
    pub mapping: SchemaMapping,
    pub source: Instance,
    pub query: FOQuery,
}

fn conj(mut fs: Vec<Formula>) -> Formula {
    if fs.len() == 1 {
        fs.remove(0)
    } else {
        Formula::And(fs)
    }
}

pub struct Corpus {
    rng: ChaCha8Rng,
    cfg: CorpusConfig,
}

pub fn source_schema() -> Schema {
    Schema::new(&[("P", 1), ("R", 2)])
}

pub fn target_schema() -> Schema {
    Schema::new(&[("E", 2), ("F", 2)])
}

impl Corpus {
    pub fn new(seed: u64) -> Corpus {
        Corpus::with_config(seed, CorpusConfig::default())
    }

    pub fn with_config(seed: u64, cfg: CorpusConfig) -> Corpus {
        Corpus { rng: ChaCha8Rng::seed_from_u64(seed), cfg }
    }

    /// A packed st-tgd: every head atom mentions the first existential
    /// variable, or the head is a single atom.
    pub fn tgd(&mut self) -> StTgd {
        let rng = &mut self.rng;
        let (body, vars): (Vec<PAtom>, Vec<&str>) = match rng.gen_range(0..4) {
            0 => (vec![PAtom::new("P", &["x"])], vec!["x"]),
            1 => (vec![PAtom::new("R", &["x", "y"])], vec!["x", "y"]),
            2 => (vec![PAtom::new("R", &["x", "x"])], vec!["x"]),
            _ => (vec![PAtom::new("R", &["x", "y"]), PAtom::new("P", &["y"])], vec!["x", "y"]),
        };
        let heads = rng.gen_range(1..=self.cfg.max_head_atoms);
        let n_exists = if heads > 1 { rng.gen_range(1..=2) } else { rng.gen_range(0..=2) };
        let exists: Vec<&str> = ["z", "w"][..n_exists].to_vec();
        let mut terms: Vec<&str> = vars.clone();
        terms.extend(&exists);
        let mut head = Vec::new();
        for _ in 0..heads {
            let rel = if rng.gen_bool(0.5) { "E" } else { "F" };
            let mut args = [*terms.choose(rng).expect("terms"), *terms.choose(rng).expect("terms")];
            if heads > 1 && !args.contains(&"z") {
                args[rng.gen_range(0..2)] = "z";
            }
            let p = PAtom::new(rel, &args);
            if !head.contains(&p) {
                head.push(p);
            }
        }
        let used: Vec<&str> = exists.iter().copied().filter(|z| head.iter().any(|h| h.vars().any(|v| &**v == *z))).collect();
        StTgd { body, exists: used.iter().map(|z| crate::model::sym(z)).collect(), head }
    }

    pub fn mapping(&mut self) -> SchemaMapping {
        let n = self.rng.gen_range(1..=2);
        let st_tgds = (0..n).map(|_| self.tgd()).collect();
        SchemaMapping { source: source_schema(), target: target_schema(), st_tgds, ..Default::default() }
    }

    pub fn source(&mut self) -> Instance {
        let rng = &mut self.rng;
        let n = rng.gen_range(1..=self.cfg.max_source_atoms);
        (0..n)
            .map(|_| {
                if rng.gen_bool(0.4) {
                    atom("P", &[CONSTS[rng.gen_range(0..3)]])
                } else {
                    atom("R", &[CONSTS[rng.gen_range(0..3)], CONSTS[rng.gen_range(0..3)]])
                }
            })
            .collect()
    }

    fn term(&mut self, vars: &[&str]) -> Term {
        if self.rng.gen_bool(0.2) {
            Term::c(CONSTS[self.rng.gen_range(0..2)])
        } else {
            Term::var(vars.choose(&mut self.rng).expect("vars"))
        }
    }

    fn target_atom(&mut self, vars: &[&str]) -> PAtom {
        let rel = if self.rng.gen_bool(0.5) { "E" } else { "F" };
        let args = [self.term(vars), self.term(vars)];
        PAtom { rel: crate::model::sym(rel), args: args.to_vec() }
    }

    /// `q(x̄) := ∀ȳ (A₁ ∧ … → L)` or a quantifier-free variant, with at most
    /// `max_literals` literals. Free variables occur in the premise.
    pub fn universal_query(&mut self) -> FOQuery {
        let arity = self.rng.gen_range(0..=1);
        let free: Vec<&str> = ["x"][..arity].to_vec();
        let bound: Vec<&str> = ["y", "u"][..self.rng.gen_range(1..=2)].to_vec();
        let all: Vec<&str> = free.iter().chain(&bound).copied().collect();
        let lits = self.rng.gen_range(1..=self.cfg.max_literals);
        let mut premise: Vec<Formula> = (0..lits - 1).map(|_| Formula::atom(self.target_atom(&all))).collect();
        if premise.is_empty() && arity > 0 {
            premise.push(Formula::atom(self.target_atom(&all)));
        }
        if let Some(x) = free.first() {
            let mentions = |f: &Formula| f.free_vars().iter().any(|v| &**v == *x);
            if !premise.iter().any(mentions) {
                let mut p = self.target_atom(&all);
                p.args[0] = Term::var(x);
                premise[0] = Formula::atom(p);
            }
        }
        let conclusion = match self.rng.gen_range(0..4) {
            0 => Formula::atom(self.target_atom(&all)),
            1 => Formula::not(Formula::atom(self.target_atom(&all))),
            2 => Formula::eq(self.term(&all), self.term(&all)),
            _ => Formula::not(Formula::eq(self.term(&all), self.term(&all))),
        };
        let matrix = if premise.is_empty() { conclusion } else { Formula::implies(conj(premise), conclusion) };
        let fv = matrix.free_vars();
        let quantified: Vec<&str> = bound.iter().copied().filter(|y| fv.iter().any(|v| &**v == *y)).collect();
        let body = if quantified.is_empty() { matrix } else { Formula::forall(&quantified, matrix) };
        FOQuery::new("q", &free, body)
    }

    /// A union of one or two conjunctive queries with one or two atoms.
    pub fn ucq(&mut self) -> FOQuery {
        let arity = self.rng.gen_range(0..=1);
        let free: Vec<&str> = ["x"][..arity].to_vec();
        let mut disjuncts = Vec::new();
        for _ in 0..self.rng.gen_range(1..=2) {
            let all = ["x", "y", "u"];
            let vars: &[&str] = if arity == 0 { &all[1..] } else { &all };
            let mut atoms: Vec<PAtom> = (0..self.rng.gen_range(1..=2)).map(|_| self.target_atom(vars)).collect();
            if arity > 0 && !atoms.iter().any(|a| a.vars().any(|v| &**v == "x")) {
                atoms[0].args[0] = Term::var("x");
            }
            let conj = conj(atoms.into_iter().map(Formula::atom).collect());
            let ex: Vec<String> = conj.free_vars().iter().filter(|v| &***v != "x").map(|v| v.to_string()).collect();
            let ex: Vec<&str> = ex.iter().map(String::as_str).collect();
            disjuncts.push(if ex.is_empty() { conj } else { Formula::exists(&ex, conj) });
        }
        let body = if disjuncts.len() == 1 { disjuncts.remove(0) } else { Formula::Or(disjuncts) };
        FOQuery::new("q", &free, body)
    }

    /// A mapping and source whose core has at most `max_core_nulls` nulls.
    pub fn setting(&mut self) -> (SchemaMapping, Instance) {
        loop {
            let m = self.mapping();
            let s = self.source();
            let core = core_solution(&m, &s).expect("st-tgd mapping over a ground source");
            if core.nulls().len() <= self.cfg.max_core_nulls {
                return (m, s);
            }
        }
    }

    pub fn universal_triple(&mut self) -> Triple {
        let (mapping, source) = self.setting();
        let query = self.universal_query();
        Triple { mapping, source, query }
    }

    pub fn ucq_triple(&mut self) -> Triple {
        let (mapping, source) = self.setting();
        let query = self.ucq();
        Triple { mapping, source, query }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textio::{instance_to_string, mapping_to_string, parse_instance, parse_mapping, parse_query, query_to_string};

    #[test]
    fn deterministic_per_seed() {
        let a: Vec<Triple> = (0..5).scan(Corpus::new(7), |c, _| Some(c.universal_triple())).collect();
        let b: Vec<Triple> = (0..5).scan(Corpus::new(7), |c, _| Some(c.universal_triple())).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn corpus_respects_its_shape() {
        let mut c = Corpus::new(DEFAULT_SEED);
        for _ in 0..100 {
            let t = c.universal_triple();
            assert!(t.mapping.is_packed());
            assert!(t.mapping.st_tgds.iter().all(|g| g.head.len() <= 3));
            assert!(t.source.len() <= 6);
            assert!(t.query.is_universal());
            assert!(core_solution(&t.mapping, &t.source).unwrap().nulls().len() <= 3);
            let u = c.ucq();
            assert!(u.is_ucq());
        }
    }

    #[test]
    fn corpus_round_trips_through_text() {
        let mut c = Corpus::new(3);
        for _ in 0..50 {
            let t = c.universal_triple();
            let m = parse_mapping(&mapping_to_string(&t.mapping)).unwrap();
            assert_eq!(m, t.mapping);
            assert_eq!(parse_instance(&instance_to_string(&t.source), &m.source).unwrap(), t.source);
            assert_eq!(parse_query(&query_to_string(&t.query), &m.target).unwrap(), t.query);
            let u = c.ucq();
            assert_eq!(parse_query(&query_to_string(&u), &m.target).unwrap(), u);
        }
    }
}
