//! Helpers shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use dx::corelib::{atom_blocks, core_solution};
use dx::minrep::{enum_min_C_block, BLOCK_CAP};
use dx::model::{apply_map, atoms_isomorphic, find_homomorphism, Atom, Instance, PAtom, SchemaMapping, Term, Value, ValueMap};
use dx::textio::{parse_instance, parse_mapping, parse_queries};
use dx::{FOQuery, Formula, TupleSet};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn text(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn mapping(name: &str) -> SchemaMapping {
    parse_mapping(&text(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn source(m: &SchemaMapping, name: &str) -> Instance {
    parse_instance(&text(name), &m.source).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn target(m: &SchemaMapping, name: &str) -> Instance {
    parse_instance(&text(name), &m.target).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn queries(m: &SchemaMapping, name: &str) -> Vec<FOQuery> {
    parse_queries(&text(name), &m.target).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn query(m: &SchemaMapping, name: &str) -> FOQuery {
    queries(m, name).remove(0)
}

pub fn tuples(rows: &[&[&str]]) -> TupleSet {
    rows.iter().map(|r| r.iter().map(|c| Value::c(c)).collect()).collect()
}

pub fn yes() -> TupleSet {
    tuples(&[&[]])
}

pub fn consts(names: &[&str]) -> BTreeSet<Value> {
    names.iter().map(|c| Value::c(c)).collect()
}

/// (mapping, source) fixture pairs whose mapping has only st-tgds.
pub const ST_SETTINGS: [(&str, &str); 9] = [
    ("copy.dx", "copy.inst"),
    ("leq1.dx", "leq.inst"),
    ("leq2.dx", "leq.inst"),
    ("lcf.dx", "lcf.inst"),
    ("ef.dx", "ef.inst"),
    ("eff.dx", "eff.inst"),
    ("clq.dx", "clq_k3.inst"),
    ("clq.dx", "clq_path.inst"),
    ("rand.dx", "rand.inst"),
];

/// The fixture instances: cores of the st-tgd settings and the stand-alone
/// target instances.
pub fn fixture_instances() -> Vec<(String, Instance)> {
    let mut out = Vec::new();
    for (mf, sf) in ST_SETTINGS {
        let m = mapping(mf);
        out.push((format!("core of {mf} on {sf}"), core_solution(&m, &source(&m, sf)).unwrap()));
    }
    for (mf, tf) in [("naf.dx", "naf.inst"), ("blk.dx", "blk.inst"), ("mot.dx", "mot_t.inst")] {
        out.push((tf.to_string(), target(&mapping(mf), tf)));
    }
    out
}

const CONSTS: [&str; 3] = ["a", "b", "c"];

/// Between one and `max` atoms over the source schema and constants a, b, c.
pub fn random_source(m: &SchemaMapping, rng: &mut impl Rng, max: usize) -> Instance {
    let rels: Vec<(&str, usize)> = m.source.relations.iter().map(|(r, &k)| (&**r, k)).collect();
    (0..rng.gen_range(1..=max))
        .map(|_| {
            let (rel, k) = *rels.choose(rng).expect("source schema is nonempty");
            Atom::new(rel, (0..k).map(|_| Value::c(CONSTS.choose(rng).expect("constants"))).collect())
        })
        .collect()
}

/// A union of one or two conjunctive queries with one or two atoms over the
/// target schema. The free variable, if any, is `x`.
pub fn random_ucq(m: &SchemaMapping, rng: &mut impl Rng) -> FOQuery {
    let rels: Vec<(&str, usize)> = m.target.relations.iter().map(|(r, &k)| (&**r, k)).collect();
    let arity = rng.gen_range(0..=1);
    let vars: &[&str] = if arity == 1 { &["x", "y", "u"] } else { &["y", "u"] };
    let mut disjuncts = Vec::new();
    for _ in 0..rng.gen_range(1..=2) {
        let mut atoms: Vec<PAtom> = (0..rng.gen_range(1..=2))
            .map(|_| {
                let (rel, k) = *rels.choose(rng).expect("target schema is nonempty");
                let args = (0..k)
                    .map(|_| if rng.gen_bool(0.2) { Term::c(CONSTS[rng.gen_range(0..2)]) } else { Term::var(vars.choose(rng).expect("vars")) })
                    .collect();
                PAtom { rel: dx::model::sym(rel), args }
            })
            .collect();
        if arity == 1 && !atoms.iter().any(|a| a.vars().any(|v| &**v == "x")) {
            if let Some(slot) = atoms[0].args.first_mut() {
                *slot = Term::var("x");
            }
        }
        let body = if atoms.len() == 1 { Formula::atom(atoms.remove(0)) } else { Formula::And(atoms.into_iter().map(Formula::atom).collect()) };
        let ex: Vec<String> = body.free_vars().iter().filter(|v| &***v != "x").map(|v| v.to_string()).collect();
        let ex: Vec<&str> = ex.iter().map(String::as_str).collect();
        disjuncts.push(if ex.is_empty() { body } else { Formula::exists(&ex, body) });
    }
    let body = if disjuncts.len() == 1 { disjuncts.remove(0) } else { Formula::Or(disjuncts) };
    let free: &[&str] = if arity == 1 { &["x"] } else { &[] };
    FOQuery::new("q", free, body)
}

/// Some block B of `t`, some T_B ∈ min_C(T,B) and some atom A′ ∈ T_B
/// isomorphic to `a` admit a homomorphism h with h(T_B) = t0 and h(A′) = a.
pub fn provenance_witness(t: &Instance, t0: &Instance, a: &Atom, c: &BTreeSet<Value>) -> bool {
    for b in &atom_blocks(t).blocks {
        for tb in enum_min_C_block(t, b, c, BLOCK_CAP).unwrap().reps {
            for a2 in tb.iter().filter(|x| atoms_isomorphic(x, a)) {
                let frozen: ValueMap = a2.args.iter().cloned().zip(a.args.iter().cloned()).collect();
                if let Some(h) = find_homomorphism(&tb, t0, &frozen) {
                    if apply_map(&h, &tb).unwrap() == *t0 {
                        return true;
                    }
                }
            }
        }
    }
    false
}

/// `q(x̄) := ∀ȳ (A₁ ∧ … → L)` over the target schema with one or two premise
/// atoms; the free variable, if any, is `x` and occurs in the premise.
pub fn random_universal(m: &SchemaMapping, rng: &mut impl Rng) -> FOQuery {
    let rels: Vec<(&str, usize)> = m.target.relations.iter().map(|(r, &k)| (&**r, k)).collect();
    let arity = rng.gen_range(0..=1);
    let vars: &[&str] = if arity == 1 { &["x", "y", "u"] } else { &["y", "u"] };
    let term = |rng: &mut dyn rand::RngCore| {
        if rng.gen_bool(0.2) {
            Term::c(CONSTS[rng.gen_range(0..2)])
        } else {
            Term::var(vars[rng.gen_range(0..vars.len())])
        }
    };
    let patom = |rng: &mut dyn rand::RngCore| {
        let (rel, k) = rels[rng.gen_range(0..rels.len())];
        PAtom { rel: dx::model::sym(rel), args: (0..k).map(|_| term(rng)).collect() }
    };
    let mut premise: Vec<PAtom> = (0..rng.gen_range(1..=2)).map(|_| patom(rng)).collect();
    if arity == 1 && !premise.iter().any(|a| a.vars().any(|v| &**v == "x")) {
        if let Some(slot) = premise[0].args.first_mut() {
            *slot = Term::var("x");
        } else {
            premise.push(PAtom { rel: dx::model::sym(rels[0].0), args: vec![Term::var("x"); rels[0].1] });
        }
    }
    let conclusion = match rng.gen_range(0..3) {
        0 => Formula::atom(patom(rng)),
        1 => Formula::not(Formula::atom(patom(rng))),
        _ => Formula::eq(term(rng), term(rng)),
    };
    let premise = if premise.len() == 1 { Formula::atom(premise.remove(0)) } else { Formula::And(premise.into_iter().map(Formula::atom).collect()) };
    let matrix = Formula::implies(premise, conclusion);
    let bound: Vec<String> = matrix.free_vars().iter().filter(|v| &***v != "x").map(|v| v.to_string()).collect();
    let bound: Vec<&str> = bound.iter().map(String::as_str).collect();
    let body = if bound.is_empty() { matrix } else { Formula::forall(&bound, matrix) };
    let free: &[&str] = if arity == 1 { &["x"] } else { &[] };
    FOQuery::new("q", free, body)
}
