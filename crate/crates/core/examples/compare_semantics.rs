//! The same query under every closed-world semantics the oracle knows,
//! on two logically equivalent mappings.
//!
//! cargo run --example compare_semantics

use std::collections::BTreeSet;

use dx::oracle::{Budget, EmptyCert, Oracle, Semantics};
use dx::textio::{parse_instance, parse_mapping, parse_query};

const QUERY: &str = "q(x) := exists z: E(x,z) /\\ (forall z2: E(x,z2) -> z2 = z).";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mappings = [
        ("M1", "source P/1. target E/2. tgd P(x) -> E(x,x)."),
        ("M2", "source P/1. target E/2. tgd P(x) -> E(x,x). tgd P(x) -> exists z: E(x,z)."),
    ];
    println!("{:<10} {:>4} {:>4}", "semantics", "M1", "M2");
    let mut rows: Vec<(Semantics, Vec<String>)> = Semantics::ALL.iter().map(|&s| (s, Vec::new())).collect();
    for (_, text) in mappings {
        let m = parse_mapping(text)?;
        let s = parse_instance("P(a).", &m.source)?;
        let q = parse_query(QUERY, &m.target)?;
        let o = Oracle::new(&m, &s, Budget::default(), &BTreeSet::new());
        for (sem, row) in &mut rows {
            let a = o.answers(&q, *sem, EmptyCert::Empty)?;
            row.push(if a.answers.is_empty() { "{}".into() } else { "{a}".into() });
        }
    }
    for (sem, row) in rows {
        println!("{:<10} {:>4} {:>4}", sem.name(), row[0], row[1]);
    }
    Ok(())
}
