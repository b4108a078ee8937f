//! With a target dependency the minimal solutions alone are not closed
//! under the GCWA* construction; the oracle iterates it to a fixpoint.
//!
//! cargo run --example closure_fixpoint

use std::collections::BTreeSet;

use dx::oracle::{Budget, Oracle};
use dx::textio::{parse_instance, parse_mapping};

const MAPPING: &str = "
source P/1.
target E/2, F/2.
tgd P(x) -> exists z, z2: E(z,z2).
constraint forall x, x2, y: E(x,y) /\\ E(x2,y) -> F(x,x2).
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let m = parse_mapping(MAPPING)?;
    let s = parse_instance("P(a).", &m.source)?;
    let o = Oracle::new(&m, &s, Budget { fresh_constants: 2, max_atoms: 8, max_fixpoint_rounds: 3 }, &BTreeSet::new());
    let (levels, fixpoint) = o.tstar_levels()?;
    for (k, l) in levels.iter().enumerate() {
        println!("level {k}: {} members", l.len());
    }
    println!("fixpoint reached: {fixpoint}");
    if let (Some(first), Some(second)) = (levels.first(), levels.get(1)) {
        if let Some(t) = second.members.iter().find(|t| !first.contains(t)) {
            println!("added at level 1: {t}");
        }
    }
    Ok(())
}
