//! Minimal representatives of the possible worlds of an instance with nulls,
//! for the whole instance and for one block.
//!
//! cargo run --example minimal_representatives

use std::collections::BTreeSet;

use dx::corelib::atom_blocks;
use dx::minrep::{atom_in_some_minimal, enum_min_C, enum_min_C_block, BLOCK_CAP};
use dx::textio::{instance_to_string, parse_instance, parse_mapping};
use dx::{atom, Value};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let m = parse_mapping("target E/2, F/2.")?;
    let t = parse_instance("E(a,_n1). F(_n1,b). E(a,_n2). F(_n2,c).", &m.target)?;
    let c: BTreeSet<Value> = [Value::c("a")].into_iter().collect();

    let whole = enum_min_C(&t, &c)?;
    println!("min_C(T) with C = {{a}}: {} representatives", whole.reps.len());
    for (k, r) in whole.reps.iter().enumerate().take(3) {
        println!("# {}\n{}", k + 1, instance_to_string(r));
    }

    let b = &atom_blocks(&t).blocks[0];
    let per_block = enum_min_C_block(&t, b, &c, BLOCK_CAP)?;
    println!("block {b}: {} representatives, all among the above: {}", per_block.reps.len(), per_block.reps.iter().all(|r| whole.reps.contains(r)));

    for a in [atom("E", &["a", "b"]), atom("F", &["a", "a"]), atom("E", &["b", "c"])] {
        println!("{a} in some minimal world: {}", atom_in_some_minimal(&t, &a)?);
    }
    Ok(())
}
