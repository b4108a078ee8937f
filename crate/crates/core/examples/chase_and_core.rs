//! Canonical and core solutions of a small mapping.
//!
//! cargo run --example chase_and_core

use dx::chase::{canonical_solution, is_solution};
use dx::corelib::{core_solution, is_core};
use dx::textio::{instance_to_string, parse_instance, parse_mapping};

const MAPPING: &str = "
source P/1, R/2.
target E/2.
tgd P(x) -> E(x,x).
tgd P(x) -> exists z: E(x,z).
tgd R(x,y) -> exists z: E(x,z), E(z,y).
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let m = parse_mapping(MAPPING)?;
    let s = parse_instance("P(a). R(a,a). R(a,b).", &m.source)?;

    let can = canonical_solution(&m, &s)?;
    println!("canonical solution ({} atoms):\n{}", can.len(), instance_to_string(&can));
    assert!(is_solution(&m, &s, &can));

    // E(a,a) absorbs both the P-witness and the R(a,a)-path
    let core = core_solution(&m, &s)?;
    println!("core ({} atoms, core: {}):\n{}", core.len(), is_core(&core), instance_to_string(&core));
    Ok(())
}
