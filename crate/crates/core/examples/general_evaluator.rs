//! A mapping whose core has unpacked blocks: the fast path refuses it and the
//! general evaluator answers instead.
//!
//! cargo run --example general_evaluator

use dx::gcwa::{answers_for_mapping, answers_gcwa_star_universal_general};
use dx::textio::{parse_instance, parse_mapping, parse_query};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let m = parse_mapping("source R/2. target E/2. tgd R(x,y) -> exists z, w: E(x,z), E(z,w), E(w,y).")?;
    let s = parse_instance("R(a,b). R(b,a).", &m.source)?;
    let q = parse_query(r#"q(x) := forall y: E(x,y) -> ~(y = "a")."#, &m.target)?;

    match answers_for_mapping(&m, &s, &q) {
        Ok(a) => println!("fast path: {a:?}"),
        Err(e) => println!("fast path: {e}"),
    }
    println!("general evaluator: {:?}", answers_gcwa_star_universal_general(&m, &s, &q)?);
    Ok(())
}
