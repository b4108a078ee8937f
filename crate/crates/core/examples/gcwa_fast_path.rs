//! Universal queries under GCWA* through the core, in polynomial time for
//! packed mappings.
//!
//! cargo run --example gcwa_fast_path

use dx::corelib::core_solution;
use dx::gcwa::{answers_for_mapping, eval_gcwa_star_universal};
use dx::textio::{parse_instance, parse_mapping, parse_queries};
use dx::Value;

const MAPPING: &str = "
source R/2.
target E/2, F/2.
tgd R(x,y) -> exists z: E(x,z), F(z,y).
";

const QUERIES: &str = r#"
# every F-successor of an E-successor of x is b
q(x) := forall z, y: E(x,z) /\ F(z,y) -> y = "b".
# x has no E-successor that is a constant
r(x) := forall z: E(x,z) -> ~(z = "a") /\ ~(z = "b").
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let m = parse_mapping(MAPPING)?;
    let s = parse_instance("R(a,b). R(b,b).", &m.source)?;
    let core = core_solution(&m, &s)?;
    println!("core: {core}");
    for q in parse_queries(QUERIES, &m.target)? {
        let answers = answers_for_mapping(&m, &s, &q)?;
        println!("{}: {:?}", q.name, answers.iter().map(|t| t.iter().map(Value::name).collect::<Vec<_>>()).collect::<Vec<_>>());
        println!("  {}(b) certain: {}", q.name, eval_gcwa_star_universal(&core, &q, &[Value::c("b")])?);
    }
    Ok(())
}
