//! Unions of conjunctive queries are answered on the core alone; the oracle
//! agrees.
//!
//! cargo run --example monotone_queries

use dx::corelib::core_solution;
use dx::gcwa::answers_owa_homclosed;
use dx::oracle::{Budget, EmptyCert, Oracle, Semantics};
use dx::textio::{parse_instance, parse_mapping, parse_query};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let m = parse_mapping("source P/1, R/2. target E/2, F/2. tgd P(x) -> exists z: E(x,z), F(z,z). tgd R(x,y) -> E(x,y).")?;
    let s = parse_instance("P(a). R(b,a). R(a,c).", &m.source)?;
    let q = parse_query("q(x) := (exists y: E(x,y) /\\ F(y,y)) \\/ (exists y: E(y,x)).", &m.target)?;
    let core = core_solution(&m, &s)?;
    let on_core = answers_owa_homclosed(&core, &q)?;
    let budget = Budget { max_atoms: core.len(), ..Budget::default() };
    let by_oracle = Oracle::new(&m, &s, budget, &q.dom()).answers(&q, Semantics::GcwaStar, EmptyCert::Empty)?;
    println!("core: {core}");
    println!("on the core: {on_core:?}");
    println!("oracle:      {:?}", by_oracle.answers);
    assert_eq!(on_core, by_oracle.answers);
    Ok(())
}
