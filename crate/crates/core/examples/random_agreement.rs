//! Fast path, general evaluator and oracle on seeded random settings.
//!
//! cargo run --release --example random_agreement -- [seed] [count]

use dx::corelib::core_solution;
use dx::gcwa::{answers_for_mapping, answers_gcwa_star_universal_general};
use dx::gen::{Corpus, DEFAULT_SEED};
use dx::oracle::{answers_semantics, Budget, EmptyCert, Semantics};
use dx::textio::{instance_to_string, mapping_to_string, query_to_string};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let seed = args.next().map(|s| s.parse()).transpose()?.unwrap_or(DEFAULT_SEED);
    let count: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(50);
    let mut corpus = Corpus::new(seed);
    let base = Budget { fresh_constants: 3, max_atoms: 12, max_fixpoint_rounds: 3 };
    let mut agreed = 0;
    for k in 0..count {
        let t = corpus.universal_triple();
        let core = core_solution(&t.mapping, &t.source)?;
        let fast = answers_for_mapping(&t.mapping, &t.source, &t.query)?;
        let general = answers_gcwa_star_universal_general(&t.mapping, &t.source, &t.query)?;
        let budget = base.for_query(&t.query, &core);
        let oracle = answers_semantics(&t.mapping, &t.source, &t.query, Semantics::GcwaStar, budget, EmptyCert::Empty)?.answers;
        if fast == general && general == oracle {
            agreed += 1;
        } else {
            println!("setting {k} disagrees:\n{}{}{}", mapping_to_string(&t.mapping), instance_to_string(&t.source), query_to_string(&t.query));
        }
    }
    println!("seed {seed}: {agreed}/{count} settings agree");
    Ok(())
}
