//! Atom blocks of a target instance and whether they are packed.
//!
//! cargo run --example atom_blocks

use dx::corelib::{atom_blocks, block_is_packed, is_core};
use dx::textio::{parse_instance, parse_mapping};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let m = parse_mapping("target E/2.")?;
    let t = parse_instance("E(a,b). E(a,_n1). E(b,_n1). E(b,_n2). E(b,_n3). E(_n2,_n3).", &m.target)?;

    let blocks = atom_blocks(&t);
    for (k, b) in blocks.blocks.iter().enumerate() {
        println!("block {}: {b} ({} nulls, packed: {})", k + 1, b.nulls().len(), block_is_packed(b));
    }
    println!("largest block has {} nulls; T is a core: {}", blocks.max_nulls(), is_core(&t));
    Ok(())
}
