//! Atom blocks, packedness and cores.

use std::collections::BTreeMap;

use crate::chase::canonical_solution;
use crate::error::{Error, Precondition, Result};
use crate::model::{find_homomorphism_indexed, Atom, Instance, RelIndex, SchemaMapping, Value, ValueMap};

/// Connected components of the atoms under "shares a null".
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartition {
    /// Ordered by least atom.
    pub blocks: Vec<Instance>,
    pub block_of: BTreeMap<Atom, usize>,
    pub null_counts: Vec<usize>,
}

impl BlockPartition {
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn max_nulls(&self) -> usize {
        self.null_counts.iter().copied().max().unwrap_or(0)
    }
}

fn find(parent: &mut [usize], x: usize) -> usize {
    let mut r = x;
    while parent[r] != r {
        r = parent[r];
    }
    let mut y = x;
    while parent[y] != r {
        let next = parent[y];
        parent[y] = r;
        y = next;
    }
    r
}

pub fn atom_blocks(t: &Instance) -> BlockPartition {
    let atoms: Vec<&Atom> = t.iter().collect();
    let mut parent: Vec<usize> = (0..atoms.len()).collect();
    let mut owner: BTreeMap<&Value, usize> = BTreeMap::new();
    for (k, a) in atoms.iter().enumerate() {
        for v in a.nulls() {
            match owner.get(v) {
                Some(&j) => {
                    let (x, y) = (find(&mut parent, j), find(&mut parent, k));
                    if x != y {
                        parent[x.max(y)] = x.min(y);
                    }
                }
                None => {
                    owner.insert(v, k);
                }
            }
        }
    }
    // roots are least indices of their component, so blocks come out ordered by least atom
    let mut index_of_root: BTreeMap<usize, usize> = BTreeMap::new();
    let mut blocks: Vec<Instance> = Vec::new();
    let mut block_of = BTreeMap::new();
    for (k, a) in atoms.iter().enumerate() {
        let r = find(&mut parent, k);
        let b = *index_of_root.entry(r).or_insert_with(|| {
            blocks.push(Instance::new());
            blocks.len() - 1
        });
        blocks[b].insert((*a).clone());
        block_of.insert((*a).clone(), b);
    }
    let null_counts = blocks.iter().map(|b| b.nulls().len()).collect();
    BlockPartition { blocks, block_of, null_counts }
}

/// Every two distinct atoms of a block share a null.
pub fn block_is_packed(b: &Instance) -> bool {
    let atoms: Vec<&Atom> = b.iter().collect();
    for i in 0..atoms.len() {
        for j in i + 1..atoms.len() {
            if !atoms[i].nulls().any(|v| atoms[j].args.contains(v)) {
                return false;
            }
        }
    }
    true
}

pub fn blocks_packed(t: &Instance) -> bool {
    atom_blocks(t).blocks.iter().all(block_is_packed)
}

/// One shrinking step: the first block B, in canonical order, with an atom
/// A such that B maps into I minus A with everything outside B fixed.
fn shrink_once(i: &Instance) -> Option<Instance> {
    let part = atom_blocks(i);
    for b in part.blocks.iter().filter(|b| !b.is_ground()) {
        for a in b {
            let rest = i.without(a);
            let idx = RelIndex::new(&rest);
            if let Some(h) = find_homomorphism_indexed(b, &idx, &ValueMap::new()) {
                return Some(i.iter().map(|x| x.map(|v| h.get(v).cloned().unwrap_or_else(|| v.clone()))).collect());
            }
        }
    }
    None
}

/// A core of `i`, obtained by repeatedly shrinking one block at a time.
pub fn core_of(i: &Instance) -> Instance {
    let mut cur = i.clone();
    while let Some(next) = shrink_once(&cur) {
        cur = next;
    }
    cur
}

pub fn is_core(i: &Instance) -> bool {
    shrink_once(i).is_none()
}

/// Core(M,S) for a mapping of st-tgds.
pub fn core_solution(m: &SchemaMapping, s: &Instance) -> Result<Instance> {
    if !m.is_st_tgd_only() {
        return Err(Error::PreconditionViolated(Precondition::NotStTgdMapping));
    }
    Ok(core_of(&canonical_solution(m, s)?))
}

/// Bound on the nulls of one block of Core(M,S).
pub fn bs(m: &SchemaMapping) -> usize {
    m.block_size()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::model::{atom, find_homomorphism};
    use crate::textio::parse_mapping;

    pub(crate) fn inst(atoms: &[Atom]) -> Instance {
        atoms.iter().cloned().collect()
    }

    /// T with ⊥=_1, ⊥'=_2, ⊥''=_3.
    pub(crate) fn naf() -> Instance {
        inst(&[
            atom("E", &["a", "b"]),
            atom("E", &["a", "_1"]),
            atom("E", &["b", "_1"]),
            atom("E", &["b", "_2"]),
            atom("E", &["b", "_3"]),
            atom("E", &["_2", "_3"]),
        ])
    }

    /// T with ⊥1=_1, ⊥'1=_2, ⊥2=_3, ⊥'2=_4.
    pub(crate) fn blk() -> Instance {
        inst(&[
            atom("E", &["_1", "a"]),
            atom("E", &["_1", "b"]),
            atom("E", &["_1", "_2"]),
            atom("E", &["_2", "c"]),
            atom("E", &["_3", "a"]),
            atom("E", &["_3", "b"]),
            atom("E", &["_3", "_4"]),
            atom("E", &["c", "_4"]),
        ])
    }

    pub(crate) fn blk_blocks() -> (Instance, Instance) {
        let b1 = inst(&[atom("E", &["_1", "a"]), atom("E", &["_1", "b"]), atom("E", &["_1", "_2"]), atom("E", &["_2", "c"])]);
        let b2 = inst(&[atom("E", &["_3", "a"]), atom("E", &["_3", "b"]), atom("E", &["_3", "_4"]), atom("E", &["c", "_4"])]);
        (b1, b2)
    }

    #[test]
    fn naf_blocks() {
        let p = atom_blocks(&naf());
        assert_eq!(p.len(), 3);
        let b = inst(&[atom("E", &["b", "_2"]), atom("E", &["b", "_3"]), atom("E", &["_2", "_3"])]);
        assert!(p.blocks.contains(&b));
        assert!(p.blocks.contains(&inst(&[atom("E", &["a", "b"])])));
    }

    #[test]
    fn ground_atoms_are_singletons() {
        let p = atom_blocks(&inst(&[atom("R", &["a", "b"]), atom("R", &["b", "c"])]));
        assert_eq!(p.blocks, vec![inst(&[atom("R", &["a", "b"])]), inst(&[atom("R", &["b", "c"])])]);
        assert_eq!(p.null_counts, vec![0, 0]);
    }

    #[test]
    fn blk_partition() {
        let p = atom_blocks(&blk());
        let (b1, b2) = blk_blocks();
        // E(c,_n4) is the least atom overall
        assert_eq!(p.blocks, vec![b2, b1]);
        assert_eq!(p.null_counts, vec![2, 2]);
        assert!(is_core(&blk()));
    }

    #[test]
    fn packedness() {
        assert!(blocks_packed(&inst(&[atom("E", &["a", "_1"]), atom("F", &["_1", "b"])])));
        assert!(!blocks_packed(&blk()));
        assert!(!blocks_packed(&naf()));
    }

    #[test]
    fn cores() {
        let t = inst(&[atom("E", &["a", "a"]), atom("E", &["a", "_1"])]);
        let c = core_of(&t);
        assert_eq!(c, inst(&[atom("E", &["a", "a"])]));
        assert!(is_core(&c));
        let g = inst(&[atom("Rp", &["a", "b"])]);
        assert_eq!(core_of(&g), g);
        assert_eq!(core_of(&naf()), naf());
        assert!(is_core(&naf()));
        assert!(!is_core(&inst(&[atom("E", &["a", "_1"]), atom("E", &["a", "_2"])])));
        assert!(is_core(&Instance::new()));
    }

    #[test]
    fn core_solutions() {
        let s = inst(&[atom("P", &["a"])]);
        let m2 = parse_mapping("source P/1. target E/2. tgd P(x) -> E(x,x). tgd P(x) -> exists z: E(x,z).").unwrap();
        let m1 = parse_mapping("source P/1. target E/2. tgd P(x) -> E(x,x).").unwrap();
        assert_eq!(core_solution(&m2, &s).unwrap(), inst(&[atom("E", &["a", "a"])]));
        assert_eq!(core_solution(&m1, &s).unwrap(), core_solution(&m2, &s).unwrap());

        let copy = parse_mapping("source R/2. target Rp/2. tgd R(x,y) -> Rp(x,y).").unwrap();
        assert_eq!(core_solution(&copy, &inst(&[atom("R", &["a", "b"])])).unwrap(), inst(&[atom("Rp", &["a", "b"])]));

        let ef = parse_mapping("source R/2. target E/2, F/2. tgd R(x,y) -> exists z: E(x,z), F(z,y).").unwrap();
        assert_eq!(
            core_solution(&ef, &inst(&[atom("R", &["a", "b"])])).unwrap(),
            inst(&[atom("E", &["a", "_1"]), atom("F", &["_1", "b"])])
        );
        let egd = parse_mapping("source P/1. target E/2. tgd P(x) -> E(x,x). egd E(x,y) -> x = y.").unwrap();
        assert!(matches!(core_solution(&egd, &s), Err(Error::PreconditionViolated(Precondition::NotStTgdMapping))));
    }

    /// Cores by exhaustive search over subinstances, smallest first.
    fn brute_core_size(i: &Instance) -> usize {
        let atoms: Vec<&Atom> = i.iter().collect();
        let n = atoms.len();
        let mut best = n;
        for mask in 0u32..(1 << n) {
            let sub: Instance = (0..n).filter(|k| mask & (1 << k) != 0).map(|k| atoms[k].clone()).collect();
            if sub.len() < best && find_homomorphism(i, &sub, &ValueMap::new()).is_some() {
                best = sub.len();
            }
        }
        best
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        pub fn arb_instance(max: usize) -> impl Strategy<Value = Instance> {
            let v = || prop_oneof![prop::sample::select(vec!["a", "b"]), prop::sample::select(vec!["_1", "_2", "_3", "_4"])];
            prop::collection::vec((v(), v()), 0..max)
                .prop_map(|v| v.into_iter().map(|(x, y)| atom("E", &[x, y])).collect())
        }

        proptest! {
            #[test]
            fn core_properties(i in arb_instance(7)) {
                let c = core_of(&i);
                prop_assert!(is_core(&c));
                prop_assert_eq!(core_of(&c), c.clone());
                prop_assert!(find_homomorphism(&i, &c, &ValueMap::new()).is_some());
                prop_assert!(find_homomorphism(&c, &i, &ValueMap::new()).is_some());
                prop_assert_eq!(c.len(), brute_core_size(&i));
            }

            #[test]
            fn blocks_partition(i in arb_instance(8)) {
                let p = atom_blocks(&i);
                let total: usize = p.blocks.iter().map(Instance::len).sum();
                prop_assert_eq!(total, i.len());
                for (x, bx) in &p.block_of {
                    for (y, by) in &p.block_of {
                        if x.nulls().any(|v| y.args.contains(v)) {
                            prop_assert_eq!(bx, by);
                        }
                    }
                }
            }

            #[test]
            fn cores_of_equivalent_instances_are_isomorphic(i in arb_instance(6), j in arb_instance(6)) {
                let u = i.union(&j);
                let e = ValueMap::new();
                if find_homomorphism(&u, &i, &e).is_some() {
                    let (ci, cu) = (core_of(&i), core_of(&u));
                    prop_assert_eq!(ci.len(), cu.len());
                    prop_assert_eq!(ci.nulls().len(), cu.nulls().len());
                    let h = find_homomorphism(&ci, &cu, &e).unwrap();
                    prop_assert_eq!(crate::model::apply_map(&h, &ci).unwrap().len(), ci.len());
                }
            }
        }
    }
}
