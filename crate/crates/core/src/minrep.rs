//! Representatives of the minimal instances of poss(T).
//!
//! `enum_min_C` enumerates every map legal for T into dom(T) ∪ C and is
//! exponential in the number of nulls. `enum_min_C_block` varies only the
//! nulls of one block and is what the fast path relies on.

#![allow(non_snake_case)]

use std::collections::BTreeSet;

use crate::corelib::{atom_blocks, blocks_packed, core_of, is_core};
use crate::error::{Error, Precondition, Result};
use crate::logic::NULL_CAP;
use crate::model::{Atom, Instance, Value, ValueMap};

/// Largest number of maps `enum_min_C` is willing to try.
pub const MAP_CAP: u64 = 10_000_000;

/// Block null limit used by `atom_in_some_minimal`.
pub const BLOCK_CAP: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Scope {
    Whole,
    Block(Instance),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MinRepSet {
    pub base: Instance,
    pub consts: BTreeSet<Value>,
    pub reps: BTreeSet<Instance>,
    pub scope: Scope,
}

/// Odometer over maps `nulls -> range`; `visit` sees each map once.
fn for_each_map(nulls: &[Value], range: &[Value], visit: &mut dyn FnMut(&ValueMap)) {
    if range.is_empty() && !nulls.is_empty() {
        return;
    }
    let mut idx = vec![0usize; nulls.len()];
    let mut f: ValueMap = nulls.iter().map(|n| (n.clone(), range[0].clone())).collect();
    loop {
        visit(&f);
        let mut k = 0;
        loop {
            if k == nulls.len() {
                return;
            }
            idx[k] += 1;
            if idx[k] < range.len() {
                f.insert(nulls[k].clone(), range[idx[k]].clone());
                break;
            }
            idx[k] = 0;
            f.insert(nulls[k].clone(), range[0].clone());
            k += 1;
        }
    }
}

fn image(t: &Instance, f: &ValueMap) -> Instance {
    t.iter().map(|a| a.map(|v| f.get(v).cloned().unwrap_or_else(|| v.clone()))).collect()
}

/// Keeps the images with no proper subset among the others.
fn subset_minimal(images: BTreeSet<Instance>) -> BTreeSet<Instance> {
    let mut by_size: Vec<Instance> = images.into_iter().collect();
    by_size.sort_by_key(Instance::len);
    let mut keep: Vec<Instance> = Vec::new();
    for x in by_size {
        if !keep.iter().any(|y| y.len() < x.len() && y.is_subset(&x)) {
            keep.push(x);
        }
    }
    keep.into_iter().collect()
}

fn map_count(n: usize, k: usize) -> u64 {
    (k as u64).checked_pow(n as u32).unwrap_or(u64::MAX)
}

/// min_C(T): subset-minimal images f(T) over all f legal for T with range
/// dom(T) ∪ C.
pub fn enum_min_C(t: &Instance, c: &BTreeSet<Value>) -> Result<MinRepSet> {
    let nulls: Vec<Value> = t.nulls().into_iter().collect();
    if nulls.len() > NULL_CAP {
        return Err(Error::BudgetExceeded(format!("{} nulls exceed the cap {NULL_CAP}", nulls.len())));
    }
    let mut range = t.dom();
    range.extend(c.iter().cloned());
    let range: Vec<Value> = range.into_iter().collect();
    if map_count(nulls.len(), range.len()) > MAP_CAP {
        return Err(Error::BudgetExceeded(format!("{}^{} maps exceed the cap {MAP_CAP}", range.len(), nulls.len())));
    }
    let mut images = BTreeSet::new();
    for_each_map(&nulls, &range, &mut |f| {
        images.insert(image(t, f));
    });
    Ok(MinRepSet { base: t.clone(), consts: c.clone(), reps: subset_minimal(images), scope: Scope::Whole })
}

/// min_C(T,B): cores of the minimal images f(T) where f moves only the
/// nulls of B and every null of f(B) outside T∖B stays in nulls(B).
pub fn enum_min_C_block(t: &Instance, b: &Instance, c: &BTreeSet<Value>, limit: usize) -> Result<MinRepSet> {
    let nulls: Vec<Value> = b.nulls().into_iter().collect();
    if nulls.len() > limit {
        return Err(Error::BlockTooLarge { nulls: nulls.len(), limit });
    }
    let rest = t.difference(b);
    let own: BTreeSet<&Value> = nulls.iter().collect();
    let mut range = t.dom();
    range.extend(c.iter().cloned());
    let range: Vec<Value> = range.into_iter().collect();
    let mut images = BTreeSet::new();
    for_each_map(&nulls, &range, &mut |f| {
        let fb = image(b, f);
        let escapes = fb.iter().filter(|a| !rest.contains(a)).any(|a| a.nulls().any(|v| !own.contains(v)));
        if !escapes {
            images.insert(fb.union(&rest));
        }
    });
    let reps = subset_minimal(images).iter().map(core_of).collect();
    Ok(MinRepSet { base: t.clone(), consts: c.clone(), reps, scope: Scope::Block(b.clone()) })
}

/// Whether the ground atom `a` lies in some minimal instance of poss(T),
/// decided block by block. Requires T to be a core with packed blocks.
pub fn atom_in_some_minimal(t: &Instance, a: &Atom) -> Result<bool> {
    if !blocks_packed(t) {
        return Err(Error::PreconditionViolated(Precondition::NotPacked));
    }
    if !is_core(t) {
        return Err(Error::PreconditionViolated(Precondition::NotCore));
    }
    let c: BTreeSet<Value> = a.args.iter().cloned().collect();
    for b in &atom_blocks(t).blocks {
        if enum_min_C_block(t, b, &c, BLOCK_CAP)?.reps.iter().any(|r| r.contains(a)) {
            return Ok(true);
        }
    }
    Ok(false)
}
