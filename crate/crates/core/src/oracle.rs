//! Brute-force semantics over a bounded universe.
//!
//! The universe is const(S) ∪ dom(Σ) ∪ dom(q) plus `fresh_constants` fresh
//! constants. Mappings whose only dependencies are st-tgds and egds take
//! the exact representative path: minimal solutions are injective fresh
//! instantiations of min_C(Core). Anything else enumerates ground target
//! instances with at most `max_atoms` atoms. Results are exact only
//! relative to the budget.

use std::cell::RefCell;
use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::rc::Rc;
use std::str::FromStr;

use crate::chase::{canonical_solution, is_solution, premise_atoms, triggers};
use crate::corelib::core_solution;
use crate::error::{Error, Precondition, Result};
use crate::gcwa::answers_owa_homclosed;
use crate::logic::{advance, cert_poss_with, eval_with_domain, fresh_constants, FOQuery, Formula, Tuple, TupleSet, NULL_CAP};
use crate::minrep::enum_min_C;
use crate::model::{Atom, Binding, Instance, PAtom, SchemaMapping, Sym, Term, Value, ValueMap};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Budget {
    pub fresh_constants: usize,
    pub max_atoms: usize,
    pub max_fixpoint_rounds: usize,
}

impl Default for Budget {
    fn default() -> Budget {
        Budget { fresh_constants: 4, max_atoms: 12, max_fixpoint_rounds: 3 }
    }
}

impl Budget {
    /// Lowers `max_atoms` to one core-sized minimal solution per literal of
    /// `q`, never below `|core|`.
    pub fn for_query(self, q: &FOQuery, core: &Instance) -> Budget {
        let atoms = (q.body.literal_count().max(1) * core.len()).min(self.max_atoms).max(core.len());
        Budget { max_atoms: atoms, ..self }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Minimal,
    TstarLevel(usize),
    GcwaStar,
    Rcwa,
    Gcwa,
    Egcwa,
    Pws,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolutionFamily {
    pub members: Vec<Instance>,
    pub role: Role,
}

impl SolutionFamily {
    fn new(members: impl IntoIterator<Item = Instance>, role: Role) -> SolutionFamily {
        let set: BTreeSet<Instance> = members.into_iter().collect();
        SolutionFamily { members: set.into_iter().collect(), role }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, t: &Instance) -> bool {
        self.members.binary_search(t).is_ok()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Semantics {
    Owa,
    Cwa,
    Rcwa,
    Gcwa,
    Egcwa,
    Pws,
    GcwaStar,
}

impl Semantics {
    pub const ALL: [Semantics; 7] = [
        Semantics::Owa,
        Semantics::Cwa,
        Semantics::Rcwa,
        Semantics::Gcwa,
        Semantics::Egcwa,
        Semantics::Pws,
        Semantics::GcwaStar,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Semantics::Owa => "owa",
            Semantics::Cwa => "cwa",
            Semantics::Rcwa => "rcwa",
            Semantics::Gcwa => "gcwa",
            Semantics::Egcwa => "egcwa",
            Semantics::Pws => "pws",
            Semantics::GcwaStar => "gcwa-star",
        }
    }
}

impl fmt::Display for Semantics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Semantics {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Semantics, String> {
        Semantics::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| format!("unknown semantics `{s}`"))
    }
}

/// What cert(q, ∅) means.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum EmptyCert {
    /// No tuple is certain.
    #[default]
    Empty,
    /// Every candidate tuple is certain.
    All,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OracleAnswer {
    pub answers: TupleSet,
    pub diagnostics: Vec<String>,
}

/// Subsets or unions the oracle may visit in one enumeration.
pub const SUBSET_CAP: u64 = 20_000_000;

/// Ground atoms the general path can handle.
pub const POOL_CAP: usize = 64;

/// cert(q, ·) accumulated member by member.
struct Cert<'q> {
    q: &'q FOQuery,
    qdom: BTreeSet<Value>,
    acc: Vec<Tuple>,
    seen: bool,
}

impl<'q> Cert<'q> {
    fn new(q: &'q FOQuery, known: &BTreeSet<Value>) -> Cert<'q> {
        let base: Vec<Value> = known.iter().cloned().collect();
        let mut acc = Vec::new();
        let n = q.arity();
        if n == 0 || !base.is_empty() {
            let mut idx = vec![0usize; n];
            loop {
                acc.push(idx.iter().map(|&k| base[k].clone()).collect());
                if !advance(&mut idx, base.len()) {
                    break;
                }
            }
        }
        Cert { q, qdom: q.dom(), acc, seen: false }
    }

    /// Intersects with the answers on `t`; true once nothing is left.
    fn feed(&mut self, t: &Instance) -> bool {
        self.seen = true;
        let mut dom = t.dom();
        dom.extend(self.qdom.iter().cloned());
        let domv: Vec<Value> = dom.iter().cloned().collect();
        let q = self.q;
        self.acc.retain(|u| {
            if !u.iter().all(|v| dom.contains(v)) {
                return false;
            }
            let alpha: Binding = q.free.iter().cloned().zip(u.iter().cloned()).collect();
            eval_with_domain(&q.body, t, &alpha, domv.clone()).unwrap_or(false)
        });
        self.acc.is_empty()
    }

    fn finish(self, empty: EmptyCert) -> TupleSet {
        if !self.seen && empty == EmptyCert::Empty {
            return TupleSet::new();
        }
        self.acc.into_iter().collect()
    }
}

fn count_check(count: &mut u64, what: &str) -> Result<()> {
    *count += 1;
    if *count > SUBSET_CAP {
        return Err(Error::BudgetExceeded(format!("more than {SUBSET_CAP} {what}")));
    }
    Ok(())
}

/// Index combinations of size `k` out of `n`, in lexicographic order.
fn for_each_combination(n: usize, k: usize, visit: &mut dyn FnMut(&[usize]) -> Result<bool>) -> Result<bool> {
    if k > n {
        return Ok(false);
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        if visit(&idx)? {
            return Ok(true);
        }
        let mut i = k;
        loop {
            if i == 0 {
                return Ok(false);
            }
            i -= 1;
            if idx[i] < n - k + i {
                idx[i] += 1;
                for j in i + 1..k {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Subsets of `pool` with at most `max` atoms, smallest first.
fn for_each_subset(pool: &[Atom], max: usize, visit: &mut dyn FnMut(&Instance) -> Result<bool>) -> Result<()> {
    let mut count = 0u64;
    for k in 0..=max.min(pool.len()) {
        let stop = for_each_combination(pool.len(), k, &mut |idx| {
            count_check(&mut count, "candidate instances")?;
            visit(&idx.iter().map(|&i| pool[i].clone()).collect())
        })?;
        if stop {
            break;
        }
    }
    Ok(())
}

/// A necessary condition for solutions over a pool of at most 64 atoms:
/// whenever `premise ⊆ T`, some alternative is ⊆ T.
struct Rule {
    premise: u64,
    alts: Vec<u64>,
}

const RULE_BINDINGS: usize = 100_000;
const RULE_ALTS: usize = 256;

struct RuleBuilder<'a> {
    s: &'a Instance,
    index: HashMap<&'a Atom, usize>,
    vals: Vec<Value>,
}

impl RuleBuilder<'_> {
    /// `Some(0)` for a source atom, the atom's bit for a pool atom, `None`
    /// for an atom no candidate contains.
    fn bit(&self, a: &Atom) -> Option<u64> {
        if self.s.contains(a) {
            return Some(0);
        }
        self.index.get(a).map(|&i| 1 << i)
    }

    fn premise(&self, atoms: &[PAtom], b: &Binding) -> Option<u64> {
        atoms.iter().try_fold(0, |m, p| Some(m | self.bit(&p.ground(b)?)?))
    }

    /// Every binding of `vars` over the values; false when there are too many.
    fn for_each_binding(&self, vars: &[Sym], init: &Binding, visit: &mut dyn FnMut(&Binding)) -> bool {
        let n = self.vals.len();
        if n.checked_pow(vars.len() as u32).is_none_or(|k| k > RULE_BINDINGS) {
            return false;
        }
        if n == 0 && !vars.is_empty() {
            return true;
        }
        let mut idx = vec![0usize; vars.len()];
        let mut b = init.clone();
        loop {
            for (v, &k) in vars.iter().zip(&idx) {
                b.insert(v.clone(), self.vals[k].clone());
            }
            visit(&b);
            if !advance(&mut idx, n) {
                return true;
            }
        }
    }

    fn term(t: &Term, b: &Binding) -> Option<Value> {
        match t {
            Term::Var(v) => b.get(v).cloned(),
            Term::Val(x) => Some(x.clone()),
        }
    }

    /// Masks one of which any instance satisfying `f` under `b` contains;
    /// `None` when `f` is not positive existential or too large.
    fn alternatives(&self, f: &Formula, b: &Binding) -> Option<Vec<u64>> {
        let out = match f {
            Formula::Atom(p) => self.bit(&p.ground(b)?).into_iter().collect(),
            Formula::Eq(x, y) => if Self::term(x, b)? == Self::term(y, b)? { vec![0] } else { vec![] },
            Formula::And(fs) => {
                let mut acc = vec![0u64];
                for g in fs {
                    let alts = self.alternatives(g, b)?;
                    acc = acc.iter().flat_map(|x| alts.iter().map(move |y| x | y)).collect();
                    acc.sort_unstable();
                    acc.dedup();
                    if acc.len() > RULE_ALTS {
                        return None;
                    }
                }
                acc
            }
            Formula::Or(fs) => fs.iter().map(|g| self.alternatives(g, b)).collect::<Option<Vec<_>>>()?.concat(),
            Formula::Exists(vs, g) => {
                let mut acc = Vec::new();
                let mut ok = true;
                let complete = self.for_each_binding(vs, b, &mut |b2| match self.alternatives(g, b2) {
                    Some(a) if ok => acc.extend(a),
                    _ => ok = false,
                });
                if !complete || !ok {
                    return None;
                }
                acc
            }
            _ => return None,
        };
        (out.len() <= RULE_ALTS).then_some(out)
    }
}

/// Rules every solution over `pool` satisfies. Dependencies outside the
/// compilable shapes contribute nothing.
fn solution_rules(m: &SchemaMapping, s: &Instance, pool: &[Atom], universe: &[Value]) -> Vec<Rule> {
    let mut vals: BTreeSet<Value> = universe.iter().cloned().collect();
    vals.extend(s.dom());
    vals.extend(m.consts());
    let rb = RuleBuilder { s, index: pool.iter().enumerate().map(|(i, a)| (a, i)).collect(), vals: vals.into_iter().collect() };
    let mut rules = Vec::new();
    for tr in triggers(m, s) {
        let tgd = &m.st_tgds[tr.tgd];
        let head = Formula::Exists(tgd.exists.clone(), Box::new(Formula::And(tgd.head.iter().cloned().map(Formula::atom).collect())));
        if let Some(alts) = rb.alternatives(&head, &tr.binding) {
            rules.push(Rule { premise: 0, alts });
        }
    }
    let mut premised = |atoms: &[PAtom], vars: &[Sym], head: &dyn Fn(&Binding) -> Option<Vec<u64>>| {
        rb.for_each_binding(vars, &Binding::new(), &mut |b| {
            if let (Some(premise), Some(alts)) = (rb.premise(atoms, b), head(b)) {
                rules.push(Rule { premise, alts });
            }
        });
    };
    for e in &m.egds {
        let mut vars: Vec<Sym> = Vec::new();
        for v in e.body.iter().flat_map(|a| a.vars()) {
            if !vars.contains(v) {
                vars.push(v.clone());
            }
        }
        premised(&e.body, &vars, &|b| Some(if b[&e.left] == b[&e.right] { vec![0] } else { vec![] }));
    }
    for c in &m.constraints {
        if let (Some((atoms, head)), Formula::Forall(vars, _)) = (premise_atoms(c), c) {
            premised(&atoms, vars, &|b| rb.alternatives(head, b));
        }
    }
    rules.retain(|r| !r.alts.contains(&0));
    rules
}

/// Ground solutions over `pool` with at most `max` atoms, smallest first.
fn for_each_solution(
    m: &SchemaMapping,
    s: &Instance,
    pool: &[Atom],
    universe: &[Value],
    max: usize,
    visit: &mut dyn FnMut(&Instance) -> Result<bool>,
) -> Result<()> {
    if pool.len() > 64 {
        return for_each_subset(pool, max, &mut |t| Ok(is_solution(m, s, t) && visit(t)?));
    }
    let rules = solution_rules(m, s, pool, universe);
    let mut count = 0u64;
    for k in 0..=max.min(pool.len()) {
        let stop = for_each_combination(pool.len(), k, &mut |idx| {
            count_check(&mut count, "candidate instances")?;
            let t = idx.iter().fold(0u64, |acc, &i| acc | 1 << i);
            if rules.iter().any(|r| t & r.premise == r.premise && !r.alts.iter().any(|&a| t & a == a)) {
                return Ok(false);
            }
            let inst: Instance = idx.iter().map(|&i| pool[i].clone()).collect();
            Ok(is_solution(m, s, &inst) && visit(&inst)?)
        })?;
        if stop {
            break;
        }
    }
    Ok(())
}

type Bits = Box<[u64]>;

fn bits_or(a: &Bits, b: &Bits) -> Bits {
    a.iter().zip(b.iter()).map(|(x, y)| x | y).collect()
}

fn bits_subset(a: &Bits, b: &Bits) -> bool {
    a.iter().zip(b.iter()).all(|(x, y)| x & !y == 0)
}

fn bits_count(a: &Bits) -> usize {
    a.iter().map(|w| w.count_ones() as usize).sum()
}

fn bits_ones(a: &Bits) -> impl Iterator<Item = usize> + '_ {
    a.iter().enumerate().flat_map(|(k, &w)| (0..64).filter(move |i| w >> i & 1 == 1).map(move |i| k * 64 + i))
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for k in 0..n {
            let mut q = p.clone();
            q.insert(k, n - 1);
            out.push(q);
        }
    }
    out
}

/// Unions of nonempty sets of `members` with at most `max` atoms, one per
/// class under renaming of the `fresh` constants. `members` must be closed
/// under such renamings for the classes to be complete.
fn for_each_union(members: &[Instance], fresh: &[Value], max: usize, visit: &mut dyn FnMut(&Instance) -> Result<bool>) -> Result<()> {
    let atoms: Vec<Atom> = members.iter().flat_map(|m| m.iter().cloned()).collect::<BTreeSet<_>>().into_iter().collect();
    let index: HashMap<&Atom, usize> = atoms.iter().enumerate().map(|(i, a)| (a, i)).collect();
    let words = atoms.len().div_ceil(64).max(1);
    let to_bits = |t: &Instance| -> Bits {
        let mut b = vec![0u64; words];
        for a in t {
            let i = index[a];
            b[i / 64] |= 1 << (i % 64);
        }
        b.into_boxed_slice()
    };
    let renamings: Vec<Vec<usize>> = permutations(fresh.len())
        .into_iter()
        .filter_map(|p| {
            let f: ValueMap = fresh.iter().cloned().zip(p.iter().map(|&k| fresh[k].clone())).collect();
            atoms.iter().map(|a| index.get(&a.map(|v| f.get(v).cloned().unwrap_or_else(|| v.clone()))).copied()).collect::<Option<Vec<usize>>>()
        })
        .collect();
    let canon = |b: &Bits| -> Bits {
        let mut best = b.clone();
        for r in &renamings {
            let mut c = vec![0u64; words];
            for i in bits_ones(b) {
                c[r[i] / 64] |= 1 << (r[i] % 64);
            }
            let c = c.into_boxed_slice();
            if c < best {
                best = c;
            }
        }
        best
    };
    let instance = |b: &Bits| -> Instance { bits_ones(b).map(|i| atoms[i].clone()).collect() };
    let mut ms: Vec<Bits> = members.iter().map(to_bits).filter(|b| bits_count(b) <= max).collect();
    ms.sort();
    ms.dedup();
    let mut seen: HashSet<Bits> = HashSet::new();
    let mut level: Vec<Bits> = Vec::new();
    let mut count = 0u64;
    for m in &ms {
        let c = canon(m);
        if seen.insert(c.clone()) {
            count_check(&mut count, "unions")?;
            if visit(&instance(&c))? {
                return Ok(());
            }
            level.push(c);
        }
    }
    while !level.is_empty() {
        let mut next = Vec::new();
        for u in &level {
            for m in &ms {
                if bits_subset(m, u) {
                    continue;
                }
                let v = bits_or(u, m);
                if bits_count(&v) > max {
                    continue;
                }
                let c = canon(&v);
                if seen.insert(c.clone()) {
                    count_check(&mut count, "unions")?;
                    if visit(&instance(&c))? {
                        return Ok(());
                    }
                    next.push(c);
                }
            }
        }
        level = next;
    }
    Ok(())
}

/// Injective maps from `nulls` into `fresh`.
fn for_each_injection(nulls: &[Value], fresh: &[Value], visit: &mut dyn FnMut(&ValueMap)) {
    fn go(k: usize, nulls: &[Value], fresh: &[Value], used: &mut Vec<bool>, cur: &mut ValueMap, visit: &mut dyn FnMut(&ValueMap)) {
        if k == nulls.len() {
            visit(cur);
            return;
        }
        for (j, f) in fresh.iter().enumerate() {
            if !used[j] {
                used[j] = true;
                cur.insert(nulls[k].clone(), f.clone());
                go(k + 1, nulls, fresh, used, cur, visit);
                used[j] = false;
            }
        }
        cur.remove(&nulls[k]);
    }
    go(0, nulls, fresh, &mut vec![false; fresh.len()], &mut ValueMap::new(), visit);
}

fn subset_minimal(mut xs: Vec<Instance>) -> Vec<Instance> {
    xs.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    xs.dedup();
    let mut keep: Vec<Instance> = Vec::new();
    for x in xs {
        if !keep.iter().any(|y| y.len() < x.len() && y.is_subset(&x)) {
            keep.push(x);
        }
    }
    keep.sort();
    keep
}

/// Ground instances over the pool as bitmasks.
struct Pool {
    atoms: Vec<Atom>,
}

impl Pool {
    fn mask(&self, t: &Instance) -> Option<u64> {
        let mut m = 0u64;
        for a in t {
            m |= 1 << self.atoms.iter().position(|b| b == a)?;
        }
        Some(m)
    }

    fn instance(&self, m: u64) -> Instance {
        (0..self.atoms.len()).filter(|i| m >> i & 1 == 1).map(|i| self.atoms[i].clone()).collect()
    }
}

/// The semantics laboratory for one mapping and source.
pub struct Oracle<'a> {
    m: &'a SchemaMapping,
    s: &'a Instance,
    budget: Budget,
    known: BTreeSet<Value>,
    fresh: Vec<Value>,
    general: bool,
    minimal: RefCell<Option<Rc<Vec<Instance>>>>,
    ground: RefCell<Option<Rc<(Pool, Vec<u64>)>>>,
}

impl<'a> Oracle<'a> {
    /// `extra` constants (usually dom(q)) join the universe.
    pub fn new(m: &'a SchemaMapping, s: &'a Instance, budget: Budget, extra: &BTreeSet<Value>) -> Oracle<'a> {
        let mut known = s.consts();
        known.extend(m.consts());
        known.extend(extra.iter().cloned());
        let fresh = fresh_constants(budget.fresh_constants, &known);
        let general = !m.constraints.is_empty();
        Oracle {
            m,
            s,
            budget,
            known,
            fresh,
            general,
            minimal: RefCell::new(None),
            ground: RefCell::new(None),
        }
    }

    /// Uses ground-instance enumeration even for st-tgd mappings.
    pub fn force_general(mut self) -> Oracle<'a> {
        self.general = true;
        self
    }

    pub fn budget(&self) -> Budget {
        self.budget
    }

    pub fn is_general(&self) -> bool {
        self.general
    }

    pub fn universe(&self) -> Vec<Value> {
        self.known.iter().chain(&self.fresh).cloned().collect()
    }

    fn pool(&self) -> Result<Vec<Atom>> {
        let universe = self.universe();
        let mut out = Vec::new();
        for (rel, &arity) in &self.m.target.relations {
            let total = universe.len().checked_pow(arity as u32).unwrap_or(usize::MAX);
            if out.len().saturating_add(total) > 1 << 20 {
                return Err(Error::BudgetExceeded("too many ground atoms over the universe".into()));
            }
            let mut idx = vec![0usize; arity];
            if arity > 0 && universe.is_empty() {
                continue;
            }
            loop {
                out.push(Atom { rel: rel.clone(), args: idx.iter().map(|&k| universe[k].clone()).collect() });
                if !advance(&mut idx, universe.len()) {
                    break;
                }
            }
        }
        Ok(out)
    }

    /// Every ground solution with at most `max_atoms` atoms (general path).
    fn ground(&self) -> Result<Rc<(Pool, Vec<u64>)>> {
        if let Some(g) = self.ground.borrow().as_ref() {
            return Ok(g.clone());
        }
        let atoms = self.pool()?;
        if atoms.len() > POOL_CAP {
            return Err(Error::BudgetExceeded(format!(
                "{} ground atoms over the universe, the general path handles {POOL_CAP}",
                atoms.len()
            )));
        }
        let pool = Pool { atoms };
        let mut sols = Vec::new();
        for_each_solution(self.m, self.s, &pool.atoms, &self.universe(), self.budget.max_atoms, &mut |t| {
            sols.push(pool.mask(t).expect("pool atom"));
            Ok(false)
        })?;
        let g = Rc::new((pool, sols));
        *self.ground.borrow_mut() = Some(g.clone());
        Ok(g)
    }

    /// Minimal elements of `ms` that contain `base`.
    fn minimal_above(ms: &[u64], base: u64) -> Vec<u64> {
        let mut above: Vec<u64> = ms.iter().copied().filter(|&m| m & base == base).collect();
        above.sort_by_key(|m| m.count_ones());
        let mut keep: Vec<u64> = Vec::new();
        for m in above {
            if !keep.iter().any(|&k| k & m == k) {
                keep.push(m);
            }
        }
        keep
    }

    fn minimal_list(&self) -> Result<Rc<Vec<Instance>>> {
        if let Some(m) = self.minimal.borrow().as_ref() {
            return Ok(m.clone());
        }
        let list = if self.general {
            let g = self.ground()?;
            let mut out: Vec<Instance> = Self::minimal_above(&g.1, 0).into_iter().map(|m| g.0.instance(m)).collect();
            out.sort();
            out
        } else {
            let st = SchemaMapping { egds: Vec::new(), ..self.m.clone() };
            let core = core_solution(&st, self.s)?;
            let reps = enum_min_C(&core, &self.known)?.reps;
            let mut out = BTreeSet::new();
            for r in &reps {
                let nulls: Vec<Value> = r.nulls().into_iter().collect();
                if nulls.len() > self.fresh.len() {
                    return Err(Error::BudgetExceeded(format!(
                        "a minimal solution needs {} fresh constants, the budget allows {}",
                        nulls.len(),
                        self.fresh.len()
                    )));
                }
                for_each_injection(&nulls, &self.fresh, &mut |f| {
                    let t = r.rename(f);
                    if is_solution(self.m, self.s, &t) {
                        out.insert(t);
                    }
                });
            }
            out.into_iter().collect()
        };
        let rc = Rc::new(list);
        *self.minimal.borrow_mut() = Some(rc.clone());
        Ok(rc)
    }

    /// Ground minimal solutions over the universe.
    pub fn minimal_ground_solutions(&self) -> Result<SolutionFamily> {
        Ok(SolutionFamily::new(self.minimal_list()?.iter().cloned(), Role::Minimal))
    }

    /// 𝒯⁰, 𝒯¹, … as computed, and whether the last level is a fixpoint.
    pub fn tstar_levels(&self) -> Result<(Vec<SolutionFamily>, bool)> {
        let level0 = self.minimal_list()?.as_ref().clone();
        if !self.general {
            // st-tgds and egds: the sequence is constant
            return Ok((vec![SolutionFamily::new(level0, Role::TstarLevel(0))], true));
        }
        let g = self.ground()?;
        let (pool, sols) = (&g.0, &g.1);
        let mut cur: Vec<u64> = level0.iter().map(|t| pool.mask(t).expect("pool atom")).collect();
        let mut levels = vec![cur.clone()];
        for _ in 0..self.budget.max_fixpoint_rounds {
            let unions = self.mask_closure(&cur)?;
            let mut next: BTreeSet<u64> = cur.iter().copied().collect();
            let mut grew = false;
            for &t0 in &unions {
                for t in Self::minimal_above(sols, t0) {
                    if !unions.contains(&t) && next.insert(t) {
                        grew = true;
                    }
                }
            }
            if !grew {
                return Ok((self.level_families(pool, &levels), true));
            }
            cur = next.into_iter().collect();
            levels.push(cur.clone());
        }
        Ok((self.level_families(pool, &levels), false))
    }

    fn level_families(&self, pool: &Pool, levels: &[Vec<u64>]) -> Vec<SolutionFamily> {
        levels
            .iter()
            .enumerate()
            .map(|(i, l)| SolutionFamily::new(l.iter().map(|&m| pool.instance(m)), Role::TstarLevel(i)))
            .collect()
    }

    /// ⟨members⟩ restricted to at most `max_atoms` atoms.
    fn mask_closure(&self, members: &[u64]) -> Result<HashSet<u64>> {
        let max = self.budget.max_atoms as u32;
        let mut all: HashSet<u64> = members.iter().copied().filter(|m| m.count_ones() <= max).collect();
        let mut frontier: Vec<u64> = all.iter().copied().collect();
        let mut count = 0u64;
        while let Some(u) = frontier.pop() {
            for &t in members {
                let v = u | t;
                if v != u && v.count_ones() <= max && all.insert(v) {
                    count_check(&mut count, "unions")?;
                    frontier.push(v);
                }
            }
        }
        Ok(all)
    }

    /// 𝒯* when the sequence stabilizes within `max_fixpoint_rounds`.
    pub fn tstar_fixpoint(&self) -> Result<SolutionFamily> {
        let (mut levels, done) = self.tstar_levels()?;
        if !done {
            return Err(Error::FixpointNotReached(self.budget.max_fixpoint_rounds));
        }
        Ok(levels.pop().expect("level 0 exists"))
    }

    /// Solutions that are unions of one or more members of 𝒯*.
    pub fn gcwa_star_solutions(&self) -> Result<SolutionFamily> {
        let mut out = Vec::new();
        self.for_each_gcwa_star(false, &mut |t| {
            out.push(t.clone());
            Ok(false)
        })?;
        Ok(SolutionFamily::new(out, Role::GcwaStar))
    }

    /// With `up_to_renaming`, one union per class under renaming of fresh
    /// constants.
    fn for_each_gcwa_star(&self, up_to_renaming: bool, visit: &mut dyn FnMut(&Instance) -> Result<bool>) -> Result<()> {
        if self.general {
            let tstar = self.tstar_fixpoint()?;
            let g = self.ground()?;
            let masks: Vec<u64> = tstar.members.iter().map(|t| g.0.mask(t).expect("pool atom")).collect();
            let mut unions: Vec<u64> = self.mask_closure(&masks)?.into_iter().collect();
            unions.sort_by_key(|m| (m.count_ones(), *m));
            for u in unions {
                let t = g.0.instance(u);
                if is_solution(self.m, self.s, &t) && visit(&t)? {
                    break;
                }
            }
            Ok(())
        } else {
            let minimal = self.minimal_list()?;
            let fresh: &[Value] = if up_to_renaming { &self.fresh } else { &[] };
            for_each_union(&minimal, fresh, self.budget.max_atoms, &mut |t| {
                if is_solution(self.m, self.s, t) {
                    visit(t)
                } else {
                    Ok(false)
                }
            })
        }
    }

    /// Is the ground instance `t` a GCWA*-solution? Exact for st-tgds and
    /// egds: `t` must be a solution covered by the minimal solutions inside
    /// it, which are the minimal homomorphic images of the core in `t`.
    pub fn is_gcwa_star_solution(&self, t: &Instance) -> Result<bool> {
        if !self.m.constraints.is_empty() {
            return Err(Error::PreconditionViolated(Precondition::NotStTgdMapping));
        }
        if !t.is_ground() || !is_solution(self.m, self.s, t) {
            return Ok(false);
        }
        let st = SchemaMapping { egds: Vec::new(), ..self.m.clone() };
        let core = core_solution(&st, self.s)?;
        let pats: Vec<PAtom> = core
            .iter()
            .map(|a| PAtom {
                rel: a.rel.clone(),
                args: a
                    .args
                    .iter()
                    .map(|v| match v {
                        Value::Null(n) => Term::var(&format!("_n{n}")),
                        c => Term::Val(c.clone()),
                    })
                    .collect(),
            })
            .collect();
        let mut covered = Instance::new();
        crate::model::match_patterns(&pats, t, &Binding::new(), &mut |b| {
            let image: Instance = pats.iter().map(|p| p.ground(b).expect("all nulls bound")).collect();
            if !image.is_subset(&covered) && image.iter().all(|a| !is_solution(&st, self.s, &image.without(a))) {
                covered.extend(&image);
            }
            false
        });
        Ok(covered == *t)
    }

    /// Answers to `q` under `sem`. `q`'s constants must be in the universe.
    pub fn answers(&self, q: &FOQuery, sem: Semantics, empty: EmptyCert) -> Result<OracleAnswer> {
        let mut candidates = self.known.clone();
        candidates.extend(q.dom());
        let mut cert = Cert::new(q, &candidates);
        let mut diagnostics = Vec::new();
        let st_only = self.m.is_st_tgd_only();
        match sem {
            Semantics::Cwa => {
                if !st_only {
                    return Err(Error::UnsupportedSemantics("cwa".into()));
                }
                let can = canonical_solution(self.m, self.s)?;
                return Ok(OracleAnswer { answers: cert_poss_with(q, &can, 0, NULL_CAP)?, diagnostics });
            }
            Semantics::Owa => {
                if q.is_ucq() && st_only {
                    return Ok(OracleAnswer { answers: answers_owa_homclosed(&core_solution(self.m, self.s)?, q)?, diagnostics });
                }
                let pool = self.pool()?;
                for_each_solution(self.m, self.s, &pool, &self.universe(), self.budget.max_atoms, &mut |t| Ok(cert.feed(t)))?;
            }
            Semantics::Egcwa => {
                for t in self.minimal_list()?.iter() {
                    if cert.feed(t) {
                        break;
                    }
                }
            }
            Semantics::Rcwa => {
                let minimal = self.minimal_list()?;
                let mut it = minimal.iter();
                let meet = it.next().map(|first| it.fold(first.clone(), |acc, t| acc.atoms().intersection(t.atoms()).cloned().collect()));
                match meet.filter(|i| is_solution(self.m, self.s, i)) {
                    Some(i) => {
                        cert.feed(&i);
                    }
                    None => diagnostics.push("no RCWA-solution: there is no unique minimal ground solution".into()),
                }
            }
            Semantics::Gcwa => {
                let mut pool = BTreeSet::new();
                for t in self.minimal_list()?.iter() {
                    pool.extend(t.iter().cloned());
                }
                let pool: Vec<Atom> = pool.into_iter().collect();
                for_each_solution(self.m, self.s, &pool, &self.universe(), self.budget.max_atoms, &mut |t| Ok(cert.feed(t)))?;
            }
            Semantics::Pws => {
                if !st_only {
                    return Err(Error::UnsupportedSemantics("pws".into()));
                }
                let pieces = self.justified_pieces();
                for_each_union(&pieces, &self.fresh, self.budget.max_atoms, &mut |t| {
                    Ok(is_solution(self.m, self.s, t) && cert.feed(t))
                })?;
            }
            Semantics::GcwaStar => {
                self.for_each_gcwa_star(true, &mut |t| Ok(cert.feed(t)))?;
            }
        }
        if !cert.seen && empty == EmptyCert::All {
            diagnostics.push("empty family: every candidate tuple is certain".into());
        }
        Ok(OracleAnswer { answers: cert.finish(empty), diagnostics })
    }

    /// Ground head instantiations ψ(ā,ū) over the universe, one per trigger
    /// and choice of ū. A ground solution is a PWS-solution iff it is a
    /// union of such pieces.
    fn justified_pieces(&self) -> Vec<Instance> {
        let universe = self.universe();
        let mut out = BTreeSet::new();
        for tr in triggers(self.m, self.s) {
            let tgd = &self.m.st_tgds[tr.tgd];
            let n = tgd.exists.len();
            if n > 0 && universe.is_empty() {
                continue;
            }
            let mut idx = vec![0usize; n];
            loop {
                let mut b = tr.binding.clone();
                for (z, &k) in tgd.exists.iter().zip(&idx) {
                    b.insert(z.clone(), universe[k].clone());
                }
                out.insert(tgd.head.iter().map(|h| h.ground(&b).expect("head variables are bound")).collect::<Instance>());
                if !advance(&mut idx, universe.len()) {
                    break;
                }
            }
        }
        out.into_iter().collect()
    }
}

/// Answers to `q` on (M,S) under `sem`, universe extended by dom(q).
pub fn answers_semantics(
    m: &SchemaMapping,
    s: &Instance,
    q: &FOQuery,
    sem: Semantics,
    budget: Budget,
    empty: EmptyCert,
) -> Result<OracleAnswer> {
    Oracle::new(m, s, budget, &q.dom()).answers(q, sem, empty)
}

/// Whether one more fresh constant leaves the answers unchanged.
pub fn budget_is_stable(m: &SchemaMapping, s: &Instance, q: &FOQuery, sem: Semantics, budget: Budget) -> Result<bool> {
    let more = Budget { fresh_constants: budget.fresh_constants + 1, ..budget };
    let a = answers_semantics(m, s, q, sem, budget, EmptyCert::Empty)?;
    let b = answers_semantics(m, s, q, sem, more, EmptyCert::Empty)?;
    Ok(a.answers == b.answers)
}

/// Minimal instances of poss(T) by brute force over valuations into
/// const(T) ∪ C plus |nulls(T)| fresh constants.
pub fn minimal_possible_worlds(t: &Instance, c: &BTreeSet<Value>) -> Result<Vec<Instance>> {
    let nulls: Vec<Value> = t.nulls().into_iter().collect();
    if nulls.len() > NULL_CAP {
        return Err(Error::BudgetExceeded(format!("{} nulls exceed the cap {NULL_CAP}", nulls.len())));
    }
    let mut known = t.consts();
    known.extend(c.iter().cloned());
    let base: Vec<Value> = known.iter().cloned().collect();
    let fresh = fresh_constants(nulls.len(), &known);
    let mut worlds = BTreeSet::new();
    crate::logic::for_each_valuation(&nulls, &base, &fresh, &mut |v| {
        worlds.insert(t.rename(v));
        false
    });
    Ok(subset_minimal(worlds.into_iter().collect()))
}
