//! Values, atoms, instances, schemas, mappings and homomorphism search.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::logic::Formula;

/// Interned-ish identifier used for relation names, variables and constants.
pub type Sym = Arc<str>;

pub fn sym(s: &str) -> Sym {
    Arc::from(s)
}

/// A constant or a labeled null. Constants sort before nulls.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Const(Sym),
    Null(u32),
}

impl Value {
    pub fn c(name: &str) -> Value {
        Value::Const(sym(name))
    }

    pub fn is_const(&self) -> bool {
        matches!(self, Value::Const(_))
    }

    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null(_))
    }

    pub fn name(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Const(c) if is_plain_ident(c) => f.write_str(c),
            Value::Const(c) => write!(f, "\"{c}\""),
            Value::Null(n) => write!(f, "_n{n}"),
        }
    }
}

impl fmt::Debug for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// True when `s` can be written without quotes in every text format.
pub(crate) fn is_plain_ident(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphanumeric() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '\'')
        && !matches!(s, "forall" | "exists" | "source" | "target" | "tgd" | "egd" | "constraint")
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub rel: Sym,
    pub args: Vec<Value>,
}

impl Atom {
    pub fn new(rel: &str, args: Vec<Value>) -> Atom {
        Atom { rel: sym(rel), args }
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(Value::is_const)
    }

    pub fn nulls(&self) -> impl Iterator<Item = &Value> {
        self.args.iter().filter(|v| v.is_null())
    }

    pub fn map(&self, f: impl Fn(&Value) -> Value) -> Atom {
        Atom { rel: self.rel.clone(), args: self.args.iter().map(f).collect() }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.rel)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(")")
    }
}

impl fmt::Debug for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Shorthand for building atoms in tests and examples: `atom("E", &["a", "_1"])`.
/// Arguments of the form `_<digits>` are nulls, everything else is a constant.
pub fn atom(rel: &str, args: &[&str]) -> Atom {
    Atom::new(rel, args.iter().map(|a| parse_value_shorthand(a)).collect())
}

fn parse_value_shorthand(a: &str) -> Value {
    match a.strip_prefix('_').and_then(|d| d.parse::<u32>().ok()) {
        Some(n) => Value::Null(n),
        None => Value::c(a),
    }
}

/// A finite set of atoms.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Instance {
    atoms: BTreeSet<Atom>,
}

impl Instance {
    pub fn new() -> Instance {
        Instance::default()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn insert(&mut self, a: Atom) -> bool {
        self.atoms.insert(a)
    }

    pub fn remove(&mut self, a: &Atom) -> bool {
        self.atoms.remove(a)
    }

    pub fn contains(&self, a: &Atom) -> bool {
        self.atoms.contains(a)
    }

    pub fn iter(&self) -> std::collections::btree_set::Iter<'_, Atom> {
        self.atoms.iter()
    }

    pub fn atoms(&self) -> &BTreeSet<Atom> {
        &self.atoms
    }

    pub fn dom(&self) -> BTreeSet<Value> {
        self.atoms.iter().flat_map(|a| a.args.iter().cloned()).collect()
    }

    pub fn consts(&self) -> BTreeSet<Value> {
        self.atoms.iter().flat_map(|a| a.args.iter()).filter(|v| v.is_const()).cloned().collect()
    }

    pub fn nulls(&self) -> BTreeSet<Value> {
        self.atoms.iter().flat_map(|a| a.nulls()).cloned().collect()
    }

    pub fn is_ground(&self) -> bool {
        self.atoms.iter().all(Atom::is_ground)
    }

    pub fn max_null_id(&self) -> Option<u32> {
        self.atoms
            .iter()
            .flat_map(|a| a.args.iter())
            .filter_map(|v| match v {
                Value::Null(n) => Some(*n),
                Value::Const(_) => None,
            })
            .max()
    }

    pub fn union(&self, other: &Instance) -> Instance {
        let mut out = self.clone();
        out.atoms.extend(other.atoms.iter().cloned());
        out
    }

    pub fn extend(&mut self, other: &Instance) {
        self.atoms.extend(other.atoms.iter().cloned());
    }

    pub fn difference(&self, other: &Instance) -> Instance {
        self.atoms.difference(&other.atoms).cloned().collect()
    }

    pub fn is_subset(&self, other: &Instance) -> bool {
        self.atoms.is_subset(&other.atoms)
    }

    pub fn without(&self, a: &Atom) -> Instance {
        let mut out = self.clone();
        out.atoms.remove(a);
        out
    }

    /// Applies `f` to every value; values outside the map stay unchanged.
    pub fn rename(&self, f: &ValueMap) -> Instance {
        self.atoms.iter().map(|a| a.map(|v| f.get(v).cloned().unwrap_or_else(|| v.clone()))).collect()
    }
}

impl FromIterator<Atom> for Instance {
    fn from_iter<I: IntoIterator<Item = Atom>>(iter: I) -> Self {
        Instance { atoms: iter.into_iter().collect() }
    }
}

impl<'a> IntoIterator for &'a Instance {
    type Item = &'a Atom;
    type IntoIter = std::collections::btree_set::Iter<'a, Atom>;
    fn into_iter(self) -> Self::IntoIter {
        self.atoms.iter()
    }
}

impl fmt::Display for Instance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, a) in self.atoms.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str("}")
    }
}

impl fmt::Debug for Instance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Relation symbols with their arities.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Schema {
    pub relations: BTreeMap<Sym, usize>,
}

impl Schema {
    pub fn new(rels: &[(&str, usize)]) -> Schema {
        Schema { relations: rels.iter().map(|(r, n)| (sym(r), *n)).collect() }
    }

    pub fn arity(&self, rel: &str) -> Option<usize> {
        self.relations.get(rel).copied()
    }

    pub fn contains(&self, rel: &str) -> bool {
        self.relations.contains_key(rel)
    }

    pub fn union(&self, other: &Schema) -> Schema {
        let mut relations = self.relations.clone();
        relations.extend(other.relations.iter().map(|(k, v)| (k.clone(), *v)));
        Schema { relations }
    }

    pub fn max_arity(&self) -> usize {
        self.relations.values().copied().max().unwrap_or(0)
    }
}

/// A term in a dependency or query: a variable or a fixed value.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(Sym),
    Val(Value),
}

impl Term {
    pub fn var(name: &str) -> Term {
        Term::Var(sym(name))
    }

    pub fn c(name: &str) -> Term {
        Term::Val(Value::c(name))
    }

    pub fn as_var(&self) -> Option<&Sym> {
        match self {
            Term::Var(v) => Some(v),
            Term::Val(_) => None,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => f.write_str(v),
            Term::Val(Value::Const(c)) => write!(f, "\"{c}\""),
            Term::Val(v) => write!(f, "{v}"),
        }
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// A relational atom over terms.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PAtom {
    pub rel: Sym,
    pub args: Vec<Term>,
}

impl PAtom {
    /// Arguments are variables unless quoted: `patom("E", &["x", "'a"])`.
    pub fn new(rel: &str, args: &[&str]) -> PAtom {
        let args = args
            .iter()
            .map(|a| match a.strip_prefix('\'') {
                Some(c) => Term::c(c),
                None => Term::var(a),
            })
            .collect();
        PAtom { rel: sym(rel), args }
    }

    pub fn vars(&self) -> impl Iterator<Item = &Sym> {
        self.args.iter().filter_map(Term::as_var)
    }

    /// Instantiates the atom; every variable must be bound.
    pub fn ground(&self, b: &Binding) -> Option<Atom> {
        let args = self
            .args
            .iter()
            .map(|t| match t {
                Term::Var(v) => b.get(v).cloned(),
                Term::Val(x) => Some(x.clone()),
            })
            .collect::<Option<Vec<_>>>()?;
        Some(Atom { rel: self.rel.clone(), args })
    }
}

impl fmt::Display for PAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.rel)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(")")
    }
}

impl fmt::Debug for PAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

pub type Binding = BTreeMap<Sym, Value>;

/// `body -> exists z̄: head`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StTgd {
    pub body: Vec<PAtom>,
    pub exists: Vec<Sym>,
    pub head: Vec<PAtom>,
}

impl StTgd {
    /// Variables of the body, in first-occurrence order.
    pub fn universal_vars(&self) -> Vec<Sym> {
        let mut out: Vec<Sym> = Vec::new();
        for v in self.body.iter().flat_map(PAtom::vars) {
            if !out.contains(v) {
                out.push(v.clone());
            }
        }
        out
    }

    /// Every two distinct head atoms share an existential variable.
    pub fn is_packed(&self) -> bool {
        let ex: Vec<BTreeSet<&Sym>> = self
            .head
            .iter()
            .map(|a| a.vars().filter(|v| self.exists.contains(v)).collect())
            .collect();
        for i in 0..ex.len() {
            for j in i + 1..ex.len() {
                if self.head[i] != self.head[j] && ex[i].is_disjoint(&ex[j]) {
                    return false;
                }
            }
        }
        true
    }
}

/// `body -> left = right` over the target schema.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Egd {
    pub body: Vec<PAtom>,
    pub left: Sym,
    pub right: Sym,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SchemaMapping {
    pub source: Schema,
    pub target: Schema,
    pub st_tgds: Vec<StTgd>,
    pub egds: Vec<Egd>,
    /// Sentences over source and target, evaluated only by the oracle.
    pub constraints: Vec<Formula>,
}

impl SchemaMapping {
    pub fn is_st_tgd_only(&self) -> bool {
        self.egds.is_empty() && self.constraints.is_empty()
    }

    pub fn is_packed(&self) -> bool {
        self.st_tgds.iter().all(StTgd::is_packed)
    }

    /// Largest number of existential variables in one st-tgd.
    pub fn block_size(&self) -> usize {
        self.st_tgds.iter().map(|t| t.exists.len()).max().unwrap_or(0)
    }

    /// Constants mentioned by the dependencies.
    pub fn consts(&self) -> BTreeSet<Value> {
        let mut out = BTreeSet::new();
        let pats = self
            .st_tgds
            .iter()
            .flat_map(|t| t.body.iter().chain(t.head.iter()))
            .chain(self.egds.iter().flat_map(|e| e.body.iter()));
        for p in pats {
            for t in &p.args {
                if let Term::Val(v) = t {
                    out.insert(v.clone());
                }
            }
        }
        for c in &self.constraints {
            out.extend(c.consts());
        }
        out
    }
}

/// A finite map on values.
pub type ValueMap = BTreeMap<Value, Value>;

/// Defined on dom(I) and the identity on const(I).
pub fn is_legal(f: &ValueMap, i: &Instance) -> bool {
    i.dom().iter().all(|v| match (v, f.get(v)) {
        (_, None) => false,
        (Value::Const(_), Some(w)) => v == w,
        (Value::Null(_), Some(_)) => true,
    })
}

pub fn apply_map(f: &ValueMap, i: &Instance) -> Result<Instance> {
    let mut out = Instance::new();
    for a in i {
        let args = a
            .args
            .iter()
            .map(|v| f.get(v).cloned().ok_or_else(|| Error::UndefinedValue(v.clone())))
            .collect::<Result<Vec<_>>>()?;
        out.insert(Atom { rel: a.rel.clone(), args });
    }
    Ok(out)
}

/// Identity on dom(I) overridden by `f`.
pub fn extend_identity(f: &ValueMap, i: &Instance) -> ValueMap {
    let mut out: ValueMap = i.dom().into_iter().map(|v| (v.clone(), v)).collect();
    out.extend(f.iter().map(|(k, v)| (k.clone(), v.clone())));
    out
}

/// Same relation, same constants in the same places, same equality pattern.
pub fn atoms_isomorphic(a: &Atom, b: &Atom) -> bool {
    if a.rel != b.rel || a.args.len() != b.args.len() {
        return false;
    }
    let n = a.args.len();
    for i in 0..n {
        let (x, y) = (&a.args[i], &b.args[i]);
        if x.is_const() != y.is_const() || (x.is_const() && x != y) {
            return false;
        }
        for j in i + 1..n {
            if (a.args[i] == a.args[j]) != (b.args[i] == b.args[j]) {
                return false;
            }
        }
    }
    true
}

/// Per-relation view of an instance.
pub struct RelIndex<'a> {
    by_rel: HashMap<&'a str, Vec<&'a Atom>>,
}

impl<'a> RelIndex<'a> {
    pub fn new(i: &'a Instance) -> RelIndex<'a> {
        let mut by_rel: HashMap<&str, Vec<&Atom>> = HashMap::new();
        for a in i {
            by_rel.entry(&a.rel).or_default().push(a);
        }
        RelIndex { by_rel }
    }

    pub fn get(&self, rel: &str) -> &[&'a Atom] {
        self.by_rel.get(rel).map(Vec::as_slice).unwrap_or(&[])
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Slot {
    Fixed(usize),
    Var(usize),
}

/// Conjunctive pattern compiled to slot form; backtracking matcher over a `RelIndex`.
struct Matcher {
    rels: Vec<Sym>,
    slots: Vec<Vec<Slot>>,
    fixed: Vec<Value>,
    nvars: usize,
}

impl Matcher {
    /// Reorders atoms so that each one shares as many variables as possible with its predecessors.
    fn order(&mut self, prebound: &[bool], idx: &RelIndex<'_>) {
        let mut bound = prebound.to_vec();
        let mut left: Vec<usize> = (0..self.rels.len()).collect();
        let mut order = Vec::with_capacity(left.len());
        while !left.is_empty() {
            let score = |k: usize, bound: &[bool]| {
                let mut b = 0usize;
                let mut free = 0usize;
                for s in &self.slots[k] {
                    match s {
                        Slot::Fixed(_) => b += 1,
                        Slot::Var(v) if bound[*v] => b += 1,
                        Slot::Var(_) => free += 1,
                    }
                }
                (free == 0, b, std::cmp::Reverse(idx.get(&self.rels[k]).len()))
            };
            let (pos, _) = left.iter().enumerate().max_by_key(|(p, k)| (score(**k, &bound), std::cmp::Reverse(*p))).unwrap();
            let k = left.remove(pos);
            for s in &self.slots[k] {
                if let Slot::Var(v) = s {
                    bound[*v] = true;
                }
            }
            order.push(k);
        }
        self.rels = order.iter().map(|&k| self.rels[k].clone()).collect();
        self.slots = order.iter().map(|&k| self.slots[k].clone()).collect();
    }

    fn run(
        &self,
        idx: &RelIndex<'_>,
        depth: usize,
        assign: &mut Vec<Option<Value>>,
        visit: &mut dyn FnMut(&[Option<Value>]) -> bool,
    ) -> bool {
        if depth == self.rels.len() {
            return visit(assign);
        }
        let slots = &self.slots[depth];
        let mut newly = Vec::with_capacity(slots.len());
        'cand: for cand in idx.get(&self.rels[depth]) {
            if cand.args.len() != slots.len() {
                continue;
            }
            for v in newly.drain(..) {
                assign[v] = None;
            }
            for (s, val) in slots.iter().zip(&cand.args) {
                match *s {
                    Slot::Fixed(f) => {
                        if &self.fixed[f] != val {
                            continue 'cand;
                        }
                    }
                    Slot::Var(v) => match &assign[v] {
                        Some(w) if w != val => continue 'cand,
                        Some(_) => {}
                        None => {
                            assign[v] = Some(val.clone());
                            newly.push(v);
                        }
                    },
                }
            }
            if self.run(idx, depth + 1, assign, visit) {
                for v in newly.drain(..) {
                    assign[v] = None;
                }
                return true;
            }
        }
        for v in newly.drain(..) {
            assign[v] = None;
        }
        false
    }
}

/// Enumerates all bindings of the variables of `pats` that extend `init` and
/// send every pattern into `inst`. `visit` returns true to stop early.
/// Returns true iff stopped early.
pub fn match_patterns(
    pats: &[PAtom],
    inst: &Instance,
    init: &Binding,
    visit: &mut dyn FnMut(&Binding) -> bool,
) -> bool {
    let idx = RelIndex::new(inst);
    match_patterns_indexed(pats, &idx, init, visit)
}

pub fn match_patterns_indexed(
    pats: &[PAtom],
    idx: &RelIndex<'_>,
    init: &Binding,
    visit: &mut dyn FnMut(&Binding) -> bool,
) -> bool {
    let mut vars: Vec<Sym> = Vec::new();
    let mut fixed = Vec::new();
    let mut slots = Vec::new();
    for p in pats {
        let mut row = Vec::new();
        for t in &p.args {
            match t {
                Term::Var(v) => {
                    let k = match vars.iter().position(|w| w == v) {
                        Some(k) => k,
                        None => {
                            vars.push(v.clone());
                            vars.len() - 1
                        }
                    };
                    row.push(Slot::Var(k));
                }
                Term::Val(x) => {
                    fixed.push(x.clone());
                    row.push(Slot::Fixed(fixed.len() - 1));
                }
            }
        }
        slots.push(row);
    }
    let mut m = Matcher { rels: pats.iter().map(|p| p.rel.clone()).collect(), slots, fixed, nvars: vars.len() };
    let mut assign: Vec<Option<Value>> = vars.iter().map(|v| init.get(v).cloned()).collect();
    let prebound: Vec<bool> = assign.iter().map(Option::is_some).collect();
    m.order(&prebound, idx);
    debug_assert_eq!(m.nvars, assign.len());
    m.run(idx, 0, &mut assign, &mut |a| {
        let mut b = init.clone();
        for (v, x) in vars.iter().zip(a) {
            b.insert(v.clone(), x.clone().expect("pattern variable bound"));
        }
        visit(&b)
    })
}

/// Searches for a homomorphism `h` from `i` to `j` extending `frozen`:
/// legal for `i` and with h(i) ⊆ j. Complete backtracking search.
pub fn find_homomorphism(i: &Instance, j: &Instance, frozen: &ValueMap) -> Option<ValueMap> {
    let idx = RelIndex::new(j);
    find_homomorphism_indexed(i, &idx, frozen)
}

pub(crate) fn find_homomorphism_indexed(i: &Instance, idx: &RelIndex<'_>, frozen: &ValueMap) -> Option<ValueMap> {
    // nulls by descending occurrence count, then canonical order
    let mut count: BTreeMap<&Value, usize> = BTreeMap::new();
    for a in i {
        for v in a.nulls() {
            *count.entry(v).or_default() += 1;
        }
    }
    let mut nulls: Vec<&Value> = count.keys().copied().collect();
    nulls.sort_by_key(|v| std::cmp::Reverse(count[v]));
    let var_of: HashMap<&Value, usize> = nulls.iter().enumerate().map(|(k, v)| (*v, k)).collect();

    let mut fixed = Vec::new();
    let mut slots = Vec::new();
    let mut rels = Vec::new();
    let mut atoms: Vec<&Atom> = i.iter().collect();
    atoms.sort_by_key(|a| a.nulls().map(|v| var_of[v]).min().unwrap_or(usize::MAX));
    for a in atoms {
        let mut row = Vec::new();
        for v in &a.args {
            match v {
                Value::Null(_) => row.push(Slot::Var(var_of[v])),
                Value::Const(_) => {
                    fixed.push(v.clone());
                    row.push(Slot::Fixed(fixed.len() - 1));
                }
            }
        }
        rels.push(a.rel.clone());
        slots.push(row);
    }
    let mut m = Matcher { rels, slots, fixed, nvars: nulls.len() };
    let mut assign: Vec<Option<Value>> = nulls.iter().map(|v| frozen.get(*v).cloned()).collect();
    let prebound: Vec<bool> = assign.iter().map(Option::is_some).collect();
    m.order(&prebound, idx);
    debug_assert_eq!(m.nvars, assign.len());
    let mut found = None;
    m.run(idx, 0, &mut assign, &mut |a| {
        let mut h: ValueMap = frozen.clone();
        for c in i.consts() {
            h.insert(c.clone(), c);
        }
        for (v, x) in nulls.iter().zip(a) {
            h.insert((*v).clone(), x.clone().expect("null bound"));
        }
        found = Some(h);
        true
    });
    found
}

/// Allocates nulls with increasing ids, starting after `start`.
#[derive(Debug, Clone)]
pub struct NullGen {
    next: u32,
}

impl NullGen {
    pub fn new() -> NullGen {
        NullGen { next: 1 }
    }

    pub fn after(i: &Instance) -> NullGen {
        NullGen { next: i.max_null_id().map_or(1, |n| n + 1) }
    }

    pub fn fresh(&mut self) -> Value {
        let v = Value::Null(self.next);
        self.next += 1;
        v
    }
}

impl Default for NullGen {
    fn default() -> Self {
        NullGen::new()
    }
}
