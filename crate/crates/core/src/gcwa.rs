//! GCWA* answers for universal queries.
//!
//! The fast path works on Core(M,S) for mappings of packed st-tgds: the
//! negated query is split into existential conjuncts, and each conjunct is
//! tested with CoreEval, which glues block-level minimal representatives
//! together. The general evaluator drops the packedness requirement and
//! enumerates minimal solutions directly.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::rc::Rc;

use crate::chase::is_solution;
use crate::corelib::{atom_blocks, blocks_packed, core_solution, is_core};
use crate::error::{Error, Precondition, Result};
use crate::logic::{advance, fresh_constants, for_each_valuation, query_answers, FOQuery, Formula, Tuple, TupleSet};
use crate::minrep::{enum_min_C_block, BLOCK_CAP};
use crate::model::{match_patterns, Atom, Binding, Instance, PAtom, SchemaMapping, Sym, Term, Value};

/// A literal of a conjunct before specialization.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Literal {
    Pos(PAtom),
    Neg(PAtom),
    Eq(Term, Term),
    Neq(Term, Term),
}

impl Literal {
    fn terms(&self) -> Vec<&Term> {
        match self {
            Literal::Pos(p) | Literal::Neg(p) => p.args.iter().collect(),
            Literal::Eq(a, b) | Literal::Neq(a, b) => vec![a, b],
        }
    }

    fn to_formula(&self) -> Formula {
        match self {
            Literal::Pos(p) => Formula::atom(p.clone()),
            Literal::Neg(p) => Formula::not(Formula::atom(p.clone())),
            Literal::Eq(a, b) => Formula::eq(a.clone(), b.clone()),
            Literal::Neq(a, b) => Formula::not(Formula::eq(a.clone(), b.clone())),
        }
    }
}

/// One disjunct `∃ȳ ⋀ literals` of the negated query, free variables still
/// symbolic.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConjunctTemplate {
    pub free: Vec<Sym>,
    pub exists: Vec<Sym>,
    pub literals: Vec<Literal>,
    /// Constants of the query, including any the normal form dropped.
    pub consts: BTreeSet<Value>,
}

impl ConjunctTemplate {
    pub fn to_formula(&self) -> Formula {
        let body = Formula::And(self.literals.iter().map(Literal::to_formula).collect());
        if self.exists.is_empty() {
            body
        } else {
            Formula::Exists(self.exists.clone(), Box::new(body))
        }
    }
}

/// `∃ȳ ⋀ R_i(x̄_i) ∧ ⋀ ¬Q_i(w̄_i) ∧ ⋀ v_i ≠ v'_i` with no free variables and
/// no positive equalities.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExistentialConjunct {
    pub vars: Vec<Sym>,
    pub pos: Vec<PAtom>,
    pub neg: Vec<PAtom>,
    pub neq: Vec<(Term, Term)>,
    /// Constants the quantifiers range over besides those in the literals.
    pub extra: BTreeSet<Value>,
}

impl ExistentialConjunct {
    pub fn consts(&self) -> BTreeSet<Value> {
        let mut out = self.extra.clone();
        let atoms = self.pos.iter().chain(&self.neg).flat_map(|p| p.args.iter());
        let sides = self.neq.iter().flat_map(|(a, b)| [a, b]);
        for t in atoms.chain(sides) {
            if let Term::Val(v) = t {
                out.insert(v.clone());
            }
        }
        out
    }

    /// Number of minimal instances a witness union needs: k + Σ|w̄_i| + 2m.
    pub fn s(&self) -> usize {
        self.pos.len() + self.neg.iter().map(|p| p.args.len()).sum::<usize>() + 2 * self.neq.len()
    }

    pub fn to_formula(&self) -> Formula {
        let mut lits: Vec<Formula> = self.pos.iter().cloned().map(Formula::atom).collect();
        lits.extend(self.neg.iter().cloned().map(|p| Formula::not(Formula::atom(p))));
        lits.extend(self.neq.iter().map(|(a, b)| Formula::not(Formula::eq(a.clone(), b.clone()))));
        let body = Formula::And(lits);
        if self.vars.is_empty() {
            body
        } else {
            Formula::Exists(self.vars.clone(), Box::new(body))
        }
    }
}

impl fmt::Display for ExistentialConjunct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_formula())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Specialized {
    Conjunct(ExistentialConjunct),
    Unsatisfiable,
}

const DNF_CAP: usize = 100_000;

struct Prenex {
    used: BTreeSet<Sym>,
    renames: Vec<(Sym, Sym)>,
    exvars: Vec<Sym>,
}

impl Prenex {
    fn term(&self, t: &Term) -> Term {
        match t {
            Term::Var(x) => match self.renames.iter().rev().find(|(from, _)| from == x) {
                Some((_, to)) => Term::Var(to.clone()),
                None => t.clone(),
            },
            Term::Val(_) => t.clone(),
        }
    }

    fn patom(&self, p: &PAtom) -> PAtom {
        PAtom { rel: p.rel.clone(), args: p.args.iter().map(|t| self.term(t)).collect() }
    }

    fn bind(&mut self, v: &Sym) {
        let mut name = v.clone();
        let mut k = 1;
        while self.used.contains(&name) {
            name = crate::model::sym(&format!("{v}'{k}"));
            k += 1;
        }
        self.used.insert(name.clone());
        self.exvars.push(name.clone());
        self.renames.push((v.clone(), name));
    }

    /// DNF of an existential NNF formula, quantifiers pulled to the front.
    fn dnf(&mut self, f: &Formula) -> Result<Vec<Vec<Literal>>> {
        Ok(match f {
            Formula::Atom(p) => vec![vec![Literal::Pos(self.patom(p))]],
            Formula::Eq(a, b) => vec![vec![Literal::Eq(self.term(a), self.term(b))]],
            Formula::Not(g) => match &**g {
                Formula::Atom(p) => vec![vec![Literal::Neg(self.patom(p))]],
                Formula::Eq(a, b) => vec![vec![Literal::Neq(self.term(a), self.term(b))]],
                _ => return Err(Error::NotUniversal),
            },
            Formula::And(gs) => {
                let mut acc: Vec<Vec<Literal>> = vec![vec![]];
                for g in gs {
                    let part = self.dnf(g)?;
                    if acc.len().saturating_mul(part.len()) > DNF_CAP {
                        return Err(Error::BudgetExceeded(format!("normal form exceeds {DNF_CAP} disjuncts")));
                    }
                    acc = acc
                        .iter()
                        .flat_map(|l| part.iter().map(move |r| l.iter().chain(r).cloned().collect()))
                        .collect();
                }
                acc
            }
            Formula::Or(gs) => {
                let mut acc = Vec::new();
                for g in gs {
                    acc.extend(self.dnf(g)?);
                }
                acc
            }
            Formula::Exists(vs, g) => {
                let n = self.renames.len();
                for v in vs {
                    self.bind(v);
                }
                let out = self.dnf(g);
                self.renames.truncate(n);
                out?
            }
            Formula::Forall(..) | Formula::Implies(..) | Formula::Count { .. } => return Err(Error::NotUniversal),
        })
    }
}

/// Drops trivially true literals; None if the conjunction is trivially false.
fn simplify(lits: Vec<Literal>) -> Option<Vec<Literal>> {
    let set: BTreeSet<Literal> = lits.into_iter().collect();
    let mut out = Vec::new();
    for l in &set {
        match l {
            Literal::Eq(a, b) if a == b => continue,
            Literal::Eq(Term::Val(a), Term::Val(b)) if a != b => return None,
            Literal::Neq(a, b) if a == b => return None,
            Literal::Neq(Term::Val(a), Term::Val(b)) if a != b => continue,
            Literal::Neg(p) if set.contains(&Literal::Pos(p.clone())) => return None,
            _ => out.push(l.clone()),
        }
    }
    Some(out)
}

/// ¬q as a disjunction of existential conjuncts.
pub fn normalize_negation(q: &FOQuery) -> Result<Vec<ConjunctTemplate>> {
    if !q.is_universal() {
        return Err(Error::NotUniversal);
    }
    let neg = Formula::not(q.body.clone()).nnf();
    let mut used: BTreeSet<Sym> = q.free.iter().cloned().collect();
    used.extend(q.body.free_vars());
    let mut p = Prenex { used, renames: Vec::new(), exvars: Vec::new() };
    let disjuncts = p.dnf(&neg)?;
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for d in disjuncts {
        let Some(lits) = simplify(d) else { continue };
        if !seen.insert(lits.clone()) {
            continue;
        }
        let occurring: BTreeSet<&Sym> = lits.iter().flat_map(|l| l.terms()).filter_map(Term::as_var).collect();
        let mut exists: Vec<Sym> = p.exvars.iter().filter(|v| occurring.contains(v)).cloned().collect();
        // an existential over an empty domain is false, so one unused variable stays
        if exists.is_empty() {
            exists.extend(p.exvars.first().cloned());
        }
        out.push(ConjunctTemplate { free: q.free.clone(), exists, literals: lits, consts: q.dom() });
    }
    Ok(out)
}

/// Substitutes `t̄` for the free variables and resolves positive equalities.
pub fn specialize(d: &ConjunctTemplate, t: &[Value]) -> Specialized {
    assert_eq!(d.free.len(), t.len(), "tuple width must match the free variables");
    let sub: BTreeMap<&Sym, &Value> = d.free.iter().zip(t).collect();
    let ground = |x: &Term| match x {
        Term::Var(v) => sub.get(v).map_or_else(|| x.clone(), |c| Term::Val((*c).clone())),
        Term::Val(_) => x.clone(),
    };
    // equivalence classes of terms under the positive equalities
    let mut classes: Vec<BTreeSet<Term>> = Vec::new();
    for l in &d.literals {
        if let Literal::Eq(a, b) = l {
            let (a, b) = (ground(a), ground(b));
            let ia = classes.iter().position(|c| c.contains(&a));
            let ib = classes.iter().position(|c| c.contains(&b));
            match (ia, ib) {
                (Some(i), Some(j)) if i == j => {}
                (Some(i), Some(j)) => {
                    let moved = classes.remove(i.max(j));
                    classes[i.min(j)].extend(moved);
                }
                (Some(i), None) => {
                    classes[i].insert(b);
                }
                (None, Some(j)) => {
                    classes[j].insert(a);
                }
                (None, None) => classes.push([a, b].into_iter().collect()),
            }
        }
    }
    let mut rep: BTreeMap<Term, Term> = BTreeMap::new();
    for c in &classes {
        let consts: Vec<&Term> = c.iter().filter(|t| matches!(t, Term::Val(_))).collect();
        if consts.len() > 1 {
            return Specialized::Unsatisfiable;
        }
        let r = match consts.first() {
            Some(&k) => k.clone(),
            None => {
                let pos = |t: &Term| d.exists.iter().position(|v| Some(v) == t.as_var()).unwrap_or(usize::MAX);
                c.iter().min_by_key(|t| pos(t)).cloned().expect("class is nonempty")
            }
        };
        for t in c {
            rep.insert(t.clone(), r.clone());
        }
    }
    let full = |x: &Term| {
        let g = ground(x);
        rep.get(&g).cloned().unwrap_or(g)
    };
    let fa = |p: &PAtom| PAtom { rel: p.rel.clone(), args: p.args.iter().map(full).collect() };
    let mut lits = Vec::new();
    for l in &d.literals {
        match l {
            Literal::Eq(..) => {}
            Literal::Pos(p) => lits.push(Literal::Pos(fa(p))),
            Literal::Neg(p) => lits.push(Literal::Neg(fa(p))),
            Literal::Neq(a, b) => lits.push(Literal::Neq(full(a), full(b))),
        }
    }
    let Some(lits) = simplify(lits) else { return Specialized::Unsatisfiable };
    let occurring: BTreeSet<&Sym> = lits.iter().flat_map(|l| l.terms()).filter_map(Term::as_var).collect();
    let mut vars: Vec<Sym> = d.exists.iter().filter(|v| occurring.contains(v)).cloned().collect();
    // an existential over an empty domain is false, so one unused variable stays
    if vars.is_empty() {
        vars.extend(d.exists.first().cloned());
    }
    let mut c = ExistentialConjunct {
        vars,
        pos: Vec::new(),
        neg: Vec::new(),
        neq: Vec::new(),
        extra: d.consts.iter().chain(t).cloned().collect(),
    };
    for l in lits {
        match l {
            Literal::Pos(p) => c.pos.push(p),
            Literal::Neg(p) => c.neg.push(p),
            Literal::Neq(a, b) => c.neq.push((a, b)),
            Literal::Eq(..) => unreachable!("equalities were resolved"),
        }
    }
    Specialized::Conjunct(c)
}

/// A witness instance for one positive literal with the literal's variables
/// assigned into it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CandidatePair {
    pub inst: Instance,
    pub alpha: Binding,
}

/// A partition of the assigned values D.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EquivRelation {
    pub classes: Vec<BTreeSet<Value>>,
}

impl EquivRelation {
    pub fn related(&self, a: &Value, b: &Value) -> bool {
        a == b || self.classes.iter().any(|c| c.contains(a) && c.contains(b))
    }
}

/// The smallest equivalence on the assigned values that identifies the
/// images of shared variables, or None when it merges a constant with
/// anything else or two distinct values of one assignment.
pub fn compatible_and_relation(pairs: &[CandidatePair]) -> Option<EquivRelation> {
    let mut d: Vec<Value> = Vec::new();
    for p in pairs {
        for v in p.alpha.values() {
            if !d.contains(v) {
                d.push(v.clone());
            }
        }
    }
    let mut parent: Vec<usize> = (0..d.len()).collect();
    fn root(parent: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while parent[r] != r {
            r = parent[r];
        }
        parent[x] = r;
        r
    }
    let at = |v: &Value| d.iter().position(|w| w == v).expect("value in D");
    for (i, p) in pairs.iter().enumerate() {
        for q in &pairs[i + 1..] {
            for (x, u) in &p.alpha {
                if let Some(w) = q.alpha.get(x) {
                    let (a, b) = (root(&mut parent, at(u)), root(&mut parent, at(w)));
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                    }
                }
            }
        }
    }
    let mut by_root: BTreeMap<usize, BTreeSet<Value>> = BTreeMap::new();
    for k in 0..d.len() {
        let r = root(&mut parent, k);
        by_root.entry(r).or_default().insert(d[k].clone());
    }
    let classes: Vec<BTreeSet<Value>> = by_root.into_values().collect();
    if classes.iter().any(|c| c.len() > 1 && c.iter().any(Value::is_const)) {
        return None;
    }
    let rel = EquivRelation { classes };
    for p in pairs {
        let vals: Vec<&Value> = p.alpha.values().collect();
        for i in 0..vals.len() {
            for j in i + 1..vals.len() {
                if vals[i] != vals[j] && rel.related(vals[i], vals[j]) {
                    return None;
                }
            }
        }
    }
    Some(rel)
}

/// Glues compatible pairs: each assigned value is replaced by the first
/// value of its class in order of first appearance.
pub fn join_pairs(pairs: &[CandidatePair], rel: &EquivRelation) -> (Instance, Binding) {
    let mut order: Vec<Value> = Vec::new();
    for p in pairs {
        for v in p.alpha.values() {
            if !order.contains(v) {
                order.push(v.clone());
            }
        }
    }
    let hat = |u: &Value| -> Value {
        let class = rel.classes.iter().find(|c| c.contains(u));
        match class {
            Some(c) => order.iter().find(|w| c.contains(w)).cloned().unwrap_or_else(|| u.clone()),
            None => u.clone(),
        }
    };
    let mut joined = Instance::new();
    let mut alpha = Binding::new();
    for p in pairs {
        let image: BTreeSet<&Value> = p.alpha.values().collect();
        let r = |u: &Value| if image.contains(u) { hat(u) } else { u.clone() };
        for a in &p.inst {
            joined.insert(a.map(r));
        }
        for (x, u) in &p.alpha {
            alpha.insert(x.clone(), r(u));
        }
    }
    (joined, alpha)
}

/// Does `inst` satisfy the conjunct, nulls read as distinct constants and
/// quantifiers ranging over dom(inst) ∪ constants of the conjunct.
pub fn satisfies(inst: &Instance, d: &ExistentialConjunct) -> bool {
    let mut dom = inst.dom();
    dom.extend(d.consts());
    let dom: Vec<Value> = dom.into_iter().collect();
    let check = |b: &Binding| -> bool {
        let val = |t: &Term| match t {
            Term::Var(v) => b[v].clone(),
            Term::Val(x) => x.clone(),
        };
        d.neg.iter().all(|p| !inst.contains(&Atom { rel: p.rel.clone(), args: p.args.iter().map(val).collect() }))
            && d.neq.iter().all(|(x, y)| val(x) != val(y))
    };
    match_patterns(&d.pos, inst, &Binding::new(), &mut |b| {
        let rest: Vec<&Sym> = d.vars.iter().filter(|v| !b.contains_key(*v)).collect();
        if rest.is_empty() {
            return check(b);
        }
        if dom.is_empty() {
            return false;
        }
        let mut idx = vec![0usize; rest.len()];
        let mut full = b.clone();
        loop {
            for (v, &k) in rest.iter().zip(&idx) {
                full.insert((*v).clone(), dom[k].clone());
            }
            if check(&full) {
                return true;
            }
            if !advance(&mut idx, dom.len()) {
                return false;
            }
        }
    })
}

/// Leaves of the candidate product CoreEval may visit before giving up.
pub const JOIN_CAP: u64 = 20_000_000;

/// CoreEval over a fixed core, caching block representatives per constant set.
pub struct CoreEvaluator<'a> {
    t: &'a Instance,
    blocks: Vec<Instance>,
    stride: u32,
    limit: usize,
    reps: RefCell<BTreeMap<BTreeSet<Value>, Rc<Vec<Instance>>>>,
}

impl<'a> CoreEvaluator<'a> {
    /// Checks that `t` is a core whose blocks are packed with at most
    /// `limit` nulls each.
    pub fn new(t: &'a Instance, limit: usize) -> Result<CoreEvaluator<'a>> {
        let part = atom_blocks(t);
        if !part.blocks.iter().all(crate::corelib::block_is_packed) {
            return Err(Error::PreconditionViolated(Precondition::NotPacked));
        }
        if part.max_nulls() > limit {
            return Err(Error::BlockTooLarge { nulls: part.max_nulls(), limit });
        }
        if !is_core(t) {
            return Err(Error::PreconditionViolated(Precondition::NotCore));
        }
        Ok(CoreEvaluator {
            t,
            blocks: part.blocks,
            stride: t.max_null_id().unwrap_or(0) + 1,
            limit,
            reps: RefCell::new(BTreeMap::new()),
        })
    }

    fn reps(&self, c: &BTreeSet<Value>) -> Result<Rc<Vec<Instance>>> {
        if let Some(r) = self.reps.borrow().get(c) {
            return Ok(r.clone());
        }
        let mut all = BTreeSet::new();
        for b in &self.blocks {
            all.extend(enum_min_C_block(self.t, b, c, self.limit)?.reps);
        }
        let r = Rc::new(all.into_iter().collect::<Vec<_>>());
        self.reps.borrow_mut().insert(c.clone(), r.clone());
        Ok(r)
    }

    /// ρ_i: shifts null ids into the i-th disjoint range.
    fn rho(&self, i: usize, inst: &Instance) -> Instance {
        let shift = self.stride * i as u32;
        inst.iter()
            .map(|a| {
                a.map(|v| match v {
                    Value::Null(n) => Value::Null(shift + n),
                    c => c.clone(),
                })
            })
            .collect()
    }

    fn copies(&self, from: usize, to: usize) -> Instance {
        let mut out = Instance::new();
        for i in from..=to {
            out.extend(&self.rho(i, self.t));
        }
        out
    }

    /// Is there a nonempty finite set of minimal instances of poss(T) whose
    /// union satisfies `d`?
    pub fn eval(&self, d: &ExistentialConjunct) -> Result<bool> {
        let k = d.pos.len();
        let s = d.s().max(1);
        if k == 0 {
            return Ok(satisfies(&self.copies(1, s), d));
        }
        let reps = self.reps(&d.consts())?;
        let mut xs: Vec<Vec<CandidatePair>> = Vec::with_capacity(k);
        for (i, lit) in d.pos.iter().enumerate() {
            let mut cands = Vec::new();
            for r in reps.iter() {
                let t0 = self.rho(i + 1, r);
                match_patterns(std::slice::from_ref(lit), &t0, &Binding::new(), &mut |b| {
                    cands.push(CandidatePair { inst: t0.clone(), alpha: b.clone() });
                    false
                });
            }
            if cands.is_empty() {
                return Ok(false);
            }
            xs.push(cands);
        }
        let tail = self.copies(k + 1, s);
        let mut chosen: Vec<CandidatePair> = Vec::with_capacity(k);
        let mut leaves = 0u64;
        self.search(&xs, &tail, d, &mut chosen, &mut leaves)
    }

    fn search(
        &self,
        xs: &[Vec<CandidatePair>],
        tail: &Instance,
        d: &ExistentialConjunct,
        chosen: &mut Vec<CandidatePair>,
        leaves: &mut u64,
    ) -> Result<bool> {
        let level = chosen.len();
        if level == xs.len() {
            *leaves += 1;
            if *leaves > JOIN_CAP {
                return Err(Error::BudgetExceeded(format!("more than {JOIN_CAP} candidate joins")));
            }
            let rel = compatible_and_relation(chosen).expect("checked incrementally");
            let (joined, _) = join_pairs(chosen, &rel);
            return Ok(satisfies(&joined.union(tail), d));
        }
        for cand in &xs[level] {
            chosen.push(cand.clone());
            // compatibility only gets harder as pairs are added
            let ok = compatible_and_relation(chosen).is_some();
            let found = ok && self.search(xs, tail, d, chosen, leaves)?;
            chosen.pop();
            if found {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// Whether `t̄` is a GCWA*-answer, given the normalized negation of `q`.
    pub fn eval_tuple(&self, q: &FOQuery, templates: &[ConjunctTemplate], t: &[Value]) -> Result<bool> {
        let mut allowed = self.t.consts();
        allowed.extend(q.dom());
        if !t.iter().all(|v| allowed.contains(v)) {
            return Ok(false);
        }
        for d in templates {
            if let Specialized::Conjunct(c) = specialize(d, t) {
                if self.eval(&c)? {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

/// CoreEval on `t` with the default block limit.
pub fn core_eval(t: &Instance, d: &ExistentialConjunct) -> Result<bool> {
    CoreEvaluator::new(t, BLOCK_CAP)?.eval(d)
}

/// Is `t̄` a GCWA*-answer to the universal query `q`, given T = Core(M,S)?
pub fn eval_gcwa_star_universal(t: &Instance, q: &FOQuery, tuple: &[Value]) -> Result<bool> {
    let templates = normalize_negation(q)?;
    CoreEvaluator::new(t, BLOCK_CAP)?.eval_tuple(q, &templates, tuple)
}

fn candidate_tuples(base: &BTreeSet<Value>, width: usize, visit: &mut dyn FnMut(&Tuple) -> Result<()>) -> Result<()> {
    let base: Vec<Value> = base.iter().cloned().collect();
    if width > 0 && base.is_empty() {
        return Ok(());
    }
    let mut idx = vec![0usize; width];
    loop {
        let tuple: Tuple = idx.iter().map(|&k| base[k].clone()).collect();
        visit(&tuple)?;
        if !advance(&mut idx, base.len()) {
            return Ok(());
        }
    }
}

/// All GCWA*-answers to the universal query `q`, given T = Core(M,S).
pub fn answers_gcwa_star_universal(t: &Instance, q: &FOQuery) -> Result<TupleSet> {
    answers_gcwa_star_universal_with(t, q, BLOCK_CAP)
}

/// As [`answers_gcwa_star_universal`] with an explicit block null limit.
pub fn answers_gcwa_star_universal_with(t: &Instance, q: &FOQuery, limit: usize) -> Result<TupleSet> {
    let templates = normalize_negation(q)?;
    let ev = CoreEvaluator::new(t, limit)?;
    let mut base = t.consts();
    base.extend(q.dom());
    let mut out = TupleSet::new();
    candidate_tuples(&base, q.arity(), &mut |tuple| {
        if ev.eval_tuple(q, &templates, tuple)? {
            out.insert(tuple.clone());
        }
        Ok(())
    })?;
    Ok(out)
}

/// Answers of a query preserved under homomorphisms on a universal
/// solution, restricted to constant tuples.
pub fn answers_owa_homclosed(t: &Instance, q: &FOQuery) -> Result<TupleSet> {
    if !q.is_ucq() {
        return Err(Error::NotHomomorphismClosed);
    }
    Ok(query_answers(q, t).into_iter().filter(|u| u.iter().all(Value::is_const)).collect())
}

/// Valuations of the core the general evaluator may try.
pub const VALUATION_CAP: u64 = 5_000_000;

/// The exponential evaluator for st-tgd mappings without the packedness
/// requirement. For each disjunct it guesses the witness assignment over
/// const(Core) ∪ dom(q̃) plus fresh constants, and checks that each
/// positive atom and each used value is covered by a minimal solution
/// avoiding all negative atoms.
pub struct GeneralEvaluator {
    known: BTreeSet<Value>,
    fresh: Vec<Value>,
    core_consts: BTreeSet<Value>,
    minimal: Vec<Instance>,
}

impl GeneralEvaluator {
    pub fn new(m: &SchemaMapping, s: &Instance, q: &FOQuery, templates: &[ConjunctTemplate]) -> Result<GeneralEvaluator> {
        if !m.is_st_tgd_only() {
            return Err(Error::PreconditionViolated(Precondition::NotStTgdMapping));
        }
        let core = core_solution(m, s)?;
        let mut known = core.consts();
        known.extend(q.dom());
        let width = templates.iter().map(|d| d.exists.len()).max().unwrap_or(0);
        let fresh = fresh_constants(width, &known);
        let nulls: Vec<Value> = core.nulls().into_iter().collect();
        let mut avoid = known.clone();
        avoid.extend(fresh.iter().cloned());
        let anon = fresh_constants(nulls.len(), &avoid);
        let base: Vec<Value> = avoid.into_iter().collect();
        let count = ((base.len() + nulls.len()) as u64).checked_pow(nulls.len() as u32).unwrap_or(u64::MAX);
        if count > VALUATION_CAP {
            return Err(Error::BudgetExceeded(format!("about {count} valuations of the core")));
        }
        let mut minimal = BTreeSet::new();
        for_each_valuation(&nulls, &base, &anon, &mut |v| {
            let i = core.rename(v);
            if !minimal.contains(&i) && i.iter().all(|a| !is_solution(m, s, &i.without(a))) {
                minimal.insert(i);
            }
            false
        });
        Ok(GeneralEvaluator { known, fresh, core_consts: core.consts(), minimal: minimal.into_iter().collect() })
    }

    /// Minimal solutions found, up to renaming of constants outside
    /// const(Core) ∪ dom(q) and the evaluator's fresh constants.
    pub fn minimal_solutions(&self) -> &[Instance] {
        &self.minimal
    }

    fn satisfiable(&self, d: &ExistentialConjunct) -> bool {
        let consts = d.consts();
        let base: Vec<Value> = self.known.iter().cloned().collect();
        let fresh = &self.fresh[..d.vars.len().min(self.fresh.len())];
        let vars: Vec<Value> = (0..d.vars.len()).map(|k| Value::Null(k as u32 + 1)).collect();
        for_each_valuation(&vars, &base, fresh, &mut |v| {
            let alpha: Binding = d.vars.iter().cloned().zip(vars.iter().map(|x| v[x].clone())).collect();
            let val = |t: &Term| match t {
                Term::Var(x) => alpha[x].clone(),
                Term::Val(c) => c.clone(),
            };
            if d.neq.iter().any(|(a, b)| val(a) == val(b)) {
                return false;
            }
            let ground = |p: &PAtom| Atom { rel: p.rel.clone(), args: p.args.iter().map(val).collect() };
            let pos: Vec<Atom> = d.pos.iter().map(ground).collect();
            let neg: Vec<Atom> = d.neg.iter().map(ground).collect();
            let witnesses: Vec<&Instance> = self.minimal.iter().filter(|i| neg.iter().all(|a| !i.contains(a))).collect();
            if witnesses.is_empty() {
                return false;
            }
            pos.iter().all(|a| witnesses.iter().any(|i| i.contains(a)))
                && alpha
                    .values()
                    .filter(|u| !consts.contains(*u))
                    .all(|u| witnesses.iter().any(|i| i.iter().any(|a| a.args.contains(u))))
        })
    }

    pub fn eval_tuple(&self, q: &FOQuery, templates: &[ConjunctTemplate], t: &[Value]) -> bool {
        let mut allowed = self.core_consts.clone();
        allowed.extend(q.dom());
        if !t.iter().all(|v| allowed.contains(v)) {
            return false;
        }
        templates.iter().all(|d| match specialize(d, t) {
            Specialized::Unsatisfiable => true,
            Specialized::Conjunct(c) => !self.satisfiable(&c),
        })
    }
}

/// Is `t̄` a GCWA*-answer, decided without the packedness requirement?
pub fn eval_gcwa_star_universal_general(m: &SchemaMapping, s: &Instance, q: &FOQuery, t: &[Value]) -> Result<bool> {
    let templates = normalize_negation(q)?;
    Ok(GeneralEvaluator::new(m, s, q, &templates)?.eval_tuple(q, &templates, t))
}

pub fn answers_gcwa_star_universal_general(m: &SchemaMapping, s: &Instance, q: &FOQuery) -> Result<TupleSet> {
    let templates = normalize_negation(q)?;
    let ev = GeneralEvaluator::new(m, s, q, &templates)?;
    let mut base = ev.core_consts.clone();
    base.extend(q.dom());
    let mut out = TupleSet::new();
    candidate_tuples(&base, q.arity(), &mut |tuple| {
        if ev.eval_tuple(q, &templates, tuple) {
            out.insert(tuple.clone());
        }
        Ok(())
    })?;
    Ok(out)
}

/// Fast-path answers for a mapping: Core(M,S) must have packed blocks with
/// at most bs(M) nulls each.
pub fn answers_for_mapping(m: &SchemaMapping, s: &Instance, q: &FOQuery) -> Result<TupleSet> {
    let core = core_solution(m, s)?;
    if !blocks_packed(&core) {
        return Err(Error::PreconditionViolated(Precondition::NotPacked));
    }
    answers_gcwa_star_universal_with(&core, q, m.block_size())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corelib::tests::{blk, inst};
    use crate::logic::eval_fo;
    use crate::minrep::tests::ef_core;
    use crate::model::atom;
    use crate::textio::{parse_mapping, parse_query};

    fn q(text: &str, rels: &[(&str, usize)]) -> FOQuery {
        parse_query(text, &crate::model::Schema::new(rels)).unwrap()
    }

    fn conj(vars: &[&str], pos: &[PAtom], neg: &[PAtom], neq: &[(Term, Term)]) -> ExistentialConjunct {
        ExistentialConjunct {
            vars: vars.iter().map(|v| crate::model::sym(v)).collect(),
            pos: pos.to_vec(),
            neg: neg.to_vec(),
            neq: neq.to_vec(),
            extra: BTreeSet::new(),
        }
    }

    fn v(name: &str) -> Term {
        Term::var(name)
    }

    #[test]
    fn negation_of_reflexivity() {
        let ds = normalize_negation(&q("q() := forall z: E(z,z).", &[("E", 2)])).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds[0].literals, vec![Literal::Neg(PAtom::new("E", &["z", "z"]))]);
        assert_eq!(ds[0].exists, vec![crate::model::sym("z")]);
    }

    #[test]
    fn negation_of_clique_query() {
        let qu = q(
            "q() := forall x, y, z1, z2: C(x,y) /\\ A(x,z1) /\\ A(y,z2) -> E(z1,z2).",
            &[("C", 2), ("A", 2), ("E", 2)],
        );
        let ds = normalize_negation(&qu).unwrap();
        assert_eq!(ds.len(), 1);
        let Specialized::Conjunct(c) = specialize(&ds[0], &[]) else { panic!() };
        assert_eq!(c.pos.len(), 3);
        assert_eq!(c.neg.len(), 1);
        assert_eq!(c.s(), 3 + 2);
    }

    #[test]
    fn negation_of_copy_query() {
        let qc = q("q(x,y) := forall z: Rp(x,y) /\\ (Rp(x,z) -> z = y).", &[("Rp", 2)]);
        let ds = normalize_negation(&qc).unwrap();
        let expected = [
            vec![Literal::Neg(PAtom::new("Rp", &["x", "y"]))],
            vec![Literal::Pos(PAtom::new("Rp", &["x", "z"])), Literal::Neq(v("z"), v("y"))],
        ];
        assert_eq!(ds.len(), 2);
        for e in &expected {
            let mut e = e.clone();
            e.sort();
            assert!(ds.iter().any(|d| d.literals == e), "{e:?} missing from {ds:?}");
        }
    }

    #[test]
    fn specialization() {
        let t = ConjunctTemplate {
            free: vec!["x".into(), "y".into()],
            exists: vec![],
            literals: vec![Literal::Neg(PAtom::new("Rp", &["x", "y"]))],
            consts: BTreeSet::new(),
        };
        let Specialized::Conjunct(c) = specialize(&t, &[Value::c("a"), Value::c("b")]) else { panic!() };
        assert_eq!(c.neg, vec![PAtom::new("Rp", &["'a", "'b"])]);

        let with_eq = ConjunctTemplate {
            free: vec!["x".into(), "y".into()],
            exists: vec![],
            literals: vec![Literal::Eq(v("x"), v("y")), Literal::Neg(PAtom::new("Rp", &["x", "y"]))],
            consts: BTreeSet::new(),
        };
        let Specialized::Conjunct(c) = specialize(&with_eq, &[Value::c("a"), Value::c("a")]) else { panic!() };
        assert_eq!(c.neg, vec![PAtom::new("Rp", &["'a", "'a"])]);
        assert_eq!(specialize(&with_eq, &[Value::c("a"), Value::c("b")]), Specialized::Unsatisfiable);
    }

    #[test]
    fn equalities_between_existentials_unify() {
        let t = ConjunctTemplate {
            free: vec![],
            exists: vec!["y".into(), "z".into()],
            literals: vec![Literal::Eq(v("y"), v("z")), Literal::Pos(PAtom::new("E", &["y", "z"]))],
            consts: BTreeSet::new(),
        };
        let Specialized::Conjunct(c) = specialize(&t, &[]) else { panic!() };
        assert_eq!(c.pos, vec![PAtom::new("E", &["y", "y"])]);
        assert_eq!(c.vars, vec![crate::model::sym("y")]);
    }

    fn pair(atoms: &[Atom], alpha: &[(&str, Value)]) -> CandidatePair {
        CandidatePair { inst: inst(atoms), alpha: alpha.iter().map(|(x, u)| (crate::model::sym(x), u.clone())).collect() }
    }

    #[test]
    fn compatibility() {
        let c = Value::c("c");
        let d = Value::c("d");
        let rel = compatible_and_relation(&[pair(&[], &[("x", c.clone())]), pair(&[], &[("x", c.clone())])]).unwrap();
        assert!(rel.classes.iter().all(|k| k.len() == 1));
        assert!(compatible_and_relation(&[pair(&[], &[("x", c.clone())]), pair(&[], &[("x", d)])]).is_none());
        let (na, nb, nc) = (Value::Null(1), Value::Null(2), Value::Null(3));
        let p1 = pair(&[], &[("x", na.clone()), ("xp", nb.clone())]);
        let p2 = pair(&[], &[("x", nc.clone()), ("xp", nc.clone())]);
        assert!(compatible_and_relation(&[p1, p2]).is_none());
    }

    #[test]
    fn join_of_shared_variable() {
        let (n1, n2) = (Value::Null(1), Value::Null(2));
        let p1 = pair(&[Atom::new("E", vec![Value::c("a"), n1.clone()])], &[("x", n1.clone())]);
        let p2 = pair(&[Atom::new("F", vec![n2.clone(), Value::c("b")])], &[("x", n2.clone())]);
        let rel = compatible_and_relation(&[p1.clone(), p2.clone()]).unwrap();
        let (t, alpha) = join_pairs(&[p1.clone(), p2], &rel);
        assert_eq!(t, inst(&[atom("E", &["a", "_1"]), atom("F", &["_1", "b"])]));
        assert_eq!(alpha[&crate::model::sym("x")], n1);
        let rel1 = compatible_and_relation(std::slice::from_ref(&p1)).unwrap();
        assert_eq!(join_pairs(std::slice::from_ref(&p1), &rel1), (p1.inst.clone(), p1.alpha.clone()));
    }

    #[test]
    fn join_keeps_distinct_successors_apart() {
        // E(a,z1) ∧ E(a,z2) ∧ z1 ≠ z2 over two copies of the EF core
        let t = ef_core();
        let ev = CoreEvaluator::new(&t, 1).unwrap();
        let d = conj(&["z1", "z2"], &[PAtom::new("E", &["'a", "z1"]), PAtom::new("E", &["'a", "z2"])], &[], &[(v("z1"), v("z2"))]);
        assert!(ev.eval(&d).unwrap());
    }

    #[test]
    fn core_eval_examples() {
        let t = ef_core();
        let three = conj(
            &["z1", "z2", "z3"],
            &[PAtom::new("E", &["'a", "z1"]), PAtom::new("E", &["'a", "z2"]), PAtom::new("E", &["'a", "z3"])],
            &[],
            &[(v("z1"), v("z2")), (v("z1"), v("z3")), (v("z2"), v("z3"))],
        );
        assert!(core_eval(&t, &three).unwrap());
        let not_b = conj(&["z", "y"], &[PAtom::new("F", &["z", "y"])], &[], &[(v("y"), Term::c("b"))]);
        assert!(!core_eval(&t, &not_b).unwrap());
        let g = inst(&[atom("Rp", &["a", "b"])]);
        assert!(core_eval(&g, &conj(&[], &[PAtom::new("Rp", &["'a", "'b"])], &[], &[])).unwrap());
        assert!(matches!(core_eval(&blk(), &three), Err(Error::PreconditionViolated(Precondition::NotPacked))));
    }

    #[test]
    fn satisfies_matches_eval_fo() {
        let t = ef_core().union(&inst(&[atom("E", &["b", "b"])]));
        let cases = [
            conj(&["z"], &[PAtom::new("E", &["'a", "z"])], &[PAtom::new("E", &["z", "z"])], &[]),
            conj(&["z", "w"], &[], &[PAtom::new("E", &["z", "w"])], &[(v("z"), v("w"))]),
            conj(&["z"], &[PAtom::new("E", &["z", "z"])], &[], &[(v("z"), Term::c("b"))]),
            conj(&[], &[], &[], &[]),
        ];
        for d in &cases {
            assert_eq!(satisfies(&t, d), eval_fo(&d.to_formula(), &t, &Binding::new()).unwrap(), "{d}");
        }
    }

    fn copy() -> (SchemaMapping, Instance, FOQuery) {
        let m = parse_mapping("source R/2. target Rp/2. tgd R(x,y) -> Rp(x,y).").unwrap();
        let s = inst(&[atom("R", &["a", "b"])]);
        (m, s, q("q(x,y) := forall z: Rp(x,y) /\\ (Rp(x,z) -> z = y).", &[("Rp", 2)]))
    }

    #[test]
    fn copy_example() {
        let (m, s, qc) = copy();
        let core = core_solution(&m, &s).unwrap();
        let (a, b) = (Value::c("a"), Value::c("b"));
        assert!(eval_gcwa_star_universal(&core, &qc, &[a.clone(), b.clone()]).unwrap());
        assert!(!eval_gcwa_star_universal(&core, &qc, &[b.clone(), a.clone()]).unwrap());
        let expected: TupleSet = [vec![a.clone(), b.clone()]].into_iter().collect();
        assert_eq!(answers_gcwa_star_universal(&core, &qc).unwrap(), expected);
        assert!(eval_gcwa_star_universal_general(&m, &s, &qc, &[a, b]).unwrap());
        assert_eq!(answers_gcwa_star_universal_general(&m, &s, &qc).unwrap(), expected);
    }

    fn ef() -> (SchemaMapping, Instance) {
        let m = parse_mapping("source R/2. target E/2, F/2. tgd R(x,y) -> exists z: E(x,z), F(z,y).").unwrap();
        (m, inst(&[atom("R", &["a", "b"])]))
    }

    #[test]
    fn ef_boolean_queries() {
        let (m, s) = ef();
        let rels = [("E", 2), ("F", 2)];
        let q3 = q("q() := forall z, y: F(z,y) -> y = b.", &rels);
        let q2 = q(
            "q() := forall z1, z2, z3: E(a,z1) /\\ E(a,z2) /\\ E(a,z3) -> z1 = z2 \\/ z1 = z3 \\/ z2 = z3.",
            &rels,
        );
        let core = core_solution(&m, &s).unwrap();
        let yes: TupleSet = [vec![]].into_iter().collect();
        assert_eq!(answers_gcwa_star_universal(&core, &q3).unwrap(), yes);
        assert_eq!(answers_gcwa_star_universal_general(&m, &s, &q3).unwrap(), yes);
        assert_eq!(answers_gcwa_star_universal(&core, &q2).unwrap(), TupleSet::new());
        assert_eq!(answers_gcwa_star_universal_general(&m, &s, &q2).unwrap(), TupleSet::new());
        let taut = q("q() := forall z: z = z.", &rels);
        assert_eq!(answers_gcwa_star_universal(&core, &taut).unwrap(), yes);
    }

    #[test]
    fn monotone_fast_path() {
        let core = ef_core();
        let rels = [("E", 2), ("F", 2), ("Rp", 2)];
        let a: TupleSet = [vec![Value::c("a")]].into_iter().collect();
        assert_eq!(answers_owa_homclosed(&core, &q("q(x) := exists z: E(x,z).", &rels)).unwrap(), a);
        let loopy = inst(&[atom("E", &["a", "_1"])]);
        assert!(answers_owa_homclosed(&loopy, &q("q(x) := E(x,x).", &rels)).unwrap().is_empty());
        let copy_core = inst(&[atom("Rp", &["a", "b"])]);
        let ab: TupleSet = [vec![Value::c("a"), Value::c("b")]].into_iter().collect();
        assert_eq!(answers_owa_homclosed(&copy_core, &q("q(x,y) := Rp(x,y).", &rels)).unwrap(), ab);
        assert!(matches!(
            answers_owa_homclosed(&core, &q("q(x) := ~E(x,x).", &rels)),
            Err(Error::NotHomomorphismClosed)
        ));
    }

    #[test]
    fn general_evaluator_accepts_non_packed_mappings() {
        let m = parse_mapping("source R/2. target E/2. tgd R(x,y) -> exists z, w: E(z,x), E(z,w), E(w,y).").unwrap();
        let s = inst(&[atom("R", &["a", "b"])]);
        let qq = q("q(x) := forall z: E(x,z) -> z = x.", &[("E", 2)]);
        assert!(!m.is_packed());
        assert!(matches!(answers_for_mapping(&m, &s, &qq), Err(Error::PreconditionViolated(Precondition::NotPacked))));
        assert_eq!(answers_gcwa_star_universal_general(&m, &s, &qq).unwrap(), TupleSet::new());
    }
}
