//! First-order formulas, active-domain evaluation and certain answers.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::model::{Atom, Binding, Instance, PAtom, Sym, Term, Value};

#[derive(Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    Atom(PAtom),
    Eq(Term, Term),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Exists(Vec<Sym>, Box<Formula>),
    Forall(Vec<Sym>, Box<Formula>),
    /// Between `lo` and `hi` witnesses for `var`.
    Count { lo: usize, hi: usize, var: Sym, body: Box<Formula> },
}

impl Formula {
    pub fn atom(p: PAtom) -> Formula {
        Formula::Atom(p)
    }

    pub fn eq(a: Term, b: Term) -> Formula {
        Formula::Eq(a, b)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn exists(vars: &[&str], f: Formula) -> Formula {
        Formula::Exists(vars.iter().map(|v| crate::model::sym(v)).collect(), Box::new(f))
    }

    pub fn forall(vars: &[&str], f: Formula) -> Formula {
        Formula::Forall(vars.iter().map(|v| crate::model::sym(v)).collect(), Box::new(f))
    }

    /// Constants occurring in the formula.
    pub fn consts(&self) -> BTreeSet<Value> {
        let mut out = BTreeSet::new();
        self.walk_terms(&mut |t| {
            if let Term::Val(v) = t {
                out.insert(v.clone());
            }
        });
        out
    }

    fn walk_terms(&self, f: &mut dyn FnMut(&Term)) {
        match self {
            Formula::Atom(p) => p.args.iter().for_each(f),
            Formula::Eq(a, b) => {
                f(a);
                f(b)
            }
            Formula::Not(g) => g.walk_terms(f),
            Formula::And(gs) | Formula::Or(gs) => gs.iter().for_each(|g| g.walk_terms(f)),
            Formula::Implies(a, b) => {
                a.walk_terms(f);
                b.walk_terms(f)
            }
            Formula::Exists(_, g) | Formula::Forall(_, g) => g.walk_terms(f),
            Formula::Count { body, .. } => body.walk_terms(f),
        }
    }

    pub fn free_vars(&self) -> BTreeSet<Sym> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<Sym>, out: &mut BTreeSet<Sym>) {
        let mut term = |t: &Term, bound: &Vec<Sym>| {
            if let Term::Var(v) = t {
                if !bound.contains(v) {
                    out.insert(v.clone());
                }
            }
        };
        match self {
            Formula::Atom(p) => p.args.iter().for_each(|t| term(t, bound)),
            Formula::Eq(a, b) => {
                term(a, bound);
                term(b, bound)
            }
            Formula::Not(g) => g.collect_free(bound, out),
            Formula::And(gs) | Formula::Or(gs) => gs.iter().for_each(|g| g.collect_free(bound, out)),
            Formula::Implies(a, b) => {
                a.collect_free(bound, out);
                b.collect_free(bound, out)
            }
            Formula::Exists(vs, g) | Formula::Forall(vs, g) => {
                let n = bound.len();
                bound.extend(vs.iter().cloned());
                g.collect_free(bound, out);
                bound.truncate(n);
            }
            Formula::Count { var, body, .. } => {
                bound.push(var.clone());
                body.collect_free(bound, out);
                bound.pop();
            }
        }
    }

    pub fn relations(&self) -> BTreeSet<Sym> {
        let mut out = BTreeSet::new();
        self.visit(&mut |f| {
            if let Formula::Atom(p) = f {
                out.insert(p.rel.clone());
            }
        });
        out
    }

    fn visit(&self, f: &mut dyn FnMut(&Formula)) {
        f(self);
        match self {
            Formula::Atom(_) | Formula::Eq(..) => {}
            Formula::Not(g) | Formula::Exists(_, g) | Formula::Forall(_, g) => g.visit(f),
            Formula::Count { body, .. } => body.visit(f),
            Formula::And(gs) | Formula::Or(gs) => gs.iter().for_each(|g| g.visit(f)),
            Formula::Implies(a, b) => {
                a.visit(f);
                b.visit(f)
            }
        }
    }

    fn any(&self, pred: &dyn Fn(&Formula) -> bool) -> bool {
        let mut hit = false;
        self.visit(&mut |f| hit |= pred(f));
        hit
    }

    /// Negation normal form: no implications, negation only on atoms,
    /// equalities and counting subformulas.
    pub fn nnf(&self) -> Formula {
        self.nnf_pol(true)
    }

    fn nnf_pol(&self, pos: bool) -> Formula {
        match self {
            Formula::Atom(_) | Formula::Eq(..) | Formula::Count { .. } => {
                if pos {
                    self.clone()
                } else {
                    Formula::not(self.clone())
                }
            }
            Formula::Not(g) => g.nnf_pol(!pos),
            Formula::And(gs) => {
                let gs = gs.iter().map(|g| g.nnf_pol(pos)).collect();
                if pos {
                    Formula::And(gs)
                } else {
                    Formula::Or(gs)
                }
            }
            Formula::Or(gs) => {
                let gs = gs.iter().map(|g| g.nnf_pol(pos)).collect();
                if pos {
                    Formula::Or(gs)
                } else {
                    Formula::And(gs)
                }
            }
            Formula::Implies(a, b) => {
                let parts = vec![a.nnf_pol(!pos), b.nnf_pol(pos)];
                if pos {
                    Formula::Or(parts)
                } else {
                    Formula::And(parts)
                }
            }
            Formula::Exists(vs, g) => {
                let g = Box::new(g.nnf_pol(pos));
                if pos {
                    Formula::Exists(vs.clone(), g)
                } else {
                    Formula::Forall(vs.clone(), g)
                }
            }
            Formula::Forall(vs, g) => {
                let g = Box::new(g.nnf_pol(pos));
                if pos {
                    Formula::Forall(vs.clone(), g)
                } else {
                    Formula::Exists(vs.clone(), g)
                }
            }
        }
    }

    /// Occurrences of atoms and equalities.
    pub fn literal_count(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |f| n += matches!(f, Formula::Atom(_) | Formula::Eq(..)) as usize);
        n
    }

    pub fn has_count(&self) -> bool {
        self.any(&|f| matches!(f, Formula::Count { .. }))
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_formula(self, f, 0)
    }
}

impl fmt::Debug for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

// precedence levels: 0 quantifier/implication, 1 or, 2 and, 3 unary
fn write_formula(phi: &Formula, f: &mut fmt::Formatter<'_>, ctx: u8) -> fmt::Result {
    let level = match phi {
        Formula::Exists(..) | Formula::Forall(..) | Formula::Count { .. } | Formula::Implies(..) => 0,
        Formula::Or(gs) if gs.len() > 1 => 1,
        Formula::And(gs) if gs.len() > 1 => 2,
        _ => 3,
    };
    let paren = level < ctx;
    if paren {
        f.write_str("(")?;
    }
    match phi {
        Formula::Atom(p) => write!(f, "{p}")?,
        Formula::Eq(a, b) => write!(f, "{a} = {b}")?,
        Formula::Not(g) => {
            f.write_str("~")?;
            write_formula(g, f, 4)?;
        }
        Formula::And(gs) | Formula::Or(gs) if gs.len() == 1 => write_formula(&gs[0], f, ctx.max(3))?,
        Formula::And(gs) if gs.is_empty() => f.write_str("(forall t: t = t)")?,
        Formula::Or(gs) if gs.is_empty() => f.write_str("(forall t: ~(t = t))")?,
        Formula::And(gs) => {
            for (i, g) in gs.iter().enumerate() {
                if i > 0 {
                    f.write_str(" /\\ ")?;
                }
                write_formula(g, f, 3)?;
            }
        }
        Formula::Or(gs) => {
            for (i, g) in gs.iter().enumerate() {
                if i > 0 {
                    f.write_str(" \\/ ")?;
                }
                write_formula(g, f, 2)?;
            }
        }
        Formula::Implies(a, b) => {
            write_formula(a, f, 1)?;
            f.write_str(" -> ")?;
            write_formula(b, f, 0)?;
        }
        Formula::Exists(vs, g) | Formula::Forall(vs, g) => {
            let q = if matches!(phi, Formula::Exists(..)) { "exists" } else { "forall" };
            write!(f, "{q} {}: ", vs.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", "))?;
            write_formula(g, f, 0)?;
        }
        Formula::Count { lo, hi, var, body } => {
            write!(f, "exists[{lo},{hi}] {var}: ")?;
            write_formula(body, f, 0)?;
        }
    }
    if paren {
        f.write_str(")")?;
    }
    Ok(())
}

/// A query `name(x̄) := body`.
#[derive(Clone, PartialEq, Eq)]
pub struct FOQuery {
    pub name: String,
    pub free: Vec<Sym>,
    pub body: Formula,
}

impl FOQuery {
    pub fn new(name: &str, free: &[&str], body: Formula) -> FOQuery {
        FOQuery { name: name.to_string(), free: free.iter().map(|v| crate::model::sym(v)).collect(), body }
    }

    pub fn arity(&self) -> usize {
        self.free.len()
    }

    /// Constants of the query.
    pub fn dom(&self) -> BTreeSet<Value> {
        self.body.consts()
    }

    /// Prenex ∀* with a quantifier-free matrix, up to pulling universal
    /// quantifiers out of positive positions.
    pub fn is_universal(&self) -> bool {
        !self.body.has_count() && !self.body.nnf().any(&|f| matches!(f, Formula::Exists(..)))
    }

    pub fn is_existential(&self) -> bool {
        !self.body.has_count() && !self.body.nnf().any(&|f| matches!(f, Formula::Forall(..)))
    }

    /// Positive existential: no negation, no universal quantifier.
    pub fn is_ucq(&self) -> bool {
        !self.body.has_count()
            && !self.body.nnf().any(&|f| matches!(f, Formula::Not(_) | Formula::Forall(..)))
    }

    /// Existential conjunction of literals.
    pub fn is_cq_neg(&self) -> bool {
        !self.body.has_count()
            && !self.body.nnf().any(&|f| {
                matches!(f, Formula::Forall(..)) || matches!(f, Formula::Or(gs) if gs.len() > 1)
            })
    }
}

impl fmt::Display for FOQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let free: Vec<String> = self.free.iter().map(|v| v.to_string()).collect();
        write!(f, "{}({}) := {}.", self.name, free.join(","), self.body)
    }
}

impl fmt::Debug for FOQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

pub type Tuple = Vec<Value>;
pub type TupleSet = BTreeSet<Tuple>;

struct Eval<'a> {
    inst: &'a Instance,
    dom: Vec<Value>,
    env: Vec<(Sym, Value)>,
    scratch: Atom,
}

impl Eval<'_> {
    fn lookup(&self, t: &Term) -> Result<Value> {
        match t {
            Term::Val(v) => Ok(v.clone()),
            Term::Var(x) => self
                .env
                .iter()
                .rev()
                .find(|(y, _)| y == x)
                .map(|(_, v)| v.clone())
                .ok_or_else(|| Error::UnboundVariable(x.to_string())),
        }
    }

    fn holds(&mut self, phi: &Formula) -> Result<bool> {
        Ok(match phi {
            Formula::Atom(p) => {
                let mut a = std::mem::replace(&mut self.scratch, Atom { rel: p.rel.clone(), args: Vec::new() });
                a.rel = p.rel.clone();
                a.args.clear();
                for t in &p.args {
                    a.args.push(self.lookup(t)?);
                }
                let r = self.inst.contains(&a);
                self.scratch = a;
                r
            }
            Formula::Eq(a, b) => self.lookup(a)? == self.lookup(b)?,
            Formula::Not(g) => !self.holds(g)?,
            Formula::And(gs) => {
                for g in gs {
                    if !self.holds(g)? {
                        return Ok(false);
                    }
                }
                true
            }
            Formula::Or(gs) => {
                for g in gs {
                    if self.holds(g)? {
                        return Ok(true);
                    }
                }
                false
            }
            Formula::Implies(a, b) => !self.holds(a)? || self.holds(b)?,
            Formula::Exists(vs, g) => self.quantify(vs, g, true)?,
            Formula::Forall(vs, g) => !self.quantify(vs, g, false)?,
            Formula::Count { lo, hi, var, body } => {
                let mut n = 0;
                for k in 0..self.dom.len() {
                    let d = self.dom[k].clone();
                    self.env.push((var.clone(), d));
                    let r = self.holds(body);
                    self.env.pop();
                    if r? {
                        n += 1;
                        if n > *hi {
                            break;
                        }
                    }
                }
                *lo <= n && n <= *hi
            }
        })
    }

    /// Existential search for a witness of `g` (want = true) or a
    /// counterexample (want = false).
    fn quantify(&mut self, vs: &[Sym], g: &Formula, want: bool) -> Result<bool> {
        if vs.is_empty() {
            return Ok(self.holds(g)? == want);
        }
        for k in 0..self.dom.len() {
            let d = self.dom[k].clone();
            self.env.push((vs[0].clone(), d));
            let r = self.quantify(&vs[1..], g, want);
            self.env.pop();
            if r? {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

/// Naive satisfaction with nulls as pairwise distinct constants. Quantifiers
/// range over dom(I), the constants of `phi` and the values of `alpha`.
pub fn eval_fo(phi: &Formula, i: &Instance, alpha: &Binding) -> Result<bool> {
    let mut dom = i.dom();
    dom.extend(phi.consts());
    dom.extend(alpha.values().cloned());
    eval_with_domain(phi, i, alpha, dom.into_iter().collect())
}

pub(crate) fn eval_with_domain(phi: &Formula, i: &Instance, alpha: &Binding, dom: Vec<Value>) -> Result<bool> {
    let mut ev = Eval {
        inst: i,
        dom,
        env: alpha.iter().map(|(k, v)| (k.clone(), v.clone())).collect(),
        scratch: Atom { rel: crate::model::sym(""), args: Vec::new() },
    };
    ev.holds(phi)
}

/// All tuples over dom(I) ∪ dom(q) satisfying `q`. May contain nulls.
pub fn query_answers(q: &FOQuery, i: &Instance) -> TupleSet {
    let mut dom = i.dom();
    dom.extend(q.dom());
    let dom: Vec<Value> = dom.into_iter().collect();
    let mut out = TupleSet::new();
    let n = q.free.len();
    let mut idx = vec![0usize; n];
    if n > 0 && dom.is_empty() {
        return out;
    }
    loop {
        let tuple: Tuple = idx.iter().map(|&k| dom[k].clone()).collect();
        let alpha: Binding = q.free.iter().cloned().zip(tuple.iter().cloned()).collect();
        if eval_with_domain(&q.body, i, &alpha, dom.clone()).unwrap_or(false) {
            out.insert(tuple);
        }
        if !advance(&mut idx, dom.len()) {
            break;
        }
    }
    out
}

/// Odometer step over `base^idx.len()`; false when wrapped around.
pub(crate) fn advance(idx: &mut [usize], base: usize) -> bool {
    for d in idx.iter_mut().rev() {
        *d += 1;
        if *d < base {
            return true;
        }
        *d = 0;
    }
    false
}

/// Intersection of the answers over a family, restricted to constant tuples.
/// The empty family yields the empty set.
pub fn certain_answers(q: &FOQuery, ts: &[Instance]) -> TupleSet {
    let mut acc: Option<TupleSet> = None;
    for t in ts {
        let ans: TupleSet = query_answers(q, t).into_iter().filter(|u| u.iter().all(Value::is_const)).collect();
        acc = Some(match acc {
            None => ans,
            Some(prev) => prev.intersection(&ans).cloned().collect(),
        });
        if acc.as_ref().is_some_and(|a| a.is_empty()) {
            break;
        }
    }
    acc.unwrap_or_default()
}

/// Default cap on the number of nulls enumerated by valuation-based procedures.
pub const NULL_CAP: usize = 8;

/// `n` constants that do not occur in `avoid`.
pub fn fresh_constants(n: usize, avoid: &BTreeSet<Value>) -> Vec<Value> {
    let mut out = Vec::with_capacity(n);
    let mut k = 1;
    while out.len() < n {
        let v = Value::Const(crate::model::sym(&format!("#{k}")));
        if !avoid.contains(&v) {
            out.push(v);
        }
        k += 1;
    }
    out
}

/// Enumerates valuations of `nulls` into `base` ∪ `fresh`, using fresh
/// constants in order of first use only. `visit` returns true to stop.
pub fn for_each_valuation(
    nulls: &[Value],
    base: &[Value],
    fresh: &[Value],
    visit: &mut dyn FnMut(&crate::model::ValueMap) -> bool,
) -> bool {
    fn go(
        k: usize,
        used_fresh: usize,
        nulls: &[Value],
        base: &[Value],
        fresh: &[Value],
        cur: &mut crate::model::ValueMap,
        visit: &mut dyn FnMut(&crate::model::ValueMap) -> bool,
    ) -> bool {
        if k == nulls.len() {
            return visit(cur);
        }
        for b in base {
            cur.insert(nulls[k].clone(), b.clone());
            if go(k + 1, used_fresh, nulls, base, fresh, cur, visit) {
                return true;
            }
        }
        for (j, f) in fresh.iter().enumerate().take((used_fresh + 1).min(fresh.len())) {
            cur.insert(nulls[k].clone(), f.clone());
            if go(k + 1, used_fresh.max(j + 1), nulls, base, fresh, cur, visit) {
                return true;
            }
        }
        cur.remove(&nulls[k]);
        false
    }
    go(0, 0, nulls, base, fresh, &mut crate::model::ValueMap::new(), visit)
}

/// cert(q, poss(T)) with the default null cap.
pub fn cert_poss(q: &FOQuery, t: &Instance) -> Result<TupleSet> {
    cert_poss_with(q, t, 0, NULL_CAP)
}

/// cert(q, poss(T)) enumerating valuations into const(T) ∪ dom(q) plus
/// |nulls(T)| + `extra_fresh` fresh constants.
pub fn cert_poss_with(q: &FOQuery, t: &Instance, extra_fresh: usize, cap: usize) -> Result<TupleSet> {
    let nulls: Vec<Value> = t.nulls().into_iter().collect();
    if nulls.len() > cap {
        return Err(Error::BudgetExceeded(format!("{} nulls exceed the cap {cap}", nulls.len())));
    }
    let mut known = t.consts();
    known.extend(q.dom());
    let base: Vec<Value> = known.iter().cloned().collect();
    let fresh = fresh_constants(nulls.len() + extra_fresh, &known);
    let mut acc: Option<TupleSet> = None;
    for_each_valuation(&nulls, &base, &fresh, &mut |v| {
        let vt = t.rename(v);
        let ans: TupleSet = query_answers(q, &vt).into_iter().filter(|u| u.iter().all(|x| known.contains(x))).collect();
        let next = match acc.take() {
            None => ans,
            Some(prev) => prev.intersection(&ans).cloned().collect(),
        };
        let stop = next.is_empty();
        acc = Some(next);
        stop
    });
    Ok(acc.unwrap_or_default())
}
