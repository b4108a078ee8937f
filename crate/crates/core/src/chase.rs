//! Canonical universal solutions and solution checking.

use crate::error::{Error, Result};
use crate::logic::{eval_fo, eval_with_domain, Formula};
use crate::model::{match_patterns, Binding, Egd, Instance, NullGen, PAtom, SchemaMapping, StTgd, Term, Value};

/// One firing of an st-tgd: the tgd's index and a binding of its body
/// variables into the source.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Trigger {
    pub tgd: usize,
    pub binding: Binding,
}

/// All triggers, by tgd in file order, then by binding in canonical value
/// order of the body variables.
pub fn triggers(m: &SchemaMapping, s: &Instance) -> Vec<Trigger> {
    let mut out = Vec::new();
    for (k, t) in m.st_tgds.iter().enumerate() {
        let vars = t.universal_vars();
        let mut found: Vec<Vec<_>> = Vec::new();
        match_patterns(&t.body, s, &Binding::new(), &mut |b| {
            found.push(vars.iter().map(|v| b[v].clone()).collect());
            false
        });
        found.sort();
        found.dedup();
        out.extend(found.into_iter().map(|vals| Trigger { tgd: k, binding: vars.iter().cloned().zip(vals).collect() }));
    }
    out
}

/// CanSol(M,S): one head instantiation with fresh nulls per trigger.
/// Egds and constraints are ignored.
pub fn canonical_solution(m: &SchemaMapping, s: &Instance) -> Result<Instance> {
    if let Some(n) = s.nulls().into_iter().next() {
        return Err(Error::NotGround(n));
    }
    let mut gen = NullGen::new();
    let mut out = Instance::new();
    for tr in triggers(m, s) {
        let t = &m.st_tgds[tr.tgd];
        let mut b = tr.binding;
        for z in &t.exists {
            b.insert(z.clone(), gen.fresh());
        }
        for h in &t.head {
            out.insert(h.ground(&b).expect("head variables are bound"));
        }
    }
    Ok(out)
}

fn tgd_holds(t: &StTgd, s: &Instance, target: &Instance) -> bool {
    let violated = match_patterns(&t.body, s, &Binding::new(), &mut |b| {
        !match_patterns(&t.head, target, b, &mut |_| true)
    });
    !violated
}

fn egd_holds(e: &Egd, target: &Instance) -> bool {
    !match_patterns(&e.body, target, &Binding::new(), &mut |b| b[&e.left] != b[&e.right])
}

/// S ∪ T satisfies every st-tgd, egd and constraint of `m`.
pub fn is_solution(m: &SchemaMapping, s: &Instance, t: &Instance) -> bool {
    if !m.st_tgds.iter().all(|tgd| tgd_holds(tgd, s, t)) || !m.egds.iter().all(|e| egd_holds(e, t)) {
        return false;
    }
    if m.constraints.is_empty() {
        return true;
    }
    let both = s.union(t);
    m.constraints.iter().all(|c| constraint_holds(c, &both))
}

/// Conjunctive premise of `∀x̄ (A₁ ∧ … → ψ)` when every variable of x̄
/// occurs in it.
pub(crate) fn premise_atoms(c: &Formula) -> Option<(Vec<PAtom>, &Formula)> {
    let Formula::Forall(vars, inner) = c else { return None };
    let Formula::Implies(body, head) = &**inner else { return None };
    let atoms: Vec<PAtom> = match &**body {
        Formula::Atom(p) => vec![p.clone()],
        Formula::And(fs) => fs.iter().map(|f| if let Formula::Atom(p) = f { Some(p.clone()) } else { None }).collect::<Option<_>>()?,
        _ => return None,
    };
    vars.iter().all(|v| atoms.iter().any(|a| a.vars().any(|w| w == v))).then_some((atoms, &**head))
}

fn constraint_holds(c: &Formula, i: &Instance) -> bool {
    let Some((atoms, head)) = premise_atoms(c) else {
        return eval_fo(c, i, &Binding::new()).unwrap_or(false);
    };
    // only premise matches can falsify the implication
    let mut dom = i.dom();
    dom.extend(c.consts());
    let dom: Vec<Value> = dom.into_iter().collect();
    !match_patterns(&atoms, i, &Binding::new(), &mut |b| !eval_with_domain(head, i, b, dom.clone()).unwrap_or(false))
}

/// The st-tgd as a first-order sentence.
pub fn tgd_formula(t: &StTgd) -> Formula {
    let body = Formula::And(t.body.iter().cloned().map(Formula::atom).collect());
    let head = Formula::And(t.head.iter().cloned().map(Formula::atom).collect());
    let head = if t.exists.is_empty() { head } else { Formula::Exists(t.exists.clone(), Box::new(head)) };
    Formula::Forall(t.universal_vars(), Box::new(Formula::implies(body, head)))
}

/// The egd as a first-order sentence.
pub fn egd_formula(e: &Egd) -> Formula {
    let mut vars = Vec::new();
    for v in e.body.iter().flat_map(|a| a.vars()) {
        if !vars.contains(v) {
            vars.push(v.clone());
        }
    }
    let body = Formula::And(e.body.iter().cloned().map(Formula::atom).collect());
    let eq = Formula::eq(Term::Var(e.left.clone()), Term::Var(e.right.clone()));
    Formula::Forall(vars, Box::new(Formula::implies(body, eq)))
}
