//! Model checking on finite domains: satisfaction of formulas and least
//! fixed points of programs via saturation, with stage traces.
//!
//! Both saturation and the demand-driven engine (see `tabled`) share one
//! constraint solver, [`solve`], which enumerates the satisfying extensions
//! of a partial assignment. The solver schedules conjuncts greedily so that
//! equations propagate bindings (by evaluation in one direction, by
//! constructor inversion in the other) before anything falls back to
//! enumerating the quantification pool.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::structure::{eval_term, Assignment, Domain, ElemId};
use crate::syntax::{
    eq_ident, free_vars, program_free_vars, Formula, Ident, Program, Term,
};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("unbound free variable `{0}`")]
    UnboundVariable(Ident),
    #[error("unknown relation `{0}`")]
    UnknownRelation(Ident),
    #[error("instance too large for oracle enumeration ({0} candidates)")]
    OracleTooLarge(f64),
    #[error("domain cannot be materialized for saturation")]
    NotMaterializable,
}

pub type Rows = BTreeSet<Vec<ElemId>>;

/// Relation tables for the head symbols of one program.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Tables(pub BTreeMap<Ident, Rows>);

impl Tables {
    pub fn empty_for(p: &Program) -> Tables {
        Tables(p.rules.iter().map(|r| (r.head.clone(), Rows::new())).collect())
    }

    pub fn rows(&self, head: &Ident) -> Option<&Rows> {
        self.0.get(head)
    }

    pub fn is_subset(&self, other: &Tables) -> bool {
        self.0.iter().all(|(h, rows)| {
            other.0.get(h).map_or(rows.is_empty(), |o| rows.is_subset(o))
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    Naive,
    SemiNaive,
}

/// The stage sequence of one saturation run; the last two stages are equal
/// and `closure_stage` is the first index at which the sequence stabilizes.
#[derive(Clone, Debug)]
pub struct FixpointTrace {
    pub stages: Vec<Tables>,
    pub closure_stage: usize,
}

/// Per-stage new tuples, for `--trace-stages` and the stage-count checks.
#[derive(Clone, Debug)]
pub struct StageReport {
    pub closure_stage: usize,
    /// deltas[k] lists tuples first derived at stage k+1, sorted by head
    /// then tuple.
    pub deltas: Vec<Vec<(Ident, Vec<ElemId>)>>,
}

/// Where the solver finds interpretations for derived (head) predicates.
pub(crate) trait Resolver {
    fn domain(&self) -> &dyn Domain;

    /// Is `p` a head symbol in scope?
    fn is_derived(&self, p: &Ident) -> bool;

    /// Tuples of derived `p` matching `pattern`. `occ` identifies the atom
    /// occurrence (address of its `Formula` node) for delta-restricted
    /// semi-naive application.
    fn derived_answers(
        &mut self,
        occ: usize,
        p: &Ident,
        pattern: &[Option<ElemId>],
    ) -> Result<Vec<Vec<ElemId>>, EvalError>;

    fn enter_let(&mut self, p: &Program, bound: &Assignment) -> Result<(), EvalError>;
    fn exit_let(&mut self);

    /// Demand-driven mode: residual free variables inside compound argument
    /// terms of derived atoms are quantifier witnesses and must be grounded
    /// from the pool before the query is issued (answer tables can enumerate
    /// a plain open slot, but cannot run a lossy constructor backwards).
    fn ground_compound_args(&self) -> bool {
        false
    }
}

pub(crate) type Solutions = BTreeSet<Assignment>;

/// Enumerate all extensions of `bound` satisfying `f`.
pub(crate) fn solve(
    f: &Formula,
    bound: &Assignment,
    r: &mut dyn Resolver,
) -> Result<Solutions, EvalError> {
    match f {
        Formula::Conj(..) => {
            let mut cs = Vec::new();
            flatten_conj(f, &mut cs);
            solve_conj(&cs, bound, r)
        }
        Formula::Disj(a, b) => {
            let mut out = solve(a, bound, r)?;
            out.extend(solve(b, bound, r)?);
            Ok(out)
        }
        Formula::Exists(v, body) => {
            let outer = bound.lookup(v);
            let inner = bound.without(v);
            let sols = solve(body, &inner, r)?;
            let mut out = Solutions::new();
            for s in sols {
                let s = s.without(v);
                out.insert(match outer {
                    Some(a) => s.modify(v, a),
                    None => s,
                });
            }
            Ok(out)
        }
        Formula::Let(p, body) => {
            // the program's ambient parameters must be fixed before
            // saturation: an unbound parameter would be projected out of
            // the head tables, unsoundly unioning the fixed points taken
            // over its possible values.
            let unbound: BTreeSet<Ident> = program_free_vars(p)
                .into_iter()
                .filter(|v| !bound.in_dom(v))
                .collect();
            if unbound.is_empty() {
                r.enter_let(p, bound)?;
                let out = solve(body, bound, r);
                r.exit_let();
                return out;
            }
            let mut out = Solutions::new();
            for s in enumerate_pool(&unbound, bound, r.domain()) {
                r.enter_let(p, &s)?;
                let sols = solve(body, &s, r);
                r.exit_let();
                out.extend(sols?);
            }
            Ok(out)
        }
        Formula::Atom(p, args) if *p == eq_ident() => solve_eq(&args[0], &args[1], bound, r),
        Formula::Atom(p, args) => solve_atom(f as *const _ as usize, p, args, bound, r),
        Formula::NegAtom(p, args) => solve_neg(p, args, bound, r),
    }
}

fn flatten_conj<'f>(f: &'f Formula, out: &mut Vec<&'f Formula>) {
    match f {
        Formula::Conj(a, b) => {
            flatten_conj(a, out);
            flatten_conj(b, out);
        }
        other => out.push(other),
    }
}

fn term_closed(t: &Term, bound: &Assignment) -> bool {
    match t {
        Term::Var(v) => bound.in_dom(v),
        Term::App(_, args) => args.iter().all(|a| term_closed(a, bound)),
    }
}

fn term_free_vars(t: &Term, bound: &Assignment, out: &mut BTreeSet<Ident>) {
    match t {
        Term::Var(v) => {
            if !bound.in_dom(v) {
                out.insert(v.clone());
            }
        }
        Term::App(_, args) => {
            for a in args {
                term_free_vars(a, bound, out);
            }
        }
    }
}

/// Lower is solved earlier. Checks first, then binding propagators, then
/// enumerators, with negations last so their arguments get bound.
fn score(f: &Formula, bound: &Assignment, r: &dyn Resolver) -> u32 {
    match f {
        Formula::Atom(p, args) if *p == eq_ident() => {
            let c0 = term_closed(&args[0], bound);
            let c1 = term_closed(&args[1], bound);
            match (c0, c1) {
                (true, true) => 0,
                (true, false) | (false, true) => 1,
                (false, false) => 7,
            }
        }
        Formula::Atom(p, args) => {
            let closed = args.iter().filter(|a| term_closed(a, bound)).count();
            if closed == args.len() {
                0
            } else if closed == 0 {
                // fully open atoms are generators of last resort; prefer
                // reading a basic relation over enumerating a derived table
                if r.is_derived(p) { 6 } else { 5 }
            } else if r.is_derived(p) {
                3
            } else {
                // a partially bound basic relation enumerates directly and
                // cheaply; let it bind variables before any derived query
                // gets issued with them still open
                2
            }
        }
        Formula::NegAtom(_, args) => {
            if args.iter().all(|a| term_closed(a, bound)) {
                0
            } else {
                8
            }
        }
        Formula::Exists(..) | Formula::Disj(..) | Formula::Let(..) | Formula::Conj(..) => 4,
    }
}

fn solve_conj(
    cs: &[&Formula],
    bound: &Assignment,
    r: &mut dyn Resolver,
) -> Result<Solutions, EvalError> {
    if cs.is_empty() {
        return Ok([bound.clone()].into_iter().collect());
    }
    let best = (0..cs.len())
        .min_by_key(|i| score(cs[*i], bound, r))
        .unwrap();
    let firsts = solve(cs[best], bound, r)?;
    let rest: Vec<&Formula> = cs
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != best)
        .map(|(_, f)| *f)
        .collect();
    let mut out = Solutions::new();
    for s in firsts {
        out.extend(solve_conj(&rest, &s, r)?);
    }
    Ok(out)
}

/// Bind `t`'s free variables so that it evaluates to `val`. Inverts
/// constructors where the domain supports it; rejects the truncation
/// element outright.
fn unify(
    t: &Term,
    val: ElemId,
    bound: &Assignment,
    r: &mut dyn Resolver,
) -> Result<Solutions, EvalError> {
    let x = r.domain();
    if x.bottom() == Some(val) {
        return Ok(Solutions::new());
    }
    match t {
        Term::Var(v) => match bound.lookup(v) {
            Some(a) if a == val => Ok([bound.clone()].into_iter().collect()),
            Some(_) => Ok(Solutions::new()),
            None => Ok([bound.modify(v, val)].into_iter().collect()),
        },
        Term::App(f, args) => {
            if term_closed(t, bound) {
                let got = eval_term(t, bound, x).expect("closed term evaluates");
                return Ok(if got == val {
                    [bound.clone()].into_iter().collect()
                } else {
                    Solutions::new()
                });
            }
            match x.invert_fun(f, val) {
                Some(preimages) => {
                    let mut out = Solutions::new();
                    for pre in preimages {
                        let mut states: Solutions = [bound.clone()].into_iter().collect();
                        for (arg, v) in args.iter().zip(pre.iter()) {
                            let mut next = Solutions::new();
                            for s in &states {
                                next.extend(unify(arg, *v, s, r)?);
                            }
                            states = next;
                            if states.is_empty() {
                                break;
                            }
                        }
                        out.extend(states);
                    }
                    Ok(out)
                }
                None => {
                    // last resort: enumerate the pool for the term's free
                    // variables and evaluate forward.
                    let mut fv = BTreeSet::new();
                    term_free_vars(t, bound, &mut fv);
                    let mut out = Solutions::new();
                    for s in enumerate_pool(&fv, bound, r.domain()) {
                        let got = eval_term(t, &s, r.domain()).expect("closed term");
                        if got == val {
                            out.insert(s);
                        }
                    }
                    Ok(out)
                }
            }
        }
    }
}

/// All extensions of `bound` assigning pool elements to `vars`.
fn enumerate_pool(vars: &BTreeSet<Ident>, bound: &Assignment, x: &dyn Domain) -> Vec<Assignment> {
    let pool = x.pool();
    let mut states = vec![bound.clone()];
    for v in vars {
        let mut next = Vec::with_capacity(states.len() * pool.len());
        for s in &states {
            for a in &pool {
                next.push(s.modify(v, *a));
            }
        }
        states = next;
    }
    states
}

fn solve_eq(
    t1: &Term,
    t2: &Term,
    bound: &Assignment,
    r: &mut dyn Resolver,
) -> Result<Solutions, EvalError> {
    let c1 = term_closed(t1, bound);
    let c2 = term_closed(t2, bound);
    match (c1, c2) {
        (true, true) => {
            let v1 = eval_term(t1, bound, r.domain()).expect("closed");
            let v2 = eval_term(t2, bound, r.domain()).expect("closed");
            Ok(if r.domain().rel_holds(&eq_ident(), &[v1, v2]) {
                [bound.clone()].into_iter().collect()
            } else {
                Solutions::new()
            })
        }
        (true, false) => {
            let v = eval_term(t1, bound, r.domain()).expect("closed");
            unify(t2, v, bound, r)
        }
        (false, true) => {
            let v = eval_term(t2, bound, r.domain()).expect("closed");
            unify(t1, v, bound, r)
        }
        (false, false) => {
            // ground the side with fewer free variables, then retry.
            let mut f1 = BTreeSet::new();
            let mut f2 = BTreeSet::new();
            term_free_vars(t1, bound, &mut f1);
            term_free_vars(t2, bound, &mut f2);
            let vars = if f1.len() <= f2.len() { &f1 } else { &f2 };
            let mut out = Solutions::new();
            for s in enumerate_pool(vars, bound, r.domain()) {
                out.extend(solve_eq(t1, t2, &s, r)?);
            }
            Ok(out)
        }
    }
}

fn solve_atom(
    occ: usize,
    p: &Ident,
    args: &[Term],
    bound: &Assignment,
    r: &mut dyn Resolver,
) -> Result<Solutions, EvalError> {
    if r.is_derived(p) && r.ground_compound_args() {
        let mut fv = BTreeSet::new();
        for a in args {
            if !matches!(a, Term::Var(_)) {
                term_free_vars(a, bound, &mut fv);
            }
        }
        if !fv.is_empty() {
            let mut out = Solutions::new();
            for s in enumerate_pool(&fv, bound, r.domain()) {
                out.extend(solve_atom(occ, p, args, &s, r)?);
            }
            return Ok(out);
        }
    }
    let pattern: Vec<Option<ElemId>> = args
        .iter()
        .map(|a| {
            if term_closed(a, bound) {
                eval_term(a, bound, r.domain())
            } else {
                None
            }
        })
        .collect();
    if r.is_derived(p) {
        let answers = r.derived_answers(occ, p, &pattern)?;
        return unify_rows(args, &pattern, answers, bound, r);
    }
    if r.domain().vocab().relation(p).is_none() {
        return Err(EvalError::UnknownRelation(p.clone()));
    }
    if pattern.iter().all(|s| s.is_some()) {
        let vals: Vec<ElemId> = pattern.into_iter().map(|s| s.unwrap()).collect();
        return Ok(if r.domain().rel_holds(p, &vals) {
            [bound.clone()].into_iter().collect()
        } else {
            Solutions::new()
        });
    }
    if let Some(rows) = r.domain().rel_enumerate(p, &pattern) {
        return unify_rows(args, &pattern, rows, bound, r);
    }
    // not enumerable under this pattern: ground free variables from the pool.
    let mut fv = BTreeSet::new();
    for a in args {
        term_free_vars(a, bound, &mut fv);
    }
    let mut out = Solutions::new();
    for s in enumerate_pool(&fv, bound, r.domain()) {
        let vals: Vec<ElemId> = args
            .iter()
            .map(|a| eval_term(a, &s, r.domain()).expect("closed"))
            .collect();
        if r.domain().rel_holds(p, &vals) {
            out.insert(s);
        }
    }
    Ok(out)
}

fn unify_rows(
    args: &[Term],
    pattern: &[Option<ElemId>],
    rows: Vec<Vec<ElemId>>,
    bound: &Assignment,
    r: &mut dyn Resolver,
) -> Result<Solutions, EvalError> {
    let mut out = Solutions::new();
    'row: for row in rows {
        let mut states: Solutions = [bound.clone()].into_iter().collect();
        for ((arg, slot), v) in args.iter().zip(pattern.iter()).zip(row.iter()) {
            if let Some(p) = slot {
                if p != v {
                    continue 'row;
                }
                continue;
            }
            let mut next = Solutions::new();
            for s in &states {
                next.extend(unify(arg, *v, s, r)?);
            }
            states = next;
            if states.is_empty() {
                continue 'row;
            }
        }
        out.extend(states);
    }
    Ok(out)
}

fn solve_neg(
    p: &Ident,
    args: &[Term],
    bound: &Assignment,
    r: &mut dyn Resolver,
) -> Result<Solutions, EvalError> {
    if *p != eq_ident() && r.domain().vocab().relation(p).is_none() {
        return Err(EvalError::UnknownRelation(p.clone()));
    }
    let mut fv = BTreeSet::new();
    for a in args {
        term_free_vars(a, bound, &mut fv);
    }
    let mut out = Solutions::new();
    for s in enumerate_pool(&fv, bound, r.domain()) {
        let vals: Vec<ElemId> = args
            .iter()
            .map(|a| eval_term(a, &s, r.domain()).expect("closed"))
            .collect();
        // the truncation element satisfies no atom, negated or not: truth at
        // truncated elements must not depend on what got cut off.
        if vals.iter().any(|v| r.domain().bottom() == Some(*v)) {
            continue;
        }
        if !r.domain().rel_holds(p, &vals) {
            out.insert(s);
        }
    }
    Ok(out)
}

struct Scope {
    heads: Tables,
}

/// Saturation-based resolver: derived predicates are read from fully
/// computed stage tables; nested LETs trigger a full inner fixed point,
/// memoized per (program, relevant ambient bindings) within one stage.
pub(crate) struct SatResolver<'a> {
    x: &'a dyn Domain,
    scopes: Vec<Scope>,
    strategy: Strategy,
    /// semi-naive: this atom occurrence reads the delta tables instead.
    delta: Option<(usize, Tables)>,
    memo: HashMap<(usize, Assignment), Tables>,
}

impl<'a> SatResolver<'a> {
    pub(crate) fn new(x: &'a dyn Domain, strategy: Strategy) -> Self {
        SatResolver { x, scopes: Vec::new(), strategy, delta: None, memo: HashMap::new() }
    }

    fn scope_of(&self, p: &Ident) -> Option<usize> {
        self.scopes
            .iter()
            .rposition(|s| s.heads.0.contains_key(p))
    }

    /// Run the fixed point of `p` with the current scopes visible, leaving
    /// its tables pushed as the innermost scope.
    fn saturate(
        &mut self,
        p: &Program,
        ambient: &Assignment,
        want_trace: bool,
    ) -> Result<Option<FixpointTrace>, EvalError> {
        self.scopes.push(Scope { heads: Tables::empty_for(p) });
        let mut stages: Vec<Tables> = vec![Tables::empty_for(p)];
        let occs: BTreeMap<Ident, Vec<usize>> = p
            .rules
            .iter()
            .map(|r| (r.head.clone(), derived_occurrences(&r.body, p)))
            .collect();
        let incremental: BTreeMap<Ident, bool> = p
            .rules
            .iter()
            .map(|r| (r.head.clone(), !contains_let(&r.body)))
            .collect();
        loop {
            self.memo.clear();
            let current = self.scopes.last().unwrap().heads.clone();
            let stage = stages.len(); // computing T_stage from T_{stage-1}
            let mut next = current.clone();
            for rule in &p.rules {
                let mut bound = ambient.clone();
                for v in &rule.head_vars {
                    bound = bound.without(v);
                }
                let use_semi = self.strategy == Strategy::SemiNaive
                    && stage >= 2
                    && incremental[&rule.head];
                let mut sols = Solutions::new();
                if use_semi {
                    let prev = &stages[stage - 2];
                    let delta = diff_tables(&current, prev);
                    if !delta.0.values().all(|r| r.is_empty()) {
                        for occ in &occs[&rule.head] {
                            self.delta = Some((*occ, delta.clone()));
                            sols.extend(solve(&rule.body, &bound, self)?);
                            self.delta = None;
                        }
                    }
                } else {
                    sols = solve(&rule.body, &bound, self)?;
                }
                let rows = next.0.get_mut(&rule.head).unwrap();
                for s in sols {
                    let mut tuple = Vec::with_capacity(rule.head_vars.len());
                    let mut open: Vec<usize> = Vec::new();
                    for (i, v) in rule.head_vars.iter().enumerate() {
                        match s.lookup(v) {
                            Some(a) => tuple.push(a),
                            None => {
                                tuple.push(ElemId(0));
                                open.push(i);
                            }
                        }
                    }
                    if open.is_empty() {
                        rows.insert(tuple);
                    } else {
                        // body does not constrain these head variables: any
                        // element works.
                        fill_open(rows, tuple, &open, &self.x.pool());
                    }
                }
            }
            let done = next == self.scopes.last().unwrap().heads;
            self.scopes.last_mut().unwrap().heads = next.clone();
            stages.push(next);
            if done {
                break;
            }
        }
        self.memo.clear();
        Ok(want_trace.then(|| FixpointTrace {
            closure_stage: stages.len() - 2,
            stages,
        }))
    }
}

fn fill_open(rows: &mut Rows, tuple: Vec<ElemId>, open: &[usize], pool: &[ElemId]) {
    let mut partials = vec![tuple];
    for &i in open {
        let mut next = Vec::with_capacity(partials.len() * pool.len());
        for t in &partials {
            for a in pool {
                let mut t2 = t.clone();
                t2[i] = *a;
                next.push(t2);
            }
        }
        partials = next;
    }
    rows.extend(partials);
}

fn diff_tables(new: &Tables, old: &Tables) -> Tables {
    Tables(
        new.0
            .iter()
            .map(|(h, rows)| {
                let prev = old.0.get(h);
                let delta: Rows = rows
                    .iter()
                    .filter(|t| prev.map_or(true, |p| !p.contains(*t)))
                    .cloned()
                    .collect();
                (h.clone(), delta)
            })
            .collect(),
    )
}

/// Addresses of atoms referring to heads of `p`, skipping occurrences under
/// nested LETs that rebind the symbol.
fn derived_occurrences(f: &Formula, p: &Program) -> Vec<usize> {
    let mut out = Vec::new();
    collect_occs(f, p, &mut out);
    out
}

fn collect_occs(f: &Formula, p: &Program, out: &mut Vec<usize>) {
    match f {
        Formula::Atom(q, _) if p.rule_for(q).is_some() => out.push(f as *const _ as usize),
        Formula::Atom(..) | Formula::NegAtom(..) => {}
        Formula::Conj(a, b) | Formula::Disj(a, b) => {
            collect_occs(a, p, out);
            collect_occs(b, p, out);
        }
        Formula::Exists(_, body) => collect_occs(body, p, out),
        Formula::Let(inner, body) => {
            // heads rebound by the inner program are not occurrences of
            // the outer ones; rules with LETs are non-incremental anyway.
            for r in &inner.rules {
                collect_occs(&r.body, p, out);
            }
            collect_occs(body, p, out);
        }
    }
}

fn contains_let(f: &Formula) -> bool {
    match f {
        Formula::Let(..) => true,
        Formula::Atom(..) | Formula::NegAtom(..) => false,
        Formula::Conj(a, b) | Formula::Disj(a, b) => contains_let(a) || contains_let(b),
        Formula::Exists(_, body) => contains_let(body),
    }
}

impl Resolver for SatResolver<'_> {
    fn domain(&self) -> &dyn Domain {
        self.x
    }

    fn is_derived(&self, p: &Ident) -> bool {
        self.scope_of(p).is_some()
    }

    fn derived_answers(
        &mut self,
        occ: usize,
        p: &Ident,
        pattern: &[Option<ElemId>],
    ) -> Result<Vec<Vec<ElemId>>, EvalError> {
        let idx = self
            .scope_of(p)
            .ok_or_else(|| EvalError::UnknownRelation(p.clone()))?;
        let use_delta = matches!(&self.delta, Some((target, _)) if *target == occ)
            && idx + 1 == self.scopes.len();
        let rows = if use_delta {
            self.delta.as_ref().unwrap().1.rows(p).unwrap()
        } else {
            self.scopes[idx].heads.rows(p).unwrap()
        };
        Ok(rows
            .iter()
            .filter(|t| {
                pattern
                    .iter()
                    .zip(t.iter())
                    .all(|(s, a)| s.map_or(true, |s| s == *a))
            })
            .cloned()
            .collect())
    }

    fn enter_let(&mut self, p: &Program, bound: &Assignment) -> Result<(), EvalError> {
        let ptr = p as *const Program as usize;
        let key = (ptr, bound.restrict(program_free_vars(p).iter()));
        if let Some(tables) = self.memo.get(&key) {
            self.scopes.push(Scope { heads: tables.clone() });
            return Ok(());
        }
        // a delta restriction applies only to the program being saturated,
        // never inside a nested fixed point.
        let saved_delta = self.delta.take();
        self.saturate(p, &key.1, false)?;
        self.delta = saved_delta;
        let tables = self.scopes.last().unwrap().heads.clone();
        self.memo.insert(key, tables);
        Ok(())
    }

    fn exit_let(&mut self) {
        self.scopes.pop();
    }
}

fn check_free_vars(f: &Formula, s: &Assignment) -> Result<(), EvalError> {
    for v in free_vars(f) {
        if !s.in_dom(&v) {
            return Err(EvalError::UnboundVariable(v));
        }
    }
    Ok(())
}

/// Truth of `f` in `x` under `s`; `free_vars(f)` must be within `s`'s domain.
pub fn evaluate(f: &Formula, s: &Assignment, x: &dyn Domain) -> Result<bool, EvalError> {
    check_free_vars(f, s)?;
    let mut r = SatResolver::new(x, Strategy::SemiNaive);
    Ok(!solve(f, s, &mut r)?.is_empty())
}

/// Truth of `f` with the heads of `p` pre-bound to `tables` (coherence
/// check for `evaluate(Let p then f) = evaluate_with(f, …, lfp(p))`).
pub fn evaluate_with(
    f: &Formula,
    s: &Assignment,
    x: &dyn Domain,
    _p: &Program,
    tables: &Tables,
) -> Result<bool, EvalError> {
    check_free_vars(f, s)?;
    let mut r = SatResolver::new(x, Strategy::SemiNaive);
    r.scopes.push(Scope { heads: tables.clone() });
    Ok(!solve(f, s, &mut r)?.is_empty())
}

/// Simultaneous least fixed point of `p` over `x` with ambient bindings `s`.
pub fn lfp(
    p: &Program,
    s: &Assignment,
    x: &dyn Domain,
    strategy: Strategy,
) -> Result<(Tables, FixpointTrace), EvalError> {
    for v in program_free_vars(p) {
        if !s.in_dom(&v) {
            return Err(EvalError::UnboundVariable(v));
        }
    }
    let mut r = SatResolver::new(x, strategy);
    let trace = r.saturate(p, s, true)?.expect("trace requested");
    let tables = r.scopes.pop().unwrap().heads;
    Ok((tables, trace))
}

/// One application of the operator Γ induced by `p` to the given tables.
pub fn apply_once(
    p: &Program,
    tables: &Tables,
    s: &Assignment,
    x: &dyn Domain,
) -> Result<Tables, EvalError> {
    let mut r = SatResolver::new(x, Strategy::Naive);
    r.scopes.push(Scope { heads: tables.clone() });
    let mut out = Tables::empty_for(p);
    for rule in &p.rules {
        let mut bound = s.clone();
        for v in &rule.head_vars {
            bound = bound.without(v);
        }
        let sols = solve(&rule.body, &bound, &mut r)?;
        let rows = out.0.get_mut(&rule.head).unwrap();
        for sol in sols {
            let mut tuple = Vec::new();
            let mut open = Vec::new();
            for (i, v) in rule.head_vars.iter().enumerate() {
                match sol.lookup(v) {
                    Some(a) => tuple.push(a),
                    None => {
                        tuple.push(ElemId(0));
                        open.push(i);
                    }
                }
            }
            if open.is_empty() {
                rows.insert(tuple);
            } else {
                fill_open(rows, tuple, &open, &x.pool());
            }
        }
    }
    Ok(out)
}

/// Least closed point by brute force: enumerate every candidate family of
/// tables, keep the closed ones, intersect. Test oracle only.
pub fn lfp_oracle(
    p: &Program,
    s: &Assignment,
    x: &dyn Domain,
    limit: f64,
) -> Result<Tables, EvalError> {
    let universe = x.universe().ok_or(EvalError::NotMaterializable)?;
    let n = universe.len();
    // candidate tuple slots per head, in a fixed order
    let mut slots: Vec<(Ident, Vec<ElemId>)> = Vec::new();
    for rule in &p.rules {
        for t in crate::structure::tuples(n, rule.head_vars.len()) {
            slots.push((rule.head.clone(), t));
        }
    }
    let bits = slots.len() as u32;
    if 2f64.powi(bits as i32) > limit {
        return Err(EvalError::OracleTooLarge(2f64.powi(bits as i32)));
    }
    let mut least: Option<Tables> = None;
    for mask in 0u64..(1u64 << bits) {
        let mut cand = Tables::empty_for(p);
        for (i, (h, t)) in slots.iter().enumerate() {
            if mask & (1 << i) != 0 {
                cand.0.get_mut(h).unwrap().insert(t.clone());
            }
        }
        let applied = apply_once(p, &cand, s, x)?;
        if applied.is_subset(&cand) {
            least = Some(match least {
                None => cand,
                Some(acc) => Tables(
                    acc.0
                        .into_iter()
                        .map(|(h, rows)| {
                            let other = cand.0.get(&h).unwrap();
                            (h, rows.intersection(other).cloned().collect())
                        })
                        .collect(),
                ),
            });
        }
    }
    Ok(least.expect("the full tables are always closed"))
}

/// Stage-by-stage account of one saturation run.
pub fn stage_report(
    p: &Program,
    s: &Assignment,
    x: &dyn Domain,
    strategy: Strategy,
) -> Result<StageReport, EvalError> {
    let (_, trace) = lfp(p, s, x, strategy)?;
    let mut deltas = Vec::new();
    for w in trace.stages.windows(2) {
        let d = diff_tables(&w[1], &w[0]);
        let mut flat: Vec<(Ident, Vec<ElemId>)> = d
            .0
            .into_iter()
            .flat_map(|(h, rows)| rows.into_iter().map(move |t| (h.clone(), t)))
            .collect();
        flat.sort();
        if !flat.is_empty() || w[1] != w[0] {
            deltas.push(flat);
        }
    }
    // drop the final (empty) fixpoint-confirmation stage
    while deltas.last().is_some_and(|d| d.is_empty()) {
        deltas.pop();
    }
    Ok(StageReport { closure_stage: trace.closure_stage, deltas })
}
