//! Abstract syntax of existential fixed point logic: vocabularies, terms,
//! formulas, rules and programs, plus well-formedness checking, free
//! occurrence computation, the EL prenex normalizer and bound-predicate
//! renaming.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

/// An interned identifier token. Names are opaque; comparison and ordering
/// are plain string comparison, which keeps every transformation
/// deterministic.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Ident(Arc<str>);

impl Ident {
    pub fn new(s: &str) -> Self {
        Ident(Arc::from(s))
    }
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for Ident {
    fn from(s: &str) -> Self {
        Ident::new(s)
    }
}

impl fmt::Display for Ident {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Ident {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.0)
    }
}

/// The name of the equality relation. It is implicit in every vocabulary,
/// binary and negatable.
pub fn eq_ident() -> Ident {
    Ident::new("=")
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, serde::Serialize)]
pub enum Polarity {
    Negatable,
    Positive,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct FunDecl {
    pub name: Ident,
    pub arity: usize,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct RelDecl {
    pub name: Ident,
    pub arity: usize,
    pub polarity: Polarity,
}

/// A finite symbol table. Equality is always present (never stored in
/// `relations`), binary and negatable.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Vocabulary {
    pub functions: Vec<FunDecl>,
    pub relations: Vec<RelDecl>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Vocabulary::default()
    }

    pub fn with_fun(mut self, name: &str, arity: usize) -> Self {
        self.functions.push(FunDecl { name: Ident::new(name), arity });
        self
    }

    pub fn with_rel(mut self, name: &str, arity: usize, polarity: Polarity) -> Self {
        self.relations.push(RelDecl { name: Ident::new(name), arity, polarity });
        self
    }

    pub fn function(&self, name: &Ident) -> Option<&FunDecl> {
        self.functions.iter().find(|f| &f.name == name)
    }

    pub fn relation(&self, name: &Ident) -> Option<RelDecl> {
        if name == &eq_ident() {
            return Some(RelDecl { name: eq_ident(), arity: 2, polarity: Polarity::Negatable });
        }
        self.relations.iter().find(|r| &r.name == name).cloned()
    }

    /// All declared names must be pairwise distinct and must not collide
    /// with the implicit equality symbol.
    pub fn check(&self) -> Result<(), String> {
        let mut seen = BTreeSet::new();
        for n in self
            .functions
            .iter()
            .map(|f| &f.name)
            .chain(self.relations.iter().map(|r| &r.name))
        {
            if n == &eq_ident() {
                return Err("`=` is implicit and may not be declared".into());
            }
            if !seen.insert(n.clone()) {
                return Err(format!("duplicate symbol name `{n}`"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Term {
    Var(Ident),
    App(Ident, Vec<Term>),
}

impl Term {
    pub fn var(name: &str) -> Term {
        Term::Var(Ident::new(name))
    }
    pub fn app(name: &str, args: Vec<Term>) -> Term {
        Term::App(Ident::new(name), args)
    }
    pub fn vars(&self, out: &mut BTreeSet<Ident>) {
        match self {
            Term::Var(v) => {
                out.insert(v.clone());
            }
            Term::App(_, args) => {
                for a in args {
                    a.vars(out);
                }
            }
        }
    }
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Formula {
    Atom(Ident, Vec<Term>),
    NegAtom(Ident, Vec<Term>),
    Conj(Box<Formula>, Box<Formula>),
    Disj(Box<Formula>, Box<Formula>),
    Exists(Ident, Box<Formula>),
    Let(Program, Box<Formula>),
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Rule {
    pub head: Ident,
    pub head_vars: Vec<Ident>,
    pub body: Formula,
}

/// An ordered list of rules with pairwise distinct head symbols. The order
/// is a textual artifact only; semantics never depends on it.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Program {
    pub rules: Vec<Rule>,
}

impl Program {
    pub fn head_symbols(&self) -> Vec<Ident> {
        self.rules.iter().map(|r| r.head.clone()).collect()
    }
    pub fn rule_for(&self, head: &Ident) -> Option<&Rule> {
        self.rules.iter().find(|r| &r.head == head)
    }
}

/// A path from the root of a formula to one of its nodes: child indices.
/// For `Let`, index 0..n-1 are the rule bodies and index n is the THEN part.
pub type SyntaxPath = Vec<usize>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub path: SyntaxPath,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "at {:?}: {}", self.path, self.message)
    }
}

/// Arity bookkeeping shared by all uses of a relation, declared or not:
/// extra predicates must be used consistently.
struct ArityMap {
    seen: BTreeMap<Ident, usize>,
}

struct Validator<'a> {
    vocab: &'a Vocabulary,
    arities: ArityMap,
    violations: Vec<Violation>,
}

impl<'a> Validator<'a> {
    fn check_relation_use(
        &mut self,
        name: &Ident,
        args: usize,
        negated: bool,
        bound_positive: bool,
        path: &SyntaxPath,
    ) {
        let declared = self.vocab.relation(name);
        if let Some(decl) = &declared {
            if decl.arity != args {
                self.violations.push(Violation {
                    path: path.clone(),
                    message: format!(
                        "relation `{name}` declared with arity {} but used with {args} arguments",
                        decl.arity
                    ),
                });
            }
            if negated && decl.polarity == Polarity::Positive {
                self.violations.push(Violation {
                    path: path.clone(),
                    message: format!("negation of positive symbol `{name}`"),
                });
            }
        } else {
            // Extra predicate: arity fixed by first use; any predicate bound
            // by a Let is positive, so it may never be negated.
            if negated && bound_positive {
                self.violations.push(Violation {
                    path: path.clone(),
                    message: format!("negation of positive symbol `{name}` (bound by a let)"),
                });
            } else if negated {
                self.violations.push(Violation {
                    path: path.clone(),
                    message: format!(
                        "negation of extra predicate `{name}` (extra predicates are positive)"
                    ),
                });
            }
            match self.arities.seen.get(name) {
                Some(&a) if a != args => self.violations.push(Violation {
                    path: path.clone(),
                    message: format!(
                        "relation `{name}` used with arity {a} and with arity {args}"
                    ),
                }),
                Some(_) => {}
                None => {
                    self.arities.seen.insert(name.clone(), args);
                }
            }
        }
    }

    fn check_term(&mut self, t: &Term, path: &SyntaxPath) {
        if let Term::App(f, args) = t {
            match self.vocab.function(f) {
                None => self.violations.push(Violation {
                    path: path.clone(),
                    message: format!("unknown function symbol `{f}`"),
                }),
                Some(decl) if decl.arity != args.len() => self.violations.push(Violation {
                    path: path.clone(),
                    message: format!(
                        "function `{f}` declared with arity {} but applied to {} arguments",
                        decl.arity,
                        args.len()
                    ),
                }),
                Some(_) => {}
            }
            for a in args {
                self.check_term(a, path);
            }
        }
    }

    fn check_formula(&mut self, f: &Formula, bound: &BTreeSet<Ident>, path: &mut SyntaxPath) {
        match f {
            Formula::Atom(r, args) | Formula::NegAtom(r, args) => {
                let negated = matches!(f, Formula::NegAtom(..));
                self.check_relation_use(r, args.len(), negated, bound.contains(r), path);
                for a in args {
                    self.check_term(a, path);
                }
            }
            Formula::Conj(a, b) | Formula::Disj(a, b) => {
                path.push(0);
                self.check_formula(a, bound, path);
                path.pop();
                path.push(1);
                self.check_formula(b, bound, path);
                path.pop();
            }
            Formula::Exists(_, body) => {
                path.push(0);
                self.check_formula(body, bound, path);
                path.pop();
            }
            Formula::Let(p, body) => {
                let mut heads = BTreeSet::new();
                for r in &p.rules {
                    if self.vocab.relation(&r.head).is_some() {
                        self.violations.push(Violation {
                            path: path.clone(),
                            message: format!(
                                "rule head `{}` is a declared vocabulary symbol",
                                r.head
                            ),
                        });
                    }
                    if !heads.insert(r.head.clone()) {
                        self.violations.push(Violation {
                            path: path.clone(),
                            message: format!("two rules headed by `{}`", r.head),
                        });
                    }
                    let mut hv = BTreeSet::new();
                    for v in &r.head_vars {
                        if !hv.insert(v.clone()) {
                            self.violations.push(Violation {
                                path: path.clone(),
                                message: format!(
                                    "repeated head variable `{v}` in rule for `{}`",
                                    r.head
                                ),
                            });
                        }
                    }
                    match self.arities.seen.get(&r.head) {
                        Some(&a) if a != r.head_vars.len() => {
                            self.violations.push(Violation {
                                path: path.clone(),
                                message: format!(
                                    "relation `{}` used with arity {a} and with arity {}",
                                    r.head,
                                    r.head_vars.len()
                                ),
                            })
                        }
                        Some(_) => {}
                        None => {
                            self.arities.seen.insert(r.head.clone(), r.head_vars.len());
                        }
                    }
                }
                let mut inner = bound.clone();
                inner.extend(heads);
                for (i, r) in p.rules.iter().enumerate() {
                    path.push(i);
                    self.check_formula(&r.body, &inner, path);
                    path.pop();
                }
                path.push(p.rules.len());
                self.check_formula(body, &inner, path);
                path.pop();
            }
        }
    }
}

/// Well-formedness: arity consistency (declared and extra predicates alike),
/// negation confined to negatable atoms, distinct positive head symbols and
/// distinct head variables in every program. Returns all violations in
/// discovery order; an empty list means the formula is accepted.
pub fn validate(f: &Formula, vocab: &Vocabulary) -> Vec<Violation> {
    let mut v = Validator {
        vocab,
        arities: ArityMap { seen: BTreeMap::new() },
        violations: Vec::new(),
    };
    let mut path = Vec::new();
    v.check_formula(f, &BTreeSet::new(), &mut path);
    v.violations
}

pub fn validate_program(p: &Program, vocab: &Vocabulary) -> Vec<Violation> {
    // A program validates exactly when the induction assertion it forms does.
    let probe_body = Formula::Atom(eq_ident(), vec![Term::var("x"), Term::var("x")]);
    let probe = Formula::Let(p.clone(), Box::new(probe_body));
    validate(&probe, vocab)
}

fn free_vars_into(f: &Formula, bound: &BTreeSet<Ident>, out: &mut BTreeSet<Ident>) {
    match f {
        Formula::Atom(_, args) | Formula::NegAtom(_, args) => {
            let mut vs = BTreeSet::new();
            for a in args {
                a.vars(&mut vs);
            }
            out.extend(vs.difference(bound).cloned());
        }
        Formula::Conj(a, b) | Formula::Disj(a, b) => {
            free_vars_into(a, bound, out);
            free_vars_into(b, bound, out);
        }
        Formula::Exists(v, body) => {
            let mut inner = bound.clone();
            inner.insert(v.clone());
            free_vars_into(body, &inner, out);
        }
        Formula::Let(p, body) => {
            for r in &p.rules {
                let mut inner = bound.clone();
                inner.extend(r.head_vars.iter().cloned());
                free_vars_into(&r.body, &inner, out);
            }
            free_vars_into(body, bound, out);
        }
    }
}

/// The individual variables with at least one free occurrence.
pub fn free_vars(f: &Formula) -> BTreeSet<Ident> {
    let mut out = BTreeSet::new();
    free_vars_into(f, &BTreeSet::new(), &mut out);
    out
}

/// Free variables of a program: variables free in some rule body and not
/// bound by that rule's head variables.
pub fn program_free_vars(p: &Program) -> BTreeSet<Ident> {
    let mut out = BTreeSet::new();
    for r in &p.rules {
        let bound: BTreeSet<Ident> = r.head_vars.iter().cloned().collect();
        free_vars_into(&r.body, &bound, &mut out);
    }
    out
}

fn free_preds_into(f: &Formula, bound: &BTreeSet<Ident>, out: &mut BTreeSet<Ident>) {
    match f {
        Formula::Atom(r, _) | Formula::NegAtom(r, _) => {
            if !bound.contains(r) {
                out.insert(r.clone());
            }
        }
        Formula::Conj(a, b) | Formula::Disj(a, b) => {
            free_preds_into(a, bound, out);
            free_preds_into(b, bound, out);
        }
        Formula::Exists(_, body) => free_preds_into(body, bound, out),
        Formula::Let(p, body) => {
            let mut inner = bound.clone();
            inner.extend(p.rules.iter().map(|r| r.head.clone()));
            for r in &p.rules {
                free_preds_into(&r.body, &inner, out);
            }
            free_preds_into(body, &inner, out);
        }
    }
}

/// Relation names with at least one free occurrence (head symbols of an
/// enclosing Let are bound within it).
pub fn free_predicates(f: &Formula) -> BTreeSet<Ident> {
    let mut out = BTreeSet::new();
    free_preds_into(f, &BTreeSet::new(), &mut out);
    out
}

/// Every relation name occurring anywhere in the formula, free or bound.
pub fn all_predicates(f: &Formula) -> BTreeSet<Ident> {
    let mut out = BTreeSet::new();
    fn walk(f: &Formula, out: &mut BTreeSet<Ident>) {
        match f {
            Formula::Atom(r, _) | Formula::NegAtom(r, _) => {
                out.insert(r.clone());
            }
            Formula::Conj(a, b) | Formula::Disj(a, b) => {
                walk(a, out);
                walk(b, out);
            }
            Formula::Exists(_, body) => walk(body, out),
            Formula::Let(p, body) => {
                for r in &p.rules {
                    out.insert(r.head.clone());
                    walk(&r.body, out);
                }
                walk(body, out);
            }
        }
    }
    walk(f, &mut out);
    out
}

/// Head symbols of every Let anywhere in the formula.
pub fn bound_predicates(f: &Formula) -> BTreeSet<Ident> {
    let mut out = BTreeSet::new();
    fn walk(f: &Formula, out: &mut BTreeSet<Ident>) {
        match f {
            Formula::Atom(..) | Formula::NegAtom(..) => {}
            Formula::Conj(a, b) | Formula::Disj(a, b) => {
                walk(a, out);
                walk(b, out);
            }
            Formula::Exists(_, body) => walk(body, out),
            Formula::Let(p, body) => {
                for r in &p.rules {
                    out.insert(r.head.clone());
                    walk(&r.body, out);
                }
                walk(body, out);
            }
        }
    }
    walk(f, &mut out);
    out
}

fn all_vars(f: &Formula, out: &mut BTreeSet<Ident>) {
    match f {
        Formula::Atom(_, args) | Formula::NegAtom(_, args) => {
            for a in args {
                a.vars(out);
            }
        }
        Formula::Conj(a, b) | Formula::Disj(a, b) => {
            all_vars(a, out);
            all_vars(b, out);
        }
        Formula::Exists(v, body) => {
            out.insert(v.clone());
            all_vars(body, out);
        }
        Formula::Let(p, body) => {
            for r in &p.rules {
                out.extend(r.head_vars.iter().cloned());
                all_vars(&r.body, out);
            }
            all_vars(body, out);
        }
    }
}

/// Smallest primed variant of `base` not in `used`; inserts the result.
fn fresh_var(base: &Ident, used: &mut BTreeSet<Ident>) -> Ident {
    let mut cand = format!("{base}'");
    while used.contains(&Ident::new(&cand)) {
        cand.push('\'');
    }
    let id = Ident::new(&cand);
    used.insert(id.clone());
    id
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum PrenexError {
    #[error("prenex normalization requires an EL formula (no let)")]
    ContainsLet,
}

fn subst_term(t: &Term, env: &BTreeMap<Ident, Ident>) -> Term {
    match t {
        Term::Var(v) => Term::Var(env.get(v).cloned().unwrap_or_else(|| v.clone())),
        Term::App(f, args) => {
            Term::App(f.clone(), args.iter().map(|a| subst_term(a, env)).collect())
        }
    }
}

fn pull(
    f: &Formula,
    env: &BTreeMap<Ident, Ident>,
    used: &mut BTreeSet<Ident>,
) -> Result<(Vec<Ident>, Formula), PrenexError> {
    match f {
        Formula::Atom(r, args) => Ok((
            vec![],
            Formula::Atom(r.clone(), args.iter().map(|a| subst_term(a, env)).collect()),
        )),
        Formula::NegAtom(r, args) => Ok((
            vec![],
            Formula::NegAtom(r.clone(), args.iter().map(|a| subst_term(a, env)).collect()),
        )),
        Formula::Conj(a, b) | Formula::Disj(a, b) => {
            let (pa, ma) = pull(a, env, used)?;
            let (pb, mb) = pull(b, env, used)?;
            let mut prefix = pa;
            prefix.extend(pb);
            let node = match f {
                Formula::Conj(..) => Formula::Conj(Box::new(ma), Box::new(mb)),
                _ => Formula::Disj(Box::new(ma), Box::new(mb)),
            };
            Ok((prefix, node))
        }
        Formula::Exists(v, body) => {
            let fresh = if used.contains(v) {
                fresh_var(v, used)
            } else {
                used.insert(v.clone());
                v.clone()
            };
            let mut env2 = env.clone();
            env2.insert(v.clone(), fresh.clone());
            let (mut prefix, matrix) = pull(body, &env2, used)?;
            prefix.insert(0, fresh);
            Ok((prefix, matrix))
        }
        Formula::Let(..) => Err(PrenexError::ContainsLet),
    }
}

/// Prenex existential form of an EL formula: all quantifiers pulled to the
/// front, bound variables renamed apart with the smallest unused primed
/// variant. Rejects formulas containing `Let`.
pub fn to_prenex(f: &Formula) -> Result<Formula, PrenexError> {
    let mut used: BTreeSet<Ident> = free_vars(f);
    let (prefix, matrix) = pull(f, &BTreeMap::new(), &mut used)?;
    Ok(prefix
        .into_iter()
        .rev()
        .fold(matrix, |acc, v| Formula::Exists(v, Box::new(acc))))
}

/// Replace free occurrences of relation `from` by `to` (stops at Lets that
/// rebind `from`).
fn subst_pred(f: &Formula, from: &Ident, to: &Ident) -> Formula {
    match f {
        Formula::Atom(r, args) => {
            let r2 = if r == from { to.clone() } else { r.clone() };
            Formula::Atom(r2, args.clone())
        }
        Formula::NegAtom(r, args) => {
            let r2 = if r == from { to.clone() } else { r.clone() };
            Formula::NegAtom(r2, args.clone())
        }
        Formula::Conj(a, b) => Formula::Conj(
            Box::new(subst_pred(a, from, to)),
            Box::new(subst_pred(b, from, to)),
        ),
        Formula::Disj(a, b) => Formula::Disj(
            Box::new(subst_pred(a, from, to)),
            Box::new(subst_pred(b, from, to)),
        ),
        Formula::Exists(v, body) => {
            Formula::Exists(v.clone(), Box::new(subst_pred(body, from, to)))
        }
        Formula::Let(p, body) => {
            if p.rules.iter().any(|r| &r.head == from) {
                f.clone()
            } else {
                let rules = p
                    .rules
                    .iter()
                    .map(|r| Rule {
                        head: r.head.clone(),
                        head_vars: r.head_vars.clone(),
                        body: subst_pred(&r.body, from, to),
                    })
                    .collect();
                Formula::Let(Program { rules }, Box::new(subst_pred(body, from, to)))
            }
        }
    }
}

/// Smallest indexed variant of `base` (base1, base2, ...) not in `used`.
fn fresh_pred(base: &Ident, used: &mut BTreeSet<Ident>) -> Ident {
    let mut i = 1usize;
    loop {
        let cand = Ident::new(&format!("{base}{i}"));
        if !used.contains(&cand) {
            used.insert(cand.clone());
            return cand;
        }
        i += 1;
    }
}

fn rename_away_rec(f: &Formula, avoid: &BTreeSet<Ident>, used: &mut BTreeSet<Ident>) -> Formula {
    match f {
        Formula::Atom(..) | Formula::NegAtom(..) => f.clone(),
        Formula::Conj(a, b) => Formula::Conj(
            Box::new(rename_away_rec(a, avoid, used)),
            Box::new(rename_away_rec(b, avoid, used)),
        ),
        Formula::Disj(a, b) => Formula::Disj(
            Box::new(rename_away_rec(a, avoid, used)),
            Box::new(rename_away_rec(b, avoid, used)),
        ),
        Formula::Exists(v, body) => {
            Formula::Exists(v.clone(), Box::new(rename_away_rec(body, avoid, used)))
        }
        Formula::Let(p, body) => {
            let mut p = p.clone();
            let mut body = (**body).clone();
            for idx in 0..p.rules.len() {
                let head = p.rules[idx].head.clone();
                if avoid.contains(&head) {
                    let fresh = fresh_pred(&head, used);
                    for r in p.rules.iter_mut() {
                        r.body = subst_pred(&r.body, &head, &fresh);
                    }
                    p.rules[idx].head = fresh.clone();
                    body = subst_pred(&body, &head, &fresh);
                }
            }
            let rules = p
                .rules
                .iter()
                .map(|r| Rule {
                    head: r.head.clone(),
                    head_vars: r.head_vars.clone(),
                    body: rename_away_rec(&r.body, avoid, used),
                })
                .collect();
            Formula::Let(Program { rules }, Box::new(rename_away_rec(&body, avoid, used)))
        }
    }
}

/// Rename the bound predicates of `f` away from the head symbols of
/// `program`: afterwards no head symbol of `program` occurs bound in the
/// result. Deterministic (smallest unused indexed variant) and semantics
/// preserving.
pub fn rename_away(f: &Formula, program: &Program) -> Formula {
    let avoid: BTreeSet<Ident> = program.head_symbols().into_iter().collect();
    let mut used: BTreeSet<Ident> = all_predicates(f);
    used.extend(avoid.iter().cloned());
    for r in &program.rules {
        used.extend(all_predicates(&r.body));
    }
    rename_away_rec(f, &avoid, &mut used)
}

/// All individual variables occurring anywhere in a formula (free or bound).
pub fn variables_of(f: &Formula) -> BTreeSet<Ident> {
    let mut out = BTreeSet::new();
    all_vars(f, &mut out);
    out
}
