//! Finite interpretations of a vocabulary, assignments, homomorphisms, and
//! the `Domain` abstraction the evaluator runs against. An explicit
//! [`Structure`] stores its tables; other domains (see the `meta` module) may
//! compute them on demand.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::syntax::{eq_ident, Ident, Polarity, Term, Vocabulary};

/// Interned element id, valid within one domain.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ElemId(pub u32);

impl fmt::Debug for ElemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

/// What the evaluator needs from an interpretation. Implemented by
/// [`Structure`] (everything stored) and by the truncated meta-structure
/// (everything computed).
pub trait Domain {
    fn vocab(&self) -> &Vocabulary;

    /// All elements, if the domain is small enough to materialize.
    fn universe(&self) -> Option<Vec<ElemId>>;

    /// Candidate witnesses for existential quantifiers. For materialized
    /// domains this is the universe; lazy domains return a fixed finite pool.
    fn pool(&self) -> Vec<ElemId>;

    /// Structural size of an element; 1 for atoms of explicit structures.
    fn elem_size(&self, e: ElemId) -> usize;

    /// Total function application.
    fn apply_fun(&self, f: &Ident, args: &[ElemId]) -> ElemId;

    /// All argument tuples mapping to `val` under `f`, or `None` if the
    /// domain cannot enumerate them.
    fn invert_fun(&self, f: &Ident, val: ElemId) -> Option<Vec<Vec<ElemId>>>;

    /// Truth of a *basic* (non-head) relation, equality included.
    fn rel_holds(&self, r: &Ident, args: &[ElemId]) -> bool;

    /// Tuples of basic relation `r` matching `pattern` (`None` slots free),
    /// or `None` if not enumerable.
    fn rel_enumerate(&self, r: &Ident, pattern: &[Option<ElemId>]) -> Option<Vec<Vec<ElemId>>>;

    /// The absorbing truncation element, if the domain has one.
    fn bottom(&self) -> Option<ElemId> {
        None
    }

    fn elem_name(&self, e: ElemId) -> String;
}

/// Explicit finite structure: interned universe plus stored tables.
#[derive(Clone, Debug)]
pub struct Structure {
    vocab: Vocabulary,
    names: Vec<Ident>,
    index: BTreeMap<Ident, ElemId>,
    functions: BTreeMap<Ident, BTreeMap<Vec<ElemId>, ElemId>>,
    relations: BTreeMap<Ident, BTreeSet<Vec<ElemId>>>,
}

impl Structure {
    pub fn new(vocab: Vocabulary, universe: Vec<Ident>) -> Result<Self, String> {
        vocab.check()?;
        if universe.is_empty() {
            return Err("universe must be non-empty".into());
        }
        let mut index = BTreeMap::new();
        for (i, name) in universe.iter().enumerate() {
            if index.insert(name.clone(), ElemId(i as u32)).is_some() {
                return Err(format!("duplicate universe element `{name}`"));
            }
        }
        let functions = vocab
            .functions
            .iter()
            .map(|f| (f.name.clone(), BTreeMap::new()))
            .collect();
        let relations = vocab
            .relations
            .iter()
            .map(|r| (r.name.clone(), BTreeSet::new()))
            .collect();
        Ok(Structure { vocab, names: universe, index, functions, relations })
    }

    pub fn universe_len(&self) -> usize {
        self.names.len()
    }

    pub fn elements(&self) -> impl Iterator<Item = ElemId> + '_ {
        (0..self.names.len() as u32).map(ElemId)
    }

    pub fn elem(&self, name: &Ident) -> Option<ElemId> {
        self.index.get(name).copied()
    }

    pub fn name(&self, e: ElemId) -> &Ident {
        &self.names[e.0 as usize]
    }

    pub fn set_function(
        &mut self,
        f: &Ident,
        table: BTreeMap<Vec<ElemId>, ElemId>,
    ) -> Result<(), String> {
        let decl = self
            .vocab
            .function(f)
            .ok_or_else(|| format!("undeclared function `{f}`"))?;
        let arity = decl.arity;
        for (args, val) in &table {
            if args.len() != arity {
                return Err(format!("arity mismatch in table for `{f}`"));
            }
            for a in args.iter().chain(std::iter::once(val)) {
                if a.0 as usize >= self.names.len() {
                    return Err(format!("element out of universe in table for `{f}`"));
                }
            }
        }
        self.functions.insert(f.clone(), table);
        Ok(())
    }

    pub fn add_tuple(&mut self, r: &Ident, args: Vec<ElemId>) {
        self.relations.entry(r.clone()).or_default().insert(args);
    }

    pub fn rel_contains(&self, r: &Ident, args: &[ElemId]) -> bool {
        self.relations.get(r).is_some_and(|t| t.contains(args))
    }

    pub fn rel_tuples(&self, r: &Ident) -> impl Iterator<Item = &Vec<ElemId>> {
        self.relations.get(r).into_iter().flatten()
    }

    /// Every declared function must cover universe^arity.
    pub fn check_total(&self) -> Result<(), String> {
        for f in &self.vocab.functions {
            let table = self.functions.get(&f.name).expect("table per decl");
            let expected = self.names.len().pow(f.arity as u32);
            if table.len() != expected {
                return Err(format!(
                    "`{}` defined on {} of {} argument tuples",
                    f.name,
                    table.len(),
                    expected
                ));
            }
        }
        Ok(())
    }
}

impl Domain for Structure {
    fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    fn universe(&self) -> Option<Vec<ElemId>> {
        Some(self.elements().collect())
    }

    fn pool(&self) -> Vec<ElemId> {
        self.elements().collect()
    }

    fn elem_size(&self, _e: ElemId) -> usize {
        1
    }

    fn apply_fun(&self, f: &Ident, args: &[ElemId]) -> ElemId {
        *self
            .functions
            .get(f)
            .and_then(|t| t.get(args))
            .unwrap_or_else(|| panic!("total function `{f}` missing tuple {args:?}"))
    }

    fn invert_fun(&self, f: &Ident, val: ElemId) -> Option<Vec<Vec<ElemId>>> {
        let table = self.functions.get(f)?;
        Some(
            table
                .iter()
                .filter(|(_, v)| **v == val)
                .map(|(args, _)| args.clone())
                .collect(),
        )
    }

    fn rel_holds(&self, r: &Ident, args: &[ElemId]) -> bool {
        if r == &eq_ident() {
            return args[0] == args[1];
        }
        self.rel_contains(r, args)
    }

    fn rel_enumerate(&self, r: &Ident, pattern: &[Option<ElemId>]) -> Option<Vec<Vec<ElemId>>> {
        if r == &eq_ident() {
            return match (pattern[0], pattern[1]) {
                (Some(a), _) => Some(vec![vec![a, a]]),
                (_, Some(b)) => Some(vec![vec![b, b]]),
                (None, None) => Some(self.elements().map(|e| vec![e, e]).collect()),
            };
        }
        let table = self.relations.get(r)?;
        Some(
            table
                .iter()
                .filter(|tup| {
                    pattern
                        .iter()
                        .zip(tup.iter())
                        .all(|(p, a)| p.map_or(true, |p| p == *a))
                })
                .cloned()
                .collect(),
        )
    }

    fn elem_name(&self, e: ElemId) -> String {
        self.names[e.0 as usize].to_string()
    }
}

/// Finite partial map from variables to elements. Persistent: `modify`
/// returns a new assignment and leaves the receiver intact.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Assignment(BTreeMap<Ident, ElemId>);

impl Assignment {
    pub fn empty() -> Self {
        Assignment(BTreeMap::new())
    }

    pub fn lookup(&self, v: &Ident) -> Option<ElemId> {
        self.0.get(v).copied()
    }

    pub fn in_dom(&self, v: &Ident) -> bool {
        self.0.contains_key(v)
    }

    pub fn modify(&self, v: &Ident, a: ElemId) -> Assignment {
        let mut m = self.0.clone();
        m.insert(v.clone(), a);
        Assignment(m)
    }

    pub fn without(&self, v: &Ident) -> Assignment {
        if !self.0.contains_key(v) {
            return self.clone();
        }
        let mut m = self.0.clone();
        m.remove(v);
        Assignment(m)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Ident, ElemId)> {
        self.0.iter().map(|(v, a)| (v, *a))
    }

    /// Restriction to the given variables (used as a memoization key).
    pub fn restrict<'a>(&self, vars: impl IntoIterator<Item = &'a Ident>) -> Assignment {
        let mut m = BTreeMap::new();
        for v in vars {
            if let Some(a) = self.0.get(v) {
                m.insert(v.clone(), *a);
            }
        }
        Assignment(m)
    }
}

impl FromIterator<(Ident, ElemId)> for Assignment {
    fn from_iter<T: IntoIterator<Item = (Ident, ElemId)>>(iter: T) -> Self {
        Assignment(iter.into_iter().collect())
    }
}

/// Recursive term evaluation; `None` iff a variable is outside `s`'s domain.
pub fn eval_term(t: &Term, s: &Assignment, x: &dyn Domain) -> Option<ElemId> {
    match t {
        Term::Var(v) => s.lookup(v),
        Term::App(f, args) => {
            let mut vals = Vec::with_capacity(args.len());
            for a in args {
                vals.push(eval_term(a, s, x)?);
            }
            Some(x.apply_fun(f, &vals))
        }
    }
}

/// Element mapping between two structures over the same vocabulary.
#[derive(Clone, Debug)]
pub struct Homomorphism {
    pub map: BTreeMap<ElemId, ElemId>,
}

impl Homomorphism {
    pub fn apply(&self, e: ElemId) -> Option<ElemId> {
        self.map.get(&e).copied()
    }
}

/// One violated homomorphism condition, with the witnessing instance.
#[derive(Clone, Debug)]
pub struct HomViolation {
    pub condition: HomCondition,
    pub detail: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HomCondition {
    /// h(f(ā)) = f(h(ā)) for every function symbol and tuple.
    FunctionCommutation,
    /// R(ā) implies R(h(ā)) for every relation.
    ForwardPreservation,
    /// R(h(ā)) implies R(ā) for negatable relations.
    BackwardPreservation,
}

/// Check the three homomorphism conditions by enumeration.
///
/// Errors if the mapping is not total over the source universe or the
/// vocabularies differ; otherwise returns all violations (empty = accepted).
pub fn check_homomorphism(
    source: &Structure,
    target: &Structure,
    h: &Homomorphism,
) -> Result<Vec<HomViolation>, String> {
    if source.vocab() != target.vocab() {
        return Err("source and target have different vocabularies".into());
    }
    for e in source.elements() {
        match h.apply(e) {
            Some(img) if (img.0 as usize) < target.universe_len() => {}
            Some(_) => return Err(format!("image of `{}` not in target", source.name(e))),
            None => return Err(format!("mapping undefined on `{}`", source.name(e))),
        }
    }
    let mut violations = Vec::new();
    let hmap = |args: &[ElemId]| -> Vec<ElemId> {
        args.iter().map(|a| h.apply(*a).unwrap()).collect()
    };
    for f in &source.vocab().functions {
        for args in tuples(source.universe_len(), f.arity) {
            let lhs = h.apply(source.apply_fun(&f.name, &args)).unwrap();
            let rhs = target.apply_fun(&f.name, &hmap(&args));
            if lhs != rhs {
                violations.push(HomViolation {
                    condition: HomCondition::FunctionCommutation,
                    detail: format!(
                        "{}({}): h(source value) = {}, target value = {}",
                        f.name,
                        name_list(source, &args),
                        target.elem_name(lhs),
                        target.elem_name(rhs)
                    ),
                });
            }
        }
    }
    for r in &source.vocab().relations {
        for tup in source.rel_tuples(&r.name) {
            let img = hmap(tup);
            if !target.rel_contains(&r.name, &img) {
                violations.push(HomViolation {
                    condition: HomCondition::ForwardPreservation,
                    detail: format!("{}({}) holds in source, not at image", r.name, name_list(source, tup)),
                });
            }
        }
        if r.polarity == Polarity::Negatable {
            for args in tuples(source.universe_len(), r.arity) {
                if !source.rel_contains(&r.name, &args) && target.rel_contains(&r.name, &hmap(&args)) {
                    violations.push(HomViolation {
                        condition: HomCondition::BackwardPreservation,
                        detail: format!(
                            "{}({}) fails in source but holds at image",
                            r.name,
                            name_list(source, &args)
                        ),
                    });
                }
            }
        }
    }
    Ok(violations)
}

fn name_list(st: &Structure, args: &[ElemId]) -> String {
    args.iter()
        .map(|a| st.elem_name(*a))
        .collect::<Vec<_>>()
        .join(", ")
}

/// All tuples over `{0..n}` of the given arity, lexicographic.
pub fn tuples(n: usize, arity: usize) -> Vec<Vec<ElemId>> {
    let mut out = vec![vec![]];
    for _ in 0..arity {
        let mut next = Vec::with_capacity(out.len() * n);
        for t in &out {
            for e in 0..n as u32 {
                let mut t2 = t.clone();
                t2.push(ElemId(e));
                next.push(t2);
            }
        }
        out = next;
    }
    out
}
