//! Gödel encoding of EFPL syntax as elements of a structure, and the
//! truncated meta-structure X_d over the meta vocabulary.
//!
//! X_d's universe is {e : size(e) <= d} plus an absorbing `Bottom`; every
//! function is totalized by sending overflowing or ill-typed applications to
//! `Bottom`. The structure is *lazy*: elements are interned on demand, so
//! checks at depths where the full universe is astronomically large stay
//! cheap. `materialize()` enumerates the universe for small d, which is what
//! the exhaustive extension checks run against.

use std::cell::RefCell;
use std::collections::{BTreeSet, HashMap};

use crate::structure::{Domain, ElemId, Structure};
use crate::syntax::{
    eq_ident, Formula, Ident, Polarity, Program, Rule, Term, Vocabulary,
};

/// Caps on the supply of extra-predicate identities.
#[derive(Clone, Copy, Debug)]
pub struct MetaLimits {
    pub max_xpred_arity: usize,
    pub max_xpred_index: usize,
}

impl Default for MetaLimits {
    fn default() -> Self {
        MetaLimits { max_xpred_arity: 4, max_xpred_index: 8 }
    }
}

/// One element of X_d. Children are arena ids; assignments are kept in a
/// canonical sorted-map normal form so extensionally equal Modify histories
/// compare equal.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum MetaElem {
    Bottom,
    /// base-world element, by its id in the base structure
    Ur(u32),
    Nat(u32),
    /// variable name, by index
    Vbl(u32),
    /// name of a base vocabulary symbol, by index into the symbol table
    Sym(u32),
    /// extra predicate identity: (arity, index)
    XPred(u32, u32),
    Nil,
    Append(ElemId, ElemId),
    /// canonical assignment: sorted by variable index, non-empty
    /// (the empty assignment is its own constant)
    EmptyAssgt,
    Assgt(Vec<(u32, ElemId)>),
    Apply(ElemId, ElemId),
    Neg(ElemId),
    Conj(ElemId, ElemId),
    Disj(ElemId, ElemId),
    Quant(ElemId, ElemId),
    IndAsrt(ElemId, ElemId),
    Rule(ElemId, ElemId),
}

/// Meta-vocabulary function and relation names.
pub mod names {
    pub const ZERO: &str = "zero";
    pub const SUCC: &str = "S";
    pub const NIL: &str = "nil";
    pub const APPEND: &str = "append";
    pub const EMPTY: &str = "empty";
    pub const MODIFY: &str = "modify";
    pub const APPLY: &str = "apply";
    pub const NEG: &str = "neg";
    pub const CONJ: &str = "conj";
    pub const DISJ: &str = "disj";
    pub const QUANT: &str = "quant";
    pub const INDASRT: &str = "indasrt";
    pub const RULE: &str = "rule";
    pub const VNAME: &str = "vname";
    pub const SNAME: &str = "sname";
    pub const XPRED: &str = "xpred";
    pub const VBL: &str = "Vbl";
    pub const ARITY: &str = "Arity";
    pub const RENAME_AWAY: &str = "RenameAway";

    pub const FUNCTIONS: &[(&str, usize)] = &[
        (ZERO, 0),
        (SUCC, 1),
        (NIL, 0),
        (APPEND, 2),
        (EMPTY, 0),
        (MODIFY, 3),
        (APPLY, 2),
        (NEG, 1),
        (CONJ, 2),
        (DISJ, 2),
        (QUANT, 2),
        (INDASRT, 2),
        (RULE, 2),
        (VNAME, 1),
        (SNAME, 1),
        (XPRED, 2),
    ];
    pub const RELATIONS: &[(&str, usize)] = &[(VBL, 1), (ARITY, 2), (RENAME_AWAY, 3)];
}

/// The meta vocabulary for a given base vocabulary: the fixed Υ machinery
/// plus the base symbols themselves. Errors if a base symbol name collides
/// with a reserved meta name.
pub fn meta_vocabulary(base: &Vocabulary) -> Result<Vocabulary, String> {
    let reserved: BTreeSet<&str> = names::FUNCTIONS
        .iter()
        .map(|(n, _)| *n)
        .chain(names::RELATIONS.iter().map(|(n, _)| *n))
        .collect();
    let mut v = Vocabulary::new();
    for (n, a) in names::FUNCTIONS {
        v = v.with_fun(n, *a);
    }
    for f in &base.functions {
        if reserved.contains(f.name.as_str()) {
            return Err(format!("base symbol `{}` collides with a meta symbol", f.name));
        }
        v = v.with_fun(f.name.as_str(), f.arity);
    }
    for (n, a) in names::RELATIONS {
        v = v.with_rel(n, *a, Polarity::Positive);
    }
    for r in &base.relations {
        if reserved.contains(r.name.as_str()) {
            return Err(format!("base symbol `{}` collides with a meta symbol", r.name));
        }
        v = v.with_rel(r.name.as_str(), r.arity, r.polarity);
    }
    v.check()?;
    Ok(v)
}

/// Name table: index j names symbols[j] through the closed term sname(ĵ).
/// Base functions first, then equality, then base relations, then the meta
/// machinery itself — base symbols get the smallest indices so quotations of
/// base-world formulas stay small.
pub fn symbol_table(base: &Vocabulary) -> Vec<Ident> {
    let mut out: Vec<Ident> = base.functions.iter().map(|f| f.name.clone()).collect();
    out.push(eq_ident());
    out.extend(base.relations.iter().map(|r| r.name.clone()));
    out.extend(names::FUNCTIONS.iter().map(|(n, _)| Ident::new(n)));
    out.extend(names::RELATIONS.iter().map(|(n, _)| Ident::new(n)));
    out
}

struct Arena {
    elems: Vec<MetaElem>,
    sizes: Vec<usize>,
    index: HashMap<MetaElem, ElemId>,
}

impl Arena {
    fn intern(&mut self, e: MetaElem) -> ElemId {
        if let Some(id) = self.index.get(&e) {
            return *id;
        }
        let size = self.size_of(&e);
        let id = ElemId(self.elems.len() as u32);
        self.index.insert(e.clone(), id);
        self.elems.push(e);
        self.sizes.push(size);
        id
    }

    fn size_of(&self, e: &MetaElem) -> usize {
        let child = |id: &ElemId| self.sizes[id.0 as usize];
        match e {
            MetaElem::Bottom | MetaElem::Ur(_) | MetaElem::Nil | MetaElem::EmptyAssgt => 1,
            MetaElem::Nat(n) => *n as usize + 1,
            MetaElem::Vbl(i) | MetaElem::Sym(i) => *i as usize + 2,
            MetaElem::XPred(k, i) => *k as usize + *i as usize + 3,
            MetaElem::Append(a, b)
            | MetaElem::Apply(a, b)
            | MetaElem::Conj(a, b)
            | MetaElem::Disj(a, b)
            | MetaElem::Quant(a, b)
            | MetaElem::IndAsrt(a, b)
            | MetaElem::Rule(a, b) => 1 + child(a) + child(b),
            MetaElem::Neg(a) => 1 + child(a),
            MetaElem::Assgt(map) => {
                1 + map
                    .iter()
                    .map(|(v, a)| 1 + (*v as usize + 2) + child(a))
                    .sum::<usize>()
            }
        }
    }
}

/// The truncated meta-structure X_d as a lazy [`Domain`].
pub struct MetaStructure {
    base: Structure,
    vocab: Vocabulary,
    d: usize,
    limits: MetaLimits,
    symbols: Vec<Ident>,
    arena: RefCell<Arena>,
    /// extra pool elements beyond the urelements (lazy mode)
    materialized: RefCell<Option<Vec<ElemId>>>,
}

pub const BOTTOM: ElemId = ElemId(0);

impl MetaStructure {
    /// Errors if the base symbols collide with meta names. Symbols whose
    /// name Sym(j) (size j+2) exceeds the bound simply have no name in X_d.
    pub fn new(base: &Structure, d: usize, limits: MetaLimits) -> Result<Self, String> {
        let vocab = meta_vocabulary(base.vocab())?;
        let symbols = symbol_table(base.vocab());
        let mut arena = Arena { elems: Vec::new(), sizes: Vec::new(), index: HashMap::new() };
        arena.intern(MetaElem::Bottom);
        for e in 0..base.universe_len() as u32 {
            arena.intern(MetaElem::Ur(e));
        }
        Ok(MetaStructure {
            base: base.clone(),
            vocab,
            d,
            symbols,
            limits,
            arena: RefCell::new(arena),
            materialized: RefCell::new(None),
        })
    }

    pub fn depth(&self) -> usize {
        self.d
    }

    pub fn base(&self) -> &Structure {
        &self.base
    }

    pub fn symbols(&self) -> &[Ident] {
        &self.symbols
    }

    pub fn limits(&self) -> MetaLimits {
        self.limits
    }

    pub fn elem(&self, id: ElemId) -> MetaElem {
        self.arena.borrow().elems[id.0 as usize].clone()
    }

    pub fn intern(&self, e: MetaElem) -> ElemId {
        self.arena.borrow_mut().intern(e)
    }

    /// Intern, truncating to Bottom if the element exceeds the bound.
    fn intern_bounded(&self, e: MetaElem) -> ElemId {
        let id = self.intern(e);
        if self.size(id) > self.d {
            BOTTOM
        } else {
            id
        }
    }

    pub fn size(&self, id: ElemId) -> usize {
        self.arena.borrow().sizes[id.0 as usize]
    }

    pub fn ur(&self, base_elem: ElemId) -> ElemId {
        ElemId(1 + base_elem.0)
    }

    pub fn nat(&self, n: u32) -> ElemId {
        self.intern(MetaElem::Nat(n))
    }

    fn is_list(&self, id: ElemId) -> bool {
        matches!(self.elem(id), MetaElem::Nil | MetaElem::Append(..))
    }

    fn is_name(&self, id: ElemId) -> bool {
        matches!(self.elem(id), MetaElem::Sym(_) | MetaElem::XPred(..))
    }

    fn is_formula(&self, id: ElemId) -> bool {
        matches!(
            self.elem(id),
            MetaElem::Apply(..)
                | MetaElem::Neg(_)
                | MetaElem::Conj(..)
                | MetaElem::Disj(..)
                | MetaElem::Quant(..)
                | MetaElem::IndAsrt(..)
        )
    }

    pub fn symbol_arity(&self, j: u32) -> Option<usize> {
        let name = self.symbols.get(j as usize)?;
        if *name == eq_ident() {
            return Some(2);
        }
        self.vocab
            .function(name)
            .map(|f| f.arity)
            .or_else(|| self.vocab.relation(name).map(|r| r.arity))
    }

    /// List elements, front to back; `None` if not a list.
    pub fn list_items(&self, mut id: ElemId) -> Option<Vec<ElemId>> {
        let mut rev = Vec::new();
        loop {
            match self.elem(id) {
                MetaElem::Nil => {
                    rev.reverse();
                    return Some(rev);
                }
                MetaElem::Append(l, u) => {
                    rev.push(u);
                    id = l;
                }
                _ => return None,
            }
        }
    }

    pub fn make_list(&self, items: &[ElemId]) -> ElemId {
        let mut id = self.intern(MetaElem::Nil);
        for u in items {
            id = self.intern(MetaElem::Append(id, *u));
        }
        id
    }

    /// Collect the head-predicate names of an encoded program (list of
    /// Rule(head, body) elements).
    fn program_heads(&self, p: ElemId) -> Vec<ElemId> {
        let mut out = Vec::new();
        if let Some(rules) = self.list_items(p) {
            for r in rules {
                if let MetaElem::Rule(h, _) = self.elem(r) {
                    if let MetaElem::Apply(name, _) = self.elem(h) {
                        out.push(name);
                    }
                }
            }
        }
        out
    }

    /// Deterministic renaming of `f`'s bound predicates away from the heads
    /// of `p`, on encodings. `None` if any renamed piece exceeds the bound.
    pub fn rename_elem(&self, f: ElemId, p: ElemId) -> Option<ElemId> {
        if !self.is_formula(f) || self.list_items(p).is_none() {
            return None;
        }
        let avoid: BTreeSet<ElemId> = self.program_heads(p).into_iter().collect();
        let mut used: BTreeSet<(u32, u32)> = BTreeSet::new();
        self.collect_xpreds(f, &mut used);
        for h in &avoid {
            if let MetaElem::XPred(k, i) = self.elem(*h) {
                used.insert((k, i));
            }
        }
        let mut fresh = move |k: u32, used: &mut BTreeSet<(u32, u32)>| -> ElemId {
            let mut i = 0;
            while used.contains(&(k, i)) {
                i += 1;
            }
            used.insert((k, i));
            self.intern(MetaElem::XPred(k, i))
        };
        let out = self.rename_in(f, &avoid, &mut used, &mut fresh, &HashMap::new());
        (self.size(out) <= self.d && out != BOTTOM).then_some(out)
    }

    fn collect_xpreds(&self, id: ElemId, out: &mut BTreeSet<(u32, u32)>) {
        match self.elem(id) {
            MetaElem::XPred(k, i) => {
                out.insert((k, i));
            }
            MetaElem::Append(a, b)
            | MetaElem::Apply(a, b)
            | MetaElem::Conj(a, b)
            | MetaElem::Disj(a, b)
            | MetaElem::Quant(a, b)
            | MetaElem::IndAsrt(a, b)
            | MetaElem::Rule(a, b) => {
                self.collect_xpreds(a, out);
                self.collect_xpreds(b, out);
            }
            MetaElem::Neg(a) => self.collect_xpreds(a, out),
            _ => {}
        }
    }

    fn rename_in(
        &self,
        id: ElemId,
        avoid: &BTreeSet<ElemId>,
        used: &mut BTreeSet<(u32, u32)>,
        fresh: &mut dyn FnMut(u32, &mut BTreeSet<(u32, u32)>) -> ElemId,
        subst: &HashMap<ElemId, ElemId>,
    ) -> ElemId {
        match self.elem(id) {
            MetaElem::IndAsrt(prog, body) => {
                // heads of this binder that clash get fresh identities;
                // rebinding shadows any outer substitution.
                let heads: Vec<ElemId> = self.program_heads(prog);
                let mut inner = subst.clone();
                for h in &heads {
                    inner.remove(h);
                    if avoid.contains(h) {
                        if let MetaElem::XPred(k, _) = self.elem(*h) {
                            inner.insert(*h, fresh(k, used));
                        }
                    }
                }
                let rules = self.list_items(prog).unwrap_or_default();
                let new_rules: Vec<ElemId> = rules
                    .iter()
                    .map(|r| self.rename_in(*r, avoid, used, fresh, &inner))
                    .collect();
                let new_prog = self.make_list(&new_rules);
                let new_body = self.rename_in(body, avoid, used, fresh, &inner);
                self.intern(MetaElem::IndAsrt(new_prog, new_body))
            }
            MetaElem::Apply(name, args) => {
                let name = subst.get(&name).copied().unwrap_or(name);
                self.intern(MetaElem::Apply(name, args))
            }
            MetaElem::Neg(a) => {
                let a = self.rename_in(a, avoid, used, fresh, subst);
                self.intern(MetaElem::Neg(a))
            }
            MetaElem::Conj(a, b) => {
                let a = self.rename_in(a, avoid, used, fresh, subst);
                let b = self.rename_in(b, avoid, used, fresh, subst);
                self.intern(MetaElem::Conj(a, b))
            }
            MetaElem::Disj(a, b) => {
                let a = self.rename_in(a, avoid, used, fresh, subst);
                let b = self.rename_in(b, avoid, used, fresh, subst);
                self.intern(MetaElem::Disj(a, b))
            }
            MetaElem::Quant(v, b) => {
                let b = self.rename_in(b, avoid, used, fresh, subst);
                self.intern(MetaElem::Quant(v, b))
            }
            MetaElem::Rule(h, b) => {
                let h = self.rename_in(h, avoid, used, fresh, subst);
                let b = self.rename_in(b, avoid, used, fresh, subst);
                self.intern(MetaElem::Rule(h, b))
            }
            _ => id,
        }
    }

    /// Enumerate the whole universe {size <= d} ∪ {Bottom}. Only feasible
    /// for small d; results are cached.
    pub fn materialize(&self) -> Vec<ElemId> {
        if let Some(u) = self.materialized.borrow().as_ref() {
            return u.clone();
        }
        let d = self.d;
        // by_size[s] = ids of elements of size s
        let mut by_size: Vec<Vec<ElemId>> = vec![Vec::new(); d + 1];
        let push = |id: ElemId, s: usize, by_size: &mut Vec<Vec<ElemId>>| {
            by_size[s].push(id);
        };
        for e in 0..self.base.universe_len() as u32 {
            push(self.ur(ElemId(e)), 1, &mut by_size);
        }
        push(self.intern(MetaElem::Nil), 1, &mut by_size);
        push(self.intern(MetaElem::EmptyAssgt), 1, &mut by_size);
        for n in 0..d as u32 {
            push(self.intern(MetaElem::Nat(n)), n as usize + 1, &mut by_size);
        }
        for i in 0..(d.saturating_sub(1)) as u32 {
            push(self.intern(MetaElem::Vbl(i)), i as usize + 2, &mut by_size);
        }
        for j in 0..self.symbols.len() as u32 {
            let s = j as usize + 2;
            if s <= d {
                push(self.intern(MetaElem::Sym(j)), s, &mut by_size);
            }
        }
        for k in 0..=self.limits.max_xpred_arity as u32 {
            for i in 0..=self.limits.max_xpred_index as u32 {
                let s = (k + i + 3) as usize;
                if s <= d {
                    push(self.intern(MetaElem::XPred(k, i)), s, &mut by_size);
                }
            }
        }
        // composite kinds, built up by total size
        for s in 3..=d {
            let mut new: Vec<ElemId> = Vec::new();
            for sa in 1..s - 1 {
                let sb = s - 1 - sa;
                let left = by_size[sa].clone();
                let right = by_size[sb].clone();
                for &a in &left {
                    for &b in &right {
                        for e in self.compose(a, b) {
                            new.push(e);
                        }
                    }
                }
            }
            // unary Neg
            for a in by_size[s - 1].clone() {
                if matches!(self.elem(a), MetaElem::Apply(..)) {
                    new.push(self.intern(MetaElem::Neg(a)));
                }
            }
            // assignments of size s: extend smaller ones
            let smaller: Vec<ElemId> = by_size[..s].iter().flatten().copied().collect();
            for t in smaller.clone() {
                let map = match self.elem(t) {
                    MetaElem::EmptyAssgt => Vec::new(),
                    MetaElem::Assgt(m) => m,
                    _ => continue,
                };
                let st = self.size(t);
                let max_key = map.last().map(|(v, _)| *v);
                for &a in &smaller {
                    if matches!(self.elem(a), MetaElem::Bottom) {
                        continue;
                    }
                    let sa = self.size(a);
                    // new entry (v, a) with v greater than every existing key
                    // keeps the map canonical without re-sorting
                    if st + 1 + sa + 2 > s {
                        continue;
                    }
                    let v = (s - st - 1 - sa) as u32;
                    let v = v.checked_sub(2);
                    if let Some(vi) = v {
                        if max_key.map_or(true, |m| vi > m) {
                            let mut m2 = map.clone();
                            m2.push((vi, a));
                            new.push(self.intern(MetaElem::Assgt(m2)));
                        }
                    }
                }
            }
            for id in new {
                if self.size(id) == s && !by_size[s].contains(&id) {
                    by_size[s].push(id);
                }
            }
        }
        let mut universe = vec![BOTTOM];
        for bucket in &by_size {
            universe.extend(bucket.iter().copied());
        }
        universe.sort();
        universe.dedup();
        *self.materialized.borrow_mut() = Some(universe.clone());
        universe
    }

    /// Binary composites of a and b, respecting the shallow typing rules.
    fn compose(&self, a: ElemId, b: ElemId) -> Vec<ElemId> {
        let mut out = Vec::new();
        if self.is_list(a) {
            out.push(self.intern(MetaElem::Append(a, b)));
        }
        if self.is_name(a) && self.is_list(b) {
            out.push(self.intern(MetaElem::Apply(a, b)));
        }
        if self.is_formula(a) && self.is_formula(b) {
            out.push(self.intern(MetaElem::Conj(a, b)));
            out.push(self.intern(MetaElem::Disj(a, b)));
        }
        if matches!(self.elem(a), MetaElem::Vbl(_)) && self.is_formula(b) {
            out.push(self.intern(MetaElem::Quant(a, b)));
        }
        if self.is_list(a) && self.is_formula(b) {
            out.push(self.intern(MetaElem::IndAsrt(a, b)));
        }
        if matches!(self.elem(a), MetaElem::Apply(..)) && self.is_formula(b) {
            out.push(self.intern(MetaElem::Rule(a, b)));
        }
        out
    }

    /// Pretty rendering of an element, for reports and traces.
    pub fn render(&self, id: ElemId) -> String {
        match self.elem(id) {
            MetaElem::Bottom => "⊥".into(),
            MetaElem::Ur(e) => self.base.elem_name(ElemId(e)),
            MetaElem::Nat(n) => format!("{n}"),
            MetaElem::Vbl(i) => format!("v{i}"),
            MetaElem::Sym(j) => format!("'{}", self.symbols[j as usize]),
            MetaElem::XPred(k, i) => format!("X{i}/{k}"),
            MetaElem::Nil => "⟨⟩".into(),
            MetaElem::Append(..) => {
                let items = self.list_items(id).unwrap();
                let inner: Vec<String> = items.iter().map(|e| self.render(*e)).collect();
                format!("⟨{}⟩", inner.join(", "))
            }
            MetaElem::EmptyAssgt => "{}".into(),
            MetaElem::Assgt(map) => {
                let inner: Vec<String> = map
                    .iter()
                    .map(|(v, a)| format!("v{v}↦{}", self.render(*a)))
                    .collect();
                format!("{{{}}}", inner.join(", "))
            }
            MetaElem::Apply(f, l) => format!("Apply({}, {})", self.render(f), self.render(l)),
            MetaElem::Neg(a) => format!("Neg({})", self.render(a)),
            MetaElem::Conj(a, b) => format!("Conj({}, {})", self.render(a), self.render(b)),
            MetaElem::Disj(a, b) => format!("Disj({}, {})", self.render(a), self.render(b)),
            MetaElem::Quant(v, b) => format!("Quant({}, {})", self.render(v), self.render(b)),
            MetaElem::IndAsrt(p, b) => {
                format!("IndAsrt({}, {})", self.render(p), self.render(b))
            }
            MetaElem::Rule(h, b) => format!("Rule({}, {})", self.render(h), self.render(b)),
        }
    }
}

impl Domain for MetaStructure {
    fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    fn universe(&self) -> Option<Vec<ElemId>> {
        // materialization is exponential in d; refuse beyond a safe bound
        if self.d <= 9 {
            Some(self.materialize())
        } else {
            None
        }
    }

    fn pool(&self) -> Vec<ElemId> {
        if self.d <= 9 {
            return self.materialize();
        }
        // fixed witness pool: the base world plus a couple of structural
        // elements, identical for native and Sat-side quantification
        let mut out: Vec<ElemId> = (0..self.base.universe_len() as u32)
            .map(|e| self.ur(ElemId(e)))
            .collect();
        out.push(self.intern(MetaElem::Nat(0)));
        out.push(self.intern(MetaElem::Nil));
        out
    }

    fn elem_size(&self, e: ElemId) -> usize {
        self.size(e)
    }

    fn apply_fun(&self, f: &Ident, args: &[ElemId]) -> ElemId {
        if args.contains(&BOTTOM) {
            return BOTTOM;
        }
        let nat = |id: ElemId| match self.elem(id) {
            MetaElem::Nat(n) => Some(n),
            _ => None,
        };
        match f.as_str() {
            names::ZERO => self.intern(MetaElem::Nat(0)),
            names::SUCC => match nat(args[0]) {
                Some(n) => self.intern_bounded(MetaElem::Nat(n + 1)),
                None => BOTTOM,
            },
            names::NIL => self.intern(MetaElem::Nil),
            names::APPEND => {
                if self.is_list(args[0]) {
                    self.intern_bounded(MetaElem::Append(args[0], args[1]))
                } else {
                    BOTTOM
                }
            }
            names::EMPTY => self.intern(MetaElem::EmptyAssgt),
            names::MODIFY => {
                let v = match self.elem(args[1]) {
                    MetaElem::Vbl(i) => i,
                    _ => return BOTTOM,
                };
                let mut map = match self.elem(args[0]) {
                    MetaElem::EmptyAssgt => Vec::new(),
                    MetaElem::Assgt(m) => m,
                    _ => return BOTTOM,
                };
                match map.binary_search_by_key(&v, |(w, _)| *w) {
                    Ok(i) => map[i].1 = args[2],
                    Err(i) => map.insert(i, (v, args[2])),
                }
                self.intern_bounded(MetaElem::Assgt(map))
            }
            names::APPLY => {
                if self.is_name(args[0]) && self.is_list(args[1]) {
                    self.intern_bounded(MetaElem::Apply(args[0], args[1]))
                } else {
                    BOTTOM
                }
            }
            names::NEG => {
                if matches!(self.elem(args[0]), MetaElem::Apply(..)) {
                    self.intern_bounded(MetaElem::Neg(args[0]))
                } else {
                    BOTTOM
                }
            }
            names::CONJ | names::DISJ => {
                if self.is_formula(args[0]) && self.is_formula(args[1]) {
                    let e = if f.as_str() == names::CONJ {
                        MetaElem::Conj(args[0], args[1])
                    } else {
                        MetaElem::Disj(args[0], args[1])
                    };
                    self.intern_bounded(e)
                } else {
                    BOTTOM
                }
            }
            names::QUANT => {
                if matches!(self.elem(args[0]), MetaElem::Vbl(_)) && self.is_formula(args[1]) {
                    self.intern_bounded(MetaElem::Quant(args[0], args[1]))
                } else {
                    BOTTOM
                }
            }
            names::INDASRT => {
                if self.is_list(args[0]) && self.is_formula(args[1]) {
                    self.intern_bounded(MetaElem::IndAsrt(args[0], args[1]))
                } else {
                    BOTTOM
                }
            }
            names::RULE => {
                if matches!(self.elem(args[0]), MetaElem::Apply(..)) && self.is_formula(args[1]) {
                    self.intern_bounded(MetaElem::Rule(args[0], args[1]))
                } else {
                    BOTTOM
                }
            }
            names::VNAME => match nat(args[0]) {
                Some(i) => self.intern_bounded(MetaElem::Vbl(i)),
                None => BOTTOM,
            },
            names::SNAME => match nat(args[0]) {
                Some(j) if (j as usize) < self.symbols.len() => {
                    self.intern_bounded(MetaElem::Sym(j))
                }
                _ => BOTTOM,
            },
            names::XPRED => match (nat(args[0]), nat(args[1])) {
                (Some(k), Some(i))
                    if k as usize <= self.limits.max_xpred_arity
                        && i as usize <= self.limits.max_xpred_index =>
                {
                    self.intern_bounded(MetaElem::XPred(k, i))
                }
                _ => BOTTOM,
            },
            _ => {
                // a base-world function: defined on urelements only
                let mut base_args = Vec::with_capacity(args.len());
                for a in args {
                    match self.elem(*a) {
                        MetaElem::Ur(e) => base_args.push(ElemId(e)),
                        _ => return BOTTOM,
                    }
                }
                if self.base.vocab().function(f).is_none() {
                    return BOTTOM;
                }
                self.ur(self.base.apply_fun(f, &base_args))
            }
        }
    }

    fn invert_fun(&self, f: &Ident, val: ElemId) -> Option<Vec<Vec<ElemId>>> {
        if val == BOTTOM {
            return Some(vec![]);
        }
        let e = self.elem(val);
        let some = |v: Vec<Vec<ElemId>>| Some(v);
        match f.as_str() {
            names::ZERO => some(if e == MetaElem::Nat(0) { vec![vec![]] } else { vec![] }),
            names::NIL => some(if e == MetaElem::Nil { vec![vec![]] } else { vec![] }),
            names::EMPTY => some(if e == MetaElem::EmptyAssgt { vec![vec![]] } else { vec![] }),
            names::SUCC => some(match e {
                MetaElem::Nat(n) if n > 0 => vec![vec![self.intern(MetaElem::Nat(n - 1))]],
                _ => vec![],
            }),
            names::APPEND => some(match e {
                MetaElem::Append(l, u) => vec![vec![l, u]],
                _ => vec![],
            }),
            names::MODIFY => some(match e {
                // one preimage per entry: the map without it. Enough to
                // generate every assignment from the empty one; overwrite
                // preimages are deliberately omitted.
                MetaElem::Assgt(map) => map
                    .iter()
                    .map(|(v, a)| {
                        let rest: Vec<(u32, ElemId)> =
                            map.iter().filter(|(w, _)| w != v).cloned().collect();
                        let t = if rest.is_empty() {
                            self.intern(MetaElem::EmptyAssgt)
                        } else {
                            self.intern(MetaElem::Assgt(rest))
                        };
                        vec![t, self.intern(MetaElem::Vbl(*v)), *a]
                    })
                    .collect(),
                _ => vec![],
            }),
            names::APPLY => some(match e {
                MetaElem::Apply(a, b) => vec![vec![a, b]],
                _ => vec![],
            }),
            names::NEG => some(match e {
                MetaElem::Neg(a) => vec![vec![a]],
                _ => vec![],
            }),
            names::CONJ => some(match e {
                MetaElem::Conj(a, b) => vec![vec![a, b]],
                _ => vec![],
            }),
            names::DISJ => some(match e {
                MetaElem::Disj(a, b) => vec![vec![a, b]],
                _ => vec![],
            }),
            names::QUANT => some(match e {
                MetaElem::Quant(a, b) => vec![vec![a, b]],
                _ => vec![],
            }),
            names::INDASRT => some(match e {
                MetaElem::IndAsrt(a, b) => vec![vec![a, b]],
                _ => vec![],
            }),
            names::RULE => some(match e {
                MetaElem::Rule(a, b) => vec![vec![a, b]],
                _ => vec![],
            }),
            names::VNAME => some(match e {
                MetaElem::Vbl(i) => vec![vec![self.intern(MetaElem::Nat(i))]],
                _ => vec![],
            }),
            names::SNAME => some(match e {
                MetaElem::Sym(j) => vec![vec![self.intern(MetaElem::Nat(j))]],
                _ => vec![],
            }),
            names::XPRED => some(match e {
                MetaElem::XPred(k, i) => {
                    vec![vec![self.intern(MetaElem::Nat(k)), self.intern(MetaElem::Nat(i))]]
                }
                _ => vec![],
            }),
            _ => match e {
                MetaElem::Ur(b) => {
                    let pre = self.base.invert_fun(f, ElemId(b))?;
                    Some(
                        pre.into_iter()
                            .map(|args| args.into_iter().map(|a| self.ur(a)).collect())
                            .collect(),
                    )
                }
                _ => Some(vec![]),
            },
        }
    }

    fn rel_holds(&self, r: &Ident, args: &[ElemId]) -> bool {
        if *r == eq_ident() {
            return args[0] == args[1] && args[0] != BOTTOM;
        }
        match r.as_str() {
            names::VBL => matches!(self.elem(args[0]), MetaElem::Vbl(_)),
            names::ARITY => match (self.elem(args[0]), self.elem(args[1])) {
                // Arity speaks only about the extra predicates; named base
                // symbols are covered by their own Sat clauses.
                (MetaElem::XPred(k, _), MetaElem::Nat(n)) => k == n,
                _ => false,
            },
            names::RENAME_AWAY => self.rename_elem(args[0], args[1]) == Some(args[2]),
            _ => {
                let mut base_args = Vec::with_capacity(args.len());
                for a in args {
                    match self.elem(*a) {
                        MetaElem::Ur(e) => base_args.push(ElemId(e)),
                        _ => return false,
                    }
                }
                self.base.vocab().relation(r).is_some() && self.base.rel_holds(r, &base_args)
            }
        }
    }

    fn rel_enumerate(&self, r: &Ident, pattern: &[Option<ElemId>]) -> Option<Vec<Vec<ElemId>>> {
        if *r == eq_ident() {
            return match (pattern[0], pattern[1]) {
                (Some(a), _) if a != BOTTOM => Some(vec![vec![a, a]]),
                (_, Some(b)) if b != BOTTOM => Some(vec![vec![b, b]]),
                (Some(_), _) | (_, Some(_)) => Some(vec![]),
                (None, None) => self.universe().map(|u| {
                    u.into_iter().filter(|e| *e != BOTTOM).map(|e| vec![e, e]).collect()
                }),
            };
        }
        let full = |rel: &Ident, arity: usize| -> Option<Vec<Vec<ElemId>>> {
            // materialized fallback: filter the full product
            let u = self.universe()?;
            let mut rows = Vec::new();
            let mut idx = vec![0usize; arity];
            'outer: loop {
                let tuple: Vec<ElemId> = idx.iter().map(|i| u[*i]).collect();
                let ok = pattern
                    .iter()
                    .zip(tuple.iter())
                    .all(|(p, a)| p.map_or(true, |p| p == *a));
                if ok && self.rel_holds(rel, &tuple) {
                    rows.push(tuple);
                }
                for k in (0..arity).rev() {
                    idx[k] += 1;
                    if idx[k] < u.len() {
                        continue 'outer;
                    }
                    idx[k] = 0;
                    if k == 0 {
                        break 'outer;
                    }
                }
            }
            Some(rows)
        };
        match r.as_str() {
            names::VBL => match pattern[0] {
                Some(e) => Some(if self.rel_holds(r, &[e]) { vec![vec![e]] } else { vec![] }),
                None => full(r, 1),
            },
            names::ARITY => match pattern[0] {
                Some(e) => {
                    let n = match self.elem(e) {
                        MetaElem::XPred(k, _) => Some(k),
                        _ => None,
                    };
                    let row = n.map(|n| vec![e, self.intern(MetaElem::Nat(n))]);
                    Some(match (row, pattern[1]) {
                        (Some(row), slot) if slot.map_or(true, |s| s == row[1]) => vec![row],
                        _ => vec![],
                    })
                }
                None => full(r, 2),
            },
            names::RENAME_AWAY => match (pattern[0], pattern[1]) {
                (Some(f), Some(p)) => {
                    let row = self.rename_elem(f, p).map(|g| vec![f, p, g]);
                    Some(match (row, pattern[2]) {
                        (Some(row), slot) if slot.map_or(true, |s| s == row[2]) => vec![row],
                        _ => vec![],
                    })
                }
                _ => full(r, 3),
            },
            _ => {
                let decl = self.base.vocab().relation(r)?;
                let base_pat: Vec<Option<ElemId>> = pattern
                    .iter()
                    .map(|p| {
                        p.map(|e| match self.elem(e) {
                            MetaElem::Ur(b) => Some(ElemId(b)),
                            _ => None,
                        })
                    })
                    .map(|p| p.flatten())
                    .collect();
                // a pattern slot bound to a non-urelement matches nothing
                for (orig, mapped) in pattern.iter().zip(base_pat.iter()) {
                    if orig.is_some() && mapped.is_none() {
                        return Some(vec![]);
                    }
                }
                let rows = self.base.rel_enumerate(r, &base_pat)?;
                let _ = decl;
                Some(
                    rows.into_iter()
                        .map(|t| t.into_iter().map(|a| self.ur(a)).collect())
                        .collect(),
                )
            }
        }
    }

    fn bottom(&self) -> Option<ElemId> {
        Some(BOTTOM)
    }

    fn elem_name(&self, e: ElemId) -> String {
        self.render(e)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum QuoteError {
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(Ident),
    #[error("extra predicate supply exhausted: {0}")]
    SupplyExhausted(String),
}

/// Quotation context: assigns variable-name and extra-predicate indices
/// deterministically by first occurrence, so quoting is reproducible and a
/// round trip recovers the original names.
pub struct Quoter<'a> {
    ms: &'a MetaStructure,
    vars: Vec<Ident>,
    preds: Vec<(usize, Ident)>,
}

impl<'a> Quoter<'a> {
    pub fn new(ms: &'a MetaStructure) -> Self {
        Quoter { ms, vars: Vec::new(), preds: Vec::new() }
    }

    fn var_index(&mut self, v: &Ident) -> u32 {
        if let Some(i) = self.vars.iter().position(|w| w == v) {
            return i as u32;
        }
        self.vars.push(v.clone());
        (self.vars.len() - 1) as u32
    }

    fn numeral(&self, n: u32) -> Term {
        let mut t = Term::app(names::ZERO, vec![]);
        for _ in 0..n {
            t = Term::app(names::SUCC, vec![t]);
        }
        t
    }

    fn name_term(&mut self, sym: &Ident, arity: usize) -> Result<Term, QuoteError> {
        // only base-vocabulary symbols (and `=`) quote as named symbols; an
        // extra predicate keeps its XPred identity even when it happens to
        // share a name with a meta symbol (e.g. a head called `S`).
        let named = *sym == eq_ident()
            || self.ms.base.vocab().function(sym).is_some()
            || self.ms.base.vocab().relation(sym).is_some();
        if named {
            if let Some(j) = self.ms.symbols.iter().position(|s| s == sym) {
                return Ok(Term::app(names::SNAME, vec![self.numeral(j as u32)]));
            }
        }
        // extra predicate: identity by first occurrence per arity
        let idx = match self
            .preds
            .iter()
            .filter(|(k, _)| *k == arity)
            .position(|(_, p)| p == sym)
        {
            Some(i) => i,
            None => {
                let i = self.preds.iter().filter(|(k, _)| *k == arity).count();
                if arity > self.ms.limits.max_xpred_arity || i > self.ms.limits.max_xpred_index {
                    return Err(QuoteError::SupplyExhausted(format!(
                        "`{sym}` needs arity {arity} index {i}"
                    )));
                }
                self.preds.push((arity, sym.clone()));
                i
            }
        };
        Ok(Term::app(
            names::XPRED,
            vec![self.numeral(arity as u32), self.numeral(idx as u32)],
        ))
    }

    fn list_term(&self, items: Vec<Term>) -> Term {
        let mut t = Term::app(names::NIL, vec![]);
        for u in items {
            t = Term::app(names::APPEND, vec![t, u]);
        }
        t
    }

    pub fn quote_term(&mut self, t: &Term) -> Result<Term, QuoteError> {
        match t {
            Term::Var(v) => {
                let i = self.var_index(v);
                Ok(Term::app(names::VNAME, vec![self.numeral(i)]))
            }
            Term::App(f, args) => {
                if self.ms.base.vocab().function(f).is_none() {
                    return Err(QuoteError::UnknownSymbol(f.clone()));
                }
                let name = self.name_term(f, args.len())?;
                let args: Result<Vec<Term>, _> =
                    args.iter().map(|a| self.quote_term(a)).collect();
                Ok(Term::app(names::APPLY, vec![name, self.list_term(args?)]))
            }
        }
    }

    fn quote_atom(&mut self, p: &Ident, args: &[Term]) -> Result<Term, QuoteError> {
        let known = *p == eq_ident()
            || self.ms.base.vocab().relation(p).is_some()
            || self.ms.base.vocab().function(p).is_none();
        if !known {
            return Err(QuoteError::UnknownSymbol(p.clone()));
        }
        let name = self.name_term(p, args.len())?;
        let args: Result<Vec<Term>, _> = args.iter().map(|a| self.quote_term(a)).collect();
        Ok(Term::app(names::APPLY, vec![name, self.list_term(args?)]))
    }

    pub fn quote_formula(&mut self, f: &Formula) -> Result<Term, QuoteError> {
        match f {
            Formula::Atom(p, args) => self.quote_atom(p, args),
            Formula::NegAtom(p, args) => {
                let a = self.quote_atom(p, args)?;
                Ok(Term::app(names::NEG, vec![a]))
            }
            Formula::Conj(a, b) => Ok(Term::app(
                names::CONJ,
                vec![self.quote_formula(a)?, self.quote_formula(b)?],
            )),
            Formula::Disj(a, b) => Ok(Term::app(
                names::DISJ,
                vec![self.quote_formula(a)?, self.quote_formula(b)?],
            )),
            Formula::Exists(v, body) => {
                let i = self.var_index(v);
                let vq = Term::app(names::VNAME, vec![self.numeral(i)]);
                Ok(Term::app(names::QUANT, vec![vq, self.quote_formula(body)?]))
            }
            Formula::Let(p, body) => Ok(Term::app(
                names::INDASRT,
                vec![self.quote_program(p)?, self.quote_formula(body)?],
            )),
        }
    }

    pub fn quote_rule(&mut self, r: &Rule) -> Result<Term, QuoteError> {
        let head_args: Vec<Term> = r.head_vars.iter().map(|v| Term::Var(v.clone())).collect();
        let head = self.quote_atom(&r.head, &head_args)?;
        let body = self.quote_formula(&r.body)?;
        Ok(Term::app(names::RULE, vec![head, body]))
    }

    /// Quote as the list ⟨Rule(h₁,b₁), …⟩.
    pub fn quote_program(&mut self, p: &Program) -> Result<Term, QuoteError> {
        let rules: Result<Vec<Term>, _> = p.rules.iter().map(|r| self.quote_rule(r)).collect();
        Ok(self.list_term(rules?))
    }

    /// Quote an assignment of meta elements to object variables, as the
    /// canonical Modify-history over ∅. Values are element ids in `ms`.
    pub fn quote_assignment(&mut self, entries: &[(Ident, ElemId)]) -> ElemId {
        let mut map: Vec<(u32, ElemId)> = entries
            .iter()
            .map(|(v, a)| (self.var_index(v), *a))
            .collect();
        map.sort_by_key(|(v, _)| *v);
        map.dedup_by_key(|(v, _)| *v);
        if map.is_empty() {
            self.ms.intern(MetaElem::EmptyAssgt)
        } else {
            self.ms.intern(MetaElem::Assgt(map))
        }
    }

    fn var_name(&self, i: u32) -> Ident {
        self.vars
            .get(i as usize)
            .cloned()
            .unwrap_or_else(|| Ident::new(&format!("v{i}")))
    }

    fn pred_name(&self, k: u32, i: u32) -> Ident {
        self.preds
            .iter()
            .filter(|(a, _)| *a == k as usize)
            .nth(i as usize)
            .map(|(_, p)| p.clone())
            .unwrap_or_else(|| Ident::new(&format!("X{i}_{k}")))
    }

    pub fn unquote_term(&self, id: ElemId) -> Result<Term, String> {
        match self.ms.elem(id) {
            MetaElem::Vbl(i) => Ok(Term::Var(self.var_name(i))),
            MetaElem::Apply(name, list) => {
                let f = match self.ms.elem(name) {
                    MetaElem::Sym(j) => self.ms.symbols[j as usize].clone(),
                    MetaElem::XPred(k, i) => self.pred_name(k, i),
                    _ => return Err("bad name in Apply".into()),
                };
                let items = self.ms.list_items(list).ok_or("bad argument list")?;
                let args: Result<Vec<Term>, _> =
                    items.iter().map(|a| self.unquote_term(*a)).collect();
                Ok(Term::App(f, args?))
            }
            other => Err(format!("not a term encoding: {other:?}")),
        }
    }

    fn unquote_atom(&self, id: ElemId) -> Result<(Ident, Vec<Term>), String> {
        match self.unquote_term(id)? {
            Term::App(p, args) => Ok((p, args)),
            Term::Var(_) => Err("a bare variable is not an atom".into()),
        }
    }

    pub fn unquote_formula(&self, id: ElemId) -> Result<Formula, String> {
        match self.ms.elem(id) {
            MetaElem::Apply(..) => {
                let (p, args) = self.unquote_atom(id)?;
                Ok(Formula::Atom(p, args))
            }
            MetaElem::Neg(a) => {
                let (p, args) = self.unquote_atom(a)?;
                Ok(Formula::NegAtom(p, args))
            }
            MetaElem::Conj(a, b) => Ok(Formula::Conj(
                Box::new(self.unquote_formula(a)?),
                Box::new(self.unquote_formula(b)?),
            )),
            MetaElem::Disj(a, b) => Ok(Formula::Disj(
                Box::new(self.unquote_formula(a)?),
                Box::new(self.unquote_formula(b)?),
            )),
            MetaElem::Quant(v, body) => {
                let v = match self.ms.elem(v) {
                    MetaElem::Vbl(i) => self.var_name(i),
                    _ => return Err("bad quantified variable".into()),
                };
                Ok(Formula::Exists(v, Box::new(self.unquote_formula(body)?)))
            }
            MetaElem::IndAsrt(p, body) => {
                let rules = self.ms.list_items(p).ok_or("bad rule list")?;
                let rules: Result<Vec<Rule>, _> =
                    rules.iter().map(|r| self.unquote_rule(*r)).collect();
                Ok(Formula::Let(
                    Program { rules: rules? },
                    Box::new(self.unquote_formula(body)?),
                ))
            }
            other => Err(format!("not a formula encoding: {other:?}")),
        }
    }

    pub fn unquote_rule(&self, id: ElemId) -> Result<Rule, String> {
        match self.ms.elem(id) {
            MetaElem::Rule(h, b) => {
                let (head, args) = self.unquote_atom(h)?;
                let head_vars: Result<Vec<Ident>, String> = args
                    .into_iter()
                    .map(|a| match a {
                        Term::Var(v) => Ok(v),
                        _ => Err("rule head argument is not a variable".into()),
                    })
                    .collect();
                Ok(Rule { head, head_vars: head_vars?, body: self.unquote_formula(b)? })
            }
            other => Err(format!("not a rule encoding: {other:?}")),
        }
    }
}

/// Evaluate a closed quotation term; Bottom means the bound is too small.
pub fn eval_quote(ms: &MetaStructure, t: &Term) -> ElemId {
    crate::structure::eval_term(t, &crate::structure::Assignment::empty(), ms)
        .expect("quotations are closed")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluator::{evaluate, lfp, Strategy};
    use crate::parser::{parse_formula_unchecked, parse_program, parse_structure};
    use crate::structure::Assignment;

    fn base() -> Structure {
        parse_structure(
            "universe a b c\nfun c0/0 -> a\nfun f/1: a -> b, b -> c, c -> c\nrel Edge/2 negatable: (a,b) (b,c)\n",
        )
        .unwrap()
        .1
    }

    fn ms(d: usize) -> MetaStructure {
        MetaStructure::new(&base(), d, MetaLimits::default()).unwrap()
    }

    #[test]
    fn nat_definition_holds_of_exactly_the_naturals() {
        let m = ms(6);
        let p = parse_program("N(z) <- (z = zero() | exists w. (z = S(w) & N(w)))").unwrap();
        let (tables, _) = lfp(&p, &Assignment::empty(), &m, Strategy::SemiNaive).unwrap();
        let rows = tables.rows(&Ident::new("N")).unwrap();
        let expected: BTreeSet<Vec<ElemId>> =
            (0..6).map(|n| vec![m.intern(MetaElem::Nat(n))]).collect();
        assert_eq!(*rows, expected);
    }

    #[test]
    fn append_overflow_is_bottom() {
        let m = ms(5);
        let nil = m.intern(MetaElem::Nil);
        let n0 = m.nat(0);
        let l1 = m.apply_fun(&Ident::new(names::APPEND), &[nil, n0]); // size 3
        assert_ne!(l1, BOTTOM);
        let l2 = m.apply_fun(&Ident::new(names::APPEND), &[l1, n0]); // size 5
        assert_ne!(l2, BOTTOM);
        let l3 = m.apply_fun(&Ident::new(names::APPEND), &[l2, n0]); // size 7 > 5
        assert_eq!(l3, BOTTOM);
        // Bottom is absorbing
        assert_eq!(m.apply_fun(&Ident::new(names::APPEND), &[l3, n0]), BOTTOM);
    }

    #[test]
    fn arity_relation() {
        let m = ms(8);
        let x20 = m.intern(MetaElem::XPred(2, 0));
        let arity = Ident::new(names::ARITY);
        assert!(m.rel_holds(&arity, &[x20, m.nat(2)]));
        assert!(!m.rel_holds(&arity, &[x20, m.nat(3)]));
        // named symbols fall outside Arity; only extra predicates carry it
        let sym_f = m.intern(MetaElem::Sym(1));
        assert!(!m.rel_holds(&arity, &[sym_f, m.nat(1)]));
    }

    #[test]
    fn modify_histories_canonicalize() {
        let m = ms(12);
        let modify = Ident::new(names::MODIFY);
        let empty = m.intern(MetaElem::EmptyAssgt);
        let x = m.intern(MetaElem::Vbl(0));
        let y = m.intern(MetaElem::Vbl(1));
        let a = m.ur(ElemId(0));
        let b = m.ur(ElemId(1));
        // overwrite: Modify(Modify(∅,x,a),x,b) = Modify(∅,x,b)
        let s1 = m.apply_fun(&modify, &[empty, x, a]);
        let s2 = m.apply_fun(&modify, &[s1, x, b]);
        let s3 = m.apply_fun(&modify, &[empty, x, b]);
        assert_eq!(s2, s3);
        // order irrelevance: x then y = y then x
        let t1 = m.apply_fun(&modify, &[m.apply_fun(&modify, &[empty, x, a]), y, b]);
        let t2 = m.apply_fun(&modify, &[m.apply_fun(&modify, &[empty, y, b]), x, a]);
        assert_eq!(t1, t2);
        assert_ne!(t1, BOTTOM);
    }

    #[test]
    fn modify_ill_typed_is_bottom() {
        let m = ms(8);
        let modify = Ident::new(names::MODIFY);
        let nil = m.intern(MetaElem::Nil);
        let x = m.intern(MetaElem::Vbl(0));
        let a = m.ur(ElemId(0));
        assert_eq!(m.apply_fun(&modify, &[nil, x, a]), BOTTOM);
        assert_eq!(m.apply_fun(&modify, &[m.intern(MetaElem::EmptyAssgt), a, a]), BOTTOM);
    }

    #[test]
    fn quote_round_trips() {
        let m = ms(256);
        let cases = [
            "exists x. Edge(c0(), x)",
            "(Edge(x, y) & !(x = y))",
            "let R(u) <- (u = c0() | exists v. (R(v) & Edge(v, u))) then R(f(c0()))",
            "!(f(f(x)) = c0())",
            "let R(x) <- Edge(x, x); Q(x, y) <- (R(x) & R(y)) then exists u. Q(u, u)",
        ];
        for c in cases {
            let f = parse_formula_unchecked(c).unwrap();
            let mut q = Quoter::new(&m);
            let t = q.quote_formula(&f).unwrap();
            let id = eval_quote(&m, &t);
            assert_ne!(id, BOTTOM, "quote of `{c}` does not fit");
            let back = q.unquote_formula(id).unwrap();
            assert_eq!(f, back, "round trip failed for `{c}`");
        }
    }

    #[test]
    fn quote_injective_on_distinct_formulas() {
        let m = ms(64);
        let texts = [
            "x = y",
            "y = x",
            "Edge(x, y)",
            "!Edge(x, y)",
            "(x = y & Edge(x, y))",
            "(Edge(x, y) & x = y)",
            "exists x. Edge(x, x)",
            "exists y. Edge(y, y)",
        ];
        // one shared quotation context: variable indices are fixed across
        // formulas, so distinct formulas get distinct encodings
        let mut q = Quoter::new(&m);
        let mut seen = Vec::new();
        for t in texts {
            let f = parse_formula_unchecked(t).unwrap();
            let id = eval_quote(&m, &q.quote_formula(&f).unwrap());
            assert_ne!(id, BOTTOM);
            seen.push(id);
        }
        let distinct: BTreeSet<ElemId> = seen.iter().copied().collect();
        assert_eq!(distinct.len(), seen.len());
    }

    #[test]
    fn vbl_of_bottom_is_false() {
        let m = ms(6);
        assert!(!m.rel_holds(&Ident::new(names::VBL), &[BOTTOM]));
        assert!(!m.rel_holds(&eq_ident(), &[BOTTOM, BOTTOM]));
    }

    #[test]
    fn rename_away_no_binder_is_identity() {
        let m = ms(64);
        let f = parse_formula_unchecked("Edge(x, y)").unwrap();
        let p = parse_program("R(x) <- Edge(x, x)").unwrap();
        let mut q = Quoter::new(&m);
        let fid = eval_quote(&m, &q.quote_formula(&f).unwrap());
        let pid = eval_quote(&m, &q.quote_program(&p).unwrap());
        assert_eq!(m.rename_elem(fid, pid), Some(fid));
        assert!(m.rel_holds(&Ident::new(names::RENAME_AWAY), &[fid, pid, fid]));
    }

    #[test]
    fn rename_away_moves_clashing_head() {
        let m = ms(64);
        // φ binds R (unary); Π is also headed by R (unary) — the same
        // quoter gives both the identity XPred(1,0), forcing a rename to
        // XPred(1,1).
        let f = parse_formula_unchecked("let R(x) <- Edge(x, x) then R(y)").unwrap();
        let p = parse_program("R(x) <- Edge(x, x)").unwrap();
        let mut q = Quoter::new(&m);
        let fid = eval_quote(&m, &q.quote_formula(&f).unwrap());
        let pid = eval_quote(&m, &q.quote_program(&p).unwrap());
        let out = m.rename_elem(fid, pid).unwrap();
        assert_ne!(out, fid);
        let mut preds = BTreeSet::new();
        m.collect_xpreds(out, &mut preds);
        assert!(preds.contains(&(1, 1)));
        assert!(!preds.contains(&(1, 0)));
        // semantic equivalence of the renamed formula
        let st = base();
        let back = q.unquote_formula(out).unwrap();
        let orig = q.unquote_formula(fid).unwrap();
        let b = st.elem(&Ident::new("b")).unwrap();
        let s = Assignment::empty().modify(&Ident::new("y"), b);
        assert_eq!(
            evaluate(&orig, &s, &st).unwrap(),
            evaluate(&back, &s, &st).unwrap()
        );
    }

    #[test]
    fn materialize_small_universe() {
        let m = ms(5);
        let u = m.materialize();
        assert!(u.contains(&BOTTOM));
        // spot checks: the three urelements, Nat 0..4, Nil, ∅
        assert!(u.len() > 10);
        for id in &u {
            if *id != BOTTOM {
                assert!(m.size(*id) <= 5, "{} too big", m.render(*id));
            }
        }
        // every Append in the universe has a list first argument
        for id in &u {
            if let MetaElem::Append(l, _) = m.elem(*id) {
                assert!(m.is_list(l));
            }
        }
        // monotone stability: the same universe is a prefix of depth 6's
        let m6 = ms(6);
        let u6 = m6.materialize();
        assert!(u6.len() > u.len());
    }

    #[test]
    fn native_evaluation_over_lazy_domain() {
        let m = ms(40);
        let f = parse_formula_unchecked("exists x. Edge(c0(), x)").unwrap();
        assert!(evaluate(&f, &Assignment::empty(), &m).unwrap());
        let g = parse_formula_unchecked("exists x. Edge(x, c0())").unwrap();
        assert!(!evaluate(&g, &Assignment::empty(), &m).unwrap());
    }
}
