//! Demand-driven tabled evaluation, for domains whose universe cannot be
//! materialized. Queries are (predicate, pattern) pairs; each is answered by
//! running its defining rule with the pattern's bindings, consulting the
//! answer tables of whatever sub-queries that raises. Everything is monotone,
//! so re-running the registered queries in rounds reaches a fixed point, at
//! which every registered query's table is complete relative to the witness
//! pool.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::rc::Rc;

use crate::evaluator::{solve, EvalError, Resolver, Rows, Solutions};
use crate::structure::{Assignment, Domain, ElemId};
use crate::syntax::{free_vars, program_free_vars, Formula, Ident, Program};

type QueryKey = (Ident, Vec<Option<ElemId>>);
type ScopeId = usize;

/// One LET scope, persistent across evaluation rounds. Identified by the
/// program's AST node and the ambient bindings it closed over.
struct ScopeData {
    parent: Option<ScopeId>,
    program: Rc<Program>,
    ambient: Assignment,
    answers: BTreeMap<Ident, Rows>,
    queries: HashSet<QueryKey>,
}

#[derive(Clone, Copy, Debug)]
pub struct DemandStats {
    /// global rounds until no query produced a new answer
    pub rounds: usize,
    pub queries: usize,
    pub answers: usize,
}

struct Engine<'a> {
    x: &'a dyn Domain,
    scopes: Vec<ScopeData>,
    scope_index: HashMap<(usize, Option<ScopeId>, Assignment), ScopeId>,
    stack: Vec<ScopeId>,
    pending: Vec<(ScopeId, QueryKey)>,
    changed: bool,
}

impl<'a> Engine<'a> {
    fn new(x: &'a dyn Domain) -> Self {
        Engine {
            x,
            scopes: Vec::new(),
            scope_index: HashMap::new(),
            stack: Vec::new(),
            pending: Vec::new(),
            changed: false,
        }
    }

    fn scope_of(&self, p: &Ident) -> Option<ScopeId> {
        self.stack
            .iter()
            .rev()
            .copied()
            .find(|&sid| self.scopes[sid].program.rule_for(p).is_some())
    }

    fn chain(&self, sid: ScopeId) -> Vec<ScopeId> {
        let mut out = Vec::new();
        let mut cur = Some(sid);
        while let Some(s) = cur {
            out.push(s);
            cur = self.scopes[s].parent;
        }
        out.reverse();
        out
    }

    /// Re-evaluate one registered query against the current tables, merging
    /// any new answers.
    fn run_query(&mut self, i: usize) -> Result<(), EvalError> {
        let (sid, (pred, pattern)) = self.pending[i].clone();
        let program = self.scopes[sid].program.clone();
        let rule = program.rule_for(&pred).expect("registered query has a rule");
        let mut bound = self.scopes[sid].ambient.clone();
        for v in &rule.head_vars {
            bound = bound.without(v);
        }
        for (v, slot) in rule.head_vars.iter().zip(pattern.iter()) {
            if let Some(a) = slot {
                bound = bound.modify(v, *a);
            }
        }
        let chain = self.chain(sid);
        let saved = std::mem::replace(&mut self.stack, chain);
        let sols = solve(&rule.body, &bound, self);
        self.stack = saved;
        let sols = sols?;
        self.merge_answers(sid, &pred, &rule.head_vars, sols);
        Ok(())
    }

    fn merge_answers(
        &mut self,
        sid: ScopeId,
        pred: &Ident,
        head_vars: &[Ident],
        sols: Solutions,
    ) {
        let pool = self.x.pool();
        let rows = self.scopes[sid].answers.entry(pred.clone()).or_default();
        for s in sols {
            let mut tuple = Vec::with_capacity(head_vars.len());
            let mut open = Vec::new();
            for (i, v) in head_vars.iter().enumerate() {
                match s.lookup(v) {
                    Some(a) => tuple.push(a),
                    None => {
                        tuple.push(ElemId(0));
                        open.push(i);
                    }
                }
            }
            // head variables the body leaves unconstrained range over the pool
            let mut partials = vec![tuple];
            for &i in &open {
                let mut next = Vec::with_capacity(partials.len() * pool.len());
                for t in &partials {
                    for a in &pool {
                        let mut t2 = t.clone();
                        t2[i] = *a;
                        next.push(t2);
                    }
                }
                partials = next;
            }
            for t in partials {
                if rows.insert(t) {
                    self.changed = true;
                }
            }
        }
    }
}

impl Resolver for Engine<'_> {
    fn domain(&self) -> &dyn Domain {
        self.x
    }

    fn is_derived(&self, p: &Ident) -> bool {
        self.scope_of(p).is_some()
    }

    fn derived_answers(
        &mut self,
        _occ: usize,
        p: &Ident,
        pattern: &[Option<ElemId>],
    ) -> Result<Vec<Vec<ElemId>>, EvalError> {
        let sid = self
            .scope_of(p)
            .ok_or_else(|| EvalError::UnknownRelation(p.clone()))?;
        let key = (p.clone(), pattern.to_vec());
        if self.scopes[sid].queries.insert(key.clone()) {
            self.pending.push((sid, key));
            self.changed = true;
        }
        Ok(self.scopes[sid]
            .answers
            .get(p)
            .map(|rows| {
                rows.iter()
                    .filter(|t| {
                        pattern
                            .iter()
                            .zip(t.iter())
                            .all(|(s, a)| s.map_or(true, |s| s == *a))
                    })
                    .cloned()
                    .collect()
            })
            .unwrap_or_default())
    }

    fn enter_let(&mut self, p: &Program, bound: &Assignment) -> Result<(), EvalError> {
        let ptr = p as *const Program as usize;
        let parent = self.stack.last().copied();
        let ambient = bound.restrict(program_free_vars(p).iter());
        let key = (ptr, parent, ambient.clone());
        let sid = match self.scope_index.get(&key) {
            Some(&sid) => sid,
            None => {
                let sid = self.scopes.len();
                self.scopes.push(ScopeData {
                    parent,
                    program: Rc::new(p.clone()),
                    ambient,
                    answers: BTreeMap::new(),
                    queries: HashSet::new(),
                });
                self.scope_index.insert(key, sid);
                sid
            }
        };
        self.stack.push(sid);
        Ok(())
    }

    fn exit_let(&mut self) {
        self.stack.pop();
    }

    fn ground_compound_args(&self) -> bool {
        true
    }
}

/// Truth of `f` in `x` under `s` by demand-driven tabling. Quantifiers fall
/// back to the domain's witness pool exactly as in the saturation engine, so
/// the two agree wherever both apply.
pub fn evaluate_demand(f: &Formula, s: &Assignment, x: &dyn Domain) -> Result<bool, EvalError> {
    evaluate_demand_with_stats(f, s, x).map(|(v, _)| v)
}

pub fn evaluate_demand_with_stats(
    f: &Formula,
    s: &Assignment,
    x: &dyn Domain,
) -> Result<(bool, DemandStats), EvalError> {
    for v in free_vars(f) {
        if !s.in_dom(&v) {
            return Err(EvalError::UnboundVariable(v));
        }
    }
    let mut eng = Engine::new(x);
    let mut rounds = 0;
    loop {
        rounds += 1;
        eng.changed = false;
        // process children before the parents that registered them, so
        // answers propagate several levels per round …
        let known = eng.pending.len();
        let mut i = known;
        while i > 0 {
            i -= 1;
            eng.run_query(i)?;
        }
        // … then anything newly registered, in order of appearance
        let mut j = known;
        while j < eng.pending.len() {
            eng.run_query(j)?;
            j += 1;
        }
        eng.stack.clear();
        let verdict = !solve(f, s, &mut eng)?.is_empty();
        if !eng.changed {
            let answers = eng
                .scopes
                .iter()
                .map(|sc| sc.answers.values().map(|r| r.len()).sum::<usize>())
                .sum();
            return Ok((verdict, DemandStats { rounds, queries: eng.pending.len(), answers }));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluator::evaluate;
    use crate::meta::{names, MetaLimits, MetaStructure, Quoter};
    use crate::parser::{parse_formula_unchecked, parse_program, parse_structure};
    use crate::satgen::{generate_sat_program, subprogram};
    use crate::structure::Structure;
    use crate::syntax::Term;

    fn base() -> Structure {
        parse_structure(
            "universe a b c\nfun c0/0 -> a\nfun f/1: a -> b, b -> c, c -> c\nrel Edge/2 negatable: (a,b) (b,c)\n",
        )
        .unwrap()
        .1
    }

    fn let_goal(p: &Program, body: Formula) -> Formula {
        Formula::Let(p.clone(), Box::new(body))
    }

    #[test]
    fn agrees_with_saturation_on_materialized_domain() {
        let b = base();
        let m = MetaStructure::new(&b, 6, MetaLimits::default()).unwrap();
        let p = generate_sat_program(b.vocab(), MetaLimits::default()).unwrap();
        for (head, formula) in [
            ("N", "N(S(S(zero())))"),
            ("N", "N(nil())"),
            ("HasLength", "HasLength(append(nil(), zero()), S(zero()))"),
            ("Cat", "Cat(nil(), append(nil(), zero()), append(nil(), zero()))"),
            ("Term", "Term(apply(sname(zero()), nil()))"),
        ] {
            let sub = subprogram(&p, &[head]);
            let goal = let_goal(&sub, parse_formula_unchecked(formula).unwrap());
            let native = evaluate(&goal, &Assignment::empty(), &m).unwrap();
            let demand = evaluate_demand(&goal, &Assignment::empty(), &m).unwrap();
            assert_eq!(native, demand, "{formula}");
        }
    }

    #[test]
    fn hsplus_recovers_head_symbols_of_a_program_quote() {
        let b = base();
        let m = MetaStructure::new(&b, 200, MetaLimits::default()).unwrap();
        let sat = generate_sat_program(b.vocab(), MetaLimits::default()).unwrap();
        let two_rules = parse_program(
            "T(x, y) <- (Edge(x, y) | exists z. (Edge(x, z) & T(z, y))); U(x) <- T(x, x)",
        )
        .unwrap();
        let mut q = Quoter::new(&m);
        let quoted = q.quote_program(&two_rules).unwrap();
        // T and U quote as the first extra predicates of arities 2 and 1
        let xp = |k: u32, i: u32| {
            Term::app(
                names::XPRED,
                vec![crate::satgen::numeral(k as usize), crate::satgen::numeral(i as usize)],
            )
        };
        let expected = Term::app(
            names::APPEND,
            vec![
                Term::app(names::APPEND, vec![Term::app(names::NIL, vec![]), xp(2, 0)]),
                xp(1, 0),
            ],
        );
        let sub = subprogram(&sat, &["HSPlus"]);
        let goal = let_goal(
            &sub,
            Formula::Atom(Ident::new("HSPlus"), vec![quoted.clone(), expected]),
        );
        assert!(evaluate_demand(&goal, &Assignment::empty(), &m).unwrap());
        // and only that list: a wrong arity does not match
        let wrong = Term::app(
            names::APPEND,
            vec![
                Term::app(names::APPEND, vec![Term::app(names::NIL, vec![]), xp(2, 0)]),
                xp(2, 1),
            ],
        );
        let goal =
            let_goal(&sub, Formula::Atom(Ident::new("HSPlus"), vec![quoted, wrong]));
        assert!(!evaluate_demand(&goal, &Assignment::empty(), &m).unwrap());
    }

    #[test]
    fn val_transports_a_ground_term() {
        let b = base();
        let m = MetaStructure::new(&b, 120, MetaLimits::default()).unwrap();
        let sat = generate_sat_program(b.vocab(), MetaLimits::default()).unwrap();
        let mut q = Quoter::new(&m);
        let quoted = q
            .quote_term(&Term::app("f", vec![Term::app("f", vec![Term::app("c0", vec![])])]))
            .unwrap();
        let sub = subprogram(&sat, &["Val"]);
        let goal = let_goal(
            &sub,
            Formula::Exists(
                Ident::new("a"),
                Box::new(Formula::Conj(
                    Box::new(Formula::Atom(
                        Ident::new("Val"),
                        vec![quoted, Term::app(names::EMPTY, vec![]), Term::var("a")],
                    )),
                    Box::new(Formula::Atom(
                        crate::syntax::eq_ident(),
                        vec![
                            Term::var("a"),
                            Term::app("f", vec![Term::app("f", vec![Term::app("c0", vec![])])]),
                        ],
                    )),
                )),
            ),
        );
        assert!(evaluate_demand(&goal, &Assignment::empty(), &m).unwrap());
    }

    #[test]
    fn sat_smoke_on_simple_sentences() {
        let b = base();
        let m = MetaStructure::new(&b, 150, MetaLimits::default()).unwrap();
        let sat = generate_sat_program(b.vocab(), MetaLimits::default()).unwrap();
        for (text, expected) in [
            ("exists x. x = x", true),
            ("!(c0() = c0())", false),
            ("Edge(c0(), f(c0()))", true),
            ("Edge(f(c0()), c0())", false),
        ] {
            let phi = parse_formula_unchecked(text).unwrap();
            let mut q = Quoter::new(&m);
            let quoted = q.quote_formula(&phi).unwrap();
            let goal = let_goal(
                &sat,
                Formula::Atom(
                    Ident::new("Sat"),
                    vec![
                        quoted,
                        Term::app(names::NIL, vec![]),
                        Term::app(names::EMPTY, vec![]),
                    ],
                ),
            );
            let got = evaluate_demand(&goal, &Assignment::empty(), &m).unwrap();
            assert_eq!(got, expected, "{text}");
        }
    }
}
