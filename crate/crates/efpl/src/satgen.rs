//! Machine generation of the truth-predicate program Π_sat over the meta
//! vocabulary: list and assignment arithmetic, term evaluation, and the five
//! Sat clauses, compiled into one simultaneous program with distinct heads.

use crate::meta::{self, names, MetaLimits};
use crate::syntax::{
    eq_ident, free_vars, Formula, Ident, Polarity, Program, Rule, Term, Vocabulary,
};
use std::collections::BTreeSet;

pub const HEADS: &[&str] = &[
    "N", "List", "HasLength", "Index", "Cat", "Assgt", "InDom", "Lookup", "Term", "Val",
    "OneOneList", "HS", "HSPlus", "ValPlus", "Change", "Sat",
];

fn v(name: &str) -> Term {
    Term::var(name)
}

fn eq(a: Term, b: Term) -> Formula {
    Formula::Atom(eq_ident(), vec![a, b])
}

fn atom(p: &str, args: Vec<Term>) -> Formula {
    Formula::Atom(Ident::new(p), args)
}

fn conj(mut fs: Vec<Formula>) -> Formula {
    let last = fs.pop().expect("conj of nothing");
    fs.into_iter()
        .rev()
        .fold(last, |acc, f| Formula::Conj(Box::new(f), Box::new(acc)))
}

fn disj(mut fs: Vec<Formula>) -> Formula {
    let last = fs.pop().expect("disj of nothing");
    fs.into_iter()
        .rev()
        .fold(last, |acc, f| Formula::Disj(Box::new(f), Box::new(acc)))
}

fn exists(vars: &[&str], body: Formula) -> Formula {
    vars.iter()
        .rev()
        .fold(body, |acc, x| Formula::Exists(Ident::new(x), Box::new(acc)))
}

fn exists_owned(vars: &[String], body: Formula) -> Formula {
    vars.iter()
        .rev()
        .fold(body, |acc, x| Formula::Exists(Ident::new(x), Box::new(acc)))
}

/// The numeral n̂ = S(S(...S(0)...)).
pub fn numeral(n: usize) -> Term {
    let mut t = Term::app(names::ZERO, vec![]);
    for _ in 0..n {
        t = Term::app(names::SUCC, vec![t]);
    }
    t
}

/// The name term for symbol index j: sname(ĵ).
fn name_term(j: usize) -> Term {
    Term::app(names::SNAME, vec![numeral(j)])
}

/// Fresh-name supply for auxiliary heads and internal variables. Auxiliary
/// heads are `Aux0, Aux1, …`, skipping anything already taken.
pub struct Gensym {
    counter: usize,
    taken: BTreeSet<Ident>,
    pub rules: Vec<Rule>,
}

impl Gensym {
    pub fn new(taken: BTreeSet<Ident>) -> Self {
        Gensym { counter: 0, taken, rules: Vec::new() }
    }

    fn next(&mut self) -> usize {
        let c = self.counter;
        self.counter += 1;
        c
    }

    fn fresh_head(&mut self) -> Ident {
        loop {
            let name = Ident::new(&format!("Aux{}", self.next()));
            if self.taken.insert(name.clone()) {
                return name;
            }
        }
    }
}

/// Lemma 1: (∀ var < bound) body becomes K(bound, p̄) where
/// K(x, p̄) ← x = 0 ∨ ∃ var (x = S(var) ∧ K(var, p̄) ∧ body), with p̄ the
/// free variables of the body other than var. The auxiliary rule is pushed
/// onto the supply; the use formula is returned.
pub fn expand_bounded_forall(gs: &mut Gensym, bound: Term, var: &str, body: Formula) -> Formula {
    let head = gs.fresh_head();
    let x = format!("x{}", gs.next());
    let params: Vec<Ident> = free_vars(&body)
        .into_iter()
        .filter(|p| p.as_str() != var)
        .collect();
    debug_assert!(params.iter().all(|p| p.as_str() != x));
    let mut head_vars = vec![Ident::new(&x)];
    head_vars.extend(params.iter().cloned());
    let param_terms: Vec<Term> = params.iter().map(|p| Term::Var(p.clone())).collect();
    let mut rec_args = vec![v(var)];
    rec_args.extend(param_terms.iter().cloned());
    let rule_body = disj(vec![
        eq(v(&x), numeral(0)),
        exists(
            &[var],
            conj(vec![
                eq(v(&x), Term::app(names::SUCC, vec![v(var)])),
                Formula::Atom(head.clone(), rec_args),
                body,
            ]),
        ),
    ]);
    gs.rules.push(Rule { head: head.clone(), head_vars, body: rule_body });
    let mut use_args = vec![bound];
    use_args.extend(param_terms);
    Formula::Atom(head, use_args)
}

/// Corollary 2: (∀ var ∈ list) body becomes
/// ∃n (list hasLength n ∧ (∀i<n) ∃ var ((list)_i = var ∧ body)).
pub fn expand_forall_in_list(gs: &mut Gensym, list: Term, var: &str, body: Formula) -> Formula {
    let c = gs.next();
    let n = format!("n{c}");
    let i = format!("i{c}");
    let step = exists(
        &[var],
        conj(vec![
            Formula::Atom(Ident::new("Index"), vec![list.clone(), v(&i), v(var)]),
            body,
        ]),
    );
    let inner = expand_bounded_forall(gs, v(&n), &i, step);
    exists(
        &[&n],
        conj(vec![
            Formula::Atom(Ident::new("HasLength"), vec![list, v(&n)]),
            inner,
        ]),
    )
}

/// The pointwise lifting R⁺ of a relation R(u, p̄, w) to equal-length lists,
/// with the parameters p̄ fixed (the "s inserted into both" reading):
///   R⁺(Nil, p̄, Nil); R⁺(Append(x,u), p̄, Append(y,w)) ← R⁺(x,p̄,y) ∧ R(u,p̄,w).
pub fn lift_plus(rel: &str, plus_name: &str, params: &[&str]) -> Vec<Rule> {
    let l = "l";
    let m = "m";
    let param_terms: Vec<Term> = params.iter().map(|p| v(p)).collect();
    let mk_args = |a: Term, b: Term| {
        let mut args = vec![a];
        args.extend(param_terms.iter().cloned());
        args.push(b);
        args
    };
    let body = disj(vec![
        conj(vec![
            eq(v(l), Term::app(names::NIL, vec![])),
            eq(v(m), Term::app(names::NIL, vec![])),
        ]),
        exists(
            &["x", "u", "y", "w"],
            conj(vec![
                eq(v(l), Term::app(names::APPEND, vec![v("x"), v("u")])),
                eq(v(m), Term::app(names::APPEND, vec![v("y"), v("w")])),
                Formula::Atom(Ident::new(plus_name), mk_args(v("x"), v("y"))),
                Formula::Atom(Ident::new(rel), mk_args(v("u"), v("w"))),
            ]),
        ),
    ]);
    let mut head_vars = vec![Ident::new(l)];
    head_vars.extend(params.iter().map(|p| Ident::new(p)));
    head_vars.push(Ident::new(m));
    vec![Rule { head: Ident::new(plus_name), head_vars, body }]
}

fn rule(head: &str, vars: &[&str], body: Formula) -> Rule {
    Rule {
        head: Ident::new(head),
        head_vars: vars.iter().map(|s| Ident::new(s)).collect(),
        body,
    }
}

/// Generate Π_sat for a base vocabulary. The truncation limits do not affect
/// generation (the program is depth-independent); the parameter records the
/// pairing with the meta structure the program is meant to run in.
pub fn generate_sat_program(base: &Vocabulary, _limits: MetaLimits) -> Result<Program, String> {
    let symbols = meta::symbol_table(base);
    // Heads are extra predicates of the meta world; they must not shadow
    // anything nameable.
    let mut taken: BTreeSet<Ident> = symbols.iter().cloned().collect();
    for h in HEADS {
        if !taken.insert(Ident::new(h)) {
            return Err(format!("base vocabulary symbol `{h}` collides with a generated head"));
        }
    }
    let mut gs = Gensym::new(taken);
    let mut rules: Vec<Rule> = Vec::new();
    let flush = |rules: &mut Vec<Rule>, gs: &mut Gensym, r: Rule| {
        rules.push(r);
        rules.append(&mut gs.rules);
    };

    let zero = || Term::app(names::ZERO, vec![]);
    let s_of = |t: Term| Term::app(names::SUCC, vec![t]);
    let nil = || Term::app(names::NIL, vec![]);
    let append = |a: Term, b: Term| Term::app(names::APPEND, vec![a, b]);
    let modify = |a: Term, b: Term, c: Term| Term::app(names::MODIFY, vec![a, b, c]);
    let apply = |a: Term, b: Term| Term::app(names::APPLY, vec![a, b]);

    // N(z) ;← z = 0 ; N(z) ;← ∃y (N(y) ∧ z = S(y))
    flush(
        &mut rules,
        &mut gs,
        rule(
            "N",
            &["z"],
            disj(vec![
                eq(v("z"), zero()),
                exists(&["y"], conj(vec![atom("N", vec![v("y")]), eq(v("z"), s_of(v("y")))])),
            ]),
        ),
    );

    // List(l) ;← l = Nil ; List(l) ;← ∃x,a (List(x) ∧ l = Append(x,a))
    flush(
        &mut rules,
        &mut gs,
        rule(
            "List",
            &["l"],
            disj(vec![
                eq(v("l"), nil()),
                exists(
                    &["x", "a"],
                    conj(vec![atom("List", vec![v("x")]), eq(v("l"), append(v("x"), v("a")))]),
                ),
            ]),
        ),
    );

    // l hasLength n
    flush(
        &mut rules,
        &mut gs,
        rule(
            "HasLength",
            &["l", "n"],
            disj(vec![
                conj(vec![eq(v("l"), nil()), eq(v("n"), zero())]),
                exists(
                    &["x", "a", "m"],
                    conj(vec![
                        eq(v("l"), append(v("x"), v("a"))),
                        atom("HasLength", vec![v("x"), v("m")]),
                        eq(v("n"), s_of(v("m"))),
                    ]),
                ),
            ]),
        ),
    );

    // (l)_i = a
    flush(
        &mut rules,
        &mut gs,
        rule(
            "Index",
            &["l", "i", "a"],
            disj(vec![
                exists(
                    &["x"],
                    conj(vec![
                        atom("HasLength", vec![v("x"), v("i")]),
                        eq(v("l"), append(v("x"), v("a"))),
                    ]),
                ),
                exists(
                    &["x", "b"],
                    conj(vec![
                        atom("Index", vec![v("x"), v("i"), v("a")]),
                        eq(v("l"), append(v("x"), v("b"))),
                    ]),
                ),
            ]),
        ),
    );

    // Cat(a,b,l): l is a followed by b
    flush(
        &mut rules,
        &mut gs,
        rule(
            "Cat",
            &["a", "b", "l"],
            disj(vec![
                conj(vec![eq(v("b"), nil()), eq(v("l"), v("a"))]),
                exists(
                    &["c", "x", "m"],
                    conj(vec![
                        atom("Cat", vec![v("a"), v("c"), v("m")]),
                        eq(v("b"), append(v("c"), v("x"))),
                        eq(v("l"), append(v("m"), v("x"))),
                    ]),
                ),
            ]),
        ),
    );

    // Assgt(s) ;← s = ∅ ; Assgt(s) ;← ∃t,v,a (Assgt(t) ∧ Vbl(v) ∧ s = Modify(t,v,a))
    flush(
        &mut rules,
        &mut gs,
        rule(
            "Assgt",
            &["s"],
            disj(vec![
                eq(v("s"), Term::app(names::EMPTY, vec![])),
                exists(
                    &["t", "v", "a"],
                    conj(vec![
                        atom("Assgt", vec![v("t")]),
                        atom(names::VBL, vec![v("v")]),
                        eq(v("s"), modify(v("t"), v("v"), v("a"))),
                    ]),
                ),
            ]),
        ),
    );

    // v inDom s :← ∃t,a (s = Modify(t,v,a))
    flush(
        &mut rules,
        &mut gs,
        rule(
            "InDom",
            &["v", "s"],
            exists(&["t", "a"], eq(v("s"), modify(v("t"), v("v"), v("a")))),
        ),
    );

    // s(v) = a :← ∃t (s = Modify(t,v,a))
    flush(
        &mut rules,
        &mut gs,
        rule(
            "Lookup",
            &["s", "v", "a"],
            exists(&["t"], eq(v("s"), modify(v("t"), v("v"), v("a")))),
        ),
    );

    let base_funs: Vec<(usize, &Ident, usize)> = symbols
        .iter()
        .enumerate()
        .filter_map(|(j, name)| base.function(name).map(|f| (j, name, f.arity)))
        .collect();
    let base_rels: Vec<(usize, &Ident, usize, Polarity)> = symbols
        .iter()
        .enumerate()
        .filter_map(|(j, name)| {
            if *name == eq_ident() {
                Some((j, name, 2, Polarity::Negatable))
            } else {
                base.relation(name).map(|r| (j, name, r.arity, r.polarity))
            }
        })
        .collect();

    // Term(t) ;← Vbl(t) ; per base function f/n:
    // Term(t) ;← ∃l (t = Apply(ḟ,l) ∧ List(l) ∧ l hasLength n̂ ∧ (∀x∈l) Term(x))
    {
        let mut disjuncts = vec![atom(names::VBL, vec![v("t")])];
        for &(j, _, arity) in &base_funs {
            let traverse = expand_forall_in_list(&mut gs, v("l"), "x", atom("Term", vec![v("x")]));
            disjuncts.push(exists(
                &["l"],
                conj(vec![
                    eq(v("t"), apply(name_term(j), v("l"))),
                    atom("List", vec![v("l")]),
                    atom("HasLength", vec![v("l"), numeral(arity)]),
                    traverse,
                ]),
            ));
        }
        flush(&mut rules, &mut gs, rule("Term", &["t"], disj(disjuncts)));
    }

    // Val(t,s,a) ;← Vbl(t) ∧ Assgt(s) ∧ s(t) = a ; per base function f/n:
    // Val(t,s,a) ;← ∃l,ū,b̄ (t = Apply(ḟ,l) ∧ List(l) ∧ l hasLength n̂ ∧ Assgt(s)
    //                         ∧ ⋀_i ((l)_i = u_i ∧ Val(u_i,s,b_i)) ∧ a = f(b̄))
    {
        let mut disjuncts = vec![conj(vec![
            atom(names::VBL, vec![v("t")]),
            atom("Assgt", vec![v("s")]),
            atom("Lookup", vec![v("s"), v("t"), v("a")]),
        ])];
        for &(j, name, arity) in &base_funs {
            let us: Vec<String> = (0..arity).map(|i| format!("u{i}")).collect();
            let bs: Vec<String> = (0..arity).map(|i| format!("b{i}")).collect();
            let mut body = vec![
                eq(v("t"), apply(name_term(j), v("l"))),
                atom("List", vec![v("l")]),
                atom("HasLength", vec![v("l"), numeral(arity)]),
                atom("Assgt", vec![v("s")]),
            ];
            for i in 0..arity {
                body.push(atom("Index", vec![v("l"), numeral(i), v(&us[i])]));
                body.push(atom("Val", vec![v(&us[i]), v("s"), v(&bs[i])]));
            }
            body.push(eq(
                v("a"),
                Term::App(name.clone(), bs.iter().map(|b| v(b)).collect()),
            ));
            let mut bound: Vec<String> = vec!["l".into()];
            bound.extend(us);
            bound.extend(bs);
            disjuncts.push(exists_owned(&bound, conj(body)));
        }
        flush(&mut rules, &mut gs, rule("Val", &["t", "s", "a"], disj(disjuncts)));
    }

    // 1-1-List(l) :← ∃n (l hasLength n ∧ (∀i,j<n) ∃x,y ((l)_i=x ∧ (l)_j=y ∧ (i=j ∨ ¬x=y)))
    {
        let pair = exists(
            &["x", "y"],
            conj(vec![
                atom("Index", vec![v("l"), v("i"), v("x")]),
                atom("Index", vec![v("l"), v("j"), v("y")]),
                disj(vec![
                    eq(v("i"), v("j")),
                    Formula::NegAtom(eq_ident(), vec![v("x"), v("y")]),
                ]),
            ]),
        );
        let inner = expand_bounded_forall(&mut gs, v("n"), "j", pair);
        let outer = expand_bounded_forall(&mut gs, v("n"), "i", inner);
        flush(
            &mut rules,
            &mut gs,
            rule(
                "OneOneList",
                &["l"],
                exists(&["n"], conj(vec![atom("HasLength", vec![v("l"), v("n")]), outer])),
            ),
        );
    }

    // HS(r,p) :← ∃y,z (r = Rule(Apply(p,y), z))
    flush(
        &mut rules,
        &mut gs,
        rule(
            "HS",
            &["r", "p"],
            exists(
                &["y", "z"],
                eq(v("r"), Term::app(names::RULE, vec![apply(v("p"), v("y")), v("z")])),
            ),
        ),
    );

    for r in lift_plus("HS", "HSPlus", &[]) {
        flush(&mut rules, &mut gs, r);
    }
    for r in lift_plus("Val", "ValPlus", &["s"]) {
        flush(&mut rules, &mut gs, r);
    }

    // Change(s,l,q,r): r is s with the variables of l remapped to the values of q
    flush(
        &mut rules,
        &mut gs,
        rule(
            "Change",
            &["s", "l", "q", "r"],
            disj(vec![
                conj(vec![eq(v("l"), nil()), eq(v("q"), nil()), eq(v("s"), v("r"))]),
                exists(
                    &["l'", "q'", "r'", "v", "a"],
                    conj(vec![
                        eq(v("l"), append(v("l'"), v("v"))),
                        eq(v("q"), append(v("q'"), v("a"))),
                        atom("Change", vec![v("s"), v("l'"), v("q'"), v("r'")]),
                        eq(v("r"), modify(v("r'"), v("v"), v("a"))),
                    ]),
                ),
            ]),
        ),
    );

    // Sat(phi, pi, s)
    {
        let mut disjuncts: Vec<Formula> = Vec::new();
        // (1) named atoms, once per predicate of the base world (equality included)
        // (2) the same negated, for negatable predicates only
        for negated in [false, true] {
            for &(j, name, arity, pol) in &base_rels {
                if negated && pol != Polarity::Negatable {
                    continue;
                }
                let us: Vec<String> = (0..arity).map(|i| format!("u{i}")).collect();
                let bs: Vec<String> = (0..arity).map(|i| format!("b{i}")).collect();
                let pattern = apply(name_term(j), v("l"));
                let pattern = if negated {
                    Term::app(names::NEG, vec![pattern])
                } else {
                    pattern
                };
                let mut body = vec![
                    eq(v("phi"), pattern),
                    atom("List", vec![v("l")]),
                    atom("HasLength", vec![v("l"), numeral(arity)]),
                    atom("Assgt", vec![v("s")]),
                ];
                for i in 0..arity {
                    body.push(atom("Index", vec![v("l"), numeral(i), v(&us[i])]));
                    body.push(atom("Val", vec![v(&us[i]), v("s"), v(&bs[i])]));
                }
                let args: Vec<Term> = bs.iter().map(|b| v(b)).collect();
                body.push(if negated {
                    Formula::NegAtom(name.clone(), args)
                } else {
                    Formula::Atom(name.clone(), args)
                });
                let mut bound: Vec<String> = vec!["l".into()];
                bound.extend(us);
                bound.extend(bs);
                disjuncts.push(exists_owned(&bound, conj(body)));
            }
        }
        // (3) conjunction, disjunction, quantification — verbatim, no guards
        disjuncts.push(exists(
            &["alpha", "beta"],
            conj(vec![
                eq(v("phi"), Term::app(names::CONJ, vec![v("alpha"), v("beta")])),
                atom("Sat", vec![v("alpha"), v("pi"), v("s")]),
                atom("Sat", vec![v("beta"), v("pi"), v("s")]),
            ]),
        ));
        disjuncts.push(exists(
            &["alpha", "beta"],
            conj(vec![
                eq(v("phi"), Term::app(names::DISJ, vec![v("alpha"), v("beta")])),
                disj(vec![
                    atom("Sat", vec![v("alpha"), v("pi"), v("s")]),
                    atom("Sat", vec![v("beta"), v("pi"), v("s")]),
                ]),
            ]),
        ));
        disjuncts.push(exists(
            &["alpha", "v", "a"],
            conj(vec![
                eq(v("phi"), Term::app(names::QUANT, vec![v("v"), v("alpha")])),
                atom("Sat", vec![v("alpha"), v("pi"), modify(v("s"), v("v"), v("a"))]),
            ]),
        ));
        // (4) extra-predicate atoms: find the rule in Π with that head symbol.
        // The rule element (Π)_i is bound to an explicit witness rho before
        // being decomposed, so a demand-driven evaluator can enumerate it
        // through Index and then invert the free constructors.
        let terms_of_t = expand_forall_in_list(&mut gs, v("t"), "x", atom("Term", vec![v("x")]));
        let vbls_of_l =
            expand_forall_in_list(&mut gs, v("l"), "x", atom(names::VBL, vec![v("x")]));
        disjuncts.push(exists(
            &["p", "t", "k", "i", "m", "l", "r", "q", "delta", "rho"],
            conj(vec![
                eq(v("phi"), apply(v("p"), v("t"))),
                atom("HasLength", vec![v("t"), v("k")]),
                atom(names::ARITY, vec![v("p"), v("k")]),
                terms_of_t,
                atom("HSPlus", vec![v("pi"), v("m")]),
                atom("OneOneList", vec![v("m")]),
                atom("Index", vec![v("pi"), v("i"), v("rho")]),
                eq(
                    v("rho"),
                    Term::app(names::RULE, vec![apply(v("p"), v("l")), v("delta")]),
                ),
                atom("OneOneList", vec![v("l")]),
                atom("HasLength", vec![v("l"), v("k")]),
                vbls_of_l,
                atom("ValPlus", vec![v("t"), v("s"), v("q")]),
                atom("Change", vec![v("s"), v("l"), v("q"), v("r")]),
                atom("Sat", vec![v("delta"), v("pi"), v("r")]),
            ]),
        ));
        // (5) induction assertions: rename clashing heads away, then append
        disjuncts.push(exists(
            &["phi'", "sigma", "alpha", "theta"],
            conj(vec![
                atom(names::RENAME_AWAY, vec![v("phi"), v("pi"), v("phi'")]),
                eq(v("phi'"), Term::app(names::INDASRT, vec![v("sigma"), v("alpha")])),
                atom("Cat", vec![v("pi"), v("sigma"), v("theta")]),
                atom("Sat", vec![v("alpha"), v("theta"), v("s")]),
            ]),
        ));
        flush(&mut rules, &mut gs, rule("Sat", &["phi", "pi", "s"], disj(disjuncts)));
    }

    Ok(Program { rules })
}

/// The rules of `p` reachable from `roots` through derived-predicate
/// references, in the original order. Useful for exercising one helper
/// predicate of Π_sat in isolation.
pub fn subprogram(p: &Program, roots: &[&str]) -> Program {
    let heads: BTreeSet<Ident> = p.rules.iter().map(|r| r.head.clone()).collect();
    let mut wanted: BTreeSet<Ident> = roots.iter().map(|r| Ident::new(r)).collect();
    loop {
        let mut grew = false;
        for r in &p.rules {
            if !wanted.contains(&r.head) {
                continue;
            }
            for q in crate::syntax::free_predicates(&r.body) {
                if heads.contains(&q) && wanted.insert(q) {
                    grew = true;
                }
            }
        }
        if !grew {
            break;
        }
    }
    Program {
        rules: p.rules.iter().filter(|r| wanted.contains(&r.head)).cloned().collect(),
    }
}
