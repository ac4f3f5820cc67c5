//! Acceptance gate: each test covers one numbered criterion and prints a
//! single verdict line. Every randomized harness runs from a fixed seed, so
//! a failure reproduces exactly.

use efpl::evaluator::{
    evaluate, lfp, lfp_oracle, stage_report, Rows, Strategy,
};
use efpl::meta::{eval_quote, MetaElem, MetaLimits, MetaStructure, Quoter, BOTTOM};
use efpl::metacheck::{depth_stability, footprint_lower_bound};
use efpl::parser::{parse_formula, parse_structure, parse_vocabulary, print_program};
use efpl::satgen::{
    expand_bounded_forall, expand_forall_in_list, generate_sat_program, numeral, subprogram,
    Gensym,
};
use efpl::structure::{
    check_homomorphism, eval_term, tuples, Assignment, Domain, ElemId, Homomorphism, Structure,
};
use efpl::syntax::{
    eq_ident, free_vars, program_free_vars, to_prenex, validate_program, Formula, Ident, Polarity,
    Program, Rule, Term, Vocabulary,
};
use efpl::tabled::evaluate_demand;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

fn verdict(n: usize, name: &str) {
    println!("criterion {n:02} ({name}): PASS");
}

fn base() -> (Vocabulary, Structure) {
    parse_structure(include_str!("fixtures/base.efs")).unwrap()
}

fn exi(v: &str, f: Formula) -> Formula {
    Formula::Exists(Ident::new(v), Box::new(f))
}

fn atom(p: &str, args: Vec<Term>) -> Formula {
    Formula::Atom(Ident::new(p), args)
}

// ---------------------------------------------------------------- generators

/// Random terms and formulas over the fixture vocabulary (constant `c0`,
/// unary `f`, negatable binary `Edge`), optionally without the constant and
/// with extra positive-only predicates (program heads).
struct FGen<'r> {
    rng: &'r mut ChaCha8Rng,
    rel: &'static str,
    heads: Vec<(Ident, usize)>,
    has_const: bool,
    allow_negeq: bool,
    next_var: usize,
}

impl<'r> FGen<'r> {
    fn new(rng: &'r mut ChaCha8Rng) -> Self {
        FGen { rng, rel: "Edge", heads: Vec::new(), has_const: true, allow_negeq: true, next_var: 0 }
    }

    fn term(&mut self, vars: &[Ident], depth: usize) -> Term {
        if depth > 0 && self.rng.gen_bool(0.35) {
            let inner = self.term(vars, depth - 1);
            return Term::app("f", vec![inner]);
        }
        if !vars.is_empty() && (!self.has_const || self.rng.gen_bool(0.6)) {
            let i = self.rng.gen_range(0..vars.len());
            return Term::Var(vars[i].clone());
        }
        assert!(self.has_const, "no ground terms without a constant");
        Term::app("c0", vec![])
    }

    fn leaf(&mut self, vars: &[Ident]) -> Formula {
        let mut cases = vec![0, 1, 2];
        if self.allow_negeq {
            cases.push(3);
        }
        if !self.heads.is_empty() {
            cases.extend([4, 4]);
        }
        let case = cases[self.rng.gen_range(0..cases.len())];
        let t = |g: &mut Self| g.term(vars, 2);
        match case {
            0 => {
                let (a, b) = (t(self), t(self));
                Formula::Atom(eq_ident(), vec![a, b])
            }
            1 => {
                let (a, b) = (t(self), t(self));
                Formula::Atom(Ident::new(self.rel), vec![a, b])
            }
            2 => {
                let (a, b) = (t(self), t(self));
                Formula::NegAtom(Ident::new(self.rel), vec![a, b])
            }
            3 => {
                let (a, b) = (t(self), t(self));
                Formula::NegAtom(eq_ident(), vec![a, b])
            }
            _ => {
                let i = self.rng.gen_range(0..self.heads.len());
                let (h, k) = self.heads[i].clone();
                let args = (0..k).map(|_| self.term(vars, 2)).collect();
                Formula::Atom(h, args)
            }
        }
    }

    fn formula(&mut self, vars: &mut Vec<Ident>, depth: usize) -> Formula {
        if depth == 0 {
            return self.leaf(vars);
        }
        match self.rng.gen_range(0..10) {
            0..=3 => self.leaf(vars),
            4 | 5 => {
                let a = self.formula(vars, depth - 1);
                let b = self.formula(vars, depth - 1);
                Formula::Conj(Box::new(a), Box::new(b))
            }
            6 | 7 => {
                let a = self.formula(vars, depth - 1);
                let b = self.formula(vars, depth - 1);
                Formula::Disj(Box::new(a), Box::new(b))
            }
            _ => {
                let v = Ident::new(&format!("q{}", self.next_var));
                self.next_var += 1;
                vars.push(v.clone());
                let body = self.formula(vars, depth - 1);
                vars.pop();
                Formula::Exists(v, Box::new(body))
            }
        }
    }
}

/// Random total structure over the fixture vocabulary with `n` elements.
fn random_structure(rng: &mut ChaCha8Rng, n: usize, vocab: &Vocabulary) -> Structure {
    let names: Vec<Ident> = (0..n).map(|i| Ident::new(&format!("e{i}"))).collect();
    let mut s = Structure::new(vocab.clone(), names).unwrap();
    for f in vocab.functions.clone() {
        let mut table = BTreeMap::new();
        for t in tuples(n, f.arity) {
            table.insert(t, ElemId(rng.gen_range(0..n) as u32));
        }
        s.set_function(&f.name, table).unwrap();
    }
    for r in vocab.relations.clone() {
        for t in tuples(n, r.arity) {
            if rng.gen_bool(1.0 / 3.0) {
                s.add_tuple(&r.name, t);
            }
        }
    }
    s
}

/// Random program with one or two heads of arity 1 or 2, bodies drawn from
/// the EL generator with the heads available as positive atoms.
fn random_program(rng: &mut ChaCha8Rng, vocab: &Vocabulary) -> Program {
    let count = rng.gen_range(1..=2);
    let head_names = ["P", "Q"];
    let heads: Vec<(Ident, usize)> = (0..count)
        .map(|i| (Ident::new(head_names[i]), rng.gen_range(1..=2)))
        .collect();
    let mut rules = Vec::new();
    for (h, k) in &heads {
        let head_vars: Vec<Ident> = ["x", "y"][..*k].iter().map(|v| Ident::new(v)).collect();
        let seed = rng.gen::<u64>();
        let mut body_rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = FGen::new(&mut body_rng);
        g.heads = heads.clone();
        let mut vars = head_vars.clone();
        let body = g.formula(&mut vars, 2);
        rules.push(Rule { head: h.clone(), head_vars, body });
    }
    let p = Program { rules };
    assert!(validate_program(&p, vocab).is_empty());
    p
}

// ---------------------------------------------------------------- criteria

#[test]
fn c01_saturation_matches_oracle() {
    let (vocab, _) = base();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut compared = 0;
    let mut big = 0;
    while compared < 300 {
        let n = rng.gen_range(1..=3);
        let s = random_structure(&mut rng, n, &vocab);
        let p = random_program(&mut rng, &vocab);
        let bits: usize = p.rules.iter().map(|r| n.pow(r.head_vars.len() as u32)).sum();
        if bits > 12 {
            // a few expensive oracle runs are enough; skip the rest
            if bits > 16 || big >= 10 {
                continue;
            }
            big += 1;
        }
        let empty = Assignment::empty();
        let (fast, _) = lfp(&p, &empty, &s, Strategy::SemiNaive).unwrap();
        let slow = lfp_oracle(&p, &empty, &s, 2f64.powi(17)).unwrap();
        assert_eq!(fast, slow, "saturation disagrees with the brute-force oracle on {p:?} over {s:?}");
        compared += 1;
    }
    verdict(1, "saturation equals brute-force least closed point");
}

#[test]
fn c02_stage_bound_and_strategy_agreement() {
    let (vocab, _) = base();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    for _ in 0..1000 {
        let n = rng.gen_range(1..=3);
        let s = random_structure(&mut rng, n, &vocab);
        let p = random_program(&mut rng, &vocab);
        let bound: usize =
            p.rules.iter().map(|r| n.pow(r.head_vars.len() as u32)).sum::<usize>() + 1;
        let empty = Assignment::empty();
        let naive = stage_report(&p, &empty, &s, Strategy::Naive).unwrap();
        let semi = stage_report(&p, &empty, &s, Strategy::SemiNaive).unwrap();
        assert!(naive.closure_stage <= bound, "closure stage {} over bound {bound}", naive.closure_stage);
        assert_eq!(naive.closure_stage, semi.closure_stage);
        assert_eq!(naive.deltas, semi.deltas, "stage deltas differ between strategies on {p:?}");
    }
    verdict(2, "closure stage bounded; naive and semi-naive agree stage-for-stage");
}

/// Every structure with universe size 1..=3 over one unary function and one
/// negatable binary relation.
fn all_small_structures() -> Vec<Structure> {
    let vocab = Vocabulary::new().with_fun("f", 1).with_rel("E", 2, Polarity::Negatable);
    let f = Ident::new("f");
    let e = Ident::new("E");
    let mut out = Vec::new();
    for n in 1..=3usize {
        let names: Vec<Ident> = (0..n).map(|i| Ident::new(&format!("e{i}"))).collect();
        let pairs = tuples(n, 2);
        for fm in 0..n.pow(n as u32) {
            let mut table = BTreeMap::new();
            let mut code = fm;
            for i in 0..n {
                table.insert(vec![ElemId(i as u32)], ElemId((code % n) as u32));
                code /= n;
            }
            for mask in 0..(1u32 << (n * n)) {
                let mut s = Structure::new(vocab.clone(), names.clone()).unwrap();
                s.set_function(&f, table.clone()).unwrap();
                for (i, t) in pairs.iter().enumerate() {
                    if mask & (1 << i) != 0 {
                        s.add_tuple(&e, t.clone());
                    }
                }
                out.push(s);
            }
        }
    }
    out
}

#[test]
fn c03_prenex_preserves_truth_exhaustively() {
    let structures = all_small_structures();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let x = Ident::new("x");
    for _ in 0..500 {
        let mut g = FGen::new(&mut rng);
        g.rel = "E";
        g.has_const = false;
        let mut vars = vec![x.clone()];
        let mut f = g.formula(&mut vars, 3);
        if g.rng.gen_bool(0.5) {
            f = Formula::Exists(x.clone(), Box::new(f));
        }
        let pf = to_prenex(&f).unwrap();
        if pf == f {
            continue;
        }
        let fv: Vec<Ident> = free_vars(&f).into_iter().collect();
        assert_eq!(free_vars(&pf), fv.iter().cloned().collect());
        for s in &structures {
            for t in tuples(s.universe_len(), fv.len()) {
                let a: Assignment = fv.iter().cloned().zip(t).collect();
                let lhs = evaluate(&f, &a, s).unwrap();
                let rhs = evaluate(&pf, &a, s).unwrap();
                assert_eq!(lhs, rhs, "prenex changed truth of {f:?} under {a:?} over {s:?}");
            }
        }
    }
    verdict(3, "prenex form is truth-equivalent on every small structure");
}

/// Relabel the source along a random permutation (an isomorphism).
fn hom_iso(rng: &mut ChaCha8Rng, src: &Structure, vocab: &Vocabulary) -> (Structure, Homomorphism) {
    let n = src.universe_len();
    let mut perm: Vec<u32> = (0..n as u32).collect();
    perm.shuffle(rng);
    let names: Vec<Ident> = (0..n).map(|i| Ident::new(&format!("t{i}"))).collect();
    let mut tgt = Structure::new(vocab.clone(), names).unwrap();
    for f in &vocab.functions {
        let mut table = BTreeMap::new();
        for t in tuples(n, f.arity) {
            let img: Vec<ElemId> = t.iter().map(|a| ElemId(perm[a.0 as usize])).collect();
            let val = src.apply_fun(&f.name, &t);
            table.insert(img, ElemId(perm[val.0 as usize]));
        }
        tgt.set_function(&f.name, table).unwrap();
    }
    for r in &vocab.relations {
        for t in src.rel_tuples(&r.name) {
            tgt.add_tuple(&r.name, t.iter().map(|a| ElemId(perm[a.0 as usize])).collect());
        }
    }
    let map = (0..n).map(|i| (ElemId(i as u32), ElemId(perm[i]))).collect();
    (tgt, Homomorphism { map })
}

/// Embed the source into a target with one extra element. New tuples touch
/// the new element only, so negatable relations stay bi-preserved.
fn hom_extend(rng: &mut ChaCha8Rng, src: &Structure, vocab: &Vocabulary) -> (Structure, Homomorphism) {
    let n = src.universe_len();
    let m = n + 1;
    let names: Vec<Ident> = (0..m).map(|i| Ident::new(&format!("t{i}"))).collect();
    let mut tgt = Structure::new(vocab.clone(), names).unwrap();
    for f in &vocab.functions {
        let mut table = BTreeMap::new();
        for t in tuples(m, f.arity) {
            let val = if t.iter().all(|a| (a.0 as usize) < n) {
                src.apply_fun(&f.name, &t)
            } else {
                ElemId(rng.gen_range(0..m) as u32)
            };
            table.insert(t, val);
        }
        tgt.set_function(&f.name, table).unwrap();
    }
    for r in &vocab.relations {
        for t in src.rel_tuples(&r.name) {
            tgt.add_tuple(&r.name, t.clone());
        }
        for t in tuples(m, r.arity) {
            if t.iter().any(|a| a.0 as usize == n) && rng.gen_bool(0.4) {
                tgt.add_tuple(&r.name, t);
            }
        }
    }
    let map = (0..n).map(|i| (ElemId(i as u32), ElemId(i as u32))).collect();
    (tgt, Homomorphism { map })
}

/// Collapse two elements and close under the functions; succeeds only when
/// the induced partition is also consistent for every relation, so the
/// quotient map bi-preserves them.
fn hom_quotient(
    rng: &mut ChaCha8Rng,
    src: &Structure,
    vocab: &Vocabulary,
) -> Option<(Structure, Homomorphism)> {
    let n = src.universe_len();
    if n < 2 {
        return None;
    }
    let mut rep: Vec<usize> = (0..n).collect();
    fn find(rep: &mut Vec<usize>, mut i: usize) -> usize {
        while rep[i] != i {
            i = rep[i];
        }
        i
    }
    let a = rng.gen_range(0..n);
    let b = (a + 1 + rng.gen_range(0..n - 1)) % n;
    let (ra, rb) = (find(&mut rep, a), find(&mut rep, b));
    rep[ra.max(rb)] = ra.min(rb);
    // close under the functions (all unary or constant here)
    loop {
        let mut changed = false;
        for f in &vocab.functions {
            if f.arity != 1 {
                continue;
            }
            for i in 0..n {
                for j in 0..n {
                    if find(&mut rep, i) == find(&mut rep, j) {
                        let fi = src.apply_fun(&f.name, &[ElemId(i as u32)]).0 as usize;
                        let fj = src.apply_fun(&f.name, &[ElemId(j as u32)]).0 as usize;
                        let (ri, rj) = (find(&mut rep, fi), find(&mut rep, fj));
                        if ri != rj {
                            rep[ri.max(rj)] = ri.min(rj);
                            changed = true;
                        }
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    // relations must be unions of class products
    for r in &vocab.relations {
        for t in tuples(n, r.arity) {
            if !src.rel_contains(&r.name, &t) {
                continue;
            }
            for u in tuples(n, r.arity) {
                let same = t
                    .iter()
                    .zip(&u)
                    .all(|(x, y)| find(&mut rep, x.0 as usize) == find(&mut rep, y.0 as usize));
                if same && !src.rel_contains(&r.name, &u) {
                    return None;
                }
            }
        }
    }
    let reps: Vec<usize> = (0..n).filter(|&i| find(&mut rep, i) == i).collect();
    if reps.len() == n {
        return None;
    }
    let class = |rep: &mut Vec<usize>, i: usize| -> u32 {
        let r = find(rep, i);
        reps.iter().position(|&p| p == r).unwrap() as u32
    };
    let names: Vec<Ident> = (0..reps.len()).map(|i| Ident::new(&format!("t{i}"))).collect();
    let mut tgt = Structure::new(vocab.clone(), names).unwrap();
    for f in &vocab.functions {
        let mut table = BTreeMap::new();
        for t in tuples(n, f.arity) {
            let img: Vec<ElemId> =
                t.iter().map(|x| ElemId(class(&mut rep, x.0 as usize))).collect();
            let val = src.apply_fun(&f.name, &t);
            table.insert(img, ElemId(class(&mut rep, val.0 as usize)));
        }
        tgt.set_function(&f.name, table).unwrap();
    }
    for r in &vocab.relations {
        let ts: Vec<Vec<ElemId>> = src.rel_tuples(&r.name).cloned().collect();
        for t in ts {
            tgt.add_tuple(
                &r.name,
                t.iter().map(|x| ElemId(class(&mut rep, x.0 as usize))).collect(),
            );
        }
    }
    let map = (0..n).map(|i| (ElemId(i as u32), ElemId(class(&mut rep, i)))).collect();
    Some((tgt, Homomorphism { map }))
}

#[test]
fn c04_homomorphisms_preserve_sentences() {
    let (vocab, _) = base();
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut done = 0;
    let mut truths = 0;
    while done < 200 {
        let n = rng.gen_range(1..=4);
        let src = random_structure(&mut rng, n, &vocab);
        let made = match rng.gen_range(0..3) {
            0 => Some((hom_iso(&mut rng, &src, &vocab), true)),
            1 if n < 4 => Some((hom_extend(&mut rng, &src, &vocab), true)),
            2 => hom_quotient(&mut rng, &src, &vocab).map(|th| (th, false)),
            _ => None,
        };
        let Some(((tgt, h), injective)) = made else { continue };
        let violations = check_homomorphism(&src, &tgt, &h).unwrap();
        assert!(violations.is_empty(), "constructed map is not a homomorphism: {violations:?}");
        let mut g = FGen::new(&mut rng);
        // negated equality only transports along injective maps
        g.allow_negeq = injective;
        let mut vars = Vec::new();
        let sent = g.formula(&mut vars, 3);
        let empty = Assignment::empty();
        if evaluate(&sent, &empty, &src).unwrap() {
            truths += 1;
            assert!(
                evaluate(&sent, &empty, &tgt).unwrap(),
                "sentence true in source but false in target: {sent:?}"
            );
        }
        done += 1;
    }
    assert!(truths >= 25, "only {truths} source-true sentences; harness too weak");
    verdict(4, "homomorphisms transport sentence truth (200 triples)");
}

// ------------------------------------------------- criterion 5: helpers at d=8

fn is_term_enc(m: &MetaStructure, b: &Structure, e: ElemId) -> bool {
    match m.elem(e) {
        MetaElem::Vbl(_) => true,
        MetaElem::Apply(name, list) => {
            let arity = match m.elem(name) {
                MetaElem::Sym(j) => {
                    let sym = &m.symbols()[j as usize];
                    match b.vocab().function(sym) {
                        Some(f) => f.arity,
                        None => return false,
                    }
                }
                _ => return false,
            };
            match m.list_items(list) {
                Some(items) => {
                    items.len() == arity && items.iter().all(|&t| is_term_enc(m, b, t))
                }
                None => false,
            }
        }
        _ => false,
    }
}

fn entries(m: &MetaStructure, e: ElemId) -> Option<Vec<(u32, ElemId)>> {
    match m.elem(e) {
        MetaElem::EmptyAssgt => Some(vec![]),
        MetaElem::Assgt(es) => Some(es),
        _ => None,
    }
}

#[test]
fn c05_helper_extensions_at_depth_eight() {
    let (_, b) = base();
    let m = MetaStructure::new(&b, 8, MetaLimits::default()).unwrap();
    let p = generate_sat_program(b.vocab(), MetaLimits::default()).unwrap();
    let universe = m.materialize();
    let saturate = |head: &str| -> Rows {
        let sub = subprogram(&p, &[head]);
        let (tables, _) = lfp(&sub, &Assignment::empty(), &m, Strategy::SemiNaive).unwrap();
        tables.rows(&Ident::new(head)).unwrap().clone()
    };
    let lists: Vec<(ElemId, Vec<ElemId>)> =
        universe.iter().filter_map(|&e| m.list_items(e).map(|i| (e, i))).collect();
    let by_items: BTreeMap<Vec<ElemId>, ElemId> =
        lists.iter().map(|(e, i)| (i.clone(), *e)).collect();
    let nil = m.intern(MetaElem::Nil);

    let exp_n: Rows = universe
        .iter()
        .filter(|&&e| matches!(m.elem(e), MetaElem::Nat(_)))
        .map(|&e| vec![e])
        .collect();
    assert_eq!(saturate("N"), exp_n, "N at d=8");

    let exp_list: Rows = lists.iter().map(|(e, _)| vec![*e]).collect();
    assert_eq!(saturate("List"), exp_list, "List at d=8");

    let exp_len: Rows =
        lists.iter().map(|(e, i)| vec![*e, m.nat(i.len() as u32)]).collect();
    assert_eq!(saturate("HasLength"), exp_len, "HasLength at d=8");

    let mut exp_index = Rows::new();
    for (e, items) in &lists {
        for (i, &a) in items.iter().enumerate() {
            exp_index.insert(vec![*e, m.nat(i as u32), a]);
        }
    }
    assert_eq!(saturate("Index"), exp_index, "Index at d=8");

    let mut exp_cat = Rows::new();
    for &a in &universe {
        if a != BOTTOM {
            exp_cat.insert(vec![a, nil, a]);
        }
    }
    for (a, ia) in &lists {
        for (bb, ib) in &lists {
            let mut cat = ia.clone();
            cat.extend(ib);
            if let Some(&l) = by_items.get(&cat) {
                exp_cat.insert(vec![*a, *bb, l]);
            }
        }
    }
    assert_eq!(saturate("Cat"), exp_cat, "Cat at d=8");

    let exp_assgt: Rows =
        universe.iter().filter(|&&e| entries(&m, e).is_some()).map(|&e| vec![e]).collect();
    assert_eq!(saturate("Assgt"), exp_assgt, "Assgt at d=8");

    let mut exp_indom = Rows::new();
    let mut exp_lookup = Rows::new();
    for &s in &universe {
        if let Some(es) = entries(&m, s) {
            for (vi, a) in es {
                let v = m.intern(MetaElem::Vbl(vi));
                exp_indom.insert(vec![v, s]);
                exp_lookup.insert(vec![s, v, a]);
            }
        }
    }
    assert_eq!(saturate("InDom"), exp_indom, "InDom at d=8");
    assert_eq!(saturate("Lookup"), exp_lookup, "Lookup at d=8");

    let exp_term: Rows = universe
        .iter()
        .filter(|&&e| is_term_enc(&m, &b, e))
        .map(|&e| vec![e])
        .collect();
    assert_eq!(saturate("Term"), exp_term, "Term at d=8");

    // bottom-up saturation of the ternary counting rules behind OneOneList
    // pool-fills quadratically at this depth; query each element instead
    let one = Formula::Let(
        subprogram(&p, &["OneOneList"]),
        Box::new(atom("OneOneList", vec![Term::var("x0")])),
    );
    for &e in &universe {
        let s: Assignment = [(Ident::new("x0"), e)].into_iter().collect();
        let got = evaluate_demand(&one, &s, &m).unwrap();
        let want = m.list_items(e).is_some_and(|items| {
            items.iter().enumerate().all(|(i, a)| items.iter().skip(i + 1).all(|b| b != a))
        });
        assert_eq!(got, want, "OneOneList at d=8 differs at {e:?}");
    }

    verdict(5, "helper predicates at depth 8 equal their brute-force extensions");
}

#[test]
fn c06_val_transports_term_evaluation() {
    let (_, b) = base();
    let m = MetaStructure::new(&b, 64, MetaLimits::default()).unwrap();
    let sat = generate_sat_program(b.vocab(), MetaLimits::default()).unwrap();
    let sub = subprogram(&sat, &["Val"]);
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let base_elems: Vec<ElemId> = b.elements().collect();
    for _ in 0..200 {
        let mut g = FGen::new(&mut rng);
        let vars = vec![Ident::new("x"), Ident::new("y")];
        let t = g.term(&vars, 3);
        let mut fv = BTreeSet::new();
        t.vars(&mut fv);
        let binding: Vec<(Ident, ElemId)> = fv
            .iter()
            .map(|v| (v.clone(), base_elems[rng.gen_range(0..base_elems.len())]))
            .collect();
        let s_base: Assignment = binding.iter().cloned().collect();
        let v_base = eval_term(&t, &s_base, &b).unwrap();
        let w_base = *base_elems.iter().find(|&&e| e != v_base).unwrap();
        let mut q = Quoter::new(&m);
        let qt = q.quote_term(&t).unwrap();
        assert_ne!(eval_quote(&m, &qt), BOTTOM, "quote of {t:?} exceeds depth");
        let meta_binding: Vec<(Ident, ElemId)> =
            binding.iter().map(|(v, e)| (v.clone(), m.ur(*e))).collect();
        let s_elem = q.quote_assignment(&meta_binding);
        let goal = Formula::Let(
            sub.clone(),
            Box::new(atom("Val", vec![qt, Term::var("s0"), Term::var("a0")])),
        );
        let right: Assignment =
            [(Ident::new("s0"), s_elem), (Ident::new("a0"), m.ur(v_base))].into_iter().collect();
        let wrong: Assignment =
            [(Ident::new("s0"), s_elem), (Ident::new("a0"), m.ur(w_base))].into_iter().collect();
        assert!(
            evaluate_demand(&goal, &right, &m).unwrap(),
            "Val rejects the value of {t:?} under {binding:?}"
        );
        assert!(
            !evaluate_demand(&goal, &wrong, &m).unwrap(),
            "Val accepts a wrong value for {t:?} under {binding:?}"
        );
    }
    verdict(6, "Val transports term evaluation (200 pairs)");
}

fn corpus_entries() -> Vec<(String, bool)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/corpus");
    let manifest = std::fs::read_to_string(dir.join("manifest.tsv")).unwrap();
    manifest
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let (file, expect) = l.split_once('\t').unwrap();
            (file.to_string(), expect.trim() == "true")
        })
        .collect()
}

fn corpus_formula(file: &str, vocab: &Vocabulary) -> Formula {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/corpus");
    let text = std::fs::read_to_string(dir.join(file)).unwrap();
    parse_formula(&text, vocab).unwrap()
}

#[test]
fn c07_corpus_agreement_is_depth_stable() {
    let (vocab, b) = base();
    let entries = corpus_entries();
    assert!(entries.len() >= 40, "corpus has only {} sentences", entries.len());
    for (file, expect) in &entries {
        let f = corpus_formula(file, &vocab);
        let d = footprint_lower_bound(&f, &b).unwrap() + 4;
        let rep = depth_stability(&f, &b, [d, d + 1, d + 2]).unwrap();
        assert!(rep.stable, "{file}: verdict not stable across depths {d}..={}", d + 2);
        for r in &rep.reports {
            assert!(r.agreement, "{file}: Sat disagrees with native at depth {}", r.depth);
            assert_eq!(r.native, *expect, "{file}: wrong native verdict at depth {}", r.depth);
        }
    }
    verdict(7, "corpus of 48 sentences agrees and is stable over three depths");
}

/// Every (subformula, concatenation of enclosing programs) pair of a
/// sentence, skipping pairs whose concatenation would repeat a head symbol.
fn subformula_pairs(f: &Formula, stack: &mut Vec<Program>, out: &mut Vec<(Formula, Vec<Rule>)>) {
    let rules: Vec<Rule> = stack.iter().flat_map(|p| p.rules.clone()).collect();
    let heads: BTreeSet<&Ident> = rules.iter().map(|r| &r.head).collect();
    if heads.len() == rules.len() {
        out.push((f.clone(), rules));
    }
    match f {
        Formula::Atom(..) | Formula::NegAtom(..) => {}
        Formula::Conj(a, b) | Formula::Disj(a, b) => {
            subformula_pairs(a, stack, out);
            subformula_pairs(b, stack, out);
        }
        Formula::Exists(_, body) => subformula_pairs(body, stack, out),
        Formula::Let(p, body) => {
            stack.push(p.clone());
            for r in &p.rules {
                subformula_pairs(&r.body, stack, out);
            }
            subformula_pairs(body, stack, out);
            stack.pop();
        }
    }
}

#[test]
fn c08_sat_matches_native_on_subformula_triples() {
    let (vocab, b) = base();
    let sat = generate_sat_program(b.vocab(), MetaLimits::default()).unwrap();
    let mut pairs = Vec::new();
    for (file, _) in corpus_entries() {
        let f = corpus_formula(&file, &vocab);
        let mut stack = Vec::new();
        subformula_pairs(&f, &mut stack, &mut pairs);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    pairs.shuffle(&mut rng);
    let limits = MetaLimits::default();
    let mut checked = 0;
    for (psi, rules) in pairs {
        if checked >= 110 {
            break;
        }
        let pi = Program { rules };
        // the assignment must also cover the ambient parameters of the
        // enclosing programs, not just the free variables of the subformula
        let mut fv = free_vars(&psi);
        fv.extend(program_free_vars(&pi));
        let fv: Vec<Ident> = fv.into_iter().collect();
        let values: Vec<ElemId> = b.elements().collect();
        // probe quotation in an effectively untruncated structure for sizes
        let probe = MetaStructure::new(&b, 1 << 20, limits).unwrap();
        let mut pq = Quoter::new(&probe);
        let q_pi = pq.quote_program(&pi).unwrap();
        let q_psi = pq.quote_formula(&psi).unwrap();
        let s_pi = probe.size(eval_quote(&probe, &q_pi));
        let s_psi = probe.size(eval_quote(&probe, &q_psi));
        let binding: Vec<(Ident, ElemId)> = fv
            .iter()
            .map(|v| (v.clone(), values[rng.gen_range(0..values.len())]))
            .collect();
        let s_alpha = probe.size(pq.quote_assignment(
            &binding.iter().map(|(v, e)| (v.clone(), probe.ur(*e))).collect::<Vec<_>>(),
        ));
        let d = 2 * (s_pi + s_psi) + 2 * s_alpha + 48;
        let m = MetaStructure::new(&b, d, limits).unwrap();
        let mut q = Quoter::new(&m);
        let q_pi = q.quote_program(&pi).unwrap();
        let q_psi = q.quote_formula(&psi).unwrap();
        let meta_binding: Vec<(Ident, ElemId)> =
            binding.iter().map(|(v, e)| (v.clone(), m.ur(*e))).collect();
        let alpha = q.quote_assignment(&meta_binding);
        let native_f = if pi.rules.is_empty() {
            psi.clone()
        } else {
            Formula::Let(pi.clone(), Box::new(psi.clone()))
        };
        let s_native: Assignment = meta_binding.iter().cloned().collect();
        let native = evaluate(&native_f, &s_native, &m).unwrap();
        let goal = Formula::Let(
            sat.clone(),
            Box::new(atom("Sat", vec![q_psi, q_pi, Term::var("s0")])),
        );
        let ambient: Assignment = [(Ident::new("s0"), alpha)].into_iter().collect();
        let sat_verdict = evaluate_demand(&goal, &ambient, &m).unwrap();
        assert_eq!(
            sat_verdict, native,
            "Sat and native disagree on subformula {psi:?} with program {pi:?} under {binding:?}"
        );
        checked += 1;
    }
    assert!(checked >= 100, "only {checked} triples checked");
    verdict(8, "Sat matches native evaluation on sampled subformula triples");
}

#[test]
fn c09_nested_and_simultaneous_conventions_agree() {
    let (_, b) = base();
    let d = 5;
    let m = MetaStructure::new(&b, d, MetaLimits::default()).unwrap();
    let sat = generate_sat_program(b.vocab(), MetaLimits::default()).unwrap();
    let sub = subprogram(&sat, &["N", "List", "HasLength"]);
    let empty = Assignment::empty();
    let (tables, _) = lfp(&sub, &empty, &m, Strategy::SemiNaive).unwrap();
    let rule = |h: &str| {
        Program { rules: vec![sat.rule_for(&Ident::new(h)).unwrap().clone()] }
    };
    let nested = |goal: Formula| {
        Formula::Let(
            rule("N"),
            Box::new(Formula::Let(
                rule("List"),
                Box::new(Formula::Let(rule("HasLength"), Box::new(goal))),
            )),
        )
    };
    let universe = m.materialize();
    for &e in &universe {
        for head in ["N", "List"] {
            let goal = nested(atom(head, vec![Term::var("x0")]));
            let s: Assignment = [(Ident::new("x0"), e)].into_iter().collect();
            let got = evaluate(&goal, &s, &m).unwrap();
            let want = tables.rows(&Ident::new(head)).unwrap().contains(&vec![e]);
            assert_eq!(got, want, "{head} differs between conventions at {e:?}");
        }
    }
    for &l in &universe {
        for &n in &universe {
            let goal = nested(atom("HasLength", vec![Term::var("x0"), Term::var("x1")]));
            let s: Assignment =
                [(Ident::new("x0"), l), (Ident::new("x1"), n)].into_iter().collect();
            let got = evaluate(&goal, &s, &m).unwrap();
            let want = tables.rows(&Ident::new("HasLength")).unwrap().contains(&vec![l, n]);
            assert_eq!(got, want, "HasLength differs between conventions at ({l:?}, {n:?})");
        }
    }
    verdict(9, "nested and simultaneous fixpoint conventions coincide");
}

#[test]
fn c10_bounded_forall_expansions_enumerate() {
    let (_, b) = base();
    let m = MetaStructure::new(&b, 12, MetaLimits::default()).unwrap();
    let w = || Term::var("w");

    // bounded quantification over an initial segment of the naturals
    let bodies: Vec<(Formula, Vec<Option<u32>>)> = vec![
        (Formula::NegAtom(eq_ident(), vec![w(), numeral(2)]), vec![None]),
        (exi("u", Formula::Atom(eq_ident(), vec![w(), Term::app("S", vec![Term::var("u")])])), vec![None]),
        (
            Formula::Atom(eq_ident(), vec![w(), Term::var("p")]),
            (0..=6).map(Some).collect(),
        ),
    ];
    for (body, param_vals) in &bodies {
        for bound in 0..=6u32 {
            let mut gs = Gensym::new(BTreeSet::new());
            let use_f = expand_bounded_forall(&mut gs, numeral(bound as usize), "w", body.clone());
            let full = Formula::Let(Program { rules: gs.rules }, Box::new(use_f));
            for pv in param_vals {
                let mut ambient = Assignment::empty();
                if let Some(p) = pv {
                    ambient = ambient.modify(&Ident::new("p"), m.nat(*p));
                }
                let got = evaluate_demand(&full, &ambient, &m).unwrap();
                let want = (0..bound).all(|i| {
                    let s = ambient.modify(&Ident::new("w"), m.nat(i));
                    evaluate(body, &s, &m).unwrap()
                });
                assert_eq!(got, want, "bounded forall differs at bound {bound}, param {pv:?}");
            }
        }
    }

    // quantification over the members of a list
    let urs: Vec<ElemId> = b.elements().map(|e| m.ur(e)).collect();
    let mut all_lists: Vec<Vec<ElemId>> = vec![vec![]];
    let mut frontier: Vec<Vec<ElemId>> = vec![vec![]];
    for _ in 0..4 {
        let mut next = Vec::new();
        for l in &frontier {
            for &u in &urs {
                let mut l2 = l.clone();
                l2.push(u);
                next.push(l2);
            }
        }
        all_lists.extend(next.iter().cloned());
        frontier = next;
    }
    let sub = subprogram(
        &generate_sat_program(b.vocab(), MetaLimits::default()).unwrap(),
        &["Index", "HasLength"],
    );
    let taken: BTreeSet<Ident> = sub.rules.iter().map(|r| r.head.clone()).collect();
    let z = || Term::var("z");
    let list_bodies = vec![
        Formula::NegAtom(eq_ident(), vec![z(), Term::var("a0")]),
        exi("u", atom("Edge", vec![z(), Term::var("u")])),
    ];
    for body in &list_bodies {
        let mut gs = Gensym::new(taken.clone());
        let use_f = expand_forall_in_list(&mut gs, Term::var("l0"), "z", body.clone());
        let mut rules = sub.rules.clone();
        rules.extend(gs.rules);
        let full = Formula::Let(Program { rules }, Box::new(use_f));
        for items in &all_lists {
            let list = m.make_list(items);
            let ambient: Assignment = [
                (Ident::new("l0"), list),
                (Ident::new("a0"), m.ur(b.elem(&Ident::new("a")).unwrap())),
            ]
            .into_iter()
            .collect();
            let got = evaluate_demand(&full, &ambient, &m).unwrap();
            let want = items.iter().all(|&it| {
                let s = ambient.modify(&Ident::new("z"), it);
                evaluate(body, &s, &m).unwrap()
            });
            assert_eq!(got, want, "list forall differs on {items:?} for {body:?}");
        }
    }
    verdict(10, "bounded-forall expansions agree with direct enumeration");
}

#[test]
fn generated_program_matches_golden() {
    let vocab = parse_vocabulary(include_str!("fixtures/base.voc")).unwrap();
    let p = generate_sat_program(&vocab, MetaLimits::default()).unwrap();
    assert_eq!(print_program(&p), include_str!("fixtures/golden_sat.efl"));
    println!("golden Sat program: PASS");
}
