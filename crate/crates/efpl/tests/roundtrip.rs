//! Structural round-trip laws on randomly generated syntax: printing then
//! parsing is the identity, and so is quotation followed by unquotation.

use efpl::meta::{eval_quote, MetaLimits, MetaStructure, Quoter};
use efpl::parser::{parse_formula_unchecked, parse_structure, print_formula};
use efpl::syntax::{eq_ident, Formula, Ident, Program, Rule, Term};
use proptest::prelude::*;

fn arb_term() -> impl Strategy<Value = Term> {
    let leaf = prop_oneof![
        prop::sample::select(vec!["x", "y", "z"]).prop_map(Term::var),
        Just(Term::app("c0", vec![])),
    ];
    leaf.prop_recursive(3, 8, 1, |inner| inner.prop_map(|t| Term::app("f", vec![t])))
}

fn arb_formula() -> impl Strategy<Value = Formula> {
    let pair = || (arb_term(), arb_term());
    let leaf = prop_oneof![
        pair().prop_map(|(a, b)| Formula::Atom(eq_ident(), vec![a, b])),
        pair().prop_map(|(a, b)| Formula::NegAtom(eq_ident(), vec![a, b])),
        pair().prop_map(|(a, b)| Formula::Atom(Ident::new("Edge"), vec![a, b])),
        pair().prop_map(|(a, b)| Formula::NegAtom(Ident::new("Edge"), vec![a, b])),
        arb_term().prop_map(|a| Formula::Atom(Ident::new("P"), vec![a])),
        pair().prop_map(|(a, b)| Formula::Atom(Ident::new("Q"), vec![a, b])),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| Formula::Conj(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| Formula::Disj(Box::new(a), Box::new(b))),
            (prop::sample::select(vec!["x", "y", "z", "w"]), inner.clone())
                .prop_map(|(v, b)| Formula::Exists(Ident::new(v), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(rule_body, then)| {
                let rule = Rule {
                    head: Ident::new("P"),
                    head_vars: vec![Ident::new("x")],
                    body: rule_body,
                };
                Formula::Let(Program { rules: vec![rule] }, Box::new(then))
            }),
            (inner.clone(), inner.clone(), inner).prop_map(|(b1, b2, then)| {
                let rules = vec![
                    Rule {
                        head: Ident::new("P"),
                        head_vars: vec![Ident::new("x")],
                        body: b1,
                    },
                    Rule {
                        head: Ident::new("Q"),
                        head_vars: vec![Ident::new("x"), Ident::new("y")],
                        body: b2,
                    },
                ];
                Formula::Let(Program { rules }, Box::new(then))
            }),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn print_then_parse_is_identity(f in arb_formula()) {
        let text = print_formula(&f);
        let back = parse_formula_unchecked(&text).unwrap();
        prop_assert_eq!(back, f);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn quote_then_unquote_is_identity(f in arb_formula()) {
        let (_, b) = parse_structure(include_str!("fixtures/base.efs")).unwrap();
        let ms = MetaStructure::new(&b, 1 << 20, MetaLimits::default()).unwrap();
        let mut q = Quoter::new(&ms);
        let quote = q.quote_formula(&f).unwrap();
        let elem = eval_quote(&ms, &quote);
        let back = q.unquote_formula(elem).unwrap();
        prop_assert_eq!(back, f);
    }
}
