//! End-to-end check of the generated truth predicate: for a sentence φ,
//! `LET Π_sat THEN Sat(⌜φ⌝, ⟨⟩, ∅̇)` over the truncated meta-structure X_d
//! agrees with evaluating φ there directly.

use crate::evaluator::{evaluate, EvalError};
use crate::meta::{eval_quote, names, MetaLimits, MetaStructure, QuoteError, Quoter, BOTTOM};
use crate::parser::print_formula;
use crate::satgen::generate_sat_program;
use crate::structure::{Assignment, Domain, Structure};
use crate::syntax::{eq_ident, free_predicates, free_vars, Formula, Ident, Term};
use crate::tabled::evaluate_demand_with_stats;
use serde::Serialize;
use std::collections::BTreeSet;
use std::time::Instant;

#[derive(Debug, thiserror::Error)]
pub enum MetaCheckError {
    #[error("not a sentence: free variables {0:?}")]
    NotASentence(Vec<Ident>),
    #[error("depth insufficient: the quotation has size {need}, the bound is {have}")]
    DepthInsufficient { need: usize, have: usize },
    #[error("{0}")]
    Quote(#[from] QuoteError),
    #[error("{0}")]
    Meta(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// One agreement check. `closure_stage` is the number of evaluation rounds
/// the demand-driven engine needed before the Sat tables closed.
#[derive(Debug, Clone, Serialize)]
pub struct MetaCheckReport {
    pub sentence: String,
    pub depth: usize,
    pub native: bool,
    pub sat: bool,
    pub agreement: bool,
    pub closure_stage: usize,
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DepthStabilityReport {
    pub reports: Vec<MetaCheckReport>,
    pub stable: bool,
}

fn collect_vars(f: &Formula, out: &mut BTreeSet<Ident>) {
    match f {
        Formula::Atom(_, args) | Formula::NegAtom(_, args) => {
            for a in args {
                term_vars(a, out);
            }
        }
        Formula::Conj(a, b) | Formula::Disj(a, b) => {
            collect_vars(a, out);
            collect_vars(b, out);
        }
        Formula::Exists(v, body) => {
            out.insert(v.clone());
            collect_vars(body, out);
        }
        Formula::Let(p, body) => {
            for r in &p.rules {
                out.extend(r.head_vars.iter().cloned());
                collect_vars(&r.body, out);
            }
            collect_vars(body, out);
        }
    }
}

fn term_vars(t: &Term, out: &mut BTreeSet<Ident>) {
    match t {
        Term::Var(v) => {
            out.insert(v.clone());
        }
        Term::App(_, args) => {
            for a in args {
                term_vars(a, out);
            }
        }
    }
}

/// Conservative lower bound on the truncation depth needed to meta-check
/// `f`: the exact quotation size, doubled to cover the program
/// concatenation and renaming done by the induction-assertion clause, plus
/// the largest assignment the quantifier clause can build from
/// pool witnesses, plus the largest base symbol name. The CLI default
/// depth is this bound plus a margin of 4.
pub fn footprint_lower_bound(f: &Formula, base: &Structure) -> Result<usize, MetaCheckError> {
    // measure the quote in an effectively unbounded structure
    let ms = MetaStructure::new(base, 1 << 20, MetaLimits::default())
        .map_err(MetaCheckError::Meta)?;
    let quote = Quoter::new(&ms).quote_formula(f)?;
    let q = ms.size(eval_quote(&ms, &quote));
    let mut vars = BTreeSet::new();
    collect_vars(f, &mut vars);
    let k = vars.len();
    // Assgt(⟨(v_i, a_i)⟩_{i<k}) with pool values of size 1
    let assignment = 1 + (0..k).map(|i| i + 4).sum::<usize>();
    let vocab = base.vocab();
    let name = vocab.functions.len() + 1 + vocab.relations.len() + 1;
    Ok(2 * q + assignment + name)
}

/// The goal `LET Π_sat THEN Sat(⌜f⌝, ⟨⟩, ∅̇)` together with the measured
/// quotation size, or a depth error if the quote does not fit in `ms`.
fn sat_goal(ms: &MetaStructure, f: &Formula) -> Result<Formula, MetaCheckError> {
    let quote = Quoter::new(ms).quote_formula(f)?;
    let id = eval_quote(ms, &quote);
    if id == BOTTOM {
        let need = footprint_lower_bound(f, ms.base())?;
        return Err(MetaCheckError::DepthInsufficient { need, have: ms.depth() });
    }
    let sat = generate_sat_program(ms.base().vocab(), ms.limits())
        .map_err(MetaCheckError::Meta)?;
    Ok(Formula::Let(
        sat,
        Box::new(Formula::Atom(
            Ident::new("Sat"),
            vec![quote, Term::app(names::NIL, vec![]), Term::app(names::EMPTY, vec![])],
        )),
    ))
}

/// Evaluate the sentence `f` natively over X_d and through the generated
/// Sat program, and report both verdicts.
pub fn meta_check(
    f: &Formula,
    base: &Structure,
    d: usize,
) -> Result<MetaCheckReport, MetaCheckError> {
    let fv = free_vars(f);
    if !fv.is_empty() {
        return Err(MetaCheckError::NotASentence(fv.into_iter().collect()));
    }
    let start = Instant::now();
    let ms = MetaStructure::new(base, d, MetaLimits::default()).map_err(MetaCheckError::Meta)?;
    let goal = sat_goal(&ms, f)?;
    let native = evaluate(f, &Assignment::empty(), &ms)?;
    let (sat, stats) = evaluate_demand_with_stats(&goal, &Assignment::empty(), &ms)?;
    Ok(MetaCheckReport {
        sentence: print_formula(f),
        depth: d,
        native,
        sat,
        agreement: native == sat,
        closure_stage: stats.rounds,
        elapsed_ms: start.elapsed().as_millis() as u64,
    })
}

/// Re-check `f` at every depth in `depths`; verdicts must not flip between
/// depths at which the quote fits.
pub fn depth_stability(
    f: &Formula,
    base: &Structure,
    depths: impl IntoIterator<Item = usize>,
) -> Result<DepthStabilityReport, MetaCheckError> {
    let mut reports = Vec::new();
    for d in depths {
        reports.push(meta_check(f, base, d)?);
    }
    let stable = reports.iter().all(|r| r.agreement)
        && reports.windows(2).all(|w| w[0].native == w[1].native);
    Ok(DepthStabilityReport { reports, stable })
}

/// Candidate reductions of `f`: every single collapse of an inner node to
/// one of its children that still yields a sentence over the base
/// vocabulary.
fn shrink_candidates(f: &Formula, base: &Structure) -> Vec<Formula> {
    fn collapse(f: &Formula, out: &mut Vec<Formula>) {
        match f {
            Formula::Atom(..) | Formula::NegAtom(..) => {}
            Formula::Conj(a, b) | Formula::Disj(a, b) => {
                out.push((**a).clone());
                out.push((**b).clone());
                let mut inner = Vec::new();
                collapse(a, &mut inner);
                for fa in inner {
                    out.push(match f {
                        Formula::Conj(..) => Formula::Conj(Box::new(fa), b.clone()),
                        _ => Formula::Disj(Box::new(fa), b.clone()),
                    });
                }
                let mut inner = Vec::new();
                collapse(b, &mut inner);
                for fb in inner {
                    out.push(match f {
                        Formula::Conj(..) => Formula::Conj(a.clone(), Box::new(fb)),
                        _ => Formula::Disj(a.clone(), Box::new(fb)),
                    });
                }
            }
            Formula::Exists(v, body) => {
                out.push((**body).clone());
                let mut inner = Vec::new();
                collapse(body, &mut inner);
                for fb in inner {
                    out.push(Formula::Exists(v.clone(), Box::new(fb)));
                }
            }
            Formula::Let(p, body) => {
                out.push((**body).clone());
                let mut inner = Vec::new();
                collapse(body, &mut inner);
                for fb in inner {
                    out.push(Formula::Let(p.clone(), Box::new(fb)));
                }
            }
        }
    }
    let mut out = Vec::new();
    collapse(f, &mut out);
    out.retain(|c| {
        free_vars(c).is_empty()
            && free_predicates(c)
                .iter()
                .all(|p| *p == eq_ident() || base.vocab().relation(p).is_some())
    });
    out
}

/// Shrink a disagreeing sentence by repeated subformula deletion while the
/// disagreement persists; returns a minimal disagreeing sentence.
pub fn shrink_disagreement(f: &Formula, base: &Structure, d: usize) -> Formula {
    let disagrees = |c: &Formula| {
        meta_check(c, base, d).map(|r| !r.agreement).unwrap_or(false)
    };
    let mut current = f.clone();
    'outer: loop {
        for c in shrink_candidates(&current, base) {
            if disagrees(&c) {
                current = c;
                continue 'outer;
            }
        }
        return current;
    }
}
