//! Python bindings: text in, plain Python values out. Structures, formulas,
//! programs, and vocabularies travel as source text in the same syntax the
//! CLI uses; verdicts and reports come back as bools, tuples, and a small
//! report class.

use std::collections::BTreeMap;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use efpl::evaluator::{evaluate, stage_report, Strategy};
use efpl::meta::{meta_vocabulary, MetaLimits};
use efpl::metacheck::{footprint_lower_bound, meta_check as meta_check_impl};
use efpl::parser::{
    parse_formula, parse_formula_unchecked, parse_program, parse_structure, parse_vocabulary,
    print_formula, print_program, print_vocabulary,
};
use efpl::satgen::generate_sat_program;
use efpl::structure::{check_homomorphism, Assignment, Domain, Homomorphism};
use efpl::syntax::{free_vars, to_prenex, validate_program, Ident};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A finite structure parsed from its textual description.
#[pyclass(name = "Structure")]
struct PyStructure {
    inner: efpl::structure::Structure,
}

/// One native-versus-Sat agreement check.
#[pyclass(name = "MetaCheckReport")]
struct PyMetaCheckReport {
    #[pyo3(get)]
    sentence: String,
    #[pyo3(get)]
    depth: usize,
    #[pyo3(get)]
    native: bool,
    #[pyo3(get)]
    sat: bool,
    #[pyo3(get)]
    agreement: bool,
    #[pyo3(get)]
    closure_stage: usize,
    #[pyo3(get)]
    elapsed_ms: u64,
}

#[pymethods]
impl PyMetaCheckReport {
    fn __repr__(&self) -> String {
        format!(
            "MetaCheckReport(sentence={:?}, depth={}, native={}, sat={}, agreement={})",
            self.sentence, self.depth, self.native, self.sat, self.agreement
        )
    }
}

#[pymethods]
impl PyStructure {
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        let (_, inner) = parse_structure(text).map_err(err)?;
        Ok(PyStructure { inner })
    }

    /// Universe element names, in declaration order.
    fn universe(&self) -> Vec<String> {
        self.inner.elements().map(|e| self.inner.name(e).to_string()).collect()
    }

    /// Evaluate a formula; `bind` maps free variables to element names.
    #[pyo3(signature = (formula, bind = None))]
    fn check(&self, formula: &str, bind: Option<BTreeMap<String, String>>) -> PyResult<bool> {
        let f = parse_formula(formula, self.inner.vocab()).map_err(err)?;
        let mut s = Assignment::empty();
        for (v, name) in bind.unwrap_or_default() {
            let e = self
                .inner
                .elem(&Ident::new(&name))
                .ok_or_else(|| err(format!("unknown element `{name}`")))?;
            s = s.modify(&Ident::new(&v), e);
        }
        let unbound: Vec<String> = free_vars(&f)
            .into_iter()
            .filter(|v| s.lookup(v).is_none())
            .map(|v| v.to_string())
            .collect();
        if !unbound.is_empty() {
            return Err(err(format!("unbound free variables: {}", unbound.join(", "))));
        }
        evaluate(&f, &s, &self.inner).map_err(err)
    }

    /// Saturate a program and report `(closure_stage, deltas)`, where
    /// `deltas[k]` lists the `(head, tuple)` facts first derived at stage
    /// k+1, tuples given as element names.
    fn stages(&self, program: &str) -> PyResult<(usize, Vec<Vec<(String, Vec<String>)>>)> {
        let p = parse_program(program).map_err(err)?;
        let violations = validate_program(&p, self.inner.vocab());
        if !violations.is_empty() {
            return Err(err(format!("{violations:?}")));
        }
        let rep = stage_report(&p, &Assignment::empty(), &self.inner, Strategy::SemiNaive)
            .map_err(err)?;
        let deltas = rep
            .deltas
            .into_iter()
            .map(|stage| {
                stage
                    .into_iter()
                    .map(|(h, t)| {
                        let names =
                            t.iter().map(|e| self.inner.name(*e).to_string()).collect();
                        (h.to_string(), names)
                    })
                    .collect()
            })
            .collect();
        Ok((rep.closure_stage, deltas))
    }

    /// Check a sentence natively and through the generated truth program
    /// over the truncated meta structure; the default depth is derived from
    /// the sentence's quotation footprint.
    #[pyo3(signature = (formula, depth = None))]
    fn meta_check(&self, formula: &str, depth: Option<usize>) -> PyResult<PyMetaCheckReport> {
        let f = parse_formula(formula, self.inner.vocab()).map_err(err)?;
        let d = match depth {
            Some(d) => d,
            None => footprint_lower_bound(&f, &self.inner).map_err(err)? + 4,
        };
        let r = meta_check_impl(&f, &self.inner, d).map_err(err)?;
        Ok(PyMetaCheckReport {
            sentence: r.sentence,
            depth: r.depth,
            native: r.native,
            sat: r.sat,
            agreement: r.agreement,
            closure_stage: r.closure_stage,
            elapsed_ms: r.elapsed_ms,
        })
    }

    /// Violated homomorphism conditions for `map` (element name to element
    /// name) from `self` into `target`; empty means the map is accepted.
    fn hom_check(
        &self,
        target: &PyStructure,
        map: BTreeMap<String, String>,
    ) -> PyResult<Vec<String>> {
        let mut h = Homomorphism { map: BTreeMap::new() };
        for (a, b) in &map {
            let sa = self
                .inner
                .elem(&Ident::new(a))
                .ok_or_else(|| err(format!("unknown source element `{a}`")))?;
            let tb = target
                .inner
                .elem(&Ident::new(b))
                .ok_or_else(|| err(format!("unknown target element `{b}`")))?;
            h.map.insert(sa, tb);
        }
        let violations = check_homomorphism(&self.inner, &target.inner, &h).map_err(err)?;
        Ok(violations
            .into_iter()
            .map(|v| format!("{:?}: {}", v.condition, v.detail))
            .collect())
    }
}

/// Prenex normal form of an EL formula.
#[pyfunction]
fn prenex(formula: &str) -> PyResult<String> {
    let f = parse_formula_unchecked(formula).map_err(err)?;
    let p = to_prenex(&f).map_err(err)?;
    Ok(print_formula(&p))
}

/// The generated truth program for a base vocabulary.
#[pyfunction]
fn gen_sat(vocab: &str) -> PyResult<String> {
    let v = parse_vocabulary(vocab).map_err(err)?;
    let p = generate_sat_program(&v, MetaLimits::default()).map_err(err)?;
    Ok(print_program(&p))
}

/// The meta vocabulary induced by a base vocabulary.
#[pyfunction]
fn gen_vocab(vocab: &str) -> PyResult<String> {
    let v = parse_vocabulary(vocab).map_err(err)?;
    let mv = meta_vocabulary(&v).map_err(err)?;
    Ok(print_vocabulary(&mv))
}

#[pymodule]
#[pyo3(name = "_native")]
fn efpl_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyStructure>()?;
    m.add_class::<PyMetaCheckReport>()?;
    m.add_function(wrap_pyfunction!(prenex, m)?)?;
    m.add_function(wrap_pyfunction!(gen_sat, m)?)?;
    m.add_function(wrap_pyfunction!(gen_vocab, m)?)?;
    Ok(())
}
