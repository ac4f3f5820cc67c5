//! Command-line front end: model checking, prenex normalization, stage
//! traces, homomorphism checks, and the generated-truth-predicate pipeline.
//!
//! Exit codes: 0 = verdict true / success, 1 = verdict false,
//! 2 = usage or parse error, 3 = internal invariant breach.

use clap::{Parser as ClapParser, Subcommand};
use efpl::evaluator::{evaluate, stage_report, StageReport, Strategy};
use efpl::meta::{meta_vocabulary, MetaLimits};
use efpl::metacheck::{depth_stability, footprint_lower_bound, meta_check, MetaCheckError};
use efpl::parser::{
    parse_formula, parse_formula_unchecked, parse_program, parse_structure, parse_vocabulary,
    print_formula, print_program, print_vocabulary,
};
use efpl::satgen::generate_sat_program;
use efpl::structure::{check_homomorphism, Assignment, Domain, Homomorphism, Structure};
use efpl::syntax::{free_vars, to_prenex, validate_program, Formula, Ident};
use serde_json::json;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::exit;

#[derive(ClapParser)]
#[command(name = "efpl", version, about = "Existential fixed point logic toolkit")]
struct Cli {
    /// Emit machine-readable JSON
    #[arg(long, global = true)]
    json: bool,
    /// Seed for randomized harnesses; commands here are deterministic
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate a formula in a finite structure
    Check {
        /// Structure file
        #[arg(long)]
        structure: PathBuf,
        /// Formula file
        #[arg(long)]
        formula: PathBuf,
        /// Bind a free variable to a universe element, e.g. `--bind x=a`
        #[arg(long = "bind")]
        bind: Vec<String>,
        /// Print the saturation stage log of the outermost LET
        #[arg(long)]
        trace_stages: bool,
    },
    /// Rewrite an EL formula into prenex existential form
    Prenex {
        /// Formula file
        #[arg(long)]
        formula: PathBuf,
    },
    /// Saturate a program and report its stages
    Stages {
        /// Structure file
        #[arg(long)]
        structure: PathBuf,
        /// Program file
        #[arg(long)]
        program: PathBuf,
    },
    /// Verify the homomorphism conditions between two structures
    HomCheck {
        /// Source structure file
        #[arg(long)]
        source: PathBuf,
        /// Target structure file
        #[arg(long)]
        target: PathBuf,
        /// Element mapping, e.g. `--map a=u --map b=v`
        #[arg(long = "map")]
        map: Vec<String>,
        /// Sentence file (one per line) for truth-transport checks
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
    /// Generate the truth-predicate program for a base vocabulary
    GenSat {
        /// Vocabulary file
        #[arg(long)]
        vocab: PathBuf,
        /// Output file (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the meta vocabulary for a base vocabulary
    GenVocab {
        /// Vocabulary file
        #[arg(long)]
        vocab: PathBuf,
    },
    /// Check a sentence natively and through the generated Sat program
    MetaCheck {
        /// Base structure file
        #[arg(long)]
        structure: PathBuf,
        /// Sentence file
        #[arg(long)]
        formula: PathBuf,
        /// Truncation bound (default: computed footprint bound + 4)
        #[arg(long)]
        depth: Option<usize>,
        /// Also re-check at the N-1 following depths
        #[arg(long)]
        stability: Option<usize>,
    },
}

fn fail(code: i32, msg: impl AsRef<str>) -> ! {
    eprintln!("efpl: {}", msg.as_ref());
    exit(code);
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path)
        .unwrap_or_else(|e| fail(2, format!("cannot read {}: {e}", path.display())))
}

fn load_structure(path: &Path) -> Structure {
    match parse_structure(&read(path)) {
        Ok((_, s)) => s,
        Err(e) => fail(2, format!("{}: {e}", path.display())),
    }
}

fn verdict_exit(v: bool, json: bool, extra: Option<serde_json::Value>) -> ! {
    if json {
        let mut obj = json!({ "verdict": v });
        if let Some(serde_json::Value::Object(m)) = extra {
            for (k, val) in m {
                obj[k] = val;
            }
        }
        println!("{obj}");
    } else {
        println!("{v}");
    }
    exit(if v { 0 } else { 1 });
}

fn stage_lines(st: &Structure, r: &StageReport) -> Vec<String> {
    r.deltas
        .iter()
        .enumerate()
        .map(|(k, delta)| {
            let mut line = format!("stage {}:", k + 1);
            for (head, tuple) in delta {
                let names: Vec<String> =
                    tuple.iter().map(|e| st.name(*e).to_string()).collect();
                line.push_str(&format!(" {head} += ({})", names.join(", ")));
            }
            line
        })
        .collect()
}

fn stages_json(st: &Structure, r: &StageReport) -> serde_json::Value {
    json!({
        "closure_stage": r.closure_stage,
        "stages": r.deltas.iter().map(|delta| {
            delta.iter().map(|(head, tuple)| {
                json!({
                    "head": head.to_string(),
                    "tuple": tuple.iter().map(|e| st.name(*e).to_string()).collect::<Vec<_>>(),
                })
            }).collect::<Vec<_>>()
        }).collect::<Vec<_>>(),
    })
}

fn cmd_check(
    structure: &Path,
    formula: &Path,
    bind: &[String],
    trace_stages: bool,
    json: bool,
) -> ! {
    let st = load_structure(structure);
    let f = parse_formula(&read(formula), st.vocab())
        .unwrap_or_else(|e| fail(2, format!("{}: {e}", formula.display())));
    let mut s = Assignment::empty();
    for b in bind {
        let (v, name) = b
            .split_once('=')
            .unwrap_or_else(|| fail(2, format!("bad binding `{b}`, expected `var=element`")));
        let e = st
            .elem(&Ident::new(name))
            .unwrap_or_else(|| fail(2, format!("`{name}` is not a universe element")));
        s = s.modify(&Ident::new(v), e);
    }
    let unbound: Vec<String> = free_vars(&f)
        .into_iter()
        .filter(|v| !s.in_dom(v))
        .map(|v| v.to_string())
        .collect();
    if !unbound.is_empty() {
        fail(2, format!("unbound free variables: {{{}}}", unbound.join(", ")));
    }
    let mut trace = None;
    if trace_stages {
        if let Formula::Let(p, _) = &f {
            let report = stage_report(p, &s, &st, Strategy::SemiNaive)
                .unwrap_or_else(|e| fail(3, e.to_string()));
            if !json {
                for line in stage_lines(&st, &report) {
                    println!("{line}");
                }
            }
            trace = Some(stages_json(&st, &report));
        }
    }
    let v = evaluate(&f, &s, &st).unwrap_or_else(|e| fail(3, e.to_string()));
    let extra = trace.map(|t| json!({ "trace": t }));
    verdict_exit(v, json, extra);
}

fn cmd_prenex(formula: &Path, json: bool) -> ! {
    let f = parse_formula_unchecked(&read(formula))
        .unwrap_or_else(|e| fail(2, format!("{}: {e}", formula.display())));
    let p = to_prenex(&f).unwrap_or_else(|e| fail(2, e.to_string()));
    let text = print_formula(&p);
    if json {
        println!("{}", json!({ "prenex": text }));
    } else {
        println!("{text}");
    }
    exit(0);
}

fn cmd_stages(structure: &Path, program: &Path, json: bool) -> ! {
    let st = load_structure(structure);
    let p = parse_program(&read(program))
        .unwrap_or_else(|e| fail(2, format!("{}: {e}", program.display())));
    let violations = validate_program(&p, st.vocab());
    if !violations.is_empty() {
        fail(2, format!("invalid program: {violations:?}"));
    }
    let report = stage_report(&p, &Assignment::empty(), &st, Strategy::SemiNaive)
        .unwrap_or_else(|e| fail(3, e.to_string()));
    if json {
        println!("{}", stages_json(&st, &report));
    } else {
        for line in stage_lines(&st, &report) {
            println!("{line}");
        }
        println!("closure stage: {}", report.closure_stage);
    }
    exit(0);
}

fn cmd_hom_check(
    source: &Path,
    target: &Path,
    map: &[String],
    corpus: Option<&Path>,
    json: bool,
) -> ! {
    let src = load_structure(source);
    let tgt = load_structure(target);
    let mut m = BTreeMap::new();
    for pair in map {
        let (a, u) = pair
            .split_once('=')
            .unwrap_or_else(|| fail(2, format!("bad mapping `{pair}`, expected `a=u`")));
        let ea = src
            .elem(&Ident::new(a))
            .unwrap_or_else(|| fail(2, format!("`{a}` is not a source element")));
        let eu = tgt
            .elem(&Ident::new(u))
            .unwrap_or_else(|| fail(2, format!("`{u}` is not a target element")));
        m.insert(ea, eu);
    }
    let h = Homomorphism { map: m };
    let violations = check_homomorphism(&src, &tgt, &h).unwrap_or_else(|e| fail(2, e));
    let mut transport_failures: Vec<String> = Vec::new();
    let mut transported = 0usize;
    if let Some(path) = corpus {
        for (i, raw) in read(path).lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let f = parse_formula(line, src.vocab())
                .unwrap_or_else(|e| fail(2, format!("{}:{}: {e}", path.display(), i + 1)));
            if !free_vars(&f).is_empty() {
                fail(2, format!("{}:{}: corpus entries must be sentences", path.display(), i + 1));
            }
            let in_src = evaluate(&f, &Assignment::empty(), &src)
                .unwrap_or_else(|e| fail(3, e.to_string()));
            if !in_src {
                continue;
            }
            transported += 1;
            let in_tgt = evaluate(&f, &Assignment::empty(), &tgt)
                .unwrap_or_else(|e| fail(3, e.to_string()));
            if !in_tgt {
                transport_failures.push(line.to_string());
            }
        }
    }
    let accepted = violations.is_empty() && transport_failures.is_empty();
    if json {
        println!(
            "{}",
            json!({
                "accepted": accepted,
                "violations": violations.iter()
                    .map(|v| json!({ "condition": format!("{:?}", v.condition), "detail": v.detail }))
                    .collect::<Vec<_>>(),
                "transported": transported,
                "transport_failures": transport_failures,
            })
        );
    } else {
        for v in &violations {
            println!("{:?}: {}", v.condition, v.detail);
        }
        for f in &transport_failures {
            println!("truth not transported: {f}");
        }
        if accepted {
            println!("accepted ({transported} sentences transported)");
        }
    }
    exit(if accepted { 0 } else { 1 });
}

fn cmd_gen_sat(vocab: &Path, out: Option<&Path>, json: bool) -> ! {
    let v = parse_vocabulary(&read(vocab))
        .unwrap_or_else(|e| fail(2, format!("{}: {e}", vocab.display())));
    let p = generate_sat_program(&v, MetaLimits::default()).unwrap_or_else(|e| fail(2, e));
    let text = print_program(&p);
    match out {
        Some(path) => std::fs::write(path, &text)
            .unwrap_or_else(|e| fail(2, format!("cannot write {}: {e}", path.display()))),
        None if json => println!("{}", json!({ "program": text })),
        None => print!("{text}"),
    }
    exit(0);
}

fn cmd_gen_vocab(vocab: &Path, json: bool) -> ! {
    let v = parse_vocabulary(&read(vocab))
        .unwrap_or_else(|e| fail(2, format!("{}: {e}", vocab.display())));
    let mv = meta_vocabulary(&v).unwrap_or_else(|e| fail(2, e));
    let text = print_vocabulary(&mv);
    if json {
        println!("{}", json!({ "vocabulary": text }));
    } else {
        print!("{text}");
    }
    exit(0);
}

fn meta_error_exit(e: MetaCheckError) -> ! {
    let code = match &e {
        MetaCheckError::Eval(_) => 3,
        _ => 2,
    };
    fail(code, e.to_string());
}

fn cmd_meta_check(
    structure: &Path,
    formula: &Path,
    depth: Option<usize>,
    stability: Option<usize>,
    json: bool,
) -> ! {
    let st = load_structure(structure);
    let f = parse_formula(&read(formula), st.vocab())
        .unwrap_or_else(|e| fail(2, format!("{}: {e}", formula.display())));
    let d = depth.unwrap_or_else(|| {
        footprint_lower_bound(&f, &st).unwrap_or_else(|e| meta_error_exit(e)) + 4
    });
    let print_report = |r: &efpl::metacheck::MetaCheckReport| {
        println!("sentence: {}", r.sentence);
        println!("depth: {}", r.depth);
        println!("native: {}", r.native);
        println!("sat: {}", r.sat);
        println!("agreement: {}", r.agreement);
        println!("closure stage: {}", r.closure_stage);
        println!("elapsed: {}ms", r.elapsed_ms);
    };
    match stability {
        Some(n) => {
            let rep = depth_stability(&f, &st, d..d + n.max(1))
                .unwrap_or_else(|e| meta_error_exit(e));
            if json {
                println!("{}", serde_json::to_string(&rep).unwrap());
            } else {
                for r in &rep.reports {
                    print_report(r);
                }
                println!("stable: {}", rep.stable);
            }
            let agree = rep.reports.iter().all(|r| r.agreement);
            if !rep.stable && agree {
                fail(3, "verdict flipped between depths");
            }
            exit(if agree { 0 } else { 1 });
        }
        None => {
            let r = meta_check(&f, &st, d).unwrap_or_else(|e| meta_error_exit(e));
            if json {
                println!("{}", serde_json::to_string(&r).unwrap());
            } else {
                print_report(&r);
            }
            exit(if r.agreement { 0 } else { 1 });
        }
    }
}

fn main() {
    let cli = Cli::parse();
    let _ = cli.seed; // reserved for randomized harnesses
    let json = cli.json;
    match cli.cmd {
        Cmd::Check { structure, formula, bind, trace_stages } => {
            cmd_check(&structure, &formula, &bind, trace_stages, json)
        }
        Cmd::Prenex { formula } => cmd_prenex(&formula, json),
        Cmd::Stages { structure, program } => cmd_stages(&structure, &program, json),
        Cmd::HomCheck { source, target, map, corpus } => {
            cmd_hom_check(&source, &target, &map, corpus.as_deref(), json)
        }
        Cmd::GenSat { vocab, out } => cmd_gen_sat(&vocab, out.as_deref(), json),
        Cmd::GenVocab { vocab } => cmd_gen_vocab(&vocab, json),
        Cmd::MetaCheck { structure, formula, depth, stability } => {
            cmd_meta_check(&structure, &formula, depth, stability, json)
        }
    }
}
