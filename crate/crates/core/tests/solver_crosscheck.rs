//! Emitted terms against the evaluator, with z3 as the referee. Skipped
//! when no solver is installed.

use std::fmt::Write as _;
use std::time::Duration;

use stubgen::bench::SolverCommand;
use stubgen::eval::evaluate;
use stubgen::grammar::{ExprTree, Grammar};
use stubgen::sampler::{sample_inputs, sample_value, stream_rng, SamplerConfig};
use stubgen::smtlib::{emit_stub, parse_model, sort_name, value_literal, TheoryMode};
use stubgen::values::{format_literal, Signature, Sort, Value};

fn solver() -> Option<SolverCommand> {
    let s = SolverCommand::from_env();
    if s.is_available() {
        Some(s)
    } else {
        eprintln!("no solver available; skipping");
        None
    }
}

/// Asks the solver for `stub(inputs)` for each input tuple.
fn solve_applications(
    solver: &SolverCommand,
    tree: &ExprTree,
    sig: &Signature,
    inputs: &[Vec<Value>],
    mode: TheoryMode,
) -> Vec<Value> {
    let mut script = String::from("(set-logic ALL)\n");
    script.push_str(&emit_stub(tree, sig, "stub", mode).unwrap());
    script.push('\n');
    let mut expected = Vec::new();
    for (i, args) in inputs.iter().enumerate() {
        let lits: Vec<String> = args.iter().map(|v| value_literal(v, mode).unwrap()).collect();
        let _ = writeln!(script, "(declare-const r{i} {})", sort_name(sig.ret, mode));
        let _ = writeln!(script, "(assert (= r{i} (stub {})))", lits.join(" "));
        expected.push((format!("r{i}"), sig.ret));
    }
    script.push_str("(check-sat)\n");
    let names: Vec<&str> = expected.iter().map(|(n, _)| n.as_str()).collect();
    let _ = writeln!(script, "(get-value ({}))", names.join(" "));
    let (out, _) = solver.run(&script, Duration::from_secs(30)).unwrap().expect("solver finished");
    let model = parse_model(&out, &expected, mode).unwrap_or_else(|e| panic!("{e}\n{script}\n{out}"));
    expected.iter().map(|(n, _)| model[n].clone()).collect()
}

/// SMT-LIB strings stop at U+2FFFF.
fn representable(values: &[Value]) -> bool {
    values.iter().all(|v| value_literal(v, TheoryMode::BvFp).is_ok())
}

const SIGS: &[(&[Sort], Sort)] = &[
    (&[Sort::Int32, Sort::Int32], Sort::Int32),
    (&[Sort::Int64, Sort::Int32], Sort::Int64),
    (&[Sort::Int8, Sort::Int16], Sort::Int16),
    (&[Sort::Float64, Sort::Float64], Sort::Float64),
    (&[Sort::Float32, Sort::Int32], Sort::Float32),
    (&[Sort::Float64], Sort::Bool),
    (&[Sort::Int32], Sort::Bool),
    (&[Sort::String, Sort::String], Sort::String),
    (&[Sort::String, Sort::Int32], Sort::Int32),
    (&[Sort::String], Sort::Bool),
];

#[test]
fn random_trees_agree_with_the_evaluator() {
    let Some(solver) = solver() else { return };
    let cfg = SamplerConfig { max_string_length: 6, ..SamplerConfig::default() };
    let mut checked = 0;
    let mut mismatches = Vec::new();
    for (si, (params, ret)) in SIGS.iter().enumerate() {
        let sig = Signature::positional(params, *ret);
        let grammar = Grammar::for_signature(&sig);
        for t in 0..12u64 {
            let mut rng = stream_rng(2024, &[si as u64, t]);
            let tree = grammar.random_tree(*ret, 4, &mut rng).unwrap();
            let inputs: Vec<Vec<Value>> = (0..6)
                .map(|_| sample_inputs(&sig, &cfg, &mut rng))
                .filter(|x| representable(x))
                .collect();
            let evaluated: Vec<_> = inputs.iter().map(|x| evaluate(&tree, x).unwrap()).collect();
            let kept: Vec<(Vec<Value>, Value)> = inputs
                .into_iter()
                .zip(evaluated)
                .filter_map(|(x, r)| r.ok().map(|v| (x, v)))
                .collect();
            if kept.is_empty() {
                continue;
            }
            let xs: Vec<Vec<Value>> = kept.iter().map(|(x, _)| x.clone()).collect();
            let solved = solve_applications(&solver, &tree, &sig, &xs, TheoryMode::BvFp);
            for ((x, want), got) in kept.iter().zip(&solved) {
                checked += 1;
                if !want.same_class(got) {
                    let args: Vec<String> = x.iter().map(format_literal).collect();
                    mismatches.push(format!("{tree} on {}: evaluator {want}, solver {got}", args.join(" ")));
                }
            }
        }
    }
    assert!(mismatches.is_empty(), "{} mismatches:\n{}", mismatches.len(), mismatches.join("\n"));
    assert!(checked > 300, "only {checked} applications checked");
}

#[test]
fn hand_written_terms_in_both_modes() {
    let Some(solver) = solver() else { return };
    let cases: &[(&[Sort], Sort, &str, &[&[&str]])] = &[
        (&[Sort::Int32, Sort::Int32], Sort::Int32, "(i32.div a b)", &[&["i32:-7", "i32:2"], &["i32:7", "i32:-2"], &["i32:-8", "i32:3"]]),
        (&[Sort::Int32, Sort::Int32], Sort::Int32, "(i32.rem a b)", &[&["i32:-7", "i32:2"], &["i32:7", "i32:-2"]]),
        (&[Sort::Int32, Sort::Int32], Sort::Int32, "(i32.shl a b)", &[&["i32:3", "i32:33"], &["i32:1", "i32:4"]]),
        (&[Sort::Int32, Sort::Int32], Sort::Int32, "(i32.max a b)", &[&["i32:-3", "i32:2"], &["i32:9", "i32:-2"]]),
        (&[Sort::String, Sort::String], Sort::Int32, "(str.indexof a b i32:-3)", &[&["str:\"hello\"", "str:\"l\""], &["str:\"abc\"", "str:\"z\""]]),
        (&[Sort::String, Sort::Int32], Sort::String, "(str.substr a b i32:2)", &[&["str:\"hello\"", "i32:-1"], &["str:\"hello\"", "i32:4"], &["str:\"hello\"", "i32:1"]]),
        (&[Sort::String, Sort::Int32], Sort::String, "(str.at a b)", &[&["str:\"hello\"", "i32:5"], &["str:\"hello\"", "i32:0"]]),
        (&[Sort::String], Sort::Int32, "(str.len a)", &[&["str:\"\""], &["str:\"abc\""]]),
    ];
    for (params, ret, text, inputs) in cases {
        let sig = Signature::positional(params, *ret);
        let tree = Grammar::for_signature_full(&sig).parse_tree(text).unwrap();
        let xs: Vec<Vec<Value>> = inputs
            .iter()
            .map(|row| row.iter().map(|l| l.parse().unwrap()).collect())
            .collect();
        for mode in [TheoryMode::BvFp, TheoryMode::IntReal] {
            let solved = solve_applications(&solver, &tree, &sig, &xs, mode);
            for (x, got) in xs.iter().zip(&solved) {
                let want = evaluate(&tree, x).unwrap().unwrap();
                assert!(want.same_class(got), "{mode} {text} {x:?}: {want} vs {got}");
            }
        }
    }
}

/// Every constant survives literal emission, solving and model decoding.
#[test]
fn constants_round_trip_through_the_solver() {
    let Some(solver) = solver() else { return };
    let cfg = SamplerConfig::default();
    let sorts = [Sort::Bool, Sort::Int8, Sort::Int16, Sort::Int32, Sort::Int64, Sort::Float32, Sort::Float64, Sort::String];
    let mut total = 0;
    for (k, sort) in sorts.iter().enumerate() {
        let mut rng = stream_rng(99, &[k as u64]);
        let values: Vec<Value> = std::iter::repeat_with(|| sample_value(*sort, &cfg, &mut rng))
            .filter(|v| representable(std::slice::from_ref(v)))
            .take(125)
            .collect();
        let mut script = String::from("(set-logic ALL)\n");
        let mut expected = Vec::new();
        for (i, v) in values.iter().enumerate() {
            let _ = writeln!(script, "(declare-const c{i} {})", sort_name(*sort, TheoryMode::BvFp));
            let _ = writeln!(script, "(assert (= c{i} {}))", value_literal(v, TheoryMode::BvFp).unwrap());
            expected.push((format!("c{i}"), *sort));
        }
        script.push_str("(check-sat)\n");
        let names: Vec<&str> = expected.iter().map(|(n, _)| n.as_str()).collect();
        let _ = writeln!(script, "(get-value ({}))", names.join(" "));
        let (out, _) = solver.run(&script, Duration::from_secs(30)).unwrap().unwrap();
        let model = parse_model(&out, &expected, TheoryMode::BvFp).unwrap();
        for (i, v) in values.iter().enumerate() {
            assert!(model[&format!("c{i}")].same_class(v), "{sort}: {v} came back as {}", model[&format!("c{i}")]);
            total += 1;
        }
    }
    assert_eq!(total, 1000);
}

/// Widens every `i32` in a tree's text to `i64`.
fn widen_text(text: &str) -> String {
    text.replace("i32.", "i64.").replace("i32:", "i64:").replace(".i32", ".i64")
}

/// On inputs where no subterm overflows 32 bits, both theories must find
/// inputs for targets the real evaluation produced.
#[test]
fn theories_are_equisatisfiable_without_overflow() {
    use stubgen::smtlib::{emit_benchmark_script, benchmark_bindings};
    let Some(solver) = solver() else { return };
    let sig = Signature::positional(&[Sort::Int32, Sort::Int32], Sort::Int32);
    let wide_sig = Signature::positional(&[Sort::Int64, Sort::Int64], Sort::Int64);
    let g = Grammar::for_signature(&sig);
    let wide_g = Grammar::for_signature(&wide_sig);
    let small = |rng: &mut stubgen::sampler::SamplerRng| Value::I32(rand::Rng::gen_range(rng, -50..=50));
    let mut checked = 0;
    let mut attempt = 0u64;
    while checked < 100 {
        attempt += 1;
        assert!(attempt < 5000, "too few overflow-free cases");
        let mut rng = stream_rng(77, &[attempt]);
        let tree = g.random_tree(Sort::Int32, 4, &mut rng).unwrap();
        let text = tree.to_string();
        if text.contains("shl") || text.contains("ashr") || text.contains("div") || text.contains("rem") {
            continue;
        }
        let wide = wide_g.parse_tree(&widen_text(&text)).unwrap();
        let x1 = vec![small(&mut rng), small(&mut rng)];
        let x2 = vec![small(&mut rng), small(&mut rng)];
        let widen = |x: &[Value]| -> Vec<Value> { x.iter().map(|v| Value::I64(v.as_i64().unwrap())).collect() };
        let no_overflow = [&x1, &x2].iter().all(|x| {
            let narrow_pre = tree.preorder();
            let wide_pre = wide.preorder();
            narrow_pre.iter().zip(&wide_pre).all(|((n, _), (w, _))| {
                match (evaluate(n, x).unwrap(), evaluate(w, &widen(x)).unwrap()) {
                    (Ok(a), Ok(b)) => a.as_i64() == b.as_i64() && a.as_bool() == b.as_bool(),
                    _ => false,
                }
            })
        });
        let o1 = evaluate(&tree, &x1).unwrap().unwrap();
        let o2 = evaluate(&tree, &x2).unwrap().unwrap();
        if !no_overflow || o1 == o2 {
            continue;
        }
        for mode in [TheoryMode::BvFp, TheoryMode::IntReal] {
            let stub = emit_stub(&tree, &sig, "stub", mode).unwrap();
            let script = emit_benchmark_script(&stub, "stub", &sig, (&o1, &o2), mode).unwrap();
            let (out, _) = solver.run(&script, Duration::from_secs(30)).unwrap().unwrap();
            let model = parse_model(&out, &benchmark_bindings(&sig), mode);
            assert!(model.is_ok(), "{mode} {text}: {out}");
        }
        checked += 1;
    }
}
