//! Fixtures shared by the golden-file test and the acceptance suite.

#![allow(dead_code)]

use std::path::PathBuf;

use stubgen::grammar::Grammar;
use stubgen::smtlib::{emit_benchmark_script, emit_stub, TheoryMode};
use stubgen::values::{Signature, Sort, Value};

pub const BLESS_ENV: &str = "STUBGEN_BLESS";

/// (name, parameter sorts, return sort, tree)
const FIXTURES: &[(&str, &[Sort], Sort, &str)] = &[
    ("is_nan", &[Sort::Float64], Sort::Bool, "(not (f64.lt f64:0xbff0000000000000 (f64.abs a)))"),
    ("abs_max", &[Sort::Int32, Sort::Int32], Sort::Int32, "(i32.max (i32.abs a) (i32.neg b))"),
    ("div_rem", &[Sort::Int64, Sort::Int64], Sort::Int64, "(i64.add (i64.div a b) (i64.rem a b))"),
    ("shift", &[Sort::Int8, Sort::Int32], Sort::Int32, "(i32.shl (widen.i8.i32 a) b)"),
    ("float_mix", &[Sort::Float32, Sort::Float64], Sort::Float64, "(f64.sqrt (f64.min (widen.f32.f64 a) (f64.rint b)))"),
    ("string_ops", &[Sort::String, Sort::String], Sort::String, "(ite.str (str.prefixof a b) (str.concat a str:\"\\\"q\\\\\") (str.substr b (str.len a) i32:3))"),
    ("shared", &[Sort::Int32], Sort::Bool, "(and (i32.lt (i32.mul a a) i32:100) (i32.le i32:0 (i32.mul a a)))"),
];

pub fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

/// Every golden file name with the text the emitter produces today.
pub fn golden_outputs() -> Vec<(String, String)> {
    let mut out = Vec::new();
    for (name, params, ret, text) in FIXTURES {
        let sig = Signature::positional(params, *ret);
        let tree = Grammar::for_signature_full(&sig).parse_tree(text).unwrap_or_else(|e| panic!("{name}: {e}"));
        for (mode, suffix) in [(TheoryMode::BvFp, "bvfp"), (TheoryMode::IntReal, "intreal")] {
            let body = match emit_stub(&tree, &sig, name, mode) {
                Ok(s) => s + "\n",
                Err(e) => format!("; {e}\n"),
            };
            out.push((format!("{name}.{suffix}.smt2"), body));
        }
    }
    let sig = Signature::positional(&[Sort::Float64], Sort::Bool);
    let tree = Grammar::for_signature_full(&sig).parse_tree(FIXTURES[0].3).unwrap();
    let stub = emit_stub(&tree, &sig, "is_nan", TheoryMode::BvFp).unwrap();
    let script = emit_benchmark_script(&stub, "is_nan", &sig, (&Value::Bool(true), &Value::Bool(false)), TheoryMode::BvFp).unwrap();
    out.push(("is_nan.benchmark.smt2".to_string(), script));
    out
}

/// Compares against the frozen files, or rewrites them when blessing.
/// Returns the names that differ.
pub fn check_goldens() -> Vec<String> {
    let dir = golden_dir();
    let bless = std::env::var_os(BLESS_ENV).is_some();
    let mut bad = Vec::new();
    for (file, text) in golden_outputs() {
        let path = dir.join(&file);
        if bless {
            std::fs::write(&path, &text).unwrap();
        } else if std::fs::read_to_string(&path).ok().as_deref() != Some(text.as_str()) {
            bad.push(file);
        }
    }
    bad
}
