//! SMT-LIB2 emission of stubs and benchmark scripts, and decoding of solver
//! models.
//!
//! Two theory mappings are supported. `BvFp` is bit-precise: integers are
//! bit-vectors of their width and floats IEEE `FloatingPoint` terms, so the
//! stub means exactly what the evaluator computes (except that division by
//! zero is total in SMT-LIB where the evaluator faults). `IntReal` maps
//! integers to `Int` and floats to `Real`; it cannot express wrap-around,
//! NaN or infinities, and approximates `sqrt` and `rint`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grammar::{BaseOp, ExprTree, Operator};
use crate::values::{Signature, Sort, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum TheoryMode {
    #[default]
    BvFp,
    IntReal,
}

impl std::fmt::Display for TheoryMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TheoryMode::BvFp => "bvfp",
            TheoryMode::IntReal => "intreal",
        })
    }
}

impl std::str::FromStr for TheoryMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "bvfp" => Ok(TheoryMode::BvFp),
            "intreal" => Ok(TheoryMode::IntReal),
            _ => Err(format!("unknown theory mode `{s}` (expected bvfp or intreal)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SmtError {
    #[error("constant {0} has no representation in this theory mode")]
    UnrepresentableConstant(String),
    #[error("solver reported unsat")]
    SolverUnsat,
    #[error("solver reported unknown")]
    SolverUnknown,
    #[error("cannot parse solver output: {0}")]
    Parse(String),
}

/// SMT-LIB sort of `sort` under `mode`.
pub fn sort_name(sort: Sort, mode: TheoryMode) -> String {
    match (mode, sort) {
        (_, Sort::Bool) => "Bool".into(),
        (_, Sort::String) => "String".into(),
        (TheoryMode::BvFp, s) if s.is_integer() => format!("(_ BitVec {})", s.width()),
        (TheoryMode::BvFp, s) => {
            let (e, m) = s.float_format().expect("float sort");
            format!("(_ FloatingPoint {e} {m})")
        }
        (TheoryMode::IntReal, s) if s.is_integer() => "Int".into(),
        (TheoryMode::IntReal, _) => "Real".into(),
    }
}

/// Escapes a string literal. Code points above U+2FFFF cannot be written.
pub fn string_literal(s: &str) -> Result<String, SmtError> {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\"\""),
            '\\' => out.push_str("\\u{5c}"),
            ' '..='~' => out.push(c),
            c if (c as u32) <= 0x2ffff => {
                let _ = write!(out, "\\u{{{:x}}}", c as u32);
            }
            c => {
                return Err(SmtError::UnrepresentableConstant(format!("string with code point U+{:X}", c as u32)));
            }
        }
    }
    out.push('"');
    Ok(out)
}

fn bits(value: u64, width: u32) -> String {
    (0..width).rev().map(|i| if value >> i & 1 == 1 { '1' } else { '0' }).collect()
}

fn int_literal_bv(v: i64, width: u32) -> String {
    let mask = if width == 64 { u64::MAX } else { (1u64 << width) - 1 };
    format!("#x{:0w$x}", (v as u64) & mask, w = (width / 4) as usize)
}

fn int_literal_int(v: i128) -> String {
    if v < 0 {
        format!("(- {})", v.unsigned_abs())
    } else {
        v.to_string()
    }
}

fn real_literal(q: &BigRational) -> String {
    let mag = q.abs();
    let body = if mag.is_integer() {
        format!("{}.0", mag.numer())
    } else {
        format!("(/ {}.0 {}.0)", mag.numer(), mag.denom())
    };
    if q.is_negative() {
        format!("(- {body})")
    } else {
        body
    }
}

/// The literal for `v` under `mode`.
pub fn value_literal(v: &Value, mode: TheoryMode) -> Result<String, SmtError> {
    Ok(match (mode, v) {
        (_, Value::Bool(b)) => b.to_string(),
        (_, Value::Str(s)) => string_literal(s)?,
        (TheoryMode::BvFp, Value::F32(_) | Value::F64(_)) => {
            let (e, m) = v.sort().float_format().expect("float");
            let raw = v.float_bits().expect("float");
            let frac = m - 1;
            format!(
                "(fp #b{} #b{} #b{})",
                raw >> (e + frac) & 1,
                bits(raw >> frac, e),
                bits(raw, frac)
            )
        }
        (TheoryMode::IntReal, Value::F32(_) | Value::F64(_)) => {
            let x = v.as_f64().expect("float");
            let q = BigRational::from_float(x).ok_or_else(|| SmtError::UnrepresentableConstant(v.to_string()))?;
            real_literal(&q)
        }
        (TheoryMode::BvFp, v) => int_literal_bv(v.as_i64().expect("integer"), v.sort().width()),
        (TheoryMode::IntReal, v) => int_literal_int(v.as_i64().expect("integer") as i128),
    })
}

struct Emitter {
    mode: TheoryMode,
    next_let: usize,
}

impl Emitter {
    fn fresh(&mut self) -> String {
        let name = format!("let{}", self.next_let);
        self.next_let += 1;
        name
    }

    /// Binds non-atomic terms to fresh names so `body` may repeat them.
    fn bind(&mut self, terms: Vec<String>, body: impl FnOnce(&[String]) -> String) -> String {
        let mut bindings = Vec::new();
        let names: Vec<String> = terms
            .into_iter()
            .map(|t| {
                if t.starts_with('(') {
                    let n = self.fresh();
                    bindings.push(format!("({n} {t})"));
                    n
                } else {
                    t
                }
            })
            .collect();
        let inner = body(&names);
        if bindings.is_empty() {
            inner
        } else {
            format!("(let ({}) {inner})", bindings.join(" "))
        }
    }

    fn expr(&mut self, t: &ExprTree) -> Result<String, SmtError> {
        match t {
            ExprTree::Var { name, .. } => Ok(name.to_string()),
            ExprTree::Const(v) => value_literal(v, self.mode),
            ExprTree::Apply(op, ch) => {
                let args = ch.iter().map(|c| self.expr(c)).collect::<Result<Vec<_>, _>>()?;
                Ok(match self.mode {
                    TheoryMode::BvFp => self.apply_bvfp(*op, args),
                    TheoryMode::IntReal => self.apply_intreal(*op, args),
                })
            }
        }
    }

    fn apply_bvfp(&mut self, op: Operator, a: Vec<String>) -> String {
        use BaseOp::*;
        let s = op.sort;
        let call = |f: &str, a: &[String]| format!("({f} {})", a.join(" "));
        let fp_rm = |f: &str, a: &[String]| format!("({f} RNE {})", a.join(" "));
        let zero = || int_literal_bv(0, s.width());
        match op.base {
            IAdd => call("bvadd", &a),
            ISub => call("bvsub", &a),
            IMul => call("bvmul", &a),
            IDiv => call("bvsdiv", &a),
            IRem => call("bvsrem", &a),
            INeg => call("bvneg", &a),
            IAbs => self.bind(a, |v| format!("(ite (bvslt {x} {z}) (bvneg {x}) {x})", x = v[0], z = zero())),
            IMin => self.bind(a, |v| format!("(ite (bvsle {x} {y}) {x} {y})", x = v[0], y = v[1])),
            IMax => self.bind(a, |v| format!("(ite (bvsge {x} {y}) {x} {y})", x = v[0], y = v[1])),
            Shl | AShr => format!(
                "({} {} (bvand {} {}))",
                if op.base == Shl { "bvshl" } else { "bvashr" },
                a[0],
                a[1],
                int_literal_bv((s.width() - 1) as i64, s.width())
            ),
            FAdd => fp_rm("fp.add", &a),
            FSub => fp_rm("fp.sub", &a),
            FMul => fp_rm("fp.mul", &a),
            FDiv => fp_rm("fp.div", &a),
            FSqrt => fp_rm("fp.sqrt", &a),
            FRoundIntegral => fp_rm("fp.roundToIntegral", &a),
            FAbs => call("fp.abs", &a),
            FNeg => call("fp.neg", &a),
            FMin => self.bind(a, |v| {
                format!(
                    "(ite (fp.isNaN {x}) {x} (ite (fp.isNaN {y}) {y} (ite (and (fp.isZero {x}) (fp.isZero {y})) (ite (fp.isNegative {x}) {x} {y}) (ite (fp.leq {x} {y}) {x} {y}))))",
                    x = v[0],
                    y = v[1]
                )
            }),
            FMax => self.bind(a, |v| {
                format!(
                    "(ite (fp.isNaN {x}) {x} (ite (fp.isNaN {y}) {y} (ite (and (fp.isZero {x}) (fp.isZero {y})) (ite (fp.isPositive {x}) {x} {y}) (ite (fp.geq {x} {y}) {x} {y}))))",
                    x = v[0],
                    y = v[1]
                )
            }),
            Lt if s.is_float() => call("fp.lt", &a),
            Lt => call("bvslt", &a),
            Le if s.is_float() => call("fp.leq", &a),
            Le => call("bvsle", &a),
            Eq if s.is_float() => call("fp.eq", &a),
            Eq => call("=", &a),
            Distinct if s.is_float() => self.bind(a, |v| format!("(or (fp.lt {x} {y}) (fp.gt {x} {y}))", x = v[0], y = v[1])),
            Distinct => call("distinct", &a),
            And => call("and", &a),
            Or => call("or", &a),
            Xor => call("xor", &a),
            Not => call("not", &a),
            Ite => call("ite", &a),
            StrConcat => call("str.++", &a),
            StrLen => format!("((_ int2bv 32) (str.len {}))", a[0]),
            StrAt => {
                let i = self.signed_index(&a[1]);
                format!("(str.at {} {i})", a[0])
            }
            StrSubstr => {
                let i = self.signed_index(&a[1]);
                let n = self.signed_index(&a[2]);
                format!("(str.substr {} {i} {n})", a[0])
            }
            StrIndexOf => {
                let i = self.signed_index(&a[2]);
                format!("((_ int2bv 32) (str.indexof {} {} {i}))", a[0], a[1])
            }
            StrContains => call("str.contains", &a),
            StrPrefixOf => call("str.prefixof", &a),
            StrSuffixOf => call("str.suffixof", &a),
            StrReplace => call("str.replace", &a),
            Widen => {
                let (from, to) = (op.sort, op.target);
                if to.is_integer() {
                    format!("((_ sign_extend {}) {})", to.width() - from.width(), a[0])
                } else {
                    let (e, m) = to.float_format().expect("float target");
                    format!("((_ to_fp {e} {m}) RNE {})", a[0])
                }
            }
        }
    }

    /// Signed `Int` value of a 32-bit vector term.
    fn signed_index(&mut self, term: &str) -> String {
        if let Some(v) = parse_bv_hex(term) {
            return int_literal_int(v as u32 as i32 as i128);
        }
        self.bind(vec![term.to_string()], |v| {
            format!("(- (bv2nat {x}) (ite (bvslt {x} #x00000000) 4294967296 0))", x = v[0])
        })
    }

    fn apply_intreal(&mut self, op: Operator, a: Vec<String>) -> String {
        use BaseOp::*;
        let s = op.sort;
        let call = |f: &str, a: &[String]| format!("({f} {})", a.join(" "));
        let zero = if s.is_float() { "0.0" } else { "0" };
        match op.base {
            IAdd | FAdd => call("+", &a),
            ISub | FSub => call("-", &a),
            IMul | FMul => call("*", &a),
            FDiv => call("/", &a),
            // truncating division and remainder, as in Java
            IDiv => self.bind(a, |v| {
                format!("(ite (>= {x} 0) (div {x} {y}) (- (div (- {x}) {y})))", x = v[0], y = v[1])
            }),
            IRem => self.bind(a, |v| {
                format!(
                    "(ite (>= {x} 0) (mod {x} {y}) (- (mod (- {x}) {y})))",
                    x = v[0],
                    y = v[1]
                )
            }),
            INeg | FNeg => call("-", &a),
            IAbs | FAbs => self.bind(a, |v| format!("(ite (< {x} {zero}) (- {x}) {x})", x = v[0])),
            IMin | FMin => self.bind(a, |v| format!("(ite (<= {x} {y}) {x} {y})", x = v[0], y = v[1])),
            IMax | FMax => self.bind(a, |v| format!("(ite (>= {x} {y}) {x} {y})", x = v[0], y = v[1])),
            Shl | AShr => {
                let w = s.width();
                let k = format!("(mod {} {w})", a[1]);
                let x = a[0].clone();
                self.bind(vec![k], |v| {
                    let mut pow = String::from("0");
                    for i in (0..w).rev() {
                        pow = format!("(ite (= {} {i}) {} {pow})", v[0], 1u128 << i);
                    }
                    if op.base == Shl {
                        format!("(* {x} {pow})")
                    } else {
                        format!("(div {x} {pow})")
                    }
                })
            }
            FSqrt => format!("(^ {} 0.5)", a[0]),
            FRoundIntegral => format!("(to_real (to_int (+ {} 0.5)))", a[0]),
            Lt => call("<", &a),
            Le => call("<=", &a),
            Eq => call("=", &a),
            Distinct => call("distinct", &a),
            And => call("and", &a),
            Or => call("or", &a),
            Xor => call("xor", &a),
            Not => call("not", &a),
            Ite => call("ite", &a),
            StrConcat => call("str.++", &a),
            StrLen => call("str.len", &a),
            StrAt => call("str.at", &a),
            StrSubstr => call("str.substr", &a),
            StrIndexOf => call("str.indexof", &a),
            StrContains => call("str.contains", &a),
            StrPrefixOf => call("str.prefixof", &a),
            StrSuffixOf => call("str.suffixof", &a),
            StrReplace => call("str.replace", &a),
            Widen => {
                if op.sort.is_integer() && op.target.is_float() {
                    format!("(to_real {})", a[0])
                } else {
                    a[0].clone()
                }
            }
        }
    }
}

fn parse_bv_hex(term: &str) -> Option<u64> {
    let hex = term.strip_prefix("#x")?;
    (hex.len() == 8).then(|| u64::from_str_radix(hex, 16).ok()).flatten()
}

/// The body term of a stub.
pub fn emit_term(tree: &ExprTree, mode: TheoryMode) -> Result<String, SmtError> {
    Emitter { mode, next_let: 0 }.expr(tree)
}

/// `(define-fun <name> ((p S) ...) R <body>)`.
pub fn emit_stub(tree: &ExprTree, signature: &Signature, name: &str, mode: TheoryMode) -> Result<String, SmtError> {
    let params: Vec<String> = signature
        .params
        .iter()
        .map(|(p, s)| format!("({p} {})", sort_name(*s, mode)))
        .collect();
    Ok(format!(
        "(define-fun {name} ({}) {} {})",
        params.join(" "),
        sort_name(signature.ret, mode),
        emit_term(tree, mode)?
    ))
}

/// Names of the benchmark constants for input `k` (1 or 2).
pub fn input_names(signature: &Signature, k: usize) -> Vec<String> {
    if signature.arity() == 1 {
        vec![format!("x{k}")]
    } else {
        signature.params.iter().map(|(p, _)| format!("x{k}_{p}")).collect()
    }
}

/// The (name, sort) bindings a benchmark script asks the solver for.
pub fn benchmark_bindings(signature: &Signature) -> Vec<(String, Sort)> {
    (1..=2)
        .flat_map(|k| input_names(signature, k).into_iter().zip(signature.param_sorts()))
        .collect()
}

/// A satisfiability query for inputs that make the stub named `stub_name`
/// produce `targets.0` and then `targets.1`.
pub fn emit_benchmark_script(
    stub: &str,
    stub_name: &str,
    signature: &Signature,
    targets: (&Value, &Value),
    mode: TheoryMode,
) -> Result<String, SmtError> {
    let mut out = String::new();
    out.push_str("(set-logic ALL)\n");
    out.push_str(stub);
    out.push('\n');
    let bindings = benchmark_bindings(signature);
    for (name, sort) in &bindings {
        let _ = writeln!(out, "(declare-const {name} {})", sort_name(*sort, mode));
    }
    if mode == TheoryMode::IntReal {
        for (name, sort) in &bindings {
            if sort.is_integer() {
                let w = sort.width();
                let lo = -(1i128 << (w - 1));
                let hi = (1i128 << (w - 1)) - 1;
                let _ = writeln!(out, "(assert (<= {} {name} {}))", int_literal_int(lo), int_literal_int(hi));
            }
        }
    }
    for (k, target) in [(1, targets.0), (2, targets.1)] {
        let _ = writeln!(
            out,
            "(assert (= ({stub_name} {}) {}))",
            input_names(signature, k).join(" "),
            value_literal(target, mode)?
        );
    }
    out.push_str("(check-sat)\n");
    let names: Vec<&str> = bindings.iter().map(|(n, _)| n.as_str()).collect();
    let _ = writeln!(out, "(get-value ({}))", names.join(" "));
    Ok(out)
}

// ---------------------------------------------------------------------------
// Solver output

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SExpr {
    Atom(String),
    Str(String),
    List(Vec<SExpr>),
}

/// Parses every s-expression in `text`.
pub fn parse_sexprs(text: &str) -> Result<Vec<SExpr>, SmtError> {
    let chars: Vec<char> = text.chars().collect();
    let mut pos = 0;
    let mut out = Vec::new();
    loop {
        skip_ws(&chars, &mut pos);
        if pos >= chars.len() {
            return Ok(out);
        }
        out.push(parse_one(&chars, &mut pos)?);
    }
}

fn skip_ws(c: &[char], pos: &mut usize) {
    while *pos < c.len() {
        if c[*pos].is_whitespace() {
            *pos += 1;
        } else if c[*pos] == ';' {
            while *pos < c.len() && c[*pos] != '\n' {
                *pos += 1;
            }
        } else {
            break;
        }
    }
}

fn parse_one(c: &[char], pos: &mut usize) -> Result<SExpr, SmtError> {
    skip_ws(c, pos);
    match c.get(*pos) {
        None => Err(SmtError::Parse("unexpected end of input".into())),
        Some('(') => {
            *pos += 1;
            let mut items = Vec::new();
            loop {
                skip_ws(c, pos);
                match c.get(*pos) {
                    None => return Err(SmtError::Parse("unbalanced parenthesis".into())),
                    Some(')') => {
                        *pos += 1;
                        return Ok(SExpr::List(items));
                    }
                    Some(_) => items.push(parse_one(c, pos)?),
                }
            }
        }
        Some(')') => Err(SmtError::Parse("unexpected `)`".into())),
        Some('"') => {
            *pos += 1;
            let mut s = String::new();
            loop {
                match c.get(*pos) {
                    None => return Err(SmtError::Parse("unterminated string".into())),
                    Some('"') if c.get(*pos + 1) == Some(&'"') => {
                        s.push('"');
                        *pos += 2;
                    }
                    Some('"') => {
                        *pos += 1;
                        return Ok(SExpr::Str(s));
                    }
                    Some(&ch) => {
                        s.push(ch);
                        *pos += 1;
                    }
                }
            }
        }
        Some('|') => {
            let start = *pos + 1;
            let end = c[start..]
                .iter()
                .position(|&ch| ch == '|')
                .ok_or_else(|| SmtError::Parse("unterminated quoted symbol".into()))?;
            *pos = start + end + 1;
            Ok(SExpr::Atom(c[start..start + end].iter().collect()))
        }
        Some(_) => {
            let start = *pos;
            while *pos < c.len() && !c[*pos].is_whitespace() && !matches!(c[*pos], '(' | ')' | '"' | ';') {
                *pos += 1;
            }
            Ok(SExpr::Atom(c[start..*pos].iter().collect()))
        }
    }
}

/// Resolves SMT-LIB `\u{..}` and `\uXXXX` escapes in a string literal body.
pub fn unescape_string(raw: &str) -> Result<String, SmtError> {
    let c: Vec<char> = raw.chars().collect();
    let mut out = String::with_capacity(raw.len());
    let mut i = 0;
    while i < c.len() {
        if c[i] == '\\' && c.get(i + 1) == Some(&'u') {
            let (digits, next) = if c.get(i + 2) == Some(&'{') {
                match c[i + 3..].iter().position(|&ch| ch == '}') {
                    Some(len) if (1..=5).contains(&len) => (c[i + 3..i + 3 + len].iter().collect::<String>(), i + 4 + len),
                    _ => (String::new(), i),
                }
            } else if i + 6 <= c.len() {
                (c[i + 2..i + 6].iter().collect::<String>(), i + 6)
            } else {
                (String::new(), i)
            };
            if let Some(ch) = u32::from_str_radix(&digits, 16).ok().and_then(char::from_u32) {
                if digits.chars().all(|d| d.is_ascii_hexdigit()) {
                    out.push(ch);
                    i = next;
                    continue;
                }
            }
        }
        out.push(c[i]);
        i += 1;
    }
    Ok(out)
}

/// Outcome of a `check-sat` / `get-value` exchange.
pub type Model = BTreeMap<String, Value>;

/// Reads the solver's status line and, when `sat`, decodes the `get-value`
/// response for `expected`.
pub fn parse_model(output: &str, expected: &[(String, Sort)], mode: TheoryMode) -> Result<Model, SmtError> {
    let exprs = parse_sexprs(output)?;
    let mut it = exprs.into_iter();
    match it.next() {
        Some(SExpr::Atom(s)) if s == "sat" => {}
        Some(SExpr::Atom(s)) if s == "unsat" => return Err(SmtError::SolverUnsat),
        Some(SExpr::Atom(s)) if s == "unknown" || s == "timeout" => return Err(SmtError::SolverUnknown),
        Some(other) => return Err(SmtError::Parse(format!("expected a status, found {other:?}"))),
        None => return Err(SmtError::Parse("empty solver output".into())),
    }
    let pairs = match it.next() {
        Some(SExpr::List(items)) => items,
        other => return Err(SmtError::Parse(format!("expected a value list, found {other:?}"))),
    };
    let mut raw: BTreeMap<String, SExpr> = BTreeMap::new();
    for p in pairs {
        match p {
            SExpr::List(mut kv) if kv.len() == 2 => {
                let v = kv.pop().expect("two items");
                match kv.pop().expect("two items") {
                    SExpr::Atom(k) => {
                        raw.insert(k, v);
                    }
                    k => return Err(SmtError::Parse(format!("bad binding name {k:?}"))),
                }
            }
            other => return Err(SmtError::Parse(format!("bad binding {other:?}"))),
        }
    }
    let mut model = Model::new();
    for (name, sort) in expected {
        let e = raw.get(name).ok_or_else(|| SmtError::Parse(format!("no value for {name}")))?;
        model.insert(name.clone(), decode_value(e, *sort, mode)?);
    }
    Ok(model)
}

/// Decodes one model value of the given sort.
pub fn decode_value(e: &SExpr, sort: Sort, mode: TheoryMode) -> Result<Value, SmtError> {
    let bad = || SmtError::Parse(format!("cannot read {e:?} as {sort}"));
    match sort {
        Sort::Bool => match e {
            SExpr::Atom(a) if a == "true" => Ok(Value::Bool(true)),
            SExpr::Atom(a) if a == "false" => Ok(Value::Bool(false)),
            _ => Err(bad()),
        },
        Sort::String => match e {
            SExpr::Str(s) => Ok(Value::str(&unescape_string(s)?)),
            _ => Err(bad()),
        },
        s if s.is_integer() => {
            let raw: i128 = match mode {
                TheoryMode::BvFp => {
                    let (v, w) = decode_bv(e).ok_or_else(bad)?;
                    if w != s.width() {
                        return Err(bad());
                    }
                    // reinterpret as signed
                    let shift = 128 - w;
                    ((v as i128) << shift) >> shift
                }
                TheoryMode::IntReal => decode_rational(e).filter(|q| q.is_integer()).and_then(|q| q.to_integer().to_i128()).ok_or_else(bad)?,
            };
            let raw = i64::try_from(raw).map_err(|_| bad())?;
            let v = Value::int_from_i64(s, raw);
            if v.as_i64() == Some(raw) {
                Ok(v)
            } else {
                Err(bad())
            }
        }
        s => {
            let (e_bits, m_bits) = s.float_format().expect("float");
            match mode {
                TheoryMode::BvFp => decode_fp(e, e_bits, m_bits).map(|b| Value::float_from_bits(s, b)).ok_or_else(bad),
                TheoryMode::IntReal => {
                    let q = decode_rational(e).ok_or_else(bad)?;
                    Ok(match s {
                        Sort::Float32 => Value::F32(q.to_f32().ok_or_else(bad)?),
                        _ => Value::F64(q.to_f64().ok_or_else(bad)?),
                    })
                }
            }
        }
    }
}

/// A bit-vector literal as (value, width).
fn decode_bv(e: &SExpr) -> Option<(u128, u32)> {
    match e {
        SExpr::Atom(a) => {
            if let Some(h) = a.strip_prefix("#x") {
                Some((u128::from_str_radix(h, 16).ok()?, 4 * h.len() as u32))
            } else if let Some(b) = a.strip_prefix("#b") {
                Some((u128::from_str_radix(b, 2).ok()?, b.len() as u32))
            } else {
                None
            }
        }
        SExpr::List(items) => match items.as_slice() {
            [SExpr::Atom(u), SExpr::Atom(v), SExpr::Atom(w)] if u == "_" && v.starts_with("bv") => {
                Some((v[2..].parse().ok()?, w.parse().ok()?))
            }
            _ => None,
        },
        SExpr::Str(_) => None,
    }
}

fn decode_fp(e: &SExpr, eb: u32, mb: u32) -> Option<u64> {
    let frac = mb - 1;
    let SExpr::List(items) = e else { return None };
    match items.as_slice() {
        [SExpr::Atom(f), s, x, m] if f == "fp" => {
            let (s, sw) = decode_bv(s)?;
            let (x, xw) = decode_bv(x)?;
            let (m, mw) = decode_bv(m)?;
            if sw != 1 || xw != eb || mw != frac {
                return None;
            }
            Some(((s as u64) << (eb + frac)) | ((x as u64) << frac) | m as u64)
        }
        [SExpr::Atom(u), SExpr::Atom(k), SExpr::Atom(e2), SExpr::Atom(m2)] if u == "_" => {
            if e2.parse::<u32>().ok()? != eb || m2.parse::<u32>().ok()? != mb {
                return None;
            }
            let exp_all = ((1u64 << eb) - 1) << frac;
            let sign = 1u64 << (eb + frac);
            match k.as_str() {
                "NaN" => Some(exp_all | 1 << (frac - 1)),
                "+oo" => Some(exp_all),
                "-oo" => Some(sign | exp_all),
                "+zero" => Some(0),
                "-zero" => Some(sign),
                _ => None,
            }
        }
        _ => None,
    }
}

fn decode_rational(e: &SExpr) -> Option<BigRational> {
    match e {
        SExpr::Atom(a) => parse_decimal(a),
        SExpr::List(items) => match items.as_slice() {
            [SExpr::Atom(op), x] if op == "-" => Some(-decode_rational(x)?),
            [SExpr::Atom(op), x, y] if op == "/" => {
                let d = decode_rational(y)?;
                (!d.is_zero()).then(|| decode_rational(x).map(|n| n / d)).flatten()
            }
            [SExpr::Atom(op), x] if op == "to_real" => decode_rational(x),
            _ => None,
        },
        SExpr::Str(_) => None,
    }
}

fn parse_decimal(a: &str) -> Option<BigRational> {
    use num_bigint::BigInt;
    let (int_part, frac_part) = a.split_once('.').unwrap_or((a, ""));
    if int_part.is_empty() || !int_part.bytes().all(|b| b.is_ascii_digit()) || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let digits: BigInt = format!("{int_part}{frac_part}").parse().ok()?;
    let scale = BigInt::from(10u32).pow(frac_part.len() as u32);
    Some(BigRational::new(digits, scale))
}
