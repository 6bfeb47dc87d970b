//! Concrete interpreter for expression trees.
//!
//! Integers wrap two's-complement at their width, floats follow IEEE-754
//! round-to-nearest-even, and every ordered or equality comparison with a NaN
//! operand is false. String indexing is total in the SMT-LIB style: out of
//! range positions give the empty string or -1. Integer division or
//! remainder by zero is a [`Fault`], returned as a value.

use std::sync::Arc;

use thiserror::Error;

use crate::grammar::{BaseOp, ExprTree, Operator};
use crate::sampler::Dataset;
use crate::values::{Sort, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Fault {
    DivisionByZero,
    UndefinedIndex,
}

/// The result of evaluating a tree on one environment.
pub type EvalOutcome = Result<Value, Fault>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("variable `{name}` (index {index}) is unbound or has the wrong sort")]
    UnboundVariable { index: usize, name: String },
}

/// Evaluates `tree` with positional bindings `env`.
pub fn evaluate(tree: &ExprTree, env: &[Value]) -> Result<EvalOutcome, EvalError> {
    check_env(tree, env)?;
    Ok(eval_unchecked(tree, env))
}

fn check_env(tree: &ExprTree, env: &[Value]) -> Result<(), EvalError> {
    for (node, _) in tree.preorder() {
        if let ExprTree::Var { index, name, sort } = node {
            if env.get(*index).map(Value::sort) != Some(*sort) {
                return Err(EvalError::UnboundVariable { index: *index, name: name.to_string() });
            }
        }
    }
    Ok(())
}

/// Evaluation without the binding check. Panics on an out-of-range variable.
pub fn eval_unchecked(tree: &ExprTree, env: &[Value]) -> EvalOutcome {
    match tree {
        ExprTree::Var { index, .. } => Ok(env[*index].clone()),
        ExprTree::Const(v) => Ok(v.clone()),
        ExprTree::Apply(op, ch) => {
            if op.base == BaseOp::Ite {
                let cond = eval_unchecked(&ch[0], env)?;
                return if cond.as_bool() == Some(true) {
                    eval_unchecked(&ch[1], env)
                } else {
                    eval_unchecked(&ch[2], env)
                };
            }
            match ch.len() {
                1 => {
                    let a = eval_unchecked(&ch[0], env)?;
                    apply(*op, &[&a])
                }
                2 => {
                    let a = eval_unchecked(&ch[0], env)?;
                    let b = eval_unchecked(&ch[1], env)?;
                    apply(*op, &[&a, &b])
                }
                _ => {
                    let a = eval_unchecked(&ch[0], env)?;
                    let b = eval_unchecked(&ch[1], env)?;
                    let c = eval_unchecked(&ch[2], env)?;
                    apply(*op, &[&a, &b, &c])
                }
            }
        }
    }
}

/// Row-wise evaluation over a dataset, computed one tree node at a time
/// across all rows. Agrees with mapping [`evaluate`] over the rows.
pub fn evaluate_batch(tree: &ExprTree, dataset: &Dataset) -> Result<Vec<EvalOutcome>, EvalError> {
    if let Some(row) = dataset.rows.first() {
        check_env(tree, &row.inputs)?;
    }
    let inputs: Vec<&[Value]> = dataset.rows.iter().map(|r| r.inputs.as_slice()).collect();
    Ok(eval_columns(tree, &inputs))
}

/// Column evaluation over raw input tuples (all assumed well-sorted).
pub fn eval_columns(tree: &ExprTree, inputs: &[&[Value]]) -> Vec<EvalOutcome> {
    match tree {
        ExprTree::Var { index, .. } => inputs.iter().map(|env| Ok(env[*index].clone())).collect(),
        ExprTree::Const(v) => vec![Ok(v.clone()); inputs.len()],
        ExprTree::Apply(op, ch) => {
            let cols: Vec<Vec<EvalOutcome>> = ch.iter().map(|c| eval_columns(c, inputs)).collect();
            let mut out = Vec::with_capacity(inputs.len());
            if op.base == BaseOp::Ite {
                for i in 0..inputs.len() {
                    out.push(match &cols[0][i] {
                        Err(f) => Err(*f),
                        Ok(Value::Bool(true)) => cols[1][i].clone(),
                        Ok(_) => cols[2][i].clone(),
                    });
                }
                return out;
            }
            for i in 0..inputs.len() {
                let r = match cols.len() {
                    1 => cols[0][i].as_ref().map_err(|f| *f).and_then(|a| apply(*op, &[a])),
                    2 => match (&cols[0][i], &cols[1][i]) {
                        (Ok(a), Ok(b)) => apply(*op, &[a, b]),
                        (Err(f), _) | (_, Err(f)) => Err(*f),
                    },
                    _ => match (&cols[0][i], &cols[1][i], &cols[2][i]) {
                        (Ok(a), Ok(b), Ok(c)) => apply(*op, &[a, b, c]),
                        (Err(f), _, _) | (_, Err(f), _) | (_, _, Err(f)) => Err(*f),
                    },
                };
                out.push(r);
            }
            out
        }
    }
}

fn int(v: &Value) -> i64 {
    v.as_i64().expect("integer operand")
}

fn boolean(v: &Value) -> bool {
    v.as_bool().expect("boolean operand")
}

fn string(v: &Value) -> &str {
    v.as_str().expect("string operand")
}

fn i32_index(v: &Value) -> i64 {
    int(v)
}

/// Applies an operator to evaluated arguments (strict operators only; `ite`
/// is handled by the callers so the untaken branch stays unevaluated).
pub fn apply(op: Operator, args: &[&Value]) -> EvalOutcome {
    use BaseOp::*;
    let sort = op.sort;
    match op.base {
        IAdd | ISub | IMul | IDiv | IRem | IMin | IMax | Shl | AShr => {
            let a = int(args[0]);
            let b = int(args[1]);
            let mask = (sort.width() - 1) as i64;
            let r = match op.base {
                IAdd => a.wrapping_add(b),
                ISub => a.wrapping_sub(b),
                IMul => a.wrapping_mul(b),
                IDiv => {
                    if b == 0 {
                        return Err(Fault::DivisionByZero);
                    }
                    a.wrapping_div(b)
                }
                IRem => {
                    if b == 0 {
                        return Err(Fault::DivisionByZero);
                    }
                    a.wrapping_rem(b)
                }
                IMin => a.min(b),
                IMax => a.max(b),
                Shl => a.wrapping_shl((b & mask) as u32),
                AShr => a >> (b & mask),
                _ => unreachable!(),
            };
            Ok(Value::int_from_i64(sort, r))
        }
        IAbs => Ok(Value::int_from_i64(sort, int(args[0]).wrapping_abs())),
        INeg => Ok(Value::int_from_i64(sort, int(args[0]).wrapping_neg())),
        FAdd | FSub | FMul | FDiv | FMin | FMax => Ok(float_binary(op.base, args[0], args[1])),
        FAbs | FNeg | FSqrt | FRoundIntegral => Ok(float_unary(op.base, args[0])),
        Lt | Le | Eq | Distinct => Ok(Value::Bool(compare(op.base, args[0], args[1]))),
        And => Ok(Value::Bool(boolean(args[0]) && boolean(args[1]))),
        Or => Ok(Value::Bool(boolean(args[0]) || boolean(args[1]))),
        Xor => Ok(Value::Bool(boolean(args[0]) ^ boolean(args[1]))),
        Not => Ok(Value::Bool(!boolean(args[0]))),
        Ite => Ok(if boolean(args[0]) { args[1].clone() } else { args[2].clone() }),
        StrConcat => {
            let (a, b) = (string(args[0]), string(args[1]));
            if b.is_empty() {
                return Ok(args[0].clone());
            }
            if a.is_empty() {
                return Ok(args[1].clone());
            }
            let mut s = String::with_capacity(a.len() + b.len());
            s.push_str(a);
            s.push_str(b);
            Ok(Value::Str(Arc::from(s)))
        }
        StrLen => Ok(Value::I32(char_len(string(args[0])) as i32)),
        StrAt => Ok(Value::Str(Arc::from(substring(string(args[0]), i32_index(args[1]), 1)))),
        StrSubstr => Ok(Value::Str(Arc::from(substring(
            string(args[0]),
            i32_index(args[1]),
            i32_index(args[2]),
        )))),
        StrIndexOf => Ok(Value::I32(index_of(string(args[0]), string(args[1]), i32_index(args[2])) as i32)),
        StrContains => Ok(Value::Bool(string(args[0]).contains(string(args[1])))),
        StrPrefixOf => Ok(Value::Bool(string(args[1]).starts_with(string(args[0])))),
        StrSuffixOf => Ok(Value::Bool(string(args[1]).ends_with(string(args[0])))),
        StrReplace => {
            let (s, t, u) = (string(args[0]), string(args[1]), string(args[2]));
            if t.is_empty() {
                return Ok(Value::Str(Arc::from(format!("{u}{s}"))));
            }
            Ok(match s.find(t) {
                Some(_) => Value::Str(Arc::from(s.replacen(t, u, 1))),
                None => args[0].clone(),
            })
        }
        Widen => Ok(widen(args[0], op.target)),
    }
}

fn char_len(s: &str) -> usize {
    if s.is_ascii() {
        s.len()
    } else {
        s.chars().count()
    }
}

/// Byte offset of char index `i` (clamped to the end).
fn byte_offset(s: &str, i: usize) -> usize {
    if s.is_ascii() {
        return i.min(s.len());
    }
    s.char_indices().nth(i).map_or(s.len(), |(b, _)| b)
}

/// SMT-LIB `str.substr`: empty when the start is out of range or the length
/// is not positive, otherwise clipped at the end of the string.
pub fn substring(s: &str, start: i64, len: i64) -> String {
    let n = char_len(s) as i64;
    if start < 0 || len <= 0 || start >= n {
        return String::new();
    }
    let end = start.saturating_add(len).min(n);
    let (b0, b1) = (byte_offset(s, start as usize), byte_offset(s, end as usize));
    s[b0..b1].to_string()
}

/// SMT-LIB `str.indexof`: -1 when `start` is outside `[0, len]`; an empty
/// needle is found at `start`.
pub fn index_of(s: &str, t: &str, start: i64) -> i64 {
    let n = char_len(s) as i64;
    if start < 0 || start > n {
        return -1;
    }
    let b0 = byte_offset(s, start as usize);
    match s[b0..].find(t) {
        None => -1,
        Some(rel) => {
            if s.is_ascii() {
                (b0 + rel) as i64
            } else {
                s[..b0 + rel].chars().count() as i64
            }
        }
    }
}

fn float_binary(base: BaseOp, a: &Value, b: &Value) -> Value {
    match (a, b) {
        (Value::F32(x), Value::F32(y)) => Value::F32(match base {
            BaseOp::FAdd => x + y,
            BaseOp::FSub => x - y,
            BaseOp::FMul => x * y,
            BaseOp::FDiv => x / y,
            BaseOp::FMin => java_min(*x as f64, *y as f64, x.is_sign_negative()) as f32,
            BaseOp::FMax => java_max(*x as f64, *y as f64, x.is_sign_positive()) as f32,
            _ => unreachable!(),
        }),
        (Value::F64(x), Value::F64(y)) => Value::F64(match base {
            BaseOp::FAdd => x + y,
            BaseOp::FSub => x - y,
            BaseOp::FMul => x * y,
            BaseOp::FDiv => x / y,
            BaseOp::FMin => java_min(*x, *y, x.is_sign_negative()),
            BaseOp::FMax => java_max(*x, *y, x.is_sign_positive()),
            _ => unreachable!(),
        }),
        _ => panic!("float operands of mismatched sorts"),
    }
}

/// `Math.min`: NaN if either is NaN, and -0.0 below +0.0.
fn java_min(x: f64, y: f64, x_wins_zero_tie: bool) -> f64 {
    if x.is_nan() || y.is_nan() {
        return f64::NAN;
    }
    if x == y && x == 0.0 {
        return if x_wins_zero_tie { x } else { y };
    }
    if x < y {
        x
    } else {
        y
    }
}

/// `Math.max`: NaN if either is NaN, and +0.0 above -0.0.
fn java_max(x: f64, y: f64, x_wins_zero_tie: bool) -> f64 {
    if x.is_nan() || y.is_nan() {
        return f64::NAN;
    }
    if x == y && x == 0.0 {
        return if x_wins_zero_tie { x } else { y };
    }
    if x > y {
        x
    } else {
        y
    }
}

fn float_unary(base: BaseOp, a: &Value) -> Value {
    match *a {
        Value::F32(x) => Value::F32(match base {
            BaseOp::FAbs => x.abs(),
            BaseOp::FNeg => -x,
            BaseOp::FSqrt => x.sqrt(),
            BaseOp::FRoundIntegral => x.round_ties_even(),
            _ => unreachable!(),
        }),
        Value::F64(x) => Value::F64(match base {
            BaseOp::FAbs => x.abs(),
            BaseOp::FNeg => -x,
            BaseOp::FSqrt => x.sqrt(),
            BaseOp::FRoundIntegral => x.round_ties_even(),
            _ => unreachable!(),
        }),
        _ => panic!("float operand expected"),
    }
}

fn compare(base: BaseOp, a: &Value, b: &Value) -> bool {
    use BaseOp::*;
    match (a, b) {
        (Value::F32(_), Value::F32(_)) | (Value::F64(_), Value::F64(_)) => {
            let (x, y) = (a.as_f64().expect("float"), b.as_f64().expect("float"));
            match base {
                Lt => x < y,
                Le => x <= y,
                Eq => x == y,
                Distinct => x < y || x > y,
                _ => unreachable!(),
            }
        }
        (Value::Bool(x), Value::Bool(y)) => match base {
            Eq => x == y,
            Distinct => x != y,
            _ => panic!("ordered comparison on booleans"),
        },
        (Value::Str(x), Value::Str(y)) => match base {
            Eq => x == y,
            Distinct => x != y,
            _ => panic!("ordered comparison on strings"),
        },
        _ => {
            let (x, y) = (int(a), int(b));
            match base {
                Lt => x < y,
                Le => x <= y,
                Eq => x == y,
                Distinct => x != y,
                _ => unreachable!(),
            }
        }
    }
}

fn widen(v: &Value, to: Sort) -> Value {
    match (v, to) {
        (Value::F32(x), Sort::Float64) => Value::F64(*x as f64),
        (_, Sort::Float32) => Value::F32(int(v) as f32),
        (_, Sort::Float64) => Value::F64(int(v) as f64),
        (_, t) if t.is_integer() => Value::int_from_i64(t, int(v)),
        _ => panic!("invalid widening of {v} to {to}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::Grammar;
    use crate::values::{parse_literal, Signature};

    fn op(base: BaseOp, sort: Sort) -> Operator {
        Operator::new(base, sort)
    }

    fn lit(s: &str) -> Value {
        parse_literal(s).unwrap()
    }

    fn run(o: Operator, args: &[&str]) -> EvalOutcome {
        let vals: Vec<Value> = args.iter().map(|a| lit(a)).collect();
        let refs: Vec<&Value> = vals.iter().collect();
        apply(o, &refs)
    }

    #[test]
    fn square_of_int_max_wraps_to_one() {
        let sig = Signature::new(vec![("x".into(), Sort::Int32)], Sort::Int32);
        let g = Grammar::for_signature(&sig);
        let t = g.parse_tree("(i32.mul x x)").unwrap();
        // (2^31-1)^2 = 2^62 - 2^32 + 1 == 1 (mod 2^32)
        assert_eq!(evaluate(&t, &[Value::I32(i32::MAX)]).unwrap(), Ok(Value::I32(1)));
    }

    #[test]
    fn is_nan_expression() {
        let sig = Signature::new(vec![("x".into(), Sort::Float64)], Sort::Bool);
        let g = Grammar::for_signature(&sig);
        let t = g.parse_tree("(not (f64.lt f64:0xbff0000000000000 (f64.abs x)))").unwrap();
        assert_eq!(evaluate(&t, &[Value::F64(f64::NAN)]).unwrap(), Ok(Value::Bool(true)));
        assert_eq!(evaluate(&t, &[Value::F64(3.5)]).unwrap(), Ok(Value::Bool(false)));
        assert_eq!(evaluate(&t, &[Value::F64(f64::NEG_INFINITY)]).unwrap(), Ok(Value::Bool(false)));
    }

    #[test]
    fn division_by_zero_faults() {
        let sig = Signature::positional(&[Sort::Int32, Sort::Int32], Sort::Int32);
        let g = Grammar::for_signature(&sig);
        let t = g.parse_tree("(i32.div a b)").unwrap();
        assert_eq!(evaluate(&t, &[Value::I32(7), Value::I32(0)]).unwrap(), Err(Fault::DivisionByZero));
        let lazy = g.parse_tree("(ite.i32 (i32.eq b i32:0) i32:0 (i32.div a b))").unwrap();
        assert_eq!(evaluate(&lazy, &[Value::I32(7), Value::I32(0)]).unwrap(), Ok(Value::I32(0)));
    }

    #[test]
    fn unbound_variable() {
        let t = ExprTree::var(1, "b", Sort::Int32);
        assert!(matches!(evaluate(&t, &[Value::I32(1)]), Err(EvalError::UnboundVariable { .. })));
        assert!(evaluate(&t, &[Value::I32(1), Value::Bool(true)]).is_err());
    }

    /// Expected values computed by hand with two's-complement arithmetic and
    /// IEEE-754 bit decoding, independent of the interpreter.
    #[test]
    fn java_semantics_spot_table() {
        use BaseOp::*;
        use Sort::*;
        let cases: &[(Operator, &[&str], &str)] = &[
            // 127 + 1 = 128 = 0x80 -> -128 as i8
            (op(IAdd, Int8), &["i8:127", "i8:1"], "i8:-128"),
            // -32768 - 1 = -32769 = 0x7fff after truncation
            (op(ISub, Int16), &["i16:-32768", "i16:1"], "i16:32767"),
            // 65536 * 65536 = 2^32 -> 0
            (op(IMul, Int32), &["i32:65536", "i32:65536"], "i32:0"),
            // 2^62 * 4 = 2^64 -> 0
            (op(IMul, Int64), &["i64:4611686018427387904", "i64:4"], "i64:0"),
            // Java: Integer.MIN_VALUE / -1 overflows to MIN_VALUE
            (op(IDiv, Int32), &["i32:-2147483648", "i32:-1"], "i32:-2147483648"),
            // truncating division: -7 / 2 = -3
            (op(IDiv, Int32), &["i32:-7", "i32:2"], "i32:-3"),
            // remainder keeps the dividend's sign: -7 % 2 = -1
            (op(IRem, Int32), &["i32:-7", "i32:2"], "i32:-1"),
            (op(IRem, Int64), &["i64:7", "i64:-3"], "i64:1"),
            // (byte)(-128 / -1) = (byte)128 = -128
            (op(IDiv, Int8), &["i8:-128", "i8:-1"], "i8:-128"),
            // Math.abs(MIN_VALUE) = MIN_VALUE
            (op(IAbs, Int32), &["i32:-2147483648"], "i32:-2147483648"),
            (op(IAbs, Int16), &["i16:-5"], "i16:5"),
            (op(INeg, Int64), &["i64:-9223372036854775808"], "i64:-9223372036854775808"),
            (op(IMin, Int32), &["i32:-3", "i32:2"], "i32:-3"),
            (op(IMax, Int8), &["i8:-3", "i8:2"], "i8:2"),
            // shift count masked to 5 bits: 1 << 33 == 1 << 1
            (op(Shl, Int32), &["i32:1", "i32:33"], "i32:2"),
            // 1 << 31 = 0x80000000 = -2^31
            (op(Shl, Int32), &["i32:1", "i32:31"], "i32:-2147483648"),
            // arithmetic shift keeps the sign: -8 >> 1 = -4
            (op(AShr, Int32), &["i32:-8", "i32:1"], "i32:-4"),
            (op(AShr, Int64), &["i64:-1", "i64:63"], "i64:-1"),
            // 0x40 << 1 = 0x80 -> -128 as i8
            (op(Shl, Int8), &["i8:64", "i8:1"], "i8:-128"),
            // 0.1 + 0.2: 0x3fb999999999999a + 0x3fc999999999999a = 0x3fd3333333333334
            (op(FAdd, Float64), &["f64:0x3fb999999999999a", "f64:0x3fc999999999999a"], "f64:0x3fd3333333333334"),
            // 1.0 / 0.0 = +Infinity (0x7ff0...)
            (op(FDiv, Float64), &["f64:0x3ff0000000000000", "f64:0x0000000000000000"], "f64:0x7ff0000000000000"),
            // -1.0 / +0.0 = -Infinity
            (op(FDiv, Float64), &["f64:0xbff0000000000000", "f64:0x0000000000000000"], "f64:0xfff0000000000000"),
            // MAX * 2 = +Infinity for binary32 (0x7f7fffff * 0x40000000)
            (op(FMul, Float32), &["f32:0x7f7fffff", "f32:0x40000000"], "f32:0x7f800000"),
            // |-0.0| = +0.0
            (op(FAbs, Float64), &["f64:0x8000000000000000"], "f64:0x0000000000000000"),
            // -(+0.0) = -0.0
            (op(FNeg, Float32), &["f32:0x00000000"], "f32:0x80000000"),
            // sqrt(4.0) = 2.0 : 0x4010... -> 0x4000...
            (op(FSqrt, Float64), &["f64:0x4010000000000000"], "f64:0x4000000000000000"),
            // rint(2.5) = 2.0 (ties to even); 2.5 = 0x4004000000000000
            (op(FRoundIntegral, Float64), &["f64:0x4004000000000000"], "f64:0x4000000000000000"),
            // rint(3.5) = 4.0
            (op(FRoundIntegral, Float64), &["f64:0x400c000000000000"], "f64:0x4010000000000000"),
            // Math.min(-0.0, +0.0) = -0.0
            (op(FMin, Float64), &["f64:0x0000000000000000", "f64:0x8000000000000000"], "f64:0x8000000000000000"),
            // Math.max(-0.0, +0.0) = +0.0
            (op(FMax, Float32), &["f32:0x80000000", "f32:0x00000000"], "f32:0x00000000"),
            // NaN comparisons are false
            (op(Lt, Float64), &["f64:0x7ff8000000000000", "f64:0x3ff0000000000000"], "bool:false"),
            (op(Le, Float64), &["f64:0x3ff0000000000000", "f64:0x7ff8000000000000"], "bool:false"),
            (op(Eq, Float64), &["f64:0x7ff8000000000000", "f64:0x7ff8000000000000"], "bool:false"),
            (op(Distinct, Float32), &["f32:0x7fc00000", "f32:0x3f800000"], "bool:false"),
            // -0.0 == +0.0 in IEEE comparison
            (op(Eq, Float64), &["f64:0x8000000000000000", "f64:0x0000000000000000"], "bool:true"),
            // signed comparison: -1 < 1
            (op(Lt, Int64), &["i64:-1", "i64:1"], "bool:true"),
            (op(Distinct, Int8), &["i8:1", "i8:2"], "bool:true"),
            // 2^24 + 1 rounds to 2^24 in binary32 (ties to even) = 0x4b800000
            (Operator::widen(Int32, Float32), &["i32:16777217"], "f32:0x4b800000"),
            // i32 -> f64 is exact: 2147483647 = 0x41dfffffffc00000
            (Operator::widen(Int32, Float64), &["i32:2147483647"], "f64:0x41dfffffffc00000"),
            (Operator::widen(Int8, Int64), &["i8:-1"], "i64:-1"),
            (Operator::widen(Float32, Float64), &["f32:0x3fc00000"], "f64:0x3ff8000000000000"),
        ];
        assert!(cases.len() >= 30);
        for (o, args, expected) in cases {
            assert_eq!(run(*o, args), Ok(lit(expected)), "{o} {args:?}");
        }
    }

    #[test]
    fn nan_poisons_every_numeric_comparison() {
        use BaseOp::*;
        let probes = [0.0, -0.0, 1.0, -1.0, f64::INFINITY, f64::NEG_INFINITY, f64::MAX, f64::NAN];
        for base in [Lt, Le, Eq, Distinct] {
            for &v in &probes {
                let nan = Value::F64(f64::NAN);
                let other = Value::F64(v);
                assert_eq!(apply(op(base, Sort::Float64), &[&nan, &other]), Ok(Value::Bool(false)));
                assert_eq!(apply(op(base, Sort::Float64), &[&other, &nan]), Ok(Value::Bool(false)));
                let nan32 = Value::F32(f32::NAN);
                let other32 = Value::F32(v as f32);
                assert_eq!(apply(op(base, Sort::Float32), &[&nan32, &other32]), Ok(Value::Bool(false)));
                assert_eq!(apply(op(base, Sort::Float32), &[&other32, &nan32]), Ok(Value::Bool(false)));
            }
        }
    }

    #[test]
    fn string_totalization() {
        use BaseOp::*;
        let s = Sort::String;
        assert_eq!(run(op(StrAt, s), &["str:\"abc\"", "i32:1"]), Ok(Value::str("b")));
        assert_eq!(run(op(StrAt, s), &["str:\"abc\"", "i32:3"]), Ok(Value::str("")));
        assert_eq!(run(op(StrAt, s), &["str:\"abc\"", "i32:-1"]), Ok(Value::str("")));
        assert_eq!(run(op(StrSubstr, s), &["str:\"hello\"", "i32:1", "i32:3"]), Ok(Value::str("ell")));
        assert_eq!(run(op(StrSubstr, s), &["str:\"hello\"", "i32:3", "i32:2147483647"]), Ok(Value::str("lo")));
        assert_eq!(run(op(StrSubstr, s), &["str:\"hello\"", "i32:1", "i32:0"]), Ok(Value::str("")));
        assert_eq!(run(op(StrIndexOf, s), &["str:\"hello\"", "str:\"l\"", "i32:0"]), Ok(Value::I32(2)));
        assert_eq!(run(op(StrIndexOf, s), &["str:\"hello\"", "str:\"l\"", "i32:3"]), Ok(Value::I32(3)));
        assert_eq!(run(op(StrIndexOf, s), &["str:\"hello\"", "str:\"\"", "i32:5"]), Ok(Value::I32(5)));
        assert_eq!(run(op(StrIndexOf, s), &["str:\"hello\"", "str:\"\"", "i32:6"]), Ok(Value::I32(-1)));
        assert_eq!(run(op(StrIndexOf, s), &["str:\"hello\"", "str:\"z\"", "i32:-1"]), Ok(Value::I32(-1)));
        assert_eq!(run(op(StrIndexOf, s), &["str:\"\u{e9}ab\"", "str:\"b\"", "i32:0"]), Ok(Value::I32(2)));
        assert_eq!(run(op(StrLen, s), &["str:\"\u{e9}ab\""]), Ok(Value::I32(3)));
        assert_eq!(run(op(StrPrefixOf, s), &["str:\"he\"", "str:\"hello\""]), Ok(Value::Bool(true)));
        assert_eq!(run(op(StrSuffixOf, s), &["str:\"he\"", "str:\"hello\""]), Ok(Value::Bool(false)));
        assert_eq!(run(op(StrContains, s), &["str:\"hello\"", "str:\"ll\""]), Ok(Value::Bool(true)));
        assert_eq!(run(op(StrReplace, s), &["str:\"aXbX\"", "str:\"X\"", "str:\"-\""]), Ok(Value::str("a-bX")));
        assert_eq!(run(op(StrReplace, s), &["str:\"ab\"", "str:\"\"", "str:\"-\""]), Ok(Value::str("-ab")));
        assert_eq!(run(op(StrConcat, s), &["str:\"ab\"", "str:\"c\""]), Ok(Value::str("abc")));
    }

    #[test]
    fn batch_matches_row_by_row() {
        use crate::oracles::builtin_corpus;
        use crate::sampler::{sample_dataset, SamplerConfig};
        use rand::SeedableRng;
        let corpus = builtin_corpus();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for name in ["i32.add", "math.f64.max", "str.concat", "str.index_of", "f64.is_nan"] {
            let oracle = corpus.iter().find(|o| o.name == name).unwrap();
            let ds = sample_dataset(oracle, 64, &SamplerConfig::with_seed(3)).unwrap();
            let g = Grammar::for_signature(&oracle.signature);
            for _ in 0..300 {
                let t = g.random_tree(oracle.signature.ret, 6, &mut rng).unwrap();
                let batch = evaluate_batch(&t, &ds).unwrap();
                assert_eq!(batch.len(), ds.len());
                for (row, got) in ds.rows.iter().zip(&batch) {
                    let want = evaluate(&t, &row.inputs).unwrap();
                    match (&want, got) {
                        (Ok(a), Ok(b)) => assert!(a.same_class(b), "{t}: {a} vs {b}"),
                        _ => assert_eq!(&want, got),
                    }
                }
            }
        }
    }

    #[test]
    fn identity_batch() {
        use crate::oracles::builtin_corpus;
        use crate::sampler::{sample_dataset, SamplerConfig};
        let corpus = builtin_corpus();
        let id = corpus.iter().find(|o| o.name == "f64.value").unwrap();
        let ds = sample_dataset(id, 200, &SamplerConfig::with_seed(1)).unwrap();
        let t = ExprTree::var(0, "a", Sort::Float64);
        let out = evaluate_batch(&t, &ds).unwrap();
        for (row, o) in ds.rows.iter().zip(out) {
            assert_eq!(o.unwrap(), row.inputs[0]);
        }
    }
}
