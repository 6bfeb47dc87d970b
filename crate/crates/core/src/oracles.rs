//! Ground-truth functions: a built-in corpus of stateless reference functions
//! with Java semantics, and oracles served by an external process over a
//! line protocol.
//!
//! Protocol (UTF-8, one exchange per line, canonical literals):
//!
//! ```text
//! <- SIG i32.identity(i32)->i32      once per exported function
//! <- READY
//! -> CALL i32.identity i32:5
//! <- OK i32:5                        or: ERR <message>
//! ```

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use rand::seq::SliceRandom;
use thiserror::Error;

use crate::sampler::{sample_inputs, stream_rng, SamplerConfig};
use crate::values::{format_literal, parse_literal, tokenize_literals, Signature, Sort, Value};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    /// The function itself signaled failure (the analogue of a thrown exception).
    #[error("oracle failed: {0}")]
    Failed(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("oracle call timed out after {0:?}")]
    Timeout(Duration),
    #[error("oracle unavailable: {0}")]
    Unavailable(String),
    #[error("argument mismatch: {0}")]
    BadArguments(String),
}

/// Rough difficulty of recovering a function with the operator inventory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DifficultyClass {
    /// Returns its argument unchanged.
    Identity,
    /// A lossless or rounding conversion to a wider sort.
    Widening,
    /// Exactly one inventory operator over the arguments.
    SingleOperator,
    /// Anything else.
    Advanced,
}

impl fmt::Display for DifficultyClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DifficultyClass::Identity => "identity",
            DifficultyClass::Widening => "widening",
            DifficultyClass::SingleOperator => "single-operator",
            DifficultyClass::Advanced => "advanced",
        })
    }
}

pub type BuiltinFn = fn(&[Value]) -> Result<Value, String>;

#[derive(Clone)]
pub enum Backend {
    Builtin(BuiltinFn),
    External(Arc<ExternalProcess>),
}

impl fmt::Debug for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Backend::Builtin(_) => f.write_str("Builtin"),
            Backend::External(p) => write!(f, "External({:?})", p.command),
        }
    }
}

/// A named stateless function with a typed signature.
#[derive(Debug, Clone)]
pub struct OracleSpec {
    pub name: String,
    pub signature: Signature,
    pub backend: Backend,
    pub class: DifficultyClass,
}

impl OracleSpec {
    pub fn builtin(name: &str, params: &[Sort], ret: Sort, class: DifficultyClass, f: BuiltinFn) -> Self {
        OracleSpec {
            name: name.to_string(),
            signature: Signature::positional(params, ret),
            backend: Backend::Builtin(f),
            class,
        }
    }

    pub fn is_builtin(&self) -> bool {
        matches!(self.backend, Backend::Builtin(_))
    }

    /// Calls the function on `args`, which must match the signature.
    pub fn invoke(&self, args: &[Value]) -> Result<Value, OracleError> {
        let sorts_ok = args.len() == self.signature.arity()
            && args.iter().zip(&self.signature.params).all(|(v, (_, s))| v.sort() == *s);
        if !sorts_ok {
            return Err(OracleError::BadArguments(format!(
                "{} expects {}",
                self.name,
                self.signature.header(&self.name)
            )));
        }
        let out = match &self.backend {
            Backend::Builtin(f) => f(args).map_err(OracleError::Failed)?,
            Backend::External(p) => p.call(&self.name, args)?,
        };
        if out.sort() != self.signature.ret {
            return Err(OracleError::Protocol(format!(
                "{} returned {} but declares {}",
                self.name,
                out.sort(),
                self.signature.ret
            )));
        }
        Ok(out)
    }
}

/// Invokes each of `n_probes` random argument tuples twice, in shuffled
/// order, and reports whether every pair agreed bit for bit (errors must
/// repeat identically too).
pub fn audit_stateless(oracle: &OracleSpec, n_probes: usize, seed: u64) -> Result<bool, OracleError> {
    let cfg = SamplerConfig::with_seed(seed);
    let mut rng = stream_rng(seed, &[0xa0d1]);
    let probes: Vec<Vec<Value>> = (0..n_probes).map(|_| sample_inputs(&oracle.signature, &cfg, &mut rng)).collect();
    let mut order: Vec<usize> = (0..n_probes).chain(0..n_probes).collect();
    order.shuffle(&mut rng);
    let mut first: HashMap<usize, Result<Value, OracleError>> = HashMap::new();
    for i in order {
        let result = oracle.invoke(&probes[i]);
        if let Err(e @ (OracleError::Unavailable(_) | OracleError::BadArguments(_))) = &result {
            return Err(e.clone());
        }
        match first.get(&i) {
            None => {
                first.insert(i, result);
            }
            Some(prev) => {
                if *prev != result {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// Fraction of `n` sampled calls that fail.
pub fn error_rate(oracle: &OracleSpec, n: usize, seed: u64) -> Result<f64, OracleError> {
    let cfg = SamplerConfig::with_seed(seed);
    let mut rng = stream_rng(seed, &[0xe77]);
    let mut failures = 0usize;
    for _ in 0..n {
        let args = sample_inputs(&oracle.signature, &cfg, &mut rng);
        match oracle.invoke(&args) {
            Ok(_) => {}
            Err(OracleError::Failed(_)) => failures += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(failures as f64 / n.max(1) as f64)
}

/// The built-in corpus minus functions that fail on more than 90% of
/// sampled inputs (they cannot yield a training set).
pub fn usable_corpus() -> Vec<OracleSpec> {
    builtin_corpus()
        .into_iter()
        .filter(|o| error_rate(o, 1000, 0x5eed).map_or(false, |r| r <= 0.9))
        .collect()
}

/// Finds an oracle by exact name, or by name with the `math.` namespace
/// omitted.
pub fn find_oracle<'a>(corpus: &'a [OracleSpec], name: &str) -> Option<&'a OracleSpec> {
    corpus
        .iter()
        .find(|o| o.name == name)
        .or_else(|| corpus.iter().find(|o| o.name.strip_prefix("math.") == Some(name)))
}

// ---------------------------------------------------------------------------
// Built-in corpus

fn i8a(a: &[Value], i: usize) -> i8 {
    match a[i] {
        Value::I8(v) => v,
        _ => unreachable!("signature checked"),
    }
}
fn i16a(a: &[Value], i: usize) -> i16 {
    match a[i] {
        Value::I16(v) => v,
        _ => unreachable!("signature checked"),
    }
}
fn i32a(a: &[Value], i: usize) -> i32 {
    match a[i] {
        Value::I32(v) => v,
        _ => unreachable!("signature checked"),
    }
}
fn i64a(a: &[Value], i: usize) -> i64 {
    match a[i] {
        Value::I64(v) => v,
        _ => unreachable!("signature checked"),
    }
}
fn f32a(a: &[Value], i: usize) -> f32 {
    match a[i] {
        Value::F32(v) => v,
        _ => unreachable!("signature checked"),
    }
}
fn f64a(a: &[Value], i: usize) -> f64 {
    match a[i] {
        Value::F64(v) => v,
        _ => unreachable!("signature checked"),
    }
}
fn boola(a: &[Value], i: usize) -> bool {
    match a[i] {
        Value::Bool(v) => v,
        _ => unreachable!("signature checked"),
    }
}
fn stra(a: &[Value], i: usize) -> &str {
    match &a[i] {
        Value::Str(s) => s,
        _ => unreachable!("signature checked"),
    }
}

/// `Math.max(double, double)`.
fn math_max(x: f64, y: f64) -> f64 {
    if x.is_nan() || y.is_nan() {
        f64::NAN
    } else if x == 0.0 && y == 0.0 {
        if x.is_sign_positive() { x } else { y }
    } else if x >= y {
        x
    } else {
        y
    }
}

/// `Math.min(double, double)`.
fn math_min(x: f64, y: f64) -> f64 {
    if x.is_nan() || y.is_nan() {
        f64::NAN
    } else if x == 0.0 && y == 0.0 {
        if x.is_sign_negative() { x } else { y }
    } else if x <= y {
        x
    } else {
        y
    }
}

fn java_signum(x: f64) -> f64 {
    if x.is_nan() || x == 0.0 {
        x
    } else if x > 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// `(int) d` / `(long) d`: NaN to 0, saturating at the bounds.
fn saturating_f64_to_i32(d: f64) -> i32 {
    d as i32
}

fn code_point_index_of(s: &str, t: &str) -> i32 {
    match s.find(t) {
        None => -1,
        Some(b) => s[..b].chars().count() as i32,
    }
}

/// The built-in reference functions.
pub fn builtin_corpus() -> Vec<OracleSpec> {
    use DifficultyClass::*;
    use Sort::*;
    let b = OracleSpec::builtin;
    vec![
        // identity
        b("bool.value", &[Bool], Bool, Identity, |a| Ok(Value::Bool(boola(a, 0)))),
        b("i8.value", &[Int8], Int8, Identity, |a| Ok(Value::I8(i8a(a, 0)))),
        b("i16.value", &[Int16], Int16, Identity, |a| Ok(Value::I16(i16a(a, 0)))),
        b("i32.identity", &[Int32], Int32, Identity, |a| Ok(Value::I32(i32a(a, 0)))),
        b("i64.value", &[Int64], Int64, Identity, |a| Ok(Value::I64(i64a(a, 0)))),
        b("f32.value", &[Float32], Float32, Identity, |a| Ok(Value::F32(f32a(a, 0)))),
        b("f64.value", &[Float64], Float64, Identity, |a| Ok(Value::F64(f64a(a, 0)))),
        b("str.to_string", &[String], String, Identity, |a| Ok(Value::str(stra(a, 0)))),
        b("i32.hash_code", &[Int32], Int32, Identity, |a| Ok(Value::I32(i32a(a, 0)))),
        // widening conversions
        b("i32.to_f64", &[Int32], Float64, Widening, |a| Ok(Value::F64(i32a(a, 0) as f64))),
        b("i32.to_i64", &[Int32], Int64, Widening, |a| Ok(Value::I64(i32a(a, 0) as i64))),
        b("i32.to_f32", &[Int32], Float32, Widening, |a| Ok(Value::F32(i32a(a, 0) as f32))),
        b("i8.to_i32", &[Int8], Int32, Widening, |a| Ok(Value::I32(i8a(a, 0) as i32))),
        b("i8.to_i16", &[Int8], Int16, Widening, |a| Ok(Value::I16(i8a(a, 0) as i16))),
        b("i16.to_i32", &[Int16], Int32, Widening, |a| Ok(Value::I32(i16a(a, 0) as i32))),
        b("i64.to_f64", &[Int64], Float64, Widening, |a| Ok(Value::F64(i64a(a, 0) as f64))),
        b("i64.to_f32", &[Int64], Float32, Widening, |a| Ok(Value::F32(i64a(a, 0) as f32))),
        b("f32.to_f64", &[Float32], Float64, Widening, |a| Ok(Value::F64(f32a(a, 0) as f64))),
        // one operator
        b("i32.add", &[Int32, Int32], Int32, SingleOperator, |a| Ok(Value::I32(i32a(a, 0).wrapping_add(i32a(a, 1))))),
        b("i64.add", &[Int64, Int64], Int64, SingleOperator, |a| Ok(Value::I64(i64a(a, 0).wrapping_add(i64a(a, 1))))),
        b("f32.add", &[Float32, Float32], Float32, SingleOperator, |a| Ok(Value::F32(f32a(a, 0) + f32a(a, 1)))),
        b("f64.add", &[Float64, Float64], Float64, SingleOperator, |a| Ok(Value::F64(f64a(a, 0) + f64a(a, 1)))),
        b("i32.mul", &[Int32, Int32], Int32, SingleOperator, |a| Ok(Value::I32(i32a(a, 0).wrapping_mul(i32a(a, 1))))),
        b("i64.mul", &[Int64, Int64], Int64, SingleOperator, |a| Ok(Value::I64(i64a(a, 0).wrapping_mul(i64a(a, 1))))),
        b("f64.mul", &[Float64, Float64], Float64, SingleOperator, |a| Ok(Value::F64(f64a(a, 0) * f64a(a, 1)))),
        b("f64.div", &[Float64, Float64], Float64, SingleOperator, |a| Ok(Value::F64(f64a(a, 0) / f64a(a, 1)))),
        b("i32.negate", &[Int32], Int32, SingleOperator, |a| Ok(Value::I32(i32a(a, 0).wrapping_neg()))),
        b("math.i32.subtract_exact", &[Int32, Int32], Int32, SingleOperator, |a| {
            i32a(a, 0).checked_sub(i32a(a, 1)).map(Value::I32).ok_or_else(|| "integer overflow".to_string())
        }),
        b("math.i32.add_exact", &[Int32, Int32], Int32, SingleOperator, |a| {
            i32a(a, 0).checked_add(i32a(a, 1)).map(Value::I32).ok_or_else(|| "integer overflow".to_string())
        }),
        b("math.i32.max", &[Int32, Int32], Int32, SingleOperator, |a| Ok(Value::I32(i32a(a, 0).max(i32a(a, 1))))),
        b("math.i32.min", &[Int32, Int32], Int32, SingleOperator, |a| Ok(Value::I32(i32a(a, 0).min(i32a(a, 1))))),
        b("math.i64.max", &[Int64, Int64], Int64, SingleOperator, |a| Ok(Value::I64(i64a(a, 0).max(i64a(a, 1))))),
        b("math.i64.min", &[Int64, Int64], Int64, SingleOperator, |a| Ok(Value::I64(i64a(a, 0).min(i64a(a, 1))))),
        b("math.f64.max", &[Float64, Float64], Float64, SingleOperator, |a| Ok(Value::F64(math_max(f64a(a, 0), f64a(a, 1))))),
        b("math.f64.min", &[Float64, Float64], Float64, SingleOperator, |a| Ok(Value::F64(math_min(f64a(a, 0), f64a(a, 1))))),
        b("math.f32.max", &[Float32, Float32], Float32, SingleOperator, |a| {
            Ok(Value::F32(math_max(f32a(a, 0) as f64, f32a(a, 1) as f64) as f32))
        }),
        b("math.i32.abs", &[Int32], Int32, SingleOperator, |a| Ok(Value::I32(i32a(a, 0).wrapping_abs()))),
        b("math.i64.abs", &[Int64], Int64, SingleOperator, |a| Ok(Value::I64(i64a(a, 0).wrapping_abs()))),
        b("math.f32.abs", &[Float32], Float32, SingleOperator, |a| Ok(Value::F32(f32::from_bits(f32a(a, 0).to_bits() & 0x7fff_ffff)))),
        b("math.f64.abs", &[Float64], Float64, SingleOperator, |a| {
            Ok(Value::F64(f64::from_bits(f64a(a, 0).to_bits() & 0x7fff_ffff_ffff_ffff)))
        }),
        b("math.f64.sqrt", &[Float64], Float64, SingleOperator, |a| Ok(Value::F64(f64a(a, 0).sqrt()))),
        b("math.f64.rint", &[Float64], Float64, SingleOperator, |a| Ok(Value::F64(f64a(a, 0).round_ties_even()))),
        b("bool.logical_and", &[Bool, Bool], Bool, SingleOperator, |a| Ok(Value::Bool(boola(a, 0) & boola(a, 1)))),
        b("bool.logical_or", &[Bool, Bool], Bool, SingleOperator, |a| Ok(Value::Bool(boola(a, 0) | boola(a, 1)))),
        b("bool.logical_xor", &[Bool, Bool], Bool, SingleOperator, |a| Ok(Value::Bool(boola(a, 0) ^ boola(a, 1)))),
        b("str.concat", &[String, String], String, SingleOperator, |a| {
            Ok(Value::str(&format!("{}{}", stra(a, 0), stra(a, 1))))
        }),
        b("str.length", &[String], Int32, SingleOperator, |a| Ok(Value::I32(stra(a, 0).chars().count() as i32))),
        b("str.contains", &[String, String], Bool, SingleOperator, |a| Ok(Value::Bool(stra(a, 0).contains(stra(a, 1))))),
        b("str.equals", &[String, String], Bool, SingleOperator, |a| Ok(Value::Bool(stra(a, 0) == stra(a, 1)))),
        b("str.starts_with", &[String, String], Bool, SingleOperator, |a| {
            Ok(Value::Bool(stra(a, 0).starts_with(stra(a, 1))))
        }),
        b("str.ends_with", &[String, String], Bool, SingleOperator, |a| Ok(Value::Bool(stra(a, 0).ends_with(stra(a, 1))))),
        // advanced
        b("f64.is_nan", &[Float64], Bool, Advanced, |a| Ok(Value::Bool(f64a(a, 0).is_nan()))),
        b("f32.is_nan", &[Float32], Bool, Advanced, |a| Ok(Value::Bool(f32a(a, 0).is_nan()))),
        b("f64.is_infinite", &[Float64], Bool, Advanced, |a| Ok(Value::Bool(f64a(a, 0).is_infinite()))),
        b("f64.is_finite", &[Float64], Bool, Advanced, |a| Ok(Value::Bool(f64a(a, 0).is_finite()))),
        b("f64.signum", &[Float64], Float64, Advanced, |a| Ok(Value::F64(java_signum(f64a(a, 0))))),
        b("math.i32.signum", &[Int32], Int32, Advanced, |a| Ok(Value::I32(i32a(a, 0).signum()))),
        b("i32.compare", &[Int32, Int32], Int32, Advanced, |a| Ok(Value::I32(i32a(a, 0).cmp(&i32a(a, 1)) as i32))),
        b("f64.compare", &[Float64, Float64], Int32, Advanced, |a| {
            // Double.compare: total order with -0.0 < 0.0 and NaN above +Inf
            let key = |x: f64| if x.is_nan() { i64::MAX } else {
                let bits = x.to_bits() as i64;
                if bits < 0 { bits ^ i64::MAX } else { bits }
            };
            Ok(Value::I32(key(f64a(a, 0)).cmp(&key(f64a(a, 1))) as i32))
        }),
        b("bool.compare", &[Bool, Bool], Int32, Advanced, |a| {
            let (x, y) = (boola(a, 0), boola(a, 1));
            Ok(Value::I32(if x == y { 0 } else if x { 1 } else { -1 }))
        }),
        b("bool.hash_code", &[Bool], Int32, Advanced, |a| Ok(Value::I32(if boola(a, 0) { 1231 } else { 1237 }))),
        b("i32.bit_count", &[Int32], Int32, Advanced, |a| Ok(Value::I32(i32a(a, 0).count_ones() as i32))),
        b("i32.highest_one_bit", &[Int32], Int32, Advanced, |a| {
            let x = i32a(a, 0) as u32;
            Ok(Value::I32(if x == 0 { 0 } else { (1u32 << (31 - x.leading_zeros())) as i32 }))
        }),
        b("i32.number_of_leading_zeros", &[Int32], Int32, Advanced, |a| Ok(Value::I32(i32a(a, 0).leading_zeros() as i32))),
        b("i32.rotate_left", &[Int32, Int32], Int32, Advanced, |a| {
            Ok(Value::I32(i32a(a, 0).rotate_left((i32a(a, 1) & 31) as u32)))
        }),
        b("i32.to_i8", &[Int32], Int8, Advanced, |a| Ok(Value::I8(i32a(a, 0) as i8))),
        b("f64.to_i32", &[Float64], Int32, Advanced, |a| Ok(Value::I32(saturating_f64_to_i32(f64a(a, 0))))),
        b("math.i64.to_int_exact", &[Int64], Int32, Advanced, |a| {
            i32::try_from(i64a(a, 0)).map(Value::I32).map_err(|_| "integer overflow".to_string())
        }),
        b("math.i32.floor_div", &[Int32, Int32], Int32, Advanced, |a| {
            let (x, y) = (i32a(a, 0), i32a(a, 1));
            if y == 0 {
                return Err("/ by zero".into());
            }
            let q = x.wrapping_div(y);
            Ok(Value::I32(if (x.wrapping_rem(y) != 0) && ((x < 0) != (y < 0)) { q - 1 } else { q }))
        }),
        b("math.i32.floor_mod", &[Int32, Int32], Int32, Advanced, |a| {
            let (x, y) = (i32a(a, 0), i32a(a, 1));
            if y == 0 {
                return Err("/ by zero".into());
            }
            let r = x.wrapping_rem(y);
            Ok(Value::I32(if r != 0 && ((r < 0) != (y < 0)) { r + y } else { r }))
        }),
        b("math.f64.floor", &[Float64], Float64, Advanced, |a| Ok(Value::F64(f64a(a, 0).floor()))),
        b("math.f64.ceil", &[Float64], Float64, Advanced, |a| Ok(Value::F64(f64a(a, 0).ceil()))),
        b("math.f64.copy_sign", &[Float64, Float64], Float64, Advanced, |a| {
            let bits = (f64a(a, 0).to_bits() & !(1 << 63)) | (f64a(a, 1).to_bits() & (1 << 63));
            Ok(Value::F64(f64::from_bits(bits)))
        }),
        b("math.f64.fma", &[Float64, Float64, Float64], Float64, Advanced, |a| {
            Ok(Value::F64(f64a(a, 0).mul_add(f64a(a, 1), f64a(a, 2))))
        }),
        b("math.f64.hypot", &[Float64, Float64], Float64, Advanced, |a| Ok(Value::F64(f64a(a, 0).hypot(f64a(a, 1))))),
        b("math.f64.cbrt", &[Float64], Float64, Advanced, |a| Ok(Value::F64(f64a(a, 0).cbrt()))),
        b("math.f64.exp", &[Float64], Float64, Advanced, |a| Ok(Value::F64(f64a(a, 0).exp()))),
        b("math.f64.log", &[Float64], Float64, Advanced, |a| Ok(Value::F64(f64a(a, 0).ln()))),
        b("math.f64.sin", &[Float64], Float64, Advanced, |a| Ok(Value::F64(f64a(a, 0).sin()))),
        b("math.f64.to_degrees", &[Float64], Float64, Advanced, |a| Ok(Value::F64(f64a(a, 0).to_degrees()))),
        b("str.is_empty", &[String], Bool, Advanced, |a| Ok(Value::Bool(stra(a, 0).is_empty()))),
        b("str.index_of", &[String, String], Int32, Advanced, |a| Ok(Value::I32(code_point_index_of(stra(a, 0), stra(a, 1))))),
        b("str.to_upper_case", &[String], String, Advanced, |a| Ok(Value::str(&stra(a, 0).to_uppercase()))),
        b("str.trim", &[String], String, Advanced, |a| Ok(Value::str(stra(a, 0).trim_matches(|c: char| c <= ' ')))),
        b("i32.parse_decimal", &[String], Int32, Advanced, |a| {
            stra(a, 0).parse::<i32>().map(Value::I32).map_err(|e| format!("NumberFormatException: {e}"))
        }),
        b("i32.to_string", &[Int32], String, Advanced, |a| Ok(Value::str(&i32a(a, 0).to_string()))),
        b("i64.to_string", &[Int64], String, Advanced, |a| Ok(Value::str(&i64a(a, 0).to_string()))),
    ]
}

// ---------------------------------------------------------------------------
// External process oracles

/// Default per-call timeout for external oracles.
pub const DEFAULT_CALL_TIMEOUT: Duration = Duration::from_secs(5);

struct Channel {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
}

impl Channel {
    fn read_line(&self, timeout: Duration) -> Result<String, OracleError> {
        match self.lines.recv_timeout(timeout) {
            Ok(Ok(line)) => Ok(line),
            Ok(Err(e)) => Err(OracleError::Protocol(e.to_string())),
            Err(RecvTimeoutError::Timeout) => Err(OracleError::Timeout(timeout)),
            Err(RecvTimeoutError::Disconnected) => Err(OracleError::Protocol("oracle process closed its output".into())),
        }
    }
}

/// A running oracle process. Calls are serialized through a mutex; the
/// process is killed on timeout and on drop.
pub struct ExternalProcess {
    pub command: Vec<String>,
    pub timeout: Duration,
    channel: Mutex<Option<Channel>>,
}

impl fmt::Debug for ExternalProcess {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExternalProcess").field("command", &self.command).finish()
    }
}

impl ExternalProcess {
    /// Starts `command`, performs the handshake and returns one oracle per
    /// exported function, all sharing the process.
    pub fn spawn(command: &[String], timeout: Duration) -> Result<Vec<OracleSpec>, OracleError> {
        let (program, args) = command
            .split_first()
            .ok_or_else(|| OracleError::Unavailable("empty oracle command".into()))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| OracleError::Unavailable(format!("{program}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let stop = line.is_err();
                if tx.send(line).is_err() || stop {
                    break;
                }
            }
        });
        let channel = Channel { child, stdin, lines: rx };
        let mut exports = Vec::new();
        loop {
            let line = channel.read_line(timeout)?;
            let line = line.trim_end();
            if line == "READY" {
                break;
            }
            let sig = line
                .strip_prefix("SIG ")
                .ok_or_else(|| OracleError::Protocol(format!("unexpected handshake line `{line}`")))?;
            exports.push(Signature::parse_header(sig).map_err(|e| OracleError::Protocol(e.to_string()))?);
        }
        let process = Arc::new(ExternalProcess {
            command: command.to_vec(),
            timeout,
            channel: Mutex::new(Some(channel)),
        });
        Ok(exports
            .into_iter()
            .map(|(name, signature)| OracleSpec {
                name,
                signature,
                backend: Backend::External(process.clone()),
                class: DifficultyClass::Advanced,
            })
            .collect())
    }

    fn call(&self, name: &str, args: &[Value]) -> Result<Value, OracleError> {
        let mut guard = self.channel.lock().unwrap_or_else(|p| p.into_inner());
        let channel = guard
            .as_mut()
            .ok_or_else(|| OracleError::Unavailable("oracle process was terminated".into()))?;
        let mut request = format!("CALL {name}");
        for a in args {
            request.push(' ');
            request.push_str(&format_literal(a));
        }
        request.push('\n');
        if let Err(e) = channel.stdin.write_all(request.as_bytes()).and_then(|_| channel.stdin.flush()) {
            return Err(OracleError::Unavailable(e.to_string()));
        }
        let line = match channel.read_line(self.timeout) {
            Ok(line) => line,
            Err(e) => {
                if let Some(mut dead) = guard.take() {
                    let _ = dead.child.kill();
                    let _ = dead.child.wait();
                }
                return Err(e);
            }
        };
        parse_response(line.trim_end())
    }
}

impl Drop for ExternalProcess {
    fn drop(&mut self) {
        if let Ok(mut guard) = self.channel.lock() {
            if let Some(mut ch) = guard.take() {
                let _ = ch.child.kill();
                let _ = ch.child.wait();
            }
        }
    }
}

fn parse_response(line: &str) -> Result<Value, OracleError> {
    if let Some(lit) = line.strip_prefix("OK ") {
        return parse_literal(lit).map_err(|e| OracleError::Protocol(e.to_string()));
    }
    if let Some(msg) = line.strip_prefix("ERR") {
        return Err(OracleError::Failed(msg.trim_start().to_string()));
    }
    Err(OracleError::Protocol(format!("unexpected response `{line}`")))
}

/// Parses a `CALL <name> <lit>...` request line.
pub fn parse_request(line: &str) -> Result<(String, Vec<Value>), OracleError> {
    let tokens = tokenize_literals(line).map_err(|e| OracleError::Protocol(e.to_string()))?;
    match tokens.as_slice() {
        ["CALL", name, args @ ..] => {
            let values = args
                .iter()
                .map(|t| parse_literal(t))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| OracleError::Protocol(e.to_string()))?;
            Ok((name.to_string(), values))
        }
        _ => Err(OracleError::Protocol(format!("malformed request `{line}`"))),
    }
}

/// Serves `oracles` over the line protocol until `input` closes.
pub fn serve<R: BufRead, W: Write>(oracles: &[OracleSpec], input: R, mut output: W) -> std::io::Result<()> {
    for o in oracles {
        writeln!(output, "SIG {}", o.signature.header(&o.name))?;
    }
    writeln!(output, "READY")?;
    output.flush()?;
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let response = match parse_request(&line) {
            Err(e) => format!("ERR {e}"),
            Ok((name, args)) => match oracles.iter().find(|o| o.name == name) {
                None => format!("ERR unknown function {name}"),
                Some(o) => match o.invoke(&args) {
                    Ok(v) => format!("OK {}", format_literal(&v)),
                    Err(OracleError::Failed(msg)) => format!("ERR {msg}"),
                    Err(e) => format!("ERR {e}"),
                },
            },
        };
        writeln!(output, "{response}")?;
        output.flush()?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn get(name: &str) -> OracleSpec {
        find_oracle(&builtin_corpus(), name).unwrap_or_else(|| panic!("{name}")).clone()
    }

    fn call(name: &str, args: &[&str]) -> Result<Value, OracleError> {
        let vals: Vec<Value> = args.iter().map(|a| parse_literal(a).unwrap()).collect();
        get(name).invoke(&vals)
    }

    fn ok(name: &str, args: &[&str]) -> String {
        format_literal(&call(name, args).unwrap())
    }

    #[test]
    fn corpus_audit() {
        let corpus = builtin_corpus();
        assert!(corpus.len() >= 50);
        let mut names: Vec<&str> = corpus.iter().map(|o| o.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), corpus.len(), "unique names");
        for o in &corpus {
            assert!(o.signature.has_unique_names());
        }
        assert!(usable_corpus().len() >= 50);
    }

    #[test]
    fn lookup_accepts_math_shorthand() {
        let corpus = builtin_corpus();
        assert_eq!(find_oracle(&corpus, "f64.abs").unwrap().name, "math.f64.abs");
        assert_eq!(find_oracle(&corpus, "math.f64.abs").unwrap().name, "math.f64.abs");
        assert!(find_oracle(&corpus, "nope").is_none());
    }

    #[test]
    fn argument_sorts_are_checked() {
        assert!(matches!(call("i32.add", &["i32:1"]), Err(OracleError::BadArguments(_))));
        assert!(matches!(call("i32.add", &["i32:1", "i64:1"]), Err(OracleError::BadArguments(_))));
    }

    /// At least three hand-computed cases per built-in function.
    #[test]
    fn semantics_table() {
        const NAN: &str = "f64:0x7ff8000000000000";
        const ONE: &str = "f64:0x3ff0000000000000";
        const M_ONE: &str = "f64:0xbff0000000000000";
        const INF: &str = "f64:0x7ff0000000000000";
        const NINF: &str = "f64:0xfff0000000000000";
        const ZERO: &str = "f64:0x0000000000000000";
        const NZERO: &str = "f64:0x8000000000000000";
        const TWO: &str = "f64:0x4000000000000000";
        const M3_5: &str = "f64:0xc00c000000000000"; // -3.5
        const P3_5: &str = "f64:0x400c000000000000"; // 3.5
        let table: &[(&str, &[&str], &str)] = &[
            ("bool.value", &["bool:true"], "bool:true"),
            ("bool.value", &["bool:false"], "bool:false"),
            ("bool.value", &["bool:true"], "bool:true"),
            ("i8.value", &["i8:-128"], "i8:-128"),
            ("i8.value", &["i8:0"], "i8:0"),
            ("i8.value", &["i8:127"], "i8:127"),
            ("i16.value", &["i16:-32768"], "i16:-32768"),
            ("i16.value", &["i16:5"], "i16:5"),
            ("i16.value", &["i16:32767"], "i16:32767"),
            ("i32.identity", &["i32:-5"], "i32:-5"),
            ("i32.identity", &["i32:0"], "i32:0"),
            ("i32.identity", &["i32:2147483647"], "i32:2147483647"),
            ("i64.value", &["i64:-9223372036854775808"], "i64:-9223372036854775808"),
            ("i64.value", &["i64:1"], "i64:1"),
            ("i64.value", &["i64:42"], "i64:42"),
            ("f32.value", &["f32:0x7fc00001"], "f32:0x7fc00001"),
            ("f32.value", &["f32:0x80000000"], "f32:0x80000000"),
            ("f32.value", &["f32:0x3f800000"], "f32:0x3f800000"),
            ("f64.value", &[NZERO], NZERO),
            ("f64.value", &[NAN], NAN),
            ("f64.value", &[M3_5], M3_5),
            ("str.to_string", &["str:\"\""], "str:\"\""),
            ("str.to_string", &["str:\"a b\""], "str:\"a b\""),
            ("str.to_string", &["str:\"\\\"\""], "str:\"\\\"\""),
            ("i32.hash_code", &["i32:7"], "i32:7"),
            ("i32.hash_code", &["i32:-1"], "i32:-1"),
            ("i32.hash_code", &["i32:0"], "i32:0"),
            // 3 = 1.5 * 2^1 -> exponent 1024, fraction 0x8000000000000
            ("i32.to_f64", &["i32:3"], "f64:0x4008000000000000"),
            ("i32.to_f64", &["i32:-1"], M_ONE),
            ("i32.to_f64", &["i32:0"], ZERO),
            ("i32.to_i64", &["i32:-2147483648"], "i64:-2147483648"),
            ("i32.to_i64", &["i32:5"], "i64:5"),
            ("i32.to_i64", &["i32:-1"], "i64:-1"),
            // 16777217 = 2^24 + 1 rounds to 2^24 (ties to even)
            ("i32.to_f32", &["i32:16777217"], "f32:0x4b800000"),
            ("i32.to_f32", &["i32:1"], "f32:0x3f800000"),
            // 2^31-1 rounds up to 2^31 = exponent 158 -> 0x4f000000
            ("i32.to_f32", &["i32:2147483647"], "f32:0x4f000000"),
            ("i8.to_i32", &["i8:-128"], "i32:-128"),
            ("i8.to_i32", &["i8:127"], "i32:127"),
            ("i8.to_i32", &["i8:-1"], "i32:-1"),
            ("i8.to_i16", &["i8:-7"], "i16:-7"),
            ("i8.to_i16", &["i8:0"], "i16:0"),
            ("i8.to_i16", &["i8:100"], "i16:100"),
            ("i16.to_i32", &["i16:-32768"], "i32:-32768"),
            ("i16.to_i32", &["i16:1"], "i32:1"),
            ("i16.to_i32", &["i16:300"], "i32:300"),
            // 2^53 + 1 rounds to 2^53 = 0x4340000000000000
            ("i64.to_f64", &["i64:9007199254740993"], "f64:0x4340000000000000"),
            ("i64.to_f64", &["i64:-2"], "f64:0xc000000000000000"),
            ("i64.to_f64", &["i64:0"], ZERO),
            ("i64.to_f32", &["i64:1"], "f32:0x3f800000"),
            ("i64.to_f32", &["i64:-9223372036854775808"], "f32:0xdf000000"),
            ("i64.to_f32", &["i64:16777217"], "f32:0x4b800000"),
            ("f32.to_f64", &["f32:0x3fc00000"], "f64:0x3ff8000000000000"),
            ("f32.to_f64", &["f32:0xff800000"], NINF),
            ("f32.to_f64", &["f32:0x80000000"], NZERO),
            ("i32.add", &["i32:2147483647", "i32:1"], "i32:-2147483648"),
            ("i32.add", &["i32:2", "i32:3"], "i32:5"),
            ("i32.add", &["i32:-2", "i32:-3"], "i32:-5"),
            ("i64.add", &["i64:9223372036854775807", "i64:1"], "i64:-9223372036854775808"),
            ("i64.add", &["i64:1", "i64:1"], "i64:2"),
            ("i64.add", &["i64:-1", "i64:1"], "i64:0"),
            ("f32.add", &["f32:0x3f800000", "f32:0x3f800000"], "f32:0x40000000"),
            ("f32.add", &["f32:0x7f800000", "f32:0xff800000"], "f32:0xffc00000"),
            ("f32.add", &["f32:0x80000000", "f32:0x80000000"], "f32:0x80000000"),
            ("f64.add", &[ONE, ONE], TWO),
            ("f64.add", &[NZERO, ZERO], ZERO),
            ("f64.add", &[INF, ONE], INF),
            ("i32.mul", &["i32:65536", "i32:65536"], "i32:0"),
            ("i32.mul", &["i32:-3", "i32:7"], "i32:-21"),
            ("i32.mul", &["i32:2147483647", "i32:2"], "i32:-2"),
            ("i64.mul", &["i64:4294967296", "i64:4294967296"], "i64:0"),
            ("i64.mul", &["i64:-1", "i64:-9223372036854775808"], "i64:-9223372036854775808"),
            ("i64.mul", &["i64:6", "i64:7"], "i64:42"),
            ("f64.mul", &[TWO, M3_5], "f64:0xc01c000000000000"),
            ("f64.mul", &[INF, ZERO], "f64:0xfff8000000000000"),
            ("f64.mul", &[NZERO, ONE], NZERO),
            ("f64.div", &[ONE, ZERO], INF),
            ("f64.div", &[M3_5, TWO], "f64:0xbffc000000000000"),
            ("f64.div", &[ONE, NZERO], NINF),
            ("i32.negate", &["i32:-2147483648"], "i32:-2147483648"),
            ("i32.negate", &["i32:5"], "i32:-5"),
            ("i32.negate", &["i32:0"], "i32:0"),
            ("math.i32.subtract_exact", &["i32:5", "i32:7"], "i32:-2"),
            ("math.i32.subtract_exact", &["i32:0", "i32:-2147483647"], "i32:2147483647"),
            ("math.i32.subtract_exact", &["i32:-1", "i32:2147483647"], "i32:-2147483648"),
            ("math.i32.add_exact", &["i32:5", "i32:7"], "i32:12"),
            ("math.i32.add_exact", &["i32:-2147483648", "i32:0"], "i32:-2147483648"),
            ("math.i32.add_exact", &["i32:2147483646", "i32:1"], "i32:2147483647"),
            ("math.i32.max", &["i32:-5", "i32:3"], "i32:3"),
            ("math.i32.max", &["i32:-5", "i32:-9"], "i32:-5"),
            ("math.i32.max", &["i32:0", "i32:0"], "i32:0"),
            ("math.i32.min", &["i32:-5", "i32:3"], "i32:-5"),
            ("math.i32.min", &["i32:2147483647", "i32:-2147483648"], "i32:-2147483648"),
            ("math.i32.min", &["i32:4", "i32:4"], "i32:4"),
            ("math.i64.max", &["i64:-1", "i64:1"], "i64:1"),
            ("math.i64.max", &["i64:9223372036854775807", "i64:0"], "i64:9223372036854775807"),
            ("math.i64.max", &["i64:-3", "i64:-2"], "i64:-2"),
            ("math.i64.min", &["i64:-1", "i64:1"], "i64:-1"),
            ("math.i64.min", &["i64:-9223372036854775808", "i64:0"], "i64:-9223372036854775808"),
            ("math.i64.min", &["i64:7", "i64:8"], "i64:7"),
            ("math.f64.max", &[NZERO, ZERO], ZERO),
            ("math.f64.max", &[NAN, ONE], NAN),
            ("math.f64.max", &[M3_5, TWO], TWO),
            ("math.f64.min", &[ZERO, NZERO], NZERO),
            ("math.f64.min", &[ONE, NAN], NAN),
            ("math.f64.min", &[M3_5, TWO], M3_5),
            ("math.f32.max", &["f32:0x80000000", "f32:0x00000000"], "f32:0x00000000"),
            ("math.f32.max", &["f32:0x3f800000", "f32:0x40000000"], "f32:0x40000000"),
            ("math.f32.max", &["f32:0xff800000", "f32:0xbf800000"], "f32:0xbf800000"),
            ("math.i32.abs", &["i32:-2147483648"], "i32:-2147483648"),
            ("math.i32.abs", &["i32:-7"], "i32:7"),
            ("math.i32.abs", &["i32:7"], "i32:7"),
            ("math.i64.abs", &["i64:-9223372036854775808"], "i64:-9223372036854775808"),
            ("math.i64.abs", &["i64:-1"], "i64:1"),
            ("math.i64.abs", &["i64:0"], "i64:0"),
            ("math.f32.abs", &["f32:0xbfc00000"], "f32:0x3fc00000"),
            ("math.f32.abs", &["f32:0x80000000"], "f32:0x00000000"),
            ("math.f32.abs", &["f32:0xff800000"], "f32:0x7f800000"),
            ("math.f64.abs", &[M3_5], P3_5),
            ("math.f64.abs", &[NZERO], ZERO),
            ("math.f64.abs", &[NINF], INF),
            ("math.f64.sqrt", &["f64:0x4010000000000000"], TWO),
            ("math.f64.sqrt", &[M_ONE], "f64:0xfff8000000000000"),
            ("math.f64.sqrt", &[NZERO], NZERO),
            ("math.f64.rint", &["f64:0x4004000000000000"], TWO),
            ("math.f64.rint", &[P3_5], "f64:0x4010000000000000"),
            ("math.f64.rint", &["f64:0xbfe0000000000000"], NZERO),
            ("bool.logical_and", &["bool:true", "bool:false"], "bool:false"),
            ("bool.logical_and", &["bool:true", "bool:true"], "bool:true"),
            ("bool.logical_and", &["bool:false", "bool:false"], "bool:false"),
            ("bool.logical_or", &["bool:true", "bool:false"], "bool:true"),
            ("bool.logical_or", &["bool:false", "bool:false"], "bool:false"),
            ("bool.logical_or", &["bool:true", "bool:true"], "bool:true"),
            ("bool.logical_xor", &["bool:true", "bool:false"], "bool:true"),
            ("bool.logical_xor", &["bool:true", "bool:true"], "bool:false"),
            ("bool.logical_xor", &["bool:false", "bool:false"], "bool:false"),
            ("str.concat", &["str:\"ab\"", "str:\"cd\""], "str:\"abcd\""),
            ("str.concat", &["str:\"\"", "str:\"x\""], "str:\"x\""),
            ("str.concat", &["str:\"x\"", "str:\"\""], "str:\"x\""),
            ("str.length", &["str:\"\""], "i32:0"),
            ("str.length", &["str:\"abc\""], "i32:3"),
            ("str.length", &["str:\"\u{10ffff}\""], "i32:1"),
            ("str.contains", &["str:\"hello\"", "str:\"ell\""], "bool:true"),
            ("str.contains", &["str:\"hello\"", "str:\"\""], "bool:true"),
            ("str.contains", &["str:\"hello\"", "str:\"elo\""], "bool:false"),
            ("str.equals", &["str:\"a\"", "str:\"a\""], "bool:true"),
            ("str.equals", &["str:\"a\"", "str:\"A\""], "bool:false"),
            ("str.equals", &["str:\"\"", "str:\"\""], "bool:true"),
            ("str.starts_with", &["str:\"hello\"", "str:\"he\""], "bool:true"),
            ("str.starts_with", &["str:\"hello\"", "str:\"lo\""], "bool:false"),
            ("str.starts_with", &["str:\"\"", "str:\"\""], "bool:true"),
            ("str.ends_with", &["str:\"hello\"", "str:\"lo\""], "bool:true"),
            ("str.ends_with", &["str:\"hello\"", "str:\"he\""], "bool:false"),
            ("str.ends_with", &["str:\"a\"", "str:\"ba\""], "bool:false"),
            ("f64.is_nan", &[NAN], "bool:true"),
            ("f64.is_nan", &[INF], "bool:false"),
            ("f64.is_nan", &["f64:0xfff0000000000001"], "bool:true"),
            ("f32.is_nan", &["f32:0x7fc00000"], "bool:true"),
            ("f32.is_nan", &["f32:0x7f800000"], "bool:false"),
            ("f32.is_nan", &["f32:0x00000000"], "bool:false"),
            ("f64.is_infinite", &[NINF], "bool:true"),
            ("f64.is_infinite", &[NAN], "bool:false"),
            ("f64.is_infinite", &["f64:0x7fefffffffffffff"], "bool:false"),
            ("f64.is_finite", &["f64:0x7fefffffffffffff"], "bool:true"),
            ("f64.is_finite", &[NAN], "bool:false"),
            ("f64.is_finite", &[INF], "bool:false"),
            ("f64.signum", &[M3_5], M_ONE),
            ("f64.signum", &[NZERO], NZERO),
            ("f64.signum", &[NAN], NAN),
            ("math.i32.signum", &["i32:-9"], "i32:-1"),
            ("math.i32.signum", &["i32:0"], "i32:0"),
            ("math.i32.signum", &["i32:2147483647"], "i32:1"),
            ("i32.compare", &["i32:1", "i32:2"], "i32:-1"),
            ("i32.compare", &["i32:2", "i32:2"], "i32:0"),
            ("i32.compare", &["i32:2147483647", "i32:-2147483648"], "i32:1"),
            ("f64.compare", &[NZERO, ZERO], "i32:-1"),
            ("f64.compare", &[NAN, INF], "i32:1"),
            ("f64.compare", &[NAN, NAN], "i32:0"),
            ("bool.compare", &["bool:true", "bool:false"], "i32:1"),
            ("bool.compare", &["bool:false", "bool:true"], "i32:-1"),
            ("bool.compare", &["bool:true", "bool:true"], "i32:0"),
            ("bool.hash_code", &["bool:true"], "i32:1231"),
            ("bool.hash_code", &["bool:false"], "i32:1237"),
            ("bool.hash_code", &["bool:true"], "i32:1231"),
            ("i32.bit_count", &["i32:-1"], "i32:32"),
            ("i32.bit_count", &["i32:7"], "i32:3"),
            ("i32.bit_count", &["i32:-2147483648"], "i32:1"),
            ("i32.highest_one_bit", &["i32:10"], "i32:8"),
            ("i32.highest_one_bit", &["i32:0"], "i32:0"),
            ("i32.highest_one_bit", &["i32:-1"], "i32:-2147483648"),
            ("i32.number_of_leading_zeros", &["i32:1"], "i32:31"),
            ("i32.number_of_leading_zeros", &["i32:0"], "i32:32"),
            ("i32.number_of_leading_zeros", &["i32:-1"], "i32:0"),
            ("i32.rotate_left", &["i32:-2147483648", "i32:1"], "i32:1"),
            ("i32.rotate_left", &["i32:1", "i32:33"], "i32:2"),
            ("i32.rotate_left", &["i32:3", "i32:-1"], "i32:-2147483647"),
            ("i32.to_i8", &["i32:200"], "i8:-56"),
            ("i32.to_i8", &["i32:-1"], "i8:-1"),
            ("i32.to_i8", &["i32:256"], "i8:0"),
            ("f64.to_i32", &[NAN], "i32:0"),
            ("f64.to_i32", &[INF], "i32:2147483647"),
            ("f64.to_i32", &[M3_5], "i32:-3"),
            ("math.i64.to_int_exact", &["i64:-2147483648"], "i32:-2147483648"),
            ("math.i64.to_int_exact", &["i64:5"], "i32:5"),
            ("math.i64.to_int_exact", &["i64:-1"], "i32:-1"),
            ("math.i32.floor_div", &["i32:-7", "i32:2"], "i32:-4"),
            ("math.i32.floor_div", &["i32:7", "i32:2"], "i32:3"),
            ("math.i32.floor_div", &["i32:-2147483648", "i32:-1"], "i32:-2147483648"),
            ("math.i32.floor_mod", &["i32:-7", "i32:2"], "i32:1"),
            ("math.i32.floor_mod", &["i32:7", "i32:-2"], "i32:-1"),
            ("math.i32.floor_mod", &["i32:6", "i32:3"], "i32:0"),
            ("math.f64.floor", &[M3_5], "f64:0xc010000000000000"),
            ("math.f64.floor", &[P3_5], "f64:0x4008000000000000"),
            ("math.f64.floor", &[NZERO], NZERO),
            ("math.f64.ceil", &[M3_5], "f64:0xc008000000000000"),
            ("math.f64.ceil", &["f64:0xbfe0000000000000"], NZERO),
            ("math.f64.ceil", &[P3_5], "f64:0x4010000000000000"),
            ("math.f64.copy_sign", &[P3_5, M_ONE], M3_5),
            ("math.f64.copy_sign", &[M3_5, ZERO], P3_5),
            ("math.f64.copy_sign", &[ONE, NZERO], M_ONE),
            ("math.f64.fma", &[TWO, P3_5, ONE], "f64:0x4020000000000000"),
            ("math.f64.fma", &[ONE, ONE, M_ONE], ZERO),
            ("math.f64.fma", &[INF, ZERO, ONE], "f64:0x7ff8000000000000"),
            // hypot(3, 4) = 5
            ("math.f64.hypot", &["f64:0x4008000000000000", "f64:0x4010000000000000"], "f64:0x4014000000000000"),
            ("math.f64.hypot", &[NINF, NAN], INF),
            ("math.f64.hypot", &[ZERO, NZERO], ZERO),
            ("math.f64.cbrt", &["f64:0x4020000000000000"], TWO),
            ("math.f64.cbrt", &[M_ONE], M_ONE),
            ("math.f64.cbrt", &[NZERO], NZERO),
            ("math.f64.exp", &[ZERO], ONE),
            ("math.f64.exp", &[NINF], ZERO),
            ("math.f64.exp", &[INF], INF),
            ("math.f64.log", &[ONE], ZERO),
            ("math.f64.log", &[ZERO], NINF),
            ("math.f64.log", &[M_ONE], "f64:0xfff8000000000000"),
            ("math.f64.sin", &[ZERO], ZERO),
            ("math.f64.sin", &[NZERO], NZERO),
            ("math.f64.sin", &[INF], "f64:0xfff8000000000000"),
            ("math.f64.to_degrees", &[ZERO], ZERO),
            ("math.f64.to_degrees", &[INF], INF),
            ("math.f64.to_degrees", &["f64:0x400921fb54442d18"], "f64:0x4066800000000000"),
            ("str.is_empty", &["str:\"\""], "bool:true"),
            ("str.is_empty", &["str:\" \""], "bool:false"),
            ("str.is_empty", &["str:\"abc\""], "bool:false"),
            ("str.index_of", &["str:\"hello\"", "str:\"l\""], "i32:2"),
            ("str.index_of", &["str:\"hello\"", "str:\"\""], "i32:0"),
            ("str.index_of", &["str:\"hello\"", "str:\"z\""], "i32:-1"),
            ("str.to_upper_case", &["str:\"abC1\""], "str:\"ABC1\""),
            ("str.to_upper_case", &["str:\"\""], "str:\"\""),
            ("str.to_upper_case", &["str:\"~z\""], "str:\"~Z\""),
            ("str.trim", &["str:\"  a b \""], "str:\"a b\""),
            ("str.trim", &["str:\"\""], "str:\"\""),
            ("str.trim", &["str:\"x\""], "str:\"x\""),
            ("i32.parse_decimal", &["str:\"-42\""], "i32:-42"),
            ("i32.parse_decimal", &["str:\"+7\""], "i32:7"),
            ("i32.parse_decimal", &["str:\"2147483647\""], "i32:2147483647"),
            ("i32.to_string", &["i32:-42"], "str:\"-42\""),
            ("i32.to_string", &["i32:0"], "str:\"0\""),
            ("i32.to_string", &["i32:2147483647"], "str:\"2147483647\""),
            ("i64.to_string", &["i64:-9223372036854775808"], "str:\"-9223372036854775808\""),
            ("i64.to_string", &["i64:10"], "str:\"10\""),
            ("i64.to_string", &["i64:-1"], "str:\"-1\""),
        ];
        let mut seen: HashMap<&str, usize> = HashMap::new();
        for (name, args, want) in table {
            let got = ok(name, args);
            let want_v = parse_literal(want).unwrap();
            assert!(
                parse_literal(&got).unwrap().same_class(&want_v),
                "{name}{args:?}: got {got}, want {want}"
            );
            *seen.entry(name).or_default() += 1;
        }
        for o in builtin_corpus() {
            assert!(seen.get(o.name.as_str()).copied().unwrap_or(0) >= 3, "{} lacks cases", o.name);
        }
    }

    #[test]
    fn failures_are_errors() {
        assert!(matches!(call("i32.parse_decimal", &["str:\"abc\""]), Err(OracleError::Failed(_))));
        assert!(matches!(call("i32.parse_decimal", &["str:\"2147483648\""]), Err(OracleError::Failed(_))));
        assert!(matches!(call("math.i32.floor_div", &["i32:1", "i32:0"]), Err(OracleError::Failed(_))));
        assert!(matches!(
            call("math.i32.add_exact", &["i32:2147483647", "i32:1"]),
            Err(OracleError::Failed(_))
        ));
    }

    #[test]
    fn builtins_are_stateless() {
        for o in builtin_corpus() {
            assert!(audit_stateless(&o, 200, 3).unwrap(), "{}", o.name);
        }
    }

    #[test]
    fn request_parsing() {
        let (name, args) = parse_request("CALL str.concat str:\"a b\" str:\"c\"").unwrap();
        assert_eq!(name, "str.concat");
        assert_eq!(args, vec![Value::str("a b"), Value::str("c")]);
        assert!(parse_request("PING").is_err());
        assert!(parse_request("CALL f i32:x").is_err());
        assert_eq!(parse_response("OK i32:3"), Ok(Value::I32(3)));
        assert_eq!(parse_response("ERR boom"), Err(OracleError::Failed("boom".into())));
        assert!(matches!(parse_response("WHAT"), Err(OracleError::Protocol(_))));
    }

    #[test]
    fn serve_speaks_the_protocol() {
        let corpus = builtin_corpus();
        let subset: Vec<OracleSpec> = corpus.into_iter().filter(|o| o.name == "i32.identity" || o.name == "i32.parse_decimal").collect();
        let input = "CALL i32.identity i32:-5\nCALL i32.parse_decimal str:\"abc\"\nCALL nope\nCALL i32.identity i64:1\n";
        let mut out = Vec::new();
        serve(&subset, input.as_bytes(), &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "SIG i32.identity(i32)->i32");
        assert_eq!(lines[1], "SIG i32.parse_decimal(str)->i32");
        assert_eq!(lines[2], "READY");
        assert_eq!(lines[3], "OK i32:-5");
        assert!(lines[4].starts_with("ERR NumberFormatException"));
        assert!(lines[5].starts_with("ERR unknown function"));
        assert!(lines[6].starts_with("ERR argument mismatch"));
    }
}
