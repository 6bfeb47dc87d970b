//! Sorts, bit-exact typed values and their canonical literal text.
//!
//! Every file format and the external oracle protocol exchange values in the
//! prefixed literal form produced by [`format_literal`]: `bool:true`,
//! `i32:-5`, `f64:0x3ff0000000000000`, `str:"a\"b"`. Floats travel as raw
//! IEEE-754 bits so NaN payloads and signed zeros survive a round trip.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValueError {
    #[error("malformed literal `{0}`")]
    MalformedLiteral(String),
    #[error("integer literal `{0}` out of range for its width")]
    RangeError(String),
    #[error("unknown sort `{0}`")]
    UnknownSort(String),
    #[error("malformed signature `{0}`")]
    MalformedSignature(String),
}

/// The eight value kinds understood by the synthesizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sort {
    Bool,
    Int8,
    Int16,
    Int32,
    Int64,
    Float32,
    Float64,
    String,
}

impl Sort {
    pub const ALL: [Sort; 8] = [
        Sort::Bool,
        Sort::Int8,
        Sort::Int16,
        Sort::Int32,
        Sort::Int64,
        Sort::Float32,
        Sort::Float64,
        Sort::String,
    ];

    pub const INTEGERS: [Sort; 4] = [Sort::Int8, Sort::Int16, Sort::Int32, Sort::Int64];
    pub const FLOATS: [Sort; 2] = [Sort::Float32, Sort::Float64];

    /// Short name, also the literal prefix.
    pub fn name(self) -> &'static str {
        match self {
            Sort::Bool => "bool",
            Sort::Int8 => "i8",
            Sort::Int16 => "i16",
            Sort::Int32 => "i32",
            Sort::Int64 => "i64",
            Sort::Float32 => "f32",
            Sort::Float64 => "f64",
            Sort::String => "str",
        }
    }

    pub fn is_integer(self) -> bool {
        matches!(self, Sort::Int8 | Sort::Int16 | Sort::Int32 | Sort::Int64)
    }

    pub fn is_float(self) -> bool {
        matches!(self, Sort::Float32 | Sort::Float64)
    }

    pub fn is_numeric(self) -> bool {
        self.is_integer() || self.is_float()
    }

    /// Storage width in bits for numeric sorts, 1 for Bool, 0 for String.
    pub fn width(self) -> u32 {
        match self {
            Sort::Bool => 1,
            Sort::Int8 => 8,
            Sort::Int16 => 16,
            Sort::Int32 | Sort::Float32 => 32,
            Sort::Int64 | Sort::Float64 => 64,
            Sort::String => 0,
        }
    }

    /// (exponent bits, significand bits including the hidden bit).
    pub fn float_format(self) -> Option<(u32, u32)> {
        match self {
            Sort::Float32 => Some((8, 24)),
            Sort::Float64 => Some((11, 53)),
            _ => None,
        }
    }
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Sort {
    type Err = ValueError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Sort::ALL
            .iter()
            .copied()
            .find(|sort| sort.name() == s)
            .ok_or_else(|| ValueError::UnknownSort(s.to_string()))
    }
}

/// A runtime value tagged with its sort.
///
/// Equality is bit-pattern equality: `F64(NAN) == F64(NAN)` when the payloads
/// agree, and `+0.0 != -0.0`. Use [`Value::same_class`] for the comparison used
/// when matching outputs, which additionally collapses all NaNs of a width.
#[derive(Debug, Clone)]
pub enum Value {
    Bool(bool),
    I8(i8),
    I16(i16),
    I32(i32),
    I64(i64),
    F32(f32),
    F64(f64),
    Str(Arc<str>),
}

impl Value {
    pub fn sort(&self) -> Sort {
        match self {
            Value::Bool(_) => Sort::Bool,
            Value::I8(_) => Sort::Int8,
            Value::I16(_) => Sort::Int16,
            Value::I32(_) => Sort::Int32,
            Value::I64(_) => Sort::Int64,
            Value::F32(_) => Sort::Float32,
            Value::F64(_) => Sort::Float64,
            Value::Str(_) => Sort::String,
        }
    }

    pub fn str(s: &str) -> Value {
        Value::Str(Arc::from(s))
    }

    /// Builds an integer value of `sort` from the low bits of `raw`.
    pub fn int_from_i64(sort: Sort, raw: i64) -> Value {
        match sort {
            Sort::Int8 => Value::I8(raw as i8),
            Sort::Int16 => Value::I16(raw as i16),
            Sort::Int32 => Value::I32(raw as i32),
            Sort::Int64 => Value::I64(raw),
            other => panic!("int_from_i64 on non-integer sort {other}"),
        }
    }

    /// Builds a float value of `sort` from raw IEEE bits.
    pub fn float_from_bits(sort: Sort, bits: u64) -> Value {
        match sort {
            Sort::Float32 => Value::F32(f32::from_bits(bits as u32)),
            Sort::Float64 => Value::F64(f64::from_bits(bits)),
            other => panic!("float_from_bits on non-float sort {other}"),
        }
    }

    /// Sign-extended integer payload.
    pub fn as_i64(&self) -> Option<i64> {
        match *self {
            Value::I8(v) => Some(v as i64),
            Value::I16(v) => Some(v as i64),
            Value::I32(v) => Some(v as i64),
            Value::I64(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match *self {
            Value::Bool(b) => Some(b),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Str(s) => Some(s),
            _ => None,
        }
    }

    /// Raw IEEE bits of a float value, zero-extended.
    pub fn float_bits(&self) -> Option<u64> {
        match *self {
            Value::F32(v) => Some(v.to_bits() as u64),
            Value::F64(v) => Some(v.to_bits()),
            _ => None,
        }
    }

    /// Numeric payload as a double (lossy above 2^53 for Int64).
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Value::F32(v) => Some(v as f64),
            Value::F64(v) => Some(v),
            _ => self.as_i64().map(|v| v as f64),
        }
    }

    pub fn is_nan(&self) -> bool {
        match *self {
            Value::F32(v) => v.is_nan(),
            Value::F64(v) => v.is_nan(),
            _ => false,
        }
    }

    /// Output-matching equality: bit-exact, except that every NaN of a width
    /// equals every other NaN of that width.
    pub fn same_class(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::F32(a), Value::F32(b)) if a.is_nan() && b.is_nan() => true,
            (Value::F64(a), Value::F64(b)) if a.is_nan() && b.is_nan() => true,
            _ => self == other,
        }
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Value::Bool(a), Value::Bool(b)) => a == b,
            (Value::I8(a), Value::I8(b)) => a == b,
            (Value::I16(a), Value::I16(b)) => a == b,
            (Value::I32(a), Value::I32(b)) => a == b,
            (Value::I64(a), Value::I64(b)) => a == b,
            (Value::F32(a), Value::F32(b)) => a.to_bits() == b.to_bits(),
            (Value::F64(a), Value::F64(b)) => a.to_bits() == b.to_bits(),
            (Value::Str(a), Value::Str(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for Value {}

impl std::hash::Hash for Value {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.sort().hash(state);
        match self {
            Value::Bool(b) => b.hash(state),
            Value::Str(s) => s.hash(state),
            Value::F32(_) | Value::F64(_) => self.float_bits().hash(state),
            _ => self.as_i64().hash(state),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_literal(self))
    }
}

impl FromStr for Value {
    type Err = ValueError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_literal(s)
    }
}

/// Canonical literal text for a value.
pub fn format_literal(v: &Value) -> String {
    match v {
        Value::Bool(b) => format!("bool:{b}"),
        Value::I8(x) => format!("i8:{x}"),
        Value::I16(x) => format!("i16:{x}"),
        Value::I32(x) => format!("i32:{x}"),
        Value::I64(x) => format!("i64:{x}"),
        Value::F32(x) => format!("f32:0x{:08x}", x.to_bits()),
        Value::F64(x) => format!("f64:0x{:016x}", x.to_bits()),
        Value::Str(s) => {
            let mut out = String::with_capacity(s.len() + 6);
            out.push_str("str:\"");
            for c in s.chars() {
                match c {
                    '"' => out.push_str("\\\""),
                    '\\' => out.push_str("\\\\"),
                    c if c.is_control() => out.push_str(&format!("\\u{{{:04x}}}", c as u32)),
                    c => out.push(c),
                }
            }
            out.push('"');
            out
        }
    }
}

/// Parses a canonical literal. Hex digits may be in either case.
pub fn parse_literal(text: &str) -> Result<Value, ValueError> {
    let malformed = || ValueError::MalformedLiteral(text.to_string());
    let (prefix, payload) = text.split_once(':').ok_or_else(malformed)?;
    let sort: Sort = prefix.parse().map_err(|_| malformed())?;
    match sort {
        Sort::Bool => match payload {
            "true" => Ok(Value::Bool(true)),
            "false" => Ok(Value::Bool(false)),
            _ => Err(malformed()),
        },
        Sort::Int8 | Sort::Int16 | Sort::Int32 | Sort::Int64 => {
            let digits = payload.strip_prefix('-').unwrap_or(payload);
            if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
                return Err(malformed());
            }
            let wide: i128 = payload
                .parse()
                .map_err(|_| ValueError::RangeError(text.to_string()))?;
            let bits = sort.width();
            let min = -(1i128 << (bits - 1));
            let max = (1i128 << (bits - 1)) - 1;
            if wide < min || wide > max {
                return Err(ValueError::RangeError(text.to_string()));
            }
            Ok(Value::int_from_i64(sort, wide as i64))
        }
        Sort::Float32 | Sort::Float64 => {
            let hex = payload
                .strip_prefix("0x")
                .or_else(|| payload.strip_prefix("0X"))
                .ok_or_else(malformed)?;
            let digits = if sort == Sort::Float32 { 8 } else { 16 };
            if hex.len() != digits || !hex.bytes().all(|b| b.is_ascii_hexdigit()) {
                return Err(malformed());
            }
            let bits = u64::from_str_radix(hex, 16).map_err(|_| malformed())?;
            Ok(Value::float_from_bits(sort, bits))
        }
        Sort::String => {
            let body = payload
                .strip_prefix('"')
                .and_then(|p| p.strip_suffix('"'))
                .filter(|_| payload.len() >= 2)
                .ok_or_else(malformed)?;
            unescape(body).map(|s| Value::Str(Arc::from(s))).ok_or_else(malformed)
        }
    }
}

fn unescape(body: &str) -> Option<String> {
    let mut out = String::with_capacity(body.len());
    let mut chars = body.chars();
    while let Some(c) = chars.next() {
        match c {
            '"' => return None,
            '\\' => match chars.next()? {
                '"' => out.push('"'),
                '\\' => out.push('\\'),
                'u' => {
                    if chars.next()? != '{' {
                        return None;
                    }
                    let mut code = String::new();
                    loop {
                        match chars.next()? {
                            '}' => break,
                            h if h.is_ascii_hexdigit() && code.len() < 6 => code.push(h),
                            _ => return None,
                        }
                    }
                    let cp = u32::from_str_radix(&code, 16).ok()?;
                    out.push(char::from_u32(cp)?);
                }
                _ => return None,
            },
            c => out.push(c),
        }
    }
    Some(out)
}

/// Splits a line into literal tokens on whitespace, keeping quoted string
/// literals (which may contain spaces) intact. Non-literal tokens such as
/// names or `|` are returned verbatim.
pub fn tokenize_literals(line: &str) -> Result<Vec<&str>, ValueError> {
    let bytes = line.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i].is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if line[i..].starts_with("str:\"") {
            i += 5;
            loop {
                match bytes.get(i) {
                    None => return Err(ValueError::MalformedLiteral(line[start..].to_string())),
                    Some(b'\\') => i += 2,
                    Some(b'"') => {
                        i += 1;
                        break;
                    }
                    Some(_) => i += 1,
                }
            }
        } else {
            while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
                i += 1;
            }
        }
        tokens.push(&line[start..i]);
    }
    Ok(tokens)
}

/// A typed function signature with named parameters.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Signature {
    pub params: Vec<(String, Sort)>,
    pub ret: Sort,
}

impl Signature {
    pub fn new(params: Vec<(String, Sort)>, ret: Sort) -> Self {
        Signature { params, ret }
    }

    /// Parameters named `a`, `b`, `c`, ... in order.
    pub fn positional(sorts: &[Sort], ret: Sort) -> Self {
        let params = sorts
            .iter()
            .enumerate()
            .map(|(i, s)| (param_name(i), *s))
            .collect();
        Signature { params, ret }
    }

    pub fn arity(&self) -> usize {
        self.params.len()
    }

    pub fn param_sorts(&self) -> Vec<Sort> {
        self.params.iter().map(|(_, s)| *s).collect()
    }

    pub fn has_unique_names(&self) -> bool {
        let mut names: Vec<&str> = self.params.iter().map(|(n, _)| n.as_str()).collect();
        names.sort_unstable();
        names.windows(2).all(|w| w[0] != w[1])
    }

    /// `name(s1,s2)->r`, the form used in dataset headers and the oracle handshake.
    pub fn header(&self, name: &str) -> String {
        let sorts: Vec<&str> = self.params.iter().map(|(_, s)| s.name()).collect();
        format!("{name}({})->{}", sorts.join(","), self.ret)
    }

    /// Parses `name(s1,...)->r`, naming parameters positionally.
    pub fn parse_header(text: &str) -> Result<(String, Signature), ValueError> {
        let bad = || ValueError::MalformedSignature(text.to_string());
        let open = text.find('(').ok_or_else(bad)?;
        let close = text.rfind(")->").ok_or_else(bad)?;
        if close < open {
            return Err(bad());
        }
        let name = text[..open].trim();
        if name.is_empty() {
            return Err(bad());
        }
        let inner = &text[open + 1..close];
        let sorts = if inner.trim().is_empty() {
            Vec::new()
        } else {
            inner
                .split(',')
                .map(|s| s.trim().parse::<Sort>())
                .collect::<Result<Vec<_>, _>>()?
        };
        let ret: Sort = text[close + 3..].trim().parse()?;
        Ok((name.to_string(), Signature::positional(&sorts, ret)))
    }
}

/// Positional parameter name: a, b, ..., z, p26, p27, ...
pub fn param_name(i: usize) -> String {
    if i < 26 {
        ((b'a' + i as u8) as char).to_string()
    } else {
        format!("p{i}")
    }
}
