//! Stratified input generation and labeled dataset materialization.
//!
//! Integers are drawn by first choosing a bit length uniformly and then a
//! magnitude below `2^n`, so small and large magnitudes are equally likely
//! per stratum. Floats stratify the biased exponent field the same way. A
//! configurable fraction of draws comes from a per-sort set of boundary
//! values (NaN, infinities, extremes, zero, one, minus one).

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::oracles::{OracleError, OracleSpec};
use crate::values::{format_literal, parse_literal, Signature, Sort, Value, ValueError};

pub type SamplerRng = ChaCha8Rng;

/// Mixes a master seed with stream coordinates into an independent seed.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    parts.iter().fold(mix(master), |acc, &p| mix(acc ^ mix(p)))
}

/// RNG for one stream derived from `master`.
pub fn stream_rng(master: u64, parts: &[u64]) -> SamplerRng {
    SamplerRng::seed_from_u64(derive_seed(master, parts))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub special_probability: f64,
    pub max_string_length: usize,
    #[serde(with = "alphabet")]
    pub string_alphabet: Vec<char>,
    pub seed: u64,
}

mod alphabet {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(chars: &[char], s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(&chars.iter().collect::<String>())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<char>, D::Error> {
        Ok(String::deserialize(d)?.chars().collect())
    }
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            special_probability: 0.05,
            max_string_length: 32,
            string_alphabet: (0x20u8..=0x7e).map(char::from).collect(),
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn with_seed(seed: u64) -> Self {
        SamplerConfig { seed, ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), SampleError> {
        if !(0.0..=1.0).contains(&self.special_probability) {
            return Err(SampleError::InvalidConfig(format!(
                "special_probability {} outside [0,1]",
                self.special_probability
            )));
        }
        if self.string_alphabet.is_empty() {
            return Err(SampleError::InvalidConfig("empty string alphabet".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum SampleError {
    #[error("oracle `{oracle}` failed on {failures} of {attempts} draws; redraw budget exhausted")]
    OracleFailure { oracle: String, failures: usize, attempts: usize },
    #[error("oracle unavailable: {0}")]
    OracleUnavailable(String),
    #[error("invalid sampler configuration: {0}")]
    InvalidConfig(String),
    #[error("dataset format: {0}")]
    Format(String),
    #[error(transparent)]
    Value(#[from] ValueError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Number of bit-length strata for an integer sort (its value bits).
pub fn int_strata(sort: Sort) -> u32 {
    debug_assert!(sort.is_integer());
    sort.width() - 1
}

/// Assembles a signed integer from a stratum draw.
pub fn assemble_int(sort: Sort, magnitude: u64, negative: bool) -> Value {
    let m = magnitude as i64;
    Value::int_from_i64(sort, if negative { -m } else { m })
}

/// Draws the bit length `n` and the resulting value.
pub fn stratified_int_with_stratum<R: Rng + ?Sized>(sort: Sort, rng: &mut R) -> (u32, Value) {
    let n = rng.gen_range(0..int_strata(sort));
    let magnitude = if n == 0 { 0 } else { rng.gen_range(0..(1u64 << n)) };
    let negative = rng.gen::<bool>();
    (n, assemble_int(sort, magnitude, negative))
}

pub fn stratified_int<R: Rng + ?Sized>(sort: Sort, rng: &mut R) -> Value {
    stratified_int_with_stratum(sort, rng).1
}

/// Assembles a float from its three IEEE fields.
pub fn assemble_float(sort: Sort, negative: bool, exponent: u64, mantissa: u64) -> Value {
    let (exp_bits, sig_bits) = sort.float_format().expect("float sort");
    let frac_bits = sig_bits - 1;
    let bits = ((negative as u64) << (exp_bits + frac_bits)) | (exponent << frac_bits) | mantissa;
    Value::float_from_bits(sort, bits)
}

/// Exponent field stratified by bit length over `[0, 2^E - 2]`; the
/// all-ones exponent (NaN/Infinity) is left to the special-value path.
pub fn stratified_float<R: Rng + ?Sized>(sort: Sort, rng: &mut R) -> Value {
    let (exp_bits, sig_bits) = sort.float_format().expect("float sort");
    let frac_bits = sig_bits - 1;
    let n = rng.gen_range(0..=exp_bits);
    let max_exponent = (1u64 << exp_bits) - 2;
    let exponent = if n == 0 { 0 } else { rng.gen_range(0..=((1u64 << n) - 1).min(max_exponent)) };
    let mantissa = rng.gen_range(0..(1u64 << frac_bits));
    let negative = rng.gen::<bool>();
    assemble_float(sort, negative, exponent, mantissa)
}

/// The boundary values drawn on the special path.
pub fn special_values(sort: Sort, cfg: &SamplerConfig) -> Vec<Value> {
    match sort {
        Sort::Bool => vec![Value::Bool(true), Value::Bool(false)],
        Sort::Int8 | Sort::Int16 | Sort::Int32 | Sort::Int64 => {
            let w = sort.width();
            let max = ((1u64 << (w - 1)) - 1) as i64;
            let min = if w == 64 { i64::MIN } else { -(1i64 << (w - 1)) };
            [max, min, 0, 1, -1].iter().map(|&v| Value::int_from_i64(sort, v)).collect()
        }
        Sort::Float32 => [f32::NAN, f32::INFINITY, f32::NEG_INFINITY, f32::MAX, f32::MIN, 0.0, -0.0, 1.0, -1.0]
            .iter()
            .map(|&v| Value::F32(v))
            .collect(),
        Sort::Float64 => [f64::NAN, f64::INFINITY, f64::NEG_INFINITY, f64::MAX, f64::MIN, 0.0, -0.0, 1.0, -1.0]
            .iter()
            .map(|&v| Value::F64(v))
            .collect(),
        Sort::String => {
            let fill = cfg.string_alphabet.first().copied().unwrap_or('a');
            vec![
                Value::str(""),
                Value::str(&char::MAX.to_string()),
                Value::str(&std::iter::repeat(fill).take(cfg.max_string_length).collect::<String>()),
            ]
        }
    }
}

pub fn random_string<R: Rng + ?Sized>(cfg: &SamplerConfig, rng: &mut R) -> Value {
    let len = rng.gen_range(0..=cfg.max_string_length);
    let s: String = (0..len)
        .map(|_| *cfg.string_alphabet.choose(rng).expect("nonempty alphabet"))
        .collect();
    Value::str(&s)
}

/// One input value: a special with probability `special_probability`,
/// otherwise the sort's stratified generator.
pub fn sample_value<R: Rng + ?Sized>(sort: Sort, cfg: &SamplerConfig, rng: &mut R) -> Value {
    if cfg.special_probability > 0.0 && rng.gen_bool(cfg.special_probability) {
        let specials = special_values(sort, cfg);
        return specials[rng.gen_range(0..specials.len())].clone();
    }
    match sort {
        Sort::Bool => Value::Bool(rng.gen::<bool>()),
        Sort::Int8 | Sort::Int16 | Sort::Int32 | Sort::Int64 => stratified_int(sort, rng),
        Sort::Float32 | Sort::Float64 => stratified_float(sort, rng),
        Sort::String => random_string(cfg, rng),
    }
}

pub fn sample_inputs<R: Rng + ?Sized>(sig: &Signature, cfg: &SamplerConfig, rng: &mut R) -> Vec<Value> {
    sig.params.iter().map(|(_, s)| sample_value(*s, cfg, rng)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub inputs: Vec<Value>,
    pub output: Value,
}

/// Labeled input/output rows for one oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub signature: Signature,
    pub rows: Vec<Row>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn outputs(&self) -> impl Iterator<Item = &Value> {
        self.rows.iter().map(|r| &r.output)
    }

    /// Checks every row against the signature's sorts.
    pub fn validate(&self) -> Result<(), SampleError> {
        for (i, row) in self.rows.iter().enumerate() {
            let ok = row.inputs.len() == self.signature.arity()
                && row.inputs.iter().zip(&self.signature.params).all(|(v, (_, s))| v.sort() == *s)
                && row.output.sort() == self.signature.ret;
            if !ok {
                return Err(SampleError::Format(format!("row {i} does not match signature")));
            }
        }
        Ok(())
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "#sig {}", self.signature.header(&self.name))?;
        let mut line = String::new();
        for row in &self.rows {
            line.clear();
            for v in &row.inputs {
                line.push_str(&format_literal(v));
                line.push('\t');
            }
            let _ = write!(line, "{}", format_literal(&row.output));
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("utf-8")
    }

    pub fn read_from<R: BufRead>(input: R) -> Result<Dataset, SampleError> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| SampleError::Format("empty dataset file".into()))??;
        let sig_text = header
            .strip_prefix("#sig ")
            .ok_or_else(|| SampleError::Format(format!("bad header `{header}`")))?;
        let (name, signature) = Signature::parse_header(sig_text)?;
        let mut rows = Vec::new();
        for line in lines {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let mut values = line
                .split('\t')
                .map(parse_literal)
                .collect::<Result<Vec<_>, _>>()?;
            if values.len() != signature.arity() + 1 {
                return Err(SampleError::Format(format!(
                    "expected {} fields, found {}",
                    signature.arity() + 1,
                    values.len()
                )));
            }
            let output = values.pop().expect("nonempty");
            rows.push(Row { inputs: values, output });
        }
        let ds = Dataset { name, signature, rows };
        ds.validate()?;
        Ok(ds)
    }
}

/// Draws `n` input tuples and labels them with the oracle. Erroring draws are
/// discarded and redrawn; the whole dataset may spend at most `10 n` draws.
///
/// Row `i`'s attempt `k` uses its own RNG stream derived from
/// `(cfg.seed, i, k)`, so the result is independent of scheduling.
pub fn sample_dataset(oracle: &OracleSpec, n: usize, cfg: &SamplerConfig) -> Result<Dataset, SampleError> {
    cfg.validate()?;
    let budget = 10 * n.max(1);
    let mut attempts = 0usize;
    let mut failures = 0usize;
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let mut k = 0u64;
        loop {
            if attempts >= budget {
                return Err(SampleError::OracleFailure { oracle: oracle.name.clone(), failures, attempts });
            }
            attempts += 1;
            let mut rng = stream_rng(cfg.seed, &[i as u64, k]);
            let inputs = sample_inputs(&oracle.signature, cfg, &mut rng);
            match oracle.invoke(&inputs) {
                Ok(output) => {
                    rows.push(Row { inputs, output });
                    break;
                }
                Err(OracleError::Failed(_)) => {
                    failures += 1;
                    k += 1;
                }
                Err(e) => return Err(SampleError::OracleUnavailable(e.to_string())),
            }
        }
    }
    Ok(Dataset { name: oracle.name.clone(), signature: oracle.signature.clone(), rows })
}
