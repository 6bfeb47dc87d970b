//! Typed operator inventory and sort-correct expression trees.
//!
//! The inventory is forty base operators drawn from the SMT-LIB core,
//! bit-vector, floating-point and string theories. Base operators are
//! instantiated per operand sort (for example `i32.add`, `f64.lt`,
//! `ite.str`), and trees are built so that every child has exactly the sort
//! its parent expects.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::sampler::{sample_value, SamplerConfig};
use crate::values::{parse_literal, Signature, Sort, Value};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GrammarError {
    #[error("no rule produces sort {0}")]
    NoRuleForSort(Sort),
    #[error("type mismatch at node {path:?}: {detail}")]
    TypeMismatch { path: Vec<usize>, detail: String },
    #[error("cannot parse expression: {0}")]
    Parse(String),
}

/// The forty base operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BaseOp {
    // integer (11)
    IAdd,
    ISub,
    IMul,
    IDiv,
    IRem,
    IAbs,
    INeg,
    IMin,
    IMax,
    Shl,
    AShr,
    // float (10)
    FAdd,
    FSub,
    FMul,
    FDiv,
    FAbs,
    FNeg,
    FSqrt,
    FMin,
    FMax,
    FRoundIntegral,
    // comparison (4)
    Lt,
    Le,
    Eq,
    Distinct,
    // boolean (5)
    And,
    Or,
    Not,
    Xor,
    Ite,
    // string (9)
    StrConcat,
    StrLen,
    StrAt,
    StrSubstr,
    StrIndexOf,
    StrContains,
    StrPrefixOf,
    StrSuffixOf,
    StrReplace,
    // conversion (1)
    Widen,
}

impl BaseOp {
    pub const ALL: [BaseOp; 40] = [
        BaseOp::IAdd,
        BaseOp::ISub,
        BaseOp::IMul,
        BaseOp::IDiv,
        BaseOp::IRem,
        BaseOp::IAbs,
        BaseOp::INeg,
        BaseOp::IMin,
        BaseOp::IMax,
        BaseOp::Shl,
        BaseOp::AShr,
        BaseOp::FAdd,
        BaseOp::FSub,
        BaseOp::FMul,
        BaseOp::FDiv,
        BaseOp::FAbs,
        BaseOp::FNeg,
        BaseOp::FSqrt,
        BaseOp::FMin,
        BaseOp::FMax,
        BaseOp::FRoundIntegral,
        BaseOp::Lt,
        BaseOp::Le,
        BaseOp::Eq,
        BaseOp::Distinct,
        BaseOp::And,
        BaseOp::Or,
        BaseOp::Not,
        BaseOp::Xor,
        BaseOp::Ite,
        BaseOp::StrConcat,
        BaseOp::StrLen,
        BaseOp::StrAt,
        BaseOp::StrSubstr,
        BaseOp::StrIndexOf,
        BaseOp::StrContains,
        BaseOp::StrPrefixOf,
        BaseOp::StrSuffixOf,
        BaseOp::StrReplace,
        BaseOp::Widen,
    ];

    /// Operator mnemonic, without the instantiation sort.
    pub fn mnemonic(self) -> &'static str {
        use BaseOp::*;
        match self {
            IAdd | FAdd => "add",
            ISub | FSub => "sub",
            IMul | FMul => "mul",
            IDiv | FDiv => "div",
            IRem => "rem",
            IAbs | FAbs => "abs",
            INeg | FNeg => "neg",
            IMin | FMin => "min",
            IMax | FMax => "max",
            Shl => "shl",
            AShr => "ashr",
            FSqrt => "sqrt",
            FRoundIntegral => "rint",
            Lt => "lt",
            Le => "le",
            Eq => "eq",
            Distinct => "distinct",
            And => "and",
            Or => "or",
            Not => "not",
            Xor => "xor",
            Ite => "ite",
            StrConcat => "concat",
            StrLen => "len",
            StrAt => "at",
            StrSubstr => "substr",
            StrIndexOf => "indexof",
            StrContains => "contains",
            StrPrefixOf => "prefixof",
            StrSuffixOf => "suffixof",
            StrReplace => "replace",
            Widen => "widen",
        }
    }
}

/// An instantiated operator. `sort` is the operand sort the base operator is
/// instantiated at; `target` is the result sort for `Widen` and equals `sort`
/// otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Operator {
    pub base: BaseOp,
    pub sort: Sort,
    pub target: Sort,
}

impl Operator {
    pub fn new(base: BaseOp, sort: Sort) -> Self {
        Operator { base, sort, target: sort }
    }

    pub fn widen(from: Sort, to: Sort) -> Self {
        Operator { base: BaseOp::Widen, sort: from, target: to }
    }

    pub fn arity(&self) -> usize {
        use BaseOp::*;
        match self.base {
            IAbs | INeg | FAbs | FNeg | FSqrt | FRoundIntegral | Not | StrLen | Widen => 1,
            Ite | StrSubstr | StrIndexOf | StrReplace => 3,
            _ => 2,
        }
    }

    pub fn arg_sort(&self, i: usize) -> Sort {
        use BaseOp::*;
        match (self.base, i) {
            (Ite, 0) => Sort::Bool,
            (StrAt, 1) | (StrSubstr, 1 | 2) | (StrIndexOf, 2) => Sort::Int32,
            _ => self.sort,
        }
    }

    pub fn arg_sorts(&self) -> Vec<Sort> {
        (0..self.arity()).map(|i| self.arg_sort(i)).collect()
    }

    pub fn return_sort(&self) -> Sort {
        use BaseOp::*;
        match self.base {
            Lt | Le | Eq | Distinct | StrContains | StrPrefixOf | StrSuffixOf => Sort::Bool,
            StrLen | StrIndexOf => Sort::Int32,
            Widen => self.target,
            _ => self.sort,
        }
    }

    /// Unique textual name such as `i32.add`, `ite.f64` or `widen.i32.f64`.
    pub fn name(&self) -> String {
        use BaseOp::*;
        match self.base {
            Widen => format!("widen.{}.{}", self.sort, self.target),
            And | Or | Not | Xor => self.base.mnemonic().to_string(),
            Ite => format!("ite.{}", self.sort),
            _ => format!("{}.{}", self.sort, self.base.mnemonic()),
        }
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// True when `to` represents every value of `from` (up to float rounding for
/// wide integers), so a widening conversion is meaningful.
fn widens(from: Sort, to: Sort) -> bool {
    match (from, to) {
        (f, t) if f.is_integer() && t.is_integer() => t.width() > f.width(),
        (f, t) if f.is_integer() && t.is_float() => true,
        (Sort::Float32, Sort::Float64) => true,
        _ => false,
    }
}

/// Every instantiation of the forty base operators.
pub fn all_operators() -> Vec<Operator> {
    use BaseOp::*;
    let mut ops = Vec::new();
    for sort in Sort::INTEGERS {
        for base in [IAdd, ISub, IMul, IDiv, IRem, IAbs, INeg, IMin, IMax, Shl, AShr] {
            ops.push(Operator::new(base, sort));
        }
    }
    for sort in Sort::FLOATS {
        for base in [FAdd, FSub, FMul, FDiv, FAbs, FNeg, FSqrt, FMin, FMax, FRoundIntegral] {
            ops.push(Operator::new(base, sort));
        }
    }
    for sort in Sort::ALL {
        if sort.is_numeric() {
            ops.push(Operator::new(Lt, sort));
            ops.push(Operator::new(Le, sort));
        }
        ops.push(Operator::new(Eq, sort));
        ops.push(Operator::new(Distinct, sort));
    }
    for base in [And, Or, Not, Xor] {
        ops.push(Operator::new(base, Sort::Bool));
    }
    for sort in Sort::ALL {
        ops.push(Operator::new(Ite, sort));
    }
    for base in [StrConcat, StrLen, StrAt, StrSubstr, StrIndexOf, StrContains, StrPrefixOf, StrSuffixOf, StrReplace] {
        ops.push(Operator::new(base, Sort::String));
    }
    for from in Sort::ALL {
        for to in Sort::ALL {
            if widens(from, to) {
                ops.push(Operator::widen(from, to));
            }
        }
    }
    ops
}

/// Sort-indexed operator inventory with terminal rules for one signature.
#[derive(Debug, Clone)]
pub struct Grammar {
    pub operators: Vec<Operator>,
    /// Variables by sort: (parameter index, name).
    variables: Vec<(usize, Arc<str>, Sort)>,
    pub constants: SamplerConfig,
    pub max_depth: usize,
}

impl Grammar {
    /// The full inventory over every sort, with no variables.
    pub fn default_grammar() -> Grammar {
        Grammar {
            operators: all_operators(),
            variables: Vec::new(),
            constants: SamplerConfig::default(),
            max_depth: 8,
        }
    }

    /// Full inventory with the signature's parameters as variables.
    pub fn for_signature_full(sig: &Signature) -> Grammar {
        Grammar::default_grammar().with_variables(sig)
    }

    /// Inventory restricted to the sorts a stub for `sig` can usefully touch:
    /// parameter sorts, the return sort and Bool, plus Int32 when strings
    /// are involved (lengths and indices).
    pub fn for_signature(sig: &Signature) -> Grammar {
        let mut sorts: BTreeSet<Sort> = sig.params.iter().map(|(_, s)| *s).collect();
        sorts.insert(sig.ret);
        sorts.insert(Sort::Bool);
        if sorts.contains(&Sort::String) {
            sorts.insert(Sort::Int32);
        }
        let operators = all_operators()
            .into_iter()
            .filter(|op| op.arg_sorts().iter().all(|s| sorts.contains(s)) && sorts.contains(&op.return_sort()))
            .collect();
        Grammar { operators, ..Grammar::default_grammar() }.with_variables(sig)
    }

    pub fn with_variables(mut self, sig: &Signature) -> Grammar {
        self.variables = sig
            .params
            .iter()
            .enumerate()
            .map(|(i, (n, s))| (i, Arc::from(n.as_str()), *s))
            .collect();
        self
    }

    pub fn with_max_depth(mut self, depth: usize) -> Grammar {
        self.max_depth = depth;
        self
    }

    /// Number of distinct base operators in the inventory.
    pub fn base_operator_count(&self) -> usize {
        self.operators.iter().map(|o| o.base).collect::<BTreeSet<_>>().len()
    }

    pub fn operators_returning(&self, sort: Sort) -> impl Iterator<Item = &Operator> {
        self.operators.iter().filter(move |o| o.return_sort() == sort)
    }

    pub fn variables_of(&self, sort: Sort) -> impl Iterator<Item = ExprTree> + '_ {
        self.variables
            .iter()
            .filter(move |(_, _, s)| *s == sort)
            .map(|(i, n, s)| ExprTree::Var { index: *i, name: n.clone(), sort: *s })
    }

    pub fn find_operator(&self, name: &str) -> Option<Operator> {
        all_operators().into_iter().find(|o| o.name() == name)
    }

    fn terminal<R: Rng + ?Sized>(&self, sort: Sort, rng: &mut R) -> ExprTree {
        let vars: Vec<ExprTree> = self.variables_of(sort).collect();
        if !vars.is_empty() && rng.gen_bool(0.7) {
            vars.choose(rng).expect("nonempty").clone()
        } else {
            ExprTree::Const(sample_value(sort, &self.constants, rng))
        }
    }

    /// Grow-method sampling: a terminal at budget 1, otherwise a uniform pick
    /// among the sort's variables, its constant rule and its operators.
    pub fn random_tree<R: Rng + ?Sized>(
        &self,
        target: Sort,
        depth_budget: usize,
        rng: &mut R,
    ) -> Result<ExprTree, GrammarError> {
        self.generate(target, depth_budget.max(1), false, rng)
    }

    /// Full-method sampling: operators until the budget runs out, where a
    /// sort has any.
    pub fn full_tree<R: Rng + ?Sized>(
        &self,
        target: Sort,
        depth_budget: usize,
        rng: &mut R,
    ) -> Result<ExprTree, GrammarError> {
        self.generate(target, depth_budget.max(1), true, rng)
    }

    fn generate<R: Rng + ?Sized>(
        &self,
        target: Sort,
        budget: usize,
        full: bool,
        rng: &mut R,
    ) -> Result<ExprTree, GrammarError> {
        if budget <= 1 {
            return Ok(self.terminal(target, rng));
        }
        let ops: Vec<&Operator> = self.operators_returning(target).collect();
        let n_vars = self.variables_of(target).count();
        let op = if full {
            ops.choose(rng).copied()
        } else {
            // options: each variable, the constant rule, each operator
            let pick = rng.gen_range(0..n_vars + 1 + ops.len());
            if pick < n_vars {
                return Ok(self.variables_of(target).nth(pick).expect("in range"));
            } else if pick == n_vars {
                return Ok(ExprTree::Const(sample_value(target, &self.constants, rng)));
            }
            Some(ops[pick - n_vars - 1])
        };
        match op {
            None => Ok(self.terminal(target, rng)),
            Some(op) => {
                let children = (0..op.arity())
                    .map(|i| self.generate(op.arg_sort(i), budget - 1, full, rng))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(ExprTree::Apply(*op, children))
            }
        }
    }

    /// Parses the prefix text form produced by [`ExprTree`]'s `Display`.
    pub fn parse_tree(&self, text: &str) -> Result<ExprTree, GrammarError> {
        let mut parser = TreeParser { text, pos: 0, grammar: self };
        let tree = parser.expr()?;
        parser.skip_ws();
        if parser.pos != text.len() {
            return Err(GrammarError::Parse(format!("trailing input at byte {}", parser.pos)));
        }
        typecheck(&tree)?;
        Ok(tree)
    }
}

/// A typed expression tree: the genome and the stub body.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ExprTree {
    Var { index: usize, name: Arc<str>, sort: Sort },
    Const(Value),
    Apply(Operator, Vec<ExprTree>),
}

impl ExprTree {
    pub fn var(index: usize, name: &str, sort: Sort) -> Self {
        ExprTree::Var { index, name: Arc::from(name), sort }
    }

    pub fn apply(op: Operator, children: Vec<ExprTree>) -> Self {
        ExprTree::Apply(op, children)
    }

    /// Sort as declared by the root (no check of children).
    pub fn sort(&self) -> Sort {
        match self {
            ExprTree::Var { sort, .. } => *sort,
            ExprTree::Const(v) => v.sort(),
            ExprTree::Apply(op, _) => op.return_sort(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            ExprTree::Apply(_, ch) => 1 + ch.iter().map(ExprTree::depth).max().unwrap_or(0),
            _ => 1,
        }
    }

    pub fn size(&self) -> usize {
        match self {
            ExprTree::Apply(_, ch) => 1 + ch.iter().map(ExprTree::size).sum::<usize>(),
            _ => 1,
        }
    }

    pub fn children(&self) -> &[ExprTree] {
        match self {
            ExprTree::Apply(_, ch) => ch,
            _ => &[],
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, ExprTree::Const(_))
    }

    /// Preorder traversal with node depth (root at 1).
    pub fn preorder(&self) -> Vec<(&ExprTree, usize)> {
        fn walk<'a>(t: &'a ExprTree, d: usize, out: &mut Vec<(&'a ExprTree, usize)>) {
            out.push((t, d));
            for c in t.children() {
                walk(c, d + 1, out);
            }
        }
        let mut out = Vec::with_capacity(16);
        walk(self, 1, &mut out);
        out
    }

    /// Subtree at preorder position `pos`.
    pub fn subtree(&self, pos: usize) -> Option<&ExprTree> {
        fn find<'a>(t: &'a ExprTree, pos: &mut usize) -> Option<&'a ExprTree> {
            if *pos == 0 {
                return Some(t);
            }
            *pos -= 1;
            for c in t.children() {
                let size = c.size();
                if *pos < size {
                    return find(c, pos);
                }
                *pos -= size;
            }
            None
        }
        let mut p = pos;
        find(self, &mut p)
    }

    /// Depth (root at 1) of the node at preorder position `pos`.
    pub fn depth_at(&self, pos: usize) -> Option<usize> {
        self.preorder().get(pos).map(|(_, d)| *d)
    }

    /// Copy of this tree with the subtree at `pos` replaced.
    pub fn replace(&self, pos: usize, new: ExprTree) -> ExprTree {
        fn go(t: &ExprTree, pos: usize, new: &mut Option<ExprTree>) -> ExprTree {
            if pos == 0 {
                return new.take().expect("replacement used once");
            }
            match t {
                ExprTree::Apply(op, ch) => {
                    let mut offset = 1;
                    let mut out = Vec::with_capacity(ch.len());
                    for c in ch {
                        let size = c.size();
                        if new.is_some() && pos >= offset && pos < offset + size {
                            out.push(go(c, pos - offset, new));
                        } else {
                            out.push(c.clone());
                        }
                        offset += size;
                    }
                    ExprTree::Apply(*op, out)
                }
                leaf => leaf.clone(),
            }
        }
        let mut slot = Some(new);
        go(self, pos, &mut slot)
    }

    /// Indices of variables referenced by the tree.
    pub fn variables(&self) -> BTreeSet<usize> {
        self.preorder()
            .into_iter()
            .filter_map(|(t, _)| match t {
                ExprTree::Var { index, .. } => Some(*index),
                _ => None,
            })
            .collect()
    }
}

impl fmt::Display for ExprTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExprTree::Var { name, .. } => f.write_str(name),
            ExprTree::Const(v) => write!(f, "{v}"),
            ExprTree::Apply(op, ch) => {
                write!(f, "({op}")?;
                for c in ch {
                    write!(f, " {c}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// Checks that every child has its operator's declared argument sort.
pub fn typecheck(tree: &ExprTree) -> Result<Sort, GrammarError> {
    fn check(t: &ExprTree, path: &mut Vec<usize>) -> Result<Sort, GrammarError> {
        match t {
            ExprTree::Var { sort, .. } => Ok(*sort),
            ExprTree::Const(v) => Ok(v.sort()),
            ExprTree::Apply(op, ch) => {
                if ch.len() != op.arity() {
                    return Err(GrammarError::TypeMismatch {
                        path: path.clone(),
                        detail: format!("{op} expects {} arguments, found {}", op.arity(), ch.len()),
                    });
                }
                for (i, c) in ch.iter().enumerate() {
                    path.push(i);
                    let got = check(c, path)?;
                    if got != op.arg_sort(i) {
                        return Err(GrammarError::TypeMismatch {
                            path: path.clone(),
                            detail: format!("{op} argument {i} expects {}, found {got}", op.arg_sort(i)),
                        });
                    }
                    path.pop();
                }
                Ok(op.return_sort())
            }
        }
    }
    check(tree, &mut Vec::new())
}

/// Preorder positions of subtrees whose sort equals `sort`.
pub fn typed_positions(tree: &ExprTree, sort: Sort) -> Vec<usize> {
    tree.preorder()
        .iter()
        .enumerate()
        .filter(|(_, (t, _))| t.sort() == sort)
        .map(|(i, _)| i)
        .collect()
}

struct TreeParser<'a> {
    text: &'a str,
    pos: usize,
    grammar: &'a Grammar,
}

impl TreeParser<'_> {
    fn skip_ws(&mut self) {
        while self.text[self.pos..].starts_with(char::is_whitespace) {
            self.pos += self.text[self.pos..].chars().next().map_or(1, char::len_utf8);
        }
    }

    fn atom(&mut self) -> &str {
        let rest = &self.text[self.pos..];
        let len = if rest.starts_with("str:\"") {
            let mut i = 5;
            let b = rest.as_bytes();
            while i < b.len() {
                match b[i] {
                    b'\\' => i += 2,
                    b'"' => {
                        i += 1;
                        break;
                    }
                    _ => i += 1,
                }
            }
            i.min(b.len())
        } else {
            rest.find(|c: char| c.is_whitespace() || c == '(' || c == ')').unwrap_or(rest.len())
        };
        self.pos += len;
        &rest[..len]
    }

    fn expr(&mut self) -> Result<ExprTree, GrammarError> {
        self.skip_ws();
        if self.text[self.pos..].starts_with('(') {
            self.pos += 1;
            self.skip_ws();
            let name = self.atom().to_string();
            let op = self
                .grammar
                .find_operator(&name)
                .ok_or_else(|| GrammarError::Parse(format!("unknown operator `{name}`")))?;
            let mut children = Vec::new();
            loop {
                self.skip_ws();
                if self.text[self.pos..].starts_with(')') {
                    self.pos += 1;
                    break;
                }
                if self.pos >= self.text.len() {
                    return Err(GrammarError::Parse("unbalanced parenthesis".into()));
                }
                children.push(self.expr()?);
            }
            Ok(ExprTree::Apply(op, children))
        } else {
            let atom = self.atom().to_string();
            if atom.is_empty() {
                return Err(GrammarError::Parse(format!("expected expression at byte {}", self.pos)));
            }
            if atom.contains(':') {
                let v = parse_literal(&atom).map_err(|e| GrammarError::Parse(e.to_string()))?;
                return Ok(ExprTree::Const(v));
            }
            self.grammar
                .variables
                .iter()
                .find(|(_, n, _)| **n == *atom)
                .map(|(i, n, s)| ExprTree::Var { index: *i, name: n.clone(), sort: *s })
                .ok_or_else(|| GrammarError::Parse(format!("unknown variable `{atom}`")))
        }
    }
}
