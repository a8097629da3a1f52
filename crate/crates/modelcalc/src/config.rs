//! Declarative experiment configs: a line-oriented key/value format with an
//! embedded S-expression combination tree.
//!
//! A config names a base point and radius cap, describes how to build a model
//! class as a tree of catalogue oracles wrapped in model-class constructors,
//! and lists the accuracy checks to run against it. The format is plain text
//! so experiment suites are diffable and the grammar is testable:
//!
//! ```text
//! # product of two dialed synthetic classes
//! name prod_12
//! base 0.25 -0.5
//! delta_bar 0.125
//! grid 0.125 0.5 8
//! seed 42
//! tree (product
//!   (leaf sincos2 (synthetic (function 1 1.0 near)))
//!   (leaf exp2 (synthetic (function 2 1.0 near))))
//! check function near expect 1
//! check function at
//! ```
//!
//! Key lines may appear in any order; `tree` may span multiple lines (it ends
//! when its parentheses balance). `#` starts a comment. Repeatable lines:
//! `check`, `bound`. Required: `name`, `base`, `delta_bar`, `tree`. Defaults:
//! geometric grid `0.125 0.5 8` (radii 2⁻³…2⁻¹⁰) and seed 42.
//!
//! Grammar of the tree (see `docs/config-format.md` for the full EBNF):
//!
//! ```text
//! node    := leaf | (product node node+) | (quotient node node)
//!          | (composition node node) | (power <n> node) | (shift node)
//! leaf    := (leaf <oracle> model)
//! model   := exact | (interpolation) | (synthetic [seed <n>] term*)
//! term    := (<level> <order|inf> <kappa> <at|near>)
//! ```
//!
//! `check <level> <locality> [expect <order|inf|exact|precondition>]` attaches
//! an expectation: a number asserts the combined claim order and the fitted
//! slope window around it, `exact`/`inf` assert vanishing measured error,
//! `precondition` asserts that the combination rule *rejects* the tree.
//! `zero_factors <i>…` asserts that the listed root factors vanish at the
//! base point. `bound <part> <truth|model> <quantity> <at|near> <value>`
//! overrides a uniform bound of a root part.
//!
//! Every parse failure reports the offending line; [`serialize_config`]
//! writes the canonical form, and parse ∘ serialize ∘ parse is the identity
//! on valid configs.

use crate::cert::{BoundQuantity, DerivativeLevel, Locality, Order, Point};
use crate::error::{Error, Result};
use crate::model::SyntheticTerm;
use crate::oracle::oracle_by_name;
use crate::verify::DeltaGrid;

/// Geometric radius grid parameters: `start, start·ratio, …` (`count` points).
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    /// Largest radius.
    pub start: f64,
    /// Ratio between consecutive radii, in `(0, 1)`.
    pub ratio: f64,
    /// Number of radii (at least 4).
    pub count: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            start: 0.125,
            ratio: 0.5,
            count: 8,
        }
    }
}

impl GridSpec {
    /// Materialises the grid.
    pub fn to_grid(&self) -> Result<DeltaGrid> {
        DeltaGrid::geometric(self.start, self.ratio, self.count)
    }
}

/// How a leaf wraps its oracle into a model class.
#[derive(Debug, Clone, PartialEq)]
pub enum LeafModel {
    /// Models equal the reference exactly.
    Exact,
    /// Forward-simplex-gradient interpolation models.
    Interpolation,
    /// Synthetic models with dialed per-level error rates; `seed` overrides
    /// the per-leaf seed derived from the config seed.
    Synthetic {
        /// Explicit perturbation seed (default: mixed from the config seed
        /// and the leaf position).
        seed: Option<u64>,
        /// One dialed error term per derivative level at most.
        terms: Vec<SyntheticTerm>,
    },
}

/// A combination tree over catalogue oracles.
#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    /// A catalogue oracle wrapped in a model-class constructor.
    Leaf {
        /// Catalogue oracle name.
        oracle: String,
        /// Model-class constructor.
        model: LeafModel,
    },
    /// Product of two or more scalar children.
    Product(Vec<TreeNode>),
    /// Quotient numerator/denominator.
    Quotient(Box<TreeNode>, Box<TreeNode>),
    /// Composition inner-then-outer.
    Composition(Box<TreeNode>, Box<TreeNode>),
    /// Integer power of one child.
    Power(u32, Box<TreeNode>),
    /// Translation trick applied to one child: models shifted to interpolate
    /// the reference at the base point.
    Shift(Box<TreeNode>),
}

impl TreeNode {
    /// Number of leaves, in depth-first order.
    pub fn leaf_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Product(children) => children.iter().map(TreeNode::leaf_count).sum(),
            TreeNode::Quotient(a, b) | TreeNode::Composition(a, b) => {
                a.leaf_count() + b.leaf_count()
            }
            TreeNode::Power(_, c) | TreeNode::Shift(c) => c.leaf_count(),
        }
    }

    /// Combination depth: 0 for a bare leaf.
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Product(children) => {
                1 + children.iter().map(TreeNode::depth).max().unwrap_or(0)
            }
            TreeNode::Quotient(a, b) | TreeNode::Composition(a, b) => 1 + a.depth().max(b.depth()),
            TreeNode::Power(_, c) | TreeNode::Shift(c) => 1 + c.depth(),
        }
    }
}

/// What a check asserts beyond bound soundness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Expectation {
    /// Only that measured errors stay below the combined bound.
    Sound,
    /// The combined claim has this order and the fitted slope lands in
    /// `[order − 0.15, order + 0.35]`.
    Order(f64),
    /// Measured errors vanish (at most `1e-12` at every radius).
    Exact,
    /// The combination rule rejects the tree (a violated hypothesis).
    Precondition,
}

/// One accuracy check to run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckSpec {
    /// Derivative level checked.
    pub level: DerivativeLevel,
    /// Locality checked.
    pub locality: Locality,
    /// Assertion attached to the check.
    pub expectation: Expectation,
}

/// Which side of a part a bound override targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundSide {
    /// Bound on the underlying function.
    Truth,
    /// Bound on the model family.
    Model,
}

/// A caller-supplied uniform bound for one root part, replacing the
/// analytic/sampled value.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundOverride {
    /// Index of the root combination's part (0-based).
    pub part: usize,
    /// Truth or model side.
    pub side: BoundSide,
    /// Bounded quantity.
    pub quantity: BoundQuantity,
    /// Locality the value covers.
    pub locality: Locality,
    /// The bound value.
    pub value: f64,
}

/// A parsed experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    /// Experiment name (also the report file stem).
    pub name: String,
    /// Base point `x₀`.
    pub base: Point,
    /// Radius cap `Δ̄`.
    pub delta_bar: f64,
    /// Radius grid.
    pub grid: GridSpec,
    /// Master seed for synthetic perturbations.
    pub seed: u64,
    /// The combination tree.
    pub tree: TreeNode,
    /// Checks to run.
    pub checks: Vec<CheckSpec>,
    /// Root factors asserted to vanish at the base point.
    pub zero_factors: Vec<usize>,
    /// Uniform-bound overrides for root parts.
    pub bounds: Vec<BoundOverride>,
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

fn perr(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_f64(token: &str, line: usize, what: &str) -> Result<f64> {
    token
        .parse::<f64>()
        .map_err(|_| perr(line, format!("{what}: expected a number, got '{token}'")))
}

fn parse_usize(token: &str, line: usize, what: &str) -> Result<usize> {
    token
        .parse::<usize>()
        .map_err(|_| perr(line, format!("{what}: expected a non-negative integer, got '{token}'")))
}

fn parse_level(token: &str, line: usize) -> Result<DerivativeLevel> {
    match token {
        "function" => Ok(DerivativeLevel::Function),
        "gradient" => Ok(DerivativeLevel::Gradient),
        "hessian" => Ok(DerivativeLevel::Hessian),
        _ => Err(perr(
            line,
            format!("expected function|gradient|hessian, got '{token}'"),
        )),
    }
}

fn parse_locality(token: &str, line: usize) -> Result<Locality> {
    match token {
        "at" => Ok(Locality::At),
        "near" => Ok(Locality::Near),
        _ => Err(perr(line, format!("expected at|near, got '{token}'"))),
    }
}

fn parse_order(token: &str, line: usize) -> Result<Order> {
    if token == "inf" {
        return Ok(Order::Infinite);
    }
    let n = parse_f64(token, line, "order")?;
    Order::finite(n).map_err(|e| perr(line, format!("order: {e}")))
}

/// One S-expression token with the line it came from.
#[derive(Debug, Clone, PartialEq)]
enum Token {
    Open(usize),
    Close(usize),
    Atom(String, usize),
}

impl Token {
    fn line(&self) -> usize {
        match self {
            Token::Open(l) | Token::Close(l) => *l,
            Token::Atom(_, l) => *l,
        }
    }
}

fn tokenize_into(text: &str, line: usize, out: &mut Vec<Token>) {
    let mut atom = String::new();
    let flush = |atom: &mut String, out: &mut Vec<Token>| {
        if !atom.is_empty() {
            out.push(Token::Atom(std::mem::take(atom), line));
        }
    };
    for ch in text.chars() {
        match ch {
            '(' => {
                flush(&mut atom, out);
                out.push(Token::Open(line));
            }
            ')' => {
                flush(&mut atom, out);
                out.push(Token::Close(line));
            }
            c if c.is_whitespace() => flush(&mut atom, out),
            c => atom.push(c),
        }
    }
    flush(&mut atom, out);
}

/// Token cursor over the tree expression.
struct Cursor {
    tokens: Vec<Token>,
    pos: usize,
}

impl Cursor {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self, expected: &str) -> Result<Token> {
        let t = self
            .tokens
            .get(self.pos)
            .cloned()
            .ok_or_else(|| perr(self.last_line(), format!("unexpected end of tree, expected {expected}")))?;
        self.pos += 1;
        Ok(t)
    }

    fn atom(&mut self, expected: &str) -> Result<(String, usize)> {
        match self.next(expected)? {
            Token::Atom(a, l) => Ok((a, l)),
            t => Err(perr(t.line(), format!("expected {expected}"))),
        }
    }

    fn open(&mut self, what: &str) -> Result<usize> {
        match self.next("'('")? {
            Token::Open(l) => Ok(l),
            t => Err(perr(t.line(), format!("expected '(' to start {what}"))),
        }
    }

    fn close(&mut self, what: &str) -> Result<()> {
        match self.next("')'")? {
            Token::Close(_) => Ok(()),
            t => Err(perr(t.line(), format!("expected ')' to end {what}"))),
        }
    }

    fn at_close(&self) -> bool {
        matches!(self.peek(), Some(Token::Close(_)))
    }

    fn last_line(&self) -> usize {
        self.tokens.last().map_or(0, Token::line)
    }
}

fn parse_synthetic_terms(cur: &mut Cursor) -> Result<(Option<u64>, Vec<SyntheticTerm>)> {
    let mut seed = None;
    if let Some(Token::Atom(a, _)) = cur.peek() {
        if a == "seed" {
            let (_, line) = cur.atom("seed")?;
            let (value, vline) = cur.atom("seed value")?;
            seed = Some(
                value
                    .parse::<u64>()
                    .map_err(|_| perr(vline, format!("seed: expected an integer, got '{value}'")))?,
            );
            let _ = line;
        }
    }
    let mut terms = Vec::new();
    while !cur.at_close() {
        let line = cur.open("a synthetic term")?;
        let (level, lline) = cur.atom("a derivative level")?;
        let level = parse_level(&level, lline)?;
        let (order, oline) = cur.atom("an order or inf")?;
        let order = parse_order(&order, oline)?;
        let (kappa, kline) = cur.atom("a constant κ")?;
        let kappa = parse_f64(&kappa, kline, "κ")?;
        let (locality, locline) = cur.atom("at|near")?;
        let locality = parse_locality(&locality, locline)?;
        cur.close("the synthetic term")?;
        let _ = line;
        terms.push(SyntheticTerm {
            level,
            order,
            kappa,
            locality,
        });
    }
    Ok((seed, terms))
}

fn parse_leaf_model(cur: &mut Cursor) -> Result<LeafModel> {
    match cur.next("a model spec (exact, (interpolation), or (synthetic …))")? {
        Token::Atom(a, line) => {
            if a == "exact" {
                Ok(LeafModel::Exact)
            } else {
                Err(perr(
                    line,
                    format!("unknown model spec '{a}', expected exact, (interpolation), or (synthetic …)"),
                ))
            }
        }
        Token::Open(_) => {
            let (head, hline) = cur.atom("interpolation or synthetic")?;
            let model = match head.as_str() {
                "interpolation" => LeafModel::Interpolation,
                "synthetic" => {
                    let (seed, terms) = parse_synthetic_terms(cur)?;
                    LeafModel::Synthetic { seed, terms }
                }
                other => {
                    return Err(perr(
                        hline,
                        format!("unknown model spec '{other}', expected interpolation or synthetic"),
                    ))
                }
            };
            cur.close("the model spec")?;
            Ok(model)
        }
        t => Err(perr(t.line(), "expected a model spec".to_string())),
    }
}

fn parse_node(cur: &mut Cursor) -> Result<TreeNode> {
    let open_line = cur.open("a tree node")?;
    let (head, hline) = cur.atom("a node kind (leaf|product|quotient|composition|power|shift)")?;
    let node = match head.as_str() {
        "leaf" => {
            let (oracle, oline) = cur.atom("a catalogue oracle name")?;
            if oracle_by_name(&oracle).is_err() {
                return Err(perr(oline, format!("unknown oracle '{oracle}'")));
            }
            let model = parse_leaf_model(cur)?;
            TreeNode::Leaf { oracle, model }
        }
        "product" => {
            let mut children = Vec::new();
            while !cur.at_close() {
                children.push(parse_node(cur)?);
            }
            if children.len() < 2 {
                return Err(perr(
                    open_line,
                    format!("product node needs at least 2 children, got {}", children.len()),
                ));
            }
            TreeNode::Product(children)
        }
        "quotient" | "composition" => {
            let mut children = Vec::new();
            while !cur.at_close() {
                children.push(parse_node(cur)?);
            }
            if children.len() != 2 {
                return Err(perr(
                    open_line,
                    format!("{head} node needs exactly 2 children, got {}", children.len()),
                ));
            }
            let b = Box::new(children.pop().expect("checked length"));
            let a = Box::new(children.pop().expect("checked length"));
            if head == "quotient" {
                TreeNode::Quotient(a, b)
            } else {
                TreeNode::Composition(a, b)
            }
        }
        "power" => {
            let (n, nline) = cur.atom("an exponent")?;
            let n: u32 = n
                .parse()
                .map_err(|_| perr(nline, format!("power exponent: expected an integer, got '{n}'")))?;
            if n == 0 {
                return Err(perr(nline, "power exponent must be at least 1"));
            }
            let child = parse_node(cur)?;
            TreeNode::Power(n, Box::new(child))
        }
        "shift" => {
            let child = parse_node(cur)?;
            TreeNode::Shift(Box::new(child))
        }
        other => {
            return Err(perr(
                hline,
                format!(
                    "unknown node kind '{other}', expected leaf|product|quotient|composition|power|shift"
                ),
            ))
        }
    };
    cur.close(&format!("the {head} node"))?;
    Ok(node)
}

/// Parses the documented config format, reporting the offending line on
/// failure.
pub fn parse_config(text: &str) -> Result<Config> {
    let mut name: Option<(String, usize)> = None;
    let mut base: Option<Point> = None;
    let mut delta_bar: Option<f64> = None;
    let mut grid: Option<GridSpec> = None;
    let mut seed: Option<u64> = None;
    let mut tree_tokens: Option<Vec<Token>> = None;
    let mut checks = Vec::new();
    let mut zero_factors: Option<Vec<usize>> = None;
    let mut bounds = Vec::new();

    let mut pending_tree_depth = 0usize;

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        };
        if line.trim().is_empty() {
            continue;
        }
        if pending_tree_depth > 0 {
            let tokens = tree_tokens.as_mut().expect("tree collection in progress");
            tokenize_into(line, lineno, tokens);
            pending_tree_depth = open_depth(tokens);
            continue;
        }
        let mut fields = line.split_whitespace();
        let key = fields.next().expect("non-blank line has a first token");
        let rest: Vec<&str> = fields.collect();
        let no_dup = |slot_taken: bool, key: &str| -> Result<()> {
            if slot_taken {
                Err(perr(lineno, format!("duplicate field '{key}'")))
            } else {
                Ok(())
            }
        };
        match key {
            "name" => {
                no_dup(name.is_some(), key)?;
                if rest.len() != 1 {
                    return Err(perr(lineno, "name takes exactly one token"));
                }
                let n = rest[0];
                if !n
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
                {
                    return Err(perr(
                        lineno,
                        format!("name '{n}' may only contain letters, digits, '_', '-'"),
                    ));
                }
                name = Some((n.to_string(), lineno));
            }
            "base" => {
                no_dup(base.is_some(), key)?;
                if rest.is_empty() {
                    return Err(perr(lineno, "base needs at least one coordinate"));
                }
                let coords = rest
                    .iter()
                    .map(|t| parse_f64(t, lineno, "base coordinate"))
                    .collect::<Result<Vec<f64>>>()?;
                base = Some(Point::from_vec(coords));
            }
            "delta_bar" => {
                no_dup(delta_bar.is_some(), key)?;
                if rest.len() != 1 {
                    return Err(perr(lineno, "delta_bar takes exactly one value"));
                }
                let v = parse_f64(rest[0], lineno, "delta_bar")?;
                if !(v.is_finite() && v > 0.0) {
                    return Err(perr(lineno, format!("delta_bar must be positive, got {v}")));
                }
                delta_bar = Some(v);
            }
            "grid" => {
                no_dup(grid.is_some(), key)?;
                if rest.len() != 3 {
                    return Err(perr(lineno, "grid takes start, ratio, count"));
                }
                let start = parse_f64(rest[0], lineno, "grid start")?;
                let ratio = parse_f64(rest[1], lineno, "grid ratio")?;
                let count = parse_usize(rest[2], lineno, "grid count")?;
                if count < 4 {
                    return Err(perr(
                        lineno,
                        format!("grid count must be at least 4 for an order fit, got {count}"),
                    ));
                }
                let spec = GridSpec { start, ratio, count };
                spec.to_grid().map_err(|e| perr(lineno, format!("grid: {e}")))?;
                grid = Some(spec);
            }
            "seed" => {
                no_dup(seed.is_some(), key)?;
                if rest.len() != 1 {
                    return Err(perr(lineno, "seed takes exactly one value"));
                }
                let s = rest[0]
                    .parse::<u64>()
                    .map_err(|_| perr(lineno, format!("seed: expected an integer, got '{}'", rest[0])))?;
                seed = Some(s);
            }
            "tree" => {
                no_dup(tree_tokens.is_some(), key)?;
                let mut tokens = Vec::new();
                tokenize_into(&rest.join(" "), lineno, &mut tokens);
                if tokens.is_empty() {
                    return Err(perr(lineno, "tree needs an expression"));
                }
                pending_tree_depth = open_depth(&tokens);
                tree_tokens = Some(tokens);
            }
            "check" => {
                if rest.len() != 2 && rest.len() != 4 {
                    return Err(perr(
                        lineno,
                        "check takes level and locality, optionally followed by expect <value>",
                    ));
                }
                let level = parse_level(rest[0], lineno)?;
                let locality = parse_locality(rest[1], lineno)?;
                let expectation = if rest.len() == 4 {
                    if rest[2] != "expect" {
                        return Err(perr(lineno, format!("expected 'expect', got '{}'", rest[2])));
                    }
                    match rest[3] {
                        "exact" | "inf" => Expectation::Exact,
                        "precondition" => Expectation::Precondition,
                        token => {
                            let n = parse_f64(token, lineno, "expected order")?;
                            if !(n.is_finite() && n >= 0.0) {
                                return Err(perr(
                                    lineno,
                                    format!("expected order must be a finite non-negative number, got {n}"),
                                ));
                            }
                            Expectation::Order(n)
                        }
                    }
                } else {
                    Expectation::Sound
                };
                checks.push(CheckSpec {
                    level,
                    locality,
                    expectation,
                });
            }
            "zero_factors" => {
                no_dup(zero_factors.is_some(), key)?;
                if rest.is_empty() {
                    return Err(perr(lineno, "zero_factors needs at least one index"));
                }
                let idx = rest
                    .iter()
                    .map(|t| parse_usize(t, lineno, "zero factor index"))
                    .collect::<Result<Vec<usize>>>()?;
                zero_factors = Some(idx);
            }
            "bound" => {
                if rest.len() != 5 {
                    return Err(perr(
                        lineno,
                        "bound takes part, truth|model, quantity, at|near, value",
                    ));
                }
                let part = parse_usize(rest[0], lineno, "bound part index")?;
                let side = match rest[1] {
                    "truth" => BoundSide::Truth,
                    "model" => BoundSide::Model,
                    other => {
                        return Err(perr(lineno, format!("expected truth|model, got '{other}'")))
                    }
                };
                let quantity = BoundQuantity::parse(rest[2]).ok_or_else(|| {
                    perr(lineno, format!("unknown bound quantity '{}'", rest[2]))
                })?;
                let locality = parse_locality(rest[3], lineno)?;
                let value = parse_f64(rest[4], lineno, "bound value")?;
                if !(value.is_finite() && value >= 0.0) {
                    return Err(perr(
                        lineno,
                        format!("bound value must be finite and non-negative, got {value}"),
                    ));
                }
                bounds.push(BoundOverride {
                    part,
                    side,
                    quantity,
                    locality,
                    value,
                });
            }
            other => return Err(perr(lineno, format!("unknown field '{other}'"))),
        }
    }
    if pending_tree_depth > 0 {
        return Err(perr(
            text.lines().count(),
            "tree expression has unbalanced parentheses",
        ));
    }

    let (name, _) = name.ok_or_else(|| perr(0, "missing required field 'name'"))?;
    let base = base.ok_or_else(|| perr(0, "missing required field 'base'"))?;
    let delta_bar = delta_bar.ok_or_else(|| perr(0, "missing required field 'delta_bar'"))?;
    let tokens = tree_tokens.ok_or_else(|| perr(0, "missing required field 'tree'"))?;

    let mut cur = Cursor { tokens, pos: 0 };
    let tree = parse_node(&mut cur)?;
    if let Some(extra) = cur.peek() {
        return Err(perr(
            extra.line(),
            "unexpected tokens after the tree expression",
        ));
    }

    Ok(Config {
        name,
        base,
        delta_bar,
        grid: grid.unwrap_or_default(),
        seed: seed.unwrap_or(42),
        tree,
        checks,
        zero_factors: zero_factors.unwrap_or_default(),
        bounds,
    })
}

fn open_depth(tokens: &[Token]) -> usize {
    let mut depth = 0usize;
    for t in tokens {
        match t {
            Token::Open(_) => depth += 1,
            Token::Close(_) => depth = depth.saturating_sub(1),
            Token::Atom(..) => {}
        }
    }
    depth
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

fn write_order(order: Order) -> String {
    match order {
        Order::Infinite => "inf".to_string(),
        Order::Finite(n) => format!("{n}"),
    }
}

fn write_node(node: &TreeNode, out: &mut String) {
    match node {
        TreeNode::Leaf { oracle, model } => {
            out.push_str(&format!("(leaf {oracle} "));
            match model {
                LeafModel::Exact => out.push_str("exact"),
                LeafModel::Interpolation => out.push_str("(interpolation)"),
                LeafModel::Synthetic { seed, terms } => {
                    out.push_str("(synthetic");
                    if let Some(s) = seed {
                        out.push_str(&format!(" seed {s}"));
                    }
                    for t in terms {
                        out.push_str(&format!(
                            " ({} {} {} {})",
                            t.level,
                            write_order(t.order),
                            t.kappa,
                            t.locality
                        ));
                    }
                    out.push(')');
                }
            }
            out.push(')');
        }
        TreeNode::Product(children) => {
            out.push_str("(product");
            for c in children {
                out.push(' ');
                write_node(c, out);
            }
            out.push(')');
        }
        TreeNode::Quotient(a, b) => {
            out.push_str("(quotient ");
            write_node(a, out);
            out.push(' ');
            write_node(b, out);
            out.push(')');
        }
        TreeNode::Composition(a, b) => {
            out.push_str("(composition ");
            write_node(a, out);
            out.push(' ');
            write_node(b, out);
            out.push(')');
        }
        TreeNode::Power(n, c) => {
            out.push_str(&format!("(power {n} "));
            write_node(c, out);
            out.push(')');
        }
        TreeNode::Shift(c) => {
            out.push_str("(shift ");
            write_node(c, out);
            out.push(')');
        }
    }
}

/// Writes the canonical text form of a config; `parse_config` of the output
/// reproduces the config exactly.
pub fn serialize_config(cfg: &Config) -> String {
    let mut out = String::new();
    out.push_str(&format!("name {}\n", cfg.name));
    let coords: Vec<String> = cfg.base.iter().map(|c| format!("{c}")).collect();
    out.push_str(&format!("base {}\n", coords.join(" ")));
    out.push_str(&format!("delta_bar {}\n", cfg.delta_bar));
    out.push_str(&format!(
        "grid {} {} {}\n",
        cfg.grid.start, cfg.grid.ratio, cfg.grid.count
    ));
    out.push_str(&format!("seed {}\n", cfg.seed));
    let mut tree = String::new();
    write_node(&cfg.tree, &mut tree);
    out.push_str(&format!("tree {tree}\n"));
    for check in &cfg.checks {
        let mut line = format!("check {} {}", check.level, check.locality);
        match check.expectation {
            Expectation::Sound => {}
            Expectation::Order(n) => line.push_str(&format!(" expect {n}")),
            Expectation::Exact => line.push_str(" expect exact"),
            Expectation::Precondition => line.push_str(" expect precondition"),
        }
        out.push_str(&line);
        out.push('\n');
    }
    if !cfg.zero_factors.is_empty() {
        let idx: Vec<String> = cfg.zero_factors.iter().map(|i| i.to_string()).collect();
        out.push_str(&format!("zero_factors {}\n", idx.join(" ")));
    }
    for b in &cfg.bounds {
        let side = match b.side {
            BoundSide::Truth => "truth",
            BoundSide::Model => "model",
        };
        out.push_str(&format!(
            "bound {} {side} {} {} {}\n",
            b.part, b.quantity, b.locality, b.value
        ));
    }
    out
}
