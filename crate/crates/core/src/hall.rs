//! Formal brackets, Hall sets and Lie coordinates.
//!
//! A Hall set is an ordered subset of the free magma whose evaluation is a
//! basis of the free Lie algebra. The axioms used here are
//!
//! * every generator belongs to the set;
//! * `(b1, b2)` belongs to the set iff `b1 < b2` and either `b2` is a
//!   generator or `b2 = (b3, b4)` with `b3 <= b1`;
//! * `b1 < (b1, b2)` for every element `(b1, b2)`.
//!
//! Generator `X0` is the drift and is always the largest element.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex, OnceLock};

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::freealg::{Polynomial, Word};
use crate::linalg::Matrix;
use crate::scalar::{Rational, Scalar};

/// Element of the free magma `Br(X)`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub enum BracketTree {
    Leaf(u8),
    Node(Arc<BracketTree>, Arc<BracketTree>),
}

impl BracketTree {
    pub fn leaf(i: u8) -> Self {
        BracketTree::Leaf(i)
    }

    pub fn node(a: BracketTree, b: BracketTree) -> Self {
        BracketTree::Node(Arc::new(a), Arc::new(b))
    }

    pub fn x0() -> Self {
        BracketTree::Leaf(0)
    }

    pub fn x1() -> Self {
        BracketTree::Leaf(1)
    }

    pub fn len(&self) -> usize {
        match self {
            BracketTree::Leaf(_) => 1,
            BracketTree::Node(a, b) => a.len() + b.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, BracketTree::Leaf(_))
    }

    /// Number of occurrences of generator `j`.
    pub fn count(&self, j: u8) -> usize {
        match self {
            BracketTree::Leaf(i) => usize::from(*i == j),
            BracketTree::Node(a, b) => a.count(j) + b.count(j),
        }
    }

    pub fn max_letter(&self) -> u8 {
        match self {
            BracketTree::Leaf(i) => *i,
            BracketTree::Node(a, b) => a.max_letter().max(b.max_letter()),
        }
    }

    pub fn children(&self) -> Option<(&BracketTree, &BracketTree)> {
        match self {
            BracketTree::Leaf(_) => None,
            BracketTree::Node(a, b) => Some((a, b)),
        }
    }

    /// Leaves read left to right.
    pub fn foliage(&self) -> Word {
        fn go(t: &BracketTree, out: &mut Vec<u8>) {
            match t {
                BracketTree::Leaf(i) => out.push(*i),
                BracketTree::Node(a, b) => {
                    go(a, out);
                    go(b, out);
                }
            }
        }
        let mut v = Vec::new();
        go(self, &mut v);
        Word::new(v)
    }

    /// Nested-paren form, e.g. `(X1,(X1,X0))`.
    pub fn to_paren(&self) -> String {
        match self {
            BracketTree::Leaf(i) => format!("X{i}"),
            BracketTree::Node(a, b) => format!("({},{})", a.to_paren(), b.to_paren()),
        }
    }

    /// Short name for the named families (`X1`, `M2`, `W1`, `Q1`), else the bracket form.
    pub fn label(&self) -> String {
        for nu in 1..=12 {
            if self.len() == nu + 1 && *self == build_m(nu) {
                return format!("M{nu}");
            }
        }
        for j in 1..=6 {
            if self.len() == 2 * j + 1 && *self == build_w(j) {
                return format!("W{j}");
            }
        }
        if *self == build_q1() {
            return "Q1".to_string();
        }
        self.to_string()
    }
}

impl fmt::Display for BracketTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BracketTree::Leaf(i) => write!(f, "X{i}"),
            BracketTree::Node(a, b) => write!(f, "[{a},{b}]"),
        }
    }
}

impl fmt::Debug for BracketTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl FromStr for BracketTree {
    type Err = Error;

    /// Accepts `X0`, `[X1,X0]`, `(X1,(X1,X0))` and the names `M<n>`, `W<n>`, `Q1`.
    fn from_str(s: &str) -> Result<Self> {
        let chars: Vec<char> = s.chars().filter(|c| !c.is_whitespace()).collect();
        let mut pos = 0;
        let tree = parse_tree(&chars, &mut pos)?;
        if pos != chars.len() {
            return Err(parse_err(pos, format!("trailing input in `{s}`")));
        }
        Ok(tree)
    }
}

fn parse_err(pos: usize, message: String) -> Error {
    Error::Parse {
        line: 0,
        column: pos + 1,
        message,
    }
}

fn parse_tree(c: &[char], pos: &mut usize) -> Result<BracketTree> {
    let Some(&ch) = c.get(*pos) else {
        return Err(parse_err(*pos, "unexpected end of bracket".into()));
    };
    match ch {
        '[' | '(' => {
            let close = if ch == '[' { ']' } else { ')' };
            *pos += 1;
            let a = parse_tree(c, pos)?;
            if c.get(*pos) != Some(&',') {
                return Err(parse_err(*pos, "expected `,`".into()));
            }
            *pos += 1;
            let b = parse_tree(c, pos)?;
            if c.get(*pos) != Some(&close) {
                return Err(parse_err(*pos, format!("expected `{close}`")));
            }
            *pos += 1;
            Ok(BracketTree::node(a, b))
        }
        'X' | 'x' | 'M' | 'W' | 'Q' => {
            let start = *pos;
            *pos += 1;
            let digits_start = *pos;
            while c.get(*pos).is_some_and(char::is_ascii_digit) {
                *pos += 1;
            }
            let digits: String = c[digits_start..*pos].iter().collect();
            let n: usize = digits
                .parse()
                .map_err(|_| parse_err(start, format!("expected an index after `{ch}`")))?;
            match ch {
                'X' | 'x' if n < 256 => Ok(BracketTree::Leaf(n as u8)),
                'M' if n <= 32 => Ok(build_m(n)),
                'W' if (1..=16).contains(&n) => Ok(build_w(n)),
                'Q' if n == 1 => Ok(build_q1()),
                _ => Err(parse_err(start, format!("index out of range in `{ch}{n}`"))),
            }
        }
        other => Err(parse_err(*pos, format!("unexpected `{other}`"))),
    }
}

/// `M_0 = X1`, `M_{ν+1} = (M_ν, X0)`.
pub fn build_m(nu: usize) -> BracketTree {
    (0..nu).fold(BracketTree::x1(), |m, _| BracketTree::node(m, BracketTree::x0()))
}

/// `W_j = (M_{j-1}, M_j)`.
pub fn build_w(j: usize) -> BracketTree {
    assert!(j >= 1, "W_j needs j >= 1");
    BracketTree::node(build_m(j - 1), build_m(j))
}

/// `Q1 = (X1, (X1, W1))`.
pub fn build_q1() -> BracketTree {
    BracketTree::node(BracketTree::x1(), BracketTree::node(BracketTree::x1(), build_w(1)))
}

/// `(W1, (W1, X0))`.
pub fn build_q1_flat() -> BracketTree {
    BracketTree::node(build_w(1), BracketTree::node(build_w(1), BracketTree::x0()))
}

/// The 14 elements of length at most 5 of the control-adapted Hall set, in order.
pub fn bstar_prefix() -> Vec<BracketTree> {
    use BracketTree as B;
    let x0 = B::x0();
    let x1 = B::x1();
    let w1 = build_w(1);
    let w1x0 = B::node(w1.clone(), x0.clone());
    let x1w1 = B::node(x1.clone(), w1.clone());
    vec![
        x1,
        build_m(1),
        build_m(2),
        build_m(3),
        build_m(4),
        w1.clone(),
        w1x0.clone(),
        B::node(w1x0, x0.clone()),
        build_w(2),
        x1w1.clone(),
        B::node(x1w1, x0.clone()),
        B::node(build_m(1), w1),
        build_q1(),
        x0,
    ]
}

/// Dimension of the degree-`n` part of the free Lie algebra on `letters` generators.
pub fn witt_number(letters: usize, n: usize) -> usize {
    assert!(n >= 1);
    let mut acc: i128 = 0;
    for d in 1..=n {
        if n % d == 0 {
            acc += mobius(d) as i128 * (letters as i128).pow((n / d) as u32);
        }
    }
    (acc / n as i128) as usize
}

fn mobius(n: usize) -> i64 {
    let mut n = n;
    let mut sign = 1;
    let mut p = 2;
    while p * p <= n {
        if n % p == 0 {
            n /= p;
            if n % p == 0 {
                return 0;
            }
            sign = -sign;
        }
        p += 1;
    }
    if n > 1 {
        sign = -sign;
    }
    sign
}

/// How a Hall set is ordered and completed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OrderPolicy {
    /// The control-adapted prefix through degree 5, completed degree by degree.
    /// Beyond degree 5 the order is a compatible stand-in, not the published one.
    BstarCompatible,
    /// Lyndon words with `X1 < ... < Xm < X0`, bracketed by their left standard factorization.
    Lyndon,
    /// An externally supplied order.
    Custom,
}

impl FromStr for OrderPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bstar" | "b*" | "bstar-compatible" => Ok(OrderPolicy::BstarCompatible),
            "lyndon" => Ok(OrderPolicy::Lyndon),
            other => Err(Error::Config(format!("unknown order policy `{other}`"))),
        }
    }
}

impl fmt::Display for OrderPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OrderPolicy::BstarCompatible => "bstar-compatible",
            OrderPolicy::Lyndon => "lyndon",
            OrderPolicy::Custom => "custom",
        })
    }
}

/// Per-degree coordinate extraction: `coords = p|pivots · inverse`.
#[derive(Clone, Debug)]
pub struct DegreeSolver {
    pub degree: usize,
    /// Basis positions of the degree-`n` elements, in basis order.
    pub elements: Vec<usize>,
    pub pivots: Vec<Word>,
    pub inverse: Matrix<Rational>,
}

type BracketTable = HashMap<(usize, usize), Arc<Vec<(usize, Rational)>>>;

/// An ordered Hall set truncated at `max_degree`.
#[derive(Clone)]
pub struct HallBasis {
    generators: usize,
    max_degree: usize,
    policy: OrderPolicy,
    elements: Vec<BracketTree>,
    index: HashMap<BracketTree, usize>,
    evals: Vec<Polynomial<Rational>>,
    solvers: Arc<OnceLock<std::result::Result<Vec<DegreeSolver>, String>>>,
    brackets: Arc<Mutex<BracketTable>>,
}

impl fmt::Debug for HallBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HallBasis")
            .field("generators", &self.generators)
            .field("max_degree", &self.max_degree)
            .field("policy", &self.policy)
            .field("len", &self.elements.len())
            .finish()
    }
}

impl PartialEq for HallBasis {
    fn eq(&self, other: &Self) -> bool {
        self.generators == other.generators
            && self.max_degree == other.max_degree
            && self.elements == other.elements
    }
}

impl HallBasis {
    /// Wraps an ordered list without checking the axioms (see [`validate_hall`]).
    pub fn from_elements(
        generators: usize,
        max_degree: usize,
        policy: OrderPolicy,
        elements: Vec<BracketTree>,
    ) -> Result<Self> {
        if generators < 2 || generators > 6 {
            return Err(Error::Config(format!(
                "{generators} generators; supported range is 2..=6"
            )));
        }
        let mut index = HashMap::new();
        for (k, b) in elements.iter().enumerate() {
            if b.len() > max_degree {
                return Err(Error::Domain(format!("{b} is longer than {max_degree}")));
            }
            if b.max_letter() as usize >= generators {
                return Err(Error::Domain(format!("{b} uses a letter beyond X{}", generators - 1)));
            }
            if index.insert(b.clone(), k).is_some() {
                return Err(Error::Domain(format!("{b} listed twice")));
            }
        }
        let evals = elements
            .iter()
            .map(|b| evaluate(b, generators, max_degree))
            .collect::<Result<Vec<_>>>()?;
        Ok(HallBasis {
            generators,
            max_degree,
            policy,
            elements,
            index,
            evals,
            solvers: Arc::new(OnceLock::new()),
            brackets: Arc::new(Mutex::new(HashMap::new())),
        })
    }

    pub fn generators(&self) -> usize {
        self.generators
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn policy(&self) -> OrderPolicy {
        self.policy
    }

    pub fn elements(&self) -> &[BracketTree] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn position(&self, b: &BracketTree) -> Option<usize> {
        self.index.get(b).copied()
    }

    pub fn contains(&self, b: &BracketTree) -> bool {
        self.index.contains_key(b)
    }

    /// Evaluation of the `k`-th element at truncation `max_degree`.
    pub fn evaluation(&self, k: usize) -> &Polynomial<Rational> {
        &self.evals[k]
    }

    /// Positions of elements with length at most `n`, in basis order.
    pub fn positions_upto(&self, n: usize) -> Vec<usize> {
        (0..self.len()).filter(|&k| self.elements[k].len() <= n).collect()
    }

    pub fn count_in_degree(&self, n: usize) -> usize {
        self.elements.iter().filter(|b| b.len() == n).count()
    }

    /// The same order restricted to elements of length at most `n`.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        if n > self.max_degree {
            return Err(Error::Domain(format!(
                "cannot extend a degree-{} basis to {n}",
                self.max_degree
            )));
        }
        let elements = self.elements.iter().filter(|b| b.len() <= n).cloned().collect();
        Self::from_elements(self.generators, n, self.policy, elements)
    }

    pub fn solvers(&self) -> Result<&[DegreeSolver]> {
        self.solvers
            .get_or_init(|| build_solvers(self))
            .as_ref()
            .map(Vec::as_slice)
            .map_err(|e| Error::Domain(e.clone()))
    }

    /// Coordinates of `[b_i, b_k]` as sparse `(position, coefficient)` pairs.
    pub fn bracket_coordinates(&self, i: usize, k: usize) -> Result<Arc<Vec<(usize, Rational)>>> {
        if let Some(v) = self.brackets.lock().expect("bracket cache").get(&(i, k)) {
            return Ok(v.clone());
        }
        let deg = self.elements[i].len() + self.elements[k].len();
        let v = if deg > self.max_degree {
            Vec::new()
        } else {
            let p = self.evals[i].bracket(&self.evals[k])?;
            let c = lie_coordinates(&p, self)?;
            c.values
                .iter()
                .enumerate()
                .filter(|(_, x)| !x.is_zero())
                .map(|(j, x)| (j, x.clone()))
                .collect()
        };
        let v = Arc::new(v);
        self.brackets
            .lock()
            .expect("bracket cache")
            .insert((i, k), v.clone());
        Ok(v)
    }

    /// One nested-paren expression per line, in order.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for b in &self.elements {
            s.push_str(&b.to_paren());
            s.push('\n');
        }
        s
    }

    /// Parses [`HallBasis::to_text`] output; blank lines and `#` comments are skipped.
    pub fn from_text(text: &str, generators: usize) -> Result<Self> {
        let mut elements = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let b: BracketTree = line.parse().map_err(|e: Error| match e {
                Error::Parse { column, message, .. } => Error::Parse {
                    line: ln + 1,
                    column,
                    message,
                },
                other => other.at(ln + 1, 1),
            })?;
            elements.push(b);
        }
        let max_degree = elements.iter().map(BracketTree::len).max().unwrap_or(1);
        Self::from_elements(generators, max_degree, OrderPolicy::Custom, elements)
    }
}

fn build_solvers(basis: &HallBasis) -> std::result::Result<Vec<DegreeSolver>, String> {
    let mut out = Vec::new();
    for n in 1..=basis.max_degree {
        let elements: Vec<usize> = (0..basis.len())
            .filter(|&k| basis.elements[k].len() == n)
            .collect();
        let mut support: BTreeSet<Word> = BTreeSet::new();
        for &k in &elements {
            support.extend(basis.evals[k].bucket(n).map(|(w, _)| w.clone()));
        }
        let words: Vec<Word> = support.into_iter().collect();
        let mut a = Matrix::<Rational>::zeros(elements.len(), words.len());
        for (r, &k) in elements.iter().enumerate() {
            for (c, w) in words.iter().enumerate() {
                a[(r, c)] = basis.evals[k].coeff(w);
            }
        }
        let pivot_cols = a.clone().rref();
        if pivot_cols.len() < elements.len() {
            return Err(format!(
                "degree-{n} evaluations have rank {} < {}",
                pivot_cols.len(),
                elements.len()
            ));
        }
        // rref on rows finds independent columns of the row space
        let pivots: Vec<Word> = pivot_cols.iter().map(|&c| words[c].clone()).collect();
        let mut sq = Matrix::<Rational>::zeros(elements.len(), elements.len());
        for r in 0..elements.len() {
            for (c, &pc) in pivot_cols.iter().enumerate() {
                sq[(r, c)] = a[(r, pc)].clone();
            }
        }
        let inverse = sq
            .inverse()
            .ok_or_else(|| format!("degree-{n} pivot block is singular"))?;
        out.push(DegreeSolver {
            degree: n,
            elements,
            pivots,
            inverse,
        });
    }
    Ok(out)
}

/// Builds a Hall set over `generators` letters through degree `max_degree`.
pub fn generate_hall(generators: usize, max_degree: usize, policy: OrderPolicy) -> Result<HallBasis> {
    if max_degree == 0 {
        return Err(Error::Domain("max degree must be at least 1".into()));
    }
    let elements = match policy {
        OrderPolicy::BstarCompatible => {
            if generators != 2 {
                return Err(Error::Config(
                    "the bstar policy is defined over {X0, X1} only".into(),
                ));
            }
            bstar_compatible(max_degree)
        }
        OrderPolicy::Lyndon => lyndon_hall(generators, max_degree),
        OrderPolicy::Custom => {
            return Err(Error::Config(
                "custom orders are loaded with HallBasis::from_text".into(),
            ))
        }
    };
    HallBasis::from_elements(generators, max_degree, policy, elements)
}

/// Process-wide cache of the two-letter bstar-compatible bases.
pub fn bstar_basis(max_degree: usize) -> Result<Arc<HallBasis>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<HallBasis>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(b) = cache.lock().expect("basis cache").get(&max_degree) {
        return Ok(b.clone());
    }
    let b = Arc::new(generate_hall(2, max_degree, OrderPolicy::BstarCompatible)?);
    cache
        .lock()
        .expect("basis cache")
        .insert(max_degree, b.clone());
    Ok(b)
}

fn admissible(order: &HashMap<BracketTree, usize>, b1: &BracketTree, b2: &BracketTree) -> bool {
    let (Some(&p1), Some(&p2)) = (order.get(b1), order.get(b2)) else {
        return false;
    };
    if p1 >= p2 {
        return false;
    }
    match b2.children() {
        None => true,
        Some((b3, _)) => order.get(b3).is_some_and(|&p3| p3 <= p1),
    }
}

fn bstar_compatible(max_degree: usize) -> Vec<BracketTree> {
    let mut elements: Vec<BracketTree> = bstar_prefix()
        .into_iter()
        .filter(|b| b.len() <= max_degree)
        .collect();
    // every degree beyond the prefix is appended just before X0, ordered by
    // the positions of (b1, b2)
    for n in 6..=max_degree {
        let order: HashMap<BracketTree, usize> =
            elements.iter().cloned().enumerate().map(|(k, b)| (b, k)).collect();
        let mut fresh: Vec<(usize, usize, BracketTree)> = Vec::new();
        for (p1, b1) in elements.iter().enumerate() {
            for (p2, b2) in elements.iter().enumerate() {
                if b1.len() + b2.len() == n && admissible(&order, b1, b2) {
                    fresh.push((p1, p2, BracketTree::node(b1.clone(), b2.clone())));
                }
            }
        }
        fresh.sort_by_key(|(p1, p2, _)| (*p1, *p2));
        let x0 = elements.pop().expect("X0 present");
        elements.extend(fresh.into_iter().map(|(_, _, b)| b));
        elements.push(x0);
    }
    elements
}

fn lyndon_hall(generators: usize, max_degree: usize) -> Vec<BracketTree> {
    // ranks: X1..Xm get 0..m-1, X0 gets m
    let m = generators - 1;
    let to_letter = |r: u8| if r as usize == m { 0 } else { r + 1 };
    let words = lyndon_words(generators, max_degree);
    let mut memo: HashMap<Vec<u8>, BracketTree> = HashMap::new();
    let mut out = Vec::with_capacity(words.len());
    for w in &words {
        let t = lyndon_bracket(w, &mut memo, &to_letter);
        out.push(t);
    }
    out
}

/// Lyndon words of length `<= n` over ranks `0..k`, in lexicographic order (Duval).
fn lyndon_words(k: usize, n: usize) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    let mut w: Vec<u8> = vec![0];
    while !w.is_empty() {
        out.push(w.clone());
        let base = w.clone();
        while w.len() < n {
            let c = base[w.len() % base.len()];
            w.push(c);
        }
        while w.last().is_some_and(|&c| c as usize == k - 1) {
            w.pop();
        }
        if let Some(last) = w.last_mut() {
            *last += 1;
        }
    }
    out
}

fn is_lyndon(w: &[u8]) -> bool {
    (1..w.len()).all(|i| w[i..] > *w)
}

fn lyndon_bracket(
    w: &[u8],
    memo: &mut HashMap<Vec<u8>, BracketTree>,
    to_letter: &dyn Fn(u8) -> u8,
) -> BracketTree {
    if let Some(t) = memo.get(w) {
        return t.clone();
    }
    let t = if w.len() == 1 {
        BracketTree::Leaf(to_letter(w[0]))
    } else {
        let split = (1..w.len())
            .rev()
            .find(|&i| is_lyndon(&w[..i]))
            .expect("a single letter is Lyndon");
        let u = lyndon_bracket(&w[..split], memo, to_letter);
        let v = lyndon_bracket(&w[split..], memo, to_letter);
        BracketTree::node(u, v)
    };
    memo.insert(w.to_vec(), t.clone());
    t
}

/// A failed Hall axiom or count check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    MissingGenerator(u8),
    /// A listed bracket whose factors do not satisfy the admissibility rule.
    Inadmissible(BracketTree),
    /// An admissible pair `(b1, b2)` that is absent.
    MissingAdmissible(BracketTree, BracketTree),
    /// `(b1, b2)` is listed but not after `b1`.
    LeftFactorNotSmaller(BracketTree),
    WittCount {
        degree: usize,
        expected: usize,
        found: usize,
    },
    Dependent {
        degree: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::MissingGenerator(i) => write!(f, "generator X{i} missing"),
            Violation::Inadmissible(b) => write!(f, "{b} is not an admissible bracket"),
            Violation::MissingAdmissible(a, b) => write!(f, "admissible ({a},{b}) missing"),
            Violation::LeftFactorNotSmaller(b) => write!(f, "{b} is not larger than its left factor"),
            Violation::WittCount {
                degree,
                expected,
                found,
            } => write!(f, "degree {degree}: {found} elements, Witt number {expected}"),
            Violation::Dependent { degree } => write!(f, "degree {degree}: evaluations are dependent"),
        }
    }
}

/// Checks the Hall axioms, Witt counts and independence; empty means valid.
pub fn validate_hall(basis: &HallBasis) -> Vec<Violation> {
    let mut out = Vec::new();
    let order = &basis.index;
    for g in 0..basis.generators {
        if !basis.contains(&BracketTree::Leaf(g as u8)) {
            out.push(Violation::MissingGenerator(g as u8));
        }
    }
    for (k, b) in basis.elements.iter().enumerate() {
        if let Some((b1, b2)) = b.children() {
            if !admissible(order, b1, b2) {
                out.push(Violation::Inadmissible(b.clone()));
            }
            if order.get(b1).is_some_and(|&p1| p1 >= k) {
                out.push(Violation::LeftFactorNotSmaller(b.clone()));
            }
        }
    }
    for b1 in &basis.elements {
        for b2 in &basis.elements {
            if b1.len() + b2.len() <= basis.max_degree && admissible(order, b1, b2) {
                let t = BracketTree::node(b1.clone(), b2.clone());
                if !basis.contains(&t) {
                    out.push(Violation::MissingAdmissible(b1.clone(), b2.clone()));
                }
            }
        }
    }
    let mut counts_ok = true;
    for n in 1..=basis.max_degree {
        let expected = witt_number(basis.generators, n);
        let found = basis.count_in_degree(n);
        if expected != found {
            counts_ok = false;
            out.push(Violation::WittCount {
                degree: n,
                expected,
                found,
            });
        }
    }
    if counts_ok {
        if let Err(Error::Domain(msg)) = basis.solvers() {
            let degree = msg
                .strip_prefix("degree-")
                .and_then(|s| s.split(' ').next())
                .and_then(|s| s.parse().ok())
                .unwrap_or(0);
            out.push(Violation::Dependent { degree });
        }
    }
    out
}

/// `e(b)` in `A^N`: leaves to letters, nodes to brackets.
pub fn evaluate<S: Scalar>(b: &BracketTree, generators: usize, n: usize) -> Result<Polynomial<S>> {
    if b.len() > n {
        return Err(Error::Domain(format!("{b} has length {} > {n}", b.len())));
    }
    eval_rec(b, generators, n)
}

fn eval_rec<S: Scalar>(b: &BracketTree, generators: usize, n: usize) -> Result<Polynomial<S>> {
    match b {
        BracketTree::Leaf(i) => {
            if *i as usize >= generators {
                return Err(Error::Domain(format!("X{i} out of range")));
            }
            Ok(Polynomial::letter(*i as usize, generators, n))
        }
        BracketTree::Node(a, c) => eval_rec::<S>(a, generators, n)?.bracket(&eval_rec(c, generators, n)?),
    }
}

/// First-kind coordinates of a Lie polynomial, dense in basis order.
#[derive(Clone, Debug, PartialEq)]
pub struct LieCoordinates<S> {
    pub basis: Arc<HallBasis>,
    /// One entry per basis element with length at most `truncation`; zero elsewhere.
    pub values: Vec<S>,
    pub truncation: usize,
}

impl<S: Scalar> LieCoordinates<S> {
    pub fn zero(basis: Arc<HallBasis>, truncation: usize) -> Self {
        let values = vec![S::zero(); basis.len()];
        LieCoordinates {
            basis,
            values,
            truncation,
        }
    }

    pub fn get(&self, b: &BracketTree) -> Option<&S> {
        self.basis.position(b).map(|k| &self.values[k])
    }

    /// Value at `b`, zero when `b` is outside the basis or above the truncation.
    pub fn value(&self, b: &BracketTree) -> S {
        self.get(b).cloned().unwrap_or_else(S::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&BracketTree, &S)> {
        self.basis
            .elements()
            .iter()
            .zip(&self.values)
            .filter(move |(b, _)| b.len() <= self.truncation)
    }

    /// `Σ values[b] e(b)` at the coordinate truncation.
    pub fn reconstruct(&self) -> Polynomial<S> {
        let g = self.basis.generators();
        let mut p = Polynomial::zero(g, self.truncation);
        for (k, v) in self.values.iter().enumerate() {
            if v.is_zero() || self.basis.elements[k].len() > self.truncation {
                continue;
            }
            let e = self
                .basis
                .evaluation(k)
                .with_truncation(self.truncation)
                .map_coeffs(S::from_rational);
            p = &p + &e.scale(v);
        }
        p
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> LieCoordinates<T> {
        LieCoordinates {
            basis: self.basis.clone(),
            values: self.values.iter().map(f).collect(),
            truncation: self.truncation,
        }
    }
}

/// Coordinates of `p` in `basis`; errors when `p` is not a Lie polynomial.
pub fn lie_coordinates<S: Scalar>(p: &Polynomial<S>, basis: &HallBasis) -> Result<LieCoordinates<S>> {
    lie_coordinates_arc(p, &Arc::new(basis.clone()))
}

pub fn lie_coordinates_arc<S: Scalar>(
    p: &Polynomial<S>,
    basis: &Arc<HallBasis>,
) -> Result<LieCoordinates<S>> {
    let n = p.truncation();
    if n > basis.max_degree() {
        return Err(Error::Domain(format!(
            "polynomial truncated at {n} but basis stops at {}",
            basis.max_degree()
        )));
    }
    if p.generators() != basis.generators() {
        return Err(Error::Contract(format!(
            "polynomial over {} generators, basis over {}",
            p.generators(),
            basis.generators()
        )));
    }
    let mut coords = LieCoordinates::zero(basis.clone(), n);
    let mut residual = Polynomial::<S>::zero(p.generators(), n);
    if !p.constant_term().is_zero() {
        residual = &residual + &p.grade(0)?;
    }
    for solver in basis.solvers()?.iter().take(n) {
        let d = solver.degree;
        let rhs: Vec<S> = solver.pivots.iter().map(|w| p.coeff(w)).collect();
        let inv = solver.inverse.map(S::from_rational);
        let c = inv.left_mul(&rhs);
        let mut r = p.grade(d)?;
        for (&k, v) in solver.elements.iter().zip(&c) {
            if !v.is_zero() {
                let e = basis.evaluation(k).with_truncation(n).map_coeffs(S::from_rational);
                r = &r - &e.scale(v);
            }
            coords.values[k] = v.clone();
        }
        residual = &residual + &r;
    }
    if !residual.is_zero() {
        return Err(Error::NotLieElement {
            residual: residual.to_string(),
        });
    }
    Ok(coords)
}
