//! Splitting schemes, Dirac controls and their formal series.
//!
//! Stage `i` of a [`Scheme`] is a drift of duration `α_i` followed by an
//! impulse of amplitude `β_i` on the channel `c_i`. Stages run in time order,
//! so stage 1 is the leftmost factor of the series
//!
//! ```text
//! Ser = exp(α_1 X0) exp(β_1 c_1) exp(α_2 X0) exp(β_2 c_2) ...
//! ```
//!
//! which is the solution of `S' = S (X0 + u X1)` with `S(0) = 1`. Flows acting
//! on points compose in the opposite order; the word-reversal antiautomorphism
//! maps one convention to the other.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::{Complex, Complex64};
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::freealg::Polynomial;
use crate::hall::{evaluate, lie_coordinates_arc, BracketTree, HallBasis, LieCoordinates};
use crate::scalar::{
    format_gauss, format_rational, gauss_to_c64, parse_gauss, parse_rational, rational_to_f64,
    ExactScalar, GaussRational, Rational, Scalar,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AlphaDomain {
    Real,
    Positive,
    NonZero,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BetaDomain {
    Real,
    Positive,
    Complex,
    ComplexPositive,
}

impl FromStr for AlphaDomain {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "R" => Ok(AlphaDomain::Real),
            "R+" => Ok(AlphaDomain::Positive),
            "R*" => Ok(AlphaDomain::NonZero),
            _ => Err(Error::Config(format!("unknown alpha domain `{s}` (R, R+, R*)"))),
        }
    }
}

impl FromStr for BetaDomain {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "R" => Ok(BetaDomain::Real),
            "R+" => Ok(BetaDomain::Positive),
            "C" => Ok(BetaDomain::Complex),
            "C+" => Ok(BetaDomain::ComplexPositive),
            _ => Err(Error::Config(format!("unknown beta domain `{s}` (R, R+, C, C+)"))),
        }
    }
}

impl fmt::Display for AlphaDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AlphaDomain::Real => "R",
            AlphaDomain::Positive => "R+",
            AlphaDomain::NonZero => "R*",
        })
    }
}

impl fmt::Display for BetaDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BetaDomain::Real => "R",
            BetaDomain::Positive => "R+",
            BetaDomain::Complex => "C",
            BetaDomain::ComplexPositive => "C+",
        })
    }
}

impl BetaDomain {
    pub fn is_complex(self) -> bool {
        matches!(self, BetaDomain::Complex | BetaDomain::ComplexPositive)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Stage {
    pub alpha: Rational,
    pub flow: BracketTree,
    pub beta: GaussRational,
}

/// A splitting scheme with exact coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct Scheme {
    pub stages: Vec<Stage>,
    pub alpha_domain: AlphaDomain,
    pub beta_domain: BetaDomain,
}

fn real(r: Rational) -> GaussRational {
    Complex::new(r, Rational::zero())
}

fn r(n: i64, d: i64) -> Rational {
    crate::scalar::rat(n, d)
}

impl Scheme {
    pub fn new(stages: Vec<Stage>, alpha_domain: AlphaDomain, beta_domain: BetaDomain) -> Result<Self> {
        let s = Scheme {
            stages,
            alpha_domain,
            beta_domain,
        };
        s.validate()?;
        Ok(s)
    }

    /// Real scheme on channel `X1` from `(α_i, β_i)` pairs.
    pub fn from_pairs(pairs: &[(Rational, Rational)], alpha_domain: AlphaDomain) -> Result<Self> {
        let stages = pairs
            .iter()
            .map(|(a, b)| Stage {
                alpha: a.clone(),
                flow: BracketTree::x1(),
                beta: real(b.clone()),
            })
            .collect();
        Self::new(stages, alpha_domain, BetaDomain::Real)
    }

    /// `e^{T f0/2} e^{T f1} e^{T f0/2}`.
    pub fn strang() -> Self {
        Self::from_pairs(&[(r(1, 2), r(1, 1)), (r(1, 2), r(0, 1))], AlphaDomain::Positive)
            .expect("valid scheme")
    }

    /// `e^{T f0} e^{T f1}`.
    pub fn lie_trotter() -> Self {
        Self::from_pairs(&[(r(1, 1), r(1, 1))], AlphaDomain::Positive).expect("valid scheme")
    }

    /// Impulses `1/3` at `t = 0` and `2/3` at `t = 3/4`: exact for `x1' = u, x2' = x1^2`.
    pub fn quadratic_exact() -> Self {
        Self::from_pairs(
            &[(r(0, 1), r(1, 3)), (r(3, 4), r(2, 3)), (r(1, 4), r(0, 1))],
            AlphaDomain::Positive,
        )
        .expect("valid scheme")
    }

    pub fn validate(&self) -> Result<()> {
        if self.stages.is_empty() {
            return Err(Error::Domain("a scheme needs at least one stage".into()));
        }
        let last = self.stages.len() - 1;
        for (i, s) in self.stages.iter().enumerate() {
            if s.flow == BracketTree::x0() {
                return Err(Error::Domain(format!("stage {}: X0 is not a control channel", i + 1)));
            }
            if s.flow.max_letter() > 1 {
                return Err(Error::Unsupported(format!(
                    "stage {}: only the letters X0 and X1 are supported",
                    i + 1
                )));
            }
            let a = &s.alpha;
            let ok = match self.alpha_domain {
                AlphaDomain::Real => true,
                AlphaDomain::Positive => !a.is_negative(),
                AlphaDomain::NonZero => !a.is_zero() || i == 0 || i == last,
            };
            if !ok {
                return Err(Error::Domain(format!(
                    "stage {}: alpha {} outside {}",
                    i + 1,
                    format_rational(a),
                    self.alpha_domain
                )));
            }
            let b = &s.beta;
            let ok = match self.beta_domain {
                BetaDomain::Real => b.im.is_zero(),
                BetaDomain::Positive => b.im.is_zero() && !b.re.is_negative(),
                BetaDomain::Complex => true,
                BetaDomain::ComplexPositive => b.re.is_positive() || b.is_zero(),
            };
            if !ok {
                return Err(Error::Domain(format!(
                    "stage {}: beta {} outside {}",
                    i + 1,
                    format_gauss(b),
                    self.beta_domain
                )));
            }
        }
        if self.alpha_domain == AlphaDomain::Positive {
            let mut seen_impulse = false;
            let mut drift = Rational::zero();
            for (i, s) in self.stages.iter().enumerate() {
                drift += &s.alpha;
                if !s.beta.is_zero() {
                    if seen_impulse && drift.is_zero() {
                        return Err(Error::Domain(format!(
                            "stage {}: consecutive impulses need a positive drift between them",
                            i + 1
                        )));
                    }
                    seen_impulse = true;
                    drift = Rational::zero();
                }
            }
        }
        Ok(())
    }

    pub fn is_real(&self) -> bool {
        self.stages.iter().all(|s| s.beta.im.is_zero())
    }

    pub fn total_time(&self) -> Rational {
        self.stages.iter().map(|s| s.alpha.clone()).sum()
    }

    /// Channels carrying a nonzero amplitude.
    pub fn flows(&self) -> BTreeSet<String> {
        self.stages
            .iter()
            .filter(|s| !s.beta.is_zero())
            .map(|s| s.flow.to_string())
            .collect()
    }

    pub fn channels(&self) -> Vec<BracketTree> {
        let mut out: Vec<BracketTree> = Vec::new();
        for s in &self.stages {
            if !s.beta.is_zero() && !out.contains(&s.flow) {
                out.push(s.flow.clone());
            }
        }
        out
    }

    /// Merges zero-amplitude stages into the next drift and drops empty trailing stages.
    pub fn canonical(&self) -> Scheme {
        let mut out: Vec<Stage> = Vec::new();
        let mut carry = Rational::zero();
        for s in &self.stages {
            let alpha = &carry + &s.alpha;
            if s.beta.is_zero() {
                carry = alpha;
                continue;
            }
            carry = Rational::zero();
            out.push(Stage {
                alpha,
                flow: s.flow.clone(),
                beta: s.beta.clone(),
            });
        }
        if !carry.is_zero() || out.is_empty() {
            out.push(Stage {
                alpha: carry,
                flow: BracketTree::x1(),
                beta: GaussRational::zero(),
            });
        }
        Scheme {
            stages: out,
            alpha_domain: self.alpha_domain,
            beta_domain: self.beta_domain,
        }
    }

    /// `π_N` of the scheme's series at `T = 1`.
    pub fn series<S: ExactScalar>(&self, n: usize) -> Result<Polynomial<S>> {
        let mut p = Polynomial::<S>::one(2, n);
        for (i, s) in self.stages.iter().enumerate() {
            if s.flow.len() > n {
                continue;
            }
            if !s.alpha.is_zero() {
                let x0 = Polynomial::<S>::letter(0, 2, n).scale(&S::from_rational(&s.alpha));
                p = p.checked_mul(&x0.exp()?)?;
            }
            if !s.beta.is_zero() {
                let beta = S::from_gauss(&s.beta).ok_or_else(|| {
                    Error::Domain(format!("stage {}: complex amplitude over a real field", i + 1))
                })?;
                let e = evaluate::<S>(&s.flow, 2, n)?.scale(&beta);
                p = p.checked_mul(&e.exp()?)?;
            }
        }
        Ok(p)
    }

    pub fn to_numeric(&self) -> NumScheme {
        NumScheme {
            stages: self
                .stages
                .iter()
                .map(|s| NumStage {
                    alpha: rational_to_f64(&s.alpha),
                    flow: s.flow.clone(),
                    beta: gauss_to_c64(&s.beta),
                })
                .collect(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("alpha-domain {}\nbeta-domain {}\n", self.alpha_domain, self.beta_domain);
        for s in &self.stages {
            out.push_str(&format!(
                "stage {} {} {}\n",
                format_rational(&s.alpha),
                s.flow,
                format_gauss(&s.beta)
            ));
        }
        out
    }

    /// Parses the line format of [`Scheme::to_text`]; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut alpha_domain = AlphaDomain::Positive;
        let mut beta_domain = BetaDomain::Real;
        let mut stages = Vec::new();
        for (ln, raw) in text.lines().enumerate() {
            let line_no = ln + 1;
            let line = raw.split('#').next().unwrap_or("");
            let toks = tokens(line);
            let Some((c0, head)) = toks.first() else {
                continue;
            };
            let at = |col: usize| move |e: Error| relocate(e, line_no, col);
            match *head {
                "alpha-domain" | "beta-domain" => {
                    let [_, (c1, v)] = toks.as_slice() else {
                        return Err(Error::Parse {
                            line: line_no,
                            column: *c0,
                            message: format!("`{head}` takes exactly one value"),
                        });
                    };
                    if *head == "alpha-domain" {
                        alpha_domain = v.parse().map_err(at(*c1))?;
                    } else {
                        beta_domain = v.parse().map_err(at(*c1))?;
                    }
                }
                "stage" => {
                    if toks.len() < 4 {
                        return Err(Error::Parse {
                            line: line_no,
                            column: *c0,
                            message: "expected `stage <alpha> <flow> <beta>`".into(),
                        });
                    }
                    let (ca, a) = toks[1];
                    let (cb, b) = toks[toks.len() - 1];
                    let (cf, _) = toks[2];
                    let flow_src: String = toks[2..toks.len() - 1].iter().map(|(_, t)| *t).collect();
                    let alpha = parse_rational(a).map_err(at(ca))?;
                    let flow: BracketTree = flow_src.parse().map_err(|e| match e {
                        Error::Parse { column, message, .. } => Error::Parse {
                            line: line_no,
                            column: cf + column - 1,
                            message,
                        },
                        other => relocate(other, line_no, cf),
                    })?;
                    let beta = parse_gauss(b).map_err(at(cb))?;
                    stages.push(Stage { alpha, flow, beta });
                }
                other => {
                    return Err(Error::Parse {
                        line: line_no,
                        column: *c0,
                        message: format!("unknown directive `{other}`"),
                    })
                }
            }
        }
        Scheme::new(stages, alpha_domain, beta_domain)
    }
}

fn relocate(e: Error, line: usize, column: usize) -> Error {
    e.at(line, column)
}

/// Whitespace-separated tokens with 1-based columns.
pub(crate) fn tokens(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in line.char_indices() {
        match (ch.is_whitespace(), start) {
            (true, Some(s)) => {
                out.push((s + 1, &line[s..i]));
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s + 1, &line[s..]));
    }
    out
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Scheme::parse(s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NumStage {
    pub alpha: f64,
    pub flow: BracketTree,
    pub beta: Complex64,
}

/// Floating-point scheme, as produced by the search.
#[derive(Clone, Debug, PartialEq)]
pub struct NumScheme {
    pub stages: Vec<NumStage>,
}

impl NumScheme {
    pub fn is_real(&self) -> bool {
        self.stages.iter().all(|s| s.beta.im == 0.0)
    }

    /// Scheme file text with shortest round-trip decimals.
    pub fn to_text(&self, alpha_domain: AlphaDomain, beta_domain: BetaDomain) -> String {
        let mut out = format!("alpha-domain {alpha_domain}\nbeta-domain {beta_domain}\n");
        for s in &self.stages {
            let beta = if s.beta.im == 0.0 {
                format!("{}", s.beta.re)
            } else {
                let sign = if s.beta.im < 0.0 { '-' } else { '+' };
                format!("{}{sign}{}i", s.beta.re, s.beta.im.abs())
            };
            out.push_str(&format!("stage {} {} {beta}\n", s.alpha, s.flow));
        }
        out
    }

    /// Exact decimal transcription (every finite `f64` is a finite decimal).
    pub fn to_exact(&self, alpha_domain: AlphaDomain, beta_domain: BetaDomain) -> Result<Scheme> {
        let dec = |x: f64| -> Result<Rational> {
            if !x.is_finite() {
                return Err(Error::Domain(format!("non-finite coefficient {x}")));
            }
            parse_rational(&format!("{x}"))
        };
        let stages = self
            .stages
            .iter()
            .map(|s| {
                Ok(Stage {
                    alpha: dec(s.alpha)?,
                    flow: s.flow.clone(),
                    beta: Complex::new(dec(s.beta.re)?, dec(s.beta.im)?),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Scheme::new(stages, alpha_domain, beta_domain)
    }
}

/// A Dirac mass `amplitude · δ_time` on `channel`.
#[derive(Clone, Debug, PartialEq)]
pub struct Impulse<S> {
    pub time: Rational,
    pub channel: BracketTree,
    pub amplitude: S,
}

/// Finite sum of Dirac masses on `[0, horizon]`; the drift `X0` carries control 1.
///
/// Impulses sharing a time are applied in list order.
#[derive(Clone, Debug, PartialEq)]
pub struct DiracControl<S> {
    pub horizon: Rational,
    pub impulses: Vec<Impulse<S>>,
}

/// A piece of the drift between two impulse times, or one impulse.
#[derive(Clone, Debug, PartialEq)]
pub enum Segment<S> {
    Drift { start: Rational, duration: Rational },
    Kick(Impulse<S>),
}

impl<S: ExactScalar> DiracControl<S> {
    pub fn new(horizon: Rational, impulses: Vec<Impulse<S>>) -> Result<Self> {
        if horizon.is_negative() {
            return Err(Error::Domain("negative horizon".into()));
        }
        let mut prev = Rational::zero();
        for imp in &impulses {
            if imp.time < prev || imp.time > horizon {
                return Err(Error::Domain(format!(
                    "impulse time {} out of order or outside [0, {}]",
                    format_rational(&imp.time),
                    format_rational(&horizon)
                )));
            }
            if imp.channel == BracketTree::x0() {
                return Err(Error::Domain("X0 cannot carry an impulse".into()));
            }
            prev = imp.time.clone();
        }
        Ok(DiracControl { horizon, impulses })
    }

    /// Single-channel control on `X1` from `(time, amplitude)` pairs.
    pub fn on_x1(horizon: Rational, impulses: &[(Rational, S)]) -> Result<Self> {
        Self::new(
            horizon,
            impulses
                .iter()
                .map(|(t, a)| Impulse {
                    time: t.clone(),
                    channel: BracketTree::x1(),
                    amplitude: a.clone(),
                })
                .collect(),
        )
    }

    /// Drift pieces and kicks in time order; zero-length drifts are omitted.
    pub fn segments(&self) -> Vec<Segment<S>> {
        let mut out = Vec::new();
        let mut t = Rational::zero();
        for imp in &self.impulses {
            if imp.time > t {
                out.push(Segment::Drift {
                    start: t.clone(),
                    duration: &imp.time - &t,
                });
                t = imp.time.clone();
            }
            out.push(Segment::Kick(imp.clone()));
        }
        if self.horizon > t {
            out.push(Segment::Drift {
                start: t.clone(),
                duration: &self.horizon - &t,
            });
        }
        out
    }

    pub fn channels(&self) -> Vec<BracketTree> {
        let mut out: Vec<BracketTree> = Vec::new();
        for imp in &self.impulses {
            if !out.contains(&imp.channel) {
                out.push(imp.channel.clone());
            }
        }
        out
    }

    /// `‖u‖ = Σ |amplitude|` in the `|re| + |im|` norm.
    pub fn norm(&self) -> Rational {
        self.impulses
            .iter()
            .map(|i| crate::scalar::gauss_abs1(&i.amplitude.to_gauss()))
            .sum()
    }

    /// `u ⋄ v`: `v` runs after `u`.
    pub fn concat(&self, other: &Self) -> Self {
        let mut impulses = self.impulses.clone();
        impulses.extend(other.impulses.iter().map(|i| Impulse {
            time: &i.time + &self.horizon,
            channel: i.channel.clone(),
            amplitude: i.amplitude.clone(),
        }));
        DiracControl {
            horizon: &self.horizon + &other.horizon,
            impulses,
        }
    }

    /// Primitive `U(t) = Σ_{τ ≤ t} a` of the `X1` channel.
    pub fn primitive(&self, t: &Rational) -> S {
        self.impulses
            .iter()
            .filter(|i| i.channel == BracketTree::x1() && &i.time <= t)
            .fold(S::zero(), |acc, i| acc + i.amplitude.clone())
    }

    /// Time scaling: durations times `ε`, channel-`c` amplitudes times `ε^{|c|}`.
    pub fn time_scaled(&self, eps: &Rational) -> Self {
        DiracControl {
            horizon: &self.horizon * eps,
            impulses: self
                .impulses
                .iter()
                .map(|i| Impulse {
                    time: &i.time * eps,
                    channel: i.channel.clone(),
                    amplitude: i.amplitude.clone() * S::from_rational(&pow(eps, i.channel.len())),
                })
                .collect(),
        }
    }

    /// Generator scaling `X_j ↦ λ_j X_j`, realized on the control side.
    pub fn generator_scaled(&self, lambda: &[S]) -> Result<Self> {
        if lambda.len() < 2 {
            return Err(Error::Domain("one scale per generator is required".into()));
        }
        let l0 = lambda[0].to_gauss();
        if !l0.im.is_zero() || !l0.re.is_positive() {
            return Err(Error::Domain("the drift scale must be a positive rational".into()));
        }
        let l0r = l0.re;
        let weight = |c: &BracketTree| {
            (0..lambda.len()).fold(S::one(), |acc, j| {
                let mut acc = acc;
                for _ in 0..c.count(j as u8) {
                    acc = acc * lambda[j].clone();
                }
                acc
            })
        };
        // durations stretch by λ0 so the impulse times move with them
        Ok(DiracControl {
            horizon: &self.horizon * &l0r,
            impulses: self
                .impulses
                .iter()
                .map(|i| Impulse {
                    time: &i.time * &l0r,
                    channel: i.channel.clone(),
                    amplitude: i.amplitude.clone() * weight(&i.channel),
                })
                .collect(),
        })
    }
}

fn pow(x: &Rational, k: usize) -> Rational {
    (0..k).fold(Rational::one(), |acc, _| acc * x)
}

impl DiracControl<Rational> {
    /// `horizon <T>` followed by one `impulse <time> <channel> <amplitude>` line per mass.
    pub fn to_text(&self) -> String {
        let mut out = format!("horizon {}\n", format_rational(&self.horizon));
        for i in &self.impulses {
            out.push_str(&format!(
                "impulse {} {} {}\n",
                format_rational(&i.time),
                i.channel,
                format_rational(&i.amplitude)
            ));
        }
        out
    }

    /// Parses [`DiracControl::to_text`] output; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut horizon = None;
        let mut impulses = Vec::new();
        for (ln, raw) in text.lines().enumerate() {
            let line_no = ln + 1;
            let line = raw.split('#').next().unwrap_or("");
            let toks = tokens(line);
            let Some(&(c0, head)) = toks.first() else {
                continue;
            };
            let bad = |message: String| Error::Parse {
                line: line_no,
                column: c0,
                message,
            };
            match head {
                "horizon" => {
                    let [_, (c1, v)] = toks.as_slice() else {
                        return Err(bad("`horizon` takes exactly one value".into()));
                    };
                    horizon = Some(parse_rational(v).map_err(|e| relocate(e, line_no, *c1))?);
                }
                "impulse" => {
                    let [_, (ct, t), (cc, ch), (ca, a)] = toks.as_slice() else {
                        return Err(bad("expected `impulse <time> <channel> <amplitude>`".into()));
                    };
                    impulses.push(Impulse {
                        time: parse_rational(t).map_err(|e| relocate(e, line_no, *ct))?,
                        channel: ch.parse().map_err(|e: Error| match e {
                            Error::Parse { column, message, .. } => Error::Parse {
                                line: line_no,
                                column: cc + column - 1,
                                message,
                            },
                            other => relocate(other, line_no, *cc),
                        })?,
                        amplitude: parse_rational(a).map_err(|e| relocate(e, line_no, *ca))?,
                    });
                }
                other => return Err(bad(format!("unknown directive `{other}`"))),
            }
        }
        let horizon = horizon.ok_or(Error::Parse {
            line: 1,
            column: 1,
            message: "missing `horizon`".into(),
        })?;
        DiracControl::new(horizon, impulses)
    }
}

/// Reads a scheme as a control: impulse `i` at `τ_i = α_1 + ... + α_i`.
pub fn scheme_to_control<S: ExactScalar>(s: &Scheme) -> Result<DiracControl<S>> {
    let mut t = Rational::zero();
    let mut impulses: Vec<Impulse<S>> = Vec::new();
    for (i, st) in s.stages.iter().enumerate() {
        if st.alpha.is_negative() {
            return Err(Error::Domain(format!(
                "stage {}: negative alpha has no control reading",
                i + 1
            )));
        }
        t += &st.alpha;
        if st.beta.is_zero() {
            continue;
        }
        let a = S::from_gauss(&st.beta).ok_or_else(|| {
            Error::Domain(format!("stage {}: complex amplitude over a real field", i + 1))
        })?;
        match impulses.last_mut() {
            Some(last) if last.time == t && last.channel == st.flow => {
                last.amplitude = last.amplitude.clone() + a;
            }
            _ => impulses.push(Impulse {
                time: t.clone(),
                channel: st.flow.clone(),
                amplitude: a,
            }),
        }
    }
    impulses.retain(|i| !i.amplitude.is_zero());
    if t.is_zero() {
        return Err(Error::Domain("total drift time must be positive".into()));
    }
    DiracControl::new(t, impulses)
}

/// `π_N(Ser)`: the ordered product of drift and impulse exponentials.
pub fn formal_series<S: ExactScalar>(c: &DiracControl<S>, n: usize) -> Result<Polynomial<S>> {
    let mut p = Polynomial::<S>::one(2, n);
    for seg in c.segments() {
        let factor = match seg {
            Segment::Drift { duration, .. } => {
                Polynomial::<S>::letter(0, 2, n).scale(&S::from_rational(&duration))
            }
            Segment::Kick(imp) => {
                if imp.channel.len() > n {
                    return Err(Error::Domain(format!(
                        "channel {} longer than truncation {n}",
                        imp.channel
                    )));
                }
                evaluate::<S>(&imp.channel, 2, n)?.scale(&imp.amplitude)
            }
        };
        p = p.checked_mul(&factor.exp()?)?;
    }
    Ok(p)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoordinateKind {
    First,
    Second,
}

/// Coordinates of the first (`ζ`) or second (`ξ`) kind.
#[derive(Clone, Debug, PartialEq)]
pub struct CoordinateVector<S> {
    pub kind: CoordinateKind,
    pub coords: LieCoordinates<S>,
}

impl<S: Scalar> CoordinateVector<S> {
    pub fn value(&self, b: &BracketTree) -> S {
        self.coords.value(b)
    }

    pub fn basis(&self) -> &Arc<HallBasis> {
        &self.coords.basis
    }

    pub fn truncation(&self) -> usize {
        self.coords.truncation
    }

    pub fn iter(&self) -> impl Iterator<Item = (&BracketTree, &S)> {
        self.coords.iter()
    }
}

/// `ζ = coordinates of log π_N(Ser)`.
pub fn zeta_coordinates<S: ExactScalar>(
    c: &DiracControl<S>,
    basis: &Arc<HallBasis>,
    n: usize,
) -> Result<CoordinateVector<S>> {
    let z = formal_series(c, n)?.log()?;
    Ok(CoordinateVector {
        kind: CoordinateKind::First,
        coords: lie_coordinates_arc(&z, basis)?,
    })
}

/// Reference coordinates of `exp(X0 + X1)`.
pub fn reference_zeta<S: ExactScalar>(basis: &Arc<HallBasis>, n: usize) -> Result<CoordinateVector<S>> {
    let z = &Polynomial::<S>::letter(0, 2, n) + &Polynomial::<S>::letter(1, 2, n);
    Ok(CoordinateVector {
        kind: CoordinateKind::First,
        coords: lie_coordinates_arc(&z, basis)?,
    })
}

/// A coordinate where the scheme departs from `exp(X0 + X1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Defect {
    pub bracket: BracketTree,
    pub value: GaussRational,
    pub target: GaussRational,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OrderReport {
    /// Largest `N` with `π_N(log Ser) = X0 + X1`.
    pub order: usize,
    /// True when every checked degree matched, so the order is at least `order`.
    pub saturated: bool,
    pub defect_degree: Option<usize>,
    pub defects: Vec<Defect>,
}

impl fmt::Display for OrderReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.saturated {
            return write!(f, "order: >= {}", self.order);
        }
        write!(f, "order: {}", self.order)?;
        if let Some(d) = self.defect_degree {
            let names: Vec<String> = self.defects.iter().map(|x| x.bracket.label()).collect();
            let only = if names.len() == 1 { " only" } else { "" };
            write!(f, "; defect: {}{only} at degree {d}", names.join(", "))?;
        }
        Ok(())
    }
}

/// Exact order of a scheme at `T = 1`, checking degrees up to `n_max`.
pub fn order_of_scheme(s: &Scheme, n_max: usize) -> Result<OrderReport> {
    let basis = crate::hall::bstar_basis(n_max.max(1))?;
    order_in_basis(s, n_max, &basis)
}

/// As [`order_of_scheme`], reporting defects in the given basis.
pub fn order_in_basis(s: &Scheme, n_max: usize, basis: &Arc<HallBasis>) -> Result<OrderReport> {
    if s.is_real() {
        order_generic::<Rational>(s, n_max, basis)
    } else {
        order_generic::<GaussRational>(s, n_max, basis)
    }
}

fn order_generic<S: ExactScalar>(s: &Scheme, n_max: usize, basis: &Arc<HallBasis>) -> Result<OrderReport> {
    let n_max = n_max.max(1);
    let z = s.series::<S>(n_max)?.log()?;
    let target = &Polynomial::<S>::letter(0, 2, n_max) + &Polynomial::<S>::letter(1, 2, n_max);
    for d in 1..=n_max {
        if z.grade(d)? != target.grade(d)? {
            let coords = lie_coordinates_arc(&z, basis)?;
            let refc = lie_coordinates_arc(&target, basis)?;
            let defects = basis
                .elements()
                .iter()
                .enumerate()
                .filter(|(_, b)| b.len() == d)
                .filter(|(k, _)| coords.values[*k] != refc.values[*k])
                .map(|(k, b)| Defect {
                    bracket: b.clone(),
                    value: coords.values[k].to_gauss(),
                    target: refc.values[k].to_gauss(),
                })
                .collect();
            return Ok(OrderReport {
                order: d - 1,
                saturated: false,
                defect_degree: Some(d),
                defects,
            });
        }
    }
    Ok(OrderReport {
        order: n_max,
        saturated: true,
        defect_degree: None,
        defects: Vec::new(),
    })
}

/// Order by comparing monomials of `log Ser` against `X0 + X1`; no basis involved.
pub fn order_by_monomials(s: &Scheme, n_max: usize) -> Result<usize> {
    fn go<S: ExactScalar>(s: &Scheme, n: usize) -> Result<usize> {
        let z = s.series::<S>(n)?.log()?;
        let target = &Polynomial::<S>::letter(0, 2, n) + &Polynomial::<S>::letter(1, 2, n);
        for d in 1..=n {
            if z.grade(d)? != target.grade(d)? {
                return Ok(d - 1);
            }
        }
        Ok(n)
    }
    if s.is_real() {
        go::<Rational>(s, n_max)
    } else {
        go::<GaussRational>(s, n_max)
    }
}

/// Verifies both homogeneity laws of the first-kind coordinates:
/// `ζ_b(u^ε) = ε^{|b|} ζ_b(u)` and `ζ_b(λ·u) = Π λ_j^{n_j(b)} ζ_b(u)`.
pub fn homogeneity_check<S: ExactScalar>(
    c: &DiracControl<S>,
    eps: &Rational,
    lambda: &[S],
    basis: &Arc<HallBasis>,
    n: usize,
) -> Result<bool> {
    let base = zeta_coordinates(c, basis, n)?;
    let scaled = zeta_coordinates(&c.time_scaled(eps), basis, n)?;
    let gen = zeta_coordinates(&c.generator_scaled(lambda)?, basis, n)?;
    for (k, b) in basis.elements().iter().enumerate() {
        if b.len() > n {
            continue;
        }
        let v = base.coords.values[k].clone();
        if scaled.coords.values[k] != v.clone() * S::from_rational(&pow(eps, b.len())) {
            return Ok(false);
        }
        let mut w = S::one();
        for (j, l) in lambda.iter().enumerate() {
            for _ in 0..b.count(j as u8) {
                w = w * l.clone();
            }
        }
        if gen.coords.values[k] != v * w {
            return Ok(false);
        }
    }
    Ok(true)
}
