//! Exact polynomials in three variables and rational functions whose only
//! denominator is a power of a fixed affine factor.
//!
//! A [`WeightedPolynomial`] in the [`Frame::Finite`] frame is `N(a,b,c) / (1-c)^w`
//! in collapsed coordinates `a = xi/(1-zeta)`, `b = eta/(1-zeta)`, `c = zeta`.
//! In the [`Frame::Infinite`] frame it is `N(x,y,z) / (1+z)^w`.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Rational = BigRational;
pub type Exponent = [u32; 3];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PolyError {
    #[error("integral diverges: {0}")]
    Divergent(String),
    #[error("frame mismatch")]
    FrameMismatch,
    #[error("malformed rational literal `{0}`")]
    BadRational(String),
    #[error("malformed serialized polynomial: {0}")]
    Malformed(String),
}

pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Formats as `num/den` (always with a denominator).
pub fn rational_to_string(q: &Rational) -> String {
    format!("{}/{}", q.numer(), q.denom())
}

/// Accepts `p/q`, integers and plain decimals such as `-0.125`.
pub fn parse_rational(s: &str) -> Result<Rational, PolyError> {
    let t = s.trim();
    let bad = || PolyError::BadRational(s.to_string());
    if let Some((n, d)) = t.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(Rational::new(n, d));
    }
    let (mantissa, exp) = match t.find(['e', 'E']) {
        Some(i) => (&t[..i], t[i + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (t, 0),
    };
    let (neg, body) = match mantissa.strip_prefix('-') {
        Some(r) => (true, r),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (ip, fp) = body.split_once('.').unwrap_or((body, ""));
    if ip.is_empty() && fp.is_empty() {
        return Err(bad());
    }
    if !ip.chars().chain(fp.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits: BigInt = format!("0{ip}{fp}").parse().map_err(|_| bad())?;
    let scale = exp - fp.len() as i32;
    let ten = BigInt::from(10);
    let mut q = if scale >= 0 {
        Rational::from_integer(digits * num_traits::pow(ten, scale as usize))
    } else {
        Rational::new(digits, num_traits::pow(ten, (-scale) as usize))
    };
    if neg {
        q = -q;
    }
    Ok(q)
}

fn binomial_row(n: u32) -> Vec<BigInt> {
    let mut row = vec![BigInt::one()];
    for i in 0..n {
        let next = &row[i as usize] * BigInt::from(n - i) / BigInt::from(i + 1);
        row.push(next);
    }
    row
}

/// Sparse polynomial in three variables with exact rational coefficients.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Poly {
    terms: BTreeMap<Exponent, Rational>,
}

impl Poly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::constant(Rational::one())
    }

    pub fn constant(c: Rational) -> Self {
        Self::monomial([0, 0, 0], c)
    }

    pub fn monomial(e: Exponent, c: Rational) -> Self {
        let mut p = Self::zero();
        if !c.is_zero() {
            p.terms.insert(e, c);
        }
        p
    }

    /// The coordinate function of variable `v`.
    pub fn var(v: usize) -> Self {
        let mut e = [0; 3];
        e[v] = 1;
        Self::monomial(e, Rational::one())
    }

    /// `x^i y^j z^l` with unit coefficient.
    pub fn mono(i: u32, j: u32, l: u32) -> Self {
        Self::monomial([i, j, l], Rational::one())
    }

    /// `(1 + sign * x_v)^n`.
    pub fn binomial(v: usize, sign: i64, n: u32) -> Self {
        let mut p = Self::zero();
        let s = BigInt::from(sign);
        for (i, b) in binomial_row(n).into_iter().enumerate() {
            let mut e = [0; 3];
            e[v] = i as u32;
            p.add_term(e, Rational::from_integer(b * num_traits::pow(s.clone(), i)));
        }
        p
    }

    /// `c0 + c1 x + c2 y + c3 z`.
    pub fn affine(c: [i64; 4]) -> Self {
        let mut p = Self::constant(int(c[0]));
        for v in 0..3 {
            p = p + Self::var(v).scale(&int(c[v + 1]));
        }
        p
    }

    pub fn from_terms<I: IntoIterator<Item = (Exponent, Rational)>>(it: I) -> Self {
        let mut p = Self::zero();
        for (e, c) in it {
            p.add_term(e, c);
        }
        p
    }

    pub fn add_term(&mut self, e: Exponent, c: Rational) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&e) {
            Some(x) => {
                *x += c;
                if x.is_zero() {
                    self.terms.remove(&e);
                }
            }
            None => {
                self.terms.insert(e, c);
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exponent, &Rational)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, e: &Exponent) -> Rational {
        self.terms.get(e).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn degree_in(&self, v: usize) -> Option<u32> {
        self.terms.keys().map(|e| e[v]).max()
    }

    pub fn total_degree(&self) -> Option<u32> {
        self.terms.keys().map(|e| e[0] + e[1] + e[2]).max()
    }

    pub fn scale(&self, c: &Rational) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        Self {
            terms: self.terms.iter().map(|(e, x)| (*e, x * c)).collect(),
        }
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut r = Self::one();
        for _ in 0..n {
            r = &r * self;
        }
        r
    }

    pub fn derivative(&self, v: usize) -> Self {
        let mut p = Self::zero();
        for (e, c) in &self.terms {
            if e[v] > 0 {
                let mut f = *e;
                f[v] -= 1;
                p.add_term(f, c * int(e[v] as i64));
            }
        }
        p
    }

    pub fn eval(&self, pt: &[Rational; 3]) -> Rational {
        let mut acc = Rational::zero();
        for (e, c) in &self.terms {
            let mut t = c.clone();
            for v in 0..3 {
                if e[v] > 0 {
                    t *= num_traits::pow(pt[v].clone(), e[v] as usize);
                }
            }
            acc += t;
        }
        acc
    }

    pub fn eval_f64(&self, pt: &[f64; 3]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| {
                c.to_f64().unwrap_or(f64::NAN)
                    * pt[0].powi(e[0] as i32)
                    * pt[1].powi(e[1] as i32)
                    * pt[2].powi(e[2] as i32)
            })
            .sum()
    }

    /// Composition `p(q0, q1, q2)`.
    pub fn compose(&self, q: &[Poly; 3]) -> Self {
        let mut powers: [Vec<Poly>; 3] = Default::default();
        for v in 0..3 {
            let maxd = self.degree_in(v).unwrap_or(0);
            powers[v].push(Poly::one());
            for d in 1..=maxd as usize {
                let next = &powers[v][d - 1] * &q[v];
                powers[v].push(next);
            }
        }
        let mut r = Self::zero();
        for (e, c) in &self.terms {
            let t = &(&powers[0][e[0] as usize] * &powers[1][e[1] as usize])
                * &powers[2][e[2] as usize];
            r = r + t.scale(c);
        }
        r
    }

    /// Exact division by `(x_v - root)`; `None` if there is a remainder.
    pub fn div_linear(&self, v: usize, root: &Rational) -> Option<Self> {
        let mut groups: BTreeMap<Exponent, BTreeMap<u32, Rational>> = BTreeMap::new();
        for (e, c) in &self.terms {
            let mut key = *e;
            key[v] = 0;
            groups.entry(key).or_default().insert(e[v], c.clone());
        }
        let mut out = Self::zero();
        for (key, coeffs) in groups {
            let n = *coeffs.keys().next_back().unwrap();
            // synthetic division from the top coefficient down
            let mut carry = Rational::zero();
            for d in (0..=n).rev() {
                let p = coeffs.get(&d).cloned().unwrap_or_else(Rational::zero);
                let cur = p + root * &carry;
                if d == 0 {
                    if !cur.is_zero() {
                        return None;
                    }
                } else {
                    let mut e = key;
                    e[v] = d - 1;
                    out.add_term(e, cur.clone());
                }
                carry = cur;
            }
        }
        Some(out)
    }

    /// Sets `x_v = value`.
    pub fn restrict(&self, v: usize, value: &Rational) -> Self {
        let mut p = Self::zero();
        for (e, c) in &self.terms {
            let mut f = *e;
            f[v] = 0;
            p.add_term(f, c * num_traits::pow(value.clone(), e[v] as usize));
        }
        p
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({c})")?;
            for (v, name) in ["a", "b", "c"].iter().enumerate() {
                match e[v] {
                    0 => {}
                    1 => write!(f, "*{name}")?,
                    d => write!(f, "*{name}^{d}")?,
                }
            }
        }
        Ok(())
    }
}

impl<'a> Add<&'a Poly> for &'a Poly {
    type Output = Poly;
    fn add(self, o: &Poly) -> Poly {
        let mut r = self.clone();
        for (e, c) in &o.terms {
            r.add_term(*e, c.clone());
        }
        r
    }
}

impl Add for Poly {
    type Output = Poly;
    fn add(mut self, o: Poly) -> Poly {
        for (e, c) in o.terms {
            self.add_term(e, c);
        }
        self
    }
}

impl<'a> Sub<&'a Poly> for &'a Poly {
    type Output = Poly;
    fn sub(self, o: &Poly) -> Poly {
        let mut r = self.clone();
        for (e, c) in &o.terms {
            r.add_term(*e, -c.clone());
        }
        r
    }
}

impl Sub for Poly {
    type Output = Poly;
    fn sub(self, o: Poly) -> Poly {
        &self - &o
    }
}

impl Neg for Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        Poly {
            terms: self.terms.into_iter().map(|(e, c)| (e, -c)).collect(),
        }
    }
}

impl<'a> Mul<&'a Poly> for &'a Poly {
    type Output = Poly;
    fn mul(self, o: &Poly) -> Poly {
        let mut r = Poly::zero();
        for (e1, c1) in &self.terms {
            for (e2, c2) in &o.terms {
                r.add_term([e1[0] + e2[0], e1[1] + e2[1], e1[2] + e2[2]], c1 * c2);
            }
        }
        r
    }
}

impl Mul for Poly {
    type Output = Poly;
    fn mul(self, o: Poly) -> Poly {
        &self * &o
    }
}

/// Which reference domain a rational function lives on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    /// Collapsed coordinates of the finite pyramid; denominator `(1-c)^w`.
    Finite,
    /// Cartesian coordinates of the infinite pyramid; denominator `(1+z)^w`.
    Infinite,
}

impl Frame {
    fn sign(self) -> i64 {
        match self {
            Frame::Finite => -1,
            Frame::Infinite => 1,
        }
    }

    /// The denominator factor as a polynomial.
    pub fn base(self) -> Poly {
        Poly::binomial(2, self.sign(), 1)
    }

    pub fn base_pow(self, n: u32) -> Poly {
        Poly::binomial(2, self.sign(), n)
    }

    /// Root of the base factor in the third variable.
    fn root(self) -> Rational {
        int(-self.sign())
    }
}

/// `num / base^weight`, stored in canonical (minimal weight) form.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct WeightedPolynomial {
    frame: Frame,
    weight: u32,
    num: Poly,
}

impl WeightedPolynomial {
    pub fn new(frame: Frame, num: Poly, weight: u32) -> Self {
        let mut w = Self { frame, weight, num };
        w.canonicalize();
        w
    }

    pub fn zero(frame: Frame) -> Self {
        Self::new(frame, Poly::zero(), 0)
    }

    pub fn constant(frame: Frame, c: Rational) -> Self {
        Self::new(frame, Poly::constant(c), 0)
    }

    pub fn poly(frame: Frame, num: Poly) -> Self {
        Self::new(frame, num, 0)
    }

    fn canonicalize(&mut self) {
        if self.num.is_zero() {
            self.weight = 0;
            return;
        }
        let root = self.frame.root();
        let neg = self.frame == Frame::Finite;
        while self.weight > 0 {
            match self.num.div_linear(2, &root) {
                Some(q) => {
                    // (1-c) = -(c-1)
                    self.num = if neg { -q } else { q };
                    self.weight -= 1;
                }
                None => break,
            }
        }
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn weight(&self) -> u32 {
        self.weight
    }

    pub fn numerator(&self) -> &Poly {
        &self.num
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    /// True when the function is a polynomial in the frame variables.
    pub fn is_polynomial(&self) -> bool {
        self.weight == 0
    }

    /// Numerator after rewriting over `base^w` (requires `w >= weight`).
    pub fn numerator_at_weight(&self, w: u32) -> Option<Poly> {
        if w < self.weight {
            return None;
        }
        Some(&self.num * &self.frame.base_pow(w - self.weight))
    }

    /// Multiplies by `base^n`, `n` of either sign.
    pub fn mul_base_pow(&self, n: i32) -> Self {
        if n >= 0 {
            let n = n as u32;
            if n <= self.weight {
                Self { frame: self.frame, weight: self.weight - n, num: self.num.clone() }
            } else {
                Self::new(self.frame, &self.num * &self.frame.base_pow(n - self.weight), 0)
            }
        } else {
            Self::new(self.frame, self.num.clone(), self.weight + (-n) as u32)
        }
    }

    pub fn scale(&self, c: &Rational) -> Self {
        Self::new(self.frame, self.num.scale(c), self.weight)
    }

    pub fn mul_poly(&self, p: &Poly) -> Self {
        Self::new(self.frame, &self.num * p, self.weight)
    }

    fn check(&self, o: &Self) {
        assert_eq!(self.frame, o.frame, "frame mismatch in rational arithmetic");
    }

    /// Partial derivative with respect to the Cartesian coordinate `v` of
    /// the frame's domain (`xi, eta, zeta` or `x, y, z`).
    pub fn partial(&self, v: usize) -> Self {
        let w = self.weight as i64;
        let n = &self.num;
        match self.frame {
            Frame::Infinite => {
                if v < 2 {
                    Self::new(self.frame, n.derivative(v), self.weight)
                } else {
                    // (N_z (1+z) - w N) / (1+z)^{w+1}
                    let top = &(&n.derivative(2) * &self.frame.base()) - &n.scale(&int(w));
                    Self::new(self.frame, top, self.weight + 1)
                }
            }
            Frame::Finite => {
                if v < 2 {
                    Self::new(self.frame, n.derivative(v), self.weight + 1)
                } else {
                    // (a N_a + b N_b + (1-c) N_c + w N) / (1-c)^{w+1}
                    let top = &(&(&(&Poly::var(0) * &n.derivative(0))
                        + &(&Poly::var(1) * &n.derivative(1)))
                        + &(&self.frame.base() * &n.derivative(2)))
                        + &n.scale(&int(w));
                    Self::new(self.frame, top, self.weight + 1)
                }
            }
        }
    }

    /// Value at a point given in the frame variables; `None` where the
    /// denominator vanishes.
    pub fn eval(&self, pt: &[Rational; 3]) -> Option<Rational> {
        let base = self.frame.base().eval(pt);
        if self.weight > 0 && base.is_zero() {
            return None;
        }
        let d = num_traits::pow(base, self.weight as usize);
        Some(self.num.eval(pt) / d)
    }

    pub fn eval_f64(&self, pt: &[f64; 3]) -> f64 {
        let base = 1.0 + self.frame.sign() as f64 * pt[2];
        self.num.eval_f64(pt) / base.powi(self.weight as i32)
    }

    /// Integral over the frame's pyramid with respect to Cartesian volume.
    pub fn integrate(&self) -> Result<Rational, PolyError> {
        match self.frame {
            Frame::Finite => {
                if self.weight > 2 {
                    return Err(PolyError::Divergent(format!(
                        "denominator (1-c)^{} is not integrable over the pyramid",
                        self.weight
                    )));
                }
                let m = 2 - self.weight;
                Ok(self
                    .num
                    .terms()
                    .map(|(e, c)| c * collapsed_moment(e[0], e[1], e[2], m))
                    .sum())
            }
            Frame::Infinite => {
                let mut acc = Rational::zero();
                for (e, c) in self.num.terms() {
                    if e[2] + 2 > self.weight {
                        return Err(PolyError::Divergent(format!(
                            "z^{}/(1+z)^{} is not integrable on the half line",
                            e[2], self.weight
                        )));
                    }
                    acc += c * infinite_moment(e[0], e[1], e[2], self.weight);
                }
                Ok(acc)
            }
        }
    }

    /// Rewrites an infinite-frame function in collapsed coordinates.
    pub fn to_finite(&self) -> Self {
        match self.frame {
            Frame::Finite => self.clone(),
            Frame::Infinite => {
                let w = self.weight as i64;
                let m = self
                    .num
                    .terms()
                    .map(|(e, _)| e[2] as i64 - w)
                    .max()
                    .unwrap_or(0)
                    .max(0);
                let mut out = Poly::zero();
                for (e, c) in self.num.terms() {
                    let pw = (w - e[2] as i64 + m) as u32;
                    let t = &Poly::monomial(*e, c.clone()) * &Frame::Finite.base_pow(pw);
                    out = out + t;
                }
                Self::new(Frame::Finite, out, m as u32)
            }
        }
    }

    /// Rewrites a collapsed-coordinate function on the infinite pyramid.
    pub fn to_infinite(&self) -> Self {
        match self.frame {
            Frame::Infinite => self.clone(),
            Frame::Finite => {
                let m = self.weight as i64;
                let l = self.num.degree_in(2).unwrap_or(0) as i64;
                let mut out = Poly::zero();
                for (e, c) in self.num.terms() {
                    let pw = (l - e[2] as i64 + m) as u32;
                    let t = &Poly::monomial(*e, c.clone()) * &Frame::Infinite.base_pow(pw);
                    out = out + t;
                }
                Self::new(Frame::Infinite, out, l as u32)
            }
        }
    }

    /// Converts a collapsed-coordinate function to a Cartesian polynomial
    /// in `(xi, eta, zeta)` when it is one.
    pub fn to_cartesian_polynomial(&self) -> Option<Poly> {
        assert_eq!(self.frame, Frame::Finite);
        // a^i b^j c^l / (1-c)^m = xi^i eta^j zeta^l / (1-zeta)^{i+j+m}
        let m = self.weight;
        let d = self.num.terms().map(|(e, _)| e[0] + e[1] + m).max().unwrap_or(0);
        let mut out = Poly::zero();
        for (e, c) in self.num.terms() {
            let t = &Poly::monomial(*e, c.clone()) * &Frame::Finite.base_pow(d - e[0] - e[1] - m);
            out = out + t;
        }
        // same denominator shape, so canonical reduction does the division
        let r = Self::new(Frame::Finite, out, d);
        r.is_polynomial().then_some(r.num)
    }

    /// Collapsed-coordinate form of a Cartesian polynomial on the finite pyramid.
    pub fn from_cartesian_polynomial(p: &Poly) -> Self {
        let mut out = Poly::zero();
        for (e, c) in p.terms() {
            out = out + &Poly::monomial(*e, c.clone()) * &Frame::Finite.base_pow(e[0] + e[1]);
        }
        Self::new(Frame::Finite, out, 0)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let terms: Vec<serde_json::Value> = self
            .num
            .terms()
            .map(|(e, c)| {
                serde_json::json!({
                    "a": e[0], "b": e[1], "c": e[2],
                    "num": c.numer().to_string(),
                    "den": c.denom().to_string(),
                })
            })
            .collect();
        serde_json::json!({ "frame": self.frame, "weight": self.weight, "terms": terms })
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self, PolyError> {
        let bad = |m: &str| PolyError::Malformed(m.to_string());
        let frame: Frame = serde_json::from_value(v.get("frame").cloned().ok_or_else(|| bad("frame"))?)
            .map_err(|_| bad("frame"))?;
        let weight = v.get("weight").and_then(|w| w.as_u64()).ok_or_else(|| bad("weight"))? as u32;
        let mut num = Poly::zero();
        for t in v.get("terms").and_then(|t| t.as_array()).ok_or_else(|| bad("terms"))? {
            let e = |k: &str| t.get(k).and_then(|x| x.as_u64()).map(|x| x as u32).ok_or_else(|| bad(k));
            let s = |k: &str| -> Result<BigInt, PolyError> {
                t.get(k).and_then(|x| x.as_str()).and_then(|x| x.parse().ok()).ok_or_else(|| bad(k))
            };
            let den = s("den")?;
            if den.is_zero() {
                return Err(bad("zero denominator"));
            }
            num.add_term([e("a")?, e("b")?, e("c")?], Rational::new(s("num")?, den));
        }
        Ok(Self::new(frame, num, weight))
    }
}

/// Spaces of weighted polynomials on the infinite pyramid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeightedSpace {
    /// `Q_w^{l,m,n}`: degrees at most `(l, m, n)` over `(1+z)^w`.
    Tensor { w: u32, degrees: [u32; 3] },
    /// `P_w^n`: total degree at most `n` over `(1+z)^w`.
    Total { w: u32, n: u32 },
    /// Numerators in `x` and `z` homogeneous of degree `n` in `(x, 1+z)`.
    Homogeneous { w: u32, n: u32 },
}

impl WeightedPolynomial {
    /// Exact membership test in the infinite frame.
    pub fn is_in(&self, space: WeightedSpace) -> bool {
        assert_eq!(self.frame, Frame::Infinite, "weighted spaces live on the infinite pyramid");
        let w = match space {
            WeightedSpace::Tensor { w, .. } | WeightedSpace::Total { w, .. } | WeightedSpace::Homogeneous { w, .. } => w,
        };
        let Some(num) = self.numerator_at_weight(w) else {
            return false;
        };
        match space {
            WeightedSpace::Tensor { degrees, .. } => {
                num.terms().all(|(e, _)| (0..3).all(|v| e[v] <= degrees[v]))
            }
            WeightedSpace::Total { n, .. } => num.terms().all(|(e, _)| e[0] + e[1] + e[2] <= n),
            WeightedSpace::Homogeneous { n, .. } => {
                // substitute z = t - 1 and read off degrees in (x, t)
                let shifted = num.compose(&[Poly::var(0), Poly::var(1), Poly::affine([-1, 0, 0, 1])]);
                let homogeneous = shifted.terms().all(|(e, _)| e[1] == 0 && e[0] + e[2] == n);
                homogeneous
            }
        }
    }
}

impl fmt::Display for WeightedPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let base = match self.frame {
            Frame::Finite => "(1-c)",
            Frame::Infinite => "(1+z)",
        };
        if self.weight == 0 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "[{}] / {base}^{}", self.num, self.weight)
        }
    }
}

impl<'a> Add<&'a WeightedPolynomial> for &'a WeightedPolynomial {
    type Output = WeightedPolynomial;
    fn add(self, o: &WeightedPolynomial) -> WeightedPolynomial {
        self.check(o);
        let w = self.weight.max(o.weight);
        let n = self.numerator_at_weight(w).unwrap() + o.numerator_at_weight(w).unwrap();
        WeightedPolynomial::new(self.frame, n, w)
    }
}

impl<'a> Sub<&'a WeightedPolynomial> for &'a WeightedPolynomial {
    type Output = WeightedPolynomial;
    fn sub(self, o: &WeightedPolynomial) -> WeightedPolynomial {
        self + &(-o.clone())
    }
}

impl Neg for WeightedPolynomial {
    type Output = WeightedPolynomial;
    fn neg(self) -> WeightedPolynomial {
        WeightedPolynomial { frame: self.frame, weight: self.weight, num: -self.num }
    }
}

impl<'a> Mul<&'a WeightedPolynomial> for &'a WeightedPolynomial {
    type Output = WeightedPolynomial;
    fn mul(self, o: &WeightedPolynomial) -> WeightedPolynomial {
        self.check(o);
        WeightedPolynomial::new(self.frame, &self.num * &o.num, self.weight + o.weight)
    }
}

fn factorial(n: u32) -> BigInt {
    (1..=n as u64).fold(BigInt::one(), |acc, i| acc * BigInt::from(i))
}

/// `int_0^1 t^p (1-t)^q dt = p! q! / (p+q+1)!`.
pub fn beta_moment(p: u32, q: u32) -> Rational {
    Rational::new(factorial(p) * factorial(q), factorial(p + q + 1))
}

/// `int a^i b^j c^l (1-c)^m` over the unit cube.
pub fn collapsed_moment(i: u32, j: u32, l: u32, m: u32) -> Rational {
    beta_moment(l, m) / int(((i + 1) * (j + 1)) as i64)
}

/// `int x^i y^j z^l / (1+z)^w` over `[0,1]^2 x [0, inf)`; requires `w >= l + 2`.
pub fn infinite_moment(i: u32, j: u32, l: u32, w: u32) -> Rational {
    // substitute t = z/(1+z): int_0^1 t^l (1-t)^{w-l-2} dt
    beta_moment(l, w - l - 2) / int(((i + 1) * (j + 1)) as i64)
}

/// Absolute value helper used when reporting defects.
pub fn abs_f64(q: &Rational) -> f64 {
    q.abs().to_f64().unwrap_or(f64::INFINITY)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fin(num: Poly, w: u32) -> WeightedPolynomial {
        WeightedPolynomial::new(Frame::Finite, num, w)
    }

    fn inf(num: Poly, w: u32) -> WeightedPolynomial {
        WeightedPolynomial::new(Frame::Infinite, num, w)
    }

    #[test]
    fn canonical_form_drops_common_factors() {
        let p = &Poly::mono(1, 0, 0) * &Frame::Infinite.base_pow(2);
        let w = inf(p, 3);
        assert_eq!(w.weight(), 1);
        assert_eq!(w.numerator(), &Poly::mono(1, 0, 0));
        let q = fin(Frame::Finite.base_pow(4), 2);
        assert_eq!(q.weight(), 0);
        assert_eq!(q.numerator(), &Frame::Finite.base_pow(2));
        assert_eq!(inf(Poly::zero(), 5).weight(), 0);
    }

    #[test]
    fn reference_moments() {
        // volume of the pyramid
        assert_eq!(fin(Poly::one(), 0).integrate().unwrap(), rat(1, 3));
        // int zeta = 1/12
        assert_eq!(fin(Poly::mono(0, 0, 1), 0).integrate().unwrap(), rat(1, 12));
        // xi = a(1-c), so the integral is 1/2 * int (1-c)^3
        let xi = WeightedPolynomial::from_cartesian_polynomial(&Poly::mono(1, 0, 0));
        assert_eq!(xi.integrate().unwrap(), rat(1, 8));
        // 1/(1+z)^4 on the infinite pyramid equals the pushed-back volume
        assert_eq!(inf(Poly::one(), 4).integrate().unwrap(), rat(1, 3));
        assert!(inf(Poly::mono(0, 0, 1), 2).integrate().is_err());
        assert!(fin(Poly::one(), 3).integrate().is_err());
    }

    #[test]
    fn frame_conversion_maps_known_values() {
        // x/(1+z) -> a (1-c)
        let f = inf(Poly::mono(1, 0, 0), 1).to_finite();
        assert_eq!(f, fin(&Poly::mono(1, 0, 0) * &Frame::Finite.base(), 0));
        // z/(1+z) -> c
        assert_eq!(inf(Poly::mono(0, 0, 1), 1).to_finite(), fin(Poly::mono(0, 0, 1), 0));
        // z -> c / (1-c)
        assert_eq!(inf(Poly::mono(0, 0, 1), 0).to_finite(), fin(Poly::mono(0, 0, 1), 1));
        let back = fin(Poly::mono(0, 0, 1), 1).to_infinite();
        assert_eq!(back, inf(Poly::mono(0, 0, 1), 0));
    }

    #[test]
    fn cartesian_round_trip() {
        // xi/(1-zeta) is a, which is not polynomial in Cartesian coordinates
        assert!(fin(Poly::mono(1, 0, 0), 0).to_cartesian_polynomial().is_none());
        let p = Poly::affine([1, 2, -3, 5]).pow(3);
        let w = WeightedPolynomial::from_cartesian_polynomial(&p);
        assert_eq!(w.to_cartesian_polynomial().unwrap(), p);
    }

    #[test]
    fn finite_partials_match_cartesian_derivatives() {
        let p = &Poly::affine([1, 2, -3, 5]).pow(2) * &Poly::mono(1, 1, 2);
        let w = WeightedPolynomial::from_cartesian_polynomial(&p);
        for v in 0..3 {
            let d = w.partial(v).to_cartesian_polynomial().unwrap();
            assert_eq!(d, p.derivative(v));
        }
    }

    #[test]
    fn weighted_space_membership() {
        let z2 = inf(Poly::mono(0, 0, 2), 2);
        assert!(z2.is_in(WeightedSpace::Tensor { w: 2, degrees: [2, 2, 2] }));
        assert!(!z2.is_in(WeightedSpace::Tensor { w: 2, degrees: [2, 2, 1] }));
        // raising the weight is allowed: z^2/(1+z)^2 = z^2(1+z)/(1+z)^3
        assert!(z2.is_in(WeightedSpace::Tensor { w: 3, degrees: [0, 0, 3] }));
        assert!(inf(Poly::mono(1, 0, 1), 3).is_in(WeightedSpace::Total { w: 3, n: 2 }));
        let h = inf(&Poly::mono(1, 0, 0) * &Frame::Infinite.base(), 3);
        assert!(h.is_in(WeightedSpace::Homogeneous { w: 3, n: 2 }));
        assert!(!inf(Poly::mono(1, 0, 1), 3).is_in(WeightedSpace::Homogeneous { w: 3, n: 2 }));
        assert!(!inf(Poly::one(), 4).is_in(WeightedSpace::Total { w: 3, n: 5 }));
    }

    #[test]
    fn parse_rationals() {
        assert_eq!(parse_rational("3/6").unwrap(), rat(1, 2));
        assert_eq!(parse_rational("-0.125").unwrap(), rat(-1, 8));
        assert_eq!(parse_rational("2").unwrap(), int(2));
        assert_eq!(parse_rational("1e-2").unwrap(), rat(1, 100));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("abc").is_err());
        assert_eq!(rational_to_string(&int(3)), "3/1");
    }

    #[test]
    fn json_round_trip() {
        let w = inf(&Poly::mono(2, 1, 0).scale(&rat(-3, 7)) + &Poly::mono(0, 0, 1), 3);
        assert_eq!(WeightedPolynomial::from_json(&w.to_json()).unwrap(), w);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_poly() -> impl Strategy<Value = Poly> {
            proptest::collection::vec(((0u32..3, 0u32..3, 0u32..4), -5i64..6), 0..6).prop_map(|ts| {
                Poly::from_terms(ts.into_iter().map(|((i, j, l), c)| ([i, j, l], int(c))))
            })
        }

        fn arb_wp(frame: Frame) -> impl Strategy<Value = WeightedPolynomial> {
            (arb_poly(), 0u32..4).prop_map(move |(p, w)| WeightedPolynomial::new(frame, p, w))
        }

        fn any_frame() -> impl Strategy<Value = Frame> {
            prop_oneof![Just(Frame::Finite), Just(Frame::Infinite)]
        }

        proptest! {
            #[test]
            fn ring_axioms(f in any_frame().prop_flat_map(|fr| (arb_wp(fr), arb_wp(fr), arb_wp(fr)))) {
                let (p, q, r) = f;
                prop_assert_eq!(&p + &q, &q + &p);
                prop_assert_eq!(&p * &q, &q * &p);
                prop_assert_eq!(&(&p * &q) * &r, &p * &(&q * &r));
                prop_assert_eq!(&p * &(&q + &r), &(&p * &q) + &(&p * &r));
                prop_assert!((&p - &p).is_zero());
            }

            #[test]
            fn leibniz_rule(f in any_frame().prop_flat_map(|fr| (arb_wp(fr), arb_wp(fr))), v in 0usize..3) {
                let (p, q) = f;
                let lhs = (&p * &q).partial(v);
                let rhs = &(&p.partial(v) * &q) + &(&p * &q.partial(v));
                prop_assert_eq!(lhs, rhs);
            }

            #[test]
            fn frame_round_trip(p in arb_wp(Frame::Infinite), q in arb_wp(Frame::Finite)) {
                prop_assert_eq!(p.to_finite().to_infinite(), p.clone());
                prop_assert_eq!(q.to_infinite().to_finite(), q);
            }

            #[test]
            fn conversion_preserves_values(p in arb_wp(Frame::Infinite), x in 0i64..5, y in 0i64..5, z in 0i64..9) {
                let (x, y, z) = (rat(x, 4), rat(y, 4), rat(z, 3));
                let c = &z / (&z + int(1));
                let f = p.to_finite();
                prop_assert_eq!(p.eval(&[x.clone(), y.clone(), z]), f.eval(&[x, y, c]));
            }

            #[test]
            fn product_weight_is_sum_before_reduction(p in arb_wp(Frame::Infinite), q in arb_wp(Frame::Infinite)) {
                let pq = &p * &q;
                prop_assert!(pq.weight() <= p.weight() + q.weight());
            }
        }
    }
}
