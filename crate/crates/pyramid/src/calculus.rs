//! Differential forms on both pyramids: exterior derivative, pullbacks along
//! `phi`, rotations, traces on faces and edges, and the weighted norms of the
//! infinite pyramid.
//!
//! Finite-pyramid fields store Cartesian components (`xi, eta, zeta`
//! directions) written in collapsed coordinates.

use std::ops::{Add, Sub};

use num_traits::Zero;
use thiserror::Error;

use crate::ratpoly::{int, Frame, PolyError, Poly, Rational, WeightedPolynomial as WP};
use crate::reference::{self, Edge, Face, GeometryError, Point};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CalculusError {
    #[error("a {0}-form needs {1} components, got {2}")]
    ComponentCount(usize, usize, usize),
    #[error("form degree {0} is not in 0..=3")]
    Degree(usize),
    #[error("components live in different frames")]
    FrameMismatch,
    #[error("the exterior derivative of a 3-form is not defined here")]
    NoDerivative,
    #[error("traces of 3-forms are not defined")]
    NoTrace,
    #[error("expected a field on the {0} pyramid")]
    WrongFrame(&'static str),
    #[error("inverse pullback is not polynomial in collapsed coordinates (component {0})")]
    NotRepresentable(usize),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Poly(#[from] PolyError),
}

pub fn component_count(s: usize) -> usize {
    if s == 0 || s == 3 {
        1
    } else {
        3
    }
}

/// An `s`-form proxy: one component for `s = 0, 3`, three for `s = 1, 2`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FormField {
    degree: usize,
    frame: Frame,
    components: Vec<WP>,
}

impl FormField {
    pub fn new(degree: usize, components: Vec<WP>) -> Result<Self, CalculusError> {
        if degree > 3 {
            return Err(CalculusError::Degree(degree));
        }
        let n = component_count(degree);
        if components.len() != n {
            return Err(CalculusError::ComponentCount(degree, n, components.len()));
        }
        let frame = components[0].frame();
        if components.iter().any(|c| c.frame() != frame) {
            return Err(CalculusError::FrameMismatch);
        }
        Ok(Self { degree, frame, components })
    }

    pub fn scalar(degree: usize, c: WP) -> Self {
        Self::new(degree, vec![c]).expect("scalar form")
    }

    pub fn vector(degree: usize, c: [WP; 3]) -> Self {
        Self::new(degree, c.to_vec()).expect("vector form")
    }

    pub fn zero(degree: usize, frame: Frame) -> Self {
        Self::new(degree, vec![WP::zero(frame); component_count(degree)]).expect("zero form")
    }

    /// Finite-pyramid form whose components are Cartesian polynomials.
    pub fn from_cartesian(degree: usize, comps: &[Poly]) -> Result<Self, CalculusError> {
        Self::new(degree, comps.iter().map(WP::from_cartesian_polynomial).collect())
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn components(&self) -> &[WP] {
        &self.components
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(|c| c.is_zero())
    }

    pub fn scale(&self, c: &Rational) -> Self {
        self.map(|w| w.scale(c))
    }

    pub fn map(&self, f: impl Fn(&WP) -> WP) -> Self {
        Self { degree: self.degree, frame: self.frame, components: self.components.iter().map(f).collect() }
    }

    /// Largest denominator exponent over the components.
    pub fn max_weight(&self) -> u32 {
        self.components.iter().map(|c| c.weight()).max().unwrap_or(0)
    }

    /// Pointwise inner product of two fields of equal degree.
    pub fn dot(&self, o: &Self) -> WP {
        assert_eq!(self.frame, o.frame);
        let mut acc = WP::zero(self.frame);
        for (a, b) in self.components.iter().zip(&o.components) {
            acc = &acc + &(a * b);
        }
        acc
    }

    /// `d`: gradient, curl or divergence in the frame's Cartesian coordinates.
    pub fn exterior_derivative(&self) -> Result<Self, CalculusError> {
        let c = &self.components;
        let d = |i: usize, v: usize| c[i].partial(v);
        let comps = match self.degree {
            0 => (0..3).map(|v| d(0, v)).collect(),
            1 => vec![&d(2, 1) - &d(1, 2), &d(0, 2) - &d(2, 0), &d(1, 0) - &d(0, 1)],
            2 => vec![&(&d(0, 0) + &d(1, 1)) + &d(2, 2)],
            _ => return Err(CalculusError::NoDerivative),
        };
        Self::new(self.degree + 1, comps)
    }

    /// Pullback along `phi` of a finite-pyramid form.
    pub fn pullback(&self) -> Result<Self, CalculusError> {
        if self.frame != Frame::Finite {
            return Err(CalculusError::WrongFrame("finite"));
        }
        let c = &self.components;
        let a = Poly::var(0);
        let b = Poly::var(1);
        let comps: Vec<WP> = match self.degree {
            0 => vec![c[0].clone()],
            1 => {
                let tz = &(&c[2] - &c[0].mul_poly(&a)) - &c[1].mul_poly(&b);
                vec![c[0].mul_base_pow(1), c[1].mul_base_pow(1), tz.mul_base_pow(2)]
            }
            2 => {
                let vx = &c[0] + &c[2].mul_poly(&a);
                let vy = &c[1] + &c[2].mul_poly(&b);
                vec![vx.mul_base_pow(3), vy.mul_base_pow(3), c[2].mul_base_pow(2)]
            }
            _ => vec![c[0].mul_base_pow(4)],
        };
        Self::new(self.degree, comps.iter().map(WP::to_infinite).collect())
    }

    /// Inverse pullback of an infinite-pyramid form, with no check that the
    /// result is polynomial in collapsed coordinates.
    pub fn inverse_pullback_unchecked(&self) -> Result<Self, CalculusError> {
        if self.frame != Frame::Infinite {
            return Err(CalculusError::WrongFrame("infinite"));
        }
        let c = &self.components;
        let x = Poly::var(0);
        let y = Poly::var(1);
        let comps: Vec<WP> = match self.degree {
            0 => vec![c[0].clone()],
            1 => {
                let xy = &c[0].mul_poly(&x) + &c[1].mul_poly(&y);
                vec![
                    c[0].mul_base_pow(1),
                    c[1].mul_base_pow(1),
                    &xy.mul_base_pow(1) + &c[2].mul_base_pow(2),
                ]
            }
            2 => {
                let zx = c[2].mul_poly(&x).mul_base_pow(2);
                let zy = c[2].mul_poly(&y).mul_base_pow(2);
                vec![&c[0].mul_base_pow(3) - &zx, &c[1].mul_base_pow(3) - &zy, c[2].mul_base_pow(2)]
            }
            _ => vec![c[0].mul_base_pow(4)],
        };
        Self::new(self.degree, comps.iter().map(WP::to_finite).collect())
    }

    /// Inverse pullback; fails unless every component is a polynomial in
    /// collapsed coordinates.
    pub fn inverse_pullback(&self) -> Result<Self, CalculusError> {
        let f = self.inverse_pullback_unchecked()?;
        if let Some(i) = f.components.iter().position(|c| !c.is_polynomial()) {
            return Err(CalculusError::NotRepresentable(i));
        }
        Ok(f)
    }

    /// Pushforward under one quarter turn of the pyramid.
    pub fn rotate(&self) -> Self {
        // composition with the inverse rotation (a, b) -> (b, 1 - a)
        let inv = [Poly::var(1), &Poly::one() - &Poly::var(0), Poly::var(2)];
        let composed: Vec<WP> = self
            .components
            .iter()
            .map(|w| WP::new(self.frame, w.numerator().compose(&inv), w.weight()))
            .collect();
        let m: [[i64; 3]; 3] = match (self.degree, self.frame) {
            (0, _) | (3, _) => return Self { components: composed, ..self.clone() },
            (_, Frame::Infinite) => reference::ROTATION_INFINITE,
            (1, Frame::Finite) => [[0, -1, 0], [1, 0, 0], [0, -1, 1]],
            (_, Frame::Finite) => reference::ROTATION_FINITE,
        };
        Self { components: apply_matrix(&m, &composed), ..self.clone() }
    }

    /// Values at a finite-pyramid point. At the apex a component has a
    /// value only if it is polynomial with a limit independent of direction.
    pub fn evaluate(&self, p: &Point) -> Result<Option<Vec<Rational>>, CalculusError> {
        match self.frame {
            Frame::Infinite => Ok(self.components.iter().map(|c| c.eval(p)).collect()),
            Frame::Finite => {
                if !reference::in_finite_pyramid(p) {
                    return Err(GeometryError::OutsideDomain(
                        format!("{}, {}, {}", p[0], p[1], p[2]),
                        "finite pyramid",
                    )
                    .into());
                }
                if p[2] == int(1) {
                    return Ok(self.components.iter().map(apex_value).collect());
                }
                let abc = reference::collapse(p)?;
                Ok(self.components.iter().map(|c| c.eval(&abc)).collect())
            }
        }
    }

    /// Floating-point values at collapsed (finite) or Cartesian (infinite)
    /// coordinates.
    pub fn eval_f64(&self, p: &[f64; 3]) -> Vec<f64> {
        self.components.iter().map(|c| c.eval_f64(p)).collect()
    }

    /// Trace on a face: restriction (s = 0), covariant tangential
    /// components along the face parameters (s = 1) or outward flux density
    /// (s = 2).
    pub fn trace(&self, face: Face) -> Result<SurfaceField, CalculusError> {
        let map = face.collapsed_map();
        let restrict = |w: &WP| -> WP {
            let n = w.numerator().compose(&map);
            if face.is_base() {
                // on the base the denominator is 1
                WP::poly(w.frame(), n)
            } else {
                WP::new(w.frame(), n, w.weight())
            }
        };
        let (tangents, normal) = match self.frame {
            Frame::Finite => (face.tangents(), face.normal()),
            Frame::Infinite => (face.tangents_infinite(), face.normal_infinite()),
        };
        let r: Vec<WP> = self.components.iter().map(restrict).collect();
        let comps = match self.degree {
            0 => r,
            1 => tangents.iter().map(|t| combine(&r, t, self.frame)).collect(),
            2 => vec![combine(&r, &normal, self.frame)],
            _ => return Err(CalculusError::NoTrace),
        };
        Ok(SurfaceField { face, degree: self.degree, frame: self.frame, components: comps })
    }

    /// Trace on an edge of the finite pyramid: restriction (s = 0) or
    /// tangential component against the unnormalized edge tangent (s = 1).
    /// The result is a function of the edge parameter in the third slot.
    pub fn edge_trace(&self, edge: Edge) -> Result<WP, CalculusError> {
        if self.frame != Frame::Finite {
            return Err(CalculusError::WrongFrame("finite"));
        }
        let map = edge.collapsed_map();
        let r: Vec<WP> = self
            .components
            .iter()
            .map(|w| {
                let n = w.numerator().compose(&map);
                match edge {
                    Edge::Vertical(_) => WP::new(Frame::Finite, n, w.weight()),
                    Edge::Base(_) => WP::poly(Frame::Finite, n),
                }
            })
            .collect();
        match self.degree {
            0 => Ok(r[0].clone()),
            1 => Ok(combine(&r, &edge.tangent(), Frame::Finite)),
            _ => Err(CalculusError::NoTrace),
        }
    }

    /// Integral over the pyramid of the frame (single-component forms).
    pub fn integrate(&self) -> Result<Rational, CalculusError> {
        Ok(self.components[0].integrate()?)
    }
}

fn apex_value(c: &WP) -> Option<Rational> {
    if !c.is_polynomial() {
        return None;
    }
    let top = c.numerator().restrict(2, &int(1));
    if top.terms().any(|(e, _)| e[0] + e[1] > 0) {
        return None;
    }
    Some(top.coeff(&[0, 0, 0]))
}

fn combine(r: &[WP], coeffs: &[i64; 3], frame: Frame) -> WP {
    let mut acc = WP::zero(frame);
    for (w, c) in r.iter().zip(coeffs) {
        if *c != 0 {
            acc = &acc + &w.scale(&int(*c));
        }
    }
    acc
}

fn apply_matrix(m: &[[i64; 3]; 3], v: &[WP]) -> Vec<WP> {
    m.iter().map(|row| combine(v, row, v[0].frame())).collect()
}

impl Add for &FormField {
    type Output = FormField;
    fn add(self, o: &FormField) -> FormField {
        assert_eq!((self.degree, self.frame), (o.degree, o.frame), "incompatible forms");
        let comps = self.components.iter().zip(&o.components).map(|(a, b)| a + b).collect();
        FormField { degree: self.degree, frame: self.frame, components: comps }
    }
}

impl Sub for &FormField {
    type Output = FormField;
    fn sub(self, o: &FormField) -> FormField {
        self + &o.scale(&int(-1))
    }
}

/// Linear combination `sum c_i f_i` of forms of equal degree and frame.
pub fn linear_combination(coeffs: &[Rational], fields: &[&FormField]) -> FormField {
    let mut acc = FormField::zero(fields[0].degree, fields[0].frame);
    for (c, f) in coeffs.iter().zip(fields) {
        if !c.is_zero() {
            acc = &acc + &f.scale(c);
        }
    }
    acc
}

/// Trace of a form on one face, in that face's parameters.
///
/// Finite triangles use `(u, c)` (slots 0 and 2) with `s = u (1 - c)` and
/// `t = c`; infinite triangles use `(s, z)` in slots 0 and 2; the base uses
/// `(s, t)` in slots 0 and 1 in both frames.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SurfaceField {
    pub face: Face,
    pub degree: usize,
    pub frame: Frame,
    pub components: Vec<WP>,
}

impl SurfaceField {
    /// Pullback along the restriction of `phi` to the face.
    pub fn pullback(&self) -> Result<Self, CalculusError> {
        if self.frame != Frame::Finite {
            return Err(CalculusError::WrongFrame("finite"));
        }
        let comps: Vec<WP> = if self.face.is_base() {
            self.components.iter().map(|w| WP::poly(Frame::Infinite, w.numerator().clone())).collect()
        } else {
            let c = &self.components;
            let raw = match self.degree {
                0 => vec![c[0].clone()],
                1 => {
                    let gt = &c[1] - &c[0].mul_poly(&Poly::var(0));
                    vec![c[0].mul_base_pow(1), gt.mul_base_pow(2)]
                }
                _ => vec![c[0].mul_base_pow(3)],
            };
            raw.iter().map(WP::to_infinite).collect()
        };
        Ok(Self { face: self.face, degree: self.degree, frame: Frame::Infinite, components: comps })
    }

    /// Components as polynomials in the face's Cartesian parameters
    /// `(s, t)` (slots 0 and 1), when they are polynomials.
    pub fn to_cartesian(&self) -> Option<Vec<Poly>> {
        assert_eq!(self.frame, Frame::Finite);
        self.components
            .iter()
            .map(|w| {
                if self.face.is_base() {
                    return Some(w.numerator().clone());
                }
                let p = w.to_cartesian_polynomial()?;
                Some(Poly::from_terms(p.terms().map(|(e, c)| ([e[0], e[2], 0], c.clone()))))
            })
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(|c| c.is_zero())
    }
}

/// Integral of a surface trace component against the parameter measure
/// `ds dt` of a finite-pyramid face.
pub fn integrate_face(face: Face, w: &WP) -> Result<Rational, CalculusError> {
    if face.is_base() {
        return Ok(w
            .numerator()
            .terms()
            .map(|(e, c)| c / int(((e[0] + 1) * (e[1] + 1)) as i64))
            .sum());
    }
    // ds dt = (1 - c) du dc
    if w.weight() > 1 {
        return Err(PolyError::Divergent(format!("face integrand with (1-c)^{}", w.weight())).into());
    }
    let m = 1 - w.weight();
    Ok(w
        .numerator()
        .terms()
        .map(|(e, c)| c * crate::ratpoly::beta_moment(e[2], m) / int((e[0] + 1) as i64))
        .sum())
}

/// Integral over `t in [0, 1]` of an edge trace.
pub fn integrate_edge(w: &WP) -> Result<Rational, CalculusError> {
    if w.weight() > 0 {
        return Err(PolyError::Divergent(format!("edge integrand with (1-t)^{}", w.weight())).into());
    }
    Ok(w.numerator().terms().map(|(e, c)| c / int((e[2] + 1) as i64)).sum())
}

/// The matrices `A = |Dphi| Dphi^-1 Dphi^-T` and `B = |Dphi^-1| Dphi^T Dphi`
/// as functions on the infinite pyramid.
pub struct WeightMatrices {
    pub a: [[WP; 3]; 3],
    pub b: [[WP; 3]; 3],
}

pub fn weight_matrices() -> WeightMatrices {
    let f = Frame::Infinite;
    let x = Poly::var(0);
    let y = Poly::var(1);
    let s = f.base();
    let w = |p: Poly, k: u32| WP::new(f, p, k);
    let one = Poly::one();
    let a = [
        [w(&one + &(&x * &x), 2), w(&x * &y, 2), w(&x * &s, 2)],
        [w(&x * &y, 2), w(&one + &(&y * &y), 2), w(&y * &s, 2)],
        [w(&x * &s, 2), w(&y * &s, 2), w(&s * &s, 2)],
    ];
    let s2 = &s * &s;
    let b = [
        [w(s2.clone(), 0), w(Poly::zero(), 0), w(-(&x * &s), 0)],
        [w(Poly::zero(), 0), w(s2.clone(), 0), w(-(&y * &s), 0)],
        [w(-(&x * &s), 0), w(-(&y * &s), 0), w(&(&one + &(&x * &x)) + &(&y * &y), 0)],
    ];
    WeightMatrices { a, b }
}

impl WeightMatrices {
    /// Leading principal minors of both matrices at a point are positive.
    pub fn positive_definite_at(&self, p: &Point) -> bool {
        [&self.a, &self.b].iter().all(|m| {
            let v: Vec<Vec<Rational>> =
                m.iter().map(|row| row.iter().map(|e| e.eval(p).unwrap()).collect()).collect();
            let m1 = v[0][0].clone();
            let m2 = &v[0][0] * &v[1][1] - &v[0][1] * &v[1][0];
            let m3 = reference::det3(&[
                [v[0][0].clone(), v[0][1].clone(), v[0][2].clone()],
                [v[1][0].clone(), v[1][1].clone(), v[1][2].clone()],
                [v[2][0].clone(), v[2][1].clone(), v[2][2].clone()],
            ]);
            [m1, m2, m3].iter().all(|d| *d > Rational::zero())
        })
    }
}

fn quad_form(m: &[[WP; 3]; 3], u: &[WP]) -> WP {
    let mut acc = WP::zero(Frame::Infinite);
    for i in 0..3 {
        for j in 0..3 {
            if !m[i][j].is_zero() {
                acc = &acc + &(&(&u[i] * &m[i][j]) * &u[j]);
            }
        }
    }
    acc
}

/// Squared weighted norm of an infinite-pyramid form.
pub fn weighted_norm(f: &FormField) -> Result<Rational, CalculusError> {
    if f.frame != Frame::Infinite {
        return Err(CalculusError::WrongFrame("infinite"));
    }
    let m = weight_matrices();
    let c = &f.components;
    let integrand = match f.degree {
        0 => {
            let g = f.exterior_derivative()?;
            &(&c[0] * &c[0]).mul_base_pow(-4) + &quad_form(&m.a, &g.components)
        }
        1 => {
            let g = f.exterior_derivative()?;
            &quad_form(&m.a, c) + &quad_form(&m.b, &g.components)
        }
        2 => {
            let g = f.exterior_derivative()?;
            &quad_form(&m.b, c) + &(&g.components[0] * &g.components[0]).mul_base_pow(4)
        }
        _ => (&c[0] * &c[0]).mul_base_pow(4),
    };
    Ok(integrand.integrate()?)
}

/// Squared Sobolev norm (`H^1`, `H(curl)`, `H(div)`, `L^2`) of a
/// finite-pyramid form.
pub fn sobolev_norm(f: &FormField) -> Result<Rational, CalculusError> {
    if f.frame != Frame::Finite {
        return Err(CalculusError::WrongFrame("finite"));
    }
    let mut total = f.dot(f).integrate()?;
    if f.degree < 3 {
        let g = f.exterior_derivative()?;
        total += g.dot(&g).integrate()?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratpoly::rat;

    fn inf(p: Poly, w: u32) -> WP {
        WP::new(Frame::Infinite, p, w)
    }

    fn fin(p: Poly, w: u32) -> WP {
        WP::new(Frame::Finite, p, w)
    }

    fn cart(p: Poly) -> WP {
        WP::from_cartesian_polynomial(&p)
    }

    #[test]
    fn gradient_of_apex_function() {
        for k in 1..5u32 {
            let f = FormField::scalar(0, inf(Poly::mono(0, 0, k), k));
            let g = f.exterior_derivative().unwrap();
            let want = [WP::zero(Frame::Infinite), WP::zero(Frame::Infinite), inf(Poly::mono(0, 0, k - 1).scale(&int(k as i64)), k + 1)];
            assert_eq!(g, FormField::vector(1, want));
        }
    }

    #[test]
    fn divergence_of_lowest_order_flux() {
        let f = FormField::vector(2, [inf(Poly::zero(), 0), inf(Poly::zero(), 0), inf(-Poly::one(), 3)]);
        let d = f.exterior_derivative().unwrap();
        assert_eq!(d.components()[0], inf(Poly::constant(int(3)), 4));
    }

    #[test]
    fn pullback_examples() {
        // monomial of total degree k becomes a weighted monomial
        let p = FormField::scalar(0, cart(Poly::mono(1, 2, 1)));
        assert_eq!(p.pullback().unwrap().components()[0], inf(Poly::mono(1, 2, 1), 4));
        let one = FormField::scalar(3, cart(Poly::one()));
        assert_eq!(one.pullback().unwrap().components()[0], inf(Poly::one(), 4));
        let back = FormField::scalar(0, inf(Poly::mono(0, 0, 3), 3)).inverse_pullback().unwrap();
        assert_eq!(back.components()[0], fin(Poly::mono(0, 0, 3), 0));
        let x = FormField::scalar(0, inf(Poly::mono(1, 0, 0), 0)).inverse_pullback().unwrap();
        assert_eq!(x.components()[0], fin(Poly::mono(1, 0, 0), 0));
        // z becomes c/(1-c)
        assert!(FormField::scalar(0, inf(Poly::mono(0, 0, 1), 0)).inverse_pullback().is_err());
    }

    #[test]
    fn rotation_has_order_four() {
        let f = FormField::vector(
            1,
            [inf(Poly::mono(1, 2, 0), 2), inf(Poly::mono(0, 1, 1), 3), inf(Poly::affine([1, 1, 0, 0]), 2)],
        );
        let g = f.inverse_pullback_unchecked().unwrap();
        let (mut a, mut b) = (f.clone(), g.clone());
        for _ in 0..4 {
            a = a.rotate();
            b = b.rotate();
            // rotating commutes with pulling back
            assert_eq!(b.pullback().unwrap(), a);
        }
        assert_eq!(a, f);
        assert_eq!(b, g);
    }

    #[test]
    fn counterexample_traces() {
        // xi zeta (xi + zeta - 1)(eta + zeta - 1)/(1 - zeta) = a c (a-1)(b-1)(1-c)^2
        let n = &(&(&Poly::mono(1, 0, 1) * &Poly::affine([-1, 1, 0, 0])) * &Poly::affine([-1, 0, 1, 0]))
            * &Frame::Finite.base_pow(2);
        let u = FormField::scalar(0, fin(n, 0));
        let s1 = u.trace(Face::Tri(0)).unwrap().to_cartesian().unwrap();
        // -s t (s + t - 1)
        let want = -(&Poly::mono(1, 1, 0) * &Poly::affine([-1, 1, 1, 0]));
        assert_eq!(s1[0], want);
        for f in [Face::Tri(1), Face::Tri(2), Face::Tri(3), Face::Base] {
            assert!(u.trace(f).unwrap().is_zero());
        }
    }

    #[test]
    fn flux_trace_on_base() {
        let f = FormField::vector(2, [inf(Poly::zero(), 0), inf(Poly::zero(), 0), inf(-Poly::one(), 3)]);
        let g = f.inverse_pullback().unwrap();
        let t = g.trace(Face::Base).unwrap();
        assert_eq!(t.components[0], fin(Poly::one(), 0));
    }

    #[test]
    fn weighted_norm_examples() {
        let one = FormField::scalar(0, inf(Poly::one(), 0));
        assert_eq!(weighted_norm(&one).unwrap(), rat(1, 3));
        assert_eq!(weighted_norm(&FormField::zero(1, Frame::Infinite)).unwrap(), rat(0, 1));
        let xi = FormField::scalar(0, cart(Poly::mono(1, 0, 0)));
        assert_eq!(weighted_norm(&xi.pullback().unwrap()).unwrap(), sobolev_norm(&xi).unwrap());
    }

    #[test]
    fn weight_matrices_are_positive_definite() {
        let m = weight_matrices();
        for p in [[0, 0, 0], [1, 1, 0], [1, 0, 5], [0, 1, 100]] {
            assert!(m.positive_definite_at(&p.map(int)));
        }
    }

    #[test]
    fn apex_values() {
        let apex = reference::vertex(4);
        let z2 = FormField::scalar(0, fin(Poly::mono(0, 0, 2), 0));
        assert_eq!(z2.evaluate(&apex).unwrap(), Some(vec![int(1)]));
        let a = FormField::scalar(0, fin(Poly::mono(1, 0, 0), 0));
        assert_eq!(a.evaluate(&apex).unwrap(), None);
        assert!(a.evaluate(&[int(2), int(0), int(0)]).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_poly(maxdeg: u32) -> impl Strategy<Value = Poly> {
            proptest::collection::vec(((0..=maxdeg, 0..=maxdeg, 0..=maxdeg), -4i64..5), 0..5).prop_map(|ts| {
                Poly::from_terms(ts.into_iter().map(|((i, j, l), c)| ([i, j, l], int(c))))
            })
        }

        fn arb_cart_form(s: usize) -> impl Strategy<Value = FormField> {
            proptest::collection::vec(arb_poly(2), component_count(s))
                .prop_map(move |ps| FormField::from_cartesian(s, &ps).unwrap())
        }

        fn arb_inf_form(s: usize) -> impl Strategy<Value = FormField> {
            proptest::collection::vec((arb_poly(2), 0u32..4), component_count(s)).prop_map(move |ps| {
                FormField::new(s, ps.into_iter().map(|(p, w)| inf(p, w)).collect()).unwrap()
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(30))]

            #[test]
            fn pullback_commutes_with_d(s in 0usize..3, f0 in arb_cart_form(0), f1 in arb_cart_form(1), f2 in arb_cart_form(2)) {
                let f = [f0, f1, f2][s].clone();
                let lhs = f.exterior_derivative().unwrap().pullback().unwrap();
                let rhs = f.pullback().unwrap().exterior_derivative().unwrap();
                prop_assert_eq!(lhs, rhs);
            }

            #[test]
            fn d_squared_vanishes(f in arb_inf_form(0), g in arb_inf_form(1), h in arb_cart_form(1)) {
                prop_assert!(f.exterior_derivative().unwrap().exterior_derivative().unwrap().is_zero());
                prop_assert!(g.exterior_derivative().unwrap().exterior_derivative().unwrap().is_zero());
                prop_assert!(h.exterior_derivative().unwrap().exterior_derivative().unwrap().is_zero());
            }

            #[test]
            fn inverse_pullback_round_trip(f in arb_inf_form(1), g in arb_inf_form(2), s in 0usize..4, h0 in arb_cart_form(0), h1 in arb_cart_form(1), h2 in arb_cart_form(2), h3 in arb_cart_form(3)) {
                prop_assert_eq!(f.inverse_pullback_unchecked().unwrap().pullback().unwrap(), f.clone());
                prop_assert_eq!(g.inverse_pullback_unchecked().unwrap().pullback().unwrap(), g.clone());
                let h = [h0, h1, h2, h3][s].clone();
                prop_assert_eq!(h.pullback().unwrap().inverse_pullback().unwrap(), h);
            }

            #[test]
            fn trace_commutes_with_pullback(s in 0usize..3, face in 0usize..5, f0 in arb_cart_form(0), f1 in arb_cart_form(1), f2 in arb_cart_form(2)) {
                let f = [f0, f1, f2][s].clone();
                let face = reference::FACES[face];
                let lhs = f.trace(face).unwrap().pullback().unwrap();
                let rhs = f.pullback().unwrap().trace(face).unwrap();
                prop_assert_eq!(lhs, rhs);
            }

            #[test]
            fn isometry(s in 0usize..4, f0 in arb_cart_form(0), f1 in arb_cart_form(1), f2 in arb_cart_form(2), f3 in arb_cart_form(3)) {
                let f = [f0, f1, f2, f3][s].clone();
                prop_assert_eq!(weighted_norm(&f.pullback().unwrap()).unwrap(), sobolev_norm(&f).unwrap());
            }

            #[test]
            fn tangential_trace_of_normal_field_vanishes(p in arb_poly(2), q in arb_poly(1)) {
                // gradient of p * eta vanishes tangentially on eta = 0
                let f = FormField::scalar(0, cart(&p * &Poly::mono(0, 1, 0)));
                let g = f.exterior_derivative().unwrap();
                prop_assert!(g.trace(Face::Tri(0)).unwrap().is_zero());
                prop_assert!(g.pullback().unwrap().trace(Face::Tri(0)).unwrap().is_zero());
                // a normal field (0, q, 0) likewise
                let n = FormField::from_cartesian(1, &[Poly::zero(), q, Poly::zero()]).unwrap();
                prop_assert!(n.trace(Face::Tri(0)).unwrap().is_zero());
                prop_assert!(n.pullback().unwrap().trace(Face::Tri(0)).unwrap().is_zero());
            }
        }
    }
}
