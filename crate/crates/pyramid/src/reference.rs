//! Reference geometry: the finite pyramid, the infinite pyramid, the map
//! between them, quarter-turn rotations and the labelled topology.
//!
//! Finite pyramid: `xi, eta, zeta >= 0`, `xi <= 1 - zeta`, `eta <= 1 - zeta`.
//! Infinite pyramid: `x, y in [0, 1]`, `z >= 0`.
//!
//! Labelling convention:
//! vertices `v1..v4` run counterclockwise around the base starting at the
//! origin and `v5` is the apex; base edges `b1 = v1v2`, `b2 = v2v3`,
//! `b3 = v3v4`, `b4 = v1v4`; vertical edges `e_i = v_i v5`; triangular faces
//! `S1: eta = 0`, `S2: xi + zeta = 1`, `S3: eta + zeta = 1`, `S4: xi = 0`;
//! base `B: zeta = 0`. Edge tangents run from the lower to the higher vertex
//! index and face normals point outward.

use std::fmt;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ratpoly::{int, Poly, Rational};

pub type Point = [Rational; 3];
pub type Matrix3 = [[Rational; 3]; 3];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GeometryError {
    #[error("point ({0}) lies outside the {1}")]
    OutsideDomain(String, &'static str),
    #[error("the apex has no image on the infinite pyramid")]
    Apex,
}

fn show(p: &Point) -> String {
    format!("{}, {}, {}", p[0], p[1], p[2])
}

pub fn in_finite_pyramid(p: &Point) -> bool {
    let z = Rational::zero();
    let one = Rational::one();
    p.iter().all(|c| *c >= z) && p[0] <= &one - &p[2] && p[1] <= &one - &p[2]
}

pub fn in_infinite_pyramid(p: &Point) -> bool {
    let z = Rational::zero();
    let one = Rational::one();
    p.iter().all(|c| *c >= z) && p[0] <= one && p[1] <= one
}

/// `(x, y, z) -> (x, y, z) / (1 + z)`.
pub fn phi(p: &Point) -> Result<Point, GeometryError> {
    if !in_infinite_pyramid(p) {
        return Err(GeometryError::OutsideDomain(show(p), "infinite pyramid"));
    }
    let d = Rational::one() + &p[2];
    Ok([&p[0] / &d, &p[1] / &d, &p[2] / &d])
}

pub fn phi_inverse(p: &Point) -> Result<Point, GeometryError> {
    if !in_finite_pyramid(p) {
        return Err(GeometryError::OutsideDomain(show(p), "finite pyramid"));
    }
    let d = Rational::one() - &p[2];
    if d.is_zero() {
        return Err(GeometryError::Apex);
    }
    Ok([&p[0] / &d, &p[1] / &d, &p[2] / &d])
}

/// Collapsed coordinates `(a, b, c)` of a finite-pyramid point below the apex.
pub fn collapse(p: &Point) -> Result<Point, GeometryError> {
    let q = phi_inverse(p)?;
    Ok([q[0].clone(), q[1].clone(), p[2].clone()])
}

/// `(x, y, z) -> (1 - y, x, z)`.
pub fn rotate_infinite(p: &Point) -> Point {
    [Rational::one() - &p[1], p[0].clone(), p[2].clone()]
}

/// `(xi, eta, zeta) -> (1 - eta - zeta, xi, zeta)`.
pub fn rotate_finite(p: &Point) -> Point {
    [Rational::one() - &p[1] - &p[2], p[0].clone(), p[2].clone()]
}

pub fn jacobian_phi(p: &Point) -> Matrix3 {
    let s = Rational::one() + &p[2];
    let f = Rational::one() / (&s * &s);
    let z = Rational::zero();
    [
        [&s * &f, z.clone(), -&p[0] * &f],
        [z.clone(), &s * &f, -&p[1] * &f],
        [z.clone(), z, f.clone()],
    ]
}

pub fn det3(m: &Matrix3) -> Rational {
    &m[0][0] * (&m[1][1] * &m[2][2] - &m[1][2] * &m[2][1])
        - &m[0][1] * (&m[1][0] * &m[2][2] - &m[1][2] * &m[2][0])
        + &m[0][2] * (&m[1][0] * &m[2][1] - &m[1][1] * &m[2][0])
}

/// Linear part of the finite rotation.
pub const ROTATION_FINITE: [[i64; 3]; 3] = [[0, -1, -1], [1, 0, 0], [0, 0, 1]];
/// Linear part of the infinite rotation.
pub const ROTATION_INFINITE: [[i64; 3]; 3] = [[0, -1, 0], [1, 0, 0], [0, 0, 1]];

pub const VERTICES: [[i64; 3]; 5] = [[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0], [0, 0, 1]];

pub fn vertex(i: usize) -> Point {
    VERTICES[i].map(int)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Edge {
    /// `e_{i+1}`: from base vertex `i` to the apex.
    Vertical(usize),
    /// `b_{i+1}`.
    Base(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Face {
    /// `S_{i+1}`.
    Tri(usize),
    Base,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Entity {
    Vertex(usize),
    Edge(Edge),
    Face(Face),
    Volume,
}

pub const EDGES: [Edge; 8] = [
    Edge::Vertical(0),
    Edge::Vertical(1),
    Edge::Vertical(2),
    Edge::Vertical(3),
    Edge::Base(0),
    Edge::Base(1),
    Edge::Base(2),
    Edge::Base(3),
];

pub const FACES: [Face; 5] = [Face::Tri(0), Face::Tri(1), Face::Tri(2), Face::Tri(3), Face::Base];

impl fmt::Display for Entity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Entity::Vertex(i) => write!(f, "v{}", i + 1),
            Entity::Edge(Edge::Vertical(i)) => write!(f, "e{}", i + 1),
            Entity::Edge(Edge::Base(i)) => write!(f, "b{}", i + 1),
            Entity::Face(Face::Tri(i)) => write!(f, "S{}", i + 1),
            Entity::Face(Face::Base) => write!(f, "B"),
            Entity::Volume => write!(f, "volume"),
        }
    }
}

impl std::str::FromStr for Entity {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s == "B" {
            return Ok(Entity::Face(Face::Base));
        }
        if s == "volume" {
            return Ok(Entity::Volume);
        }
        let (tag, idx) = s.split_at(1);
        let i: usize = idx.parse().map_err(|_| format!("bad entity label {s}"))?;
        let bound = if tag == "v" { 5 } else { 4 };
        if i == 0 || i > bound {
            return Err(format!("bad entity label {s}"));
        }
        let i = i - 1;
        match tag {
            "v" => Ok(Entity::Vertex(i)),
            "e" => Ok(Entity::Edge(Edge::Vertical(i))),
            "b" => Ok(Entity::Edge(Edge::Base(i))),
            "S" => Ok(Entity::Face(Face::Tri(i))),
            _ => Err(format!("bad entity label {s}")),
        }
    }
}

/// `(1 - y, x)` applied to a pair of polynomials.
fn quarter_turn(p: [Poly; 2]) -> [Poly; 2] {
    let [a, b] = p;
    (&Poly::one() - &b, a).into()
}

impl Edge {
    pub fn vertices(self) -> (usize, usize) {
        match self {
            Edge::Vertical(i) => (i, 4),
            Edge::Base(3) => (0, 3),
            Edge::Base(i) => (i, i + 1),
        }
    }

    /// Unnormalized tangent `v_end - v_start` in Cartesian coordinates of
    /// the finite pyramid.
    pub fn tangent(self) -> [i64; 3] {
        let (a, b) = self.vertices();
        [0, 1, 2].map(|v| VERTICES[b][v] - VERTICES[a][v])
    }

    /// Collapsed coordinates along the edge as polynomials in the edge
    /// parameter `t`, which occupies the third variable slot.
    pub fn collapsed_map(self) -> [Poly; 3] {
        let t = Poly::var(2);
        match self {
            Edge::Vertical(i) => {
                let v = VERTICES[i];
                [Poly::constant(int(v[0])), Poly::constant(int(v[1])), t]
            }
            Edge::Base(_) => {
                let (a, b) = self.vertices();
                let (p, q) = (VERTICES[a], VERTICES[b]);
                let lin = |v: usize| &Poly::constant(int(p[v])) + &t.scale(&int(q[v] - p[v]));
                [lin(0), lin(1), Poly::zero()]
            }
        }
    }

    /// Image under one quarter turn, with the orientation sign relative to
    /// the target edge's own tangent.
    pub fn rotated(self) -> (Edge, i64) {
        match self {
            Edge::Vertical(i) => (Edge::Vertical((i + 1) % 4), 1),
            Edge::Base(2) => (Edge::Base(3), -1),
            Edge::Base(3) => (Edge::Base(0), -1),
            Edge::Base(i) => (Edge::Base(i + 1), 1),
        }
    }
}

impl Face {
    pub fn is_base(self) -> bool {
        matches!(self, Face::Base)
    }

    /// Collapsed coordinates of the face as polynomials in the face
    /// parameters. Triangles use `(u, c)` in slots 0 and 2 with
    /// `s = u (1 - c)`, `t = c`; the base uses `(s, t)` in slots 0 and 1.
    /// The same substitution parametrizes the matching infinite-pyramid face
    /// by `(x, z)`-type coordinates.
    pub fn collapsed_map(self) -> [Poly; 3] {
        match self {
            Face::Base => [Poly::var(0), Poly::var(1), Poly::zero()],
            Face::Tri(i) => {
                let mut ab = [Poly::var(0), Poly::zero()];
                for _ in 0..i {
                    ab = quarter_turn(ab);
                }
                let [a, b] = ab;
                [a, b, Poly::var(2)]
            }
        }
    }

    /// Finite-pyramid tangents `d/ds`, `d/dt` of the face parametrization.
    pub fn tangents(self) -> [[i64; 3]; 2] {
        match self {
            Face::Base => [[1, 0, 0], [0, 1, 0]],
            Face::Tri(i) => {
                let mut ts = [[1, 0, 0], [0, 0, 1]];
                for _ in 0..i {
                    ts = ts.map(|t| mat_vec(&ROTATION_FINITE, t));
                }
                ts
            }
        }
    }

    /// Tangents of the matching infinite-pyramid face parametrization.
    pub fn tangents_infinite(self) -> [[i64; 3]; 2] {
        match self {
            Face::Base => [[1, 0, 0], [0, 1, 0]],
            Face::Tri(i) => {
                let mut ts = [[1, 0, 0], [0, 0, 1]];
                for _ in 0..i {
                    ts = ts.map(|t| mat_vec(&ROTATION_INFINITE, t));
                }
                ts
            }
        }
    }

    /// Outward normal scaled so that flux integrals are taken against the
    /// parameter measure: `tau_s x tau_t` on triangles, `(0,0,-1)` on the base.
    pub fn normal(self) -> [i64; 3] {
        match self {
            Face::Base => [0, 0, -1],
            Face::Tri(_) => {
                let [a, b] = self.tangents();
                cross(a, b)
            }
        }
    }

    pub fn normal_infinite(self) -> [i64; 3] {
        match self {
            Face::Base => [0, 0, -1],
            Face::Tri(_) => {
                let [a, b] = self.tangents_infinite();
                cross(a, b)
            }
        }
    }

    /// Finite-pyramid point of the face for parameters `(s, t)`.
    pub fn point(self, s: &Rational, t: &Rational) -> Point {
        match self {
            Face::Base => [s.clone(), t.clone(), Rational::zero()],
            Face::Tri(i) => {
                let mut p = [s.clone(), Rational::zero(), t.clone()];
                for _ in 0..i {
                    p = rotate_finite(&p);
                }
                p
            }
        }
    }

    /// Coefficients `(n, d)` of the defining plane `n . p = d`.
    pub fn plane(self) -> ([i64; 3], i64) {
        match self {
            Face::Base => ([0, 0, 1], 0),
            Face::Tri(0) => ([0, 1, 0], 0),
            Face::Tri(1) => ([1, 0, 1], 1),
            Face::Tri(2) => ([0, 1, 1], 1),
            Face::Tri(_) => ([1, 0, 0], 0),
        }
    }

    pub fn edges(self) -> Vec<Edge> {
        match self {
            Face::Base => (0..4).map(Edge::Base).collect(),
            Face::Tri(i) => {
                vec![Edge::Base(i), Edge::Vertical(i), Edge::Vertical((i + 1) % 4)]
            }
        }
    }

    pub fn vertices(self) -> Vec<usize> {
        match self {
            Face::Base => vec![0, 1, 2, 3],
            Face::Tri(i) => vec![i, (i + 1) % 4, 4],
        }
    }

    pub fn rotated(self) -> Face {
        match self {
            Face::Base => Face::Base,
            Face::Tri(i) => Face::Tri((i + 1) % 4),
        }
    }
}

impl Entity {
    /// Image under one quarter turn, with an orientation sign for edges.
    pub fn rotated(self) -> (Entity, i64) {
        match self {
            Entity::Vertex(4) => (Entity::Vertex(4), 1),
            Entity::Vertex(i) => (Entity::Vertex((i + 1) % 4), 1),
            Entity::Edge(e) => {
                let (e, s) = e.rotated();
                (Entity::Edge(e), s)
            }
            Entity::Face(f) => (Entity::Face(f.rotated()), 1),
            Entity::Volume => (Entity::Volume, 1),
        }
    }

    /// Whether `self` lies in the closure of `other`.
    pub fn is_subentity_of(self, other: Entity) -> bool {
        match (self, other) {
            (a, b) if a == b => true,
            (_, Entity::Volume) => true,
            (Entity::Vertex(v), Entity::Edge(e)) => {
                let (a, b) = e.vertices();
                v == a || v == b
            }
            (Entity::Vertex(v), Entity::Face(f)) => f.vertices().contains(&v),
            (Entity::Edge(e), Entity::Face(f)) => f.edges().contains(&e),
            _ => false,
        }
    }

    /// 0 for vertices up to 3 for the volume.
    pub fn dim(self) -> usize {
        match self {
            Entity::Vertex(_) => 0,
            Entity::Edge(_) => 1,
            Entity::Face(_) => 2,
            Entity::Volume => 3,
        }
    }
}

pub fn mat_vec(m: &[[i64; 3]; 3], v: [i64; 3]) -> [i64; 3] {
    [0, 1, 2].map(|i| (0..3).map(|j| m[i][j] * v[j]).sum())
}

pub fn cross(a: [i64; 3], b: [i64; 3]) -> [i64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// All labelled entities in entity-major order.
pub fn all_entities() -> Vec<Entity> {
    let mut v: Vec<Entity> = (0..5).map(Entity::Vertex).collect();
    v.extend(EDGES.iter().map(|e| Entity::Edge(*e)));
    v.extend(FACES.iter().map(|f| Entity::Face(*f)));
    v.push(Entity::Volume);
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratpoly::rat;

    fn pt(a: (i64, i64), b: (i64, i64), c: (i64, i64)) -> Point {
        [rat(a.0, a.1), rat(b.0, b.1), rat(c.0, c.1)]
    }

    #[test]
    fn phi_examples() {
        assert_eq!(phi(&pt((0, 1), (0, 1), (0, 1))).unwrap(), pt((0, 1), (0, 1), (0, 1)));
        assert_eq!(phi(&pt((1, 1), (1, 1), (1, 1))).unwrap(), pt((1, 2), (1, 2), (1, 2)));
        assert_eq!(phi(&pt((1, 1), (0, 1), (0, 1))).unwrap(), pt((1, 1), (0, 1), (0, 1)));
        assert_eq!(phi_inverse(&pt((1, 2), (1, 2), (1, 2))).unwrap(), pt((1, 1), (1, 1), (1, 1)));
        assert_eq!(phi_inverse(&pt((1, 4), (0, 1), (1, 2))).unwrap(), pt((1, 2), (0, 1), (1, 1)));
        assert_eq!(phi_inverse(&vertex(4)), Err(GeometryError::Apex));
        assert!(phi(&pt((2, 1), (0, 1), (0, 1))).is_err());
        assert!(phi_inverse(&pt((0, 1), (0, 1), (3, 2))).is_err());
    }

    #[test]
    fn jacobian_examples() {
        let j = jacobian_phi(&pt((0, 1), (0, 1), (0, 1)));
        for (i, row) in j.iter().enumerate() {
            for (k, e) in row.iter().enumerate() {
                assert_eq!(*e, int((i == k) as i64));
            }
        }
        let j = jacobian_phi(&pt((1, 1), (1, 1), (1, 1)));
        let want = [[2, 0, -1], [0, 2, -1], [0, 0, 1]];
        for i in 0..3 {
            for k in 0..3 {
                assert_eq!(j[i][k], rat(want[i][k], 4));
            }
        }
        assert_eq!(det3(&jacobian_phi(&pt((1, 3), (2, 3), (1, 1)))), rat(1, 16));
    }

    #[test]
    fn rotation_examples() {
        assert_eq!(rotate_infinite(&pt((0, 1), (0, 1), (0, 1))), pt((1, 1), (0, 1), (0, 1)));
        let p = pt((1, 3), (1, 5), (0, 1));
        assert_eq!(rotate_finite(&p), pt((4, 5), (1, 3), (0, 1)));
    }

    #[test]
    fn faces_lie_on_their_planes() {
        for f in FACES {
            let (n, d) = f.plane();
            for (s, t) in [(rat(1, 3), rat(1, 2)), (rat(0, 1), rat(1, 1)), (rat(1, 1), rat(0, 1))] {
                if !f.is_base() && &s + &t > int(1) {
                    continue;
                }
                let p = f.point(&s, &t);
                assert!(in_finite_pyramid(&p));
                let val: Rational = (0..3).map(|v| &p[v] * int(n[v])).sum();
                assert_eq!(val, int(d), "{f:?}");
            }
            // outward: moving along the normal leaves the pyramid
            let nrm = f.normal();
            let c = f.point(&rat(1, 4), &rat(1, 4));
            let out: Point = [0, 1, 2].map(|v| &c[v] + rat(nrm[v], 100));
            assert!(!in_finite_pyramid(&out), "{f:?}");
        }
    }

    #[test]
    fn face_maps_agree_with_parametrization() {
        // collapsed map of (u, c) must reproduce the Cartesian point for s = u(1-c)
        for f in FACES {
            let m = f.collapsed_map();
            let (u, c) = (rat(2, 7), rat(1, 3));
            let args = if f.is_base() { [u.clone(), c.clone(), int(0)] } else { [u.clone(), int(0), c.clone()] };
            let abc: Point = [0, 1, 2].map(|v| m[v].eval(&args));
            let s = if f.is_base() { u.clone() } else { &u * (int(1) - &c) };
            let p = f.point(&s, &c);
            let back = if f.is_base() { [p[0].clone(), p[1].clone(), int(0)] } else { collapse(&p).unwrap() };
            assert_eq!(abc, back, "{f:?}");
        }
    }

    #[test]
    fn rotation_permutes_entities() {
        assert_eq!(Entity::Face(Face::Tri(3)).rotated().0, Entity::Face(Face::Tri(0)));
        assert_eq!(Entity::Face(Face::Base).rotated().0, Entity::Face(Face::Base));
        assert_eq!(Entity::Vertex(4).rotated().0, Entity::Vertex(4));
        for e in EDGES {
            let (r, sgn) = e.rotated();
            let (a, b) = e.vertices();
            let img = |i: usize| if i == 4 { 4 } else { (i + 1) % 4 };
            let (ra, rb) = r.vertices();
            if sgn == 1 {
                assert_eq!((img(a), img(b)), (ra, rb));
            } else {
                assert_eq!((img(a), img(b)), (rb, ra));
            }
        }
        for label in ["v1", "e3", "b4", "S2", "B", "volume"] {
            let e: Entity = label.parse().unwrap();
            assert_eq!(e.to_string(), label);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_inf() -> impl Strategy<Value = Point> {
            (0i64..=12, 0i64..=12, 0i64..40).prop_map(|(x, y, z)| [rat(x, 12), rat(y, 12), rat(z, 7)])
        }

        proptest! {
            #[test]
            fn phi_round_trip(p in arb_inf()) {
                let q = phi(&p).unwrap();
                prop_assert!(in_finite_pyramid(&q));
                prop_assert_eq!(phi_inverse(&q).unwrap(), p.clone());
                prop_assert_eq!(det3(&jacobian_phi(&p)), Rational::one() / num_traits::pow(int(1) + &p[2], 4));
            }

            #[test]
            fn rotations_conjugate(p in arb_inf()) {
                prop_assert_eq!(phi(&rotate_infinite(&p)).unwrap(), rotate_finite(&phi(&p).unwrap()));
                let mut r = p.clone();
                for _ in 0..4 { r = rotate_infinite(&r); }
                prop_assert_eq!(r, p);
            }

            #[test]
            fn infinite_faces_map_to_finite_planes(s in 0i64..=10, z in 0i64..30, i in 0usize..4) {
                let f = Face::Tri(i);
                let m = f.collapsed_map();
                let args = [rat(s, 10), int(0), int(z)];
                let p: Point = [0, 1, 2].map(|v| m[v].eval(&args));
                prop_assert!(in_infinite_pyramid(&p));
                let q = phi(&p).unwrap();
                let (n, d) = f.plane();
                let val: Rational = (0..3).map(|v| &q[v] * int(n[v])).sum();
                prop_assert_eq!(val, int(d));
            }
        }
    }
}
