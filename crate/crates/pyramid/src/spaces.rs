//! Shape functions of the four pyramid spaces, built on the infinite pyramid
//! from one representative per entity orbit and carried to the other
//! entities by quarter turns. Each function is also stored as its inverse
//! pullback on the finite pyramid.
//!
//! Also here: bubble families, exact membership tests for the spaces, and
//! the face trace spaces used to check conformity.

use std::collections::BTreeMap;

use serde_json::{json, Value};
use thiserror::Error;

use crate::calculus::{CalculusError, FormField};
use crate::linalg::RatMatrix;
use crate::ratpoly::{int, Exponent, Frame, PolyError, Poly, WeightedPolynomial as WP, WeightedSpace};
use crate::reference::{self, Entity, Face};

#[derive(Debug, Error)]
pub enum SpaceError {
    #[error("form degree must be 0..=3, got {0}")]
    Degree(usize),
    #[error("order must be at least 1")]
    Order,
    #[error("shape function {0} on {1}: {2}")]
    Shape(String, Entity, CalculusError),
    #[error("malformed basis file: {0}")]
    Malformed(String),
    #[error(transparent)]
    Calculus(#[from] CalculusError),
    #[error(transparent)]
    Poly(#[from] PolyError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShapeFunction {
    pub entity: Entity,
    pub family: String,
    pub index: Vec<u32>,
    pub infinite: FormField,
    pub finite: FormField,
}

impl ShapeFunction {
    pub fn label(&self) -> String {
        let idx: Vec<String> = self.index.iter().map(u32::to_string).collect();
        format!("{}:{}[{}]", self.entity, self.family, idx.join(","))
    }
}

/// Ordered basis: entity-major, then family, then multi-index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BasisSet {
    pub s: usize,
    pub k: u32,
    pub functions: Vec<ShapeFunction>,
}

impl BasisSet {
    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn counts(&self) -> BTreeMap<Entity, usize> {
        let mut m = BTreeMap::new();
        for f in &self.functions {
            *m.entry(f.entity).or_insert(0) += 1;
        }
        m
    }

    /// Index ranges of each entity's functions.
    pub fn blocks(&self) -> Vec<(Entity, std::ops::Range<usize>)> {
        let mut out: Vec<(Entity, std::ops::Range<usize>)> = Vec::new();
        for (i, f) in self.functions.iter().enumerate() {
            match out.last_mut() {
                Some((e, r)) if *e == f.entity => r.end = i + 1,
                _ => out.push((f.entity, i..i + 1)),
            }
        }
        out
    }

    pub fn infinite_fields(&self) -> Vec<&FormField> {
        self.functions.iter().map(|f| &f.infinite).collect()
    }

    pub fn finite_fields(&self) -> Vec<&FormField> {
        self.functions.iter().map(|f| &f.finite).collect()
    }

    /// Exact rank of the infinite-pyramid functions.
    pub fn rank(&self) -> usize {
        field_matrix(&self.infinite_fields()).rank()
    }

    /// A quarter turn maps the functions of each entity into the span of the
    /// functions of the rotated entity.
    pub fn is_rotation_invariant(&self) -> bool {
        let mut by_entity: BTreeMap<Entity, Vec<&FormField>> = BTreeMap::new();
        for f in &self.functions {
            by_entity.entry(f.entity).or_default().push(&f.infinite);
        }
        self.functions.iter().all(|f| {
            let target = &by_entity[&f.entity.rotated().0];
            in_span(&f.infinite.rotate(), target)
        })
    }

    /// Copy with the last function replaced by the first one.
    pub fn corrupted(&self) -> Self {
        let mut b = self.clone();
        if let (Some(first), Some(last)) = (self.functions.first().cloned(), b.functions.last_mut()) {
            last.infinite = first.infinite;
            last.finite = first.finite;
        }
        b
    }

    pub fn to_json(&self) -> Value {
        let fs: Vec<Value> = self
            .functions
            .iter()
            .map(|f| {
                json!({
                    "entity": f.entity.to_string(),
                    "family": f.family,
                    "index": f.index,
                    "infinite": f.infinite.components().iter().map(WP::to_json).collect::<Vec<_>>(),
                    "finite": f.finite.components().iter().map(WP::to_json).collect::<Vec<_>>(),
                })
            })
            .collect();
        json!({ "form": self.s, "order": self.k, "dimension": self.len(), "functions": fs })
    }

    pub fn from_json(v: &Value) -> Result<Self, SpaceError> {
        let bad = |m: &str| SpaceError::Malformed(m.to_string());
        let s = v["form"].as_u64().ok_or_else(|| bad("form"))? as usize;
        let k = v["order"].as_u64().ok_or_else(|| bad("order"))? as u32;
        let arr = v["functions"].as_array().ok_or_else(|| bad("functions"))?;
        let mut functions = Vec::with_capacity(arr.len());
        for f in arr {
            let entity: Entity =
                f["entity"].as_str().ok_or_else(|| bad("entity"))?.parse().map_err(|e: String| bad(&e))?;
            let family = f["family"].as_str().ok_or_else(|| bad("family"))?.to_string();
            let index = f["index"]
                .as_array()
                .ok_or_else(|| bad("index"))?
                .iter()
                .map(|i| i.as_u64().map(|i| i as u32).ok_or_else(|| bad("index")))
                .collect::<Result<Vec<_>, _>>()?;
            let field = |key: &str| -> Result<FormField, SpaceError> {
                let comps = f[key]
                    .as_array()
                    .ok_or_else(|| bad(key))?
                    .iter()
                    .map(WP::from_json)
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(FormField::new(s, comps)?)
            };
            functions.push(ShapeFunction { entity, family, index, infinite: field("infinite")?, finite: field("finite")? });
        }
        Ok(Self { s, k, functions })
    }
}

/// Closed forms for `s = 0, 3`; for `s = 1, 2` no closed form is assumed and
/// the per-entity counts are summed.
pub fn dimension_formula(s: usize, k: u32) -> usize {
    let kk = k as usize;
    match s {
        0 => kk * kk * kk + 3 * kk + 1,
        3 => kk * kk * kk,
        _ => count_total(s, k),
    }
}

/// Sum of [`entity_count`] over all entities.
pub fn count_total(s: usize, k: u32) -> usize {
    reference::all_entities().into_iter().map(|e| entity_count(s, k, e)).sum()
}

/// Number of generated shape functions (equal to their rank, see tests).
pub fn dimension(s: usize, k: u32) -> Result<usize, SpaceError> {
    Ok(basis(s, k)?.len())
}

/// Number of functions attached to one entity of each kind.
pub fn entity_count(s: usize, k: u32, entity: Entity) -> usize {
    let k = k as usize;
    let km = k.saturating_sub(1);
    match (s, entity) {
        (0, Entity::Vertex(_)) => 1,
        (0, Entity::Edge(_)) => km,
        (0, Entity::Face(Face::Tri(_))) => km * k.saturating_sub(2) / 2,
        (0, Entity::Face(Face::Base)) => km * km,
        (0, Entity::Volume) => km * km * km,
        (1, Entity::Edge(_)) => k,
        (1, Entity::Face(Face::Tri(_))) => k * km,
        (1, Entity::Face(Face::Base)) => 2 * k * km,
        (1, Entity::Volume) => 3 * k * km * km,
        (2, Entity::Face(Face::Tri(_))) => k * (k + 1) / 2,
        (2, Entity::Face(Face::Base)) => k * k,
        (2, Entity::Volume) => 3 * k * k * km,
        (3, Entity::Volume) => k * k * k,
        _ => 0,
    }
}

fn m(a: i64, b: i64, c: i64) -> Poly {
    Poly::mono(a as u32, b as u32, c as u32)
}

fn lin(c: [i64; 4]) -> Poly {
    Poly::affine(c)
}

/// `(1 + z)^n`.
fn zp(n: i64) -> Poly {
    Frame::Infinite.base_pow(n as u32)
}

fn wp(n: Poly, w: i64) -> WP {
    WP::new(Frame::Infinite, n, w as u32)
}

fn field3(s: usize, p: [Poly; 3], w: i64) -> FormField {
    FormField::vector(s, p.map(|n| wp(n, w)))
}

fn scalar(s: usize, p: Poly, w: i64) -> FormField {
    FormField::scalar(s, wp(p, w))
}

/// `x(1-x)`, `y(1-y)` and their product.
fn bx() -> Poly {
    &Poly::var(0) * &lin([1, -1, 0, 0])
}

fn by() -> Poly {
    &Poly::var(1) * &lin([1, 0, -1, 0])
}

fn one_minus_xy() -> Poly {
    &lin([1, -1, 0, 0]) * &lin([1, 0, -1, 0])
}

fn range(n: i64) -> std::ops::Range<i64> {
    0..n.max(0)
}

type Row = (Entity, &'static str, Vec<u32>, FormField);

fn idx(v: &[i64]) -> Vec<u32> {
    v.iter().map(|&i| i as u32).collect()
}

fn representatives(s: usize, k: i64) -> Vec<Row> {
    let e1 = Entity::Edge(crate::reference::Edge::Vertical(0));
    let b1 = Entity::Edge(crate::reference::Edge::Base(0));
    let s1 = Entity::Face(Face::Tri(0));
    let base = Entity::Face(Face::Base);
    let vol = Entity::Volume;
    let mut rows: Vec<Row> = Vec::new();
    let q = one_minus_xy();
    match s {
        0 => {
            rows.push((Entity::Vertex(0), "vertex", vec![], scalar(0, q.clone(), k)));
            rows.push((Entity::Vertex(4), "apex", vec![], scalar(0, m(0, 0, k), k)));
            for a in 1..k {
                rows.push((e1, "edge", idx(&[a]), scalar(0, &q * &m(0, 0, a), k)));
            }
            for a in 1..k {
                rows.push((b1, "edge", idx(&[a]), scalar(0, &q * &m(a, 0, 0), k)));
            }
            for a in 1..k {
                for b in 1..k - a {
                    rows.push((s1, "face", idx(&[a, b]), scalar(0, &q * &m(a, 0, b), k)));
                }
            }
            for a in 1..k {
                for b in 1..k {
                    rows.push((base, "face", idx(&[a, b]), scalar(0, &q * &m(a, b, 0), k)));
                }
            }
            for f in bubble_rows(k) {
                rows.push(f);
            }
        }
        1 => {
            let w = k + 1;
            let z = Poly::zero;
            for c in range(k - 1) {
                rows.push((e1, "edge", idx(&[c]), field3(1, [z(), z(), &q * &zp(c)], w)));
            }
            let zk = m(0, 0, k - 1);
            let apex = [
                &(&zk * &lin([1, 0, -1, 0])) * &m(0, 0, 1),
                &(&zk * &lin([1, -1, 0, 0])) * &m(0, 0, 1),
                &zk * &q,
            ];
            rows.push((e1, "edge-apex", vec![], field3(1, apex, w)));
            let one_y = lin([1, 0, -1, 0]);
            for c in range(k) {
                rows.push((b1, "edge", idx(&[c]), field3(1, [&m(c, 0, 0) * &one_y, z(), z()], w)));
            }
            for a in range(k - 1) {
                for c in range(k - 1 - a) {
                    let p = &(&m(a, 0, 1) * &one_y) * &zp(c);
                    rows.push((s1, "face-a", idx(&[a, c]), field3(1, [p, z(), z()], w)));
                }
            }
            for a in range(k - 2) {
                for c in range(k - 2 - a) {
                    let p = &(&bx() * &one_y) * &m(a, 0, c);
                    rows.push((s1, "face-b", idx(&[a, c]), field3(1, [z(), z(), p], w)));
                }
            }
            for a in range(k - 1) {
                let p = &(&q * &m(a, 0, 0)) * &zp(k - a - 2);
                let f = [&p * &m(0, 0, 1), z(), &p * &m(1, 0, 0).scale(&int(-1))];
                rows.push((s1, "face-c", idx(&[a]), field3(1, f, w)));
            }
            for a in range(k) {
                for b in range(k - 1) {
                    rows.push((base, "face-x", idx(&[a, b]), field3(1, [&by() * &m(a, b, 0), z(), z()], w)));
                }
            }
            for a in range(k - 1) {
                for b in range(k) {
                    rows.push((base, "face-y", idx(&[a, b]), field3(1, [z(), &bx() * &m(a, b, 0), z()], w)));
                }
            }
            for (fam, i, f) in zero_trace_1(k) {
                rows.push((vol, fam, i, f));
            }
        }
        2 => {
            let w = k + 2;
            let z = Poly::zero;
            let one_y = lin([1, 0, -1, 0]);
            for a in range(k) {
                for b in range(k - a) {
                    let top = if b == k - 1 { m(0, 0, k).scale(&int(-1)) } else { z() };
                    let f = [z(), &one_y * &m(a, 0, b).scale(&int(2)), top];
                    rows.push((s1, "face", idx(&[a, b]), field3(2, f, w)));
                }
            }
            for a in range(k) {
                for b in range(k) {
                    rows.push((base, "face", idx(&[a, b]), field3(2, [z(), z(), m(a, b, 0)], w)));
                }
            }
            for (fam, i, f) in zero_trace_2(k) {
                rows.push((vol, fam, i, f));
            }
        }
        _ => {
            for a in range(k) {
                for b in range(k) {
                    for c in range(k) {
                        rows.push((vol, "volume", idx(&[a, b, c]), scalar(3, m(a, b, c), k + 3)));
                    }
                }
            }
        }
    }
    rows
}

fn bubble_rows(k: i64) -> Vec<Row> {
    let b = &(&bx() * &by()) * &Poly::var(2);
    let mut rows = Vec::new();
    for a in range(k - 1) {
        for bb in range(k - 1) {
            for c in range(k - 1) {
                rows.push((Entity::Volume, "bubble", idx(&[a, bb, c]), scalar(0, &b * &m(a, bb, c), k)));
            }
        }
    }
    rows
}

type Fam = (&'static str, Vec<u32>, FormField);

fn q12(k: i64) -> Vec<Fam> {
    let w = k + 1;
    let z = Poly::zero;
    let mut out = Vec::new();
    let yz = &by() * &Poly::var(2);
    let xz = &bx() * &Poly::var(2);
    for a in range(k) {
        for b in range(k - 1) {
            for c in range(k - 1) {
                out.push(("x", idx(&[a, b, c]), field3(1, [&yz * &m(a, b, c), z(), z()], w)));
            }
        }
    }
    for a in range(k - 1) {
        for b in range(k) {
            for c in range(k - 1) {
                out.push(("y", idx(&[a, b, c]), field3(1, [z(), &xz * &m(a, b, c), z()], w)));
            }
        }
    }
    out
}

/// 1-forms with vanishing tangential trace on every face.
fn zero_trace_1(k: i64) -> Vec<Fam> {
    let w = k + 1;
    let z = Poly::zero;
    let mut out = q12(k);
    let bxy = &bx() * &by();
    for a in range(k - 1) {
        for b in range(k - 1) {
            for c in range(k - 1) {
                out.push(("z", idx(&[a, b, c]), field3(1, [z(), z(), &bxy * &m(a, b, c)], w)));
            }
        }
    }
    let zk = m(0, 0, k - 1);
    for a in range(k - 1) {
        for b in range(k - 1) {
            let r = &bxy * &m(a, b, 0);
            let f = [
                &(&r.derivative(0) * &zk) * &Poly::var(2),
                &(&r.derivative(1) * &zk) * &Poly::var(2),
                (&r * &zk).scale(&int(-1)),
            ];
            out.push(("apex", idx(&[a, b]), field3(1, f, w)));
        }
    }
    out
}

/// 2-forms with vanishing normal trace on every face.
fn zero_trace_2(k: i64) -> Vec<Fam> {
    let w = k + 2;
    let z = Poly::zero;
    let zk = m(0, 0, k - 1);
    let zp1 = zp(1);
    let mut out = Vec::new();
    for a in range(k - 1) {
        for b in range(k) {
            let t = &bx() * &m(a, b, 0);
            let f = [&t.scale(&int(2)) * &zk, z(), &(&t.derivative(0) * &zp1) * &zk];
            out.push(("apex-x", idx(&[a, b]), field3(2, f, w)));
        }
    }
    for a in range(k) {
        for b in range(k - 1) {
            let s = &by() * &m(a, b, 0);
            let f = [z(), &s.scale(&int(2)) * &zk, &(&s.derivative(1) * &zp1) * &zk];
            out.push(("apex-y", idx(&[a, b]), field3(2, f, w)));
        }
    }
    for a in range(k - 1) {
        for b in range(k) {
            for c in range(k - 1) {
                out.push(("x", idx(&[a, b, c]), field3(2, [&bx() * &m(a, b, c), z(), z()], w)));
            }
        }
    }
    for a in range(k) {
        for b in range(k - 1) {
            for c in range(k - 1) {
                out.push(("y", idx(&[a, b, c]), field3(2, [z(), &by() * &m(a, b, c), z()], w)));
            }
        }
    }
    out.extend(z_row(k));
    out
}

fn z_row(k: i64) -> Vec<Fam> {
    let mut out = Vec::new();
    for a in range(k) {
        for b in range(k) {
            for c in range(k - 1) {
                let f = [Poly::zero(), Poly::zero(), m(a, b, c + 1)];
                out.push(("z", idx(&[a, b, c]), field3(2, f, k + 2)));
            }
        }
    }
    out
}

fn finish(s: usize, k: u32, rows: Vec<Row>) -> Result<BasisSet, SpaceError> {
    let mut functions = Vec::with_capacity(rows.len());
    for (entity, family, index, infinite) in rows {
        let finite = infinite.inverse_pullback().map_err(|e| SpaceError::Shape(family.to_string(), entity, e))?;
        functions.push(ShapeFunction { entity, family: family.to_string(), index, infinite, finite });
    }
    functions.sort_by_key(|f| f.entity);
    Ok(BasisSet { s, k, functions })
}

fn check(s: usize, k: u32) -> Result<(), SpaceError> {
    if s > 3 {
        return Err(SpaceError::Degree(s));
    }
    if k == 0 {
        return Err(SpaceError::Order);
    }
    Ok(())
}

/// Full shape-function basis of the space of form degree `s` and order `k`.
pub fn basis(s: usize, k: u32) -> Result<BasisSet, SpaceError> {
    check(s, k)?;
    let mut rows = Vec::new();
    for (entity, family, index, field) in representatives(s, k as i64) {
        let orbit = match entity {
            Entity::Vertex(4) | Entity::Volume | Entity::Face(Face::Base) => 1,
            _ => 4,
        };
        let (mut e, mut f, mut sign) = (entity, field, 1i64);
        for r in 0..orbit {
            if r > 0 {
                let (ne, sg) = e.rotated();
                e = ne;
                sign *= sg;
                f = f.rotate();
            }
            let g = if s == 1 && sign < 0 { f.scale(&int(-1)) } else { f.clone() };
            rows.push((e, family, index.clone(), g));
        }
    }
    finish(s, k, rows)
}

/// Scalar bubbles: vanish on the whole boundary.
pub fn bubble_basis(k: u32) -> Result<BasisSet, SpaceError> {
    check(0, k)?;
    finish(0, k, bubble_rows(k as i64))
}

/// 1-forms with zero tangential trace whose curls span the curls of all
/// such forms.
pub fn curl_bubble_basis(k: u32) -> Result<BasisSet, SpaceError> {
    check(1, k)?;
    let ki = k as i64;
    let mut fams = q12(ki);
    let bxy = &bx() * &by();
    for a in range(ki - 1) {
        for b in range(ki - 1) {
            let f = [Poly::zero(), Poly::zero(), &bxy * &m(a, b, 0)];
            fams.push(("z", idx(&[a, b]), field3(1, f, ki + 1)));
        }
    }
    finish(1, k, fams.into_iter().map(|(f, i, x)| (Entity::Volume, f, i, x)).collect())
}

/// 2-forms with zero normal trace whose divergences span those of all such
/// forms.
pub fn div_bubble_basis(k: u32) -> Result<BasisSet, SpaceError> {
    check(2, k)?;
    let ki = k as i64;
    let w = ki + 2;
    let z = Poly::zero;
    let zk = m(0, 0, ki - 1);
    let zp1 = zp(1);
    let mut fams: Vec<Fam> = Vec::new();
    let bxy = &bx() * &by();
    for a in range(ki - 1) {
        for b in range(ki - 1) {
            let r = &bxy * &m(a, b, 0);
            let f = [&r.derivative(1) * &zk, &r.derivative(0) * &zk, &(&r.derivative(0).derivative(1) * &zp1) * &zk];
            fams.push(("apex-xy", idx(&[a, b]), field3(2, f, w)));
        }
    }
    for a in range(ki - 1) {
        let t = &bx() * &m(a, 0, 0);
        let f = [&t.scale(&int(2)) * &zk, z(), &(&t.derivative(0) * &zp1) * &zk];
        fams.push(("apex-x", idx(&[a]), field3(2, f, w)));
    }
    for b in range(ki - 1) {
        let s = &by() * &m(0, b, 0);
        let f = [z(), &s.scale(&int(2)) * &zk, &(&s.derivative(1) * &zp1) * &zk];
        fams.push(("apex-y", idx(&[b]), field3(2, f, w)));
    }
    fams.extend(z_row(ki));
    finish(2, k, fams.into_iter().map(|(f, i, x)| (Entity::Volume, f, i, x)).collect())
}

/// Fields with vanishing trace: scalar bubbles, or the volume functions of
/// the 1- and 2-form bases.
pub fn zero_trace_basis(s: usize, k: u32) -> Result<BasisSet, SpaceError> {
    check(s, k)?;
    let rows = match s {
        0 => bubble_rows(k as i64),
        1 => zero_trace_1(k as i64).into_iter().map(|(f, i, x)| (Entity::Volume, f, i, x)).collect(),
        2 => zero_trace_2(k as i64).into_iter().map(|(f, i, x)| (Entity::Volume, f, i, x)).collect(),
        _ => return Ok(BasisSet { s, k, functions: vec![] }),
    };
    finish(s, k, rows)
}

/// Coefficient matrix (one row per entry) of vectors of weighted
/// polynomials of one frame, with each component brought to a common weight.
pub fn coefficient_matrix(rows: &[Vec<WP>]) -> RatMatrix {
    let n = rows.first().map_or(0, Vec::len);
    let weights: Vec<u32> = (0..n).map(|i| rows.iter().map(|r| r[i].weight()).max().unwrap_or(0)).collect();
    let nums: Vec<Vec<Poly>> = rows
        .iter()
        .map(|r| (0..n).map(|i| r[i].numerator_at_weight(weights[i]).expect("raising weight")).collect())
        .collect();
    poly_matrix(&nums)
}

/// Coefficient matrix of vectors of polynomials.
pub fn poly_matrix(rows: &[Vec<Poly>]) -> RatMatrix {
    let mut keys: BTreeMap<(usize, Exponent), usize> = BTreeMap::new();
    for r in rows {
        for (i, p) in r.iter().enumerate() {
            for (e, _) in p.terms() {
                let next = keys.len();
                keys.entry((i, *e)).or_insert(next);
            }
        }
    }
    let mut mat = RatMatrix::zeros(rows.len(), keys.len());
    for (ri, r) in rows.iter().enumerate() {
        for (i, p) in r.iter().enumerate() {
            for (e, c) in p.terms() {
                mat.set(ri, keys[&(i, *e)], c.clone());
            }
        }
    }
    mat
}

pub fn field_matrix(fields: &[&FormField]) -> RatMatrix {
    let rows: Vec<Vec<WP>> = fields.iter().map(|f| f.components().to_vec()).collect();
    coefficient_matrix(&rows)
}

/// Whether `f` is a linear combination of `span`.
pub fn in_span(f: &FormField, span: &[&FormField]) -> bool {
    let mut all = span.to_vec();
    all.push(f);
    field_matrix(&all).rank() == field_matrix(span).rank()
}

fn wp_rows_in_span(v: &[WP], gens: &[Vec<WP>]) -> bool {
    let mut all = gens.to_vec();
    all.push(v.to_vec());
    coefficient_matrix(&all).rank() == coefficient_matrix(gens).rank()
}

fn poly_rows_in_span(v: &[Poly], gens: &[Vec<Poly>]) -> bool {
    let mut all = gens.to_vec();
    all.push(v.to_vec());
    poly_matrix(&all).rank() == poly_matrix(gens).rank()
}

fn tensor(w: i64, l: i64, m: i64, n: i64) -> Option<WeightedSpace> {
    if l < 0 || m < 0 || n < 0 {
        return None;
    }
    Some(WeightedSpace::Tensor { w: w as u32, degrees: [l as u32, m as u32, n as u32] })
}

fn all_in(f: &FormField, spaces: &[Option<WeightedSpace>]) -> bool {
    f.components().iter().zip(spaces).all(|(c, sp)| match sp {
        Some(sp) => c.is_in(*sp),
        None => c.is_zero(),
    })
}

/// Trace space generators on a triangular face of the infinite pyramid, in
/// the face parameters `(u, z)` (slots 0 and 2).
fn infinite_triangle_trace_space(s: usize, k: i64) -> Vec<Vec<WP>> {
    let mut gens = Vec::new();
    match s {
        0 => {
            for a in 0..=k {
                for b in 0..=k - a {
                    gens.push(vec![wp(m(a, 0, b), k)]);
                }
            }
        }
        1 => {
            let w = k + 1;
            for a in range(k) {
                for b in range(k - a) {
                    gens.push(vec![wp(m(a, 0, b), w), WP::zero(Frame::Infinite)]);
                    gens.push(vec![WP::zero(Frame::Infinite), wp(m(a, 0, b), w)]);
                }
            }
            for a in range(k) {
                let p = &m(a, 0, 0) * &zp(k - 1 - a);
                gens.push(vec![wp(&p * &zp(1), w), wp((&p * &Poly::var(0)).scale(&int(-1)), w)]);
            }
        }
        _ => {
            for a in range(k) {
                for b in range(k - a) {
                    gens.push(vec![wp(m(a, 0, b), k + 2)]);
                }
            }
        }
    }
    gens
}

/// Exact test for membership of an infinite-pyramid field in the space of
/// form degree `s` and order `k`: the field and its exterior derivative lie
/// in the right weighted tensor spaces and every triangular-face trace lies
/// in the face trace space.
pub fn membership_in_space(f: &FormField, s: usize, k: u32) -> bool {
    if f.frame() != Frame::Infinite || f.degree() != s || k == 0 {
        return false;
    }
    let k = k as i64;
    let (own, deriv): (Vec<Option<WeightedSpace>>, Vec<Option<WeightedSpace>>) = match s {
        0 => (
            vec![tensor(k, k, k, k)],
            vec![tensor(k, k - 1, k, k - 1), tensor(k, k, k - 1, k - 1), tensor(k + 1, k, k, k - 1)],
        ),
        1 => (
            vec![tensor(k + 1, k - 1, k, k), tensor(k + 1, k, k - 1, k), tensor(k + 1, k, k, k - 1)],
            vec![
                tensor(k + 2, k, k - 1, k - 1),
                tensor(k + 2, k - 1, k, k - 1),
                tensor(k + 2, k - 1, k - 1, k),
            ],
        ),
        2 => (
            vec![tensor(k + 2, k, k - 1, k - 1), tensor(k + 2, k - 1, k, k - 1), tensor(k + 2, k - 1, k - 1, k)],
            vec![tensor(k + 3, k - 1, k - 1, k - 1)],
        ),
        _ => (vec![tensor(k + 3, k - 1, k - 1, k - 1)], vec![]),
    };
    if !all_in(f, &own) {
        return false;
    }
    if s == 3 {
        return true;
    }
    match f.exterior_derivative() {
        Ok(d) if all_in(&d, &deriv) => {}
        _ => return false,
    }
    let gens = infinite_triangle_trace_space(s, k);
    (0..4).all(|i| match f.trace(Face::Tri(i)) {
        Ok(t) => wp_rows_in_span(&t.components, &gens),
        Err(_) => false,
    })
}

/// Generators of the trace space of a finite-pyramid face, as polynomials in
/// the face's Cartesian parameters `(s, t)` (slots 0 and 1). For `s = 1` the
/// two entries are the covariant components along the two parameters.
pub fn finite_trace_space(s: usize, k: u32, face: Face) -> Vec<Vec<Poly>> {
    let k = k as i64;
    let p = |a: i64, b: i64| m(a, b, 0);
    let zero = Poly::zero;
    let mut gens = Vec::new();
    let tri = !face.is_base();
    match s {
        0 => {
            for a in 0..=k {
                for b in 0..=k {
                    if !tri || a + b <= k {
                        gens.push(vec![p(a, b)]);
                    }
                }
            }
        }
        1 if tri => {
            for a in range(k) {
                for b in range(k - a) {
                    gens.push(vec![p(a, b), zero()]);
                    gens.push(vec![zero(), p(a, b)]);
                }
            }
            for a in range(k) {
                let h = p(a, k - 1 - a);
                gens.push(vec![&h * &Poly::var(1), (&h * &Poly::var(0)).scale(&int(-1))]);
            }
        }
        1 => {
            for a in range(k) {
                for b in 0..=k {
                    gens.push(vec![p(a, b), zero()]);
                    gens.push(vec![zero(), p(b, a)]);
                }
            }
        }
        _ => {
            for a in range(k) {
                for b in range(k) {
                    if !tri || a + b < k {
                        gens.push(vec![p(a, b)]);
                    }
                }
            }
        }
    }
    gens
}

/// Whether `v` lies in the span of `gens` (polynomial vectors).
pub fn poly_vector_in_span(v: &[Poly], gens: &[Vec<Poly>]) -> bool {
    poly_rows_in_span(v, gens)
}

/// Rank of a list of polynomial vectors.
pub fn poly_rank(rows: &[Vec<Poly>]) -> usize {
    if rows.is_empty() {
        return 0;
    }
    poly_matrix(rows).rank()
}

/// Dimension of the finite-pyramid face trace space.
pub fn finite_trace_dimension(s: usize, k: u32, face: Face) -> usize {
    let k = k as usize;
    match (s, face.is_base()) {
        (0, false) => (k + 1) * (k + 2) / 2,
        (0, true) => (k + 1) * (k + 1),
        (1, false) => k * (k + 2),
        (1, true) => 2 * k * (k + 1),
        (_, false) => k * (k + 1) / 2,
        (_, true) => k * k,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference::{all_entities, FACES};

    #[test]
    fn dimensions_match_formulas() {
        for s in 0..4 {
            for k in 1..=3 {
                let b = basis(s, k).unwrap();
                assert_eq!(b.len(), dimension_formula(s, k), "s={s} k={k}");
                assert_eq!(b.rank(), b.len(), "s={s} k={k}");
            }
        }
    }

    #[test]
    fn entity_counts() {
        for s in 0..4 {
            for k in 1..=3 {
                let counts = basis(s, k).unwrap().counts();
                for e in all_entities() {
                    assert_eq!(counts.get(&e).copied().unwrap_or(0), entity_count(s, k, e), "s={s} k={k} {e}");
                }
            }
        }
    }

    #[test]
    fn members_of_their_spaces() {
        for s in 0..4 {
            for k in 1..=3 {
                for f in &basis(s, k).unwrap().functions {
                    assert!(membership_in_space(&f.infinite, s, k), "s={s} k={k} {}", f.label());
                }
            }
        }
    }

    #[test]
    fn rejects_non_members() {
        // x y^k z^k / (1+z)^k: the x-derivative has too high a z-degree
        let f = scalar(0, m(1, 2, 2), 2);
        assert!(!membership_in_space(&f, 0, 2));
        let f = scalar(0, m(0, 0, 2), 2);
        assert!(membership_in_space(&f, 0, 2));
        // constant 1-form in z direction has the wrong decay
        assert!(!membership_in_space(&field3(1, [Poly::zero(), Poly::zero(), Poly::one()], 0), 1, 2));
    }

    #[test]
    fn rotation_invariant() {
        for s in 0..4 {
            for k in 1..=3 {
                assert!(basis(s, k).unwrap().is_rotation_invariant(), "s={s} k={k}");
            }
        }
    }

    #[test]
    fn bubble_families() {
        for k in 1..=3u32 {
            let km = (k - 1) as usize;
            assert_eq!(bubble_basis(k).unwrap().len(), km * km * km);
            let cb = curl_bubble_basis(k).unwrap();
            assert_eq!(cb.len(), (2 * k as usize + 1) * km * km);
            assert_eq!(cb.rank(), cb.len());
            let db = div_bubble_basis(k).unwrap();
            assert_eq!(db.len(), (k * k * k - 1) as usize);
            assert_eq!(db.rank(), db.len());
            for f in cb.functions.iter().chain(&zero_trace_basis(1, k).unwrap().functions) {
                for face in FACES {
                    assert!(f.infinite.trace(face).unwrap().is_zero());
                }
            }
            for f in db.functions.iter().chain(&zero_trace_basis(2, k).unwrap().functions) {
                for face in FACES {
                    assert!(f.infinite.trace(face).unwrap().is_zero());
                }
                assert!(membership_in_space(&f.infinite, 2, k));
            }
        }
    }

    #[test]
    fn finite_traces_lie_in_trace_spaces() {
        for s in 0..3 {
            for k in 1..=2 {
                let b = basis(s, k).unwrap();
                for face in FACES {
                    let gens = finite_trace_space(s, k, face);
                    assert_eq!(poly_rank(&gens), finite_trace_dimension(s, k, face));
                    let traces: Vec<Vec<Poly>> = b
                        .functions
                        .iter()
                        .map(|f| f.finite.trace(face).unwrap().to_cartesian().unwrap())
                        .collect();
                    let mut all = gens.clone();
                    all.extend(traces.iter().cloned());
                    assert_eq!(poly_rank(&all), gens.len(), "s={s} k={k} {face:?}");
                    assert_eq!(poly_rank(&traces), gens.len(), "s={s} k={k} {face:?}");
                }
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let b = basis(1, 2).unwrap();
        let back = BasisSet::from_json(&b.to_json()).unwrap();
        assert_eq!(b, back);
    }

    #[test]
    fn corrupted_basis_loses_rank() {
        let b = basis(2, 2).unwrap().corrupted();
        assert_eq!(b.rank(), b.len() - 1);
    }
}
