//! Degrees of freedom: point values, edge and face moments against
//! monomials in the entity parameters, and volume pairings against
//! derivatives of bubble fields. Exact evaluation on `FormField`s, numeric
//! evaluation on smooth callables, and the DOF-by-basis matrix.
//!
//! Edge and face integrals use the parameter measure (`dt`, `ds dt`).

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;
use std::sync::OnceLock;

use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use serde_json::{json, Value};
use thiserror::Error;

use crate::calculus::{integrate_edge, integrate_face, CalculusError, FormField, SurfaceField};
use crate::linalg::{LinalgError, RatMatrix};
use crate::ratpoly::{int, rational_to_string, Frame, Poly, Rational, WeightedPolynomial as WP};
use crate::reference::{vertex, Edge, Entity, Face, EDGES, FACES};
use crate::spaces::{self, BasisSet, SpaceError};

pub use crate::quadrature::{build_quadrature, Quadrature};

#[derive(Debug, Error)]
pub enum DofError {
    #[error("a {0}-form was given to a degree-of-freedom set for {1}-forms")]
    KindMismatch(usize, usize),
    #[error("expected a field on the finite pyramid")]
    WrongFrame,
    #[error("the field has no point value at {0}")]
    NoPointValue(Entity),
    #[error("DOFs and shape functions do not pair up: {0}")]
    Dimension(String),
    #[error(transparent)]
    Calculus(#[from] CalculusError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DofKind {
    VertexEval,
    EdgeMoment,
    TriFaceMoment,
    BaseFaceMoment,
    /// Pairing with the gradient of a scalar bubble.
    VolumeGradProj,
    /// Pairing with the curl of a curl-bubble.
    VolumeCurlProj,
    /// Pairing with the divergence of a div-bubble.
    VolumeDivProj,
    MeanValue,
}

impl fmt::Display for DofKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DofKind::VertexEval => "value",
            DofKind::EdgeMoment => "edge",
            DofKind::TriFaceMoment => "tri-face",
            DofKind::BaseFaceMoment => "base-face",
            DofKind::VolumeGradProj => "grad",
            DofKind::VolumeCurlProj => "curl",
            DofKind::VolumeDivProj => "div",
            DofKind::MeanValue => "mean",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TestFunction {
    None,
    /// `t^j` along the edge.
    EdgePower(u32),
    /// `s^i t^j` on the face parameters, against trace component
    /// `component` (the covariant component along `s` or `t` for 1-forms).
    FaceMonomial { component: usize, exponents: [u32; 2] },
    /// Index into the set's partner fields.
    Partner(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DofFunctional {
    pub s: usize,
    pub k: u32,
    pub kind: DofKind,
    pub entity: Entity,
    pub test: TestFunction,
    /// Volume pairings: apply to `du` rather than `u`.
    pub derivative: bool,
}

impl DofFunctional {
    pub fn label(&self) -> String {
        let t = match &self.test {
            TestFunction::None => String::new(),
            TestFunction::EdgePower(j) => format!(":t^{j}"),
            TestFunction::FaceMonomial { component, exponents: [i, j] } => {
                format!(":c{component}:s^{i}t^{j}")
            }
            TestFunction::Partner(p) => format!(":{p}"),
        };
        format!("{}:{}{}", self.entity, self.kind, t)
    }
}

/// Ordered DOFs of one space with the fields the volume pairings use.
#[derive(Clone, Debug)]
pub struct DofSet {
    pub s: usize,
    pub k: u32,
    pub dofs: Vec<DofFunctional>,
    /// Finite-pyramid test fields of the volume pairings.
    pub partners: Vec<FormField>,
}

impl DofSet {
    pub fn len(&self) -> usize {
        self.dofs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dofs.is_empty()
    }

    pub fn counts(&self) -> BTreeMap<Entity, usize> {
        let mut m = BTreeMap::new();
        for d in &self.dofs {
            *m.entry(d.entity).or_insert(0) += 1;
        }
        m
    }

    pub fn blocks(&self) -> Vec<(Entity, Range<usize>)> {
        let mut out: Vec<(Entity, Range<usize>)> = Vec::new();
        for (i, d) in self.dofs.iter().enumerate() {
            match out.last_mut() {
                Some((e, r)) if *e == d.entity => r.end = i + 1,
                _ => out.push((d.entity, i..i + 1)),
            }
        }
        out
    }

    fn needs_derivative(&self) -> bool {
        self.dofs.iter().any(|d| d.derivative)
    }

    /// Exact values of all DOFs on a finite-pyramid field.
    pub fn apply_exact(&self, u: &FormField) -> Result<Vec<Rational>, DofError> {
        if u.degree() != self.s {
            return Err(DofError::KindMismatch(u.degree(), self.s));
        }
        if u.frame() != Frame::Finite {
            return Err(DofError::WrongFrame);
        }
        let du = if self.needs_derivative() { Some(u.exterior_derivative()?) } else { None };
        let mut edges: BTreeMap<Edge, WP> = BTreeMap::new();
        let mut faces: BTreeMap<Face, SurfaceField> = BTreeMap::new();
        let mut out = Vec::with_capacity(self.dofs.len());
        for d in &self.dofs {
            let v = match (&d.test, d.entity) {
                (TestFunction::None, Entity::Vertex(i)) => u
                    .evaluate(&vertex(i))?
                    .and_then(|v| v.into_iter().next())
                    .ok_or(DofError::NoPointValue(d.entity))?,
                (TestFunction::EdgePower(j), Entity::Edge(e)) => {
                    let tr = match edges.entry(e) {
                        std::collections::btree_map::Entry::Occupied(o) => o.into_mut(),
                        std::collections::btree_map::Entry::Vacant(v) => v.insert(u.edge_trace(e)?),
                    };
                    let w = tr.mul_poly(&Poly::mono(0, 0, *j));
                    integrate_edge(&w)?
                }
                (TestFunction::FaceMonomial { component, exponents }, Entity::Face(f)) => {
                    let tr = match faces.entry(f) {
                        std::collections::btree_map::Entry::Occupied(o) => o.into_mut(),
                        std::collections::btree_map::Entry::Vacant(v) => v.insert(u.trace(f)?),
                    };
                    let w = &tr.components[*component] * &face_monomial(f, *exponents);
                    integrate_face(f, &w)?
                }
                (TestFunction::Partner(p), Entity::Volume) => {
                    let src = if d.derivative { du.as_ref().expect("derivative") } else { u };
                    src.dot(&self.partners[*p]).integrate().map_err(CalculusError::from)?
                }
                _ => unreachable!("malformed DOF {}", d.label()),
            };
            out.push(v);
        }
        Ok(out)
    }

    /// Exact value of one DOF.
    pub fn apply_dof(&self, i: usize, u: &FormField) -> Result<Rational, DofError> {
        let one = DofSet { s: self.s, k: self.k, dofs: vec![self.dofs[i].clone()], partners: self.partners.clone() };
        Ok(one.apply_exact(u)?.remove(0))
    }
}

/// `s^i t^j` on a face, in the face's trace parametrization.
fn face_monomial(f: Face, [i, j]: [u32; 2]) -> WP {
    if f.is_base() {
        WP::new(Frame::Finite, Poly::mono(i, j, 0), 0)
    } else {
        // s = u (1 - c), t = c
        WP::new(Frame::Finite, Poly::mono(i, 0, j), 0).mul_base_pow(i as i32)
    }
}

fn pairs_total(n: i64) -> Vec<[u32; 2]> {
    let mut v = Vec::new();
    for i in 0..=n {
        for j in 0..=n - i {
            v.push([i as u32, j as u32]);
        }
    }
    v
}

fn pairs_box(n: i64, m: i64) -> Vec<[u32; 2]> {
    let mut v = Vec::new();
    for i in 0..=n {
        for j in 0..=m {
            v.push([i as u32, j as u32]);
        }
    }
    v
}

/// The DOF set of form degree `s` and order `k`, entity-major.
pub fn dof_set(s: usize, k: u32) -> Result<DofSet, DofError> {
    if s > 3 {
        return Err(SpaceError::Degree(s).into());
    }
    if k == 0 {
        return Err(SpaceError::Order.into());
    }
    let ki = k as i64;
    let mut dofs = Vec::new();
    let mut partners = Vec::new();
    let mk = |kind, entity, test, derivative| DofFunctional { s, k, kind, entity, test, derivative };
    if s == 0 {
        for i in 0..5 {
            dofs.push(mk(DofKind::VertexEval, Entity::Vertex(i), TestFunction::None, false));
        }
    }
    if s <= 1 {
        let top = if s == 0 { ki - 2 } else { ki - 1 };
        for e in EDGES {
            for j in 0..=top {
                dofs.push(mk(DofKind::EdgeMoment, Entity::Edge(e), TestFunction::EdgePower(j as u32), false));
            }
        }
    }
    if s <= 2 {
        for f in FACES {
            let kind = if f.is_base() { DofKind::BaseFaceMoment } else { DofKind::TriFaceMoment };
            let tests: Vec<(usize, [u32; 2])> = match (s, f.is_base()) {
                (0, false) => pairs_total(ki - 3).into_iter().map(|e| (0, e)).collect(),
                (0, true) => pairs_box(ki - 2, ki - 2).into_iter().map(|e| (0, e)).collect(),
                (1, false) => {
                    let p = pairs_total(ki - 2);
                    p.iter().map(|e| (0, *e)).chain(p.iter().map(|e| (1, *e))).collect()
                }
                (1, true) => pairs_box(ki - 1, ki - 2)
                    .into_iter()
                    .map(|e| (0, e))
                    .chain(pairs_box(ki - 2, ki - 1).into_iter().map(|e| (1, e)))
                    .collect(),
                (_, false) => pairs_total(ki - 1).into_iter().map(|e| (0, e)).collect(),
                (_, true) => pairs_box(ki - 1, ki - 1).into_iter().map(|e| (0, e)).collect(),
            };
            for (component, exponents) in tests {
                dofs.push(mk(kind, Entity::Face(f), TestFunction::FaceMonomial { component, exponents }, false));
            }
        }
    }
    let mut volume = |family: &BasisSet, kind: DofKind, derivative: bool, dofs: &mut Vec<DofFunctional>| -> Result<(), DofError> {
        for f in &family.functions {
            partners.push(f.finite.exterior_derivative()?);
            dofs.push(mk(kind, Entity::Volume, TestFunction::Partner(partners.len() - 1), derivative));
        }
        Ok(())
    };
    match s {
        0 => volume(&spaces::bubble_basis(k)?, DofKind::VolumeGradProj, true, &mut dofs)?,
        1 => {
            volume(&spaces::bubble_basis(k)?, DofKind::VolumeGradProj, false, &mut dofs)?;
            volume(&spaces::curl_bubble_basis(k)?, DofKind::VolumeCurlProj, true, &mut dofs)?;
        }
        2 => {
            volume(&spaces::curl_bubble_basis(k)?, DofKind::VolumeCurlProj, false, &mut dofs)?;
            volume(&spaces::div_bubble_basis(k)?, DofKind::VolumeDivProj, true, &mut dofs)?;
        }
        _ => {
            volume(&spaces::div_bubble_basis(k)?, DofKind::VolumeDivProj, false, &mut dofs)?;
            partners.push(FormField::scalar(3, WP::constant(Frame::Finite, int(1))));
            dofs.push(mk(DofKind::MeanValue, Entity::Volume, TestFunction::Partner(partners.len() - 1), false));
        }
    }
    Ok(DofSet { s, k, dofs, partners })
}

/// A field on the finite pyramid given by point evaluation, with its
/// exterior derivative supplied by the caller.
pub trait SmoothField: Sync {
    fn degree(&self) -> usize;
    /// Cartesian components at a Cartesian point of the closed pyramid.
    fn value(&self, p: [f64; 3]) -> Vec<f64>;
    fn derivative(&self, p: [f64; 3]) -> Vec<f64>;
}

type PointFn = Box<dyn Fn([f64; 3]) -> Vec<f64> + Send + Sync>;

/// Closure-backed smooth field.
pub struct CallableField {
    pub degree: usize,
    pub value: PointFn,
    pub derivative: PointFn,
}

impl SmoothField for CallableField {
    fn degree(&self) -> usize {
        self.degree
    }
    fn value(&self, p: [f64; 3]) -> Vec<f64> {
        (self.value)(p)
    }
    fn derivative(&self, p: [f64; 3]) -> Vec<f64> {
        (self.derivative)(p)
    }
}

/// An exact field evaluated in floating point.
pub struct ExactField {
    field: FormField,
    d: Option<FormField>,
}

impl ExactField {
    pub fn new(field: &FormField) -> Result<Self, DofError> {
        if field.frame() != Frame::Finite {
            return Err(DofError::WrongFrame);
        }
        let d = if field.degree() < 3 { Some(field.exterior_derivative()?) } else { None };
        Ok(Self { field: field.clone(), d })
    }

    fn eval(f: &FormField, p: [f64; 3]) -> Vec<f64> {
        if p[2] >= 1.0 {
            let apex = vertex(4);
            return match f.evaluate(&apex) {
                Ok(Some(v)) => v.iter().map(|q| q.to_f64().unwrap_or(f64::NAN)).collect(),
                _ => vec![f64::NAN; f.components().len()],
            };
        }
        let m = 1.0 - p[2];
        f.eval_f64(&[p[0] / m, p[1] / m, p[2]])
    }
}

impl SmoothField for ExactField {
    fn degree(&self) -> usize {
        self.field.degree()
    }
    fn value(&self, p: [f64; 3]) -> Vec<f64> {
        Self::eval(&self.field, p)
    }
    fn derivative(&self, p: [f64; 3]) -> Vec<f64> {
        match &self.d {
            Some(d) => Self::eval(d, p),
            None => vec![],
        }
    }
}

fn dot(a: &[f64], b: &[i64; 3]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * *y as f64).sum()
}

fn to_f64_point(p: &crate::reference::Point) -> [f64; 3] {
    [0, 1, 2].map(|i| p[i].to_f64().unwrap_or(f64::NAN))
}

/// DOF evaluation by quadrature.
pub struct NumericDofs<'a> {
    set: &'a DofSet,
    quad: Quadrature,
    /// Partner values at the volume points, `[partner][point][component]`.
    partner_values: Vec<Vec<Vec<f64>>>,
}

impl<'a> NumericDofs<'a> {
    pub fn new(set: &'a DofSet, n: usize) -> Self {
        let quad = build_quadrature(n);
        let partner_values = set
            .partners
            .par_iter()
            .map(|g| quad.points.iter().map(|p| g.eval_f64(p)).collect())
            .collect();
        Self { set, quad, partner_values }
    }

    pub fn quadrature(&self) -> &Quadrature {
        &self.quad
    }

    pub fn apply(&self, u: &dyn SmoothField) -> Result<Vec<f64>, DofError> {
        let s = self.set.s;
        if u.degree() != s {
            return Err(DofError::KindMismatch(u.degree(), s));
        }
        let (lx, lw) = &self.quad.line;
        let volume_points: Vec<[f64; 3]> = self.quad.points.iter().map(Quadrature::cartesian).collect();
        let mut vals: Option<Vec<Vec<f64>>> = None;
        let mut dvals: Option<Vec<Vec<f64>>> = None;
        let mut out = Vec::with_capacity(self.set.dofs.len());
        for d in &self.set.dofs {
            let v = match (&d.test, d.entity) {
                (TestFunction::None, Entity::Vertex(i)) => u.value(to_f64_point(&vertex(i)))[0],
                (TestFunction::EdgePower(j), Entity::Edge(e)) => {
                    let (a, b) = e.vertices();
                    let (pa, pb) = (to_f64_point(&vertex(a)), to_f64_point(&vertex(b)));
                    let tan = e.tangent();
                    lx.iter()
                        .zip(lw)
                        .map(|(t, w)| {
                            let p = [0, 1, 2].map(|i| pa[i] + t * (pb[i] - pa[i]));
                            let val = u.value(p);
                            let tr = if s == 0 { val[0] } else { dot(&val, &tan) };
                            w * tr * t.powi(*j as i32)
                        })
                        .sum()
                }
                (TestFunction::FaceMonomial { component, exponents: [i, j] }, Entity::Face(f)) => {
                    let origin = to_f64_point(&f.point(&Rational::zero(), &Rational::zero()));
                    let [ts, tt] = f.tangents();
                    let dir = match s {
                        0 => None,
                        1 => Some(if *component == 0 { ts } else { tt }),
                        _ => Some(f.normal()),
                    };
                    let mut acc = 0.0;
                    for (x, wx) in lx.iter().zip(lw) {
                        for (y, wy) in lx.iter().zip(lw) {
                            // triangles: s = x (1 - y), t = y with ds dt = (1 - y) dx dy
                            let (ps, pt, jac) = if f.is_base() { (*x, *y, 1.0) } else { (x * (1.0 - y), *y, 1.0 - y) };
                            let p = [0, 1, 2].map(|c| origin[c] + ps * ts[c] as f64 + pt * tt[c] as f64);
                            let val = u.value(p);
                            let tr = match dir {
                                None => val[0],
                                Some(n) => dot(&val, &n),
                            };
                            acc += wx * wy * jac * tr * ps.powi(*i as i32) * pt.powi(*j as i32);
                        }
                    }
                    acc
                }
                (TestFunction::Partner(pi), Entity::Volume) => {
                    let src = if d.derivative {
                        dvals.get_or_insert_with(|| volume_points.iter().map(|p| u.derivative(*p)).collect())
                    } else {
                        vals.get_or_insert_with(|| volume_points.iter().map(|p| u.value(*p)).collect())
                    };
                    let g = &self.partner_values[*pi];
                    self.quad
                        .weights
                        .iter()
                        .enumerate()
                        .map(|(q, w)| w * src[q].iter().zip(&g[q]).map(|(a, b)| a * b).sum::<f64>())
                        .sum()
                }
                _ => unreachable!("malformed DOF {}", d.label()),
            };
            out.push(v);
        }
        Ok(out)
    }
}

/// DOF-by-basis matrix with entries `m_i(phi_j)`.
#[derive(Debug)]
pub struct Vandermonde {
    pub s: usize,
    pub k: u32,
    pub matrix: RatMatrix,
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    /// Shared entity blocks: `(entity, rows, columns)`.
    pub blocks: Vec<Block>,
    inverses: OnceLock<Result<Vec<RatMatrix>, LinalgError>>,
}

/// Pairs the entity blocks of a DOF set and a basis.
/// Entity with its DOF rows and basis columns.
pub type Block = (Entity, Range<usize>, Range<usize>);

fn shared_blocks(dofs: &DofSet, basis: &BasisSet) -> Result<Vec<Block>, DofError> {
    let rb = dofs.blocks();
    let cb = basis.blocks();
    if rb.len() != cb.len() {
        return Err(DofError::Dimension(format!("{} DOF entities, {} basis entities", rb.len(), cb.len())));
    }
    rb.into_iter()
        .zip(cb)
        .map(|((e, r), (f, c))| {
            if e != f || r.len() != c.len() {
                Err(DofError::Dimension(format!("{e}: {} DOFs, {f}: {} functions", r.len(), c.len())))
            } else {
                Ok((e, r, c))
            }
        })
        .collect()
}

impl Vandermonde {
    pub fn new(dofs: &DofSet, basis: &BasisSet) -> Result<Self, DofError> {
        if dofs.s != basis.s || dofs.len() != basis.len() {
            return Err(DofError::Dimension(format!("{} DOFs, {} functions", dofs.len(), basis.len())));
        }
        let blocks = shared_blocks(dofs, basis)?;
        let cols: Vec<Vec<Rational>> =
            basis.functions.par_iter().map(|f| dofs.apply_exact(&f.finite)).collect::<Result<_, _>>()?;
        Ok(Self {
            s: dofs.s,
            k: dofs.k,
            matrix: RatMatrix::from_columns(cols),
            row_labels: dofs.dofs.iter().map(DofFunctional::label).collect(),
            col_labels: basis.functions.iter().map(|f| f.label()).collect(),
            blocks,
            inverses: OnceLock::new(),
        })
    }

    pub fn size(&self) -> usize {
        self.matrix.rows()
    }

    /// Every entry pairing a DOF of entity `E` with a shape function of
    /// entity `F` vanishes unless `F` lies in the closure of `E`.
    pub fn respects_closure(&self) -> bool {
        self.blocks.iter().all(|(e, rows, _)| {
            self.blocks.iter().all(|(f, _, cols)| {
                f.is_subentity_of(*e) || rows.clone().all(|i| cols.clone().all(|j| self.matrix.get(i, j).is_zero()))
            })
        })
    }

    /// All entries above the diagonal blocks vanish.
    pub fn is_block_lower_triangular(&self) -> bool {
        self.blocks.iter().enumerate().all(|(bi, (_, rows, _))| {
            self.blocks[bi + 1..]
                .iter()
                .all(|(_, _, cols)| rows.clone().all(|i| cols.clone().all(|j| self.matrix.get(i, j).is_zero())))
        })
    }

    pub fn diagonal_block(&self, b: usize) -> RatMatrix {
        let (_, r, c) = &self.blocks[b];
        self.matrix.block(r.start, r.end, c.start, c.end)
    }

    /// Exact determinant: the product of the diagonal block determinants
    /// when the matrix is block lower triangular.
    pub fn determinant(&self) -> Result<Rational, DofError> {
        if !self.is_block_lower_triangular() {
            return Ok(self.matrix.determinant()?);
        }
        let dets: Vec<Rational> =
            (0..self.blocks.len()).into_par_iter().map(|b| self.diagonal_block(b).determinant()).collect::<Result<_, _>>()?;
        Ok(dets.into_iter().fold(int(1), |a, d| a * d))
    }

    fn block_inverses(&self) -> Result<&Vec<RatMatrix>, DofError> {
        let r = self.inverses.get_or_init(|| {
            (0..self.blocks.len()).into_par_iter().map(|b| self.diagonal_block(b).inverse()).collect()
        });
        r.as_ref().map_err(|e| DofError::Linalg(e.clone()))
    }

    /// Solves `V X = rhs` by block forward substitution (falls back to a
    /// dense solve if the block structure is absent).
    pub fn solve(&self, rhs: &RatMatrix) -> Result<RatMatrix, DofError> {
        if !self.is_block_lower_triangular() {
            return Ok(self.matrix.solve(rhs)?);
        }
        let inv = self.block_inverses()?;
        let n = rhs.cols();
        let mut x = RatMatrix::zeros(self.size(), n);
        for (b, (_, rows, cols)) in self.blocks.iter().enumerate() {
            let mut r = rhs.block(rows.start, rows.end, 0, n);
            for (_, _, pc) in &self.blocks[..b] {
                let v = self.matrix.block(rows.start, rows.end, pc.start, pc.end);
                if v.is_zero() {
                    continue;
                }
                let xp = x.block(pc.start, pc.end, 0, n);
                r = r.sub(&v.mul(&xp)?);
            }
            let xb = inv[b].mul(&r)?;
            for (i, row) in cols.clone().enumerate() {
                for j in 0..n {
                    x.set(row, j, xb.get(i, j).clone());
                }
            }
        }
        Ok(x)
    }

    pub fn solve_vec(&self, rhs: &[Rational]) -> Result<Vec<Rational>, DofError> {
        let m = RatMatrix::from_columns(vec![rhs.to_vec()]);
        Ok(self.solve(&m)?.column(0))
    }

    pub fn to_json(&self) -> Result<Value, DofError> {
        let entries: Vec<Vec<String>> =
            (0..self.size()).map(|i| self.matrix.row(i).iter().map(rational_to_string).collect()).collect();
        Ok(json!({
            "form": self.s,
            "order": self.k,
            "rows": self.row_labels,
            "columns": self.col_labels,
            "entries": entries,
            "determinant": rational_to_string(&self.determinant()?),
        }))
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let header = std::iter::once("dof").chain(self.col_labels.iter().map(String::as_str));
        w.write_record(header).expect("in-memory write");
        for (i, r) in self.row_labels.iter().enumerate() {
            let row = std::iter::once(r.clone()).chain(self.matrix.row(i).iter().map(rational_to_string));
            w.write_record(row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }
}

/// Convenience: DOF set, basis and matrix for one space.
pub fn vandermonde(s: usize, k: u32) -> Result<Vandermonde, DofError> {
    let basis = spaces::basis(s, k)?;
    let dofs = dof_set(s, k)?;
    Vandermonde::new(&dofs, &basis)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::linear_combination;
    use crate::ratpoly::rat;

    #[test]
    fn counts_match_dimensions() {
        for s in 0..4 {
            for k in 1..=3 {
                let d = dof_set(s, k).unwrap();
                assert_eq!(d.len(), spaces::dimension_formula(s, k), "s={s} k={k}");
                let counts = d.counts();
                for (e, n) in counts {
                    assert_eq!(n, spaces::entity_count(s, k, e), "s={s} k={k} {e}");
                }
            }
        }
        let d = dof_set(0, 1).unwrap();
        assert!(d.dofs.iter().all(|m| m.kind == DofKind::VertexEval));
        let d = dof_set(1, 1).unwrap();
        assert_eq!(d.len(), 8);
        assert!(d.dofs.iter().all(|m| m.kind == DofKind::EdgeMoment && m.test == TestFunction::EdgePower(0)));
        assert!(dof_set(2, 3).unwrap().dofs.iter().all(|m| m.kind != DofKind::EdgeMoment));
    }

    #[test]
    fn simple_values() {
        let d = dof_set(0, 3).unwrap();
        let zk = FormField::from_cartesian(0, &[Poly::mono(0, 0, 3)]).unwrap();
        assert_eq!(d.apply_exact(&zk).unwrap()[4], int(1));
        let d = dof_set(3, 1).unwrap();
        let one = FormField::from_cartesian(3, &[Poly::one()]).unwrap();
        assert_eq!(d.apply_exact(&one).unwrap(), vec![rat(1, 3)]);
        let d = dof_set(1, 1).unwrap();
        let b = spaces::basis(1, 1).unwrap();
        let f = b.functions.iter().find(|f| f.entity == Entity::Edge(Edge::Base(0))).unwrap();
        let row = d.dofs.iter().position(|m| m.entity == Entity::Edge(Edge::Base(0))).unwrap();
        assert_eq!(d.apply_dof(row, &f.finite).unwrap(), int(1));
        let three = FormField::from_cartesian(3, &[Poly::one()]).unwrap();
        assert!(matches!(dof_set(1, 1).unwrap().apply_exact(&three), Err(DofError::KindMismatch(3, 1))));
    }

    #[test]
    fn small_matrices() {
        let v = vandermonde(0, 1).unwrap();
        assert_eq!(v.matrix, RatMatrix::identity(5));
        let v = vandermonde(3, 1).unwrap();
        assert_eq!(v.matrix, RatMatrix::from_rows(vec![vec![rat(1, 3)]]));
        let v = vandermonde(1, 2).unwrap();
        assert_eq!(v.size(), 3 * 8 + 10);
        assert!(!v.determinant().unwrap().is_zero());
    }

    #[test]
    fn block_structure_and_duality() {
        for s in 0..4 {
            for k in 1..=2 {
                let v = vandermonde(s, k).unwrap();
                assert!(v.respects_closure(), "s={s} k={k}");
                assert!(v.is_block_lower_triangular());
                assert_eq!(v.determinant().unwrap(), v.matrix.determinant().unwrap());
                let basis = spaces::basis(s, k).unwrap();
                let dofs = dof_set(s, k).unwrap();
                let coeffs = v.solve(&RatMatrix::identity(v.size())).unwrap();
                let fields = basis.finite_fields();
                for j in 0..v.size() {
                    let dual = linear_combination(&coeffs.column(j), &fields);
                    let vals = dofs.apply_exact(&dual).unwrap();
                    for (i, x) in vals.iter().enumerate() {
                        assert_eq!(*x, int((i == j) as i64), "s={s} k={k} i={i} j={j}");
                    }
                }
            }
        }
    }

    #[test]
    fn numeric_matches_exact_on_basis() {
        for s in 0..4 {
            let k = 2;
            let basis = spaces::basis(s, k).unwrap();
            let dofs = dof_set(s, k).unwrap();
            let num = NumericDofs::new(&dofs, k as usize + 3);
            for f in &basis.functions {
                let exact = dofs.apply_exact(&f.finite).unwrap();
                let approx = num.apply(&ExactField::new(&f.finite).unwrap()).unwrap();
                for (e, a) in exact.iter().zip(&approx) {
                    let e = e.to_f64().unwrap();
                    assert!((e - a).abs() <= 1e-12 * e.abs().max(1.0), "s={s} {}: {e} vs {a}", f.label());
                }
            }
        }
    }

    #[test]
    fn exports() {
        let v = vandermonde(0, 1).unwrap();
        let j = v.to_json().unwrap();
        assert_eq!(j["entries"][0][0], "1/1");
        assert_eq!(j["determinant"], "1/1");
        let csv = v.to_csv();
        assert!(csv.starts_with("dof,v1:vertex[]"));
        assert_eq!(csv.lines().count(), 6);
        // labels with commas stay one field
        let v = vandermonde(3, 1).unwrap();
        let text = v.to_csv();
        let mut r = csv::Reader::from_reader(text.as_bytes());
        assert_eq!(r.headers().unwrap().len(), 2);
        assert_eq!(&r.records().next().unwrap().unwrap()[1], "1/3");
    }
}
