//! Interpolation induced by the DOFs, and the checks built on it: commuting
//! diagram, exactness of the discrete sequence, decompositions of the
//! zero-trace spaces, polynomial reproduction, the lowest-order lists, trace
//! conformity, the non-polynomial trace example and quadrature fidelity.

use std::sync::OnceLock;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use num_traits::{Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::calculus::{linear_combination, CalculusError, FormField};
use crate::dofs::{self, CallableField, DofError, DofSet, ExactField, NumericDofs, SmoothField, Vandermonde};
use crate::linalg::{LinalgError, RatMatrix};
use crate::ratpoly::{int, rational_to_string, Frame, Poly, Rational, WeightedPolynomial as WP};
use crate::reference::{self, Entity, Face, FACES};
use crate::spaces::{self, BasisSet, SpaceError};

#[derive(Debug, Error)]
pub enum InterpError {
    #[error(transparent)]
    Dof(#[from] DofError),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Calculus(#[from] CalculusError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("numeric solve failed: the DOF matrix is singular in floating point")]
    NumericSingular,
}

/// Basis, DOFs and their matrix for one space.
pub struct Interpolator {
    pub basis: BasisSet,
    pub dofs: DofSet,
    pub vandermonde: Vandermonde,
    lu: OnceLock<Option<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>>>,
}

#[derive(Clone, Debug)]
pub struct Interpolant {
    pub s: usize,
    pub k: u32,
    pub coefficients: Vec<Rational>,
    pub field: FormField,
    /// `m(u) - m(Pi u)` for every DOF.
    pub residual_dofs: Vec<Rational>,
}

#[derive(Clone, Debug)]
pub struct NumericInterpolant {
    pub coefficients: Vec<f64>,
    pub residual_dofs: Vec<f64>,
}

impl Interpolator {
    pub fn new(s: usize, k: u32) -> Result<Self, InterpError> {
        Self::from_basis(spaces::basis(s, k)?)
    }

    pub fn from_basis(basis: BasisSet) -> Result<Self, InterpError> {
        let dofs = dofs::dof_set(basis.s, basis.k)?;
        let vandermonde = Vandermonde::new(&dofs, &basis)?;
        Ok(Self { basis, dofs, vandermonde, lu: OnceLock::new() })
    }

    pub fn s(&self) -> usize {
        self.basis.s
    }

    pub fn k(&self) -> u32 {
        self.basis.k
    }

    /// Finite-pyramid field with the given basis coefficients.
    pub fn field(&self, coeffs: &[Rational]) -> FormField {
        linear_combination(coeffs, &self.basis.finite_fields())
    }

    pub fn interpolate(&self, u: &FormField) -> Result<Interpolant, InterpError> {
        Ok(self.interpolate_many(std::slice::from_ref(u))?.remove(0))
    }

    /// Interpolates several fields with one block solve.
    pub fn interpolate_many(&self, us: &[FormField]) -> Result<Vec<Interpolant>, InterpError> {
        if us.is_empty() {
            return Ok(vec![]);
        }
        let rhs: Vec<Vec<Rational>> = us.par_iter().map(|u| self.dofs.apply_exact(u)).collect::<Result<_, _>>()?;
        let x = self.vandermonde.solve(&RatMatrix::from_columns(rhs.clone()))?;
        (0..us.len())
            .into_par_iter()
            .map(|j| {
                let coefficients = x.column(j);
                let field = self.field(&coefficients);
                let back = self.dofs.apply_exact(&field)?;
                let residual_dofs = rhs[j].iter().zip(&back).map(|(a, b)| a - b).collect();
                Ok(Interpolant { s: self.s(), k: self.k(), coefficients, field, residual_dofs })
            })
            .collect()
    }

    fn lu(&self) -> Option<&nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>> {
        self.lu.get_or_init(|| Some(self.vandermonde.matrix.to_f64().lu())).as_ref()
    }

    pub fn numeric_dofs(&self, n: usize) -> NumericDofs<'_> {
        NumericDofs::new(&self.dofs, n)
    }

    pub fn interpolate_numeric(&self, num: &NumericDofs<'_>, u: &dyn SmoothField) -> Result<NumericInterpolant, InterpError> {
        let m = DVector::from_vec(num.apply(u)?);
        let c = self.lu().and_then(|lu| lu.solve(&m)).ok_or(InterpError::NumericSingular)?;
        let v: DMatrix<f64> = self.vandermonde.matrix.to_f64();
        let residual = &m - &v * &c;
        Ok(NumericInterpolant { coefficients: c.iter().copied().collect(), residual_dofs: residual.iter().copied().collect() })
    }
}

/// One-shot interpolation of an exact field.
pub fn interpolate(s: usize, k: u32, u: &FormField) -> Result<Interpolant, InterpError> {
    Interpolator::new(s, k)?.interpolate(u)
}

/// Matrix of `d` from the space of `from` to the space of `to` in their
/// bases, and whether every `d phi_j` is reproduced exactly (so that `d`
/// maps the first space into the second).
pub fn derivative_matrix(from: &Interpolator, to: &Interpolator) -> Result<(RatMatrix, bool), InterpError> {
    let ds: Vec<FormField> =
        from.basis.finite_fields().par_iter().map(|f| f.exterior_derivative()).collect::<Result<_, _>>()?;
    let ints = to.interpolate_many(&ds)?;
    let included = ints.iter().zip(&ds).all(|(i, d)| i.field == *d);
    let cols = ints.into_iter().map(|i| i.coefficients).collect();
    Ok((RatMatrix::from_columns(cols), included))
}

/// Monomial `s`-forms (Cartesian, finite pyramid) of total degree at most `n`.
pub fn monomial_forms(s: usize, n: u32) -> Vec<FormField> {
    let mut monos = Vec::new();
    for d in 0..=n {
        for a in 0..=d {
            for b in 0..=d - a {
                monos.push(Poly::mono(a, b, d - a - b));
            }
        }
    }
    let mut out = Vec::new();
    if s == 0 || s == 3 {
        for m in monos {
            out.push(FormField::from_cartesian(s, &[m]).expect("scalar"));
        }
    } else {
        for c in 0..3 {
            for m in &monos {
                let mut comps = vec![Poly::zero(), Poly::zero(), Poly::zero()];
                comps[c] = m.clone();
                out.push(FormField::from_cartesian(s, &comps).expect("vector"));
            }
        }
    }
    out
}

/// `(value, gradient)` of a few smooth non-polynomial functions.
fn scalar_sample(i: usize, p: [f64; 3]) -> (f64, [f64; 3]) {
    let [x, y, z] = p;
    match i % 5 {
        0 => {
            let a = 0.3 + 0.7 * x + 0.4 * y + 0.5 * z;
            (a.sin(), [0.7, 0.4, 0.5].map(|c| c * a.cos()))
        }
        1 => {
            let e = (0.3 * x - 0.5 * y + 0.6 * z).exp();
            (e, [0.3 * e, -0.5 * e, 0.6 * e])
        }
        2 => {
            let (c, s, e) = ((0.8 * x).cos(), (0.8 * x).sin(), (0.5 * y).exp());
            (c * e * (1.0 + z), [-0.8 * s * e * (1.0 + z), 0.5 * c * e * (1.0 + z), c * e])
        }
        3 => {
            let r = 1.0 / (2.0 + x + y + z);
            (r, [-r * r; 3])
        }
        _ => {
            let (sx, cx, cy, sy, ez) = (x.sin(), x.cos(), (0.6 * y).cos(), (0.6 * y).sin(), (0.4 * z).exp());
            (sx * cy * ez, [cx * cy * ez, -0.6 * sx * sy * ez, 0.4 * sx * cy * ez])
        }
    }
}

/// Smooth `s`-form number `i` (of five) and its exterior derivative.
pub fn smooth_sample(s: usize, i: usize) -> (CallableField, CallableField) {
    let comps = move |p: [f64; 3]| -> Vec<(f64, [f64; 3])> { (0..3).map(|c| scalar_sample(i + c, p)).collect() };
    let d = move |p: [f64; 3]| -> Vec<f64> {
        match s {
            0 => scalar_sample(i, p).1.to_vec(),
            1 => {
                let g = comps(p);
                vec![g[2].1[1] - g[1].1[2], g[0].1[2] - g[2].1[0], g[1].1[0] - g[0].1[1]]
            }
            _ => {
                let g = comps(p);
                vec![g[0].1[0] + g[1].1[1] + g[2].1[2]]
            }
        }
    };
    let value: Box<dyn Fn([f64; 3]) -> Vec<f64> + Send + Sync> = match s {
        0 => Box::new(move |p| vec![scalar_sample(i, p).0]),
        _ => Box::new(move |p| comps(p).iter().map(|c| c.0).collect()),
    };
    let zero = if s == 0 { 3 } else { 1 };
    let u = CallableField { degree: s, value, derivative: Box::new(d) };
    let du = CallableField { degree: s + 1, value: Box::new(d), derivative: Box::new(move |_| vec![0.0; zero]) };
    (u, du)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub k: Option<u32>,
    pub status: Status,
    pub witness: Value,
    pub runtime_ms: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerificationReport {
    pub max_k: u32,
    pub checks: Vec<CheckResult>,
}

impl VerificationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != Status::Fail)
    }

    pub fn failed(&self) -> Vec<&CheckResult> {
        self.checks.iter().filter(|c| c.status == Status::Fail).collect()
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let k = c.k.map_or("-".to_string(), |k| k.to_string());
            let st = match c.status {
                Status::Pass => "PASS",
                Status::Fail => "FAIL",
                Status::Skipped => "SKIP",
            };
            out.push_str(&format!("{st}  {:<26} k={k:<2} {:>9.1} ms  {}\n", c.name, c.runtime_ms, c.witness));
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct SuiteOptions {
    pub max_k: u32,
    pub quad_n: Option<usize>,
    pub counterexample_degree: u32,
    pub seed: u64,
    /// Replace one shape function by a copy of another (negative control).
    pub corrupt_basis: bool,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self { max_k: 4, quad_n: None, counterexample_degree: 10, seed: 20240601, corrupt_basis: false }
    }
}

type CheckOutcome = Result<(Status, Value), InterpError>;

fn timed(name: &str, k: Option<u32>, f: impl FnOnce() -> CheckOutcome) -> CheckResult {
    let t = Instant::now();
    let (status, witness) = match f() {
        Ok(r) => r,
        Err(e) => (Status::Fail, json!({ "error": e.to_string() })),
    };
    CheckResult { name: name.to_string(), k, status, witness, runtime_ms: t.elapsed().as_secs_f64() * 1e3 }
}

fn pass(ok: bool) -> Status {
    if ok {
        Status::Pass
    } else {
        Status::Fail
    }
}

/// Spaces of all four form degrees for one order.
pub struct Complex {
    pub k: u32,
    pub spaces: Vec<Interpolator>,
}

impl Complex {
    pub fn new(k: u32) -> Result<Self, InterpError> {
        let spaces = (0..4).into_par_iter().map(|s| Interpolator::new(s, k)).collect::<Result<_, _>>()?;
        Ok(Self { k, spaces })
    }
}

/// Exact dimensions of the spaces and of the zero-trace families.
pub fn check_dimensions(k: u32) -> CheckOutcome {
    let ku = k as usize;
    let km = ku - 1;
    let mut ok = true;
    let mut w = serde_json::Map::new();
    for s in 0..4 {
        let b = spaces::basis(s, k)?;
        let (rank, expected) = (b.rank(), spaces::dimension_formula(s, k));
        ok &= rank == expected && b.len() == expected && spaces::count_total(s, k) == expected;
        w.insert(format!("U{s}"), json!(rank));
    }
    let families: [(&str, BasisSet, usize); 5] = [
        ("U0 zero trace", spaces::bubble_basis(k)?, km * km * km),
        ("U1 zero trace", spaces::zero_trace_basis(1, k)?, 3 * ku * km * km),
        ("U1 curl bubbles", spaces::curl_bubble_basis(k)?, (2 * ku + 1) * km * km),
        ("U2 zero trace", spaces::zero_trace_basis(2, k)?, 3 * ku * ku * ku - 3 * ku * ku),
        ("U2 div bubbles", spaces::div_bubble_basis(k)?, ku * ku * ku - 1),
    ];
    for (name, b, expected) in families {
        let rank = if b.is_empty() { 0 } else { b.rank() };
        let traceless = b.functions.iter().all(|f| {
            b.s == 3 || FACES.iter().all(|face| f.infinite.trace(*face).map(|t| t.is_zero()).unwrap_or(false))
        });
        let member = b.functions.iter().all(|f| spaces::membership_in_space(&f.infinite, b.s, k));
        ok &= rank == expected && traceless && member;
        let v = if rank == 0 { json!("empty") } else { json!(rank) };
        w.insert(name.to_string(), v);
    }
    Ok((pass(ok), Value::Object(w)))
}

/// Nonzero exact determinants of all four DOF matrices.
pub fn check_unisolvency(c: &Complex, corrupt: bool) -> CheckOutcome {
    let mut ok = true;
    let mut w = serde_json::Map::new();
    for it in &c.spaces {
        let v = if corrupt {
            Vandermonde::new(&it.dofs, &it.basis.corrupted())?
        } else {
            Vandermonde::new(&it.dofs, &it.basis)?
        };
        let det = v.determinant()?;
        let structured = v.is_block_lower_triangular() && v.respects_closure();
        ok &= !det.is_zero() && structured;
        let largest = v.blocks.iter().map(|(_, r, _)| r.len()).max().unwrap_or(0);
        let sign = if det.is_zero() { 0 } else if det.is_positive() { 1 } else { -1 };
        w.insert(
            format!("s{}", it.s()),
            json!({ "size": v.size(), "det_sign": sign, "block_triangular": structured, "largest_block": largest }),
        );
    }
    Ok((pass(ok), Value::Object(w)))
}

/// Rank identities of the discrete sequence.
pub fn check_exact_sequence(c: &Complex) -> CheckOutcome {
    let sp = &c.spaces;
    let mut ds = Vec::new();
    let mut included = true;
    for s in 0..3 {
        let (d, inc) = derivative_matrix(&sp[s], &sp[s + 1])?;
        included &= inc;
        ds.push(d);
    }
    let dims: Vec<usize> = sp.iter().map(|i| i.basis.len()).collect();
    let ranks: Vec<usize> = ds.iter().map(RatMatrix::rank).collect();
    let dd_zero = ds[1].mul(&ds[0])?.is_zero() && ds[2].mul(&ds[1])?.is_zero();
    let ker: Vec<usize> = (0..3).map(|s| dims[s] - ranks[s]).collect();
    let ok = included
        && dd_zero
        && ker[0] == 1
        && ker[1] == ranks[0]
        && ker[2] == ranks[1]
        && ranks[2] == dims[3];
    let w = json!({
        "d_maps_into_next_space": included,
        "dd_zero": dd_zero,
        "dims": dims,
        "rank_grad": ranks[0], "rank_curl": ranks[1], "rank_div": ranks[2],
        "ker_grad": ker[0], "ker_curl": ker[1], "ker_div": ker[2],
    });
    Ok((pass(ok), w))
}

/// `d Pi p = Pi d p` exactly on monomial forms of degree at most `k + 1`.
pub fn check_commuting_exact(c: &Complex) -> CheckOutcome {
    let mut ok = true;
    let mut w = serde_json::Map::new();
    for s in 0..3 {
        let samples = monomial_forms(s, c.k + 1);
        let left = c.spaces[s].interpolate_many(&samples)?;
        let dsamples: Vec<FormField> = samples.iter().map(|p| p.exterior_derivative()).collect::<Result<_, _>>()?;
        let right = c.spaces[s + 1].interpolate_many(&dsamples)?;
        let mut bad = 0;
        for (l, r) in left.iter().zip(&right) {
            if l.field.exterior_derivative()? != r.field {
                bad += 1;
            }
        }
        ok &= bad == 0;
        w.insert(format!("s{s}"), json!({ "samples": samples.len(), "nonzero_defects": bad }));
    }
    Ok((pass(ok), Value::Object(w)))
}

/// Largest coefficient defect `|D c(u) - c(du)|` over the five smooth
/// samples, with `n` quadrature points per direction.
pub fn numeric_commuting_defect(c: &Complex, s: usize, d: &RatMatrix, n: usize) -> Result<f64, InterpError> {
    let df = d.to_f64();
    let (na, nb) = (c.spaces[s].numeric_dofs(n), c.spaces[s + 1].numeric_dofs(n));
    let mut defect: f64 = 0.0;
    for i in 0..5 {
        let (u, du) = smooth_sample(s, i);
        let a = c.spaces[s].interpolate_numeric(&na, &u)?;
        let b = c.spaces[s + 1].interpolate_numeric(&nb, &du)?;
        let lhs = &df * DVector::from_vec(a.coefficients);
        for (x, y) in lhs.iter().zip(&b.coefficients) {
            defect = defect.max((x - y).abs());
        }
    }
    Ok(defect)
}

/// Same diagram on smooth non-polynomial fields through quadrature. Smooth
/// inputs default to two more points per direction than polynomial ones;
/// the defect at the polynomial default is reported alongside.
pub fn check_commuting_numeric(c: &Complex, quad_n: Option<usize>) -> CheckOutcome {
    let base = c.k as usize + 3;
    let n = quad_n.unwrap_or(base + 2);
    let mut worst: f64 = 0.0;
    let mut w = serde_json::Map::new();
    for s in 0..3 {
        let (d, _) = derivative_matrix(&c.spaces[s], &c.spaces[s + 1])?;
        let defect = numeric_commuting_defect(c, s, &d, n)?;
        let at_base = numeric_commuting_defect(c, s, &d, base)?;
        worst = worst.max(defect);
        w.insert(format!("s{s}"), json!({ "defect": defect, "defect_at_polynomial_default": at_base }));
    }
    w.insert("quadrature_points_per_direction".into(), json!(n));
    Ok((pass(worst <= 1e-8), Value::Object(w)))
}

/// Low-degree polynomial forms lie in the spaces and are reproduced.
pub fn check_polynomial_reproduction(c: &Complex) -> CheckOutcome {
    let mut ok = true;
    let mut w = serde_json::Map::new();
    for s in 0..4 {
        let deg = if s == 0 { c.k } else { c.k - 1 };
        let samples = monomial_forms(s, deg);
        let member = samples.iter().all(|p| p.pullback().map(|q| spaces::membership_in_space(&q, s, c.k)).unwrap_or(false));
        let reproduced = c.spaces[s].interpolate_many(&samples)?.iter().zip(&samples).filter(|(i, p)| i.field == **p).count();
        ok &= member && reproduced == samples.len();
        w.insert(format!("s{s}"), json!({ "monomials": samples.len(), "members": member, "reproduced": reproduced }));
    }
    Ok((pass(ok), Value::Object(w)))
}

fn inf(n: Poly, w: u32) -> WP {
    WP::new(Frame::Infinite, n, w)
}

fn aff(c: [i64; 4]) -> Poly {
    Poly::affine(c)
}

/// The classical lowest-order functions on the infinite pyramid, with the
/// two corrected 1-forms.
pub fn lowest_order_lists() -> [Vec<FormField>; 4] {
    let x = || Poly::var(0);
    let y = || Poly::var(1);
    let z = || Poly::var(2);
    let xm = || aff([-1, 1, 0, 0]);
    let ym = || aff([-1, 0, 1, 0]);
    let s0 = |p: Poly| FormField::scalar(0, inf(p, 1));
    let pi = vec![s0(&xm() * &ym()), s0(&x() * &ym()), s0(&xm() * &y()), s0(&x() * &y()), s0(z())];
    let v1 = |a: Poly, b: Poly, c: Poly| FormField::vector(1, [inf(a, 2), inf(b, 2), inf(c, 2)]);
    let neg = |p: Poly| p.scale(&int(-1));
    let xz = || &x() * &z();
    let yz = || &y() * &z();
    let gamma = vec![
        v1(neg(ym()), Poly::zero(), Poly::zero()),
        v1(Poly::zero(), x(), Poly::zero()),
        v1(y(), Poly::zero(), Poly::zero()),
        v1(Poly::zero(), neg(xm()), Poly::zero()),
        v1(neg(&z() * &ym()), neg(&z() * &xm()), &ym() * &xm()),
        v1(&z() * &ym(), xz(), neg(&x() * &ym())),
        v1(yz(), &z() * &xm(), neg(&y() * &xm())),
        v1(neg(yz()), neg(xz()), &x() * &y()),
    ];
    let v2 = |a: Poly, b: Poly, c: Poly| FormField::vector(2, [inf(a, 3), inf(b, 3), inf(c, 3)]);
    let two = |p: Poly| p.scale(&int(2));
    let zeta = vec![
        v2(Poly::zero(), two(ym()), z()),
        v2(two(xm()), Poly::zero(), z()),
        v2(two(x()), Poly::zero(), z()),
        v2(Poly::zero(), two(y()), z()),
        v2(Poly::zero(), Poly::zero(), Poly::constant(int(-1))),
    ];
    let u3 = vec![FormField::scalar(3, inf(Poly::one(), 4))];
    [pi, gamma, zeta, u3]
}

/// Corrected finite-pyramid `gamma_6`, `gamma_7` in collapsed coordinates.
pub fn corrected_finite_gammas() -> [FormField; 2] {
    let f = |p: Poly| WP::poly(Frame::Finite, p);
    let (a, b, c) = (Poly::var(0), Poly::var(1), Poly::var(2));
    let om = aff([1, 0, 0, -1]);
    // a(1-c) - ab(1-c) + abc, and the same with a and b exchanged
    let last = |p: &Poly, q: &Poly| &(&(p * &om) - &(&(p * q) * &om)) + &(&(p * q) * &c);
    let g6 = FormField::vector(1, [f(&c * &aff([-1, 0, 1, 0])), f(&a * &c), f(last(&a, &b))]);
    let g7 = FormField::vector(1, [f(&b * &c), f(&c * &aff([-1, 1, 0, 0])), f(last(&b, &a))]);
    [g6, g7]
}

fn same_span(a: &[&FormField], b: &[&FormField]) -> (bool, usize, usize) {
    let ra = spaces::field_matrix(a).rank();
    let rb = spaces::field_matrix(b).rank();
    let mut all = a.to_vec();
    all.extend_from_slice(b);
    let rab = spaces::field_matrix(&all).rank();
    (ra == rab && rb == rab, ra, rb)
}

/// The generated order-one bases span the classical lowest-order lists.
pub fn check_lowest_order() -> CheckOutcome {
    let lists = lowest_order_lists();
    let mut ok = true;
    let mut w = serde_json::Map::new();
    for (s, list) in lists.iter().enumerate() {
        let b = spaces::basis(s, 1)?;
        let refs: Vec<&FormField> = list.iter().collect();
        let (same, rl, rb) = same_span(&refs, &b.infinite_fields());
        let square = rl == list.len() && rb == b.len();
        ok &= same && square;
        w.insert(format!("s{s}"), json!({ "listed": list.len(), "rank": rl, "same_span": same }));
    }
    let [g6, g7] = corrected_finite_gammas();
    let matches = g6.pullback()? == lists[1][5] && g7.pullback()? == lists[1][6];
    ok &= matches;
    w.insert("corrected_gammas_match_pullback".into(), json!(matches));
    Ok((pass(ok), Value::Object(w)))
}

/// Every face trace of every shape function lies in the face trace space,
/// and the traces span it.
pub fn check_traces(k: u32) -> CheckOutcome {
    let mut ok = true;
    let mut w = serde_json::Map::new();
    for s in 0..3 {
        let b = spaces::basis(s, k)?;
        for face in FACES {
            let gens = spaces::finite_trace_space(s, k, face);
            let from_counts: usize = reference::all_entities()
                .into_iter()
                .filter(|e| e.dim() <= 2 && e.is_subentity_of(Entity::Face(face)))
                .map(|e| spaces::entity_count(s, k, e))
                .sum();
            let mut traces = Vec::with_capacity(b.len());
            for f in &b.functions {
                match f.finite.trace(face)?.to_cartesian() {
                    Some(t) => traces.push(t),
                    None => ok = false,
                }
            }
            let dim = spaces::poly_rank(&gens);
            let span = spaces::poly_rank(&traces);
            let mut all = gens.clone();
            all.extend(traces);
            let joint = spaces::poly_rank(&all);
            ok &= dim == from_counts && dim == spaces::finite_trace_dimension(s, k, face) && span == dim && joint == dim;
            w.insert(format!("s{s}:{}", Entity::Face(face)), json!({ "trace_rank": span, "space_dim": dim }));
        }
    }
    Ok((pass(ok), Value::Object(w)))
}

/// The example field: polynomial traces on every face, yet not the trace
/// of any polynomial.
pub fn counterexample_field() -> FormField {
    // xi zeta (xi + zeta - 1)(eta + zeta - 1)/(1 - zeta) = a c (a-1)(b-1)(1-c)^2
    let n = &(&(&(&Poly::var(0) * &Poly::var(2)) * &aff([-1, 1, 0, 0])) * &aff([-1, 0, 1, 0]))
        * &Frame::Finite.base_pow(2);
    FormField::scalar(0, WP::poly(Frame::Finite, n))
}

/// Cartesian parametrization `(s, t) -> point` of a face, as polynomials
/// in slots 0 and 1.
fn face_cartesian_map(face: Face) -> [Poly; 3] {
    match face {
        Face::Base => [Poly::var(0), Poly::var(1), Poly::zero()],
        Face::Tri(i) => {
            let mut p = [Poly::var(0), Poly::zero(), Poly::var(1)];
            for _ in 0..i {
                p = [&(&Poly::one() - &p[1]) - &p[2], p[0].clone(), p[2].clone()];
            }
            p
        }
    }
}

/// Whether some polynomial of total degree at most `d` has the given face
/// traces, by exact ranks of the matching system.
pub fn polynomial_with_traces_exists(traces: &[(Face, Poly)], d: u32) -> (bool, usize, usize) {
    let monos = monomial_forms(0, d);
    let mut rows: Vec<Vec<Poly>> = Vec::new();
    // one "row vector" per unknown: its restrictions to all faces
    for m in &monos {
        let p = m.components()[0].to_cartesian_polynomial().expect("polynomial");
        rows.push(traces.iter().map(|(f, _)| p.compose(&face_cartesian_map(*f))).collect());
    }
    let target: Vec<Poly> = traces.iter().map(|(_, t)| t.clone()).collect();
    let a = spaces::poly_matrix(&rows).transpose();
    let mut with = rows.clone();
    with.push(target);
    let ab = spaces::poly_matrix(&with).transpose();
    let (ra, rab) = (a.rank(), ab.rank());
    (ra == rab, ra, rab)
}

pub fn check_counterexample(d: u32) -> CheckOutcome {
    let u = counterexample_field();
    let (s, t) = (Poly::var(0), Poly::var(1));
    // -s t (s + t - 1) on S1, zero elsewhere
    let expected_s1 = (&(&s * &t) * &aff([-1, 1, 1, 0])).scale(&int(-1));
    let mut traces = Vec::new();
    let mut traces_ok = true;
    for face in FACES {
        let tr = u.trace(face)?.to_cartesian().map(|mut v| v.remove(0));
        let expect = if face == Face::Tri(0) { expected_s1.clone() } else { Poly::zero() };
        traces_ok &= tr.as_ref() == Some(&expect);
        traces.push((face, expect));
    }
    let grad = u.exterior_derivative()?;
    let energy = grad.dot(&grad).integrate().map_err(CalculusError::from)?;
    let (feasible, ra, rab) = polynomial_with_traces_exists(&traces, d);
    // interpolation gap at a few interior points
    let it = Interpolator::new(0, 2)?;
    let pi = it.interpolate(&u)?.field;
    let mut gap: f64 = 0.0;
    for p in [[1, 1, 1], [1, 2, 1], [2, 1, 1], [1, 1, 2]] {
        let q = [Rational::new(p[0].into(), 5.into()), Rational::new(p[1].into(), 5.into()), Rational::new(p[2].into(), 5.into())];
        let (a, b) = (u.evaluate(&q)?, pi.evaluate(&q)?);
        if let (Some(a), Some(b)) = (a, b) {
            gap = gap.max((&a[0] - &b[0]).abs().to_f64().unwrap_or(f64::NAN));
        }
    }
    let ok = traces_ok && !feasible;
    let w = json!({
        "traces_exact": traces_ok,
        "gradient_energy": rational_to_string(&energy),
        "degree": d,
        "unknowns": monomial_forms(0, d).len(),
        "rank": ra,
        "augmented_rank": rab,
        "polynomial_exists": feasible,
        "interpolation_gap_k2": gap,
    });
    Ok((pass(ok), w))
}

/// Numeric DOFs agree with exact DOFs on random members of each space.
pub fn check_quadrature(c: &Complex, quad_n: Option<usize>, seed: u64) -> CheckOutcome {
    let n = quad_n.unwrap_or(c.k as usize + 3);
    let mut worst: f64 = 0.0;
    let mut w = serde_json::Map::new();
    for it in &c.spaces {
        let num = it.numeric_dofs(n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((it.s() as u64) << 8) ^ c.k as u64);
        let coeffs: Vec<Vec<Rational>> = (0..50)
            .map(|_| (0..it.basis.len()).map(|_| int(rng.gen_range(-9..=9))).collect())
            .collect();
        let errs: Vec<f64> = coeffs
            .par_iter()
            .map(|cs| -> Result<f64, InterpError> {
                let f = it.field(cs);
                let exact: Vec<f64> = it.dofs.apply_exact(&f)?.iter().map(|q| q.to_f64().unwrap_or(f64::NAN)).collect();
                let approx = num.apply(&ExactField::new(&f)?)?;
                let scale = exact.iter().fold(0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
                Ok(exact.iter().zip(&approx).fold(0f64, |m, (e, a)| m.max((e - a).abs())) / scale)
            })
            .collect::<Result<_, _>>()?;
        let e = errs.into_iter().fold(0f64, f64::max);
        worst = worst.max(e);
        w.insert(format!("s{}", it.s()), json!(e));
    }
    w.insert("quadrature_points_per_direction".into(), json!(n));
    Ok((pass(worst <= 1e-12), Value::Object(w)))
}

/// Solves `target = sum a_i p_i + sum b_j q_j` exactly; returns the
/// coefficients when the combined family is independent and spans `target`.
type Split = (Vec<Rational>, Vec<Rational>);

fn decompose(p: &[FormField], q: &[FormField], target: &FormField) -> Result<Option<Split>, InterpError> {
    let mut all: Vec<&FormField> = p.iter().chain(q).collect();
    let n = all.len();
    all.push(target);
    let m = spaces::field_matrix(&all);
    let a = m.block(0, n, 0, m.cols()).transpose();
    let rhs = m.block(n, n + 1, 0, m.cols()).transpose();
    match a.solve_unique(&rhs) {
        Ok(x) => {
            let x = x.column(0);
            Ok(Some((x[..p.len()].to_vec(), x[p.len()..].to_vec())))
        }
        Err(LinalgError::Singular) | Err(LinalgError::Inconsistent) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

/// Decompositions of the zero-trace spaces into a derivative part and a
/// complement on which the next derivative is injective.
pub fn check_helmholtz(k: u32, seed: u64) -> CheckOutcome {
    if k < 2 {
        return Ok((Status::Skipped, json!("zero-trace 1- and 2-forms are empty for k = 1")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (k as u64) << 16);
    let mut rand_member = |b: &BasisSet| -> FormField {
        let cs: Vec<Rational> = (0..b.len()).map(|_| int(rng.gen_range(-7..=7))).collect();
        linear_combination(&cs, &b.finite_fields())
    };
    let d_of = |b: &BasisSet| -> Result<Vec<FormField>, CalculusError> {
        b.functions.iter().map(|f| f.finite.exterior_derivative()).collect()
    };
    let fields = |b: &BasisSet| -> Vec<FormField> { b.functions.iter().map(|f| f.finite.clone()).collect() };
    let bubbles = spaces::bubble_basis(k)?;
    let curl_b = spaces::curl_bubble_basis(k)?;
    let div_b = spaces::div_bubble_basis(k)?;
    let z1 = spaces::zero_trace_basis(1, k)?;
    let z2 = spaces::zero_trace_basis(2, k)?;
    let u3 = spaces::basis(3, k)?;
    let one = vec![FormField::scalar(3, WP::constant(Frame::Finite, int(1)))];
    let grads = d_of(&bubbles)?;
    let curls = d_of(&curl_b)?;
    let divs = d_of(&div_b)?;
    let mut ok = true;
    let mut w = serde_json::Map::new();
    let cases: [(&str, Vec<FormField>, Vec<FormField>, FormField); 4] = [
        ("U1 zero trace = grad + curl bubbles", grads.clone(), fields(&curl_b), rand_member(&z1)),
        ("U2 zero trace = curl + div bubbles", curls.clone(), fields(&div_b), rand_member(&z2)),
        ("U3 = div + constants", divs.clone(), one.clone(), rand_member(&u3)),
        ("gradient input has no curl-bubble part", grads.clone(), fields(&curl_b), rand_member_grad(&grads, seed)),
    ];
    for (i, (name, p, q, target)) in cases.into_iter().enumerate() {
        let dim = p.len() + q.len();
        let solved = decompose(&p, &q, &target)?;
        let good = match (&solved, i) {
            (Some((_, b)), 3) => b.iter().all(Zero::is_zero),
            (Some(_), _) => true,
            (None, _) => false,
        };
        ok &= good;
        w.insert(name.to_string(), json!({ "dimension": dim, "unique_solution": solved.is_some(), "ok": good }));
    }
    // the spans of the two parts fill the zero-trace spaces
    let spans = [(grads, fields(&curl_b), fields(&z1)), (curls, fields(&div_b), fields(&z2)), (divs, one, fields(&u3))];
    for (p, q, full) in spans {
        let parts: Vec<&FormField> = p.iter().chain(&q).collect();
        let whole: Vec<&FormField> = full.iter().collect();
        let (same, rp, rf) = same_span(&parts, &whole);
        ok &= same && rp == parts.len() && rf == whole.len();
    }
    // the constant has no divergence part
    let c1 = decompose(&d_of(&div_b)?, &[FormField::scalar(3, WP::constant(Frame::Finite, int(1)))], &FormField::scalar(3, WP::constant(Frame::Finite, int(1))))?;
    let const_ok = matches!(&c1, Some((a, b)) if a.iter().all(Zero::is_zero) && b == &vec![int(1)]);
    ok &= const_ok;
    w.insert("constant splits as 0 + 1".into(), json!(const_ok));
    Ok((pass(ok), Value::Object(w)))
}

fn rand_member_grad(grads: &[FormField], seed: u64) -> FormField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(7));
    let cs: Vec<Rational> = (0..grads.len()).map(|_| int(rng.gen_range(-7..=7))).collect();
    linear_combination(&cs, &grads.iter().collect::<Vec<_>>())
}

/// Runs every check for `k = 1..=max_k`.
pub fn run_suite(opts: &SuiteOptions) -> VerificationReport {
    let mut checks = Vec::new();
    checks.push(timed("lowest-order", Some(1), check_lowest_order));
    checks.push(timed("counterexample", None, || check_counterexample(opts.counterexample_degree)));
    let per_k: Vec<Vec<CheckResult>> = (1..=opts.max_k)
        .into_par_iter()
        .map(|k| {
            let mut out = Vec::new();
            out.push(timed("dimensions", Some(k), || check_dimensions(k)));
            let complex = match Complex::new(k) {
                Ok(c) => c,
                Err(e) => {
                    out.push(CheckResult {
                        name: "assembly".into(),
                        k: Some(k),
                        status: Status::Fail,
                        witness: json!(e.to_string()),
                        runtime_ms: 0.0,
                    });
                    return out;
                }
            };
            out.push(timed("unisolvency", Some(k), || check_unisolvency(&complex, opts.corrupt_basis)));
            out.push(timed("exact-sequence", Some(k), || check_exact_sequence(&complex)));
            if k <= 3 {
                out.push(timed("commuting-exact", Some(k), || check_commuting_exact(&complex)));
                out.push(timed("commuting-numeric", Some(k), || check_commuting_numeric(&complex, opts.quad_n)));
                out.push(timed("quadrature-fidelity", Some(k), || check_quadrature(&complex, opts.quad_n, opts.seed)));
            }
            out.push(timed("polynomial-reproduction", Some(k), || check_polynomial_reproduction(&complex)));
            out.push(timed("trace-compatibility", Some(k), || check_traces(k)));
            out.push(timed("helmholtz", Some(k), || check_helmholtz(k, opts.seed)));
            out
        })
        .collect();
    checks.extend(per_k.into_iter().flatten());
    VerificationReport { max_k: opts.max_k, checks }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratpoly::rat;

    #[test]
    fn projection_examples() {
        for k in 1..=3 {
            let zk = FormField::from_cartesian(0, &[Poly::mono(0, 0, k)]).unwrap();
            let i = interpolate(0, k, &zk).unwrap();
            assert_eq!(i.field, zk);
            assert!(i.residual_dofs.iter().all(Zero::is_zero));
        }
        let one = FormField::from_cartesian(3, &[Poly::one()]).unwrap();
        assert_eq!(interpolate(3, 2, &one).unwrap().field, one);
    }

    #[test]
    fn projection_is_idempotent() {
        let it = Interpolator::new(1, 2).unwrap();
        let p = FormField::from_cartesian(1, &[Poly::mono(2, 0, 1), Poly::mono(0, 0, 2), Poly::mono(1, 1, 1)]).unwrap();
        let once = it.interpolate(&p).unwrap();
        assert!(once.residual_dofs.iter().all(Zero::is_zero));
        let twice = it.interpolate(&once.field).unwrap();
        assert_eq!(once.field, twice.field);
    }

    #[test]
    fn commuting_examples() {
        let c = Complex::new(2).unwrap();
        let p = FormField::from_cartesian(0, &[Poly::mono(1, 1, 1)]).unwrap();
        let l = c.spaces[0].interpolate(&p).unwrap().field.exterior_derivative().unwrap();
        let r = c.spaces[1].interpolate(&p.exterior_derivative().unwrap()).unwrap().field;
        assert_eq!(l, r);
        let q = FormField::from_cartesian(2, &[Poly::zero(), Poly::zero(), Poly::var(0)]).unwrap();
        let l = c.spaces[2].interpolate(&q).unwrap().field.exterior_derivative().unwrap();
        let r = c.spaces[3].interpolate(&q.exterior_derivative().unwrap()).unwrap().field;
        assert_eq!(l, r);
    }

    #[test]
    fn sequence_ranks_order_one() {
        let c = Complex::new(1).unwrap();
        let (d0, inc) = derivative_matrix(&c.spaces[0], &c.spaces[1]).unwrap();
        assert!(inc);
        assert_eq!(d0.rank(), 4);
        let (d1, _) = derivative_matrix(&c.spaces[1], &c.spaces[2]).unwrap();
        assert_eq!(8 - d1.rank(), 4);
        let c2 = Complex::new(2).unwrap();
        let (d2, _) = derivative_matrix(&c2.spaces[2], &c2.spaces[3]).unwrap();
        assert_eq!(d2.rank(), 8);
    }

    #[test]
    fn smooth_samples_have_consistent_derivatives() {
        // central differences against the supplied derivatives
        let h = 1e-6;
        let p = [0.2, 0.3, 0.25];
        for s in 0..3 {
            for i in 0..5 {
                let (u, du) = smooth_sample(s, i);
                let grad = |c: usize, v: usize| {
                    let mut a = p;
                    let mut b = p;
                    a[v] += h;
                    b[v] -= h;
                    (u.value(a)[c] - u.value(b)[c]) / (2.0 * h)
                };
                let fd = match s {
                    0 => vec![grad(0, 0), grad(0, 1), grad(0, 2)],
                    1 => vec![grad(2, 1) - grad(1, 2), grad(0, 2) - grad(2, 0), grad(1, 0) - grad(0, 1)],
                    _ => vec![grad(0, 0) + grad(1, 1) + grad(2, 2)],
                };
                for (a, b) in fd.iter().zip(du.value(p)) {
                    assert!((a - b).abs() < 1e-7, "s={s} i={i}");
                }
            }
        }
    }

    #[test]
    fn locality_of_face_dofs() {
        // a bump centred on the base face only moves base and volume DOFs
        let it = Interpolator::new(0, 3).unwrap();
        let num = it.numeric_dofs(6);
        let (u, _) = smooth_sample(0, 0);
        let bump = |p: [f64; 3]| {
            let r2 = ((p[0] - 0.5).powi(2) + (p[1] - 0.5).powi(2) + p[2] * p[2]) / 0.04;
            if r2 < 1.0 {
                (1.0 - 1.0 / (1.0 - r2)).exp()
            } else {
                0.0
            }
        };
        let v = CallableField {
            degree: 0,
            value: Box::new(move |p| vec![scalar_sample(0, p).0 + bump(p)]),
            derivative: Box::new(move |p| scalar_sample(0, p).1.to_vec()),
        };
        let a = num.apply(&u).unwrap();
        let b = num.apply(&v).unwrap();
        let mut moved = false;
        for (i, d) in it.dofs.dofs.iter().enumerate() {
            let changed = (a[i] - b[i]).abs() > 1e-10;
            match d.entity {
                Entity::Face(Face::Base) => moved |= changed,
                Entity::Volume => {}
                _ => assert!(!changed, "{}", d.label()),
            }
        }
        assert!(moved);
    }

    #[test]
    fn counterexample_properties() {
        let (st, w) = check_counterexample(6).unwrap();
        assert_eq!(st, Status::Pass, "{w}");
        assert_eq!(w["unknowns"], 84);
        // an interpolation gap is observed
        assert!(w["interpolation_gap_k2"].as_f64().unwrap() > 0.0);
    }

    #[test]
    fn counterexample_energy_matches_cartesian_quadrature() {
        let u = counterexample_field();
        let g = u.exterior_derivative().unwrap();
        let exact = g.dot(&g).integrate().unwrap().to_f64().unwrap();
        let q = crate::quadrature::build_quadrature(8);
        let approx = q.integrate(|p| g.eval_f64(p).iter().map(|x| x * x).sum());
        assert!((exact - approx).abs() < 1e-12, "{exact} vs {approx}");
        assert!(exact > 0.0 && exact < rat(1, 1).to_f64().unwrap());
    }

    #[test]
    fn polynomial_traces_feasible_for_polynomials() {
        // traces of an actual polynomial are matched
        let p = &Poly::mono(1, 0, 1) + &Poly::mono(0, 2, 0);
        let u = FormField::from_cartesian(0, &[p]).unwrap();
        let traces: Vec<(Face, Poly)> =
            FACES.iter().map(|f| (*f, u.trace(*f).unwrap().to_cartesian().unwrap().remove(0))).collect();
        assert!(polynomial_with_traces_exists(&traces, 2).0);
    }

    #[test]
    fn default_quadrature_is_exact_on_the_spaces() {
        // sweep n on random members; exact by n = k + 3
        for k in 1..=2 {
            for s in 0..4 {
                let it = Interpolator::new(s, k).unwrap();
                let mut rng = ChaCha8Rng::seed_from_u64(11);
                let fields: Vec<FormField> = (0..4)
                    .map(|_| it.field(&(0..it.basis.len()).map(|_| int(rng.gen_range(-5..=5))).collect::<Vec<_>>()))
                    .collect();
                let exact: Vec<Vec<f64>> = fields
                    .iter()
                    .map(|f| it.dofs.apply_exact(f).unwrap().iter().map(|q| q.to_f64().unwrap()).collect())
                    .collect();
                let err = |n: usize| {
                    let num = it.numeric_dofs(n);
                    fields.iter().zip(&exact).fold(0f64, |m, (f, e)| {
                        let a = num.apply(&ExactField::new(f).unwrap()).unwrap();
                        let scale = e.iter().fold(0f64, |m, x| m.max(x.abs()));
                        m.max(e.iter().zip(&a).fold(0f64, |m, (x, y)| m.max((x - y).abs())) / scale)
                    })
                };
                let first = (1..=k as usize + 4).find(|&n| err(n) <= 1e-12).unwrap();
                assert!(first <= k as usize + 3, "s={s} k={k}: first exact n = {first}");
                assert!(err(k as usize + 4) <= 1e-12);
            }
        }
    }
}
