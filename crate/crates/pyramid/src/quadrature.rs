//! Gauss rules on `[0, 1]` and the collapsed tensor rule on the pyramid.

use nalgebra::{DMatrix, SymmetricEigen};

/// Gauss–Jacobi rule for the weight `(1-x)^alpha (1+x)^beta` on `[-1, 1]`,
/// from the eigen-decomposition of the Jacobi matrix.
pub fn gauss_jacobi(n: usize, alpha: f64, beta: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let ab = alpha + beta;
    let mut j = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let k = i as f64;
        j[(i, i)] = if i == 0 {
            (beta - alpha) / (ab + 2.0)
        } else {
            (beta * beta - alpha * alpha) / ((2.0 * k + ab) * (2.0 * k + ab + 2.0))
        };
        if i + 1 < n {
            let k = k + 1.0;
            let num = 4.0 * k * (k + alpha) * (k + beta) * (k + ab);
            let den = (2.0 * k + ab).powi(2) * (2.0 * k + ab + 1.0) * (2.0 * k + ab - 1.0);
            let b = (num / den).sqrt();
            j[(i, i + 1)] = b;
            j[(i + 1, i)] = b;
        }
    }
    let mu0 = 2f64.powf(ab + 1.0) * gamma(alpha + 1.0) * gamma(beta + 1.0) / gamma(ab + 2.0);
    let eig = SymmetricEigen::new(j);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], mu0 * eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

// integer and half-integer arguments are all we need
fn gamma(x: f64) -> f64 {
    if x == 1.0 || x == 2.0 {
        return 1.0;
    }
    if x > 2.0 {
        return (x - 1.0) * gamma(x - 1.0);
    }
    if x == 0.5 {
        return std::f64::consts::PI.sqrt();
    }
    if x == 1.5 {
        return 0.5 * std::f64::consts::PI.sqrt();
    }
    panic!("gamma({x}) not supported")
}

/// Gauss–Legendre on `[0, 1]`.
pub fn legendre01(n: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_jacobi(n, 0.0, 0.0);
    (x.iter().map(|t| 0.5 * (t + 1.0)).collect(), w.iter().map(|w| 0.5 * w).collect())
}

/// Gauss–Jacobi on `[0, 1]` for the weight `(1-c)^alpha`.
pub fn jacobi01(n: usize, alpha: u32) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_jacobi(n, alpha as f64, 0.0);
    let scale = 0.5f64.powi(alpha as i32 + 1);
    (x.iter().map(|t| 0.5 * (t + 1.0)).collect(), w.iter().map(|w| scale * w).collect())
}

/// Tensor rule on the pyramid in collapsed coordinates `(a, b, c)`, with the
/// volume factor `(1-c)^2` folded into the `c` weights, plus the line rule
/// used for edges and faces.
#[derive(Clone, Debug)]
pub struct Quadrature {
    pub n: usize,
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub line: (Vec<f64>, Vec<f64>),
}

impl Quadrature {
    /// Per-direction polynomial degree integrated exactly.
    pub fn exactness(&self) -> usize {
        2 * self.n - 1
    }

    /// Cartesian finite-pyramid point of a collapsed point.
    pub fn cartesian(p: &[f64; 3]) -> [f64; 3] {
        [(1.0 - p[2]) * p[0], (1.0 - p[2]) * p[1], p[2]]
    }

    pub fn integrate(&self, f: impl Fn(&[f64; 3]) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(p, w)| w * f(p)).sum()
    }
}

pub fn build_quadrature(n: usize) -> Quadrature {
    let line = legendre01(n);
    let (cx, cw) = jacobi01(n, 2);
    let mut points = Vec::with_capacity(n * n * n);
    let mut weights = Vec::with_capacity(n * n * n);
    for (a, wa) in line.0.iter().zip(&line.1) {
        for (b, wb) in line.0.iter().zip(&line.1) {
            for (c, wc) in cx.iter().zip(&cw) {
                points.push([*a, *b, *c]);
                weights.push(wa * wb * wc);
            }
        }
    }
    Quadrature { n, points, weights, line }
}
