//! Quadrature rules on the reference triangle and the unit segment.
//!
//! Volume rules are built from a tensor Gauss-Legendre grid on the unit
//! square collapsed onto the reference triangle `{(x, y) : x, y >= 0,
//! x + y <= 1}` (Duffy transform), which gives exactness for any requested
//! polynomial degree without tabulated point sets. Edge rules are plain
//! Gauss-Legendre on `[0, 1]`.

use thiserror::Error;

/// Largest polynomial degree either rule constructor accepts. Generous enough
/// for the `4 r` volume exactness needed by the nonlinear term at the
/// polynomial degrees this solver targets.
pub const MAX_DEGREE: usize = 64;

#[derive(Debug, Error)]
pub enum QuadratureError {
    #[error("requested exactness degree {0} exceeds the supported maximum {MAX_DEGREE}")]
    UnsupportedDegree(usize),
}

/// Points and weights of a quadrature rule, generic over the point type:
/// `[f64; 2]` reference-triangle coordinates for volume rules, a scalar
/// parameter in `[0, 1]` for edge rules.
#[derive(Debug, Clone)]
pub struct QuadratureRule<P> {
    pub points: Vec<P>,
    pub weights: Vec<f64>,
    /// Degree up to which the rule integrates polynomials exactly.
    pub degree: usize,
}

pub type TriangleRule = QuadratureRule<[f64; 2]>;
pub type SegmentRule = QuadratureRule<f64>;

/// Gauss-Legendre nodes and weights on `[-1, 1]`, by Newton iteration on the
/// Legendre recurrence. Accurate to machine precision for the sizes used here.
fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 1);
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m {
        // Standard initial guess for the i-th root of P_m, descending in x.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(m, x);
            dp = d;
            let dx = -p / dp;
            x += dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[m - 1 - i] = x; // store ascending
        weights[m - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Evaluates `(P_m(x), P_m'(x))` via the three-term recurrence.
fn legendre_with_derivative(m: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = x;
    if m == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=m {
        let kf = k as f64;
        let p_next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * p_prev) / kf;
        p_prev = p;
        p = p_next;
    }
    let dp = m as f64 * (x * p - p_prev) / (x * x - 1.0);
    (p, dp)
}

/// Gauss-Legendre nodes and weights mapped to `[0, 1]`; weights sum to 1.
pub fn gauss_legendre_unit(m: usize) -> (Vec<f64>, Vec<f64>) {
    let (nodes, weights) = gauss_legendre(m);
    (
        nodes.iter().map(|x| 0.5 * (x + 1.0)).collect(),
        weights.iter().map(|w| 0.5 * w).collect(),
    )
}

/// Rule on the reference triangle exact for polynomials of total degree
/// `degree`. Weights sum to the reference area 1/2.
pub fn volume_rule(degree: usize) -> Result<TriangleRule, QuadratureError> {
    if degree > MAX_DEGREE {
        return Err(QuadratureError::UnsupportedDegree(degree));
    }
    // Under x = u, y = v (1 - u) the integrand gains a factor (1 - u); a
    // degree-d polynomial becomes degree d + 1 in u and degree d in v, so
    // m points need 2m - 1 >= d + 1.
    let m = (degree + 2).div_ceil(2);
    let (u, wu) = gauss_legendre_unit(m);
    let (v, wv) = gauss_legendre_unit(m);
    let mut points = Vec::with_capacity(m * m);
    let mut weights = Vec::with_capacity(m * m);
    for i in 0..m {
        for j in 0..m {
            points.push([u[i], v[j] * (1.0 - u[i])]);
            weights.push(wu[i] * wv[j] * (1.0 - u[i]));
        }
    }
    Ok(TriangleRule { points, weights, degree })
}

/// Rule on `[0, 1]` exact for polynomials of degree `degree`; weights sum to 1.
pub fn edge_rule(degree: usize) -> Result<SegmentRule, QuadratureError> {
    if degree > MAX_DEGREE {
        return Err(QuadratureError::UnsupportedDegree(degree));
    }
    let m = (degree + 1).div_ceil(2).max(1);
    let (points, weights) = gauss_legendre_unit(m);
    Ok(SegmentRule { points, weights, degree })
}
