//! Manufactured solution with closed-form forcing.
//!
//! Verification runs use the exact pair
//!
//! ```text
//! u_ex(x, y, t) = c11 exp(-t c_l) sin(2 pi r y) (cos(2 pi l x) - 1)
//! v_ex(x, y, t) = c12 exp(c2 sin(c_l t)) sin(2 pi r x) sin(2 pi l y)
//! ```
//!
//! which vanishes on the boundary of the unit square for integer mode
//! numbers. Substituting the pair into the split Ginzburg-Landau system
//! yields forcing terms in closed form, so no symbolic or numerical
//! differentiation is involved anywhere in the pipeline; a finite-difference
//! residual check in the tests guards the algebra.

use crate::evolve::FieldPair;
use crate::space::DGSpace;

/// Parameters of the manufactured solution. `Default` gives the
/// configuration used throughout the verification tables: amplitudes 1,
/// decay/oscillation rate 1, modes (1, 1), and oscillation amplitude 0.4.
#[derive(Debug, Clone, Copy)]
pub struct ExactSolution {
    /// Amplitude of the real component.
    pub c11: f64,
    /// Amplitude of the imaginary component.
    pub c12: f64,
    /// Exponential decay rate of u_ex and phase rate of v_ex.
    pub c_l: f64,
    /// Oscillation amplitude in the exponent of v_ex.
    pub c2: f64,
    /// Mode number r (y-frequency of u_ex, x-frequency of v_ex).
    pub mode_r: f64,
    /// Mode number l (x-frequency of u_ex, y-frequency of v_ex).
    pub mode_l: f64,
}

impl Default for ExactSolution {
    fn default() -> Self {
        ExactSolution { c11: 1.0, c12: 1.0, c_l: 1.0, c2: 0.4, mode_r: 1.0, mode_l: 1.0 }
    }
}

/// Selects one component of the complex-valued solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    Real,
    Imag,
}

const TAU: f64 = 2.0 * std::f64::consts::PI;

impl ExactSolution {
    /// Real part u_ex.
    pub fn real(&self, x: f64, y: f64, t: f64) -> f64 {
        self.c11
            * (-t * self.c_l).exp()
            * (TAU * self.mode_r * y).sin()
            * ((TAU * self.mode_l * x).cos() - 1.0)
    }

    /// Imaginary part v_ex.
    pub fn imag(&self, x: f64, y: f64, t: f64) -> f64 {
        self.c12
            * (self.c2 * (self.c_l * t).sin()).exp()
            * (TAU * self.mode_r * x).sin()
            * (TAU * self.mode_l * y).sin()
    }

    pub fn eval(&self, component: Component, x: f64, y: f64, t: f64) -> f64 {
        match component {
            Component::Real => self.real(x, y, t),
            Component::Imag => self.imag(x, y, t),
        }
    }

    /// d/dt u_ex = -c_l u_ex.
    pub fn real_dt(&self, x: f64, y: f64, t: f64) -> f64 {
        -self.c_l * self.real(x, y, t)
    }

    /// d/dt v_ex = c2 c_l cos(c_l t) v_ex.
    pub fn imag_dt(&self, x: f64, y: f64, t: f64) -> f64 {
        self.c2 * self.c_l * (self.c_l * t).cos() * self.imag(x, y, t)
    }

    /// laplace(u_ex): the sin factor contributes -(2 pi r)^2 u_ex; the cosine
    /// factor contributes -(2 pi l)^2 on the cos term only, which regenerates
    /// u_ex plus a constant-in-x remainder.
    pub fn real_laplacian(&self, x: f64, y: f64, t: f64) -> f64 {
        let kr = TAU * self.mode_r;
        let kl = TAU * self.mode_l;
        let u = self.real(x, y, t);
        let cos_part =
            self.c11 * (-t * self.c_l).exp() * (kr * y).sin() * (kl * x).cos();
        -kr * kr * u - kl * kl * cos_part
    }

    /// laplace(v_ex) = -((2 pi r)^2 + (2 pi l)^2) v_ex.
    pub fn imag_laplacian(&self, x: f64, y: f64, t: f64) -> f64 {
        let kr = TAU * self.mode_r;
        let kl = TAU * self.mode_l;
        -(kr * kr + kl * kl) * self.imag(x, y, t)
    }

    /// Forcing for the real equation, from substituting the pair into
    /// `du1/dt = u1 + laplace(u1) - a laplace(u2) - |u|^2 (u1 - b u2) + f1`.
    pub fn forcing_real(&self, a: f64, b: f64, x: f64, y: f64, t: f64) -> f64 {
        let u = self.real(x, y, t);
        let v = self.imag(x, y, t);
        let modulus = u * u + v * v;
        self.real_dt(x, y, t) - u - self.real_laplacian(x, y, t)
            + a * self.imag_laplacian(x, y, t)
            + modulus * (u - b * v)
    }

    /// Forcing for the imaginary equation, from
    /// `du2/dt = u2 + laplace(u2) + a laplace(u1) - |u|^2 (u2 + b u1) + f2`.
    pub fn forcing_imag(&self, a: f64, b: f64, x: f64, y: f64, t: f64) -> f64 {
        let u = self.real(x, y, t);
        let v = self.imag(x, y, t);
        let modulus = u * u + v * v;
        self.imag_dt(x, y, t) - v - self.imag_laplacian(x, y, t)
            - a * self.real_laplacian(x, y, t)
            + modulus * (v + b * u)
    }

    pub fn forcing(&self, component: Component, a: f64, b: f64, x: f64, y: f64, t: f64) -> f64 {
        match component {
            Component::Real => self.forcing_real(a, b, x, y, t),
            Component::Imag => self.forcing_imag(a, b, x, y, t),
        }
    }

    /// Closed-form squared L2(Omega) norm of u_ex at time t, valid for
    /// integer mode numbers: int sin^2 = 1/2 and int (cos - 1)^2 = 3/2
    /// factorize, giving (3/4) c11^2 exp(-2 t c_l).
    pub fn real_l2_squared(&self, t: f64) -> f64 {
        0.75 * self.c11 * self.c11 * (-2.0 * t * self.c_l).exp()
    }

    /// Closed-form squared L2(Omega) norm of v_ex at time t (integer modes):
    /// (1/4) c12^2 exp(2 c2 sin(c_l t)).
    pub fn imag_l2_squared(&self, t: f64) -> f64 {
        0.25 * self.c12 * self.c12 * (2.0 * self.c2 * (self.c_l * t).sin()).exp()
    }
}

/// Strong-form PDE residuals of the exact pair at one space-time point, with
/// every derivative replaced by a second-order central difference of the
/// given step and the implemented closed-form forcing inserted.
///
/// Each residual is normalized by the sum of the magnitudes of the terms in
/// its equation. The raw truncation error of a step-`1e-4` five-point
/// Laplacian on these solutions reaches a few times `1e-6` near extremal
/// points (fourth derivatives of order `(2 pi)^4`), so an absolute bound
/// would measure the stencil rather than the forcing algebra; the relative
/// form stays below `1e-7` when the algebra is right and jumps to O(1) when
/// any term or sign is wrong.
pub fn strong_form_residuals(
    exact: &ExactSolution,
    a: f64,
    b: f64,
    x: f64,
    y: f64,
    t: f64,
    step: f64,
) -> (f64, f64) {
    let h = step;
    let u = exact.real(x, y, t);
    let v = exact.imag(x, y, t);
    let modulus = u * u + v * v;
    let du_dt = (exact.real(x, y, t + h) - exact.real(x, y, t - h)) / (2.0 * h);
    let dv_dt = (exact.imag(x, y, t + h) - exact.imag(x, y, t - h)) / (2.0 * h);
    let lap = |f: &dyn Fn(f64, f64) -> f64| {
        (f(x + h, y) + f(x - h, y) + f(x, y + h) + f(x, y - h) - 4.0 * f(x, y)) / (h * h)
    };
    let lap_u = lap(&|x, y| exact.real(x, y, t));
    let lap_v = lap(&|x, y| exact.imag(x, y, t));
    let f1 = exact.forcing_real(a, b, x, y, t);
    let f2 = exact.forcing_imag(a, b, x, y, t);
    let r1 = du_dt - (u + lap_u - a * lap_v - modulus * (u - b * v) + f1);
    let r2 = dv_dt - (v + lap_v + a * lap_u - modulus * (v + b * u) + f2);
    let scale1 = 1.0
        + du_dt.abs()
        + u.abs()
        + lap_u.abs()
        + (a * lap_v).abs()
        + (modulus * (u - b * v)).abs()
        + f1.abs();
    let scale2 = 1.0
        + dv_dt.abs()
        + v.abs()
        + lap_v.abs()
        + (a * lap_u).abs()
        + (modulus * (v + b * u)).abs()
        + f2.abs();
    (r1.abs() / scale1, r2.abs() / scale2)
}

/// Initial discrete state: component-wise L2 projection of the exact pair at
/// t = 0.
pub fn initial_fields(space: &DGSpace, exact: &ExactSolution) -> FieldPair {
    FieldPair {
        u1: space.project_l2(|x, y| exact.real(x, y, 0.0)),
        u2: space.project_l2(|x, y| exact.imag(x, y, 0.0)),
        t: 0.0,
    }
}
