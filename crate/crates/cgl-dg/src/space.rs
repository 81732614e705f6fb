//! Broken polynomial spaces on triangulated meshes.
//!
//! Each element carries an independent nodal Lagrange basis of total degree
//! `r` on the principal lattice of the reference triangle, so a discrete
//! field is a flat coefficient vector with `(r+1)(r+2)/2` entries per
//! element and no inter-element continuity. All physical-element work is
//! done through the affine map from the reference triangle.

use faer::linalg::solvers::Solve;
use faer::Mat;
use thiserror::Error;

use crate::mesh::{Mesh, MeshError};
use crate::quadrature::{edge_rule, volume_rule, QuadratureError, SegmentRule, TriangleRule};

#[derive(Debug, Error)]
pub enum SpaceError {
    #[error("polynomial degree must be between 1 and 15")]
    UnsupportedDegree,
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    /// Should be unreachable for valid geometry; reported rather than
    /// silently producing garbage coefficients.
    #[error("reference basis construction is singular (internal error)")]
    SingularBasis,
    #[error("coefficient vector has length {got}, expected {expected}")]
    CoefficientLength { got: usize, expected: usize },
}

/// Affine map from the reference triangle to a physical element.
#[derive(Debug, Clone, Copy)]
pub struct ElementMap {
    pub origin: [f64; 2],
    /// Jacobian with columns (p1 - p0) and (p2 - p0).
    pub jac: [[f64; 2]; 2],
    pub inv_jac: [[f64; 2]; 2],
    /// det(jac) = twice the element area; positive for CCW elements.
    pub det: f64,
}

impl ElementMap {
    pub fn to_physical(&self, r: [f64; 2]) -> [f64; 2] {
        [
            self.origin[0] + self.jac[0][0] * r[0] + self.jac[0][1] * r[1],
            self.origin[1] + self.jac[1][0] * r[0] + self.jac[1][1] * r[1],
        ]
    }

    pub fn to_reference(&self, p: [f64; 2]) -> [f64; 2] {
        let d = [p[0] - self.origin[0], p[1] - self.origin[1]];
        [
            self.inv_jac[0][0] * d[0] + self.inv_jac[0][1] * d[1],
            self.inv_jac[1][0] * d[0] + self.inv_jac[1][1] * d[1],
        ]
    }

    /// Push a reference gradient forward: grad_x = J^{-T} grad_ref.
    pub fn grad_to_physical(&self, g: [f64; 2]) -> [f64; 2] {
        [
            self.inv_jac[0][0] * g[0] + self.inv_jac[1][0] * g[1],
            self.inv_jac[0][1] * g[0] + self.inv_jac[1][1] * g[1],
        ]
    }
}

/// Nodal Lagrange basis of total degree `r` on the reference triangle,
/// stored as monomial coefficients obtained by inverting the generalized
/// Vandermonde matrix of the principal lattice `(i/r, j/r), i + j <= r`.
#[derive(Debug, Clone)]
struct NodalBasis {
    k: usize,
    /// Monomial exponents (a, b) for x^a y^b, in (j, i)-lexicographic order.
    exponents: Vec<(u32, u32)>,
    /// Lattice nodes, same ordering as the basis functions they pin down.
    #[allow(dead_code)]
    nodes: Vec<[f64; 2]>,
    /// coeffs[m * k + p] multiplies monomial m in basis function p.
    coeffs: Vec<f64>,
    degree: usize,
}

impl NodalBasis {
    fn new(degree: usize) -> Result<Self, SpaceError> {
        // Upper bound keeps the fixed-size power buffers in `eval` valid.
        if degree == 0 || degree > 15 {
            return Err(SpaceError::UnsupportedDegree);
        }
        let r = degree;
        let k = (r + 1) * (r + 2) / 2;
        let mut nodes = Vec::with_capacity(k);
        let mut exponents = Vec::with_capacity(k);
        for j in 0..=r {
            for i in 0..=(r - j) {
                nodes.push([i as f64 / r as f64, j as f64 / r as f64]);
                exponents.push((i as u32, j as u32));
            }
        }
        // V[p][m] = node_p^exponent_m; basis coefficients are V^{-1}.
        let v = Mat::from_fn(k, k, |p, m| {
            let (a, b) = exponents[m];
            nodes[p][0].powi(a as i32) * nodes[p][1].powi(b as i32)
        });
        let inv = v.partial_piv_lu().solve(Mat::<f64>::identity(k, k));
        // Guard against a silently degenerate solve.
        let mut defect: f64 = 0.0;
        for p in 0..k {
            for q in 0..k {
                let mut s = 0.0;
                for m in 0..k {
                    s += v[(p, m)] * inv[(m, q)];
                }
                let target = if p == q { 1.0 } else { 0.0 };
                defect = defect.max((s - target).abs());
            }
        }
        if !defect.is_finite() || defect > 1e-8 {
            return Err(SpaceError::SingularBasis);
        }
        let mut coeffs = vec![0.0; k * k];
        for m in 0..k {
            for p in 0..k {
                coeffs[m * k + p] = inv[(m, p)];
            }
        }
        Ok(NodalBasis { k, exponents, nodes, coeffs, degree })
    }

    /// Values (and reference gradients) of all basis functions at one
    /// reference point.
    fn eval(&self, r: [f64; 2], values: &mut [f64], mut grads: Option<&mut [[f64; 2]]>) {
        let deg = self.degree;
        let mut xp = [1.0f64; 16];
        let mut yp = [1.0f64; 16];
        for i in 1..=deg {
            xp[i] = xp[i - 1] * r[0];
            yp[i] = yp[i - 1] * r[1];
        }
        values.fill(0.0);
        if let Some(g) = grads.as_deref_mut() {
            g.fill([0.0, 0.0]);
        }
        for (m, &(a, b)) in self.exponents.iter().enumerate() {
            let (a, b) = (a as usize, b as usize);
            let mono = xp[a] * yp[b];
            let dx = if a > 0 { a as f64 * xp[a - 1] * yp[b] } else { 0.0 };
            let dy = if b > 0 { b as f64 * xp[a] * yp[b - 1] } else { 0.0 };
            for p in 0..self.k {
                let c = self.coeffs[m * self.k + p];
                values[p] += c * mono;
                if let Some(g) = grads.as_deref_mut() {
                    g[p][0] += c * dx;
                    g[p][1] += c * dy;
                }
            }
        }
    }
}

/// A discontinuous Galerkin space: mesh, reference basis, and the quadrature
/// rules every operator assembly over this space shares.
#[derive(Debug, Clone)]
pub struct DGSpace {
    mesh: Mesh,
    basis: NodalBasis,
    volume: TriangleRule,
    edge: SegmentRule,
    /// Basis values at volume quadrature points: `[q * k + p]`.
    vol_values: Vec<f64>,
    /// Reference gradients at volume quadrature points, same layout.
    vol_grads: Vec<[f64; 2]>,
    /// Inverse of the reference mass matrix, row-major k x k.
    ref_mass_inv: Vec<f64>,
}

impl DGSpace {
    pub fn new(mesh: Mesh, degree: usize) -> Result<Self, SpaceError> {
        let basis = NodalBasis::new(degree)?;
        let k = basis.k;
        // 4r exactness covers the frozen-modulus reaction term |w|^2 u v with
        // all four factors of degree r; 2r + 1 covers every face integrand.
        let volume = volume_rule(4 * degree)?;
        let edge = edge_rule(2 * degree + 1)?;

        let nq = volume.points.len();
        let mut vol_values = vec![0.0; nq * k];
        let mut vol_grads = vec![[0.0; 2]; nq * k];
        for (q, &pt) in volume.points.iter().enumerate() {
            basis.eval(
                pt,
                &mut vol_values[q * k..(q + 1) * k],
                Some(&mut vol_grads[q * k..(q + 1) * k]),
            );
        }

        // Reference mass matrix and its inverse; every physical element mass
        // matrix is `det * M_ref` because the map is affine.
        let mut mref = Mat::<f64>::zeros(k, k);
        for q in 0..nq {
            let w = volume.weights[q];
            for i in 0..k {
                for j in 0..k {
                    mref[(i, j)] += w * vol_values[q * k + i] * vol_values[q * k + j];
                }
            }
        }
        let minv = mref.partial_piv_lu().solve(Mat::<f64>::identity(k, k));
        let mut ref_mass_inv = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..k {
                let v = minv[(i, j)];
                if !v.is_finite() {
                    return Err(SpaceError::SingularBasis);
                }
                ref_mass_inv[i * k + j] = v;
            }
        }

        Ok(DGSpace { mesh, basis, volume, edge, vol_values, vol_grads, ref_mass_inv })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.basis.degree
    }

    pub fn dofs_per_element(&self) -> usize {
        self.basis.k
    }

    pub fn total_dofs(&self) -> usize {
        self.basis.k * self.mesh.num_elements()
    }

    pub fn dof_range(&self, element: usize) -> std::ops::Range<usize> {
        let k = self.basis.k;
        element * k..(element + 1) * k
    }

    pub fn volume_quadrature(&self) -> &TriangleRule {
        &self.volume
    }

    pub fn edge_quadrature(&self) -> &SegmentRule {
        &self.edge
    }

    /// Precomputed basis values and reference gradients at the volume
    /// quadrature points, laid out `[q * k + p]`.
    pub fn volume_tables(&self) -> (&[f64], &[[f64; 2]]) {
        (&self.vol_values, &self.vol_grads)
    }

    pub fn element_map(&self, element: usize) -> Result<ElementMap, SpaceError> {
        let [p0, p1, p2] = self.mesh.element_coords(element)?;
        let jac = [[p1[0] - p0[0], p2[0] - p0[0]], [p1[1] - p0[1], p2[1] - p0[1]]];
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let inv_jac = [
            [jac[1][1] / det, -jac[0][1] / det],
            [-jac[1][0] / det, jac[0][0] / det],
        ];
        Ok(ElementMap { origin: p0, jac, inv_jac, det })
    }

    /// Values and physical gradients of all local basis functions of one
    /// element at a physical point (expected inside the element's closure,
    /// e.g. a quadrature point of the element or one of its edges).
    pub fn eval_basis(
        &self,
        element: usize,
        point: [f64; 2],
    ) -> Result<(Vec<f64>, Vec<[f64; 2]>), SpaceError> {
        let map = self.element_map(element)?;
        let k = self.basis.k;
        let mut values = vec![0.0; k];
        let mut grads = vec![[0.0; 2]; k];
        self.basis.eval(map.to_reference(point), &mut values, Some(&mut grads));
        for g in grads.iter_mut() {
            *g = map.grad_to_physical(*g);
        }
        Ok((values, grads))
    }

    /// Evaluates a discrete field (flat coefficient vector) at a physical
    /// point inside the given element.
    pub fn eval_field(
        &self,
        coeffs: &[f64],
        element: usize,
        point: [f64; 2],
    ) -> Result<f64, SpaceError> {
        self.check_len(coeffs)?;
        let (values, _) = self.eval_basis(element, point)?;
        let local = &coeffs[self.dof_range(element)];
        Ok(values.iter().zip(local).map(|(v, c)| v * c).sum())
    }

    /// Element-wise L2 projection of a scalar field onto the space. The local
    /// mass solve reuses the reference inverse, rescaled by the affine
    /// Jacobian determinant.
    pub fn project_l2(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let k = self.basis.k;
        let nq = self.volume.points.len();
        let mut coeffs = vec![0.0; self.total_dofs()];
        let mut moments = vec![0.0; k];
        for e in 0..self.mesh.num_elements() {
            let map = self.element_map(e).expect("element indices in range");
            moments.fill(0.0);
            for q in 0..nq {
                let p = map.to_physical(self.volume.points[q]);
                let scaled = self.volume.weights[q] * map.det * f(p[0], p[1]);
                for i in 0..k {
                    moments[i] += scaled * self.vol_values[q * k + i];
                }
            }
            let local = &mut coeffs[e * k..(e + 1) * k];
            for i in 0..k {
                let mut s = 0.0;
                for j in 0..k {
                    s += self.ref_mass_inv[i * k + j] * moments[j];
                }
                local[i] = s / map.det;
            }
        }
        coeffs
    }

    pub(crate) fn check_len(&self, coeffs: &[f64]) -> Result<(), SpaceError> {
        if coeffs.len() != self.total_dofs() {
            return Err(SpaceError::CoefficientLength {
                got: coeffs.len(),
                expected: self.total_dofs(),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn space(n: usize, degree: usize) -> DGSpace {
        DGSpace::new(Mesh::unit_square(n).unwrap(), degree).unwrap()
    }

    /// L2 error of a coefficient vector against a scalar field, by quadrature.
    fn l2_error(space: &DGSpace, coeffs: &[f64], f: impl Fn(f64, f64) -> f64) -> f64 {
        let k = space.dofs_per_element();
        let rule = space.volume_quadrature();
        let (values, _) = space.volume_tables();
        let mut err2 = 0.0;
        for e in 0..space.mesh().num_elements() {
            let map = space.element_map(e).unwrap();
            let local = &coeffs[space.dof_range(e)];
            for (q, &pt) in rule.points.iter().enumerate() {
                let p = map.to_physical(pt);
                let uh: f64 = (0..k).map(|i| local[i] * values[q * k + i]).sum();
                let d = uh - f(p[0], p[1]);
                err2 += rule.weights[q] * map.det * d * d;
            }
        }
        err2.sqrt()
    }

    #[test]
    fn rejects_degree_zero() {
        assert!(matches!(
            DGSpace::new(Mesh::unit_square(2).unwrap(), 0),
            Err(SpaceError::UnsupportedDegree)
        ));
    }

    #[test]
    fn dof_counts() {
        for (r, k) in [(1usize, 3usize), (2, 6), (3, 10)] {
            let s = space(2, r);
            assert_eq!(s.dofs_per_element(), k);
            assert_eq!(s.total_dofs(), 8 * k);
        }
    }

    #[test]
    fn basis_is_nodal() {
        for r in 1..=3usize {
            let basis = NodalBasis::new(r).unwrap();
            let mut values = vec![0.0; basis.k];
            for (q, &node) in basis.nodes.iter().enumerate() {
                basis.eval(node, &mut values, None);
                for p in 0..basis.k {
                    let expect = if p == q { 1.0 } else { 0.0 };
                    assert_relative_eq!(values[p], expect, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn partition_of_unity() {
        let s = space(3, 2);
        for &(x, y) in &[(0.31, 0.17), (0.05, 0.91), (0.66, 0.33)] {
            // locate the element containing (x, y) the dumb way
            for e in 0..s.mesh().num_elements() {
                let map = s.element_map(e).unwrap();
                let r = map.to_reference([x, y]);
                if r[0] >= -1e-12 && r[1] >= -1e-12 && r[0] + r[1] <= 1.0 + 1e-12 {
                    let (values, grads) = s.eval_basis(e, [x, y]).unwrap();
                    let sum: f64 = values.iter().sum();
                    assert_relative_eq!(sum, 1.0, epsilon = 1e-12);
                    let gx: f64 = grads.iter().map(|g| g[0]).sum();
                    let gy: f64 = grads.iter().map(|g| g[1]).sum();
                    assert_relative_eq!(gx, 0.0, epsilon = 1e-10);
                    assert_relative_eq!(gy, 0.0, epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn projection_reproduces_polynomials() {
        let s = space(2, 1);
        let f = |x: f64, y: f64| 2.0 * x - 3.0 * y + 1.0;
        let coeffs = s.project_l2(f);
        assert!(l2_error(&s, &coeffs, f) < 1e-13);

        let s2 = space(2, 2);
        let g = |x: f64, y: f64| x * x - 0.5 * x * y + y - 2.0;
        let coeffs2 = s2.project_l2(g);
        assert!(l2_error(&s2, &coeffs2, g) < 1e-13);
    }

    #[test]
    fn projected_gradient_of_linear_is_constant() {
        let s = space(2, 1);
        let coeffs = s.project_l2(|x, y| 2.0 * x - 3.0 * y + 1.0);
        for e in 0..s.mesh().num_elements() {
            let map = s.element_map(e).unwrap();
            let mid = map.to_physical([1.0 / 3.0, 1.0 / 3.0]);
            let (_, grads) = s.eval_basis(e, mid).unwrap();
            let local = &coeffs[s.dof_range(e)];
            let gx: f64 = (0..3).map(|i| local[i] * grads[i][0]).sum();
            let gy: f64 = (0..3).map(|i| local[i] * grads[i][1]).sum();
            assert_relative_eq!(gx, 2.0, epsilon = 1e-11);
            assert_relative_eq!(gy, -3.0, epsilon = 1e-11);
        }
    }

    #[test]
    fn projection_error_is_second_order() {
        let f = |x: f64, y: f64| (2.0 * std::f64::consts::PI * x).sin()
            * (2.0 * std::f64::consts::PI * y).sin();
        let coarse = space(4, 1);
        let fine = space(8, 1);
        let e_coarse = l2_error(&coarse, &coarse.project_l2(f), f);
        let e_fine = l2_error(&fine, &fine.project_l2(f), f);
        let ratio = e_coarse / e_fine;
        assert!(
            (3.0..5.5).contains(&ratio),
            "expected ~4x error reduction, got {ratio}"
        );
    }

    #[test]
    fn coefficient_length_is_checked() {
        let s = space(2, 1);
        assert!(matches!(
            s.eval_field(&[0.0; 5], 0, [0.1, 0.1]),
            Err(SpaceError::CoefficientLength { .. })
        ));
    }

    #[test]
    fn element_out_of_range_is_reported() {
        let s = space(2, 1);
        assert!(s.eval_basis(s.mesh().num_elements(), [0.5, 0.5]).is_err());
    }
}
