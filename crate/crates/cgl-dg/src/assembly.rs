//! Interior-penalty DG operator assembly.
//!
//! The bilinear form behind `assemble_stiffness` is
//!
//! ```text
//! a_h(u, v) = sum_K int grad u . grad v
//!           - sum_e int {grad u} . [v]
//!           + eps * sum_e int {grad v} . [u]
//!           + sum_e (sigma / h_e) int [u] . [v]
//! ```
//!
//! with vector jumps `[w] = (w_left - w_right) n_e` and averages
//! `{w} = (w_left + w_right) / 2` on interior edges. Edge sums run over
//! boundary edges too, where the trace from outside is replaced by the
//! (zero) Dirichlet data: `{w} = w` and `[w] = w n`. This imposes the
//! boundary condition weakly in the Nitsche sense, so no rows are ever
//! eliminated. The switch `eps` selects the classical variants: -1 gives
//! the symmetric method (SIPG), +1 the non-symmetric one (NIPG), and 0
//! the incomplete one (IIPG).

use thiserror::Error;

use crate::space::{DGSpace, SpaceError};
use crate::sparse::{SparseError, SparseMatrix};

#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error("penalty parameter sigma must be positive, got {0}")]
    NonPositivePenalty(f64),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Sparse(#[from] SparseError),
}

/// The three interior-penalty variants, distinguished by the sign of the
/// adjoint consistency term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IPVariant {
    /// Symmetric interior penalty: eps = -1.
    Sipg,
    /// Non-symmetric interior penalty: eps = +1; coercive for any sigma > 0.
    Nipg,
    /// Incomplete interior penalty: eps = 0.
    Iipg,
}

impl IPVariant {
    pub fn epsilon(self) -> f64 {
        match self {
            IPVariant::Sipg => -1.0,
            IPVariant::Nipg => 1.0,
            IPVariant::Iipg => 0.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            IPVariant::Sipg => "sipg",
            IPVariant::Nipg => "nipg",
            IPVariant::Iipg => "iipg",
        }
    }

    pub fn parse(s: &str) -> Option<IPVariant> {
        match s.to_ascii_lowercase().as_str() {
            "sipg" => Some(IPVariant::Sipg),
            "nipg" => Some(IPVariant::Nipg),
            "iipg" => Some(IPVariant::Iipg),
            _ => None,
        }
    }
}

impl std::fmt::Display for IPVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Diffusion part of the scheme: broken gradients plus the interior-penalty
/// face terms described in the module docs.
pub fn assemble_stiffness(
    space: &DGSpace,
    variant: IPVariant,
    sigma: f64,
) -> Result<SparseMatrix, AssemblyError> {
    if !(sigma > 0.0) {
        return Err(AssemblyError::NonPositivePenalty(sigma));
    }
    let eps = variant.epsilon();
    let mesh = space.mesh();
    let k = space.dofs_per_element();
    let n_dofs = space.total_dofs();
    let mut triplets: Vec<(usize, usize, f64)> =
        Vec::with_capacity(mesh.num_elements() * k * k + mesh.num_edges() * 4 * k * k);

    // Volume term: int_K grad phi_i . grad phi_j.
    let rule = space.volume_quadrature();
    let (_, ref_grads) = space.volume_tables();
    let mut phys = vec![[0.0f64; 2]; k];
    for e in 0..mesh.num_elements() {
        let map = space.element_map(e)?;
        let base = e * k;
        let mut local = vec![0.0; k * k];
        for q in 0..rule.points.len() {
            for i in 0..k {
                phys[i] = map.grad_to_physical(ref_grads[q * k + i]);
            }
            let w = rule.weights[q] * map.det;
            for i in 0..k {
                for j in 0..k {
                    local[i * k + j] += w * (phys[i][0] * phys[j][0] + phys[i][1] * phys[j][1]);
                }
            }
        }
        for i in 0..k {
            for j in 0..k {
                triplets.push((base + i, base + j, local[i * k + j]));
            }
        }
    }

    // Face terms. For each quadrature point on an edge we collect traces of
    // all basis functions living on the adjacent element(s) into one flat
    // array: `jump[i]` carries the left/right sign, `avg_gn[i]` the (scaled)
    // normal derivative. Boundary edges use the one-sided trace with full
    // weight, which is what replaces the missing exterior trace by the
    // Dirichlet data.
    let erule = space.edge_quadrature();
    for edge in mesh.edges() {
        let a = mesh.vertices()[edge.vertices[0]];
        let b = mesh.vertices()[edge.vertices[1]];
        let n = edge.normal;
        let mut adjacent = [edge.left, usize::MAX];
        let sides = match edge.right {
            Some(r) => {
                adjacent[1] = r;
                2
            }
            None => 1,
        };
        let elems = &adjacent[..sides];
        let avg = if sides == 2 { 0.5 } else { 1.0 };
        let nd = sides * k;
        let mut local = vec![0.0; nd * nd];
        let mut val = vec![0.0; nd];
        let mut gn = vec![0.0; nd];
        for (q, &s) in erule.points.iter().enumerate() {
            let p = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
            for (side, &elem) in elems.iter().enumerate() {
                let (values, grads) = space.eval_basis(elem, p)?;
                for i in 0..k {
                    val[side * k + i] = values[i];
                    gn[side * k + i] = grads[i][0] * n[0] + grads[i][1] * n[1];
                }
            }
            let w = erule.weights[q] * edge.length;
            let pen = sigma / edge.length;
            for i in 0..nd {
                let sign_i = if i < k { 1.0 } else { -1.0 };
                let jump_i = sign_i * val[i];
                for j in 0..nd {
                    let sign_j = if j < k { 1.0 } else { -1.0 };
                    let jump_j = sign_j * val[j];
                    local[i * nd + j] += w
                        * (-avg * gn[j] * jump_i + eps * avg * gn[i] * jump_j
                            + pen * jump_i * jump_j);
                }
            }
        }
        let dof = |idx: usize| elems[idx / k] * k + idx % k;
        for i in 0..nd {
            for j in 0..nd {
                triplets.push((dof(i), dof(j), local[i * nd + j]));
            }
        }
    }

    Ok(SparseMatrix::from_triplets(n_dofs, n_dofs, &triplets)?)
}

/// Block-diagonal mass matrix int_K phi_i phi_j.
pub fn assemble_mass(space: &DGSpace) -> SparseMatrix {
    let k = space.dofs_per_element();
    let mesh = space.mesh();
    let rule = space.volume_quadrature();
    let (values, _) = space.volume_tables();
    let mut triplets = Vec::with_capacity(mesh.num_elements() * k * k);
    for e in 0..mesh.num_elements() {
        let map = space.element_map(e).expect("element index in range");
        let base = e * k;
        for i in 0..k {
            for j in 0..k {
                let mut acc = 0.0;
                for q in 0..rule.points.len() {
                    acc += rule.weights[q] * values[q * k + i] * values[q * k + j];
                }
                triplets.push((base + i, base + j, acc * map.det));
            }
        }
    }
    SparseMatrix::from_triplets(space.total_dofs(), space.total_dofs(), &triplets)
        .expect("indices in range by construction")
}

/// Writes the values of the frozen-modulus reaction matrix
/// `N(w)_ij = int (w1^2 + w2^2) phi_i phi_j` into `out`, laid out to match
/// the CSR value order of the block-diagonal pattern (element-major,
/// row-major within each k x k block). Shared by the public assembly entry
/// point and the time stepper's in-place refresh.
fn frozen_reaction_values(
    space: &DGSpace,
    w1: &[f64],
    w2: &[f64],
    out: &mut [f64],
) -> Result<(), AssemblyError> {
    space.check_len(w1).map_err(AssemblyError::Space)?;
    space.check_len(w2).map_err(AssemblyError::Space)?;
    let k = space.dofs_per_element();
    let rule = space.volume_quadrature();
    let (values, _) = space.volume_tables();
    debug_assert_eq!(out.len(), space.mesh().num_elements() * k * k);
    for e in 0..space.mesh().num_elements() {
        let map = space.element_map(e)?;
        let l1 = &w1[space.dof_range(e)];
        let l2 = &w2[space.dof_range(e)];
        let block = &mut out[e * k * k..(e + 1) * k * k];
        block.fill(0.0);
        for q in 0..rule.points.len() {
            let row = &values[q * k..(q + 1) * k];
            let a: f64 = row.iter().zip(l1).map(|(v, c)| v * c).sum();
            let bq: f64 = row.iter().zip(l2).map(|(v, c)| v * c).sum();
            let modulus = a * a + bq * bq;
            let w = rule.weights[q] * map.det * modulus;
            for i in 0..k {
                let wi = w * row[i];
                for j in 0..k {
                    block[i * k + j] += wi * row[j];
                }
            }
        }
    }
    Ok(())
}

/// Reaction matrix with the modulus frozen at the current Picard iterate:
/// `N(w)_ij = int (w1^2 + w2^2) phi_i phi_j`. Zero iterates give the zero
/// matrix; any iterate gives a positive semi-definite block-diagonal matrix.
pub fn assemble_frozen_reaction(
    space: &DGSpace,
    w1: &[f64],
    w2: &[f64],
) -> Result<SparseMatrix, AssemblyError> {
    let k = space.dofs_per_element();
    let nel = space.mesh().num_elements();
    let mut vals = vec![0.0; nel * k * k];
    frozen_reaction_values(space, w1, w2, &mut vals)?;
    let mut triplets = Vec::with_capacity(vals.len());
    for e in 0..nel {
        for i in 0..k {
            for j in 0..k {
                triplets.push((e * k + i, e * k + j, vals[e * k * k + i * k + j]));
            }
        }
    }
    Ok(SparseMatrix::from_triplets(space.total_dofs(), space.total_dofs(), &triplets)?)
}

/// Refreshes an existing frozen-reaction matrix in place. The matrix must
/// have been produced by [`assemble_frozen_reaction`] on the same space, so
/// its pattern (and therefore its CSR value order) is already correct.
pub fn refresh_frozen_reaction(
    space: &DGSpace,
    w1: &[f64],
    w2: &[f64],
    matrix: &mut SparseMatrix,
) -> Result<(), AssemblyError> {
    let k = space.dofs_per_element();
    let expected = space.mesh().num_elements() * k * k;
    if matrix.nnz() != expected {
        return Err(AssemblyError::Sparse(SparseError::DimensionMismatch(format!(
            "reaction matrix has {} stored entries, expected {}",
            matrix.nnz(),
            expected
        ))));
    }
    frozen_reaction_values(space, w1, w2, matrix.values_mut())
}

/// Load vector int f phi_i for a scalar field f(x, y). Time-dependent
/// forcing is handled by binding t in the closure.
pub fn assemble_load(space: &DGSpace, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    let k = space.dofs_per_element();
    let rule = space.volume_quadrature();
    let (values, _) = space.volume_tables();
    let mut load = vec![0.0; space.total_dofs()];
    for e in 0..space.mesh().num_elements() {
        let map = space.element_map(e).expect("element index in range");
        let local = &mut load[e * k..(e + 1) * k];
        for (q, &pt) in rule.points.iter().enumerate() {
            let p = map.to_physical(pt);
            let w = rule.weights[q] * map.det * f(p[0], p[1]);
            for i in 0..k {
                local[i] += w * values[q * k + i];
            }
        }
    }
    load
}

/// Right-hand side contribution of non-homogeneous Dirichlet data `g`,
/// mirroring the boundary terms of the bilinear form:
/// `eps * int g (grad v . n) + (sigma / h_e) * int g v` over boundary edges.
/// Identically zero for homogeneous data.
pub fn assemble_boundary_load(
    space: &DGSpace,
    variant: IPVariant,
    sigma: f64,
    g: impl Fn(f64, f64) -> f64,
) -> Result<Vec<f64>, AssemblyError> {
    if !(sigma > 0.0) {
        return Err(AssemblyError::NonPositivePenalty(sigma));
    }
    let eps = variant.epsilon();
    let mesh = space.mesh();
    let k = space.dofs_per_element();
    let erule = space.edge_quadrature();
    let mut load = vec![0.0; space.total_dofs()];
    for edge in mesh.edges() {
        if edge.right.is_some() {
            continue;
        }
        let a = mesh.vertices()[edge.vertices[0]];
        let b = mesh.vertices()[edge.vertices[1]];
        let n = edge.normal;
        let local = &mut load[edge.left * k..(edge.left + 1) * k];
        for (q, &s) in erule.points.iter().enumerate() {
            let p = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
            let gv = g(p[0], p[1]);
            if gv == 0.0 {
                continue;
            }
            let (values, grads) = space.eval_basis(edge.left, p)?;
            let w = erule.weights[q] * edge.length;
            for i in 0..k {
                let gn = grads[i][0] * n[0] + grads[i][1] * n[1];
                local[i] += w * gv * (eps * gn + sigma / edge.length * values[i]);
            }
        }
    }
    Ok(load)
}
