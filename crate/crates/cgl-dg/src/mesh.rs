//! Structured triangulations of the unit square.
//!
//! The solver operates on uniform meshes obtained by splitting an `n x n`
//! grid of squares along the diagonal from each cell's lower-left to
//! upper-right corner. Every triangle is stored with counter-clockwise
//! vertex order, and every edge carries a fixed unit normal so that jump
//! and average operators in the DG bilinear form are unambiguous.

use std::io::{self, Write};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshError {
    /// `unit_square(0)` has no cells to triangulate.
    #[error("subdivision count must be at least 1")]
    ZeroSubdivisions,
    #[error("element index {index} out of range (mesh has {count} elements)")]
    ElementOutOfRange { index: usize, count: usize },
    #[error("edge index {index} out of range (mesh has {count} edges)")]
    EdgeOutOfRange { index: usize, count: usize },
}

/// Whether an edge lies in the interior of the mesh or on the domain boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    Interior,
    Boundary,
}

/// A mesh edge together with the orientation data used by the DG face terms.
///
/// For interior edges the stored normal points from `left` into `right`; for
/// boundary edges it is the outward normal of the single adjacent element
/// `left`. Jumps are always taken as (left trace) - (right trace), with the
/// right trace replaced by zero boundary data on boundary edges.
#[derive(Debug, Clone)]
pub struct Edge {
    /// Endpoint vertex indices.
    pub vertices: [usize; 2],
    /// Element on the side the normal points away from.
    pub left: usize,
    /// Element on the side the normal points into; `None` on the boundary.
    pub right: Option<usize>,
    /// Unit normal, oriented left -> right (outward on the boundary).
    pub normal: [f64; 2],
    /// Edge length `h_e`.
    pub length: f64,
}

impl Edge {
    pub fn kind(&self) -> EdgeKind {
        if self.right.is_some() {
            EdgeKind::Interior
        } else {
            EdgeKind::Boundary
        }
    }
}

/// Immutable triangulation of the unit square. Refinement builds a new mesh
/// rather than mutating in place, so views into an existing mesh stay valid.
#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<[f64; 2]>,
    elements: Vec<[usize; 3]>,
    edges: Vec<Edge>,
    subdivisions: usize,
}

impl Mesh {
    /// Triangulates `[0,1]^2` into `2 n^2` triangles: each grid cell is split
    /// along its lower-left to upper-right diagonal, and both triangles are
    /// oriented counter-clockwise.
    pub fn unit_square(n: usize) -> Result<Self, MeshError> {
        if n == 0 {
            return Err(MeshError::ZeroSubdivisions);
        }
        let nv = n + 1;
        let step = 1.0 / n as f64;
        let vid = |ix: usize, iy: usize| iy * nv + ix;
        // Lower triangle of cell (cx, cy): (v00, v10, v11); upper: (v00, v11, v01).
        let lower = |cx: usize, cy: usize| 2 * (cy * n + cx);
        let upper = |cx: usize, cy: usize| 2 * (cy * n + cx) + 1;

        let mut vertices = Vec::with_capacity(nv * nv);
        for iy in 0..nv {
            for ix in 0..nv {
                vertices.push([ix as f64 * step, iy as f64 * step]);
            }
        }

        let mut elements = Vec::with_capacity(2 * n * n);
        for cy in 0..n {
            for cx in 0..n {
                let (v00, v10) = (vid(cx, cy), vid(cx + 1, cy));
                let (v01, v11) = (vid(cx, cy + 1), vid(cx + 1, cy + 1));
                elements.push([v00, v10, v11]);
                elements.push([v00, v11, v01]);
            }
        }

        let mut edges = Vec::with_capacity(3 * n * n + 2 * n);
        // Horizontal edges, bottom row to top row. An interior horizontal edge
        // separates the upper triangle of the cell below from the lower
        // triangle of the cell above; the normal points up, away from `left`.
        for iy in 0..nv {
            for ix in 0..n {
                let vs = [vid(ix, iy), vid(ix + 1, iy)];
                let (left, right, normal) = if iy == 0 {
                    (lower(ix, 0), None, [0.0, -1.0])
                } else if iy == n {
                    (upper(ix, n - 1), None, [0.0, 1.0])
                } else {
                    (upper(ix, iy - 1), Some(lower(ix, iy)), [0.0, 1.0])
                };
                edges.push(Edge { vertices: vs, left, right, normal, length: step });
            }
        }
        // Vertical edges, left column to right column; interior normals point
        // right, away from the lower triangle of the cell on the left.
        for ix in 0..nv {
            for iy in 0..n {
                let vs = [vid(ix, iy), vid(ix, iy + 1)];
                let (left, right, normal) = if ix == 0 {
                    (upper(0, iy), None, [-1.0, 0.0])
                } else if ix == n {
                    (lower(n - 1, iy), None, [1.0, 0.0])
                } else {
                    (lower(ix - 1, iy), Some(upper(ix, iy)), [1.0, 0.0])
                };
                edges.push(Edge { vertices: vs, left, right, normal, length: step });
            }
        }
        // Cell diagonals are always interior; the lower triangle sits on the
        // side away from the normal (-1, 1)/sqrt(2).
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        for cy in 0..n {
            for cx in 0..n {
                edges.push(Edge {
                    vertices: [vid(cx, cy), vid(cx + 1, cy + 1)],
                    left: lower(cx, cy),
                    right: Some(upper(cx, cy)),
                    normal: [-inv_sqrt2, inv_sqrt2],
                    length: std::f64::consts::SQRT_2 * step,
                });
            }
        }

        Ok(Mesh { vertices, elements, edges, subdivisions: n })
    }

    /// Builds the uniformly refined mesh with twice the subdivisions.
    pub fn refined(&self) -> Mesh {
        Mesh::unit_square(2 * self.subdivisions).expect("subdivisions >= 1")
    }

    pub fn subdivisions(&self) -> usize {
        self.subdivisions
    }

    /// Mesh size parameter: the longest edge, `sqrt(2)/n`.
    pub fn h(&self) -> f64 {
        std::f64::consts::SQRT_2 / self.subdivisions as f64
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn elements(&self) -> &[[usize; 3]] {
        &self.elements
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, index: usize) -> Result<&Edge, MeshError> {
        self.edges.get(index).ok_or(MeshError::EdgeOutOfRange {
            index,
            count: self.edges.len(),
        })
    }

    /// Vertex coordinates of one element, in stored (counter-clockwise) order.
    pub fn element_coords(&self, element: usize) -> Result<[[f64; 2]; 3], MeshError> {
        let vs = self.elements.get(element).ok_or(MeshError::ElementOutOfRange {
            index: element,
            count: self.elements.len(),
        })?;
        Ok([self.vertices[vs[0]], self.vertices[vs[1]], self.vertices[vs[2]]])
    }

    /// Signed area is positive for the counter-clockwise orientation enforced
    /// during construction.
    pub fn element_area(&self, element: usize) -> Result<f64, MeshError> {
        let [p0, p1, p2] = self.element_coords(element)?;
        Ok(0.5
            * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1])))
    }

    /// Plain-text dump: one `v x y` line per vertex, then one `t i j k` line
    /// per element.
    pub fn write_text<W: Write>(&self, mut w: W) -> io::Result<()> {
        for v in &self.vertices {
            writeln!(w, "v {:.15e} {:.15e}", v[0], v[1])?;
        }
        for e in &self.elements {
            writeln!(w, "t {} {} {}", e[0], e[1], e[2])?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rejects_zero_subdivisions() {
        assert!(matches!(Mesh::unit_square(0), Err(MeshError::ZeroSubdivisions)));
    }

    #[test]
    fn unit_cell_counts() {
        let mesh = Mesh::unit_square(1).unwrap();
        assert_eq!(mesh.num_vertices(), 4);
        assert_eq!(mesh.num_elements(), 2);
        assert_eq!(mesh.num_edges(), 5);
        let interior: Vec<_> = mesh
            .edges()
            .iter()
            .filter(|e| e.kind() == EdgeKind::Interior)
            .collect();
        assert_eq!(interior.len(), 1);
        // The single interior edge is the cell diagonal.
        assert_relative_eq!(interior[0].length, std::f64::consts::SQRT_2);
    }

    #[test]
    fn counts_scale_with_subdivision() {
        for n in [1usize, 2, 3, 6] {
            let mesh = Mesh::unit_square(n).unwrap();
            assert_eq!(mesh.num_vertices(), (n + 1) * (n + 1));
            assert_eq!(mesh.num_elements(), 2 * n * n);
            // n(n+1) horizontal + (n+1)n vertical + n^2 diagonal edges.
            assert_eq!(mesh.num_edges(), 3 * n * n + 2 * n);
        }
    }

    #[test]
    fn refinement_quadruples_elements() {
        let mesh = Mesh::unit_square(3).unwrap();
        let fine = mesh.refined();
        assert_eq!(fine.num_elements(), 4 * mesh.num_elements());
        assert_relative_eq!(fine.h(), 0.5 * mesh.h());
    }

    #[test]
    fn h_matches_diagonal_length() {
        let mesh = Mesh::unit_square(6).unwrap();
        assert_relative_eq!(mesh.h(), 0.235702, epsilon = 1e-6);
    }

    #[test]
    fn areas_sum_to_one_and_are_positive() {
        let mesh = Mesh::unit_square(5).unwrap();
        let mut total = 0.0;
        for e in 0..mesh.num_elements() {
            let a = mesh.element_area(e).unwrap();
            assert!(a > 0.0, "element {e} is not counter-clockwise");
            assert_relative_eq!(a, 1.0 / 50.0, epsilon = 1e-14);
            total += a;
        }
        assert_relative_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn interior_edges_have_two_distinct_elements() {
        let mesh = Mesh::unit_square(4).unwrap();
        for edge in mesh.edges() {
            if let Some(right) = edge.right {
                assert_ne!(edge.left, right);
            }
        }
    }

    #[test]
    fn boundary_edge_lengths_sum_to_perimeter() {
        let mesh = Mesh::unit_square(7).unwrap();
        let perimeter: f64 = mesh
            .edges()
            .iter()
            .filter(|e| e.kind() == EdgeKind::Boundary)
            .map(|e| e.length)
            .sum();
        assert_relative_eq!(perimeter, 4.0, epsilon = 1e-12);
    }

    /// The stored normal must be the outward normal of the `left` element:
    /// pointing from the edge midpoint away from the left centroid.
    #[test]
    fn normals_point_away_from_left_element() {
        let mesh = Mesh::unit_square(3).unwrap();
        for edge in mesh.edges() {
            let a = mesh.vertices()[edge.vertices[0]];
            let b = mesh.vertices()[edge.vertices[1]];
            let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
            let coords = mesh.element_coords(edge.left).unwrap();
            let centroid = [
                (coords[0][0] + coords[1][0] + coords[2][0]) / 3.0,
                (coords[0][1] + coords[1][1] + coords[2][1]) / 3.0,
            ];
            let dot = (mid[0] - centroid[0]) * edge.normal[0]
                + (mid[1] - centroid[1]) * edge.normal[1];
            assert!(dot > 0.0, "normal of edge {edge:?} points into its left element");
            // Unit length and perpendicular to the edge direction.
            let len = (edge.normal[0].powi(2) + edge.normal[1].powi(2)).sqrt();
            assert_relative_eq!(len, 1.0, epsilon = 1e-14);
            let tangent = [b[0] - a[0], b[1] - a[1]];
            let t_dot_n = tangent[0] * edge.normal[0] + tangent[1] * edge.normal[1];
            assert_relative_eq!(t_dot_n, 0.0, epsilon = 1e-13);
        }
    }

    /// Both normals of an interior edge seen from each side must be opposite;
    /// equivalently the right element's centroid lies in the normal direction.
    #[test]
    fn interior_normals_point_into_right_element() {
        let mesh = Mesh::unit_square(3).unwrap();
        for edge in mesh.edges() {
            let Some(right) = edge.right else { continue };
            let a = mesh.vertices()[edge.vertices[0]];
            let b = mesh.vertices()[edge.vertices[1]];
            let mid = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
            let coords = mesh.element_coords(right).unwrap();
            let centroid = [
                (coords[0][0] + coords[1][0] + coords[2][0]) / 3.0,
                (coords[0][1] + coords[1][1] + coords[2][1]) / 3.0,
            ];
            let dot = (centroid[0] - mid[0]) * edge.normal[0]
                + (centroid[1] - mid[1]) * edge.normal[1];
            assert!(dot > 0.0);
        }
    }

    #[test]
    fn every_element_has_three_edges() {
        let mesh = Mesh::unit_square(4).unwrap();
        let mut edge_count = vec![0usize; mesh.num_elements()];
        for edge in mesh.edges() {
            edge_count[edge.left] += 1;
            if let Some(r) = edge.right {
                edge_count[r] += 1;
            }
        }
        assert!(edge_count.iter().all(|&c| c == 3));
    }

    #[test]
    fn text_dump_round_trips_counts() {
        let mesh = Mesh::unit_square(2).unwrap();
        let mut buf = Vec::new();
        mesh.write_text(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let v_lines = text.lines().filter(|l| l.starts_with("v ")).count();
        let t_lines = text.lines().filter(|l| l.starts_with("t ")).count();
        assert_eq!(v_lines, mesh.num_vertices());
        assert_eq!(t_lines, mesh.num_elements());
    }

    #[test]
    fn out_of_range_indices_error() {
        let mesh = Mesh::unit_square(2).unwrap();
        assert!(mesh.edge(mesh.num_edges()).is_err());
        assert!(mesh.element_coords(mesh.num_elements()).is_err());
    }
}
