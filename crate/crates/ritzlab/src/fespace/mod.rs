//! Lagrange finite element spaces of degree 1 and 2 on triangle meshes.
//!
//! Local degrees of freedom are ordered vertices first, then edge midpoints
//! in edge order (0,1), (1,2), (2,0). Global dof numbering is vertices
//! `0..nv`, then (for degree 2) `nv + edge index`. Spaces and functions are
//! immutable after construction; all evaluation is reentrant.

mod quadrature;

pub use quadrature::{quadrature_rule, reference_monomial_integral, QuadratureRule};

use crate::geometry::Point2;
use crate::mesh::{Mesh, MeshError};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FeError {
    #[error("unsupported polynomial degree {0}; supported degrees are 1 and 2")]
    UnsupportedDegree(usize),
    #[error("unsupported quadrature exactness {0}; supported range is 1..=20")]
    UnsupportedExactness(usize),
    #[error("coefficient vector length {got} does not match dof count {expected}")]
    CoefficientLength { got: usize, expected: usize },
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// Values and reference-coordinate gradients of all local shape functions
/// at one point.
#[derive(Clone, Copy, Debug)]
pub struct BasisEval {
    pub n: usize,
    pub values: [f64; 6],
    /// Gradients with respect to the reference coordinates (ξ, η), where
    /// barycentric λ = (1-ξ-η, ξ, η).
    pub grads: [[f64; 2]; 6],
}

/// Evaluates the standard Lagrange shape functions of degree `k` at a
/// barycentric point. Values form a partition of unity; reference
/// gradients sum to zero.
pub fn eval_basis(k: usize, lambda: [f64; 3]) -> Result<BasisEval, FeError> {
    let [l0, l1, l2] = lambda;
    // Reference gradients of the barycentric coordinates.
    const DL: [[f64; 2]; 3] = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];
    let mut out = BasisEval {
        n: 0,
        values: [0.0; 6],
        grads: [[0.0; 2]; 6],
    };
    match k {
        1 => {
            out.n = 3;
            out.values[..3].copy_from_slice(&[l0, l1, l2]);
            out.grads[..3].copy_from_slice(&DL);
        }
        2 => {
            out.n = 6;
            let l = [l0, l1, l2];
            for i in 0..3 {
                out.values[i] = l[i] * (2.0 * l[i] - 1.0);
                out.grads[i] = [DL[i][0] * (4.0 * l[i] - 1.0), DL[i][1] * (4.0 * l[i] - 1.0)];
            }
            for (slot, (i, j)) in [(0usize, 1usize), (1, 2), (2, 0)].into_iter().enumerate() {
                out.values[3 + slot] = 4.0 * l[i] * l[j];
                out.grads[3 + slot] = [
                    4.0 * (DL[i][0] * l[j] + l[i] * DL[j][0]),
                    4.0 * (DL[i][1] * l[j] + l[i] * DL[j][1]),
                ];
            }
        }
        other => return Err(FeError::UnsupportedDegree(other)),
    }
    Ok(out)
}

/// Affine geometry of one element: Jacobian determinant and the transform
/// from reference gradients to physical gradients.
#[derive(Clone, Copy, Debug)]
pub struct ElementGeometry {
    pub verts: [Point2; 3],
    /// Columns of the Jacobian: edge vectors v1-v0 and v2-v0.
    pub jac: [[f64; 2]; 2],
    pub det: f64,
}

impl ElementGeometry {
    pub fn new(verts: [Point2; 3]) -> ElementGeometry {
        let e1 = verts[1] - verts[0];
        let e2 = verts[2] - verts[0];
        ElementGeometry {
            verts,
            jac: [[e1.x, e2.x], [e1.y, e2.y]],
            det: e1.cross(e2),
        }
    }

    pub fn area(&self) -> f64 {
        0.5 * self.det
    }

    /// Physical point of barycentric coordinates.
    pub fn point(&self, lambda: [f64; 3]) -> Point2 {
        self.verts[0] * lambda[0] + self.verts[1] * lambda[1] + self.verts[2] * lambda[2]
    }

    /// Physical gradient from a reference gradient: J^{-T} g.
    pub fn push_gradient(&self, g: [f64; 2]) -> [f64; 2] {
        let [[a, b], [c, d]] = self.jac;
        [
            (d * g[0] - c * g[1]) / self.det,
            (-b * g[0] + a * g[1]) / self.det,
        ]
    }
}

/// A Lagrange space of degree `k ∈ {1, 2}` over a mesh.
#[derive(Debug)]
pub struct FeSpace {
    mesh: Arc<Mesh>,
    degree: usize,
    dof_coords: Vec<Point2>,
    /// Flat element-to-dof map, stride `local_dofs()`.
    element_dofs: Vec<usize>,
    boundary_dof: Vec<bool>,
}

/// Builds the Lagrange space of degree `k` over `mesh`.
pub fn build_space(mesh: Arc<Mesh>, k: usize) -> Result<FeSpace, FeError> {
    if !(k == 1 || k == 2) {
        return Err(FeError::UnsupportedDegree(k));
    }
    let nv = mesh.n_vertices();
    let mut dof_coords: Vec<Point2> = (0..nv).map(|i| mesh.vertex(i)).collect();
    let mut boundary_dof: Vec<bool> = (0..nv).map(|i| mesh.is_boundary_vertex(i)).collect();
    if k == 2 {
        for e in mesh.edges() {
            dof_coords.push((mesh.vertex(e.v[0]) + mesh.vertex(e.v[1])) * 0.5);
            boundary_dof.push(e.is_boundary());
        }
    }
    let stride = (k + 1) * (k + 2) / 2;
    let mut element_dofs = Vec::with_capacity(stride * mesh.n_triangles());
    for t in 0..mesh.n_triangles() {
        let tri = mesh.triangle(t);
        element_dofs.extend_from_slice(&tri);
        if k == 2 {
            for e in mesh.triangle_edges(t) {
                element_dofs.push(nv + e);
            }
        }
    }
    Ok(FeSpace {
        mesh,
        degree: k,
        dof_coords,
        element_dofs,
        boundary_dof,
    })
}

impl FeSpace {
    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn n_dofs(&self) -> usize {
        self.dof_coords.len()
    }

    /// Local dof count per element: (k+1)(k+2)/2.
    pub fn local_dofs(&self) -> usize {
        (self.degree + 1) * (self.degree + 2) / 2
    }

    pub fn dof_coord(&self, i: usize) -> Point2 {
        self.dof_coords[i]
    }

    pub fn element_dofs(&self, t: usize) -> &[usize] {
        let s = self.local_dofs();
        &self.element_dofs[t * s..(t + 1) * s]
    }

    pub fn is_boundary_dof(&self, i: usize) -> bool {
        self.boundary_dof[i]
    }

    pub fn boundary_flags(&self) -> &[bool] {
        &self.boundary_dof
    }

    pub fn n_interior_dofs(&self) -> usize {
        self.boundary_dof.iter().filter(|b| !**b).count()
    }

    pub fn element_geometry(&self, t: usize) -> ElementGeometry {
        ElementGeometry::new(self.mesh.triangle_vertices(t))
    }
}

/// A finite element function: one coefficient per global dof.
#[derive(Clone, Debug)]
pub struct FeFunction {
    space: Arc<FeSpace>,
    coeffs: Vec<f64>,
}

impl FeFunction {
    pub fn from_coefficients(space: Arc<FeSpace>, coeffs: Vec<f64>) -> Result<FeFunction, FeError> {
        if coeffs.len() != space.n_dofs() {
            return Err(FeError::CoefficientLength {
                got: coeffs.len(),
                expected: space.n_dofs(),
            });
        }
        Ok(FeFunction { space, coeffs })
    }

    pub fn zero(space: Arc<FeSpace>) -> FeFunction {
        let n = space.n_dofs();
        FeFunction {
            space,
            coeffs: vec![0.0; n],
        }
    }

    pub fn space(&self) -> &Arc<FeSpace> {
        &self.space
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    /// Value at a barycentric point of element `t` (no point location).
    pub fn eval_local(&self, t: usize, lambda: [f64; 3]) -> f64 {
        let basis = eval_basis(self.space.degree, lambda).expect("degree validated at build");
        let dofs = self.space.element_dofs(t);
        let mut acc = 0.0;
        for (i, &dof) in dofs.iter().enumerate() {
            acc += self.coeffs[dof] * basis.values[i];
        }
        acc
    }

    /// Physical gradient at a barycentric point of element `t`.
    pub fn grad_local(&self, t: usize, lambda: [f64; 3]) -> [f64; 2] {
        let basis = eval_basis(self.space.degree, lambda).expect("degree validated at build");
        let dofs = self.space.element_dofs(t);
        let mut ref_grad = [0.0; 2];
        for (i, &dof) in dofs.iter().enumerate() {
            ref_grad[0] += self.coeffs[dof] * basis.grads[i][0];
            ref_grad[1] += self.coeffs[dof] * basis.grads[i][1];
        }
        self.space.element_geometry(t).push_gradient(ref_grad)
    }

    /// Value anywhere in the closed domain, via point location. Points on
    /// interfaces use the mesh's deterministic lowest-index tie-break.
    pub fn eval(&self, x: Point2) -> Result<f64, MeshError> {
        let (t, lambda) = self.space.mesh.locate_point(x)?;
        Ok(self.eval_local(t, lambda))
    }

    /// Gradient anywhere in the closed domain (single-valued on interfaces
    /// via the tie-break).
    pub fn grad(&self, x: Point2) -> Result<[f64; 2], MeshError> {
        let (t, lambda) = self.space.mesh.locate_point(x)?;
        Ok(self.grad_local(t, lambda))
    }
}

/// Nodal interpolation: coefficient i = f(dof coordinate i).
pub fn interpolate<F: Fn(Point2) -> f64>(space: &Arc<FeSpace>, f: F) -> FeFunction {
    let coeffs = (0..space.n_dofs())
        .map(|i| f(space.dof_coord(i)))
        .collect();
    FeFunction {
        space: Arc::clone(space),
        coeffs,
    }
}
