//! Assembly of the Dirichlet form and right-hand sides, boundary
//! elimination, and a diagonally preconditioned conjugate gradient solver.

use crate::fespace::{eval_basis, FeError, FeSpace, QuadratureRule};
use crate::geometry::Point2;
use crate::greens::{red_subdivide, DeltaKernel};
use thiserror::Error;

/// Default relative tolerance for linear solves; discretization error
/// dominates algebraic error at this setting.
pub const DEFAULT_REL_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error("quadrature exactness {got} is below the required {needed}")]
    InsufficientExactness { needed: usize, got: usize },
    #[error("all dofs are boundary dofs; the reduced system is empty")]
    AllDofsBoundary,
    #[error("conjugate gradients did not converge in {iterations} iterations (last preconditioned residual {last:e})")]
    NonConvergence {
        iterations: usize,
        last: f64,
        history: Vec<f64>,
    },
    #[error("matrix is not positive definite: non-positive curvature at iteration {iteration}")]
    NotSpd { iteration: usize },
    #[error("delta kernel element {element} does not match the target space's mesh")]
    KernelMeshMismatch { element: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Fe(#[from] FeError),
}

/// Sparse matrix in compressed row storage.
#[derive(Clone, Debug)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from (row, col, value) triplets, merging duplicates.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> CsrMatrix {
        triplets.sort_unstable_by_key(|&(i, j, _)| (i, j));
        let mut col_idx = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        let mut row_counts = vec![0usize; n];
        let mut last = None;
        for (i, j, v) in triplets {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_counts[i] += 1;
                last = Some((i, j));
            }
        }
        let mut row_ptr = vec![0usize; n + 1];
        for i in 0..n {
            row_ptr[i + 1] = row_ptr[i] + row_counts[i];
        }
        CsrMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[a..b], &self.values[a..b])
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            let mut acc = 0.0;
            for (c, v) in cols.iter().zip(vals) {
                acc += v * x[*c];
            }
            y[i] = acc;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                if *c == i {
                    d[i] = *v;
                }
            }
        }
        d
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).1.iter().sum())
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// max_{ij} |A_ij - A_ji|, for symmetry audits.
    pub fn symmetry_defect(&self) -> f64 {
        let mut defect = 0.0f64;
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                let j = *c;
                let (jc, jv) = self.row(j);
                let vt = jc
                    .iter()
                    .position(|&k| k == i)
                    .map(|p| jv[p])
                    .unwrap_or(0.0);
                defect = defect.max((v - vt).abs());
            }
        }
        defect
    }
}

fn required_stiffness_exactness(k: usize) -> usize {
    2 * (k - 1)
}

/// Assembles A_ij = ∫_Ω ∇ψ_i · ∇ψ_j over the full dof set (no boundary
/// elimination). Requires quadrature exactness ≥ 2(k-1).
pub fn assemble_stiffness(
    space: &FeSpace,
    quad: &QuadratureRule,
) -> Result<CsrMatrix, AssemblyError> {
    let needed = required_stiffness_exactness(space.degree());
    if quad.exactness() < needed {
        return Err(AssemblyError::InsufficientExactness {
            needed,
            got: quad.exactness(),
        });
    }
    let nloc = space.local_dofs();
    let mesh = space.mesh();
    let mut triplets = Vec::with_capacity(mesh.n_triangles() * nloc * nloc);
    let mut grads = vec![[0.0f64; 2]; nloc];
    for t in 0..mesh.n_triangles() {
        let geom = space.element_geometry(t);
        let dofs = space.element_dofs(t);
        let mut local = vec![0.0f64; nloc * nloc];
        for (lambda, w) in quad.iter() {
            let basis = eval_basis(space.degree(), *lambda)?;
            for i in 0..nloc {
                grads[i] = geom.push_gradient(basis.grads[i]);
            }
            let scale = w * geom.det; // w * 2|T|
            for i in 0..nloc {
                for j in 0..nloc {
                    local[i * nloc + j] +=
                        scale * (grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1]);
                }
            }
        }
        for i in 0..nloc {
            for j in 0..nloc {
                triplets.push((dofs[i], dofs[j], local[i * nloc + j]));
            }
        }
    }
    Ok(CsrMatrix::from_triplets(space.n_dofs(), triplets))
}

/// Assembles b_i = ∫_Ω g · ∇ψ_i for a vector field g by per-element
/// quadrature.
pub fn assemble_grad_rhs<G: Fn(Point2) -> [f64; 2]>(
    space: &FeSpace,
    grad_u: G,
    quad: &QuadratureRule,
) -> Result<Vec<f64>, AssemblyError> {
    let nloc = space.local_dofs();
    let mesh = space.mesh();
    let mut rhs = vec![0.0; space.n_dofs()];
    for t in 0..mesh.n_triangles() {
        let geom = space.element_geometry(t);
        let dofs = space.element_dofs(t);
        for (lambda, w) in quad.iter() {
            let basis = eval_basis(space.degree(), *lambda)?;
            let x = geom.point(*lambda);
            let g = grad_u(x);
            let scale = w * geom.det;
            for i in 0..nloc {
                let grad_i = geom.push_gradient(basis.grads[i]);
                rhs[dofs[i]] += scale * (g[0] * grad_i[0] + g[1] * grad_i[1]);
            }
        }
    }
    Ok(rhs)
}

/// Assembles b_i = ∫_T δ_z ∂_l ψ_i for a delta kernel supported in one
/// element of the space's mesh. Entries are nonzero only for dofs of the
/// supporting element. The integral uses the kernel's composite subdivision
/// of its element, so with the kernel's preferred rule it reproduces the
/// kernel's defining moments to solver precision.
pub fn assemble_delta_rhs(
    space: &FeSpace,
    kernel: &DeltaKernel,
    axis: usize,
    quad: &QuadratureRule,
) -> Result<Vec<f64>, AssemblyError> {
    if quad.exactness() < kernel.required_exactness() {
        return Err(AssemblyError::InsufficientExactness {
            needed: kernel.required_exactness(),
            got: quad.exactness(),
        });
    }
    let t = kernel.element();
    let mesh = space.mesh();
    if t >= mesh.n_triangles() || mesh.triangle_vertices(t) != kernel.support_vertices() {
        return Err(AssemblyError::KernelMeshMismatch { element: t });
    }
    let mut rhs = vec![0.0; space.n_dofs()];
    accumulate_delta_rhs(space, kernel, axis, quad, t, DeltaKernel::QUAD_DEPTH, &mut rhs)?;
    Ok(rhs)
}

/// Shared accumulation used by both the single-element path and the
/// refined-mesh path in the greens module: integrates over the red
/// subdivision of element `t` at the given depth.
pub(crate) fn accumulate_delta_rhs(
    space: &FeSpace,
    kernel: &DeltaKernel,
    axis: usize,
    quad: &QuadratureRule,
    t: usize,
    depth: usize,
    rhs: &mut [f64],
) -> Result<(), AssemblyError> {
    assert!(axis < 2);
    let nloc = space.local_dofs();
    let geom = space.element_geometry(t);
    let dofs = space.element_dofs(t);
    let area2 = geom.det;
    for cell in red_subdivide(geom.verts, depth) {
        let cell_geom = crate::fespace::ElementGeometry::new(cell);
        for (lambda, w) in quad.iter() {
            let x = cell_geom.point(*lambda);
            let dz = kernel.eval(x);
            if dz == 0.0 {
                continue;
            }
            // Barycentric of x in the parent element for basis evaluation.
            let lam = [
                crate::geometry::signed_area_x2(x, geom.verts[1], geom.verts[2]) / area2,
                crate::geometry::signed_area_x2(geom.verts[0], x, geom.verts[2]) / area2,
                crate::geometry::signed_area_x2(geom.verts[0], geom.verts[1], x) / area2,
            ];
            let basis = eval_basis(space.degree(), lam)?;
            let scale = w * cell_geom.det * dz;
            for i in 0..nloc {
                let grad_i = geom.push_gradient(basis.grads[i]);
                rhs[dofs[i]] += scale * grad_i[axis];
            }
        }
    }
    Ok(())
}

/// A reduced SPD system over interior dofs.
#[derive(Debug)]
pub struct LinearSystem {
    matrix: CsrMatrix,
    rhs: Vec<f64>,
    /// Interior dof indices in the full numbering.
    interior: Vec<usize>,
    n_full: usize,
}

/// Removes boundary rows and columns (homogeneous Dirichlet condition).
pub fn apply_dirichlet(
    a: &CsrMatrix,
    b: &[f64],
    boundary: &[bool],
) -> Result<LinearSystem, AssemblyError> {
    if a.dim() != boundary.len() || b.len() != boundary.len() {
        return Err(AssemblyError::Dimension(format!(
            "matrix dim {}, rhs len {}, flags len {}",
            a.dim(),
            b.len(),
            boundary.len()
        )));
    }
    let interior: Vec<usize> = (0..boundary.len()).filter(|&i| !boundary[i]).collect();
    if interior.is_empty() {
        return Err(AssemblyError::AllDofsBoundary);
    }
    let mut new_index = vec![usize::MAX; boundary.len()];
    for (ni, &oi) in interior.iter().enumerate() {
        new_index[oi] = ni;
    }
    let mut triplets = Vec::new();
    for (ni, &oi) in interior.iter().enumerate() {
        let (cols, vals) = a.row(oi);
        for (c, v) in cols.iter().zip(vals) {
            if new_index[*c] != usize::MAX {
                triplets.push((ni, new_index[*c], *v));
            }
        }
    }
    let rhs: Vec<f64> = interior.iter().map(|&i| b[i]).collect();
    Ok(LinearSystem {
        matrix: CsrMatrix::from_triplets(interior.len(), triplets),
        rhs,
        interior,
        n_full: boundary.len(),
    })
}

impl LinearSystem {
    pub fn reduced_matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn reduced_rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn interior_dofs(&self) -> &[usize] {
        &self.interior
    }

    /// Solves with PCG and scatters the interior solution into a full dof
    /// vector with zeros on boundary dofs.
    pub fn solve(&self, rel_tol: f64) -> Result<Vec<f64>, AssemblyError> {
        let x = pcg(&self.matrix, &self.rhs, rel_tol)?;
        let mut full = vec![0.0; self.n_full];
        for (ni, &oi) in self.interior.iter().enumerate() {
            full[oi] = x.solution[ni];
        }
        Ok(full)
    }

    pub fn solve_with_history(&self, rel_tol: f64) -> Result<PcgResult, AssemblyError> {
        pcg(&self.matrix, &self.rhs, rel_tol)
    }
}

/// Conjugate gradient outcome.
#[derive(Debug)]
pub struct PcgResult {
    pub solution: Vec<f64>,
    pub iterations: usize,
    /// Best preconditioned residual norm achieved up to each iteration
    /// (non-increasing by construction).
    pub history: Vec<f64>,
}

/// Diagonally preconditioned conjugate gradients. Terminates when
/// ‖b - Ax‖₂ ≤ rel_tol · ‖b‖₂; the iteration cap is 50·√n + 1000.
pub fn pcg(a: &CsrMatrix, b: &[f64], rel_tol: f64) -> Result<PcgResult, AssemblyError> {
    let n = a.dim();
    assert_eq!(b.len(), n);
    let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if b_norm == 0.0 {
        return Ok(PcgResult {
            solution: vec![0.0; n],
            iterations: 0,
            history: vec![0.0],
        });
    }
    let diag = a.diagonal();
    let inv_diag: Vec<f64> = diag
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let cap = (50.0 * (n as f64).sqrt()) as usize + 1000;

    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(ri, zi)| ri * zi).sum();
    let mut best = rz.sqrt();
    let mut history = vec![best];
    let mut ap = vec![0.0; n];

    for iteration in 0..cap {
        let r_norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r_norm <= rel_tol * b_norm {
            return Ok(PcgResult {
                solution: x,
                iterations: iteration,
                history,
            });
        }
        a.matvec(&p, &mut ap);
        let p_ap: f64 = p.iter().zip(&ap).map(|(pi, api)| pi * api).sum();
        if p_ap <= 0.0 {
            return Err(AssemblyError::NotSpd { iteration });
        }
        let alpha = rz / p_ap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(ri, zi)| ri * zi).sum();
        best = best.min(rz_new.max(0.0).sqrt());
        history.push(best);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }

    let r_norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    if r_norm <= rel_tol * b_norm {
        return Ok(PcgResult {
            solution: x,
            iterations: cap,
            history,
        });
    }
    Err(AssemblyError::NonConvergence {
        iterations: cap,
        last: *history.last().unwrap(),
        history,
    })
}

/// Pre-assembled stiffness operator with its Dirichlet reduction, reusable
/// across many right-hand sides on the same space.
#[derive(Debug)]
pub struct DirichletOperator {
    full: CsrMatrix,
    interior: Vec<usize>,
    reduced: CsrMatrix,
}

impl DirichletOperator {
    pub fn new(space: &FeSpace, quad: &QuadratureRule) -> Result<DirichletOperator, AssemblyError> {
        let full = assemble_stiffness(space, quad)?;
        let zeros = vec![0.0; full.dim()];
        let sys = apply_dirichlet(&full, &zeros, space.boundary_flags())?;
        Ok(DirichletOperator {
            full,
            interior: sys.interior.clone(),
            reduced: sys.matrix,
        })
    }

    pub fn full_matrix(&self) -> &CsrMatrix {
        &self.full
    }

    pub fn reduced_matrix(&self) -> &CsrMatrix {
        &self.reduced
    }

    /// Solves A x = b with homogeneous Dirichlet conditions; `rhs` and the
    /// returned vector use the full dof numbering.
    pub fn solve(&self, rhs: &[f64], rel_tol: f64) -> Result<Vec<f64>, AssemblyError> {
        let reduced_rhs: Vec<f64> = self.interior.iter().map(|&i| rhs[i]).collect();
        let result = pcg(&self.reduced, &reduced_rhs, rel_tol)?;
        let mut full = vec![0.0; rhs.len()];
        for (ni, &oi) in self.interior.iter().enumerate() {
            full[oi] = result.solution[ni];
        }
        Ok(full)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fespace::{build_space, interpolate, quadrature_rule};
    use crate::mesh::{triangulate_convex_polygon, Mesh};
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use std::sync::Arc;

    fn unit_square_poly() -> Vec<Point2> {
        vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ]
    }

    fn square_space(h: f64, k: usize) -> Arc<FeSpace> {
        let mesh = Arc::new(triangulate_convex_polygon(&unit_square_poly(), h).unwrap());
        Arc::new(build_space(mesh, k).unwrap())
    }

    #[test]
    fn local_stiffness_of_unit_right_triangle() {
        // Hand/symbolic integration of constant P1 gradients on the
        // reference-like triangle (0,0), (1,0), (0,1).
        let mesh = Arc::new(
            Mesh::from_raw(
                vec![
                    Point2::new(0.0, 0.0),
                    Point2::new(1.0, 0.0),
                    Point2::new(0.0, 1.0),
                ],
                vec![[0, 1, 2]],
            )
            .unwrap(),
        );
        let space = build_space(mesh, 1).unwrap();
        let a = assemble_stiffness(&space, &quadrature_rule(2).unwrap()).unwrap();
        let expected = [
            [1.0, -0.5, -0.5],
            [-0.5, 0.5, 0.0],
            [-0.5, 0.0, 0.5],
        ];
        for i in 0..3 {
            let (cols, vals) = a.row(i);
            let mut dense = [0.0; 3];
            for (c, v) in cols.iter().zip(vals) {
                dense[*c] = *v;
            }
            for j in 0..3 {
                assert_abs_diff_eq!(dense[j], expected[i][j], epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn row_sums_vanish_and_symmetry_holds() {
        for k in [1usize, 2] {
            let space = square_space(0.25, k);
            let a = assemble_stiffness(&space, &quadrature_rule(2 * k).unwrap()).unwrap();
            let scale = a.max_abs();
            for s in a.row_sums() {
                assert!(s.abs() <= 1e-12 * scale);
            }
            assert!(a.symmetry_defect() <= 1e-12 * scale);
        }
    }

    #[test]
    fn stiffness_is_scale_invariant_in_2d() {
        let base = triangulate_convex_polygon(&unit_square_poly(), 0.5).unwrap();
        let scaled_verts: Vec<Point2> = base.vertices().iter().map(|v| *v * 3.7).collect();
        let tris: Vec<[usize; 3]> = (0..base.n_triangles()).map(|t| base.triangle(t)).collect();
        let scaled = Mesh::from_raw(scaled_verts, tris).unwrap();

        let s0 = build_space(Arc::new(base), 1).unwrap();
        let s1 = build_space(Arc::new(scaled), 1).unwrap();
        let quad = quadrature_rule(2).unwrap();
        let a0 = assemble_stiffness(&s0, &quad).unwrap();
        let a1 = assemble_stiffness(&s1, &quad).unwrap();
        for i in 0..a0.dim() {
            let (c0, v0) = a0.row(i);
            let (c1, v1) = a1.row(i);
            assert_eq!(c0, c1);
            for (x, y) in v0.iter().zip(v1) {
                assert_abs_diff_eq!(x, y, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn insufficient_exactness_rejected() {
        let space = square_space(0.5, 2);
        assert!(matches!(
            assemble_stiffness(&space, &quadrature_rule(1).unwrap()),
            Err(AssemblyError::InsufficientExactness { needed: 2, got: 1 })
        ));
    }

    #[test]
    fn grad_rhs_zero_field() {
        let space = square_space(0.5, 1);
        let rhs = assemble_grad_rhs(&space, |_| [0.0, 0.0], &quadrature_rule(4).unwrap()).unwrap();
        assert!(rhs.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn grad_rhs_agrees_with_matrix_on_vh() {
        let space = square_space(0.25, 2);
        let quad = quadrature_rule(6).unwrap();
        let v = interpolate(&space, |p| p.x * p.y + 0.5 * p.x * p.x);
        let a = assemble_stiffness(&space, &quad).unwrap();
        let mut av = vec![0.0; a.dim()];
        a.matvec(v.coefficients(), &mut av);
        let g = v.clone();
        let rhs = assemble_grad_rhs(&space, move |p| g.grad(p).unwrap(), &quad).unwrap();
        for i in 0..av.len() {
            assert_abs_diff_eq!(rhs[i], av[i], epsilon = 1e-10);
        }
    }

    #[test]
    fn grad_rhs_constant_field_matches_closed_form() {
        // For k=1 and g = (1,0): b_i = sum over elements of |T| * d1(psi_i),
        // with the constant gradient written from vertex coordinates.
        let space = square_space(0.5, 1);
        let rhs = assemble_grad_rhs(&space, |_| [1.0, 0.0], &quadrature_rule(2).unwrap()).unwrap();
        let mesh = space.mesh();
        let mut expected = vec![0.0; space.n_dofs()];
        for t in 0..mesh.n_triangles() {
            let [a, b, c] = mesh.triangle_vertices(t);
            let dofs = space.element_dofs(t);
            // ∂₁ of the P1 basis: opposite-edge y-differences / (2|T|).
            let grads_x = [(b.y - c.y), (c.y - a.y), (a.y - b.y)];
            for i in 0..3 {
                expected[dofs[i]] += 0.5 * grads_x[i];
            }
        }
        for i in 0..expected.len() {
            assert_abs_diff_eq!(rhs[i], expected[i], epsilon = 1e-13);
        }
    }

    #[test]
    fn dirichlet_empty_system_signal() {
        let mesh = Arc::new(
            Mesh::from_raw(unit_square_poly(), vec![[0, 1, 2], [0, 2, 3]]).unwrap(),
        );
        let space = build_space(mesh, 1).unwrap();
        let a = assemble_stiffness(&space, &quadrature_rule(2).unwrap()).unwrap();
        let b = vec![0.0; a.dim()];
        assert!(matches!(
            apply_dirichlet(&a, &b, space.boundary_flags()),
            Err(AssemblyError::AllDofsBoundary)
        ));
    }

    #[test]
    fn dirichlet_center_hat_is_four() {
        // 8-triangle square (diagonal split refined once): one interior dof,
        // and the reduced 1x1 matrix equals the sum of local diagonals = 4.
        let mesh = Arc::new(
            Mesh::from_raw(unit_square_poly(), vec![[0, 1, 2], [0, 2, 3]])
                .unwrap()
                .refine_uniform(),
        );
        let space = build_space(mesh, 1).unwrap();
        let a = assemble_stiffness(&space, &quadrature_rule(2).unwrap()).unwrap();
        let b = vec![0.0; a.dim()];
        let sys = apply_dirichlet(&a, &b, space.boundary_flags()).unwrap();
        assert_eq!(sys.reduced_matrix().dim(), 1);
        let (_, vals) = sys.reduced_matrix().row(0);
        assert_relative_eq!(vals[0], 4.0, epsilon = 1e-13);
    }

    #[test]
    fn reduced_system_symmetric_positive_diagonal() {
        let space = square_space(0.25, 2);
        let a = assemble_stiffness(&space, &quadrature_rule(4).unwrap()).unwrap();
        let b = vec![0.0; a.dim()];
        let sys = apply_dirichlet(&a, &b, space.boundary_flags()).unwrap();
        let reduced = sys.reduced_matrix();
        assert!(reduced.symmetry_defect() <= 1e-12 * reduced.max_abs());
        assert!(reduced.diagonal().iter().all(|&d| d > 0.0));
    }

    #[test]
    fn pcg_recovers_random_solution() {
        let space = square_space(0.25, 1);
        let a = assemble_stiffness(&space, &quadrature_rule(2).unwrap()).unwrap();
        let zeros = vec![0.0; a.dim()];
        let sys = apply_dirichlet(&a, &zeros, space.boundary_flags()).unwrap();
        let n = sys.reduced_matrix().dim();
        // Deterministic pseudo-random coefficients.
        let c: Vec<f64> = (0..n).map(|i| ((i * 2654435761) % 1000) as f64 / 500.0 - 1.0).collect();
        let mut b = vec![0.0; n];
        sys.reduced_matrix().matvec(&c, &mut b);
        let rel_tol = 1e-12;
        let out = pcg(sys.reduced_matrix(), &b, rel_tol).unwrap();
        let err: f64 = out
            .solution
            .iter()
            .zip(&c)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        let c_norm: f64 = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(
            err <= 10.0 * rel_tol * c_norm,
            "relative error {}",
            err / c_norm
        );
    }

    #[test]
    fn pcg_zero_rhs_and_one_by_one() {
        let space = square_space(0.25, 1);
        let a = assemble_stiffness(&space, &quadrature_rule(2).unwrap()).unwrap();
        let zeros = vec![0.0; a.dim()];
        let sys = apply_dirichlet(&a, &zeros, space.boundary_flags()).unwrap();
        let out = pcg(sys.reduced_matrix(), &vec![0.0; sys.reduced_matrix().dim()], 1e-12).unwrap();
        assert!(out.solution.iter().all(|&v| v == 0.0));

        let one = CsrMatrix::from_triplets(1, vec![(0, 0, 4.0)]);
        let out = pcg(&one, &[2.0], 1e-14).unwrap();
        assert_relative_eq!(out.solution[0], 0.5, epsilon = 1e-14);
    }

    #[test]
    fn pcg_history_monotone_and_spd_violation_detected() {
        let space = square_space(0.125, 1);
        let a = assemble_stiffness(&space, &quadrature_rule(2).unwrap()).unwrap();
        let zeros = vec![0.0; a.dim()];
        let sys = apply_dirichlet(&a, &zeros, space.boundary_flags()).unwrap();
        let n = sys.reduced_matrix().dim();
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
        let out = pcg(sys.reduced_matrix(), &b, 1e-12).unwrap();
        for w in out.history.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }

        let indefinite = CsrMatrix::from_triplets(2, vec![(0, 0, 1.0), (1, 1, -1.0)]);
        assert!(matches!(
            pcg(&indefinite, &[0.0, 1.0], 1e-12),
            Err(AssemblyError::NotSpd { .. })
        ));
    }

    #[test]
    fn energy_identity() {
        // cᵀ A c equals the per-element quadrature of |∇v|².
        let space = square_space(0.25, 2);
        let quad = quadrature_rule(4).unwrap();
        let a = assemble_stiffness(&space, &quad).unwrap();
        let v = interpolate(&space, |p| (p.x * (1.0 - p.x)) * p.y + p.x);
        let mut av = vec![0.0; a.dim()];
        a.matvec(v.coefficients(), &mut av);
        let quadratic: f64 = v.coefficients().iter().zip(&av).map(|(c, y)| c * y).sum();

        let mesh = space.mesh();
        let mut energy = 0.0;
        for t in 0..mesh.n_triangles() {
            let geom = space.element_geometry(t);
            for (lambda, w) in quad.iter() {
                let g = v.grad_local(t, *lambda);
                energy += w * geom.det * (g[0] * g[0] + g[1] * g[1]);
            }
        }
        assert_relative_eq!(quadratic, energy, max_relative = 1e-10);
    }
}
