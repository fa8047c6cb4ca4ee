//! The Ritz projection and weighted `W^{1,1}` gradient seminorms.
//!
//! `ritz_project` returns the energy-orthogonal projection of a zero-trace
//! function onto the Lagrange space with homogeneous Dirichlet conditions.
//! `weighted_grad_l1_norm` integrates `|∇v| w` with graded recursive
//! subdivision toward weight (and integrand) singularities, reporting a
//! depth-increment error indicator alongside the value.

use crate::assembly::{
    apply_dirichlet, assemble_grad_rhs, assemble_stiffness, AssemblyError,
};
use crate::fespace::{quadrature_rule, ElementGeometry, FeError, FeFunction, FeSpace, QuadratureRule};
use crate::geometry::{point_triangle_distance, Point2};
use crate::greens::red_subdivide;
use crate::mesh::{Mesh, MeshError};
use crate::weights::Weight;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RitzError {
    #[error("function is not flagged zero-trace; the Ritz projection requires vanishing boundary values")]
    ZeroTraceRequired,
    #[error("zero-trace violation: |u| reaches {max_boundary:e} on the boundary against interior sup {sup:e}")]
    ZeroTraceViolated { max_boundary: f64, sup: f64 },
    #[error("degenerate input: ‖∇u‖ vanishes, the stability ratio is undefined")]
    DegenerateInput,
    #[error("finite element function lives on a different mesh than the quadrature mesh")]
    MeshMismatch,
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Fe(#[from] FeError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// An analytic test function with closures for value and gradient.
pub struct ProblemFunction {
    value: Box<dyn Fn(Point2) -> f64 + Send + Sync>,
    gradient: Box<dyn Fn(Point2) -> [f64; 2] + Send + Sync>,
    zero_trace: bool,
    grad_singularities: Vec<Point2>,
}

impl ProblemFunction {
    pub fn new<V, G>(value: V, gradient: G, zero_trace: bool) -> ProblemFunction
    where
        V: Fn(Point2) -> f64 + Send + Sync + 'static,
        G: Fn(Point2) -> [f64; 2] + Send + Sync + 'static,
    {
        ProblemFunction {
            value: Box::new(value),
            gradient: Box::new(gradient),
            zero_trace,
            grad_singularities: Vec::new(),
        }
    }

    /// Declares points where the gradient is unbounded; the weighted norm
    /// quadrature grades toward these in addition to weight singularities.
    pub fn with_grad_singularities(mut self, points: Vec<Point2>) -> ProblemFunction {
        self.grad_singularities = points;
        self
    }

    pub fn value(&self, x: Point2) -> f64 {
        (self.value)(x)
    }

    pub fn gradient(&self, x: Point2) -> [f64; 2] {
        (self.gradient)(x)
    }

    pub fn zero_trace(&self) -> bool {
        self.zero_trace
    }

    pub fn grad_singularities(&self) -> &[Point2] {
        &self.grad_singularities
    }

    /// Samples ~200 boundary points and checks |u| ≤ 1e-10 · sup |u|.
    pub fn check_zero_trace(&self, mesh: &Mesh) -> Result<(), RitzError> {
        let boundary_edges: Vec<_> = mesh.edges().iter().filter(|e| e.is_boundary()).collect();
        if boundary_edges.is_empty() {
            return Ok(());
        }
        let per_edge = (200 + boundary_edges.len() - 1) / boundary_edges.len();
        let mut max_boundary = 0.0f64;
        for e in &boundary_edges {
            let a = mesh.vertex(e.v[0]);
            let b = mesh.vertex(e.v[1]);
            for i in 0..per_edge {
                let t = (i as f64 + 0.5) / per_edge as f64;
                let p = a + (b - a) * t;
                max_boundary = max_boundary.max(self.value(p).abs());
            }
        }
        let stride = (mesh.n_triangles() / 512).max(1);
        let mut sup = 0.0f64;
        for t in (0..mesh.n_triangles()).step_by(stride) {
            sup = sup.max(self.value(mesh.triangle_centroid(t)).abs());
        }
        if sup > 0.0 && max_boundary > 1e-10 * sup {
            return Err(RitzError::ZeroTraceViolated { max_boundary, sup });
        }
        Ok(())
    }
}

/// A gradient source for norm quadrature: either a finite element function
/// (evaluated locally per element) or an analytic function.
pub enum GradField<'a> {
    Finite(&'a FeFunction),
    Analytic(&'a ProblemFunction),
}

impl<'a> GradField<'a> {
    fn gradient(&self, mesh: &Mesh, element: usize, x: Point2) -> [f64; 2] {
        match self {
            GradField::Finite(v) => {
                let lam = mesh.barycentric(element, x);
                v.grad_local(element, lam)
            }
            GradField::Analytic(u) => u.gradient(x),
        }
    }

    fn singularities(&self) -> &[Point2] {
        match self {
            GradField::Finite(_) => &[],
            GradField::Analytic(u) => u.grad_singularities(),
        }
    }
}

/// Quadrature controls for weighted gradient norms.
#[derive(Clone, Copy, Debug)]
pub struct SingularQuadSpec {
    /// Polynomial exactness of the per-cell rule.
    pub base_exactness: usize,
    /// Elements within `band_factor · h_max` of a singularity are
    /// recursively subdivided.
    pub band_factor: f64,
    /// Maximum graded subdivision depth.
    pub depth: usize,
    /// Relative indicator threshold above which the result is flagged.
    pub flag_tolerance: f64,
}

impl Default for SingularQuadSpec {
    fn default() -> Self {
        SingularQuadSpec {
            base_exactness: 6,
            band_factor: 2.0,
            depth: 6,
            flag_tolerance: 1e-5,
        }
    }
}

/// A quadrature value with its depth-increment error indicator.
#[derive(Clone, Copy, Debug)]
pub struct NormValue {
    pub value: f64,
    /// |value(depth) - value(depth-1)| accumulated over graded elements.
    pub indicator: f64,
    pub flagged: bool,
}

fn apply_rule<F: Fn(Point2) -> f64>(f: &F, verts: [Point2; 3], rule: &QuadratureRule) -> f64 {
    let geom = ElementGeometry::new(verts);
    let mut acc = 0.0;
    for (lambda, w) in rule.iter() {
        acc += w * geom.det * f(geom.point(*lambda));
    }
    acc
}

fn cell_diameter(v: [Point2; 3]) -> f64 {
    v[0].dist(v[1]).max(v[1].dist(v[2])).max(v[2].dist(v[0]))
}

/// Graded recursion: a cell splits while some singularity lies within its
/// own diameter, so cell size decays geometrically toward the singular
/// point. `force_split` guarantees at least one split at the top level.
fn graded_cell<F: Fn(Point2) -> f64>(
    f: &F,
    verts: [Point2; 3],
    rule: &QuadratureRule,
    singular: &[Point2],
    depth: usize,
    force_split: bool,
) -> f64 {
    let diam = cell_diameter(verts);
    let near = singular
        .iter()
        .any(|s| point_triangle_distance(*s, verts[0], verts[1], verts[2]) <= diam);
    if depth == 0 || !(near || force_split) {
        return apply_rule(f, verts, rule);
    }
    red_subdivide(verts, 1)
        .into_iter()
        .map(|child| graded_cell(f, child, rule, singular, depth - 1, false))
        .sum()
}

/// Collects the graded cell decomposition instead of integrating.
fn collect_graded_cells(
    verts: [Point2; 3],
    singular: &[Point2],
    depth: usize,
    force_split: bool,
    out: &mut Vec<[Point2; 3]>,
) {
    let diam = cell_diameter(verts);
    let near = singular
        .iter()
        .any(|s| point_triangle_distance(*s, verts[0], verts[1], verts[2]) <= diam);
    if depth == 0 || !(near || force_split) {
        out.push(verts);
        return;
    }
    for child in red_subdivide(verts, 1) {
        collect_graded_cells(child, singular, depth - 1, false, out);
    }
}

/// Right-hand side `b_i = ∫ ∇u · ∇ψ_i` with graded subdivision toward the
/// gradient singularities of `u`; identical to the plain assembly away
/// from them.
fn assemble_grad_rhs_graded(
    space: &FeSpace,
    u: &ProblemFunction,
    quad: &QuadratureRule,
    depth: usize,
    band_factor: f64,
) -> Result<Vec<f64>, RitzError> {
    let mesh = space.mesh();
    let singular = u.grad_singularities();
    let band = band_factor * mesh.h_max();
    let nloc = space.local_dofs();
    let mut rhs = vec![0.0; space.n_dofs()];
    let mut cells = Vec::new();
    for t in 0..mesh.n_triangles() {
        let geom = space.element_geometry(t);
        let dofs = space.element_dofs(t);
        let near = singular
            .iter()
            .any(|s| point_triangle_distance(*s, geom.verts[0], geom.verts[1], geom.verts[2]) <= band);
        cells.clear();
        if near {
            collect_graded_cells(geom.verts, singular, depth, true, &mut cells);
        } else {
            cells.push(geom.verts);
        }
        for cell in &cells {
            let cell_geom = ElementGeometry::new(*cell);
            for (lambda, w) in quad.iter() {
                let x = cell_geom.point(*lambda);
                let lam = mesh.barycentric(t, x);
                let basis = crate::fespace::eval_basis(space.degree(), lam)?;
                let g = u.gradient(x);
                let scale = w * cell_geom.det;
                for i in 0..nloc {
                    let grad_i = geom.push_gradient(basis.grads[i]);
                    rhs[dofs[i]] += scale * (g[0] * grad_i[0] + g[1] * grad_i[1]);
                }
            }
        }
    }
    Ok(rhs)
}

/// Computes `∫_Ω |∇v| w dx` by per-element quadrature with graded
/// subdivision near singularities of the weight or of `∇v`.
pub fn weighted_grad_l1_norm(
    v: &GradField,
    w: &Weight,
    mesh: &Mesh,
    spec: &SingularQuadSpec,
) -> Result<NormValue, RitzError> {
    if let GradField::Finite(func) = v {
        if !std::ptr::eq(func.space().mesh().as_ref(), mesh) {
            return Err(RitzError::MeshMismatch);
        }
    }
    let rule = quadrature_rule(spec.base_exactness)?;
    let mut singular: Vec<Point2> = w.singular_points();
    singular.extend_from_slice(v.singularities());
    let band = spec.band_factor * mesh.h_max();

    let mut value = 0.0;
    let mut indicator = 0.0;
    for t in 0..mesh.n_triangles() {
        let verts = mesh.triangle_vertices(t);
        let f = |x: Point2| {
            let g = v.gradient(mesh, t, x);
            g[0].hypot(g[1]) * w.eval(x)
        };
        let near_band = !singular.is_empty()
            && singular
                .iter()
                .any(|s| point_triangle_distance(*s, verts[0], verts[1], verts[2]) <= band);
        if near_band {
            let deep = graded_cell(&f, verts, &rule, &singular, spec.depth, true);
            let shallow = graded_cell(&f, verts, &rule, &singular, spec.depth - 1, true);
            value += deep;
            indicator += (deep - shallow).abs();
        } else {
            value += apply_rule(&f, verts, &rule);
        }
    }
    let flagged = indicator > spec.flag_tolerance * value.abs();
    Ok(NormValue {
        value,
        indicator,
        flagged,
    })
}

/// Computes the Ritz projection `R_h u ∈ V_h`:
/// `⟨∇R_h u, ∇ψ⟩ = ⟨∇u, ∇ψ⟩` for all interior basis functions ψ, with
/// boundary coefficients exactly zero. When the space has no interior dofs
/// the projection is the zero function.
pub fn ritz_project(
    space: &Arc<FeSpace>,
    u: &ProblemFunction,
    rel_tol: f64,
) -> Result<FeFunction, RitzError> {
    if !u.zero_trace() {
        return Err(RitzError::ZeroTraceRequired);
    }
    u.check_zero_trace(space.mesh())?;
    let k = space.degree();
    let stiffness_quad = quadrature_rule(2 * k)?;
    let rhs_quad = quadrature_rule(2 * k + 2)?;
    let a = assemble_stiffness(space, &stiffness_quad)?;
    let b = if u.grad_singularities().is_empty() {
        assemble_grad_rhs(space, |x| u.gradient(x), &rhs_quad)?
    } else {
        assemble_grad_rhs_graded(space, u, &rhs_quad, 6, 2.0)?
    };
    match apply_dirichlet(&a, &b, space.boundary_flags()) {
        Ok(sys) => {
            let coeffs = sys.solve(rel_tol)?;
            Ok(FeFunction::from_coefficients(Arc::clone(space), coeffs)?)
        }
        Err(AssemblyError::AllDofsBoundary) => Ok(FeFunction::zero(Arc::clone(space))),
        Err(e) => Err(e.into()),
    }
}

/// Result of one stability-ratio measurement.
#[derive(Clone, Copy, Debug)]
pub struct StabilityMeasurement {
    pub rho: f64,
    pub numerator: NormValue,
    pub denominator: NormValue,
}

/// Measures `ρ = ‖∇R_h u‖_{L¹_w} / ‖∇u‖_{L¹_w}` on the space's mesh.
pub fn stability_ratio(
    space: &Arc<FeSpace>,
    u: &ProblemFunction,
    w: &Weight,
    spec: &SingularQuadSpec,
    rel_tol: f64,
) -> Result<StabilityMeasurement, RitzError> {
    let uh = ritz_project(space, u, rel_tol)?;
    let mesh = space.mesh();
    let denominator = weighted_grad_l1_norm(&GradField::Analytic(u), w, mesh, spec)?;
    if denominator.value <= 1e-300 {
        return Err(RitzError::DegenerateInput);
    }
    let numerator = weighted_grad_l1_norm(&GradField::Finite(&uh), w, mesh, spec)?;
    Ok(StabilityMeasurement {
        rho: numerator.value / denominator.value,
        numerator,
        denominator,
    })
}

/// Normalized Galerkin residual:
/// `max_i |⟨∇(u - u_h), ∇ψ_i⟩| / ‖∇ψ_i‖_{L²}` over interior dofs i.
pub fn galerkin_residual(
    space: &FeSpace,
    u: &ProblemFunction,
    uh: &FeFunction,
    quad: &QuadratureRule,
) -> Result<f64, RitzError> {
    let a = assemble_stiffness(space, quad)?;
    let b = assemble_grad_rhs(space, |x| u.gradient(x), quad)?;
    let mut a_uh = vec![0.0; a.dim()];
    a.matvec(uh.coefficients(), &mut a_uh);
    let diag = a.diagonal();
    let mut worst = 0.0f64;
    for i in 0..a.dim() {
        if !space.is_boundary_dof(i) {
            worst = worst.max((b[i] - a_uh[i]).abs() / diag[i].sqrt());
        }
    }
    Ok(worst)
}

/// L² error `‖u - u_h‖_{L²}` by per-element quadrature.
pub fn l2_error(u: &ProblemFunction, uh: &FeFunction, quad: &QuadratureRule) -> f64 {
    let space = uh.space();
    let mesh = space.mesh();
    let mut acc = 0.0;
    for t in 0..mesh.n_triangles() {
        let geom = space.element_geometry(t);
        for (lambda, w) in quad.iter() {
            let x = geom.point(*lambda);
            let d = u.value(x) - uh.eval_local(t, *lambda);
            acc += w * geom.det * d * d;
        }
    }
    acc.sqrt()
}

/// Energy error `‖∇(u - u_h)‖_{L²}` by per-element quadrature.
pub fn energy_error(u: &ProblemFunction, uh: &FeFunction, quad: &QuadratureRule) -> f64 {
    let space = uh.space();
    let mesh = space.mesh();
    let mut acc = 0.0;
    for t in 0..mesh.n_triangles() {
        let geom = space.element_geometry(t);
        for (lambda, w) in quad.iter() {
            let x = geom.point(*lambda);
            let gu = u.gradient(x);
            let gh = uh.grad_local(t, *lambda);
            let dx = gu[0] - gh[0];
            let dy = gu[1] - gh[1];
            acc += w * geom.det * (dx * dx + dy * dy);
        }
    }
    acc.sqrt()
}

/// Wraps a finite element function as an analytic `ProblemFunction` via
/// point location on its own mesh.
pub fn wrap_fe_function(v: &FeFunction) -> ProblemFunction {
    let value = v.clone();
    let grad = v.clone();
    ProblemFunction::new(
        move |x| value.eval(x).expect("evaluation point inside the domain"),
        move |x| grad.grad(x).expect("evaluation point inside the domain"),
        true,
    )
}
