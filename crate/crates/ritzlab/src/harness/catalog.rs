//! Named domains and the test-function catalog.
//!
//! The catalog spans the regimes the stability theorem quantifies over:
//! `sine` (smooth), `hat` and `polynomial:<k>` (members of every `V_h`
//! in the refinement family) and `bubble-power:<beta>` (gradient blow-up
//! of order `β - 1` at an interior point, weighted-integrable for `β` not
//! too negative).

use super::HarnessError;
use crate::fespace::{build_space, FeFunction};
use crate::geometry::{polygon_centroid, Point2};
use crate::mesh::{triangulate_convex_polygon, Mesh};
use crate::ritz::ProblemFunction;
use crate::sampling::HaltonRect;
use std::sync::Arc;

/// A convex polygonal domain with its edge geometry.
#[derive(Clone, Debug)]
pub struct DomainDef {
    pub name: String,
    pub polygon: Vec<Point2>,
}

impl DomainDef {
    pub fn unit_square() -> DomainDef {
        DomainDef {
            name: "unit-square".into(),
            polygon: vec![
                Point2::new(0.0, 0.0),
                Point2::new(1.0, 0.0),
                Point2::new(1.0, 1.0),
                Point2::new(0.0, 1.0),
            ],
        }
    }

    /// An irregular convex pentagon.
    pub fn pentagon() -> DomainDef {
        DomainDef {
            name: "pentagon".into(),
            polygon: vec![
                Point2::new(0.0, 0.0),
                Point2::new(1.3, 0.05),
                Point2::new(1.7, 0.95),
                Point2::new(0.8, 1.5),
                Point2::new(-0.2, 0.9),
            ],
        }
    }

    pub fn parse(spec: &str) -> Result<DomainDef, HarnessError> {
        match spec {
            "unit-square" => Ok(DomainDef::unit_square()),
            "pentagon" => Ok(DomainDef::pentagon()),
            other => {
                let Some(rest) = other.strip_prefix("polygon:") else {
                    return Err(HarnessError::Config {
                        line: None,
                        message: format!(
                            "unknown domain {other:?}; expected unit-square, pentagon or polygon:..."
                        ),
                    });
                };
                let mut polygon = Vec::new();
                for pair in rest.split(';') {
                    let parts: Vec<&str> = pair.split(',').collect();
                    if parts.len() != 2 {
                        return Err(HarnessError::Config {
                            line: None,
                            message: format!("polygon vertex needs `x,y`, got {pair:?}"),
                        });
                    }
                    let x: f64 = parts[0].trim().parse().map_err(|_| HarnessError::Config {
                        line: None,
                        message: format!("invalid coordinate {:?}", parts[0]),
                    })?;
                    let y: f64 = parts[1].trim().parse().map_err(|_| HarnessError::Config {
                        line: None,
                        message: format!("invalid coordinate {:?}", parts[1]),
                    })?;
                    polygon.push(Point2::new(x, y));
                }
                if polygon.len() < 3 {
                    return Err(HarnessError::Config {
                        line: None,
                        message: "polygon needs at least 3 vertices".into(),
                    });
                }
                Ok(DomainDef {
                    name: "polygon".into(),
                    polygon,
                })
            }
        }
    }

    pub fn centroid(&self) -> Point2 {
        polygon_centroid(&self.polygon)
    }

    pub fn is_unit_square(&self) -> bool {
        self.polygon
            == [
                Point2::new(0.0, 0.0),
                Point2::new(1.0, 0.0),
                Point2::new(1.0, 1.0),
                Point2::new(0.0, 1.0),
            ]
    }

    /// Centroid-fan base mesh (level 0).
    pub fn base_mesh(&self) -> Result<Mesh, HarnessError> {
        let diam = self.diameter();
        Ok(triangulate_convex_polygon(&self.polygon, 2.0 * diam)?)
    }

    /// Base mesh refined `level` times.
    pub fn mesh_at_level(&self, level: usize) -> Result<Mesh, HarnessError> {
        let mut mesh = self.base_mesh()?;
        for _ in 0..level {
            mesh = mesh.refine_uniform();
        }
        Ok(mesh)
    }

    pub fn diameter(&self) -> f64 {
        let mut d = 0.0f64;
        for (i, a) in self.polygon.iter().enumerate() {
            for b in &self.polygon[i + 1..] {
                d = d.max(a.dist(*b));
            }
        }
        d
    }

    pub fn bounding_box(&self) -> (Point2, Point2) {
        let mut lo = self.polygon[0];
        let mut hi = self.polygon[0];
        for v in &self.polygon {
            lo.x = lo.x.min(v.x);
            lo.y = lo.y.min(v.y);
            hi.x = hi.x.max(v.x);
            hi.y = hi.y.max(v.y);
        }
        (lo, hi)
    }

    /// Inward unit normals and edge anchor points, one per polygon edge.
    fn edge_normals(&self) -> Vec<(Point2, Point2)> {
        let n = self.polygon.len();
        (0..n)
            .map(|i| {
                let a = self.polygon[i];
                let b = self.polygon[(i + 1) % n];
                let e = b - a;
                let len = e.norm();
                (a, Point2::new(-e.y / len, e.x / len))
            })
            .collect()
    }

    /// Distance to the boundary for interior points of the convex polygon:
    /// the minimum of the inward signed line distances.
    pub fn boundary_distance(&self, x: Point2) -> f64 {
        self.edge_normals()
            .iter()
            .map(|(a, n)| (x - *a).dot(*n))
            .fold(f64::INFINITY, f64::min)
    }

    /// Gradient of the distance function: the inward normal of the nearest
    /// edge (piecewise constant; ridge points take the lowest-index edge).
    pub fn boundary_distance_grad(&self, x: Point2) -> [f64; 2] {
        let mut best = f64::INFINITY;
        let mut grad = [0.0, 0.0];
        for (a, n) in self.edge_normals() {
            let d = (x - a).dot(n);
            if d < best {
                best = d;
                grad = [n.x, n.y];
            }
        }
        grad
    }

    /// Polynomial bubble `Π_i ℓ_i(x)` of the inward edge distances:
    /// positive inside, zero on the boundary.
    pub fn bubble(&self, x: Point2) -> f64 {
        self.edge_normals()
            .iter()
            .map(|(a, n)| (x - *a).dot(*n))
            .product()
    }

    pub fn bubble_grad(&self, x: Point2) -> [f64; 2] {
        let normals = self.edge_normals();
        let values: Vec<f64> = normals.iter().map(|(a, n)| (x - *a).dot(*n)).collect();
        let mut g = [0.0, 0.0];
        for (j, (_, n)) in normals.iter().enumerate() {
            let mut rest = 1.0;
            for (i, v) in values.iter().enumerate() {
                if i != j {
                    rest *= v;
                }
            }
            g[0] += n.x * rest;
            g[1] += n.y * rest;
        }
        g
    }

    /// Deterministic estimate of `max bubble` over the domain.
    fn bubble_sup(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        let mut sup = self.bubble(self.centroid());
        for p in HaltonRect::new(lo, hi, 0).take(2000) {
            if self.boundary_distance(p) > 0.0 {
                sup = sup.max(self.bubble(p));
            }
        }
        sup
    }
}

/// A parsed catalog id.
#[derive(Clone, Debug, PartialEq)]
pub enum FunctionId {
    Sine,
    Hat,
    BubblePower { beta: f64 },
    Polynomial { degree: usize },
}

pub fn parse_function_id(id: &str) -> Result<FunctionId, String> {
    if id == "sine" {
        return Ok(FunctionId::Sine);
    }
    if id == "hat" {
        return Ok(FunctionId::Hat);
    }
    if let Some(rest) = id.strip_prefix("bubble-power:") {
        let beta: f64 = rest
            .parse()
            .map_err(|_| format!("invalid bubble-power exponent {rest:?}"))?;
        if !(-1.0..=4.0).contains(&beta) {
            return Err(format!("bubble-power exponent {beta} outside [-1, 4]"));
        }
        return Ok(FunctionId::BubblePower { beta });
    }
    if let Some(rest) = id.strip_prefix("polynomial:") {
        let degree: usize = rest
            .parse()
            .map_err(|_| format!("invalid polynomial degree {rest:?}"))?;
        if !(degree == 1 || degree == 2) {
            return Err(format!("polynomial degree {degree} unsupported (1 or 2)"));
        }
        return Ok(FunctionId::Polynomial { degree });
    }
    Err(format!(
        "unknown function id {id:?}; expected sine, hat, bubble-power:<beta> or polynomial:<k>"
    ))
}

/// Builds a catalog function on the given domain. `center` applies to
/// `bubble-power` and defaults to the domain centroid.
pub fn build_function(
    id: &FunctionId,
    domain: &DomainDef,
    center: Option<Point2>,
) -> Result<ProblemFunction, HarnessError> {
    match id {
        FunctionId::Sine => Ok(build_sine(domain)),
        FunctionId::Hat => build_hat(domain),
        FunctionId::BubblePower { beta } => {
            Ok(build_bubble_power(domain, center.unwrap_or_else(|| domain.centroid()), *beta))
        }
        FunctionId::Polynomial { degree } => build_polynomial(domain, *degree),
    }
}

fn build_sine(domain: &DomainDef) -> ProblemFunction {
    if domain.is_unit_square() {
        let pi = std::f64::consts::PI;
        return ProblemFunction::new(
            move |p| (pi * p.x).sin() * (pi * p.y).sin(),
            move |p| {
                [
                    pi * (pi * p.x).cos() * (pi * p.y).sin(),
                    pi * (pi * p.x).sin() * (pi * p.y).cos(),
                ]
            },
            true,
        );
    }
    // General convex domains: a sine-warped normalized bubble, smooth and
    // vanishing exactly on the boundary.
    let pi = std::f64::consts::PI;
    let d1 = domain.clone();
    let d2 = domain.clone();
    let sup = domain.bubble_sup();
    ProblemFunction::new(
        move |p| (0.5 * pi * d1.bubble(p) / sup).sin(),
        move |p| {
            let arg = 0.5 * pi * d2.bubble(p) / sup;
            let g = d2.bubble_grad(p);
            let factor = 0.5 * pi / sup * arg.cos();
            [factor * g[0], factor * g[1]]
        },
        true,
    )
}

fn build_hat(domain: &DomainDef) -> Result<ProblemFunction, HarnessError> {
    // P1 hat at the fan centroid vertex of the base mesh: a member of V_h
    // at every refinement level.
    let base = Arc::new(domain.base_mesh()?);
    let space = Arc::new(build_space(Arc::clone(&base), 1)?);
    let centroid_vertex = domain.polygon.len();
    let mut coeffs = vec![0.0; space.n_dofs()];
    coeffs[centroid_vertex] = 1.0;
    let hat = FeFunction::from_coefficients(space, coeffs)?;
    let value = hat.clone();
    let grad = hat;
    Ok(ProblemFunction::new(
        move |p| value.eval(p).expect("point inside the domain"),
        move |p| grad.grad(p).expect("point inside the domain"),
        true,
    ))
}

fn build_polynomial(domain: &DomainDef, degree: usize) -> Result<ProblemFunction, HarnessError> {
    // Base-mesh interpolant of the normalized bubble: piecewise polynomial
    // on the base mesh, hence a member of V_h at every level.
    let base = Arc::new(domain.base_mesh()?);
    let space = Arc::new(build_space(Arc::clone(&base), degree)?);
    let sup = domain.bubble_sup();
    let d = domain.clone();
    let mut v = crate::fespace::interpolate(&space, move |p| d.bubble(p) / sup);
    let mut coeffs = v.coefficients().to_vec();
    for i in 0..space.n_dofs() {
        if space.is_boundary_dof(i) {
            coeffs[i] = 0.0;
        }
    }
    v = FeFunction::from_coefficients(Arc::clone(&space), coeffs)?;
    let value = v.clone();
    let grad = v;
    Ok(ProblemFunction::new(
        move |p| value.eval(p).expect("point inside the domain"),
        move |p| grad.grad(p).expect("point inside the domain"),
        true,
    ))
}

fn build_bubble_power(domain: &DomainDef, center: Point2, beta: f64) -> ProblemFunction {
    // u = d_Ω(x) · |x - center|^β: zero trace with an interior gradient
    // singularity of order β - 1 (and a value singularity for β < 0).
    let d1 = domain.clone();
    let d2 = domain.clone();
    let f = ProblemFunction::new(
        move |p| d1.boundary_distance(p) * p.dist(center).powf(beta),
        move |p| {
            let rho = p.dist(center);
            let dist = d2.boundary_distance(p);
            let dg = d2.boundary_distance_grad(p);
            let rb = rho.powf(beta);
            let radial = beta * rho.powf(beta - 2.0);
            [
                dg[0] * rb + dist * radial * (p.x - center.x),
                dg[1] * rb + dist * radial * (p.y - center.y),
            ]
        },
        true,
    );
    if beta != 0.0 && beta < 1.0 {
        f.with_grad_singularities(vec![center])
    } else {
        f
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn pentagon_is_convex_and_meshable() {
        let d = DomainDef::pentagon();
        let mesh = d.base_mesh().unwrap();
        assert_eq!(mesh.n_triangles(), 5);
        mesh.conformity_audit().unwrap();
    }

    #[test]
    fn domain_parse_variants() {
        assert!(DomainDef::parse("unit-square").unwrap().is_unit_square());
        assert_eq!(DomainDef::parse("pentagon").unwrap().polygon.len(), 5);
        let d = DomainDef::parse("polygon:0,0;2,0;1,2").unwrap();
        assert_eq!(d.polygon.len(), 3);
        assert!(DomainDef::parse("hexagon").is_err());
        assert!(DomainDef::parse("polygon:0,0;1").is_err());
    }

    #[test]
    fn boundary_distance_on_unit_square() {
        let d = DomainDef::unit_square();
        assert_relative_eq!(d.boundary_distance(Point2::new(0.5, 0.5)), 0.5);
        assert_relative_eq!(d.boundary_distance(Point2::new(0.25, 0.5)), 0.25);
        assert_relative_eq!(d.boundary_distance(Point2::new(0.5, 0.0)), 0.0);
        let g = d.boundary_distance_grad(Point2::new(0.5, 0.1));
        assert_eq!(g, [0.0, 1.0]);
    }

    #[test]
    fn bubble_vanishes_on_boundary_and_is_positive_inside() {
        let d = DomainDef::pentagon();
        assert!(d.bubble(d.centroid()) > 0.0);
        for i in 0..d.polygon.len() {
            let a = d.polygon[i];
            let b = d.polygon[(i + 1) % d.polygon.len()];
            let mid = (a + b) * 0.5;
            assert!(d.bubble(mid).abs() < 1e-12 * d.bubble(d.centroid()));
        }
        // Finite-difference check of the bubble gradient.
        let p = Point2::new(0.7, 0.6);
        let g = d.bubble_grad(p);
        let eps = 1e-6;
        let fd_x = (d.bubble(p + Point2::new(eps, 0.0)) - d.bubble(p - Point2::new(eps, 0.0)))
            / (2.0 * eps);
        let fd_y = (d.bubble(p + Point2::new(0.0, eps)) - d.bubble(p - Point2::new(0.0, eps)))
            / (2.0 * eps);
        assert_relative_eq!(g[0], fd_x, max_relative = 1e-6);
        assert_relative_eq!(g[1], fd_y, max_relative = 1e-6);
    }

    #[test]
    fn function_ids_parse() {
        assert_eq!(parse_function_id("sine").unwrap(), FunctionId::Sine);
        assert_eq!(parse_function_id("hat").unwrap(), FunctionId::Hat);
        assert!(matches!(
            parse_function_id("bubble-power:-0.5").unwrap(),
            FunctionId::BubblePower { .. }
        ));
        assert!(matches!(
            parse_function_id("polynomial:2").unwrap(),
            FunctionId::Polynomial { degree: 2 }
        ));
        assert!(parse_function_id("cosine").is_err());
        assert!(parse_function_id("polynomial:3").is_err());
        assert!(parse_function_id("bubble-power:x").is_err());
    }

    #[test]
    fn catalog_functions_have_zero_trace() {
        for domain in [DomainDef::unit_square(), DomainDef::pentagon()] {
            let mesh = domain.mesh_at_level(2).unwrap();
            for id in ["sine", "hat", "polynomial:1", "polynomial:2", "bubble-power:-0.5"] {
                let fid = parse_function_id(id).unwrap();
                let f = build_function(&fid, &domain, Some(Point2::new(0.31, 0.57))).unwrap();
                f.check_zero_trace(&mesh)
                    .unwrap_or_else(|e| panic!("{id} on {}: {e}", domain.name));
            }
        }
    }

    #[test]
    fn bubble_power_gradient_matches_finite_differences() {
        let domain = DomainDef::unit_square();
        let c = Point2::new(0.31, 0.57);
        let f = build_bubble_power(&domain, c, -0.5);
        // Probe points off the distance-function ridges (where ∇d jumps).
        for p in [Point2::new(0.2, 0.45), Point2::new(0.6, 0.83)] {
            let g = f.gradient(p);
            let eps = 1e-7;
            let fd_x =
                (f.value(p + Point2::new(eps, 0.0)) - f.value(p - Point2::new(eps, 0.0)))
                    / (2.0 * eps);
            let fd_y =
                (f.value(p + Point2::new(0.0, eps)) - f.value(p - Point2::new(0.0, eps)))
                    / (2.0 * eps);
            assert_relative_eq!(g[0], fd_x, max_relative = 1e-5);
            assert_relative_eq!(g[1], fd_y, max_relative = 1e-5);
        }
    }

    #[test]
    fn hat_is_one_at_centroid_and_zero_on_boundary() {
        let domain = DomainDef::unit_square();
        let f = build_hat(&domain).unwrap();
        assert_relative_eq!(f.value(domain.centroid()), 1.0);
        assert_eq!(f.value(Point2::new(0.0, 0.5)), 0.0);
    }
}
