//! Quadrature rules on the reference triangle.
//!
//! Points are stored in barycentric coordinates and weights sum to 1/2 (the
//! reference-triangle area), so `∫_T f = 2|T| Σ w_q f(x_q)` on a physical
//! element. Low orders use symmetric positive-weight tables; higher orders
//! use a collapsed (Duffy) tensor Gauss rule. All weights are positive.

use super::FeError;
use crate::numeric::gauss_legendre;

#[derive(Clone, Debug)]
pub struct QuadratureRule {
    /// Barycentric points on the reference triangle.
    points: Vec<[f64; 3]>,
    /// Weights summing to 1/2.
    weights: Vec<f64>,
    /// Declared polynomial exactness degree.
    exactness: usize,
}

impl QuadratureRule {
    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn exactness(&self) -> usize {
        self.exactness
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64; 3], f64)> {
        self.points.iter().zip(self.weights.iter().copied())
    }
}

fn orbit_1(rule: &mut QuadratureRule, w: f64) {
    rule.points.push([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]);
    rule.weights.push(w * 0.5);
}

fn orbit_3(rule: &mut QuadratureRule, a: f64, w: f64) {
    let b = 1.0 - 2.0 * a;
    for p in [[b, a, a], [a, b, a], [a, a, b]] {
        rule.points.push(p);
        rule.weights.push(w * 0.5);
    }
}

fn orbit_6(rule: &mut QuadratureRule, a: f64, b: f64, w: f64) {
    let c = 1.0 - a - b;
    for p in [
        [a, b, c],
        [a, c, b],
        [b, a, c],
        [b, c, a],
        [c, a, b],
        [c, b, a],
    ] {
        rule.points.push(p);
        rule.weights.push(w * 0.5);
    }
}

/// Collapsed tensor Gauss rule exact for total degree `p`: the Duffy map
/// x = u(1-v), y = v turns the monomial x^a y^b into a polynomial of degree
/// a in u and a+b+1 in v, so m = ceil((p+2)/2) Gauss points per direction
/// suffice.
fn collapsed_gauss(p: usize) -> QuadratureRule {
    let m = (p + 3) / 2;
    let (nodes, weights) = gauss_legendre(m);
    // Map [-1,1] -> [0,1].
    let nodes01: Vec<f64> = nodes.iter().map(|x| 0.5 * (x + 1.0)).collect();
    let weights01: Vec<f64> = weights.iter().map(|w| 0.5 * w).collect();
    let mut rule = QuadratureRule {
        points: Vec::with_capacity(m * m),
        weights: Vec::with_capacity(m * m),
        exactness: p,
    };
    for (i, &u) in nodes01.iter().enumerate() {
        for (j, &v) in nodes01.iter().enumerate() {
            let x = u * (1.0 - v);
            let y = v;
            rule.points.push([1.0 - x - y, x, y]);
            rule.weights.push(weights01[i] * weights01[j] * (1.0 - v));
        }
    }
    rule
}

/// Returns a positive-weight rule integrating all polynomials of total
/// degree `exactness` exactly on the reference triangle. The returned
/// rule's declared exactness may exceed the request (degree 3 is served by
/// the positive 6-point degree-4 rule).
pub fn quadrature_rule(exactness: usize) -> Result<QuadratureRule, FeError> {
    if !(1..=20).contains(&exactness) {
        return Err(FeError::UnsupportedExactness(exactness));
    }
    let mut rule = QuadratureRule {
        points: Vec::new(),
        weights: Vec::new(),
        exactness,
    };
    match exactness {
        1 => orbit_1(&mut rule, 1.0),
        2 => orbit_3(&mut rule, 1.0 / 6.0, 1.0 / 3.0),
        3 | 4 => {
            rule.exactness = 4;
            orbit_3(&mut rule, 0.445948490915965, 0.223381589678011);
            orbit_3(&mut rule, 0.091576213509771, 0.109951743655322);
        }
        5 => {
            orbit_1(&mut rule, 0.225);
            orbit_3(&mut rule, 0.470142064105115, 0.132394152788506);
            orbit_3(&mut rule, 0.101286507323456, 0.125939180544827);
        }
        6 => {
            orbit_3(&mut rule, 0.249286745170910, 0.116786275726379);
            orbit_3(&mut rule, 0.063089014491502, 0.050844906370207);
            orbit_6(
                &mut rule,
                0.310352451033785,
                0.053145049844816,
                0.082851075618374,
            );
        }
        p => rule = collapsed_gauss(p),
    }
    Ok(rule)
}

/// Exact integral of the monomial x^a y^b over the reference triangle:
/// a! b! / (a + b + 2)!.
pub fn reference_monomial_integral(a: u32, b: u32) -> f64 {
    let factorial = |n: u32| -> f64 { (1..=n).map(|k| k as f64).product::<f64>().max(1.0) };
    factorial(a) * factorial(b) / factorial(a + b + 2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exactness_one_is_barycenter() {
        let rule = quadrature_rule(1).unwrap();
        assert_eq!(rule.len(), 1);
        assert_eq!(rule.points()[0], [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]);
        assert_eq!(rule.weights()[0], 0.5);
    }

    #[test]
    fn all_rules_integrate_one_to_half_and_have_positive_weights() {
        for p in 1..=20 {
            let rule = quadrature_rule(p).unwrap();
            assert!(rule.weights().iter().all(|&w| w > 0.0), "exactness {p}");
            let mass: f64 = rule.weights().iter().sum();
            assert_relative_eq!(mass, 0.5, max_relative = 1e-13);
        }
    }

    #[test]
    fn monomial_exactness_audit() {
        // Oracle: closed-form reference integrals a! b! / (a+b+2)!.
        for p in 1..=20usize {
            let rule = quadrature_rule(p).unwrap();
            let declared = rule.exactness();
            assert!(declared >= p);
            for a in 0..=declared as u32 {
                for b in 0..=(declared as u32 - a) {
                    let approx: f64 = rule
                        .iter()
                        .map(|(lambda, w)| {
                            let x = lambda[1];
                            let y = lambda[2];
                            w * x.powi(a as i32) * y.powi(b as i32)
                        })
                        .sum();
                    let exact = reference_monomial_integral(a, b);
                    assert_relative_eq!(approx, exact, max_relative = 1e-13, epsilon = 1e-16);
                }
            }
        }
    }

    #[test]
    fn exactness_four_on_x2y2() {
        // Exact value of the x^2 y^2 integral: 2! 2! / 6! = 1/180.
        let rule = quadrature_rule(4).unwrap();
        let approx: f64 = rule
            .iter()
            .map(|(l, w)| w * l[1] * l[1] * l[2] * l[2])
            .sum();
        assert_relative_eq!(approx, 1.0 / 180.0, max_relative = 1e-13);
    }

    #[test]
    fn out_of_range_exactness_rejected() {
        assert!(quadrature_rule(0).is_err());
        assert!(quadrature_rule(21).is_err());
    }
}
