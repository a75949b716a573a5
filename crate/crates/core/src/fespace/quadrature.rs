//! Symmetric triangle rules in barycentric coordinates and a Gauss rule on
//! edges. Weights are normalized to sum to one; multiply by the area (or
//! edge length) to integrate.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct QuadratureRule<T> {
    pub points: Vec<[T; 3]>,
    pub weights: Vec<T>,
    pub degree: usize,
}

pub const MAX_DEGREE: usize = 6;

/// Degree used for all operator assembly (exact for P2×P2 stiffness and mass).
pub const ASSEMBLY_DEGREE: usize = 4;

/// Degree used for integrating errors against analytic fields.
pub const ERROR_DEGREE: usize = 6;

impl<T: Scalar> QuadratureRule<T> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[T; 3], T)> + '_ {
        self.points.iter().zip(self.weights.iter().copied())
    }
}

/// Rule exact for polynomials of total degree `degree` on any triangle.
pub fn quadrature<T: Scalar>(degree: usize) -> Result<QuadratureRule<T>> {
    let mut pts: Vec<([f64; 3], f64)> = Vec::new();
    match degree {
        0 | 1 => pts.push(([1.0 / 3.0; 3], 1.0)),
        2 => orbit3(&mut pts, 2.0 / 3.0, 1.0 / 6.0, 1.0 / 3.0),
        3 | 4 => {
            orbit3(&mut pts, 0.108_103_018_168_070_227_36, 0.445_948_490_915_964_886_32, 0.223_381_589_678_011_465_70);
            orbit3(&mut pts, 0.816_847_572_980_458_513_08, 0.091_576_213_509_770_743_46, 0.109_951_743_655_321_867_64);
        }
        5 => {
            pts.push(([1.0 / 3.0; 3], 0.225));
            orbit3(&mut pts, 0.059_715_871_789_769_820_46, 0.470_142_064_105_115_089_77, 0.132_394_152_788_506_180_74);
            orbit3(&mut pts, 0.797_426_985_353_087_322_40, 0.101_286_507_323_456_338_80, 0.125_939_180_544_827_152_60);
        }
        6 => {
            orbit3(&mut pts, 0.501_426_509_658_179_157_42, 0.249_286_745_170_910_421_29, 0.116_786_275_726_379_366_03);
            orbit3(&mut pts, 0.873_821_971_016_995_543_32, 0.063_089_014_491_502_228_34, 0.050_844_906_370_206_816_92);
            orbit6(
                &mut pts,
                [0.053_145_049_844_816_947_35, 0.310_352_451_033_784_405_42, 0.636_502_499_121_398_647_23],
                0.082_851_075_618_373_575_19,
            );
        }
        _ => return Err(Error::UnsupportedDegree(degree)),
    }
    Ok(QuadratureRule {
        points: pts.iter().map(|(p, _)| p.map(T::lit)).collect(),
        weights: pts.iter().map(|&(_, w)| T::lit(w)).collect(),
        degree,
    })
}

// (a, b, b) and its two rotations
fn orbit3(pts: &mut Vec<([f64; 3], f64)>, a: f64, b: f64, w: f64) {
    pts.push(([a, b, b], w));
    pts.push(([b, a, b], w));
    pts.push(([b, b, a], w));
}

fn orbit6(pts: &mut Vec<([f64; 3], f64)>, c: [f64; 3], w: f64) {
    for p in [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]] {
        pts.push(([c[p[0]], c[p[1]], c[p[2]]], w));
    }
}

/// Three-point Gauss rule on `[0, 1]`, exact to degree 5; weights sum to one.
pub fn edge_gauss<T: Scalar>() -> Vec<(T, T)> {
    let d = 0.5 * (0.6f64).sqrt();
    vec![
        (T::lit(0.5 - d), T::lit(5.0 / 18.0)),
        (T::lit(0.5), T::lit(8.0 / 18.0)),
        (T::lit(0.5 + d), T::lit(5.0 / 18.0)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    // ∫ x^a y^b over the reference triangle
    fn monomial_integral(a: u32, b: u32) -> f64 {
        factorial(a) * factorial(b) / factorial(a + b + 2)
    }

    #[test]
    fn monomials_are_integrated_exactly() {
        for degree in 0..=MAX_DEGREE {
            let q = quadrature::<f64>(degree).unwrap();
            let s: f64 = q.weights.iter().sum();
            assert!((s - 1.0).abs() < 1e-15);
            assert!(q.weights.iter().all(|&w| w > 0.0));
            for a in 0..=degree as u32 {
                for b in 0..=(degree as u32 - a) {
                    // reference triangle: x = λ1, y = λ2, area 1/2
                    let approx: f64 = 0.5
                        * q.iter()
                            .map(|(p, w)| w * p[1].powi(a as i32) * p[2].powi(b as i32))
                            .sum::<f64>();
                    let exact = monomial_integral(a, b);
                    assert!(
                        (approx - exact).abs() < 1e-15,
                        "degree {degree}, x^{a} y^{b}: {approx} vs {exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn spec_examples() {
        let q1 = quadrature::<f64>(1).unwrap();
        assert!((0.5 * q1.weights.iter().sum::<f64>() - 0.5).abs() < 1e-16);
        let q2 = quadrature::<f64>(2).unwrap();
        let v: f64 = 0.5 * q2.iter().map(|(p, w)| w * p[0] * p[1]).sum::<f64>();
        assert!((v - 1.0 / 24.0).abs() < 1e-16);
        let q4 = quadrature::<f64>(4).unwrap();
        let v: f64 = 0.5 * q4.iter().map(|(p, w)| w * p[0].powi(4)).sum::<f64>();
        assert!((v - 1.0 / 30.0).abs() < 1e-15);
    }

    #[test]
    fn degree_too_high() {
        assert!(matches!(quadrature::<f64>(7), Err(Error::UnsupportedDegree(7))));
    }

    #[test]
    fn edge_rule_is_exact_to_degree_five() {
        let g = edge_gauss::<f64>();
        for k in 0..=5 {
            let v: f64 = g.iter().map(|&(t, w)| w * t.powi(k)).sum();
            assert!((v - 1.0 / (k as f64 + 1.0)).abs() < 1e-15);
        }
    }
}
