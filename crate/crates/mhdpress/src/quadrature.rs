//! Quadrature rules on the reference tetrahedron and triangle.
//!
//! Rules are built as conical (Duffy-collapsed) products of Gauss-Legendre
//! rules, so any declared degree up to [`MAX_DEGREE`] is exact for
//! polynomials of that total degree. Degree 1 is special-cased to the
//! one-point centroid rule.

use crate::error::{Error, Result};
use nalgebra::DMatrix;

pub const MAX_DEGREE: usize = 12;

/// Quadrature rule on the reference tetrahedron (vertices at the origin and
/// the unit points; volume 1/6). Points are stored barycentric.
#[derive(Debug, Clone)]
pub struct QuadRule {
    pub degree: usize,
    /// Barycentric coordinates (lambda_0..lambda_3) of each point.
    pub points: Vec<[f64; 4]>,
    /// Reference-volume weights; they sum to 1/6.
    pub weights: Vec<f64>,
}

/// Quadrature rule on the reference triangle (area 1/2), barycentric points.
#[derive(Debug, Clone)]
pub struct TriQuadRule {
    pub degree: usize,
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

/// Gauss-Legendre nodes/weights on [0,1] via Golub-Welsch on the Jacobi
/// matrix of the Legendre recurrence.
fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let kf = k as f64;
        let b = kf / (4.0 * kf * kf - 1.0).sqrt();
        jac[(k - 1, k)] = b;
        jac[(k, k - 1)] = b;
    }
    let eig = nalgebra::SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let x = eig.eigenvalues[i];
            let w = 2.0 * eig.eigenvectors[(0, i)] * eig.eigenvectors[(0, i)];
            (x, w)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    // map from [-1,1] to [0,1]
    let xs = pairs.iter().map(|p| 0.5 * (p.0 + 1.0)).collect();
    let ws = pairs.iter().map(|p| 0.5 * p.1).collect();
    (xs, ws)
}

/// Rule exact for all polynomials of total degree <= `degree` on the
/// reference tet.
pub fn tet_rule(degree: usize) -> Result<QuadRule> {
    if degree == 0 || degree > MAX_DEGREE {
        return Err(Error::UnsupportedDegree(degree));
    }
    if degree == 1 {
        return Ok(QuadRule {
            degree,
            points: vec![[0.25; 4]],
            weights: vec![1.0 / 6.0],
        });
    }
    // Collapsed map (u,v,w) in [0,1]^3:
    //   x = u, y = v(1-u), z = w(1-u)(1-v),  jacobian (1-u)^2 (1-v).
    // Integrand degree in u is degree+2, in v degree+1, in w degree.
    let (xu, wu) = gauss_legendre_unit(degree / 2 + 2);
    let (xv, wv) = gauss_legendre_unit(degree / 2 + 2);
    let (xw, ww) = gauss_legendre_unit(degree / 2 + 1);
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for (u, cu) in xu.iter().zip(&wu) {
        for (v, cv) in xv.iter().zip(&wv) {
            for (w, cw) in xw.iter().zip(&ww) {
                let x = *u;
                let y = v * (1.0 - u);
                let z = w * (1.0 - u) * (1.0 - v);
                let jac = (1.0 - u) * (1.0 - u) * (1.0 - v);
                points.push([1.0 - x - y - z, x, y, z]);
                weights.push(cu * cv * cw * jac);
            }
        }
    }
    Ok(QuadRule {
        degree,
        points,
        weights,
    })
}

/// Rule exact for polynomials of total degree <= `degree` on the reference
/// triangle.
pub fn tri_rule(degree: usize) -> Result<TriQuadRule> {
    if degree == 0 || degree > MAX_DEGREE {
        return Err(Error::UnsupportedDegree(degree));
    }
    let (xu, wu) = gauss_legendre_unit(degree / 2 + 2);
    let (xv, wv) = gauss_legendre_unit(degree / 2 + 1);
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for (u, cu) in xu.iter().zip(&wu) {
        for (v, cv) in xv.iter().zip(&wv) {
            let x = *u;
            let y = v * (1.0 - u);
            let jac = 1.0 - u;
            points.push([1.0 - x - y, x, y]);
            weights.push(cu * cv * jac);
        }
    }
    Ok(TriQuadRule {
        degree,
        points,
        weights,
    })
}
