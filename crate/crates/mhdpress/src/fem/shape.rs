//! Lagrange shape functions (P1/P2) on the reference tet and triangle, and
//! per-element affine geometry.

use crate::mesh::{cross, dot, sub, Mesh, Point};

/// Number of local nodes for a tet of the given degree.
pub fn n_local_tet(degree: usize) -> usize {
    match degree {
        1 => 4,
        2 => 10,
        _ => unreachable!("degree checked at space construction"),
    }
}

pub fn n_local_tri(degree: usize) -> usize {
    match degree {
        1 => 3,
        2 => 6,
        _ => unreachable!(),
    }
}

/// Tet edge enumeration used for P2 nodes: (0,1),(0,2),(0,3),(1,2),(1,3),(2,3).
pub const TET_EDGES: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
pub const TRI_EDGES: [(usize, usize); 3] = [(0, 1), (1, 2), (2, 0)];

/// Shape values at a barycentric point of the reference tet.
pub fn tet_shape(degree: usize, l: [f64; 4], out: &mut [f64]) {
    match degree {
        1 => out[..4].copy_from_slice(&l),
        2 => {
            for i in 0..4 {
                out[i] = l[i] * (2.0 * l[i] - 1.0);
            }
            for (e, (a, b)) in TET_EDGES.iter().enumerate() {
                out[4 + e] = 4.0 * l[*a] * l[*b];
            }
        }
        _ => unreachable!(),
    }
}

/// Barycentric gradients d(shape)/d(lambda_k) at a barycentric point.
pub fn tet_shape_dbary(degree: usize, l: [f64; 4], out: &mut [[f64; 4]]) {
    match degree {
        1 => {
            for (i, o) in out[..4].iter_mut().enumerate() {
                *o = [0.0; 4];
                o[i] = 1.0;
            }
        }
        2 => {
            for i in 0..4 {
                out[i] = [0.0; 4];
                out[i][i] = 4.0 * l[i] - 1.0;
            }
            for (e, (a, b)) in TET_EDGES.iter().enumerate() {
                out[4 + e] = [0.0; 4];
                out[4 + e][*a] = 4.0 * l[*b];
                out[4 + e][*b] = 4.0 * l[*a];
            }
        }
        _ => unreachable!(),
    }
}

/// Constant second barycentric derivatives d2(shape)/d(lambda_a)d(lambda_b).
pub fn tet_shape_d2bary(degree: usize, out: &mut [[[f64; 4]; 4]]) {
    for o in out.iter_mut() {
        *o = [[0.0; 4]; 4];
    }
    if degree == 2 {
        for i in 0..4 {
            out[i][i][i] = 4.0;
        }
        for (e, (a, b)) in TET_EDGES.iter().enumerate() {
            out[4 + e][*a][*b] = 4.0;
            out[4 + e][*b][*a] = 4.0;
        }
    }
}

/// Triangle shape values (for surface quadrature of traces).
pub fn tri_shape(degree: usize, l: [f64; 3], out: &mut [f64]) {
    match degree {
        1 => out[..3].copy_from_slice(&l),
        2 => {
            for i in 0..3 {
                out[i] = l[i] * (2.0 * l[i] - 1.0);
            }
            for (e, (a, b)) in TRI_EDGES.iter().enumerate() {
                out[3 + e] = 4.0 * l[*a] * l[*b];
            }
        }
        _ => unreachable!(),
    }
}

/// Affine geometry of a tet: physical gradients of the barycentric
/// coordinates and the volume.
#[derive(Debug, Clone, Copy)]
pub struct TetGeom {
    pub grad_lambda: [[f64; 3]; 4],
    pub volume: f64,
    pub verts: [Point; 4],
}

impl TetGeom {
    pub fn new(mesh: &Mesh, tet: usize) -> TetGeom {
        let p = mesh.tet_points(tet);
        let e1 = sub(p[1], p[0]);
        let e2 = sub(p[2], p[0]);
        let e3 = sub(p[3], p[0]);
        let c23 = cross(e2, e3);
        let det = dot(e1, c23); // 6 * volume
        let c31 = cross(e3, e1);
        let c12 = cross(e1, e2);
        let inv = 1.0 / det;
        // rows of J^{-1}: gradients of lambda_1..3
        let g1 = [c23[0] * inv, c23[1] * inv, c23[2] * inv];
        let g2 = [c31[0] * inv, c31[1] * inv, c31[2] * inv];
        let g3 = [c12[0] * inv, c12[1] * inv, c12[2] * inv];
        let g0 = [
            -g1[0] - g2[0] - g3[0],
            -g1[1] - g2[1] - g3[1],
            -g1[2] - g2[2] - g3[2],
        ];
        TetGeom {
            grad_lambda: [g0, g1, g2, g3],
            volume: det / 6.0,
            verts: p,
        }
    }

    pub fn point_at(&self, l: [f64; 4]) -> Point {
        let mut x = [0.0; 3];
        for k in 0..4 {
            for d in 0..3 {
                x[d] += l[k] * self.verts[k][d];
            }
        }
        x
    }

    /// Physical gradient of shape function with barycentric gradient `db`.
    pub fn phys_grad(&self, db: [f64; 4]) -> Point {
        let mut g = [0.0; 3];
        for k in 0..4 {
            for d in 0..3 {
                g[d] += db[k] * self.grad_lambda[k][d];
            }
        }
        g
    }
}

/// Precomputed shape values and barycentric gradients for a quadrature rule.
pub struct ShapeTable {
    pub n_local: usize,
    pub vals: Vec<Vec<f64>>,
    pub dbary: Vec<Vec<[f64; 4]>>,
}

impl ShapeTable {
    pub fn new(degree: usize, rule: &crate::quadrature::QuadRule) -> ShapeTable {
        let n_local = n_local_tet(degree);
        let mut vals = Vec::with_capacity(rule.points.len());
        let mut dbary = Vec::with_capacity(rule.points.len());
        for &p in &rule.points {
            let mut v = vec![0.0; n_local];
            tet_shape(degree, p, &mut v);
            let mut d = vec![[0.0; 4]; n_local];
            tet_shape_dbary(degree, p, &mut d);
            vals.push(v);
            dbary.push(d);
        }
        ShapeTable {
            n_local,
            vals,
            dbary,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_of_unity() {
        for degree in [1usize, 2] {
            let l = [0.1, 0.2, 0.3, 0.4];
            let mut v = vec![0.0; n_local_tet(degree)];
            tet_shape(degree, l, &mut v);
            let s: f64 = v.iter().sum();
            assert!((s - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn kronecker_at_nodes() {
        // P2 nodes: vertices then edge midpoints
        let nodes: Vec<[f64; 4]> = vec![
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
            [0.5, 0.5, 0.0, 0.0],
            [0.5, 0.0, 0.5, 0.0],
            [0.5, 0.0, 0.0, 0.5],
            [0.0, 0.5, 0.5, 0.0],
            [0.0, 0.5, 0.0, 0.5],
            [0.0, 0.0, 0.5, 0.5],
        ];
        for (i, &l) in nodes.iter().enumerate() {
            let mut v = vec![0.0; 10];
            tet_shape(2, l, &mut v);
            for (j, &vj) in v.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((vj - want).abs() < 1e-14, "node {i} shape {j}: {vj}");
            }
        }
    }
}
