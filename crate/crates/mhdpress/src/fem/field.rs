//! Coefficient fields over a constrained space.

use super::shape::{tet_shape, tet_shape_dbary, TetGeom};
use super::space::{ConstrainedSpace, Kind};
use crate::mesh::Point;
use std::sync::Arc;

/// A finite-element function, stored as full-dof coefficients that satisfy
/// the space's essential constraints exactly.
#[derive(Debug, Clone)]
pub struct Field {
    pub space: Arc<ConstrainedSpace>,
    pub full: Vec<f64>,
}

impl Field {
    pub fn zero(space: &Arc<ConstrainedSpace>) -> Field {
        Field {
            space: Arc::clone(space),
            full: vec![0.0; space.n_full()],
        }
    }

    /// Build from free coefficients (homogeneous essential values).
    pub fn from_free(space: &Arc<ConstrainedSpace>, free: &[f64]) -> Field {
        Field {
            space: Arc::clone(space),
            full: space.expand(free, None),
        }
    }

    /// Build from free coefficients plus fixed values (full-dof indexed).
    pub fn from_free_with_fixed(
        space: &Arc<ConstrainedSpace>,
        free: &[f64],
        fixed: &[f64],
    ) -> Field {
        Field {
            space: Arc::clone(space),
            full: space.expand(free, Some(fixed)),
        }
    }

    pub fn free(&self) -> Vec<f64> {
        self.space.reduce_vec(&self.full)
    }

    /// Nodal interpolation of a scalar function, then constraint projection.
    pub fn interpolate_scalar(space: &Arc<ConstrainedSpace>, f: impl Fn(Point) -> f64) -> Field {
        assert_eq!(space.kind, Kind::Scalar);
        let raw: Vec<f64> = space.nodes.iter().map(|&p| f(p)).collect();
        let free = space.reduce_vec(&raw);
        Field::from_free(space, &free)
    }

    /// Nodal interpolation of a vector function, then constraint projection
    /// (normal-only nodes keep the normal component, fixed nodes go to 0).
    pub fn interpolate_vector(
        space: &Arc<ConstrainedSpace>,
        f: impl Fn(Point) -> Point,
    ) -> Field {
        assert_eq!(space.kind, Kind::Vector);
        let mut raw = vec![0.0; space.n_full()];
        for (n, &p) in space.nodes.iter().enumerate() {
            let v = f(p);
            raw[3 * n] = v[0];
            raw[3 * n + 1] = v[1];
            raw[3 * n + 2] = v[2];
        }
        let free = space.reduce_vec(&raw);
        Field::from_free(space, &free)
    }

    pub fn add_scaled(&mut self, alpha: f64, other: &Field) {
        for (a, b) in self.full.iter_mut().zip(&other.full) {
            *a += alpha * b;
        }
    }

    pub fn scaled(&self, alpha: f64) -> Field {
        Field {
            space: Arc::clone(&self.space),
            full: self.full.iter().map(|v| alpha * v).collect(),
        }
    }

    pub fn difference(&self, other: &Field) -> Field {
        let mut d = self.clone();
        d.add_scaled(-1.0, other);
        d
    }

    fn shape_at(&self, l: [f64; 4]) -> Vec<f64> {
        let nl = self.space.n_local();
        let mut v = vec![0.0; nl];
        tet_shape(self.space.degree, l, &mut v);
        v
    }

    fn dshape_at(&self, l: [f64; 4]) -> Vec<[f64; 4]> {
        let nl = self.space.n_local();
        let mut v = vec![[0.0; 4]; nl];
        tet_shape_dbary(self.space.degree, l, &mut v);
        v
    }

    pub fn eval_scalar(&self, tet: usize, l: [f64; 4]) -> f64 {
        debug_assert_eq!(self.space.kind, Kind::Scalar);
        let sh = self.shape_at(l);
        let en = &self.space.elem_nodes[tet];
        sh.iter().zip(en).map(|(s, &n)| s * self.full[n]).sum()
    }

    pub fn eval_vector(&self, tet: usize, l: [f64; 4]) -> Point {
        debug_assert_eq!(self.space.kind, Kind::Vector);
        let sh = self.shape_at(l);
        let en = &self.space.elem_nodes[tet];
        let mut out = [0.0; 3];
        for (s, &n) in sh.iter().zip(en) {
            for c in 0..3 {
                out[c] += s * self.full[3 * n + c];
            }
        }
        out
    }

    /// Elementwise gradient of a scalar field (discontinuous across faces).
    pub fn grad_scalar(&self, geom: &TetGeom, tet: usize, l: [f64; 4]) -> Point {
        debug_assert_eq!(self.space.kind, Kind::Scalar);
        let dsh = self.dshape_at(l);
        let en = &self.space.elem_nodes[tet];
        let mut g = [0.0; 3];
        for (db, &n) in dsh.iter().zip(en) {
            let pg = geom.phys_grad(*db);
            for d in 0..3 {
                g[d] += pg[d] * self.full[n];
            }
        }
        g
    }

    /// Jacobian grad[i][j] = d u_i / d x_j of a vector field.
    pub fn grad_vector(&self, geom: &TetGeom, tet: usize, l: [f64; 4]) -> [[f64; 3]; 3] {
        debug_assert_eq!(self.space.kind, Kind::Vector);
        let dsh = self.dshape_at(l);
        let en = &self.space.elem_nodes[tet];
        let mut g = [[0.0; 3]; 3];
        for (db, &n) in dsh.iter().zip(en) {
            let pg = geom.phys_grad(*db);
            for i in 0..3 {
                let coef = self.full[3 * n + i];
                for j in 0..3 {
                    g[i][j] += coef * pg[j];
                }
            }
        }
        g
    }

    /// Constant elementwise Hessian of a scalar field (P1: zero; P2:
    /// symmetric by construction, so the curl of the gradient vanishes
    /// at the polynomial level).
    pub fn hessian_scalar(&self, geom: &TetGeom, tet: usize) -> [[f64; 3]; 3] {
        debug_assert_eq!(self.space.kind, Kind::Scalar);
        let nl = self.space.n_local();
        let mut d2 = vec![[[0.0; 4]; 4]; nl];
        super::shape::tet_shape_d2bary(self.space.degree, &mut d2);
        let en = &self.space.elem_nodes[tet];
        let mut h = [[0.0; 3]; 3];
        for (sd, &n) in d2.iter().zip(en) {
            let coef = self.full[n];
            if coef == 0.0 {
                continue;
            }
            for a in 0..4 {
                for b in 0..4 {
                    let cab = sd[a][b];
                    if cab == 0.0 {
                        continue;
                    }
                    for i in 0..3 {
                        for j in 0..3 {
                            h[i][j] +=
                                coef * cab * geom.grad_lambda[a][i] * geom.grad_lambda[b][j];
                        }
                    }
                }
            }
        }
        h
    }

    /// Elementwise Laplacian of a scalar field (trace of the Hessian).
    pub fn laplacian_scalar(&self, geom: &TetGeom, tet: usize) -> f64 {
        let h = self.hessian_scalar(geom, tet);
        h[0][0] + h[1][1] + h[2][2]
    }

    pub fn curl(&self, geom: &TetGeom, tet: usize, l: [f64; 4]) -> Point {
        let g = self.grad_vector(geom, tet, l);
        [g[2][1] - g[1][2], g[0][2] - g[2][0], g[1][0] - g[0][1]]
    }

    pub fn div(&self, geom: &TetGeom, tet: usize, l: [f64; 4]) -> f64 {
        let g = self.grad_vector(geom, tet, l);
        g[0][0] + g[1][1] + g[2][2]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::space::{build_space, BcSpec};
    use crate::mesh::unit_cube;

    #[test]
    fn interpolation_reproduces_linear() {
        let mesh = Arc::new(unit_cube(2).unwrap());
        let sp = build_space(&mesh, Kind::Scalar, 1, BcSpec::None).unwrap();
        let sp = Arc::new(sp);
        let f = Field::interpolate_scalar(&sp, |p| 1.0 + 2.0 * p[0] - p[1] + 0.5 * p[2]);
        let geom = TetGeom::new(&mesh, 0);
        let l = [0.3, 0.25, 0.25, 0.2];
        let x = geom.point_at(l);
        let v = f.eval_scalar(0, l);
        assert!((v - (1.0 + 2.0 * x[0] - x[1] + 0.5 * x[2])).abs() < 1e-13);
        let g = f.grad_scalar(&geom, 0, l);
        assert!((g[0] - 2.0).abs() < 1e-12 && (g[1] + 1.0).abs() < 1e-12 && (g[2] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn p2_reproduces_quadratic_gradients() {
        let mesh = Arc::new(unit_cube(1).unwrap());
        let sp = Arc::new(build_space(&mesh, Kind::Scalar, 2, BcSpec::None).unwrap());
        let f = Field::interpolate_scalar(&sp, |p| p[0] * p[0] + p[1] * p[2]);
        let geom = TetGeom::new(&mesh, 2);
        let l = [0.1, 0.2, 0.3, 0.4];
        let x = geom.point_at(l);
        let v = f.eval_scalar(2, l);
        assert!((v - (x[0] * x[0] + x[1] * x[2])).abs() < 1e-13);
        let g = f.grad_scalar(&geom, 2, l);
        assert!((g[0] - 2.0 * x[0]).abs() < 1e-12);
        assert!((g[1] - x[2]).abs() < 1e-12);
        assert!((g[2] - x[1]).abs() < 1e-12);
    }

    #[test]
    fn curl_and_div_of_linear_field() {
        let mesh = Arc::new(unit_cube(1).unwrap());
        let sp = Arc::new(build_space(&mesh, Kind::Vector, 1, BcSpec::None).unwrap());
        // u = (y, z, x): curl = (-1,-1,-1), div = 0
        let f = Field::interpolate_vector(&sp, |p| [p[1], p[2], p[0]]);
        let geom = TetGeom::new(&mesh, 0);
        let c = f.curl(&geom, 0, [0.25; 4]);
        assert!((c[0] + 1.0).abs() < 1e-13 && (c[1] + 1.0).abs() < 1e-13 && (c[2] + 1.0).abs() < 1e-13);
        assert!(f.div(&geom, 0, [0.25; 4]).abs() < 1e-13);
    }

    #[test]
    fn constraints_enforced_on_interpolation() {
        let mesh = Arc::new(unit_cube(2).unwrap());
        let sp = Arc::new(build_space(&mesh, Kind::Vector, 1, BcSpec::TangentialZero).unwrap());
        // interpolate something violating the constraints; result must obey them
        let f = Field::interpolate_vector(&sp, |p| [1.0 + p[0], 2.0, 3.0 * p[2]]);
        for (n, nc) in sp.node_constraint.iter().enumerate() {
            match nc {
                crate::fem::space::NodeConstraint::Fixed => {
                    for c in 0..3 {
                        assert_eq!(f.full[3 * n + c], 0.0);
                    }
                }
                crate::fem::space::NodeConstraint::NormalOnly(nrm) => {
                    let v = [f.full[3 * n], f.full[3 * n + 1], f.full[3 * n + 2]];
                    let t = crate::mesh::cross(v, *nrm);
                    assert!(crate::mesh::norm(t) < 1e-13, "node {n} not normal-only");
                }
                _ => {}
            }
        }
    }
}
