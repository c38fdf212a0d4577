//! Element assembly of the bilinear and linear forms.
//!
//! All assemblers work on full (unconstrained) dofs; spaces reduce the
//! results. Element loops parallelize over tets; triplets are merged in
//! sorted order, so the assembled matrix is deterministic.

use super::field::Field;
use super::shape::{ShapeTable, TetGeom};
use super::space::{ConstrainedSpace, Kind};
use crate::mesh::Point;
use crate::quadrature::tet_rule;
use crate::sparse::SparseMatrix;
use rayon::prelude::*;

/// Default quadrature degree for a bilinear form between these spaces.
fn quad_degree(a: &ConstrainedSpace, b: &ConstrainedSpace) -> usize {
    2 * a.degree.max(b.degree) + 2
}

fn gather_triplets<F>(n_elems: usize, per_elem: F) -> Vec<(usize, usize, f64)>
where
    F: Fn(usize, &mut Vec<(usize, usize, f64)>) + Sync,
{
    (0..n_elems)
        .into_par_iter()
        .fold(Vec::new, |mut acc, e| {
            per_elem(e, &mut acc);
            acc
        })
        .reduce(Vec::new, |mut a, mut b| {
            a.append(&mut b);
            a
        })
}

/// Scalar stiffness (grad u, grad v).
pub fn scalar_stiffness(space: &ConstrainedSpace) -> SparseMatrix {
    sym_scalar_form(space, |geom, _vals, grads, i, j| {
        let _ = geom;
        crate::mesh::dot(grads[i], grads[j])
    })
}

/// Scalar mass (u, v).
pub fn scalar_mass(space: &ConstrainedSpace) -> SparseMatrix {
    sym_scalar_form(space, |_geom, vals, _grads, i, j| vals[i] * vals[j])
}

fn sym_scalar_form<K>(space: &ConstrainedSpace, kernel: K) -> SparseMatrix
where
    K: Fn(&TetGeom, &[f64], &[Point], usize, usize) -> f64 + Sync,
{
    assert_eq!(space.kind, Kind::Scalar);
    let rule = tet_rule(quad_degree(space, space)).expect("quadrature degree");
    let table = ShapeTable::new(space.degree, &rule);
    let mesh = &space.mesh;
    let nl = table.n_local;
    let triplets = gather_triplets(mesh.tets.len(), |e, acc| {
        let geom = TetGeom::new(mesh, e);
        let scale = 6.0 * geom.volume;
        let en = &space.elem_nodes[e];
        let mut local = vec![0.0; nl * nl];
        for (q, w) in rule.weights.iter().enumerate() {
            let vals = &table.vals[q];
            let grads: Vec<Point> = table.dbary[q].iter().map(|d| geom.phys_grad(*d)).collect();
            for i in 0..nl {
                for j in 0..nl {
                    local[i * nl + j] += w * scale * kernel(&geom, vals, &grads, i, j);
                }
            }
        }
        for i in 0..nl {
            for j in 0..nl {
                acc.push((en[i], en[j], local[i * nl + j]));
            }
        }
    });
    SparseMatrix::from_triplets(space.n_full(), space.n_full(), triplets)
}

/// Brezzi-Pitkaranta pressure stabilization: delta * sum_T h_T^2 (grad p, grad q)_T.
pub fn pressure_stabilization(space: &ConstrainedSpace, delta: f64) -> SparseMatrix {
    assert_eq!(space.kind, Kind::Scalar);
    let rule = tet_rule(quad_degree(space, space)).expect("quadrature degree");
    let table = ShapeTable::new(space.degree, &rule);
    let mesh = &space.mesh;
    let nl = table.n_local;
    let triplets = gather_triplets(mesh.tets.len(), |e, acc| {
        let geom = TetGeom::new(mesh, e);
        let scale = 6.0 * geom.volume * delta * mesh.tet_diameter(e).powi(2);
        let en = &space.elem_nodes[e];
        for (q, w) in rule.weights.iter().enumerate() {
            let grads: Vec<Point> = table.dbary[q].iter().map(|d| geom.phys_grad(*d)).collect();
            for i in 0..nl {
                for j in 0..nl {
                    acc.push((en[i], en[j], w * scale * crate::mesh::dot(grads[i], grads[j])));
                }
            }
        }
    });
    SparseMatrix::from_triplets(space.n_full(), space.n_full(), triplets)
}

/// Vector forms assembled on 3 components per node. The local dof is
/// 3*ln + c with basis phi = psi_ln * e_c:
///   curl(psi e_c) = grad psi x e_c,  div(psi e_c) = d_c psi.
fn sym_vector_form<K>(space: &ConstrainedSpace, kernel: K) -> SparseMatrix
where
    // kernel(vals, grads, i=(ln,c), j=(lm,d)) -> integrand
    K: Fn(&[f64], &[Point], usize, usize, usize, usize) -> f64 + Sync,
{
    assert_eq!(space.kind, Kind::Vector);
    let rule = tet_rule(quad_degree(space, space)).expect("quadrature degree");
    let table = ShapeTable::new(space.degree, &rule);
    let mesh = &space.mesh;
    let nl = table.n_local;
    let triplets = gather_triplets(mesh.tets.len(), |e, acc| {
        let geom = TetGeom::new(mesh, e);
        let scale = 6.0 * geom.volume;
        let en = &space.elem_nodes[e];
        let mut local = vec![0.0; 9 * nl * nl];
        for (q, w) in rule.weights.iter().enumerate() {
            let vals = &table.vals[q];
            let grads: Vec<Point> = table.dbary[q].iter().map(|d| geom.phys_grad(*d)).collect();
            for ln in 0..nl {
                for c in 0..3 {
                    for lm in 0..nl {
                        for d in 0..3 {
                            local[((ln * 3 + c) * nl + lm) * 3 + d] +=
                                w * scale * kernel(vals, &grads, ln, c, lm, d);
                        }
                    }
                }
            }
        }
        for ln in 0..nl {
            for c in 0..3 {
                for lm in 0..nl {
                    for d in 0..3 {
                        acc.push((
                            3 * en[ln] + c,
                            3 * en[lm] + d,
                            local[((ln * 3 + c) * nl + lm) * 3 + d],
                        ));
                    }
                }
            }
        }
    });
    SparseMatrix::from_triplets(space.n_full(), space.n_full(), triplets)
}

/// (curl u, curl v): curl(psi e_c) . curl(phi e_d)
/// = (grad psi x e_c) . (grad phi x e_d)
/// = delta_cd (grad psi . grad phi) - (d_d psi)(d_c phi).
pub fn curlcurl(space: &ConstrainedSpace) -> SparseMatrix {
    sym_vector_form(space, |_vals, grads, ln, c, lm, d| {
        let gd = crate::mesh::dot(grads[ln], grads[lm]);
        let t = if c == d { gd } else { 0.0 };
        t - grads[ln][d] * grads[lm][c]
    })
}

/// (div u, div v) = (d_c psi)(d_d phi).
pub fn divdiv(space: &ConstrainedSpace) -> SparseMatrix {
    sym_vector_form(space, |_vals, grads, ln, c, lm, d| grads[ln][c] * grads[lm][d])
}

/// Vector mass (u, v).
pub fn vector_mass(space: &ConstrainedSpace) -> SparseMatrix {
    sym_vector_form(space, |vals, _grads, ln, c, lm, d| {
        if c == d {
            vals[ln] * vals[lm]
        } else {
            0.0
        }
    })
}

/// Full H1 inner product (u, v) + (grad u, grad v).
pub fn vector_h1(space: &ConstrainedSpace) -> SparseMatrix {
    sym_vector_form(space, |vals, grads, ln, c, lm, d| {
        if c == d {
            vals[ln] * vals[lm] + crate::mesh::dot(grads[ln], grads[lm])
        } else {
            0.0
        }
    })
}

/// Scalar H1 inner product (u, v) + (grad u, grad v).
pub fn scalar_h1(space: &ConstrainedSpace) -> SparseMatrix {
    sym_scalar_form(space, |_geom, vals, grads, i, j| {
        vals[i] * vals[j] + crate::mesh::dot(grads[i], grads[j])
    })
}

/// Divergence coupling B[q, v] = (q, div v); rows on the scalar space,
/// columns on the vector space.
pub fn div_coupling(scalar: &ConstrainedSpace, vector: &ConstrainedSpace) -> SparseMatrix {
    assert_eq!(scalar.kind, Kind::Scalar);
    assert_eq!(vector.kind, Kind::Vector);
    assert!(std::sync::Arc::ptr_eq(&scalar.mesh, &vector.mesh));
    let rule = tet_rule(quad_degree(scalar, vector)).expect("quadrature degree");
    let ts = ShapeTable::new(scalar.degree, &rule);
    let tv = ShapeTable::new(vector.degree, &rule);
    let mesh = &scalar.mesh;
    let triplets = gather_triplets(mesh.tets.len(), |e, acc| {
        let geom = TetGeom::new(mesh, e);
        let scale = 6.0 * geom.volume;
        let ens = &scalar.elem_nodes[e];
        let env = &vector.elem_nodes[e];
        for (q, w) in rule.weights.iter().enumerate() {
            let svals = &ts.vals[q];
            let vgrads: Vec<Point> = tv.dbary[q].iter().map(|d| geom.phys_grad(*d)).collect();
            for (i, &ns) in ens.iter().enumerate() {
                for (m, &nv) in env.iter().enumerate() {
                    for c in 0..3 {
                        acc.push((ns, 3 * nv + c, w * scale * svals[i] * vgrads[m][c]));
                    }
                }
            }
        }
    });
    SparseMatrix::from_triplets(scalar.n_full(), vector.n_full(), triplets)
}

/// Convection block N_w[r, s] = ((curl w) x phi_s, phi_r); antisymmetric.
pub fn convection(space: &ConstrainedSpace, w: &Field) -> SparseMatrix {
    assert!(std::sync::Arc::ptr_eq(&space.mesh, &w.space.mesh));
    let rule = tet_rule(quad_degree(space, &w.space)).expect("quadrature degree");
    let table = ShapeTable::new(space.degree, &rule);
    let mesh = &space.mesh;
    let nl = table.n_local;
    let triplets = gather_triplets(mesh.tets.len(), |e, acc| {
        let geom = TetGeom::new(mesh, e);
        let scale = 6.0 * geom.volume;
        let en = &space.elem_nodes[e];
        for (q, wq) in rule.weights.iter().enumerate() {
            let cw = w.curl(&geom, e, rule.points[q]);
            let vals = &table.vals[q];
            // ((cw x e_d psi_m) . e_c psi_n) = psi_m psi_n (cw x e_d)_c
            for m in 0..nl {
                for d in 0..3 {
                    let cx = cross_with_unit(cw, d);
                    for n in 0..nl {
                        for c in 0..3 {
                            let v = wq * scale * vals[m] * vals[n] * cx[c];
                            if v != 0.0 {
                                acc.push((3 * en[n] + c, 3 * en[m] + d, v));
                            }
                        }
                    }
                }
            }
        }
    });
    SparseMatrix::from_triplets(space.n_full(), space.n_full(), triplets)
}

/// Coupling block C[r, s] = ((curl phi_s) x d, phi_r).
pub fn coupling(space: &ConstrainedSpace, d_field: &Field) -> SparseMatrix {
    assert!(std::sync::Arc::ptr_eq(&space.mesh, &d_field.space.mesh));
    let rule = tet_rule(quad_degree(space, &d_field.space)).expect("quadrature degree");
    let table = ShapeTable::new(space.degree, &rule);
    let mesh = &space.mesh;
    let nl = table.n_local;
    let triplets = gather_triplets(mesh.tets.len(), |e, acc| {
        let geom = TetGeom::new(mesh, e);
        let scale = 6.0 * geom.volume;
        let en = &space.elem_nodes[e];
        for (q, wq) in rule.weights.iter().enumerate() {
            let dv = d_field.eval_vector(e, rule.points[q]);
            let vals = &table.vals[q];
            let grads: Vec<Point> = table.dbary[q].iter().map(|db| geom.phys_grad(*db)).collect();
            // curl(psi_s e_d) = grad psi_s x e_d; ((grad psi_s x e_d) x dv) . e_c psi_r
            for s in 0..nl {
                for d in 0..3 {
                    let cu = cross_with_unit(grads[s], d);
                    let cxd = crate::mesh::cross(cu, dv);
                    for r in 0..nl {
                        for c in 0..3 {
                            let v = wq * scale * vals[r] * cxd[c];
                            if v != 0.0 {
                                acc.push((3 * en[r] + c, 3 * en[s] + d, v));
                            }
                        }
                    }
                }
            }
        }
    });
    SparseMatrix::from_triplets(space.n_full(), space.n_full(), triplets)
}

/// a x e_d for unit vector e_d.
fn cross_with_unit(a: Point, d: usize) -> Point {
    match d {
        0 => [0.0, a[2], -a[1]],
        1 => [-a[2], 0.0, a[0]],
        _ => [a[1], -a[0], 0.0],
    }
}

/// Volume functional (F, phi) on a vector space (full dofs).
pub fn rhs_vector_volume(space: &ConstrainedSpace, f: &dyn Fn(Point) -> Point) -> Vec<f64> {
    assert_eq!(space.kind, Kind::Vector);
    let rule = tet_rule(2 * space.degree + 4).expect("quadrature degree");
    let table = ShapeTable::new(space.degree, &rule);
    let mesh = &space.mesh;
    let mut out = vec![0.0; space.n_full()];
    for e in 0..mesh.tets.len() {
        let geom = TetGeom::new(mesh, e);
        let scale = 6.0 * geom.volume;
        let en = &space.elem_nodes[e];
        for (q, w) in rule.weights.iter().enumerate() {
            let x = geom.point_at(rule.points[q]);
            let fv = f(x);
            let vals = &table.vals[q];
            for (ln, &n) in en.iter().enumerate() {
                for c in 0..3 {
                    out[3 * n + c] += w * scale * vals[ln] * fv[c];
                }
            }
        }
    }
    out
}

/// Curl-part functional (psi, curl phi) on a vector space (full dofs).
pub fn rhs_vector_curlpart(space: &ConstrainedSpace, psi: &dyn Fn(Point) -> Point) -> Vec<f64> {
    assert_eq!(space.kind, Kind::Vector);
    let rule = tet_rule(2 * space.degree + 4).expect("quadrature degree");
    let table = ShapeTable::new(space.degree, &rule);
    let mesh = &space.mesh;
    let mut out = vec![0.0; space.n_full()];
    for e in 0..mesh.tets.len() {
        let geom = TetGeom::new(mesh, e);
        let scale = 6.0 * geom.volume;
        let en = &space.elem_nodes[e];
        for (q, w) in rule.weights.iter().enumerate() {
            let x = geom.point_at(rule.points[q]);
            let pv = psi(x);
            let grads: Vec<Point> = table.dbary[q].iter().map(|db| geom.phys_grad(*db)).collect();
            for (ln, &n) in en.iter().enumerate() {
                for c in 0..3 {
                    // curl(psi_ln e_c) = grad psi_ln x e_c
                    let cu = cross_with_unit(grads[ln], c);
                    out[3 * n + c] += w * scale * crate::mesh::dot(cu, pv);
                }
            }
        }
    }
    out
}

/// Volume functional (h, q) on a scalar space (full dofs).
pub fn rhs_scalar_volume(space: &ConstrainedSpace, h: &dyn Fn(Point) -> f64) -> Vec<f64> {
    assert_eq!(space.kind, Kind::Scalar);
    let rule = tet_rule(2 * space.degree + 4).expect("quadrature degree");
    let table = ShapeTable::new(space.degree, &rule);
    let mesh = &space.mesh;
    let mut out = vec![0.0; space.n_full()];
    for e in 0..mesh.tets.len() {
        let geom = TetGeom::new(mesh, e);
        let scale = 6.0 * geom.volume;
        let en = &space.elem_nodes[e];
        for (q, w) in rule.weights.iter().enumerate() {
            let x = geom.point_at(rule.points[q]);
            let hv = h(x);
            let vals = &table.vals[q];
            for (ln, &n) in en.iter().enumerate() {
                out[n] += w * scale * vals[ln] * hv;
            }
        }
    }
    out
}

/// Gradient-pairing functional -(G, grad q) on a scalar space: the weak
/// realization of div G with zero-trace test functions.
pub fn rhs_scalar_neg_grad(space: &ConstrainedSpace, g: &VecEval) -> Vec<f64> {
    assert_eq!(space.kind, Kind::Scalar);
    let rule = tet_rule(2 * space.degree + 4).expect("quadrature degree");
    let table = ShapeTable::new(space.degree, &rule);
    let mesh = &space.mesh;
    let mut out = vec![0.0; space.n_full()];
    for e in 0..mesh.tets.len() {
        let geom = TetGeom::new(mesh, e);
        let scale = 6.0 * geom.volume;
        let en = &space.elem_nodes[e];
        for (q, w) in rule.weights.iter().enumerate() {
            let gv = g.eval(&geom, e, rule.points[q]);
            let grads: Vec<Point> = table.dbary[q].iter().map(|db| geom.phys_grad(*db)).collect();
            for (ln, &n) in en.iter().enumerate() {
                out[n] -= w * scale * crate::mesh::dot(grads[ln], gv);
            }
        }
    }
    out
}

/// A vector-valued integrand source: a closure of the physical point, a
/// conforming vector field, or the elementwise gradient of a scalar field.
pub enum VecEval<'a> {
    Zero,
    Fn(&'a dyn Fn(Point) -> Point),
    Fld(&'a Field),
    GradOfScalar(&'a Field),
    /// curl of a conforming vector field, evaluated elementwise
    CurlOf(&'a Field),
    /// (curl a)(x) x b(x) for conforming vector fields
    CrossCurl(&'a Field, &'a Field),
    /// (curl a)(x) x grad q(x) for a vector field and a scalar field
    CrossCurlGrad(&'a Field, &'a Field),
    /// linear combination of sources
    Sum(Vec<(f64, VecEval<'a>)>),
}

impl<'a> VecEval<'a> {
    pub fn eval(&self, geom: &TetGeom, tet: usize, l: [f64; 4]) -> Point {
        match self {
            VecEval::Zero => [0.0; 3],
            VecEval::Fn(f) => f(geom.point_at(l)),
            VecEval::Fld(f) => f.eval_vector(tet, l),
            VecEval::GradOfScalar(f) => f.grad_scalar(geom, tet, l),
            VecEval::CurlOf(f) => f.curl(geom, tet, l),
            VecEval::CrossCurl(a, b) => {
                crate::mesh::cross(a.curl(geom, tet, l), b.eval_vector(tet, l))
            }
            VecEval::CrossCurlGrad(a, q) => {
                crate::mesh::cross(a.curl(geom, tet, l), q.grad_scalar(geom, tet, l))
            }
            VecEval::Sum(terms) => {
                let mut out = [0.0; 3];
                for (a, t) in terms {
                    let v = t.eval(geom, tet, l);
                    for d in 0..3 {
                        out[d] += a * v[d];
                    }
                }
                out
            }
        }
    }
}

/// Kernel coupling row: entry[s] = int ((curl phi_s) x d) . grad q, the
/// pairing of the coupling operator against a broken kernel gradient.
pub fn coupling_kernel_row(space: &ConstrainedSpace, d_field: &Field, q: &Field) -> Vec<f64> {
    assert_eq!(space.kind, Kind::Vector);
    let rule = tet_rule(2 * space.degree + 4).expect("quadrature degree");
    let table = ShapeTable::new(space.degree, &rule);
    let mesh = &space.mesh;
    let mut out = vec![0.0; space.n_full()];
    for e in 0..mesh.tets.len() {
        let geom = TetGeom::new(mesh, e);
        let scale = 6.0 * geom.volume;
        let en = &space.elem_nodes[e];
        for (qp, w) in rule.weights.iter().enumerate() {
            let l = rule.points[qp];
            let dv = d_field.eval_vector(e, l);
            let gq = q.grad_scalar(&geom, e, l);
            let grads: Vec<Point> = table.dbary[qp].iter().map(|db| geom.phys_grad(*db)).collect();
            for (ln, &n) in en.iter().enumerate() {
                for c in 0..3 {
                    let cu = cross_with_unit(grads[ln], c);
                    let v = crate::mesh::cross(cu, dv);
                    out[3 * n + c] += w * scale * crate::mesh::dot(v, gq);
                }
            }
        }
    }
    out
}

/// Curl-pairing functional (psi, curl phi) for a VecEval source.
pub fn rhs_vector_curl_source(space: &ConstrainedSpace, psi: &VecEval) -> Vec<f64> {
    assert_eq!(space.kind, Kind::Vector);
    let rule = tet_rule(2 * space.degree + 4).expect("quadrature degree");
    let table = ShapeTable::new(space.degree, &rule);
    let mesh = &space.mesh;
    let mut out = vec![0.0; space.n_full()];
    for e in 0..mesh.tets.len() {
        let geom = TetGeom::new(mesh, e);
        let scale = 6.0 * geom.volume;
        let en = &space.elem_nodes[e];
        for (q, w) in rule.weights.iter().enumerate() {
            let pv = psi.eval(&geom, e, rule.points[q]);
            let grads: Vec<Point> = table.dbary[q].iter().map(|db| geom.phys_grad(*db)).collect();
            for (ln, &n) in en.iter().enumerate() {
                for c in 0..3 {
                    let cu = cross_with_unit(grads[ln], c);
                    out[3 * n + c] += w * scale * crate::mesh::dot(cu, pv);
                }
            }
        }
    }
    out
}

/// Generic volume functional (G, phi) for a VecEval source on a vector space.
pub fn rhs_vector_source(space: &ConstrainedSpace, g: &VecEval) -> Vec<f64> {
    assert_eq!(space.kind, Kind::Vector);
    let rule = tet_rule(2 * space.degree + 4).expect("quadrature degree");
    let table = ShapeTable::new(space.degree, &rule);
    let mesh = &space.mesh;
    let mut out = vec![0.0; space.n_full()];
    for e in 0..mesh.tets.len() {
        let geom = TetGeom::new(mesh, e);
        let scale = 6.0 * geom.volume;
        let en = &space.elem_nodes[e];
        for (q, w) in rule.weights.iter().enumerate() {
            let gv = g.eval(&geom, e, rule.points[q]);
            let vals = &table.vals[q];
            for (ln, &n) in en.iter().enumerate() {
                for c in 0..3 {
                    out[3 * n + c] += w * scale * vals[ln] * gv[c];
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::space::{build_space, BcSpec};
    use crate::mesh::unit_cube;
    use std::sync::Arc;

    #[test]
    fn curl_of_constant_is_zero() {
        let mesh = Arc::new(unit_cube(2).unwrap());
        let sp = Arc::new(build_space(&mesh, Kind::Vector, 1, BcSpec::None).unwrap());
        let k = curlcurl(&sp);
        let f = Field::interpolate_vector(&sp, |_| [1.0, -2.0, 0.5]);
        let y = k.matvec(&f.full);
        let worst = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(worst < 1e-12, "curlcurl on constant: {worst}");
    }

    #[test]
    fn divdiv_quadratic_form_on_linear_field() {
        // div(x,y,z) = 3 -> quadratic form = 9 * |Omega|
        let mesh = Arc::new(unit_cube(2).unwrap());
        let sp = Arc::new(build_space(&mesh, Kind::Vector, 1, BcSpec::None).unwrap());
        let d = divdiv(&sp);
        let f = Field::interpolate_vector(&sp, |p| p);
        let y = d.matvec(&f.full);
        let q: f64 = crate::sparse::dot(&y, &f.full);
        assert!((q - 9.0).abs() < 1e-12, "got {q}");
    }

    #[test]
    fn mass_row_sums_are_lumped_volumes() {
        let mesh = Arc::new(unit_cube(2).unwrap());
        let sp = Arc::new(build_space(&mesh, Kind::Scalar, 1, BcSpec::None).unwrap());
        let m = scalar_mass(&sp);
        // row sum = integral of the basis function; total = |Omega|
        let ones = vec![1.0; sp.n_full()];
        let sums = m.matvec(&ones);
        let total: f64 = sums.iter().sum();
        assert!((total - 1.0).abs() < 1e-13);
        // each row sum equals the lumped volume: int phi_i
        let lumped = rhs_scalar_volume(&sp, &|_| 1.0);
        for (a, b) in sums.iter().zip(&lumped) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn matrices_symmetric() {
        let mesh = Arc::new(unit_cube(2).unwrap());
        let sp = Arc::new(build_space(&mesh, Kind::Vector, 2, BcSpec::None).unwrap());
        assert!(curlcurl(&sp).asymmetry() < 1e-12);
        assert!(divdiv(&sp).asymmetry() < 1e-12);
        assert!(vector_mass(&sp).asymmetry() < 1e-12);
    }

    #[test]
    fn convection_antisymmetric() {
        let mesh = Arc::new(unit_cube(2).unwrap());
        let sp = Arc::new(build_space(&mesh, Kind::Vector, 1, BcSpec::None).unwrap());
        let w = Field::interpolate_vector(&sp, |p| [p[1] * p[2], p[0], -p[1]]);
        let n = convection(&sp, &w);
        let nt = n.transpose();
        let mut worst = 0.0f64;
        for (r, c, v) in n.iter() {
            worst = worst.max((v + nt.get(r, c)).abs());
        }
        let scale = n.values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        assert!(worst / scale < 1e-13, "N_w not antisymmetric: {worst}");
    }

    #[test]
    fn coupling_blocks_vanish_for_curlfree_w_and_zero_d() {
        let mesh = Arc::new(unit_cube(2).unwrap());
        let sp = Arc::new(build_space(&mesh, Kind::Vector, 1, BcSpec::None).unwrap());
        // w linear with symmetric Jacobian -> curl w = 0 exactly in P1
        let w = Field::interpolate_vector(&sp, |p| [p[0] + 0.5 * p[1], 0.5 * p[0] + p[2], p[1]]);
        let n = convection(&sp, &w);
        let worst = n.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(worst < 1e-12, "N_w should vanish, got {worst}");
        let d = Field::zero(&sp);
        let c = coupling(&sp, &d);
        let worst = c.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(worst < 1e-15);
    }

    #[test]
    fn curlpart_rhs_vanishes_on_interior_dofs_for_constant_psi() {
        // int psi . curl phi = 0 for interior-supported phi when psi const
        let mesh = Arc::new(unit_cube(2).unwrap());
        let sp = Arc::new(build_space(&mesh, Kind::Vector, 1, BcSpec::None).unwrap());
        let rhs = rhs_vector_curlpart(&sp, &|_| [0.3, -1.0, 2.0]);
        let normals = mesh.nodal_normals();
        for (n, _) in sp.nodes.iter().enumerate() {
            if !normals.contains_key(&n) {
                for c in 0..3 {
                    assert!(
                        rhs[3 * n + c].abs() < 1e-13,
                        "interior dof ({n},{c}): {}",
                        rhs[3 * n + c]
                    );
                }
            }
        }
    }
}
