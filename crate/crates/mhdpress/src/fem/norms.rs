//! Discrete norms of fields and errors against closed-form solutions.

use super::field::Field;
use super::shape::TetGeom;
use super::space::Kind;
use crate::error::{Error, Result};
use crate::mesh::Point;
use crate::quadrature::tet_rule;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormId {
    L2,
    L4,
    H1,
    Hcurl,
    Hdiv,
    /// W^{m,p} with m in {0,1}, p in {3/2, 2, 3}.
    Wmp { m: usize, p: f64 },
}

impl NormId {
    pub fn parse(s: &str) -> Result<NormId> {
        match s {
            "L2" => Ok(NormId::L2),
            "L4" => Ok(NormId::L4),
            "H1" => Ok(NormId::H1),
            "Hcurl" => Ok(NormId::Hcurl),
            "Hdiv" => Ok(NormId::Hdiv),
            "W0_3_2" => Ok(NormId::Wmp { m: 0, p: 1.5 }),
            "W1_3_2" => Ok(NormId::Wmp { m: 1, p: 1.5 }),
            "W0_3" => Ok(NormId::Wmp { m: 0, p: 3.0 }),
            "W1_3" => Ok(NormId::Wmp { m: 1, p: 3.0 }),
            "W0_2" => Ok(NormId::Wmp { m: 0, p: 2.0 }),
            "W1_2" => Ok(NormId::Wmp { m: 1, p: 2.0 }),
            other => Err(Error::UnsupportedNorm(other.into())),
        }
    }
}

fn validate(norm: NormId, kind: Kind) -> Result<()> {
    match norm {
        NormId::Hcurl | NormId::Hdiv => {
            if kind != Kind::Vector {
                return Err(Error::UnsupportedNorm(
                    "Hcurl/Hdiv need a vector field".into(),
                ));
            }
            Ok(())
        }
        NormId::Wmp { m, p } => {
            if m > 1 || !(p == 1.5 || p == 2.0 || p == 3.0) {
                return Err(Error::UnsupportedNorm(format!("W^{m},{p}")));
            }
            Ok(())
        }
        _ => Ok(()),
    }
}

fn frob2(g: &[[f64; 3]; 3]) -> f64 {
    g.iter().flatten().map(|v| v * v).sum()
}

/// Elementwise quadrature of the norm integrand; non-even p uses |.|^p
/// followed by the p-th root.
pub fn compute_norm(field: &Field, norm: NormId) -> Result<f64> {
    validate(norm, field.space.kind)?;
    let deg = 2 * field.space.degree + 2;
    let rule = tet_rule(deg)?;
    let mesh = &field.space.mesh;
    let mut acc = 0.0f64;
    for e in 0..mesh.tets.len() {
        let geom = TetGeom::new(mesh, e);
        let scale = 6.0 * geom.volume;
        for (q, w) in rule.weights.iter().enumerate() {
            let l = rule.points[q];
            let val2 = match field.space.kind {
                Kind::Scalar => {
                    let v = field.eval_scalar(e, l);
                    v * v
                }
                Kind::Vector => {
                    let v = field.eval_vector(e, l);
                    crate::mesh::dot(v, v)
                }
            };
            let integrand = match norm {
                NormId::L2 => val2,
                NormId::L4 => val2 * val2,
                NormId::H1 => {
                    let g2 = match field.space.kind {
                        Kind::Scalar => {
                            let g = field.grad_scalar(&geom, e, l);
                            crate::mesh::dot(g, g)
                        }
                        Kind::Vector => frob2(&field.grad_vector(&geom, e, l)),
                    };
                    val2 + g2
                }
                NormId::Hcurl => {
                    let c = field.curl(&geom, e, l);
                    val2 + crate::mesh::dot(c, c)
                }
                NormId::Hdiv => {
                    let d = field.div(&geom, e, l);
                    val2 + d * d
                }
                NormId::Wmp { m, p } => {
                    let vp = val2.sqrt().powf(p);
                    if m == 0 {
                        vp
                    } else {
                        let g2 = match field.space.kind {
                            Kind::Scalar => {
                                let g = field.grad_scalar(&geom, e, l);
                                crate::mesh::dot(g, g)
                            }
                            Kind::Vector => frob2(&field.grad_vector(&geom, e, l)),
                        };
                        vp + g2.sqrt().powf(p)
                    }
                }
            };
            acc += w * scale * integrand;
        }
    }
    let root = match norm {
        NormId::L4 => 0.25,
        NormId::Wmp { p, .. } => 1.0 / p,
        _ => 0.5,
    };
    Ok(acc.powf(root))
}

/// Closed-form reference field for error norms.
pub struct ExactVector<'a> {
    pub value: &'a dyn Fn(Point) -> Point,
    pub grad: Option<&'a dyn Fn(Point) -> [[f64; 3]; 3]>,
}

pub struct ExactScalar<'a> {
    pub value: &'a dyn Fn(Point) -> f64,
    pub grad: Option<&'a dyn Fn(Point) -> Point>,
}

/// || field - exact || in the requested norm, quadrature of degree
/// 2*degree + 4 (the exact field is not polynomial).
pub fn error_norm_vector(field: &Field, exact: &ExactVector, norm: NormId) -> Result<f64> {
    validate(norm, Kind::Vector)?;
    let rule = tet_rule(2 * field.space.degree + 4)?;
    let mesh = &field.space.mesh;
    let mut acc = 0.0f64;
    for e in 0..mesh.tets.len() {
        let geom = TetGeom::new(mesh, e);
        let scale = 6.0 * geom.volume;
        for (q, w) in rule.weights.iter().enumerate() {
            let l = rule.points[q];
            let x = geom.point_at(l);
            let vh = field.eval_vector(e, l);
            let vx = (exact.value)(x);
            let dv = [vh[0] - vx[0], vh[1] - vx[1], vh[2] - vx[2]];
            let val2 = crate::mesh::dot(dv, dv);
            let integrand = match norm {
                NormId::L2 => val2,
                NormId::L4 => val2 * val2,
                NormId::H1 => {
                    let gh = field.grad_vector(&geom, e, l);
                    let gx = (exact.grad.expect("H1 error needs exact gradient"))(x);
                    let mut g2 = 0.0;
                    for i in 0..3 {
                        for j in 0..3 {
                            let d = gh[i][j] - gx[i][j];
                            g2 += d * d;
                        }
                    }
                    val2 + g2
                }
                NormId::Wmp { m: 0, p } => val2.sqrt().powf(p),
                _ => {
                    return Err(Error::UnsupportedNorm(
                        "error norm supports L2, L4, H1, W^{0,p}".into(),
                    ))
                }
            };
            acc += w * scale * integrand;
        }
    }
    let root = match norm {
        NormId::L4 => 0.25,
        NormId::Wmp { p, .. } => 1.0 / p,
        _ => 0.5,
    };
    Ok(acc.powf(root))
}

pub fn error_norm_scalar(field: &Field, exact: &ExactScalar, norm: NormId) -> Result<f64> {
    validate(norm, Kind::Scalar)?;
    let rule = tet_rule(2 * field.space.degree + 4)?;
    let mesh = &field.space.mesh;
    let mut acc = 0.0f64;
    for e in 0..mesh.tets.len() {
        let geom = TetGeom::new(mesh, e);
        let scale = 6.0 * geom.volume;
        for (q, w) in rule.weights.iter().enumerate() {
            let l = rule.points[q];
            let x = geom.point_at(l);
            let dv = field.eval_scalar(e, l) - (exact.value)(x);
            let val2 = dv * dv;
            let integrand = match norm {
                NormId::L2 => val2,
                NormId::L4 => val2 * val2,
                NormId::H1 => {
                    let gh = field.grad_scalar(&geom, e, l);
                    let gx = (exact.grad.expect("H1 error needs exact gradient"))(x);
                    let d = [gh[0] - gx[0], gh[1] - gx[1], gh[2] - gx[2]];
                    val2 + crate::mesh::dot(d, d)
                }
                NormId::Wmp { m: 0, p } => val2.sqrt().powf(p),
                _ => {
                    return Err(Error::UnsupportedNorm(
                        "error norm supports L2, L4, H1, W^{0,p}".into(),
                    ))
                }
            };
            acc += w * scale * integrand;
        }
    }
    let root = match norm {
        NormId::L4 => 0.25,
        NormId::Wmp { p, .. } => 1.0 / p,
        _ => 0.5,
    };
    Ok(acc.powf(root))
}
