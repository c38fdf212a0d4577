//! Picard fixed-point driver for the nonlinear problem, discrete constant
//! estimation and the small-data uniqueness indicator.

use crate::error::{Error, Result};
use crate::fem::assemble::{curlcurl, divdiv, vector_h1, VecEval};
use crate::fem::field::Field;
use crate::fem::norms::{compute_norm, NormId};
use crate::fem::shape::TetGeom;
use crate::fem::space::{build_space, BcSpec, Kind};
use crate::kernel::HarmonicBasis;
use crate::mesh::{Mesh, Point};
use crate::mhd::{
    constants_formula, solve_linearized, LinearizedProblem, LinearizedSolution, SolveReport,
    VectorData, CONSTANTS_TOL,
};
use crate::quadrature::{tet_rule, tri_rule};
use crate::scalar_solvers::recover_pressure;
use crate::solver::{largest_generalized_eig, smallest_generalized_eig_constrained};
use crate::sparse::SparseMatrix;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::sync::Arc;

#[derive(Debug, Clone)]
pub struct PicardOptions {
    pub max_iterations: usize,
    /// Relative tolerance on the Z_N increment.
    pub tolerance: f64,
    /// Damping factor omega in (0, 1]; 1 reproduces the plain iteration.
    pub damping: f64,
    /// Initial guess (zero fields by default).
    pub initial: Option<(Field, Field)>,
}

impl Default for PicardOptions {
    fn default() -> Self {
        PicardOptions {
            max_iterations: 50,
            tolerance: 1e-8,
            damping: 1.0,
            initial: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PicardReport {
    pub iterations: usize,
    pub converged: bool,
    /// Z_N norms of the iterate increments.
    pub increments: Vec<f64>,
    /// Successive increment ratios.
    pub ratios: Vec<f64>,
    /// Smallest tail ratio (the empirical contraction factor).
    pub contraction_factor: Option<f64>,
    pub alpha: Vec<f64>,
    pub final_solve: SolveReport,
}

pub struct PicardSolution {
    pub u: Field,
    pub u_kernel: Vec<f64>,
    pub b: Field,
    pub p: Field,
    pub alpha: Vec<f64>,
    pub report: PicardReport,
}

pub struct NonlinearData<'a> {
    pub f: VectorData<'a>,
    pub g: VectorData<'a>,
    pub p0: Option<&'a dyn Fn(Point) -> f64>,
    pub h: Option<&'a dyn Fn(Point) -> f64>,
}

fn zn_norm(u: &Field, b: &Field) -> f64 {
    let nu = compute_norm(u, NormId::H1).expect("H1 norm");
    let nb = compute_norm(b, NormId::H1).expect("H1 norm");
    (nu * nu + nb * nb).sqrt()
}

/// Picard iteration: (u_{k+1}, b_{k+1}) = (1 - omega) (u_k, b_k)
/// + omega G(u_k, b_k), where G solves the linearized system with the
/// previous iterate as coefficient fields.
pub fn picard_solve(
    mesh: &Arc<Mesh>,
    basis: &HarmonicBasis,
    degree: usize,
    data: &NonlinearData,
    opts: &PicardOptions,
) -> Result<PicardSolution> {
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(Error::Config("damping must lie in (0, 1]".into()));
    }
    if !(opts.tolerance > 0.0) {
        return Err(Error::Config("tolerance must be positive".into()));
    }
    let space = Arc::new(build_space(
        mesh,
        Kind::Vector,
        degree,
        BcSpec::TangentialZeroWithFlux,
    )?);
    let (mut u_k, mut b_k) = match &opts.initial {
        Some((u0, b0)) => (u0.clone(), b0.clone()),
        None => (Field::zero(&space), Field::zero(&space)),
    };
    let mut increments = Vec::new();
    let mut last: Option<LinearizedSolution> = None;
    let mut converged = false;
    let mut iterations = 0;
    for k in 0..opts.max_iterations {
        iterations = k + 1;
        let mut prob = LinearizedProblem::new(mesh, basis, degree);
        prob.w = Some(&u_k);
        prob.d = Some(&b_k);
        prob.f = clone_data(&data.f);
        prob.g = clone_data(&data.g);
        prob.p0 = data.p0;
        prob.h = data.h;
        let sol = solve_linearized(&prob)?;
        let omega = opts.damping;
        let mut u_next = sol.u.clone();
        let mut b_next = sol.b.clone();
        if omega < 1.0 {
            u_next = u_next.scaled(omega);
            u_next.add_scaled(1.0 - omega, &u_k);
            b_next = b_next.scaled(omega);
            b_next.add_scaled(1.0 - omega, &b_k);
        }
        let du = u_next.difference(&u_k);
        let db = b_next.difference(&b_k);
        let inc = zn_norm(&du, &db);
        increments.push(inc);
        let scale = zn_norm(&u_next, &b_next);
        u_k = u_next;
        b_k = b_next;
        last = Some(sol);
        if inc <= opts.tolerance * scale.max(1e-300) || (inc == 0.0 && scale == 0.0) {
            converged = true;
            break;
        }
    }
    let last = last.expect("at least one iteration");
    if !converged {
        let ratios = ratios_of(&increments);
        return Err(Error::NotConverged {
            what: format!(
                "Picard iteration (last increment {:.3e}, ratio history {:?})",
                increments.last().copied().unwrap_or(f64::NAN),
                &ratios[ratios.len().saturating_sub(3)..]
            ),
            residual: increments.last().copied().unwrap_or(f64::NAN),
            iterations,
        });
    }
    let ratios = ratios_of(&increments);
    let tail = &ratios[ratios.len().saturating_sub(ratios.len() / 2)..];
    let contraction_factor = tail
        .iter()
        .copied()
        .fold(None::<f64>, |m, r| Some(m.map_or(r, |mm| mm.min(r))));

    // alpha_i by the closed formula at the fixed point; cross-check against
    // the final linearized flux multipliers
    let mut prob = LinearizedProblem::new(mesh, basis, degree);
    prob.w = Some(&u_k);
    prob.d = Some(&b_k);
    prob.f = clone_data(&data.f);
    prob.g = clone_data(&data.g);
    prob.p0 = data.p0;
    prob.h = data.h;
    let alpha = constants_formula(&prob, basis, &last.u, &last.u_kernel, &last.b)?;
    let cscale = alpha
        .iter()
        .chain(last.c.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1e-12);
    for i in 0..alpha.len() {
        if (alpha[i] - last.c[i]).abs() > 100.0 * CONSTANTS_TOL * cscale {
            return Err(Error::ConstantsMismatch {
                index: i + 1,
                multiplier: last.c[i],
                formula: alpha[i],
            });
        }
    }
    let p = recover_pressure(
        mesh,
        degree.min(2),
        prob.f.volume.as_ref().unwrap_or(&VecEval::Zero),
        Some(&last.u),
        Some(&last.b),
        Some(&u_k),
        Some(&b_k),
        &crate::scalar_solvers::PressureBc {
            p0: data.p0.unwrap_or(&|_| 0.0),
            constants: alpha.clone(),
        },
    )?;
    let report = PicardReport {
        iterations,
        converged,
        increments,
        ratios,
        contraction_factor,
        alpha: alpha.clone(),
        final_solve: last.report.clone(),
    };
    Ok(PicardSolution {
        u: last.u,
        u_kernel: last.u_kernel,
        b: last.b,
        p,
        alpha,
        report,
    })
}

fn ratios_of(increments: &[f64]) -> Vec<f64> {
    increments
        .windows(2)
        .map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 })
        .collect()
}

fn clone_data<'a>(d: &VectorData<'a>) -> VectorData<'a> {
    VectorData {
        volume: d.volume.as_ref().map(clone_eval),
        curl_part: d.curl_part.as_ref().map(clone_eval),
    }
}

fn clone_eval<'a>(e: &VecEval<'a>) -> VecEval<'a> {
    match e {
        VecEval::Zero => VecEval::Zero,
        VecEval::Fn(f) => VecEval::Fn(*f),
        VecEval::Fld(f) => VecEval::Fld(f),
        VecEval::GradOfScalar(f) => VecEval::GradOfScalar(f),
        VecEval::CurlOf(f) => VecEval::CurlOf(f),
        VecEval::CrossCurl(a, b) => VecEval::CrossCurl(a, b),
        VecEval::CrossCurlGrad(a, q) => VecEval::CrossCurlGrad(a, q),
        VecEval::Sum(v) => VecEval::Sum(v.iter().map(|(c, t)| (*c, clone_eval(t))).collect()),
    }
}

/// Discrete constants of the theory.
#[derive(Debug, Clone, Serialize)]
pub struct ConstantsEstimate {
    /// Discrete Poincare constant sqrt(2 / lambda_min) of the curlcurl +
    /// divdiv form against the H1 inner product on the constrained space.
    pub c_p: f64,
    pub lambda_min: f64,
    /// ||curl v|| <= C1 ||v||_H1; algebraically bounded by sqrt(2).
    pub c1: f64,
    /// Sampled lower estimate of the L4/H1 embedding constant.
    pub c2: f64,
    /// Data-norm surrogate M.
    pub m: f64,
}

pub struct DataNorms {
    pub f_l65: f64,
    pub psi_l2: f64,
    pub p0_l2_gamma: f64,
}

impl DataNorms {
    pub fn m_surrogate(&self) -> f64 {
        self.f_l65 + self.psi_l2 + self.p0_l2_gamma
    }
}

/// Quadrature of the data-norm surrogate for f = F + curl psi and P0.
pub fn data_norms(
    mesh: &Arc<Mesh>,
    f_volume: &VecEval,
    f_curl: &VecEval,
    p0: Option<&dyn Fn(Point) -> f64>,
) -> DataNorms {
    let rule = tet_rule(6).expect("quadrature");
    let mut f65 = 0.0f64;
    let mut psi2 = 0.0f64;
    for e in 0..mesh.tets.len() {
        let geom = TetGeom::new(mesh, e);
        let scale = 6.0 * geom.volume;
        for (q, w) in rule.weights.iter().enumerate() {
            let l = rule.points[q];
            let fv = f_volume.eval(&geom, e, l);
            let pv = f_curl.eval(&geom, e, l);
            f65 += w * scale * crate::mesh::dot(fv, fv).sqrt().powf(1.2);
            psi2 += w * scale * crate::mesh::dot(pv, pv);
        }
    }
    let mut p0sq = 0.0f64;
    if let Some(p0) = p0 {
        let trule = tri_rule(6).expect("quadrature");
        for (ti, bt) in mesh.boundary_tris.iter().enumerate() {
            let (_, area) = mesh.tri_normal_area(ti);
            let p0v = [
                mesh.vertices[bt.verts[0]],
                mesh.vertices[bt.verts[1]],
                mesh.vertices[bt.verts[2]],
            ];
            for (p, w) in trule.points.iter().zip(&trule.weights) {
                let x = [
                    p[0] * p0v[0][0] + p[1] * p0v[1][0] + p[2] * p0v[2][0],
                    p[0] * p0v[0][1] + p[1] * p0v[1][1] + p[2] * p0v[2][1],
                    p[0] * p0v[0][2] + p[1] * p0v[1][2] + p[2] * p0v[2][2],
                ];
                let v = p0(x);
                p0sq += w * 2.0 * area * v * v;
            }
        }
    }
    DataNorms {
        f_l65: f65.powf(1.0 / 1.2),
        psi_l2: psi2.sqrt(),
        p0_l2_gamma: p0sq.sqrt(),
    }
}

/// Estimate the discrete constants on the tangential-zero, flux-constrained
/// space of the requested degree.
pub fn estimate_constants(
    mesh: &Arc<Mesh>,
    degree: usize,
    norms: &DataNorms,
) -> Result<ConstantsEstimate> {
    let space = Arc::new(build_space(
        mesh,
        Kind::Vector,
        degree,
        BcSpec::TangentialZeroWithFlux,
    )?);
    let k_full = curlcurl(&space);
    let d_full = divdiv(&space);
    let mut t: Vec<(usize, usize, f64)> = k_full.iter().collect();
    t.extend(d_full.iter());
    let a_full = SparseMatrix::from_triplets(space.n_full(), space.n_full(), t);
    let a_red = space.reduce_mat(&a_full, &space);
    let k_red = space.reduce_mat(&k_full, &space);
    let h1_red = space.reduce_mat(&vector_h1(&space), &space);
    let constraints = space.flux_rows_free();
    let (lambda_min, _) = smallest_generalized_eig_constrained(&a_red, &h1_red, &constraints)?;
    let c_p = (2.0 / lambda_min).sqrt();
    let c1 = largest_generalized_eig(&k_red, &h1_red)?.max(0.0).sqrt();
    // sampled lower bound of the L4/H1 embedding constant on >= 200 random
    // constrained, flux-free fields
    let mut rng = ChaCha8Rng::seed_from_u64(0x4c34);
    let flux_rows = space.flux_rows_free();
    // dual fields z_k with fl_j(z_k) = delta via the flux rows themselves
    let proj_basis: Vec<Vec<f64>> = flux_rows
        .iter()
        .map(|row| {
            let mut v = vec![0.0; space.n_free];
            for &(i, w) in row {
                v[i] = w;
            }
            v
        })
        .collect();
    let gram = nalgebra::DMatrix::from_fn(flux_rows.len(), flux_rows.len(), |i, j| {
        flux_rows[i]
            .iter()
            .map(|&(k, w)| w * proj_basis[j][k])
            .sum()
    });
    let gram_lu = gram.clone().lu();
    let mut c2 = 0.0f64;
    for _ in 0..200 {
        let mut free: Vec<f64> = (0..space.n_free)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        if !flux_rows.is_empty() {
            let fl: Vec<f64> = flux_rows
                .iter()
                .map(|row| row.iter().map(|&(i, w)| w * free[i]).sum())
                .collect();
            if let Some(coef) = gram_lu.solve(&nalgebra::DVector::from_vec(fl)) {
                for (k, basis_vec) in proj_basis.iter().enumerate() {
                    for (f, b) in free.iter_mut().zip(basis_vec) {
                        *f -= coef[k] * b;
                    }
                }
            }
        }
        let fld = Field::from_free(&space, &free);
        let l4 = compute_norm(&fld, NormId::L4)?;
        let h1 = compute_norm(&fld, NormId::H1)?;
        if h1 > 0.0 {
            c2 = c2.max(l4 / h1);
        }
    }
    Ok(ConstantsEstimate {
        c_p,
        lambda_min,
        c1,
        c2,
        m: norms.m_surrogate(),
    })
}

/// The small-data uniqueness indicator C1 C2^2 M <= 2 / (3 C_P^2); the
/// returned margin is left/right.
pub fn uniqueness_check(est: &ConstantsEstimate) -> (bool, f64) {
    let left = est.c1 * est.c2 * est.c2 * est.m;
    let right = 2.0 / (3.0 * est.c_p * est.c_p);
    (left <= right, left / right)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::compute_harmonic_basis;
    use crate::mesh::unit_cube;

    #[test]
    fn uniqueness_check_arithmetic() {
        let mk = |c1: f64, c2: f64, cp: f64, m: f64| ConstantsEstimate {
            c_p: cp,
            lambda_min: 2.0 / (cp * cp),
            c1,
            c2,
            m,
        };
        let (ok, margin) = uniqueness_check(&mk(1.0, 1.0, 1.0, 0.0));
        assert!(ok && margin == 0.0);
        let (ok, margin) = uniqueness_check(&mk(1.0, 1.0, 1.0, 0.5));
        assert!(ok);
        assert!((margin - 0.75).abs() < 1e-15);
        let (ok, margin) = uniqueness_check(&mk(1.0, 1.0, 1.0, 1.0));
        assert!(!ok);
        assert!((margin - 1.5).abs() < 1e-15);
    }

    #[test]
    fn zero_data_m_is_zero() {
        let mesh = Arc::new(unit_cube(2).unwrap());
        let n = data_norms(&mesh, &VecEval::Zero, &VecEval::Zero, None);
        assert_eq!(n.m_surrogate(), 0.0);
    }

    #[test]
    fn c1_bounded_by_sqrt2() {
        // |curl v|^2 <= 2 |grad v|^2 pointwise, so C1 <= sqrt(2)
        let mesh = Arc::new(unit_cube(2).unwrap());
        let norms = data_norms(&mesh, &VecEval::Zero, &VecEval::Zero, None);
        for degree in [1usize, 2] {
            let est = estimate_constants(&mesh, degree, &norms).unwrap();
            assert!(
                est.c1 <= 2.0f64.sqrt() + 1e-6,
                "C1 = {} at degree {degree}",
                est.c1
            );
            assert!(est.c_p > 0.0 && est.lambda_min > 0.0);
            assert!(est.c2 > 0.0);
        }
    }

    #[test]
    fn picard_zero_data_converges_first_iteration() {
        let mesh = Arc::new(unit_cube(2).unwrap());
        let basis = compute_harmonic_basis(&mesh, 1).unwrap();
        let data = NonlinearData {
            f: VectorData::default(),
            g: VectorData::default(),
            p0: None,
            h: None,
        };
        let sol = picard_solve(&mesh, &basis, 1, &data, &PicardOptions::default()).unwrap();
        assert_eq!(sol.report.iterations, 1);
        assert!(compute_norm(&sol.u, NormId::H1).unwrap() < 1e-12);
        assert!(sol.alpha.is_empty());
    }

    #[test]
    fn picard_constant_pressure_datum() {
        // P0 = const kappa: u = 0, b = 0, P = kappa, alpha_i = 0
        let mesh = Arc::new(crate::mesh::hollow_box(1, 1).unwrap());
        let basis = compute_harmonic_basis(&mesh, 1).unwrap();
        let kappa = 2.5f64;
        let p0 = move |_: Point| kappa;
        let data = NonlinearData {
            f: VectorData::default(),
            g: VectorData::default(),
            p0: Some(&p0),
            h: None,
        };
        let sol = picard_solve(&mesh, &basis, 1, &data, &PicardOptions::default()).unwrap();
        assert!(compute_norm(&sol.u, NormId::H1).unwrap() <= 1e-9);
        assert!(compute_norm(&sol.b, NormId::H1).unwrap() <= 1e-9);
        assert!(sol.alpha[0].abs() <= 1e-9, "alpha = {}", sol.alpha[0]);
        for v in &sol.p.full {
            assert!((v - kappa).abs() < 1e-8, "P = {v}");
        }
    }

    #[test]
    fn invalid_options_rejected() {
        let mesh = Arc::new(unit_cube(1).unwrap());
        let basis = compute_harmonic_basis(&mesh, 1).unwrap();
        let data = NonlinearData {
            f: VectorData::default(),
            g: VectorData::default(),
            p0: None,
            h: None,
        };
        let mut opts = PicardOptions::default();
        opts.damping = 0.0;
        assert!(picard_solve(&mesh, &basis, 1, &data, &opts).is_err());
        let mut opts = PicardOptions::default();
        opts.tolerance = 0.0;
        assert!(picard_solve(&mesh, &basis, 1, &data, &opts).is_err());
    }
}
