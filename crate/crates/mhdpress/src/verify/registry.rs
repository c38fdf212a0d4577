//! Named invariant checks: every invariant stated for the assembly, kernel,
//! linearized and nonlinear modules has a registered runner here, and the
//! registry itself is checked for omissions.

use crate::fem::assemble::{curlcurl, divdiv, scalar_mass, vector_h1, VecEval};
use crate::fem::field::Field;
use crate::fem::norms::{compute_norm, NormId};
use crate::fem::shape::TetGeom;
use crate::fem::space::{build_space, BcSpec, Kind, NodeConstraint};
use crate::kernel::{compute_harmonic_basis, kernel_project};
use crate::mesh::{hollow_box, unit_cube};
use crate::mhd::{solve_linearized, LinearizedProblem, VectorData};
use crate::nonlinear::{picard_solve, NonlinearData, PicardOptions};
use crate::quadrature::tri_rule;
use crate::solver::smallest_generalized_eig_constrained;
use crate::sparse::SparseMatrix;
use crate::verify::mms::{builtin_cases, MmsCase};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::sync::Arc;

#[derive(Debug, Clone, Serialize)]
pub struct InvariantResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// The invariants the suite must cover; the registry test fails on any
/// omission.
pub const EXPECTED_INVARIANTS: [&str; 13] = [
    "fe-constraint-exactness",
    "fe-discrete-poincare",
    "fe-matrix-symmetry",
    "kernel-dimension",
    "kernel-projection-idempotence",
    "kernel-gradient-consistency",
    "lin-coercivity-witness",
    "lin-coupling-neutrality",
    "lin-constants-consistency",
    "lin-chi-vanishing",
    "nl-two-guess-uniqueness",
    "nl-increment-ratios",
    "nl-alpha-consistency",
];

type Check = fn() -> Result<String, String>;

pub fn registry() -> Vec<(&'static str, Check)> {
    vec![
        ("fe-constraint-exactness", check_constraint_exactness),
        ("fe-discrete-poincare", check_discrete_poincare),
        ("fe-matrix-symmetry", check_matrix_symmetry),
        ("kernel-dimension", check_kernel_dimension),
        ("kernel-projection-idempotence", check_projection_idempotence),
        ("kernel-gradient-consistency", check_gradient_consistency),
        ("lin-coercivity-witness", check_coercivity_witness),
        ("lin-coupling-neutrality", check_coupling_neutrality),
        ("lin-constants-consistency", check_constants_consistency),
        ("lin-chi-vanishing", check_chi_vanishing),
        ("nl-two-guess-uniqueness", check_two_guess_uniqueness),
        ("nl-increment-ratios", check_increment_ratios),
        ("nl-alpha-consistency", check_alpha_consistency),
    ]
}

/// Run (a filtered subset of) the registry.
pub fn run_invariants(filter: Option<&str>) -> Vec<InvariantResult> {
    registry()
        .into_iter()
        .filter(|(name, _)| filter.map(|f| name.contains(f)).unwrap_or(true))
        .map(|(name, check)| match check() {
            Ok(detail) => InvariantResult {
                name: name.into(),
                passed: true,
                detail,
            },
            Err(detail) => InvariantResult {
                name: name.into(),
                passed: false,
                detail,
            },
        })
        .collect()
}

fn check_constraint_exactness() -> Result<String, String> {
    // quadrature of |v x n|^2 over Gamma vanishes for any field of a
    // tangential-zero space (exact at the polynomial level on flat faces)
    for degree in [1usize, 2] {
        let mesh = Arc::new(unit_cube(2).map_err(|e| e.to_string())?);
        let space = Arc::new(
            build_space(&mesh, Kind::Vector, degree, BcSpec::TangentialZero)
                .map_err(|e| e.to_string())?,
        );
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let free: Vec<f64> = (0..space.n_free).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v = Field::from_free(&space, &free);
        let l2 = compute_norm(&v, NormId::L2).map_err(|e| e.to_string())?;
        let rule = tri_rule(2 * degree + 2).map_err(|e| e.to_string())?;
        let mut acc = 0.0;
        for bf in &space.boundary_faces {
            let scale2 = 2.0 * bf.area;
            for (p, w) in rule.points.iter().zip(&rule.weights) {
                let l = crate::kernel::face_to_tet_bary(&mesh, bf.tri, *p);
                let tet = mesh.boundary_tris[bf.tri].tet;
                let val = v.eval_vector(tet, l);
                let t = crate::mesh::cross(val, bf.normal);
                acc += w * scale2 * crate::mesh::dot(t, t);
            }
        }
        if acc > 1e-20 * l2 * l2 {
            return Err(format!(
                "degree {degree}: tangential residual {acc:.3e} vs 1e-20 * {:.3e}",
                l2 * l2
            ));
        }
    }
    Ok("tangential trace quadrature vanishes at polynomial level".into())
}

fn poincare_lambda(mesh: &Arc<crate::mesh::Mesh>, degree: usize) -> Result<f64, String> {
    let space = Arc::new(
        build_space(mesh, Kind::Vector, degree, BcSpec::TangentialZeroWithFlux)
            .map_err(|e| e.to_string())?,
    );
    let k = curlcurl(&space);
    let d = divdiv(&space);
    let mut t: Vec<(usize, usize, f64)> = k.iter().collect();
    t.extend(d.iter());
    let a_full = SparseMatrix::from_triplets(space.n_full(), space.n_full(), t);
    let a_red = space.reduce_mat(&a_full, &space);
    let h1 = space.reduce_mat(&vector_h1(&space), &space);
    let (lambda, _) =
        smallest_generalized_eig_constrained(&a_red, &h1, &space.flux_rows_free())
            .map_err(|e| e.to_string())?;
    Ok(lambda)
}

fn check_discrete_poincare() -> Result<String, String> {
    let mut out = String::new();
    for (name, mesh) in [
        ("cube:2", Arc::new(unit_cube(2).map_err(|e| e.to_string())?)),
        (
            "hollow-box:2:1",
            Arc::new(hollow_box(2, 1).map_err(|e| e.to_string())?),
        ),
    ] {
        let lambda = poincare_lambda(&mesh, 1)?;
        if !(lambda > 0.0) {
            return Err(format!("{name}: lambda_min = {lambda}"));
        }
        out.push_str(&format!(
            "{name}: lambda_min = {lambda:.6}, C_P = {:.4}; ",
            (2.0 / lambda).sqrt()
        ));
    }
    Ok(out)
}

fn check_matrix_symmetry() -> Result<String, String> {
    let mesh = Arc::new(unit_cube(2).map_err(|e| e.to_string())?);
    let vs = Arc::new(build_space(&mesh, Kind::Vector, 2, BcSpec::None).map_err(|e| e.to_string())?);
    let ss = Arc::new(build_space(&mesh, Kind::Scalar, 1, BcSpec::None).map_err(|e| e.to_string())?);
    for (name, m) in [
        ("curlcurl", curlcurl(&vs)),
        ("divdiv", divdiv(&vs)),
        ("mass", scalar_mass(&ss)),
    ] {
        let asym = m.asymmetry();
        if asym > 1e-12 {
            return Err(format!("{name} asymmetry {asym:.3e}"));
        }
    }
    Ok("assembled matrices symmetric to 1e-12".into())
}

fn check_kernel_dimension() -> Result<String, String> {
    for (mesh, want) in [
        (Arc::new(unit_cube(2).map_err(|e| e.to_string())?), 0usize),
        (Arc::new(hollow_box(1, 1).map_err(|e| e.to_string())?), 1),
        (
            Arc::new(crate::mesh::two_cavity_box(1, 1).map_err(|e| e.to_string())?),
            2,
        ),
    ] {
        let b = compute_harmonic_basis(&mesh, 1).map_err(|e| e.to_string())?;
        if b.dim() != want {
            return Err(format!("dim {} vs I = {want}", b.dim()));
        }
    }
    Ok("kernel dimension equals the internal component count".into())
}

fn check_projection_idempotence() -> Result<String, String> {
    let mesh = Arc::new(hollow_box(1, 1).map_err(|e| e.to_string())?);
    let basis = compute_harmonic_basis(&mesh, 1).map_err(|e| e.to_string())?;
    let vs = Arc::new(
        build_space(&mesh, Kind::Vector, 1, BcSpec::TangentialZeroWithFlux)
            .map_err(|e| e.to_string())?,
    );
    let g = Field::interpolate_vector(&vs, |p| {
        let c = [p[0] - 0.5, p[1] - 0.5, p[2] - 0.5];
        let r2 = crate::mesh::dot(c, c).max(1e-4);
        [c[0] / r2 + p[1], c[1] / r2, c[2] / r2 - p[0]]
    });
    let once = kernel_project(&basis, &g).map_err(|e| e.to_string())?;
    let twice = kernel_project(&basis, &once).map_err(|e| e.to_string())?;
    let scale = once.full.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-30);
    let mut worst = 0.0f64;
    for (a, b) in once.full.iter().zip(&twice.full) {
        worst = worst.max((a - b).abs());
    }
    if worst > 1e-12 * scale {
        return Err(format!("idempotence violated: {worst:.3e}"));
    }
    Ok(format!("projection idempotent to {worst:.3e}"))
}

fn check_gradient_consistency() -> Result<String, String> {
    // grad q_i equals the elementwise gradient of q_i (polynomial
    // identity): verified by interior finite differences per element, and
    // the Hessian antisymmetry (curl of gradient) vanishes identically
    let mesh = Arc::new(hollow_box(1, 1).map_err(|e| e.to_string())?);
    for degree in [1usize, 2] {
        let basis = compute_harmonic_basis(&mesh, degree).map_err(|e| e.to_string())?;
        let q = &basis.q[0];
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..30 {
            let e = rng.random_range(0..mesh.tets.len());
            let geom = TetGeom::new(&mesh, e);
            let l = [0.3, 0.3, 0.2, 0.2];
            let g = q.grad_scalar(&geom, e, l);
            // interior finite differences in barycentric directions
            let eps = 1e-6;
            for d in 0..3 {
                // move along the physical axis d expressed in barycentrics
                let x = geom.point_at(l);
                let mut xp = x;
                let mut xm = x;
                xp[d] += eps;
                xm[d] -= eps;
                // recover barycentric coordinates of xp, xm
                let to_bary = |y: crate::mesh::Point| -> [f64; 4] {
                    let mut lam = [0.0; 4];
                    for k in 1..4 {
                        lam[k] = crate::mesh::dot(
                            geom.grad_lambda[k],
                            crate::mesh::sub(y, geom.verts[0]),
                        );
                    }
                    lam[0] = 1.0 - lam[1] - lam[2] - lam[3];
                    lam
                };
                let lp = to_bary(xp);
                let lm = to_bary(xm);
                let fd = (q.eval_scalar(e, lp) - q.eval_scalar(e, lm)) / (2.0 * eps);
                if (fd - g[d]).abs() > 1e-6 * (1.0 + g[d].abs()) {
                    return Err(format!("degree {degree} grad mismatch: {fd} vs {}", g[d]));
                }
            }
            let h = q.hessian_scalar(&geom, e);
            let asym = (h[0][1] - h[1][0])
                .abs()
                .max((h[0][2] - h[2][0]).abs())
                .max((h[1][2] - h[2][1]).abs());
            if asym > 1e-12 {
                return Err(format!("curl(grad q) = {asym:.3e}"));
            }
        }
    }
    Ok("elementwise gradients consistent; curl(grad q) = 0".into())
}

/// Random constrained flux-free pair fields on the velocity space.
fn random_pairs(
    mesh: &Arc<crate::mesh::Mesh>,
    degree: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<(Field, Field)>, String> {
    let space = Arc::new(
        build_space(mesh, Kind::Vector, degree, BcSpec::TangentialZeroWithFlux)
            .map_err(|e| e.to_string())?,
    );
    let rows = space.flux_rows_free();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let proj = |free: &mut Vec<f64>| {
        if rows.is_empty() {
            return;
        }
        // project out the flux functionals with their own riesz vectors
        let gram = nalgebra::DMatrix::<f64>::from_fn(rows.len(), rows.len(), |i, j| {
            rows[i]
                .iter()
                .filter_map(|&(k, w)| {
                    rows[j]
                        .iter()
                        .find(|&&(kk, _)| kk == k)
                        .map(|&(_, wj)| w * wj)
                })
                .sum::<f64>()
        });
        let vals = nalgebra::DVector::<f64>::from_fn(rows.len(), |i, _| {
            rows[i].iter().map(|&(k, w)| w * free[k]).sum::<f64>()
        });
        if let Some(coef) = gram.lu().solve(&vals) {
            for (i, row) in rows.iter().enumerate() {
                for &(k, w) in row {
                    free[k] -= coef[i] * w;
                }
            }
        }
    };
    for _ in 0..count {
        let mut f1: Vec<f64> = (0..space.n_free).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut f2: Vec<f64> = (0..space.n_free).map(|_| rng.random_range(-1.0..1.0)).collect();
        proj(&mut f1);
        proj(&mut f2);
        out.push((Field::from_free(&space, &f1), Field::from_free(&space, &f2)));
    }
    Ok(out)
}

fn check_coercivity_witness() -> Result<String, String> {
    // a((v,Psi),(v,Psi)) >= (2/C_P^2)(1-1e-6) ||(v,Psi)||^2_{Z_N} with the
    // discrete constant from the generalized eigensolve
    let mesh = Arc::new(hollow_box(1, 1).map_err(|e| e.to_string())?);
    let degree = 1usize;
    let lambda = poincare_lambda(&mesh, degree)?;
    let space = Arc::new(
        build_space(&mesh, Kind::Vector, degree, BcSpec::TangentialZeroWithFlux)
            .map_err(|e| e.to_string())?,
    );
    let k = curlcurl(&space);
    let dd = divdiv(&space);
    let pairs = random_pairs(&mesh, degree, 20, 29)?;
    let mut worst = f64::INFINITY;
    for (v, psi) in &pairs {
        let av: f64 = crate::sparse::dot(&k.matvec(&v.full), &v.full)
            + crate::sparse::dot(&dd.matvec(&v.full), &v.full)
            + crate::sparse::dot(&k.matvec(&psi.full), &psi.full)
            + crate::sparse::dot(&dd.matvec(&psi.full), &psi.full);
        let nv = compute_norm(v, NormId::H1).map_err(|e| e.to_string())?;
        let np = compute_norm(psi, NormId::H1).map_err(|e| e.to_string())?;
        let zn2 = nv * nv + np * np;
        let bound = lambda * (1.0 - 1e-6) * zn2;
        worst = worst.min(av / bound);
        if av < bound {
            return Err(format!("coercivity violated: {av:.6e} < {bound:.6e}"));
        }
    }
    Ok(format!(
        "20 pairs satisfy the bound; smallest margin {worst:.6}"
    ))
}

fn check_coupling_neutrality() -> Result<String, String> {
    // |a_wd((u,b),(u,b))| <= 1e-10 (||u||_H1 + ||b||_H1)^2
    let mesh = Arc::new(unit_cube(2).map_err(|e| e.to_string())?);
    let degree = 1usize;
    let space = Arc::new(
        build_space(&mesh, Kind::Vector, degree, BcSpec::TangentialZeroWithFlux)
            .map_err(|e| e.to_string())?,
    );
    let free = Arc::new(build_space(&mesh, Kind::Vector, degree, BcSpec::None).map_err(|e| e.to_string())?);
    let w = Field::interpolate_vector(&free, |p| [p[1] * p[2], 0.5 - p[0] * p[0], p[0] + p[1]]);
    let d = Field::interpolate_vector(&free, |p| [0.3 * p[2], p[0] * p[1], 1.0 - p[2]]);
    let n_w = crate::fem::assemble::convection(&space, &w);
    let c_d = crate::fem::assemble::coupling(&space, &d);
    let pairs = random_pairs(&mesh, degree, 20, 31)?;
    let mut worst = 0.0f64;
    for (u, b) in &pairs {
        // a_wd((u,b),(u,b)) = u.N_w u + u.(-C b) + b.(C^T u)
        let q = crate::sparse::dot(&n_w.matvec(&u.full), &u.full)
            - crate::sparse::dot(&c_d.matvec(&b.full), &u.full)
            + crate::sparse::dot(&c_d.transpose().matvec(&u.full), &b.full);
        let nu = compute_norm(u, NormId::H1).map_err(|e| e.to_string())?;
        let nb = compute_norm(b, NormId::H1).map_err(|e| e.to_string())?;
        let scale = (nu + nb) * (nu + nb);
        worst = worst.max(q.abs() / scale);
        if q.abs() > 1e-10 * scale {
            return Err(format!("energy neutrality violated: {q:.3e} vs {scale:.3e}"));
        }
    }
    Ok(format!("neutral to {worst:.3e} relative on 20 pairs"))
}

fn linearized_sample_solution() -> Result<crate::mhd::LinearizedSolution, String> {
    let mesh = Arc::new(hollow_box(1, 1).map_err(|e| e.to_string())?);
    let basis = compute_harmonic_basis(&mesh, 1).map_err(|e| e.to_string())?;
    let free = Arc::new(build_space(&mesh, Kind::Vector, 1, BcSpec::None).map_err(|e| e.to_string())?);
    let w = Field::interpolate_vector(&free, |p| [p[1], -p[0] * p[2], 0.2]);
    let d = Field::interpolate_vector(&free, |p| [0.1 * p[2], 0.3, 0.1 * p[0]]);
    let fvol = |p: crate::mesh::Point| -> crate::mesh::Point { [p[1] * p[2], -p[0], 0.5] };
    let gvol = |p: crate::mesh::Point| -> crate::mesh::Point {
        [p[0] - p[0] * p[0], 0.0, 2.0 * p[0] * p[2] - p[2]]
    };
    let p0 = |p: crate::mesh::Point| p[0] + 0.2 * p[1];
    let mut prob = LinearizedProblem::new(&mesh, &basis, 1);
    prob.w = Some(&w);
    prob.d = Some(&d);
    prob.f = VectorData::from_volume(VecEval::Fn(&fvol));
    prob.g = VectorData::from_volume(VecEval::Fn(&gvol));
    prob.p0 = Some(&p0);
    solve_linearized(&prob).map_err(|e| e.to_string())
}

fn check_constants_consistency() -> Result<String, String> {
    let sol = linearized_sample_solution()?;
    let scale = sol
        .report
        .c_formula
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1e-12);
    for (m, f) in sol.report.c_multiplier.iter().zip(&sol.report.c_formula) {
        if (m - f).abs() > 1e-6 * scale {
            return Err(format!("c mismatch: {m} vs {f}"));
        }
    }
    Ok(format!(
        "c multiplier matches the quadrature formula: {:?}",
        sol.report.c_multiplier
    ))
}

fn check_chi_vanishing() -> Result<String, String> {
    let sol = linearized_sample_solution()?;
    // g in the sample is a polynomial curl: divergence-free
    let mesh_scale = 1.0f64;
    if sol.report.chi_l2 > 1e-8 * mesh_scale {
        return Err(format!("chi = {:.3e}", sol.report.chi_l2));
    }
    Ok(format!("chi_l2 = {:.3e} for divergence-free g", sol.report.chi_l2))
}

fn small_amplitude_case() -> MmsCase {
    let mut c = builtin_cases()[0].clone();
    c.amplitude = 0.05;
    c
}

fn picard_run(initial_seed: Option<u64>) -> Result<crate::nonlinear::PicardSolution, String> {
    let case = small_amplitude_case();
    let mesh = Arc::new(unit_cube(2).map_err(|e| e.to_string())?);
    let basis = compute_harmonic_basis(&mesh, 1).map_err(|e| e.to_string())?;
    let f_mhd = move |p| case.f_mhd(p);
    let case2 = small_amplitude_case();
    let g_mhd = move |p| case2.g_mhd(p);
    let case3 = small_amplitude_case();
    let p0 = move |p| case3.p0(p);
    let data = NonlinearData {
        f: VectorData::from_volume(VecEval::Fn(&f_mhd)),
        g: VectorData::from_volume(VecEval::Fn(&g_mhd)),
        p0: Some(&p0),
        h: None,
    };
    let mut opts = PicardOptions::default();
    if let Some(seed) = initial_seed {
        let space = Arc::new(
            build_space(&mesh, Kind::Vector, 1, BcSpec::TangentialZeroWithFlux)
                .map_err(|e| e.to_string())?,
        );
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u0: Vec<f64> = (0..space.n_free)
            .map(|_| rng.random_range(-0.01..0.01))
            .collect();
        let b0: Vec<f64> = (0..space.n_free)
            .map(|_| rng.random_range(-0.01..0.01))
            .collect();
        opts.initial = Some((
            Field::from_free(&space, &u0),
            Field::from_free(&space, &b0),
        ));
    }
    picard_solve(&mesh, &basis, 1, &data, &opts).map_err(|e| e.to_string())
}

fn check_two_guess_uniqueness() -> Result<String, String> {
    let case = small_amplitude_case();
    let mesh = Arc::new(unit_cube(2).map_err(|e| e.to_string())?);
    let f_mhd = |p| case.f_mhd(p);
    let p0f = |p| case.p0(p);
    let norms = crate::nonlinear::data_norms(
        &mesh,
        &VecEval::Fn(&f_mhd),
        &VecEval::Zero,
        Some(&p0f),
    );
    let est = crate::nonlinear::estimate_constants(&mesh, 1, &norms).map_err(|e| e.to_string())?;
    let (ok, margin) = crate::nonlinear::uniqueness_check(&est);
    let a = picard_run(None)?;
    let b = picard_run(Some(99))?;
    let du = a.u.difference(&b.u);
    let db = a.b.difference(&b.b);
    let nu = compute_norm(&du, NormId::H1).map_err(|e| e.to_string())?;
    let nb = compute_norm(&db, NormId::H1).map_err(|e| e.to_string())?;
    let dist = (nu * nu + nb * nb).sqrt();
    let su = compute_norm(&a.u, NormId::H1).map_err(|e| e.to_string())?;
    let sb = compute_norm(&a.b, NormId::H1).map_err(|e| e.to_string())?;
    let scale = (su * su + sb * sb).sqrt().max(1e-30);
    let tol = PicardOptions::default().tolerance;
    if ok && dist > 10.0 * tol * scale {
        return Err(format!(
            "two guesses disagree: {dist:.3e} vs 10 tol scale {:.3e}",
            10.0 * tol * scale
        ));
    }
    Ok(format!(
        "uniqueness indicator {} (margin {margin:.3}); guess distance {:.3e}",
        ok,
        dist / scale
    ))
}

fn check_increment_ratios() -> Result<String, String> {
    let sol = picard_run(None)?;
    let r = &sol.report.ratios;
    if r.is_empty() {
        return Err("no ratios recorded".into());
    }
    let tail = &r[r.len().saturating_sub(r.len() / 2)..];
    for t in tail {
        if *t > 1.0 + 1e-12 {
            return Err(format!("tail ratio {t} > 1"));
        }
    }
    let cf = sol.report.contraction_factor.unwrap_or(f64::NAN);
    if !(cf < 1.0) {
        return Err(format!("contraction factor {cf}"));
    }
    Ok(format!(
        "tail ratios <= 1; empirical contraction factor {cf:.4}"
    ))
}

fn check_alpha_consistency() -> Result<String, String> {
    // alpha from quadrature equals the final flux-multiplier reaction
    let case = small_amplitude_case();
    let mesh = Arc::new(hollow_box(1, 1).map_err(|e| e.to_string())?);
    let basis = compute_harmonic_basis(&mesh, 1).map_err(|e| e.to_string())?;
    // constant-pressure data (the only exactly admissible hollow-box data
    // here): alpha must equal the final multipliers and be ~0
    let p0 = |_: crate::mesh::Point| 1.25f64;
    let _ = case;
    let data = NonlinearData {
        f: VectorData::default(),
        g: VectorData::default(),
        p0: Some(&p0),
        h: None,
    };
    let sol = picard_solve(&mesh, &basis, 1, &data, &PicardOptions::default())
        .map_err(|e| e.to_string())?;
    let scale = sol
        .alpha
        .iter()
        .chain(sol.report.final_solve.c_multiplier.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1e-9);
    for (a, c) in sol.alpha.iter().zip(&sol.report.final_solve.c_multiplier) {
        if (a - c).abs() > 1e-6 * scale.max(1.0) {
            return Err(format!("alpha {a} vs multiplier {c}"));
        }
    }
    Ok(format!("alpha = {:?} matches the flux multipliers", sol.alpha))
}

/// Check free/fixed bookkeeping of a tangential space (used by the CLI
/// verify path as a cheap smoke test).
pub fn constraint_census(space: &crate::fem::space::ConstrainedSpace) -> (usize, usize, usize) {
    let mut free = 0;
    let mut normal = 0;
    let mut fixed = 0;
    for nc in &space.node_constraint {
        match nc {
            NodeConstraint::Free => free += 1,
            NodeConstraint::NormalOnly(_) => normal += 1,
            NodeConstraint::Fixed => fixed += 1,
            NodeConstraint::Group(_) => {}
        }
    }
    (free, normal, fixed)
}
