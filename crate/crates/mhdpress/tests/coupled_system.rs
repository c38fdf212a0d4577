//! Integration tests of the coupled solvers: structural identities that
//! must hold to solver precision (constants-as-multipliers, transpose
//! duality, decoupling).

use mhdpress::fem::assemble::VecEval;
use mhdpress::fem::field::Field;
use mhdpress::fem::norms::{compute_norm, NormId};
use mhdpress::fem::shape::TetGeom;
use mhdpress::fem::space::{build_space, BcSpec, Kind};
use mhdpress::kernel::{boundary_pairing_split, compute_harmonic_basis, kernel_pairings};
use mhdpress::mesh::{hollow_box, unit_cube, Point};
use mhdpress::mhd::*;
use mhdpress::quadrature::tet_rule;
use std::sync::Arc;

fn l2_pair_field(f: &dyn Fn(Point) -> Point, fld: &Field) -> f64 {
    let mesh = &fld.space.mesh;
    let rule = tet_rule(2 * fld.space.degree + 4).unwrap();
    let mut acc = 0.0;
    for e in 0..mesh.tets.len() {
        let geom = TetGeom::new(mesh, e);
        let scale = 6.0 * geom.volume;
        for (q, w) in rule.weights.iter().enumerate() {
            let l = rule.points[q];
            let x = geom.point_at(l);
            let v = fld.eval_vector(e, l);
            acc += w * scale * mhdpress::mesh::dot(f(x), v);
        }
    }
    acc
}

fn l2_pair_scalar(f: &dyn Fn(Point) -> f64, fld: &Field) -> f64 {
    let mesh = &fld.space.mesh;
    let rule = tet_rule(2 * fld.space.degree + 4).unwrap();
    let mut acc = 0.0;
    for e in 0..mesh.tets.len() {
        let geom = TetGeom::new(mesh, e);
        let scale = 6.0 * geom.volume;
        for (q, w) in rule.weights.iter().enumerate() {
            let l = rule.points[q];
            let x = geom.point_at(l);
            acc += w * scale * f(x) * fld.eval_scalar(e, l);
        }
    }
    acc
}

fn boundary_pn_pair(s: &dyn Fn(Point) -> f64, fld: &Field) -> f64 {
    let full = mhdpress::fem::space::boundary_pn_functional(&fld.space, s).unwrap();
    full.iter().zip(&fld.full).map(|(a, b)| a * b).sum()
}

#[test]
fn stokes_zero_data_gives_zero() {
    let mesh = Arc::new(unit_cube(2).unwrap());
    let basis = compute_harmonic_basis(&mesh, 1).unwrap();
    let f = VectorData::default();
    let sol = solve_stokes_sn(&mesh, &basis, 1, &f, None, None).unwrap();
    assert!(compute_norm(&sol.u, NormId::H1).unwrap() < 1e-12);
    assert!(compute_norm(&sol.p, NormId::L2).unwrap() < 1e-12);
    assert!(sol.c.is_empty());
}

#[test]
fn stokes_gradient_kernel_forcing_identity() {
    // f = grad q_1 on the hollow box: u = 0, P = q_1, c_1 = ||grad q_1||^2
    // exactly at the discrete level (degree 2: no pressure stabilization)
    let mesh = Arc::new(hollow_box(1, 1).unwrap());
    let basis = compute_harmonic_basis(&mesh, 1).unwrap();
    let q1 = basis.q[0].clone();
    let f = VectorData::from_volume(VecEval::GradOfScalar(&q1));
    let sol = solve_stokes_sn(&mesh, &basis, 2, &f, None, None).unwrap();
    let energy = kernel_pairings(&basis, &VecEval::GradOfScalar(&q1), &VecEval::Zero).unwrap()[0];
    assert!(
        compute_norm(&sol.u, NormId::H1).unwrap() <= 1e-8 * energy.max(1.0),
        "u must vanish, got {}",
        compute_norm(&sol.u, NormId::H1).unwrap()
    );
    assert!(
        (sol.c[0] - energy).abs() <= 1e-9 * energy,
        "c_1 = {} vs energy {}",
        sol.c[0],
        energy
    );
    // the pressure multiplier reproduces q_1 nodewise
    let mut worst = 0.0f64;
    for (a, b) in sol.p_multiplier.full.iter().zip(&q1.full) {
        worst = worst.max((a - b).abs());
    }
    assert!(worst <= 1e-8 * energy.max(1.0), "p vs q_1: {worst}");
    // the recovered pressure agrees too (P1 = 0, P2 = harmonic extension)
    let mut worst = 0.0f64;
    for (a, b) in sol.p.full.iter().zip(&q1.full) {
        worst = worst.max((a - b).abs());
    }
    assert!(worst <= 1e-8 * energy.max(1.0), "recovered p vs q_1: {worst}");

    // degree 1 carries the equal-order stabilization: the constants
    // identity stays exact, u is merely small
    let sol1 = solve_stokes_sn(&mesh, &basis, 1, &f, None, None).unwrap();
    assert!((sol1.c[0] - energy).abs() <= 1e-9 * energy);
    assert!(compute_norm(&sol1.u, NormId::H1).unwrap() <= 0.05 * energy.max(1.0));
}

#[test]
fn stokes_constants_identity_general_data() {
    // nontrivial smooth data: multiplier vs quadrature formula to 1e-6
    let mesh = Arc::new(hollow_box(1, 1).unwrap());
    let basis = compute_harmonic_basis(&mesh, 1).unwrap();
    let fvol = |p: Point| -> Point { [p[1] * p[2], -p[0], p[0] * p[1] + 0.3] };
    let p0 = |p: Point| p[0] - 0.5 * p[2];
    let h = |p: Point| 0.25 * p[1];
    let f = VectorData::from_volume(VecEval::Fn(&fvol));
    let sol = solve_stokes_sn(&mesh, &basis, 1, &f, Some(&h), Some(&p0)).unwrap();
    let rel = (sol.report.c_multiplier[0] - sol.report.c_formula[0]).abs()
        / sol.report.c_formula[0].abs().max(1e-12);
    assert!(
        rel <= 1e-6,
        "constants identity: mult {} vs formula {} (rel {rel})",
        sol.report.c_multiplier[0],
        sol.report.c_formula[0]
    );
    // fluxes of the enriched velocity vanish
    for fx in &sol.report.flux_u {
        assert!(fx.abs() < 1e-8, "flux {fx}");
    }
}

#[test]
fn linearized_decouples_when_coupling_vanishes() {
    let mesh = Arc::new(unit_cube(2).unwrap());
    let basis = compute_harmonic_basis(&mesh, 1).unwrap();
    let fvol = |p: Point| -> Point { [p[1], p[2] * p[0], -1.0] };
    let gvol = |p: Point| -> Point {
        // curl of a polynomial field: divergence-free
        [p[0] - p[0] * p[0], 0.0, 2.0 * p[0] * p[2] - p[2]]
    };
    let p0 = |p: Point| 0.2 * p[1];
    let mut prob = LinearizedProblem::new(&mesh, &basis, 1);
    prob.f = VectorData::from_volume(VecEval::Fn(&fvol));
    prob.g = VectorData::from_volume(VecEval::Fn(&gvol));
    prob.p0 = Some(&p0);
    let sol = solve_linearized(&prob).unwrap();

    let f = VectorData::from_volume(VecEval::Fn(&fvol));
    let stokes = solve_stokes_sn(&mesh, &basis, 1, &f, None, Some(&p0)).unwrap();
    let g = VectorData::from_volume(VecEval::Fn(&gvol));
    let ell = solve_elliptic_en(&mesh, &basis, 1, &g, true).unwrap();

    let du = sol.u.difference(&stokes.u);
    let db = sol.b.difference(&ell.b);
    let su = compute_norm(&stokes.u, NormId::H1).unwrap().max(1e-12);
    let sb = compute_norm(&ell.b, NormId::H1).unwrap().max(1e-12);
    assert!(
        compute_norm(&du, NormId::H1).unwrap() <= 1e-8 * su,
        "u decoupling"
    );
    assert!(
        compute_norm(&db, NormId::H1).unwrap() <= 1e-8 * sb,
        "b decoupling"
    );
}

#[test]
fn linearized_homogeneous_unique_zero() {
    // f = g = 0, h = 0, P0 = 0, arbitrary admissible (w, d) -> zero solution
    let mesh = Arc::new(unit_cube(2).unwrap());
    let basis = compute_harmonic_basis(&mesh, 1).unwrap();
    let vs = Arc::new(build_space(&mesh, Kind::Vector, 1, BcSpec::None).unwrap());
    let w = Field::interpolate_vector(&vs, |p| [p[1] * p[2], 0.3 - p[0], p[0] * p[1]]);
    let d = Field::interpolate_vector(&vs, |p| [0.1 * p[2], 0.2, -0.1 * p[0]]);
    let mut prob = LinearizedProblem::new(&mesh, &basis, 1);
    prob.w = Some(&w);
    prob.d = Some(&d);
    let sol = solve_linearized(&prob).unwrap();
    assert!(compute_norm(&sol.u, NormId::H1).unwrap() < 1e-10);
    assert!(compute_norm(&sol.b, NormId::H1).unwrap() < 1e-10);
    assert!(compute_norm(&sol.p, NormId::L2).unwrap() < 1e-10);
}

#[test]
fn dual_matrix_is_signed_transpose_of_primal() {
    for (mesh, degree) in [
        (Arc::new(unit_cube(2).unwrap()), 2usize),
        (Arc::new(hollow_box(1, 1).unwrap()), 1usize),
    ] {
        let basis = compute_harmonic_basis(&mesh, 1).unwrap();
        let vs = Arc::new(build_space(&mesh, Kind::Vector, degree, BcSpec::None).unwrap());
        let w = Field::interpolate_vector(&vs, |p| [p[1] * p[2], 0.3 - p[0], p[0] * p[1]]);
        let d = Field::interpolate_vector(&vs, |p| [0.1 * p[2], 0.2 - p[1], -0.1 * p[0]]);
        let primal = assemble_coupled(&CoupledConfig {
            mesh: &mesh,
            basis: &basis,
            degree,
            w: Some(&w),
            d: Some(&d),
            include_b: true,
            dual: false,
        })
        .unwrap();
        let dual = assemble_coupled(&CoupledConfig {
            mesh: &mesh,
            basis: &basis,
            degree,
            w: Some(&w),
            d: Some(&d),
            include_b: true,
            dual: true,
        })
        .unwrap();
        let dev = dual_transpose_deviation(&primal, &dual);
        let scale = primal
            .matrix
            .values
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(
            dev <= 1e-12 * scale,
            "transpose deviation {dev} (scale {scale})"
        );
    }
}

#[test]
fn duality_identity_cube() {
    // |<u,F> + <b,G> - <P,phi>  -  (<f,v> + <g,a> - int_Gamma P0 v.n)| small
    let mesh = Arc::new(unit_cube(3).unwrap());
    let basis = compute_harmonic_basis(&mesh, 1).unwrap();
    let degree = 1usize;
    let vs = Arc::new(build_space(&mesh, Kind::Vector, degree, BcSpec::None).unwrap());
    let w = Field::interpolate_vector(&vs, |p| [p[1] * p[2], 0.3 - p[0], p[0] * p[1]]);
    let d = Field::interpolate_vector(&vs, |p| [0.1 * p[2], 0.2 - p[1], -0.1 * p[0]]);

    let fvol = |p: Point| -> Point { [p[1], p[2] * p[0], -1.0] };
    let gvol = |p: Point| -> Point { [p[0] - p[0] * p[0], 0.0, 2.0 * p[0] * p[2] - p[2]] };
    let p0 = |p: Point| 0.2 * p[1] - p[0] * p[2];

    let mut prob = LinearizedProblem::new(&mesh, &basis, degree);
    prob.w = Some(&w);
    prob.d = Some(&d);
    prob.f = VectorData::from_volume(VecEval::Fn(&fvol));
    prob.g = VectorData::from_volume(VecEval::Fn(&gvol));
    prob.p0 = Some(&p0);
    let primal = solve_linearized(&prob).unwrap();

    let bump = |p: Point| {
        64.0 * p[0] * (1.0 - p[0]) * p[1] * (1.0 - p[1]) * p[2] * (1.0 - p[2])
    };
    let fcap = |p: Point| -> Point { [0.5 - p[2], p[0], p[1] * p[1]] };
    let gcap = |p: Point| -> Point {
        // curl of (0, x z, y): divergence-free with exact zero divergence
        [1.0 - p[0], 0.0, p[2]]
    };
    let fd = VectorData::from_volume(VecEval::Fn(&fcap));
    let gd = VectorData::from_volume(VecEval::Fn(&gcap));
    let dual = solve_dual(
        &mesh,
        &basis,
        degree,
        Some(&w),
        Some(&d),
        &fd,
        &gd,
        Some(&bump),
    )
    .unwrap();

    // primal pairing: <F, u> + <G, b> - (phi, P_mult)
    let lhs = l2_pair_field(&fcap, &primal.u) + l2_pair_field(&gcap, &primal.b)
        - l2_pair_scalar(&bump, &primal.p_multiplier);
    // dual pairing: <f, v> + <g, a> - int_Gamma P0 v.n
    let rhs = l2_pair_field(&fvol, &dual.v) + l2_pair_field(&gvol, &dual.a)
        - boundary_pn_pair(&p0, &dual.v);
    let scale = lhs.abs().max(rhs.abs()).max(1e-12);
    assert!(
        (lhs - rhs).abs() <= 1e-6 * scale,
        "duality identity: {lhs} vs {rhs} (rel {:.3e})",
        (lhs - rhs).abs() / scale
    );
}

#[test]
fn elliptic_incompatible_data_detected() {
    let mesh = Arc::new(hollow_box(1, 1).unwrap());
    let basis = compute_harmonic_basis(&mesh, 1).unwrap();
    let q1 = basis.q[0].clone();
    let g = VectorData::from_volume(VecEval::GradOfScalar(&q1));
    match solve_elliptic_en(&mesh, &basis, 1, &g, false) {
        Err(mhdpress::Error::IncompatibleData { pairings }) => {
            let energy =
                kernel_pairings(&basis, &VecEval::GradOfScalar(&q1), &VecEval::Zero).unwrap()[0];
            assert!((pairings[0] - energy).abs() < 1e-9 * energy);
        }
        other => panic!("expected IncompatibleData, got {:?}", other.is_ok()),
    }
}

#[test]
fn constant_p0_mean_split_pairing_is_exact() {
    // <kappa, grad q_i . n>_Gamma = kappa * (total flux) = 0 exactly
    let mesh = Arc::new(hollow_box(1, 1).unwrap());
    let basis = compute_harmonic_basis(&mesh, 1).unwrap();
    let v = boundary_pairing_split(&basis, 0, &|_| 3.7);
    assert!(v.abs() < 1e-10, "constant pairing {v}");
}
