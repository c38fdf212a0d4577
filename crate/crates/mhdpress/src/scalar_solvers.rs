//! Auxiliary scalar Poisson solves: divergence lifting, the Lagrange field
//! chi, harmonic extensions and the decoupled pressure recovery.

use crate::error::{Error, Result};
use crate::fem::assemble::{
    rhs_scalar_neg_grad, rhs_scalar_volume, scalar_mass, scalar_stiffness, VecEval,
};
use crate::fem::field::Field;
use crate::fem::shape::TetGeom;
use crate::fem::space::{build_space, dirichlet_values, BcSpec, ConstrainedSpace, Kind};
use crate::kernel::HarmonicBasis;
use crate::mesh::{dot, Mesh, Point};
use crate::quadrature::tet_rule;
use crate::solver::solve_spd;
use std::sync::Arc;

/// Pressure boundary data: P = p0 on Gamma_0 and p0 + constants[i-1] on
/// Gamma_i.
pub struct PressureBc<'a> {
    pub p0: &'a dyn Fn(Point) -> f64,
    pub constants: Vec<f64>,
}

/// Solve  Delta theta = h  in Omega, theta = bc on Gamma (Galerkin with
/// essential boundary values; reduced residual <= 1e-10).
pub fn solve_dirichlet_poisson(
    mesh: &Arc<Mesh>,
    degree: usize,
    h: &dyn Fn(Point) -> f64,
    bc: &dyn Fn(Point) -> f64,
) -> Result<Field> {
    let space = Arc::new(build_space(mesh, Kind::Scalar, degree, BcSpec::Dirichlet(None))?);
    let ell = rhs_scalar_volume(&space, h);
    solve_laplace_like(&space, &ell, bc)
}

/// Solve with a general functional: (grad theta, grad v) = -ell(v) for all
/// zero-trace v, theta = bc on Gamma. `ell` is the full-dof functional of
/// the right-hand side of Delta theta = "rhs", i.e. ell(v) = (rhs, v).
pub fn solve_laplace_like(
    space: &Arc<ConstrainedSpace>,
    ell_full: &[f64],
    bc: &dyn Fn(Point) -> f64,
) -> Result<Field> {
    let s_full = scalar_stiffness(space);
    let s_red = space.reduce_mat(&s_full, space);
    let fixed = dirichlet_values(space, bc);
    let mut rhs: Vec<f64> = space.reduce_vec(ell_full).iter().map(|v| -v).collect();
    let corr = space.dirichlet_rhs(&s_full, space, &fixed);
    for (r, c) in rhs.iter_mut().zip(&corr) {
        *r += c;
    }
    let free = solve_spd(&s_red, &rhs)
        .map_err(|e| Error::SolveFailure(format!("poisson solve: {e}")))?;
    Ok(Field::from_free_with_fixed(space, &free, &fixed))
}

/// Lagrange field chi: Delta chi = div g in Omega, chi = 0 on Gamma, with
/// the right-hand side assembled weakly as -(g, grad v); the curl part of
/// g pairs with curl(grad v) = 0 elementwise and drops structurally.
pub fn solve_chi(mesh: &Arc<Mesh>, degree: usize, g_volume: &VecEval) -> Result<Field> {
    let space = Arc::new(build_space(mesh, Kind::Scalar, degree, BcSpec::Dirichlet(None))?);
    let ell = rhs_scalar_neg_grad(&space, g_volume);
    solve_laplace_like(&space, &ell, &|_| 0.0)
}

/// The divergence lifting w~ = grad theta - sum_i flux_i(grad theta) grad q_i.
pub struct Lifting {
    pub theta: Field,
    /// Coefficients of the subtracted kernel fields.
    pub kernel_coeffs: Vec<f64>,
    /// Equation-consistent fluxes of the lifted field through each
    /// component (0..I); internal entries vanish by construction.
    pub fluxes: Vec<f64>,
    /// Total boundary flux = integral of h.
    pub total_flux: f64,
}

impl Lifting {
    /// The lifted broken field as an integrand source.
    pub fn as_eval<'a>(&'a self, basis: &'a HarmonicBasis) -> VecEval<'a> {
        let mut terms = vec![(1.0, VecEval::GradOfScalar(&self.theta))];
        for (i, c) in self.kernel_coeffs.iter().enumerate() {
            terms.push((-c, VecEval::GradOfScalar(&basis.q[i])));
        }
        VecEval::Sum(terms)
    }
}

/// Build the lifting for div u = h. Fluxes use the equation-consistent
/// variational form  (grad theta, grad lambda_k) + (h, lambda_k), which is
/// exact for the discrete Laplacian.
pub fn divergence_lifting(
    mesh: &Arc<Mesh>,
    basis: &HarmonicBasis,
    h: &dyn Fn(Point) -> f64,
) -> Result<Lifting> {
    let degree = basis.space.degree;
    let theta = solve_dirichlet_poisson(mesh, degree, h, &|_| 0.0)?;
    let i_comp = mesh.n_internal_components();
    let s_full = scalar_stiffness(&theta.space);
    let s_theta = s_full.matvec(&theta.full);
    let h_vec = rhs_scalar_volume(&theta.space, h);
    // flux of grad theta through component k: (grad theta, grad lambda_k) + (h, lambda_k)
    let flux_of_theta = |k: usize| -> f64 {
        // lambda_k: 1 at nodes of component k, 0 elsewhere (any interior
        // extension gives the same value for the discrete solution)
        let mut acc = 0.0;
        for (n, _) in theta.space.nodes.iter().enumerate() {
            if theta.space.component_of_node.get(&n) == Some(&k) {
                acc += s_theta[n] + h_vec[n];
            }
        }
        acc
    };
    let kernel_coeffs: Vec<f64> = (1..=i_comp).map(flux_of_theta).collect();
    let mut fluxes = vec![0.0; mesh.n_components];
    for k in 0..mesh.n_components {
        let mut f = flux_of_theta(k);
        for (i, c) in kernel_coeffs.iter().enumerate() {
            let fvar = if k == 0 {
                basis.variational_flux_outer(i)
            } else {
                basis.flux_matrix[i][k - 1]
            };
            f -= c * fvar;
        }
        fluxes[k] = f;
    }
    let total_flux = fluxes.iter().sum();
    Ok(Lifting {
        theta,
        kernel_coeffs,
        fluxes,
        total_flux,
    })
}

/// L2 projection of the weak divergence of the lifted field onto the
/// zero-trace scalar space (for verification: it equals the projection of
/// h exactly, so comparing against h measures the projection error).
pub fn lifting_div_projection(basis: &HarmonicBasis, lift: &Lifting) -> Result<Field> {
    let mesh = &basis.space.mesh;
    let space = Arc::new(build_space(
        mesh,
        Kind::Scalar,
        basis.space.degree,
        BcSpec::Dirichlet(None),
    )?);
    let eval = lift.as_eval(basis);
    // (div w~, v) = -(w~, grad v) for zero-trace v
    let ell = rhs_scalar_neg_grad(&space, &eval);
    let m_full = scalar_mass(&space);
    let m_red = space.reduce_mat(&m_full, &space);
    let rhs = space.reduce_vec(&ell);
    let free = solve_spd(&m_red, &rhs)?;
    Ok(Field::from_free(&space, &free))
}

/// Decoupled pressure recovery P = P1 + P2: P1 solves the zero-trace
/// Poisson problem with the momentum-residual functional, P2 is the
/// harmonic extension of (p0 on Gamma_0; p0 + c_i on Gamma_i). The curl
/// part of f drops against gradients of the test space.
pub fn recover_pressure(
    mesh: &Arc<Mesh>,
    degree: usize,
    f_volume: &VecEval,
    u: Option<&Field>,
    b: Option<&Field>,
    w: Option<&Field>,
    d: Option<&Field>,
    bc: &PressureBc,
) -> Result<Field> {
    let space = Arc::new(build_space(mesh, Kind::Scalar, degree, BcSpec::Dirichlet(None))?);
    // P1: (grad P1, grad v) = (F - (curl w) x u + (curl b) x d, grad v)
    let mut terms = vec![(1.0, clone_eval(f_volume))];
    if let (Some(w), Some(u)) = (w, u) {
        terms.push((-1.0, VecEval::CrossCurl(w, u)));
    }
    if let (Some(b), Some(d)) = (b, d) {
        terms.push((1.0, VecEval::CrossCurl(b, d)));
    }
    let combined = VecEval::Sum(terms);
    let ell = rhs_scalar_neg_grad(&space, &combined);
    let p1 = solve_laplace_like(&space, &ell, &|_| 0.0)?;
    // P2: harmonic extension of the boundary data, per-node values with the
    // component constants added on the internal boundaries
    let s_full = scalar_stiffness(&space);
    let s_red = space.reduce_mat(&s_full, &space);
    let mut fixed = vec![0.0; space.n_full()];
    for (n, nc) in space.node_constraint.iter().enumerate() {
        if matches!(nc, crate::fem::space::NodeConstraint::Fixed) {
            let comp = space.component_of_node.get(&n).copied().unwrap_or(0);
            let add = if comp >= 1 {
                bc.constants.get(comp - 1).copied().unwrap_or(0.0)
            } else {
                0.0
            };
            fixed[n] = (bc.p0)(space.nodes[n]) + add;
        }
    }
    let rhs = space.dirichlet_rhs(&s_full, &space, &fixed);
    let free = solve_spd(&s_red, &rhs)
        .map_err(|e| Error::SolveFailure(format!("harmonic extension: {e}")))?;
    let p2 = Field::from_free_with_fixed(&space, &free, &fixed);
    let mut p = p1;
    p.add_scaled(1.0, &p2);
    Ok(p)
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
        VecEval::Sum(terms) => {
            VecEval::Sum(terms.iter().map(|(c, t)| (*c, clone_eval(t))).collect())
        }
    }
}

/// Max/min of a scalar field over all nodes (for maximum-principle checks).
pub fn field_range(f: &Field) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in &f.full {
        lo = lo.min(*v);
        hi = hi.max(*v);
    }
    (lo, hi)
}

/// L2 norm of a VecEval source by quadrature (data-norm surrogate).
pub fn eval_l2_norm(mesh: &Arc<Mesh>, e: &VecEval) -> f64 {
    let rule = tet_rule(6).expect("quadrature degree");
    let mut acc = 0.0;
    for t in 0..mesh.tets.len() {
        let geom = TetGeom::new(mesh, t);
        let scale = 6.0 * geom.volume;
        for (q, w) in rule.weights.iter().enumerate() {
            let v = e.eval(&geom, t, rule.points[q]);
            acc += w * scale * dot(v, v);
        }
    }
    acc.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::norms::{compute_norm, error_norm_scalar, ExactScalar, NormId};
    use crate::kernel::compute_harmonic_basis;
    use crate::mesh::{hollow_box, unit_cube};
    use std::f64::consts::PI;

    #[test]
    fn zero_data_zero_solution() {
        let mesh = Arc::new(unit_cube(2).unwrap());
        let th = solve_dirichlet_poisson(&mesh, 1, &|_| 0.0, &|_| 0.0).unwrap();
        assert!(compute_norm(&th, NormId::L2).unwrap() < 1e-14);
    }

    #[test]
    fn constant_boundary_gives_constant() {
        let mesh = Arc::new(unit_cube(2).unwrap());
        let th = solve_dirichlet_poisson(&mesh, 1, &|_| 0.0, &|_| 1.0).unwrap();
        for v in &th.full {
            assert!((v - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn manufactured_sin_product_p2_rate() {
        // Delta theta = -3 pi^2 s(x)s(y)s(z), theta = product of sines
        let exact = |p: Point| (PI * p[0]).sin() * (PI * p[1]).sin() * (PI * p[2]).sin();
        let rhs = move |p: Point| -3.0 * PI * PI * exact(p);
        let mut errs = Vec::new();
        for n in [2usize, 4] {
            let mesh = Arc::new(unit_cube(n).unwrap());
            let th = solve_dirichlet_poisson(&mesh, 2, &rhs, &|_| 0.0).unwrap();
            let e = error_norm_scalar(
                &th,
                &ExactScalar {
                    value: &exact,
                    grad: None,
                },
                NormId::L2,
            )
            .unwrap();
            errs.push(e);
        }
        let ratio = errs[0] / errs[1];
        assert!(ratio >= 3.0, "P2 L2 ratio {ratio} (errors {errs:?})");
    }

    #[test]
    fn chi_vanishes_for_divergence_free_polynomial() {
        let mesh = Arc::new(unit_cube(2).unwrap());
        // g = curl xi, xi polynomial
        let g = |p: Point| -> Point {
            [
                p[0] - p[0] * p[0],
                0.0,
                2.0 * p[0] * p[2] - p[2],
            ]
        };
        let chi = solve_chi(&mesh, 2, &VecEval::Fn(&g)).unwrap();
        let scale = eval_l2_norm(&mesh, &VecEval::Fn(&g));
        let n = compute_norm(&chi, NormId::L2).unwrap();
        assert!(n <= 1e-8 * scale, "chi = {n}, scale {scale}");
    }

    #[test]
    fn chi_recovers_gradient_potential() {
        // g = grad psi with psi = x(1-x)y(1-y)z(1-z): chi -> psi
        let psi = |p: Point| {
            p[0] * (1.0 - p[0]) * p[1] * (1.0 - p[1]) * p[2] * (1.0 - p[2])
        };
        let grad_psi = |p: Point| -> Point {
            let (x, y, z) = (p[0], p[1], p[2]);
            [
                (1.0 - 2.0 * x) * y * (1.0 - y) * z * (1.0 - z),
                x * (1.0 - x) * (1.0 - 2.0 * y) * z * (1.0 - z),
                x * (1.0 - x) * y * (1.0 - y) * (1.0 - 2.0 * z),
            ]
        };
        let mut errs = Vec::new();
        for n in [2usize, 4] {
            let mesh = Arc::new(unit_cube(n).unwrap());
            let chi = solve_chi(&mesh, 2, &VecEval::Fn(&grad_psi)).unwrap();
            let e = error_norm_scalar(
                &chi,
                &ExactScalar {
                    value: &psi,
                    grad: None,
                },
                NormId::L2,
            )
            .unwrap();
            errs.push(e);
        }
        assert!(errs[1] < errs[0] / 3.0, "{errs:?}");
    }

    #[test]
    fn lifting_zero_h() {
        let mesh = Arc::new(hollow_box(1, 1).unwrap());
        let basis = compute_harmonic_basis(&mesh, 1).unwrap();
        let l = divergence_lifting(&mesh, &basis, &|_| 0.0).unwrap();
        assert!(compute_norm(&l.theta, NormId::L2).unwrap() < 1e-12);
        for c in &l.kernel_coeffs {
            assert!(c.abs() < 1e-12);
        }
    }

    #[test]
    fn lifting_constant_h_flux_accounting() {
        // h = 3 on the unit cube: total boundary flux = 3, all on Gamma_0
        let mesh = Arc::new(unit_cube(2).unwrap());
        let basis = compute_harmonic_basis(&mesh, 1).unwrap();
        let l = divergence_lifting(&mesh, &basis, &|_| 3.0).unwrap();
        assert!((l.total_flux - 3.0).abs() < 1e-10, "total {}", l.total_flux);
        assert!((l.fluxes[0] - 3.0).abs() < 1e-10);
    }

    #[test]
    fn lifting_internal_fluxes_vanish() {
        let mesh = Arc::new(hollow_box(2, 1).unwrap());
        let basis = compute_harmonic_basis(&mesh, 1).unwrap();
        let l = divergence_lifting(&mesh, &basis, &|p| p[0] + 0.5).unwrap();
        let scale = compute_norm(&l.theta, NormId::H1)
            .unwrap()
            .max(l.total_flux.abs());
        assert!(scale > 1e-3, "test needs a nondegenerate theta");
        assert!(
            l.fluxes[1].abs() <= 1e-8 * scale,
            "cavity flux {}",
            l.fluxes[1]
        );
        // total = int (x + 1/2) over the shell = shell volume (centroid at 1/2)
        let exact = mesh.volume();
        assert!((l.total_flux - exact).abs() < 1e-8 * exact.abs());
    }

    #[test]
    fn lifting_divergence_projection_converges() {
        let h = |p: Point| (PI * p[0]).sin() * p[1];
        let mut errs = Vec::new();
        for n in [2usize, 4] {
            let mesh = Arc::new(unit_cube(n).unwrap());
            let basis = compute_harmonic_basis(&mesh, 2).unwrap();
            let l = divergence_lifting(&mesh, &basis, &h).unwrap();
            let proj = lifting_div_projection(&basis, &l).unwrap();
            let e = error_norm_scalar(
                &proj,
                &ExactScalar {
                    value: &h,
                    grad: None,
                },
                NormId::L2,
            )
            .unwrap();
            errs.push(e);
        }
        assert!(errs[1] < errs[0], "projection error must shrink: {errs:?}");
    }

    #[test]
    fn pressure_constant_boundary() {
        // all data zero, p0 = 5 -> P identically 5
        let mesh = Arc::new(unit_cube(2).unwrap());
        let bc = PressureBc {
            p0: &|_| 5.0,
            constants: vec![],
        };
        let p = recover_pressure(&mesh, 1, &VecEval::Zero, None, None, None, None, &bc).unwrap();
        for v in &p.full {
            assert!((v - 5.0).abs() < 1e-9);
        }
    }

    #[test]
    fn harmonic_extension_maximum_principle() {
        let mesh = Arc::new(unit_cube(3).unwrap());
        let bc = PressureBc {
            p0: &|p: Point| p[0] - 0.3 * p[1] + 0.1,
            constants: vec![],
        };
        let p = recover_pressure(&mesh, 1, &VecEval::Zero, None, None, None, None, &bc).unwrap();
        let (lo, hi) = field_range(&p);
        // boundary data range on the cube: [0.1 - 0.3, 1.1] = [-0.2, 1.1]
        assert!(lo >= -0.2 - 1e-8 && hi <= 1.1 + 1e-8, "range [{lo}, {hi}]");
    }
}
