//! The linearized coupled system (velocity, magnetic field, pressure and
//! divergence multipliers, flux multipliers), its special cases (the Stokes
//! problem and the curl-curl elliptic problem), and the dual system.
//!
//! The velocity trial/test space is enriched by the broken gradients of the
//! degree-1 harmonic kernel basis. The enrichment test rows make the flux
//! multipliers literally equal to the pressure constants: the i-th row
//! reads  c_i = <f, grad q_i> - <P0 - h, grad q_i . n> - ((curl w) x u,
//! grad q_i) + ((curl b) x d, grad q_i),  so the multiplier/quadrature
//! cross-check is an identity up to solver roundoff.
//!
//! With the coupling signs flipped, the same assembly produces the dual
//! system; the dual matrix equals the transpose of the primal one after
//! flipping the sign of the divergence-multiplier rows and columns.

use crate::error::{Error, Result};
use crate::fem::assemble::{
    convection, coupling, coupling_kernel_row, curlcurl, div_coupling, divdiv,
    pressure_stabilization, rhs_scalar_volume, rhs_vector_curl_source, rhs_vector_source,
    VecEval,
};
use crate::fem::field::Field;
use crate::fem::norms::{compute_norm, NormId};
use crate::fem::shape::TetGeom;
use crate::fem::space::{boundary_pn_functional, build_space, BcSpec, ConstrainedSpace, Kind};
use crate::kernel::{boundary_pairing_split, kernel_pairings, pairing_vectors, HarmonicBasis};
use crate::mesh::{Mesh, Point};
use crate::quadrature::tet_rule;
use crate::scalar_solvers::{recover_pressure, solve_chi, PressureBc};
use crate::solver::solve_general;
use crate::sparse::SparseMatrix;
use serde::Serialize;
use std::ops::Range;
use std::sync::Arc;

/// Brezzi-Pitkaranta stabilization weight for equal-order (degree 1) runs.
pub const STAB_DELTA: f64 = 0.05;
/// Relative tolerance of the multiplier-vs-formula constants cross-check.
pub const CONSTANTS_TOL: f64 = 1e-6;

/// Data functional f = F + curl psi.
#[derive(Default)]
pub struct VectorData<'a> {
    pub volume: Option<VecEval<'a>>,
    pub curl_part: Option<VecEval<'a>>,
}

impl<'a> VectorData<'a> {
    pub fn from_volume(v: VecEval<'a>) -> Self {
        VectorData {
            volume: Some(v),
            curl_part: None,
        }
    }
    fn vol(&self) -> &VecEval<'a> {
        self.volume.as_ref().unwrap_or(&VecEval::Zero)
    }
    fn curl(&self) -> &VecEval<'a> {
        self.curl_part.as_ref().unwrap_or(&VecEval::Zero)
    }
    pub fn is_zero(&self) -> bool {
        matches!(self.volume, None | Some(VecEval::Zero))
            && matches!(self.curl_part, None | Some(VecEval::Zero))
    }
}

/// Block layout of the coupled unknown vector
/// [u, gamma_u, b, gamma_b, p, chi, c, beta]. The gamma blocks hold the
/// kernel-enrichment coefficients; their equation rows are the kernel-
/// gradient tests, which pin the flux multipliers to the paper's constants.
#[derive(Debug, Clone, Copy)]
pub struct BlockLayout {
    pub nu: usize,
    pub ni: usize,
    pub nb: usize,
    /// Kernel enrichment of the magnetic block (ni when b is present).
    pub nib: usize,
    pub np: usize,
    pub nchi: usize,
}

impl BlockLayout {
    pub fn u(&self) -> Range<usize> {
        0..self.nu
    }
    pub fn gamma(&self) -> Range<usize> {
        self.nu..self.nu + self.ni
    }
    pub fn b(&self) -> Range<usize> {
        let o = self.nu + self.ni;
        o..o + self.nb
    }
    pub fn gamma_b(&self) -> Range<usize> {
        let o = self.nu + self.ni + self.nb;
        o..o + self.nib
    }
    pub fn p(&self) -> Range<usize> {
        let o = self.gamma_b().end;
        o..o + self.np
    }
    pub fn chi(&self) -> Range<usize> {
        let o = self.p().end;
        o..o + self.nchi
    }
    pub fn c(&self) -> Range<usize> {
        let o = self.chi().end;
        o..o + self.ni
    }
    pub fn beta(&self) -> Range<usize> {
        let o = self.c().end;
        o..o + self.nib
    }
    pub fn total(&self) -> usize {
        self.beta().end
    }
}

pub struct CoupledSystem {
    pub matrix: SparseMatrix,
    pub layout: BlockLayout,
    pub u_space: Arc<ConstrainedSpace>,
    pub p_space: Arc<ConstrainedSpace>,
    pub chi_space: Option<Arc<ConstrainedSpace>>,
}

pub struct CoupledConfig<'a> {
    pub mesh: &'a Arc<Mesh>,
    pub basis: &'a HarmonicBasis,
    pub degree: usize,
    pub w: Option<&'a Field>,
    pub d: Option<&'a Field>,
    pub include_b: bool,
    /// Flip the coupling signs (adjoint system).
    pub dual: bool,
}

/// Assemble the coupled block matrix.
pub fn assemble_coupled(cfg: &CoupledConfig) -> Result<CoupledSystem> {
    let mesh = cfg.mesh;
    let basis = cfg.basis;
    let i_comp = basis.dim();
    if i_comp > 0 && basis.degree != 1 {
        return Err(Error::SolveFailure(
            "coupled solvers need the degree-1 kernel basis".into(),
        ));
    }
    if i_comp != mesh.n_internal_components() {
        return Err(Error::MeshMismatch);
    }
    let u_space = Arc::new(build_space(
        mesh,
        Kind::Vector,
        cfg.degree,
        BcSpec::TangentialZeroWithFlux,
    )?);
    let p_space = Arc::new(build_space(mesh, Kind::Scalar, 1, BcSpec::None)?);
    let chi_space = if cfg.include_b {
        Some(Arc::new(build_space(
            mesh,
            Kind::Scalar,
            1,
            BcSpec::Dirichlet(None),
        )?))
    } else {
        None
    };
    let layout = BlockLayout {
        nu: u_space.n_free,
        ni: i_comp,
        nb: if cfg.include_b { u_space.n_free } else { 0 },
        nib: if cfg.include_b { i_comp } else { 0 },
        np: p_space.n_free,
        nchi: chi_space.as_ref().map(|s| s.n_free).unwrap_or(0),
    };
    let s = if cfg.dual { -1.0 } else { 1.0 };

    // principal blocks
    let a_full = {
        let k = curlcurl(&u_space);
        let d = divdiv(&u_space);
        let mut t: Vec<(usize, usize, f64)> = k.iter().collect();
        t.extend(d.iter());
        SparseMatrix::from_triplets(u_space.n_full(), u_space.n_full(), t)
    };
    let a_red = u_space.reduce_mat(&a_full, &u_space);
    let n_red = cfg
        .w
        .map(|w| u_space.reduce_mat(&convection(&u_space, w), &u_space));
    let c_red = cfg
        .d
        .map(|d| u_space.reduce_mat(&coupling(&u_space, d), &u_space));
    let b_p = p_space.reduce_mat(&div_coupling(&p_space, &u_space), &u_space);
    let b_chi = chi_space
        .as_ref()
        .map(|cs| cs.reduce_mat(&div_coupling(cs, &u_space), &u_space));
    let stab_p = if cfg.degree == 1 {
        Some(p_space.reduce_mat(&pressure_stabilization(&p_space, STAB_DELTA), &p_space))
    } else {
        None
    };
    let stab_chi = match (&chi_space, cfg.degree) {
        (Some(cs), 1) => Some(cs.reduce_mat(&pressure_stabilization(cs, STAB_DELTA), cs)),
        _ => None,
    };
    let fl = u_space.flux_rows_free();

    // kernel-enrichment couplings
    let nw_cols: Vec<Vec<f64>> = match cfg.w {
        Some(w) if i_comp > 0 => (0..i_comp)
            .map(|m| {
                u_space.reduce_vec(&rhs_vector_source(
                    &u_space,
                    &VecEval::CrossCurlGrad(w, &basis.q[m]),
                ))
            })
            .collect(),
        _ => Vec::new(),
    };
    let nw_ee: Vec<Vec<f64>> = match cfg.w {
        Some(w) if i_comp > 0 => (0..i_comp)
            .map(|m| {
                kernel_pairings(basis, &VecEval::CrossCurlGrad(w, &basis.q[m]), &VecEval::Zero)
                    .expect("kernel pairing")
            })
            .collect(),
        _ => Vec::new(),
    };
    let c_rows: Vec<Vec<f64>> = match cfg.d {
        Some(d) if i_comp > 0 => (0..i_comp)
            .map(|j| u_space.reduce_vec(&coupling_kernel_row(&u_space, d, &basis.q[j])))
            .collect(),
        _ => Vec::new(),
    };

    let mut t: Vec<(usize, usize, f64)> = Vec::new();
    let push_block =
        |t: &mut Vec<(usize, usize, f64)>, m: &SparseMatrix, ro: usize, co: usize, scale: f64| {
            for (r, c, v) in m.iter() {
                t.push((ro + r, co + c, scale * v));
            }
        };
    let ur = layout.u().start;
    let gr = layout.gamma().start;
    let br = layout.b().start;
    let gbr = layout.gamma_b().start;
    let pr = layout.p().start;
    let xr = layout.chi().start;
    let cr = layout.c().start;
    let er = layout.beta().start;

    // (u, u)
    push_block(&mut t, &a_red, ur, ur, 1.0);
    if let Some(n) = &n_red {
        push_block(&mut t, n, ur, ur, s);
    }
    // enrichment columns/rows of the convection block
    for (m, col) in nw_cols.iter().enumerate() {
        for (r, v) in col.iter().enumerate() {
            if *v != 0.0 {
                t.push((ur + r, gr + m, s * v)); // (v-row, gamma)
                t.push((gr + m, ur + r, -s * v)); // (gamma-row, u): antisymmetry
            }
        }
    }
    // nw_ee[m][j] = int (curl w x grad q_m) . grad q_j sits at (row j, col m)
    for (m, row) in nw_ee.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            if *v != 0.0 {
                t.push((gr + j, gr + m, s * v));
            }
        }
    }
    if cfg.include_b {
        // (u-row, b): -s C; (b-row, u): s C^T
        if let Some(c) = &c_red {
            push_block(&mut t, c, ur, br, -s);
            for (r, cc, v) in c.iter() {
                t.push((br + cc, ur + r, s * v));
            }
        }
        // (gamma_j-row, b): -s c_row_j; (b-row, gamma_m): s c_row_m
        for (j, row) in c_rows.iter().enumerate() {
            for (cc, v) in row.iter().enumerate() {
                if *v != 0.0 {
                    t.push((gr + j, br + cc, -s * v));
                    t.push((br + cc, gr + j, s * v));
                }
            }
        }
        // (b, b)
        push_block(&mut t, &a_red, br, br, 1.0);
        // (b-row, chi): -B_chi^T; (chi-row, b): B_chi
        if let Some(bx) = &b_chi {
            for (r, c, v) in bx.iter() {
                t.push((br + c, xr + r, -v));
                t.push((xr + r, br + c, v));
            }
        }
        if let Some(sx) = &stab_chi {
            // +S in this sign convention: the Schur complement becomes
            // B A^{-1} B^T + delta S, uniformly definite
            push_block(&mut t, sx, xr, xr, 1.0);
        }
        // (b-row, beta): fl^T; (flux_b-row, b): fl
        for (k, row) in fl.iter().enumerate() {
            for &(c, v) in row {
                t.push((br + c, er + k, v));
                t.push((er + k, br + c, v));
            }
        }
        // magnetic kernel enrichment: (gamma_b_j-row, beta_k) and
        // (flux_b_k-row, gamma_b_j) carry the variational fluxes
        for j in 0..i_comp {
            for k in 0..i_comp {
                let v = basis.flux_matrix[j][k];
                if v != 0.0 {
                    t.push((gbr + j, er + k, v));
                    t.push((er + k, gbr + j, v));
                }
            }
        }
    }
    // (u-row, p): -B_p^T; (p-row, u): B_p
    for (r, c, v) in b_p.iter() {
        t.push((ur + c, pr + r, -v));
        t.push((pr + r, ur + c, v));
    }
    if let Some(sp) = &stab_p {
        push_block(&mut t, sp, pr, pr, 1.0);
    }
    // (u-row, c): fl^T; (flux_u-row, u): fl
    for (k, row) in fl.iter().enumerate() {
        for &(c, v) in row {
            t.push((ur + c, cr + k, v));
            t.push((cr + k, ur + c, v));
        }
    }
    // (gamma_j-row, c_k) and (flux_u_k-row, gamma_j): the variational flux
    // of the enrichment, F[j][k] ~ delta_jk
    for j in 0..i_comp {
        for k in 0..i_comp {
            let v = basis.flux_matrix[j][k];
            if v != 0.0 {
                t.push((gr + j, cr + k, v));
                t.push((cr + k, gr + j, v));
            }
        }
    }
    let n = layout.total();
    Ok(CoupledSystem {
        matrix: SparseMatrix::from_triplets(n, n, t),
        layout,
        u_space,
        p_space,
        chi_space,
    })
}

/// Right-hand-side data of the coupled system.
pub struct CoupledData<'a> {
    pub f: &'a VectorData<'a>,
    pub g: &'a VectorData<'a>,
    /// Velocity divergence datum.
    pub h: Option<&'a dyn Fn(Point) -> f64>,
    /// Boundary pressure datum paired as -(p0 - h)|_Gamma with v.n.
    pub p0: Option<&'a dyn Fn(Point) -> f64>,
    /// Subtract grad chi from g (the augmented magnetic equation).
    pub chi: Option<&'a Field>,
    /// Kernel projection coefficients already applied to g.
    pub g_projection: Option<&'a [f64]>,
}

pub fn assemble_rhs(sys: &CoupledSystem, basis: &HarmonicBasis, data: &CoupledData) -> Vec<f64> {
    let layout = &sys.layout;
    let u_space = &sys.u_space;
    let mut rhs = vec![0.0; layout.total()];
    // v-rows: <f, v> - int_Gamma (p0 - h) v.n
    let mut fv = rhs_vector_source(u_space, data.f.vol());
    let fc = rhs_vector_curl_source(u_space, data.f.curl());
    for (a, b) in fv.iter_mut().zip(&fc) {
        *a += b;
    }
    let boundary_s = |x: Point| -> f64 {
        let p = data.p0.map(|f| f(x)).unwrap_or(0.0);
        let h = data.h.map(|f| f(x)).unwrap_or(0.0);
        p - h
    };
    if data.p0.is_some() || data.h.is_some() {
        let bn = boundary_pn_functional(u_space, &boundary_s).expect("boundary functional");
        for (a, b) in fv.iter_mut().zip(&bn) {
            *a -= b;
        }
    }
    let fv_red = u_space.reduce_vec(&fv);
    rhs[layout.u()].copy_from_slice(&fv_red);
    // enrichment rows: <f, grad q_j> - <(p0 - h), grad q_j . n>
    for j in 0..layout.ni {
        let pair = kernel_pairings(basis, data.f.vol(), data.f.curl()).expect("pairing")[j];
        let bpair = if data.p0.is_some() || data.h.is_some() {
            boundary_pairing_split(basis, j, &boundary_s)
        } else {
            0.0
        };
        rhs[layout.gamma().start + j] = pair - bpair;
    }
    // b-rows: <g, Psi> - (grad chi, Psi) - sum beta_proj_i (grad q_i, Psi)
    if layout.nb > 0 {
        let mut gv = rhs_vector_source(u_space, data.g.vol());
        let gc = rhs_vector_curl_source(u_space, data.g.curl());
        for (a, b) in gv.iter_mut().zip(&gc) {
            *a += b;
        }
        if let Some(chi) = data.chi {
            let gx = rhs_vector_source(u_space, &VecEval::GradOfScalar(chi));
            for (a, b) in gv.iter_mut().zip(&gx) {
                *a -= b;
            }
        }
        if let Some(beta) = data.g_projection {
            let pv = pairing_vectors(basis, u_space);
            for (i, bi) in beta.iter().enumerate() {
                for (a, b) in gv.iter_mut().zip(&pv[i]) {
                    *a -= bi * b;
                }
            }
        }
        let gv_red = u_space.reduce_vec(&gv);
        rhs[layout.b()].copy_from_slice(&gv_red);
        // magnetic enrichment rows: <g', grad q_j>; the grad-chi correction
        // pairs to zero exactly (chi has zero trace, q_j is discrete
        // harmonic), so only the kernel projection shifts the pairing
        if layout.nib > 0 {
            let pair = kernel_pairings(basis, data.g.vol(), data.g.curl()).expect("pairing");
            let gram = basis.gram();
            for j in 0..layout.nib {
                let mut v = pair[j];
                if let Some(beta) = data.g_projection {
                    for (i, bi) in beta.iter().enumerate() {
                        v -= gram[j][i] * bi;
                    }
                }
                rhs[layout.gamma_b().start + j] = v;
            }
        }
    }
    // p-rows: (q, h)
    if let Some(h) = data.h {
        let hv = sys.p_space.reduce_vec(&rhs_scalar_volume(&sys.p_space, h));
        rhs[layout.p()].copy_from_slice(&hv);
    }
    rhs
}

/// Solver bookkeeping attached to every coupled solve.
#[derive(Debug, Clone, Serialize, Default)]
pub struct SolveReport {
    pub n_unknowns: usize,
    pub residual: f64,
    pub c_multiplier: Vec<f64>,
    pub c_formula: Vec<f64>,
    pub beta_multiplier: Vec<f64>,
    pub kernel_pairings_before: Vec<f64>,
    pub kernel_pairings_after: Vec<f64>,
    pub chi_l2: f64,
    pub div_u_l2: f64,
    pub div_b_l2: f64,
    pub flux_u: Vec<f64>,
    pub flux_b: Vec<f64>,
    pub u_kernel_coeffs: Vec<f64>,
}

pub struct LinearizedSolution {
    pub u: Field,
    /// Coefficients of the kernel enrichment of u (empty when I = 0).
    pub u_kernel: Vec<f64>,
    pub b: Field,
    pub b_kernel: Vec<f64>,
    /// Decoupled pressure (P1 + P2 splitting).
    pub p: Field,
    /// Pressure multiplier of the mixed solve.
    pub p_multiplier: Field,
    /// The Dirichlet field of Delta chi = div g (paper's construction).
    pub chi: Field,
    /// Divergence multiplier of the magnetic block (internal object).
    pub chi_multiplier: Option<Field>,
    pub c: Vec<f64>,
    pub beta: Vec<f64>,
    pub report: SolveReport,
}

pub struct LinearizedProblem<'a> {
    pub mesh: &'a Arc<Mesh>,
    pub basis: &'a HarmonicBasis,
    pub degree: usize,
    pub w: Option<&'a Field>,
    pub d: Option<&'a Field>,
    pub f: VectorData<'a>,
    pub g: VectorData<'a>,
    pub h: Option<&'a dyn Fn(Point) -> f64>,
    pub p0: Option<&'a dyn Fn(Point) -> f64>,
    /// Remove the kernel component of g (compatibility enforcement).
    pub project_g: bool,
    /// Fail with IncompatibleData when projection is disabled and the
    /// pairings exceed this relative threshold.
    pub incompat_threshold: f64,
}

impl<'a> LinearizedProblem<'a> {
    pub fn new(mesh: &'a Arc<Mesh>, basis: &'a HarmonicBasis, degree: usize) -> Self {
        LinearizedProblem {
            mesh,
            basis,
            degree,
            w: None,
            d: None,
            f: VectorData::default(),
            g: VectorData::default(),
            h: None,
            p0: None,
            project_g: true,
            incompat_threshold: 1e-6,
        }
    }
}

/// Scale for relative comparisons of kernel pairings: the energy of the
/// first kernel field, or 1 on simply connected domains.
fn pairing_scale(basis: &HarmonicBasis) -> f64 {
    basis
        .boundary_constants
        .first()
        .map(|t| t[1].abs())
        .unwrap_or(1.0)
        .max(1e-30)
}

/// Solve the linearized MHD system (one monolithic nonsymmetric solve).
pub fn solve_linearized(problem: &LinearizedProblem) -> Result<LinearizedSolution> {
    let basis = problem.basis;
    // chi from the Dirichlet problem Delta chi = div g; g' = g - grad chi
    let chi = solve_chi(problem.mesh, problem.degree, problem.g.vol())?;
    let chi_l2 = compute_norm(&chi, NormId::L2)?;
    // kernel compatibility of g
    let pair_before = kernel_pairings(basis, problem.g.vol(), problem.g.curl())?;
    let scale = pairing_scale(basis);
    let g_projection: Option<Vec<f64>> = if basis.dim() > 0 {
        if problem.project_g {
            let gram = basis.gram();
            let gm = nalgebra::DMatrix::from_fn(basis.dim(), basis.dim(), |i, j| gram[i][j]);
            let rhs = nalgebra::DVector::from_vec(pair_before.clone());
            let beta = gm.lu().solve(&rhs).ok_or(Error::SingularGram)?;
            Some(beta.iter().copied().collect())
        } else {
            let worst = pair_before.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if worst > problem.incompat_threshold * scale {
                return Err(Error::IncompatibleData {
                    pairings: pair_before,
                });
            }
            None
        }
    } else {
        None
    };
    let cfg = CoupledConfig {
        mesh: problem.mesh,
        basis,
        degree: problem.degree,
        w: problem.w,
        d: problem.d,
        include_b: true,
        dual: false,
    };
    let sys = assemble_coupled(&cfg)?;
    let data = CoupledData {
        f: &problem.f,
        g: &problem.g,
        h: problem.h,
        p0: problem.p0,
        chi: Some(&chi),
        g_projection: g_projection.as_deref(),
    };
    let rhs = assemble_rhs(&sys, basis, &data);
    let x = solve_general(&sys.matrix, &rhs)
        .map_err(|e| Error::SolveFailure(format!("linearized solve: {e}")))?;
    let residual = relative_residual(&sys.matrix, &x, &rhs);
    extract_solution(
        problem,
        &sys,
        basis,
        &x,
        residual,
        chi,
        chi_l2,
        pair_before,
        g_projection,
    )
}

fn relative_residual(m: &SparseMatrix, x: &[f64], rhs: &[f64]) -> f64 {
    let ax = m.matvec(x);
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..rhs.len() {
        let r = rhs[i] - ax[i];
        num += r * r;
        den += rhs[i] * rhs[i];
    }
    (num / den.max(1e-300)).sqrt()
}

#[allow(clippy::too_many_arguments)]
fn extract_solution(
    problem: &LinearizedProblem,
    sys: &CoupledSystem,
    basis: &HarmonicBasis,
    x: &[f64],
    residual: f64,
    chi: Field,
    chi_l2: f64,
    pair_before: Vec<f64>,
    g_projection: Option<Vec<f64>>,
) -> Result<LinearizedSolution> {
    let layout = &sys.layout;
    let u = Field::from_free(&sys.u_space, &x[layout.u()]);
    let gamma: Vec<f64> = x[layout.gamma()].to_vec();
    let b = Field::from_free(&sys.u_space, &x[layout.b()]);
    let gamma_b: Vec<f64> = x[layout.gamma_b()].to_vec();
    let p_mult = Field::from_free(&sys.p_space, &x[layout.p()]);
    let chi_mult = sys
        .chi_space
        .as_ref()
        .map(|cs| Field::from_free(cs, &x[layout.chi()]));
    let c: Vec<f64> = x[layout.c()].to_vec();
    let beta: Vec<f64> = x[layout.beta()].to_vec();

    // cross-check the constants against the quadrature formula
    let c_formula = constants_formula(problem, basis, &u, &gamma, &b)?;
    let cscale = c_formula
        .iter()
        .chain(c.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(pairing_scale(basis) * 1e-6);
    for i in 0..c.len() {
        if (c[i] - c_formula[i]).abs() > 10.0 * CONSTANTS_TOL * cscale {
            return Err(Error::ConstantsMismatch {
                index: i + 1,
                multiplier: c[i],
                formula: c_formula[i],
            });
        }
    }

    // decoupled pressure: P = P1 + P2 with the solved constants
    let bc = PressureBc {
        p0: problem.p0.unwrap_or(&|_| 0.0),
        constants: c.clone(),
    };
    let p = recover_pressure(
        problem.mesh,
        problem.degree.min(2),
        problem.f.vol(),
        Some(&u),
        Some(&b),
        problem.w,
        problem.d,
        &bc,
    )?;

    let pair_after: Vec<f64> = match &g_projection {
        Some(beta_p) => {
            let gram = basis.gram();
            (0..basis.dim())
                .map(|j| {
                    pair_before[j]
                        - (0..basis.dim()).map(|i| gram[j][i] * beta_p[i]).sum::<f64>()
                })
                .collect()
        }
        None => pair_before.clone(),
    };

    let report = SolveReport {
        n_unknowns: layout.total(),
        residual,
        c_multiplier: c.clone(),
        c_formula,
        beta_multiplier: beta.clone(),
        kernel_pairings_before: pair_before,
        kernel_pairings_after: pair_after,
        chi_l2,
        div_u_l2: div_l2(&u),
        div_b_l2: div_l2(&b),
        flux_u: total_fluxes(&sys.u_space, &u, Some((basis, &gamma))),
        flux_b: total_fluxes(&sys.u_space, &b, Some((basis, &gamma_b))),
        u_kernel_coeffs: gamma.clone(),
    };
    Ok(LinearizedSolution {
        u,
        u_kernel: gamma,
        b,
        b_kernel: gamma_b,
        p,
        p_multiplier: p_mult,
        chi,
        chi_multiplier: chi_mult,
        c,
        beta,
        report,
    })
}

/// Quadrature of the constants formula
/// c_i = <f, grad q_i> - <(p0 - h), grad q_i . n>
///       - ((curl w) x u*, grad q_i) + ((curl b) x d, grad q_i).
pub fn constants_formula(
    problem: &LinearizedProblem,
    basis: &HarmonicBasis,
    u: &Field,
    gamma: &[f64],
    b: &Field,
) -> Result<Vec<f64>> {
    let i_comp = basis.dim();
    if i_comp == 0 {
        return Ok(Vec::new());
    }
    let fpair = kernel_pairings(basis, problem.f.vol(), problem.f.curl())?;
    let boundary_s = |x: Point| -> f64 {
        let p = problem.p0.map(|f| f(x)).unwrap_or(0.0);
        let h = problem.h.map(|f| f(x)).unwrap_or(0.0);
        p - h
    };
    let mut out = vec![0.0; i_comp];
    for i in 0..i_comp {
        let mut val = fpair[i];
        if problem.p0.is_some() || problem.h.is_some() {
            val -= boundary_pairing_split(basis, i, &boundary_s);
        }
        if let Some(w) = problem.w {
            // ((curl w) x u*, grad q_i) with u* = u + sum gamma_m grad q_m
            let mut terms = vec![(1.0, VecEval::CrossCurl(w, u))];
            for (m, g) in gamma.iter().enumerate() {
                terms.push((*g, VecEval::CrossCurlGrad(w, &basis.q[m])));
            }
            let conv = kernel_pairings(basis, &VecEval::Sum(terms), &VecEval::Zero)?;
            val -= conv[i];
        }
        if let Some(d) = problem.d {
            let cpl = kernel_pairings(basis, &VecEval::CrossCurl(b, d), &VecEval::Zero)?;
            val += cpl[i];
        }
        out[i] = val;
    }
    Ok(out)
}

fn div_l2(f: &Field) -> f64 {
    let mesh = &f.space.mesh;
    let rule = tet_rule(2 * f.space.degree + 2).expect("quadrature");
    let mut acc = 0.0;
    for e in 0..mesh.tets.len() {
        let geom = TetGeom::new(mesh, e);
        let scale = 6.0 * geom.volume;
        for (q, w) in rule.weights.iter().enumerate() {
            let d = f.div(&geom, e, rule.points[q]);
            acc += w * scale * d * d;
        }
    }
    acc.sqrt()
}

/// Fluxes of the (possibly enriched) field through each internal component.
fn total_fluxes(
    space: &ConstrainedSpace,
    f: &Field,
    kernel: Option<(&HarmonicBasis, &[f64])>,
) -> Vec<f64> {
    let rows = space.flux_rows_free();
    let free = f.free();
    rows.iter()
        .enumerate()
        .map(|(k, row)| {
            let mut v: f64 = row.iter().map(|&(i, w)| w * free[i]).sum();
            if let Some((basis, gamma)) = kernel {
                for (m, g) in gamma.iter().enumerate() {
                    v += g * basis.flux_matrix[m][k];
                }
            }
            v
        })
        .collect()
}

pub struct StokesSolution {
    pub u: Field,
    pub u_kernel: Vec<f64>,
    pub p: Field,
    pub p_multiplier: Field,
    pub c: Vec<f64>,
    pub report: SolveReport,
}

/// The Stokes problem S_N: curl curl u + grad-div with div u = h imposed by
/// a multiplier, essential u x n = 0, flux rows with multipliers c_i.
pub fn solve_stokes_sn(
    mesh: &Arc<Mesh>,
    basis: &HarmonicBasis,
    degree: usize,
    f: &VectorData,
    h: Option<&dyn Fn(Point) -> f64>,
    p0: Option<&dyn Fn(Point) -> f64>,
) -> Result<StokesSolution> {
    let cfg = CoupledConfig {
        mesh,
        basis,
        degree,
        w: None,
        d: None,
        include_b: false,
        dual: false,
    };
    let sys = assemble_coupled(&cfg)?;
    let g = VectorData::default();
    let data = CoupledData {
        f,
        g: &g,
        h,
        p0,
        chi: None,
        g_projection: None,
    };
    let rhs = assemble_rhs(&sys, basis, &data);
    let x = solve_general(&sys.matrix, &rhs)
        .map_err(|e| Error::SolveFailure(format!("stokes solve: {e}")))?;
    let layout = &sys.layout;
    let u = Field::from_free(&sys.u_space, &x[layout.u()]);
    let gamma: Vec<f64> = x[layout.gamma()].to_vec();
    let p_mult = Field::from_free(&sys.p_space, &x[layout.p()]);
    let c: Vec<f64> = x[layout.c()].to_vec();
    // formula: c_i = <f, grad q_i> + int_Gamma (h - p0) grad q_i . n
    let dummy = LinearizedProblem {
        mesh,
        basis,
        degree,
        w: None,
        d: None,
        f: VectorData {
            volume: f.volume.as_ref().map(clone_eval_ref),
            curl_part: f.curl_part.as_ref().map(clone_eval_ref),
        },
        g: VectorData::default(),
        h,
        p0,
        project_g: false,
        incompat_threshold: 1e-6,
    };
    let c_formula = constants_formula(&dummy, basis, &u, &gamma, &u)?;
    let cscale = c_formula
        .iter()
        .chain(c.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(pairing_scale(basis) * 1e-6);
    for i in 0..c.len() {
        if (c[i] - c_formula[i]).abs() > 10.0 * CONSTANTS_TOL * cscale {
            return Err(Error::ConstantsMismatch {
                index: i + 1,
                multiplier: c[i],
                formula: c_formula[i],
            });
        }
    }
    let bc = PressureBc {
        p0: p0.unwrap_or(&|_| 0.0),
        constants: c.clone(),
    };
    let p = recover_pressure(
        mesh,
        degree.min(2),
        f.vol(),
        None,
        None,
        None,
        None,
        &bc,
    )?;
    let report = SolveReport {
        n_unknowns: layout.total(),
        c_multiplier: c.clone(),
        c_formula,
        div_u_l2: div_l2(&u),
        flux_u: total_fluxes(&sys.u_space, &u, Some((basis, &gamma))),
        u_kernel_coeffs: gamma.clone(),
        ..Default::default()
    };
    Ok(StokesSolution {
        u,
        u_kernel: gamma,
        p,
        p_multiplier: p_mult,
        c,
        report,
    })
}

fn clone_eval_ref<'a>(e: &VecEval<'a>) -> VecEval<'a> {
    match e {
        VecEval::Zero => VecEval::Zero,
        VecEval::Fn(f) => VecEval::Fn(*f),
        VecEval::Fld(f) => VecEval::Fld(f),
        VecEval::GradOfScalar(f) => VecEval::GradOfScalar(f),
        VecEval::CurlOf(f) => VecEval::CurlOf(f),
        VecEval::CrossCurl(a, b) => VecEval::CrossCurl(a, b),
        VecEval::CrossCurlGrad(a, q) => VecEval::CrossCurlGrad(a, q),
        VecEval::Sum(v) => VecEval::Sum(v.iter().map(|(c, t)| (*c, clone_eval_ref(t))).collect()),
    }
}

pub struct EllipticSolution {
    pub b: Field,
    pub chi: Field,
    pub chi_multiplier: Field,
    pub beta: Vec<f64>,
    pub report: SolveReport,
}

/// The elliptic problem E_N: curl curl b with div b = 0 by multiplier and
/// the flux rows; compatibility of g enforced by kernel projection (or
/// verified when projection is disabled).
pub fn solve_elliptic_en(
    mesh: &Arc<Mesh>,
    basis: &HarmonicBasis,
    degree: usize,
    g: &VectorData,
    project_g: bool,
) -> Result<EllipticSolution> {
    let b_space = Arc::new(build_space(
        mesh,
        Kind::Vector,
        degree,
        BcSpec::TangentialZeroWithFlux,
    )?);
    let chi_space = Arc::new(build_space(mesh, Kind::Scalar, 1, BcSpec::Dirichlet(None))?);
    let chi = solve_chi(mesh, degree, g.vol())?;
    let chi_l2 = compute_norm(&chi, NormId::L2)?;
    let pair_before = kernel_pairings(basis, g.vol(), g.curl())?;
    let scale = pairing_scale(basis);
    let g_projection: Option<Vec<f64>> = if basis.dim() > 0 {
        if project_g {
            let gram = basis.gram();
            let gm = nalgebra::DMatrix::from_fn(basis.dim(), basis.dim(), |i, j| gram[i][j]);
            let rhs = nalgebra::DVector::from_vec(pair_before.clone());
            Some(
                gm.lu()
                    .solve(&rhs)
                    .ok_or(Error::SingularGram)?
                    .iter()
                    .copied()
                    .collect(),
            )
        } else {
            let worst = pair_before.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if worst > 1e-6 * scale {
                return Err(Error::IncompatibleData {
                    pairings: pair_before,
                });
            }
            None
        }
    } else {
        None
    };

    let a_full = {
        let k = curlcurl(&b_space);
        let dd = divdiv(&b_space);
        let mut t: Vec<(usize, usize, f64)> = k.iter().collect();
        t.extend(dd.iter());
        SparseMatrix::from_triplets(b_space.n_full(), b_space.n_full(), t)
    };
    let a_red = b_space.reduce_mat(&a_full, &b_space);
    let b_chi = chi_space.reduce_mat(&div_coupling(&chi_space, &b_space), &b_space);
    let fl = b_space.flux_rows_free();
    let nb = b_space.n_free;
    let nchi = chi_space.n_free;
    let ni = fl.len();
    let n = nb + nchi + ni;
    let mut t: Vec<(usize, usize, f64)> = a_red.iter().collect();
    for (r, c, v) in b_chi.iter() {
        t.push((c, nb + r, -v));
        t.push((nb + r, c, v));
    }
    if degree == 1 {
        let sx = chi_space.reduce_mat(&pressure_stabilization(&chi_space, STAB_DELTA), &chi_space);
        for (r, c, v) in sx.iter() {
            t.push((nb + r, nb + c, v));
        }
    }
    for (k, row) in fl.iter().enumerate() {
        for &(c, v) in row {
            t.push((c, nb + nchi + k, v));
            t.push((nb + nchi + k, c, v));
        }
    }
    let mat = SparseMatrix::from_triplets(n, n, t);
    let mut gv = rhs_vector_source(&b_space, g.vol());
    let gc = rhs_vector_curl_source(&b_space, g.curl());
    for (a, b) in gv.iter_mut().zip(&gc) {
        *a += b;
    }
    let gx = rhs_vector_source(&b_space, &VecEval::GradOfScalar(&chi));
    for (a, b) in gv.iter_mut().zip(&gx) {
        *a -= b;
    }
    if let Some(beta_p) = &g_projection {
        let pv = pairing_vectors(basis, &b_space);
        for (i, bi) in beta_p.iter().enumerate() {
            for (a, b) in gv.iter_mut().zip(&pv[i]) {
                *a -= bi * b;
            }
        }
    }
    let mut rhs = b_space.reduce_vec(&gv);
    rhs.resize(n, 0.0);
    let x = solve_general(&mat, &rhs)
        .map_err(|e| Error::SolveFailure(format!("elliptic solve: {e}")))?;
    let b = Field::from_free(&b_space, &x[..nb]);
    let chi_mult = Field::from_free(&chi_space, &x[nb..nb + nchi]);
    let beta: Vec<f64> = x[nb + nchi..].to_vec();
    let pair_after = match &g_projection {
        Some(beta_p) => {
            let gram = basis.gram();
            (0..basis.dim())
                .map(|j| {
                    pair_before[j]
                        - (0..basis.dim()).map(|i| gram[j][i] * beta_p[i]).sum::<f64>()
                })
                .collect()
        }
        None => pair_before.clone(),
    };
    let report = SolveReport {
        n_unknowns: n,
        beta_multiplier: beta.clone(),
        kernel_pairings_before: pair_before,
        kernel_pairings_after: pair_after,
        chi_l2,
        div_b_l2: div_l2(&b),
        flux_b: total_fluxes(&b_space, &b, None),
        ..Default::default()
    };
    Ok(EllipticSolution {
        b,
        chi,
        chi_multiplier: chi_mult,
        beta,
        report,
    })
}

pub struct DualSolution {
    pub v: Field,
    pub v_kernel: Vec<f64>,
    pub a: Field,
    pub a_kernel: Vec<f64>,
    /// Pressure-role multiplier, trace 0 on Gamma_0 and beta_i on Gamma_i.
    pub theta: Field,
    /// Divergence multiplier on the magnetic block.
    pub tau: Field,
    /// The constants beta_i (flux-row multipliers of the v-block).
    pub beta: Vec<f64>,
    pub report: SolveReport,
}

/// The dual (adjoint-signed) system: convective sign flipped on the
/// v-equation, coupling sign flipped on the a-equation; data (F, G, phi)
/// with div v = phi.
pub fn solve_dual(
    mesh: &Arc<Mesh>,
    basis: &HarmonicBasis,
    degree: usize,
    w: Option<&Field>,
    d: Option<&Field>,
    f_data: &VectorData,
    g_data: &VectorData,
    phi: Option<&dyn Fn(Point) -> f64>,
) -> Result<DualSolution> {
    let cfg = CoupledConfig {
        mesh,
        basis,
        degree,
        w,
        d,
        include_b: true,
        dual: true,
    };
    let sys = assemble_coupled(&cfg)?;
    // the dual divergence datum is phi with zero boundary pressure data:
    // h = phi gives the p-rows (q, phi) and the boundary term
    // -(0 - phi) v.n = +phi v.n, matching the theta = 0 on Gamma_0 side
    let data = CoupledData {
        f: f_data,
        g: g_data,
        h: phi,
        p0: None,
        chi: None,
        g_projection: None,
    };
    let rhs = assemble_rhs(&sys, basis, &data);
    let x = solve_general(&sys.matrix, &rhs)
        .map_err(|e| Error::SolveFailure(format!("dual solve: {e}")))?;
    let layout = &sys.layout;
    let v = Field::from_free(&sys.u_space, &x[layout.u()]);
    let v_kernel: Vec<f64> = x[layout.gamma()].to_vec();
    let a = Field::from_free(&sys.u_space, &x[layout.b()]);
    let a_kernel: Vec<f64> = x[layout.gamma_b()].to_vec();
    let theta = Field::from_free(&sys.p_space, &x[layout.p()]);
    let tau = sys
        .chi_space
        .as_ref()
        .map(|cs| Field::from_free(cs, &x[layout.chi()]))
        .expect("dual includes the magnetic block");
    let beta: Vec<f64> = x[layout.c()].to_vec();
    let report = SolveReport {
        n_unknowns: layout.total(),
        c_multiplier: beta.clone(),
        div_u_l2: div_l2(&v),
        div_b_l2: div_l2(&a),
        flux_u: total_fluxes(&sys.u_space, &v, Some((basis, &v_kernel))),
        flux_b: total_fluxes(&sys.u_space, &a, Some((basis, &a_kernel))),
        u_kernel_coeffs: v_kernel.clone(),
        ..Default::default()
    };
    Ok(DualSolution {
        v,
        v_kernel,
        a,
        a_kernel,
        theta,
        tau,
        beta,
        report,
    })
}

/// The documented transpose relation: D = S P^T S where S flips the sign
/// of the divergence-multiplier slots (p and chi). Returns the worst
/// entrywise deviation |D - S P^T S| (same layout required).
pub fn dual_transpose_deviation(primal: &CoupledSystem, dual: &CoupledSystem) -> f64 {
    let layout = &primal.layout;
    let sign = |i: usize| -> f64 {
        if layout.p().contains(&i) || layout.chi().contains(&i) {
            -1.0
        } else {
            1.0
        }
    };
    let pt = primal.matrix.transpose();
    let mut worst = 0.0f64;
    for (r, c, v) in dual.matrix.iter() {
        let want = sign(r) * pt.get(r, c) * sign(c);
        worst = worst.max((v - want).abs());
    }
    for (r, c, v) in pt.iter() {
        let want = sign(r) * v * sign(c);
        worst = worst.max((dual.matrix.get(r, c) - want).abs());
    }
    worst
}
