//! Convergence studies against the manufactured solutions, and the data
//! compatibility audit.

use super::mms::MmsCase;
use crate::error::{Error, Result};
use crate::fem::assemble::VecEval;
use crate::fem::field::Field;
use crate::fem::norms::{error_norm_scalar, error_norm_vector, ExactScalar, ExactVector, NormId};
use crate::fem::space::{build_space, BcSpec, Kind};
use crate::kernel::{compute_harmonic_basis, kernel_pairings, HarmonicBasis};
use crate::mesh::{unit_cube, Mesh};
use crate::mhd::{
    solve_elliptic_en, solve_linearized, solve_stokes_sn, LinearizedProblem, VectorData,
};
use crate::nonlinear::{picard_solve, NonlinearData, PicardOptions};
use crate::scalar_solvers::eval_l2_norm;
use serde::Serialize;
use std::collections::BTreeMap;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverId {
    Stokes,
    Elliptic,
    Linearized,
    Nonlinear,
}

impl SolverId {
    pub fn parse(s: &str) -> Result<SolverId> {
        match s {
            "stokes" => Ok(SolverId::Stokes),
            "elliptic" => Ok(SolverId::Elliptic),
            "linearized" => Ok(SolverId::Linearized),
            "nonlinear" => Ok(SolverId::Nonlinear),
            other => Err(Error::Config(format!("unknown solver '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RateRow {
    pub level: usize,
    pub h: f64,
    pub dofs: usize,
    pub errors: BTreeMap<String, f64>,
    pub failed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RateTable {
    pub case: String,
    pub solver: String,
    pub degree: usize,
    pub rows: Vec<RateRow>,
    /// Per-norm successive error ratios e_k / e_{k+1} (only defined with
    /// two or more successful levels).
    pub ratios: BTreeMap<String, Vec<f64>>,
}

impl RateTable {
    fn compute_ratios(&mut self) {
        let mut ratios: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for w in self.rows.windows(2) {
            if w[0].failed || w[1].failed {
                continue;
            }
            for (k, e0) in &w[0].errors {
                if let Some(e1) = w[1].errors.get(k) {
                    if *e1 > 0.0 {
                        ratios.entry(k.clone()).or_default().push(e0 / e1);
                    }
                }
            }
        }
        self.ratios = ratios;
    }

    pub fn min_ratio(&self, norm: &str) -> Option<f64> {
        self.ratios
            .get(norm)
            .map(|r| r.iter().copied().fold(f64::INFINITY, f64::min))
    }
}

/// Solve one level of the study and return the error columns.
fn solve_level(
    case: &MmsCase,
    solver: SolverId,
    degree: usize,
    mesh: &Arc<Mesh>,
) -> Result<(BTreeMap<String, f64>, usize)> {
    let basis = compute_harmonic_basis(mesh, 1)?;
    let mut errors = BTreeMap::new();
    let exact_u = ExactVector {
        value: &|p| case.u(p),
        grad: Some(&|p| case.grad_u(p)),
    };
    let exact_b = ExactVector {
        value: &|p| case.b(p),
        grad: Some(&|p| case.grad_b(p)),
    };
    let exact_p = ExactScalar {
        value: &|p| case.pressure(p),
        grad: Some(&|p| case.grad_p(p)),
    };
    let record_u = |errors: &mut BTreeMap<String, f64>, u: &Field| -> Result<()> {
        errors.insert("u_L2".into(), error_norm_vector(u, &exact_u, NormId::L2)?);
        errors.insert("u_H1".into(), error_norm_vector(u, &exact_u, NormId::H1)?);
        errors.insert(
            "u_L3_2".into(),
            error_norm_vector(u, &exact_u, NormId::Wmp { m: 0, p: 1.5 })?,
        );
        errors.insert(
            "u_L3".into(),
            error_norm_vector(u, &exact_u, NormId::Wmp { m: 0, p: 3.0 })?,
        );
        Ok(())
    };
    let f_stokes = |p| case.f_stokes(p);
    let f_mhd = |p| case.f_mhd(p);
    let g_ell = |p| case.g_elliptic(p);
    let g_mhd = |p| case.g_mhd(p);
    let h = |p| case.h(p);
    let p0 = |p| case.p0(p);
    let dofs;
    match solver {
        SolverId::Stokes => {
            let f = VectorData::from_volume(VecEval::Fn(&f_stokes));
            let sol = solve_stokes_sn(
                mesh,
                &basis,
                degree,
                &f,
                case.nonzero_div.then_some(&h as &dyn Fn(_) -> f64),
                Some(&p0),
            )?;
            record_u(&mut errors, &sol.u)?;
            errors.insert(
                "p_L2".into(),
                error_norm_scalar(&sol.p, &exact_p, NormId::L2)?,
            );
            errors.insert(
                "p_mult_L2".into(),
                error_norm_scalar(&sol.p_multiplier, &exact_p, NormId::L2)?,
            );
            dofs = sol.report.n_unknowns;
        }
        SolverId::Elliptic => {
            let g = VectorData::from_volume(VecEval::Fn(&g_ell));
            let sol = solve_elliptic_en(mesh, &basis, degree, &g, true)?;
            errors.insert(
                "b_L2".into(),
                error_norm_vector(&sol.b, &exact_b, NormId::L2)?,
            );
            errors.insert(
                "b_H1".into(),
                error_norm_vector(&sol.b, &exact_b, NormId::H1)?,
            );
            errors.insert(
                "b_L3".into(),
                error_norm_vector(&sol.b, &exact_b, NormId::Wmp { m: 0, p: 3.0 })?,
            );
            dofs = sol.report.n_unknowns;
        }
        SolverId::Linearized => {
            let space = Arc::new(build_space(mesh, Kind::Vector, degree, BcSpec::None)?);
            let w = Field::interpolate_vector(&space, |p| case.u(p));
            let d = Field::interpolate_vector(&space, |p| case.b(p));
            let mut prob = LinearizedProblem::new(mesh, &basis, degree);
            prob.w = Some(&w);
            prob.d = Some(&d);
            prob.f = VectorData::from_volume(VecEval::Fn(&f_mhd));
            prob.g = VectorData::from_volume(VecEval::Fn(&g_mhd));
            prob.h = case.nonzero_div.then_some(&h as &dyn Fn(_) -> f64);
            prob.p0 = Some(&p0);
            let sol = solve_linearized(&prob)?;
            record_u(&mut errors, &sol.u)?;
            errors.insert(
                "b_L2".into(),
                error_norm_vector(&sol.b, &exact_b, NormId::L2)?,
            );
            errors.insert(
                "p_L2".into(),
                error_norm_scalar(&sol.p, &exact_p, NormId::L2)?,
            );
            errors.insert(
                "p_mult_L2".into(),
                error_norm_scalar(&sol.p_multiplier, &exact_p, NormId::L2)?,
            );
            dofs = sol.report.n_unknowns;
        }
        SolverId::Nonlinear => {
            if case.nonzero_div {
                return Err(Error::Config(
                    "the nonlinear solver requires h = 0 (stream-cube case)".into(),
                ));
            }
            let data = NonlinearData {
                f: VectorData::from_volume(VecEval::Fn(&f_mhd)),
                g: VectorData::from_volume(VecEval::Fn(&g_mhd)),
                p0: Some(&p0),
                h: None,
            };
            let sol = picard_solve(mesh, &basis, degree, &data, &PicardOptions::default())?;
            record_u(&mut errors, &sol.u)?;
            errors.insert(
                "b_L2".into(),
                error_norm_vector(&sol.b, &exact_b, NormId::L2)?,
            );
            errors.insert(
                "p_L2".into(),
                error_norm_scalar(&sol.p, &exact_p, NormId::L2)?,
            );
            dofs = sol.report.final_solve.n_unknowns;
        }
    }
    Ok((errors, dofs))
}

/// Run uniform refinements (cube:base, cube:2*base, ...) and tabulate the
/// error norms; a diverged nonlinear level marks the row failed rather
/// than aborting the table.
pub fn convergence_study(
    case: &MmsCase,
    solver: SolverId,
    degree: usize,
    levels: usize,
    base_n: usize,
) -> Result<RateTable> {
    if levels < 2 {
        return Err(Error::Config("a rate table needs at least 2 levels".into()));
    }
    let mut table = RateTable {
        case: case.name.to_string(),
        solver: format!("{solver:?}").to_lowercase(),
        degree,
        rows: Vec::new(),
        ratios: BTreeMap::new(),
    };
    for level in 0..levels {
        let n = base_n << level;
        let mesh = Arc::new(unit_cube(n)?);
        let h = mesh.max_diameter();
        match solve_level(case, solver, degree, &mesh) {
            Ok((errors, dofs)) => table.rows.push(RateRow {
                level,
                h,
                dofs,
                errors,
                failed: false,
            }),
            Err(e) => {
                if solver == SolverId::Nonlinear {
                    log::warn!("nonlinear level {level} failed: {e}");
                    table.rows.push(RateRow {
                        level,
                        h,
                        dofs: 0,
                        errors: BTreeMap::new(),
                        failed: true,
                    });
                } else {
                    return Err(e);
                }
            }
        }
    }
    table.compute_ratios();
    Ok(table)
}

#[derive(Debug, Clone, Serialize)]
pub struct CompatAudit {
    pub chi_l2: f64,
    pub chi_relative: f64,
    pub kernel_pairings: Vec<f64>,
    pub pairings_relative: Vec<f64>,
    pub pass: bool,
    pub threshold: f64,
}

/// Audit the compatibility of magnetic data g: reports the chi norm (via
/// the Dirichlet solve), the kernel pairings and a pass/fail against the
/// threshold (default 1e-6 relative). Always returns.
pub fn compat_audit(
    mesh: &Arc<Mesh>,
    basis: &HarmonicBasis,
    g_volume: &VecEval,
    g_curl: &VecEval,
    threshold: Option<f64>,
) -> CompatAudit {
    let threshold = threshold.unwrap_or(1e-6);
    let chi = crate::scalar_solvers::solve_chi(mesh, basis.space.degree.max(1), g_volume)
        .map(|c| crate::fem::norms::compute_norm(&c, NormId::L2).unwrap_or(f64::NAN))
        .unwrap_or(f64::NAN);
    let scale = (eval_l2_norm(mesh, g_volume) + eval_l2_norm(mesh, g_curl)).max(1e-30);
    let pairings = kernel_pairings(basis, g_volume, g_curl).unwrap_or_default();
    let energies: Vec<f64> = (0..basis.dim())
        .map(|i| basis.boundary_constants[i][i + 1].abs().max(1e-30))
        .collect();
    let pair_rel: Vec<f64> = pairings
        .iter()
        .zip(&energies)
        .map(|(p, e)| p.abs() / (e.sqrt() * scale))
        .collect();
    let chi_rel = chi / scale;
    let pass = chi_rel <= threshold && pair_rel.iter().all(|r| *r <= threshold);
    CompatAudit {
        chi_l2: chi,
        chi_relative: chi_rel,
        kernel_pairings: pairings,
        pairings_relative: pair_rel,
        pass,
        threshold,
    }
}
