//! Direct and iterative linear solvers, and eigenvalue estimation.
//!
//! Direct sparse factorization (faer) is the default below
//! [`DIRECT_THRESHOLD`] unknowns; above it, SPD systems fall back to
//! Jacobi-preconditioned CG and general systems to ILU(0)-preconditioned
//! restarted GMRES. Every solve recomputes its residual with the local CSR
//! matvec, independent of the factorization backend.

use crate::error::{Error, Result};
use crate::sparse::{axpy, dot, norm2, SaddleSystem, SparseMatrix};
use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};

pub const DIRECT_THRESHOLD: usize = 50_000;
const SPD_TOL: f64 = 1e-10;
const GENERAL_TOL: f64 = 1e-8;

fn to_faer(a: &SparseMatrix) -> Result<SparseColMat<usize, f64>> {
    let triplets: Vec<Triplet<usize, usize, f64>> = a
        .iter()
        .map(|(r, c, v)| Triplet::new(r, c, v))
        .collect();
    SparseColMat::try_new_from_triplets(a.n_rows, a.n_cols, &triplets)
        .map_err(|e| Error::SolveFailure(format!("sparse conversion failed: {e:?}")))
}

/// A reusable sparse LU factorization.
pub struct Factorization {
    n: usize,
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
}

impl Factorization {
    pub fn new(a: &SparseMatrix) -> Result<Self> {
        if a.n_rows != a.n_cols {
            return Err(Error::SolveFailure("LU needs a square matrix".into()));
        }
        let f = to_faer(a)?;
        let lu = f.sp_lu().map_err(|_| Error::SingularMatrix)?;
        Ok(Factorization { n: a.n_rows, lu })
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let b = faer::Mat::from_fn(self.n, 1, |i, _| rhs[i]);
        let x = self.lu.solve(&b);
        (0..self.n).map(|i| x[(i, 0)]).collect()
    }

    /// Solve with iterative refinement against `a` until the relative
    /// residual (computed with the local matvec) is below `tol`.
    pub fn solve_refined(&self, a: &SparseMatrix, rhs: &[f64], tol: f64) -> Result<Vec<f64>> {
        let mut x = self.solve(rhs);
        let scale = norm2(rhs).max(1e-300);
        for _ in 0..4 {
            let mut r = rhs.to_vec();
            axpy(&mut r, -1.0, &a.matvec(&x));
            if norm2(&r) / scale <= tol {
                return Ok(x);
            }
            let dx = self.solve(&r);
            axpy(&mut x, 1.0, &dx);
        }
        let mut r = rhs.to_vec();
        axpy(&mut r, -1.0, &a.matvec(&x));
        let res = norm2(&r) / scale;
        if res <= tol {
            Ok(x)
        } else {
            Err(Error::NotConverged {
                what: "sparse LU with iterative refinement".into(),
                residual: res,
                iterations: 4,
            })
        }
    }
}

/// Solve a symmetric positive definite system to relative residual 1e-10.
pub fn solve_spd(a: &SparseMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    if a.n_rows != a.n_cols || rhs.len() != a.n_rows {
        return Err(Error::SolveFailure("solve_spd dimension mismatch".into()));
    }
    if a.asymmetry() > 1e-12 {
        return Err(Error::SolveFailure(
            "solve_spd called on a matrix that is not symmetric to 1e-12".into(),
        ));
    }
    if a.n_rows > DIRECT_THRESHOLD {
        return pcg(a, rhs, SPD_TOL, 10 * a.n_rows);
    }
    let f = to_faer(a)?;
    let chol = f
        .sp_cholesky(faer::Side::Lower)
        .map_err(|_| Error::IndefiniteMatrix)?;
    let scale = norm2(rhs).max(1e-300);
    let solve_once = |b: &[f64]| -> Vec<f64> {
        let m = faer::Mat::from_fn(a.n_rows, 1, |i, _| b[i]);
        let x = chol.solve(&m);
        (0..a.n_rows).map(|i| x[(i, 0)]).collect()
    };
    let mut x = solve_once(rhs);
    for _ in 0..4 {
        let mut r = rhs.to_vec();
        axpy(&mut r, -1.0, &a.matvec(&x));
        if norm2(&r) / scale <= SPD_TOL {
            break;
        }
        let dx = solve_once(&r);
        axpy(&mut x, 1.0, &dx);
    }
    let mut r = rhs.to_vec();
    axpy(&mut r, -1.0, &a.matvec(&x));
    let res = norm2(&r) / scale;
    verify_residual(a, &x, rhs, res)?;
    if res <= SPD_TOL {
        Ok(x)
    } else {
        Err(Error::NotConverged {
            what: "sparse Cholesky".into(),
            residual: res,
            iterations: 1,
        })
    }
}

/// Solve a general nonsingular system to relative residual 1e-8.
pub fn solve_general(a: &SparseMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    if a.n_rows != a.n_cols || rhs.len() != a.n_rows {
        return Err(Error::SolveFailure(
            "solve_general dimension mismatch".into(),
        ));
    }
    if a.n_rows > DIRECT_THRESHOLD {
        return gmres_ilu0(a, rhs, GENERAL_TOL, 80, 40);
    }
    let fact = Factorization::new(a)?;
    let x = fact.solve_refined(a, rhs, GENERAL_TOL)?;
    let mut r = rhs.to_vec();
    axpy(&mut r, -1.0, &a.matvec(&x));
    verify_residual(a, &x, rhs, norm2(&r) / norm2(rhs).max(1e-300))?;
    Ok(x)
}

/// Post-hoc residual verification: the reported residual must match an
/// independent recomputation within a factor of 10.
fn verify_residual(a: &SparseMatrix, x: &[f64], rhs: &[f64], claimed: f64) -> Result<()> {
    let mut r = rhs.to_vec();
    for i in 0..a.n_rows {
        let mut s = 0.0;
        for k in a.row_ptr[i]..a.row_ptr[i + 1] {
            s += a.values[k] * x[a.col_idx[k]];
        }
        r[i] -= s;
    }
    let recomputed = norm2(&r) / norm2(rhs).max(1e-300);
    // claims at roundoff level are floored; the guard targets stale
    // bookkeeping, not machine-epsilon noise
    if recomputed > 10.0 * claimed.max(1e-14) {
        return Err(Error::SolveFailure(format!(
            "stale residual bookkeeping: claimed {claimed:.3e}, recomputed {recomputed:.3e}"
        )));
    }
    Ok(())
}

/// Monolithic KKT solve of [A B^T; B 0] [x; y] = [f; g].
pub fn solve_saddle(sys: &SaddleSystem) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = sys.a.n_rows;
    let m = sys.b.n_rows;
    if m == 0 {
        let x = solve_spd(&sys.a, &sys.f).or_else(|_| solve_general(&sys.a, &sys.f))?;
        return Ok((x, Vec::new()));
    }
    let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(sys.a.nnz() + 2 * sys.b.nnz());
    for (r, c, v) in sys.a.iter() {
        triplets.push((r, c, v));
    }
    for (r, c, v) in sys.b.iter() {
        triplets.push((n + r, c, v));
        triplets.push((c, n + r, v));
    }
    let kkt = SparseMatrix::from_triplets(n + m, n + m, triplets);
    let mut rhs = sys.f.clone();
    rhs.extend_from_slice(&sys.g);
    let xy = match solve_general(&kkt, &rhs) {
        Ok(v) => v,
        Err(Error::SingularMatrix) => return Err(Error::RankDeficientConstraints),
        Err(e) => return Err(e),
    };
    Ok((xy[..n].to_vec(), xy[n..].to_vec()))
}

/// Jacobi-preconditioned conjugate gradients.
pub fn pcg(a: &SparseMatrix, rhs: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let n = a.n_rows;
    let diag: Vec<f64> = (0..n)
        .map(|i| {
            let d = a.get(i, i);
            if d.abs() > 0.0 {
                1.0 / d
            } else {
                1.0
            }
        })
        .collect();
    let scale = norm2(rhs).max(1e-300);
    let mut x = vec![0.0; n];
    let mut r = rhs.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for _ in 0..max_iter {
        if norm2(&r) / scale <= tol {
            verify_residual(a, &x, rhs, norm2(&r) / scale)?;
            return Ok(x);
        }
        let ap = a.matvec(&p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::IndefiniteMatrix);
        }
        let alpha = rz / pap;
        axpy(&mut x, alpha, &p);
        axpy(&mut r, -alpha, &ap);
        z = r.iter().zip(&diag).map(|(ri, di)| ri * di).collect();
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NotConverged {
        what: "preconditioned CG".into(),
        residual: norm2(&r) / scale,
        iterations: max_iter,
    })
}

struct Ilu0 {
    mat: SparseMatrix,
    diag_pos: Vec<usize>,
}

impl Ilu0 {
    fn new(a: &SparseMatrix) -> Result<Self> {
        let mut mat = a.clone();
        let n = mat.n_rows;
        let mut diag_pos = vec![usize::MAX; n];
        for r in 0..n {
            for k in mat.row_ptr[r]..mat.row_ptr[r + 1] {
                if mat.col_idx[k] == r {
                    diag_pos[r] = k;
                }
            }
            if diag_pos[r] == usize::MAX {
                return Err(Error::SolveFailure("ILU(0) needs a full diagonal".into()));
            }
        }
        for i in 1..n {
            let (lo, hi) = (mat.row_ptr[i], mat.row_ptr[i + 1]);
            for kk in lo..hi {
                let k = mat.col_idx[kk];
                if k >= i {
                    break;
                }
                let pivot = mat.values[diag_pos[k]];
                if pivot.abs() < 1e-300 {
                    return Err(Error::SolveFailure("ILU(0) zero pivot".into()));
                }
                let factor = mat.values[kk] / pivot;
                mat.values[kk] = factor;
                // subtract factor * row k (upper part) within row i pattern
                for jj in (diag_pos[k] + 1)..mat.row_ptr[k + 1] {
                    let j = mat.col_idx[jj];
                    if let Ok(pos) = mat.col_idx[lo..hi].binary_search(&j) {
                        mat.values[lo + pos] -= factor * mat.values[jj];
                    }
                }
            }
        }
        Ok(Ilu0 { mat, diag_pos })
    }

    fn apply(&self, b: &[f64]) -> Vec<f64> {
        let n = self.mat.n_rows;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in self.mat.row_ptr[i]..self.mat.row_ptr[i + 1] {
                let j = self.mat.col_idx[k];
                if j >= i {
                    break;
                }
                s -= self.mat.values[k] * y[j];
            }
            y[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (self.diag_pos[i] + 1)..self.mat.row_ptr[i + 1] {
                s -= self.mat.values[k] * y[self.mat.col_idx[k]];
            }
            y[i] = s / self.mat.values[self.diag_pos[i]];
        }
        y
    }
}

/// Restarted GMRES with ILU(0) right preconditioning.
pub fn gmres_ilu0(
    a: &SparseMatrix,
    rhs: &[f64],
    tol: f64,
    restart: usize,
    max_outer: usize,
) -> Result<Vec<f64>> {
    let n = a.n_rows;
    let prec = Ilu0::new(a)?;
    let scale = norm2(rhs).max(1e-300);
    let mut x = vec![0.0; n];
    for _ in 0..max_outer {
        let mut r = rhs.to_vec();
        axpy(&mut r, -1.0, &a.matvec(&x));
        let beta = norm2(&r);
        if beta / scale <= tol {
            verify_residual(a, &x, rhs, beta / scale)?;
            return Ok(x);
        }
        let m = restart;
        let mut v: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        v.push(r.iter().map(|ri| ri / beta).collect());
        let mut h = vec![vec![0.0f64; m]; m + 1];
        let mut cs = vec![0.0f64; m];
        let mut sn = vec![0.0f64; m];
        let mut g = vec![0.0f64; m + 1];
        g[0] = beta;
        let mut cols = 0;
        for j in 0..m {
            cols = j + 1;
            let zj = prec.apply(&v[j]);
            let mut w = a.matvec(&zj);
            for i in 0..=j {
                h[i][j] = dot(&w, &v[i]);
                axpy(&mut w, -h[i][j], &v[i]);
            }
            h[j + 1][j] = norm2(&w);
            if h[j + 1][j] > 1e-14 * beta {
                v.push(w.iter().map(|wi| wi / h[j + 1][j]).collect());
            } else {
                v.push(vec![0.0; n]);
            }
            // apply accumulated Givens rotations
            for i in 0..j {
                let t = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
                h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = t;
            }
            let denom = (h[j][j] * h[j][j] + h[j + 1][j] * h[j + 1][j]).sqrt();
            if denom < 1e-300 {
                break;
            }
            cs[j] = h[j][j] / denom;
            sn[j] = h[j + 1][j] / denom;
            h[j][j] = denom;
            h[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            if g[j + 1].abs() / scale <= tol {
                break;
            }
        }
        // back substitution
        let k = cols;
        let mut y = vec![0.0f64; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in (i + 1)..k {
                s -= h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        let mut update = vec![0.0; n];
        for j in 0..k {
            axpy(&mut update, y[j], &v[j]);
        }
        let z = prec.apply(&update);
        axpy(&mut x, 1.0, &z);
    }
    let mut r = rhs.to_vec();
    axpy(&mut r, -1.0, &a.matvec(&x));
    Err(Error::NotConverged {
        what: "GMRES/ILU0".into(),
        residual: norm2(&r) / scale,
        iterations: max_outer,
    })
}

/// Smallest eigenvalue of A x = lambda M x for SPD A, M by inverse
/// iteration with Rayleigh quotients; relative eigenvalue tolerance 1e-6.
pub fn smallest_generalized_eig(a: &SparseMatrix, m: &SparseMatrix) -> Result<(f64, Vec<f64>)> {
    smallest_generalized_eig_constrained(a, m, &[])
}

/// Same, restricted to the subspace { x : C x = 0 } given by sparse
/// constraint rows. Each inverse-iteration step solves the KKT system.
pub fn smallest_generalized_eig_constrained(
    a: &SparseMatrix,
    m: &SparseMatrix,
    constraints: &[Vec<(usize, f64)>],
) -> Result<(f64, Vec<f64>)> {
    let n = a.n_rows;
    // vacuous constraints (no entries on the free dofs) hold automatically
    // and would make the KKT singular
    let constraints: Vec<&Vec<(usize, f64)>> =
        constraints.iter().filter(|r| !r.is_empty()).collect();
    let nc = constraints.len();
    let mut triplets: Vec<(usize, usize, f64)> = a.iter().collect();
    for (i, row) in constraints.iter().enumerate() {
        for &(c, v) in row.iter() {
            triplets.push((n + i, c, v));
            triplets.push((c, n + i, v));
        }
    }
    let kkt = SparseMatrix::from_triplets(n + nc, n + nc, triplets);
    let fact = Factorization::new(&kkt)?;
    let mut x = vec![0.0f64; n];
    // deterministic pseudo-random start to avoid orthogonality accidents
    let mut state = 0x9e3779b97f4a7c15u64;
    for xi in x.iter_mut() {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        *xi = ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5;
    }
    // project onto constraints once via one KKT solve of [M x; 0]
    let mut rho_old = f64::INFINITY;
    let mut rho = 0.0;
    for it in 0..1000 {
        let mx = m.matvec(&x);
        let mut rhs = mx.clone();
        rhs.resize(n + nc, 0.0);
        let xy = fact.solve(&rhs);
        let mut y = xy[..n].to_vec();
        let my = m.matvec(&y);
        let nrm = dot(&y, &my).sqrt();
        if !(nrm > 0.0) {
            return Err(Error::NotConverged {
                what: "inverse iteration".into(),
                residual: f64::NAN,
                iterations: it,
            });
        }
        for yi in y.iter_mut() {
            *yi /= nrm;
        }
        let ay = a.matvec(&y);
        let my = m.matvec(&y);
        rho = dot(&y, &ay) / dot(&y, &my);
        x = y;
        if (rho - rho_old).abs() <= 1e-6 * rho.abs() {
            return Ok((rho, x));
        }
        rho_old = rho;
    }
    Err(Error::NotConverged {
        what: "inverse iteration".into(),
        residual: (rho - rho_old).abs() / rho.abs(),
        iterations: 1000,
    })
}

/// Largest eigenvalue of A x = lambda M x (A symmetric positive
/// semidefinite, M SPD) by power iteration on M^{-1} A.
pub fn largest_generalized_eig(a: &SparseMatrix, m: &SparseMatrix) -> Result<f64> {
    let fact = Factorization::new(m)?;
    let n = a.n_rows;
    let mut x = vec![0.0f64; n];
    let mut state = 0x2545f4914f6cdd1du64;
    for xi in x.iter_mut() {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        *xi = ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5;
    }
    let mut rho_old = f64::INFINITY;
    let mut rho = 0.0;
    let mut delta = f64::INFINITY;
    // relative eigenvalue tolerance 1e-6; the top of the spectrum may be
    // clustered, so the Rayleigh quotient is the quantity that must settle
    for _ in 0..5000 {
        let ax = a.matvec(&x);
        let y = fact.solve(&ax);
        let my = m.matvec(&y);
        let nrm = dot(&y, &my).sqrt().max(1e-300);
        x = y.iter().map(|v| v / nrm).collect();
        let ax = a.matvec(&x);
        let mx = m.matvec(&x);
        rho = dot(&x, &ax) / dot(&x, &mx);
        delta = (rho - rho_old).abs();
        if delta <= 1e-6 * rho.abs().max(1e-30) {
            return Ok(rho);
        }
        rho_old = rho;
    }
    Err(Error::NotConverged {
        what: "power iteration".into(),
        residual: delta / rho.abs().max(1e-30),
        iterations: 5000,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize) -> SparseMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        SparseMatrix::from_triplets(n, n, t)
    }

    #[test]
    fn spd_identity() {
        let a = SparseMatrix::from_triplets(3, 3, vec![(0, 0, 1.0), (1, 1, 1.0), (2, 2, 1.0)]);
        let x = solve_spd(&a, &[1.0, -2.0, 3.0]).unwrap();
        assert_eq!(x, vec![1.0, -2.0, 3.0]);
    }

    #[test]
    fn spd_2x2_hand() {
        let a = SparseMatrix::from_triplets(
            2,
            2,
            vec![(0, 0, 2.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 2.0)],
        );
        let x = solve_spd(&a, &[1.0, 1.0]).unwrap();
        assert!((x[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((x[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn general_2x2_hand() {
        let a = SparseMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (0, 1, 2.0), (1, 1, 1.0)]);
        let x = solve_general(&a, &[3.0, 1.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn singular_matrix_detected() {
        let a = SparseMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (1, 0, 1.0)]);
        assert!(solve_general(&a, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn saddle_hand_kkt() {
        // A = I2, B = [1, 1], f = (1,1), g = 0 -> x = (0,0), lambda = 1
        let a = SparseMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (1, 1, 1.0)]);
        let b = SparseMatrix::from_triplets(1, 2, vec![(0, 0, 1.0), (0, 1, 1.0)]);
        let sys = SaddleSystem::new(a, b, vec![1.0, 1.0], vec![0.0]).unwrap();
        let (x, y) = solve_saddle(&sys).unwrap();
        assert!(x[0].abs() < 1e-12 && x[1].abs() < 1e-12);
        assert!((y[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn saddle_no_constraints() {
        let a = SparseMatrix::from_triplets(2, 2, vec![(0, 0, 2.0), (1, 1, 4.0)]);
        let b = SparseMatrix::zeros(0, 2);
        let sys = SaddleSystem::new(a, b, vec![2.0, 4.0], vec![]).unwrap();
        let (x, y) = solve_saddle(&sys).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
        assert!(y.is_empty());
    }

    #[test]
    fn saddle_random_vs_dense_kkt() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 30;
        let m = 3;
        // random SPD: D + R^T R scaled
        let mut dense = nalgebra::DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                dense[(i, j)] = rng.random_range(-0.3..0.3);
            }
        }
        let spd = &dense * dense.transpose() + nalgebra::DMatrix::identity(n, n) * 3.0;
        let mut at = Vec::new();
        for i in 0..n {
            for j in 0..n {
                at.push((i, j, spd[(i, j)]));
            }
        }
        let a = SparseMatrix::from_triplets(n, n, at);
        let mut bt = Vec::new();
        let mut bd = nalgebra::DMatrix::<f64>::zeros(m, n);
        for i in 0..m {
            for j in 0..n {
                let v = rng.random_range(-1.0..1.0);
                bt.push((i, j, v));
                bd[(i, j)] = v;
            }
        }
        let b = SparseMatrix::from_triplets(m, n, bt);
        let f: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let sys = SaddleSystem::new(a, b, f.clone(), g.clone()).unwrap();
        let (x, y) = solve_saddle(&sys).unwrap();
        // dense KKT oracle
        let nn = n + m;
        let mut kkt = nalgebra::DMatrix::<f64>::zeros(nn, nn);
        kkt.view_mut((0, 0), (n, n)).copy_from(&spd);
        kkt.view_mut((n, 0), (m, n)).copy_from(&bd);
        kkt.view_mut((0, n), (n, m)).copy_from(&bd.transpose());
        let mut rhs = nalgebra::DVector::<f64>::zeros(nn);
        for i in 0..n {
            rhs[i] = f[i];
        }
        for i in 0..m {
            rhs[n + i] = g[i];
        }
        let sol = kkt.lu().solve(&rhs).unwrap();
        for i in 0..n {
            assert!((x[i] - sol[i]).abs() < 1e-9, "primal {i}");
        }
        for i in 0..m {
            assert!((y[i] - sol[n + i]).abs() < 1e-9, "mult {i}");
        }
    }

    #[test]
    fn eig_identity_pair() {
        let a = tridiag(8);
        let (l, _) = smallest_generalized_eig(&a, &a).unwrap();
        assert!((l - 1.0).abs() < 1e-8);
    }

    #[test]
    fn eig_diag_vs_identity() {
        let a = SparseMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (1, 1, 4.0)]);
        let m = SparseMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (1, 1, 1.0)]);
        let (l, _) = smallest_generalized_eig(&a, &m).unwrap();
        assert!((l - 1.0).abs() < 1e-6);
    }

    #[test]
    fn gmres_matches_lu() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let n = 60;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 4.0 + rng.random_range(0.0..1.0)));
            if i + 1 < n {
                t.push((i, i + 1, rng.random_range(-1.0..1.0)));
                t.push((i + 1, i, rng.random_range(-1.0..1.0)));
            }
        }
        let a = SparseMatrix::from_triplets(n, n, t);
        let rhs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x1 = solve_general(&a, &rhs).unwrap();
        let x2 = gmres_ilu0(&a, &rhs, 1e-10, 30, 50).unwrap();
        for i in 0..n {
            assert!((x1[i] - x2[i]).abs() < 1e-7);
        }
    }

    #[test]
    fn pcg_matches_direct() {
        let a = tridiag(50);
        let rhs: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
        let x1 = solve_spd(&a, &rhs).unwrap();
        let x2 = pcg(&a, &rhs, 1e-12, 5000).unwrap();
        for i in 0..50 {
            assert!((x1[i] - x2[i]).abs() < 1e-8);
        }
    }
}
