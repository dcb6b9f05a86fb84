//! Iterative least-squares and quasi-Newton kernels over closures.

use crate::linalg::{axpy, dot, norm2};

#[derive(Debug, Clone, PartialEq)]
pub struct KernelOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// LSQR (Paige–Saunders bidiagonalization, no damping) for
/// `min ‖A·x − b‖` from `x = 0`.
///
/// Runs at most `max_iters` iterations and stops early only on breakdown
/// or when the normal-equation residual estimate falls below
/// `rel_tol·‖A‖·‖r‖`.
pub fn lsqr<F, G>(
    rows: usize,
    cols: usize,
    mut apply: F,
    mut apply_t: G,
    b: &[f64],
    max_iters: usize,
    rel_tol: f64,
) -> KernelOutcome
where
    F: FnMut(&[f64], &mut [f64]),
    G: FnMut(&[f64], &mut [f64]),
{
    let mut x = vec![0.0; cols];
    let mut u = b.to_vec();
    let bnorm = norm2(&u);
    if bnorm == 0.0 || cols == 0 || rows == 0 {
        return KernelOutcome {
            x,
            iterations: 0,
            converged: true,
        };
    }
    u.iter_mut().for_each(|e| *e /= bnorm);
    let mut v = vec![0.0; cols];
    apply_t(&u, &mut v);
    let mut alpha = norm2(&v);
    if alpha == 0.0 {
        return KernelOutcome {
            x,
            iterations: 0,
            converged: true,
        };
    }
    v.iter_mut().for_each(|e| *e /= alpha);

    let mut w = v.clone();
    let mut phibar = bnorm;
    let mut rhobar = alpha;
    let mut anorm_sq = alpha * alpha;
    let mut tmp_u = vec![0.0; rows];
    let mut tmp_v = vec![0.0; cols];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < max_iters {
        iterations += 1;
        apply(&v, &mut tmp_u);
        for (ui, ti) in u.iter_mut().zip(&tmp_u) {
            *ui = ti - alpha * *ui;
        }
        let beta = norm2(&u);
        if beta > 0.0 {
            u.iter_mut().for_each(|e| *e /= beta);
        }
        anorm_sq += beta * beta;

        let rho = rhobar.hypot(beta);
        let c = rhobar / rho;
        let s = beta / rho;
        let phi = c * phibar;
        phibar *= s;

        if beta > 0.0 {
            apply_t(&u, &mut tmp_v);
            for (vi, ti) in v.iter_mut().zip(&tmp_v) {
                *vi = ti - beta * *vi;
            }
            alpha = norm2(&v);
            if alpha > 0.0 {
                v.iter_mut().for_each(|e| *e /= alpha);
            }
        } else {
            alpha = 0.0;
        }
        anorm_sq += alpha * alpha;

        let theta = s * alpha;
        rhobar = -c * alpha;
        axpy(phi / rho, &w, &mut x);
        for (wi, vi) in w.iter_mut().zip(&v) {
            *wi = vi - (theta / rho) * *wi;
        }

        let arnorm = phibar * alpha * c.abs();
        if beta == 0.0
            || alpha == 0.0
            || phibar <= rel_tol * bnorm
            || arnorm <= rel_tol * anorm_sq.sqrt() * phibar
        {
            converged = true;
            break;
        }
    }
    KernelOutcome {
        x,
        iterations,
        converged,
    }
}

/// CG on the normal equations (CGLS) for `min ‖A·x − b‖` from `x = 0`,
/// which yields the minimum-norm solution on rank-deficient systems.
/// Stops when `‖Aᵀr‖ ≤ tol·‖Aᵀb‖` or after `max_iters` iterations.
pub fn cgls<F, G>(
    rows: usize,
    cols: usize,
    mut apply: F,
    mut apply_t: G,
    b: &[f64],
    max_iters: usize,
    tol: f64,
) -> KernelOutcome
where
    F: FnMut(&[f64], &mut [f64]),
    G: FnMut(&[f64], &mut [f64]),
{
    let mut x = vec![0.0; cols];
    let mut r = b.to_vec();
    let mut s = vec![0.0; cols];
    apply_t(&r, &mut s);
    let mut gamma = dot(&s, &s);
    let gamma0 = gamma;
    if gamma0 == 0.0 {
        return KernelOutcome {
            x,
            iterations: 0,
            converged: true,
        };
    }
    let mut p = s.clone();
    let mut q = vec![0.0; rows];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iters {
        iterations += 1;
        apply(&p, &mut q);
        let qq = dot(&q, &q);
        if qq == 0.0 {
            converged = true;
            break;
        }
        let step = gamma / qq;
        axpy(step, &p, &mut x);
        axpy(-step, &q, &mut r);
        apply_t(&r, &mut s);
        let gamma_next = dot(&s, &s);
        if gamma_next.sqrt() <= tol * gamma0.sqrt() {
            converged = true;
            break;
        }
        let beta = gamma_next / gamma;
        gamma = gamma_next;
        for (pi, si) in p.iter_mut().zip(&s) {
            *pi = si + beta * *pi;
        }
    }
    KernelOutcome {
        x,
        iterations,
        converged,
    }
}

/// Settings for [`lbfgs`].
#[derive(Debug, Clone, Copy)]
pub struct LbfgsSettings {
    pub max_iters: usize,
    pub memory: usize,
    /// Armijo sufficient-decrease constant.
    pub armijo: f64,
    /// Stop once `‖∇f‖ ≤ grad_tol·(1 + ‖∇f(x₀)‖)`; zero disables the test.
    pub grad_tol: f64,
}

/// Limited-memory BFGS with backtracking from a unit step. `f` returns the
/// value and writes the gradient. Never accepts a step that increases `f`.
pub fn lbfgs<F>(x0: Vec<f64>, mut f: F, settings: LbfgsSettings) -> KernelOutcome
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0;
    let mut g = vec![0.0; n];
    let mut fx = f(&x, &mut g);
    let g0 = norm2(&g);
    let mut s_hist: Vec<Vec<f64>> = Vec::with_capacity(settings.memory);
    let mut y_hist: Vec<Vec<f64>> = Vec::with_capacity(settings.memory);
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = g0 == 0.0;

    while !converged && iterations < settings.max_iters {
        iterations += 1;
        // two-loop recursion
        let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
        let k = s_hist.len();
        let mut alphas = vec![0.0; k];
        for idx in (0..k).rev() {
            let rho = 1.0 / dot(&y_hist[idx], &s_hist[idx]);
            alphas[idx] = rho * dot(&s_hist[idx], &d);
            axpy(-alphas[idx], &y_hist[idx], &mut d);
        }
        if let (Some(s), Some(y)) = (s_hist.last(), y_hist.last()) {
            let scale = dot(s, y) / dot(y, y);
            d.iter_mut().for_each(|v| *v *= scale);
        }
        for idx in 0..k {
            let rho = 1.0 / dot(&y_hist[idx], &s_hist[idx]);
            let beta = rho * dot(&y_hist[idx], &d);
            axpy(alphas[idx] - beta, &s_hist[idx], &mut d);
        }
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            d = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
            s_hist.clear();
            y_hist.clear();
        }

        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            for ((xn, xi), di) in x_new.iter_mut().zip(&x).zip(&d) {
                *xn = xi + step * di;
            }
            let f_new = f(&x_new, &mut g_new);
            if f_new.is_finite() && f_new <= fx + settings.armijo * step * slope {
                let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
                let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
                if dot(&s, &y) > 1e-12 * norm2(&s) * norm2(&y) {
                    if s_hist.len() == settings.memory {
                        s_hist.remove(0);
                        y_hist.remove(0);
                    }
                    s_hist.push(s);
                    y_hist.push(y);
                }
                std::mem::swap(&mut x, &mut x_new);
                std::mem::swap(&mut g, &mut g_new);
                fx = f_new;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        if settings.grad_tol > 0.0 && norm2(&g) <= settings.grad_tol * (1.0 + g0) {
            converged = true;
        }
    }
    KernelOutcome {
        x,
        iterations,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseMatrix;

    fn system() -> (DenseMatrix, Vec<f64>) {
        let a = DenseMatrix::from_row_major(
            4,
            3,
            vec![1.0, 2.0, 0.0, 0.5, -1.0, 3.0, 2.0, 0.0, 1.0, -1.0, 1.0, 1.0],
        )
        .unwrap();
        (a, vec![1.0, -2.0, 0.5, 3.0])
    }

    // normal equations solved by Gaussian elimination
    fn normal_solution(a: &DenseMatrix, b: &[f64]) -> Vec<f64> {
        let ata = a.t_matmul(a);
        let mut rhs = a.t_matvec(b);
        let n = ata.rows();
        let mut m = ata.clone();
        for k in 0..n {
            let piv = m[(k, k)];
            for i in (k + 1)..n {
                let f = m[(i, k)] / piv;
                for j in k..n {
                    let v = m[(k, j)];
                    m[(i, j)] -= f * v;
                }
                rhs[i] -= f * rhs[k];
            }
        }
        let mut x = vec![0.0; n];
        for k in (0..n).rev() {
            let mut s = rhs[k];
            for j in (k + 1)..n {
                s -= m[(k, j)] * x[j];
            }
            x[k] = s / m[(k, k)];
        }
        x
    }

    #[test]
    fn lsqr_and_cgls_solve_small_system() {
        let (a, b) = system();
        let exact = normal_solution(&a, &b);
        let l = lsqr(
            4,
            3,
            |x, out| out.copy_from_slice(&a.matvec(x)),
            |y, out| out.copy_from_slice(&a.t_matvec(y)),
            &b,
            50,
            1e-14,
        );
        let c = cgls(
            4,
            3,
            |x, out| out.copy_from_slice(&a.matvec(x)),
            |y, out| out.copy_from_slice(&a.t_matvec(y)),
            &b,
            50,
            1e-14,
        );
        for i in 0..3 {
            assert!((l.x[i] - exact[i]).abs() < 1e-10);
            assert!((c.x[i] - exact[i]).abs() < 1e-10);
        }
        assert!(l.iterations <= 6);
    }

    #[test]
    fn lsqr_respects_cap() {
        let (a, b) = system();
        let l = lsqr(
            4,
            3,
            |x, out| out.copy_from_slice(&a.matvec(x)),
            |y, out| out.copy_from_slice(&a.t_matvec(y)),
            &b,
            1,
            1e-14,
        );
        assert_eq!(l.iterations, 1);
    }

    #[test]
    fn cgls_min_norm_on_rank_deficient() {
        // two identical columns: min-norm solution splits the weight
        let a = DenseMatrix::from_row_major(2, 2, vec![1.0, 1.0, 1.0, 1.0]).unwrap();
        let b = vec![2.0, 2.0];
        let c = cgls(
            2,
            2,
            |x, out| out.copy_from_slice(&a.matvec(x)),
            |y, out| out.copy_from_slice(&a.t_matvec(y)),
            &b,
            10,
            1e-14,
        );
        assert!((c.x[0] - 1.0).abs() < 1e-12 && (c.x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lbfgs_minimizes_quadratic() {
        let out = lbfgs(
            vec![3.0, -4.0],
            |x, g| {
                g[0] = 2.0 * (x[0] - 1.0);
                g[1] = 20.0 * (x[1] + 2.0);
                (x[0] - 1.0).powi(2) + 10.0 * (x[1] + 2.0).powi(2)
            },
            LbfgsSettings {
                max_iters: 100,
                memory: 5,
                armijo: 1e-4,
                grad_tol: 1e-12,
            },
        );
        assert!((out.x[0] - 1.0).abs() < 1e-8 && (out.x[1] + 2.0).abs() < 1e-8);
    }
}
