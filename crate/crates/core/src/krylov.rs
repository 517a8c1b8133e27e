//! Matrix-free Krylov solvers on flat `f64` slices.
//!
//! Operators and preconditioners are closures `(input, output)`. Norms are
//! plain Euclidean; tolerances are relative to `||b||`, so the uniform
//! `h^dim` weight of the grid inner product cancels.

/// Outcome of a Krylov solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovReport {
    pub iterations: usize,
    /// `||b - A x|| / ||b||`, recomputed from the returned iterate.
    pub relative_residual: f64,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn remove_mean(v: &mut [f64]) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= m);
}

fn true_residual(op: &mut impl FnMut(&[f64], &mut [f64]), b: &[f64], x: &[f64], r: &mut [f64]) {
    op(x, r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
}

/// Preconditioned conjugate gradients for a symmetric positive
/// (semi)definite operator. With `mean_zero` set, iterates and residuals are
/// projected onto the mean-zero subspace after every update, which is the
/// right space for singular Neumann operators.
pub fn pcg(
    mut op: impl FnMut(&[f64], &mut [f64]),
    mut precond: impl FnMut(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    rel_tol: f64,
    max_iters: usize,
    mean_zero: bool,
) -> KrylovReport {
    let n = b.len();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return KrylovReport { iterations: 0, relative_residual: 0.0, converged: true };
    }
    if mean_zero {
        remove_mean(x);
    }
    let mut r = vec![0.0; n];
    true_residual(&mut op, b, x, &mut r);
    if mean_zero {
        remove_mean(&mut r);
    }
    let mut z = vec![0.0; n];
    let mut q = vec![0.0; n];
    precond(&r, &mut z);
    if mean_zero {
        remove_mean(&mut z);
    }
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut iterations = 0;
    let mut rnorm = norm(&r);
    while rnorm > rel_tol * bnorm && iterations < max_iters {
        iterations += 1;
        op(&p, &mut q);
        let pq = dot(&p, &q);
        if !(pq > 0.0) {
            break;
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        if mean_zero {
            remove_mean(x);
            remove_mean(&mut r);
        }
        rnorm = norm(&r);
        if rnorm <= rel_tol * bnorm {
            break;
        }
        precond(&r, &mut z);
        if mean_zero {
            remove_mean(&mut z);
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    true_residual(&mut op, b, x, &mut r);
    if mean_zero {
        remove_mean(&mut r);
    }
    let relative_residual = norm(&r) / bnorm;
    // the recursive residual may drift below the true one; allow a small margin
    KrylovReport { iterations, relative_residual, converged: relative_residual <= 10.0 * rel_tol }
}

/// Restarted GMRES with right preconditioning. The residual it minimizes is
/// the true (unpreconditioned) one.
pub fn gmres(
    mut op: impl FnMut(&[f64], &mut [f64]),
    mut precond: impl FnMut(&[f64], &mut [f64]),
    b: &[f64],
    x: &mut [f64],
    rel_tol: f64,
    restart: usize,
    max_iters: usize,
) -> KrylovReport {
    let n = b.len();
    let m = restart.max(1);
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return KrylovReport { iterations: 0, relative_residual: 0.0, converged: true };
    }
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    let mut hess = vec![vec![0.0; m]; m + 1];
    let mut cs = vec![0.0; m];
    let mut sn = vec![0.0; m];
    let mut g = vec![0.0; m + 1];
    let mut r = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut iterations = 0;

    loop {
        true_residual(&mut op, b, x, &mut r);
        let beta = norm(&r);
        if beta <= rel_tol * bnorm || iterations >= max_iters {
            break;
        }
        basis.clear();
        basis.push(r.iter().map(|v| v / beta).collect());
        g.iter_mut().for_each(|v| *v = 0.0);
        g[0] = beta;
        let mut k = 0;
        while k < m && iterations < max_iters {
            iterations += 1;
            precond(&basis[k], &mut z);
            op(&z, &mut w);
            for i in 0..=k {
                let hik = dot(&w, &basis[i]);
                hess[i][k] = hik;
                for (wj, vj) in w.iter_mut().zip(&basis[i]) {
                    *wj -= hik * vj;
                }
            }
            let wnorm = norm(&w);
            hess[k + 1][k] = wnorm;
            for i in 0..k {
                let (a, b2) = (hess[i][k], hess[i + 1][k]);
                hess[i][k] = cs[i] * a + sn[i] * b2;
                hess[i + 1][k] = -sn[i] * a + cs[i] * b2;
            }
            let (a, b2) = (hess[k][k], hess[k + 1][k]);
            let rnorm = a.hypot(b2);
            if rnorm == 0.0 {
                cs[k] = 1.0;
                sn[k] = 0.0;
            } else {
                cs[k] = a / rnorm;
                sn[k] = b2 / rnorm;
            }
            hess[k][k] = rnorm;
            hess[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k += 1;
            let breakdown = wnorm <= 1e-300;
            if !breakdown {
                basis.push(w.iter().map(|v| v / wnorm).collect());
            }
            if g[k].abs() <= rel_tol * bnorm || breakdown {
                break;
            }
        }
        // back substitution on the k x k triangle
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in i + 1..k {
                s -= hess[i][j] * y[j];
            }
            y[i] = if hess[i][i] != 0.0 { s / hess[i][i] } else { 0.0 };
        }
        let mut u = vec![0.0; n];
        for (yi, vi) in y.iter().zip(&basis) {
            for (uj, vj) in u.iter_mut().zip(vi) {
                *uj += yi * vj;
            }
        }
        precond(&u, &mut z);
        for (xi, zi) in x.iter_mut().zip(&z) {
            *xi += zi;
        }
        if g[k].abs() <= rel_tol * bnorm {
            // confirm with the true residual on the next pass
            true_residual(&mut op, b, x, &mut r);
            if norm(&r) <= rel_tol * bnorm {
                break;
            }
        }
    }
    true_residual(&mut op, b, x, &mut r);
    let relative_residual = norm(&r) / bnorm;
    KrylovReport { iterations, relative_residual, converged: relative_residual <= rel_tol }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize, diag: f64, off: f64, skew: f64) -> impl FnMut(&[f64], &mut [f64]) {
        move |x: &[f64], y: &mut [f64]| {
            for i in 0..n {
                let mut v = diag * x[i];
                if i > 0 {
                    v += (off + skew) * x[i - 1];
                }
                if i + 1 < n {
                    v += (off - skew) * x[i + 1];
                }
                y[i] = v;
            }
        }
    }

    #[test]
    fn cg_solves_spd_system() {
        let n = 50;
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).cos()).collect();
        let mut x = vec![0.0; n];
        let rep = pcg(tridiag(n, 2.5, -1.0, 0.0), |r, z| z.copy_from_slice(r), &b, &mut x, 1e-12, 200, false);
        assert!(rep.converged, "{rep:?}");
        let mut ax = vec![0.0; n];
        tridiag(n, 2.5, -1.0, 0.0)(&x, &mut ax);
        for (a, bb) in ax.iter().zip(&b) {
            assert!((a - bb).abs() < 1e-10);
        }
    }

    #[test]
    fn gmres_solves_nonsymmetric_system() {
        let n = 60;
        let b: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64).sin()).collect();
        let mut x = vec![0.0; n];
        let rep = gmres(tridiag(n, 3.0, -1.0, 0.4), |r, z| z.copy_from_slice(r), &b, &mut x, 1e-12, 10, 500);
        assert!(rep.converged, "{rep:?}");
        assert!(rep.relative_residual <= 1e-12);
    }

    #[test]
    fn gmres_with_jacobi_preconditioner() {
        let n = 40;
        let diag: Vec<f64> = (0..n).map(|i| 1.0 + 100.0 * i as f64).collect();
        let d2 = diag.clone();
        let op = move |x: &[f64], y: &mut [f64]| {
            for i in 0..n {
                y[i] = d2[i] * x[i] + if i > 0 { 0.3 * x[i - 1] } else { 0.0 };
            }
        };
        let b = vec![1.0; n];
        let mut x = vec![0.0; n];
        let rep = gmres(op, |r, z| {
            for i in 0..n {
                z[i] = r[i] / diag[i];
            }
        }, &b, &mut x, 1e-12, 30, 100);
        assert!(rep.converged && rep.iterations < 15, "{rep:?}");
    }
}
