#![allow(dead_code)]

use nalgebra::DMatrix;

/// Adaptive Simpson quadrature of `f` on `[a, b]`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn step<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    // split first so narrow features are not skipped by the initial estimate
    let pieces = 64;
    let h = (b - a) / pieces as f64;
    (0..pieces)
        .map(|k| {
            let (lo, hi) = (a + k as f64 * h, a + (k + 1) as f64 * h);
            let (fa, fm, fb) = (f(lo), f(0.5 * (lo + hi)), f(hi));
            let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
            step(f, lo, hi, fa, fm, fb, whole, tol / pieces as f64, 40)
        })
        .sum()
}

/// Hermite function from the unnormalized physicists' recurrence
/// `H_{n+1} = 2x H_n - 2n H_{n-1}`; fine for moderate `n` and `|x|`.
pub fn hermite_oracle(n: usize, x: f64) -> f64 {
    let (mut h0, mut h1) = (1.0f64, 2.0 * x);
    let hn = if n == 0 {
        h0
    } else {
        for k in 1..n {
            let h2 = 2.0 * x * h1 - 2.0 * k as f64 * h0;
            h0 = h1;
            h1 = h2;
        }
        h1
    };
    let mut norm = std::f64::consts::PI.sqrt();
    for k in 1..=n {
        norm *= 2.0 * k as f64;
    }
    hn * (-x * x / 2.0).exp() / norm.sqrt()
}

/// Top `count` eigenvalues of a symmetric PSD matrix by block subspace
/// iteration with Rayleigh-Ritz on a modified Gram-Schmidt basis.
pub fn subspace_top_eigenvalues(a: &DMatrix<f64>, count: usize, block: usize, iters: usize) -> Vec<f64> {
    let n = a.nrows();
    // deterministic, well-mixed start
    let mut q = DMatrix::from_fn(n, block, |i, j| ((i * 7919 + j * 104729) % 1009) as f64 / 1009.0 - 0.5);
    orthonormalize(&mut q);
    for _ in 0..iters {
        q = a * &q;
        orthonormalize(&mut q);
    }
    let t = q.transpose() * a * &q;
    let ritz = jacobi_eigenvalues(&t);
    ritz.into_iter().take(count).collect()
}

fn orthonormalize(q: &mut DMatrix<f64>) {
    for j in 0..q.ncols() {
        for _ in 0..2 {
            for k in 0..j {
                let d = q.column(j).dot(&q.column(k));
                let ck = q.column(k).clone_owned();
                q.column_mut(j).axpy(-d, &ck, 1.0);
            }
        }
        let nrm = q.column(j).norm();
        q.column_mut(j).scale_mut(1.0 / nrm);
    }
}

/// Cyclic Jacobi eigenvalues of a small symmetric matrix, descending.
pub fn jacobi_eigenvalues(t: &DMatrix<f64>) -> Vec<f64> {
    let mut a = t.clone();
    let n = a.nrows();
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|(i, j)| i != j).map(|(i, j)| a[(i, j)].powi(2)).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for r in p + 1..n {
                if a[(p, r)].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(r, r)] - a[(p, p)]) / (2.0 * a[(p, r)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akr) = (a[(k, p)], a[(k, r)]);
                    a[(k, p)] = c * akp - s * akr;
                    a[(k, r)] = s * akp + c * akr;
                }
                for k in 0..n {
                    let (apk, ark) = (a[(p, k)], a[(r, k)]);
                    a[(p, k)] = c * apk - s * ark;
                    a[(r, k)] = s * apk + c * ark;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    ev.sort_by(|x, y| y.total_cmp(x));
    ev
}

/// `sum_i f_i g_i w_i` written out independently of the library helpers.
pub fn quad(f: &[f64], g: &[f64], w: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..w.len() {
        s += f[i] * g[i] * w[i];
    }
    s
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
