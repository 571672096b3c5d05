//! Matrix-free Krylov iterations on flat `f64` vectors.

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Outcome of a Krylov solve.
#[derive(Debug, Clone)]
pub struct KrylovResult {
    pub solution: Vec<f64>,
    pub iterations: usize,
    /// Final residual norm relative to the right-hand side norm.
    pub relative_residual: f64,
    pub converged: bool,
}

/// Preconditioned conjugate gradients for a symmetric positive definite
/// operator. Stops when `|b - A x| <= tol |b|`.
pub fn pcg(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    precondition: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    x0: Vec<f64>,
    tol: f64,
    max_iter: usize,
) -> KrylovResult {
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return KrylovResult {
            solution: vec![0.0; b.len()],
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        };
    }
    let mut x = x0;
    let ax = apply(&x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let mut rel = norm(&r) / b_norm;
    if rel <= tol {
        return KrylovResult {
            solution: x,
            iterations: 0,
            relative_residual: rel,
            converged: true,
        };
    }
    let mut z = precondition(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 1..=max_iter {
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let alpha = rz / pap;
        x.iter_mut().zip(&p).for_each(|(xi, pi)| *xi += alpha * pi);
        r.iter_mut().zip(&ap).for_each(|(ri, ai)| *ri -= alpha * ai);
        rel = norm(&r) / b_norm;
        if rel <= tol {
            return KrylovResult {
                solution: x,
                iterations: it,
                relative_residual: rel,
                converged: true,
            };
        }
        z = precondition(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.iter_mut().zip(&z).for_each(|(pi, zi)| *pi = zi + beta * *pi);
    }
    KrylovResult {
        solution: x,
        iterations: max_iter,
        relative_residual: rel,
        converged: false,
    }
}

/// Restarted GMRES with right preconditioning, zero initial guess.
/// Stops when `|b - A x| <= tol |b|` or after `max_iter` inner steps.
pub fn gmres(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    precondition: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    tol: f64,
    restart: usize,
    max_iter: usize,
) -> KrylovResult {
    let n = b.len();
    let b_norm = norm(b);
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return KrylovResult {
            solution: x,
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        };
    }
    let mut total = 0;
    let mut rel = 1.0;
    let mut r = b.to_vec();
    while total < max_iter {
        let beta = norm(&r);
        rel = beta / b_norm;
        if rel <= tol {
            break;
        }
        let m = restart.min(max_iter - total);
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        let mut zs: Vec<Vec<f64>> = Vec::with_capacity(m);
        // Hessenberg matrix stored column by column.
        let mut h: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut cs: Vec<f64> = Vec::with_capacity(m);
        let mut sn: Vec<f64> = Vec::with_capacity(m);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        basis.push(r.iter().map(|v| v / beta).collect());
        let mut k_used = 0;
        for k in 0..m {
            let z = precondition(&basis[k]);
            let mut w = apply(&z);
            zs.push(z);
            let mut col = vec![0.0; k + 2];
            // modified Gram-Schmidt, two passes
            for _ in 0..2 {
                for (j, vj) in basis.iter().enumerate() {
                    let hij = dot(&w, vj);
                    col[j] += hij;
                    w.iter_mut().zip(vj).for_each(|(wi, vi)| *wi -= hij * vi);
                }
            }
            let wn = norm(&w);
            col[k + 1] = wn;
            for j in 0..k {
                let t = cs[j] * col[j] + sn[j] * col[j + 1];
                col[j + 1] = -sn[j] * col[j] + cs[j] * col[j + 1];
                col[j] = t;
            }
            let denom = col[k].hypot(col[k + 1]);
            let (c, s) = if denom == 0.0 {
                (1.0, 0.0)
            } else {
                (col[k] / denom, col[k + 1] / denom)
            };
            cs.push(c);
            sn.push(s);
            col[k] = denom;
            col[k + 1] = 0.0;
            g[k + 1] = -s * g[k];
            g[k] *= c;
            h.push(col);
            k_used = k + 1;
            total += 1;
            rel = g[k + 1].abs() / b_norm;
            if rel <= tol || wn == 0.0 || total >= max_iter {
                break;
            }
            basis.push(w.iter().map(|v| v / wn).collect());
        }
        // back substitution on the triangular factor
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut acc = g[i];
            for j in (i + 1)..k_used {
                acc -= h[j][i] * y[j];
            }
            y[i] = if h[i][i] != 0.0 { acc / h[i][i] } else { 0.0 };
        }
        for (yj, zj) in y.iter().zip(&zs) {
            x.iter_mut().zip(zj).for_each(|(xi, zi)| *xi += yj * zi);
        }
        let ax = apply(&x);
        r = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        rel = norm(&r) / b_norm;
        if rel <= tol {
            break;
        }
    }
    KrylovResult {
        solution: x,
        iterations: total,
        relative_residual: rel,
        converged: rel <= tol,
    }
}
