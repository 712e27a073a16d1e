//! Small dense symmetric matrices stored row-major in slices.

/// `v^T A v`.
pub fn quad_form(a: &[f64], v: &[f64]) -> f64 {
    let n = v.len();
    let mut s = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            row += a[i * n + j] * v[j];
        }
        s += v[i] * row;
    }
    s
}

/// `w^T A^{-1} w` via an in-place Cholesky factorisation of `scratch`
/// (a copy of `A`). `None` if `A` is not positive definite.
pub fn inv_quad_form(scratch: &mut [f64], w: &[f64]) -> Option<f64> {
    let n = w.len();
    let l = scratch;
    for j in 0..n {
        let mut d = l[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if !(d > 0.0) {
            return None;
        }
        let d = d.sqrt();
        l[j * n + j] = d;
        for i in (j + 1)..n {
            let mut s = l[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / d;
        }
    }
    // forward solve L z = w; w^T A^{-1} w = |z|^2
    let mut acc = 0.0;
    let mut z = [0.0f64; 8];
    let mut zv;
    let zs: &mut [f64] = if n <= 8 {
        &mut z[..n]
    } else {
        zv = vec![0.0; n];
        &mut zv
    };
    for i in 0..n {
        let mut s = w[i];
        for k in 0..i {
            s -= l[i * n + k] * zs[k];
        }
        zs[i] = s / l[i * n + i];
        acc += zs[i] * zs[i];
    }
    Some(acc)
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn sym_eigenvalues(a: &[f64], n: usize) -> Vec<f64> {
    let mut m = a.to_vec();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |j| *j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j] * m[i * n + j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = m[k * n + p];
                    let akq = m[k * n + q];
                    m[k * n + p] = c * akp - s * akq;
                    m[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[p * n + k];
                    let aqk = m[q * n + k];
                    m[p * n + k] = c * apk - s * aqk;
                    m[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[i * n + i]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}
