//! Small dense helpers over row-major `d x d` slices.
//!
//! Contextual policies run these in their inner loop with `d` in the tens at
//! most, so plain loops beat a general matrix library here.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `out = m * v` for a `d x d` matrix `m`.
pub fn mat_vec_into(m: &[f64], v: &[f64], out: &mut [f64]) {
    let d = v.len();
    for (i, o) in out.iter_mut().enumerate() {
        *o = dot(&m[i * d..(i + 1) * d], v);
    }
}

pub fn mat_vec(m: &[f64], v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    mat_vec_into(m, v, &mut out);
    out
}

/// `out = v^T m`, i.e. `m^T v`.
pub fn vec_mat_into(v: &[f64], m: &[f64], out: &mut [f64]) {
    let d = v.len();
    out.iter_mut().for_each(|o| *o = 0.0);
    for (i, &vi) in v.iter().enumerate() {
        if vi == 0.0 {
            continue;
        }
        for (o, &mij) in out.iter_mut().zip(&m[i * d..(i + 1) * d]) {
            *o += vi * mij;
        }
    }
}

/// `m += scale * a b^T`.
pub fn add_outer(m: &mut [f64], scale: f64, a: &[f64], b: &[f64]) {
    let d = b.len();
    for (i, &ai) in a.iter().enumerate() {
        let s = scale * ai;
        if s == 0.0 {
            continue;
        }
        for (mij, &bj) in m[i * d..(i + 1) * d].iter_mut().zip(b) {
            *mij += s * bj;
        }
    }
}

/// `a * b` for `d x d` matrices.
pub fn mat_mul(a: &[f64], b: &[f64], d: usize) -> Vec<f64> {
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for k in 0..d {
            let aik = a[i * d + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..d {
                out[i * d + j] += aik * b[k * d + j];
            }
        }
    }
    out
}

pub fn transpose(a: &[f64], d: usize) -> Vec<f64> {
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            out[j * d + i] = a[i * d + j];
        }
    }
    out
}

pub fn identity(d: usize) -> Vec<f64> {
    let mut m = vec![0.0; d * d];
    for i in 0..d {
        m[i * d + i] = 1.0;
    }
    m
}

/// `x^T m x`.
pub fn quad_form(m: &[f64], x: &[f64]) -> f64 {
    let d = x.len();
    x.iter()
        .enumerate()
        .map(|(i, &xi)| xi * dot(&m[i * d..(i + 1) * d], x))
        .sum()
}

/// Inverse of a symmetric positive-definite matrix via Cholesky.
/// Returns `None` when the matrix is not numerically positive definite.
pub fn spd_inverse(m: &[f64], d: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut s = m[i * d + j];
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[i * d + i] = s.sqrt();
            } else {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    // inv(L), lower triangular
    let mut li = vec![0.0; d * d];
    for i in 0..d {
        li[i * d + i] = 1.0 / l[i * d + i];
        for j in 0..i {
            let mut s = 0.0;
            for k in j..i {
                s -= l[i * d + k] * li[k * d + j];
            }
            li[i * d + j] = s / l[i * d + i];
        }
    }
    // inv(M) = inv(L)^T inv(L)
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut s = 0.0;
            for k in i..d {
                s += li[k * d + i] * li[k * d + j];
            }
            out[i * d + j] = s;
            out[j * d + i] = s;
        }
    }
    Some(out)
}

pub fn frobenius(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}
