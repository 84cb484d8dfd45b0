//! Small dense linear algebra kernels: Cholesky, Householder least squares and
//! a cyclic Jacobi eigensolver. Problem sizes in this crate are tiny (tens of
//! columns), so clarity wins over blocking.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

fn check_square<T: Scalar>(a: &ArrayView2<T>, what: &str) -> Result<usize> {
    let (r, c) = a.dim();
    if r != c {
        return Err(Error::Shape(format!("{what}: expected square matrix, got {r}x{c}")));
    }
    Ok(r)
}

/// Lower-triangular factor `L` with `a = L Lᵀ`.
///
/// Fails with a conditioning error when a pivot is not safely positive
/// relative to the largest diagonal entry.
pub fn cholesky<T: Scalar>(a: ArrayView2<T>) -> Result<Array2<T>> {
    let n = check_square(&a, "cholesky")?;
    let scale = a.diag().iter().fold(T::zero(), |m, &v| m.max(v.abs()));
    let tol = T::epsilon() * T::from_usize_lossy(n.max(1)) * T::lit(16.0) * scale;
    let mut l = Array2::<T>::zeros((n, n));
    for j in 0..n {
        let mut d = a[[j, j]];
        for k in 0..j {
            d = d - l[[j, k]] * l[[j, k]];
        }
        if d.is_nan() || d <= tol || scale == T::zero() {
            return Err(Error::Conditioning(format!(
                "matrix is singular or not positive definite (pivot {j} = {d:e})"
            )));
        }
        let d = d.sqrt();
        l[[j, j]] = d;
        for i in (j + 1)..n {
            let mut v = a[[i, j]];
            for k in 0..j {
                v = v - l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = v / d;
        }
    }
    Ok(l)
}

/// Solves `L Lᵀ x = b` given the Cholesky factor.
pub fn cholesky_solve<T: Scalar>(l: ArrayView2<T>, b: ArrayView1<T>) -> Array1<T> {
    let n = l.nrows();
    let mut y = b.to_owned();
    for i in 0..n {
        let mut v = y[i];
        for k in 0..i {
            v = v - l[[i, k]] * y[k];
        }
        y[i] = v / l[[i, i]];
    }
    for i in (0..n).rev() {
        let mut v = y[i];
        for k in (i + 1)..n {
            v = v - l[[k, i]] * y[k];
        }
        y[i] = v / l[[i, i]];
    }
    y
}

/// Solves the symmetric positive definite system `a x = b`.
pub fn spd_solve<T: Scalar>(a: ArrayView2<T>, b: ArrayView1<T>) -> Result<Array1<T>> {
    if a.nrows() != b.len() {
        return Err(Error::Shape(format!(
            "spd_solve: {}x{} system with rhs of length {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    let l = cholesky(a)?;
    Ok(cholesky_solve(l.view(), b))
}

/// Inverse of a symmetric positive definite matrix.
pub fn spd_inverse<T: Scalar>(a: ArrayView2<T>) -> Result<Array2<T>> {
    let n = check_square(&a, "spd_inverse")?;
    let l = cholesky(a)?;
    let mut inv = Array2::<T>::zeros((n, n));
    let mut e = Array1::<T>::zeros(n);
    for j in 0..n {
        e.fill(T::zero());
        e[j] = T::one();
        inv.column_mut(j).assign(&cholesky_solve(l.view(), e.view()));
    }
    Ok(inv)
}

/// Least squares `min ‖a x − b‖₂` by Householder QR.
///
/// Requires full column rank; a numerically rank-deficient design is a
/// conditioning error.
pub fn lstsq<T: Scalar>(a: ArrayView2<T>, b: ArrayView1<T>) -> Result<Array1<T>> {
    let (m, n) = a.dim();
    if b.len() != m {
        return Err(Error::Shape(format!("lstsq: {m}x{n} design with response of length {}", b.len())));
    }
    if m < n {
        return Err(Error::Conditioning(format!("lstsq: underdetermined system ({m} rows, {n} columns)")));
    }
    let mut r = a.to_owned();
    let mut qtb = b.to_owned();
    let col_scale = (0..n).map(|j| r.column(j).iter().map(|&v| v * v).sum::<T>().sqrt()).fold(T::zero(), T::max);
    for k in 0..n {
        let norm = r.slice(s![k.., k]).iter().map(|&v| v * v).sum::<T>().sqrt();
        if norm <= T::epsilon() * T::from_usize_lossy(m) * col_scale || norm == T::zero() {
            return Err(Error::Conditioning(format!("lstsq: design is rank deficient at column {k}")));
        }
        let alpha = if r[[k, k]] > T::zero() { -norm } else { norm };
        let mut v = r.slice(s![k.., k]).to_owned();
        v[0] = v[0] - alpha;
        let vnorm2 = v.iter().map(|&x| x * x).sum::<T>();
        if vnorm2 > T::zero() {
            let two = T::lit(2.0);
            for j in k..n {
                let dot = v.iter().zip(r.slice(s![k.., j]).iter()).map(|(&x, &y)| x * y).sum::<T>();
                let f = two * dot / vnorm2;
                let mut col = r.slice_mut(s![k.., j]);
                col.zip_mut_with(&v, |c, &vi| *c = *c - f * vi);
            }
            let dot = v.iter().zip(qtb.slice(s![k..]).iter()).map(|(&x, &y)| x * y).sum::<T>();
            let f = two * dot / vnorm2;
            qtb.slice_mut(s![k..]).zip_mut_with(&v, |c, &vi| *c = *c - f * vi);
        }
    }
    let mut x = Array1::<T>::zeros(n);
    for i in (0..n).rev() {
        let mut v = qtb[i];
        for j in (i + 1)..n {
            v = v - r[[i, j]] * x[j];
        }
        x[i] = v / r[[i, i]];
    }
    Ok(x)
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order and the matching eigenvectors as
/// columns.
pub fn sym_eigen<T: Scalar>(a: ArrayView2<T>) -> Result<(Array1<T>, Array2<T>)> {
    let n = check_square(&a, "sym_eigen")?;
    let mut m = a.to_owned();
    let mut v = Array2::<T>::eye(n);
    let total: T = m.iter().map(|&x| x * x).sum();
    let tiny = T::epsilon() * T::epsilon() * total;
    for _sweep in 0..100 {
        let mut off = T::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                off = off + m[[p, q]] * m[[p, q]];
            }
        }
        if off <= tiny || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                if apq == T::zero() {
                    continue;
                }
                let theta = (m[[q, q]] - m[[p, p]]) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[[i, i]].partial_cmp(&m[[j, j]]).unwrap_or(std::cmp::Ordering::Equal));
    let vals = Array1::from_iter(order.iter().map(|&i| m[[i, i]]));
    let vecs = v.select(Axis(1), &order);
    Ok((vals, vecs))
}

/// Minimum-norm least squares `min ‖a X − b‖_F` for a matrix right-hand side,
/// via the pseudo-inverse of the Gram matrix. Directions whose Gram eigenvalue
/// falls below `rel_tol · λ_max` are dropped.
pub fn pinv_lstsq<T: Scalar>(a: ArrayView2<T>, b: ArrayView2<T>, rel_tol: T) -> Result<Array2<T>> {
    if a.nrows() != b.nrows() {
        return Err(Error::Shape(format!("pinv_lstsq: design has {} rows, response has {}", a.nrows(), b.nrows())));
    }
    let gram = a.t().dot(&a);
    let atb = a.t().dot(&b);
    let (vals, vecs) = sym_eigen(gram.view())?;
    let top = vals.iter().fold(T::zero(), |m, &v| m.max(v));
    let mut proj = vecs.t().dot(&atb);
    for (i, mut row) in proj.outer_iter_mut().enumerate() {
        let lam = vals[i];
        if top > T::zero() && lam > rel_tol * top {
            row.mapv_inplace(|x| x / lam);
        } else {
            row.fill(T::zero());
        }
    }
    Ok(vecs.dot(&proj))
}
