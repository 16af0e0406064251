//! Dense linear-algebra helpers shared by the physics modules.
//!
//! Hermitian eigenproblems are solved one connected component at a time, so
//! block-diagonal and diagonal inputs keep exact zeros between blocks. Real
//! inputs take the real symmetric solver.

use std::collections::VecDeque;

use nalgebra::linalg::{Schur, SymmetricEigen};
use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type RMatrix = DMatrix<f64>;

const MAX_SWEEPS_PER_DIM: usize = 1000;

pub fn max_abs(m: &RMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

pub fn max_abs_c(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.norm()))
}

/// max |A - A^H|
pub fn hermitian_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn symmetric_defect(m: &RMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// max |U^H U - I|
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    let g = cmatmul(&u.adjoint(), u);
    let n = g.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - C64::new(target, 0.0)).norm());
        }
    }
    worst
}

pub fn is_real(m: &CMatrix) -> bool {
    m.iter().all(|z| z.im == 0.0)
}

pub fn real_part(m: &CMatrix) -> RMatrix {
    m.map(|z| z.re)
}

pub fn imag_part(m: &CMatrix) -> RMatrix {
    m.map(|z| z.im)
}

pub fn complexify(m: &RMatrix) -> CMatrix {
    m.map(|x| C64::new(x, 0.0))
}

fn recombine(re: RMatrix, im: RMatrix) -> CMatrix {
    re.zip_map(&im, C64::new)
}

/// Complex product routed through the real GEMM kernel.
pub fn cmatmul(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (a_real, b_real) = (is_real(a), is_real(b));
    let ar = real_part(a);
    let br = real_part(b);
    match (a_real, b_real) {
        (true, true) => complexify(&(ar * br)),
        (true, false) => {
            let bi = imag_part(b);
            recombine(&ar * br, ar * bi)
        }
        (false, true) => {
            let ai = imag_part(a);
            recombine(&ar * &br, ai * br)
        }
        (false, false) => {
            let ai = imag_part(a);
            let bi = imag_part(b);
            let re = &ar * &br - &ai * &bi;
            let im = ar * bi + ai * br;
            recombine(re, im)
        }
    }
}

/// Connected components of the graph on `0..n` with edges given by `edge(i, j)`.
/// Components are returned with sorted members, ordered by smallest member.
pub fn components(n: usize, edge: impl Fn(usize, usize) -> bool) -> Vec<Vec<usize>> {
    let mut label = vec![usize::MAX; n];
    let mut out = Vec::new();
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        let id = out.len();
        let mut members = vec![start];
        label[start] = id;
        let mut queue = VecDeque::from([start]);
        while let Some(i) = queue.pop_front() {
            #[allow(clippy::needless_range_loop)]
            for j in 0..n {
                if label[j] == usize::MAX && (edge(i, j) || edge(j, i)) {
                    label[j] = id;
                    members.push(j);
                    queue.push_back(j);
                }
            }
        }
        members.sort_unstable();
        out.push(members);
    }
    out
}

fn eigh_real_raw(m: RMatrix) -> Result<(DVector<f64>, RMatrix)> {
    let n = m.nrows();
    let eig = SymmetricEigen::try_new(m, f64::EPSILON, MAX_SWEEPS_PER_DIM * n.max(1))
        .ok_or(Error::ConvergenceFailure("real symmetric QR"))?;
    Ok((eig.eigenvalues, eig.eigenvectors))
}

/// Real symmetric eigendecomposition with eigenvalues ascending.
pub fn eigh_real(m: &RMatrix) -> Result<(Vec<f64>, RMatrix)> {
    let n = m.nrows();
    let sym = (m + m.transpose()) * 0.5;
    let (vals, vecs) = eigh_real_raw(sym)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    let values = order.iter().map(|&i| vals[i]).collect();
    let mut sorted = RMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        sorted.set_column(dst, &vecs.column(src));
    }
    Ok((values, sorted))
}

/// Hermitian eigendecomposition, eigenvalues ascending, eigenvectors as columns.
///
/// The support graph of `m` (exact nonzeros) is split into connected
/// components and each component is solved on its own.
pub fn eigh(m: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let n = m.nrows();
    let comps = components(n, |i, j| m[(i, j)] != C64::new(0.0, 0.0));
    let mut pairs: Vec<(f64, DVector<C64>)> = Vec::with_capacity(n);
    for comp in &comps {
        let d = comp.len();
        if d == 1 {
            let i = comp[0];
            let mut v = DVector::zeros(n);
            v[i] = C64::new(1.0, 0.0);
            pairs.push((m[(i, i)].re, v));
            continue;
        }
        let sub = CMatrix::from_fn(d, d, |a, b| {
            let (i, j) = (comp[a], comp[b]);
            (m[(i, j)] + m[(j, i)].conj()) * 0.5
        });
        let (vals, vecs) = if is_real(&sub) {
            let (vals, vecs) = eigh_real_raw(real_part(&sub))?;
            (vals, complexify(&vecs))
        } else {
            let eig = SymmetricEigen::try_new(sub, f64::EPSILON, MAX_SWEEPS_PER_DIM * d)
                .ok_or(Error::ConvergenceFailure("Hermitian QR"))?;
            (eig.eigenvalues, eig.eigenvectors)
        };
        for c in 0..d {
            let mut v = DVector::zeros(n);
            for (a, &i) in comp.iter().enumerate() {
                v[i] = vecs[(a, c)];
            }
            pairs.push((vals[c], v));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let values = pairs.iter().map(|p| p.0).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (c, (_, v)) in pairs.iter().enumerate() {
        vectors.set_column(c, v);
    }
    Ok((values, vectors))
}

/// Index ranges of runs of consecutive (sorted) values whose gaps are `<= tol`.
pub fn clusters(sorted: &[f64], tol: f64) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=sorted.len() {
        if i == sorted.len() || (sorted[i] - sorted[i - 1]).abs() > tol {
            out.push(start..i);
            start = i;
        }
    }
    out
}

/// Modified Gram-Schmidt inside each degenerate cluster.
pub fn orthonormalize_clusters(values: &[f64], vectors: &mut CMatrix, tol: f64) {
    for range in clusters(values, tol) {
        if range.len() < 2 {
            continue;
        }
        for c in range.clone() {
            let mut v = vectors.column(c).into_owned();
            for p in range.start..c {
                let q = vectors.column(p);
                let proj = q.dotc(&v);
                v -= q * proj;
            }
            let norm = v.norm();
            vectors.set_column(c, &(v / C64::new(norm, 0.0)));
        }
    }
}

/// exp(t S) for a real symmetric S through its eigendecomposition.
pub fn expm_symmetric(s: &RMatrix, t: f64) -> Result<RMatrix> {
    let (vals, vecs) = eigh_real(s)?;
    let scaled = RMatrix::from_fn(vecs.nrows(), vecs.ncols(), |i, j| vecs[(i, j)] * (t * vals[j]).exp());
    Ok(scaled * vecs.transpose())
}

/// W diag(f(lambda)) W^T
pub fn spectral_function(values: &[f64], vectors: &RMatrix, f: impl Fn(f64) -> f64) -> RMatrix {
    let weights: Vec<f64> = values.iter().map(|&l| f(l)).collect();
    let scaled = RMatrix::from_fn(vectors.nrows(), vectors.ncols(), |i, j| vectors[(i, j)] * weights[j]);
    scaled * vectors.transpose()
}

/// Principal logarithm of a unitary matrix through its complex Schur form.
pub fn unitary_log(u: &CMatrix) -> Result<CMatrix> {
    let n = u.nrows();
    let schur = Schur::try_new(u.clone(), f64::EPSILON, MAX_SWEEPS_PER_DIM * n.max(1))
        .ok_or(Error::ConvergenceFailure("complex Schur"))?;
    let (q, t) = schur.unpack();
    let mut logs = Vec::with_capacity(n);
    for i in 0..n {
        let z = t[(i, i)];
        if z.re < 0.0 && z.im.abs() < 1e-9 {
            return Err(Error::BranchFailure(format!("{z}")));
        }
        logs.push(z.ln());
    }
    let scaled = CMatrix::from_fn(n, n, |i, j| q[(i, j)] * logs[j]);
    Ok(cmatmul(&scaled, &q.adjoint()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn components_of_block_pattern() {
        let m = RMatrix::from_row_slice(4, 4, &[1., 0., 0., 1., 0., 1., 0., 0., 0., 0., 1., 0., 1., 0., 0., 1.]);
        let comps = components(4, |i, j| m[(i, j)] != 0.0);
        assert_eq!(comps, vec![vec![0, 3], vec![1], vec![2]]);
    }

    #[test]
    fn cmatmul_matches_generic_product() {
        let a = CMatrix::from_fn(3, 3, |i, j| C64::new(i as f64 - j as f64, (i * j) as f64 * 0.5));
        let b = CMatrix::from_fn(3, 3, |i, j| C64::new(1.0 + j as f64, i as f64 - 0.3));
        let diff = cmatmul(&a, &b) - &a * &b;
        assert!(max_abs_c(&diff) < 1e-13);
    }

    #[test]
    fn unitary_log_recovers_generator() {
        let h = CMatrix::from_row_slice(2, 2, &[C64::new(0.3, 0.0), C64::new(0.1, -0.2), C64::new(0.1, 0.2), C64::new(-0.5, 0.0)]);
        let (vals, vecs) = eigh(&h).unwrap();
        let u = {
            let scaled = CMatrix::from_fn(2, 2, |i, j| vecs[(i, j)] * C64::new(0.0, vals[j]).exp());
            cmatmul(&scaled, &vecs.adjoint())
        };
        let log = unitary_log(&u).unwrap();
        let recovered = log * C64::new(0.0, -1.0);
        assert!(max_abs_c(&(recovered - h)) < 1e-12);
    }

    #[test]
    fn unitary_log_rejects_minus_one() {
        let u = CMatrix::from_diagonal(&DVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(-1.0, 0.0)]));
        assert!(matches!(unitary_log(&u), Err(Error::BranchFailure(_))));
    }

    #[test]
    fn expm_of_zero_is_identity() {
        let e = expm_symmetric(&RMatrix::zeros(3, 3), 2.0).unwrap();
        assert!(max_abs(&(e - RMatrix::identity(3, 3))) < 1e-15);
    }
}
