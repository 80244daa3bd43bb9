//! Dense linear-algebra helpers shared by the physics modules: Hermitian
//! eigensolves (LAPACK), the scaling-and-squaring matrix exponential, and
//! divided differences of `E ↦ e^{−βE}` used by the time-ordered
//! perturbation integrals.

use crate::error::{CoreError, Result};
use crate::C64;
use ndarray::{Array1, Array2};
use ndarray_linalg::{EigValsh, Eigh, Solve, UPLO};

/// Eigenvalues and eigenvectors of a Hermitian matrix (columns of the
/// returned matrix are the eigenvectors, eigenvalues ascending).
///
/// The backend diagonalizes the row-major array as its transpose, so the
/// returned vectors come out conjugated; undo that here so that
/// `a · v_k = λ_k v_k` holds for the columns.
pub fn eigh(a: &Array2<C64>) -> Result<(Array1<f64>, Array2<C64>)> {
    let (vals, mut vecs) =
        a.eigh(UPLO::Lower).map_err(|e| CoreError::Numerical(format!("eigh: {e}")))?;
    vecs.mapv_inplace(|v| v.conj());
    Ok((vals, vecs))
}

/// Eigenvalues only.
pub fn eigvalsh(a: &Array2<C64>) -> Result<Array1<f64>> {
    a.eigvalsh(UPLO::Lower).map_err(|e| CoreError::Numerical(format!("eigvalsh: {e}")))
}

/// `‖A − A†‖_max`.
pub fn hermiticity_defect(a: &Array2<C64>) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

/// `e^{z·H}` for Hermitian `H` via its eigendecomposition.
pub fn expm_hermitian(h: &Array2<C64>, z: C64) -> Result<Array2<C64>> {
    let (vals, vecs) = eigh(h)?;
    let n = h.nrows();
    let mut scaled = vecs.clone();
    for (k, col) in scaled.columns_mut().into_iter().enumerate() {
        let f = (z * vals[k]).exp();
        let mut col = col;
        col.mapv_inplace(|v| v * f);
    }
    let mut out = Array2::<C64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..n {
                acc += scaled[(i, k)] * vecs[(j, k)].conj();
            }
            out[(i, j)] = acc;
        }
    }
    Ok(out)
}

fn one_norm(a: &Array2<C64>) -> f64 {
    let mut best = 0.0f64;
    for j in 0..a.ncols() {
        let s: f64 = a.column(j).iter().map(|v| v.norm()).sum();
        best = best.max(s);
    }
    best
}

fn eye(n: usize) -> Array2<C64> {
    Array2::from_diag(&Array1::from_elem(n, C64::new(1.0, 0.0)))
}

/// Matrix exponential `e^A` for a general complex square matrix by Padé-13
/// scaling and squaring.
pub fn expm(a: &Array2<C64>) -> Result<Array2<C64>> {
    const THETA13: f64 = 5.371_920_351_148_152;
    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    let n = a.nrows();
    if n != a.ncols() {
        return Err(CoreError::Numerical("expm requires a square matrix".into()));
    }
    let norm = one_norm(a);
    let s = if norm > THETA13 { (norm / THETA13).log2().ceil() as i32 } else { 0 };
    let scale = C64::new(0.5f64.powi(s), 0.0);
    let a1 = a.mapv(|v| v * scale);

    let a2 = a1.dot(&a1);
    let a4 = a2.dot(&a2);
    let a6 = a2.dot(&a4);
    let id = eye(n);

    let mut w1 = a6.mapv(|v| v * B[13]);
    w1 += &a4.mapv(|v| v * B[11]);
    w1 += &a2.mapv(|v| v * B[9]);
    let mut w2 = a6.mapv(|v| v * B[7]);
    w2 += &a4.mapv(|v| v * B[5]);
    w2 += &a2.mapv(|v| v * B[3]);
    w2 += &id.mapv(|v| v * B[1]);
    let w = a6.dot(&w1) + &w2;
    let u = a1.dot(&w);

    let mut z1 = a6.mapv(|v| v * B[12]);
    z1 += &a4.mapv(|v| v * B[10]);
    z1 += &a2.mapv(|v| v * B[8]);
    let mut z2 = a6.mapv(|v| v * B[6]);
    z2 += &a4.mapv(|v| v * B[4]);
    z2 += &a2.mapv(|v| v * B[2]);
    z2 += &id.mapv(|v| v * B[0]);
    let v = a6.dot(&z1) + &z2;

    // (V − U) X = (V + U)
    let lhs = &v - &u;
    let rhs = &v + &u;
    let mut x = Array2::<C64>::zeros((n, n));
    for j in 0..n {
        let col = rhs.column(j).to_owned();
        let sol = lhs
            .solve(&col)
            .map_err(|e| CoreError::Numerical(format!("expm solve: {e}")))?;
        x.column_mut(j).assign(&sol);
    }
    for _ in 0..s {
        x = x.dot(&x);
    }
    Ok(x)
}

/// Divided difference `f[e_0, …, e_n]` of `f(E) = e^{−βE}`, evaluated by the
/// Opitz formula: the `(0, n)` entry of `exp(−β J)` with `J` the upper
/// bidiagonal matrix carrying the nodes. This equals the time-ordered simplex
/// integral `∫_{0≤s_1≤…≤s_n≤β} e^{−s_1 e_0} e^{−(s_2−s_1) e_1} ⋯
/// e^{−(β−s_n) e_n} ds`.
pub fn exp_divided_difference(beta: f64, energies: &[f64]) -> Result<f64> {
    let n = energies.len();
    if n == 0 {
        return Err(CoreError::Numerical("divided difference needs ≥ 1 node".into()));
    }
    if n == 1 {
        return Ok((-beta * energies[0]).exp());
    }
    // Shift by the minimum to keep the exponential bounded, restore at the end.
    let e0 = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut j = Array2::<C64>::zeros((n, n));
    for (i, &e) in energies.iter().enumerate() {
        j[(i, i)] = C64::new(-beta * (e - e0), 0.0);
        if i + 1 < n {
            j[(i, i + 1)] = C64::new(1.0, 0.0);
        }
    }
    let m = expm(&j)?;
    Ok(m[(0, n - 1)].re * beta.powi(n as i32 - 1) * (-beta * e0).exp())
}
