//! Dense linear-algebra helpers shared by the modelling modules.
//!
//! Matrices are `nalgebra::DMatrix<f64>` throughout. The matrix exponential
//! lives here because nalgebra only provides one with its `std` feature.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
#[allow(unused_imports)] // shadowed by inherent float methods when std is linked (tests)
use num_traits::Float;

use crate::error::{Error, Result};

/// Relative tolerance under which a matrix is treated as symmetric for the
/// eigendecomposition fast path.
const SYMMETRY_RTOL: f64 = 1e-14;

pub fn ensure_finite(m: &DMatrix<f64>, what: &'static str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

pub fn ensure_square(m: &DMatrix<f64>, context: &'static str) -> Result<usize> {
    if m.nrows() == m.ncols() {
        Ok(m.nrows())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected: (m.nrows(), m.nrows()),
            found: m.shape(),
        })
    }
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// Largest entrywise absolute difference.
pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).fold(0.0, |acc, (x, y)| acc.max((x - y).abs()))
}

/// `max |a_ij - a_ji|`.
pub fn symmetry_defect(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for j in 0..n {
        for i in (j + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    m.is_square() && symmetry_defect(m) <= tol
}

/// Replace `m` with `(m + mᵀ) / 2` in place.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = DMatrix::zeros(ar * br, ac * bc);
    for j in 0..ac {
        for i in 0..ar {
            let s = a[(i, j)];
            if s == 0.0 {
                continue;
            }
            out.view_mut((i * br, j * bc), (br, bc)).copy_from(&(b * s));
        }
    }
    out
}

/// `I_k ⊗ block` without materialising the identity.
pub fn block_diag_repeat(block: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let (r, c) = block.shape();
    let mut out = DMatrix::zeros(r * k, c * k);
    for b in 0..k {
        out.view_mut((b * r, b * c), (r, c)).copy_from(block);
    }
    out
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> DVector<f64> {
    let mut vals = SymmetricEigen::new(m.clone()).eigenvalues;
    vals.as_mut_slice()
        .sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    vals
}

/// Principal submatrix on the given row/column indices.
pub fn principal_submatrix(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |i, j| m[(idx[i], idx[j])])
}

fn norm1(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `exp(t·A)`.
///
/// Symmetric inputs go through an eigendecomposition, `V·diag(e^{tλ})·Vᵀ`.
/// Everything else uses scaling and squaring around a diagonal Padé
/// approximant of degree 3, 5, 7, 9 or 13 (Higham 2005), picking the lowest
/// degree whose backward-error bound covers `‖tA‖₁`.
pub fn matrix_exp(a: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    let n = ensure_square(a, "matrix_exp")?;
    if n == 0 {
        return Err(Error::invalid("matrix_exp requires n >= 1"));
    }
    ensure_finite(a, "matrix_exp input")?;
    if !t.is_finite() {
        return Err(Error::NonFinite("matrix_exp time"));
    }
    if t == 0.0 || a.iter().all(|v| *v == 0.0) {
        return Ok(DMatrix::identity(n, n));
    }

    let scale = max_abs(a);
    let out = if symmetry_defect(a) <= SYMMETRY_RTOL * scale {
        exp_symmetric(a, t)
    } else {
        exp_pade(&(a * t))?
    };
    ensure_finite(&out, "matrix_exp result")?;
    Ok(out)
}

fn exp_symmetric(a: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    let mut sym = a.clone();
    symmetrize(&mut sym);
    let eig = SymmetricEigen::new(sym);
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for (j, lambda) in eig.eigenvalues.iter().enumerate() {
        let e = (t * lambda).exp();
        scaled.column_mut(j).scale_mut(e);
    }
    let mut out = scaled * v.transpose();
    symmetrize(&mut out);
    out
}

#[allow(clippy::excessive_precision)]
const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA_13: f64 = 5.371920351148152e0;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
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

fn exp_pade(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let ident = DMatrix::<f64>::identity(n, n);
    let a_norm = norm1(a);

    for (m, theta) in THETA {
        if a_norm <= theta {
            let b: &[f64] = match m {
                3 => &B3,
                5 => &B5,
                7 => &B7,
                _ => &B9,
            };
            let (u, v) = pade_low(a, b, &ident);
            return solve_pade(&u, &v);
        }
    }

    // Degree 13 with scaling: A ← A / 2^s.
    let s = if a_norm > THETA_13 {
        (a_norm / THETA_13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let a = a * 2.0_f64.powi(-s);
    let b = &B13;
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;

    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9]);
    let u = &a * (u_inner + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &ident * b[1]);
    let v_inner = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8]);
    let v = v_inner + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &ident * b[0];

    let mut r = solve_pade(&u, &v)?;
    for _ in 0..s {
        r = &r * &r;
    }
    Ok(r)
}

/// Odd/even split of the degree-m Padé numerator for m ≤ 9.
fn pade_low(a: &DMatrix<f64>, b: &[f64], ident: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let a2 = a * a;
    let mut power = ident.clone();
    let mut u_even = ident * b[1];
    let mut v = ident * b[0];
    let degree = b.len() - 1;
    let mut k = 2;
    while k <= degree {
        power = &power * &a2;
        v += &power * b[k];
        if k < degree {
            u_even += &power * b[k + 1];
        }
        k += 2;
    }
    (a * u_even, v)
}

fn solve_pade(u: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let q = v - u;
    let p = v + u;
    q.lu()
        .solve(&p)
        .ok_or_else(|| Error::numerical("singular Padé denominator in matrix_exp"))
}
